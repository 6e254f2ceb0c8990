//! Nearest-class-mean classification in the embedded space.
//!
//! Classes are ordered by sorted label, and ties in distance resolve to the
//! earlier class, so classification is deterministic for any input.

use crate::error::{Error, Result};
use crate::keca::eig_sym;
use crate::util::dot;

/// Distance measure between an embedded probe and a class mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Sum of absolute coordinate differences.
    L1,
    /// Sum of squared coordinate differences (no square root; the argmin is
    /// the same and thresholds are calibrated against this convention).
    L2,
    /// Squared Mahalanobis distance under the pooled within-class
    /// covariance.
    Mahalanobis,
    /// Negative cosine similarity: `-⟨x, y⟩ / (‖x‖·‖y‖)`, in `[-1, 1]`,
    /// smaller = more similar.
    Cosine,
}

impl Measure {
    pub const ALL: [Measure; 4] = [Measure::L1, Measure::L2, Measure::Mahalanobis, Measure::Cosine];

    pub fn name(&self) -> &'static str {
        match self {
            Measure::L1 => "l1",
            Measure::L2 => "l2",
            Measure::Mahalanobis => "mahalanobis",
            Measure::Cosine => "cosine",
        }
    }

    pub fn parse(s: &str) -> Option<Measure> {
        match s {
            "l1" => Some(Measure::L1),
            "l2" => Some(Measure::L2),
            "mahalanobis" => Some(Measure::Mahalanobis),
            "cosine" => Some(Measure::Cosine),
            _ => None,
        }
    }
}

/// Per-class means plus a shared (regularized, inverted) covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    labels: Vec<String>,
    means: Vec<Vec<f64>>,
    dim: usize,
    cov_inverse: Vec<f64>,
}

/// Fits class statistics from embedded training samples.
///
/// The covariance pooled for the Mahalanobis measure is the within-class
/// scatter divided by `N - l` (samples minus classes). When every class has
/// exactly one sample that denominator vanishes, so the total covariance
/// about the global mean, divided by `N`, is used instead. The matrix is
/// ridge-regularized with `1e-6 · trace / dim` (floor `1e-12`) before
/// inversion, so it is invertible even when the embedding dimension exceeds
/// the sample count.
pub fn fit_classes(embeddings: &[Vec<f64>], labels: &[String]) -> Result<ClassModel> {
    if embeddings.is_empty() {
        return Err(Error::Classify {
            reason: "no training embeddings".into(),
        });
    }
    if embeddings.len() != labels.len() {
        return Err(Error::Classify {
            reason: format!("{} embeddings but {} labels", embeddings.len(), labels.len()),
        });
    }
    let dim = embeddings[0].len();
    if dim == 0 {
        return Err(Error::Classify {
            reason: "embeddings must have at least one coordinate".into(),
        });
    }
    for e in embeddings {
        if e.len() != dim {
            return Err(Error::Classify {
                reason: format!("embedding lengths disagree: {} vs {dim}", e.len()),
            });
        }
    }

    let mut class_labels: Vec<String> = labels.to_vec();
    class_labels.sort();
    class_labels.dedup();
    let class_of = |label: &str| class_labels.iter().position(|l| l == label).unwrap();

    let n = embeddings.len();
    let l = class_labels.len();
    let mut means = vec![vec![0.0; dim]; l];
    let mut counts = vec![0usize; l];
    for (x, label) in embeddings.iter().zip(labels) {
        let c = class_of(label);
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(x) {
            *m += v;
        }
    }
    for (mean, &count) in means.iter_mut().zip(&counts) {
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
    }

    // Pooled scatter (upper triangle, then mirrored for exact symmetry).
    let mut scatter = vec![0.0; dim * dim];
    if n > l {
        for (x, label) in embeddings.iter().zip(labels) {
            let mean = &means[class_of(label)];
            accumulate_outer(&mut scatter, x, mean, dim);
        }
        let denom = (n - l) as f64;
        for v in scatter.iter_mut() {
            *v /= denom;
        }
    } else {
        let mut global = vec![0.0; dim];
        for x in embeddings {
            for (g, v) in global.iter_mut().zip(x) {
                *g += v;
            }
        }
        for g in global.iter_mut() {
            *g /= n as f64;
        }
        for x in embeddings {
            accumulate_outer(&mut scatter, x, &global, dim);
        }
        for v in scatter.iter_mut() {
            *v /= n as f64;
        }
    }
    mirror_upper(&mut scatter, dim);

    let trace: f64 = (0..dim).map(|i| scatter[i * dim + i]).sum();
    let mut ridge = 1e-6 * trace / dim as f64;
    if !(ridge > 0.0) {
        ridge = 1e-12;
    }
    for i in 0..dim {
        scatter[i * dim + i] += ridge;
    }

    let cov_inverse = invert_spd(&scatter, dim)?;
    Ok(ClassModel {
        labels: class_labels,
        means,
        dim,
        cov_inverse,
    })
}

fn accumulate_outer(scatter: &mut [f64], x: &[f64], mean: &[f64], dim: usize) {
    for i in 0..dim {
        let di = x[i] - mean[i];
        for j in i..dim {
            scatter[i * dim + j] += di * (x[j] - mean[j]);
        }
    }
}

fn mirror_upper(a: &mut [f64], dim: usize) {
    for i in 0..dim {
        for j in i + 1..dim {
            a[j * dim + i] = a[i * dim + j];
        }
    }
}

/// Inverse of a symmetric positive definite matrix through the
/// eigendecomposition: `A⁻¹ = Σ λᵢ⁻¹ eᵢ eᵢᵀ`, assembled symmetrically.
fn invert_spd(a: &[f64], dim: usize) -> Result<Vec<f64>> {
    let dec = eig_sym(a, dim)?;
    if let Some(&bad) = dec.eigenvalues.iter().find(|l| **l <= 0.0) {
        return Err(Error::Classify {
            reason: format!("covariance not positive definite (eigenvalue {bad})"),
        });
    }
    let mut inv = vec![0.0; dim * dim];
    for (lambda, vec) in dec.eigenvalues.iter().zip(&dec.eigenvectors) {
        for i in 0..dim {
            let w = vec[i] / lambda;
            for j in i..dim {
                inv[i * dim + j] += w * vec[j];
            }
        }
    }
    mirror_upper(&mut inv, dim);
    Ok(inv)
}

impl ClassModel {
    /// Class labels in their fixed (sorted) order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self, class: usize) -> &[f64] {
        &self.means[class]
    }

    /// Distance between two embedded points under one measure. The model
    /// supplies the covariance inverse for `Mahalanobis`; the other measures
    /// ignore the model state.
    pub fn distance(&self, measure: Measure, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::Classify {
                reason: format!(
                    "distance inputs of length {} and {} for a {}-dimensional model",
                    x.len(),
                    y.len(),
                    self.dim
                ),
            });
        }
        match measure {
            Measure::L1 => Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()),
            Measure::L2 => Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()),
            Measure::Mahalanobis => {
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                let mut acc = 0.0;
                for i in 0..self.dim {
                    acc += d[i] * dot(&self.cov_inverse[i * self.dim..(i + 1) * self.dim], &d);
                }
                Ok(acc)
            }
            Measure::Cosine => {
                let nx = dot(x, x).sqrt();
                let ny = dot(y, y).sqrt();
                if nx == 0.0 || ny == 0.0 {
                    return Err(Error::Classify {
                        reason: "cosine distance undefined for a zero vector".into(),
                    });
                }
                Ok(-dot(x, y) / (nx * ny))
            }
        }
    }

    /// Nearest class mean: returns `(class index, distance)`. Ties go to the
    /// lower index, i.e. the lexicographically smaller label.
    pub fn classify(&self, measure: Measure, x: &[f64]) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (c, mean) in self.means.iter().enumerate() {
            let d = self.distance(measure, x, mean)?;
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        Ok(best.expect("at least one class"))
    }
}
