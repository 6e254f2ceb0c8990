//! Kernel subspace model where axes are chosen by entropy contribution.
//!
//! Classical kernel PCA keeps the leading eigenvalues of the Gram matrix.
//! Here each eigenpair (λᵢ, eᵢ) is scored by how much of the data's Parzen
//! density mass it explains,
//!
//! ```text
//! γᵢ = λᵢ · (eᵢᵀ 1)² / N²,
//! ```
//!
//! and the axes with the largest γᵢ are kept. The γᵢ sum to the plug-in
//! density estimate `V = (1/N²) Σᵢⱼ K(xᵢ, xⱼ)`, whose negative logarithm is
//! the collision entropy of the sample, so selection by γ keeps the
//! directions that carry entropy rather than raw variance. An eigenpair with
//! λᵢ > 0 but eᵢᵀ1 = 0 contributes nothing and is skipped even when its
//! eigenvalue is large — this is where the two rankings genuinely diverge.

mod jacobi;
mod model_file;

pub use jacobi::{eig_sym, EigenDecomposition};
pub use model_file::{load_model, save_model};

use crate::error::{Error, Result};
use crate::kernel::{kernel_vector, KernelMatrix, KernelSpec};
use crate::util::{compensated_sum, dot};

/// Plug-in density and entropy estimate of a sample, from its Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenyiEstimate {
    /// `(1/N²) Σᵢⱼ Kᵢⱼ` — the mean kernel value.
    pub parzen_mean: f64,
    /// `-ln(parzen_mean)`; `None` when the mean is not positive, which can
    /// happen for indefinite kernels.
    pub entropy: Option<f64>,
}

/// Density and entropy estimate from a Gram matrix.
pub fn renyi_estimate(k: &KernelMatrix) -> RenyiEstimate {
    let n = k.n() as f64;
    let parzen_mean = compensated_sum(k.values().iter().copied()) / (n * n);
    RenyiEstimate {
        parzen_mean,
        entropy: (parzen_mean > 0.0).then(|| -parzen_mean.ln()),
    }
}

/// Entropy score of one eigenpair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisScore {
    /// Position of the eigenpair in the decomposition (descending-λ order).
    pub index: usize,
    pub eigenvalue: f64,
    /// γ = λ·(eᵀ1)²/N².
    pub contribution: f64,
}

/// Scores every eigenpair, in decomposition order.
pub fn entropy_scores(dec: &EigenDecomposition) -> Vec<AxisScore> {
    let n = dec.eigenvalues.len() as f64;
    dec.eigenvalues
        .iter()
        .zip(&dec.eigenvectors)
        .enumerate()
        .map(|(index, (&eigenvalue, vector))| {
            let s = compensated_sum(vector.iter().copied());
            AxisScore {
                index,
                eigenvalue,
                contribution: eigenvalue * s * s / (n * n),
            }
        })
        .collect()
}

/// Ranking order over axis scores: contribution descending, then eigenvalue
/// descending, then index ascending.
pub fn entropy_order(scores: &[AxisScore]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&scores[i], &scores[j]);
        b.contribution
            .partial_cmp(&a.contribution)
            .unwrap()
            .then(b.eigenvalue.partial_cmp(&a.eigenvalue).unwrap())
            .then(a.index.cmp(&b.index))
    });
    order
}

/// How many axes to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retention {
    /// Keep this many top-ranked axes (fewer when fewer survive filtering).
    Count(usize),
    /// Keep the smallest prefix of the ranking whose cumulative contribution
    /// reaches this fraction (in `(0, 1]`) of the total positive
    /// contribution.
    EnergyFraction(f64),
}

/// One retained axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedAxis {
    /// Index of the eigenpair in the full decomposition.
    pub index: usize,
    pub eigenvalue: f64,
    pub contribution: f64,
    /// Unit eigenvector over the training samples.
    pub vector: Vec<f64>,
}

/// A fitted subspace model: the training sample, the kernel, and the
/// retained axes. Projection of new points needs all three.
#[derive(Debug, Clone, PartialEq)]
pub struct KecaModel {
    pub(crate) spec: KernelSpec,
    pub(crate) train: Vec<Vec<f64>>,
    pub(crate) feature_len: usize,
    pub(crate) axes: Vec<SelectedAxis>,
}

impl KecaModel {
    /// Fits the model on training feature vectors.
    ///
    /// Eigenpairs are filtered before ranking: an axis survives only when
    /// `λ > 1e-10·λ_max` (numerically positive) and `|eᵀ1| > 1e-10·√N`
    /// (numerically coupled to the density estimate). If the retention rule
    /// asks for more axes than survive, all survivors are kept; the caller
    /// can compare `k()` with its request to detect the fallback.
    pub fn fit(features: &[Vec<f64>], spec: KernelSpec, retention: Retention) -> Result<KecaModel> {
        if features.len() < 2 {
            return Err(Error::Model {
                reason: format!("need at least 2 training samples, got {}", features.len()),
            });
        }
        match retention {
            Retention::Count(0) => {
                return Err(Error::Model {
                    reason: "retained axis count must be at least 1".into(),
                })
            }
            Retention::EnergyFraction(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(Error::Model {
                    reason: format!("energy fraction must lie in (0, 1], got {f}"),
                })
            }
            _ => {}
        }

        let gram = KernelMatrix::compute(&spec, features)?;
        let n = gram.n();
        let dec = eig_sym(gram.values(), n)?;
        let scores = entropy_scores(&dec);
        let order = entropy_order(&scores);

        let lambda_max = dec.eigenvalues[0];
        let eps_eig = 1e-10 * lambda_max.max(0.0);
        let eps_sum = 1e-10 * (n as f64).sqrt();
        let survivors: Vec<usize> = order
            .into_iter()
            .filter(|&i| {
                let s = compensated_sum(dec.eigenvectors[i].iter().copied());
                scores[i].eigenvalue > eps_eig && scores[i].eigenvalue > 0.0 && s.abs() > eps_sum
            })
            .collect();
        if survivors.is_empty() {
            return Err(Error::Model {
                reason: "no eigenpair passed the entropy filter (all eigenvalues \
                         non-positive or all eigenvectors orthogonal to 1)"
                    .into(),
            });
        }

        let keep = match retention {
            Retention::Count(k) => k.min(survivors.len()),
            Retention::EnergyFraction(fraction) => {
                let total_positive: f64 = scores
                    .iter()
                    .map(|s| s.contribution)
                    .filter(|&g| g > 0.0)
                    .sum();
                let target = fraction * total_positive;
                let mut cum = 0.0;
                let mut keep = survivors.len();
                for (count, &i) in survivors.iter().enumerate() {
                    cum += scores[i].contribution;
                    if cum >= target {
                        keep = count + 1;
                        break;
                    }
                }
                keep
            }
        };

        let axes = survivors[..keep]
            .iter()
            .map(|&i| SelectedAxis {
                index: i,
                eigenvalue: scores[i].eigenvalue,
                contribution: scores[i].contribution,
                vector: dec.eigenvectors[i].clone(),
            })
            .collect();
        Ok(KecaModel {
            spec,
            train: features.to_vec(),
            feature_len: features[0].len(),
            axes,
        })
    }

    pub(crate) fn from_parts(
        spec: KernelSpec,
        train: Vec<Vec<f64>>,
        feature_len: usize,
        axes: Vec<SelectedAxis>,
    ) -> Result<KecaModel> {
        if train.is_empty() || axes.is_empty() {
            return Err(Error::Model {
                reason: "model must contain training samples and at least one axis".into(),
            });
        }
        for t in &train {
            if t.len() != feature_len {
                return Err(Error::Model {
                    reason: format!(
                        "training sample length {} does not match feature length {feature_len}",
                        t.len()
                    ),
                });
            }
        }
        for a in &axes {
            if a.vector.len() != train.len() {
                return Err(Error::Model {
                    reason: format!(
                        "axis vector length {} does not match sample count {}",
                        a.vector.len(),
                        train.len()
                    ),
                });
            }
            if !(a.eigenvalue > 0.0) {
                return Err(Error::Model {
                    reason: format!("retained axis has non-positive eigenvalue {}", a.eigenvalue),
                });
            }
        }
        Ok(KecaModel {
            spec,
            train,
            feature_len,
            axes,
        })
    }

    /// Number of retained axes.
    pub fn k(&self) -> usize {
        self.axes.len()
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn axes(&self) -> &[SelectedAxis] {
        &self.axes
    }

    /// Embeddings of the training samples themselves: sample j maps to
    /// `(√λ_a · e_a[j])_a`. Column a then has squared norm λ_a, matching the
    /// spectral decomposition of the Gram matrix.
    pub fn project_train(&self) -> Vec<Vec<f64>> {
        let n = self.train.len();
        (0..n)
            .map(|j| {
                self.axes
                    .iter()
                    .map(|a| a.eigenvalue.sqrt() * a.vector[j])
                    .collect()
            })
            .collect()
    }

    /// Embeds an arbitrary feature vector: coordinate a is
    /// `⟨e_a, k_x⟩ / √λ_a` with `k_x[i] = K(x, train[i])`. For a training
    /// sample this reproduces its `project_train` embedding (up to solver
    /// accuracy), so in- and out-of-sample points land in the same space.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.feature_len {
            return Err(Error::Model {
                reason: format!(
                    "feature length {} does not match model feature length {}",
                    x.len(),
                    self.feature_len
                ),
            });
        }
        let kx = kernel_vector(&self.spec, x, &self.train)?;
        Ok(self
            .axes
            .iter()
            .map(|a| {
                // Survivor filtering guarantees a strictly positive eigenvalue.
                debug_assert!(a.eigenvalue > 0.0);
                dot(&a.vector, &kx) / a.eigenvalue.sqrt()
            })
            .collect())
    }
}
