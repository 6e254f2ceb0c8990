//! Positive and indefinite kernel functions, and Gram matrix assembly.

use crate::error::{Error, Result};
use crate::util::{dot, norm};

/// The kernel function family.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    /// `(π/4)·cos(π·⟨x, y⟩ / 2)`. Bounded by π/4 in absolute value and
    /// indefinite: for unit-normalized inputs `K(x, x) = 0`, so the Gram
    /// matrix has zero trace and its spectrum carries both signs.
    Cosine,
    /// `exp(-‖x - y‖² / (2·width²))`.
    Gaussian { width: f64 },
    /// `(⟨x, y⟩ + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

/// A kernel plus the input-normalization switch. With `normalize` set, both
/// arguments are scaled to unit Euclidean length before the kernel is
/// applied (zero vectors are passed through unchanged). Feature vectors from
/// images of different overall contrast then compare by direction only.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub normalize: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::Cosine,
            normalize: true,
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            KernelKind::Cosine => Ok(()),
            KernelKind::Gaussian { width } => {
                if width > 0.0 && width.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Kernel {
                        reason: format!("gaussian width must be positive and finite, got {width}"),
                    })
                }
            }
            KernelKind::Polynomial { degree, offset } => {
                if degree == 0 {
                    Err(Error::Kernel {
                        reason: "polynomial degree must be at least 1".into(),
                    })
                } else if !offset.is_finite() {
                    Err(Error::Kernel {
                        reason: format!("polynomial offset must be finite, got {offset}"),
                    })
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    if n == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

fn raw_eval(kind: &KernelKind, x: &[f64], y: &[f64]) -> f64 {
    match *kind {
        KernelKind::Cosine => {
            std::f64::consts::FRAC_PI_4 * (std::f64::consts::FRAC_PI_2 * dot(x, y)).cos()
        }
        KernelKind::Gaussian { width } => {
            let mut d2 = 0.0;
            for (a, b) in x.iter().zip(y) {
                let d = a - b;
                d2 += d * d;
            }
            (-d2 / (2.0 * width * width)).exp()
        }
        KernelKind::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
    }
}

fn check_lens(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Kernel {
            reason: format!("vector lengths differ: {} vs {}", x.len(), y.len()),
        });
    }
    if x.is_empty() {
        return Err(Error::Kernel {
            reason: "kernel arguments must be non-empty".into(),
        });
    }
    Ok(())
}

/// Evaluates the kernel on one pair of vectors.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    check_lens(x, y)?;
    if spec.normalize {
        Ok(raw_eval(&spec.kind, &unit(x), &unit(y)))
    } else {
        Ok(raw_eval(&spec.kind, x, y))
    }
}

/// Dense symmetric Gram matrix over a sample set. Each unordered pair is
/// evaluated once and mirrored, so the stored matrix is symmetric bit for
/// bit, and every entry equals the corresponding `eval_kernel` call exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn compute(spec: &KernelSpec, rows: &[Vec<f64>]) -> Result<KernelMatrix> {
        spec.validate()?;
        let n = rows.len();
        if n == 0 {
            return Err(Error::Kernel {
                reason: "cannot build a Gram matrix over zero samples".into(),
            });
        }
        let dim = rows[0].len();
        for r in rows {
            check_lens(&rows[0], r)?;
            let _ = dim;
        }
        let prepped: Vec<Vec<f64>>;
        let view: Vec<&[f64]> = if spec.normalize {
            prepped = rows.iter().map(|r| unit(r)).collect();
            prepped.iter().map(|r| r.as_slice()).collect()
        } else {
            rows.iter().map(|r| r.as_slice()).collect()
        };
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = raw_eval(&spec.kind, view[i], view[j]);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(KernelMatrix { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.n && j < self.n);
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Kernel evaluations of one probe vector against every sample row:
/// `out[i] = K(x, rows[i])`.
pub fn kernel_vector(spec: &KernelSpec, x: &[f64], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(Error::Kernel {
            reason: "cannot evaluate against zero samples".into(),
        });
    }
    for r in rows {
        check_lens(x, r)?;
    }
    if spec.normalize {
        let xn = unit(x);
        Ok(rows.iter().map(|r| raw_eval(&spec.kind, &xn, &unit(r))).collect())
    } else {
        Ok(rows.iter().map(|r| raw_eval(&spec.kind, x, r)).collect())
    }
}
