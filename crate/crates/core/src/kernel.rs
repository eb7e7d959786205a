//! Regularized Riesz kernels `(|x−y|² + ε²)^((α−n)/2)` and Gram assembly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::types::Point;

/// Riesz kernel of order `alpha` on ℝ^`dim`, smoothed on the diagonal by
/// `epsilon`. `alpha = 2` is the Newtonian kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr")]
pub struct KernelSpec {
    pub alpha: f64,
    pub dim: usize,
    pub epsilon: f64,
}

#[derive(Deserialize)]
struct KernelRepr {
    alpha: f64,
    dim: usize,
    epsilon: f64,
}

impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        KernelSpec::new(r.alpha, r.dim, r.epsilon)
    }
}

impl KernelSpec {
    pub fn new(alpha: f64, dim: usize, epsilon: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Validation(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if dim < 3 {
            return Err(Error::Validation(format!("dimension must be at least 3, got {dim}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Validation(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(KernelSpec { alpha, dim, epsilon })
    }

    pub fn newtonian(dim: usize, epsilon: f64) -> Result<Self> {
        KernelSpec::new(2.0, dim, epsilon)
    }

    /// `(α − n) / 2`, always negative.
    #[inline]
    fn half_exponent(&self) -> f64 {
        (self.alpha - self.dim as f64) / 2.0
    }

    /// Kernel value for a squared distance; `+∞` at `r² + ε² = 0`.
    #[inline]
    pub fn eval_dist_sq(&self, r2: f64) -> f64 {
        let base = r2 + self.epsilon * self.epsilon;
        if base == 0.0 {
            return f64::INFINITY;
        }
        // Newtonian n = 3 is by far the common case.
        if self.dim == 3 && self.alpha == 2.0 {
            1.0 / base.sqrt()
        } else {
            base.powf(self.half_exponent())
        }
    }

    pub fn check_dim(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: p.dim(),
            });
        }
        Ok(())
    }
}

/// `κ(x, y)`; returns `+∞` when `ε = 0` and `x = y`.
pub fn eval_kernel(k: &KernelSpec, x: &Point, y: &Point) -> Result<f64> {
    k.check_dim(x)?;
    k.check_dim(y)?;
    Ok(k.eval_dist_sq(x.dist_sq(y)))
}

/// `M[i][j] = κ(rows[i], cols[j])`, assembled row-parallel.
///
/// When `rows` and `cols` are the same slice the upper triangle is computed
/// and mirrored, so the result is bitwise symmetric.
pub fn assemble_gram(k: &KernelSpec, rows: &[Point], cols: &[Point]) -> Result<Matrix> {
    for p in rows.iter().chain(cols) {
        k.check_dim(p)?;
    }
    let (nr, nc) = (rows.len(), cols.len());
    let same = std::ptr::eq(rows, cols) || rows == cols;
    let mut data = vec![0.0; nr * nc];
    if nc > 0 {
        data.par_chunks_mut(nc).enumerate().for_each(|(i, out)| {
            let start = if same { i } else { 0 };
            for j in start..nc {
                out[j] = k.eval_dist_sq(rows[i].dist_sq(&cols[j]));
            }
        });
    }
    if same {
        for i in 0..nr {
            for j in 0..i {
                data[i * nc + j] = data[j * nc + i];
            }
        }
    }
    if data.iter().any(|v| v.is_infinite()) {
        return Err(Error::InfiniteKernel);
    }
    Ok(Matrix::from_vec(nr, nc, data))
}
