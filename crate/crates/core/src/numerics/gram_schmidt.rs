//! Modified Gram-Schmidt with one re-orthogonalization pass and rank detection.

use super::matrix::{axpy, check_len, dot, norm, DenseMatrix, DenseVector};
use crate::error::{Error, Result};

/// Default relative tolerance below which a vector counts as dependent.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Result of orthonormalizing `x_1..x_k`.
///
/// `coeffs` is `k × rank`: row `i` holds the coordinates of `x_i` in `basis`.
/// When every input is independent it is square and lower triangular with
/// `coeffs[i][i] = ‖w_i‖`, the norm of the residual left after removing the
/// earlier directions.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    pub coeffs: DenseMatrix,
    pub basis: Vec<DenseVector>,
    pub rank: usize,
    /// `dependent[i]` is set when `x_i` added no basis vector.
    pub dependent: Vec<bool>,
}

impl GramSchmidt {
    /// `Σ_j coeffs[i][j] · basis[j]`
    pub fn reconstruct(&self, i: usize) -> DenseVector {
        let dim = self.basis.first().map_or(0, Vec::len);
        let mut out = vec![0.0; dim];
        for (j, u) in self.basis.iter().enumerate() {
            axpy(self.coeffs[(i, j)], u, &mut out);
        }
        out
    }
}

/// Orthonormalizes `vectors` in order.
///
/// A vector whose residual after projection has norm `≤ tol·‖x_i‖` is flagged
/// dependent and contributes no basis vector; its coefficients on the existing
/// basis are still recorded.
pub fn mgs<V: AsRef<[f64]>>(vectors: &[V], tol: f64) -> Result<GramSchmidt> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("rank tolerance must be > 0, got {tol}")));
    }
    let k = vectors.len();
    let dim = vectors.first().map_or(0, |v| v.as_ref().len());
    for v in vectors {
        let v = v.as_ref();
        check_len("Gram-Schmidt input", dim, v.len())?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Gram-Schmidt input"));
        }
    }

    let max_rank = k.min(dim);
    // Coefficients are collected per input and packed once the rank is known.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut basis: Vec<DenseVector> = Vec::with_capacity(max_rank);
    let mut dependent = Vec::with_capacity(k);

    for x in vectors {
        let x = x.as_ref();
        let x_norm = norm(x);
        let mut w = x.to_vec();
        let mut c = vec![0.0; basis.len() + 1];
        for _pass in 0..2 {
            for (j, u) in basis.iter().enumerate() {
                let proj = dot(u, &w);
                axpy(-proj, u, &mut w);
                c[j] += proj;
            }
        }
        let w_norm = norm(&w);
        if x_norm == 0.0 || w_norm <= tol * x_norm || basis.len() == max_rank {
            c.pop();
            dependent.push(true);
        } else {
            c[basis.len()] = w_norm;
            w.iter_mut().for_each(|v| *v /= w_norm);
            basis.push(w);
            dependent.push(false);
        }
        rows.push(c);
    }

    let rank = basis.len();
    let mut coeffs = DenseMatrix::zeros(k, rank);
    for (i, c) in rows.iter().enumerate() {
        coeffs.row_mut(i)[..c.len()].copy_from_slice(c);
    }
    Ok(GramSchmidt {
        coeffs,
        basis,
        rank,
        dependent,
    })
}
