//! Hat matrix and leave-k-out predictions at deleted rows.
//!
//! The ridge smoother is `H = X(XᵀX + λI)⁻¹Xᵀ`. With `XᵀX + λI = LLᵀ` it
//! factors as `H = ZZᵀ` where row `i` of `Z` is `L⁻¹x_i`. [`HatState`] keeps
//! `Z` rather than the `n × n` matrix, so any entry or `k × k` block costs
//! `O(d)` per entry after the one-off precomputation, and memory stays `O(nd)`.

use crate::error::{Error, Result};
use crate::model::{factor_normal_equations, Dataset, DeletionRequest, RidgeModel};
use crate::numerics::{self, dot, lin_solve, Cholesky, DenseMatrix, DenseVector};

/// Everything computable before a deletion request arrives: θ^full, the
/// factored full-data Hessian, the whitened rows and the full-data residuals.
#[derive(Debug, Clone)]
pub struct HatState {
    model: RidgeModel,
    factor: Cholesky,
    whitened: DenseMatrix,
    residuals: DenseVector,
}

impl HatState {
    pub fn new(data: &Dataset, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let x = data.x();
        let factor = factor_normal_equations(&x.gram(None, lambda))?;
        let theta = factor.solve(&x.t_matvec(data.y())?)?;
        let residuals = x
            .row_iter()
            .zip(data.y())
            .map(|(row, y)| y - dot(&theta, row))
            .collect();
        let mut whitened = x.clone();
        for i in 0..whitened.rows() {
            factor.solve_lower_in_place(whitened.row_mut(i))?;
        }
        Ok(Self {
            model: RidgeModel { theta, lambda },
            factor,
            whitened,
            residuals,
        })
    }

    pub fn n(&self) -> usize {
        self.whitened.rows()
    }

    pub fn dim(&self) -> usize {
        self.whitened.cols()
    }

    pub fn lambda(&self) -> f64 {
        self.model.lambda
    }

    /// θ^full.
    pub fn model(&self) -> &RidgeModel {
        &self.model
    }

    /// Cholesky factor of the full-data Hessian `XᵀX + λI`.
    pub fn hessian_factor(&self) -> &Cholesky {
        &self.factor
    }

    /// `r_i = y_i − x_iᵀθ^full`
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        dot(self.whitened.row(i), self.whitened.row(j))
    }

    /// Leverage score `H_ii`.
    pub fn leverage(&self, i: usize) -> f64 {
        self.entry(i, i)
    }

    /// `H_SS` for the given row indices, in order.
    pub fn block(&self, indices: &[usize]) -> DenseMatrix {
        let k = indices.len();
        let mut out = DenseMatrix::zeros(k, k);
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate().skip(a) {
                let h = self.entry(i, j);
                out[(a, b)] = h;
                out[(b, a)] = h;
            }
        }
        out
    }

    /// Materializes the full `n × n` hat matrix. Intended for small `n`.
    pub fn to_dense(&self) -> DenseMatrix {
        let all: Vec<usize> = (0..self.n()).collect();
        self.block(&all)
    }

    fn check_matches(&self, data: &Dataset) -> Result<()> {
        numerics::check_len("hat state rows", self.n(), data.len())?;
        numerics::check_len("hat state features", self.dim(), data.dim())
    }
}

/// Precomputes the hat state for `data` at regularization `lambda`.
pub fn hat_matrix(data: &Dataset, lambda: f64) -> Result<HatState> {
    HatState::new(data, lambda)
}

const LEVERAGE_ONE_TOL: f64 = 1e-12;

fn deletion_inputs(state: &HatState, data: &Dataset, req: &DeletionRequest) -> Result<DenseVector> {
    state.check_matches(data)?;
    req.validate_for(data.len())?;
    if req.is_empty() {
        return Err(Error::InvalidDeletion("leave-k-out prediction needs k >= 1".into()));
    }
    for &i in req.indices() {
        let h = state.leverage(i);
        if 1.0 - h <= LEVERAGE_ONE_TOL {
            return Err(Error::DegenerateDeletion(format!("row {i} has leverage {h}")));
        }
    }
    Ok(req.indices().iter().map(|&i| state.residuals[i]).collect())
}

fn degenerate(e: Error) -> Error {
    match e {
        Error::Singular { pivot, value } => Error::DegenerateDeletion(format!(
            "I - H_SS is singular (pivot {pivot} = {value:e})"
        )),
        other => other,
    }
}

/// Predictions the model retrained without `req` would make at the deleted rows.
///
/// Solves `(I − H_SS)e = r_S` and returns `y_S − e`.
pub fn dk_predict(state: &HatState, data: &Dataset, req: &DeletionRequest) -> Result<DenseVector> {
    let r = deletion_inputs(state, data, req)?;
    let mut m = state.block(req.indices());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[(i, j)] = delta - m[(i, j)];
        }
    }
    let e = lin_solve(&m, &r).map_err(degenerate)?;
    Ok(req
        .indices()
        .iter()
        .zip(&e)
        .map(|(&i, ei)| data.y()[i] - ei)
        .collect())
}

/// Same quantity through the row-scaled form `(I − T)⁻¹ D r_S` with
/// `D = diag(1/(1 − H_ii))` and `T_ij = H_ij/(1 − H_ii)` off the diagonal.
pub fn dk_predict_factored(state: &HatState, data: &Dataset, req: &DeletionRequest) -> Result<DenseVector> {
    let r = deletion_inputs(state, data, req)?;
    let h = state.block(req.indices());
    let k = h.rows();
    let mut i_minus_t = DenseMatrix::identity(k);
    let mut dr = vec![0.0; k];
    for i in 0..k {
        let inv = 1.0 / (1.0 - h[(i, i)]);
        dr[i] = inv * r[i];
        for j in 0..k {
            if i != j {
                i_minus_t[(i, j)] = -h[(i, j)] * inv;
            }
        }
    }
    let e = lin_solve(&i_minus_t, &dr).map_err(degenerate)?;
    Ok(req
        .indices()
        .iter()
        .zip(&e)
        .map(|(&i, ei)| data.y()[i] - ei)
        .collect())
}

/// Classical leave-one-out shortcut `y_i − r_i/(1 − H_ii)`.
pub fn loo_prediction(state: &HatState, data: &Dataset, i: usize) -> Result<f64> {
    let req = DeletionRequest::new(vec![i], data.len())?;
    let r = deletion_inputs(state, data, &req)?;
    Ok(data.y()[i] - r[0] / (1.0 - state.leverage(i)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::new(DenseMatrix::from_rows(&[[1.0], [1.0]]).unwrap(), vec![0.0, 2.0]).unwrap()
    }

    #[test]
    fn two_identical_rows_unregularized() {
        let h = hat_matrix(&toy(), 0.0).unwrap().to_dense();
        for v in h.as_slice() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn two_identical_rows_ridge() {
        let h = hat_matrix(&toy(), 1.0).unwrap().to_dense();
        for v in h.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn toy_leave_one_out() {
        let data = toy();
        let state = hat_matrix(&data, 0.0).unwrap();
        let req = DeletionRequest::new(vec![0], 2).unwrap();
        let yk = dk_predict(&state, &data, &req).unwrap();
        assert!((yk[0] - 2.0).abs() < 1e-14);
        assert!((loo_prediction(&state, &data, 0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_residual_rows_are_fixed_points() {
        // labels exactly linear in x, no regularization
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).unwrap();
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let data = Dataset::new(x, y.clone()).unwrap();
        let state = hat_matrix(&data, 0.0).unwrap();
        let req = DeletionRequest::new(vec![2, 3], 4).unwrap();
        let yk = dk_predict(&state, &data, &req).unwrap();
        assert!((yk[0] - 3.0).abs() < 1e-12 && (yk[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn deleting_the_only_support_is_degenerate() {
        // the second feature is observed only in row 2
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        let data = Dataset::new(x, vec![1.0, 2.0, 3.0]).unwrap();
        let state = hat_matrix(&data, 0.0).unwrap();
        let req = DeletionRequest::new(vec![2], 3).unwrap();
        assert!(matches!(dk_predict(&state, &data, &req), Err(Error::DegenerateDeletion(_))));
        assert!(matches!(
            dk_predict_factored(&state, &data, &req),
            Err(Error::DegenerateDeletion(_))
        ));
    }

    #[test]
    fn empty_request_rejected() {
        let data = toy();
        let state = hat_matrix(&data, 1.0).unwrap();
        assert!(dk_predict(&state, &data, &DeletionRequest::empty()).is_err());
    }
}
