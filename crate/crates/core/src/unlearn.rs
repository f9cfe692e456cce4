//! Unlearning methods for the ridge model.
//!
//! All methods start from θ^full and the precomputed [`HatState`]; the
//! reported wall time covers only the work that depends on the deletion
//! request.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::{dk_predict, HatState};
use crate::model::{self, loss_and_gradient, loss_derivatives, Dataset, DeletionRequest, RidgeModel};
use crate::numerics::{
    self, axpy, check_len, dot, mgs, spd_solve, sym_eig, Cholesky, DenseMatrix, DenseVector, DEFAULT_RANK_TOL,
};

/// Eigenvalues of the deleted-point Gram matrix below this fraction of the
/// largest are treated as zero.
pub const EIGEN_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Retrain,
    Newton,
    Influence,
    Gradient,
    Residual,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Retrain,
        Method::Newton,
        Method::Influence,
        Method::Gradient,
        Method::Residual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Retrain => "retrain",
            Method::Newton => "newton",
            Method::Influence => "influence",
            Method::Gradient => "gradient",
            Method::Residual => "residual",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

/// Parses a comma-separated method list; `all` expands to every method.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(Method::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::invalid("no methods given"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnResult {
    pub method: Method,
    pub theta: DenseVector,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub distance_to_retrain: Option<f64>,
}

impl UnlearnResult {
    fn timed(method: Method, start: Instant, theta: DenseVector) -> Result<Self> {
        let wall_time = start.elapsed();
        if !numerics::all_finite(&theta) {
            return Err(Error::NonFinite("updated parameters"));
        }
        Ok(Self {
            method,
            theta,
            wall_time,
            distance_to_retrain: None,
        })
    }

    /// Records `‖θ − θ^k‖`. Call outside any timed region.
    pub fn with_distance_to(mut self, retrained: &[f64]) -> Self {
        self.distance_to_retrain = Some(numerics::distance(&self.theta, retrained));
        self
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Ground truth: refit on the retained rows.
pub fn retrain_exact(data: &Dataset, req: &DeletionRequest, lambda: f64) -> Result<UnlearnResult> {
    let start = Instant::now();
    let m = model::train_excluding(data, req, lambda)?;
    UnlearnResult::timed(Method::Retrain, start, m.theta)
}

/// One Newton step on the post-deletion loss, `θ^full − [∇²L^k]⁻¹∇L^k` at θ^full.
pub fn newton_update(data: &Dataset, req: &DeletionRequest, model_full: &RidgeModel) -> Result<UnlearnResult> {
    let start = Instant::now();
    let ld = loss_derivatives(data, req, model_full)?;
    let step = spd_solve(&ld.hessian, &ld.grad)?;
    UnlearnResult::timed(Method::Newton, start, numerics::sub(&model_full.theta, &step))
}

/// Influence-function step `θ^full − [∇²L^full]⁻¹∇L^k(θ^full)`.
///
/// `full_hessian` is the precomputed factorization of `XᵀX + λI`.
pub fn influence_update(
    data: &Dataset,
    req: &DeletionRequest,
    model_full: &RidgeModel,
    full_hessian: &Cholesky,
) -> Result<UnlearnResult> {
    check_len("full Hessian", data.dim(), full_hessian.dim())?;
    let start = Instant::now();
    let (_, grad) = loss_and_gradient(data, req, model_full)?;
    let step = full_hessian.solve(&grad)?;
    UnlearnResult::timed(Method::Influence, start, numerics::sub(&model_full.theta, &step))
}

/// Gradient of the composite points: `Σ_{i∈S}(θᵀx_i − ŷ_i)x_i`.
fn composite_gradient(theta: &[f64], rows: &[&[f64]], labels: &[f64]) -> DenseVector {
    let mut g = vec![0.0; theta.len()];
    for (row, y) in rows.iter().zip(labels) {
        axpy(dot(theta, row) - y, row, &mut g);
    }
    g
}

fn deleted_rows<'a>(data: &'a Dataset, req: &DeletionRequest) -> Vec<&'a [f64]> {
    req.indices().iter().map(|&i| data.row(i)).collect()
}

/// Scalar gradient step on the composite points `(x_i, ŷ_i)`, `i ∈ S`.
pub fn gradient_update(
    data: &Dataset,
    req: &DeletionRequest,
    model_full: &RidgeModel,
    synthetic_labels: &[f64],
    alpha: f64,
) -> Result<UnlearnResult> {
    req.validate_for(data.len())?;
    check_len("synthetic labels", req.len(), synthetic_labels.len())?;
    check_len("model dimension", data.dim(), model_full.dim())?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("step size must be finite and >= 0, got {alpha}")));
    }
    let start = Instant::now();
    let rows = deleted_rows(data, req);
    let g = composite_gradient(&model_full.theta, &rows, synthetic_labels);
    let mut theta = model_full.theta.clone();
    axpy(-alpha, &g, &mut theta);
    UnlearnResult::timed(Method::Gradient, start, theta)
}

/// `1/‖N‖₂` for `N = Σ x_i x_iᵀ`, computed from the `k × k` Gram matrix of the rows.
pub fn default_step_size<V: AsRef<[f64]>>(rows: &[V]) -> Result<f64> {
    let k = rows.len();
    let mut gram = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = dot(rows[i].as_ref(), rows[j].as_ref());
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let top = sym_eig(&gram)?.values.first().copied().unwrap_or(0.0);
    if top > 0.0 {
        Ok(1.0 / top)
    } else {
        Err(Error::Empty("all deleted rows are zero"))
    }
}

/// Pseudoinverse of `N = Σ x_i x_iᵀ` as eigenpairs `(λ_i⁻¹, v_i)` over its range.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankPinv {
    pub inv_values: Vec<f64>,
    pub vectors: Vec<DenseVector>,
    pub rank: usize,
}

impl LowRankPinv {
    /// Dense `Σ λ_i⁻¹ v_i v_iᵀ`, for checking only.
    pub fn to_dense(&self, dim: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(dim, dim);
        for (s, v) in self.inv_values.iter().zip(&self.vectors) {
            for i in 0..dim {
                axpy(s * v[i], v, out.row_mut(i));
            }
        }
        out
    }
}

/// Eigenpairs of `Σ x_i x_iᵀ` through Gram-Schmidt on the rows and a `k × k`
/// eigenproblem, in `O(k²d + k³)`.
pub fn pinv_lowrank<V: AsRef<[f64]>>(deleted_rows: &[V]) -> Result<LowRankPinv> {
    if deleted_rows.is_empty() {
        return Err(Error::Empty("no deleted rows"));
    }
    let gs = mgs(deleted_rows, DEFAULT_RANK_TOL)?;
    if gs.rank == 0 {
        return Err(Error::Empty("all deleted rows are zero"));
    }
    // N = U C Uᵀ with C = Σ_i c_i c_iᵀ over the coefficient rows
    let r = gs.rank;
    let mut c = DenseMatrix::zeros(r, r);
    for i in 0..gs.coeffs.rows() {
        let ci = gs.coeffs.row(i);
        for a in 0..r {
            if ci[a] != 0.0 {
                axpy(ci[a], ci, c.row_mut(a));
            }
        }
    }
    // symmetric by construction, up to rounding in the accumulation order
    for a in 0..r {
        for b in (a + 1)..r {
            let v = 0.5 * (c[(a, b)] + c[(b, a)]);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    let eig = sym_eig(&c)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let dim = gs.basis[0].len();
    let mut inv_values = Vec::with_capacity(r);
    let mut vectors = Vec::with_capacity(r);
    for (lambda, a) in eig.values.iter().zip(&eig.vectors) {
        if !(*lambda > EIGEN_CUTOFF * top) {
            continue;
        }
        let mut v = vec![0.0; dim];
        for (aj, u) in a.iter().zip(&gs.basis) {
            axpy(*aj, u, &mut v);
        }
        inv_values.push(1.0 / lambda);
        vectors.push(v);
    }
    Ok(LowRankPinv {
        rank: vectors.len(),
        inv_values,
        vectors,
    })
}

/// `Σ_i λ_i⁻¹(v_iᵀg)v_i`, in `O(kd)`.
pub fn fast_apply(pinv: &LowRankPinv, g: &[f64]) -> Result<DenseVector> {
    let mut out = vec![0.0; g.len()];
    for (s, v) in pinv.inv_values.iter().zip(&pinv.vectors) {
        check_len("pseudoinverse application", v.len(), g.len())?;
        axpy(s * dot(v, g), v, &mut out);
    }
    Ok(out)
}

/// Orthogonal projection of `w` onto the span of `vectors`.
pub fn project_onto_span<V: AsRef<[f64]>>(vectors: &[V], w: &[f64]) -> Result<DenseVector> {
    let mut out = vec![0.0; w.len()];
    if vectors.is_empty() {
        return Ok(out);
    }
    let gs = mgs(vectors, DEFAULT_RANK_TOL)?;
    for u in &gs.basis {
        check_len("projection target", u.len(), w.len())?;
        axpy(dot(u, w), u, &mut out);
    }
    Ok(out)
}

/// Projection-residual update: `θ^full − N⁺ Σ_{i∈S}(θ^fullᵀx_i − ŷ_i)x_i` with
/// `ŷ` the leave-k-out predictions from the hat state.
///
/// Equals `θ^full + proj_{span(x_S)}(θ^k − θ^full)`.
pub fn residual_update(data: &Dataset, req: &DeletionRequest, hat: &HatState) -> Result<UnlearnResult> {
    residual_update_rounds(data, req, hat, 1)
}

/// [`residual_update`] repeated `rounds` times against the same composite points.
///
/// After the first round the composite gradient lies in the null space of the
/// step, so further rounds leave θ unchanged up to rounding.
pub fn residual_update_rounds(
    data: &Dataset,
    req: &DeletionRequest,
    hat: &HatState,
    rounds: usize,
) -> Result<UnlearnResult> {
    if rounds == 0 {
        return Err(Error::invalid("rounds must be >= 1"));
    }
    let start = Instant::now();
    let labels = dk_predict(hat, data, req)?;
    let rows = deleted_rows(data, req);
    let pinv = pinv_lowrank(&rows)?;
    let mut theta = hat.model().theta.clone();
    for _ in 0..rounds {
        let g = composite_gradient(&theta, &rows, &labels);
        let step = fast_apply(&pinv, &g)?;
        axpy(-1.0, &step, &mut theta);
    }
    UnlearnResult::timed(Method::Residual, start, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOptions {
    /// Step size for the gradient baseline; `None` uses [`default_step_size`].
    pub alpha: Option<f64>,
    /// Rounds for the residual update.
    pub rounds: usize,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self { alpha: None, rounds: 1 }
    }
}

/// Runs `method` against the precomputed `hat` state.
pub fn run_method(
    method: Method,
    data: &Dataset,
    req: &DeletionRequest,
    hat: &HatState,
    opts: &MethodOptions,
) -> Result<UnlearnResult> {
    let model_full = hat.model();
    match method {
        Method::Retrain => retrain_exact(data, req, hat.lambda()),
        Method::Newton => newton_update(data, req, model_full),
        Method::Influence => influence_update(data, req, model_full, hat.hessian_factor()),
        Method::Gradient => {
            let start = Instant::now();
            let labels = dk_predict(hat, data, req)?;
            let alpha = match opts.alpha {
                Some(a) => a,
                None => default_step_size(&deleted_rows(data, req))?,
            };
            let mut res = gradient_update(data, req, model_full, &labels, alpha)?;
            res.wall_time = start.elapsed();
            Ok(res)
        }
        Method::Residual => residual_update_rounds(data, req, hat, opts.rounds),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leverage::hat_matrix;

    fn rows_dataset(rows: &[[f64; 2]], y: &[f64]) -> Dataset {
        Dataset::new(DenseMatrix::from_rows(rows).unwrap(), y.to_vec()).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!(parse_methods("all").unwrap().len(), 5);
        assert_eq!(
            parse_methods("residual, retrain,residual").unwrap(),
            vec![Method::Retrain, Method::Residual]
        );
        assert!(parse_methods("sisa").is_err());
    }

    #[test]
    fn duplicate_of_retained_point_keeps_mean() {
        let data = rows_dataset(&[[1.0, 0.0], [1.0, 2.0], [1.0, 1.0]], &[1.0, 1.0, 1.0]);
        let x = DenseMatrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let one_d = Dataset::new(x, vec![0.0, 2.0, 1.0]).unwrap();
        let req = DeletionRequest::new(vec![2], 3).unwrap();
        let res = retrain_exact(&one_d, &req, 0.0).unwrap();
        assert!((res.theta[0] - 1.0).abs() < 1e-15);
        let empty = retrain_exact(&data, &DeletionRequest::empty(), 1e-3).unwrap();
        let full = model::train_full(&data, 1e-3).unwrap();
        assert_eq!(empty.theta, full.theta);
    }

    #[test]
    fn empty_request_keeps_full_model() {
        let data = rows_dataset(&[[1.0, 0.5], [0.2, 1.0], [1.0, 1.0], [0.3, -1.0]], &[1.0, 2.0, 2.5, -1.0]);
        let hat = hat_matrix(&data, 1e-3).unwrap();
        let full = hat.model();
        let empty = DeletionRequest::empty();
        let newton = newton_update(&data, &empty, full).unwrap();
        let inf = influence_update(&data, &empty, full, hat.hessian_factor()).unwrap();
        for (a, b) in newton.theta.iter().zip(&full.theta) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in inf.theta.iter().zip(&full.theta) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_step_edge_cases() {
        let data = rows_dataset(&[[1.0, 0.5], [0.2, 1.0], [1.0, 1.0]], &[1.0, 2.0, 2.5]);
        let full = model::train_full(&data, 1e-3).unwrap();
        let req = DeletionRequest::new(vec![0, 2], 3).unwrap();
        let labels = [0.3, -0.2];
        let zero_step = gradient_update(&data, &req, &full, &labels, 0.0).unwrap();
        assert_eq!(zero_step.theta, full.theta);
        let fitted: Vec<f64> = req.indices().iter().map(|&i| dot(&full.theta, data.row(i))).collect();
        let unchanged = gradient_update(&data, &req, &full, &fitted, 0.7).unwrap();
        assert_eq!(unchanged.theta, full.theta);
        assert!(gradient_update(&data, &req, &full, &labels, -1.0).is_err());
        assert!(gradient_update(&data, &req, &full, &labels[..1], 0.1).is_err());
    }

    #[test]
    fn pinv_single_row_by_hand() {
        let p = pinv_lowrank(&[[2.0, 0.0]]).unwrap();
        assert_eq!(p.rank, 1);
        assert!((p.inv_values[0] - 0.25).abs() < 1e-15);
        assert!((p.vectors[0][0].abs() - 1.0).abs() < 1e-15);
        assert_eq!(p.vectors[0][1], 0.0);
        assert!(pinv_lowrank(&[[0.0, 0.0]]).is_err());
        assert!(pinv_lowrank::<[f64; 2]>(&[]).is_err());
    }

    #[test]
    fn pinv_orthonormal_rows_are_a_projection() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rows = [[h, h, 0.0], [h, -h, 0.0]];
        let p = pinv_lowrank(&rows).unwrap();
        assert_eq!(p.rank, 2);
        for s in &p.inv_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
        // eigenvalues tie, so compare the spanned projector rather than vectors
        let dense = p.to_dense(3);
        let expected = DenseMatrix::diag(&[1.0, 1.0, 0.0]);
        assert!(dense.sub(&expected).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn fast_apply_basic_cases() {
        let p = pinv_lowrank(&[[2.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(fast_apply(&p, &[0.0, 0.0, 5.0]).unwrap(), vec![0.0; 3]);
        let v0 = p.vectors[0].clone();
        let out = fast_apply(&p, &v0).unwrap();
        for (o, v) in out.iter().zip(&v0) {
            assert!((o - p.inv_values[0] * v).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_edge_cases() {
        let span = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        assert_eq!(project_onto_span(&span, &[0.0, 0.0, 2.0]).unwrap(), vec![0.0; 3]);
        let inside = project_onto_span(&span, &[3.0, -1.0, 0.0]).unwrap();
        assert!((inside[0] - 3.0).abs() < 1e-15 && (inside[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_matches_retrain_when_deleted_rows_span_everything() {
        let data = rows_dataset(
            &[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [0.5, 0.3]],
            &[1.0, -1.0, 0.2, 0.7, 1.5],
        );
        let hat = hat_matrix(&data, 1e-3).unwrap();
        let req = DeletionRequest::new(vec![0, 1], 5).unwrap();
        let res = residual_update(&data, &req, &hat).unwrap();
        let exact = retrain_exact(&data, &req, 1e-3).unwrap();
        for (a, b) in res.theta.iter().zip(&exact.theta) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn extra_rounds_are_idempotent() {
        let data = rows_dataset(
            &[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0], [0.5, 0.3]],
            &[1.0, -1.0, 0.2, 0.7, 1.5],
        );
        let hat = hat_matrix(&data, 1e-2).unwrap();
        let req = DeletionRequest::new(vec![3], 5).unwrap();
        let one = residual_update(&data, &req, &hat).unwrap();
        let three = residual_update_rounds(&data, &req, &hat, 3).unwrap();
        for (a, b) in one.theta.iter().zip(&three.theta) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(residual_update_rounds(&data, &req, &hat, 0).is_err());
    }
}
