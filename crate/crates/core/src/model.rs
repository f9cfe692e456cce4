//! Ridge-regularized least squares without an intercept.
//!
//! The loss over the retained rows is
//! `Σ ½(θᵀx_i − y_i)² + (λ/2)‖θ‖²`, with λ fixed per experiment and not
//! scaled by the number of rows. Add a constant feature column to fit an
//! intercept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, check_len, dot, Cholesky, DenseMatrix, DenseVector};

/// Default regularization strength.
pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Feature matrix (one row per example) and real-valued labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DenseMatrix,
    y: DenseVector,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DenseMatrix, y: DenseVector) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        check_len("label vector", x.rows(), y.len())?;
        if !numerics::all_finite(x.as_slice()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        if !numerics::all_finite(&y) {
            return Err(Error::NonFinite("labels"));
        }
        Ok(Self {
            x,
            y,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        check_len("feature names", self.dim(), names.len())?;
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    /// Copy of the dataset with the requested rows physically removed.
    pub fn without(&self, req: &DeletionRequest) -> Result<Dataset> {
        req.validate_for(self.len())?;
        let mask = req.mask(self.len());
        let keep: Vec<usize> = (0..self.len()).filter(|&i| !mask[i]).collect();
        let y = keep.iter().map(|&i| self.y[i]).collect();
        Ok(Dataset {
            x: self.x.select_rows(&keep),
            y,
            feature_names: self.feature_names.clone(),
        })
    }
}

/// Row indices scheduled for deletion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionRequest {
    indices: Vec<usize>,
}

impl DeletionRequest {
    /// Validates that indices are distinct, in range and leave at least one row.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let req = Self { indices };
        req.validate_for(n)?;
        Ok(req)
    }

    pub fn empty() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.indices.len() >= n {
            return Err(Error::InvalidDeletion(format!(
                "cannot delete {} of {n} rows",
                self.indices.len()
            )));
        }
        // O(k log k) so that validation stays independent of n
        let mut sorted = self.indices.clone();
        sorted.sort_unstable();
        if let Some(&i) = sorted.last().filter(|&&i| i >= n) {
            return Err(Error::InvalidDeletion(format!("index {i} out of range for {n} rows")));
        }
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidDeletion(format!("index {} listed twice", w[0])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub theta: DenseVector,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(self, x)
    }
}

/// Binary read-off of a regression score: positive scores are the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Positive,
    Negative,
}

impl Class {
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn label(self) -> f64 {
        match self {
            Class::Positive => 1.0,
            Class::Negative => -1.0,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

pub(crate) fn factor_normal_equations(gram: &DenseMatrix) -> Result<Cholesky> {
    Cholesky::new(gram).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularNormalEquations,
        other => other,
    })
}

/// Fits θ on every row not listed in `exclude` by solving `(XᵀX + λI)θ = XᵀY`.
pub fn train_excluding(data: &Dataset, exclude: &DeletionRequest, lambda: f64) -> Result<RidgeModel> {
    check_lambda(lambda)?;
    exclude.validate_for(data.len())?;
    let mask = (!exclude.is_empty()).then(|| exclude.mask(data.len()));
    let keep: Option<Vec<bool>> = mask.map(|m| m.into_iter().map(|deleted| !deleted).collect());
    let gram = data.x().gram(keep.as_deref(), lambda);
    let mut rhs = vec![0.0; data.dim()];
    for (i, row) in data.x().row_iter().enumerate() {
        if keep.as_ref().is_some_and(|k| !k[i]) {
            continue;
        }
        numerics::axpy(data.y[i], row, &mut rhs);
    }
    let theta = factor_normal_equations(&gram)?.solve(&rhs)?;
    Ok(RidgeModel { theta, lambda })
}

pub fn train_full(data: &Dataset, lambda: f64) -> Result<RidgeModel> {
    train_excluding(data, &DeletionRequest::empty(), lambda)
}

pub fn predict(model: &RidgeModel, x: &[f64]) -> Result<f64> {
    check_len("prediction input", model.dim(), x.len())?;
    Ok(dot(&model.theta, x))
}

/// Fraction of rows whose predicted class matches the sign of the label.
pub fn accuracy(model: &RidgeModel, data: &Dataset) -> Result<f64> {
    check_len("accuracy input", model.dim(), data.dim())?;
    let hits = data
        .x()
        .row_iter()
        .zip(data.y())
        .filter(|(row, &y)| Class::from_score(dot(&model.theta, row)) == Class::from_score(y))
        .count();
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone)]
pub struct LossDerivatives {
    pub loss: f64,
    pub grad: DenseVector,
    pub hessian: DenseMatrix,
}

/// Loss, gradient and Hessian of the ridge objective over rows not in `exclude`.
pub fn loss_derivatives(data: &Dataset, exclude: &DeletionRequest, model: &RidgeModel) -> Result<LossDerivatives> {
    exclude.validate_for(data.len())?;
    check_len("model dimension", data.dim(), model.dim())?;
    let (loss, grad) = loss_and_gradient(data, exclude, model)?;
    let keep: Vec<bool> = exclude.mask(data.len()).into_iter().map(|d| !d).collect();
    let hessian = data.x().gram(Some(&keep), model.lambda);
    Ok(LossDerivatives { loss, grad, hessian })
}

/// Loss and gradient only; `O(nd)`.
pub fn loss_and_gradient(data: &Dataset, exclude: &DeletionRequest, model: &RidgeModel) -> Result<(f64, DenseVector)> {
    exclude.validate_for(data.len())?;
    check_len("model dimension", data.dim(), model.dim())?;
    let mask = exclude.mask(data.len());
    let theta = &model.theta;
    let mut loss = 0.5 * model.lambda * dot(theta, theta);
    let mut grad = numerics::scale(model.lambda, theta);
    for (i, row) in data.x().row_iter().enumerate() {
        if mask[i] {
            continue;
        }
        let r = dot(theta, row) - data.y[i];
        loss += 0.5 * r * r;
        numerics::axpy(r, row, &mut grad);
    }
    Ok((loss, grad))
}
