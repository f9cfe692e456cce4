//! Projection-residual machine unlearning for ridge-regularized linear models.
//!
//! Given a model trained on `n` rows and a request to delete `k` of them, the
//! residual update moves θ^full onto `θ^full + proj_{span(x_S)}(θ^k − θ^full)`
//! in `O(k²d)` time once the hat state has been precomputed. Exact retraining,
//! a Newton step, the influence-function step and a scalar gradient step are
//! provided as baselines, along with the Feature Injection Test harness used
//! to score how thoroughly each method forgets.
//!
//! ```
//! use projres::{data, leverage::HatState, model::DeletionRequest, unlearn};
//!
//! let data = data::gen_synthetic_sparse(200, 10, 0.5, 7).unwrap();
//! let hat = HatState::new(&data, 1e-3).unwrap();
//! let req = DeletionRequest::new(vec![3, 17, 42], data.len()).unwrap();
//! let res = unlearn::residual_update(&data, &req, &hat).unwrap();
//! assert_eq!(res.theta.len(), 10);
//! ```

// NaN-rejecting checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod leverage;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod unlearn;

pub use error::{Error, Result};
pub use leverage::HatState;
pub use model::{Dataset, DeletionRequest, RidgeModel};
pub use unlearn::{Method, UnlearnResult};
