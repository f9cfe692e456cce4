//! Dense linear-algebra kernel: Gram-Schmidt, symmetric eigensolver, Cholesky and LU solves.

mod eigen;
mod gram_schmidt;
mod matrix;
mod solve;

pub use eigen::{sym_eig, EigenPairs, SYMMETRY_TOL};
pub use gram_schmidt::{mgs, GramSchmidt, DEFAULT_RANK_TOL};
pub use matrix::{add, all_finite, axpy, distance, dot, norm, scale, sub, DenseMatrix, DenseVector};
pub use solve::{lin_solve, spd_solve, Cholesky, PIVOT_TOL};

pub(crate) use matrix::check_len;
