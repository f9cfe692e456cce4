use super::matrix::{check_len, dot, DenseMatrix, DenseVector};
use crate::error::{Error, Result};

/// Relative pivot magnitude below which [`lin_solve`] reports a singular matrix.
pub const PIVOT_TOL: f64 = 1e-12;

/// Lower Cholesky factor `A = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: DenseMatrix,
}

impl Cholesky {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "Cholesky factorization",
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = {
                    let (li, lj) = (l.row(i), l.row(j));
                    a[(i, j)] - dot(&li[..j], &lj[..j])
                };
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.lower
    }

    /// Forward substitution: solves `L z = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<DenseVector> {
        let mut z = b.to_vec();
        self.solve_lower_in_place(&mut z)?;
        Ok(z)
    }

    pub fn solve_lower_in_place(&self, z: &mut [f64]) -> Result<()> {
        let n = self.dim();
        check_len("triangular solve", n, z.len())?;
        // leading zeros of a sparse right-hand side stay zero
        let start = z.iter().position(|v| *v != 0.0).unwrap_or(n);
        for i in start..n {
            let row = self.lower.row(i);
            let s = z[i] - dot(&row[start..i], &z[start..i]);
            z[i] = s / row[i];
        }
        Ok(())
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<DenseVector> {
        let n = self.dim();
        let mut x = self.solve_lower(b)?;
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lower[(j, i)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lower[(i, i)];
        }
        Ok(x)
    }
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn spd_solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector> {
    check_len("SPD solve right-hand side", a.rows(), b.len())?;
    Cholesky::new(a)?.solve(b)
}

/// Solves a small square system by LU with partial pivoting.
pub fn lin_solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "linear solve",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    check_len("linear solve right-hand side", n, b.len())?;
    let tol = PIVOT_TOL * a.max_abs().max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs > tol) {
            return Err(Error::Singular {
                pivot: col,
                value: pivot_abs,
            });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot_row, j)];
                m[(pivot_row, j)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        let p = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / p;
            if f == 0.0 {
                continue;
            }
            m[(r, col)] = 0.0;
            for j in (col + 1)..n {
                let v = m[(col, j)];
                m[(r, j)] -= f * v;
            }
            x[r] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let s = x[i] - dot(&m.row(i)[i + 1..], &x[i + 1..]);
        x[i] = s / m[(i, i)];
    }
    Ok(x)
}
