//! Shared instance generators and independent reference computations.
//!
//! The oracles here use naive `Vec<Vec<f64>>` Gaussian elimination and never
//! call into the library's numerics.

#![allow(dead_code, clippy::needless_range_loop)]

use projres::model::{Dataset, DeletionRequest};
use projres::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub data: Dataset,
    pub req: DeletionRequest,
    pub lambda: f64,
}

impl Instance {
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.data.len()).map(|i| self.data.row(i).to_vec()).collect()
    }

    pub fn deleted_rows(&self) -> Vec<Vec<f64>> {
        self.req.indices().iter().map(|&i| self.data.row(i).to_vec()).collect()
    }

    /// Rows and labels that survive the deletion.
    pub fn retained(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mask = self.req.mask(self.data.len());
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..self.data.len() {
            if !mask[i] {
                rows.push(self.data.row(i).to_vec());
                y.push(self.data.y()[i]);
            }
        }
        (rows, y)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Dense Gaussian design with `y = Xθ* + 0.1ε`.
pub fn gaussian_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let theta: Vec<f64> = (0..d).map(|_| gaussian(rng)).collect();
    let x: Vec<f64> = (0..n * d).map(|_| gaussian(rng)).collect();
    let y = (0..n)
        .map(|i| dot(&x[i * d..(i + 1) * d], &theta) + 0.1 * gaussian(rng))
        .collect();
    Dataset::new(DenseMatrix::from_row_major(n, d, x).unwrap(), y).unwrap()
}

pub fn random_request(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DeletionRequest {
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    DeletionRequest::new(idx, n).unwrap()
}

/// Random instance with `d ≤ max_d`, `k ≤ max_k` and `2d ≤ n ≤ max_n`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_d: usize, max_k: usize, lambda: f64) -> Instance {
    let d = rng.gen_range(1..=max_d);
    let k = rng.gen_range(1..=max_k);
    let lo = (2 * d).max(2 * k + 2);
    let n = rng.gen_range(lo..=max_n.max(lo));
    let data = gaussian_data(rng, n, d);
    let req = random_request(rng, n, k);
    Instance { data, req, lambda }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting on an owned copy.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        let piv = a[col][col];
        assert!(piv != 0.0, "oracle hit a zero pivot");
        for r in col + 1..n {
            let f = a[r][col] / piv;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// `XᵀX + λI` from explicit rows.
pub fn normal_matrix(rows: &[Vec<f64>], d: usize, lambda: f64) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += lambda;
    }
    a
}

pub fn ridge(rows: &[Vec<f64>], y: &[f64], d: usize, lambda: f64) -> Vec<f64> {
    let mut b = vec![0.0; d];
    for (r, yi) in rows.iter().zip(y) {
        for j in 0..d {
            b[j] += r[j] * yi;
        }
    }
    solve(normal_matrix(rows, d, lambda), b)
}

/// Dense `H = X(XᵀX + λI)⁻¹Xᵀ`.
pub fn hat(rows: &[Vec<f64>], d: usize, lambda: f64) -> Vec<Vec<f64>> {
    let a = normal_matrix(rows, d, lambda);
    let w: Vec<Vec<f64>> = rows.iter().map(|r| solve(a.clone(), r.clone())).collect();
    rows.iter().map(|ri| w.iter().map(|wj| dot(ri, wj)).collect()).collect()
}

/// Projection of `w` onto the row space of `rows` through the normal
/// equations; requires linearly independent rows.
pub fn project(rows: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let g: Vec<Vec<f64>> = rows.iter().map(|a| rows.iter().map(|b| dot(a, b)).collect()).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| dot(r, w)).collect();
    let c = solve(g, rhs);
    let mut out = vec![0.0; w.len()];
    for (ci, r) in c.iter().zip(rows) {
        for j in 0..w.len() {
            out[j] += ci * r[j];
        }
    }
    out
}

pub fn max_abs_diff(a: &DenseMatrix, b: &[Vec<f64>]) -> f64 {
    let mut m: f64 = 0.0;
    for (i, row) in b.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m = m.max((a[(i, j)] - v).abs());
        }
    }
    m
}
