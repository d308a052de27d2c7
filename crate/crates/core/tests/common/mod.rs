#![allow(dead_code)]

use patchdrift::linalg::Matrix;
use patchdrift::model::{validate_dispersal, DispersalMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Reversible generator with a random stationary law: `Q_ij = W_ij / π_i`
/// for a symmetric positive `W`.
pub fn random_reversible(rng: &mut ChaCha8Rng, n: usize) -> DispersalMatrix<f64> {
    let pi: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(0.1..2.0);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
    }
    let q = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w[(i, j)] / pi[i] });
    let q = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -q.row(i).iter().sum::<f64>()
        } else {
            q[(i, j)]
        }
    });
    validate_dispersal(q).unwrap()
}

/// Irreducible generator with no structure.
pub fn random_generator(rng: &mut ChaCha8Rng, n: usize) -> DispersalMatrix<f64> {
    let q = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(0.05..2.0) });
    let q = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -q.row(i).iter().sum::<f64>()
        } else {
            q[(i, j)]
        }
    });
    validate_dispersal(q).unwrap()
}

/// `A A^T + floor I` with uniform entries of `A`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Matrix<f64> {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut s = a.matmul(&a.transpose());
    for i in 0..n {
        s[(i, i)] += floor;
    }
    Matrix::from_fn(n, n, |i, j| (s[(i, j)] + s[(j, i)]) / 2.0)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn to_na(m: &Matrix<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.nrows(), m.ncols(), m.as_slice())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
