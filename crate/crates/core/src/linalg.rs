//! Small dense linear algebra: row-major matrices, LU and Cholesky solves,
//! a Jacobi symmetric eigensolver, the matrix exponential and a symmetric
//! continuous Lyapunov solver. Sizes in this crate stay in the tens to low
//! hundreds, so everything is O(n^3) dense and allocation-happy.

use std::ops::{Index, IndexMut};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors; `None` if the rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    pub fn diag(d: &[T]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn outer(u: &[T], v: &[T]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `A^T x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "tr_mul_vec shape mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `u^T A v`
    pub fn quad_form(&self, u: &[T], v: &[T]) -> T {
        dot(u, &self.mul_vec(v))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    /// Largest absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// First `(i, j)` with `a_ij != a_ji`, compared exactly.
    pub fn first_asymmetry(&self) -> Option<(usize, usize)> {
        (0..self.rows)
            .flat_map(|i| (i + 1..self.cols).map(move |j| (i, j)))
            .find(|&(i, j)| self[(i, j)] != self[(j, i)])
    }

    /// Principal submatrix on `idx`.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |a, b| self[(idx[a], idx[b])])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

/// LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    singular: bool,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        assert!(a.is_square(), "LU of a non-square matrix");
        let n = a.nrows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = a.max_abs() * T::epsilon() * T::count(n.max(1));
        let mut singular = false;
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold {
                singular = true;
                continue;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Self { lu, perm, singular }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        if self.singular {
            return None;
        }
        let n = self.lu.nrows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: T = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: T = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Some(x)
    }
}

pub fn solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    Lu::new(a).solve(b)
}

/// Lower-triangular `L` with `L L^T = A`, or `None` if `A` is not
/// numerically positive definite.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

/// Cyclic Jacobi eigensolver for a symmetric matrix (only the upper
/// triangle is trusted to be consistent with the lower one).
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> SymmetricEigen<T> {
    assert!(a.is_square(), "eigen of a non-square matrix");
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let frob: T = m.as_slice().iter().map(|&x| x * x).sum::<T>().sqrt();
    let floor = T::epsilon() * frob * T::lit(1e-2);

    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= floor || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= floor / T::count(n) {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (apq + apq);
                let t = if theta.abs() > T::max_value().sqrt() {
                    T::one() / (theta + theta)
                } else {
                    let sign = if theta < T::zero() { -T::one() } else { T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = T::zero();
                m[(q, p)] = T::zero();
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[(k, p)];
                        let akq = m[(k, q)];
                        let np = c * akp - s * akq;
                        let nq = s * akp + c * akq;
                        m[(k, p)] = np;
                        m[(p, k)] = np;
                        m[(k, q)] = nq;
                        m[(q, k)] = nq;
                    }
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).expect("finite eigenvalues"));
    SymmetricEigen {
        values: order.iter().map(|&i| m[(i, i)]).collect(),
        vectors: Matrix::from_fn(n, n, |r, c| v[(r, order[c])]),
    }
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    assert!(a.is_square(), "expm of a non-square matrix");
    let n = a.nrows();
    let norm = a.norm_one();
    let mut squarings = 0i32;
    if norm > T::lit(0.25) {
        squarings = (norm / T::lit(0.25)).log2().ceil().to_i32().unwrap_or(0).max(0);
    }
    let b = a.scale(T::lit(2.0).powi(-squarings));
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..40 {
        term = term.matmul(&b).scale(T::one() / T::count(k));
        sum = sum.add(&term);
        if term.max_abs() <= T::epsilon() * sum.max_abs() * T::lit(1e-2) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Orthonormal basis (Helmert contrasts) of `{v : 1^T v = 0}` as the
/// columns of an `n x (n-1)` matrix.
pub fn sum_zero_basis<T: Scalar>(n: usize) -> Matrix<T> {
    let mut u = Matrix::zeros(n, n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let m = T::count(k + 1);
        let norm = (m * (m + T::one())).sqrt();
        for j in 0..=k {
            u[(j, k)] = T::one() / norm;
        }
        u[(k + 1, k)] = -m / norm;
    }
    u
}

/// Solves `A^T X + X A + C = 0` for symmetric `X` given symmetric `C`,
/// by a dense solve on the upper-triangular unknowns. `None` when the
/// Lyapunov operator is singular (A has eigenvalues summing to zero).
pub fn solve_lyapunov<T: Scalar>(a: &Matrix<T>, c: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.nrows();
    let idx = |i: usize, j: usize| {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        lo * n - lo * (lo + 1) / 2 + hi
    };
    let m = n * (n + 1) / 2;
    let mut sys = Matrix::zeros(m, m);
    let mut rhs = vec![T::zero(); m];
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            rhs[row] = -c[(i, j)];
            for k in 0..n {
                sys[(row, idx(k, j))] += a[(k, i)];
                sys[(row, idx(i, k))] += a[(k, j)];
            }
        }
    }
    let x = solve(&sys, &rhs)?;
    Some(Matrix::from_fn(n, n, |i, j| x[idx(i, j)]))
}

/// Index of the first node not mutually reachable with node 0 in the
/// directed graph with an edge `i -> j` whenever `edge(i, j)`.
pub fn first_unreachable(n: usize, edge: impl Fn(usize, usize) -> bool) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let e = if forward { edge(i, j) } else { edge(j, i) };
                if i != j && e && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    (0..n).find(|&i| !(fwd[i] && bwd[i]))
}
