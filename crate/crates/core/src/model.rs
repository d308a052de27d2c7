//! Landscapes, dispersal generators, patch distributions and the
//! π-weighted spectrum of a reversible generator.

use crate::error::{Error, Result};
use crate::linalg::{self, first_unreachable, symmetric_eigen, Lu, Matrix};
use crate::scalar::Scalar;

/// Relative eigenvalue floor below which a covariance counts as singular.
pub const RANK_TOL: f64 = 1e-10;
/// Row-sum tolerance relative to the largest rate.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Detailed-balance tolerance relative to the largest probability flux.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

fn check_square<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

fn check_finite<T: Scalar>(what: &str, xs: &[T]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Growth rates `mu`, noise covariance `sigma` and its lower Cholesky
/// factor (the transpose of the noise matrix Γ).
#[derive(Clone, Debug, PartialEq)]
pub struct Landscape<T> {
    mu: Vec<T>,
    sigma: Matrix<T>,
    factor: Matrix<T>,
}

impl<T: Scalar> Landscape<T> {
    pub fn new(mu: Vec<T>, sigma: Matrix<T>) -> Result<Self> {
        check_square(&sigma)?;
        if mu.len() != sigma.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "mu has {} entries but sigma is {}x{}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if mu.is_empty() {
            return Err(Error::InvalidParameter("a landscape needs at least one patch".into()));
        }
        check_finite("mu", &mu)?;
        check_finite("sigma", sigma.as_slice())?;
        let factor = noise_factor(&sigma)?;
        Ok(Self { mu, sigma, factor })
    }

    /// Independent patches with variances `var`.
    pub fn uncorrelated(mu: Vec<T>, var: &[T]) -> Result<Self> {
        Self::new(mu, Matrix::diag(var))
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn sigma(&self) -> &Matrix<T> {
        &self.sigma
    }

    /// Lower-triangular `L = Γ^T` with `L L^T = Σ`.
    pub fn noise_factor(&self) -> &Matrix<T> {
        &self.factor
    }

    /// `Γ` itself, upper triangular with `Γ^T Γ = Σ`.
    pub fn gamma(&self) -> Matrix<T> {
        self.factor.transpose()
    }

    /// Patch-wise growth rate in isolation, `μ_i − σ_ii/2`.
    pub fn isolated_rates(&self) -> Vec<T> {
        self.mu
            .iter()
            .zip(self.sigma.diagonal())
            .map(|(&m, s)| m - s / T::lit(2.0))
            .collect()
    }

    /// `g(y) = μ^T y − ½ y^T Σ y`.
    pub fn mean_growth(&self, y: &[T]) -> T {
        linalg::dot(&self.mu, y) - self.sigma.quad_form(y, y) / T::lit(2.0)
    }

    /// Same covariance, growth rates shifted by `c`.
    pub fn shifted(&self, c: T) -> Self {
        Self {
            mu: self.mu.iter().map(|&m| m + c).collect(),
            ..self.clone()
        }
    }

    /// Relabels patches so that new patch `i` is old patch `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::new(
            perm.iter().map(|&p| self.mu[p]).collect(),
            self.sigma.select(perm),
        )
        .expect("permutation of a valid landscape is valid")
    }
}

/// Lower Cholesky factor of a covariance matrix, after checking exact
/// symmetry and a relative eigenvalue floor.
pub fn noise_factor<T: Scalar>(sigma: &Matrix<T>) -> Result<Matrix<T>> {
    check_square(sigma)?;
    if let Some((row, col)) = sigma.first_asymmetry() {
        return Err(Error::NotSymmetric { row, col });
    }
    let eig = symmetric_eigen(sigma);
    let lo = eig.values.first().copied().unwrap_or_else(T::zero);
    let hi = eig.values.last().copied().unwrap_or_else(T::zero);
    if !(lo > T::lit(RANK_TOL) * hi.abs()) || !(hi > T::zero()) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lo.as_f64(),
        });
    }
    cholesky_checked(sigma, lo)
}

fn cholesky_checked<T: Scalar>(sigma: &Matrix<T>, lo: T) -> Result<Matrix<T>> {
    linalg::cholesky(sigma).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: lo.as_f64(),
    })
}

/// `σ²(1−ρ)I + σ²ρJ`, admissible for `−1/(n−1) < ρ < 1`.
pub fn exchangeable_sigma<T: Scalar>(n: usize, var: T, rho: T) -> Result<Matrix<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let lower = if n > 1 {
        -T::one() / T::count(n - 1)
    } else {
        -T::infinity()
    };
    if !(rho > lower && rho < T::one()) {
        return Err(Error::BadCorrelation {
            rho: rho.as_f64(),
            lower: lower.as_f64(),
        });
    }
    Ok(Matrix::from_fn(n, n, |i, j| if i == j { var } else { var * rho }))
}

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchDistribution<T> {
    y: Vec<T>,
}

impl<T: Scalar> PatchDistribution<T> {
    pub fn new(y: Vec<T>) -> Result<Self> {
        check_finite("patch distribution", &y)?;
        if y.is_empty() {
            return Err(Error::InvalidParameter("empty patch distribution".into()));
        }
        if let Some(i) = y.iter().position(|&v| v < T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "patch fraction {i} is negative ({})",
                y[i]
            )));
        }
        let s: T = y.iter().copied().sum();
        if (s - T::one()).abs() > T::tol(1e-12) * T::count(y.len()) {
            return Err(Error::InvalidParameter(format!(
                "patch fractions sum to {s}, not 1"
            )));
        }
        Ok(Self { y })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            y: vec![T::one() / T::count(n); n],
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.y
    }

    pub fn into_vec(self) -> Vec<T> {
        self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Indices with strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i] > T::zero()).collect()
    }

    pub fn in_open_simplex(&self) -> bool {
        self.y.iter().all(|&v| v > T::zero())
    }
}

/// A validated irreducible dispersal generator with its stationary law.
#[derive(Clone, Debug, PartialEq)]
pub struct DispersalMatrix<T> {
    q: Matrix<T>,
    pi: PatchDistribution<T>,
    reversible: bool,
}

impl<T: Scalar> DispersalMatrix<T> {
    pub fn new(q: Matrix<T>) -> Result<Self> {
        validate_dispersal(q)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &Matrix<T> {
        &self.q
    }

    pub fn pi(&self) -> &PatchDistribution<T> {
        &self.pi
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn is_symmetric(&self) -> bool {
        self.q.first_asymmetry().is_none()
    }

    /// `δ Q`.
    pub fn scaled(&self, delta: T) -> Matrix<T> {
        self.q.scale(delta)
    }

    /// `c Q` as a dispersal matrix; `π` and reversibility carry over.
    pub fn rescaled(&self, c: T) -> Self {
        assert!(c > T::zero(), "rescale factor must be positive");
        Self {
            q: self.q.scale(c),
            ..self.clone()
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        validate_dispersal(self.q.select(perm)).expect("relabeling preserves validity")
    }
}

/// Checks sign pattern, zero row sums and strong connectivity, then
/// caches `π` and the reversibility flag.
pub fn validate_dispersal<T: Scalar>(q: Matrix<T>) -> Result<DispersalMatrix<T>> {
    check_square(&q)?;
    check_finite("dispersal matrix", q.as_slice())?;
    let n = q.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty dispersal matrix".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] < T::zero() {
                return Err(Error::NegativeOffDiagonal {
                    row: i,
                    col: j,
                    value: q[(i, j)].as_f64(),
                });
            }
        }
    }
    let scale = q.max_abs();
    for i in 0..n {
        let sum: T = q.row(i).iter().copied().sum();
        if sum.abs() > T::tol(ROW_SUM_TOL) * scale {
            return Err(Error::NonZeroRowSum {
                row: i,
                sum: sum.as_f64(),
            });
        }
    }
    if let Some(unreachable) = first_unreachable(n, |i, j| q[(i, j)] > T::zero()) {
        return Err(Error::Reducible { unreachable });
    }
    let pi = stationary_distribution(&q)?;
    let reversible = detailed_balance_violation(&q, pi.as_slice()) <= T::tol(REVERSIBILITY_TOL);
    Ok(DispersalMatrix { q, pi, reversible })
}

/// Solves `π^T Q = 0`, `1^T π = 1` by replacing the last equation with the
/// normalization.
pub fn stationary_distribution<T: Scalar>(q: &Matrix<T>) -> Result<PatchDistribution<T>> {
    check_square(q)?;
    let n = q.nrows();
    let mut a = q.transpose();
    for j in 0..n {
        a[(n - 1, j)] = T::one();
    }
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let pi = Lu::new(&a).solve(&rhs).ok_or(Error::SingularBeyondRankOne)?;
    if pi.iter().any(|&p| !(p > T::zero())) {
        return Err(Error::SingularBeyondRankOne);
    }
    let s: T = pi.iter().copied().sum();
    PatchDistribution::new(pi.into_iter().map(|p| p / s).collect())
}

/// Largest `|π_i Q_ij − π_j Q_ji|` relative to the largest flux `π_i |Q_ij|`.
pub fn detailed_balance_violation<T: Scalar>(q: &Matrix<T>, pi: &[T]) -> T {
    let n = q.nrows();
    let mut worst = T::zero();
    let mut flux = T::zero();
    for i in 0..n {
        for j in 0..n {
            flux = flux.max((pi[i] * q[(i, j)]).abs());
            if i < j {
                worst = worst.max((pi[i] * q[(i, j)] - pi[j] * q[(j, i)]).abs());
            }
        }
    }
    if flux == T::zero() {
        T::zero()
    } else {
        worst / flux
    }
}

pub fn is_reversible<T: Scalar>(q: &DispersalMatrix<T>) -> bool {
    q.reversible
}

/// Levins generator `J/n − I`: leave at unit rate, land uniformly
/// (possibly back home).
pub fn levins<T: Scalar>(n: usize) -> Result<DispersalMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("Levins dispersal needs n >= 2".into()));
    }
    let inv = T::one() / T::count(n);
    validate_dispersal(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            inv - T::one()
        } else {
            inv
        }
    }))
}

/// `Q_ij = r_i` for `j != i`, where `r_i` is `fast_rate` on `fast_set`
/// (zero-based) and `slow_rate` elsewhere.
pub fn two_rate_dispersal<T: Scalar>(
    n: usize,
    fast_set: &[usize],
    slow_rate: T,
    fast_rate: T,
) -> Result<DispersalMatrix<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("two-rate dispersal needs n >= 2".into()));
    }
    if let Some(&bad) = fast_set.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidParameter(format!(
            "fast patch index {bad} out of range for n = {n}"
        )));
    }
    if !(slow_rate > T::zero() && fast_rate > T::zero()) {
        return Err(Error::InvalidParameter("dispersal rates must be positive".into()));
    }
    let rate = |i: usize| if fast_set.contains(&i) { fast_rate } else { slow_rate };
    validate_dispersal(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -rate(i) * T::count(n - 1)
        } else {
            rate(i)
        }
    }))
}

/// `1 π^T − I`: jump at unit rate to a `π`-distributed patch.
pub fn resampling_dispersal<T: Scalar>(pi: &[T]) -> Result<DispersalMatrix<T>> {
    let n = pi.len();
    validate_dispersal(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            pi[j] - T::one()
        } else {
            pi[j]
        }
    }))
}

/// Eigenpairs of `v ↦ Q^T v` for reversible `Q`, orthonormal in
/// `⟨u, v⟩_π = Σ u_i v_i / π_i`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<T> {
    /// Ascending, last entry exactly zero.
    pub values: Vec<T>,
    /// Column `k` is `ξ_k`; the last column equals `π`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }

    /// Smallest nonzero `|λ|`.
    pub fn spectral_gap(&self) -> T {
        let n = self.values.len();
        if n < 2 {
            T::zero()
        } else {
            -self.values[n - 2]
        }
    }
}

pub fn pi_spectrum<T: Scalar>(q: &DispersalMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let pi = q.pi().as_slice();
    if !q.reversible {
        return Err(Error::NotReversible {
            violation: detailed_balance_violation(q.q(), pi).as_f64(),
        });
    }
    let n = q.n();
    let root: Vec<T> = pi.iter().map(|p| p.sqrt()).collect();
    let qm = q.q();
    // S_ij = sqrt(π_j/π_i) Q_ji, symmetric under detailed balance
    let s = Matrix::from_fn(n, n, |i, j| {
        let a = qm[(j, i)] * root[j] / root[i];
        let b = qm[(i, j)] * root[i] / root[j];
        (a + b) / T::lit(2.0)
    });
    let eig = symmetric_eigen(&s);
    let mut values = eig.values;
    let mut vectors = Matrix::from_fn(n, n, |i, k| root[i] * eig.vectors[(i, k)]);
    values[n - 1] = T::zero();
    for (i, &p) in pi.iter().enumerate() {
        vectors[(i, n - 1)] = p;
    }
    Ok(SpectralDecomposition { values, vectors })
}
