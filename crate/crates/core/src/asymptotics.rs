//! Growth-rate limits at no and infinite dispersal, and the `1/δ`
//! correction at high dispersal.

use crate::error::{Error, Result};
use crate::estimate::{GrowthEstimate, Method};
use crate::linalg::{self, solve_lyapunov, sum_zero_basis, symmetric_eigen, Lu, Matrix};
use crate::model::{detailed_balance_violation, pi_spectrum, DispersalMatrix, Landscape, PatchDistribution};
use crate::scalar::Scalar;

/// Residual tolerance for the deflated singular solves.
pub const SOLVE_TOL: f64 = 1e-9;
/// Commutation tolerance for the diagonalized form, relative to
/// `max|Q| · max|Σ|`.
pub const COMMUTE_TOL: f64 = 1e-10;

fn check_dims<T: Scalar>(q: &DispersalMatrix<T>, landscape: &Landscape<T>) -> Result<()> {
    if q.n() != landscape.n() {
        return Err(Error::DimensionMismatch(format!(
            "dispersal has {} patches, landscape has {}",
            q.n(),
            landscape.n()
        )));
    }
    Ok(())
}

/// `μ^T π − ½ π^T Σ π`.
pub fn chi_infinity<T: Scalar>(landscape: &Landscape<T>, pi: &PatchDistribution<T>) -> Result<GrowthEstimate<T>> {
    if pi.len() != landscape.n() {
        return Err(Error::DimensionMismatch("pi does not match landscape".into()));
    }
    Ok(GrowthEstimate::exact(
        landscape.mean_growth(pi.as_slice()),
        Method::Limit,
    ))
}

/// `max_i (μ_i − σ_ii/2)`.
pub fn chi_zero<T: Scalar>(landscape: &Landscape<T>) -> GrowthEstimate<T> {
    let best = landscape
        .isolated_rates()
        .into_iter()
        .fold(T::neg_infinity(), T::max);
    GrowthEstimate::exact(best, Method::Limit)
}

/// `(diag π − π π^T) v`.
fn centered<T: Scalar>(pi: &[T], v: &[T]) -> Vec<T> {
    let pv = linalg::dot(pi, v);
    pi.iter().zip(v).map(|(&p, &x)| p * (x - pv)).collect()
}

/// `C = (diag π − π π^T) Σ (diag π − π π^T)`.
pub fn centered_covariance<T: Scalar>(pi: &[T], sigma: &Matrix<T>) -> Matrix<T> {
    let n = pi.len();
    let p = Matrix::from_fn(n, n, |i, j| {
        let d = if i == j { pi[i] } else { T::zero() };
        d - pi[i] * pi[j]
    });
    p.matmul(sigma).matmul(&p)
}

/// Unique `ν` with `Q^T ν = −(diag π − π π^T)(μ − Σ π)` and `1^T ν = 0`,
/// solved on the sum-zero subspace.
pub fn nu_vector<T: Scalar>(q: &DispersalMatrix<T>, landscape: &Landscape<T>) -> Result<Vec<T>> {
    check_dims(q, landscape)?;
    let pi = q.pi().as_slice();
    let g: Vec<T> = landscape
        .mu()
        .iter()
        .zip(landscape.sigma().mul_vec(pi))
        .map(|(&m, s)| m - s)
        .collect();
    let rhs: Vec<T> = centered(pi, &g).into_iter().map(|v| -v).collect();
    solve_deflated(q.q(), &rhs)
}

/// Solves `Q^T x = r`, `1^T x = 0` for `r` summing to zero.
pub fn solve_deflated<T: Scalar>(q: &Matrix<T>, r: &[T]) -> Result<Vec<T>> {
    let n = q.nrows();
    if n == 1 {
        return Ok(vec![T::zero()]);
    }
    let u = sum_zero_basis::<T>(n);
    let a = u.transpose().matmul(q).matmul(&u);
    let z = Lu::new(&a.transpose())
        .solve(&u.tr_mul_vec(r))
        .ok_or(Error::InconsistentSystem { residual: f64::INFINITY })?;
    let x = u.mul_vec(&z);
    let qt = q.tr_mul_vec(&x);
    let residual = linalg::max_abs_diff(&qt, r);
    let scale = q.max_abs() * x.iter().fold(T::zero(), |m, v| m.max(v.abs())) + r.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if residual > T::tol(SOLVE_TOL) * scale.max(T::one()) {
        return Err(Error::InconsistentSystem {
            residual: residual.as_f64(),
        });
    }
    Ok(x)
}

/// `M = ∫₀^∞ exp(Q^T s) C exp(Q s) ds` together with `Tr(M Σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gramian<T> {
    pub m: Matrix<T>,
    pub trace: T,
}

fn trace_product<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> T {
    let n = a.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)] * b[(j, i)])
        .sum()
}

/// Lyapunov route: `Q^T M + M Q + C = 0` with `M 1 = 0`, reduced to the
/// sum-zero subspace.
pub fn gramian<T: Scalar>(q: &DispersalMatrix<T>, sigma: &Matrix<T>) -> Result<Gramian<T>> {
    let n = q.n();
    if sigma.nrows() != n {
        return Err(Error::DimensionMismatch("sigma does not match dispersal".into()));
    }
    let c = centered_covariance(q.pi().as_slice(), sigma);
    if n == 1 {
        return Ok(Gramian {
            m: Matrix::zeros(1, 1),
            trace: T::zero(),
        });
    }
    let u = sum_zero_basis::<T>(n);
    let ut = u.transpose();
    let a = ut.matmul(q.q()).matmul(&u);
    let cr = ut.matmul(&c).matmul(&u);
    let mr = solve_lyapunov(&a, &cr).ok_or(Error::InconsistentSystem {
        residual: f64::INFINITY,
    })?;
    let m = u.matmul(&mr).matmul(&ut);
    let trace = trace_product(&m, sigma);
    Ok(Gramian { m, trace })
}

/// Spectral route for reversible `Q`: expand `C` in the π-orthonormal
/// eigenbasis and integrate each mode pair in closed form.
pub fn gramian_spectral<T: Scalar>(q: &DispersalMatrix<T>, sigma: &Matrix<T>) -> Result<Gramian<T>> {
    let n = q.n();
    let pi = q.pi().as_slice();
    let sp = pi_spectrum(q)?;
    let c = centered_covariance(pi, sigma);
    let xi = &sp.vectors;
    // columns ξ_k / π scaled: diag(π)^{-1} ξ_k
    let w = Matrix::from_fn(n, n, |i, k| xi[(i, k)] / pi[i]);
    let cc = w.transpose().matmul(&c).matmul(&w);
    let inner = Matrix::from_fn(n, n, |j, k| {
        if j + 1 == n || k + 1 == n {
            T::zero()
        } else {
            cc[(j, k)] / -(sp.values[j] + sp.values[k])
        }
    });
    let m = xi.matmul(&inner).matmul(&xi.transpose());
    let trace = trace_product(&m, sigma);
    Ok(Gramian { m, trace })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionMethod {
    GeneralReversible,
    Diagonalized,
}

/// `χ(δ) ≈ a + b/δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HighDispersalExpansion<T> {
    pub a: T,
    pub b: T,
    pub nu: Vec<T>,
    pub gramian: Matrix<T>,
    pub gramian_trace: T,
    pub method: ExpansionMethod,
}

impl<T: Scalar> HighDispersalExpansion<T> {
    pub fn chi(&self, delta: T) -> T {
        self.a + self.b / delta
    }

    pub fn estimate(&self, delta: T) -> GrowthEstimate<T> {
        GrowthEstimate::exact(self.chi(delta), Method::Asymptote)
    }
}

/// Leading and `1/δ` coefficients for dispersal `δ Q`, reversible `Q`.
pub fn high_dispersal_expansion<T: Scalar>(
    q: &DispersalMatrix<T>,
    landscape: &Landscape<T>,
) -> Result<HighDispersalExpansion<T>> {
    check_dims(q, landscape)?;
    if !q.is_reversible() {
        return Err(Error::NotReversible {
            violation: detailed_balance_violation(q.q(), q.pi().as_slice()).as_f64(),
        });
    }
    let pi = q.pi().as_slice();
    let a = landscape.mean_growth(pi);
    let nu = nu_vector(q, landscape)?;
    let gram = gramian(q, landscape.sigma())?;
    let g: Vec<T> = landscape
        .mu()
        .iter()
        .zip(landscape.sigma().mul_vec(pi))
        .map(|(&m, s)| m - s)
        .collect();
    let b = linalg::dot(&g, &nu) - gram.trace / T::lit(2.0);
    Ok(HighDispersalExpansion {
        a,
        b,
        nu,
        gramian: gram.m,
        gramian_trace: gram.trace,
        method: ExpansionMethod::GeneralReversible,
    })
}

pub fn chi_high_dispersal<T: Scalar>(
    q: &DispersalMatrix<T>,
    landscape: &Landscape<T>,
    delta: T,
) -> Result<(GrowthEstimate<T>, HighDispersalExpansion<T>)> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("dispersal scale must be positive".into()));
    }
    let e = high_dispersal_expansion(q, landscape)?;
    Ok((e.estimate(delta), e))
}

/// Spectral sums of the diagonalized expansion for symmetric `Q`
/// commuting with `Σ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalizedTerms<T> {
    pub n: usize,
    pub mean_mu: T,
    /// Eigenvalue of `Σ` on the constant vector.
    pub theta_n: T,
    /// `Σ_{k<n} (ξ_k^T μ)² / |λ_k|`.
    pub spatial: T,
    /// `Σ_{k<n} θ_k² / (4n |λ_k|)`.
    pub temporal: T,
}

impl<T: Scalar> DiagonalizedTerms<T> {
    pub fn limit(&self) -> T {
        self.mean_mu - self.theta_n / (T::lit(2.0) * T::count(self.n))
    }

    /// Coefficient of `1/δ`.
    pub fn slope(&self) -> T {
        (self.spatial - self.temporal) / T::count(self.n)
    }

    pub fn chi(&self, delta: T) -> T {
        self.limit() + self.slope() / delta
    }

    /// Temporal variation outweighs spatial variation, so faster
    /// dispersal is favoured at high rates.
    pub fn selects_faster(&self) -> bool {
        self.temporal > self.spatial
    }
}

/// Eigenvalue clusters of `U^T Q U` carry the pairing with `Σ`: inside a
/// cluster only the Frobenius norm of the compressed `Σ` is needed, so
/// degenerate eigenspaces need no particular basis.
pub fn diagonalized_terms<T: Scalar>(
    q: &DispersalMatrix<T>,
    landscape: &Landscape<T>,
) -> Result<DiagonalizedTerms<T>> {
    check_dims(q, landscape)?;
    let qm = q.q();
    if let Some((row, col)) = qm.first_asymmetry() {
        return Err(Error::NotSymmetric { row, col });
    }
    let sigma = landscape.sigma();
    let comm = qm.matmul(sigma).sub(&sigma.matmul(qm)).max_abs();
    let scale = qm.max_abs() * sigma.max_abs();
    if comm > T::tol(COMMUTE_TOL) * scale {
        return Err(Error::NotCommuting {
            deviation: comm.as_f64(),
        });
    }
    let n = q.n();
    let mu = landscape.mu();
    let nn = T::count(n);
    let mean_mu = mu.iter().copied().sum::<T>() / nn;
    let theta_n = sigma.as_slice().iter().copied().sum::<T>() / nn;
    if n == 1 {
        return Ok(DiagonalizedTerms {
            n,
            mean_mu,
            theta_n,
            spatial: T::zero(),
            temporal: T::zero(),
        });
    }
    let u = sum_zero_basis::<T>(n);
    let ut = u.transpose();
    let a = ut.matmul(qm).matmul(&u);
    let a = Matrix::from_fn(n - 1, n - 1, |i, j| (a[(i, j)] + a[(j, i)]) / T::lit(2.0));
    let b = ut.matmul(sigma).matmul(&u);
    let mu_r = u.tr_mul_vec(mu);
    let eig = symmetric_eigen(&a);
    let cluster_tol = T::tol(1e-9) * qm.max_abs();
    let mut spatial = T::zero();
    let mut temporal = T::zero();
    let mut start = 0;
    while start < n - 1 {
        let mut end = start + 1;
        while end < n - 1 && (eig.values[end] - eig.values[end - 1]).abs() <= cluster_tol {
            end += 1;
        }
        let lambda = eig.values[start..end].iter().copied().sum::<T>() / T::count(end - start);
        if !(lambda < T::zero()) {
            return Err(Error::NonNegativeCharacterRate {
                value: lambda.as_f64(),
            });
        }
        let w = Matrix::from_fn(n - 1, end - start, |i, k| eig.vectors[(i, start + k)]);
        let proj = w.tr_mul_vec(&mu_r);
        let bw = w.transpose().matmul(&b).matmul(&w);
        let mu_sq: T = proj.iter().map(|&x| x * x).sum();
        let theta_sq: T = bw.as_slice().iter().map(|&x| x * x).sum();
        spatial += mu_sq / -lambda;
        temporal += theta_sq / (T::lit(4.0) * nn * -lambda);
        start = end;
    }
    Ok(DiagonalizedTerms {
        n,
        mean_mu,
        theta_n,
        spatial,
        temporal,
    })
}

pub fn chi_diagonalized<T: Scalar>(
    q: &DispersalMatrix<T>,
    landscape: &Landscape<T>,
    delta: T,
) -> Result<GrowthEstimate<T>> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("dispersal scale must be positive".into()));
    }
    let terms = diagonalized_terms(q, landscape)?;
    Ok(GrowthEstimate::exact(terms.chi(delta), Method::Asymptote))
}

/// Qualitative predictions for Levins dispersal with exchangeable noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelectionPredicates {
    /// `χ` decreases in `δ` at high dispersal.
    pub decreasing_at_high_delta: bool,
    /// `χ(∞) > χ(0)`.
    pub high_beats_zero: bool,
    /// Both of the above, so an intermediate rate is optimal.
    pub intermediate_optimal_hint: bool,
    /// Faster dispersal is selected at high rates.
    pub selects_faster: bool,
}

/// Predicates for `n` patches with growth rates `mu`, variance `s2` and
/// correlation `rho`.
pub fn selection_predicates<T: Scalar>(mu: &[T], s2: T, rho: T) -> Result<SelectionPredicates> {
    let n = mu.len();
    if n < 2 {
        return Err(Error::InvalidParameter("predicates need at least two patches".into()));
    }
    crate::model::exchangeable_sigma(n, s2, rho)?;
    let nn = T::count(n);
    let mean = mu.iter().copied().sum::<T>() / nn;
    let var = mu.iter().map(|&m| (m - mean) * (m - mean)).sum::<T>() / nn;
    let max = mu.iter().copied().fold(T::neg_infinity(), T::max);
    let temporal = (T::one() - rho) * s2 / T::lit(2.0);
    let spatial = nn / T::count(n - 1).sqrt() * var.sqrt();
    let decreasing = spatial > temporal;
    let high = temporal > (max - mean) / (T::one() - T::one() / nn);
    Ok(SelectionPredicates {
        decreasing_at_high_delta: decreasing,
        high_beats_zero: high,
        intermediate_optimal_hint: decreasing && high,
        selects_faster: temporal > spatial,
    })
}
