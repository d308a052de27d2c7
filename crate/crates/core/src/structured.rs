//! Landscapes labelled by a product of cyclic groups: character
//! transforms, ring habitats and hierarchical multi-scale habitats.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::estimate::{GrowthEstimate, Method};
use crate::linalg::Matrix;
use crate::model::{validate_dispersal, DispersalMatrix, Landscape};
use crate::scalar::Scalar;

/// Default bound on the group order accepted by the character routines.
pub const DEFAULT_MAX_ORDER: usize = 4096;
/// Largest imaginary residue tolerated in quantities that must be real.
pub const IMAG_TOL: f64 = 1e-10;

/// `Z_{n_1} × ⋯ × Z_{n_k}` with mixed-radix element indices, the first
/// factor being the most significant digit (the coarsest scale).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicProductGroup {
    factors: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
}

impl CyclicProductGroup {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(Error::InvalidParameter(
                "cyclic factors must be a nonempty list of positive orders".into(),
            ));
        }
        let order = factors
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::InvalidParameter("group order overflows".into()))?;
        let mut strides = vec![1; factors.len()];
        for j in (0..factors.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * factors[j + 1];
        }
        Ok(Self {
            factors,
            strides,
            order,
        })
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Number of scales `k`.
    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        self.factors
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| (index / s) % n)
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.factors)
            .zip(&self.strides)
            .map(|((&c, &n), &s)| (c % n) * s)
            .sum()
    }

    /// Index of `g h⁻¹`.
    pub fn difference(&self, g: usize, h: usize) -> usize {
        let mut idx = 0;
        for (j, (&n, &s)) in self.factors.iter().zip(&self.strides).enumerate() {
            let _ = j;
            let a = (g / s) % n;
            let b = (h / s) % n;
            idx += ((a + n - b) % n) * s;
        }
        idx
    }

    /// Index of `g⁻¹`.
    pub fn inverse(&self, g: usize) -> usize {
        self.difference(0, g)
    }

    /// Scale of a displacement: one plus the position of its first
    /// non-identity coordinate, `k + 1` for the identity.
    pub fn scale_of(&self, g: usize) -> usize {
        self.coords(g)
            .iter()
            .position(|&c| c != 0)
            .map_or(self.depth() + 1, |j| j + 1)
    }

    /// Scale of a character: one plus the position of its last
    /// nontrivial coordinate, 0 for the trivial character.
    pub fn character_scale(&self, m: usize) -> usize {
        self.coords(m).iter().rposition(|&c| c != 0).map_or(0, |j| j + 1)
    }

    /// Matrix `F_{gh} = f(g h⁻¹)`.
    pub fn expand<T: Scalar>(&self, f: &[T]) -> Matrix<T> {
        Matrix::from_fn(self.order, self.order, |g, h| f[self.difference(g, h)])
    }

    fn check_len<T>(&self, what: &str, f: &[T]) -> Result<()> {
        if f.len() != self.order {
            return Err(Error::DimensionMismatch(format!(
                "{what} has {} values, group order is {}",
                f.len(),
                self.order
            )));
        }
        Ok(())
    }

    fn check_order(&self, limit: usize) -> Result<()> {
        if self.order > limit {
            return Err(Error::GroupTooLarge {
                order: self.order,
                limit,
            });
        }
        Ok(())
    }
}

fn dft_axes<T: Scalar>(group: &CyclicProductGroup, data: &mut [Complex<T>], sign: T) {
    for (&n, &stride) in group.factors.iter().zip(&group.strides) {
        if n == 1 {
            continue;
        }
        let tw: Vec<Complex<T>> = (0..n)
            .map(|t| {
                let angle = sign * T::lit(2.0) * T::PI() * T::count(t) / T::count(n);
                Complex::new(angle.cos(), angle.sin())
            })
            .collect();
        let block = n * stride;
        let mut line = vec![Complex::new(T::zero(), T::zero()); n];
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                for (g, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + offset + g * stride];
                }
                for m in 0..n {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (g, &v) in line.iter().enumerate() {
                        acc += v * tw[(m * g) % n];
                    }
                    data[base + offset + m * stride] = acc;
                }
            }
        }
    }
}

/// `f̃(κ_m) = Σ_g f(g) κ_m(g)` with `κ_m(g) = exp(2πi Σ_j m_j g_j / n_j)`,
/// indexed by the mixed-radix index of `m`.
pub fn character_transform<T: Scalar>(group: &CyclicProductGroup, f: &[T]) -> Result<Vec<Complex<T>>> {
    group.check_len("class function", f)?;
    let mut data: Vec<Complex<T>> = f.iter().map(|&v| Complex::new(v, T::zero())).collect();
    dft_axes(group, &mut data, T::one());
    Ok(data)
}

/// `f(g) = (1/#G) Σ_κ κ(g)* f̃(κ)`.
pub fn inverse_character_transform<T: Scalar>(
    group: &CyclicProductGroup,
    ft: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    group.check_len("transform", ft)?;
    let mut data = ft.to_vec();
    dft_axes(group, &mut data, -T::one());
    let inv = T::one() / T::count(group.order());
    Ok(data.into_iter().map(|v| v * inv).collect())
}

fn real_part<T: Scalar>(what: &str, v: Complex<T>, scale: T) -> Result<T> {
    if v.im.abs() > T::tol(IMAG_TOL) * scale.max(T::one()) {
        return Err(Error::NonFinite(format!(
            "{what} has imaginary residue {}",
            v.im
        )));
    }
    Ok(v.re)
}

/// Per-character ingredients of the high-dispersal expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CharacterTerm<T> {
    pub index: usize,
    /// Dispersal eigenvalue `q̃(κ)`.
    pub q_tilde: T,
    /// Covariance eigenvalue `s̃(κ)`.
    pub s_tilde: T,
    /// `‖μ‖²_κ = |μ̃(κ)|² / #G`.
    pub mu_norm_sq: T,
}

fn check_profiles<T: Scalar>(group: &CyclicProductGroup, q: &[T], s: &[T], mu: &[T]) -> Result<()> {
    group.check_len("dispersal profile", q)?;
    group.check_len("covariance profile", s)?;
    group.check_len("growth rates", mu)?;
    let tol = T::tol(1e-12);
    let qscale = q.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let total: T = q.iter().copied().sum();
    if total.abs() > tol * qscale * T::count(group.order()) {
        return Err(Error::NonZeroRowSum {
            row: 0,
            sum: total.as_f64(),
        });
    }
    for g in 0..group.order() {
        if g != 0 && q[g] < T::zero() {
            return Err(Error::NegativeOffDiagonal {
                row: 0,
                col: g,
                value: q[g].as_f64(),
            });
        }
        let gi = group.inverse(g);
        if q[g] != q[gi] {
            return Err(Error::InvalidParameter(format!(
                "dispersal profile is not symmetric under inversion at element {g}"
            )));
        }
        if s[g] != s[gi] {
            return Err(Error::NotSymmetric { row: 0, col: g });
        }
    }
    Ok(())
}

/// Transforms of `q`, `s` and `μ` for every character (trivial first).
pub fn character_terms<T: Scalar>(
    group: &CyclicProductGroup,
    q: &[T],
    s: &[T],
    mu: &[T],
) -> Result<Vec<CharacterTerm<T>>> {
    check_profiles(group, q, s, mu)?;
    let qt = character_transform(group, q)?;
    let st = character_transform(group, s)?;
    let mt = character_transform(group, mu)?;
    let sum_abs = |f: &[T]| f.iter().map(|v| v.abs()).sum::<T>();
    let (qs, ss) = (sum_abs(q), sum_abs(s));
    let order = T::count(group.order());
    (0..group.order())
        .map(|i| {
            Ok(CharacterTerm {
                index: i,
                q_tilde: real_part("dispersal eigenvalue", qt[i], qs)?,
                s_tilde: real_part("covariance eigenvalue", st[i], ss)?,
                mu_norm_sq: mt[i].norm_sqr() / order,
            })
        })
        .collect()
}

/// High-dispersal expansion from the characters of an abelian group, for
/// symmetric class functions `q` (dispersal) and `s` (covariance).
pub fn chi_character<T: Scalar>(
    group: &CyclicProductGroup,
    q: &[T],
    s: &[T],
    mu: &[T],
    delta: T,
) -> Result<GrowthEstimate<T>> {
    chi_character_limited(group, q, s, mu, delta, DEFAULT_MAX_ORDER)
}

pub fn chi_character_limited<T: Scalar>(
    group: &CyclicProductGroup,
    q: &[T],
    s: &[T],
    mu: &[T],
    delta: T,
    max_order: usize,
) -> Result<GrowthEstimate<T>> {
    group.check_order(max_order)?;
    if group.order() == 1 {
        return Err(Error::TrivialOnlySpectrum);
    }
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("dispersal scale must be positive".into()));
    }
    let terms = character_terms(group, q, s, mu)?;
    let n = T::count(group.order());
    let mean_mu = mu.iter().copied().sum::<T>() / n;
    let mean_s = s.iter().copied().sum::<T>() / n;
    let mut sum = T::zero();
    for t in &terms[1..] {
        if !(t.q_tilde < T::zero()) {
            return Err(Error::NonNegativeCharacterRate {
                value: t.q_tilde.as_f64(),
            });
        }
        sum += (t.mu_norm_sq - t.s_tilde * t.s_tilde / (T::lit(4.0) * n)) / t.q_tilde;
    }
    Ok(GrowthEstimate::exact(
        mean_mu - mean_s / T::lit(2.0) - sum / (delta * n),
        Method::Asymptote,
    ))
}

/// Nearest-neighbour ring: `q(±1) = 1/2`, `q(0) = −1`, independent noise
/// of variance `s2`.
pub fn ring_profiles<T: Scalar>(n: usize, s2: T) -> Result<(Vec<T>, Vec<T>)> {
    if n < 3 {
        return Err(Error::InvalidParameter("a ring needs at least three patches".into()));
    }
    let mut q = vec![T::zero(); n];
    let half = T::lit(0.5);
    q[0] = -T::one();
    q[1] = half;
    q[n - 1] = half;
    let mut s = vec![T::zero(); n];
    s[0] = s2;
    Ok((q, s))
}

/// `μ(k) = μ̄ + c cos(2πkℓ/n)`.
pub fn cosine_mu<T: Scalar>(n: usize, mean: T, c: T, ell: usize) -> Vec<T> {
    (0..n)
        .map(|k| {
            let angle = T::lit(2.0) * T::PI() * T::count((k * ell) % n) / T::count(n);
            mean + c * angle.cos()
        })
        .collect()
}

/// `1 − cos(2πk/n)` without cancellation.
fn one_minus_cos<T: Scalar>(k: usize, n: usize) -> T {
    let s = (T::PI() * T::count(k) / T::count(n)).sin();
    T::lit(2.0) * s * s
}

/// `Σ_{k=1}^{n−1} (1 − cos(2πk/n))⁻¹`, which equals `(n² − 1)/6`.
pub fn inverse_cosine_sum<T: Scalar>(n: usize) -> T {
    (1..n).map(|k| T::one() / one_minus_cos::<T>(k, n)).sum()
}

fn check_mode(n: usize, ell: usize) -> Result<()> {
    if ell == 0 || 2 * ell >= n {
        return Err(Error::BadMode { mode: ell, n });
    }
    Ok(())
}

/// Closed-form expansion on the nearest-neighbour ring with a single
/// cosine mode in `μ`.
pub fn chi_circle<T: Scalar>(n: usize, s2: T, mean: T, c: T, ell: usize, delta: T) -> Result<GrowthEstimate<T>> {
    check_mode(n, ell)?;
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("dispersal scale must be positive".into()));
    }
    let nn = T::count(n);
    let n2 = nn * nn;
    let lead = mean - s2 / (T::lit(2.0) * nn);
    let mode = T::lit(2.0) * n2 * c * c / one_minus_cos::<T>(ell, n);
    let noise = (n2 - T::one()) * s2 * s2 / T::lit(6.0);
    Ok(GrowthEstimate::exact(
        lead + (mode - noise) / (T::lit(4.0) * delta * n2),
        Method::Asymptote,
    ))
}

/// `χ(∞) − χ(0)` on the ring.
pub fn circle_high_minus_zero<T: Scalar>(n: usize, s2: T, c: T) -> T {
    s2 * (T::one() - T::one() / T::count(n)) / T::lit(2.0) - c
}

/// The `1/δ` coefficient on the ring is positive.
pub fn circle_decreasing_at_high_delta<T: Scalar>(n: usize, s2: T, c: T, ell: usize) -> Result<bool> {
    check_mode(n, ell)?;
    let nn = T::count(n);
    let rhs = one_minus_cos::<T>(ell, n) * (T::one() - T::one() / (nn * nn)) * s2 * s2 / T::lit(3.0);
    Ok(T::lit(4.0) * c * c > rhs)
}

/// Hierarchical habitat where dispersal rates and covariances depend only
/// on the coarsest scale at which two patches differ.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiScaleSpec<T> {
    group: CyclicProductGroup,
    /// `q_1, …, q_{k+1}`, the last entry the diagonal completion.
    q_rates: Vec<T>,
    /// `s_1, …, s_{k+1}`, the last entry the own-patch variance.
    s_covs: Vec<T>,
    mu: Vec<T>,
}

impl<T: Scalar> MultiScaleSpec<T> {
    /// `q_rates` may hold `k` entries (the diagonal is completed) or
    /// `k + 1` entries (the last is checked against the completion).
    pub fn new(group: CyclicProductGroup, q_rates: Vec<T>, s_covs: Vec<T>, mu: Vec<T>) -> Result<Self> {
        let k = group.depth();
        if s_covs.len() != k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} scale covariances, got {}",
                k + 1,
                s_covs.len()
            )));
        }
        group.check_len("growth rates", &mu)?;
        let mut q = match q_rates.len() {
            l if l == k || l == k + 1 => q_rates.clone(),
            l => {
                return Err(Error::DimensionMismatch(format!(
                    "expected {k} or {} scale dispersal rates, got {l}",
                    k + 1
                )))
            }
        };
        if q[..k].iter().any(|&v| !(v >= T::zero())) {
            return Err(Error::InvalidParameter("scale dispersal rates must be >= 0".into()));
        }
        if q.iter().chain(&s_covs).chain(&mu).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("multi-scale parameters".into()));
        }
        let nbar = |l: usize| -> usize { group.factors()[l..].iter().product() };
        let completion = -(1..=k)
            .map(|l| q[l - 1] * T::count(nbar(l - 1) - nbar(l)))
            .sum::<T>();
        if q.len() == k + 1 {
            let scale = q.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if (q[k] - completion).abs() > T::tol(1e-12) * scale * T::count(group.order()) {
                return Err(Error::NonZeroRowSum {
                    row: 0,
                    sum: (q[k] - completion).as_f64(),
                });
            }
            q[k] = completion;
        } else {
            q.push(completion);
        }
        Ok(Self {
            group,
            q_rates: q,
            s_covs,
            mu,
        })
    }

    pub fn group(&self) -> &CyclicProductGroup {
        &self.group
    }

    pub fn q_rates(&self) -> &[T] {
        &self.q_rates
    }

    pub fn s_covs(&self) -> &[T] {
        &self.s_covs
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    /// `q(g) = q_{ℓ(g)}` as a function on the group.
    pub fn q_profile(&self) -> Vec<T> {
        (0..self.group.order())
            .map(|g| self.q_rates[self.group.scale_of(g) - 1])
            .collect()
    }

    /// `s(g) = s_{ℓ(g)}` as a function on the group.
    pub fn s_profile(&self) -> Vec<T> {
        (0..self.group.order())
            .map(|g| self.s_covs[self.group.scale_of(g) - 1])
            .collect()
    }

    /// `N_r = Π_{j<r} n_j` for `r = 1..=k+1`, stored at index `r − 1`.
    fn n_coarse(&self, r: usize) -> usize {
        self.group.factors()[..r - 1].iter().product()
    }

    /// `N̄_r = Π_{j>r} n_j` for `r = 0..=k`.
    fn n_fine(&self, r: usize) -> usize {
        self.group.factors()[r..].iter().product()
    }
}

/// Dense `Q` and `Σ` of a multi-scale habitat.
pub fn expand_multiscale<T: Scalar>(spec: &MultiScaleSpec<T>) -> Result<(DispersalMatrix<T>, Landscape<T>)> {
    let q = validate_dispersal(spec.group.expand(&spec.q_profile()))?;
    let landscape = Landscape::new(spec.mu.clone(), spec.group.expand(&spec.s_profile()))?;
    Ok((q, landscape))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleDecomposition<T> {
    /// `N_1, …, N_{k+1}`.
    pub n_coarse: Vec<usize>,
    /// `N̄_0, …, N̄_k`.
    pub n_fine: Vec<usize>,
    /// `v_μ(r)` for `r = 1..=k` at index `r − 1`; likewise below.
    pub v_mu: Vec<T>,
    pub s_tilde: Vec<T>,
    pub q_tilde: Vec<T>,
}

/// Per-scale variance of `μ`, covariance contrasts and dispersal
/// eigenvalues.
pub fn scale_decompose<T: Scalar>(spec: &MultiScaleSpec<T>) -> ScaleDecomposition<T> {
    let k = spec.group.depth();
    let factors = spec.group.factors();
    let n_coarse: Vec<usize> = (1..=k + 1).map(|r| spec.n_coarse(r)).collect();
    let n_fine: Vec<usize> = (0..=k).map(|r| spec.n_fine(r)).collect();
    let q = &spec.q_rates;
    let s = &spec.s_covs;
    let mut v_mu = Vec::with_capacity(k);
    let mut s_tilde = Vec::with_capacity(k);
    let mut q_tilde = Vec::with_capacity(k);
    for r in 1..=k {
        let nr = factors[r - 1];
        let fine = n_fine[r];
        let metas = n_coarse[r - 1];
        let mut acc = T::zero();
        for meta in 0..metas {
            let means: Vec<T> = (0..nr)
                .map(|h| {
                    let start = (meta * nr + h) * fine;
                    spec.mu[start..start + fine].iter().copied().sum::<T>() / T::count(fine)
                })
                .collect();
            let m = means.iter().copied().sum::<T>() / T::count(nr);
            acc += means.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::count(nr);
        }
        v_mu.push(acc / T::count(metas));
        s_tilde.push(
            (r..=k)
                .map(|l| (s[l] - s[l - 1]) * T::count(n_fine[l]))
                .sum(),
        );
        let below: T = (1..=r)
            .map(|l| q[l - 1] * T::count(n_fine[l - 1] - n_fine[l]))
            .sum();
        q_tilde.push(-below - q[r - 1] * T::count(n_fine[r]));
    }
    ScaleDecomposition {
        n_coarse,
        n_fine,
        v_mu,
        s_tilde,
        q_tilde,
    }
}

/// Scale-by-scale high-dispersal expansion of a multi-scale habitat.
pub fn chi_multiscale<T: Scalar>(spec: &MultiScaleSpec<T>, delta: T) -> Result<GrowthEstimate<T>> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("dispersal scale must be positive".into()));
    }
    let dec = scale_decompose(spec);
    let k = spec.group.depth();
    let total = spec.group.order();
    let nt = T::count(total);
    let mean_mu = spec.mu.iter().copied().sum::<T>() / nt;
    let mean_s = spec.s_profile().into_iter().sum::<T>() / nt;
    let mut sum = T::zero();
    for r in 1..=k {
        let count = dec.n_coarse[r] - dec.n_coarse[r - 1];
        if count == 0 {
            continue;
        }
        let qt = dec.q_tilde[r - 1];
        if !(qt < T::zero()) {
            return Err(Error::NonNegativeCharacterRate { value: qt.as_f64() });
        }
        let st = dec.s_tilde[r - 1];
        let noise = T::count(count) / (T::lit(4.0) * nt * nt) * st * st;
        sum += (dec.v_mu[r - 1] - noise) / qt;
    }
    Ok(GrowthEstimate::exact(
        mean_mu - mean_s / T::lit(2.0) - sum / delta,
        Method::Asymptote,
    ))
}
