//! Maximization of `g(y) = μ^T y − ½ y^T Σ y` over the probability simplex.

use crate::error::{Error, Result};
use crate::linalg::{self, symmetric_eigen, Lu, Matrix};
use crate::model::{exchangeable_sigma, noise_factor, PatchDistribution};
use crate::scalar::Scalar;

/// Entries below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct IdealFreeSolution<T> {
    pub y_star: PatchDistribution<T>,
    pub support: Vec<usize>,
    /// Common value of `(μ − Σ y*)_i` on the support.
    pub lambda: T,
    /// `g(y*)`, an upper bound for the growth rate under any dispersal.
    pub g_value: T,
    /// Largest violation of the optimality conditions.
    pub kkt_residual: T,
    pub iterations: usize,
}

fn check_inputs<T: Scalar>(mu: &[T], sigma: &Matrix<T>) -> Result<()> {
    if mu.len() != sigma.nrows() || !sigma.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "mu has {} entries, sigma is {}x{}",
            mu.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if mu.is_empty() {
        return Err(Error::InvalidParameter("empty landscape".into()));
    }
    noise_factor(sigma).map(|_| ())
}

fn objective<T: Scalar>(mu: &[T], sigma: &Matrix<T>, y: &[T]) -> T {
    linalg::dot(mu, y) - sigma.quad_form(y, y) / T::lit(2.0)
}

/// Optimum of `g` on the affine hull of the face `free`:
/// `y_F = Σ_FF⁻¹ (μ_F − λ 1)`.
fn face_optimum<T: Scalar>(mu: &[T], sigma: &Matrix<T>, free: &[usize]) -> Option<(Vec<T>, T)> {
    let lu = Lu::new(&sigma.select(free));
    let a = lu.solve(&free.iter().map(|&i| mu[i]).collect::<Vec<_>>())?;
    let b = lu.solve(&vec![T::one(); free.len()])?;
    let sa: T = a.iter().copied().sum();
    let sb: T = b.iter().copied().sum();
    let lambda = (sa - T::one()) / sb;
    Some((a.iter().zip(&b).map(|(&x, &w)| x - lambda * w).collect(), lambda))
}

/// `(λ, residual)` for a feasible `y` with the given support.
fn kkt<T: Scalar>(mu: &[T], sigma: &Matrix<T>, y: &[T], support: &[usize]) -> (T, T) {
    let grad: Vec<T> = mu
        .iter()
        .zip(sigma.mul_vec(y))
        .map(|(&m, s)| m - s)
        .collect();
    let lambda = support.iter().map(|&i| grad[i]).sum::<T>() / T::count(support.len());
    let mut res = T::zero();
    for (i, &g) in grad.iter().enumerate() {
        if support.contains(&i) {
            res = res.max((g - lambda).abs());
        } else {
            res = res.max(g - lambda);
        }
    }
    (lambda, res)
}

/// Primal active-set method started from the uniform distribution.
///
/// Each iteration moves toward the optimum of the current face, stopping at
/// the first blocking coordinate (lowest index on ties). At a face optimum
/// the coordinate with the most negative multiplier `λ − (μ − Σy)_i`
/// is released (lowest index on ties).
pub fn optimize<T: Scalar>(mu: &[T], sigma: &Matrix<T>) -> Result<IdealFreeSolution<T>> {
    check_inputs(mu, sigma)?;
    let n = mu.len();
    let zero_tol = T::tol(ZERO_TOL);
    let mut y = vec![T::one() / T::count(n); n];
    let mut free: Vec<usize> = (0..n).collect();
    let limit = 50 * n + 100;
    for iterations in 1..=limit {
        let (target, lambda) = face_optimum(mu, sigma, &free)
            .ok_or(Error::NotPositiveDefinite { min_eigenvalue: 0.0 })?;
        let mut alpha = T::one();
        let mut blocking = None;
        for (k, &i) in free.iter().enumerate() {
            let p = target[k] - y[i];
            if p < T::zero() {
                let ratio = y[i] / -p;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        for (k, &i) in free.iter().enumerate() {
            let step = alpha * (target[k] - y[i]);
            y[i] += step;
        }
        if let Some(j) = blocking {
            y[j] = T::zero();
            free.retain(|&i| i != j);
            for &i in &free {
                if y[i] < zero_tol {
                    y[i] = T::zero();
                }
            }
            continue;
        }
        for &i in &free {
            if y[i] < zero_tol {
                y[i] = T::zero();
            }
        }
        let grad: Vec<T> = mu.iter().zip(sigma.mul_vec(&y)).map(|(&m, s)| m - s).collect();
        let release = (0..n)
            .filter(|i| !free.contains(i))
            .map(|i| (i, lambda - grad[i]))
            .filter(|&(_, eta)| eta < -zero_tol)
            .fold(None, |best: Option<(usize, T)>, cur| match best {
                Some(b) if b.1 <= cur.1 => Some(b),
                _ => Some(cur),
            });
        match release {
            Some((i, _)) => {
                free.push(i);
                free.sort_unstable();
            }
            None => return Ok(finish(mu, sigma, y, iterations)),
        }
    }
    Err(Error::InvalidParameter(format!(
        "active-set method did not terminate in {limit} iterations"
    )))
}

fn finish<T: Scalar>(mu: &[T], sigma: &Matrix<T>, mut y: Vec<T>, iterations: usize) -> IdealFreeSolution<T> {
    let s: T = y.iter().copied().sum();
    for v in &mut y {
        *v /= s;
    }
    let support: Vec<usize> = (0..y.len()).filter(|&i| y[i] > T::zero()).collect();
    let (lambda, kkt_residual) = kkt(mu, sigma, &y, &support);
    let g_value = objective(mu, sigma, &y);
    IdealFreeSolution {
        y_star: PatchDistribution::new(y).expect("active set stays on the simplex"),
        support,
        lambda,
        g_value,
        kkt_residual,
        iterations,
    }
}

/// Solves on the face spanned by `support` only (entries elsewhere are 0).
pub fn optimize_on_support<T: Scalar>(
    mu: &[T],
    sigma: &Matrix<T>,
    support: &[usize],
) -> Result<IdealFreeSolution<T>> {
    check_inputs(mu, sigma)?;
    let sub_mu: Vec<T> = support.iter().map(|&i| mu[i]).collect();
    let sub = optimize(&sub_mu, &sigma.select(support))?;
    let mut y = vec![T::zero(); mu.len()];
    for (k, &i) in support.iter().enumerate() {
        y[i] = sub.y_star.as_slice()[k];
    }
    Ok(finish(mu, sigma, y, sub.iterations))
}

/// Euclidean projection onto the simplex (sort-based).
pub fn project_simplex<T: Scalar>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - T::one()) / T::count(k + 1);
        if uk - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Slow reference solver: projected gradient ascent with step `1/λ_max(Σ)`.
pub fn optimize_projected_gradient<T: Scalar>(
    mu: &[T],
    sigma: &Matrix<T>,
    max_iter: usize,
    tol: T,
) -> Result<PatchDistribution<T>> {
    check_inputs(mu, sigma)?;
    let n = mu.len();
    let lmax = *symmetric_eigen(sigma).values.last().expect("nonempty");
    let step = T::one() / lmax;
    let mut y = vec![T::one() / T::count(n); n];
    for _ in 0..max_iter {
        let sy = sigma.mul_vec(&y);
        let moved: Vec<T> = (0..n).map(|i| y[i] + step * (mu[i] - sy[i])).collect();
        let next = project_simplex(&moved);
        let change = linalg::max_abs_diff(&next, &y);
        y = next;
        if change <= tol {
            break;
        }
    }
    let s: T = y.iter().copied().sum();
    PatchDistribution::new(y.into_iter().map(|v| v / s).collect())
}

/// A closed-form candidate that may leave the simplex.
#[derive(Clone, Debug, PartialEq)]
pub enum ClosedForm<T> {
    Interior(PatchDistribution<T>),
    /// Some entry is not positive; the raw formula values are kept and
    /// `optimize` must be used instead.
    InteriorConditionFails(Vec<T>),
}

impl<T: Scalar> ClosedForm<T> {
    fn from_raw(y: Vec<T>) -> Self {
        if y.iter().all(|&v| v > T::zero()) {
            match PatchDistribution::new(y.clone()) {
                Ok(p) => ClosedForm::Interior(p),
                Err(_) => ClosedForm::InteriorConditionFails(y),
            }
        } else {
            ClosedForm::InteriorConditionFails(y)
        }
    }

    pub fn interior(&self) -> Option<&PatchDistribution<T>> {
        match self {
            ClosedForm::Interior(p) => Some(p),
            ClosedForm::InteriorConditionFails(_) => None,
        }
    }
}

/// Interior optimum for independent patches with variances `var`.
pub fn closed_form_uncorrelated<T: Scalar>(mu: &[T], var: &[T]) -> Result<ClosedForm<T>> {
    if mu.len() != var.len() || mu.is_empty() {
        return Err(Error::DimensionMismatch("mu and variances differ in length".into()));
    }
    if var.iter().any(|&v| !(v > T::zero())) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: 0.0 });
    }
    let prec: T = var.iter().map(|&v| T::one() / v).sum();
    let y = (0..mu.len())
        .map(|i| {
            let spread: T = mu.iter().zip(var).map(|(&mj, &vj)| (mu[i] - mj) / vj).sum();
            (spread + T::one()) / (var[i] * prec)
        })
        .collect();
    Ok(ClosedForm::from_raw(y))
}

/// Interior optimum for exchangeable noise `σ²((1−ρ)I + ρJ)`.
pub fn closed_form_exchangeable<T: Scalar>(mu: &[T], s2: T, rho: T) -> Result<ClosedForm<T>> {
    let n = mu.len();
    exchangeable_sigma(n, s2, rho)?;
    if !(s2 > T::zero()) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: s2.as_f64() });
    }
    let mean = mu.iter().copied().sum::<T>() / T::count(n);
    let scale = s2 * (T::one() - rho);
    let inv_n = T::one() / T::count(n);
    Ok(ClosedForm::from_raw(
        mu.iter().map(|&m| (m - mean) / scale + inv_n).collect(),
    ))
}

/// `max_{y ∈ Δ} g(y)`.
pub fn chi_upper_bound<T: Scalar>(mu: &[T], sigma: &Matrix<T>) -> Result<T> {
    Ok(optimize(mu, sigma)?.g_value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchCount {
    /// Smallest number of exchangeable patches with positive growth at
    /// full mixing.
    Patches(usize),
    /// Correlation too strong for any number of patches.
    Infeasible,
}

/// Smallest `n` with `μ − ((n−1)ρ + 1)σ²/(2n) > 0`.
pub fn persistence_patch_count<T: Scalar>(mu: T, s2: T, rho: T) -> Result<PatchCount> {
    if !(mu > T::zero()) {
        return Err(Error::InvalidParameter("persistence count needs mu > 0".into()));
    }
    if !(s2 > T::zero()) || !(rho < T::one()) {
        return Err(Error::InvalidParameter("need s2 > 0 and rho < 1".into()));
    }
    let slope = T::lit(2.0) * mu - rho * s2;
    if !(slope > T::zero()) {
        return Ok(PatchCount::Infeasible);
    }
    let persists = |n: usize| T::count(n) * slope > (T::one() - rho) * s2;
    let x = (T::one() - rho) * s2 / slope;
    let mut n = x.floor().to_usize().map_or(usize::MAX, |f| f.saturating_add(1)).max(1);
    if n == usize::MAX {
        return Ok(PatchCount::Infeasible);
    }
    while !persists(n) {
        n += 1;
    }
    while n > 1 && persists(n - 1) {
        n -= 1;
    }
    Ok(PatchCount::Patches(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_patch() {
        let s = optimize(&[0.3f64, 0.3], &Matrix::identity(2)).unwrap();
        assert_eq!(s.y_star.as_slice(), &[0.5, 0.5]);
        assert!((s.lambda + 0.2).abs() < 1e-15);
        assert!((s.g_value - 0.05).abs() < 1e-15);
    }

    #[test]
    fn single_patch_regime() {
        let s = optimize(&[1.0, 0.0], &Matrix::diag(&[0.1, 0.1])).unwrap();
        assert_eq!(s.y_star.as_slice(), &[1.0, 0.0]);
        assert_eq!(s.support, vec![0]);
    }

    #[test]
    fn projection_onto_simplex() {
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5f64, 0.5, 0.5]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn uncorrelated_plug_in() {
        let y = closed_form_uncorrelated(&[0.3f64, 0.3], &[1.0, 4.0]).unwrap();
        let y = y.interior().unwrap().as_slice();
        assert!((y[0] - 0.8).abs() < 1e-15 && (y[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn persistence_counts() {
        assert_eq!(persistence_patch_count(0.3, 1.0, 0.0).unwrap(), PatchCount::Patches(2));
        assert_eq!(persistence_patch_count(0.3, 1.0, 0.6).unwrap(), PatchCount::Infeasible);
        assert_eq!(persistence_patch_count(0.3, 0.5, 0.0).unwrap(), PatchCount::Patches(1));
    }
}
