//! Exact two-patch growth rate from the stationary density of the
//! fraction in patch 1 (independent noise in the two patches).

use crate::error::{Error, Result};
use crate::estimate::{GrowthEstimate, Method};
use crate::quadrature::{self, Options};
use crate::scalar::Scalar;

/// Log-integrand cutoff below the peak, in nats.
const TAIL_NATS: f64 = 90.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPatchParams<T> {
    pub mu1: T,
    pub mu2: T,
    pub s1sq: T,
    pub s2sq: T,
    /// Rate from patch 1 to patch 2.
    pub d12: T,
    /// Rate from patch 2 to patch 1.
    pub d21: T,
}

impl<T: Scalar> TwoPatchParams<T> {
    /// Equal patches with `D_12 = D_21 = δ/2`, i.e. `δ` times the Levins
    /// generator on two patches.
    pub fn symmetric(mu: T, s2: T, delta: T) -> Self {
        let half = delta / T::lit(2.0);
        Self {
            mu1: mu,
            mu2: mu,
            s1sq: s2,
            s2sq: s2,
            d12: half,
            d21: half,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu1, self.mu2, self.s1sq, self.s2sq, self.d12, self.d21];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("two-patch parameters".into()));
        }
        if !(self.s1sq > T::zero() && self.s2sq > T::zero()) {
            return Err(Error::InvalidParameter("two-patch variances must be positive".into()));
        }
        if !(self.d12 > T::zero() && self.d21 > T::zero()) {
            return Err(Error::InvalidParameter(
                "two-patch dispersal rates must both be positive".into(),
            ));
        }
        Ok(())
    }

    /// Patch labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            mu1: self.mu2,
            mu2: self.mu1,
            s1sq: self.s2sq,
            s2sq: self.s1sq,
            d12: self.d21,
            d21: self.d12,
        }
    }

    fn total_var(&self) -> T {
        self.s1sq + self.s2sq
    }

    pub fn alpha(&self) -> (T, T) {
        let two = T::lit(2.0);
        (two * self.s1sq / self.total_var(), two * self.s2sq / self.total_var())
    }

    pub fn beta(&self) -> T {
        T::lit(2.0) * (self.mu1 - self.mu2 + self.d21 - self.d12) / self.total_var()
    }

    /// Unnormalized `ln ρ(y)` written in `u = logit(y)`, plus `extra`
    /// powers of `y(1 − y)` (1 gives the `du` Jacobian).
    fn log_density_u(&self, u: T, extra: T) -> T {
        let (a1, a2) = self.alpha();
        let beta = self.beta();
        let ln_y = -softplus(-u);
        let ln_1my = -softplus(u);
        let kappa = T::lit(2.0) / self.total_var();
        // 1/y = 1 + e^{-u}, 1/(1-y) = 1 + e^{u}
        (beta - a1 + extra) * ln_y + (-beta - a2 + extra) * ln_1my
            - kappa * (self.d21 * (T::one() + (-u).exp()) + self.d12 * (T::one() + u.exp()))
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(u: T) -> T {
    T::one() / (T::one() + (-u).exp())
}

/// Normalized stationary density with its first two moments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryDensity<T> {
    pub params: TwoPatchParams<T>,
    /// `ln` of the normalizing constant of `exp(ln ρ − shift)`.
    log_norm: T,
    shift: T,
    pub mean_y: T,
    pub mean_1my: T,
    pub mean_y2: T,
    pub mean_1my2: T,
    /// Integration range in logit coordinates.
    pub range: (T, T),
    pub intervals: usize,
}

impl<T: Scalar> StationaryDensity<T> {
    /// Normalized `ρ(y)` for `y ∈ (0, 1)`.
    pub fn rho(&self, y: T) -> T {
        if !(y > T::zero() && y < T::one()) {
            return T::zero();
        }
        let u = (y / (T::one() - y)).ln();
        (self.params.log_density_u(u, T::zero()) - self.shift - self.log_norm).exp()
    }

    /// `E[Y(1 − Y)]`.
    pub fn mean_y_1my(&self) -> T {
        self.mean_y - self.mean_y2
    }

    /// `(y, ρ(y))` at `points` interior grid nodes `y = k/(points+1)`.
    pub fn grid(&self, points: usize) -> Vec<(T, T)> {
        (1..=points)
            .map(|k| {
                let y = T::count(k) / T::count(points + 1);
                (y, self.rho(y))
            })
            .collect()
    }

    pub fn chi(&self) -> T {
        let p = &self.params;
        p.mu1 * self.mean_y + p.mu2 * self.mean_1my
            - (p.s1sq * self.mean_y2 + p.s2sq * self.mean_1my2) / T::lit(2.0)
    }
}

/// Locates the stationary density in logit coordinates and integrates its
/// moments by adaptive quadrature in log space.
pub fn stationary_density<T: Scalar>(params: &TwoPatchParams<T>) -> Result<StationaryDensity<T>> {
    params.validate()?;
    let span = (T::max_value().ln() * T::lit(0.9)).min(T::lit(300.0));
    let h = T::lit(0.01);
    let steps = (span / h).to_usize().unwrap_or(0);
    let node = |k: isize| h * T::from_isize(k).expect("grid index");
    let mut peak = T::neg_infinity();
    let mut logs = Vec::with_capacity(2 * steps + 1);
    for k in -(steps as isize)..=(steps as isize) {
        let l = params.log_density_u(node(k), T::one());
        if l > peak {
            peak = l;
        }
        logs.push(l);
    }
    if !peak.is_finite() {
        return Err(Error::QuadratureFailure {
            error: f64::NAN,
            intervals: 0,
        });
    }
    let floor = peak - T::lit(TAIL_NATS);
    let first = logs.iter().position(|&l| l >= floor).unwrap_or(0);
    let last = logs.iter().rposition(|&l| l >= floor).unwrap_or(logs.len() - 1);
    let lo = node(first as isize - steps as isize - 1);
    let hi = node(last as isize - steps as isize + 1);

    let f = |u: T| -> [T; 5] {
        let w = (params.log_density_u(u, T::one()) - peak).exp();
        let y = sigmoid(u);
        let z = sigmoid(-u);
        [w, w * y, w * z, w * y * y, w * z * z]
    };
    let opts = Options {
        initial_intervals: 128,
        ..Options::default()
    };
    let r = quadrature::integrate(f, lo, hi, &opts)?;
    let z = r.value[0];
    if !(z > T::zero()) {
        return Err(Error::QuadratureFailure {
            error: f64::NAN,
            intervals: r.intervals,
        });
    }
    Ok(StationaryDensity {
        params: *params,
        log_norm: z.ln(),
        shift: peak,
        mean_y: r.value[1] / z,
        mean_1my: r.value[2] / z,
        mean_y2: r.value[3] / z,
        mean_1my2: r.value[4] / z,
        range: (lo, hi),
        intervals: r.intervals,
    })
}

pub fn chi_quadrature<T: Scalar>(params: &TwoPatchParams<T>) -> Result<GrowthEstimate<T>> {
    let d = stationary_density(params)?;
    Ok(GrowthEstimate::exact(d.chi(), Method::Quadrature))
}

/// `μ − σ²/4 − σ⁴/(16δ)` for the symmetric family.
pub fn chi_symmetric_asymptote<T: Scalar>(delta: T, mu: T, s2: T) -> Result<GrowthEstimate<T>> {
    if !(delta > T::zero()) {
        return Err(Error::InvalidParameter("dispersal scale must be positive".into()));
    }
    let chi = mu - s2 / T::lit(4.0) - s2 * s2 / (T::lit(16.0) * delta);
    Ok(GrowthEstimate::exact(chi, Method::Asymptote))
}

/// `χ(0) = max(μ_i − σ_i²/2)`.
pub fn chi_sedentary<T: Scalar>(params: &TwoPatchParams<T>) -> T {
    let two = T::lit(2.0);
    (params.mu1 - params.s1sq / two).max(params.mu2 - params.s2sq / two)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriticalDispersal<T> {
    Root {
        delta: T,
        /// Width of the final bracket.
        bracket: T,
        iterations: usize,
    },
    /// χ keeps one sign between `δ → 0` and `δ_max`.
    NoRoot { chi_zero: T, chi_max: T },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootOptions<T> {
    pub delta_max: T,
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for RootOptions<T> {
    fn default() -> Self {
        Self {
            delta_max: T::lit(1e3),
            tol: T::tol(1e-8),
            max_iterations: 200,
        }
    }
}

/// Bisection for `χ(δ) = 0` over `(0, δ_max]` where `family(δ)` gives the
/// parameters at dispersal scale `δ`. The sign at the left end is that of
/// the sedentary limit.
pub fn critical_dispersal<T: Scalar>(
    family: impl Fn(T) -> TwoPatchParams<T>,
    opts: &RootOptions<T>,
) -> Result<CriticalDispersal<T>> {
    let chi_zero = chi_sedentary(&family(opts.delta_max));
    let chi_max = chi_quadrature(&family(opts.delta_max))?.chi;
    if chi_zero == T::zero() {
        return Ok(CriticalDispersal::Root {
            delta: T::zero(),
            bracket: T::zero(),
            iterations: 0,
        });
    }
    if (chi_zero > T::zero()) == (chi_max > T::zero()) {
        return Ok(CriticalDispersal::NoRoot { chi_zero, chi_max });
    }
    let positive_low = chi_zero > T::zero();
    let (mut lo, mut hi) = (T::zero(), opts.delta_max);
    let mut iterations = 0;
    while hi - lo > opts.tol && iterations < opts.max_iterations {
        let mid = (lo + hi) / T::lit(2.0);
        if !(mid > lo && mid < hi) {
            break;
        }
        let c = chi_quadrature(&family(mid))?.chi;
        if (c > T::zero()) == positive_low {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(CriticalDispersal::Root {
        delta: (lo + hi) / T::lit(2.0),
        bracket: hi - lo,
        iterations,
    })
}

/// Critical dispersal of the symmetric family.
pub fn critical_dispersal_symmetric<T: Scalar>(
    mu: T,
    s2: T,
    opts: &RootOptions<T>,
) -> Result<CriticalDispersal<T>> {
    critical_dispersal(|d| TwoPatchParams::symmetric(mu, s2, d), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_density_is_mirror_symmetric() {
        let d = stationary_density(&TwoPatchParams::symmetric(0.3f64, 1.0, 1.0)).unwrap();
        for (y, r) in d.grid(19) {
            assert!((r - d.rho(1.0 - y)).abs() <= 1e-12 * r.max(1.0));
        }
        assert!((d.mean_y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn asymptote_value() {
        let a = chi_symmetric_asymptote(10.0f64, 0.3, 1.0).unwrap();
        assert!((a.chi - 0.04375).abs() < 1e-15);
    }

    #[test]
    fn invalid_rates() {
        let mut p = TwoPatchParams::symmetric(0.3, 1.0, 1.0);
        p.d12 = 0.0;
        assert!(stationary_density(&p).is_err());
    }
}
