//! Adaptive Gauss–Kronrod (7/15) quadrature of vector-valued integrands.

#![allow(clippy::excessive_precision)]

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
struct Piece<T, const K: usize> {
    a: T,
    b: T,
    value: [T; K],
    error: [T; K],
}

fn gk15<T: Scalar, const K: usize>(f: &impl Fn(T) -> [T; K], a: T, b: T) -> Piece<T, K> {
    let two = T::lit(2.0);
    let center = (a + b) / two;
    let half = (b - a) / two;
    let mut kron = [T::zero(); K];
    let mut gauss = [T::zero(); K];
    let fc = f(center);
    for k in 0..K {
        kron[k] = fc[k] * T::lit(WGK[7]);
        gauss[k] = fc[k] * T::lit(WG[3]);
    }
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            kron[k] += s * T::lit(WGK[j]);
            if j % 2 == 1 {
                gauss[k] += s * T::lit(WG[j / 2]);
            }
        }
    }
    let mut value = [T::zero(); K];
    let mut error = [T::zero(); K];
    for k in 0..K {
        value[k] = kron[k] * half;
        error[k] = ((kron[k] - gauss[k]) * half).abs();
    }
    Piece { a, b, value, error }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Options<T> {
    /// Required `error ≤ rel_tol · |value|` on every component.
    pub rel_tol: T,
    /// Absolute floor added to the tolerance.
    pub abs_tol: T,
    pub initial_intervals: usize,
    pub max_intervals: usize,
}

impl<T: Scalar> Default for Options<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::tol(1e-12),
            abs_tol: T::zero(),
            initial_intervals: 64,
            max_intervals: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral<T, const K: usize> {
    pub value: [T; K],
    pub error: [T; K],
    pub intervals: usize,
}

/// Integrates `f` over `[a, b]`, bisecting the worst interval until every
/// component meets the tolerance.
pub fn integrate<T: Scalar, const K: usize>(
    f: impl Fn(T) -> [T; K],
    a: T,
    b: T,
    opts: &Options<T>,
) -> Result<Integral<T, K>> {
    let m = opts.initial_intervals.max(1);
    let width = (b - a) / T::count(m);
    let mut pieces: Vec<Piece<T, K>> = (0..m)
        .map(|i| {
            let lo = a + width * T::count(i);
            let hi = if i + 1 == m { b } else { a + width * T::count(i + 1) };
            gk15(&f, lo, hi)
        })
        .collect();
    loop {
        let mut value = [T::zero(); K];
        let mut error = [T::zero(); K];
        for p in &pieces {
            for k in 0..K {
                value[k] += p.value[k];
                error[k] += p.error[k];
            }
        }
        if value.iter().chain(&error).any(|v| !v.is_finite()) {
            return Err(Error::QuadratureFailure {
                error: f64::NAN,
                intervals: pieces.len(),
            });
        }
        let budget: [T; K] = std::array::from_fn(|k| opts.rel_tol * value[k].abs() + opts.abs_tol);
        if (0..K).all(|k| error[k] <= budget[k]) {
            return Ok(Integral {
                value,
                error,
                intervals: pieces.len(),
            });
        }
        if pieces.len() >= opts.max_intervals {
            let worst = (0..K)
                .map(|k| (error[k] / value[k].abs()).as_f64())
                .fold(0.0, f64::max);
            return Err(Error::QuadratureFailure {
                error: worst,
                intervals: pieces.len(),
            });
        }
        // worst piece measured against each component's budget
        let score = |p: &Piece<T, K>| {
            (0..K)
                .map(|k| {
                    let b = budget[k].max(T::min_positive_value());
                    p.error[k] / b
                })
                .fold(T::zero(), T::max)
        };
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (i, score(p)))
            .fold((0, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
        let p = pieces.swap_remove(idx);
        let mid = (p.a + p.b) / T::lit(2.0);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::QuadratureFailure {
                error: score(&p).as_f64(),
                intervals: pieces.len() + 1,
            });
        }
        pieces.push(gk15(&f, p.a, mid));
        pieces.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| [x.powi(10), 1.0], 0.0, 1.0, &Options::default()).unwrap();
        assert!((r.value[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((r.value[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sqrt_singularity_converges() {
        let opts = Options {
            rel_tol: 1e-10,
            ..Options::default()
        };
        let r = integrate(|x: f64| [x.sqrt()], 0.0, 1.0, &opts).unwrap();
        assert!((r.value[0] - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = Options {
            rel_tol: 1e-14,
            initial_intervals: 1,
            max_intervals: 3,
            ..Options::default()
        };
        let r = integrate(|x: f64| [1.0 / x.sqrt()], 0.0, 1.0, &opts);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
