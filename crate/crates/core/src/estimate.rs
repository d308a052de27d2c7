use std::fmt;

/// Which route produced a growth-rate value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Slope of simulated log total abundance.
    McLogS,
    /// Plug-in of simulated occupation moments.
    McMoments,
    /// Two-patch stationary density quadrature.
    Quadrature,
    /// High-dispersal expansion `a + b/δ`.
    Asymptote,
    /// Exact `δ → 0` or `δ → ∞` limit.
    Limit,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::McLogS => "mc_logS",
            Method::McMoments => "mc_moments",
            Method::Quadrature => "quadrature",
            Method::Asymptote => "asymptote",
            Method::Limit => "limit",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::McLogS | Method::McMoments)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value of the stochastic growth rate χ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthEstimate<T> {
    pub chi: T,
    /// Zero for deterministic methods.
    pub std_error: T,
    pub method: Method,
    /// Number of batch means behind `std_error` (0 when not applicable).
    pub segments: usize,
}

impl<T: crate::Scalar> GrowthEstimate<T> {
    pub fn exact(chi: T, method: Method) -> Self {
        Self {
            chi,
            std_error: T::zero(),
            method,
            segments: 0,
        }
    }

    /// `|a − b| ≤ k · sqrt(se_a² + se_b²)`.
    pub fn agrees_with(&self, other: &Self, k: T) -> bool {
        let se = (self.std_error * self.std_error + other.std_error * other.std_error).sqrt();
        (self.chi - other.chi).abs() <= k * se
    }
}
