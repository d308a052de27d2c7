//! Scenario configuration: JSON schema, validation and normalization.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeSpec>,
    #[serde(default)]
    pub sim: SimSpec,
    pub tasks: Vec<TaskSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `Q = J/n − I`.
    Levins { n: usize },
    /// Per-patch exit rate `fast_rate` on `fast` (zero-based), `slow_rate`
    /// elsewhere, uniform destination.
    TwoRate {
        n: usize,
        fast: Vec<usize>,
        slow_rate: f64,
        fast_rate: f64,
    },
    /// Nearest-neighbour ring with cosine growth profile and independent
    /// noise of variance `s2`.
    Circle {
        n: usize,
        s2: f64,
        mean: f64,
        amplitude: f64,
        mode: usize,
    },
    /// Nested cyclic hierarchy; `q_rates` and `s_covs` are indexed by scale.
    Multiscale {
        factors: Vec<usize>,
        q_rates: Vec<f64>,
        s_covs: Vec<f64>,
        mu: Vec<f64>,
    },
    Explicit { q: Vec<Vec<f64>> },
}

impl ModelSpec {
    /// Whether the model supplies its own growth rates and noise.
    pub fn has_landscape(&self) -> bool {
        matches!(self, ModelSpec::Circle { .. } | ModelSpec::Multiscale { .. })
    }
}

/// Growth rates plus exactly one noise description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub mu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchangeable: Option<Exchangeable>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exchangeable {
    pub var: f64,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    #[default]
    LogAbundance,
    Fraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::burn_in")]
    pub burn_in: f64,
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    #[serde(default = "defaults::segments")]
    pub segments: usize,
    #[serde(default)]
    pub scheme: SchemeSpec,
}

mod defaults {
    use patchdrift::SimConfig;

    fn base() -> SimConfig {
        SimConfig::default()
    }
    pub fn dt() -> f64 {
        base().dt
    }
    pub fn horizon() -> f64 {
        base().horizon
    }
    pub fn burn_in() -> f64 {
        base().burn_in
    }
    pub fn replicates() -> usize {
        base().replicates
    }
    pub fn segments() -> usize {
        base().segments
    }
    pub fn stride() -> usize {
        100
    }
    pub fn points() -> usize {
        199
    }
    pub fn sigmas() -> f64 {
        3.0
    }
    pub fn exact() -> f64 {
        1e-10
    }
    pub fn asymptote() -> f64 {
        1e-2
    }
}

impl Default for SimSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Either explicit values or a grid between two endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaGrid {
    Values(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        points: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

impl DeltaGrid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            DeltaGrid::Values(ref v) => v.clone(),
            DeltaGrid::Range { from, to, points, spacing } => {
                if points == 1 {
                    return vec![from];
                }
                let last = (points - 1) as f64;
                (0..points)
                    .map(|k| {
                        let t = k as f64 / last;
                        if k == 0 {
                            return from;
                        }
                        if k == points - 1 {
                            return to;
                        }
                        match spacing {
                            Spacing::Log => (from.ln() + t * (to.ln() - from.ln())).exp(),
                            Spacing::Linear => from + t * (to - from),
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum MethodName {
    #[serde(rename = "quadrature")]
    Quadrature,
    #[serde(rename = "mc_logS")]
    McLogS,
    #[serde(rename = "mc_moments")]
    McMoments,
    #[serde(rename = "asymptote")]
    Asymptote,
    #[serde(rename = "diagonalized")]
    Diagonalized,
    #[serde(rename = "character")]
    Character,
    #[serde(rename = "multiscale")]
    Multiscale,
    #[serde(rename = "circle")]
    Circle,
    /// `μ − σ²/2` for a single patch.
    #[serde(rename = "scalar")]
    Scalar,
}

impl MethodName {
    pub const ALL: [MethodName; 9] = [
        MethodName::Quadrature,
        MethodName::McLogS,
        MethodName::McMoments,
        MethodName::Asymptote,
        MethodName::Diagonalized,
        MethodName::Character,
        MethodName::Multiscale,
        MethodName::Circle,
        MethodName::Scalar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodName::Quadrature => "quadrature",
            MethodName::McLogS => "mc_logS",
            MethodName::McMoments => "mc_moments",
            MethodName::Asymptote => "asymptote",
            MethodName::Diagonalized => "diagonalized",
            MethodName::Character => "character",
            MethodName::Multiscale => "multiscale",
            MethodName::Circle => "circle",
            MethodName::Scalar => "scalar",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, MethodName::McLogS | MethodName::McMoments)
    }

    /// Truncated high-dispersal expansions.
    pub fn is_expansion(self) -> bool {
        matches!(
            self,
            MethodName::Asymptote
                | MethodName::Diagonalized
                | MethodName::Character
                | MethodName::Multiscale
                | MethodName::Circle
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Standard errors allowed when a stochastic method is involved.
    #[serde(default = "defaults::sigmas")]
    pub sigmas: f64,
    /// Absolute gap between deterministic methods of the same kind.
    #[serde(default = "defaults::exact")]
    pub exact: f64,
    /// Absolute truncation allowance for a high-dispersal expansion.
    #[serde(default = "defaults::asymptote")]
    pub asymptote: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    /// One sample path.
    Simulate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        delta: f64,
        #[serde(default = "defaults::stride")]
        stride: usize,
        #[serde(default)]
        replicate: usize,
    },
    /// χ over a grid of δ by every requested method.
    Sweep {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        deltas: DeltaGrid,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        methods: Option<Vec<MethodName>>,
        /// Append `δ = 0` and `δ = ∞` limit rows.
        #[serde(default)]
        references: bool,
    },
    /// Two-patch stationary density on a uniform grid.
    Density {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        deltas: DeltaGrid,
        #[serde(default = "defaults::points")]
        points: usize,
    },
    /// Ideal free distribution, optionally over a list of exchangeable
    /// correlations.
    IdealFree {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rhos: Option<Vec<f64>>,
    },
    /// Coefficients of `χ ≈ a + b/δ`.
    Asymptote {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        deltas: DeltaGrid,
    },
    /// Pairwise agreement of methods at one δ.
    Compare {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        methods: Option<Vec<MethodName>>,
        #[serde(default)]
        tolerances: Tolerances,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Simulate { .. } => "simulate",
            TaskSpec::Sweep { .. } => "sweep",
            TaskSpec::Density { .. } => "density",
            TaskSpec::IdealFree { .. } => "ideal_free",
            TaskSpec::Asymptote { .. } => "asymptote",
            TaskSpec::Compare { .. } => "compare",
        }
    }

    /// Output label; defaults to the task kind.
    pub fn id(&self) -> &str {
        let id = match self {
            TaskSpec::Simulate { id, .. }
            | TaskSpec::Sweep { id, .. }
            | TaskSpec::Density { id, .. }
            | TaskSpec::IdealFree { id, .. }
            | TaskSpec::Asymptote { id, .. }
            | TaskSpec::Compare { id, .. } => id,
        };
        id.as_deref().unwrap_or(self.kind())
    }
}

fn config_err(path: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.into(),
        message: msg.into(),
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            config_err(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    /// Structural checks that do not need the numerical model.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(config_err("name", "must be non-empty and use only [A-Za-z0-9_.-]"));
        }
        match (self.model.has_landscape(), &self.landscape) {
            (true, Some(_)) => {
                return Err(config_err("landscape", "this model kind defines its own landscape"))
            }
            (false, None) => return Err(config_err("landscape", "required for this model kind")),
            _ => {}
        }
        if let Some(l) = &self.landscape {
            let given = [l.var.is_some(), l.sigma.is_some(), l.exchangeable.is_some()];
            if given.iter().filter(|&&g| g).count() != 1 {
                return Err(config_err("landscape", "give exactly one of var, sigma, exchangeable"));
            }
        }
        if self.tasks.is_empty() {
            return Err(config_err("tasks", "at least one task is required"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for (i, t) in self.tasks.iter().enumerate() {
            let at = |field: &str| format!("tasks[{i}].{field}");
            if !ids.insert(t.id().to_string()) {
                return Err(config_err(at("id"), format!("duplicate task id {:?}", t.id())));
            }
            match t {
                TaskSpec::Sweep { deltas, .. } | TaskSpec::Density { deltas, .. } | TaskSpec::Asymptote { deltas, .. } => {
                    check_grid(deltas).map_err(|m| config_err(at("deltas"), m))?;
                }
                TaskSpec::Simulate { delta, .. } => {
                    if !(*delta >= 0.0 && delta.is_finite()) {
                        return Err(config_err(at("delta"), "must be finite and >= 0"));
                    }
                }
                TaskSpec::Compare { delta, .. } => {
                    if !(*delta > 0.0 && delta.is_finite()) {
                        return Err(config_err(at("delta"), "must be finite and > 0"));
                    }
                }
                TaskSpec::IdealFree { rhos, .. } => {
                    if rhos.is_some() && self.landscape.as_ref().and_then(|l| l.exchangeable).is_none() {
                        return Err(config_err(at("rhos"), "needs an exchangeable landscape"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Grids expanded to explicit values and task ids filled in.
    pub fn normalized(&self) -> Self {
        let mut c = self.clone();
        for t in &mut c.tasks {
            let kind = t.kind().to_string();
            match t {
                TaskSpec::Sweep { id, deltas, .. }
                | TaskSpec::Density { id, deltas, .. }
                | TaskSpec::Asymptote { id, deltas } => {
                    *deltas = DeltaGrid::Values(deltas.values());
                    id.get_or_insert(kind);
                }
                TaskSpec::Simulate { id, .. } | TaskSpec::IdealFree { id, .. } | TaskSpec::Compare { id, .. } => {
                    id.get_or_insert(kind);
                }
            }
        }
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the normalized config's compact JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.normalized()).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

fn check_grid(grid: &DeltaGrid) -> std::result::Result<(), String> {
    if let DeltaGrid::Range { from, to, points, spacing } = *grid {
        if points == 0 {
            return Err("points must be at least 1".into());
        }
        if spacing == Spacing::Log && !(from > 0.0) {
            return Err("log grid needs from > 0".into());
        }
        if points > 1 && !(to > from) {
            return Err("need to > from".into());
        }
    }
    let v = grid.values();
    if v.is_empty() {
        return Err("grid is empty".into());
    }
    if v.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err("dispersal scales must be finite and > 0".into());
    }
    if v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err("dispersal scales must be strictly increasing".into());
    }
    Ok(())
}
