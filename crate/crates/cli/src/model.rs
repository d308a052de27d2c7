//! Numerical model assembled from a scenario config, and χ by method.

use std::sync::OnceLock;

use patchdrift::asymptotics::{chi_diagonalized, chi_infinity, chi_zero, high_dispersal_expansion};
use patchdrift::ideal_free::chi_upper_bound;
use patchdrift::model::{exchangeable_sigma, levins, two_rate_dispersal, validate_dispersal};
use patchdrift::sde::{chi_from_moments, estimate_chi_mc, occupation_moments, paired_estimates};
use patchdrift::structured::{
    chi_character, chi_circle, chi_multiscale, cosine_mu, expand_multiscale, ring_profiles,
};
use patchdrift::twopatch::{chi_quadrature, TwoPatchParams};
use patchdrift::{
    CyclicProductGroup, Dispersal, DispersalMatrix, HighDispersalExpansion, Landscape, Matrix, MultiScaleSpec,
    Scheme, SimConfig,
};

use crate::config::{Exchangeable, LandscapeSpec, MethodName, ModelSpec, ScenarioConfig, SchemeSpec};
use crate::error::{CliError, ModelContext, Result};

pub enum Structure {
    Plain,
    Circle {
        s2: f64,
        mean: f64,
        amplitude: f64,
        mode: usize,
        group: CyclicProductGroup,
        q_profile: Vec<f64>,
        s_profile: Vec<f64>,
    },
    Multiscale(MultiScaleSpec),
}

pub struct Model {
    pub q: DispersalMatrix,
    pub landscape: Landscape,
    pub structure: Structure,
    pub exchangeable: Option<Exchangeable>,
    expansion: OnceLock<patchdrift::Result<HighDispersalExpansion>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub method: MethodName,
    pub chi: f64,
    pub std_error: f64,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Matrix> {
    Matrix::from_rows(rows).ok_or_else(|| CliError::Config {
        path: what.into(),
        message: "rows must be non-empty and of equal length".into(),
    })
}

fn build_landscape(spec: &LandscapeSpec, n: usize) -> Result<Landscape> {
    if spec.mu.len() != n {
        return Err(CliError::Config {
            path: "landscape.mu".into(),
            message: format!("has {} entries, model has {n} patches", spec.mu.len()),
        });
    }
    let mu = spec.mu.clone();
    if let Some(var) = &spec.var {
        Landscape::uncorrelated(mu, var).context("landscape.var")
    } else if let Some(sigma) = &spec.sigma {
        Landscape::new(mu, matrix(sigma, "landscape.sigma")?).context("landscape.sigma")
    } else {
        let e = spec.exchangeable.expect("validated: one noise source");
        let sigma = exchangeable_sigma(n, e.var, e.rho).context("landscape.exchangeable")?;
        Landscape::new(mu, sigma).context("landscape.exchangeable")
    }
}

impl Model {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self> {
        let plain = |q: DispersalMatrix| -> Result<Model> {
            let spec = cfg.landscape.as_ref().expect("validated: landscape present");
            let landscape = build_landscape(spec, q.n())?;
            Ok(Model::new(q, landscape, Structure::Plain, spec.exchangeable))
        };
        match &cfg.model {
            ModelSpec::Levins { n } => plain(levins(*n).context("model")?),
            ModelSpec::TwoRate {
                n,
                fast,
                slow_rate,
                fast_rate,
            } => plain(two_rate_dispersal(*n, fast, *slow_rate, *fast_rate).context("model")?),
            ModelSpec::Explicit { q } => plain(validate_dispersal(matrix(q, "model.q")?).context("model.q")?),
            &ModelSpec::Circle {
                n,
                s2,
                mean,
                amplitude,
                mode,
            } => {
                chi_circle(n, s2, mean, amplitude, mode, 1.0).context("model")?;
                let (q_profile, s_profile) = ring_profiles(n, s2).context("model")?;
                let group = CyclicProductGroup::cyclic(n).context("model")?;
                let q = validate_dispersal(group.expand(&q_profile)).context("model")?;
                let landscape =
                    Landscape::uncorrelated(cosine_mu(n, mean, amplitude, mode), &vec![s2; n]).context("model")?;
                let structure = Structure::Circle {
                    s2,
                    mean,
                    amplitude,
                    mode,
                    group,
                    q_profile,
                    s_profile,
                };
                Ok(Model::new(q, landscape, structure, None))
            }
            ModelSpec::Multiscale {
                factors,
                q_rates,
                s_covs,
                mu,
            } => {
                let group = CyclicProductGroup::new(factors.clone()).context("model.factors")?;
                let spec = MultiScaleSpec::new(group, q_rates.clone(), s_covs.clone(), mu.clone())
                    .context("model")?;
                let (q, landscape) = expand_multiscale(&spec).context("model")?;
                Ok(Model::new(q, landscape, Structure::Multiscale(spec), None))
            }
        }
    }

    fn new(q: DispersalMatrix, landscape: Landscape, structure: Structure, exchangeable: Option<Exchangeable>) -> Self {
        Self {
            q,
            landscape,
            structure,
            exchangeable,
            expansion: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.q.n()
    }

    fn expansion(&self) -> Result<&HighDispersalExpansion> {
        self.expansion
            .get_or_init(|| high_dispersal_expansion(&self.q, &self.landscape))
            .as_ref()
            .map_err(|e| CliError::Model {
                context: "high-dispersal expansion".into(),
                source: e.clone(),
            })
    }

    pub fn is_applicable(&self, m: MethodName) -> bool {
        let n = self.n();
        match m {
            MethodName::Quadrature => n == 2 && self.landscape.sigma()[(0, 1)] == 0.0,
            MethodName::McLogS | MethodName::McMoments => true,
            MethodName::Asymptote => n >= 2 && self.q.is_reversible(),
            MethodName::Diagonalized => {
                n >= 2 && patchdrift::asymptotics::diagonalized_terms(&self.q, &self.landscape).is_ok()
            }
            MethodName::Character => !matches!(self.structure, Structure::Plain),
            MethodName::Multiscale => matches!(self.structure, Structure::Multiscale(_)),
            MethodName::Circle => matches!(self.structure, Structure::Circle { .. }),
            MethodName::Scalar => n == 1,
        }
    }

    pub fn applicable(&self) -> Vec<MethodName> {
        MethodName::ALL.into_iter().filter(|&m| self.is_applicable(m)).collect()
    }

    /// Requested methods, or every applicable one.
    pub fn resolve_methods(&self, requested: Option<&[MethodName]>, path: &str) -> Result<Vec<MethodName>> {
        match requested {
            None => Ok(self.applicable()),
            Some(ms) => {
                for (j, &m) in ms.iter().enumerate() {
                    if !self.is_applicable(m) {
                        return Err(CliError::Config {
                            path: format!("{path}[{j}]"),
                            message: format!("method {} does not apply to this model", m.as_str()),
                        });
                    }
                    if ms[..j].contains(&m) {
                        return Err(CliError::Config {
                            path: format!("{path}[{j}]"),
                            message: format!("method {} listed twice", m.as_str()),
                        });
                    }
                }
                Ok(ms.to_vec())
            }
        }
    }

    pub fn dispersal(&self, delta: f64) -> Result<Dispersal> {
        Dispersal::scaled(&self.q, delta).context("dispersal")
    }

    pub fn upper_bound(&self) -> Result<f64> {
        chi_upper_bound(self.landscape.mu(), self.landscape.sigma()).context("ideal free bound")
    }

    pub fn chi_zero(&self) -> f64 {
        chi_zero(&self.landscape).chi
    }

    pub fn chi_infinity(&self) -> Result<f64> {
        Ok(chi_infinity(&self.landscape, self.q.pi()).context("limit")?.chi)
    }

    /// χ at `delta` by each method, in the order given.
    pub fn evaluate(&self, methods: &[MethodName], delta: f64, sim: &SimConfig) -> Result<Vec<Estimate>> {
        let ctx = |m: MethodName| format!("{} at delta = {delta}", m.as_str());
        let want = |m| methods.contains(&m);
        let mut mc = None;
        if want(MethodName::McLogS) || want(MethodName::McMoments) {
            let d = self.dispersal(delta)?;
            let l = &self.landscape;
            mc = Some(match (want(MethodName::McLogS), want(MethodName::McMoments)) {
                (true, true) => {
                    let (a, b, _) = paired_estimates(l, &d, sim).context(ctx(MethodName::McLogS))?;
                    (Some(a), Some(b))
                }
                (true, false) => (Some(estimate_chi_mc(l, &d, sim).context(ctx(MethodName::McLogS))?), None),
                _ => {
                    let m = occupation_moments(l, &d, sim).context(ctx(MethodName::McMoments))?;
                    (None, Some(chi_from_moments(l, &m).context(ctx(MethodName::McMoments))?))
                }
            });
        }
        methods
            .iter()
            .map(|&m| {
                let exact = |chi: f64| Estimate {
                    method: m,
                    chi,
                    std_error: 0.0,
                };
                let from = |g: patchdrift::GrowthEstimate| Estimate {
                    method: m,
                    chi: g.chi,
                    std_error: g.std_error,
                };
                Ok(match m {
                    MethodName::McLogS => from(mc.and_then(|p| p.0).expect("computed above")),
                    MethodName::McMoments => from(mc.and_then(|p| p.1).expect("computed above")),
                    MethodName::Quadrature => from(chi_quadrature(&self.two_patch(delta)).context(ctx(m))?),
                    MethodName::Asymptote => exact(self.expansion()?.chi(delta)),
                    MethodName::Diagonalized => {
                        from(chi_diagonalized(&self.q, &self.landscape, delta).context(ctx(m))?)
                    }
                    MethodName::Character => {
                        let g = match &self.structure {
                            Structure::Circle {
                                group,
                                q_profile,
                                s_profile,
                                ..
                            } => chi_character(group, q_profile, s_profile, self.landscape.mu(), delta),
                            Structure::Multiscale(spec) => {
                                chi_character(spec.group(), &spec.q_profile(), &spec.s_profile(), spec.mu(), delta)
                            }
                            Structure::Plain => unreachable!("checked by is_applicable"),
                        };
                        from(g.context(ctx(m))?)
                    }
                    MethodName::Multiscale => match &self.structure {
                        Structure::Multiscale(spec) => from(chi_multiscale(spec, delta).context(ctx(m))?),
                        _ => unreachable!("checked by is_applicable"),
                    },
                    MethodName::Circle => match self.structure {
                        Structure::Circle {
                            s2,
                            mean,
                            amplitude,
                            mode,
                            ..
                        } => from(chi_circle(self.n(), s2, mean, amplitude, mode, delta).context(ctx(m))?),
                        _ => unreachable!("checked by is_applicable"),
                    },
                    MethodName::Scalar => exact(self.chi_zero()),
                })
            })
            .collect()
    }

    /// Two-patch parameters for `δ Q`.
    pub fn two_patch(&self, delta: f64) -> TwoPatchParams<f64> {
        let (mu, s, q) = (self.landscape.mu(), self.landscape.sigma(), self.q.q());
        TwoPatchParams {
            mu1: mu[0],
            mu2: mu[1],
            s1sq: s[(0, 0)],
            s2sq: s[(1, 1)],
            d12: delta * q[(0, 1)],
            d21: delta * q[(1, 0)],
        }
    }

    pub fn expansion_coefficients(&self) -> Result<(f64, f64)> {
        let e = self.expansion()?;
        Ok((e.a, e.b))
    }
}

pub fn sim_config(cfg: &ScenarioConfig, threads: Option<usize>) -> Result<SimConfig> {
    let s = &cfg.sim;
    let sim = SimConfig {
        dt: s.dt,
        horizon: s.horizon,
        burn_in: s.burn_in,
        replicates: s.replicates,
        segments: s.segments,
        seed: cfg.seed,
        scheme: match s.scheme {
            SchemeSpec::LogAbundance => Scheme::LogAbundance,
            SchemeSpec::Fraction => Scheme::Fraction,
        },
        threads,
    };
    sim.validate().map_err(|e| CliError::Config {
        path: "sim".into(),
        message: e.to_string(),
    })?;
    Ok(sim)
}
