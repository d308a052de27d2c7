//! One table per task.

use patchdrift::ideal_free::optimize;
use patchdrift::model::exchangeable_sigma;
use patchdrift::sde::simulate_path;
use patchdrift::twopatch::stationary_density;
use patchdrift::SimConfig;

use crate::compare::{compare, CompareReport};
use crate::config::{MethodName, ScenarioConfig, TaskSpec};
use crate::error::{CliError, ModelContext, Result};
use crate::model::Model;
use crate::table::{Cell, Table};

pub enum TaskOutput {
    Table(Table),
    Compare(CompareReport),
}

impl TaskOutput {
    pub fn table(&self) -> Table {
        match self {
            TaskOutput::Table(t) => t.clone(),
            TaskOutput::Compare(r) => r.table(),
        }
    }
}

pub fn run_task(
    cfg: &ScenarioConfig,
    index: usize,
    model: &Model,
    sim: &SimConfig,
) -> Result<TaskOutput> {
    let task = &cfg.tasks[index];
    let at = |field: &str| format!("tasks[{index}].{field}");
    match task {
        TaskSpec::Simulate {
            delta,
            stride,
            replicate,
            ..
        } => {
            let d = model.dispersal(*delta)?;
            let path = simulate_path(&model.landscape, &d, sim, *replicate, *stride).context(at("simulate"))?;
            let mut header = vec!["t".to_string(), "logS".to_string()];
            header.extend((1..=model.n()).map(|i| format!("y{i}")));
            let mut t = Table::new(header);
            for ((time, ls), y) in path.times.iter().zip(&path.log_s).zip(&path.y) {
                let mut row = vec![Cell::Num(*time), Cell::Num(*ls)];
                row.extend(y.iter().map(|&v| Cell::Num(v)));
                t.push(row);
            }
            Ok(TaskOutput::Table(t))
        }
        TaskSpec::Sweep {
            deltas,
            methods,
            references,
            ..
        } => {
            let methods = model.resolve_methods(methods.as_deref(), &at("methods"))?;
            Ok(TaskOutput::Table(sweep(model, &methods, &deltas.values(), *references, sim)?))
        }
        TaskSpec::Density { deltas, points, .. } => {
            if !model.is_applicable(MethodName::Quadrature) {
                return Err(CliError::Config {
                    path: at("kind"),
                    message: "density needs two patches with independent noise".into(),
                });
            }
            let mut t = Table::new(["delta", "y", "rho"]);
            for delta in deltas.values() {
                let d = stationary_density(&model.two_patch(delta)).context(at("density"))?;
                for (y, r) in d.grid(*points) {
                    t.push(vec![delta.into(), y.into(), r.into()]);
                }
            }
            Ok(TaskOutput::Table(t))
        }
        TaskSpec::IdealFree { rhos, .. } => {
            let mut t = Table::new(["rho", "patch", "mu", "y", "bound"]);
            let mu = model.landscape.mu();
            let cases: Vec<(Cell, patchdrift::Matrix)> = match rhos {
                Some(rhos) => {
                    let e = model.exchangeable.expect("validated: exchangeable landscape");
                    rhos.iter()
                        .map(|&rho| Ok((Cell::Num(rho), exchangeable_sigma(mu.len(), e.var, rho).context(at("rhos"))?)))
                        .collect::<Result<_>>()?
                }
                None => vec![(Cell::Empty, model.landscape.sigma().clone())],
            };
            for (rho, sigma) in cases {
                let sol = optimize(mu, &sigma).context(at("ideal_free"))?;
                for (i, &y) in sol.y_star.as_slice().iter().enumerate() {
                    t.push(vec![rho.clone(), (i + 1).into(), mu[i].into(), y.into(), sol.g_value.into()]);
                }
            }
            Ok(TaskOutput::Table(t))
        }
        TaskSpec::Asymptote { deltas, .. } => {
            let (a, b) = model.expansion_coefficients()?;
            let mut t = Table::new(["delta", "a", "b", "chi"]);
            for delta in deltas.values() {
                t.push(vec![delta.into(), a.into(), b.into(), (a + b / delta).into()]);
            }
            Ok(TaskOutput::Table(t))
        }
        TaskSpec::Compare {
            delta,
            methods,
            tolerances,
            ..
        } => {
            let methods = model.resolve_methods(methods.as_deref(), &at("methods"))?;
            if methods.len() < 2 {
                return Err(CliError::Config {
                    path: at("methods"),
                    message: "compare needs at least two applicable methods".into(),
                });
            }
            let est = model.evaluate(&methods, *delta, sim)?;
            Ok(TaskOutput::Compare(compare(&cfg.name, task.id(), *delta, &est, tolerances)))
        }
    }
}

/// One row per δ; stochastic methods get a `<method>_se` column. Growth
/// rates proper (not expansions) are checked against the ideal-free bound.
pub fn sweep(model: &Model, methods: &[MethodName], deltas: &[f64], references: bool, sim: &SimConfig) -> Result<Table> {
    let mut header = vec!["delta".to_string()];
    for m in methods {
        header.push(m.as_str().to_string());
        if m.is_stochastic() {
            header.push(format!("{}_se", m.as_str()));
        }
    }
    let bounded = methods.iter().any(|m| !m.is_expansion());
    let bound = if bounded {
        header.extend(["upper_bound".to_string(), "below_bound".to_string()]);
        Some(model.upper_bound()?)
    } else {
        None
    };
    if references {
        header.push("limit".to_string());
    }
    let mut t = Table::new(header);
    for &delta in deltas {
        let est = model.evaluate(methods, delta, sim)?;
        let mut row = vec![Cell::Num(delta)];
        for e in &est {
            row.push(e.chi.into());
            if e.method.is_stochastic() {
                row.push(e.std_error.into());
            }
        }
        if let Some(b) = bound {
            let ok = est
                .iter()
                .filter(|e| !e.method.is_expansion())
                .all(|e| e.chi <= b + 3.0 * e.std_error);
            row.extend([Cell::Num(b), Cell::Bool(ok)]);
        }
        if references {
            row.push(Cell::Empty);
        }
        t.push(row);
    }
    if references {
        let width = t.header.len();
        for (delta, limit) in [(0.0, model.chi_zero()), (f64::INFINITY, model.chi_infinity()?)] {
            let mut row = vec![Cell::Empty; width];
            row[0] = Cell::Num(delta);
            row[width - 1] = Cell::Num(limit);
            t.push(row);
        }
    }
    Ok(t)
}
