//! Pairwise agreement between χ methods.

use serde::Serialize;

use crate::config::{MethodName, Tolerances};
use crate::model::Estimate;
use crate::table::{Cell, Table};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub method: &'static str,
    pub chi: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub a: &'static str,
    pub b: &'static str,
    pub diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub task: String,
    pub delta: f64,
    pub estimates: Vec<EstimateRecord>,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
}

/// Allowed `|χ_a − χ_b|`: exact agreement within a kind, an expansion
/// allowance across kinds, plus `sigmas` combined standard errors.
pub fn tolerance(a: &Estimate, b: &Estimate, tol: &Tolerances) -> f64 {
    let (ma, mb) = (a.method, b.method);
    let t = tol.sigmas * a.std_error.hypot(b.std_error);
    if ma.is_expansion() != mb.is_expansion() {
        t + tol.asymptote
    } else {
        t + tol.exact
    }
}

pub fn compare(scenario: &str, task: &str, delta: f64, estimates: &[Estimate], tol: &Tolerances) -> CompareReport {
    let mut verdicts = Vec::new();
    for (i, a) in estimates.iter().enumerate() {
        for b in &estimates[i + 1..] {
            let diff = (a.chi - b.chi).abs();
            let tolerance = tolerance(a, b, tol);
            verdicts.push(Verdict {
                a: a.method.as_str(),
                b: b.method.as_str(),
                diff,
                tolerance,
                pass: diff <= tolerance,
            });
        }
    }
    CompareReport {
        scenario: scenario.to_string(),
        task: task.to_string(),
        delta,
        estimates: estimates
            .iter()
            .map(|e| EstimateRecord {
                method: e.method.as_str(),
                chi: e.chi,
                std_error: e.std_error,
            })
            .collect(),
        pass: verdicts.iter().all(|v| v.pass),
        verdicts,
    }
}

impl CompareReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["a", "b", "chi_a", "se_a", "chi_b", "se_b", "diff", "tolerance", "pass"]);
        let find = |m: &str| self.estimates.iter().find(|e| e.method == m).expect("estimate present");
        for v in &self.verdicts {
            let (a, b) = (find(v.a), find(v.b));
            t.push(vec![
                v.a.into(),
                v.b.into(),
                a.chi.into(),
                a.std_error.into(),
                b.chi.into(),
                b.std_error.into(),
                v.diff.into(),
                v.tolerance.into(),
                Cell::Bool(v.pass),
            ]);
        }
        t
    }

    pub fn method(&self, m: MethodName) -> Option<&EstimateRecord> {
        self.estimates.iter().find(|e| e.method == m.as_str())
    }
}
