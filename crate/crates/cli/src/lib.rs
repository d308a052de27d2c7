//! Scenario runner: builds models from JSON configs, executes tasks and
//! writes deterministic CSV, manifest and verdict files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod error;
pub mod model;
pub mod table;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use compare::CompareReport;
pub use config::ScenarioConfig;
pub use error::{CliError, Result};
pub use table::Table;

use model::{sim_config, Model};
use tasks::{run_task, TaskOutput};

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "PATCHDRIFT_THREADS";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Run only the compare tasks.
    pub compare_only: bool,
}

pub struct TaskResult {
    pub id: String,
    pub kind: &'static str,
    pub output: TaskOutput,
}

pub struct RunOutput {
    /// Normalized config with any seed override applied.
    pub config: ScenarioConfig,
    pub tasks: Vec<TaskResult>,
}

impl RunOutput {
    pub fn table(&self, id: &str) -> Option<Table> {
        self.tasks.iter().find(|t| t.id == id).map(|t| t.output.table())
    }

    pub fn reports(&self) -> Vec<&CompareReport> {
        self.tasks
            .iter()
            .filter_map(|t| match &t.output {
                TaskOutput::Compare(r) => Some(r),
                TaskOutput::Table(_) => None,
            })
            .collect()
    }

    /// `<name>.csv` for a single task, `<name>.<id>.csv` otherwise.
    pub fn csv_name(&self, id: &str) -> String {
        if self.config.tasks.len() == 1 {
            format!("{}.csv", self.config.name)
        } else {
            format!("{}.{id}.csv", self.config.name)
        }
    }
}

pub fn execute(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput> {
    let mut cfg = cfg.normalized();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let model = Model::build(&cfg)?;
    let sim = sim_config(&cfg, opts.threads)?;
    let mut tasks = Vec::new();
    for (i, t) in cfg.tasks.iter().enumerate() {
        if opts.compare_only && !matches!(t, config::TaskSpec::Compare { .. }) {
            continue;
        }
        tasks.push(TaskResult {
            id: t.id().to_string(),
            kind: t.kind(),
            output: run_task(&cfg, i, &model, &sim)?,
        });
    }
    Ok(RunOutput { config: cfg, tasks })
}

/// Structural and numerical checks without running any task.
pub fn check(cfg: &ScenarioConfig) -> Result<()> {
    let cfg = cfg.normalized();
    cfg.validate()?;
    let model = Model::build(&cfg)?;
    sim_config(&cfg, None)?;
    for (i, t) in cfg.tasks.iter().enumerate() {
        if let config::TaskSpec::Sweep { methods, .. } | config::TaskSpec::Compare { methods, .. } = t {
            model.resolve_methods(methods.as_deref(), &format!("tasks[{i}].methods"))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub name: String,
    pub version: &'static str,
    pub seed: u64,
    pub config_sha256: String,
    pub files: Vec<FileRecord>,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<FileRecord>) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    files.push(FileRecord {
        file: name.to_string(),
        sha256: format!("{:x}", Sha256::digest(bytes)),
    });
    Ok(path)
}

/// Writes every task table, compare reports as JSON, the normalized
/// config and `<name>.manifest.json`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut files = Vec::new();
    let name = &out.config.name;
    write_file(dir, &format!("{name}.config.json"), out.config.to_json().as_bytes(), &mut files)?;
    for t in &out.tasks {
        write_file(dir, &out.csv_name(&t.id), t.output.table().to_csv().as_bytes(), &mut files)?;
        if let TaskOutput::Compare(r) = &t.output {
            let json = serde_json::to_string_pretty(r).expect("report serializes");
            write_file(dir, &format!("{name}.{}.json", t.id), json.as_bytes(), &mut files)?;
        }
    }
    let manifest = Manifest {
        name: name.clone(),
        version: env!("CARGO_PKG_VERSION"),
        seed: out.config.seed,
        config_sha256: out.config.hash(),
        files,
    };
    let path = dir.join(format!("{name}.manifest.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(manifest)
}

/// Directory holding the bundled scenario configs.
pub fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}
