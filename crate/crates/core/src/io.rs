//! JSON model files.
//!
//! ```json
//! {
//!   "tick_seconds": 0.001,
//!   "platform": { "cpus": 2 },
//!   "fault_model": { "min_error_distance": null, "errors_per_hyperperiod": 1 },
//!   "coverage": { "alpha": 0.7, "beta": 1.0, "aggregation": "average" },
//!   "tasks": [
//!     { "id": "t1", "period": 5, "deadline": 5, "wcet": 1, "lambda": 0, "delta_c": 0,
//!       "detection": "none", "constraints": [[0, 1]], "cpu": 0, "priority": 1,
//!       "control": { "plant": "cruise", "weight": 1.0, "j_des": 9.0 } }
//!   ],
//!   "plants": [
//!     { "id": "cruise", "A": [[-0.05]], "B": [[0.001]], "C": [[1.0]],
//!       "h": 0.1, "D": 0.1, "K": [[1366.25, -0.255]], "j_th": 0.1, "h_max": 200 }
//!   ]
//! }
//! ```
//!
//! `deadline` defaults to `period`, `constraints` to `[[0, 1]]`. When any
//! task carries `cpu` or `priority` the file also defines a configuration;
//! missing CPUs default to 0 and missing priorities are filled
//! deadline-monotonically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{LtiPlant, Matrix};
use crate::model::{
    ControlBinding, CoverageParams, Detection, FaultModel, Model, ModelError, Platform, SystemConfig, Task, Tick,
    WeaklyHard,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default = "default_tick")]
    tick_seconds: f64,
    platform: PlatformFile,
    #[serde(default)]
    fault_model: FaultModel,
    #[serde(default)]
    coverage: CoverageParams,
    tasks: Vec<TaskFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    plants: Vec<PlantFile>,
}

fn default_tick() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformFile {
    cpus: Cpus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Cpus {
    Count(usize),
    Names(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    id: String,
    period: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deadline: Option<Tick>,
    wcet: Tick,
    #[serde(default)]
    lambda: Tick,
    #[serde(default)]
    delta_c: Tick,
    #[serde(default)]
    detection: Detection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraints: Option<Vec<[u32; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpu: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    control: Option<ControlFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControlFile {
    plant: String,
    #[serde(default = "unit_weight")]
    weight: f64,
    j_des: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFile {
    id: String,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<Vec<Vec<f64>>>,
    h: f64,
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "K")]
    k: Vec<Vec<f64>>,
    j_th: f64,
    h_max: u32,
}

/// A parsed model, plus the configuration when the file pins one.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub model: Model,
    pub config: Option<SystemConfig>,
}

impl Loaded {
    /// The pinned configuration, or the single-CPU deadline-monotonic one.
    pub fn config_or_default(&self) -> SystemConfig {
        self.config.clone().unwrap_or_else(|| self.model.uniprocessor_config())
    }
}

/// Line of the first `"id": "<id>"` entry, for error messages.
fn line_of(text: &str, id: &str) -> Option<usize> {
    let quoted = format!("\"{id}\"");
    text.lines().position(|l| l.contains("\"id\"") && l.contains(&quoted)).map(|n| n + 1)
}

fn invalid(text: &str, err: ModelError) -> IoError {
    let line = match &err {
        ModelError::InvalidTask { task, .. } => line_of(text, task),
        ModelError::InvalidPlant { plant, .. } => line_of(text, plant),
        ModelError::InvalidConfig(msg) => msg.split('\'').nth(1).and_then(|id| line_of(text, id)),
        _ => None,
    };
    IoError::Invalid {
        line,
        message: err.to_string(),
    }
}

fn matrix(text: &str, plant: &str, name: &str, rows: &[Vec<f64>]) -> Result<Matrix, IoError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(IoError::Invalid {
            line: line_of(text, plant),
            message: format!("plant '{plant}': matrix {name} has ragged rows"),
        });
    }
    Ok(Matrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn parse_model_str(text: &str) -> Result<Loaded, IoError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| IoError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string().split(" at line").next().unwrap_or_default().to_string(),
    })?;

    let mut plants = Vec::with_capacity(file.plants.len());
    for p in &file.plants {
        let a = matrix(text, &p.id, "A", &p.a)?;
        let c = match &p.c {
            Some(c) => matrix(text, &p.id, "C", c)?,
            None => Matrix::identity(a.nrows(), a.nrows()),
        };
        plants.push(LtiPlant {
            id: p.id.clone(),
            b: matrix(text, &p.id, "B", &p.b)?,
            gain: matrix(text, &p.id, "K", &p.k)?,
            a,
            c,
            sampling_period: p.h,
            let_deadline: p.d,
            cost_threshold: p.j_th,
            horizon_cap: p.h_max,
        });
    }

    let mut tasks = Vec::with_capacity(file.tasks.len());
    for t in &file.tasks {
        let constraints = match &t.constraints {
            None => vec![WeaklyHard::HARD],
            Some(list) => list
                .iter()
                .map(|&[k, n]| WeaklyHard::new(k, n))
                .collect::<Result<_, _>>()
                .map_err(|reason| invalid(text, ModelError::InvalidTask { task: t.id.clone(), reason }))?,
        };
        let control = match &t.control {
            None => None,
            Some(c) => {
                let plant = plants.iter().position(|p| p.id == c.plant).ok_or_else(|| {
                    invalid(
                        text,
                        ModelError::InvalidTask {
                            task: t.id.clone(),
                            reason: format!("references unknown plant '{}'", c.plant),
                        },
                    )
                })?;
                Some(ControlBinding {
                    plant,
                    weight: c.weight,
                    desired_cost: c.j_des,
                })
            }
        };
        tasks.push(Task {
            id: t.id.clone(),
            period: t.period,
            deadline: t.deadline.unwrap_or(t.period),
            wcet: t.wcet,
            compare_overhead: t.lambda,
            eed_overhead: t.delta_c,
            detection: t.detection,
            constraints,
            control,
        });
    }

    let platform = match file.platform.cpus {
        Cpus::Count(n) => Platform::with_cpus(n),
        Cpus::Names(names) => Platform { cpus: names },
    };
    let model = Model {
        tick_seconds: file.tick_seconds,
        platform,
        fault: file.fault_model,
        coverage: file.coverage,
        tasks,
        plants,
    };
    model.validate().map_err(|e| invalid(text, e))?;

    let pinned = file.tasks.iter().any(|t| t.cpu.is_some() || t.priority.is_some());
    let config = if pinned {
        let mut cfg = SystemConfig {
            cpu: file.tasks.iter().map(|t| t.cpu.unwrap_or(0)).collect(),
            priority: vec![0; file.tasks.len()],
            detection: model.tasks.iter().map(|t| t.detection).collect(),
        };
        if file.tasks.iter().all(|t| t.priority.is_some()) {
            cfg.priority = file.tasks.iter().map(|t| t.priority.unwrap_or(0)).collect();
        } else {
            cfg.assign_deadline_monotonic(&model);
        }
        cfg.validate(&model).map_err(|e| invalid(text, e))?;
        Some(cfg)
    } else {
        None
    };
    Ok(Loaded { model, config })
}

pub fn parse_model(path: &Path) -> Result<Loaded, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_str(&text)
}

/// Pretty JSON for `model`; with `config`, detection, CPUs and priorities
/// come from it.
pub fn emit_model(model: &Model, config: Option<&SystemConfig>) -> String {
    let tasks = model
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| TaskFile {
            id: t.id.clone(),
            period: t.period,
            deadline: Some(t.deadline),
            wcet: t.wcet,
            lambda: t.compare_overhead,
            delta_c: t.eed_overhead,
            detection: config.map_or(t.detection, |c| c.detection[i]),
            constraints: Some(t.constraints.iter().map(|c| [c.misses, c.window]).collect()),
            cpu: config.map(|c| c.cpu[i]),
            priority: config.map(|c| c.priority[i]),
            control: t.control.as_ref().map(|c| ControlFile {
                plant: model.plants[c.plant].id.clone(),
                weight: c.weight,
                j_des: c.desired_cost,
            }),
        })
        .collect();
    let plants = model
        .plants
        .iter()
        .map(|p| PlantFile {
            id: p.id.clone(),
            a: rows(&p.a),
            b: rows(&p.b),
            c: Some(rows(&p.c)),
            h: p.sampling_period,
            d: p.let_deadline,
            k: rows(&p.gain),
            j_th: p.cost_threshold,
            h_max: p.horizon_cap,
        })
        .collect();
    let file = ModelFile {
        tick_seconds: model.tick_seconds,
        platform: PlatformFile {
            cpus: Cpus::Names(model.platform.cpus.clone()),
        },
        fault_model: model.fault.clone(),
        coverage: model.coverage,
        tasks,
        plants,
    };
    serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
}

/// Per-task view of a configuration for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEntry {
    pub task: String,
    pub cpu: String,
    pub priority: u32,
    pub detection: Detection,
}

pub fn config_entries(model: &Model, cfg: &SystemConfig) -> Vec<ConfigEntry> {
    model
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| ConfigEntry {
            task: t.id.clone(),
            cpu: model.platform.cpus[cfg.cpu[i]].clone(),
            priority: cfg.priority[i],
            detection: cfg.detection[i],
        })
        .collect()
}
