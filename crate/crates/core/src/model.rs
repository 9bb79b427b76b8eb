//! Task, platform and fault models shared by every analysis.
//!
//! Time is an unsigned integer tick. All periods, deadlines and execution
//! budgets of one [`Model`] share the same unit; the physical length of a
//! tick (used only to relate control tasks to their plants) is
//! [`Model::tick_seconds`].

use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::LtiPlant;

/// Discrete time, in ticks.
pub type Tick = u64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("task '{task}': {reason}")]
    InvalidTask { task: String, reason: String },
    #[error("plant '{plant}': {reason}")]
    InvalidPlant { plant: String, reason: String },
    #[error("platform: {0}")]
    InvalidPlatform(String),
    #[error("fault model: {0}")]
    InvalidFaultModel(String),
    #[error("configuration: {0}")]
    InvalidConfig(String),
    #[error("hyper-period overflows the tick type")]
    HyperperiodOverflow,
    #[error("empty task set has no hyper-period")]
    EmptyTaskSet,
}

/// At most `misses` deadline misses in any `window` consecutive activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WeaklyHard {
    pub misses: u32,
    pub window: u32,
}

impl WeaklyHard {
    /// The `(0, 1)` constraint of a hard real-time task.
    pub const HARD: WeaklyHard = WeaklyHard {
        misses: 0,
        window: 1,
    };

    pub fn new(misses: u32, window: u32) -> Result<Self, String> {
        let c = WeaklyHard { misses, window };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<(), String> {
        if self.window == 0 {
            return Err("constraint window must be positive".into());
        }
        if self.misses >= self.window {
            return Err(format!(
                "constraint ({}, {}) allows a miss in every activation",
                self.misses, self.window
            ));
        }
        Ok(())
    }

    pub fn is_hard(&self) -> bool {
        self.misses == 0
    }

    /// Allowed miss ratio, used to rank constraints by tightness.
    pub fn ratio(&self) -> f64 {
        self.misses as f64 / self.window as f64
    }
}

/// Error detection applied to a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Detection {
    #[default]
    None,
    /// Embedded error detection: adds a fixed overhead to each execution.
    Eed,
    /// Explicit output comparison: executes twice and compares.
    Eoc,
}

impl Detection {
    pub const ALL: [Detection; 3] = [Detection::None, Detection::Eed, Detection::Eoc];

    pub fn is_protected(self) -> bool {
        self != Detection::None
    }

    /// None -> EED -> EOC, saturating.
    pub fn escalate(self) -> Detection {
        match self {
            Detection::None => Detection::Eed,
            Detection::Eed | Detection::Eoc => Detection::Eoc,
        }
    }

    /// None -> EED -> EOC -> None.
    pub fn cycle(self) -> Detection {
        match self {
            Detection::None => Detection::Eed,
            Detection::Eed => Detection::Eoc,
            Detection::Eoc => Detection::None,
        }
    }
}

/// Binding of a control task to its plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBinding {
    /// Index into [`Model::plants`].
    pub plant: usize,
    pub weight: f64,
    /// Desired control cost (sampling periods), the normaliser of the
    /// system objective.
    pub desired_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub period: Tick,
    pub deadline: Tick,
    /// WCET without any detection.
    pub wcet: Tick,
    /// Output comparison time added by EOC.
    pub compare_overhead: Tick,
    /// Overhead added by EED.
    pub eed_overhead: Tick,
    pub detection: Detection,
    pub constraints: Vec<WeaklyHard>,
    pub control: Option<ControlBinding>,
}

impl Task {
    /// A hard, unprotected task with implicit deadline.
    pub fn periodic(id: impl Into<String>, period: Tick, wcet: Tick) -> Self {
        Task {
            id: id.into(),
            period,
            deadline: period,
            wcet,
            compare_overhead: 0,
            eed_overhead: 0,
            detection: Detection::None,
            constraints: vec![WeaklyHard::HARD],
            control: None,
        }
    }

    pub fn with_detection(mut self, detection: Detection) -> Self {
        self.detection = detection;
        self
    }

    pub fn with_constraints(mut self, constraints: Vec<WeaklyHard>) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn effective_wcet(&self) -> Tick {
        effective_wcet_for(self, self.detection)
    }

    pub fn recovery_wcet(&self) -> Tick {
        recovery_wcet_for(self, self.detection)
    }

    /// Utilization of the undetected WCET.
    pub fn base_utilization(&self) -> f64 {
        self.wcet as f64 / self.period as f64
    }

    pub fn is_control(&self) -> bool {
        self.control.is_some()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidTask {
            task: self.id.clone(),
            reason,
        };
        if self.wcet == 0 {
            return Err(bad("wcet must be positive".into()));
        }
        if self.wcet > self.deadline {
            return Err(bad(format!(
                "wcet {} exceeds deadline {}",
                self.wcet, self.deadline
            )));
        }
        if self.deadline > self.period {
            return Err(bad(format!(
                "deadline {} exceeds period {}",
                self.deadline, self.period
            )));
        }
        for c in &self.constraints {
            c.check().map_err(bad)?;
        }
        if let Some(ctl) = &self.control {
            if !(ctl.desired_cost > 0.0) {
                return Err(bad("desired control cost must be positive".into()));
            }
            if !ctl.weight.is_finite() || ctl.weight < 0.0 {
                return Err(bad("control weight must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

/// WCET with detection overhead: `c + ρ(o(c + Λ) + (1 - o)Δc)`.
pub fn effective_wcet_for(task: &Task, detection: Detection) -> Tick {
    match detection {
        Detection::None => task.wcet,
        Detection::Eed => task.wcet + task.eed_overhead,
        Detection::Eoc => task.wcet + task.wcet + task.compare_overhead,
    }
}

/// Re-execution budget after a detected error: `ρ(c + (1 - o)Δc)`.
pub fn recovery_wcet_for(task: &Task, detection: Detection) -> Tick {
    match detection {
        Detection::None => 0,
        Detection::Eed => task.wcet + task.eed_overhead,
        Detection::Eoc => task.wcet,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultModel {
    /// Minimum distance between two transient errors; `None` means one
    /// hyper-period (the single-error model).
    pub min_error_distance: Option<Tick>,
    pub errors_per_hyperperiod: u32,
}

impl Default for FaultModel {
    fn default() -> Self {
        FaultModel {
            min_error_distance: None,
            errors_per_hyperperiod: 1,
        }
    }
}

impl FaultModel {
    pub fn error_distance(&self, hyperperiod: Tick) -> Tick {
        self.min_error_distance.unwrap_or(hyperperiod)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub cpus: Vec<String>,
}

impl Platform {
    pub fn with_cpus(n: usize) -> Self {
        Platform {
            cpus: (0..n).map(|i| format!("cpu{i}")).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cpus.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.cpus.is_empty() {
            return Err(ModelError::InvalidPlatform("no CPUs".into()));
        }
        let mut ids: Vec<&String> = self.cpus.iter().collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::InvalidPlatform(format!(
                "duplicate CPU id '{}'",
                w[0]
            )));
        }
        Ok(())
    }
}

/// Detection rates and the multi-CPU aggregation rule of the coverage metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageParams {
    /// Detection probability of EED.
    pub alpha: f64,
    /// Detection probability of EOC.
    pub beta: f64,
    pub aggregation: Aggregation,
}

impl Default for CoverageParams {
    fn default() -> Self {
        CoverageParams {
            alpha: 0.7,
            beta: 1.0,
            aggregation: Aggregation::Average,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean of per-CPU coverage.
    #[default]
    Average,
    /// One sum over all tasks regardless of placement.
    GlobalSum,
}

/// A complete input model.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub tick_seconds: f64,
    pub platform: Platform,
    pub fault: FaultModel,
    pub coverage: CoverageParams,
    pub tasks: Vec<Task>,
    pub plants: Vec<LtiPlant>,
}

impl Model {
    pub fn new(platform: Platform, tasks: Vec<Task>) -> Self {
        Model {
            tick_seconds: 1e-3,
            platform,
            fault: FaultModel::default(),
            coverage: CoverageParams::default(),
            tasks,
            plants: Vec::new(),
        }
    }

    /// Hyper-period of all tasks; zero for an empty task set.
    pub fn hyperperiod(&self) -> Tick {
        if self.tasks.is_empty() {
            0
        } else {
            hyperperiod(&self.tasks).expect("validated model")
        }
    }

    pub fn error_distance(&self) -> Tick {
        self.fault.error_distance(self.hyperperiod())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.platform.validate()?;
        if !(self.tick_seconds > 0.0) || !self.tick_seconds.is_finite() {
            return Err(ModelError::InvalidConfig(
                "tick_seconds must be positive".into(),
            ));
        }
        if self.fault.min_error_distance == Some(0) {
            return Err(ModelError::InvalidFaultModel(
                "minimum error distance must be positive".into(),
            ));
        }
        let cov = &self.coverage;
        if !(0.0..=1.0).contains(&cov.alpha) || !(0.0..=1.0).contains(&cov.beta) {
            return Err(ModelError::InvalidConfig(
                "detection rates must lie in [0, 1]".into(),
            ));
        }
        let mut ids: Vec<&str> = self.tasks.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::InvalidTask {
                task: w[0].to_string(),
                reason: "duplicate task id".into(),
            });
        }
        for plant in &self.plants {
            plant.validate()?;
        }
        for task in &self.tasks {
            task.validate()?;
            if let Some(ctl) = &task.control {
                let plant = self.plants.get(ctl.plant).ok_or_else(|| ModelError::InvalidTask {
                    task: task.id.clone(),
                    reason: format!("unknown plant index {}", ctl.plant),
                })?;
                let period_s = task.period as f64 * self.tick_seconds;
                if (period_s - plant.sampling_period).abs() > 1e-9 * period_s.max(1.0) {
                    return Err(ModelError::InvalidTask {
                        task: task.id.clone(),
                        reason: format!(
                            "period {} ticks ({period_s} s) differs from plant '{}' sampling period {} s",
                            task.period, plant.id, plant.sampling_period
                        ),
                    });
                }
            }
        }
        if !self.tasks.is_empty() {
            hyperperiod(&self.tasks)?;
        }
        Ok(())
    }

    /// Configuration carrying each task's declared detection, all tasks on
    /// the first CPU with deadline-monotonic priorities.
    pub fn uniprocessor_config(&self) -> SystemConfig {
        let mut cfg = SystemConfig {
            cpu: vec![0; self.tasks.len()],
            priority: vec![0; self.tasks.len()],
            detection: self.tasks.iter().map(|t| t.detection).collect(),
        };
        cfg.assign_deadline_monotonic(self);
        cfg
    }

    pub fn control_tasks(&self) -> impl Iterator<Item = (usize, &Task)> {
        self.tasks.iter().enumerate().filter(|(_, t)| t.is_control())
    }
}

/// Deployment decisions: allocation, priorities and detection per task.
///
/// All vectors are indexed by task position in [`Model::tasks`]. Smaller
/// priority values mean higher priority.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemConfig {
    pub cpu: Vec<usize>,
    pub priority: Vec<u32>,
    pub detection: Vec<Detection>,
}

impl SystemConfig {
    pub fn validate(&self, model: &Model) -> Result<(), ModelError> {
        let n = model.tasks.len();
        if self.cpu.len() != n || self.priority.len() != n || self.detection.len() != n {
            return Err(ModelError::InvalidConfig(format!(
                "configuration covers {} tasks, model has {n}",
                self.cpu.len()
            )));
        }
        for (i, &c) in self.cpu.iter().enumerate() {
            if c >= model.platform.len() {
                return Err(ModelError::InvalidConfig(format!(
                    "task '{}' allocated to unknown CPU {c}",
                    model.tasks[i].id
                )));
            }
        }
        let mut keys: Vec<(usize, u32, usize)> = (0..n)
            .map(|i| (self.cpu[i], self.priority[i], i))
            .collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0].0 == w[1].0 && w[0].1 == w[1].1) {
            return Err(ModelError::InvalidConfig(format!(
                "tasks '{}' and '{}' share priority {} on CPU '{}'",
                model.tasks[w[0].2].id,
                model.tasks[w[1].2].id,
                w[0].1,
                model.platform.cpus[w[0].0]
            )));
        }
        Ok(())
    }

    /// Task indices on `cpu`, highest priority first.
    pub fn tasks_on(&self, cpu: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.cpu.len()).filter(|&i| self.cpu[i] == cpu).collect();
        ids.sort_by_key(|&i| self.priority[i]);
        ids
    }

    /// Re-assign priorities deadline-monotonically on every CPU, ties by
    /// task position.
    pub fn assign_deadline_monotonic(&mut self, model: &Model) {
        let cpus = self.cpu.iter().copied().max().map_or(0, |m| m + 1);
        for cpu in 0..cpus {
            let mut ids: Vec<usize> = (0..self.cpu.len()).filter(|&i| self.cpu[i] == cpu).collect();
            ids.sort_by_key(|&i| (model.tasks[i].deadline, i));
            for (rank, i) in ids.into_iter().enumerate() {
                self.priority[i] = rank as u32;
            }
        }
    }

    /// Per-task parameters on `cpu`, highest priority first.
    pub fn resolve(&self, model: &Model, cpu: usize) -> Vec<Resolved> {
        self.tasks_on(cpu)
            .into_iter()
            .map(|i| {
                let task = &model.tasks[i];
                let detection = self.detection[i];
                Resolved {
                    index: i,
                    period: task.period,
                    deadline: task.deadline,
                    wcet: effective_wcet_for(task, detection),
                    recovery: recovery_wcet_for(task, detection),
                    priority: self.priority[i],
                    detection,
                }
            })
            .collect()
    }

    /// The model's tasks with this configuration's detection applied.
    pub fn apply(&self, model: &Model) -> Vec<Task> {
        model
            .tasks
            .iter()
            .zip(&self.detection)
            .map(|(t, &d)| t.clone().with_detection(d))
            .collect()
    }
}

/// Task parameters resolved against a [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub index: usize,
    pub period: Tick,
    pub deadline: Tick,
    /// Detection-augmented WCET.
    pub wcet: Tick,
    /// Recovery budget; zero for unprotected tasks.
    pub recovery: Tick,
    pub priority: u32,
    pub detection: Detection,
}

/// Per-task boolean deadline-miss sequence (`true` = miss).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MissPattern {
    pub task: usize,
    /// Index of the first job covered.
    pub base: u64,
    pub misses: Vec<bool>,
}

impl MissPattern {
    pub fn new(task: usize, misses: Vec<bool>) -> Self {
        MissPattern {
            task,
            base: 0,
            misses,
        }
    }

    pub fn all_hit(task: usize, len: usize) -> Self {
        Self::new(task, vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.misses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.misses.is_empty()
    }

    pub fn miss_count(&self) -> usize {
        self.misses.iter().filter(|&&m| m).count()
    }

    /// Parses `M`/`H` strings, e.g. `"MHH"`.
    pub fn parse(task: usize, s: &str) -> Option<Self> {
        let misses = s
            .chars()
            .map(|c| match c {
                'M' | 'm' | '1' => Some(true),
                'H' | 'h' | '0' => Some(false),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self::new(task, misses))
    }

    pub fn render(&self) -> String {
        self.misses.iter().map(|&m| if m { 'M' } else { 'H' }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationClass {
    Typical,
    Overload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceBound {
    Lower,
    Upper,
}

/// Number of activations of `task` in any half-open window of length
/// `window`. Lower and upper bounds coincide for strictly periodic
/// activation and single-class overload.
pub fn event_bound(task: &Task, error_distance: Tick, window: Tick, class: ActivationClass) -> u64 {
    match class {
        ActivationClass::Typical => window.div_ceil(task.period),
        ActivationClass::Overload if task.detection.is_protected() => window.div_ceil(error_distance),
        ActivationClass::Overload => 0,
    }
}

/// Service demand of `n` consecutive activations.
pub fn demand(task: &Task, n: u64, class: ActivationClass) -> Tick {
    match class {
        ActivationClass::Typical => n * task.effective_wcet(),
        ActivationClass::Overload => n * task.recovery_wcet(),
    }
}

/// Distance between the first and the `q`-th of `q` consecutive typical
/// activations.
pub fn event_distance(task: &Task, q: u64, _bound: DistanceBound) -> Tick {
    assert!(q >= 1, "event distance needs at least one event");
    (q - 1) * task.period
}

pub fn hyperperiod(tasks: &[Task]) -> Result<Tick, ModelError> {
    let mut periods = tasks.iter().map(|t| t.period);
    let first = periods.next().ok_or(ModelError::EmptyTaskSet)?;
    periods.try_fold(first, |acc, p| {
        let g = acc.gcd(&p);
        (acc / g).checked_mul(p).ok_or(ModelError::HyperperiodOverflow)
    })
}

/// Maximum number of misses in any `window` consecutive entries of a
/// linear sequence. Windows longer than the sequence count every entry.
pub fn sliding_window_misses(pattern: &[bool], window: usize) -> usize {
    assert!(window >= 1, "window must be positive");
    if pattern.len() <= window {
        return pattern.iter().filter(|&&m| m).count();
    }
    let mut count = pattern[..window].iter().filter(|&&m| m).count();
    let mut best = count;
    for i in window..pattern.len() {
        count += pattern[i] as usize;
        count -= pattern[i - window] as usize;
        best = best.max(count);
    }
    best
}

/// Worst window count for a hyper-period struck by an error, framed by
/// error-free hyper-periods on both sides so that windows straddling the
/// boundaries are covered. Enough error-free copies are added that every
/// window position touching the scenario is represented.
pub fn framed_window_misses(error_free: &[bool], scenario: &[bool], window: usize) -> usize {
    debug_assert_eq!(error_free.len(), scenario.len());
    let len = scenario.len().max(1);
    let copies = window.div_ceil(len).max(1);
    let mut seq = Vec::with_capacity((2 * copies + 1) * len);
    for _ in 0..copies {
        seq.extend_from_slice(error_free);
    }
    seq.extend_from_slice(scenario);
    for _ in 0..copies {
        seq.extend_from_slice(error_free);
    }
    sliding_window_misses(&seq, window)
}
