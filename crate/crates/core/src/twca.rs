//! Typical worst-case analysis: response times of typical activations
//! under at most one recovery burst per error distance, and the resulting
//! deadline-miss bound for static-priority preemptive CPUs.

use serde::Serialize;
use thiserror::Error;

use crate::model::{Model, Resolved, SystemConfig, Tick, WeaklyHard};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum TwcaError {
    #[error("busy window of task {task} exceeds {cap} ticks")]
    Diverged { task: usize, cap: Tick },
}

/// Busy-window quantities of one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BusyWindow {
    pub length: Tick,
    /// Number of typical activations the window covers (`K_i`).
    pub activations: u64,
}

/// Level-i analysis context: the task under analysis and every task of
/// higher or equal priority on its CPU.
#[derive(Debug, Clone)]
pub struct LevelAnalysis {
    target: Resolved,
    higher: Vec<Resolved>,
    /// Largest recovery budget among the target and `higher`.
    max_recovery: Tick,
    error_distance: Tick,
    cap: Tick,
}

impl LevelAnalysis {
    pub fn new(model: &Model, cfg: &SystemConfig, task: usize) -> Self {
        let cpu = cfg.cpu[task];
        let resolved = cfg.resolve(model, cpu);
        let target = *resolved.iter().find(|r| r.index == task).expect("task on its CPU");
        let higher: Vec<Resolved> = resolved
            .into_iter()
            .filter(|r| r.priority < target.priority)
            .collect();
        let max_recovery = higher
            .iter()
            .map(|r| r.recovery)
            .chain(std::iter::once(target.recovery))
            .max()
            .unwrap_or(0);
        let hyper = model.hyperperiod();
        LevelAnalysis {
            target,
            higher,
            max_recovery,
            error_distance: model.error_distance(),
            cap: 2 * hyper,
        }
    }

    /// Least fixed point of the demand of `q` typical activations plus
    /// higher-priority interference, plus the largest recovery burst when
    /// `with_overload` is set.
    pub fn busy_demand(&self, q: u64, with_overload: bool) -> Result<Tick, TwcaError> {
        let own = q * self.target.wcet;
        let mut b = own;
        loop {
            let interference: Tick = self
                .higher
                .iter()
                .map(|r| b.div_ceil(r.period) * r.wcet)
                .sum();
            let overload = if with_overload {
                b.div_ceil(self.error_distance) * self.max_recovery
            } else {
                0
            };
            let next = own + interference + overload;
            if next > self.cap {
                return Err(TwcaError::Diverged {
                    task: self.target.index,
                    cap: self.cap,
                });
            }
            if next == b {
                return Ok(b);
            }
            b = next;
        }
    }

    /// `K_i = min{q >= 1 : B(q) <= δ(q + 1)}` and `BW_i = B(K_i)`.
    pub fn busy_window(&self, with_overload: bool) -> Result<BusyWindow, TwcaError> {
        let mut q = 1;
        loop {
            let b = self.busy_demand(q, with_overload)?;
            if b <= q * self.target.period {
                return Ok(BusyWindow {
                    length: b,
                    activations: q,
                });
            }
            q += 1;
        }
    }

    /// `B(q) - δ(q)` for every `q` of the busy window.
    fn responses(&self, window: BusyWindow, with_overload: bool) -> Result<Vec<Tick>, TwcaError> {
        (1..=window.activations)
            .map(|q| Ok(self.busy_demand(q, with_overload)? - (q - 1) * self.target.period))
            .collect()
    }

    pub fn wcrt(&self, with_overload: bool) -> Result<Tick, TwcaError> {
        let window = self.busy_window(with_overload)?;
        Ok(self
            .responses(window, with_overload)?
            .into_iter()
            .max()
            .expect("at least one activation"))
    }

    /// Activation indices (1-based) of the busy window whose response can
    /// exceed the deadline once a recovery burst lands in it.
    pub fn miss_candidates(&self) -> Result<Vec<u64>, TwcaError> {
        let window = self.busy_window(true)?;
        Ok(self
            .responses(window, true)?
            .into_iter()
            .zip(1..)
            .filter(|&(r, _)| r > self.target.deadline)
            .map(|(_, q)| q)
            .collect())
    }
}

/// Per-task TWCA result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskAnalysis {
    pub task: usize,
    pub id: String,
    /// Response-time bound with one recovery burst; `None` on divergence.
    pub wcrt: Option<Tick>,
    /// Response-time bound of the error-free typical model.
    pub typical_wcrt: Option<Tick>,
    pub busy_window: Option<BusyWindow>,
    pub miss_candidates: Vec<u64>,
    pub constraints: Vec<ConstraintCheck>,
    pub schedulable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub constraint: WeaklyHard,
    pub dmm_bound: u64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwcaReport {
    pub tasks: Vec<TaskAnalysis>,
    pub schedulable: bool,
}

impl TwcaReport {
    pub fn violations(&self) -> usize {
        self.tasks.iter().filter(|t| !t.schedulable).count()
    }
}

pub fn busy_demand(model: &Model, cfg: &SystemConfig, task: usize, q: u64) -> Result<Tick, TwcaError> {
    LevelAnalysis::new(model, cfg, task).busy_demand(q, true)
}

pub fn busy_window(model: &Model, cfg: &SystemConfig, task: usize) -> Result<BusyWindow, TwcaError> {
    LevelAnalysis::new(model, cfg, task).busy_window(true)
}

pub fn wcrt(model: &Model, cfg: &SystemConfig, task: usize) -> Result<Tick, TwcaError> {
    LevelAnalysis::new(model, cfg, task).wcrt(true)
}

pub fn miss_candidates(model: &Model, cfg: &SystemConfig, task: usize) -> Result<Vec<u64>, TwcaError> {
    LevelAnalysis::new(model, cfg, task).miss_candidates()
}

/// Upper bound on misses in any `window` consecutive activations.
///
/// Falls back to the vacuous bound `window` when the busy window diverges
/// or the error-free typical model already misses deadlines, since the
/// overload-counting argument assumes a feasible typical model.
pub fn dmm_bound(model: &Model, cfg: &SystemConfig, task: usize, window: u64) -> u64 {
    let level = LevelAnalysis::new(model, cfg, task);
    dmm_from(&level, model.tasks[task].period, window)
}

fn dmm_from(level: &LevelAnalysis, period: Tick, window: u64) -> u64 {
    assert!(window >= 1);
    let typical_ok = matches!(level.wcrt(false), Ok(r) if r <= level.target.deadline);
    if !typical_ok {
        return window;
    }
    let (Ok(bw), Ok(r), Ok(candidates)) = (level.busy_window(true), level.wcrt(true), level.miss_candidates()) else {
        return window;
    };
    if candidates.is_empty() {
        return 0;
    }
    let span = bw.length + (window - 1) * period + r;
    let bursts = span.div_ceil(level.error_distance);
    window.min(candidates.len() as u64 * bursts)
}

/// Analyses every task and checks every declared constraint.
pub fn analyze(model: &Model, cfg: &SystemConfig) -> TwcaReport {
    let tasks: Vec<TaskAnalysis> = (0..model.tasks.len())
        .map(|i| analyze_task(model, cfg, i))
        .collect();
    let schedulable = tasks.iter().all(|t| t.schedulable);
    TwcaReport { tasks, schedulable }
}

fn analyze_task(model: &Model, cfg: &SystemConfig, i: usize) -> TaskAnalysis {
    let task = &model.tasks[i];
    let level = LevelAnalysis::new(model, cfg, i);
    let wcrt = level.wcrt(true).ok();
    let constraints: Vec<ConstraintCheck> = task
        .constraints
        .iter()
        .map(|&c| {
            let dmm = dmm_from(&level, task.period, c.window as u64);
            ConstraintCheck {
                constraint: c,
                dmm_bound: dmm,
                satisfied: dmm <= c.misses as u64,
            }
        })
        .collect();
    TaskAnalysis {
        task: i,
        id: task.id.clone(),
        wcrt,
        typical_wcrt: level.wcrt(false).ok(),
        busy_window: level.busy_window(true).ok(),
        miss_candidates: level.miss_candidates().unwrap_or_default(),
        schedulable: wcrt.is_some() && constraints.iter().all(|c| c.satisfied),
        constraints,
    }
}
