//! Event-driven static-priority preemptive simulation over one hyper-period
//! per CPU, with at most one injected error per run.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{framed_window_misses, MissPattern, Model, Resolved, SystemConfig, Tick};
use crate::twca;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Primary,
    Recovery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub task: usize,
    pub instance: u64,
    pub release: Tick,
    pub remaining: Tick,
    pub kind: JobKind,
}

/// The job struck by the transient error, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ErrorScenario {
    None,
    Strike { task: usize, instance: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Release,
    Start,
    Preempt,
    Complete,
    RecoveryRelease,
    DeadlineMiss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub time: Tick,
    pub cpu: usize,
    pub job: String,
    pub event: TraceKind,
}

/// Result of one (CPU, scenario) run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub cpu: usize,
    pub scenario: ErrorScenario,
    /// Task indices on this CPU, highest priority first.
    pub tasks: Vec<usize>,
    /// Miss pattern per entry of `tasks`, one flag per instance.
    pub patterns: Vec<MissPattern>,
    /// Final completion (recovery included) per instance.
    pub completions: Vec<Vec<Tick>>,
    /// Execution time spent inside `[0, hyperperiod)`.
    pub busy: Tick,
    pub idle: Tick,
    /// Total execution time, including any run past the hyper-period.
    pub executed: Tick,
    pub makespan: Tick,
    pub trace: Vec<TraceEvent>,
}

impl SimOutcome {
    pub fn pattern_of(&self, task: usize) -> Option<&MissPattern> {
        self.tasks.iter().position(|&t| t == task).map(|p| &self.patterns[p])
    }
}

// Pending-queue order: priority, then instance, then primary before recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Key {
    priority: u32,
    instance: u64,
    kind: JobKind,
}

fn job_label(model: &Model, task: usize, instance: u64, kind: JobKind) -> String {
    match kind {
        JobKind::Primary => format!("{}#{}", model.tasks[task].id, instance),
        JobKind::Recovery => format!("{}#{}r", model.tasks[task].id, instance),
    }
}

pub fn simulate_scenario(model: &Model, cfg: &SystemConfig, cpu: usize, scenario: ErrorScenario) -> SimOutcome {
    run(model, cfg, cpu, scenario, false)
}

pub fn simulate_traced(model: &Model, cfg: &SystemConfig, cpu: usize, scenario: ErrorScenario) -> SimOutcome {
    run(model, cfg, cpu, scenario, true)
}

fn run(model: &Model, cfg: &SystemConfig, cpu: usize, scenario: ErrorScenario, traced: bool) -> SimOutcome {
    let hyper = model.hyperperiod();
    let resolved: Vec<Resolved> = cfg.resolve(model, cpu);
    let rank_of = |task: usize| resolved.iter().position(|r| r.index == task);
    let struck = match scenario {
        ErrorScenario::Strike { task, instance } => rank_of(task).map(|rank| (rank, instance)),
        ErrorScenario::None => None,
    };

    let mut releases: Vec<(Tick, usize, u64)> = Vec::new();
    for (rank, r) in resolved.iter().enumerate() {
        for j in 0..hyper / r.period {
            releases.push((j * r.period, rank, j));
        }
    }
    releases.sort_unstable();

    let mut completions: Vec<Vec<Tick>> = resolved.iter().map(|r| vec![0; (hyper / r.period) as usize]).collect();
    let mut pending: BTreeMap<Key, (usize, Tick)> = BTreeMap::new();
    let mut trace = Vec::new();
    let mut emit = |time: Tick, rank: usize, instance: u64, kind: JobKind, event: TraceKind| {
        if traced {
            trace.push(TraceEvent {
                time,
                cpu,
                job: job_label(model, resolved[rank].index, instance, kind),
                event,
            });
        }
    };

    let mut now: Tick = 0;
    let mut next = 0;
    let mut running: Option<Key> = None;
    let (mut busy, mut executed) = (0, 0);
    loop {
        while next < releases.len() && releases[next].0 <= now {
            let (time, rank, instance) = releases[next];
            let key = Key {
                priority: resolved[rank].priority,
                instance,
                kind: JobKind::Primary,
            };
            pending.insert(key, (rank, resolved[rank].wcet));
            emit(time, rank, instance, JobKind::Primary, TraceKind::Release);
            next += 1;
        }
        let Some((&key, &(rank, remaining))) = pending.first_key_value() else {
            match releases.get(next) {
                Some(&(time, _, _)) => {
                    now = time;
                    continue;
                }
                None => break,
            }
        };
        if running != Some(key) {
            if let Some(prev) = running {
                if let Some(&(prev_rank, _)) = pending.get(&prev) {
                    emit(now, prev_rank, prev.instance, prev.kind, TraceKind::Preempt);
                }
            }
            emit(now, rank, key.instance, key.kind, TraceKind::Start);
            running = Some(key);
        }
        let horizon = releases.get(next).map_or(Tick::MAX, |r| r.0);
        let slice = remaining.min(horizon - now);
        busy += slice.min(hyper.saturating_sub(now));
        executed += slice;
        now += slice;
        if slice < remaining {
            pending.insert(key, (rank, remaining - slice));
            continue;
        }
        pending.remove(&key);
        running = None;
        emit(now, rank, key.instance, key.kind, TraceKind::Complete);
        let r = &resolved[rank];
        if key.kind == JobKind::Primary && struck == Some((rank, key.instance)) && r.recovery > 0 {
            let recovery = Key {
                kind: JobKind::Recovery,
                ..key
            };
            pending.insert(recovery, (rank, r.recovery));
            emit(now, rank, key.instance, JobKind::Recovery, TraceKind::RecoveryRelease);
            continue;
        }
        completions[rank][key.instance as usize] = now;
        if now > key.instance * r.period + r.deadline {
            emit(now, rank, key.instance, key.kind, TraceKind::DeadlineMiss);
        }
    }

    let patterns = resolved
        .iter()
        .zip(&completions)
        .map(|(r, done)| {
            let misses = done
                .iter()
                .zip(0..)
                .map(|(&c, j)| c > j * r.period + r.deadline)
                .collect();
            MissPattern::new(r.index, misses)
        })
        .collect();
    SimOutcome {
        cpu,
        scenario,
        tasks: resolved.iter().map(|r| r.index).collect(),
        patterns,
        completions,
        busy,
        idle: hyper - busy,
        executed,
        makespan: now,
        trace,
    }
}

/// The error-free scenario plus one per instance of every protected task on
/// `cpu`.
pub fn enumerate_scenarios(model: &Model, cfg: &SystemConfig, cpu: usize) -> Vec<ErrorScenario> {
    let hyper = model.hyperperiod();
    let mut out = vec![ErrorScenario::None];
    for r in cfg.resolve(model, cpu) {
        if r.detection.is_protected() && r.recovery > 0 {
            out.extend((0..hyper / r.period).map(|instance| ErrorScenario::Strike {
                task: r.index,
                instance,
            }));
        }
    }
    out
}

/// Outcome of the full scenario sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimVerdict {
    pub schedulable: bool,
    /// True when the analytic bound alone settled the verdict.
    pub shortcut: bool,
    /// Per task: the pattern with the most misses in any declared window.
    pub worst_patterns: Vec<MissPattern>,
    /// Per task: every distinct pattern observed across scenarios.
    pub patterns: Vec<Vec<MissPattern>>,
    /// Per task: the largest framed window miss count per declared constraint.
    pub window_misses: Vec<Vec<usize>>,
    /// Tasks violating at least one declared constraint.
    pub violations: Vec<usize>,
    pub scenarios: usize,
}

/// Schedulability by exhaustive single-error simulation, skipped when every
/// analytic response-time bound already meets its deadline.
pub fn event_sim_verdict(model: &Model, cfg: &SystemConfig) -> SimVerdict {
    let report = twca::analyze(model, cfg);
    let meets = report
        .tasks
        .iter()
        .zip(&model.tasks)
        .all(|(a, t)| a.wcrt.is_some_and(|r| r <= t.deadline));
    if meets {
        let hyper = model.hyperperiod();
        let all_hit: Vec<MissPattern> = model
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| MissPattern::all_hit(i, (hyper / t.period) as usize))
            .collect();
        return SimVerdict {
            schedulable: true,
            shortcut: true,
            patterns: all_hit.iter().map(|p| vec![p.clone()]).collect(),
            window_misses: model.tasks.iter().map(|t| vec![0; t.constraints.len()]).collect(),
            worst_patterns: all_hit,
            violations: Vec::new(),
            scenarios: 0,
        };
    }
    exhaustive_verdict(model, cfg)
}

/// Simulates every scenario on every CPU without the analytic shortcut.
pub fn exhaustive_verdict(model: &Model, cfg: &SystemConfig) -> SimVerdict {
    let n = model.tasks.len();
    let runs: Vec<(ErrorScenario, usize)> = (0..model.platform.len())
        .flat_map(|cpu| enumerate_scenarios(model, cfg, cpu).into_iter().map(move |s| (s, cpu)))
        .collect();
    let outcomes: Vec<SimOutcome> = runs
        .par_iter()
        .map(|&(s, cpu)| simulate_scenario(model, cfg, cpu, s))
        .collect();

    let mut patterns: Vec<Vec<MissPattern>> = vec![Vec::new(); n];
    let mut error_free: Vec<Option<MissPattern>> = vec![None; n];
    for o in &outcomes {
        for p in &o.patterns {
            if o.scenario == ErrorScenario::None {
                error_free[p.task] = Some(p.clone());
            }
            if !patterns[p.task].contains(p) {
                patterns[p.task].push(p.clone());
            }
        }
    }

    let mut window_misses = Vec::with_capacity(n);
    let mut worst_patterns = Vec::with_capacity(n);
    let mut violations = Vec::new();
    for (i, task) in model.tasks.iter().enumerate() {
        let base = error_free[i].as_ref().expect("every task simulated");
        let score = |p: &MissPattern| -> Vec<usize> {
            task.constraints
                .iter()
                .map(|c| framed_window_misses(&base.misses, &p.misses, c.window as usize))
                .collect()
        };
        let mut worst = vec![0; task.constraints.len()];
        let mut chosen = base;
        let mut chosen_key = (0, 0);
        for p in &patterns[i] {
            let s = score(p);
            for (w, v) in worst.iter_mut().zip(&s) {
                *w = (*w).max(*v);
            }
            let key = (s.iter().copied().max().unwrap_or(0), p.miss_count());
            if key > chosen_key {
                chosen_key = key;
                chosen = p;
            }
        }
        if task.constraints.iter().zip(&worst).any(|(c, &w)| w > c.misses as usize) {
            violations.push(i);
        }
        worst_patterns.push(chosen.clone());
        window_misses.push(worst);
    }
    SimVerdict {
        schedulable: violations.is_empty(),
        shortcut: false,
        worst_patterns,
        patterns,
        window_misses,
        violations,
        scenarios: runs.len(),
    }
}

pub fn write_trace<W: Write>(events: &[TraceEvent], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}
