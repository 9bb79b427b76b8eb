//! Simulated annealing over system configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{initial_solution, Evaluator, Objective, SaParams};
use crate::model::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveKind {
    SwapPriority,
    ChangeDetection,
    Migrate,
}

/// Applies one random mutation. Swaps fall back to a detection change when
/// the drawn task shares its CPU with nobody; single-CPU platforms never
/// migrate.
pub fn random_move<R: Rng>(cfg: &SystemConfig, cpus: usize, moves: [f64; 3], rng: &mut R) -> (SystemConfig, MoveKind) {
    let mut next = cfg.clone();
    let n = cfg.cpu.len();
    if n == 0 {
        return (next, MoveKind::ChangeDetection);
    }
    let weights = if cpus > 1 { moves } else { [moves[0], moves[1], 0.0] };
    let total: f64 = weights.iter().sum();
    let draw = rng.gen::<f64>() * total;
    let mut kind = if draw < weights[0] {
        MoveKind::SwapPriority
    } else if draw < weights[0] + weights[1] || weights[2] == 0.0 {
        MoveKind::ChangeDetection
    } else {
        MoveKind::Migrate
    };
    let task = rng.gen_range(0..n);
    if kind == MoveKind::SwapPriority {
        let peers: Vec<usize> = (0..n).filter(|&j| j != task && cfg.cpu[j] == cfg.cpu[task]).collect();
        if peers.is_empty() {
            kind = MoveKind::ChangeDetection;
        } else {
            let other = peers[rng.gen_range(0..peers.len())];
            next.priority.swap(task, other);
        }
    }
    match kind {
        MoveKind::SwapPriority => {}
        MoveKind::ChangeDetection => next.detection[task] = cfg.detection[task].cycle(),
        MoveKind::Migrate => {
            let mut target = rng.gen_range(0..cpus - 1);
            if target >= cfg.cpu[task] {
                target += 1;
            }
            let lowest = (0..n)
                .filter(|&j| cfg.cpu[j] == target)
                .map(|j| cfg.priority[j] + 1)
                .max()
                .unwrap_or(0);
            next.cpu[task] = target;
            next.priority[task] = lowest;
        }
    }
    (next, kind)
}

/// Search state after one temperature level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TemperatureStep {
    pub temperature: f64,
    pub current: f64,
    /// Best feasible penalized objective so far, if any.
    pub best: Option<f64>,
    pub current_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaOutcome {
    /// Best feasible configuration, or the starting point when none was found.
    pub config: SystemConfig,
    pub objective: Objective,
    pub feasible: bool,
    pub history: Vec<TemperatureStep>,
    pub evaluations: u64,
}

/// Anneals from the constructive initial solution for `threshold`.
pub fn sa_optimize(ev: &mut Evaluator, params: &SaParams) -> SaOutcome {
    let start = initial_solution(ev.model(), ev.threshold).config;
    sa_optimize_from(ev, params, start)
}

/// Anneals from `start`. Every evaluated feasible candidate competes for
/// the best slot, so the starting point is returned if nothing beats it.
pub fn sa_optimize_from(ev: &mut Evaluator, params: &SaParams, start: SystemConfig) -> SaOutcome {
    let cpus = ev.model().platform.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut current = start;
    let mut eta = ev.evaluate(&current);
    let mut best: Option<(SystemConfig, Objective)> = eta.feasible().then(|| (current.clone(), eta));
    let mut history = Vec::new();
    let mut temperature = params.t0;
    while temperature > params.t_star {
        for _ in 0..params.iter_max {
            let (candidate, _) = random_move(&current, cpus, params.moves, &mut rng);
            let o = ev.evaluate(&candidate);
            if o.feasible() && best.as_ref().is_none_or(|(_, b)| o.penalized < b.penalized) {
                best = Some((candidate.clone(), o));
            }
            let delta = o.penalized - eta.penalized;
            if delta < 0.0 || (-delta / temperature).exp() > rng.gen::<f64>() {
                current = candidate;
                eta = o;
            }
        }
        history.push(TemperatureStep {
            temperature,
            current: eta.penalized,
            best: best.as_ref().map(|(_, b)| b.penalized),
            current_feasible: eta.feasible(),
        });
        temperature *= params.cooling;
    }
    let evaluations = ev.evaluations();
    match best {
        Some((config, objective)) => SaOutcome {
            config,
            objective,
            feasible: true,
            history,
            evaluations,
        },
        None => SaOutcome {
            config: current,
            objective: eta,
            feasible: false,
            history,
            evaluations,
        },
    }
}
