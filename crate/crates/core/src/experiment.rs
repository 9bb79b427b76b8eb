//! Experiment procedures: coverage maximization under hard versus
//! weakly-hard constraints, heuristic comparison and parameter sweeps.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::explore::{
    evaluate, initial_solution, sa_optimize_from, Backend, Evaluator, Goal, Objective, SaOutcome, SaParams,
};
use crate::model::{Model, SystemConfig};
use crate::synth::{generate_synthetic, harden, SynthParams};

/// Version of the sweep CSV column layout.
pub const CSV_SCHEMA: u32 = 1;

/// Reduced annealing schedule for sweeps: 66 temperature levels of 20 moves.
pub fn sweep_params(seed: u64) -> SaParams {
    SaParams {
        cooling: 0.9,
        iter_max: 20,
        seed,
        ..SaParams::default()
    }
}

/// Full annealing schedule with temperatures on the scale of normalized
/// system cost, where neighbouring configurations differ by hundredths.
pub fn comparison_params(seed: u64) -> SaParams {
    SaParams {
        t0: 1.0,
        t_star: 1e-3,
        seed,
        ..SaParams::default()
    }
}

/// Coverage search: minimizes `1 - P` subject to schedulability and
/// stability. Without an explicit `start` it begins at the feasible
/// constructive solution of highest coverage over thresholds 0, 0.1, …, 1.
pub fn maximize_coverage(model: &Model, backend: Backend, params: &SaParams, start: Option<SystemConfig>) -> SaOutcome {
    let mut ev = Evaluator::new(model, backend, 0.0)
        .with_penalties(params.penalties)
        .with_goal(Goal::Coverage);
    let start = start.unwrap_or_else(|| {
        let mut best = initial_solution(model, 0.0).config;
        let mut best_cov = None;
        for step in 0..=10 {
            let cfg = initial_solution(model, f64::from(step) / 10.0).config;
            let o = ev.evaluate(&cfg);
            if o.feasible() && best_cov.is_none_or(|c| o.coverage > c) {
                best_cov = Some(o.coverage);
                best = cfg;
            }
        }
        best
    });
    sa_optimize_from(&mut ev, params, start)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageCell {
    pub utilization: f64,
    pub seed: u64,
    /// Best feasible coverage with every deadline hard; 0 when none found.
    pub hard: f64,
    pub weakly_hard: f64,
}

/// Maximum coverage of one synthetic set with hard and with its declared
/// weakly-hard constraints. The weakly-hard search starts from the hard
/// optimum, which stays feasible when constraints are relaxed.
pub fn coverage_cell(synth: &SynthParams, backend: Backend, params: &SaParams) -> CoverageCell {
    let model = generate_synthetic(synth);
    let hard_model = harden(&model);
    let hard = maximize_coverage(&hard_model, backend, params, None);
    let start = hard.feasible.then(|| hard.config.clone());
    let weak = maximize_coverage(&model, backend, params, start);
    let score = |o: &SaOutcome| if o.feasible { o.objective.coverage } else { 0.0 };
    CoverageCell {
        utilization: synth.utilization,
        seed: synth.seed,
        hard: score(&hard),
        weakly_hard: score(&weak),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicResult {
    pub config: SystemConfig,
    /// Exact (simulation-backed) evaluation of `config`.
    pub exact: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicComparison {
    pub seed: u64,
    pub initial: HeuristicResult,
    pub twca: HeuristicResult,
    pub simulate: HeuristicResult,
}

/// Runs the constructive heuristic and both annealing variants from it,
/// scoring every result by exact simulation. `None` when the constructive
/// solution itself is infeasible. A search that finds nothing feasible
/// reports its starting point.
pub fn compare_heuristics(model: &Model, threshold: f64, params: &SaParams, seed: u64) -> Option<HeuristicComparison> {
    let start = initial_solution(model, threshold).config;
    let exact = |cfg: &SystemConfig| evaluate(model, cfg, Backend::Simulate, threshold);
    let initial = exact(&start);
    if !initial.feasible() {
        return None;
    }
    let run = |backend: Backend| {
        let mut ev = Evaluator::new(model, backend, threshold).with_penalties(params.penalties);
        let out = sa_optimize_from(&mut ev, params, start.clone());
        let config = if out.feasible { out.config } else { start.clone() };
        HeuristicResult {
            exact: exact(&config),
            config,
        }
    };
    Some(HeuristicComparison {
        seed,
        twca: run(Backend::Twca),
        simulate: run(Backend::Simulate),
        initial: HeuristicResult {
            config: start.clone(),
            exact: initial,
        },
    })
}

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub schema: u32,
    pub utilization: f64,
    pub threshold: f64,
    pub seed: u64,
    pub backend: Backend,
    pub coverage: f64,
    pub cost: f64,
    pub feasible: bool,
    pub evaluations: u64,
    /// Wall-clock milliseconds, only when timing is requested.
    pub runtime_ms: Option<u128>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub utilizations: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub backend: Backend,
    pub synth: SynthParams,
    pub params: SaParams,
    pub timing: bool,
}

/// Optimizes control cost for every (utilization, threshold, seed) cell in
/// parallel; rows come back in sweep order.
pub fn sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    let mut cells = Vec::new();
    for &u in &spec.utilizations {
        for &thr in &spec.thresholds {
            for &seed in &spec.seeds {
                cells.push((u, thr, seed));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(u, threshold, seed)| {
            let began = Instant::now();
            let model = generate_synthetic(&SynthParams {
                utilization: u,
                seed,
                ..spec.synth.clone()
            });
            let params = SaParams { seed, ..spec.params };
            let mut ev = Evaluator::new(&model, spec.backend, threshold).with_penalties(params.penalties);
            let start = initial_solution(&model, threshold).config;
            let out = sa_optimize_from(&mut ev, &params, start);
            SweepRow {
                schema: CSV_SCHEMA,
                utilization: u,
                threshold,
                seed,
                backend: spec.backend,
                coverage: out.objective.coverage,
                cost: out.objective.cost,
                feasible: out.feasible,
                evaluations: out.evaluations,
                runtime_ms: spec.timing.then(|| began.elapsed().as_millis()),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rows_are_ordered_and_deterministic() {
        let spec = SweepSpec {
            utilizations: vec![0.3, 0.5],
            thresholds: vec![0.2],
            seeds: vec![1, 2],
            backend: Backend::Twca,
            synth: SynthParams::default(),
            params: SaParams {
                cooling: 0.5,
                iter_max: 5,
                ..SaParams::default()
            },
            timing: false,
        };
        let rows = sweep(&spec);
        assert_eq!(rows.len(), 4);
        assert_eq!((rows[1].utilization, rows[1].seed), (0.3, 2));
        assert_eq!(rows, sweep(&spec));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "schema,utilization,threshold,seed,backend,coverage,cost,feasible,evaluations,runtime_ms\n1,0.3,0.2,1,twca,"
        ));
    }
}
