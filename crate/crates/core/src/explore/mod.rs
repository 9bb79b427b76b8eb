//! Design-space exploration over allocation, priorities and detection.

mod initial;
mod sa;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::control::{approx_worst_cost, control_cost, discretize, ControlCost, DiscretePlant};
use crate::coverage::coverage_single_error;
use crate::model::{Model, SystemConfig, WeaklyHard};
use crate::{simkit, twca};

pub use initial::{escalate_detection, first_fit_decreasing, initial_solution, InitialSolution};
pub use sa::{random_move, sa_optimize, sa_optimize_from, MoveKind, SaOutcome, TemperatureStep};

/// Schedulability backend used inside the search loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Twca,
    #[serde(alias = "sim")]
    Simulate,
}

/// What the search minimizes before penalties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Goal {
    /// Weighted, normalized control cost.
    ControlCost,
    /// `1 - P`, i.e. maximize error coverage.
    Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub schedulability: f64,
    pub coverage: f64,
    pub stability: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            schedulability: 1e3,
            coverage: 1e3,
            stability: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub t0: f64,
    pub t_star: f64,
    pub cooling: f64,
    pub iter_max: u32,
    pub penalties: Penalties,
    pub seed: u64,
    /// Probabilities of (swap priorities, change detection, migrate).
    pub moves: [f64; 3],
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            t0: 100.0,
            t_star: 0.1,
            cooling: 0.95,
            iter_max: 100,
            penalties: Penalties::default(),
            seed: 0,
            moves: [0.4, 0.4, 0.2],
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_star > 0.0) {
            return Err(format!("stop temperature {} must be positive", self.t_star));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(format!("cooling factor {} outside (0, 1)", self.cooling));
        }
        if self.moves.iter().any(|&p| !(p >= 0.0)) || (self.moves.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("move probabilities {:?} must be non-negative and sum to 1", self.moves));
        }
        Ok(())
    }
}

/// Evaluation of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Objective {
    /// Weighted control cost over stable controllers.
    pub cost: f64,
    pub coverage: f64,
    pub schedulable: bool,
    pub coverage_ok: bool,
    pub stable: bool,
    /// Tasks violating a declared constraint.
    pub violations: usize,
    pub unstable: usize,
    /// Minimized quantity including penalties.
    pub penalized: f64,
}

impl Objective {
    pub fn feasible(&self) -> bool {
        self.schedulable && self.coverage_ok && self.stable
    }
}

/// `Σ ω J / J_des` over stable controllers, with the number of unstable
/// ones. Terms are `(cost, weight, desired cost)`.
pub fn system_cost(terms: &[(ControlCost, f64, f64)]) -> (f64, usize) {
    terms.iter().fold((0.0, 0), |(sum, bad), &(cost, weight, desired)| match cost {
        ControlCost::Steps(j) => (sum + weight * f64::from(j) / desired, bad),
        ControlCost::Unstable => (sum, bad + 1),
    })
}

/// Scores configurations of one model, caching control costs and whole
/// evaluations.
pub struct Evaluator<'m> {
    model: &'m Model,
    pub backend: Backend,
    pub threshold: f64,
    pub penalties: Penalties,
    pub goal: Goal,
    plants: Vec<DiscretePlant>,
    exact: HashMap<(usize, Vec<bool>), ControlCost>,
    approx: HashMap<(usize, WeaklyHard), ControlCost>,
    seen: HashMap<SystemConfig, Objective>,
    evaluations: u64,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m Model, backend: Backend, threshold: f64) -> Self {
        // A miss pushes the held input, so every history slot up to the
        // current staleness holds the same value and one slot suffices.
        let plants = model
            .plants
            .iter()
            .map(|p| discretize(p, 1).expect("validated plant discretizes"))
            .collect();
        Evaluator {
            model,
            backend,
            threshold,
            penalties: Penalties::default(),
            goal: Goal::ControlCost,
            plants,
            exact: HashMap::new(),
            approx: HashMap::new(),
            seen: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn with_penalties(mut self, penalties: Penalties) -> Self {
        self.penalties = penalties;
        self
    }

    pub fn with_goal(mut self, goal: Goal) -> Self {
        self.goal = goal;
        self
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// Configurations scored so far, cache hits excluded.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn evaluate(&mut self, cfg: &SystemConfig) -> Objective {
        if let Some(o) = self.seen.get(cfg) {
            return *o;
        }
        let o = self.score(cfg);
        self.evaluations += 1;
        self.seen.insert(cfg.clone(), o);
        o
    }

    fn score(&mut self, cfg: &SystemConfig) -> Objective {
        let model = self.model;
        let coverage = coverage_single_error(model, cfg);
        let (violations, costs) = match self.backend {
            Backend::Twca => self.twca_costs(cfg),
            Backend::Simulate => self.simulated_costs(cfg),
        };
        let (cost, unstable) = system_cost(&costs);
        let coverage_ok = coverage >= self.threshold;
        let base = match self.goal {
            Goal::ControlCost => cost,
            Goal::Coverage => 1.0 - coverage,
        };
        let p = self.penalties;
        let penalized = base
            + p.schedulability * violations as f64
            + p.coverage * (self.threshold - coverage).max(0.0) * 100.0
            + p.stability * unstable as f64;
        Objective {
            cost,
            coverage,
            schedulable: violations == 0,
            coverage_ok,
            stable: unstable == 0,
            violations,
            unstable,
            penalized,
        }
    }

    fn twca_costs(&mut self, cfg: &SystemConfig) -> (usize, Vec<(ControlCost, f64, f64)>) {
        let model = self.model;
        let report = twca::analyze(model, cfg);
        let mut costs = Vec::new();
        for (i, task) in model.control_tasks() {
            let ctl = task.control.as_ref().expect("control task");
            let checks = &report.tasks[i].constraints;
            let bounds: Vec<WeaklyHard> = if checks.is_empty() {
                let dmm = twca::dmm_bound(model, cfg, i, 1);
                vec![WeaklyHard { misses: dmm as u32, window: 1 }]
            } else {
                checks
                    .iter()
                    .map(|c| WeaklyHard {
                        misses: c.dmm_bound.min(c.constraint.window as u64) as u32,
                        window: c.constraint.window,
                    })
                    .collect()
            };
            let mut worst = ControlCost::Steps(0);
            for b in bounds {
                worst = worst.max(self.approx_cost(ctl.plant, b));
            }
            costs.push((worst, ctl.weight, ctl.desired_cost));
        }
        (report.violations(), costs)
    }

    fn approx_cost(&mut self, plant: usize, bound: WeaklyHard) -> ControlCost {
        let dp = &self.plants[plant];
        *self
            .approx
            .entry((plant, bound))
            .or_insert_with(|| approx_worst_cost(dp, bound).unwrap_or(ControlCost::Unstable))
    }

    fn simulated_costs(&mut self, cfg: &SystemConfig) -> (usize, Vec<(ControlCost, f64, f64)>) {
        let model = self.model;
        let verdict = simkit::event_sim_verdict(model, cfg);
        let mut costs = Vec::new();
        for (i, task) in model.control_tasks() {
            let ctl = task.control.as_ref().expect("control task");
            let mut worst = ControlCost::Steps(0);
            for p in &verdict.patterns[i] {
                worst = worst.max(self.exact_cost(ctl.plant, &p.misses));
            }
            costs.push((worst, ctl.weight, ctl.desired_cost));
        }
        (verdict.violations.len(), costs)
    }

    fn exact_cost(&mut self, plant: usize, pattern: &[bool]) -> ControlCost {
        // All-hit patterns share one cost regardless of length.
        let key: Vec<bool> = if pattern.iter().any(|&m| m) { pattern.to_vec() } else { vec![false] };
        if let Some(c) = self.exact.get(&(plant, key.clone())) {
            return *c;
        }
        let c = control_cost(&self.plants[plant], &key);
        self.exact.insert((plant, key), c);
        c
    }
}

/// Fresh, uncached evaluation.
pub fn evaluate(model: &Model, cfg: &SystemConfig, backend: Backend, threshold: f64) -> Objective {
    Evaluator::new(model, backend, threshold).evaluate(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::LtiPlant;
    use crate::model::{ControlBinding, Detection, Platform, Task};
    use nalgebra::DMatrix;

    #[test]
    fn system_cost_examples() {
        let nominal = vec![(ControlCost::Steps(7), 1.0, 7.0); 4];
        assert_eq!(system_cost(&nominal), (4.0, 0));
        assert_eq!(system_cost(&[(ControlCost::Steps(14), 2.0, 7.0)]), (4.0, 0));
        let (_, bad) = system_cost(&[(ControlCost::Unstable, 1.0, 7.0), (ControlCost::Steps(1), 1.0, 1.0)]);
        assert_eq!(bad, 1);
    }

    pub(crate) fn cruise() -> LtiPlant {
        LtiPlant {
            id: "cruise".into(),
            a: DMatrix::from_row_slice(1, 1, &[-0.05]),
            b: DMatrix::from_row_slice(1, 1, &[0.001]),
            c: DMatrix::from_row_slice(1, 1, &[1.0]),
            sampling_period: 0.1,
            let_deadline: 0.1,
            gain: DMatrix::from_row_slice(1, 2, &[1366.2522927058205, -0.25498752080731674]),
            cost_threshold: 0.1,
            horizon_cap: 200,
        }
    }

    /// Table 1 with τ4 driving the cruise plant at 10 ms ticks.
    pub(crate) fn table1(constraint: WeaklyHard) -> Model {
        let mut t4 = Task::periodic("t4", 10, 1).with_constraints(vec![constraint]);
        t4.control = Some(ControlBinding {
            plant: 0,
            weight: 1.0,
            desired_cost: 9.0,
        });
        let mut m = Model::new(
            Platform::with_cpus(1),
            vec![
                Task::periodic("t1", 5, 1),
                Task::periodic("t2", 6, 1),
                Task::periodic("t3", 3, 1),
                t4,
            ],
        );
        m.tick_seconds = 0.01;
        m.plants = vec![cruise()];
        m.validate().unwrap();
        m
    }

    #[test]
    fn feasible_total_is_cost() {
        let m = table1(WeaklyHard::HARD);
        let cfg = m.uniprocessor_config();
        for backend in [Backend::Twca, Backend::Simulate] {
            let o = evaluate(&m, &cfg, backend, 0.0);
            assert!(o.feasible());
            assert_eq!(o.penalized, o.cost);
            assert_eq!(o.cost, 1.0);
        }
    }

    #[test]
    fn fig1_configuration_is_penalized() {
        let m = table1(WeaklyHard::HARD);
        let mut cfg = m.uniprocessor_config();
        cfg.detection[3] = Detection::Eoc;
        let o = evaluate(&m, &cfg, Backend::Simulate, 0.3);
        assert!(!o.schedulable && o.coverage_ok);
        assert_eq!(o.violations, 1);
        assert!(o.penalized >= o.cost + 1e3);
    }

    #[test]
    fn coverage_penalty_scales_with_gap() {
        let m = table1(WeaklyHard::HARD);
        let cfg = m.uniprocessor_config();
        let o = evaluate(&m, &cfg, Backend::Twca, 0.3);
        // P = 0.2, gap 0.1
        assert!((o.penalized - (o.cost + 1e3 * 0.1 * 100.0)).abs() < 1e-6);
    }

    #[test]
    fn weakly_hard_fig1_is_feasible_on_both_backends() {
        let m = table1(WeaklyHard::new(2, 10).unwrap());
        let mut cfg = m.uniprocessor_config();
        cfg.detection[3] = Detection::Eoc;
        let sim = evaluate(&m, &cfg, Backend::Simulate, 0.3);
        assert!(sim.feasible());
        // TWCA bounds 4 misses in 10, above the declared 2.
        let twca = evaluate(&m, &cfg, Backend::Twca, 0.3);
        assert!(!twca.schedulable);
    }

    #[test]
    fn cache_returns_identical_objective() {
        let m = table1(WeaklyHard::new(2, 10).unwrap());
        let cfg = m.uniprocessor_config();
        let mut ev = Evaluator::new(&m, Backend::Simulate, 0.0);
        let a = ev.evaluate(&cfg);
        let b = ev.evaluate(&cfg);
        assert_eq!(a, b);
        assert_eq!(ev.evaluations(), 1);
    }
}
