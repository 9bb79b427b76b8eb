//! Bundled demo plants and synthetic task-set generation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{control_cost, discretize, synthesize_wh, LtiPlant};
use crate::model::{ControlBinding, Model, Platform, Task, Tick, WeaklyHard};

/// Four small plants with LET-aware state-feedback gains on `[x; u_prev]`.
/// Sampling periods are 100, 50, 60 and 30 ms.
pub fn demo_plants() -> Vec<LtiPlant> {
    let plant = |id: &str, n: usize, a: &[f64], b: &[f64], h: f64, k: &[f64]| LtiPlant {
        id: id.into(),
        a: DMatrix::from_row_slice(n, n, a),
        b: DMatrix::from_row_slice(n, 1, b),
        c: DMatrix::identity(n, n),
        sampling_period: h,
        let_deadline: h,
        gain: DMatrix::from_row_slice(1, n + 1, k),
        cost_threshold: 0.1,
        horizon_cap: 200,
    };
    vec![
        plant("cruise", 1, &[-0.05], &[0.001], 0.1, &[1366.2522927058205, -0.25498752080731674]),
        plant(
            "motor_speed",
            2,
            &[-10.0, 1.0, -0.02, -2.0],
            &[0.0, 2.0],
            0.05,
            &[-0.007959021325907017, 0.9712931540116034, -0.2886692104412428],
        ),
        plant(
            "motor_position",
            3,
            &[0.0, 1.0, 0.0, 0.0, -10.0, 1.0, 0.0, -0.02, -2.0],
            &[0.0, 0.0, 2.0],
            0.06,
            &[102.90106667094366, 10.285103709922884, 3.0947681133394473, 0.1356813567942113],
        ),
        plant(
            "pendulum",
            2,
            &[0.0, 1.0, 4.0, 0.0],
            &[0.0, 1.0],
            0.03,
            &[71.46107458666947, 14.850028782004127, 0.20360108012960038],
        ),
    ]
}

/// Largest stable miss budget in `window` and the all-hit cost of a plant.
pub fn plant_profile(plant: &LtiPlant, window: u32) -> (Option<u32>, u32) {
    let dp = discretize(plant, 1).expect("demo plant discretizes");
    let k = synthesize_wh(&dp, window).expect("window within enumeration limit");
    let nominal = control_cost(&dp, &[false]).steps().unwrap_or(0);
    (k, nominal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_control: usize,
    pub n_other: usize,
    /// Target total utilization of the base execution times.
    pub utilization: f64,
    /// Period pool in units of `resolution` ticks.
    pub period_pool: Vec<Tick>,
    pub resolution: Tick,
    /// Inclusive ranges for `(k, N)` of non-control tasks.
    pub misses: (u32, u32),
    pub window: (u32, u32),
    /// Window over which control constraints are synthesized.
    pub control_window: u32,
    pub cpus: usize,
    pub tick_seconds: f64,
    /// Accepted distance between realized and target utilization.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_control: 4,
            n_other: 4,
            utilization: 0.7,
            period_pool: vec![3, 5, 6, 10, 15, 20, 30],
            resolution: 10,
            misses: (0, 4),
            window: (10, 20),
            control_window: 10,
            cpus: 1,
            tick_seconds: 1e-3,
            tolerance: 0.01,
            seed: 1,
        }
    }
}

/// Utilizations summing to `total`, uniform on the simplex.
pub fn uunifast<R: Rng>(n: usize, total: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut sum = total;
    for i in 1..n {
        let next = sum * rng.gen::<f64>().powf(1.0 / (n - i) as f64);
        out.push(sum - next);
        sum = next;
    }
    if n > 0 {
        out.push(sum);
    }
    out
}

const MAX_DRAWS: usize = 1000;

pub fn generate_synthetic(params: &SynthParams) -> Model {
    assert!(params.utilization > 0.0, "target utilization must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let plants = demo_plants();
    let tick = params.tick_seconds;
    let control_periods: Vec<Tick> = (0..params.n_control)
        .map(|j| (plants[j % plants.len()].sampling_period / tick).round() as Tick)
        .collect();
    let profiles: Vec<(Option<u32>, u32)> = plants.iter().map(|p| plant_profile(p, params.control_window)).collect();

    let n = params.n_control + params.n_other;
    let mut best: Option<(f64, Vec<(Tick, Tick)>)> = None;
    for _ in 0..MAX_DRAWS {
        let utils = uunifast(n, params.utilization, &mut rng);
        let mut shape = Vec::with_capacity(n);
        for (i, u) in utils.iter().enumerate() {
            let period = if i < params.n_control {
                control_periods[i]
            } else {
                params.period_pool[rng.gen_range(0..params.period_pool.len())] * params.resolution
            };
            shape.push((period, ((u * period as f64).round() as Tick).max(1)));
        }
        if shape.iter().any(|&(t, c)| c > t) {
            continue;
        }
        let realized: f64 = shape.iter().map(|&(t, c)| c as f64 / t as f64).sum();
        let gap = (realized - params.utilization).abs();
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, shape));
        }
        if gap <= params.tolerance {
            break;
        }
    }
    let (_, shape) = best.expect("at least one draw fits");

    let mut tasks = Vec::with_capacity(n);
    for (i, &(period, wcet)) in shape.iter().enumerate() {
        let control = i < params.n_control;
        let id = if control {
            format!("ctl{}_{}", i, plants[i % plants.len()].id)
        } else {
            format!("task{}", i - params.n_control)
        };
        let mut task = Task::periodic(id, period, wcet);
        task.eed_overhead = (wcet as f64 * 0.2).round() as Tick;
        task.compare_overhead = (wcet as f64 * 0.1).round() as Tick;
        if control {
            let (k, nominal) = profiles[i % plants.len()];
            let k = k.unwrap_or(0);
            task.constraints = vec![WeaklyHard::new(k, params.control_window).expect("k within window")];
            task.control = Some(ControlBinding {
                plant: i % plants.len(),
                weight: 1.0,
                desired_cost: f64::from(nominal.max(1)),
            });
        } else {
            let k = rng.gen_range(params.misses.0..=params.misses.1);
            let w = rng.gen_range(params.window.0..=params.window.1);
            task.constraints = vec![WeaklyHard::new(k.min(w), w).expect("k within window")];
        }
        tasks.push(task);
    }
    let mut model = Model::new(Platform::with_cpus(params.cpus), tasks);
    model.tick_seconds = tick;
    model.plants = if params.n_control > 0 { plants } else { Vec::new() };
    model
}

/// The same model with every constraint replaced by a hard deadline.
pub fn harden(model: &Model) -> Model {
    let mut hard = model.clone();
    for t in &mut hard.tasks {
        t.constraints = vec![WeaklyHard::HARD];
    }
    hard
}

/// Four-task example at 10 ms ticks; the 100 ms task drives the cruise plant.
pub fn table1() -> Model {
    let plants = demo_plants();
    let (_, nominal) = plant_profile(&plants[0], 10);
    let mut t4 = Task::periodic("t4", 10, 1);
    t4.control = Some(ControlBinding {
        plant: 0,
        weight: 1.0,
        desired_cost: f64::from(nominal),
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
    m.plants = vec![plants[0].clone()];
    m
}

/// Nine ADAS-style tasks plus the four demo controllers, 1 ms ticks.
/// Execution times are illustrative placeholders scaled by `scale`.
pub fn waters_like(scale: f64, cpus: usize) -> Model {
    const BASE: [(&str, Tick, Tick); 9] = [
        ("localization", 400, 300),
        ("lane_detection", 60, 36),
        ("detection", 200, 120),
        ("ekf", 15, 3),
        ("planner", 12, 6),
        ("dasm", 5, 2),
        ("can_polling", 10, 1),
        ("sfm", 30, 12),
        ("lidar_grabber", 30, 9),
    ];
    let scaled = |c: Tick| ((c as f64 * scale).round() as Tick).max(1);
    let mut tasks: Vec<Task> = BASE
        .iter()
        .map(|&(id, t, c)| {
            let mut task = Task::periodic(id, t, scaled(c).min(t));
            task.eed_overhead = (task.wcet as f64 * 0.2).round() as Tick;
            task.compare_overhead = (task.wcet as f64 * 0.1).round() as Tick;
            task.constraints = vec![WeaklyHard::new(1, 10).expect("valid")];
            task
        })
        .collect();
    let plants = demo_plants();
    for (j, p) in plants.iter().enumerate() {
        let period = (p.sampling_period * 1e3).round() as Tick;
        let (k, nominal) = plant_profile(p, 10);
        let mut task = Task::periodic(format!("ctl_{}", p.id), period, scaled(period / 10).min(period));
        task.constraints = vec![WeaklyHard::new(k.unwrap_or(0), 10).expect("valid")];
        task.control = Some(ControlBinding {
            plant: j,
            weight: 1.0,
            desired_cost: f64::from(nominal.max(1)),
        });
        tasks.push(task);
    }
    let mut m = Model::new(Platform::with_cpus(cpus), tasks);
    m.plants = plants;
    m
}
