use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use weakhard::experiment::{self, sweep_params, CoverageCell, SweepSpec};
use weakhard::explore::{sa_optimize, Backend, Evaluator, Goal, SaParams};
use weakhard::io::{config_entries, emit_model, parse_model, ConfigEntry, Loaded};
use weakhard::model::Tick;
use weakhard::simkit::{self, enumerate_scenarios, ErrorScenario};
use weakhard::synth::{self, SynthParams};
use weakhard::twca;

#[derive(Parser)]
#[command(name = "weakhard", version, about = "Fault-tolerance and deployment exploration for weakly-hard control systems")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Twca,
    Sim,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Twca => Backend::Twca,
            BackendArg::Sim => Backend::Simulate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    Cost,
    Coverage,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    /// Minimize control cost per (utilization, threshold, seed).
    Cost,
    /// Maximum coverage, hard versus weakly-hard, per (utilization, seed).
    Coverage,
    /// Maximum coverage of the ADAS-style fixture per (scale, CPU count).
    Waters,
}

#[derive(Subcommand)]
enum Command {
    /// Typical worst-case analysis of a model file.
    Analyze {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive single-error simulation; one CSV row per job and scenario.
    Simulate {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the scheduler event trace of every scenario to this CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Simulated annealing over allocation, priorities and detection.
    Optimize {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "sim")]
        backend: BackendArg,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "cost")]
        goal: GoalArg,
        /// Use the reduced sweep schedule.
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-temperature progress log (default: standard error).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also write the model with the chosen configuration embedded.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Synthetic experiment grid written as CSV.
    Sweep {
        #[arg(long, value_enum, default_value = "cost")]
        mode: SweepMode,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
        utilizations: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.4])]
        thresholds: Vec<f64>,
        /// Seed list or inclusive range such as `1..20`.
        #[arg(long, default_value = "1..5", value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.4, 0.5, 0.6, 0.7])]
        scales: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 4, 5])]
        cpus: Vec<usize>,
        #[arg(long, value_enum, default_value = "sim")]
        backend: BackendArg,
        /// Record wall-clock time per cell (makes output run-dependent).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic or bundled model file.
    Generate {
        #[arg(long, default_value_t = 0.7)]
        utilization: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        n_control: usize,
        #[arg(long, default_value_t = 4)]
        n_other: usize,
        #[arg(long, default_value_t = 1)]
        cpus: usize,
        /// Emit the four-task example instead.
        #[arg(long, conflicts_with = "waters")]
        table1: bool,
        /// Emit the ADAS-style fixture with execution times scaled by `--scale`.
        #[arg(long)]
        waters: bool,
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("seed '{x}': {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Seeds)
}

enum Failure {
    Infeasible,
    Input(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(File::create(p).map_err(|e| format!("{}: {e}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load(path: &Path) -> Result<Loaded, Failure> {
    Ok(parse_model(path)?)
}

#[derive(Serialize)]
struct JobRow {
    cpu: String,
    scenario: String,
    task: String,
    instance: u64,
    release: Tick,
    completion: Tick,
    deadline: Tick,
    miss: bool,
}

fn scenario_label(model: &weakhard::model::Model, s: ErrorScenario) -> String {
    match s {
        ErrorScenario::None => "none".into(),
        ErrorScenario::Strike { task, instance } => format!("{}#{instance}", model.tasks[task].id),
    }
}

fn simulate(path: &Path, out: &Option<PathBuf>, trace: &Option<PathBuf>) -> Result<(), Failure> {
    let loaded = load(path)?;
    let (model, cfg) = (&loaded.model, loaded.config_or_default());
    let runs: Vec<(usize, ErrorScenario)> = (0..model.platform.len())
        .flat_map(|cpu| enumerate_scenarios(model, &cfg, cpu).into_iter().map(move |s| (cpu, s)))
        .collect();
    let outcomes: Vec<_> = runs
        .par_iter()
        .map(|&(cpu, s)| {
            if trace.is_some() {
                simkit::simulate_traced(model, &cfg, cpu, s)
            } else {
                simkit::simulate_scenario(model, &cfg, cpu, s)
            }
        })
        .collect();
    let mut rows = Vec::new();
    for o in &outcomes {
        for (pos, &task) in o.tasks.iter().enumerate() {
            let t = &model.tasks[task];
            for (j, &done) in o.completions[pos].iter().enumerate() {
                let release = j as Tick * t.period;
                rows.push(JobRow {
                    cpu: model.platform.cpus[o.cpu].clone(),
                    scenario: scenario_label(model, o.scenario),
                    task: t.id.clone(),
                    instance: j as u64,
                    release,
                    completion: done,
                    deadline: release + t.deadline,
                    miss: o.patterns[pos].misses[j],
                });
            }
        }
    }
    experiment::write_csv(&rows, sink(out)?)?;
    if let Some(p) = trace {
        let events: Vec<_> = outcomes.iter().flat_map(|o| o.trace.iter().cloned()).collect();
        simkit::write_trace(&events, File::create(p).map_err(|e| format!("{}: {e}", p.display()))?)?;
    }
    let verdict = simkit::exhaustive_verdict(model, &cfg);
    let names: Vec<&str> = verdict.violations.iter().map(|&i| model.tasks[i].id.as_str()).collect();
    eprintln!(
        "schedulable: {} ({} scenarios{})",
        verdict.schedulable,
        verdict.scenarios,
        if names.is_empty() { String::new() } else { format!(", violations: {}", names.join(" ")) }
    );
    if verdict.schedulable {
        Ok(())
    } else {
        Err(Failure::Infeasible)
    }
}

#[derive(Serialize)]
struct OptimizeReport {
    feasible: bool,
    backend: Backend,
    threshold: f64,
    seed: u64,
    objective: weakhard::explore::Objective,
    evaluations: u64,
    config: Vec<ConfigEntry>,
}

#[allow(clippy::too_many_arguments)]
fn optimize(
    path: &Path,
    backend: Backend,
    threshold: f64,
    seed: u64,
    goal: GoalArg,
    quick: bool,
    out: &Option<PathBuf>,
    log: &Option<PathBuf>,
    model_out: &Option<PathBuf>,
) -> Result<(), Failure> {
    let loaded = load(path)?;
    let model = &loaded.model;
    let params = if quick { sweep_params(seed) } else { SaParams { seed, ..SaParams::default() } };
    let goal = match goal {
        GoalArg::Cost => Goal::ControlCost,
        GoalArg::Coverage => Goal::Coverage,
    };
    let mut ev = Evaluator::new(model, backend, threshold).with_goal(goal);
    let result = sa_optimize(&mut ev, &params);
    let mut progress: Box<dyn Write> = match log {
        Some(p) => Box::new(File::create(p).map_err(|e| format!("{}: {e}", p.display()))?),
        None => Box::new(io::stderr().lock()),
    };
    for step in &result.history {
        writeln!(
            progress,
            "T={:.4} current={:.4} best={} feasible={}",
            step.temperature,
            step.current,
            step.best.map_or("-".into(), |b| format!("{b:.4}")),
            step.current_feasible
        )?;
    }
    let report = OptimizeReport {
        feasible: result.feasible,
        backend,
        threshold,
        seed,
        objective: result.objective,
        evaluations: result.evaluations,
        config: config_entries(model, &result.config),
    };
    write_json(&report, out)?;
    if let Some(p) = model_out {
        sink(&Some(p.clone()))?.write_all(emit_model(model, Some(&result.config)).as_bytes())?;
    }
    if result.feasible {
        Ok(())
    } else {
        Err(Failure::Infeasible)
    }
}

#[derive(Serialize)]
struct WatersRow {
    schema: u32,
    scale: f64,
    cpus: usize,
    coverage: f64,
    feasible: bool,
}

fn sweep(
    mode: SweepMode,
    spec: SweepSpec,
    scales: &[f64],
    cpus: &[usize],
    out: &Option<PathBuf>,
) -> Result<(), Failure> {
    match mode {
        SweepMode::Cost => experiment::write_csv(&experiment::sweep(&spec), sink(out)?)?,
        SweepMode::Coverage => {
            let cells: Vec<(f64, u64)> = spec
                .utilizations
                .iter()
                .flat_map(|&u| spec.seeds.iter().map(move |&s| (u, s)))
                .collect();
            let rows: Vec<CoverageCell> = cells
                .par_iter()
                .map(|&(u, seed)| {
                    let synth = SynthParams {
                        utilization: u,
                        seed,
                        ..spec.synth.clone()
                    };
                    experiment::coverage_cell(&synth, spec.backend, &SaParams { seed, ..spec.params })
                })
                .collect();
            experiment::write_csv(&rows, sink(out)?)?;
        }
        SweepMode::Waters => {
            let cells: Vec<(f64, usize)> = cpus
                .iter()
                .flat_map(|&c| scales.iter().map(move |&s| (s, c)))
                .collect();
            let seed = spec.seeds.first().copied().unwrap_or(0);
            let rows: Vec<WatersRow> = cells
                .par_iter()
                .map(|&(scale, n)| {
                    let model = synth::waters_like(scale, n);
                    let o = experiment::maximize_coverage(&model, spec.backend, &SaParams { seed, ..spec.params }, None);
                    WatersRow {
                        schema: experiment::CSV_SCHEMA,
                        scale,
                        cpus: n,
                        coverage: if o.feasible { o.objective.coverage } else { 0.0 },
                        feasible: o.feasible,
                    }
                })
                .collect();
            experiment::write_csv(&rows, sink(out)?)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Analyze { model, out } => {
            let loaded = load(&model)?;
            let report = twca::analyze(&loaded.model, &loaded.config_or_default());
            write_json(&report, &out)?;
            if report.schedulable {
                Ok(())
            } else {
                Err(Failure::Infeasible)
            }
        }
        Command::Simulate { model, out, trace } => simulate(&model, &out, &trace),
        Command::Optimize {
            model,
            backend,
            threshold,
            seed,
            goal,
            quick,
            out,
            log,
            model_out,
        } => optimize(&model, backend.into(), threshold, seed, goal, quick, &out, &log, &model_out),
        Command::Sweep {
            mode,
            utilizations,
            thresholds,
            seeds,
            scales,
            cpus,
            backend,
            timing,
            out,
        } => {
            let spec = SweepSpec {
                utilizations,
                thresholds,
                seeds: seeds.0,
                backend: backend.into(),
                synth: SynthParams::default(),
                params: sweep_params(0),
                timing,
            };
            sweep(mode, spec, &scales, &cpus, &out)
        }
        Command::Generate {
            utilization,
            seed,
            n_control,
            n_other,
            cpus,
            table1,
            waters,
            scale,
            out,
        } => {
            let model = if table1 {
                synth::table1()
            } else if waters {
                synth::waters_like(scale, cpus)
            } else {
                if !(utilization > 0.0 && utilization <= 1.0 * cpus as f64) {
                    return Err(Failure::Input(format!("utilization {utilization} outside (0, {cpus}]")));
                }
                synth::generate_synthetic(&SynthParams {
                    n_control,
                    n_other,
                    utilization,
                    cpus,
                    seed,
                    ..SynthParams::default()
                })
            };
            sink(&out)?.write_all(emit_model(&model, None).as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Infeasible) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
