//! Error coverage: probability that a transient error is detected or
//! strikes idle time.

use crate::model::{Aggregation, CoverageParams, Detection, Model, SystemConfig, Tick};

/// Time shares of one CPU over a hyper-period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageInputs {
    pub t_eed: f64,
    pub t_eoc: f64,
    pub t_none: f64,
    pub t_idle: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CoverageInputs {
    pub fn hyperperiod(&self) -> f64 {
        self.t_eed + self.t_eoc + self.t_none + self.t_idle
    }

    /// Busy shares of `cpu` from the effective budgets over one hyper-period.
    /// Idle time is what remains, matching the error-free simulation whenever
    /// every job completes inside the hyper-period.
    pub fn from_config(model: &Model, cfg: &SystemConfig, cpu: usize) -> Self {
        let hyper = model.hyperperiod();
        let mut shares = [0 as Tick; 3];
        for r in cfg.resolve(model, cpu) {
            let slot = match r.detection {
                Detection::Eed => 0,
                Detection::Eoc => 1,
                Detection::None => 2,
            };
            shares[slot] += r.wcet * (hyper / r.period);
        }
        let busy: Tick = shares.iter().sum();
        CoverageInputs {
            t_eed: shares[0] as f64,
            t_eoc: shares[1] as f64,
            t_none: shares[2] as f64,
            t_idle: hyper.saturating_sub(busy) as f64,
            alpha: model.coverage.alpha,
            beta: model.coverage.beta,
        }
    }
}

pub fn detection_rate(detection: Detection, params: &CoverageParams) -> f64 {
    match detection {
        Detection::None => 0.0,
        Detection::Eed => params.alpha,
        Detection::Eoc => params.beta,
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * f64::from(n - j) / f64::from(j + 1))
}

/// Coverage for `errors` uniformly distributed errors, as the double sum
/// over how many land in detected execution and how those split between
/// EED and EOC.
pub fn coverage_general(inputs: &CoverageInputs, errors: u32) -> f64 {
    let total = inputs.hyperperiod();
    if total <= 0.0 {
        return 1.0;
    }
    let eed = inputs.alpha * inputs.t_eed / total;
    let eoc = inputs.beta * inputs.t_eoc / total;
    let idle = inputs.t_idle / total;
    let mut p = 0.0;
    for i in 0..=errors {
        for j in 0..=i {
            p += binomial(errors, i)
                * binomial(i, j)
                * eed.powi(j as i32)
                * eoc.powi((i - j) as i32)
                * idle.powi((errors - i) as i32);
        }
    }
    p
}

/// Unclamped single-error coverage `1 - Σ (1 - ε) C / t` of one CPU.
///
/// Demands are summed as integer ticks over the hyper-period so that the
/// undetected share is exact before the rates enter.
pub fn cpu_coverage(model: &Model, cfg: &SystemConfig, cpu: usize) -> f64 {
    let inputs = CoverageInputs::from_config(model, cfg, cpu);
    let hyper = model.hyperperiod() as f64;
    if hyper == 0.0 {
        return 1.0;
    }
    let exposed = |share: f64, rate: f64| if rate == 1.0 { 0.0 } else { (1.0 - rate) * share / hyper };
    (hyper - inputs.t_none) / hyper - exposed(inputs.t_eed, inputs.alpha) - exposed(inputs.t_eoc, inputs.beta)
}

/// Platform single-error coverage, clamped to `[0, 1]`.
pub fn coverage_single_error(model: &Model, cfg: &SystemConfig) -> f64 {
    let cpus = model.platform.len();
    if cpus == 0 {
        return 1.0;
    }
    let p = match model.coverage.aggregation {
        Aggregation::Average => {
            (0..cpus).map(|c| cpu_coverage(model, cfg, c)).sum::<f64>() / cpus as f64
        }
        Aggregation::GlobalSum => {
            1.0 - (0..cpus).map(|c| 1.0 - cpu_coverage(model, cfg, c)).sum::<f64>()
        }
    };
    p.clamp(0.0, 1.0)
}
