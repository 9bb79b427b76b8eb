//! LTI control loops under logical-execution-time (LET) semantics with
//! deadline misses.
//!
//! A control job reads the state at its release and, if it meets its
//! deadline, its output takes effect at the LET deadline `D`. A missed job's
//! output is discarded and the actuator keeps holding the last applied
//! input for the whole period.

mod cost;

pub use cost::{
    admissible_patterns, approx_worst_cost, control_cost, is_stable, spectral_radius,
    synthesize_wh, ControlCost, ENUMERATION_LIMIT, STABILITY_MARGIN,
};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::model::ModelError;

pub type Matrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("discretized plant '{0}' has non-finite entries")]
    IllConditioned(String),
    #[error("staleness {psi} outside 1..={max}")]
    Staleness { psi: usize, max: usize },
    #[error("pattern window {0} exceeds the enumeration limit {ENUMERATION_LIMIT}")]
    WindowTooLarge(u32),
    #[error("empty miss pattern")]
    EmptyPattern,
}

/// Continuous-time plant `ẋ = Ax + Bu`, `y = Cx` with its controller.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    pub id: String,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    /// Sampling period `h` in seconds.
    pub sampling_period: f64,
    /// LET deadline `D` in seconds, `0 <= D <= h`.
    pub let_deadline: f64,
    /// Feedback gain on `[x[k]; u[k-1]]`, `m × (n + m)`.
    pub gain: Matrix,
    /// Residual-disturbance ratio `J_th` a rejected disturbance must reach.
    pub cost_threshold: f64,
    /// Longest horizon, in sampling periods, the cost search examines.
    pub horizon_cap: u32,
}

impl LtiPlant {
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidPlant {
            plant: self.id.clone(),
            reason,
        };
        let (n, m) = (self.states(), self.inputs());
        if n == 0 || !self.a.is_square() {
            return Err(bad(format!("A must be square and non-empty, got {}x{}", self.a.nrows(), self.a.ncols())));
        }
        if self.b.nrows() != n {
            return Err(bad(format!("B has {} rows, expected {n}", self.b.nrows())));
        }
        if self.c.ncols() != n {
            return Err(bad(format!("C has {} columns, expected {n}", self.c.ncols())));
        }
        if self.gain.nrows() != m || self.gain.ncols() != n + m {
            return Err(bad(format!(
                "K is {}x{}, expected {m}x{}",
                self.gain.nrows(),
                self.gain.ncols(),
                n + m
            )));
        }
        let finite = |x: &Matrix| x.iter().all(|v| v.is_finite());
        if !(finite(&self.a) && finite(&self.b) && finite(&self.c) && finite(&self.gain)) {
            return Err(bad("matrix entries must be finite".into()));
        }
        if !(self.sampling_period > 0.0) || !self.sampling_period.is_finite() {
            return Err(bad("sampling period must be positive".into()));
        }
        if !(0.0..=self.sampling_period).contains(&self.let_deadline) {
            return Err(bad(format!(
                "LET deadline {} outside [0, {}]",
                self.let_deadline, self.sampling_period
            )));
        }
        if !(self.cost_threshold > 0.0 && self.cost_threshold <= 1.0) {
            return Err(bad(format!("J_th {} outside (0, 1]", self.cost_threshold)));
        }
        if self.horizon_cap == 0 {
            return Err(bad("horizon cap must be positive".into()));
        }
        Ok(())
    }
}

/// Sampled plant `x[k+1] = A_d x[k] + B_d0 u[k] + B_d1 u[k-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlant {
    pub a_d: Matrix,
    pub b_d0: Matrix,
    pub b_d1: Matrix,
    pub gain: Matrix,
    pub cost_threshold: f64,
    pub horizon_cap: u32,
    /// Number of input-history slots carried in the augmented state.
    pub psi_max: usize,
}

impl DiscretePlant {
    pub fn states(&self) -> usize {
        self.a_d.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b_d0.ncols()
    }

    /// Dimension of the augmented state `[x; u-history]`.
    pub fn augmented_dim(&self) -> usize {
        self.states() + self.inputs() * self.psi_max
    }

    pub fn with_psi_max(mut self, psi_max: usize) -> Self {
        self.psi_max = psi_max.max(1);
        self
    }
}

/// Integral of `e^{As} B` over `[0, t]` together with `e^{At}`, read off the
/// exponential of the block matrix `[[A, B], [0, 0]] t`.
fn zoh_blocks(a: &Matrix, b: &Matrix, t: f64) -> (Matrix, Matrix) {
    let (n, m) = (a.nrows(), b.ncols());
    let mut block = Matrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * t));
    block.view_mut((0, n), (n, m)).copy_from(&(b * t));
    let e = block.exp();
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, m)).into_owned(),
    )
}

/// Zero-order-hold discretization with the LET delay `D`:
/// `A_d = e^{Ah}`, `B_d0 = ∫_0^{h-D} e^{As}B ds`, `B_d1 = ∫_{h-D}^{h} e^{As}B ds`.
pub fn discretize(plant: &LtiPlant, psi_max: usize) -> Result<DiscretePlant, ControlError> {
    let h = plant.sampling_period;
    let (a_d, gamma_h) = zoh_blocks(&plant.a, &plant.b, h);
    let (_, gamma_early) = zoh_blocks(&plant.a, &plant.b, h - plant.let_deadline);
    let b_d1 = &gamma_h - &gamma_early;
    let dp = DiscretePlant {
        a_d,
        b_d0: gamma_early,
        b_d1,
        gain: plant.gain.clone(),
        cost_threshold: plant.cost_threshold,
        horizon_cap: plant.horizon_cap,
        psi_max: psi_max.max(1),
    };
    let finite = |x: &Matrix| x.iter().all(|v| v.is_finite());
    if !(finite(&dp.a_d) && finite(&dp.b_d0) && finite(&dp.b_d1)) {
        return Err(ControlError::IllConditioned(plant.id.clone()));
    }
    Ok(dp)
}

/// One sampling period of the closed loop on the augmented state
/// `ξ = [x; s_1; …; s_P]`, where `s_1` is the input most recently pushed
/// into the history and `P = psi_max`.
///
/// A hit computes `u = -K [x; s_1]`, applies `s_psi` before the LET
/// deadline and `u` after it, and pushes `u`. A miss applies `s_psi` for
/// the whole period and pushes it again, so the held input stays at the
/// head of the history.
pub fn step_matrix(dp: &DiscretePlant, hit: bool, psi: usize) -> Result<Matrix, ControlError> {
    let p = dp.psi_max;
    if psi == 0 || psi > p {
        return Err(ControlError::Staleness { psi, max: p });
    }
    let (n, m) = (dp.states(), dp.inputs());
    let dim = n + m * p;
    let slot = |j: usize| n + (j - 1) * m;
    let mut phi = Matrix::zeros(dim, dim);
    phi.view_mut((0, 0), (n, n)).copy_from(&dp.a_d);
    if hit {
        let kx = dp.gain.view((0, 0), (m, n));
        let ku = dp.gain.view((0, n), (m, m));
        // x' = (A_d - B_d0 Kx) x - B_d0 Ku s_1 + B_d1 s_psi
        let bkx = &dp.b_d0 * kx;
        let bku = &dp.b_d0 * ku;
        let mut xx = phi.view_mut((0, 0), (n, n));
        xx -= &bkx;
        let mut xs1 = phi.view_mut((0, slot(1)), (n, m));
        xs1 -= &bku;
        let mut xsp = phi.view_mut((0, slot(psi)), (n, m));
        xsp += &dp.b_d1;
        // s_1' = -Kx x - Ku s_1
        phi.view_mut((slot(1), 0), (m, n)).copy_from(&(-kx));
        phi.view_mut((slot(1), slot(1)), (m, m)).copy_from(&(-ku));
    } else {
        let held = &dp.b_d0 + &dp.b_d1;
        let mut xsp = phi.view_mut((0, slot(psi)), (n, m));
        xsp += &held;
        phi.view_mut((slot(1), slot(psi)), (m, m))
            .copy_from(&Matrix::identity(m, m));
    }
    for j in 2..=p {
        phi.view_mut((slot(j), slot(j - 1)), (m, m))
            .copy_from(&Matrix::identity(m, m));
    }
    Ok(phi)
}

/// Staleness of every job of a cyclic pattern: one plus the number of
/// consecutive misses immediately before it, capped at `psi_max`.
pub fn staleness(pattern: &[bool], psi_max: usize) -> Vec<usize> {
    let len = pattern.len();
    (0..len)
        .map(|j| {
            let run = (1..=len)
                .take_while(|&back| pattern[(j + len - back) % len])
                .count();
            (1 + run).min(psi_max.max(1))
        })
        .collect()
}

/// Step matrices for every job of a cyclic pattern.
pub(crate) fn pattern_steps(dp: &DiscretePlant, pattern: &[bool]) -> Vec<Matrix> {
    let psi = staleness(pattern, dp.psi_max);
    pattern
        .iter()
        .zip(psi)
        .map(|(&miss, psi)| step_matrix(dp, !miss, psi).expect("staleness within range"))
        .collect()
}

/// Product of the step matrices of one full pattern length starting at
/// job `start`: `Φ_k = φ[k+L-1] ⋯ φ[k]`.
pub fn pattern_transition(dp: &DiscretePlant, pattern: &[bool], start: usize) -> Result<Matrix, ControlError> {
    if pattern.is_empty() {
        return Err(ControlError::EmptyPattern);
    }
    let steps = pattern_steps(dp, pattern);
    Ok(cycle_product(&steps, start))
}

pub(crate) fn cycle_product(steps: &[Matrix], start: usize) -> Matrix {
    let len = steps.len();
    let dim = steps[0].nrows();
    (0..len).fold(Matrix::identity(dim, dim), |acc, r| &steps[(start + r) % len] * acc)
}
