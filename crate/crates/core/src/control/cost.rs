use nalgebra::Schur;

use super::{cycle_product, pattern_steps, ControlError, DiscretePlant, Matrix};
use crate::model::WeaklyHard;

/// Spectral radius must stay this far below one to count as stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Longest pattern window that may be enumerated exhaustively.
pub const ENUMERATION_LIMIT: u32 = 24;

const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_MAX_ITER: usize = 10_000;

/// Sampling periods needed to reject a disturbance, or instability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlCost {
    Steps(u32),
    Unstable,
}

impl ControlCost {
    pub fn steps(self) -> Option<u32> {
        match self {
            ControlCost::Steps(s) => Some(s),
            ControlCost::Unstable => None,
        }
    }

    pub fn is_unstable(self) -> bool {
        self == ControlCost::Unstable
    }
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &Matrix) -> f64 {
    match Schur::try_new(m.clone(), EIGEN_TOLERANCE, EIGEN_MAX_ITER) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
        None => gelfand_radius(m),
    }
}

// Fallback when QR iteration does not converge: ‖M^(2^k)‖^(1/2^k).
fn gelfand_radius(m: &Matrix) -> f64 {
    let mut p = m.clone();
    let mut log_scale = 0.0f64;
    let mut exponent = 1.0f64;
    for _ in 0..40 {
        let norm = p.norm();
        if norm == 0.0 {
            return 0.0;
        }
        log_scale += norm.ln() / exponent;
        p /= norm;
        p = &p * &p;
        exponent *= 2.0;
    }
    let residual = p.norm();
    if residual == 0.0 {
        0.0
    } else {
        (log_scale + residual.ln() / exponent).exp()
    }
}

/// True iff every rotation of the cyclic pattern yields a pattern transition
/// with spectral radius below `1 - STABILITY_MARGIN`.
pub fn is_stable(dp: &DiscretePlant, pattern: &[bool]) -> bool {
    if pattern.is_empty() {
        return false;
    }
    let steps = pattern_steps(dp, pattern);
    stable_steps(&steps)
}

fn stable_steps(steps: &[Matrix]) -> bool {
    (0..steps.len()).all(|k| spectral_radius(&cycle_product(steps, k)) < 1.0 - STABILITY_MARGIN)
}

/// Induced 2-norm with cheap Frobenius and column-norm screens against `bound`.
fn exceeds(block: &Matrix, bound: f64) -> bool {
    if block.ncols() == 1 || block.nrows() == 1 {
        return block.norm() > bound;
    }
    if block.norm() <= bound {
        return false;
    }
    if block.column_iter().any(|c| c.norm() > bound) {
        return true;
    }
    block.singular_values().max() > bound
}

/// Worst-case number of sampling periods after which the state-norm ratio
/// stays at or below `J_th`, over every disturbance instant of the cyclic
/// pattern. `Unstable` when the loop is not asymptotically stable or some
/// instant needs more than the horizon cap.
pub fn control_cost(dp: &DiscretePlant, pattern: &[bool]) -> ControlCost {
    if pattern.is_empty() {
        return ControlCost::Unstable;
    }
    let steps = pattern_steps(dp, pattern);
    if !stable_steps(&steps) {
        return ControlCost::Unstable;
    }
    cost_of_steps(dp, &steps)
}

fn cost_of_steps(dp: &DiscretePlant, steps: &[Matrix]) -> ControlCost {
    let n = dp.states();
    let dim = dp.augmented_dim();
    let cap = dp.horizon_cap;
    let len = steps.len();
    let mut worst = 0u32;
    for start in 0..len {
        // Φ_{k+r,k} Î, i.e. the columns of the transition acting on x[k].
        let mut cols = Matrix::identity(dim, n);
        let mut last_above: Option<u32> = None;
        for r in 0..=cap {
            if exceeds(&cols.rows(0, n).into_owned(), dp.cost_threshold) {
                last_above = Some(r);
            }
            if r < cap {
                cols = &steps[(start + r as usize) % len] * cols;
            }
        }
        let h_k = last_above.map_or(0, |r| r + 1);
        if h_k > cap {
            return ControlCost::Unstable;
        }
        worst = worst.max(h_k);
    }
    ControlCost::Steps(worst)
}

/// Miss masks of length `window` with at most `max_misses` set bits, in
/// order of increasing miss count.
pub fn admissible_patterns(max_misses: u32, window: u32) -> impl Iterator<Item = u32> {
    assert!(window <= ENUMERATION_LIMIT);
    let max_misses = max_misses.min(window);
    (0..=max_misses).flat_map(move |j| masks_with_popcount(j, window))
}

fn masks_with_popcount(ones: u32, width: u32) -> impl Iterator<Item = u32> {
    let limit = 1u64 << width;
    let first = if ones == 0 { 0u64 } else { (1u64 << ones) - 1 };
    let mut next = Some(first);
    std::iter::from_fn(move || {
        let cur = next?;
        if cur >= limit {
            return None;
        }
        next = if cur == 0 {
            None
        } else {
            // Gosper's hack: next larger integer with the same popcount.
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur as u32)
    })
}

fn mask_to_pattern(mask: u32, window: u32) -> Vec<bool> {
    (0..window).map(|i| mask >> i & 1 == 1).collect()
}

/// True iff `mask` is the smallest of its cyclic rotations.
fn is_canonical(mask: u32, window: u32) -> bool {
    let full = if window == 32 { u32::MAX } else { (1u32 << window) - 1 };
    let mut rot = mask;
    for _ in 1..window {
        rot = ((rot >> 1) | (rot << (window - 1))) & full;
        if rot < mask {
            return false;
        }
    }
    true
}

/// Worst control cost over every cyclic pattern of length `N` with at most
/// `k` misses. Rotations are skipped since the cost is rotation invariant.
pub fn approx_worst_cost(dp: &DiscretePlant, constraint: WeaklyHard) -> Result<ControlCost, ControlError> {
    let window = constraint.window;
    if window > ENUMERATION_LIMIT {
        return Err(ControlError::WindowTooLarge(window));
    }
    let mut worst = ControlCost::Steps(0);
    for mask in admissible_patterns(constraint.misses, window) {
        if !is_canonical(mask, window) {
            continue;
        }
        let cost = control_cost(dp, &mask_to_pattern(mask, window));
        if cost.is_unstable() {
            return Ok(ControlCost::Unstable);
        }
        worst = worst.max(cost);
    }
    Ok(worst)
}

/// Largest `k` such that every cyclic pattern of length `window` with at
/// most `k` misses is stable; `None` if even the all-hit pattern is not.
pub fn synthesize_wh(dp: &DiscretePlant, window: u32) -> Result<Option<u32>, ControlError> {
    if window > ENUMERATION_LIMIT {
        return Err(ControlError::WindowTooLarge(window));
    }
    for misses in 0..=window {
        let unstable = masks_with_popcount(misses, window)
            .filter(|&m| is_canonical(m, window))
            .any(|m| !is_stable(dp, &mask_to_pattern(m, window)));
        if unstable {
            return Ok(misses.checked_sub(1));
        }
    }
    Ok(Some(window))
}
