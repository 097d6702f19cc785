//! Observables computed from a solution snapshot.

use serde::Serialize;

use crate::isotherm::LangmuirParams;
use crate::spatial::Grid;
use crate::state::{Field, StateField};

/// Default threshold above which a profile counts as oscillatory.
pub const OSCILLATION_THRESHOLD: f64 = 0.03;

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Discrete total mass `Σ_j w_{i,j} Δz` per component.
pub fn total_mass(w: &Field, grid: &Grid) -> Vec<f64> {
    (0..w.n_components())
        .map(|i| compensated_sum((0..w.n_cells()).map(|k| w.get(i, k))) * grid.dz())
        .collect()
}

/// Oscillation measure of one profile against the admissible range `[0, bound]`.
///
/// The sum of the overshoot outside the range and half the total variation
/// in excess of the unimodal envelope (rise from the first value to the
/// maximum, fall from the maximum to the last value), divided by `bound`.
/// A spurious dip of depth δ adds 2δ to the variation, so it scores δ, the
/// same as an overshoot of δ. A profile that rises monotonically and then
/// falls monotonically inside the range scores exactly 0.
pub fn profile_oscillation(profile: &[f64], bound: f64) -> f64 {
    if profile.is_empty() {
        return 0.0;
    }
    let (lo, hi) = profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let overshoot = (-lo).max(hi - bound).max(0.0);
    let tv = compensated_sum(profile.windows(2).map(|p| (p[1] - p[0]).abs()));
    let envelope = (hi - profile[0]) + (hi - profile[profile.len() - 1]);
    let excess = 0.5 * (tv - envelope).max(0.0);
    let scale = if bound > 0.0 { bound } else { 1.0 };
    (overshoot + excess) / scale
}

/// Maximum of [`profile_oscillation`] over components, `bounds[i]` being the
/// largest concentration of component `i` that can legitimately occur.
pub fn oscillation_index(c: &Field, bounds: &[f64]) -> f64 {
    assert_eq!(bounds.len(), c.n_components());
    (0..c.n_components())
        .map(|i| profile_oscillation(&c.component(i), bounds[i]))
        .fold(0.0, f64::max)
}

/// Location of the steepest jump of component `i`: the interface
/// `z = kΔz` between 0-based cells `k−1` and `k` maximising
/// `|c_k − c_{k−1}|`. Ties go to the larger `z`. `None` for a flat profile.
pub fn front_position(c: &Field, component: usize, grid: &Grid) -> Option<f64> {
    let mut best = 0.0;
    let mut at = None;
    for k in 1..c.n_cells() {
        let jump = (c.get(component, k) - c.get(component, k - 1)).abs();
        if jump > 0.0 && jump >= best {
            best = jump;
            at = Some(k);
        }
    }
    at.map(|k| grid.interface(k))
}

/// Slope `a_d / (1 + b_d c_d)` of the displacer's operating line.
pub fn operating_line_slope(iso: &LangmuirParams, displacer: usize, c_d: f64) -> f64 {
    iso.a()[displacer] / (1.0 + iso.b()[displacer] * c_d)
}

/// Per component, whether its single-component isotherm crosses the
/// displacer's operating line at a positive concentration (`a_i > s`,
/// strictly). Such components are expected to form a rectangular plateau
/// in the displacement train. The displacer itself is never flagged.
pub fn operating_line_check(iso: &LangmuirParams, displacer: usize, c_d: f64) -> Vec<bool> {
    let s = operating_line_slope(iso, displacer, c_d);
    iso.a()
        .iter()
        .enumerate()
        .map(|(i, &a)| i != displacer && a > s)
        .collect()
}

/// `Σ |x − y| · weight`, the discrete L1 distance used for refinement studies.
pub fn l1_distance(x: &[f64], y: &[f64], weight: f64) -> f64 {
    assert_eq!(x.len(), y.len());
    compensated_sum(x.iter().zip(y).map(|(a, b)| (a - b).abs())) * weight
}

/// Observed order `log2(‖u_h − u_{h/2}‖ / ‖u_{h/2} − u_{h/4}‖)` from the
/// two successive differences of a nested refinement. `None` if either
/// difference vanishes.
pub fn self_convergence_order(diff_coarse: f64, diff_fine: f64) -> Option<f64> {
    if !(diff_coarse > 0.0 && diff_fine > 0.0) || !diff_coarse.is_finite() {
        return None;
    }
    Some((diff_coarse / diff_fine).log2())
}

/// Restricts a fine-grid profile to a grid `factor` times coarser by cell
/// averaging.
pub fn restrict(fine: &[f64], factor: usize) -> Vec<f64> {
    assert!(factor >= 1 && fine.len() % factor == 0);
    fine.chunks_exact(factor)
        .map(|ch| ch.iter().sum::<f64>() / factor as f64)
        .collect()
}

/// Observables recorded with each snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub total_mass: Vec<f64>,
    pub oscillation_index: f64,
    /// Steepest front over all components.
    pub front_position: Option<f64>,
    pub min_concentration: Vec<f64>,
    pub max_concentration: Vec<f64>,
}

impl DiagnosticsRecord {
    pub fn compute(time: f64, state: &StateField, grid: &Grid, bounds: &[f64]) -> Self {
        let c = state.c();
        let n = c.n_components();
        let mut min_c = vec![f64::INFINITY; n];
        let mut max_c = vec![f64::NEG_INFINITY; n];
        for cell in c.cells() {
            for i in 0..n {
                min_c[i] = min_c[i].min(cell[i]);
                max_c[i] = max_c[i].max(cell[i]);
            }
        }
        let mut front: Option<(f64, f64)> = None;
        for i in 0..n {
            for k in 1..c.n_cells() {
                let jump = (c.get(i, k) - c.get(i, k - 1)).abs();
                if jump > 0.0 && front.is_none_or(|(best, _)| jump >= best) {
                    front = Some((jump, grid.interface(k)));
                }
            }
        }
        DiagnosticsRecord {
            time,
            total_mass: total_mass(state.w(), grid),
            oscillation_index: oscillation_index(c, bounds),
            front_position: front.map(|(_, z)| z),
            min_concentration: min_c,
            max_concentration: max_c,
        }
    }
}
