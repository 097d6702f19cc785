//! Multi-component Langmuir isotherm and the map between physical
//! concentrations `c` and conserved variables `w`.
//!
//! # Model
//!
//! ```text
//! q_i(c) = a_i c_i / p(c),          p(c) = 1 + Σ_j b_j c_j
//! W_i(c) = c_i (1 + η_i / p(c)),    η_i  = (1 − ε)/ε · a_i
//! ```
//!
//! `W` is a bijection of the non-negative orthant. Its inverse has no closed
//! form for N > 1, but it reduces to a scalar root:
//!
//! ```text
//! R_w(y) = 1 − y + Σ_i y b_i w_i / (y + η_i)
//! C_i(w) = w_i / (1 + η_i / ρ₀(w))
//! ```
//!
//! where `ρ₀(w)` is the unique positive root of `R_w`, always located in
//! `[1, 1 + bᵀw]`. At the root, `ρ₀(W(c)) = p(c)`.
//!
//! The Jacobian `W'(c) = D + τ bᵀ` is diagonal plus rank one, with
//! `d_i = 1 + η_i/p` and `τ_i = −η_i c_i / p²`. Its eigenvalues are the roots
//! of the secular function
//!
//! ```text
//! S_c(λ) = 1 + p⁻² Σ_i η_i b_i c_i / (λ − d_i)
//! ```
//!
//! and strictly interlace the poles: `1 < λ_1 < d_1 < λ_2 < … < λ_N < d_N`.
//! Characteristic speeds of the flux `u C(w)` are `u / λ_k`, all in `(0, u)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SquareMatrix;

/// Default relative tolerance for `ρ₀` and secular roots.
pub const DEFAULT_TOL: f64 = 1e-14;
/// Iteration cap for the safeguarded root finders.
pub const MAX_ROOT_ITER: usize = 100;
/// Smallest admissible Langmuir denominator `1 + bᵀc` for states with
/// negative entries (reconstruction undershoots).
pub const MIN_DENOMINATOR: f64 = 0.5;
/// Bracket width at which the secular bisection hands over to Newton.
pub const SECULAR_BRACKET_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IsothermError {
    #[error("invalid isotherm parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} components, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("component {component}: value {value:e} is negative or not finite")]
    Negative { component: usize, value: f64 },
    #[error("negative conserved values push 1 + bᵀw below {floor} (got {value})")]
    NegativeConserved { value: f64, floor: f64 },
    #[error("component {component}: conserved value is not finite")]
    NonFinite { component: usize },
    #[error("root finder stopped after {iterations} iterations with bracket [{lo}, {hi}]")]
    NotConverged { lo: f64, hi: f64, iterations: usize },
    #[error("rational function evaluated at its pole {0}")]
    Pole(f64),
    #[error("eigenstructure requires strictly positive concentrations; component {component} is {value:e}")]
    Degenerate { component: usize, value: f64 },
}

/// Langmuir isotherm coefficients for an N-component mixture.
///
/// Components must be ordered by affinity, `0 < a_1 < … < a_N`. The derived
/// `η_i = (1 − ε)/ε · a_i` is cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLangmuir", into = "RawLangmuir")]
pub struct LangmuirParams {
    a: Vec<f64>,
    b: Vec<f64>,
    epsilon: f64,
    eta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLangmuir {
    a: Vec<f64>,
    b: Vec<f64>,
    epsilon: f64,
}

impl TryFrom<RawLangmuir> for LangmuirParams {
    type Error = IsothermError;
    fn try_from(raw: RawLangmuir) -> Result<Self, Self::Error> {
        LangmuirParams::new(raw.a, raw.b, raw.epsilon)
    }
}

impl From<LangmuirParams> for RawLangmuir {
    fn from(p: LangmuirParams) -> Self {
        RawLangmuir {
            a: p.a,
            b: p.b,
            epsilon: p.epsilon,
        }
    }
}

impl LangmuirParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>, epsilon: f64) -> Result<Self, IsothermError> {
        if a.is_empty() {
            return Err(IsothermError::InvalidParams(
                "at least one component is required".into(),
            ));
        }
        if a.len() != b.len() {
            return Err(IsothermError::InvalidParams(format!(
                "a has {} entries but b has {}",
                a.len(),
                b.len()
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(IsothermError::InvalidParams(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        for (i, &ai) in a.iter().enumerate() {
            if !(ai > 0.0 && ai.is_finite()) {
                return Err(IsothermError::InvalidParams(format!(
                    "a[{i}] must be positive, got {ai}"
                )));
            }
            if i > 0 && ai <= a[i - 1] {
                return Err(IsothermError::InvalidParams(format!(
                    "a must be strictly increasing, but a[{}] = {} >= a[{i}] = {ai}",
                    i - 1,
                    a[i - 1]
                )));
            }
        }
        for (i, &bi) in b.iter().enumerate() {
            if !(bi > 0.0 && bi.is_finite()) {
                return Err(IsothermError::InvalidParams(format!(
                    "b[{i}] must be positive, got {bi}"
                )));
            }
        }
        let ratio = (1.0 - epsilon) / epsilon;
        let eta = a.iter().map(|&ai| ratio * ai).collect();
        Ok(LangmuirParams { a, b, epsilon, eta })
    }

    pub fn n_components(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `(1 − ε)/ε`, the solid-to-liquid phase ratio.
    pub fn phase_ratio(&self) -> f64 {
        (1.0 - self.epsilon) / self.epsilon
    }

    /// `p(c) = 1 + bᵀc`, the shared Langmuir denominator.
    pub fn denominator(&self, c: &[f64]) -> f64 {
        1.0 + dot(&self.b, c)
    }

    /// Adsorbed concentrations `q_i = a_i c_i / (1 + bᵀc)`.
    ///
    /// # Panics
    ///
    /// If the denominator is not positive.
    pub fn adsorbed(&self, c: &[f64]) -> Vec<f64> {
        self.check_len(c.len());
        let p = self.denominator(c);
        assert!(p > 0.0, "Langmuir denominator must be positive, got {p}");
        self.a.iter().zip(c).map(|(a, c)| a * c / p).collect()
    }

    /// Forward map `w = W(c)`, written into `w`.
    pub fn conserved_into(&self, c: &[f64], w: &mut [f64]) {
        let p = self.denominator(c);
        for ((wi, ci), eta) in w.iter_mut().zip(c).zip(&self.eta) {
            *wi = ci * (1.0 + eta / p);
        }
    }

    /// Forward map on validated vectors.
    pub fn conserved(&self, c: &ConcentrationVec) -> ConservedVec {
        self.check_len(c.len());
        let mut w = vec![0.0; c.len()];
        self.conserved_into(c.as_slice(), &mut w);
        ConservedVec(w)
    }

    /// `R_w(y) = 1 − y + Σ y b_i w_i / (y + η_i)`.
    pub fn residual(&self, y: f64, w: &[f64]) -> Result<f64, IsothermError> {
        self.check_dim(w.len())?;
        if self.eta.iter().any(|&e| y + e == 0.0) {
            return Err(IsothermError::Pole(y));
        }
        Ok(self.residual_and_slope(y, w).0)
    }

    fn residual_and_slope(&self, y: f64, w: &[f64]) -> (f64, f64) {
        let mut r = 1.0 - y;
        let mut dr = -1.0;
        for ((b, w), eta) in self.b.iter().zip(w).zip(&self.eta) {
            let bw = b * w;
            let s = y + eta;
            r += y * bw / s;
            dr += bw * eta / (s * s);
        }
        (r, dr)
    }

    /// The unique positive root `ρ₀(w)` of [`residual`](Self::residual).
    ///
    /// Safeguarded Newton inside `[1, 1 + bᵀw]`; a step that leaves the
    /// current bracket is replaced by bisection. `guess` warm-starts the
    /// iteration and is projected into the bracket first.
    pub fn rho0(&self, w: &[f64], tol: f64, guess: Option<f64>) -> Result<f64, IsothermError> {
        self.check_dim(w.len())?;
        for (i, &wi) in w.iter().enumerate() {
            if !(wi >= 0.0 && wi.is_finite()) {
                return Err(IsothermError::Negative {
                    component: i,
                    value: wi,
                });
            }
        }
        self.rho0_unchecked(w, tol, guess)
    }

    fn rho0_unchecked(&self, w: &[f64], tol: f64, guess: Option<f64>) -> Result<f64, IsothermError> {
        // R(lo) > 0 > R(hi) with lo, hi the denominators of the negative and
        // positive parts of w alone; for w ≥ 0 this is [1, 1 + bᵀw].
        let (mut lo, mut hi) = (1.0, 1.0);
        for (b, &wi) in self.b.iter().zip(w) {
            if wi < 0.0 {
                lo += b * wi;
            } else {
                hi += b * wi;
            }
        }
        if lo == hi {
            return Ok(1.0);
        }
        let target = tol * hi;
        // Started from the upper end, Newton on this concave residual
        // decreases monotonically onto the root.
        let mut y = guess.map_or(hi, |g| g.clamp(lo, hi));
        for _ in 0..MAX_ROOT_ITER {
            let (r, dr) = self.residual_and_slope(y, w);
            if r.abs() <= target {
                return Ok(y);
            }
            if r > 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(y);
            }
            let step = y - r / dr;
            y = if dr < 0.0 && step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(IsothermError::NotConverged {
            lo,
            hi,
            iterations: MAX_ROOT_ITER,
        })
    }

    /// Inverse map `c = C(w)`, written into `c`. Returns `ρ₀(w)` so callers
    /// can cache it as the next warm start.
    ///
    /// Small negative entries, as left behind by reconstruction undershoots,
    /// are inverted with the same formula and give small negative
    /// concentrations, so `W(C(w)) = w` still holds exactly. They are
    /// rejected once `1 + Σ_{w_i<0} b_i w_i` drops to [`MIN_DENOMINATOR`].
    pub fn concentrations_into(
        &self,
        w: &[f64],
        tol: f64,
        guess: Option<f64>,
        c: &mut [f64],
    ) -> Result<f64, IsothermError> {
        debug_assert_eq!(w.len(), self.n_components());
        let mut floor = 1.0;
        for (i, (&wi, b)) in w.iter().zip(&self.b).enumerate() {
            if !wi.is_finite() {
                return Err(IsothermError::NonFinite { component: i });
            }
            if wi < 0.0 {
                floor += b * wi;
            }
        }
        if floor <= MIN_DENOMINATOR {
            return Err(IsothermError::NegativeConserved {
                value: floor,
                floor: MIN_DENOMINATOR,
            });
        }
        let rho = self.rho0_unchecked(w, tol, guess)?;
        for ((ci, wi), eta) in c.iter_mut().zip(w).zip(&self.eta) {
            *ci = wi / (1.0 + eta / rho);
        }
        Ok(rho)
    }

    /// Inverse map on validated vectors.
    pub fn concentrations(
        &self,
        w: &ConservedVec,
        tol: f64,
    ) -> Result<ConcentrationVec, IsothermError> {
        self.check_dim(w.len())?;
        let mut c = vec![0.0; w.len()];
        self.concentrations_into(w.as_slice(), tol, None, &mut c)?;
        Ok(ConcentrationVec(c))
    }

    /// `W'(c)`: `J_ij = δ_ij (1 + η_i/p) − η_i b_j c_i / p²`.
    pub fn jacobian(&self, c: &[f64]) -> SquareMatrix {
        self.check_len(c.len());
        let n = self.n_components();
        let mut j = SquareMatrix::zeros(n);
        self.jacobian_into(c, j.as_mut_slice());
        j
    }

    /// Row-major `W'(c)` into an n×n slice.
    pub(crate) fn jacobian_into(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n_components();
        let p = self.denominator(c);
        let p2 = p * p;
        for i in 0..n {
            let scale = self.eta[i] * c[i] / p2;
            for j in 0..n {
                out[i * n + j] = -scale * self.b[j];
            }
            out[i * n + i] += 1.0 + self.eta[i] / p;
        }
    }

    /// Poles `d_i = 1 + η_i / p(c)` of the secular function.
    pub fn secular_poles(&self, c: &[f64]) -> Vec<f64> {
        let p = self.denominator(c);
        self.eta.iter().map(|e| 1.0 + e / p).collect()
    }

    /// `S_c(λ) = 1 + p⁻² Σ η_i b_i c_i / (λ − d_i)`.
    pub fn secular(&self, lambda: f64, c: &[f64]) -> Result<f64, IsothermError> {
        self.check_dim(c.len())?;
        let poles = self.secular_poles(c);
        if poles.iter().any(|&d| lambda == d) {
            return Err(IsothermError::Pole(lambda));
        }
        let weights = self.secular_weights(c);
        Ok(secular_value(lambda, &poles, &weights))
    }

    fn secular_weights(&self, c: &[f64]) -> Vec<f64> {
        let p = self.denominator(c);
        let p2 = p * p;
        (0..self.n_components())
            .map(|i| self.eta[i] * self.b[i] * c[i] / p2)
            .collect()
    }

    /// Eigenvalues of `W'(c)` in ascending order, as roots of the secular
    /// function.
    ///
    /// Each root is bracketed between consecutive poles (the first one
    /// between 1 and `d_1`), bisected until the bracket is narrower than
    /// `width · max(1, λ)`, then polished by a single Newton step that is
    /// kept only if it stays inside the bracket.
    ///
    /// Boundary states (some `c_i = 0`) are rejected: there the rank-one
    /// term loses a direction and an eigenvalue lands exactly on a pole.
    pub fn eigenvalues(&self, c: &[f64], width: f64) -> Result<Vec<f64>, IsothermError> {
        self.check_dim(c.len())?;
        for (i, &ci) in c.iter().enumerate() {
            if !(ci > 0.0 && ci.is_finite()) {
                return Err(IsothermError::Degenerate {
                    component: i,
                    value: ci,
                });
            }
        }
        let poles = self.secular_poles(c);
        let weights = self.secular_weights(c);
        let mut roots = Vec::with_capacity(poles.len());
        for k in 0..poles.len() {
            let (lo0, hi0) = if k == 0 {
                (1.0, poles[0])
            } else {
                (poles[k - 1], poles[k])
            };
            let (mut lo, mut hi) = (lo0, hi0);
            let mut iterations = 0;
            // S decreases from +∞ (or 1/p at λ = 1) to −∞ across the bracket.
            while hi - lo > width * hi.max(1.0) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if secular_value(mid, &poles, &weights) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                iterations += 1;
                if iterations > 4 * MAX_ROOT_ITER {
                    return Err(IsothermError::NotConverged {
                        lo,
                        hi,
                        iterations,
                    });
                }
            }
            let mut lambda = 0.5 * (lo + hi);
            let s = secular_value(lambda, &poles, &weights);
            let ds = secular_slope(lambda, &poles, &weights);
            if ds != 0.0 && ds.is_finite() {
                let polished = lambda - s / ds;
                if polished > lo0 && polished < hi0 && polished >= lo && polished <= hi {
                    lambda = polished;
                }
            }
            roots.push(lambda);
        }
        Ok(roots)
    }

    fn check_dim(&self, len: usize) -> Result<(), IsothermError> {
        if len != self.n_components() {
            return Err(IsothermError::Dimension {
                expected: self.n_components(),
                got: len,
            });
        }
        Ok(())
    }

    fn check_len(&self, len: usize) {
        assert_eq!(
            len,
            self.n_components(),
            "vector length does not match the number of components"
        );
    }
}

fn secular_value(lambda: f64, poles: &[f64], weights: &[f64]) -> f64 {
    1.0 + poles
        .iter()
        .zip(weights)
        .map(|(d, z)| z / (lambda - d))
        .sum::<f64>()
}

fn secular_slope(lambda: f64, poles: &[f64], weights: &[f64]) -> f64 {
    -poles
        .iter()
        .zip(weights)
        .map(|(d, z)| {
            let t = lambda - d;
            z / (t * t)
        })
        .sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Closed-form single-component inverse,
/// `c(w) = (√((1+η−bw)² + 4bw) − (1+η−bw)) / 2b`.
///
/// Evaluated in the cancellation-free form when `1 + η − bw > 0`.
pub fn closed_form_single(w: f64, eta: f64, b: f64) -> f64 {
    let x = 1.0 + eta - b * w;
    let root = (x * x + 4.0 * b * w).sqrt();
    if x > 0.0 {
        2.0 * w / (root + x)
    } else {
        (root - x) / (2.0 * b)
    }
}

/// Mobile-phase concentrations, non-negative by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationVec(Vec<f64>);

/// Conserved variables `w = c + (1−ε)/ε q(c)`, non-negative by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservedVec(Vec<f64>);

macro_rules! nonneg_vec {
    ($t:ident) => {
        impl $t {
            pub fn new(values: Vec<f64>) -> Result<Self, IsothermError> {
                for (i, &v) in values.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(IsothermError::Negative {
                            component: i,
                            value: v,
                        });
                    }
                }
                Ok($t(values))
            }

            pub fn zeros(n: usize) -> Self {
                $t(vec![0.0; n])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }
    };
}

nonneg_vec!(ConcentrationVec);
nonneg_vec!(ConservedVec);
