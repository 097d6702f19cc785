//! Fully discrete schemes and the simulation driver.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::DiagnosticsRecord;
use crate::implicit::{build_rhs_g, newton_solve_stage, NewtonConfig, SolverError};
use crate::isotherm::{LangmuirParams, DEFAULT_TOL};
use crate::linalg::{lu_factor, lu_solve};
use crate::spatial::{
    ghost_inlet, Discretization, Grid, InjectionProfile, PhysicalParams, Reconstruction,
};
use crate::state::{Field, InversionError, StateField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// First-order upwind flux, forward Euler.
    UpwindFe,
    /// WENO5 fluxes, explicit midpoint Runge-Kutta.
    ExplicitRk2,
    /// WENO5 convection explicit, diffusion implicit.
    ImexRk2,
    /// Non-conservative scheme on `c`, first order.
    Ncs1,
    /// Non-conservative scheme on `c`, minmod MUSCL with midpoint RK2.
    Ncs2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::UpwindFe,
        SchemeKind::ExplicitRk2,
        SchemeKind::ImexRk2,
        SchemeKind::Ncs1,
        SchemeKind::Ncs2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::UpwindFe => "upwind-fe",
            SchemeKind::ExplicitRk2 => "explicit-rk2",
            SchemeKind::ImexRk2 => "imex-rk2",
            SchemeKind::Ncs1 => "ncs1",
            SchemeKind::Ncs2 => "ncs2",
        }
    }

    pub fn is_conservative(self) -> bool {
        !matches!(self, SchemeKind::Ncs1 | SchemeKind::Ncs2)
    }

    fn reconstruction(self) -> Reconstruction {
        match self {
            SchemeKind::UpwindFe | SchemeKind::Ncs1 | SchemeKind::Ncs2 => Reconstruction::Upwind,
            SchemeKind::ExplicitRk2 | SchemeKind::ImexRk2 => Reconstruction::Weno5,
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SchemeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SchemeKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown scheme `{s}`, expected one of {}", names.join(", "))
            })
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// When the inlet concentration is sampled inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySampling {
    /// `c_inj(tₙ)` for every stage; steps are not aligned with injection
    /// switches, so a segment is fed for a whole number of steps.
    #[default]
    StepStart,
    /// `c_inj(tₙ)` in the first stage and `c_inj(tₙ + Δt/2)` in the second;
    /// steps are clipped at injection switch times.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Root tolerance for the per-cell inversion `c = C(w)`.
    pub inversion: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let n = NewtonConfig::default();
        Tolerances {
            inversion: DEFAULT_TOL,
            newton_tol: n.tol,
            newton_max_iter: n.max_iter,
        }
    }
}

impl Tolerances {
    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            tol: self.newton_tol,
            max_iter: self.newton_max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("inversion failed: {0}")]
    Inversion(#[from] InversionError),
    #[error("implicit stage failed: {0}")]
    Solver(#[from] SolverError),
    #[error("singular mass matrix in cell {cell}")]
    SingularMass { cell: usize },
}

/// `Δt/Δz ≤ C0/(u + 2D_a/Δz)`.
pub fn explicit_stability_bound(physics: &PhysicalParams, grid: &Grid, c0: f64) -> f64 {
    c0 / (physics.u() + 2.0 * physics.da() / grid.dz())
}

/// `Δt/Δz ≤ C1/u`, independent of `D_a` and `Δz`.
pub fn imex_stability_bound(physics: &PhysicalParams, c1: f64) -> f64 {
    c1 / physics.u()
}

/// Result of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub state: StateField,
    /// Newton iterations of each implicit stage (empty for explicit schemes).
    pub newton_iterations: Vec<usize>,
    /// Whether every implicit stage decreased its residual strictly after
    /// the first iteration.
    pub newton_monotone: bool,
    /// `u c_inj − f̂_{m+½}` of the stage that produced the update, per
    /// component. For the conservative schemes the mass change over the step
    /// is exactly `Δt` times this. `None` for the non-conservative schemes.
    pub boundary_flux: Option<Vec<f64>>,
}

/// One scheme bound to a problem.
#[derive(Debug, Clone)]
pub struct Stepper {
    scheme: SchemeKind,
    disc: Discretization,
    injection: InjectionProfile,
    sampling: BoundarySampling,
    tolerances: Tolerances,
}

impl Stepper {
    pub fn new(
        scheme: SchemeKind,
        grid: Grid,
        physics: PhysicalParams,
        isotherm: LangmuirParams,
        injection: InjectionProfile,
        sampling: BoundarySampling,
        tolerances: Tolerances,
    ) -> Self {
        let disc = Discretization::new(grid, physics, isotherm, scheme.reconstruction());
        Stepper {
            scheme,
            disc,
            injection,
            sampling,
            tolerances,
        }
    }

    pub fn scheme(&self) -> SchemeKind {
        self.scheme
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn injection(&self) -> &InjectionProfile {
        &self.injection
    }

    pub fn sampling(&self) -> BoundarySampling {
        self.sampling
    }

    fn stage_times(&self, t: f64, dt: f64) -> (f64, f64) {
        match self.sampling {
            BoundarySampling::StepStart => (t, t),
            BoundarySampling::Midpoint => (t, t + 0.5 * dt),
        }
    }

    fn invert(&self, w: Field, warm: &StateField) -> Result<StateField, StepError> {
        let mut s = warm.clone();
        s.set_conserved(w, &self.disc.isotherm, self.tolerances.inversion)?;
        Ok(s)
    }

    fn net_boundary_flux(&self, convective_flux: &Field) -> Vec<f64> {
        let m = convective_flux.n_cells() - 1;
        (0..convective_flux.n_components())
            .map(|i| convective_flux.get(i, 0) - convective_flux.get(i, m))
            .collect()
    }

    /// Advances `state` from `t` to `t + dt`.
    pub fn step(&self, state: &StateField, t: f64, dt: f64) -> Result<StepReport, StepError> {
        match self.scheme {
            SchemeKind::UpwindFe => self.step_upwind_fe(state, t, dt),
            SchemeKind::ExplicitRk2 => self.step_explicit_rk2(state, t, dt),
            SchemeKind::ImexRk2 => self.step_imex_rk2(state, t, dt),
            SchemeKind::Ncs1 => self.step_ncs(state, t, dt, 1),
            SchemeKind::Ncs2 => self.step_ncs(state, t, dt, 2),
        }
    }

    fn explicit_report(&self, state: StateField, flux: &Field) -> StepReport {
        StepReport {
            state,
            newton_iterations: Vec::new(),
            newton_monotone: true,
            boundary_flux: Some(self.net_boundary_flux(flux)),
        }
    }

    /// `wⁿ⁺¹ = wⁿ + Δt(ℒ + 𝒟)(wⁿ)`.
    pub fn step_upwind_fe(
        &self,
        state: &StateField,
        t: f64,
        dt: f64,
    ) -> Result<StepReport, StepError> {
        let c_inj = self.injection.eval(t);
        let flux = self.disc.convective_fluxes(state, &c_inj);
        let mut w = state.w().clone();
        w.axpy(dt, &self.disc.rhs(state, &c_inj));
        let next = self.invert(w, state)?;
        Ok(self.explicit_report(next, &flux))
    }

    /// Midpoint rule: `w* = wⁿ + Δt/2 (ℒ+𝒟)(wⁿ)`, `wⁿ⁺¹ = wⁿ + Δt (ℒ+𝒟)(w*)`.
    pub fn step_explicit_rk2(
        &self,
        state: &StateField,
        t: f64,
        dt: f64,
    ) -> Result<StepReport, StepError> {
        let (ta, tb) = self.stage_times(t, dt);
        let mut w_half = state.w().clone();
        w_half.axpy(0.5 * dt, &self.disc.rhs(state, &self.injection.eval(ta)));
        let half = self.invert(w_half, state)?;

        let c_inj = self.injection.eval(tb);
        let flux = self.disc.convective_fluxes(&half, &c_inj);
        let mut w = state.w().clone();
        w.axpy(dt, &self.disc.rhs(&half, &c_inj));
        let next = self.invert(w, &half)?;
        Ok(self.explicit_report(next, &flux))
    }

    /// Stage 1 solves `w* − Δt/2 𝒟(w*) = wⁿ + Δt/2 ℒ(wⁿ)` by Newton on
    /// `c*`; stage 2 is `wⁿ⁺¹ = wⁿ + Δt (ℒ(w*) + 𝒟(w*))`.
    pub fn step_imex_rk2(
        &self,
        state: &StateField,
        t: f64,
        dt: f64,
    ) -> Result<StepReport, StepError> {
        let (ta, tb) = self.stage_times(t, dt);
        let conv = self.disc.convective_operator(state, &self.injection.eval(ta));
        let g = build_rhs_g(state.w(), dt, &conv);
        let stage = newton_solve_stage(
            &g,
            state.c(),
            &self.disc,
            dt,
            &self.tolerances.newton(),
            self.tolerances.inversion,
        )?;
        let monotone = stage.residuals.windows(2).skip(1).all(|r| r[1] < r[0]);
        let half = stage.state;

        let c_inj = self.injection.eval(tb);
        let flux = self.disc.convective_fluxes(&half, &c_inj);
        let mut w = state.w().clone();
        w.axpy(dt, &self.disc.rhs(&half, &c_inj));
        let next = self.invert(w, &half)?;
        Ok(StepReport {
            state: next,
            newton_iterations: vec![stage.iterations],
            newton_monotone: monotone,
            boundary_flux: Some(self.net_boundary_flux(&flux)),
        })
    }

    /// Time derivative of `c` for the non-conservative scheme:
    /// `W'(c_k)⁻¹ (T_{k−½} − T_{k+½}) / Δz`, with `T` the total flux
    /// `u ĉ − D_a ∂c/∂z` built from upwind (`order = 1`) or minmod MUSCL
    /// (`order = 2`) interface values of `c`.
    pub fn ncs_rate(&self, c: &Field, c_inj: &[f64], order: u8) -> Result<Field, StepError> {
        let n = c.n_components();
        let m = c.n_cells();
        let u = self.disc.physics.u();
        let da = self.disc.physics.da();
        let dz = self.disc.grid.dz();
        let mut total = Field::zeros(n, m + 1);
        for i in 0..n {
            let v = |k: usize| c.get(i, k);
            let ghost = ghost_inlet(v(0), 1, c_inj[i], &self.disc.physics, &self.disc.grid);
            total.set(i, 0, u * c_inj[i]);
            for k in 1..=m {
                let left = v(k - 1);
                let value = if order >= 2 {
                    let prev = if k >= 2 { v(k - 2) } else { ghost };
                    let next = if k < m { v(k) } else { left };
                    left + 0.5 * minmod(left - prev, next - left)
                } else {
                    left
                };
                let diffusion = if k < m { da * (v(k) - left) / dz } else { 0.0 };
                total.set(i, k, u * value - diffusion);
            }
        }
        let mut rate = Field::zeros(n, m);
        let mut block = vec![0.0; n * n];
        let mut piv = vec![0usize; n];
        let mut scratch = vec![0.0; n];
        for k in 0..m {
            self.disc.isotherm.jacobian_into(c.cell(k), &mut block);
            if !lu_factor(&mut block, n, &mut piv) {
                return Err(StepError::SingularMass { cell: k });
            }
            let r = rate.cell_mut(k);
            for i in 0..n {
                r[i] = (total.get(i, k) - total.get(i, k + 1)) / dz;
            }
            lu_solve(&block, n, &piv, r, &mut scratch);
            if r.iter().any(|x| !x.is_finite()) {
                return Err(StepError::SingularMass { cell: k });
            }
        }
        Ok(rate)
    }

    /// Non-conservative update of `c`: forward Euler (`order = 1`) or the
    /// midpoint rule (`order = 2`).
    pub fn step_ncs(
        &self,
        state: &StateField,
        t: f64,
        dt: f64,
        order: u8,
    ) -> Result<StepReport, StepError> {
        let (ta, tb) = self.stage_times(t, dt);
        let mut c = state.c().clone();
        if order >= 2 {
            let mut half = state.c().clone();
            half.axpy(0.5 * dt, &self.ncs_rate(state.c(), &self.injection.eval(ta), order)?);
            c.axpy(dt, &self.ncs_rate(&half, &self.injection.eval(tb), order)?);
        } else {
            c.axpy(dt, &self.ncs_rate(state.c(), &self.injection.eval(ta), order)?);
        }
        for k in 0..c.n_cells() {
            if self.disc.isotherm.denominator(c.cell(k)) <= 0.0 {
                return Err(StepError::SingularMass { cell: k });
            }
        }
        Ok(StepReport {
            state: StateField::from_concentrations(c, &self.disc.isotherm),
            newton_iterations: Vec::new(),
            newton_monotone: true,
            boundary_flux: None,
        })
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: Grid,
    pub physics: PhysicalParams,
    pub isotherm: LangmuirParams,
    pub injection: InjectionProfile,
    pub dt_over_dz: f64,
    pub t_final: f64,
    /// Output times in `[0, t_final]`; `t_final` is always emitted.
    pub snapshots: Vec<f64>,
    pub scheme: SchemeKind,
    pub tolerances: Tolerances,
    pub sampling: BoundarySampling,
    /// Uniform initial concentration; a clean column when `None`.
    pub initial: Option<Vec<f64>>,
    /// Stability constants `C0` (explicit) and `C1` (IMEX).
    pub c0: f64,
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{key}: {constraint}")]
    Invalid { key: String, constraint: String },
}

fn invalid(key: &str, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        constraint: constraint.into(),
    }
}

impl RunConfig {
    pub fn n_components(&self) -> usize {
        self.isotherm.n_components()
    }

    pub fn dt(&self) -> f64 {
        self.dt_over_dz * self.grid.dz()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n_components();
        if !(self.dt_over_dz > 0.0 && self.dt_over_dz.is_finite()) {
            return Err(invalid("time.dt_over_dz", "must be positive and finite"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(invalid("time.t_final", "must be non-negative and finite"));
        }
        if let Some(t) = self
            .snapshots
            .iter()
            .find(|&&t| !(0.0..=self.t_final).contains(&t))
        {
            return Err(invalid(
                "time.snapshots",
                format!("{t} is outside [0, t_final = {}]", self.t_final),
            ));
        }
        if self.injection.n_components() != n {
            return Err(invalid(
                "injection",
                format!("segments have {} components, isotherm has {n}", self.injection.n_components()),
            ));
        }
        if let Some(c) = &self.initial {
            if c.len() != n || c.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid("initial.c", format!("must hold {n} non-negative values")));
            }
        }
        if !(self.c0 > 0.0 && self.c1 > 0.0) {
            return Err(invalid("scheme.c0/c1", "stability constants must be positive"));
        }
        let tol = &self.tolerances;
        if !(tol.inversion > 0.0 && tol.newton_tol > 0.0 && tol.newton_max_iter >= 1) {
            return Err(invalid(
                "scheme.tolerances",
                "tolerances must be positive and newton_max_iter at least 1",
            ));
        }
        Ok(())
    }

    pub fn stepper(&self) -> Stepper {
        Stepper::new(
            self.scheme,
            self.grid,
            self.physics,
            self.isotherm.clone(),
            self.injection.clone(),
            self.sampling,
            self.tolerances,
        )
    }

    pub fn initial_state(&self) -> StateField {
        let n = self.n_components();
        let m = self.grid.cells();
        match &self.initial {
            Some(c) => StateField::from_concentrations(Field::uniform(c, m), &self.isotherm),
            None => StateField::zeros(n, m),
        }
    }

    /// Largest concentration each component can reach: the larger of its
    /// peak inlet value and its initial value.
    pub fn concentration_bounds(&self) -> Vec<f64> {
        (0..self.n_components())
            .map(|i| {
                let init = self.initial.as_ref().map_or(0.0, |c| c[i]);
                self.injection.max_concentration(i).max(init)
            })
            .collect()
    }

    pub fn explicit_bound(&self) -> f64 {
        explicit_stability_bound(&self.physics, &self.grid, self.c0)
    }

    pub fn imex_bound(&self) -> f64 {
        imex_stability_bound(&self.physics, self.c1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: StateField,
    pub diagnostics: DiagnosticsRecord,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub implicit_stages: usize,
    pub max_newton_iterations: usize,
    pub non_monotone_stages: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("step starting at t = {time}: {source}")]
    Step {
        time: f64,
        #[source]
        source: StepError,
    },
}

/// Times the driver must land on exactly, ascending.
fn landing_times(config: &RunConfig) -> Vec<f64> {
    let mut times: Vec<f64> = config
        .snapshots
        .iter()
        .copied()
        .chain(std::iter::once(config.t_final))
        .collect();
    if config.sampling == BoundarySampling::Midpoint {
        times.extend(
            config
                .injection
                .switch_times()
                .into_iter()
                .filter(|&t| t > 0.0 && t < config.t_final),
        );
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Runs `config` from `t = 0` to `t_final`.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    run_observed(config, |_, _, _| {})
}

/// Like [`run`], calling `observer(t_start, dt, report)` after every step.
pub fn run_observed(
    config: &RunConfig,
    mut observer: impl FnMut(f64, f64, &StepReport),
) -> Result<RunOutput, RunError> {
    config.validate()?;
    let stepper = config.stepper();
    let bounds = config.concentration_bounds();
    let dt = config.dt();
    let mut emit: Vec<f64> = config
        .snapshots
        .iter()
        .copied()
        .chain(std::iter::once(config.t_final))
        .collect();
    emit.sort_by(f64::total_cmp);
    emit.dedup();

    let mut state = config.initial_state();
    let mut stats = RunStats::default();
    let mut snapshots = Vec::with_capacity(emit.len());
    let record = |time: f64, state: &StateField| Snapshot {
        time,
        state: state.clone(),
        diagnostics: DiagnosticsRecord::compute(time, state, &config.grid, &bounds),
    };

    let mut t = 0.0;
    let mut emit_iter = emit.iter().peekable();
    if emit_iter.peek() == Some(&&0.0) {
        snapshots.push(record(0.0, &state));
        emit_iter.next();
    }
    for target in landing_times(config) {
        if target <= t {
            continue;
        }
        // time is anchor + k·dt between landings, so it does not drift
        let anchor = t;
        let mut k = 0usize;
        while t < target {
            let remaining = target - t;
            let (h, next_t) = if remaining <= dt * (1.0 + 1e-9) {
                (remaining, target)
            } else {
                (dt, anchor + (k + 1) as f64 * dt)
            };
            let report = stepper
                .step(&state, t, h)
                .map_err(|source| RunError::Step { time: t, source })?;
            observer(t, h, &report);
            stats.steps += 1;
            stats.implicit_stages += report.newton_iterations.len();
            if let Some(&it) = report.newton_iterations.iter().max() {
                stats.max_newton_iterations = stats.max_newton_iterations.max(it);
            }
            if !report.newton_monotone {
                stats.non_monotone_stages += 1;
            }
            state = report.state;
            t = next_t;
            k += 1;
        }
        if emit_iter.peek() == Some(&&target) {
            snapshots.push(record(target, &state));
            emit_iter.next();
        }
    }
    Ok(RunOutput { snapshots, stats })
}
