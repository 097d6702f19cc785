//! Equilibrium-dispersive chromatography with multi-component Langmuir
//! isotherms.
//!
//! The column model is solved in conservative form for
//! `w = c + (1−ε)/ε · q(c)`, with WENO5 reconstruction of the split
//! convective flux and an IMEX Runge-Kutta step that treats the diffusion
//! term implicitly.

pub mod diagnostics;
pub mod implicit;
pub mod integrate;
pub mod isotherm;
pub mod linalg;
pub mod output;
pub mod scenario;
pub mod spatial;
pub mod state;

pub use integrate::{run, BoundarySampling, RunConfig, SchemeKind};
pub use scenario::{parse_scenario, presets, Scenario, ScenarioError};
pub use isotherm::{IsothermError, LangmuirParams};
pub use spatial::{Discretization, Grid, InjectionProfile, InjectionSegment, PhysicalParams, Reconstruction};
pub use state::{Field, StateField};
