//! Scenario files and the built-in presets.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! name = "single_elution"
//!
//! [isotherm]
//! a = [1.0]
//! b = [1.0]
//! epsilon = 0.5
//!
//! [physics]
//! u = 1.0
//! Da = 0.0          # or Nt = <plates>, never both
//!
//! [grid]
//! m = 100
//!
//! [time]
//! dt_over_dz = 0.9
//! t_final = 1.4
//! snapshots = [0.5, 1.0, 1.4]
//!
//! [[injection.segments]]
//! t_start = 0.0
//! t_end = 0.2       # omit to feed until the end of the run
//! c = [1.0]
//!
//! [scheme]
//! kind = "explicit-rk2"
//! ```
//!
//! Optional keys: `scheme.boundary_sampling` (`"step-start"` or
//! `"midpoint"`), `scheme.c0`, `scheme.c1`, the `[scheme.tolerances]` table
//! (`inversion`, `newton_tol`, `newton_max_iter`) and `[initial] c = [...]`.
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{BoundarySampling, RunConfig, SchemeKind, Tolerances};
use crate::isotherm::LangmuirParams;
use crate::spatial::{Grid, InjectionProfile, InjectionSegment, PhysicalParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid scenario: {key}: {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

fn invalid(key: &str, constraint: impl ToString) -> ScenarioError {
    ScenarioError::Invalid {
        key: key.to_string(),
        constraint: constraint.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsothermSection {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub u: f64,
    #[serde(rename = "Da", alias = "da", default, skip_serializing_if = "Option::is_none")]
    pub da: Option<f64>,
    #[serde(rename = "Nt", alias = "nt", default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt_over_dz: f64,
    pub t_final: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSection {
    #[serde(default)]
    pub segments: Vec<InjectionSegment>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    #[serde(default)]
    pub boundary_sampling: BoundarySampling,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub c: Vec<f64>,
}

/// Parsed, not yet validated, scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub isotherm: IsothermSection,
    pub physics: PhysicsSection,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub injection: InjectionSection,
    pub scheme: SchemeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    /// Canonical TOML form; parsing it back gives the same scenario.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable in TOML")
    }

    /// Validates every section and assembles the run configuration.
    pub fn to_config(&self) -> Result<RunConfig, ScenarioError> {
        let iso = &self.isotherm;
        let isotherm = LangmuirParams::new(iso.a.clone(), iso.b.clone(), iso.epsilon)
            .map_err(|e| invalid("isotherm", e))?;
        let n = isotherm.n_components();

        let physics = match (self.physics.da, self.physics.nt) {
            (Some(da), None) => PhysicalParams::new(self.physics.u, da),
            (None, Some(nt)) => PhysicalParams::from_plates(self.physics.u, nt),
            _ => return Err(invalid("physics", "exactly one of `Da` and `Nt` is required")),
        }
        .map_err(|e| invalid("physics", e))?;

        let grid = Grid::new(self.grid.m).map_err(|e| invalid("grid.m", e))?;

        for (k, seg) in self.injection.segments.iter().enumerate() {
            if seg.c.len() != n {
                return Err(invalid(
                    &format!("injection.segments[{k}].c"),
                    format!("expected {n} concentrations, got {}", seg.c.len()),
                ));
            }
        }
        let injection = InjectionProfile::new(n, self.injection.segments.clone())
            .map_err(|e| invalid("injection.segments", e))?;

        let config = RunConfig {
            grid,
            physics,
            isotherm,
            injection,
            dt_over_dz: self.time.dt_over_dz,
            t_final: self.time.t_final,
            snapshots: self.time.snapshots.clone(),
            scheme: self.scheme.kind,
            tolerances: self.scheme.tolerances,
            sampling: self.scheme.boundary_sampling,
            initial: self.initial.as_ref().map(|i| i.c.clone()),
            c0: self.scheme.c0,
            c1: self.scheme.c1,
        };
        config.validate().map_err(|e| match e {
            crate::integrate::ConfigError::Invalid { key, constraint } => {
                ScenarioError::Invalid { key, constraint }
            }
        })?;
        Ok(config)
    }

    /// The scenario describing `config`.
    pub fn from_config(config: &RunConfig, name: Option<&str>) -> Self {
        let physics = match config.physics.plates() {
            Some(nt) => PhysicsSection {
                u: config.physics.u(),
                da: None,
                nt: Some(nt),
            },
            None => PhysicsSection {
                u: config.physics.u(),
                da: Some(config.physics.da()),
                nt: None,
            },
        };
        Scenario {
            name: name.map(str::to_string),
            isotherm: IsothermSection {
                a: config.isotherm.a().to_vec(),
                b: config.isotherm.b().to_vec(),
                epsilon: config.isotherm.epsilon(),
            },
            physics,
            grid: GridSection {
                m: config.grid.cells(),
            },
            time: TimeSection {
                dt_over_dz: config.dt_over_dz,
                t_final: config.t_final,
                snapshots: config.snapshots.clone(),
            },
            injection: InjectionSection {
                segments: config.injection.segments().to_vec(),
            },
            scheme: SchemeSection {
                kind: config.scheme,
                boundary_sampling: config.sampling,
                c0: config.c0,
                c1: config.c1,
                tolerances: config.tolerances,
            },
            initial: config.initial.clone().map(|c| InitialSection { c }),
        }
    }
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<(Scenario, RunConfig), ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let scenario = Scenario::from_toml(&text)?;
    let config = scenario.to_config()?;
    Ok((scenario, config))
}

/// Built-in experiments.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 7] = [
        "single_elution",
        "single_elution_da0005",
        "single_elution_da005",
        "stability_sweep",
        "displacement_exp1",
        "displacement_exp2",
        "displacement_exp3",
    ];

    fn single(name: &str, da: f64, m: usize, ratio: f64, t_final: f64, kind: SchemeKind) -> Scenario {
        let snapshots = if t_final > 0.5 {
            vec![0.5, 1.0, t_final]
        } else {
            vec![t_final]
        };
        Scenario {
            name: Some(name.to_string()),
            isotherm: IsothermSection {
                a: vec![1.0],
                b: vec![1.0],
                epsilon: 0.5,
            },
            physics: PhysicsSection {
                u: 1.0,
                da: Some(da),
                nt: None,
            },
            grid: GridSection { m },
            time: TimeSection {
                dt_over_dz: ratio,
                t_final,
                snapshots,
            },
            injection: InjectionSection {
                segments: vec![InjectionSegment {
                    t_start: 0.0,
                    t_end: Some(0.2),
                    c: vec![1.0],
                }],
            },
            scheme: SchemeSection {
                kind,
                boundary_sampling: BoundarySampling::StepStart,
                c0: 1.0,
                c1: 1.0,
                tolerances: Tolerances::default(),
            },
            initial: None,
        }
    }

    fn displacement(name: &str, c_displacer: f64, t_final: f64, snapshots: Vec<f64>) -> Scenario {
        Scenario {
            name: Some(name.to_string()),
            isotherm: IsothermSection {
                a: vec![4.0, 5.0, 6.0],
                b: vec![4.0, 5.0, 1.0],
                epsilon: 0.5,
            },
            physics: PhysicsSection {
                u: 0.2,
                da: None,
                nt: Some(10000.0),
            },
            grid: GridSection { m: 1000 },
            time: TimeSection {
                dt_over_dz: 4.0,
                t_final,
                snapshots,
            },
            injection: InjectionSection {
                segments: vec![
                    InjectionSegment {
                        t_start: 0.0,
                        t_end: Some(0.1),
                        c: vec![1.0, 1.0, 0.0],
                    },
                    InjectionSegment {
                        t_start: 0.1,
                        t_end: None,
                        c: vec![0.0, 0.0, c_displacer],
                    },
                ],
            },
            scheme: SchemeSection {
                kind: SchemeKind::ImexRk2,
                boundary_sampling: BoundarySampling::StepStart,
                c0: 1.0,
                c1: 1.0,
                tolerances: Tolerances::default(),
            },
            initial: None,
        }
    }

    pub fn get(name: &str) -> Result<Scenario, ScenarioError> {
        Ok(match name {
            // u = a = b = 1, ε = 0.5, unit pulse on [0, 0.2], no dispersion
            "single_elution" => single(name, 0.0, 100, 0.9, 1.4, SchemeKind::ExplicitRk2),
            // explicit scheme beyond its diffusive stability bound
            "single_elution_da0005" => single(name, 0.0005, 500, 0.9, 0.5, SchemeKind::ExplicitRk2),
            "single_elution_da005" => single(name, 0.005, 2000, 0.9, 0.5, SchemeKind::ImexRk2),
            // largest stable ratio observed for m = 500
            "stability_sweep" => single(name, 0.0005, 500, 0.7, 0.5, SchemeKind::ExplicitRk2),
            // two solutes fed on [0, 0.1], then the displacer from t = 0.1
            "displacement_exp1" => displacement(name, 1.0, 16.0, vec![1.0, 4.0, 8.0, 12.0, 16.0]),
            "displacement_exp2" => displacement(name, 0.5, 24.0, vec![1.0, 8.0, 16.0, 24.0]),
            "displacement_exp3" => displacement(name, 0.1, 24.0, vec![1.0, 12.0, 24.0]),
            _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
        })
    }
}

/// The displacer of a displacement run: the most strongly adsorbed
/// component among those fed without an end time, with its feed
/// concentration.
pub fn displacer(config: &RunConfig) -> Option<(usize, f64)> {
    let open: Vec<&InjectionSegment> = config
        .injection
        .segments()
        .iter()
        .filter(|s| s.t_end.is_none())
        .collect();
    (0..config.n_components())
        .rev()
        .find_map(|i| open.iter().find(|s| s.c[i] > 0.0).map(|s| (i, s.c[i])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in presets::NAMES {
            let s = presets::get(name).unwrap();
            let config = s.to_config().unwrap();
            let back = Scenario::from_toml(&s.to_toml()).unwrap();
            assert_eq!(back, s, "{name}");
            assert_eq!(back.to_config().unwrap(), config, "{name}");
            assert_eq!(Scenario::from_config(&config, Some(name)), s, "{name}");
        }
    }

    #[test]
    fn plates_give_the_dispersion_coefficient() {
        let c = presets::get("displacement_exp1").unwrap().to_config().unwrap();
        assert!((c.physics.da() - 1e-5).abs() < 1e-20);
        assert_eq!(displacer(&c), Some((2, 1.0)));
        let c = presets::get("single_elution").unwrap().to_config().unwrap();
        assert_eq!(displacer(&c), None);
    }

    #[test]
    fn both_or_neither_dispersion_keys_is_an_error() {
        let mut s = presets::get("single_elution").unwrap();
        s.physics.nt = Some(100.0);
        assert!(matches!(s.to_config(), Err(ScenarioError::Invalid { key, .. }) if key == "physics"));
        s.physics.da = None;
        s.physics.nt = None;
        assert!(s.to_config().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = presets::get("single_elution").unwrap().to_toml();
        text = text.replace("[grid]\n", "[grid]\ncells = 4\n");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("cells"), "{err}");
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(presets::get("nope"), Err(ScenarioError::UnknownPreset(_))));
    }
}
