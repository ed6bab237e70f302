//! Experiment configuration: a JSON document with strict key checking.
//!
//! ```json
//! {
//!   "field":      { "Omega": 1, "T_f0": 1, "dim": 30 },
//!   "reservoir":  { "kind": "multi-atom", "N": 1, "T_a": 2, "omega": 1 },
//!   "coupling":   { "g": 0.08, "tau": 0.5, "tau0": 0, "gamma": 1e-9, "kappa": 5e-11 },
//!   "integrator": { "dt": 0.0125 },
//!   "run":        { "collisions_max": 20000 }
//! }
//! ```
//!
//! Everything except `reservoir.kind`, `reservoir.N`, `reservoir.T_a`,
//! `field.T_f0`, `coupling.g` and `coupling.tau` has a default.

use serde::{Deserialize, Serialize};

use crate::analytics::{bose_einstein_occupation, thermalization_time};
use crate::dynamics::{suggested_dim, IntegratorSettings, DEFAULT_STEPS_PER_WINDOW};
use crate::error::{Error, Result};
use crate::hilbert::FockTruncation;
use crate::models::{CouplingSpec, FieldSpec, ReservoirKind, ReservoirSpec, THERMAL_TAIL_WARN};

pub const DEFAULT_GAMMA: f64 = 1e-9;
pub const DEFAULT_KAPPA: f64 = 0.5e-10;
pub const MIN_DEFAULT_DIM: usize = 15;
pub const MAX_DEFAULT_DIM: usize = 120;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawField {
    #[serde(rename = "Omega", skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(rename = "T_f0")]
    pub t_f0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawReservoir {
    #[serde(deserialize_with = "deserialize_kind")]
    pub kind: ReservoirKind,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "T_a")]
    pub t_a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCoupling {
    pub g: f64,
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIntegrator {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collisions_max: Option<i64>,
}

/// Config document as written, before defaults and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub field: RawField,
    pub reservoir: RawReservoir,
    pub coupling: RawCoupling,
    #[serde(default)]
    pub integrator: RawIntegrator,
    #[serde(default)]
    pub run: RawRun,
}

fn deserialize_kind<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ReservoirKind, D::Error> {
    let s = String::deserialize(d)?;
    match s.to_ascii_lowercase().replace(['_', ' '], "-").as_str() {
        "multi-atom" | "multiatom" | "cluster" => Ok(ReservoirKind::MultiAtom),
        "multi-level" | "multilevel" => Ok(ReservoirKind::MultiLevel),
        _ => Err(serde::de::Error::custom(format!(
            "unknown reservoir kind `{s}`, expected `multi-atom` or `multi-level`"
        ))),
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub field: FieldSpec,
    pub reservoir: ReservoirSpec,
    pub coupling: CouplingSpec,
    pub integrator: IntegratorSettings,
    /// `None` selects 10 predicted thermalization times.
    pub collisions_max: Option<usize>,
    /// Reserved; the pipeline is deterministic.
    pub seed: u64,
    pub output_path: Option<String>,
    /// Relative per-collision change of n̄ that counts as settled.
    pub steady_epsilon: f64,
    /// Consecutive settled collisions that end a run early.
    pub steady_window: usize,
}

/// Overrides applied on top of a parsed document (command-line flags).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub collisions: Option<usize>,
    pub dim: Option<usize>,
}

pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    parse_config_with(text, Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: Overrides) -> Result<SimulationConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Validation(e.to_string()))?;
    raw.build(overrides)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}

impl RawConfig {
    pub fn build(&self, overrides: Overrides) -> Result<SimulationConfig> {
        let omega_cavity = self.field.omega.unwrap_or(1.0);
        require(omega_cavity > 0.0, || format!("field.Omega must be > 0, got {omega_cavity}"))?;
        require(self.reservoir.n >= 1, || format!("reservoir.N must be >= 1, got {}", self.reservoir.n))?;
        let reservoir = ReservoirSpec::new(
            self.reservoir.kind,
            self.reservoir.n as usize,
            self.reservoir.t_a,
            self.reservoir.omega.unwrap_or(omega_cavity),
        )?;
        let coupling = CouplingSpec::new(
            self.coupling.g,
            self.coupling.tau,
            self.coupling.tau0.unwrap_or(0.0),
            self.coupling.gamma.unwrap_or(DEFAULT_GAMMA),
            self.coupling.kappa.unwrap_or(DEFAULT_KAPPA),
        )?;
        let prediction = thermalization_time(&reservoir, &coupling)?;

        let t_f0 = self.field.t_f0;
        require(t_f0 >= 0.0 && t_f0.is_finite(), || format!("field.T_f0 must be >= 0, got {t_f0}"))?;
        let dim = match overrides.dim.or(self.field.dim) {
            Some(d) => d,
            None => default_dim(omega_cavity, t_f0, prediction.n_bar_th),
        };
        let truncation = FockTruncation::new(dim)?;
        let field = FieldSpec::new(omega_cavity, truncation, t_f0)?;

        let dt = self.integrator.dt.unwrap_or(coupling.tau / DEFAULT_STEPS_PER_WINDOW);
        let integrator = IntegratorSettings { dt, renormalize_trace: false };
        integrator.validate_for_window(coupling.tau)?;

        let collisions_max = match (overrides.collisions, self.run.collisions_max) {
            (Some(c), _) => Some(c),
            (None, Some(c)) => {
                require(c >= 0, || format!("run.collisions_max must be >= 0, got {c}"))?;
                Some(c as usize)
            }
            (None, None) => None,
        };

        Ok(SimulationConfig {
            field,
            reservoir,
            coupling,
            integrator,
            collisions_max,
            seed: 0,
            output_path: None,
            steady_epsilon: 1e-6,
            steady_window: 50,
        })
    }
}

/// ⌈10·(n̄ + 1)⌉ clamped to [15, 120] for the larger of the initial and
/// steady photon numbers, then widened until the thermal tail is below 1e-6.
pub fn default_dim(omega: f64, t_f0: f64, n_bar_steady: f64) -> usize {
    let n_initial = if t_f0 > 0.0 { bose_einstein_occupation(omega, t_f0).unwrap_or(0.0) } else { 0.0 };
    let n_target = n_initial.max(n_bar_steady);
    let base = ((10.0 * (n_target + 1.0)).ceil() as usize).clamp(MIN_DEFAULT_DIM, MAX_DEFAULT_DIM);
    let t_steady = crate::analytics::field_temperature(n_bar_steady, omega);
    let t_max = t_f0.max(t_steady);
    let needed = if t_max > 0.0 { suggested_dim(omega, t_max, THERMAL_TAIL_WARN) } else { 2 };
    base.max(needed).min(MAX_DEFAULT_DIM)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "reservoir": {"kind": "multi-atom", "N": 1, "T_a": 2},
        "field": {"T_f0": 1},
        "coupling": {"g": 0.08, "tau": 0.5}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.field.omega, 1.0);
        assert_eq!(c.reservoir.omega, 1.0);
        assert_eq!(c.coupling.gamma, 1e-9);
        assert_eq!(c.coupling.kappa, 0.5e-10);
        assert_eq!(c.coupling.tau0, 0.0);
        assert_eq!(c.integrator.dt, 0.5 / 100.0);
        assert_eq!(c.collisions_max, None);
        // n̄_th(T=2) = 1.54 gives 26, widened to keep the T=2 tail below 1e-6.
        assert_eq!(c.field.dim(), 27);
    }

    #[test]
    fn zero_atoms_rejected() {
        let text = MINIMAL.replace("\"N\": 1", "\"N\": 0");
        assert!(matches!(parse_config(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn gain_regime_multilevel_rejected() {
        let text = MINIMAL.replace("multi-atom", "multi-level").replace("\"N\": 1", "\"N\": 3");
        assert!(matches!(parse_config(&text), Err(Error::GainRegime(_))));
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replace("\"g\": 0.08", "\"gg\": 0.08, \"g\": 0.08");
        match parse_config(&text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("gg"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"field\"", "\"extra\": 1, \"field\"");
        assert!(matches!(parse_config(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_values_name_the_field() {
        let text = MINIMAL.replace("\"tau\": 0.5", "\"tau\": -0.5");
        match parse_config(&text) {
            Err(Error::Validation(msg)) => assert!(msg.contains("tau"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("\"tau\": 0.5}", "\"tau\": 0.5}, \"integrator\": {\"dt\": 0.1}");
        assert!(matches!(parse_config(&text), Err(Error::Settings(_))));
    }

    #[test]
    fn overrides_win() {
        let c = parse_config_with(MINIMAL, Overrides { collisions: Some(0), dim: Some(5) }).unwrap();
        assert_eq!(c.collisions_max, Some(0));
        assert_eq!(c.field.dim(), 5);
    }

    #[test]
    fn default_dim_clamps() {
        assert_eq!(default_dim(1.0, 0.0, 0.0), 15);
        assert_eq!(default_dim(1.0, 1.0, 4.5e-5), 16);
        assert_eq!(default_dim(1.0, 100.0, 0.0), 120);
    }
}
