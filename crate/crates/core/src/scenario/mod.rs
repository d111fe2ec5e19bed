//! Declarative case definitions and the named presets.

mod metrics;

pub use metrics::{compute_metrics, detect_los, LosThresholds, Metrics};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::controller::{ControllerParams, FeedbackConfig};
use crate::plant::PlantParams;

/// Linear ramp from zero to `target` with `slope` (pu/s). `start` is the
/// time the start signal is issued; each string may receive it later.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Ramp {
    pub target: f64,
    pub slope: f64,
    pub start: f64,
}

impl Ramp {
    pub const ZERO: Self = Self {
        target: 0.0,
        slope: 0.0,
        start: 0.0,
    };

    /// Value `elapsed` seconds after the start signal was received.
    pub fn value_after(&self, elapsed: f64) -> f64 {
        if elapsed <= 0.0 {
            0.0
        } else {
            (self.slope * elapsed).min(self.target)
        }
    }

    /// Seconds from start to reaching the target.
    pub fn duration(&self) -> f64 {
        if self.target <= 0.0 {
            0.0
        } else if self.slope > 0.0 {
            self.target / self.slope
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct StringSpec {
    pub name: String,
    pub n_wt: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub controller: ControllerParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub feedback: FeedbackConfig,
    /// Communication delay of the voltage ramp start signal (s).
    #[cfg_attr(feature = "serde", serde(default))]
    pub voltage_ramp_delay: f64,
    /// Communication delay of the power ramp start signal (s).
    #[cfg_attr(feature = "serde", serde(default))]
    pub power_ramp_delay: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Profiles {
    pub v_ext: Ramp,
    pub p_ref: Ramp,
    #[cfg_attr(feature = "serde", serde(default))]
    pub q_ref: f64,
}

/// Converter limits applied to every string. `p_min = None` removes the
/// reverse power limit.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Limits {
    pub p_min: Option<f64>,
    pub i_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScenarioSpec {
    pub name: String,
    pub strings: Vec<StringSpec>,
    pub profiles: Profiles,
    pub limits: Limits,
    #[cfg_attr(feature = "serde", serde(default))]
    pub plant: PlantParams,
    /// Simulated horizon (s).
    pub horizon: f64,
    /// Length of the window at the end of the run used for settled metrics (s).
    #[cfg_attr(feature = "serde", serde(default = "default_settle_window"))]
    pub settle_window: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub los: LosThresholds,
}

#[cfg(feature = "serde")]
fn default_settle_window() -> f64 {
    SETTLE_WINDOW
}

pub const SETTLE_WINDOW: f64 = 0.5;
pub const V_TARGET_MAX: f64 = 1.2;

/// Largest voltage deviation from the ramp target that still counts as
/// settled, and the power tracking band used for ramp completion.
pub const VOLTAGE_BAND: f64 = 0.02;
pub const POWER_BAND: f64 = 0.05;
/// Threshold for balanced reactive power sharing (string base).
pub const REACTIVE_BALANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

impl core::error::Error for ScenarioError {}

fn err(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.strings.is_empty() {
            return Err(err("strings", "at least one string is required"));
        }
        for (name, r) in [
            ("profiles.v_ext", &self.profiles.v_ext),
            ("profiles.p_ref", &self.profiles.p_ref),
        ] {
            if !(r.slope.is_finite() && r.slope >= 0.0) {
                return Err(err(format!("{name}.slope"), "must be finite and >= 0"));
            }
            if !(r.target.is_finite() && (0.0..=V_TARGET_MAX).contains(&r.target)) {
                return Err(err(format!("{name}.target"), "must lie in [0, 1.2] pu"));
            }
            if !(r.start.is_finite() && r.start >= 0.0) {
                return Err(err(format!("{name}.start"), "must be finite and >= 0"));
            }
        }
        if !self.profiles.q_ref.is_finite() {
            return Err(err("profiles.q_ref", "must be finite"));
        }
        if let Some(p) = self.limits.p_min {
            if !p.is_finite() {
                return Err(err("limits.p_min", "must be finite or null (no limit)"));
            }
        }
        if !(self.limits.i_max.is_finite() && self.limits.i_max > 0.0) {
            return Err(err("limits.i_max", "must be > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(err("horizon", "must be > 0"));
        }
        if !(self.settle_window.is_finite() && self.settle_window > 0.0 && self.settle_window <= self.horizon) {
            return Err(err("settle_window", "must be in (0, horizon]"));
        }
        self.los.validate().map_err(|(f, r)| err(format!("los.{f}"), r))?;
        for (k, s) in self.strings.iter().enumerate() {
            let field = |f: &str| format!("strings[{k}].{f}");
            if s.n_wt == 0 {
                return Err(err(field("n_wt"), "must be > 0"));
            }
            for (f, d) in [
                ("voltage_ramp_delay", s.voltage_ramp_delay),
                ("power_ramp_delay", s.power_ramp_delay),
            ] {
                if !(d.is_finite() && d >= 0.0) {
                    return Err(err(field(f), "must be finite and >= 0"));
                }
            }
            self.controller_params(k)
                .validate()
                .map_err(|e| err(field("controller"), e.to_string()))?;
            if (s.controller.omega_base - self.plant.omega_base).abs() > 1e-9 * self.plant.omega_base {
                return Err(err(field("controller.omega_base"), "must equal plant.omega_base"));
            }
        }
        self.plant
            .validate()
            .map_err(|e| err(format!("plant.{}", e.0), "invalid value"))?;
        Ok(())
    }

    /// Controller parameters of string `k` with the scenario limits applied.
    pub fn controller_params(&self, k: usize) -> ControllerParams {
        ControllerParams {
            p_min: self.limits.p_min,
            i_max: self.limits.i_max,
            ..self.strings[k].controller
        }
    }

    pub fn n_wt(&self) -> Vec<u32> {
        self.strings.iter().map(|s| s.n_wt).collect()
    }

    /// Latest time any string finishes its power ramp.
    pub fn power_ramp_end(&self) -> f64 {
        let r = &self.profiles.p_ref;
        self.strings
            .iter()
            .map(|s| r.start + s.power_ramp_delay + r.duration())
            .fold(0.0, f64::max)
    }

    /// Latest time any string finishes its voltage ramp.
    pub fn voltage_ramp_end(&self) -> f64 {
        let r = &self.profiles.v_ext;
        self.strings
            .iter()
            .map(|s| r.start + s.voltage_ramp_delay + r.duration())
            .fold(0.0, f64::max)
    }
}

fn two_strings(feedback: FeedbackConfig, v_delay_s2: f64, p_delay_s2: f64) -> Vec<StringSpec> {
    let string = |name: &str, n_wt, vd, pd| StringSpec {
        name: name.to_string(),
        n_wt,
        controller: ControllerParams::default(),
        feedback,
        voltage_ramp_delay: vd,
        power_ramp_delay: pd,
    };
    vec![string("WTS1", 36, 0.0, 0.0), string("WTS2", 38, v_delay_s2, p_delay_s2)]
}

/// Voltage ramps of the black start: both strings ramp their locally
/// generated voltage reference to 0.8 pu at 0.6 pu/s.
pub const BLACK_START_RAMP: Ramp = Ramp {
    target: 0.8,
    slope: 0.6,
    start: 0.0,
};

/// Power ramp after black start: 0.8 pu at 0.5 pu/s, issued at 2 s.
pub const POWER_RAMP: Ramp = Ramp {
    target: 0.8,
    slope: 0.5,
    start: 2.0,
};

/// Two-string black start with the voltage ramp start signal reaching
/// WTS2 `delay_s2` seconds late.
pub fn build_black_start(delay_s2: f64, feedback: FeedbackConfig) -> ScenarioSpec {
    ScenarioSpec {
        name: String::from("black-start"),
        strings: two_strings(feedback, delay_s2, 0.0),
        profiles: Profiles {
            v_ext: BLACK_START_RAMP,
            p_ref: Ramp::ZERO,
            q_ref: 0.0,
        },
        limits: Limits {
            p_min: Some(0.0),
            i_max: 1.2,
        },
        plant: PlantParams::default(),
        horizon: 3.0,
        settle_window: SETTLE_WINDOW,
        los: LosThresholds::default(),
    }
}

/// Power ramp with WTS2 receiving the start signal `delay_s2` seconds
/// late. The preceding black start is replayed without delay.
pub fn build_power_ramp(delay_s2: f64, p_min: Option<f64>, feedback: FeedbackConfig) -> ScenarioSpec {
    let mut s = build_black_start(0.0, feedback);
    s.name = String::from("power-ramp");
    s.strings = two_strings(feedback, 0.0, delay_s2);
    s.profiles.p_ref = POWER_RAMP;
    s.limits.p_min = p_min;
    s.horizon = 6.0;
    s
}

pub const PRESET_NAMES: [&str; 5] = [
    "blackstart-virtual",
    "blackstart-measured-droop",
    "ramp-nopmin-measured",
    "ramp-pmin-measured-pv",
    "ramp-pmin-virtual",
];

pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "blackstart-virtual" => "black start, 300 ms delay on WTS2, virtual power in all loops",
        "blackstart-measured-droop" => "black start, 300 ms delay on WTS2, QV and PV on measured power",
        "ramp-nopmin-measured" => "power ramp, 1 s delay on WTS2, no reverse power limit, measured power everywhere",
        "ramp-pmin-measured-pv" => "power ramp, 1 s delay on WTS2, P_min = 0, PV on measured power",
        "ramp-pmin-virtual" => "power ramp, 1 s delay on WTS2, P_min = 0, virtual power in all loops",
        _ => return None,
    })
}

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    let mut spec = match name {
        "blackstart-virtual" => build_black_start(0.3, FeedbackConfig::ALL_VIRTUAL),
        "blackstart-measured-droop" => build_black_start(0.3, FeedbackConfig::MEASURED_DROOP),
        "ramp-nopmin-measured" => build_power_ramp(1.0, None, FeedbackConfig::ALL_MEASURED),
        "ramp-pmin-measured-pv" => build_power_ramp(1.0, Some(0.0), FeedbackConfig::MEASURED_PV),
        "ramp-pmin-virtual" => build_power_ramp(1.0, Some(0.0), FeedbackConfig::ALL_VIRTUAL),
        _ => return None,
    };
    spec.name = name.to_string();
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_start_builder() {
        let s = build_black_start(0.3, FeedbackConfig::ALL_VIRTUAL);
        assert_eq!(s.n_wt(), vec![36, 38]);
        assert_eq!(s.strings[0].voltage_ramp_delay, 0.0);
        assert_eq!(s.strings[1].voltage_ramp_delay, 0.3);
        assert_eq!(s.profiles.v_ext.target, 0.8);
        assert_eq!(s.profiles.v_ext.slope, 0.6);
        assert_eq!(s.profiles.p_ref.target, 0.0);
        assert_eq!(s.profiles.q_ref, 0.0);
        assert_eq!(s.limits.p_min, Some(0.0));
        assert_eq!(s.limits.i_max, 1.2);
        s.validate().unwrap();
        assert!((s.voltage_ramp_end() - (0.3 + 0.8 / 0.6)).abs() < 1e-12);
    }

    #[test]
    fn power_ramp_builder() {
        let s = build_power_ramp(1.0, None, FeedbackConfig::ALL_MEASURED);
        assert_eq!(s.limits.p_min, None);
        assert_eq!(s.strings[1].power_ramp_delay, 1.0);
        assert_eq!(s.strings[1].voltage_ramp_delay, 0.0);
        assert_eq!(s.profiles.p_ref, POWER_RAMP);
        s.validate().unwrap();
        assert!((s.power_ramp_end() - 4.6).abs() < 1e-12);
        assert!(s.power_ramp_end() <= s.horizon - s.settle_window);
    }

    #[test]
    fn presets_are_valid_and_distinct() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name, name);
            assert!(preset_description(name).is_some());
        }
        assert!(preset("nope").is_none());
        let a = preset("ramp-pmin-measured-pv").unwrap();
        assert!(a
            .strings
            .iter()
            .all(|s| !s.feedback.pv_uses_virtual && s.feedback.qv_uses_virtual));
        let b = preset("blackstart-measured-droop").unwrap();
        assert!(b.strings.iter().all(|s| s.feedback == FeedbackConfig::MEASURED_DROOP));
    }

    #[test]
    fn validation_names_offending_field() {
        let mut s = build_black_start(0.3, FeedbackConfig::ALL_VIRTUAL);
        s.profiles.v_ext.slope = -1.0;
        assert_eq!(s.validate().unwrap_err().field, "profiles.v_ext.slope");

        let mut s = build_black_start(0.3, FeedbackConfig::ALL_VIRTUAL);
        s.profiles.p_ref.target = 1.5;
        assert_eq!(s.validate().unwrap_err().field, "profiles.p_ref.target");

        let mut s = build_black_start(0.3, FeedbackConfig::ALL_VIRTUAL);
        s.strings[1].controller.alpha_a = 0.2;
        assert_eq!(s.validate().unwrap_err().field, "strings[1].controller");

        let mut s = build_black_start(0.3, FeedbackConfig::ALL_VIRTUAL);
        s.plant.hvdc.c_on = 0.0;
        assert_eq!(s.validate().unwrap_err().field, "plant.hvdc.c_on");
    }

    #[test]
    fn ramp_values() {
        let r = BLACK_START_RAMP;
        assert_eq!(r.value_after(-1.0), 0.0);
        assert!((r.value_after(0.5) - 0.3).abs() < 1e-15);
        assert_eq!(r.value_after(10.0), 0.8);
        assert_eq!(Ramp::ZERO.duration(), 0.0);
    }
}
