use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{ScenarioSpec, POWER_BAND, VOLTAGE_BAND};
use crate::record::RunRecord;

/// Loss-of-synchronism criteria: a frequency excursion beyond `freq_dev`
/// lasting `sustain` seconds, or two strings drifting apart by more than
/// `angle` radians.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LosThresholds {
    pub freq_dev: f64,
    pub sustain: f64,
    pub angle: f64,
}

impl Default for LosThresholds {
    fn default() -> Self {
        Self {
            freq_dev: 0.1,
            sustain: 0.1,
            angle: core::f64::consts::PI,
        }
    }
}

impl LosThresholds {
    pub(super) fn validate(&self) -> Result<(), (&'static str, &'static str)> {
        for (f, v) in [
            ("freq_dev", self.freq_dev),
            ("sustain", self.sustain),
            ("angle", self.angle),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err((f, "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Metrics {
    pub los_detected: bool,
    pub los_time: Option<f64>,
    pub diverged_at: Option<f64>,
    /// Per string, over the whole run.
    pub max_current: Vec<f64>,
    pub max_freq_dev: Vec<f64>,
    /// Longest continuous stretch with the unmodified reference above `I_max` (s).
    pub max_saturation: Vec<f64>,
    pub current_limit_sustained: Vec<bool>,
    pub min_p: Vec<f64>,
    pub min_p_virt: Vec<f64>,
    /// Mean `|v_pcc|` and `P` over the settling window.
    pub settled_voltage: Vec<f64>,
    pub settled_power: Vec<f64>,
    /// Largest pairwise `|Q_i - Q_j|` in the settling window.
    pub reactive_imbalance: f64,
    pub voltage_settled: bool,
    pub ramp_completed: bool,
}

fn string_col<'a>(record: &'a RunRecord, k: usize, sig: &str) -> &'a [f64] {
    record
        .string_signal(k, sig)
        .unwrap_or_else(|| panic!("record is missing s{}_{sig}", k + 1))
}

/// First time at which loss of synchronism is detected, if any.
pub fn detect_los(record: &RunRecord, thresholds: &LosThresholds) -> Option<f64> {
    let t = record.time();
    let n = record.n_strings();
    let mut first: Option<f64> = record.status().diverged_at();
    let mut note = |at: f64| {
        first = Some(first.map_or(at, |f: f64| f.min(at)));
    };

    for k in 0..n {
        let omega = string_col(record, k, "omega");
        let mut since: Option<f64> = None;
        for (&ti, &w) in t.iter().zip(omega) {
            if (w - 1.0).abs() > thresholds.freq_dev || !w.is_finite() {
                let s = *since.get_or_insert(ti);
                if ti - s >= thresholds.sustain - 1e-12 {
                    note(ti);
                    break;
                }
            } else {
                since = None;
            }
        }
    }

    for a in 0..n {
        for b in a + 1..n {
            let pa = string_col(record, a, "phi_rel");
            let pb = string_col(record, b, "phi_rel");
            if let Some(i) = pa.iter().zip(pb).position(|(x, y)| (x - y).abs() > thresholds.angle) {
                note(t[i]);
            }
        }
    }
    first
}

/// Metrics over a finished (or aborted) run.
pub fn compute_metrics(record: &RunRecord, spec: &ScenarioSpec) -> Metrics {
    let t = record.time();
    let n = record.n_strings();
    let los_time = detect_los(record, &spec.los);
    let diverged_at = record.status().diverged_at();
    let i_max = spec.limits.i_max;

    let t_last = t.last().copied().unwrap_or(0.0);
    let window_start = t_last - spec.settle_window;
    let w0 = t.iter().position(|&ti| ti >= window_start - 1e-12).unwrap_or(t.len());

    let mut m = Metrics {
        los_detected: los_time.is_some(),
        los_time,
        diverged_at,
        ..Metrics::default()
    };
    let dt = if t.len() > 1 { t[1] - t[0] } else { 0.0 };

    for k in 0..n {
        let i = string_col(record, k, "i");
        let omega = string_col(record, k, "omega");
        let i0 = string_col(record, k, "i_ref0");
        let p = string_col(record, k, "p");
        let pv = string_col(record, k, "p_virt");
        let v = string_col(record, k, "vpcc");

        m.max_current.push(i.iter().fold(0.0, |a, &x| a.max(x)));
        m.max_freq_dev
            .push(omega.iter().fold(0.0, |a, &x| a.max((x - 1.0).abs())));
        m.min_p.push(p.iter().copied().fold(f64::INFINITY, f64::min));
        m.min_p_virt.push(pv.iter().copied().fold(f64::INFINITY, f64::min));

        let (mut longest, mut run) = (0.0_f64, 0usize);
        for &x in i0 {
            if x > i_max {
                run += 1;
                longest = longest.max(run as f64 * dt);
            } else {
                run = 0;
            }
        }
        m.max_saturation.push(longest);
        m.current_limit_sustained.push(longest >= spec.los.sustain);

        let mean = |xs: &[f64]| {
            let w = &xs[w0..];
            if w.is_empty() {
                f64::NAN
            } else {
                w.iter().sum::<f64>() / w.len() as f64
            }
        };
        m.settled_voltage.push(mean(v));
        m.settled_power.push(mean(p));
    }

    let mut imbalance = 0.0_f64;
    for a in 0..n {
        for b in a + 1..n {
            let qa = &string_col(record, a, "q")[w0..];
            let qb = &string_col(record, b, "q")[w0..];
            for (x, y) in qa.iter().zip(qb) {
                imbalance = imbalance.max((x - y).abs());
            }
        }
    }
    m.reactive_imbalance = imbalance;

    let healthy = diverged_at.is_none() && los_time.is_none() && w0 < t.len();
    let v_target = spec.profiles.v_ext.target;
    m.voltage_settled = healthy
        && (0..n).all(|k| {
            string_col(record, k, "vpcc")[w0..]
                .iter()
                .all(|v| (v - v_target).abs() <= VOLTAGE_BAND)
        });

    let p_target = spec.profiles.p_ref.target;
    m.ramp_completed = if p_target > 0.0 {
        healthy
            && spec.power_ramp_end() <= window_start + 1e-9
            && (0..n).all(|k| {
                string_col(record, k, "p")[w0..]
                    .iter()
                    .all(|p| (p - p_target).abs() <= POWER_BAND)
            })
    } else {
        m.voltage_settled && spec.voltage_ramp_end() <= window_start + 1e-9
    };
    m
}
