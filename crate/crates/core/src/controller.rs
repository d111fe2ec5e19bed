//! Universal power synchronization controller for one aggregated string.
//!
//! The chain executed once per control sample:
//!
//! 1. map the sampled PCC voltage and converter current to the dq frame
//! 2. measured power and virtual power (from the unmodified AVC reference)
//! 3. per-loop feedback selection
//! 4. power synchronization loop -> frame angle
//! 5. QV/PV droop -> voltage magnitude reference
//! 6. alternating voltage controller -> unmodified current reference
//! 7. reverse-power projection, then angle-preserving magnitude limit
//! 8. stationary-frame current control with PCC feedforward
//! 9. modulation limit
//!
//! All gains and bandwidths are per unit with per-unit time; the sample
//! period is in seconds and enters as `h = omega_base * ts`.

use core::f64::consts::TAU;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::filter::LowPass;
use crate::spacevec::{complex_power, to_alphabeta, to_dq, wrap_angle, SpaceVector};

pub const OMEGA_BASE_50HZ: f64 = TAU * 50.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ControllerParams {
    /// Frequency droop.
    pub k_m: f64,
    /// Virtual inertia in pu time; `2 * H * omega_base`.
    pub m: f64,
    /// Damper-winding time constant (pu time).
    pub t_d: f64,
    pub k_qv: f64,
    pub alpha_q: f64,
    pub k_pv: f64,
    /// Integral gain of the PV loop, per second of real time (not pu time).
    pub k_pv_i: f64,
    pub alpha_p: f64,
    /// Active resistance, also the current-control proportional gain.
    pub r_a: f64,
    pub alpha_a: f64,
    pub alpha_f: f64,
    pub i_max: f64,
    /// Reverse power floor; `None` disables the limit.
    pub p_min: Option<f64>,
    pub omega_1: f64,
    pub l_f: f64,
    /// Resistive drop compensated in the current-control feedforward.
    pub r_f: f64,
    pub v_dc: f64,
    /// Control sample period in seconds.
    pub ts: f64,
    /// rad/s corresponding to 1 pu frequency.
    pub omega_base: f64,
    pub v_ref_max: f64,
    pub v_ref_floor: f64,
    pub v_floor: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            k_m: 20.0,
            m: Self::inertia_from_h(1.0, OMEGA_BASE_50HZ),
            t_d: 0.0,
            k_qv: 0.05,
            alpha_q: 0.2,
            k_pv: 0.75,
            k_pv_i: 5.0,
            alpha_p: 0.5,
            r_a: 0.36,
            alpha_a: 0.01,
            alpha_f: 2.0,
            i_max: 1.2,
            p_min: Some(0.0),
            omega_1: 1.0,
            l_f: 0.18,
            r_f: 0.01,
            v_dc: 1.9754,
            ts: 200e-6,
            omega_base: OMEGA_BASE_50HZ,
            v_ref_max: 1.2,
            v_ref_floor: 0.05,
            v_floor: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamError {
    NonPositive(&'static str),
    NonFinite(&'static str),
    /// A bandwidth ordering constraint is violated.
    Bandwidth(&'static str),
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonPositive(name) => write!(f, "{name} must be strictly positive"),
            Self::NonFinite(name) => write!(f, "{name} must be finite"),
            Self::Bandwidth(rule) => write!(f, "bandwidth constraint violated: {rule}"),
        }
    }
}

impl ControllerParams {
    /// Inertia constant `M` in pu time from an inertia time constant in seconds.
    pub fn inertia_from_h(h_seconds: f64, omega_base: f64) -> f64 {
        2.0 * h_seconds * omega_base
    }

    /// Control step in per-unit time.
    #[inline]
    pub fn h(&self) -> f64 {
        self.omega_base * self.ts
    }

    /// Largest converter voltage magnitude in the linear modulation range.
    pub fn v_mod_max(&self) -> f64 {
        self.v_dc / libm::sqrt(3.0)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = [
            ("k_m", self.k_m),
            ("m", self.m),
            ("t_d", self.t_d),
            ("k_qv", self.k_qv),
            ("alpha_q", self.alpha_q),
            ("k_pv", self.k_pv),
            ("k_pv_i", self.k_pv_i),
            ("alpha_p", self.alpha_p),
            ("r_a", self.r_a),
            ("alpha_a", self.alpha_a),
            ("alpha_f", self.alpha_f),
            ("i_max", self.i_max),
            ("omega_1", self.omega_1),
            ("l_f", self.l_f),
            ("r_f", self.r_f),
            ("v_dc", self.v_dc),
            ("ts", self.ts),
            ("omega_base", self.omega_base),
            ("v_ref_max", self.v_ref_max),
            ("v_ref_floor", self.v_ref_floor),
            ("v_floor", self.v_floor),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(ParamError::NonFinite(name));
            }
        }
        if let Some(p) = self.p_min {
            if !p.is_finite() {
                return Err(ParamError::NonFinite("p_min"));
            }
        }
        let positive = [
            ("k_m", self.k_m),
            ("m", self.m),
            ("r_a", self.r_a),
            ("alpha_q", self.alpha_q),
            ("alpha_p", self.alpha_p),
            ("alpha_f", self.alpha_f),
            ("i_max", self.i_max),
            ("omega_1", self.omega_1),
            ("l_f", self.l_f),
            ("v_dc", self.v_dc),
            ("ts", self.ts),
            ("omega_base", self.omega_base),
            ("v_ref_max", self.v_ref_max),
            ("v_ref_floor", self.v_ref_floor),
            ("v_floor", self.v_floor),
        ];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(ParamError::NonPositive(name));
            }
        }
        if self.t_d < 0.0 || self.alpha_a < 0.0 || self.k_qv < 0.0 || self.k_pv < 0.0 || self.k_pv_i < 0.0 {
            return Err(ParamError::NonPositive("t_d/alpha_a/k_qv/k_pv/k_pv_i (must be >= 0)"));
        }
        if self.alpha_q >= self.omega_1 {
            return Err(ParamError::Bandwidth("alpha_q < omega_1"));
        }
        if self.alpha_p >= self.omega_1 {
            return Err(ParamError::Bandwidth("alpha_p < omega_1"));
        }
        if self.alpha_a >= 0.05 * self.omega_1 {
            return Err(ParamError::Bandwidth("alpha_a < 0.05 * omega_1"));
        }
        // The tabulated defaults sit exactly on alpha_f = r_a / l_f.
        if self.alpha_f > self.r_a / self.l_f * (1.0 + 1e-12) {
            return Err(ParamError::Bandwidth("alpha_f <= r_a / l_f"));
        }
        Ok(())
    }
}

/// Selects virtual (`true`) or measured (`false`) power per outer loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeedbackConfig {
    pub sync_uses_virtual: bool,
    pub qv_uses_virtual: bool,
    pub pv_uses_virtual: bool,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self::ALL_VIRTUAL
    }
}

impl FeedbackConfig {
    pub const ALL_VIRTUAL: Self = Self {
        sync_uses_virtual: true,
        qv_uses_virtual: true,
        pv_uses_virtual: true,
    };
    pub const ALL_MEASURED: Self = Self {
        sync_uses_virtual: false,
        qv_uses_virtual: false,
        pv_uses_virtual: false,
    };
    /// Virtual power only in the synchronization loop.
    pub const MEASURED_DROOP: Self = Self {
        sync_uses_virtual: true,
        qv_uses_virtual: false,
        pv_uses_virtual: false,
    };
    /// Virtual power everywhere except the PV loop.
    pub const MEASURED_PV: Self = Self {
        sync_uses_virtual: true,
        qv_uses_virtual: true,
        pv_uses_virtual: false,
    };
}

/// Power feedback routed to each outer loop.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoopFeedback {
    pub p_sync: f64,
    pub p_pv: f64,
    pub q_qv: f64,
}

pub fn select_feedback(cfg: FeedbackConfig, measured: (f64, f64), virt: (f64, f64)) -> LoopFeedback {
    let pick = |use_virtual: bool, m: f64, v: f64| if use_virtual { v } else { m };
    LoopFeedback {
        p_sync: pick(cfg.sync_uses_virtual, measured.0, virt.0),
        p_pv: pick(cfg.pv_uses_virtual, measured.0, virt.0),
        q_qv: pick(cfg.qv_uses_virtual, measured.1, virt.1),
    }
}

/// Virtual power from the unmodified current reference, both in the
/// stationary frame.
#[inline]
pub fn virtual_power(v_pcc_s: SpaceVector, i_ref0_s: SpaceVector) -> (f64, f64) {
    complex_power(v_pcc_s, i_ref0_s)
}

/// Removes the part of `i_ref0` that would draw more reverse power than
/// `p_min`, projecting along the filtered PCC voltage so the reactive
/// component is kept. Bypassed when the voltage magnitude is below `v_floor`.
pub fn limit_reverse_power(i_ref0: SpaceVector, v_pcc_f: SpaceVector, p_min: Option<f64>, v_floor: f64) -> SpaceVector {
    let Some(p_min) = p_min else {
        return i_ref0;
    };
    let v2 = v_pcc_f.norm_sqr();
    if v2 < v_floor * v_floor {
        return i_ref0;
    }
    let (p, _) = complex_power(v_pcc_f, i_ref0);
    let excess = p - p_min;
    if excess >= 0.0 {
        return i_ref0;
    }
    i_ref0 - v_pcc_f * (excess / v2)
}

/// Angle-preserving scaling onto the disc of radius `i_max`.
pub fn limit_current_magnitude(i_refr: SpaceVector, i_max: f64) -> SpaceVector {
    let mag = i_refr.magnitude();
    if mag <= i_max {
        i_refr
    } else {
        i_refr * (i_max / mag)
    }
}

/// Stationary-frame proportional current control with inductor drop and
/// filtered PCC voltage feedforward.
pub fn current_control(
    i_ref_s: SpaceVector,
    i_s: SpaceVector,
    v_pcc_f_s: SpaceVector,
    params: &ControllerParams,
) -> SpaceVector {
    let z_ff = SpaceVector::new(params.r_f, params.omega_1 * params.l_f);
    (i_ref_s - i_s) * params.r_a + z_ff * i_ref_s + v_pcc_f_s
}

/// Angle-preserving clamp of the converter voltage reference.
pub fn limit_modulation(v_ref_s: SpaceVector, v_max: f64) -> (SpaceVector, bool) {
    let mag = v_ref_s.magnitude();
    if mag > v_max {
        (v_ref_s * (v_max / mag), true)
    } else {
        (v_ref_s, false)
    }
}

/// References for one sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct References {
    pub p_ref: f64,
    pub q_ref: f64,
    pub v_ext: f64,
}

/// Sampled plant quantities (stationary frame, string per unit).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Measurement {
    pub v_pcc_s: SpaceVector,
    pub i_s: SpaceVector,
}

/// Voltage command handed to the modulator: start vector at the actuation
/// instant and the rotation speed (rad/s) to hold it at in the dq frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModulatorCommand {
    pub v_s: SpaceVector,
    pub omega: f64,
}

impl ModulatorCommand {
    /// Voltage `dt` seconds after the actuation instant.
    #[inline]
    pub fn voltage_after(&self, dt: f64) -> SpaceVector {
        if self.omega == 0.0 || dt == 0.0 {
            self.v_s
        } else {
            self.v_s.rotate(self.omega * dt)
        }
    }
}

/// Every intermediate signal of one controller sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepOutputs {
    pub p: f64,
    pub q: f64,
    pub p_virt: f64,
    pub q_virt: f64,
    pub feedback: LoopFeedback,
    pub v_pcc_mag: f64,
    pub i_mag: f64,
    pub v_ref: f64,
    pub omega: f64,
    pub phi: f64,
    /// Unwrapped angle relative to a frame turning at nominal frequency.
    pub phi_rel: f64,
    pub i_ref0: SpaceVector,
    pub i_refr: SpaceVector,
    pub i_ref: SpaceVector,
    pub v_conv_ref_s: SpaceVector,
    pub reverse_limited: bool,
    pub current_limited: bool,
    pub modulation_limited: bool,
    pub v_ref_floor_hit: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ControlError {
    /// A controller state became NaN or infinite.
    NonFinite,
}

impl fmt::Display for ControlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFinite => f.write_str("controller state is not finite"),
        }
    }
}

/// Integrator and filter states of one controller instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub phi: f64,
    pub omega: f64,
    pub phi_rel: f64,
    /// State of `1 / (s M + k_m)` in the synchronization loop.
    pub sync_state: f64,
    pub pv_integrator: f64,
    pub avc_integrator: SpaceVector,
    pub q_filter: LowPass<f64>,
    pub p_filter: LowPass<f64>,
    pub vpcc_filter: LowPass<SpaceVector>,
    /// Unmodified current reference of the previous sample (dq).
    pub i_ref0_prev: SpaceVector,
    pub last: StepOutputs,
}

impl ControllerState {
    /// State at enable time: everything zero except the PCC voltage filter,
    /// which starts at the sampled PCC voltage.
    pub fn new(params: &ControllerParams, phi0: f64, v_pcc_s: SpaceVector) -> Self {
        let h = params.h();
        let phi = wrap_angle(phi0);
        Self {
            phi,
            omega: params.omega_1,
            phi_rel: 0.0,
            sync_state: 0.0,
            pv_integrator: 0.0,
            avc_integrator: SpaceVector::ZERO,
            q_filter: LowPass::new(params.alpha_q, h, 0.0),
            p_filter: LowPass::new(params.alpha_p, h, 0.0),
            vpcc_filter: LowPass::new(params.alpha_f, h, to_dq(v_pcc_s, phi)),
            i_ref0_prev: SpaceVector::ZERO,
            last: StepOutputs::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite()
            && self.omega.is_finite()
            && self.phi_rel.is_finite()
            && self.sync_state.is_finite()
            && self.pv_integrator.is_finite()
            && self.avc_integrator.is_finite()
            && self.q_filter.output().is_finite()
            && self.p_filter.output().is_finite()
            && self.vpcc_filter.output().is_finite()
            && self.i_ref0_prev.is_finite()
    }
}

/// One forward-Euler step of the power synchronization loop
/// `phi = (1/s) [omega_1 + (s T_d + 1)/(s M + k_m) (P_ref - P_bar)]`.
///
/// Returns the frequency used over this step (pu) and advances `phi`.
pub fn sync_step(
    state: &mut ControllerState,
    p_ref: f64,
    p_bar: f64,
    params: &ControllerParams,
    dt: f64,
) -> (f64, f64) {
    let h = params.omega_base * dt;
    let err = p_ref - p_bar;
    let dx = (err - params.k_m * state.sync_state) / params.m;
    let omega_dev = state.sync_state + params.t_d * dx;
    let omega = params.omega_1 + omega_dev;
    state.sync_state += h * dx;
    state.phi = wrap_angle(state.phi + h * omega);
    state.phi_rel += h * (omega - params.omega_1);
    state.omega = omega;
    (state.phi, omega)
}

/// Voltage magnitude reference from the QV droop and the PV PI loop.
/// The output is clamped to `[0, v_ref_max]`; the PV integrator only
/// integrates when that does not push further into the active clamp.
#[allow(clippy::too_many_arguments)]
pub fn voltage_ref_step(
    state: &mut ControllerState,
    v_ext: f64,
    q_ref: f64,
    q_bar: f64,
    p_ref: f64,
    p_bar: f64,
    params: &ControllerParams,
    dt: f64,
) -> f64 {
    let q_f = state.q_filter.update(q_bar);
    let p_f = state.p_filter.update(p_bar);
    let e_q = q_ref - q_f;
    let e_p = p_ref - p_f;
    let unclamped = v_ext + params.k_qv * e_q + params.k_pv * e_p + state.pv_integrator;
    let v_ref = unclamped.clamp(0.0, params.v_ref_max);
    let saturated_high = unclamped >= params.v_ref_max && e_p > 0.0;
    let saturated_low = unclamped <= 0.0 && e_p < 0.0;
    if !saturated_high && !saturated_low {
        state.pv_integrator += dt * params.k_pv_i * e_p;
    }
    v_ref
}

/// Alternating voltage controller. Uses the filtered PCC voltage already
/// held in `state.vpcc_filter`. Returns the unmodified current reference
/// (dq) and whether the feedforward division hit `v_ref_floor`.
pub fn avc_step(
    state: &mut ControllerState,
    p_ref: f64,
    q_ref: f64,
    v_ref: f64,
    params: &ControllerParams,
    dt: f64,
) -> (SpaceVector, bool) {
    let h = params.omega_base * dt;
    let v_f = state.vpcc_filter.output();
    let floor_hit = v_ref < params.v_ref_floor;
    let v_div = v_ref.max(params.v_ref_floor);
    let feedforward = SpaceVector::new(p_ref, -q_ref) / v_div;
    let err = SpaceVector::new(v_ref, 0.0) - v_f;
    let i_ref0 = feedforward + (err + state.avc_integrator) / params.r_a;
    state.avc_integrator += err * (h * params.alpha_a);
    (i_ref0, floor_hit)
}

/// Runs one full control sample. The returned command is meant to be
/// applied one sample later; it is pre-rotated by one sample so that the
/// dq-frame voltage lands where it was computed for.
pub fn controller_step(
    state: &mut ControllerState,
    refs: References,
    meas: Measurement,
    params: &ControllerParams,
    cfg: FeedbackConfig,
) -> Result<(ModulatorCommand, StepOutputs), ControlError> {
    let dt = params.ts;
    let phi = state.phi;

    // Measurement and frame mapping.
    let v_dq = to_dq(meas.v_pcc_s, phi);
    let v_f = state.vpcc_filter.update(v_dq);
    let measured = complex_power(meas.v_pcc_s, meas.i_s);
    let i_ref0_prev_s = to_alphabeta(state.i_ref0_prev, phi);
    let virt = virtual_power(meas.v_pcc_s, i_ref0_prev_s);
    let fb = select_feedback(cfg, measured, virt);

    // PCC reference creation. The AVC below still works in the frame of
    // this sample; the angle update takes effect at the next one.
    let (_, omega) = sync_step(state, refs.p_ref, fb.p_sync, params, dt);
    let v_ref = voltage_ref_step(state, refs.v_ext, refs.q_ref, fb.q_qv, refs.p_ref, fb.p_pv, params, dt);

    // Current reference and modifications.
    let (i_ref0, v_ref_floor_hit) = avc_step(state, refs.p_ref, refs.q_ref, v_ref, params, dt);
    let i_refr = limit_reverse_power(i_ref0, v_f, params.p_min, params.v_floor);
    let i_ref = limit_current_magnitude(i_refr, params.i_max);
    state.i_ref0_prev = i_ref0;

    // Current control in the stationary frame.
    let i_ref_s = to_alphabeta(i_ref, phi);
    let v_f_s = to_alphabeta(v_f, phi);
    let v_cc = current_control(i_ref_s, meas.i_s, v_f_s, params);
    let (v_lim, modulation_limited) = limit_modulation(v_cc, params.v_mod_max());
    let omega_rad = omega * params.omega_base;
    let cmd = ModulatorCommand {
        v_s: v_lim.rotate(omega_rad * dt),
        omega: omega_rad,
    };

    let out = StepOutputs {
        p: measured.0,
        q: measured.1,
        p_virt: virt.0,
        q_virt: virt.1,
        feedback: fb,
        v_pcc_mag: meas.v_pcc_s.magnitude(),
        i_mag: meas.i_s.magnitude(),
        v_ref,
        omega,
        phi,
        phi_rel: state.phi_rel,
        i_ref0,
        i_refr,
        i_ref,
        v_conv_ref_s: v_lim,
        reverse_limited: i_refr != i_ref0,
        current_limited: i_ref != i_refr,
        modulation_limited,
        v_ref_floor_hit,
    };
    state.last = out;
    if !state.is_finite() || !cmd.v_s.is_finite() {
        return Err(ControlError::NonFinite);
    }
    Ok((cmd, out))
}
