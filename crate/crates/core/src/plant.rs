//! Averaged electrical model of the wind farm and its export link.
//!
//! Topology per string: converter -> `R_f + L_f` -> PCC node (half of the
//! collector cable capacitance) -> cable `R + L` -> offshore bus. The bus
//! carries the other cable halves, an optional shunt capacitor and the
//! averaged diode rectifier. The rectifier feeds an RL-C HVDC link whose
//! onshore end is held by a current source.
//!
//! String quantities are in their own string base, everything from the bus
//! onward in the system base (sum of string ratings at the same voltage).
//! Time is in seconds; a per-unit inductance `L` obeys
//! `(L / omega_base) di/dt = v`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::filter::LowPass;
use crate::spacevec::{complex_power, SpaceVector};

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

/// Transformer rating of one turbine (VA).
pub const TURBINE_TRAFO_RATING: f64 = 18e6;
/// Generator rating of one turbine (VA); documentation only.
pub const TURBINE_GENERATOR_RATING: f64 = 19.1e6;
/// Grid-side rated line voltage (V).
pub const GRID_SIDE_VOLTAGE: f64 = 66e3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StringElectrical {
    pub l_f: f64,
    pub r_f: f64,
    pub cable_r: f64,
    pub cable_l: f64,
    /// Total pi-section capacitance, split evenly between both ends.
    pub cable_c: f64,
    /// Turbine-side filter capacitance at the PCC.
    pub c_filter: f64,
}

impl Default for StringElectrical {
    fn default() -> Self {
        Self {
            l_f: 0.18,
            r_f: 0.01,
            cable_r: 0.005,
            cable_l: 0.02,
            cable_c: 0.02,
            c_filter: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DruModel {
    /// No-load DC voltage per pu of AC voltage magnitude.
    pub k_dru: f64,
    /// Commutation-equivalent series resistance on the DC side.
    pub r_comm: f64,
    /// Reactive consumption per unit of active power.
    pub kappa_q: f64,
    /// DC-side smoothing/commutation inductance.
    pub l_dru: f64,
    /// Voltage magnitude floor used in the AC current division.
    pub v_floor: f64,
}

impl Default for DruModel {
    fn default() -> Self {
        Self {
            k_dru: 1.0,
            r_comm: 0.05,
            kappa_q: 0.4,
            l_dru: 0.05,
            v_floor: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HvdcLink {
    pub c_off: f64,
    pub r_dc: f64,
    pub l_dc: f64,
    pub c_on: f64,
}

impl Default for HvdcLink {
    fn default() -> Self {
        Self {
            c_off: 0.05,
            r_dc: 0.01,
            l_dc: 0.1,
            c_on: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OnshoreSource {
    /// Closed-loop and feedforward bandwidth (Hz).
    pub bandwidth_hz: f64,
    pub feedforward: bool,
    /// When false the source only ever absorbs power from the link.
    pub energize_allowed: bool,
    pub v_on_ref: f64,
}

impl Default for OnshoreSource {
    fn default() -> Self {
        Self {
            bandwidth_hz: 25.0,
            feedforward: true,
            energize_allowed: false,
            v_on_ref: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PlantParams {
    pub omega_base: f64,
    pub string: StringElectrical,
    /// Offshore bus shunt capacitance (system pu).
    pub shunt_c: f64,
    pub shunt_connected: bool,
    pub dru: DruModel,
    pub hvdc: HvdcLink,
    pub onshore: OnshoreSource,
    /// Initial charge of both HVDC capacitors (pu). Zero means the turbines
    /// charge the link through the rectifier during black start.
    pub v_dc_initial: f64,
    /// Replace the offshore bus by an ideal source of this magnitude at
    /// nominal frequency (the DC side is then disconnected).
    pub stiff_bus: Option<f64>,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            omega_base: crate::controller::OMEGA_BASE_50HZ,
            string: StringElectrical::default(),
            shunt_c: 0.2,
            shunt_connected: true,
            dru: DruModel::default(),
            hvdc: HvdcLink::default(),
            onshore: OnshoreSource::default(),
            v_dc_initial: 0.0,
            stiff_bus: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantError(pub &'static str);

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid plant parameter: {}", self.0)
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let s = &self.string;
        let positive = [
            ("omega_base", self.omega_base),
            ("string.l_f", s.l_f),
            ("string.cable_l", s.cable_l),
            ("string.cable_c", s.cable_c),
            ("dru.k_dru", self.dru.k_dru),
            ("dru.l_dru", self.dru.l_dru),
            ("dru.v_floor", self.dru.v_floor),
            ("hvdc.c_off", self.hvdc.c_off),
            ("hvdc.l_dc", self.hvdc.l_dc),
            ("hvdc.c_on", self.hvdc.c_on),
            ("onshore.bandwidth_hz", self.onshore.bandwidth_hz),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError(name));
            }
        }
        let nonneg = [
            ("string.r_f", s.r_f),
            ("string.c_filter", s.c_filter),
            ("string.cable_r", s.cable_r),
            ("shunt_c", self.shunt_c),
            ("dru.r_comm", self.dru.r_comm),
            ("dru.kappa_q", self.dru.kappa_q),
            ("hvdc.r_dc", self.hvdc.r_dc),
            ("onshore.v_on_ref", self.onshore.v_on_ref),
            ("v_dc_initial", self.v_dc_initial),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlantError(name));
            }
        }
        if let Some(v) = self.stiff_bus {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlantError("stiff_bus"));
            }
        }
        Ok(())
    }
}

/// Averaged rectifier output for the present AC and DC conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DruOutput {
    pub v_rect: f64,
    /// Current drawn from the offshore bus (system pu).
    pub i_ac_sink: SpaceVector,
    pub conducting: bool,
    /// Active power taken from the AC side, `v_rect * i_dc`.
    pub p_ac: f64,
}

/// Averaged 24-pulse rectifier. Conducts while the rectified EMF exceeds the
/// offshore DC voltage or current is already flowing; the AC current has an
/// active part in phase with `v_off` and a lagging reactive part
/// `kappa_q * P`.
pub fn dru_step(dru: &DruModel, v_off: SpaceVector, i_dc: f64, v_dc_off: f64) -> DruOutput {
    let i_dc = i_dc.max(0.0);
    let v_mag = v_off.magnitude();
    let emf = dru.k_dru * v_mag;
    let conducting = i_dc > 0.0 || emf > v_dc_off;
    if !conducting {
        return DruOutput {
            v_rect: emf,
            i_ac_sink: SpaceVector::ZERO,
            conducting,
            p_ac: 0.0,
        };
    }
    let v_rect = emf - dru.r_comm * i_dc;
    let p_ac = v_rect * i_dc;
    let v_div = v_mag.max(dru.v_floor);
    let i_ac_sink = SpaceVector::new(1.0, -dru.kappa_q) * v_off * (p_ac / (v_div * v_div));
    DruOutput {
        v_rect,
        i_ac_sink,
        conducting,
        p_ac,
    }
}

/// DC voltage regulator approximating the onshore converter: PI plus a
/// filtered feedforward of the incoming cable current. Positive output is
/// current absorbed from the link.
#[derive(Clone, Debug, PartialEq)]
pub struct OnshoreController {
    kp: f64,
    ki: f64,
    integrator: f64,
    ff: LowPass<f64>,
    cfg: OnshoreSource,
    /// Set once the link has reached the reference; until then an
    /// absorb-only source stays idle.
    armed: bool,
}

impl OnshoreController {
    pub fn new(cfg: OnshoreSource, c_on: f64, omega_base: f64, dt: f64) -> Self {
        let wc = core::f64::consts::TAU * cfg.bandwidth_hz;
        // C_on / omega_base * dv/dt = -i_src closes at wc with kp alone.
        let kp = wc * c_on / omega_base;
        Self {
            kp,
            ki: kp * wc / 4.0,
            integrator: 0.0,
            ff: LowPass::new(wc, dt, 0.0),
            armed: cfg.energize_allowed,
            cfg,
        }
    }

    pub fn gains(&self) -> (f64, f64) {
        (self.kp, self.ki)
    }

    /// One controller sample of length `dt` seconds.
    pub fn onshore_step(&mut self, v_on_meas: f64, v_on_ref: f64, i_dc_in: f64, dt: f64) -> f64 {
        let err = v_on_meas - v_on_ref;
        self.armed |= err >= 0.0;
        if !self.armed {
            return 0.0;
        }
        let ff = if self.cfg.feedforward {
            self.ff.update(i_dc_in)
        } else {
            0.0
        };
        let raw = self.kp * err + self.integrator + ff;
        let out = if self.cfg.energize_allowed { raw } else { raw.max(0.0) };
        let clamped = out != raw;
        if !(clamped && err < 0.0) {
            self.integrator += self.ki * err * dt;
        }
        out
    }
}

/// Flat state vector layout:
/// `[per string: i_conv(2), v_pcc(2), i_cab(2)] [v_bus(2)] [i_dc, v_dc_off, i_cable, v_on] [audit(3)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub x: Vec<f64>,
    n_strings: usize,
}

const STRING_LEN: usize = 6;
const AUDIT_LEN: usize = 3;

impl PlantState {
    pub fn zeros(n_strings: usize) -> Self {
        Self {
            x: vec![0.0; n_strings * STRING_LEN + 2 + 4 + AUDIT_LEN],
            n_strings,
        }
    }

    pub fn n_strings(&self) -> usize {
        self.n_strings
    }

    #[inline]
    fn sv(&self, i: usize) -> SpaceVector {
        SpaceVector::new(self.x[i], self.x[i + 1])
    }

    #[inline]
    fn set_sv(&mut self, i: usize, v: SpaceVector) {
        self.x[i] = v.re;
        self.x[i + 1] = v.im;
    }

    pub fn i_conv(&self, k: usize) -> SpaceVector {
        self.sv(k * STRING_LEN)
    }
    pub fn v_pcc(&self, k: usize) -> SpaceVector {
        self.sv(k * STRING_LEN + 2)
    }
    pub fn i_cab(&self, k: usize) -> SpaceVector {
        self.sv(k * STRING_LEN + 4)
    }
    pub fn set_i_conv(&mut self, k: usize, v: SpaceVector) {
        self.set_sv(k * STRING_LEN, v)
    }
    pub fn set_v_pcc(&mut self, k: usize, v: SpaceVector) {
        self.set_sv(k * STRING_LEN + 2, v)
    }
    pub fn set_i_cab(&mut self, k: usize, v: SpaceVector) {
        self.set_sv(k * STRING_LEN + 4, v)
    }
    fn bus_idx(&self) -> usize {
        self.n_strings * STRING_LEN
    }
    pub fn v_bus_state(&self) -> SpaceVector {
        self.sv(self.bus_idx())
    }
    pub fn set_v_bus(&mut self, v: SpaceVector) {
        let i = self.bus_idx();
        self.set_sv(i, v)
    }
    fn dc_idx(&self) -> usize {
        self.bus_idx() + 2
    }
    pub fn i_dc(&self) -> f64 {
        self.x[self.dc_idx()]
    }
    pub fn v_dc_off(&self) -> f64 {
        self.x[self.dc_idx() + 1]
    }
    pub fn i_cable(&self) -> f64 {
        self.x[self.dc_idx() + 2]
    }
    pub fn v_on(&self) -> f64 {
        self.x[self.dc_idx() + 3]
    }
    pub fn set_dc(&mut self, i_dc: f64, v_dc_off: f64, i_cable: f64, v_on: f64) {
        let i = self.dc_idx();
        self.x[i..i + 4].copy_from_slice(&[i_dc, v_dc_off, i_cable, v_on]);
    }
    fn audit_idx(&self) -> usize {
        self.dc_idx() + 4
    }
    /// Integrated `(input, dissipated, exported)` energy in pu * pu-time.
    pub fn audit(&self) -> (f64, f64, f64) {
        let i = self.audit_idx();
        (self.x[i], self.x[i + 1], self.x[i + 2])
    }
    /// Electrical part of the state (without the audit accumulators).
    pub fn electrical(&self) -> &[f64] {
        &self.x[..self.audit_idx()]
    }
    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
    pub fn max_abs(&self) -> f64 {
        self.electrical().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Power flows at one instant, system pu.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PowerFlows {
    pub input: f64,
    pub dissipated: f64,
    pub exported: f64,
}

/// Plant with its per-string aggregation weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant {
    pub params: PlantParams,
    /// `S_string / S_system` per string.
    pub weights: Vec<f64>,
    c_pcc: f64,
    c_bus: f64,
}

impl Plant {
    pub fn new(params: PlantParams, n_wt: &[u32]) -> Result<Self, PlantError> {
        params.validate()?;
        if n_wt.is_empty() || n_wt.contains(&0) {
            return Err(PlantError("strings (need at least one string with n_wt > 0)"));
        }
        let total: u32 = n_wt.iter().sum();
        let weights: Vec<f64> = n_wt.iter().map(|&n| f64::from(n) / f64::from(total)).collect();
        let half = 0.5 * params.string.cable_c;
        let shunt = if params.shunt_connected { params.shunt_c } else { 0.0 };
        let c_bus = shunt + weights.iter().map(|w| w * half).sum::<f64>();
        Ok(Self {
            params,
            weights,
            c_pcc: half + params.string.c_filter,
            c_bus,
        })
    }

    pub fn n_strings(&self) -> usize {
        self.weights.len()
    }

    pub fn initial_state(&self) -> PlantState {
        let mut s = PlantState::zeros(self.n_strings());
        if self.params.stiff_bus.is_none() {
            let v = self.params.v_dc_initial;
            s.set_dc(0.0, v, 0.0, v);
        }
        s
    }

    /// Offshore bus voltage at time `t` (system pu).
    pub fn v_bus(&self, state: &PlantState, t: f64) -> SpaceVector {
        match self.params.stiff_bus {
            Some(v) => SpaceVector::from_polar(v, self.params.omega_base * t),
            None => state.v_bus_state(),
        }
    }

    /// Time derivatives of the full state, seconds. `v_conv` holds the
    /// modulation-limited converter voltage of every string at time `t`,
    /// `i_src` the current absorbed by the onshore source.
    pub fn plant_derivatives(&self, state: &PlantState, v_conv: &[SpaceVector], i_src: f64, t: f64, dx: &mut [f64]) {
        let p = &self.params;
        let wb = p.omega_base;
        let s = &p.string;
        let v_bus = self.v_bus(state, t);
        let mut bus_inflow = SpaceVector::ZERO;
        let mut flows = PowerFlows::default();
        for (k, (&w, &vc)) in self.weights.iter().zip(v_conv).enumerate() {
            let i = state.i_conv(k);
            let v = state.v_pcc(k);
            let ic = state.i_cab(k);
            let di = (vc - v - i * s.r_f) * (wb / s.l_f);
            let dv = (i - ic) * (wb / self.c_pcc);
            let dic = (v - ic * s.cable_r - v_bus) * (wb / s.cable_l);
            let o = k * STRING_LEN;
            dx[o..o + STRING_LEN].copy_from_slice(&[di.re, di.im, dv.re, dv.im, dic.re, dic.im]);
            bus_inflow += ic * w;
            flows.input += w * complex_power(vc, i).0;
            flows.dissipated += w * (s.r_f * i.norm_sqr() + s.cable_r * ic.norm_sqr());
        }
        let b = state.bus_idx();
        let d = state.dc_idx();
        match p.stiff_bus {
            Some(_) => {
                dx[b] = 0.0;
                dx[b + 1] = 0.0;
                dx[d..d + 4].fill(0.0);
                // The ideal bus absorbs whatever arrives.
                flows.exported += complex_power(v_bus, bus_inflow).0;
            }
            None => {
                let i_dc = state.i_dc();
                let v_off = state.v_dc_off();
                let i_cable = state.i_cable();
                let v_on = state.v_on();
                let dru = dru_step(&p.dru, v_bus, i_dc, v_off);
                let dv_bus = (bus_inflow - dru.i_ac_sink) * (wb / self.c_bus);
                dx[b] = dv_bus.re;
                dx[b + 1] = dv_bus.im;
                let mut di_dc = if dru.conducting {
                    (dru.v_rect - v_off) * (wb / p.dru.l_dru)
                } else {
                    0.0
                };
                if i_dc <= 0.0 && di_dc < 0.0 {
                    di_dc = 0.0;
                }
                let dv_off = (i_dc.max(0.0) - i_cable) * (wb / p.hvdc.c_off);
                let di_cable = (v_off - p.hvdc.r_dc * i_cable - v_on) * (wb / p.hvdc.l_dc);
                let dv_on = (i_cable - i_src) * (wb / p.hvdc.c_on);
                dx[d..d + 4].copy_from_slice(&[di_dc, dv_off, di_cable, dv_on]);
                flows.dissipated += p.hvdc.r_dc * i_cable * i_cable;
                flows.exported += v_on * i_src;
            }
        }
        let a = state.audit_idx();
        dx[a] = flows.input * wb;
        dx[a + 1] = flows.dissipated * wb;
        dx[a + 2] = flows.exported * wb;
    }

    /// Energy stored in all reactive elements, pu * pu-time (system base).
    pub fn stored_energy(&self, state: &PlantState) -> f64 {
        let p = &self.params;
        let s = &p.string;
        let mut e = 0.0;
        for (k, &w) in self.weights.iter().enumerate() {
            e += w
                * 0.5
                * (s.l_f * state.i_conv(k).norm_sqr()
                    + self.c_pcc * state.v_pcc(k).norm_sqr()
                    + s.cable_l * state.i_cab(k).norm_sqr());
        }
        if p.stiff_bus.is_none() {
            e += 0.5 * self.c_bus * state.v_bus_state().norm_sqr();
            e += 0.5
                * (p.dru.l_dru * sq(state.i_dc())
                    + p.hvdc.c_off * sq(state.v_dc_off())
                    + p.hvdc.l_dc * sq(state.i_cable())
                    + p.hvdc.c_on * sq(state.v_on()));
        }
        e
    }

    /// Instantaneous power flows for the given inputs.
    pub fn power_flows(&self, state: &PlantState, v_conv: &[SpaceVector], i_src: f64, t: f64) -> PowerFlows {
        let mut dx = vec![0.0; state.x.len()];
        self.plant_derivatives(state, v_conv, i_src, t, &mut dx);
        let a = state.audit_idx();
        let wb = self.params.omega_base;
        PowerFlows {
            input: dx[a] / wb,
            dissipated: dx[a + 1] / wb,
            exported: dx[a + 2] / wb,
        }
    }

    /// Enforces diode blocking after an accepted step.
    pub fn clamp_state(&self, state: &mut PlantState) {
        let d = state.dc_idx();
        if state.x[d] < 0.0 {
            state.x[d] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant(n: &[u32]) -> Plant {
        Plant::new(PlantParams::default(), n).unwrap()
    }

    #[test]
    fn zero_state_zero_input_is_equilibrium() {
        let params = PlantParams {
            v_dc_initial: 0.0,
            ..PlantParams::default()
        };
        let p = Plant::new(params, &[36, 38]).unwrap();
        let s = p.initial_state();
        let mut dx = vec![1.0; s.x.len()];
        p.plant_derivatives(&s, &[SpaceVector::ZERO; 2], 0.0, 0.0, &mut dx);
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn charged_link_with_blocked_rectifier_is_equilibrium() {
        let p = plant(&[36, 38]);
        let s = p.initial_state();
        let mut dx = vec![1.0; s.x.len()];
        p.plant_derivatives(&s, &[SpaceVector::ZERO; 2], 0.0, 0.0, &mut dx);
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_rate_balances_power_flows() {
        // d/dt(E) computed by finite differences along the derivative
        // direction must match input - dissipated - exported.
        let p = plant(&[36, 38]);
        let mut s = p.initial_state();
        s.set_i_conv(0, SpaceVector::new(0.3, -0.2));
        s.set_i_conv(1, SpaceVector::new(0.1, 0.4));
        s.set_v_pcc(0, SpaceVector::new(0.9, 0.2));
        s.set_v_pcc(1, SpaceVector::new(0.95, 0.1));
        s.set_i_cab(0, SpaceVector::new(0.25, -0.1));
        s.set_i_cab(1, SpaceVector::new(0.2, 0.3));
        s.set_v_bus(SpaceVector::new(1.02, 0.15));
        s.set_dc(0.4, 0.95, 0.35, 0.94);
        let vc = [SpaceVector::new(1.0, 0.3), SpaceVector::new(0.9, 0.25)];
        let i_src = 0.3;
        let mut dx = vec![0.0; s.x.len()];
        p.plant_derivatives(&s, &vc, i_src, 0.0, &mut dx);
        let eps = 1e-7;
        let mut sp = s.clone();
        let mut sm = s.clone();
        for (k, d) in dx.iter().enumerate() {
            sp.x[k] += eps * d;
            sm.x[k] -= eps * d;
        }
        let de_dt = (p.stored_energy(&sp) - p.stored_energy(&sm)) / (2.0 * eps);
        let f = p.power_flows(&s, &vc, i_src, 0.0);
        let balance = (f.input - f.dissipated - f.exported) * p.params.omega_base;
        assert!(
            (de_dt - balance).abs() < 1e-6 * p.params.omega_base,
            "{de_dt} vs {balance}"
        );
    }

    #[test]
    fn rl_step_matches_analytic_response() {
        // Converter branch against a stiff PCC voltage: closed-form
        // i(t) = (dv / R_f) (1 - exp(-t R_f omega_b / L_f)).
        let p = plant(&[1]);
        let s = p.params.string;
        let wb = p.params.omega_base;
        let dv = 0.05;
        let f = |i: f64| (dv - s.r_f * i) * wb / s.l_f;
        let dt = 20e-6;
        let mut i = 0.0;
        let mut t = 0.0;
        for _ in 0..20_000 {
            let k1 = f(i);
            let k2 = f(i + 0.5 * dt * k1);
            let k3 = f(i + 0.5 * dt * k2);
            let k4 = f(i + dt * k3);
            i += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += dt;
        }
        let tau = s.l_f / (s.r_f * wb);
        let exact = dv / s.r_f * (1.0 - libm::exp(-t / tau));
        assert!((i - exact).abs() < 1e-9, "{i} vs {exact}");

        // Same decay through the plant equations with the PCC node pinned.
        let mut st = p.initial_state();
        st.set_i_conv(0, SpaceVector::new(1.0, 0.0));
        let mut dx = vec![0.0; st.x.len()];
        p.plant_derivatives(&st, &[SpaceVector::ZERO], 0.0, 0.0, &mut dx);
        assert!((dx[0] + s.r_f * wb / s.l_f).abs() < 1e-12);
    }

    #[test]
    fn dru_examples() {
        let dru = DruModel::default();
        let out = dru_step(&dru, SpaceVector::ONE, 0.0, 0.0);
        assert!(out.conducting);
        assert_eq!(out.v_rect, dru.k_dru);

        let out = dru_step(&dru, SpaceVector::new(0.5, 0.0), 0.0, dru.k_dru * 0.9);
        assert!(!out.conducting);
        assert_eq!(out.i_ac_sink, SpaceVector::ZERO);
        assert_eq!(out.p_ac, 0.0);

        // P_dc = 1 at |v| = 1 with an arbitrary phase.
        let v = SpaceVector::from_angle(0.7);
        // Root of (1 - r i) i = 1.
        let r = dru.r_comm;
        let i_dc = (1.0 - libm::sqrt(1.0 - 4.0 * r)) / (2.0 * r);
        let out = dru_step(&DruModel { k_dru: 1.0, ..dru }, v, i_dc, 0.0);
        assert!((out.p_ac - 1.0).abs() < 1e-12);
        let rel = out.i_ac_sink * v.conj();
        assert!((rel - SpaceVector::new(1.0, -dru.kappa_q)).magnitude() < 1e-12);
    }

    #[test]
    fn dru_ac_power_equals_dc_power() {
        let dru = DruModel::default();
        for &(vm, th, i) in &[(1.05, 0.3, 0.8), (0.97, -2.0, 0.2), (1.2, 1.0, 1.1)] {
            let v = SpaceVector::from_polar(vm, th);
            let out = dru_step(&dru, v, i, 0.9);
            let (p, q) = complex_power(v, out.i_ac_sink);
            assert!((p - out.v_rect * i).abs() < 1e-9);
            assert!((q - dru.kappa_q * p).abs() < 1e-9);
        }
    }

    #[test]
    fn dru_floor_guards_tiny_voltage() {
        let dru = DruModel::default();
        let out = dru_step(&dru, SpaceVector::new(1e-9, 0.0), 0.5, 0.0);
        assert!(out.i_ac_sink.is_finite());
    }

    #[test]
    fn onshore_examples() {
        let cfg = OnshoreSource::default();
        let dt = 200e-6;
        let mut c = OnshoreController::new(cfg, 0.05, crate::controller::OMEGA_BASE_50HZ, dt);
        assert_eq!(c.onshore_step(0.95, 0.95, 0.0, dt), 0.0);

        // Undercharged link, nothing arriving: never injects.
        let mut c = OnshoreController::new(cfg, 0.05, crate::controller::OMEGA_BASE_50HZ, dt);
        for _ in 0..10_000 {
            assert_eq!(c.onshore_step(0.5, 0.95, 0.0, dt), 0.0);
        }
        // Current arriving below the reference charges the link instead of
        // being absorbed.
        assert_eq!(c.onshore_step(0.9, 0.95, 0.3, dt), 0.0);
        // Once the link recovers the output follows immediately.
        assert!(c.onshore_step(0.96, 0.95, 0.0, dt) > 0.0);
    }

    #[test]
    fn onshore_regulates_link_under_load() {
        // Closed loop with C_on alone: C/omega_b dv/dt = i_in - i_src.
        let cfg = OnshoreSource::default();
        let dt = 200e-6;
        let wb = crate::controller::OMEGA_BASE_50HZ;
        let c_on = 0.05;
        let mut c = OnshoreController::new(cfg, c_on, wb, dt);
        let mut v = 0.95;
        let mut i_src = 0.0;
        for _ in 0..25_000 {
            i_src = c.onshore_step(v, 0.95, 0.8, dt);
            v += dt * wb / c_on * (0.8 - i_src);
        }
        assert!((i_src - 0.8).abs() < 1e-6);
        assert!((v - 0.95).abs() < 1e-6);
    }

    #[test]
    fn onshore_gain_gives_requested_bandwidth() {
        let wb = crate::controller::OMEGA_BASE_50HZ;
        let c = OnshoreController::new(OnshoreSource::default(), 0.05, wb, 1e-4);
        let (kp, _) = c.gains();
        assert!((kp * wb / 0.05 - core::f64::consts::TAU * 25.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_params_are_named() {
        let mut params = PlantParams::default();
        params.hvdc.l_dc = -1.0;
        assert_eq!(Plant::new(params, &[1]).unwrap_err(), PlantError("hvdc.l_dc"));
        assert!(Plant::new(PlantParams::default(), &[]).is_err());
    }
}
