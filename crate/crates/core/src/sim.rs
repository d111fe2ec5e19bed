//! Fixed-step hybrid simulation: RK4 for the plant, sampled controllers
//! with one sample of actuation delay, and delayed ramp start signals.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::controller::{
    controller_step, ControlError, ControllerParams, ControllerState, FeedbackConfig, Measurement, ModulatorCommand,
    References, StepOutputs,
};
use crate::plant::{OnshoreController, Plant, PlantState, GRID_SIDE_VOLTAGE, TURBINE_TRAFO_RATING};
use crate::record::{column_names, RecordHeader, RunRecord, RunStatus};
use crate::scenario::ScenarioSpec;
use crate::spacevec::{PerUnitBase, SpaceVector};

/// Any plant state beyond this magnitude (pu) aborts the run.
pub const DIVERGENCE_BOUND: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    pub dt_plant: f64,
    pub ts_control: f64,
    /// Horizon (s); `None` uses the scenario horizon.
    pub t_end: Option<f64>,
    /// Record every n-th control sample.
    pub record_decimation: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_plant: 20e-6,
            ts_control: 200e-6,
            t_end: None,
            record_decimation: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    Config(&'static str),
    Scenario(crate::scenario::ScenarioError),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "invalid simulation config: {m}"),
            Self::Scenario(e) => write!(f, "invalid scenario: {e}"),
        }
    }
}

impl core::error::Error for SimError {}

impl SimConfig {
    pub fn substeps(&self) -> Result<u32, SimError> {
        if !(self.dt_plant.is_finite() && self.dt_plant > 0.0) {
            return Err(SimError::Config("dt_plant must be > 0"));
        }
        if !(self.ts_control.is_finite() && self.ts_control > 0.0) {
            return Err(SimError::Config("ts_control must be > 0"));
        }
        let ratio = self.ts_control / self.dt_plant;
        let n = libm::round(ratio);
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(SimError::Config("ts_control must be an integer multiple of dt_plant"));
        }
        Ok(n as u32)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.substeps()?;
        if let Some(t) = self.t_end {
            if !(t.is_finite() && t > 0.0) {
                return Err(SimError::Config("t_end must be > 0"));
            }
        }
        if self.record_decimation == 0 {
            return Err(SimError::Config("record_decimation must be >= 1"));
        }
        Ok(())
    }
}

/// Exact discrete delay on the control grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayLine<T> {
    queue: VecDeque<T>,
    samples: usize,
}

impl<T: Copy> DelayLine<T> {
    /// Delay of `delay` seconds rounded to whole samples of `ts`; the line
    /// starts filled with `initial`.
    pub fn new(delay: f64, ts: f64, initial: T) -> Self {
        let samples = libm::round(delay / ts).max(0.0) as usize;
        let mut queue = VecDeque::with_capacity(samples + 1);
        queue.extend(core::iter::repeat_n(initial, samples));
        Self { queue, samples }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn apply_delay(&mut self, x: T) -> T {
        if self.samples == 0 {
            return x;
        }
        self.queue.push_back(x);
        self.queue.pop_front().expect("delay line is never empty")
    }
}

/// Locally generated ramp, started when the delayed start signal arrives.
#[derive(Clone, Debug)]
struct RampFollower {
    signal: DelayLine<bool>,
    received_at: Option<f64>,
}

impl RampFollower {
    fn new(delay: f64, ts: f64) -> Self {
        Self {
            signal: DelayLine::new(delay, ts, false),
            received_at: None,
        }
    }

    fn elapsed(&mut self, issued: bool, t: f64) -> f64 {
        if self.signal.apply_delay(issued) && self.received_at.is_none() {
            self.received_at = Some(t);
        }
        self.received_at.map_or(0.0, |t0| t - t0)
    }
}

struct StringRuntime {
    params: ControllerParams,
    feedback: FeedbackConfig,
    state: ControllerState,
    v_ramp: RampFollower,
    p_ramp: RampFollower,
    pending: ModulatorCommand,
    active: ModulatorCommand,
    last: StepOutputs,
}

/// A running simulation. `run` drives it to the end; tests may step it.
pub struct Simulation {
    spec: ScenarioSpec,
    config: SimConfig,
    plant: Plant,
    state: PlantState,
    strings: Vec<StringRuntime>,
    onshore: OnshoreController,
    i_src: f64,
    substeps: u32,
    step: u64,
    n_steps: u64,
    ts: f64,
    e0: f64,
    status: RunStatus,
    scratch: Rk4Scratch,
}

struct Rk4Scratch {
    k: [Vec<f64>; 4],
    tmp: PlantState,
    v_conv: Vec<SpaceVector>,
}

impl Simulation {
    pub fn new(spec: &ScenarioSpec, config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        spec.validate().map_err(SimError::Scenario)?;
        let substeps = config.substeps()?;
        let ts = config.ts_control;
        let plant = Plant::new(spec.plant, &spec.n_wt()).map_err(|e| SimError::Config(e.0))?;
        let state = plant.initial_state();
        let strings = spec
            .strings
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let params = ControllerParams {
                    ts,
                    ..spec.controller_params(k)
                };
                StringRuntime {
                    state: ControllerState::new(&params, 0.0, state.v_pcc(k)),
                    params,
                    feedback: s.feedback,
                    v_ramp: RampFollower::new(s.voltage_ramp_delay, ts),
                    p_ramp: RampFollower::new(s.power_ramp_delay, ts),
                    pending: ModulatorCommand::default(),
                    active: ModulatorCommand::default(),
                    last: StepOutputs::default(),
                }
            })
            .collect();
        let onshore = OnshoreController::new(spec.plant.onshore, spec.plant.hvdc.c_on, spec.plant.omega_base, ts);
        let t_end = config.t_end.unwrap_or(spec.horizon);
        let n_steps = libm::round(t_end / ts) as u64;
        let e0 = plant.stored_energy(&state);
        let n = plant.n_strings();
        Ok(Self {
            spec: spec.clone(),
            config: *config,
            scratch: Rk4Scratch {
                k: core::array::from_fn(|_| vec![0.0; state.x.len()]),
                tmp: state.clone(),
                v_conv: vec![SpaceVector::ZERO; n],
            },
            plant,
            state,
            strings,
            onshore,
            i_src: 0.0,
            substeps,
            step: 0,
            n_steps,
            ts,
            e0,
            status: RunStatus::Converged,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.ts
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn plant_state(&self) -> &PlantState {
        &self.state
    }

    pub fn status(&self) -> RunStatus {
        self.status
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.n_steps || matches!(self.status, RunStatus::Diverged { .. })
    }

    /// Outputs of the most recent controller sample of string `k`.
    pub fn outputs(&self, k: usize) -> &StepOutputs {
        &self.strings[k].last
    }

    pub fn controller_state(&self, k: usize) -> &ControllerState {
        &self.strings[k].state
    }

    /// `E(t) - E(0) - integral(P_in - P_loss - P_export)` in pu * s.
    pub fn energy_residual(&self) -> f64 {
        let (inp, diss, exp) = self.state.audit();
        (self.plant.stored_energy(&self.state) - self.e0 - (inp - diss - exp)) / self.plant.params.omega_base
    }

    /// References of string `k` at time `t` for the current sample.
    fn references(spec: &ScenarioSpec, rt: &mut StringRuntime, t: f64) -> References {
        let prof = &spec.profiles;
        let v_elapsed = rt.v_ramp.elapsed(t >= prof.v_ext.start - 1e-12, t);
        let p_elapsed = rt.p_ramp.elapsed(t >= prof.p_ref.start - 1e-12, t);
        References {
            p_ref: prof.p_ref.value_after(p_elapsed),
            q_ref: prof.q_ref,
            v_ext: prof.v_ext.value_after(v_elapsed),
        }
    }

    /// Samples every controller from the same plant snapshot, then advances
    /// the plant by one control period. Returns the sample time.
    pub fn step_control(&mut self) -> Result<f64, ControlError> {
        let t = self.time();
        for (k, rt) in self.strings.iter_mut().enumerate() {
            let refs = Self::references(&self.spec, rt, t);
            let meas = Measurement {
                v_pcc_s: self.state.v_pcc(k),
                i_s: self.state.i_conv(k),
            };
            let (cmd, out) = controller_step(&mut rt.state, refs, meas, &rt.params, rt.feedback)?;
            rt.pending = cmd;
            rt.last = out;
        }
        if self.plant.params.stiff_bus.is_none() {
            self.i_src = self.onshore.onshore_step(
                self.state.v_on(),
                self.plant.params.onshore.v_on_ref,
                self.state.i_cable(),
                self.ts,
            );
        }
        self.advance_plant(t);
        for rt in &mut self.strings {
            rt.active = rt.pending;
        }
        self.step += 1;
        Ok(t)
    }

    fn advance_plant(&mut self, t0: f64) {
        let h = self.config.dt_plant;
        for j in 0..self.substeps {
            let t = t0 + f64::from(j) * h;
            self.rk4(t, t0, h);
            self.plant.clamp_state(&mut self.state);
        }
    }

    fn rk4(&mut self, t: f64, t_act: f64, h: f64) {
        let Rk4Scratch { k, tmp, v_conv } = &mut self.scratch;
        let stages = [(0.0, 0.0), (0.5, 0.5), (0.5, 0.5), (1.0, 1.0)];
        for (s, &(c, a)) in stages.iter().enumerate() {
            let ts = t + c * h;
            for (v, rt) in v_conv.iter_mut().zip(&self.strings) {
                *v = rt.active.voltage_after(ts - t_act);
            }
            if s == 0 {
                tmp.x.copy_from_slice(&self.state.x);
            } else {
                let (prev, _) = k.split_at(s);
                let kp = &prev[s - 1];
                for ((x, &x0), &d) in tmp.x.iter_mut().zip(&self.state.x).zip(kp.iter()) {
                    *x = x0 + a * h * d;
                }
            }
            self.plant.plant_derivatives(tmp, v_conv, self.i_src, ts, &mut k[s]);
        }
        for (i, x) in self.state.x.iter_mut().enumerate() {
            *x += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
    }

    fn check_divergence(&mut self, t: f64) -> bool {
        if !self.state.is_finite() || self.state.max_abs() > DIVERGENCE_BOUND {
            self.status = RunStatus::Diverged { t };
            return true;
        }
        false
    }

    fn record_row(&self, t: f64, row: &mut Vec<f64>) {
        row.clear();
        row.push(t);
        for rt in &self.strings {
            let o = &rt.last;
            row.extend_from_slice(&[
                o.v_pcc_mag,
                o.p,
                o.q,
                o.p_virt,
                o.q_virt,
                o.i_mag,
                o.i_ref0.magnitude(),
                o.omega,
                o.v_ref,
                o.phi_rel,
            ]);
        }
        row.extend_from_slice(&[self.state.v_on(), self.state.v_dc_off(), self.state.i_dc()]);
    }

    fn header(&self) -> RecordHeader {
        let p = &self.plant.params;
        let n_wt = self.spec.n_wt();
        let total: u32 = n_wt.iter().sum();
        let base = |n| {
            PerUnitBase::aggregated(n, TURBINE_TRAFO_RATING, GRID_SIDE_VOLTAGE, p.omega_base).expect("positive base")
        };
        RecordHeader {
            version: String::from(env!("CARGO_PKG_VERSION")),
            scenario: self.spec.clone(),
            config: self.config,
            system_base: base(total),
            string_bases: n_wt.iter().map(|&n| base(n)).collect(),
            inertia_m: self.strings.iter().map(|s| s.params.m).collect(),
            status: self.status,
        }
    }

    /// Runs to the horizon (or divergence) and returns the record.
    pub fn run_to_end(mut self) -> RunRecord {
        let decim = u64::from(self.config.record_decimation);
        let mut record = RunRecord::new(self.header(), column_names(self.strings.len()));
        let mut row = Vec::with_capacity(record.columns.len());
        while !self.is_finished() {
            let k = self.step;
            let t = self.time();
            match self.step_control() {
                Ok(_) => {
                    if k.is_multiple_of(decim) {
                        self.record_row(t, &mut row);
                        record.push_row(&row);
                    }
                    if self.check_divergence(t + self.ts) {
                        break;
                    }
                }
                Err(ControlError::NonFinite) => {
                    self.status = RunStatus::Diverged { t };
                    break;
                }
            }
        }
        record.header.status = self.status;
        record
    }
}

/// Simulates `scenario` under `config`. Divergence is reported through the
/// record status, not as an error.
pub fn run(scenario: &ScenarioSpec, config: &SimConfig) -> Result<RunRecord, SimError> {
    Ok(Simulation::new(scenario, config)?.run_to_end())
}
