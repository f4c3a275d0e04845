//! Map-based traction motor: torque-speed envelope, first-order torque lag,
//! rotor inertia and a (speed, torque) loss map. AC current follows from
//! power balance at unity power factor.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{params_err, PlantError};
use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};
use crate::surrogate::{bind_core, Axis, BoundModel, GridTable, ModelError, SurrogateModel};

const SPEED_EPS: f64 = 1e-6;
const VOLTAGE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MotorParams {
    pub t_max: f64,
    pub base_speed: f64,
    pub p_max: f64,
    /// 2-D table over (`speed` rad/s, `torque` N*m) magnitudes, in watts.
    pub loss_map: GridTable,
    pub inertia: f64,
    pub pole_pairs: u32,
    pub tau: f64,
    /// Phase amplitude needed for full torque at base speed.
    pub rated_v_amp: f64,
    /// Allowed |elec_freq - expected| before the mismatch flag is raised, Hz.
    pub freq_tolerance_hz: f64,
}

/// Synthetic loss surface for the default map: copper loss quadratic in
/// torque plus speed-proportional iron and friction loss.
pub fn default_loss(speed: f64, torque: f64) -> f64 {
    0.04 * torque * torque + 0.4 * speed.abs()
}

impl Default for MotorParams {
    fn default() -> Self {
        let map = GridTable::from_fn(
            vec![Axis::linspace("speed", "rad/s", 0.0, 1000.0, 21), Axis::linspace("torque", "N*m", 0.0, 250.0, 21)],
            |p| default_loss(p[0], p[1]),
        )
        .expect("default loss map");
        MotorParams {
            t_max: 250.0,
            base_speed: 400.0,
            p_max: 100_000.0,
            loss_map: map,
            inertia: 0.05,
            pole_pairs: 4,
            tau: 0.02,
            rated_v_amp: 200.0,
            freq_tolerance_hz: 1.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        for (name, v) in [
            ("t_max", self.t_max),
            ("base_speed", self.base_speed),
            ("p_max", self.p_max),
            ("inertia", self.inertia),
            ("tau", self.tau),
            ("rated_v_amp", self.rated_v_amp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(params_err(format!("motor {name} must be positive, got {v}")));
            }
        }
        if self.pole_pairs == 0 {
            return Err(params_err("motor pole_pairs must be at least 1"));
        }
        let p = self.t_max * self.base_speed;
        if (self.p_max - p).abs() > 1e-9 * p {
            return Err(params_err(format!("motor p_max {} must equal t_max * base_speed = {p}", self.p_max)));
        }
        if self.loss_map.dims() != 2 {
            return Err(params_err("loss map must be two-dimensional over (speed, torque)"));
        }
        // Bilinear interpolation of non-negative nodes is non-negative.
        if self.loss_map.values().iter().any(|v| !(*v >= 0.0)) {
            return Err(params_err("loss map values must be non-negative"));
        }
        if self.loss_map.eval(&[0.0, 0.0]) != 0.0 {
            return Err(params_err("loss map must be zero at standstill and zero torque"));
        }
        Ok(())
    }

    /// The torque lag is a convex blend only while `dt <= tau`.
    pub fn check_dt(&self, dt: f64) -> Result<(), PlantError> {
        if dt > self.tau {
            return Err(params_err(format!("dt {dt} exceeds motor torque time constant {}", self.tau)));
        }
        Ok(())
    }

    pub fn loss(&self, speed: f64, torque: f64) -> f64 {
        self.loss_map.eval(&[speed.abs(), torque.abs()])
    }

    /// Electrical frequency for a mechanical speed.
    pub fn elec_freq(&self, omega: f64) -> f64 {
        self.pole_pairs as f64 * omega.abs() / (2.0 * PI)
    }

    pub fn rated_v_amp_at(&self, omega: f64) -> f64 {
        self.rated_v_amp * (omega.abs() / self.base_speed).min(1.0)
    }
}

/// Torque-speed envelope without any voltage limit.
pub fn torque_envelope(params: &MotorParams, omega: f64) -> f64 {
    params.t_max.min(params.p_max / omega.abs().max(SPEED_EPS))
}

/// Available torque magnitude at `omega` with phase amplitude `v_amp`.
pub fn torque_capability(params: &MotorParams, omega: f64, v_amp: f64) -> f64 {
    if !(v_amp > 0.0) {
        return 0.0;
    }
    let rated = params.rated_v_amp_at(omega);
    let factor = if v_amp >= rated { 1.0 } else { v_amp / rated };
    torque_envelope(params, omega) * factor
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MotorState {
    pub omega: f64,
    pub t_actual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotorStep {
    pub state: MotorState,
    pub t_shaft: f64,
    pub omega: f64,
    pub p_ac: f64,
    pub i_amp: f64,
    pub heat: f64,
    pub freq_mismatch: bool,
}

/// One explicit step. `heat` comes from `loss` so that a surrogate loss
/// model can stand in for the map.
pub fn step_motor_with(
    params: &MotorParams,
    state: &MotorState,
    inputs: MotorInputs,
    dt: f64,
    loss: impl Fn(f64, f64) -> f64,
) -> Result<MotorStep, PlantError> {
    let MotorInputs { t_cmd, v_amp, elec_freq, t_load } = inputs;
    for (name, v) in [("t_cmd", t_cmd), ("v_amp", v_amp), ("elec_freq", elec_freq), ("t_load", t_load)] {
        if !v.is_finite() {
            return Err(PlantError::NonFinite(name));
        }
    }
    let cap = torque_capability(params, state.omega, v_amp);
    let target = t_cmd.clamp(-cap, cap);
    let lagged = state.t_actual + (dt / params.tau) * (target - state.t_actual);
    let t_actual = lagged.clamp(-cap, cap);
    let omega = state.omega + dt * (t_actual - t_load) / params.inertia;
    let heat = loss(state.omega, t_actual);
    let p_ac = t_actual * omega + heat;
    let i_amp = if v_amp > VOLTAGE_EPS { 2.0 * p_ac / (3.0 * v_amp) } else { 0.0 };
    let expected = params.elec_freq(state.omega);
    let freq_mismatch = (elec_freq - expected).abs() > params.freq_tolerance_hz;
    Ok(MotorStep { state: MotorState { omega, t_actual }, t_shaft: t_actual, omega, p_ac, i_amp, heat, freq_mismatch })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotorInputs {
    pub t_cmd: f64,
    pub v_amp: f64,
    pub elec_freq: f64,
    pub t_load: f64,
}

pub fn step_motor(params: &MotorParams, state: &MotorState, inputs: MotorInputs, dt: f64) -> Result<MotorStep, PlantError> {
    step_motor_with(params, state, inputs, dt, |w, t| params.loss(w, t))
}

/// Loss source: the physics map or a surrogate of (speed, torque) -> loss_w.
#[derive(Clone, Debug)]
pub enum LossCore {
    Physics,
    Surrogate(BoundModel),
}

impl LossCore {
    pub fn input_ports() -> Vec<PortSpec> {
        vec![PortSpec::input("speed", Quantity::AngularSpeed), PortSpec::input("torque", Quantity::Torque)]
    }

    pub fn output_ports() -> Vec<PortSpec> {
        vec![PortSpec::output("loss_w", Quantity::Power)]
    }

    pub fn surrogate(model: Arc<SurrogateModel>) -> Result<Self, ModelError> {
        Ok(LossCore::Surrogate(bind_core(model, &Self::input_ports(), &Self::output_ports())?))
    }

    pub fn loss(&self, params: &MotorParams, speed: f64, torque: f64) -> f64 {
        match self {
            LossCore::Physics => params.loss(speed, torque),
            LossCore::Surrogate(m) => m.eval1(&[speed.abs(), torque.abs()]).max(0.0),
        }
    }
}

/// Motor plant as a scheduled component.
///
/// Inputs `t_cmd`, `v_amp`, `elec_freq`, `t_load`. Outputs shaft torque,
/// speed, AC power and current amplitude, loss heat and a frequency
/// mismatch flag.
pub struct MotorComponent {
    id: String,
    params: Arc<MotorParams>,
    core: LossCore,
    state: MotorState,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl MotorComponent {
    pub fn new(id: impl Into<String>, params: Arc<MotorParams>, core: LossCore, state: MotorState) -> Self {
        MotorComponent {
            id: id.into(),
            params,
            core,
            state,
            inputs: vec![
                PortSpec::input("t_cmd", Quantity::Torque),
                PortSpec::input("v_amp", Quantity::Voltage),
                PortSpec::input("elec_freq", Quantity::Frequency),
                PortSpec::input("t_load", Quantity::Torque),
            ],
            outputs: vec![
                PortSpec::output("t_shaft", Quantity::Torque),
                PortSpec::output("omega", Quantity::AngularSpeed),
                PortSpec::output("p_ac", Quantity::Power),
                PortSpec::output("i_amp", Quantity::Current),
                PortSpec::output("heat", Quantity::Power),
                PortSpec::output("freq_mismatch", Quantity::Fraction),
            ],
        }
    }

    pub fn state(&self) -> &MotorState {
        &self.state
    }
}

impl Component for MotorComponent {
    fn id(&self) -> &str {
        &self.id
    }

    fn inputs(&self) -> &[PortSpec] {
        &self.inputs
    }

    fn outputs(&self) -> &[PortSpec] {
        &self.outputs
    }

    fn initial_outputs(&self) -> Vec<f64> {
        let s = self.state;
        let heat = self.core.loss(&self.params, s.omega, s.t_actual);
        vec![s.t_actual, s.omega, s.t_actual * s.omega + heat, 0.0, heat, 0.0]
    }

    fn step(&mut self, ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let inp = MotorInputs { t_cmd: inputs[0], v_amp: inputs[1], elec_freq: inputs[2], t_load: inputs[3] };
        let (p, core) = (&*self.params, &self.core);
        let r = step_motor_with(p, &self.state, inp, ctx.dt, |w, t| core.loss(p, w, t)).map_err(|e| StepError::new(e.to_string()))?;
        self.state = r.state;
        out.copy_from_slice(&[r.t_shaft, r.omega, r.p_ac, r.i_amp, r.heat, if r.freq_mismatch { 1.0 } else { 0.0 }]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lossless() -> MotorParams {
        MotorParams {
            loss_map: GridTable::new(
                vec![Axis::new("speed", "rad/s", vec![0.0, 1000.0]), Axis::new("torque", "N*m", vec![0.0, 250.0])],
                vec![0.0; 4],
            )
            .unwrap(),
            ..MotorParams::default()
        }
    }

    fn inputs(t_cmd: f64, v_amp: f64, t_load: f64) -> MotorInputs {
        MotorInputs { t_cmd, v_amp, elec_freq: 0.0, t_load }
    }

    #[test]
    fn capability_regions() {
        let p = MotorParams::default();
        p.validate().unwrap();
        assert_eq!(torque_capability(&p, p.base_speed / 2.0, 400.0), p.t_max);
        assert!((torque_capability(&p, 2.0 * p.base_speed, 400.0) - p.t_max / 2.0).abs() < 1e-9);
        assert!((torque_capability(&p, -2.0 * p.base_speed, 400.0) - p.t_max / 2.0).abs() < 1e-9);
        assert_eq!(torque_capability(&p, 100.0, 0.0), 0.0);
        assert!((torque_capability(&p, 800.0, 100.0) - 62.5).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_inconsistent_power() {
        let p = MotorParams { p_max: 90_000.0, ..MotorParams::default() };
        assert!(p.validate().is_err());
        assert!(MotorParams::default().check_dt(0.03).is_err());
    }

    #[test]
    fn power_balance_example() {
        // Zero inertia effect: huge inertia keeps omega at 100 rad/s.
        let p = MotorParams { inertia: 1e30, ..lossless() };
        let s = MotorState { omega: 100.0, t_actual: 100.0 };
        let r = step_motor(&p, &s, inputs(100.0, 200.0, 0.0), 0.01).unwrap();
        assert!((r.p_ac - 10_000.0).abs() < 1e-6);
        assert!((r.i_amp - 33.333_333_333_333_336).abs() < 1e-6);
    }

    #[test]
    fn standstill() {
        let p = MotorParams::default();
        let r = step_motor(&p, &MotorState::default(), inputs(0.0, 0.0, 0.0), 0.01).unwrap();
        assert_eq!((r.p_ac, r.i_amp, r.heat), (0.0, 0.0, 0.0));
    }

    #[test]
    fn command_clamped_to_capability() {
        let p = MotorParams { tau: 0.01, ..MotorParams::default() };
        let r = step_motor(&p, &MotorState::default(), inputs(300.0, 400.0, 0.0), 0.01).unwrap();
        assert_eq!(r.t_shaft, 250.0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = MotorParams::default();
        let e = step_motor(&p, &MotorState::default(), inputs(f64::NAN, 0.0, 0.0), 0.01).unwrap_err();
        assert_eq!(e, PlantError::NonFinite("t_cmd"));
    }

    #[test]
    fn frequency_mismatch_flag() {
        let p = MotorParams::default();
        let s = MotorState { omega: 100.0, t_actual: 0.0 };
        let ok = MotorInputs { elec_freq: p.elec_freq(100.0), ..inputs(0.0, 200.0, 0.0) };
        assert!(!step_motor(&p, &s, ok, 0.01).unwrap().freq_mismatch);
        let bad = MotorInputs { elec_freq: 10.0, ..ok };
        assert!(step_motor(&p, &s, bad, 0.01).unwrap().freq_mismatch);
    }

    proptest! {
        #[test]
        fn power_balance_and_heat(omega in -900.0f64..900.0, t0 in -250.0f64..250.0, cmd in -400.0f64..400.0,
                                  v in 0.0f64..250.0, load in -300.0f64..300.0) {
            let p = MotorParams::default();
            let s = MotorState { omega, t_actual: t0.clamp(-torque_envelope(&p, omega), torque_envelope(&p, omega)) };
            let r = step_motor(&p, &s, inputs(cmd, v, load), 0.01).unwrap();
            prop_assert!(r.heat >= 0.0);
            prop_assert!((r.p_ac - r.heat - r.t_shaft * r.omega).abs() <= 1e-9 * r.p_ac.abs().max(1.0));
            prop_assert!(r.t_shaft.abs() <= torque_capability(&p, omega, v) + 1e-12);
        }

        #[test]
        fn free_rotor_keeps_speed(omega in -900.0f64..900.0, steps in 1usize..200) {
            let p = MotorParams::default();
            let mut s = MotorState { omega, t_actual: 0.0 };
            for _ in 0..steps {
                s = step_motor(&p, &s, inputs(0.0, 200.0, 0.0), 0.01).unwrap().state;
            }
            prop_assert_eq!(s.omega, omega);
        }

        #[test]
        fn regeneration_returns_power(omega in 50.0f64..900.0, t in 5.0f64..250.0) {
            let p = MotorParams { inertia: 1e30, ..MotorParams::default() };
            let t = -t.min(torque_envelope(&p, omega));
            let s = MotorState { omega, t_actual: t };
            let r = step_motor(&p, &s, inputs(t, 400.0, 0.0), 0.01).unwrap();
            prop_assert!(r.t_shaft * r.omega < 0.0);
            if r.heat < (r.t_shaft * r.omega).abs() {
                prop_assert!(r.p_ac < 0.0);
            }
        }
    }
}
