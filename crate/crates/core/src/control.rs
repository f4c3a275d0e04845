//! Rule-based control: a PI driver turning target speed into a torque
//! request, and a controller arbitrating that request into inverter
//! commands under motor, battery and thermal limits.

use std::sync::Arc;

use crate::plant::battery::linear_derate;
use crate::plant::inverter::{dc_side, inverter_efficiency, InverterParams};
use crate::plant::motor::{torque_capability, MotorParams};
use crate::plant::{params_err, PlantError};
use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriverParams {
    pub kp: f64,
    pub ki: f64,
    pub output_clamp: f64,
    pub integrator_clamp: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams { kp: 100.0, ki: 20.0, output_clamp: 250.0, integrator_clamp: 250.0 }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.kp >= 0.0 && self.ki >= 0.0) {
            return Err(params_err("driver gains must be non-negative"));
        }
        if !(self.output_clamp > 0.0 && self.integrator_clamp > 0.0) {
            return Err(params_err("driver clamps must be positive"));
        }
        Ok(())
    }
}

/// PI law. The integrator holds its value on any step where the output
/// saturates.
pub fn driver_step(params: &DriverParams, v_target: f64, v_actual: f64, integrator: f64, dt: f64) -> (f64, f64) {
    let e = v_target - v_actual;
    let c = params.output_clamp;
    let advanced = (integrator + params.ki * e * dt).clamp(-params.integrator_clamp, params.integrator_clamp);
    let u = params.kp * e + advanced;
    if u.abs() > c {
        ((params.kp * e + integrator).clamp(-c, c), integrator)
    } else {
        (u, advanced)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerateBand {
    /// Thermal node whose temperature this band reads.
    pub node: String,
    pub warn_k: f64,
    pub cutoff_k: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerRules {
    pub bands: Vec<DerateBand>,
    pub regen_enabled: bool,
    pub regen_cap: f64,
    pub max_mod_index: f64,
    /// Constant DC-side load counted against the battery power budget, W.
    pub accessory_w: f64,
}

impl Default for ControllerRules {
    fn default() -> Self {
        let band = |node: &str, warn_k, cutoff_k| DerateBand { node: node.into(), warn_k, cutoff_k };
        ControllerRules {
            bands: vec![band("battery", 318.15, 333.15), band("inverter", 358.15, 378.15), band("motor", 393.15, 423.15)],
            regen_enabled: true,
            regen_cap: 150.0,
            max_mod_index: 1.0,
            accessory_w: 0.0,
        }
    }
}

impl ControllerRules {
    pub fn validate(&self) -> Result<(), PlantError> {
        for b in &self.bands {
            if !(b.warn_k < b.cutoff_k) {
                return Err(params_err(format!("derating band `{}` needs warn < cutoff", b.node)));
            }
        }
        if !(self.regen_cap >= 0.0) {
            return Err(params_err("regen cap must be non-negative"));
        }
        if !(self.max_mod_index > 0.0) {
            return Err(params_err("max modulation index must be positive"));
        }
        if !(self.accessory_w >= 0.0) {
            return Err(params_err("accessory load must be non-negative"));
        }
        Ok(())
    }
}

/// Plant data the controller reads but never mutates.
#[derive(Clone, Debug)]
pub struct ControlPlant {
    pub motor: Arc<MotorParams>,
    pub inverter: Arc<InverterParams>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feedback<'a> {
    pub omega: f64,
    pub v_dc: f64,
    pub max_discharge_a: f64,
    pub max_charge_a: f64,
    /// One temperature per derating band, in band order.
    pub temps: &'a [f64],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Command {
    pub t_cmd: f64,
    pub mod_index: f64,
    pub elec_freq: f64,
    pub derate: f64,
}

/// Battery-side power for a torque at `omega`, using the motor loss map and
/// the inverter efficiency map, plus the accessory load.
pub fn implied_dc_power(plant: &ControlPlant, rules: &ControllerRules, torque: f64, omega: f64, v_dc: f64) -> f64 {
    let p_ac = torque * omega + plant.motor.loss(omega, torque);
    let eff = inverter_efficiency(&plant.inverter, omega, torque);
    let p = match dc_side(p_ac, eff, v_dc.max(f64::MIN_POSITIVE)) {
        Ok((p, _)) => p,
        Err(_) => p_ac,
    };
    p + rules.accessory_w
}

fn within_budget(p: f64, fb: &Feedback) -> bool {
    p <= fb.max_discharge_a * fb.v_dc && p >= -fb.max_charge_a * fb.v_dc
}

/// Largest torque magnitude in direction `sign` up to which the DC power
/// stays within the battery budget, searched on `[0, cap]`. The power curve
/// need not be monotone (losses dominate at low speed), so a coarse scan
/// finds the first infeasible point before bisecting.
fn battery_bound(plant: &ControlPlant, rules: &ControllerRules, sign: f64, cap: f64, fb: &Feedback) -> f64 {
    const SCAN: usize = 16;
    let ok = |x: f64| within_budget(implied_dc_power(plant, rules, sign * x, fb.omega, fb.v_dc), fb);
    if !ok(0.0) {
        return 0.0;
    }
    let Some(k) = (1..=SCAN).find(|&k| !ok(cap * k as f64 / SCAN as f64)) else {
        return cap;
    };
    let (mut lo, mut hi) = (cap * (k - 1) as f64 / SCAN as f64, cap * k as f64 / SCAN as f64);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Thermal derating factor: the minimum linear derate over all bands.
pub fn derate_factor(rules: &ControllerRules, temps: &[f64]) -> f64 {
    rules.bands.iter().zip(temps).map(|(b, &t)| linear_derate(t, b.warn_k, b.cutoff_k)).fold(1.0, f64::min)
}

/// Clamps the request by, in order: motor capability at `omega` with the
/// full inverter voltage; the battery power budget; thermal derating of
/// the capability; the regeneration cap. Every rule is a clamp to a bound
/// that depends only on the request's sign, so the result is monotone in
/// the request and arbitrating it again changes nothing.
pub fn arbitrate(plant: &ControlPlant, rules: &ControllerRules, torque_request: f64, fb: &Feedback) -> Command {
    let full_v = 0.5 * fb.v_dc * rules.max_mod_index;
    let cap = torque_capability(&plant.motor, fb.omega, full_v);
    let derate = derate_factor(rules, fb.temps);
    let sign = if torque_request < 0.0 { -1.0 } else { 1.0 };
    let mut bound = cap;
    bound = bound.min(battery_bound(plant, rules, sign, cap, fb));
    bound = bound.min(derate * cap);
    if sign * fb.omega < 0.0 {
        bound = if rules.regen_enabled && fb.max_charge_a > 0.0 { bound.min(rules.regen_cap) } else { 0.0 };
    }
    let t_cmd = sign * torque_request.abs().min(bound);
    let mod_index = if cap > 0.0 { (t_cmd.abs() / cap * rules.max_mod_index).min(rules.max_mod_index) } else { 0.0 };
    Command { t_cmd, mod_index, elec_freq: plant.motor.elec_freq(fb.omega), derate }
}

/// PI driver as a component: `v_target`, `v_actual` in, `torque_request` out.
pub struct DriverComponent {
    id: String,
    params: DriverParams,
    integrator: f64,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl DriverComponent {
    pub fn new(id: impl Into<String>, params: DriverParams) -> Self {
        DriverComponent {
            id: id.into(),
            params,
            integrator: 0.0,
            inputs: vec![PortSpec::input("v_target", Quantity::Velocity), PortSpec::input("v_actual", Quantity::Velocity)],
            outputs: vec![PortSpec::output("torque_request", Quantity::Torque)],
        }
    }

    pub fn integrator(&self) -> f64 {
        self.integrator
    }
}

impl Component for DriverComponent {
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
        vec![0.0]
    }

    fn step(&mut self, ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let (u, i) = driver_step(&self.params, inputs[0], inputs[1], self.integrator, ctx.dt);
        self.integrator = i;
        out[0] = u;
        Ok(())
    }
}

/// Arbitration as a component. Inputs: `torque_request`, `omega`, `v_dc`,
/// `max_discharge_a`, `max_charge_a`, then `temp_<node>` per derating band.
/// Outputs: `t_cmd`, `mod_index`, `elec_freq`, `derate`.
pub struct ControllerComponent {
    id: String,
    plant: ControlPlant,
    rules: ControllerRules,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl ControllerComponent {
    pub fn new(id: impl Into<String>, plant: ControlPlant, rules: ControllerRules) -> Self {
        let mut inputs = vec![
            PortSpec::input("torque_request", Quantity::Torque),
            PortSpec::input("omega", Quantity::AngularSpeed),
            PortSpec::input("v_dc", Quantity::Voltage),
            PortSpec::input("max_discharge_a", Quantity::Current),
            PortSpec::input("max_charge_a", Quantity::Current),
        ];
        inputs.extend(rules.bands.iter().map(|b| PortSpec::input(format!("temp_{}", b.node), Quantity::Temperature)));
        ControllerComponent {
            id: id.into(),
            plant,
            rules,
            inputs,
            outputs: vec![
                PortSpec::output("t_cmd", Quantity::Torque),
                PortSpec::output("mod_index", Quantity::Fraction),
                PortSpec::output("elec_freq", Quantity::Frequency),
                PortSpec::output("derate", Quantity::Fraction),
            ],
        }
    }
}

impl Component for ControllerComponent {
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
        vec![0.0, 0.0, 0.0, 1.0]
    }

    fn step(&mut self, _ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let fb = Feedback { omega: inputs[1], v_dc: inputs[2], max_discharge_a: inputs[3], max_charge_a: inputs[4], temps: &inputs[5..] };
        let c = arbitrate(&self.plant, &self.rules, inputs[0], &fb);
        out.copy_from_slice(&[c.t_cmd, c.mod_index, c.elec_freq, c.derate]);
        Ok(())
    }
}
