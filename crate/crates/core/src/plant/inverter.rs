//! Average-value inverter: fundamental AC amplitude from the DC link, and
//! the DC-side power balance through a (speed, torque) efficiency map.

use std::sync::Arc;

use super::{params_err, PlantError};
use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};
use crate::surrogate::{bind_core, Axis, BoundModel, GridTable, ModelError, SurrogateModel};

#[derive(Clone, Debug, PartialEq)]
pub struct InverterParams {
    /// 2-D table over (`speed` rad/s, `torque` N*m), magnitudes.
    pub efficiency_map: GridTable,
    pub max_modulation_index: f64,
    pub min_efficiency: f64,
}

/// Synthetic efficiency surface for the default map: poor at light load,
/// slowly falling with speed.
pub fn default_efficiency(speed: f64, torque: f64) -> f64 {
    0.97 - 0.10 * (-torque.abs() / 20.0).exp() - 2e-5 * speed.abs()
}

impl Default for InverterParams {
    fn default() -> Self {
        let map = GridTable::from_fn(
            vec![Axis::linspace("speed", "rad/s", 0.0, 1000.0, 11), Axis::linspace("torque", "N*m", 0.0, 250.0, 11)],
            |p| default_efficiency(p[0], p[1]),
        )
        .expect("default efficiency map");
        InverterParams { efficiency_map: map, max_modulation_index: 1.0, min_efficiency: 0.5 }
    }
}

impl InverterParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if self.efficiency_map.dims() != 2 {
            return Err(params_err("efficiency map must be two-dimensional over (speed, torque)"));
        }
        if self.efficiency_map.values().iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(params_err("efficiency map values must lie in (0, 1]"));
        }
        if !(self.max_modulation_index > 0.0) {
            return Err(params_err("max modulation index must be positive"));
        }
        if !(self.min_efficiency > 0.0 && self.min_efficiency <= 1.0) {
            return Err(params_err("efficiency floor must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Phase amplitude `m * v_dc / 2` (sinusoidal PWM); frequency passes through.
pub fn synthesize_ac(v_dc: f64, mod_index: f64, elec_freq: f64, max_mod: f64) -> Result<(f64, f64), PlantError> {
    if !(mod_index >= 0.0 && mod_index <= max_mod) {
        return Err(PlantError::Domain { quantity: "modulation index", value: mod_index, min: 0.0, max: max_mod });
    }
    if !(v_dc > 0.0) {
        return Err(PlantError::Domain { quantity: "v_dc", value: v_dc, min: 0.0, max: f64::INFINITY });
    }
    Ok((mod_index * v_dc / 2.0, elec_freq))
}

/// Map value at (|speed|, |torque|), clamped to the grid and floored.
pub fn inverter_efficiency(params: &InverterParams, speed: f64, torque: f64) -> f64 {
    params.efficiency_map.eval(&[speed.abs(), torque.abs()]).max(params.min_efficiency)
}

/// DC power and current for an AC power demand. Losses always dissipate:
/// motoring divides by the efficiency, regeneration multiplies.
pub fn dc_side(p_ac: f64, eff: f64, v_dc: f64) -> Result<(f64, f64), PlantError> {
    if !(eff > 0.0 && eff <= 1.0) {
        return Err(PlantError::Domain { quantity: "efficiency", value: eff, min: 0.0, max: 1.0 });
    }
    if !(v_dc > 0.0) {
        return Err(PlantError::Domain { quantity: "v_dc", value: v_dc, min: 0.0, max: f64::INFINITY });
    }
    let p_dc = if p_ac >= 0.0 { p_ac / eff } else { p_ac * eff };
    Ok((p_dc, p_dc / v_dc))
}

/// Efficiency source: the physics map or a surrogate of (speed, torque).
#[derive(Clone, Debug)]
pub enum EfficiencyCore {
    Physics(Arc<InverterParams>),
    Surrogate { model: BoundModel, floor: f64 },
}

impl EfficiencyCore {
    pub fn input_ports() -> Vec<PortSpec> {
        vec![PortSpec::input("speed", Quantity::AngularSpeed), PortSpec::input("torque", Quantity::Torque)]
    }

    pub fn output_ports() -> Vec<PortSpec> {
        vec![PortSpec::output("efficiency", Quantity::Fraction)]
    }

    pub fn surrogate(model: Arc<SurrogateModel>, floor: f64) -> Result<Self, ModelError> {
        Ok(EfficiencyCore::Surrogate { model: bind_core(model, &Self::input_ports(), &Self::output_ports())?, floor })
    }

    pub fn efficiency(&self, speed: f64, torque: f64) -> f64 {
        match self {
            EfficiencyCore::Physics(p) => inverter_efficiency(p, speed, torque),
            EfficiencyCore::Surrogate { model, floor } => model.eval1(&[speed.abs(), torque.abs()]).clamp(*floor, 1.0),
        }
    }
}

/// AC synthesis block: (mod_index, elec_freq, v_dc) -> (v_amp, freq).
pub struct InverterComponent {
    id: String,
    max_mod: f64,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl InverterComponent {
    pub fn new(id: impl Into<String>, max_mod: f64) -> Self {
        InverterComponent {
            id: id.into(),
            max_mod,
            inputs: vec![
                PortSpec::input("mod_index", Quantity::Fraction),
                PortSpec::input("elec_freq", Quantity::Frequency),
                PortSpec::input("v_dc", Quantity::Voltage),
            ],
            outputs: vec![PortSpec::output("v_amp", Quantity::Voltage), PortSpec::output("freq", Quantity::Frequency)],
        }
    }
}

impl Component for InverterComponent {
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
        vec![0.0, 0.0]
    }

    fn step(&mut self, _ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let (v_amp, freq) = synthesize_ac(inputs[2], inputs[0], inputs[1], self.max_mod).map_err(|e| StepError::new(e.to_string()))?;
        out[0] = v_amp;
        out[1] = freq;
        Ok(())
    }
}

/// DC-link block: turns the motor's AC power at its operating point into
/// DC power and battery current, and reports the inverter loss as heat.
/// A constant accessory draw is added on the DC side.
pub struct DcLinkComponent {
    id: String,
    core: EfficiencyCore,
    accessory_w: f64,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl DcLinkComponent {
    pub fn new(id: impl Into<String>, core: EfficiencyCore, accessory_w: f64) -> Self {
        DcLinkComponent {
            id: id.into(),
            core,
            accessory_w,
            inputs: vec![
                PortSpec::input("p_ac", Quantity::Power),
                PortSpec::input("omega", Quantity::AngularSpeed),
                PortSpec::input("torque", Quantity::Torque),
                PortSpec::input("v_dc", Quantity::Voltage),
            ],
            outputs: vec![
                PortSpec::output("p_dc", Quantity::Power),
                PortSpec::output("i_dc", Quantity::Current),
                PortSpec::output("loss", Quantity::Power),
                PortSpec::output("efficiency", Quantity::Fraction),
                PortSpec::output("p_aux", Quantity::Power),
            ],
        }
    }
}

impl Component for DcLinkComponent {
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
        vec![0.0, 0.0, 0.0, self.core.efficiency(0.0, 0.0), self.accessory_w]
    }

    fn step(&mut self, _ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let (p_ac, omega, torque, v_dc) = (inputs[0], inputs[1], inputs[2], inputs[3]);
        let eff = self.core.efficiency(omega, torque);
        let (p_conv, _) = dc_side(p_ac, eff, v_dc).map_err(|e| StepError::new(e.to_string()))?;
        let p_dc = p_conv + self.accessory_w;
        out.copy_from_slice(&[p_dc, p_dc / v_dc, (p_conv - p_ac).abs(), eff, self.accessory_w]);
        Ok(())
    }
}
