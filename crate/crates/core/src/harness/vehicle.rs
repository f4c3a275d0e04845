//! Longitudinal vehicle dynamics closing the motor load loop.

use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    pub c_rr: f64,
    pub air_density: f64,
    pub cda: f64,
    pub wheel_radius: f64,
    pub gear_ratio: f64,
    pub driveline_eff: f64,
    pub grade: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 1500.0,
            c_rr: 0.01,
            air_density: 1.2,
            cda: 0.6,
            wheel_radius: 0.3,
            gear_ratio: 9.0,
            driveline_eff: 0.95,
            grade: 0.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [("mass", self.mass), ("wheel_radius", self.wheel_radius), ("gear_ratio", self.gear_ratio)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("vehicle {name} must be positive, got {v}"));
            }
        }
        if !(self.driveline_eff > 0.0 && self.driveline_eff <= 1.0) {
            return Err(format!("driveline efficiency {} must lie in (0, 1]", self.driveline_eff));
        }
        for (name, v) in [("c_rr", self.c_rr), ("air_density", self.air_density), ("cda", self.cda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("vehicle {name} must be non-negative, got {v}"));
            }
        }
        if !self.grade.is_finite() {
            return Err("road grade must be finite".into());
        }
        Ok(())
    }

    /// Wheel speed to motor speed, rad/s per m/s.
    pub fn speed_ratio(&self) -> f64 {
        self.gear_ratio / self.wheel_radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resistance {
    pub roll: f64,
    pub aero: f64,
    pub grade: f64,
}

impl Resistance {
    pub fn total(&self) -> f64 {
        self.roll + self.aero + self.grade
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn resistance(p: &VehicleParams, v: f64) -> Resistance {
    Resistance {
        roll: p.c_rr * p.mass * GRAVITY * sign(v),
        aero: 0.5 * p.air_density * p.cda * v * v * sign(v),
        grade: p.mass * GRAVITY * p.grade,
    }
}

/// Point-mass update with the driveline efficiency applied against the
/// direction of power flow. Returns the new speed and the road resistance
/// reflected to the motor shaft.
pub fn vehicle_step(p: &VehicleParams, v: f64, t_shaft: f64, dt: f64) -> (f64, f64) {
    let eta = if t_shaft < 0.0 { 1.0 / p.driveline_eff } else { p.driveline_eff };
    let f_trac = t_shaft * p.speed_ratio() * eta;
    let r = resistance(p, v).total();
    let v_next = (v + dt * (f_trac - r) / p.mass).max(0.0);
    (v_next, r / (p.speed_ratio() * p.driveline_eff))
}

/// Vehicle with the rotor rigidly geared to the wheels.
///
/// The rotor inertia is lumped into the vehicle's effective mass, so the
/// speed follows from the motor torque alone. The torque actually passed
/// through the gearbox is returned to the motor as `t_load` for the next
/// step, together with a correction that pulls the rotor back onto
/// `speed_ratio * v`.
///
/// Inputs `t_shaft`, `omega`. Outputs `v`, `t_load`, `traction_force`,
/// `resistance_force`, `resistance_power`, `driveline_loss`.
pub struct VehicleComponent {
    id: String,
    params: VehicleParams,
    rotor_inertia: f64,
    v: f64,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl VehicleComponent {
    pub fn new(id: impl Into<String>, params: VehicleParams, rotor_inertia: f64, v0: f64) -> Self {
        VehicleComponent {
            id: id.into(),
            params,
            rotor_inertia,
            v: v0,
            inputs: vec![PortSpec::input("t_shaft", Quantity::Torque), PortSpec::input("omega", Quantity::AngularSpeed)],
            outputs: vec![
                PortSpec::output("v", Quantity::Velocity),
                PortSpec::output("t_load", Quantity::Torque),
                PortSpec::output("traction_force", Quantity::Force),
                PortSpec::output("resistance_force", Quantity::Force),
                PortSpec::output("resistance_power", Quantity::Power),
                PortSpec::output("driveline_loss", Quantity::Power),
            ],
        }
    }

    pub fn speed(&self) -> f64 {
        self.v
    }
}

impl Component for VehicleComponent {
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
        let r = resistance(&self.params, self.v).total();
        vec![self.v, 0.0, 0.0, r, r * self.v, 0.0]
    }

    fn step(&mut self, ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let (t, omega) = (inputs[0], inputs[1]);
        let p = &self.params;
        let (k, j, dt) = (p.speed_ratio(), self.rotor_inertia, ctx.dt);
        let eta = if t < 0.0 { 1.0 / p.driveline_eff } else { p.driveline_eff };
        let r = resistance(p, self.v).total();
        let m_eff = p.mass + j * k * k * eta;
        let v_next = (self.v + dt * (t * k * eta - r) / m_eff).max(0.0);
        let a = (v_next - self.v) / dt;
        let v_mid = 0.5 * (self.v + v_next);
        let t_trans = t - j * k * a;
        let wheel_force = p.mass * a + r;
        let loss = t_trans * k * v_mid - wheel_force * v_mid;
        let t_load = t_trans - j * (k * v_next - omega) / dt;
        self.v = v_next;
        out.copy_from_slice(&[v_next, t_load, wheel_force, r, r * v_mid, loss]);
        Ok(())
    }
}
