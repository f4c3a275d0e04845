//! Energy report and energy balance, both computed as folds over the bus
//! signals of a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::vehicle::VehicleParams;
use super::{config_err, HarnessError};
use crate::sim::{Recorder, SignalBus, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub inverter: f64,
    pub motor: f64,
    pub driveline: f64,
    pub battery: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time_s: f64,
    pub signal: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub duration_s: f64,
    pub distance_m: f64,
    /// Net energy out of the battery terminals.
    pub battery_energy_wh: f64,
    /// Absent when no distance was covered.
    pub wh_per_km: Option<f64>,
    /// Positive shaft work delivered by the motor.
    pub traction_wh: f64,
    /// Energy returned into the battery terminals.
    pub regen_wh: f64,
    pub loss_wh: LossBreakdown,
    pub soc_start: f64,
    pub soc_end: f64,
    pub peak_temperatures_k: BTreeMap<String, f64>,
    /// Rising edges of the plant constraint flags.
    pub constraint_violations: Vec<Violation>,
}

impl EnergyReport {
    pub fn from_trace(trace: &Trace) -> Result<Self, HarnessError> {
        let mut b = ReportBuilder::new(trace.columns(), trace.dt(), trace.initial())?;
        for k in 0..trace.len() {
            b.observe(trace.time(k), trace.row(k));
        }
        Ok(b.finish())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

const FLAGS: [&str; 2] = ["battery.soc_violation", "motor.freq_mismatch"];

struct Columns {
    v: usize,
    terminal_v: usize,
    i_dc: usize,
    inverter_loss: usize,
    motor_heat: usize,
    driveline_loss: usize,
    battery_heat: usize,
    soc: usize,
    t_shaft: usize,
    omega: usize,
    temps: Vec<(String, usize)>,
    flags: Vec<(&'static str, usize)>,
}

impl Columns {
    fn find(columns: &[String]) -> Result<Self, HarnessError> {
        let col = |name: &str| columns.iter().position(|c| c == name).ok_or_else(|| config_err(format!("trace has no column `{name}`")));
        let temps = columns.iter().enumerate().filter_map(|(i, c)| c.strip_prefix("thermal.temp_").map(|n| (n.to_string(), i))).collect();
        Ok(Columns {
            v: col("vehicle.v")?,
            terminal_v: col("battery.terminal_v")?,
            i_dc: col("dc_link.i_dc")?,
            inverter_loss: col("dc_link.loss")?,
            motor_heat: col("motor.heat")?,
            driveline_loss: col("vehicle.driveline_loss")?,
            battery_heat: col("battery.heat")?,
            soc: col("battery.soc")?,
            t_shaft: col("motor.t_shaft")?,
            omega: col("motor.omega")?,
            temps,
            flags: FLAGS.iter().map(|f| col(f).map(|i| (*f, i))).collect::<Result<_, _>>()?,
        })
    }
}

/// Incremental report fold; feed the initial bus to `new`, then every step.
pub struct ReportBuilder {
    c: Columns,
    dt: f64,
    steps: u64,
    v_prev: f64,
    distance: f64,
    battery_j: f64,
    regen_j: f64,
    traction_j: f64,
    loss_j: [f64; 4],
    soc_start: f64,
    soc_end: f64,
    peaks: Vec<f64>,
    flags: Vec<bool>,
    violations: Vec<Violation>,
}

impl ReportBuilder {
    pub fn new(columns: &[String], dt: f64, initial: &[f64]) -> Result<Self, HarnessError> {
        let c = Columns::find(columns)?;
        let peaks = c.temps.iter().map(|&(_, i)| initial[i]).collect();
        let flags = c.flags.iter().map(|&(_, i)| initial[i] != 0.0).collect();
        Ok(ReportBuilder {
            dt,
            steps: 0,
            v_prev: initial[c.v],
            distance: 0.0,
            battery_j: 0.0,
            regen_j: 0.0,
            traction_j: 0.0,
            loss_j: [0.0; 4],
            soc_start: initial[c.soc],
            soc_end: initial[c.soc],
            peaks,
            flags,
            violations: Vec::new(),
            c,
        })
    }

    pub fn observe(&mut self, time: f64, row: &[f64]) {
        let (c, dt) = (&self.c, self.dt);
        self.steps += 1;
        let v = row[c.v];
        self.distance += 0.5 * (self.v_prev + v) * dt;
        self.v_prev = v;
        let p = row[c.terminal_v] * row[c.i_dc];
        self.battery_j += p * dt;
        if p < 0.0 {
            self.regen_j -= p * dt;
        }
        self.traction_j += (row[c.t_shaft] * row[c.omega]).max(0.0) * dt;
        for (acc, i) in self.loss_j.iter_mut().zip([c.inverter_loss, c.motor_heat, c.driveline_loss, c.battery_heat]) {
            *acc += row[i] * dt;
        }
        self.soc_end = row[c.soc];
        for (peak, &(_, i)) in self.peaks.iter_mut().zip(&c.temps) {
            *peak = peak.max(row[i]);
        }
        for (on, &(name, i)) in self.flags.iter_mut().zip(&c.flags) {
            let now = row[i] != 0.0;
            if now && !*on {
                self.violations.push(Violation { time_s: time, signal: name.to_string() });
            }
            *on = now;
        }
    }

    pub fn finish(self) -> EnergyReport {
        const WH: f64 = 3600.0;
        let battery_energy_wh = self.battery_j / WH;
        EnergyReport {
            duration_s: self.steps as f64 * self.dt,
            distance_m: self.distance,
            battery_energy_wh,
            wh_per_km: (self.distance > 0.0).then(|| battery_energy_wh / (self.distance / 1000.0)),
            traction_wh: self.traction_j / WH,
            regen_wh: self.regen_j / WH,
            loss_wh: LossBreakdown {
                inverter: self.loss_j[0] / WH,
                motor: self.loss_j[1] / WH,
                driveline: self.loss_j[2] / WH,
                battery: self.loss_j[3] / WH,
            },
            soc_start: self.soc_start,
            soc_end: self.soc_end,
            peak_temperatures_k: self.c.temps.iter().map(|(n, _)| n.clone()).zip(self.peaks).collect(),
            constraint_violations: self.violations,
        }
    }
}

impl Recorder for ReportBuilder {
    fn record(&mut self, bus: &SignalBus) {
        self.observe(bus.time(), bus.values());
    }
}

/// Terms of the battery-to-road energy balance, in joules.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyBalance {
    pub battery_terminal: f64,
    pub inverter_loss: f64,
    pub motor_loss: f64,
    pub driveline_loss: f64,
    /// Change in vehicle kinetic energy plus work done against resistance.
    pub mechanical_net: f64,
    pub rotor_kinetic: f64,
    pub accessory: f64,
    pub residual: f64,
}

impl EnergyBalance {
    /// |residual| relative to the battery terminal energy.
    pub fn relative_error(&self) -> f64 {
        self.residual.abs() / self.battery_terminal.abs()
    }
}

/// Integrates each term per step from trace signals.
pub fn energy_balance(trace: &Trace, vehicle: &VehicleParams, rotor_inertia: f64) -> Result<EnergyBalance, HarnessError> {
    let col = |name: &str| trace.series(name).ok_or_else(|| config_err(format!("trace has no column `{name}`")));
    let dt = trace.dt();
    let sum = |name: &str| -> Result<f64, HarnessError> { Ok(col(name)?[1..].iter().sum::<f64>() * dt) };
    let v_term = col("battery.terminal_v")?;
    let i_dc = col("dc_link.i_dc")?;
    let battery_terminal = v_term[1..].iter().zip(&i_dc[1..]).map(|(v, i)| v * i).sum::<f64>() * dt;
    let v = col("vehicle.v")?;
    let omega = col("motor.omega")?;
    let (v0, vn) = (v[0], *v.last().expect("initial row"));
    let (w0, wn) = (omega[0], *omega.last().expect("initial row"));
    let mechanical_net = 0.5 * vehicle.mass * (vn * vn - v0 * v0) + sum("vehicle.resistance_power")?;
    let rotor_kinetic = 0.5 * rotor_inertia * (wn * wn - w0 * w0);
    let inverter_loss = sum("dc_link.loss")?;
    let motor_loss = sum("motor.heat")?;
    let driveline_loss = sum("vehicle.driveline_loss")?;
    let accessory = sum("dc_link.p_aux")?;
    let residual = battery_terminal - inverter_loss - motor_loss - driveline_loss - mechanical_net - rotor_kinetic - accessory;
    Ok(EnergyBalance { battery_terminal, inverter_loss, motor_loss, driveline_loss, mechanical_net, rotor_kinetic, accessory, residual })
}
