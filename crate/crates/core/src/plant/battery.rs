//! Thevenin equivalent-circuit battery: OCV(SOC) source, series resistance
//! R0(SOC, T) and an optional single RC pair. Positive current discharges.

use std::sync::Arc;

use super::{params_err, PlantError};
use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};
use crate::surrogate::{bind_core, Axis, BoundModel, GridTable, ModelError, SurrogateModel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RcPair {
    pub resistance: f64,
    pub capacitance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryParams {
    pub capacity_ah: f64,
    /// 1-D table over `soc`.
    pub ocv: GridTable,
    /// 2-D table over (`soc`, `temp_k`).
    pub r0: GridTable,
    pub rc: Option<RcPair>,
    pub max_discharge_a: f64,
    pub max_charge_a: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub temp_warn_k: f64,
    pub temp_cutoff_k: f64,
}

/// Cell open-circuit curve used by the default pack (SOC, volts per cell).
const CELL_OCV: [(f64, f64); 21] = [
    (0.00, 3.00),
    (0.05, 3.30),
    (0.10, 3.42),
    (0.15, 3.50),
    (0.20, 3.55),
    (0.25, 3.59),
    (0.30, 3.62),
    (0.35, 3.65),
    (0.40, 3.68),
    (0.45, 3.71),
    (0.50, 3.74),
    (0.55, 3.78),
    (0.60, 3.82),
    (0.65, 3.86),
    (0.70, 3.90),
    (0.75, 3.95),
    (0.80, 4.00),
    (0.85, 4.05),
    (0.90, 4.10),
    (0.95, 4.15),
    (1.00, 4.20),
];

pub const SERIES_CELLS: f64 = 96.0;

impl Default for BatteryParams {
    /// 96s, 50 Ah pack. Illustrative values, not a characterized cell.
    fn default() -> Self {
        let ocv = GridTable::new(
            vec![Axis::new("soc", "-", CELL_OCV.iter().map(|p| p.0).collect())],
            CELL_OCV.iter().map(|p| p.1 * SERIES_CELLS).collect(),
        )
        .expect("default ocv table");
        let soc_axis = [0.0, 0.2, 0.5, 0.8, 1.0];
        let soc_factor = [1.3, 1.1, 1.0, 1.0, 1.05];
        let temp_axis = [253.15, 273.15, 298.15, 318.15, 333.15];
        let temp_factor = [2.5, 1.6, 1.0, 0.85, 0.8];
        let mut values = Vec::new();
        for sf in soc_factor {
            for tf in temp_factor {
                values.push(0.1 * sf * tf);
            }
        }
        let r0 = GridTable::new(vec![Axis::new("soc", "-", soc_axis.to_vec()), Axis::new("temp_k", "K", temp_axis.to_vec())], values)
            .expect("default r0 table");
        BatteryParams {
            capacity_ah: 50.0,
            ocv,
            r0,
            rc: None,
            max_discharge_a: 400.0,
            max_charge_a: 250.0,
            soc_min: 0.05,
            soc_max: 0.98,
            temp_warn_k: 318.15,
            temp_cutoff_k: 333.15,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.capacity_ah > 0.0) {
            return Err(params_err("battery capacity must be positive"));
        }
        if self.ocv.dims() != 1 {
            return Err(params_err("ocv table must be one-dimensional over soc"));
        }
        if self.ocv.values().windows(2).any(|w| w[1] <= w[0]) {
            return Err(params_err("ocv table must be strictly increasing in soc"));
        }
        if self.r0.dims() != 2 {
            return Err(params_err("r0 table must be two-dimensional over (soc, temp_k)"));
        }
        if self.r0.values().iter().any(|r| *r <= 0.0) {
            return Err(params_err("r0 values must be positive"));
        }
        if let Some(rc) = self.rc {
            if !(rc.resistance > 0.0 && rc.capacitance > 0.0) {
                return Err(params_err("rc resistance and capacitance must be positive"));
            }
        }
        if !(self.max_discharge_a >= 0.0 && self.max_charge_a >= 0.0) {
            return Err(params_err("current limits must be non-negative"));
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return Err(params_err("soc bounds must satisfy 0 <= min < max <= 1"));
        }
        if !(self.temp_warn_k < self.temp_cutoff_k) {
            return Err(params_err("battery warning temperature must be below cutoff"));
        }
        Ok(())
    }

    /// The explicit RC update is monotone only when dt < R*C.
    pub fn check_dt(&self, dt: f64) -> Result<(), PlantError> {
        match self.rc {
            Some(rc) if dt >= rc.resistance * rc.capacitance => {
                Err(params_err(format!("dt = {dt} s must be below the RC time constant {} s", rc.resistance * rc.capacitance)))
            }
            _ => Ok(()),
        }
    }

    pub fn r0_at(&self, soc: f64, temp_k: f64) -> f64 {
        self.r0.eval(&[soc, temp_k])
    }

    /// Temperature range where R0 is characterized.
    pub fn temp_range(&self) -> (f64, f64) {
        let a = &self.r0.axes()[1];
        (a.min(), a.max())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryState {
    pub soc: f64,
    pub rc_voltage: f64,
}

impl BatteryState {
    pub fn new(soc: f64) -> Self {
        BatteryState { soc, rc_voltage: 0.0 }
    }
}

pub fn ocv(params: &BatteryParams, soc: f64) -> Result<f64, PlantError> {
    if !(0.0..=1.0).contains(&soc) {
        return Err(PlantError::Domain { quantity: "soc", value: soc, min: 0.0, max: 1.0 });
    }
    Ok(params.ocv.eval(&[soc]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatteryStep {
    pub state: BatteryState,
    pub terminal_v: f64,
    pub heat: f64,
    /// SOC was clamped to a bound during this step.
    pub soc_violation: bool,
}

fn check_current(params: &BatteryParams, i_dc: f64) -> Result<(), PlantError> {
    if !i_dc.is_finite() {
        return Err(PlantError::NonFinite("i_dc"));
    }
    if i_dc > params.max_discharge_a {
        return Err(PlantError::CurrentLimit { current: i_dc, limit: params.max_discharge_a });
    }
    if -i_dc > params.max_charge_a {
        return Err(PlantError::CurrentLimit { current: i_dc, limit: -params.max_charge_a });
    }
    Ok(())
}

/// Advances SOC and the RC branch by one explicit step, using the
/// pre-step state for the terminal voltage and heat.
pub fn step_battery(params: &BatteryParams, state: &BatteryState, i_dc: f64, dt: f64, cell_temp: f64) -> Result<BatteryStep, PlantError> {
    check_current(params, i_dc)?;
    let r0 = params.r0_at(state.soc, cell_temp);
    let terminal_v = ocv(params, state.soc)? - i_dc * r0 - state.rc_voltage;
    let mut heat = i_dc * i_dc * r0;
    Ok(advance(params, state, i_dc, dt, terminal_v, &mut heat))
}

fn advance(params: &BatteryParams, state: &BatteryState, i_dc: f64, dt: f64, terminal_v: f64, heat: &mut f64) -> BatteryStep {
    let mut rc_voltage = state.rc_voltage;
    if let Some(rc) = params.rc {
        *heat += state.rc_voltage * state.rc_voltage / rc.resistance;
        rc_voltage += dt * (i_dc / rc.capacitance - state.rc_voltage / (rc.resistance * rc.capacitance));
    }
    let raw = state.soc - i_dc * dt / (3600.0 * params.capacity_ah);
    let soc = raw.clamp(params.soc_min, params.soc_max);
    BatteryStep { state: BatteryState { soc, rc_voltage }, terminal_v, heat: *heat, soc_violation: soc != raw }
}

/// Temperature derating: 1 at or below `warn`, 0 at or above `cutoff`,
/// linear in between.
pub fn linear_derate(temp: f64, warn: f64, cutoff: f64) -> f64 {
    if temp <= warn {
        1.0
    } else if temp >= cutoff {
        0.0
    } else {
        (cutoff - temp) / (cutoff - warn)
    }
}

/// Allowed (discharge, charge) current magnitudes.
pub fn battery_limits(params: &BatteryParams, state: &BatteryState, cell_temp: f64) -> (f64, f64) {
    let f = linear_derate(cell_temp, params.temp_warn_k, params.temp_cutoff_k);
    let discharge = if state.soc <= params.soc_min { 0.0 } else { params.max_discharge_a * f };
    let charge = if state.soc >= params.soc_max { 0.0 } else { params.max_charge_a * f };
    (discharge, charge)
}

/// Terminal-voltage core: the physics equivalent circuit or a surrogate of
/// (soc, i_dc, temp_k) -> terminal_v standing in for it.
#[derive(Clone, Debug)]
pub enum VoltageCore {
    Physics,
    Surrogate(BoundModel),
}

impl VoltageCore {
    pub fn input_ports() -> Vec<PortSpec> {
        vec![
            PortSpec::input("soc", Quantity::Fraction),
            PortSpec::input("i_dc", Quantity::Current),
            PortSpec::input("temp_k", Quantity::Temperature),
        ]
    }

    pub fn output_ports() -> Vec<PortSpec> {
        vec![PortSpec::output("terminal_v", Quantity::Voltage)]
    }

    pub fn surrogate(model: Arc<SurrogateModel>) -> Result<Self, ModelError> {
        Ok(VoltageCore::Surrogate(bind_core(model, &Self::input_ports(), &Self::output_ports())?))
    }

    /// Algebraic terminal voltage without the RC branch.
    pub fn terminal_v(&self, params: &BatteryParams, soc: f64, i_dc: f64, temp_k: f64) -> f64 {
        match self {
            VoltageCore::Physics => params.ocv.eval(&[soc]) - i_dc * params.r0_at(soc, temp_k),
            VoltageCore::Surrogate(m) => m.eval1(&[soc, i_dc, temp_k]),
        }
    }
}

/// Battery plant as a scheduled component.
///
/// Inputs `i_dc` (A, + = discharge) and `temp` (K). Outputs terminal voltage,
/// SOC, heat, derated current limits and the SOC-clamp flag.
pub struct BatteryComponent {
    id: String,
    params: Arc<BatteryParams>,
    core: VoltageCore,
    state: BatteryState,
    initial_temp: f64,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl BatteryComponent {
    pub fn new(id: impl Into<String>, params: Arc<BatteryParams>, core: VoltageCore, state: BatteryState, initial_temp: f64) -> Self {
        BatteryComponent {
            id: id.into(),
            params,
            core,
            state,
            initial_temp,
            inputs: vec![PortSpec::input("i_dc", Quantity::Current), PortSpec::input("temp", Quantity::Temperature)],
            outputs: vec![
                PortSpec::output("terminal_v", Quantity::Voltage),
                PortSpec::output("soc", Quantity::Fraction),
                PortSpec::output("heat", Quantity::Power),
                PortSpec::output("max_discharge_a", Quantity::Current),
                PortSpec::output("max_charge_a", Quantity::Current),
                PortSpec::output("soc_violation", Quantity::Fraction),
            ],
        }
    }

    pub fn state(&self) -> &BatteryState {
        &self.state
    }
}

impl Component for BatteryComponent {
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
        let v = self.core.terminal_v(&self.params, self.state.soc, 0.0, self.initial_temp) - self.state.rc_voltage;
        let (d, c) = battery_limits(&self.params, &self.state, self.initial_temp);
        vec![v, self.state.soc, 0.0, d, c, 0.0]
    }

    fn step(&mut self, ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        let (i_dc, temp) = (inputs[0], inputs[1]);
        let p = &*self.params;
        let step = match &self.core {
            VoltageCore::Physics => step_battery(p, &self.state, i_dc, ctx.dt, temp),
            core => check_current(p, i_dc).map(|_| {
                let soc = self.state.soc;
                let v_oc = core.terminal_v(p, soc, 0.0, temp);
                let v = core.terminal_v(p, soc, i_dc, temp);
                // Surrogate heat: the resistive drop times current, floored
                // so that interpolation noise cannot make it negative.
                let mut heat = (i_dc * (v_oc - v)).max(0.0);
                advance(p, &self.state, i_dc, ctx.dt, v - self.state.rc_voltage, &mut heat)
            }),
        }
        .map_err(|e| StepError::new(e.to_string()))?;
        self.state = step.state;
        let (d, c) = battery_limits(p, &self.state, temp);
        out.copy_from_slice(&[step.terminal_v, self.state.soc, step.heat, d, c, if step.soc_violation { 1.0 } else { 0.0 }]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat_params(ocv_v: f64, r0: f64) -> BatteryParams {
        BatteryParams {
            ocv: GridTable::new(vec![Axis::new("soc", "-", vec![0.0, 1.0])], vec![ocv_v - 0.5, ocv_v + 0.5]).unwrap(),
            r0: GridTable::new(vec![Axis::new("soc", "-", vec![0.0, 1.0]), Axis::new("temp_k", "K", vec![250.0, 350.0])], vec![r0; 4])
                .unwrap(),
            soc_min: 0.0,
            soc_max: 1.0,
            ..BatteryParams::default()
        }
    }

    fn node_params() -> BatteryParams {
        BatteryParams {
            ocv: GridTable::new(vec![Axis::new("soc", "-", vec![0.0, 0.4, 0.6, 1.0])], vec![3.0, 3.6, 3.8, 4.2]).unwrap(),
            ..flat_params(3.7, 0.01)
        }
    }

    #[test]
    fn ocv_nodes_midpoint_and_domain() {
        let p = node_params();
        assert_eq!(ocv(&p, 1.0).unwrap(), 4.2);
        assert!((ocv(&p, 0.5).unwrap() - 3.7).abs() < 1e-12);
        assert!(matches!(ocv(&p, 1.2), Err(PlantError::Domain { .. })));
    }

    #[test]
    fn default_pack_is_valid() {
        let p = BatteryParams::default();
        p.validate().unwrap();
        assert!((ocv(&p, 1.0).unwrap() - 4.2 * 96.0).abs() < 1e-9);
        assert!((ocv(&p, 0.0).unwrap() - 288.0).abs() < 1e-9);
    }

    #[test]
    fn open_circuit() {
        let p = BatteryParams::default();
        let s = BatteryState::new(0.7);
        let r = step_battery(&p, &s, 0.0, 0.01, 298.15).unwrap();
        assert_eq!(r.terminal_v, ocv(&p, 0.7).unwrap());
        assert_eq!(r.state.soc, 0.7);
        assert_eq!(r.heat, 0.0);
    }

    #[test]
    fn resistive_drop() {
        // 3.70 V at soc 0.5, r0 = 0.01 ohm
        let p = flat_params(3.7, 0.01);
        let r = step_battery(&p, &BatteryState::new(0.5), 100.0, 0.01, 298.15).unwrap();
        assert!((r.terminal_v - 2.70).abs() < 1e-12);
        assert!((r.heat - 100.0).abs() < 1e-12);
    }

    #[test]
    fn coulomb_counting_clamps_with_flag() {
        let p = BatteryParams { soc_min: 0.05, ..flat_params(3.7, 0.01) };
        let r = step_battery(&p, &BatteryState::new(0.5), 50.0, 3600.0, 298.15).unwrap();
        assert_eq!(r.state.soc, 0.05);
        assert!(r.soc_violation);
    }

    #[test]
    fn current_limit_is_an_error() {
        let p = BatteryParams::default();
        let s = BatteryState::new(0.5);
        assert!(matches!(step_battery(&p, &s, 401.0, 0.01, 298.15), Err(PlantError::CurrentLimit { .. })));
        assert!(matches!(step_battery(&p, &s, -251.0, 0.01, 298.15), Err(PlantError::CurrentLimit { .. })));
    }

    #[test]
    fn limits_derate_and_soc_bounds() {
        let p = BatteryParams::default();
        let mid = BatteryState::new(0.5);
        assert_eq!(battery_limits(&p, &mid, 298.15), (400.0, 250.0));
        let half = 0.5 * (p.temp_warn_k + p.temp_cutoff_k);
        let (d, c) = battery_limits(&p, &mid, half);
        assert!((d - 200.0).abs() < 1e-9 && (c - 125.0).abs() < 1e-9);
        assert_eq!(battery_limits(&p, &BatteryState::new(p.soc_min), 298.15).0, 0.0);
        assert_eq!(battery_limits(&p, &BatteryState::new(p.soc_max), 298.15).1, 0.0);
        assert_eq!(battery_limits(&p, &mid, 400.0), (0.0, 0.0));
    }

    #[test]
    fn rc_dt_check() {
        let p = BatteryParams { rc: Some(RcPair { resistance: 0.01, capacitance: 2.0 }), ..BatteryParams::default() };
        assert!(p.check_dt(0.01).is_ok());
        assert!(p.check_dt(0.02).is_err());
    }

    fn rc_params() -> BatteryParams {
        BatteryParams { rc: Some(RcPair { resistance: 0.02, capacitance: 2000.0 }), ..BatteryParams::default() }
    }

    proptest! {
        #[test]
        fn heat_non_negative_and_drop_below_ocv(soc in 0.06f64..0.97, i in -250.0f64..400.0, t in 250.0f64..340.0, vrc in 0.0f64..2.0) {
            let p = rc_params();
            let s = BatteryState { soc, rc_voltage: vrc };
            let r = step_battery(&p, &s, i, 0.01, t).unwrap();
            prop_assert!(r.heat >= 0.0);
            if i > 0.0 {
                prop_assert!(r.terminal_v <= ocv(&p, soc).unwrap());
            }
        }

        #[test]
        fn charge_is_conserved(currents in proptest::collection::vec(-100.0f64..100.0, 1..200)) {
            let p = BatteryParams::default();
            let dt = 0.5;
            let mut s = BatteryState::new(0.5);
            let mut expected = 0.0;
            for &i in &currents {
                let r = step_battery(&p, &s, i, dt, 298.15).unwrap();
                prop_assert!(!r.soc_violation);
                s = r.state;
                expected += i * dt / (3600.0 * p.capacity_ah);
            }
            prop_assert!((0.5 - s.soc - expected).abs() < 1e-12);
        }

        #[test]
        fn rc_relaxes_monotonically(v0 in -5.0f64..5.0) {
            let p = rc_params();
            let mut s = BatteryState { soc: 0.5, rc_voltage: v0 };
            for _ in 0..500 {
                let next = step_battery(&p, &s, 0.0, 1.0, 298.15).unwrap().state;
                prop_assert!(next.rc_voltage.abs() <= s.rc_voltage.abs());
                s = next;
            }
        }
    }
}
