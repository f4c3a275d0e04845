//! Builds the powertrain graph from a scenario config and runs it.

use std::sync::Arc;

use super::config::{FeedbackDecl, ScenarioConfig, TableSource, Variant};
use super::cycle::{load_drive_cycle, CycleComponent, DriveCycle};
use super::report::{EnergyReport, ReportBuilder};
use super::vehicle::{VehicleComponent, VehicleParams};
use super::{config_err, HarnessError};
use crate::control::{ControlPlant, ControllerComponent, ControllerRules, DerateBand, DriverComponent, DriverParams};
use crate::plant::battery::{BatteryComponent, BatteryParams, BatteryState, RcPair, VoltageCore};
use crate::plant::inverter::{DcLinkComponent, EfficiencyCore, InverterComponent, InverterParams};
use crate::plant::motor::{LossCore, MotorComponent, MotorParams, MotorState};
use crate::plant::thermal::{
    heat_port, temp_port, wrap_thermal_surrogate, CoolantFlow, Endpoint, ThermalComponent, ThermalEdge, ThermalNetwork, ThermalNode,
};
use crate::sim::{Component, Connection, PortRef, System, Trace};
use crate::surrogate::{load_model, Axis, GridTable, Payload, SurrogateModel};

/// Component ids in registration order.
pub const COMPONENT_IDS: [&str; 9] = ["cycle", "driver", "controller", "inverter", "motor", "vehicle", "dc_link", "battery", "thermal"];

/// Physics parameter sets resolved from a config, shared read-only by the
/// components of one run.
#[derive(Clone, Debug)]
pub struct Plants {
    pub battery: Arc<BatteryParams>,
    pub inverter: Arc<InverterParams>,
    pub motor: Arc<MotorParams>,
    pub thermal: Arc<ThermalNetwork>,
    /// Thermal nodes heated by battery, inverter and motor, in that order.
    pub heated: Vec<String>,
    pub vehicle: VehicleParams,
    pub driver: DriverParams,
    pub rules: ControllerRules,
}

fn table_from(cfg: &ScenarioConfig, src: &TableSource, what: &str) -> Result<GridTable, HarnessError> {
    match src {
        TableSource::File(p) => {
            let m = load_model(cfg.resolve(p))?;
            match m.payload() {
                Payload::Table(t) if t.outputs() == 1 => Ok(t.clone()),
                _ => Err(config_err(format!("{what}: {} must hold a single-output table", p.display()))),
            }
        }
        TableSource::Inline { axes, values } => {
            let axes = axes.iter().map(|a| Axis::new(a.name.clone(), a.unit.clone(), a.coords.clone())).collect();
            GridTable::new(axes, values.clone()).map_err(|e| config_err(format!("{what}: {e}")))
        }
    }
}

impl Plants {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, HarnessError> {
        let b = &cfg.battery;
        let mut battery = BatteryParams::default();
        if let Some(t) = &b.ocv {
            battery.ocv = table_from(cfg, t, "battery.ocv")?;
        }
        if let Some(t) = &b.r0 {
            battery.r0 = table_from(cfg, t, "battery.r0")?;
        }
        battery.rc = b.rc.map(|r| RcPair { resistance: r.resistance, capacitance: r.capacitance });
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut battery.capacity_ah, b.capacity_ah);
        set(&mut battery.max_discharge_a, b.max_discharge_a);
        set(&mut battery.max_charge_a, b.max_charge_a);
        set(&mut battery.soc_min, b.soc_min);
        set(&mut battery.soc_max, b.soc_max);
        set(&mut battery.temp_warn_k, b.temp_warn_k);
        set(&mut battery.temp_cutoff_k, b.temp_cutoff_k);
        battery.validate()?;
        battery.check_dt(cfg.dt)?;

        let i = &cfg.inverter;
        let mut inverter = InverterParams::default();
        if let Some(t) = &i.efficiency_map {
            inverter.efficiency_map = table_from(cfg, t, "inverter.efficiency_map")?;
        }
        set(&mut inverter.max_modulation_index, i.max_modulation_index);
        set(&mut inverter.min_efficiency, i.min_efficiency);
        inverter.validate()?;
        if !(i.accessory_w >= 0.0) {
            return Err(config_err("inverter accessory_w must be non-negative"));
        }

        let m = &cfg.motor;
        let mut motor = MotorParams::default();
        if let Some(t) = &m.loss_map {
            motor.loss_map = table_from(cfg, t, "motor.loss_map")?;
        }
        set(&mut motor.t_max, m.t_max);
        set(&mut motor.base_speed, m.base_speed);
        set(&mut motor.p_max, m.p_max);
        set(&mut motor.inertia, m.inertia);
        set(&mut motor.tau, m.tau);
        set(&mut motor.rated_v_amp, m.rated_v_amp);
        if let Some(p) = m.pole_pairs {
            motor.pole_pairs = p;
        }
        if m.p_max.is_none() && (m.t_max.is_some() || m.base_speed.is_some()) {
            motor.p_max = motor.t_max * motor.base_speed;
        }
        motor.validate()?;
        motor.check_dt(cfg.dt)?;

        let t = &cfg.thermal;
        let defaults = ThermalNetwork::default();
        let nodes = match &t.nodes {
            Some(n) => n.iter().map(|n| ThermalNode { id: n.id.clone(), capacity: n.capacity, initial_k: n.initial_k }).collect(),
            None => defaults.nodes().to_vec(),
        };
        let edges = match &t.edges {
            Some(e) => e
                .iter()
                .map(|e| ThermalEdge {
                    a: e.a.clone(),
                    b: match e.b.as_str() {
                        "ambient" => Endpoint::Ambient,
                        "coolant" => Endpoint::Coolant,
                        id => Endpoint::Node(id.to_string()),
                    },
                    conductance: e.conductance,
                })
                .collect(),
            None => defaults.edges().to_vec(),
        };
        let flow = t.coolant_flow.map(|f| CoolantFlow { mass_flow: f.mass_flow, cp: f.cp });
        let thermal = ThermalNetwork::new(nodes, edges, t.ambient_k, t.coolant_k, flow)?;
        if t.variant == Variant::Physics {
            thermal.check_dt(cfg.dt)?;
        }
        let heated = vec![b.thermal_node.clone(), i.thermal_node.clone(), m.thermal_node.clone()];
        crate::plant::thermal::heated_indices(&thermal, &heated)?;

        let d = &cfg.driver;
        let driver = DriverParams { kp: d.kp, ki: d.ki, output_clamp: d.output_clamp, integrator_clamp: d.integrator_clamp };
        driver.validate()?;
        let c = &cfg.controller;
        let rules = ControllerRules {
            bands: c.bands.iter().map(|b| DerateBand { node: b.node.clone(), warn_k: b.warn_k, cutoff_k: b.cutoff_k }).collect(),
            regen_enabled: c.regen_enabled,
            regen_cap: c.regen_cap,
            max_mod_index: inverter.max_modulation_index,
            accessory_w: i.accessory_w,
        };
        rules.validate()?;
        for band in &rules.bands {
            if thermal.node_index(&band.node).is_none() {
                return Err(config_err(format!("derating band references unknown thermal node `{}`", band.node)));
            }
        }

        Ok(Plants {
            battery: Arc::new(battery),
            inverter: Arc::new(inverter),
            motor: Arc::new(motor),
            thermal: Arc::new(thermal),
            heated,
            vehicle: cfg.vehicle.params(),
            driver,
            rules,
        })
    }
}

/// Every signal edge of the assembled graph as (from, to).
pub fn edges(plants: &Plants) -> Vec<(String, String)> {
    let mut e: Vec<(String, String)> = Vec::new();
    let mut add = |from: &str, to: &str| e.push((from.to_string(), to.to_string()));
    add("cycle.v_target", "driver.v_target");
    add("vehicle.v", "driver.v_actual");
    add("driver.torque_request", "controller.torque_request");
    add("motor.omega", "controller.omega");
    add("battery.terminal_v", "controller.v_dc");
    add("battery.max_discharge_a", "controller.max_discharge_a");
    add("battery.max_charge_a", "controller.max_charge_a");
    for b in &plants.rules.bands {
        add(&format!("thermal.{}", temp_port(&b.node)), &format!("controller.temp_{}", b.node));
    }
    add("controller.mod_index", "inverter.mod_index");
    add("controller.elec_freq", "inverter.elec_freq");
    add("battery.terminal_v", "inverter.v_dc");
    add("controller.t_cmd", "motor.t_cmd");
    add("inverter.v_amp", "motor.v_amp");
    add("inverter.freq", "motor.elec_freq");
    add("vehicle.t_load", "motor.t_load");
    add("motor.t_shaft", "vehicle.t_shaft");
    add("motor.omega", "vehicle.omega");
    add("motor.p_ac", "dc_link.p_ac");
    add("motor.omega", "dc_link.omega");
    add("motor.t_shaft", "dc_link.torque");
    add("battery.terminal_v", "dc_link.v_dc");
    add("dc_link.i_dc", "battery.i_dc");
    add(&format!("thermal.{}", temp_port(&plants.heated[0])), "battery.temp");
    add("battery.heat", &format!("thermal.{}", heat_port(&plants.heated[0])));
    add("dc_link.loss", &format!("thermal.{}", heat_port(&plants.heated[1])));
    add("motor.heat", &format!("thermal.{}", heat_port(&plants.heated[2])));
    e
}

/// The unit-delay edges that break every loop of the assembled graph:
/// plant feedback into the driver, controller, inverter and motor, and the
/// thermal return path.
pub fn default_feedback(plants: &Plants) -> Vec<FeedbackDecl> {
    let mut f = vec![
        ("vehicle.v".to_string(), "driver.v_actual".to_string()),
        ("motor.omega".into(), "controller.omega".into()),
        ("battery.terminal_v".into(), "controller.v_dc".into()),
        ("battery.max_discharge_a".into(), "controller.max_discharge_a".into()),
        ("battery.max_charge_a".into(), "controller.max_charge_a".into()),
    ];
    for b in &plants.rules.bands {
        f.push((format!("thermal.{}", temp_port(&b.node)), format!("controller.temp_{}", b.node)));
    }
    f.push(("battery.terminal_v".into(), "inverter.v_dc".into()));
    f.push(("vehicle.t_load".into(), "motor.t_load".into()));
    f.push(("battery.terminal_v".into(), "dc_link.v_dc".into()));
    f.push((format!("thermal.{}", temp_port(&plants.heated[0])), "battery.temp".into()));
    f.into_iter().map(|(from, to)| FeedbackDecl { from, to }).collect()
}

pub struct Assembly {
    pub system: System,
    pub duration: f64,
    pub plants: Plants,
    pub cycle: DriveCycle,
}

fn surrogate(cfg: &ScenarioConfig, path: &Option<std::path::PathBuf>) -> Result<Arc<SurrogateModel>, HarnessError> {
    let p = path.as_ref().ok_or_else(|| config_err("surrogate variant without a model path"))?;
    Ok(Arc::new(load_model(cfg.resolve(p))?))
}

pub fn assemble(cfg: &ScenarioConfig) -> Result<Assembly, HarnessError> {
    let cycle = load_drive_cycle(cfg.resolve(&cfg.cycle))?;
    let plants = Plants::from_config(cfg)?;
    let v0 = cfg.vehicle.initial_speed;
    let omega0 = v0 * plants.vehicle.speed_ratio();

    let battery_core = match cfg.battery.variant {
        Variant::Physics => VoltageCore::Physics,
        Variant::Surrogate => VoltageCore::surrogate(surrogate(cfg, &cfg.battery.model)?)?,
    };
    let eff_core = match cfg.inverter.variant {
        Variant::Physics => EfficiencyCore::Physics(plants.inverter.clone()),
        Variant::Surrogate => EfficiencyCore::surrogate(surrogate(cfg, &cfg.inverter.model)?, plants.inverter.min_efficiency)?,
    };
    let loss_core = match cfg.motor.variant {
        Variant::Physics => LossCore::Physics,
        Variant::Surrogate => LossCore::surrogate(surrogate(cfg, &cfg.motor.model)?)?,
    };
    let thermal: Box<dyn Component> = match cfg.thermal.variant {
        Variant::Physics => Box::new(ThermalComponent::new("thermal", plants.thermal.clone(), &plants.heated)?),
        Variant::Surrogate => {
            Box::new(wrap_thermal_surrogate("thermal", surrogate(cfg, &cfg.thermal.model)?, &plants.thermal, &plants.heated)?)
        }
    };
    let battery_temp = plants.thermal.nodes()[plants.thermal.node_index(&plants.heated[0]).expect("checked")].initial_k;

    let components: Vec<Box<dyn Component>> = vec![
        Box::new(CycleComponent::new("cycle", cycle.clone())),
        Box::new(DriverComponent::new("driver", plants.driver)),
        Box::new(ControllerComponent::new(
            "controller",
            ControlPlant { motor: plants.motor.clone(), inverter: plants.inverter.clone() },
            plants.rules.clone(),
        )),
        Box::new(InverterComponent::new("inverter", plants.inverter.max_modulation_index)),
        Box::new(MotorComponent::new("motor", plants.motor.clone(), loss_core, MotorState { omega: omega0, t_actual: 0.0 })),
        Box::new(VehicleComponent::new("vehicle", plants.vehicle, plants.motor.inertia, v0)),
        Box::new(DcLinkComponent::new("dc_link", eff_core, cfg.inverter.accessory_w)),
        Box::new(BatteryComponent::new(
            "battery",
            plants.battery.clone(),
            battery_core,
            BatteryState::new(cfg.battery.initial_soc),
            battery_temp,
        )),
        thermal,
    ];

    let declared = cfg.feedback.clone().unwrap_or_else(|| default_feedback(&plants));
    let all = edges(&plants);
    for d in &declared {
        if !all.iter().any(|(f, t)| *f == d.from && *t == d.to) {
            return Err(config_err(format!("feedback edge {} -> {} does not match any connection", d.from, d.to)));
        }
    }
    let mut connections = Vec::with_capacity(all.len());
    for (from, to) in &all {
        let (f, t) = (PortRef::parse(from).expect("well-formed"), PortRef::parse(to).expect("well-formed"));
        let fb = declared.iter().any(|d| d.from == *from && d.to == *to);
        connections.push(if fb { Connection::feedback(f, t) } else { Connection::direct(f, t) });
    }
    let system = System::new(components, &connections, cfg.dt)?;
    let duration = cfg.duration.unwrap_or_else(|| cycle.duration());
    Ok(Assembly { system, duration, plants, cycle })
}

pub struct ScenarioRun {
    pub trace: Trace,
    pub report: EnergyReport,
    pub plants: Plants,
}

/// Assembles, runs and folds the report over the trace.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, HarnessError> {
    let mut a = assemble(cfg)?;
    let trace = a.system.run(a.duration)?;
    let report = EnergyReport::from_trace(&trace)?;
    Ok(ScenarioRun { trace, report, plants: a.plants })
}

/// Runs without keeping the trace; the report is folded step by step.
pub fn run_report(cfg: &ScenarioConfig) -> Result<EnergyReport, HarnessError> {
    let mut a = assemble(cfg)?;
    let bus = a.system.bus();
    let mut builder = ReportBuilder::new(bus.names(), bus.dt(), bus.values())?;
    a.system.run_with(a.duration, &mut builder)?;
    Ok(builder.finish())
}
