//! TOML scenario configuration. Relative paths resolve against the
//! directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::vehicle::VehicleParams;
use super::{config_err, HarnessError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Physics,
    Surrogate,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub coords: Vec<f64>,
}

/// A grid given inline or as a path to a table model file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    File(PathBuf),
    Inline { axes: Vec<AxisConfig>, values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcConfig {
    pub resistance: f64,
    pub capacitance: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub variant: Variant,
    pub model: Option<PathBuf>,
    pub initial_soc: f64,
    pub capacity_ah: Option<f64>,
    pub ocv: Option<TableSource>,
    pub r0: Option<TableSource>,
    pub rc: Option<RcConfig>,
    pub max_discharge_a: Option<f64>,
    pub max_charge_a: Option<f64>,
    pub soc_min: Option<f64>,
    pub soc_max: Option<f64>,
    pub temp_warn_k: Option<f64>,
    pub temp_cutoff_k: Option<f64>,
    pub thermal_node: String,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            variant: Variant::Physics,
            model: None,
            initial_soc: 0.8,
            capacity_ah: None,
            ocv: None,
            r0: None,
            rc: None,
            max_discharge_a: None,
            max_charge_a: None,
            soc_min: None,
            soc_max: None,
            temp_warn_k: None,
            temp_cutoff_k: None,
            thermal_node: "battery".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverterConfig {
    pub variant: Variant,
    pub model: Option<PathBuf>,
    pub efficiency_map: Option<TableSource>,
    pub max_modulation_index: Option<f64>,
    pub min_efficiency: Option<f64>,
    pub accessory_w: f64,
    pub thermal_node: String,
}

impl Default for InverterConfig {
    fn default() -> Self {
        InverterConfig {
            variant: Variant::Physics,
            model: None,
            efficiency_map: None,
            max_modulation_index: None,
            min_efficiency: None,
            accessory_w: 0.0,
            thermal_node: "inverter".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorConfig {
    pub variant: Variant,
    pub model: Option<PathBuf>,
    pub loss_map: Option<TableSource>,
    pub t_max: Option<f64>,
    pub base_speed: Option<f64>,
    pub p_max: Option<f64>,
    pub inertia: Option<f64>,
    pub pole_pairs: Option<u32>,
    pub tau: Option<f64>,
    pub rated_v_amp: Option<f64>,
    pub thermal_node: String,
}

impl Default for MotorConfig {
    fn default() -> Self {
        MotorConfig {
            variant: Variant::Physics,
            model: None,
            loss_map: None,
            t_max: None,
            base_speed: None,
            p_max: None,
            inertia: None,
            pole_pairs: None,
            tau: None,
            rated_v_amp: None,
            thermal_node: "motor".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub capacity: f64,
    pub initial_k: f64,
}

/// `b` names another node, or the `ambient` / `coolant` boundary.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub a: String,
    pub b: String,
    pub conductance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolantFlowConfig {
    pub mass_flow: f64,
    pub cp: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermalConfig {
    pub variant: Variant,
    pub model: Option<PathBuf>,
    pub ambient_k: f64,
    pub coolant_k: f64,
    pub coolant_flow: Option<CoolantFlowConfig>,
    pub nodes: Option<Vec<NodeConfig>>,
    pub edges: Option<Vec<EdgeConfig>>,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            variant: Variant::Physics,
            model: None,
            ambient_k: 298.15,
            coolant_k: 298.15,
            coolant_flow: None,
            nodes: None,
            edges: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    pub kp: f64,
    pub ki: f64,
    pub output_clamp: f64,
    pub integrator_clamp: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        let d = crate::control::DriverParams::default();
        DriverConfig { kp: d.kp, ki: d.ki, output_clamp: d.output_clamp, integrator_clamp: d.integrator_clamp }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub node: String,
    pub warn_k: f64,
    pub cutoff_k: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub regen_enabled: bool,
    pub regen_cap: f64,
    pub bands: Vec<BandConfig>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let r = crate::control::ControllerRules::default();
        ControllerConfig {
            regen_enabled: r.regen_enabled,
            regen_cap: r.regen_cap,
            bands: r.bands.into_iter().map(|b| BandConfig { node: b.node, warn_k: b.warn_k, cutoff_k: b.cutoff_k }).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub mass: f64,
    pub c_rr: f64,
    pub air_density: f64,
    pub cda: f64,
    pub wheel_radius: f64,
    pub gear_ratio: f64,
    pub driveline_eff: f64,
    pub grade: f64,
    pub initial_speed: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        let p = VehicleParams::default();
        VehicleConfig {
            mass: p.mass,
            c_rr: p.c_rr,
            air_density: p.air_density,
            cda: p.cda,
            wheel_radius: p.wheel_radius,
            gear_ratio: p.gear_ratio,
            driveline_eff: p.driveline_eff,
            grade: p.grade,
            initial_speed: 0.0,
        }
    }
}

impl VehicleConfig {
    pub fn params(&self) -> VehicleParams {
        VehicleParams {
            mass: self.mass,
            c_rr: self.c_rr,
            air_density: self.air_density,
            cda: self.cda,
            wheel_radius: self.wheel_radius,
            gear_ratio: self.gear_ratio,
            driveline_eff: self.driveline_eff,
            grade: self.grade,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackDecl {
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub cycle: PathBuf,
    pub duration: Option<f64>,
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub battery: BatteryConfig,
    #[serde(default)]
    pub inverter: InverterConfig,
    #[serde(default)]
    pub motor: MotorConfig,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    /// Edges that carry a unit delay. When absent, the standard set for the
    /// assembled topology is used.
    pub feedback: Option<Vec<FeedbackDecl>>,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_dt() -> f64 {
    0.01
}

impl ScenarioConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check(&self) -> Result<(), HarnessError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config_err(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(config_err(format!("duration must be non-negative, got {d}")));
            }
        }
        self.vehicle.params().validate().map_err(config_err)?;
        if !(self.vehicle.initial_speed >= 0.0) {
            return Err(config_err("vehicle initial_speed must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.battery.initial_soc) {
            return Err(config_err(format!("battery initial_soc {} outside [0, 1]", self.battery.initial_soc)));
        }
        for (name, variant, model) in [
            ("battery", self.battery.variant, &self.battery.model),
            ("inverter", self.inverter.variant, &self.inverter.model),
            ("motor", self.motor.variant, &self.motor.model),
            ("thermal", self.thermal.variant, &self.thermal.model),
        ] {
            if variant == Variant::Surrogate && model.is_none() {
                return Err(config_err(format!("[{name}] variant = \"surrogate\" requires `model`")));
            }
        }
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    ScenarioConfig::parse(&text, base).map_err(|e| match e {
        HarnessError::Config(m) => config_err(format!("{}: {m}", path.display())),
        other => other,
    })
}
