//! Physics-core sweeps over Cartesian grids, producing training datasets.

use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::assemble::Plants;
use super::{config_err, HarnessError};
use crate::exec::map_ordered;
use crate::plant::battery::VoltageCore;
use crate::plant::inverter::{inverter_efficiency, EfficiencyCore};
use crate::plant::motor::LossCore;
use crate::plant::thermal::{heat_port, steady_state, temp_port, AMBIENT_PORT, COOLANT_PORT};
use crate::sim::{PortSpec, Quantity};
use crate::surrogate::{fit_table_model, Axis, Dataset, PortInfo, SurrogateModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepComponent {
    Battery,
    Inverter,
    Motor,
    Thermal,
}

impl FromStr for SweepComponent {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "battery" => Ok(SweepComponent::Battery),
            "inverter" => Ok(SweepComponent::Inverter),
            "motor" => Ok(SweepComponent::Motor),
            "thermal" => Ok(SweepComponent::Thermal),
            other => Err(config_err(format!("unknown sweep component `{other}` (battery, inverter, motor, thermal)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    pub coords: Option<Vec<f64>>,
}

impl AxisSpec {
    pub fn coords(&self) -> Result<Vec<f64>, HarnessError> {
        match (&self.coords, self.start, self.stop, self.count) {
            (Some(c), None, None, None) => Ok(c.clone()),
            (None, Some(a), Some(b), Some(n)) if n >= 2 => Ok(Axis::linspace(self.name.clone(), "", a, b, n).coords),
            _ => Err(config_err(format!("axis `{}` needs either `coords` or `start`, `stop` and `count` >= 2", self.name))),
        }
    }
}

/// Sweep grid: axes plus an optional seeded jitter, as a fraction of the
/// local half-cell width, applied to every coordinate.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jitter: f64,
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn parse_toml(text: &str) -> Result<Self, HarnessError> {
        let g: GridSpec = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        if !(0.0..1.0).contains(&g.jitter) {
            return Err(config_err(format!("jitter {} must lie in [0, 1)", g.jitter)));
        }
        if g.axes.is_empty() {
            return Err(config_err("grid has no axes"));
        }
        for a in &g.axes {
            a.coords()?;
        }
        Ok(g)
    }

    /// `name=start:stop:count` items separated by commas.
    pub fn parse_inline(text: &str) -> Result<Self, HarnessError> {
        let mut axes = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = || config_err(format!("axis `{item}` is not of the form name=start:stop:count"));
            let (name, range) = item.split_once('=').ok_or_else(bad)?;
            let parts: Vec<&str> = range.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            axes.push(AxisSpec {
                name: name.trim().to_string(),
                start: Some(num(parts[0])?),
                stop: Some(num(parts[1])?),
                count: Some(parts[2].trim().parse().map_err(|_| bad())?),
                coords: None,
            });
        }
        if axes.is_empty() {
            return Err(config_err("empty axis spec"));
        }
        for a in &axes {
            a.coords()?;
        }
        Ok(GridSpec { seed: 0, jitter: 0.0, axes })
    }

    /// A path to a grid file, or an inline spec.
    pub fn from_arg(arg: &str) -> Result<Self, HarnessError> {
        let p = Path::new(arg);
        if p.is_file() {
            let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{arg}: {e}")))?;
            Self::parse_toml(&text).map_err(|e| config_err(format!("{arg}: {e}")))
        } else {
            Self::parse_inline(arg)
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.axes.iter().map(|a| a.name.as_str()).collect()
    }

    /// Grid axes with units looked up by name.
    pub fn build_axes(&self, unit: impl Fn(&str) -> String) -> Result<Vec<Axis>, HarnessError> {
        let axes: Vec<Axis> =
            self.axes.iter().map(|a| Ok(Axis::new(a.name.clone(), unit(&a.name), a.coords()?))).collect::<Result<_, HarnessError>>()?;
        for a in &axes {
            a.check(&format!("grid.axes[{}]", a.name)).map_err(|e| config_err(e.to_string()))?;
        }
        Ok(axes)
    }
}

/// Fits a node-exact table over `grid`, taking the grid axes as inputs and
/// every other dataset column as an output. Axis units come from the data.
pub fn fit_dataset(data: &Dataset, grid: &GridSpec, source: &str, created: &str) -> Result<SurrogateModel, HarnessError> {
    let names = grid.names();
    for n in &names {
        if data.column(n).is_none() {
            return Err(config_err(format!("dataset has no column for axis `{n}`")));
        }
    }
    let unit = |n: &str| data.column(n).map(|i| data.columns[i].unit.clone()).unwrap_or_default();
    let axes = grid.build_axes(unit)?;
    let outputs = data.other_columns(&names);
    if outputs.is_empty() {
        return Err(config_err("dataset has no columns besides the axes"));
    }
    let out_names: Vec<&str> = outputs.iter().map(|c| c.name.as_str()).collect();
    let samples = data.samples(&names, &out_names)?;
    Ok(fit_table_model(&samples, axes, outputs, source, created)?)
}

fn info(p: &PortSpec) -> PortInfo {
    PortInfo::new(p.name.clone(), p.quantity.unit())
}

/// Inputs and outputs of a component's algebraic core. Thermal takes the
/// boundary temperatures as optional extra inputs.
pub fn core_ports(component: SweepComponent, plants: &Plants) -> (Vec<PortInfo>, Vec<PortInfo>) {
    let (ins, outs) = match component {
        SweepComponent::Battery => (VoltageCore::input_ports(), VoltageCore::output_ports()),
        SweepComponent::Inverter => (EfficiencyCore::input_ports(), EfficiencyCore::output_ports()),
        SweepComponent::Motor => (LossCore::input_ports(), LossCore::output_ports()),
        SweepComponent::Thermal => {
            let mut ins: Vec<PortSpec> = plants.heated.iter().map(|n| PortSpec::input(heat_port(n), Quantity::Power)).collect();
            ins.push(PortSpec::input(AMBIENT_PORT, Quantity::Temperature));
            ins.push(PortSpec::input(COOLANT_PORT, Quantity::Temperature));
            let outs = plants.thermal.nodes().iter().map(|n| PortSpec::output(temp_port(&n.id), Quantity::Temperature)).collect();
            (ins, outs)
        }
    };
    (ins.iter().map(info).collect(), outs.iter().map(info).collect())
}

fn check_range(name: &str, coords: &[f64], lo: f64, hi: f64) -> Result<(), HarnessError> {
    for &x in coords {
        if !(x >= lo && x <= hi) {
            return Err(config_err(format!("axis `{name}` value {x} outside the physics range [{lo}, {hi}]")));
        }
    }
    Ok(())
}

fn check_axes(component: SweepComponent, plants: &Plants, axes: &[Axis]) -> Result<(), HarnessError> {
    let (ins, _) = core_ports(component, plants);
    let optional = |n: &str| component == SweepComponent::Thermal && (n == AMBIENT_PORT || n == COOLANT_PORT);
    for a in axes {
        if !ins.iter().any(|p| p.name == a.name) {
            return Err(config_err(format!("axis `{}` is not an input of the {component:?} core", a.name)));
        }
        if axes.iter().filter(|b| b.name == a.name).count() > 1 {
            return Err(config_err(format!("axis `{}` given twice", a.name)));
        }
    }
    for p in &ins {
        if !optional(&p.name) && !axes.iter().any(|a| a.name == p.name) {
            return Err(config_err(format!("grid is missing axis `{}`", p.name)));
        }
    }
    for a in axes {
        let c = &a.coords;
        match (component, a.name.as_str()) {
            (SweepComponent::Battery, "soc") => check_range("soc", c, 0.0, 1.0)?,
            (SweepComponent::Battery, "i_dc") => check_range("i_dc", c, -plants.battery.max_charge_a, plants.battery.max_discharge_a)?,
            (SweepComponent::Battery, "temp_k") => {
                let (lo, hi) = plants.battery.temp_range();
                check_range("temp_k", c, lo, hi)?
            }
            (SweepComponent::Inverter, n) => {
                let t = &plants.inverter.efficiency_map;
                let k = if n == "speed" { 0 } else { 1 };
                check_range(n, c, 0.0, t.axes()[k].max())?
            }
            (SweepComponent::Motor, n) => {
                let t = &plants.motor.loss_map;
                let k = if n == "speed" { 0 } else { 1 };
                check_range(n, c, 0.0, t.axes()[k].max())?
            }
            (SweepComponent::Thermal, n) if optional(n) => check_range(n, c, f64::MIN_POSITIVE, f64::INFINITY)?,
            (SweepComponent::Thermal, n) => check_range(n, c, 0.0, f64::INFINITY)?,
            _ => {}
        }
    }
    Ok(())
}

/// Grid points in row-major order (last axis fastest), each coordinate
/// optionally displaced by up to `jitter` of the half-cell width around it.
pub fn grid_points(axes: &[Axis], jitter: f64, seed: u64) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(Axis::len).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; axes.len()];
    for _ in 0..total {
        let p: Vec<f64> = axes
            .iter()
            .zip(&idx)
            .map(|(a, &i)| {
                let x = a.coords[i];
                if jitter == 0.0 {
                    return x;
                }
                let left = if i > 0 { x - a.coords[i - 1] } else { f64::INFINITY };
                let right = if i + 1 < a.len() { a.coords[i + 1] - x } else { f64::INFINITY };
                let half = 0.5 * jitter * left.min(right);
                let u: f64 = rng.random();
                (x + (2.0 * u - 1.0) * half).clamp(a.min(), a.max())
            })
            .collect();
        points.push(p);
        for d in (0..axes.len()).rev() {
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
    points
}

/// Evaluates the physics core of `component` over the grid.
pub fn run_sweep(plants: &Plants, component: SweepComponent, grid: &GridSpec, jobs: usize) -> Result<Dataset, HarnessError> {
    let (ins, outs) = core_ports(component, plants);
    let unit = |n: &str| ins.iter().find(|p| p.name == n).map(|p| p.unit.clone()).unwrap_or_default();
    let axes = grid.build_axes(unit)?;
    check_axes(component, plants, &axes)?;
    let points = grid_points(&axes, grid.jitter, grid.seed);
    let pos = |name: &str| axes.iter().position(|a| a.name == name);

    let rows: Vec<Result<Vec<f64>, HarnessError>> = match component {
        SweepComponent::Battery => {
            let (s, i, t) = (pos("soc").unwrap(), pos("i_dc").unwrap(), pos("temp_k").unwrap());
            let p = &*plants.battery;
            map_ordered(&points, jobs, |x| Ok(vec![VoltageCore::Physics.terminal_v(p, x[s], x[i], x[t])]))
        }
        SweepComponent::Inverter => {
            let (w, t) = (pos("speed").unwrap(), pos("torque").unwrap());
            let p = &*plants.inverter;
            map_ordered(&points, jobs, |x| Ok(vec![inverter_efficiency(p, x[w], x[t])]))
        }
        SweepComponent::Motor => {
            let (w, t) = (pos("speed").unwrap(), pos("torque").unwrap());
            let p = &*plants.motor;
            map_ordered(&points, jobs, |x| Ok(vec![p.loss(x[w], x[t])]))
        }
        SweepComponent::Thermal => {
            let net = &*plants.thermal;
            let heat_pos: Vec<(usize, usize)> =
                plants.heated.iter().map(|n| (net.node_index(n).expect("heated nodes resolved"), pos(&heat_port(n)).unwrap())).collect();
            let (amb, cool) = (pos(AMBIENT_PORT), pos(COOLANT_PORT));
            map_ordered(&points, jobs, |x| {
                let mut q = vec![0.0; net.nodes().len()];
                for &(node, k) in &heat_pos {
                    q[node] = x[k];
                }
                let b = net.with_boundaries(amb.map_or(net.ambient_k(), |k| x[k]), cool.map_or(net.coolant_k(), |k| x[k]));
                Ok(steady_state(&b, &q)?)
            })
        }
    };
    let mut columns: Vec<PortInfo> = axes.iter().map(|a| PortInfo::new(a.name.clone(), a.unit.clone())).collect();
    columns.extend(outs);
    let mut data = Vec::with_capacity(points.len());
    for (p, r) in points.into_iter().zip(rows) {
        let mut row = p;
        row.extend(r?);
        data.push(row);
    }
    Ok(Dataset { columns, rows: data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;
    use crate::plant::battery::ocv;

    fn plants() -> Plants {
        Plants::from_config(&ScenarioConfig::parse("cycle = \"c.csv\"\n", ".").unwrap()).unwrap()
    }

    fn battery_grid(jitter: f64, seed: u64) -> GridSpec {
        let mut g = GridSpec::parse_inline("soc=0:1:11, i_dc=-250:250:11, temp_k=273.15:323.15:5").unwrap();
        g.jitter = jitter;
        g.seed = seed;
        g
    }

    #[test]
    fn battery_sweep_shape_and_identity() {
        let p = plants();
        let d = run_sweep(&p, SweepComponent::Battery, &battery_grid(0.0, 0), 1).unwrap();
        assert_eq!(d.rows.len(), 605);
        let names: Vec<&str> = d.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["soc", "i_dc", "temp_k", "terminal_v"]);
        assert_eq!(d.columns[3].unit, "V");
        let near = |a: f64, b: f64| (a - b).abs() < 1e-9;
        let row = d.rows.iter().find(|r| near(r[0], 0.5) && r[1] == 0.0 && near(r[2], 298.15)).unwrap();
        assert_eq!(row[3], ocv(&p.battery, row[0]).unwrap());
    }

    #[test]
    fn seeded_jitter_is_reproducible_and_bounded() {
        let p = plants();
        let a = run_sweep(&p, SweepComponent::Battery, &battery_grid(0.5, 42), 1).unwrap();
        let b = run_sweep(&p, SweepComponent::Battery, &battery_grid(0.5, 42), 4).unwrap();
        let c = run_sweep(&p, SweepComponent::Battery, &battery_grid(0.5, 43), 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let exact = run_sweep(&p, SweepComponent::Battery, &battery_grid(0.0, 0), 1).unwrap();
        for (j, e) in a.rows.iter().zip(&exact.rows) {
            assert!((j[0] - e[0]).abs() <= 0.025 + 1e-12);
        }
    }

    #[test]
    fn range_and_name_checks() {
        let p = plants();
        let g = GridSpec::parse_inline("soc=0:1.2:3,i_dc=0:1:2,temp_k=280:300:2").unwrap();
        let e = run_sweep(&p, SweepComponent::Battery, &g, 1).unwrap_err();
        assert!(e.to_string().contains("soc"), "{e}");
        let g = GridSpec::parse_inline("soc=0:1:3,i_dc=0:1:2").unwrap();
        assert!(run_sweep(&p, SweepComponent::Battery, &g, 1).unwrap_err().to_string().contains("temp_k"));
        assert!(GridSpec::parse_inline("soc=0:1").is_err());
        assert!("pump".parse::<SweepComponent>().is_err());
    }

    #[test]
    fn thermal_sweep_matches_steady_state() {
        let p = plants();
        let g = GridSpec::parse_inline("heat_battery=0:1000:3,heat_inverter=0:500:3,heat_motor=0:800:3").unwrap();
        let d = run_sweep(&p, SweepComponent::Thermal, &g, 2).unwrap();
        assert_eq!(d.rows.len(), 27);
        assert_eq!(d.columns.len(), 6);
        let last = d.rows.last().unwrap();
        let want = steady_state(&p.thermal, &[1000.0, 500.0, 800.0]).unwrap();
        assert_eq!(last[3..], want[..]);
    }

    #[test]
    fn grid_file_form() {
        let g = GridSpec::parse_toml(
            "seed = 3\njitter = 0.2\n[[axes]]\nname = \"speed\"\ncoords = [0, 500, 1000]\n[[axes]]\nname = \"torque\"\nstart = 0\nstop = 250\ncount = 6\n",
        )
        .unwrap();
        let d = run_sweep(&plants(), SweepComponent::Motor, &g, 1).unwrap();
        assert_eq!(d.rows.len(), 18);
        assert!(GridSpec::parse_toml("jitter = 1.5\n[[axes]]\nname = \"a\"\ncoords = [0, 1]\n").is_err());
    }

    #[test]
    fn fit_dataset_reproduces_nodes() {
        let p = plants();
        let g = GridSpec::parse_inline("speed=0:1000:5,torque=0:250:6").unwrap();
        let d = run_sweep(&p, SweepComponent::Motor, &g, 1).unwrap();
        let m = fit_dataset(&d, &g, "motor.csv", "t0").unwrap();
        assert_eq!(m.outputs()[0].name, "loss_w");
        assert_eq!(m.inputs()[1].unit, "N*m");
        for r in &d.rows {
            assert_eq!(m.eval(&r[..2])[0], r[2]);
        }
        let bad = GridSpec::parse_inline("speed=0:1000:5,current=0:1:2").unwrap();
        assert!(fit_dataset(&d, &bad, "x", "t0").is_err());
    }
}
