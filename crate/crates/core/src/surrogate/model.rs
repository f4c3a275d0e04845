use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{DenseNet, Layer, Normalization};
use super::table::{Axis, GridTable};
use super::ModelError;
use crate::sim::Quantity;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortInfo {
    pub name: String,
    pub unit: String,
}

impl PortInfo {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        PortInfo { name: name.into(), unit: unit.into() }
    }

    pub fn quantity(&self) -> Option<Quantity> {
        Quantity::from_unit(&self.unit)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub rmse: Vec<f64>,
    pub max_abs_err: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub source: String,
    pub created: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationSummary>,
    /// Samples binned into each node by `fit_table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_counts: Option<Vec<usize>>,
    /// Anything else a producer recorded (training settings and the like).
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Table(GridTable),
    Net(DenseNet),
}

/// A loaded data-driven model with its port description. Immutable once
/// constructed and safe to share between simulations.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateModel {
    inputs: Vec<PortInfo>,
    outputs: Vec<PortInfo>,
    payload: Payload,
    pub metadata: Metadata,
}

impl SurrogateModel {
    pub fn new(inputs: Vec<PortInfo>, outputs: Vec<PortInfo>, payload: Payload, metadata: Metadata) -> Result<Self, ModelError> {
        check_ports("inputs", &inputs)?;
        check_ports("outputs", &outputs)?;
        match &payload {
            Payload::Table(t) => {
                if t.dims() != inputs.len() {
                    return Err(ModelError::invalid("table.axes", format!("{} axes for {} inputs", t.dims(), inputs.len())));
                }
                for (i, (a, p)) in t.axes().iter().zip(&inputs).enumerate() {
                    if a.name != p.name || a.unit != p.unit {
                        return Err(ModelError::invalid(
                            format!("table.axes[{i}]"),
                            format!("axis `{}` [{}] does not match input `{}` [{}]", a.name, a.unit, p.name, p.unit),
                        ));
                    }
                }
                if t.outputs() != outputs.len() {
                    return Err(ModelError::invalid(
                        "table.values",
                        format!("table holds {} outputs, model declares {}", t.outputs(), outputs.len()),
                    ));
                }
            }
            Payload::Net(n) => {
                if n.inputs() != inputs.len() {
                    return Err(ModelError::invalid("net.norm_in", format!("{} entries for {} inputs", n.inputs(), inputs.len())));
                }
                if n.outputs() != outputs.len() {
                    return Err(ModelError::invalid("net.norm_out", format!("{} entries for {} outputs", n.outputs(), outputs.len())));
                }
            }
        }
        Ok(SurrogateModel { inputs, outputs, payload, metadata })
    }

    /// Wraps a table, taking input names and units from its axes.
    pub fn from_table(table: GridTable, outputs: Vec<PortInfo>, metadata: Metadata) -> Result<Self, ModelError> {
        let inputs = table.axes().iter().map(|a| PortInfo::new(a.name.clone(), a.unit.clone())).collect();
        SurrogateModel::new(inputs, outputs, Payload::Table(table), metadata)
    }

    pub fn inputs(&self) -> &[PortInfo] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[PortInfo] {
        &self.outputs
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn kind(&self) -> &'static str {
        match self.payload {
            Payload::Table(_) => "table",
            Payload::Net(_) => "net",
        }
    }

    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.inputs.iter().position(|p| p.name == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|p| p.name == name)
    }

    pub fn eval_into(&self, inputs: &[f64], out: &mut [f64]) {
        match &self.payload {
            Payload::Table(t) => t.eval_into(inputs, out),
            Payload::Net(n) => n.eval_into(inputs, out),
        }
    }

    pub fn eval(&self, inputs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs.len()];
        self.eval_into(inputs, &mut out);
        out
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            schema_version: SCHEMA_VERSION,
            kind: self.kind().to_string(),
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            table: match &self.payload {
                Payload::Table(t) => Some(TableSection { axes: t.axes().to_vec(), values: t.values().to_vec() }),
                Payload::Net(_) => None,
            },
            net: match &self.payload {
                Payload::Net(n) => {
                    Some(NetSection { norm_in: n.norm_in().to_vec(), norm_out: n.norm_out().to_vec(), layers: n.layers().to_vec() })
                }
                Payload::Table(_) => None,
            },
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let probe: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        match probe.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(ModelError::SchemaVersion(v)),
            None => return Err(ModelError::invalid("schema_version", "missing or not an unsigned integer")),
        }
        let file: ModelFile = serde_json::from_value(probe).map_err(|e| ModelError::Parse(e.to_string()))?;
        let payload = match (file.kind.as_str(), file.table, file.net) {
            ("table", Some(t), _) => Payload::Table(GridTable::with_outputs(t.axes, t.values, file.outputs.len().max(1))?),
            ("net", _, Some(n)) => Payload::Net(DenseNet::new(n.layers, n.norm_in, n.norm_out)?),
            ("table", None, _) => return Err(ModelError::invalid("table", "kind is table but section is missing")),
            ("net", _, None) => return Err(ModelError::invalid("net", "kind is net but section is missing")),
            (k, _, _) => return Err(ModelError::invalid("kind", format!("unknown model kind `{k}`"))),
        };
        SurrogateModel::new(file.inputs, file.outputs, payload, file.metadata)
    }
}

fn check_ports(loc: &str, ports: &[PortInfo]) -> Result<(), ModelError> {
    if ports.is_empty() {
        return Err(ModelError::invalid(loc, "no ports declared"));
    }
    for (i, p) in ports.iter().enumerate() {
        if ports[..i].iter().any(|q| q.name == p.name) {
            return Err(ModelError::invalid(format!("{loc}[{i}]"), format!("duplicate port name `{}`", p.name)));
        }
    }
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SurrogateModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    SurrogateModel::from_json(&text).map_err(|e| e.in_file(path))
}

pub fn save_model(model: &SurrogateModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, model.to_json()).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_version: u32,
    kind: String,
    inputs: Vec<PortInfo>,
    outputs: Vec<PortInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<TableSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    net: Option<NetSection>,
    #[serde(default)]
    metadata: Metadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableSection {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetSection {
    norm_in: Vec<Normalization>,
    norm_out: Vec<Normalization>,
    layers: Vec<Layer>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::net::Activation;

    fn table_model() -> SurrogateModel {
        let t = GridTable::from_fn(vec![Axis::new("soc", "-", vec![0.0, 0.5, 1.0]), Axis::new("i_dc", "A", vec![-10.0, 0.0, 10.0])], |p| {
            3.0 + p[0] / 3.0 - 0.01 * p[1]
        })
        .unwrap();
        SurrogateModel::from_table(
            t,
            vec![PortInfo::new("terminal_v", "V")],
            Metadata { source: "unit".into(), created: "2026-01-01".into(), ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let m = table_model();
        save_model(&m, &a).unwrap();
        let loaded = load_model(&a).unwrap();
        assert_eq!(loaded, m);
        save_model(&loaded, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    }

    #[test]
    fn bit_exact_numbers() {
        let t = GridTable::new(
            vec![Axis::new("x", "-", vec![0.1, 0.2 + 0.1, 1.0 / 3.0 + 1.0])],
            vec![std::f64::consts::PI, 1e-300, -123456.789e10],
        )
        .unwrap();
        let m = SurrogateModel::from_table(t, vec![PortInfo::new("y", "-")], Metadata::default()).unwrap();
        assert_eq!(SurrogateModel::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn version_mismatch() {
        let text = table_model().to_json().replace("\"schema_version\": 1", "\"schema_version\": 99");
        assert!(matches!(SurrogateModel::from_json(&text), Err(ModelError::SchemaVersion(99))));
    }

    #[test]
    fn non_increasing_axis_rejected_with_location() {
        let text = table_model().to_json().replacen("0.5,", "0.0,", 1);
        let err = SurrogateModel::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("table.axes[0]") && err.contains("soc"), "{err}");
    }

    #[test]
    fn net_round_trip_and_extra_metadata() {
        let net = DenseNet::new(
            vec![
                Layer { weights: vec![vec![0.5, -0.25], vec![1.5, 2.0]], bias: vec![0.1, 0.2], activation: Activation::Tanh },
                Layer { weights: vec![vec![1.0, -1.0]], bias: vec![0.0], activation: Activation::Identity },
            ],
            vec![Normalization { mean: 1.0, scale: 2.0 }, Normalization::IDENTITY],
            vec![Normalization { mean: 300.0, scale: 50.0 }],
        )
        .unwrap();
        let mut meta = Metadata::default();
        meta.extra.insert("epochs".into(), serde_json::json!(2000));
        let m = SurrogateModel::new(
            vec![PortInfo::new("a", "-"), PortInfo::new("b", "A")],
            vec![PortInfo::new("y", "V")],
            Payload::Net(net),
            meta,
        )
        .unwrap();
        let text = m.to_json();
        assert!(!text.contains("\"table\""));
        let back = SurrogateModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn axis_port_mismatch() {
        let text = table_model().to_json().replacen("\"name\": \"soc\"", "\"name\": \"charge\"", 1);
        assert!(SurrogateModel::from_json(&text).is_err());
    }
}
