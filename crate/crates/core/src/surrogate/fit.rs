use std::io::{BufRead, BufReader, Read, Write};

use serde::Serialize;

use super::model::{Metadata, PortInfo, SurrogateModel, ValidationSummary};
use super::table::{node_point, Axis, GridTable};
use super::ModelError;

/// Column-oriented tabular data with optional per-column units, as written
/// by the sweep harness.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub columns: Vec<PortInfo>,
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Every column not named in `inputs`, in file order.
    pub fn other_columns(&self, inputs: &[&str]) -> Vec<PortInfo> {
        self.columns.iter().filter(|c| !inputs.contains(&c.name.as_str())).cloned().collect()
    }

    /// Samples laid out for `model`, matching columns by port name.
    pub fn samples_for(&self, model: &SurrogateModel) -> Result<Vec<Sample>, ModelError> {
        let ins: Vec<&str> = model.inputs().iter().map(|p| p.name.as_str()).collect();
        let outs: Vec<&str> = model.outputs().iter().map(|p| p.name.as_str()).collect();
        self.samples(&ins, &outs)
    }

    /// Reads CSV with an optional leading `# name [unit], ...` comment.
    pub fn read_csv<R: Read>(input: R) -> Result<Dataset, ModelError> {
        let mut reader = BufReader::new(input);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| ModelError::Data(e.to_string()))?;
        let mut units: Vec<(String, String)> = Vec::new();
        let mut header_line = None;
        if let Some(comment) = first.trim_start().strip_prefix('#') {
            for field in comment.split(',') {
                let field = field.trim();
                if let Some((name, rest)) = field.split_once('[') {
                    units.push((name.trim().to_string(), rest.trim_end_matches(']').trim().to_string()));
                }
            }
        } else {
            header_line = Some(first);
        }
        let mut rest = String::new();
        if let Some(h) = header_line {
            rest.push_str(&h);
        }
        reader.read_to_string(&mut rest).map_err(|e| ModelError::Data(e.to_string()))?;

        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(rest.as_bytes());
        let header = r.headers().map_err(|e| ModelError::Data(e.to_string()))?.clone();
        let columns: Vec<PortInfo> = header
            .iter()
            .map(|name| {
                let unit = units.iter().find(|(n, _)| n == name).map(|(_, u)| u.clone()).unwrap_or_default();
                PortInfo::new(name, unit)
            })
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| ModelError::Data(format!("row {}: {e}", i + 1)))?;
            let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let row = row.map_err(|e| ModelError::Data(format!("row {}: {e}", i + 1)))?;
            if row.len() != columns.len() {
                return Err(ModelError::Data(format!("row {}: expected {} fields, got {}", i + 1, columns.len(), row.len())));
            }
            rows.push(row);
        }
        Ok(Dataset { columns, rows })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        let annotated: Vec<String> = self.columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)).collect();
        writeln!(out, "# {}", annotated.join(", "))?;
        let names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(out, "{}", names.join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        out.flush()
    }

    /// Splits rows into (inputs, outputs) pairs for the named columns.
    pub fn samples(&self, inputs: &[&str], outputs: &[&str]) -> Result<Vec<Sample>, ModelError> {
        let find = |n: &&str| self.column(n).ok_or_else(|| ModelError::Data(format!("column `{n}` not found")));
        let ii: Vec<usize> = inputs.iter().map(find).collect::<Result<_, _>>()?;
        let oi: Vec<usize> = outputs.iter().map(find).collect::<Result<_, _>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| Sample { inputs: ii.iter().map(|&i| r[i]).collect(), outputs: oi.iter().map(|&i| r[i]).collect() })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableFit {
    pub table: GridTable,
    pub counts: Vec<usize>,
}

/// Nearest-node binning: every node takes the mean of the samples whose
/// inputs lie within half a cell of it on every axis.
pub fn fit_table(samples: &[Sample], axes: Vec<Axis>) -> Result<TableFit, ModelError> {
    let outputs = samples.first().map_or(1, |s| s.outputs.len());
    // Build a throwaway table to validate the axes.
    let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
    let nodes: usize = shape.iter().product();
    GridTable::with_outputs(axes.clone(), vec![0.0; nodes * outputs.max(1)], outputs.max(1))?;
    if outputs == 0 {
        return Err(ModelError::Data("samples have no outputs".into()));
    }

    let mut sums = vec![0.0; nodes * outputs];
    let mut counts = vec![0usize; nodes];
    'samples: for (si, s) in samples.iter().enumerate() {
        if s.inputs.len() != axes.len() || s.outputs.len() != outputs {
            return Err(ModelError::Data(format!("sample {si} has the wrong arity")));
        }
        let mut k = 0;
        for (a, &x) in axes.iter().zip(&s.inputs) {
            match nearest_node(a, x) {
                Some(i) => k = k * a.len() + i,
                None => continue 'samples,
            }
        }
        counts[k] += 1;
        for (acc, y) in sums[k * outputs..(k + 1) * outputs].iter_mut().zip(&s.outputs) {
            *acc += y;
        }
    }

    if let Some(k) = counts.iter().position(|&c| c == 0) {
        let mut p = vec![0.0; axes.len()];
        node_point(&axes, &shape, k, &mut p);
        let desc: Vec<String> = axes.iter().zip(&p).map(|(a, v)| format!("{}={}", a.name, v)).collect();
        return Err(ModelError::Coverage { node: k, point: desc.join(", ") });
    }
    for (k, &c) in counts.iter().enumerate() {
        for v in &mut sums[k * outputs..(k + 1) * outputs] {
            *v /= c as f64;
        }
    }
    Ok(TableFit { table: GridTable::with_outputs(axes, sums, outputs)?, counts })
}

/// Fits a table and packages it as a model, recording node counts.
pub fn fit_table_model(
    samples: &[Sample],
    axes: Vec<Axis>,
    outputs: Vec<PortInfo>,
    source: impl Into<String>,
    created: impl Into<String>,
) -> Result<SurrogateModel, ModelError> {
    let TableFit { table, counts } = fit_table(samples, axes)?;
    let meta = Metadata { source: source.into(), created: created.into(), sample_counts: Some(counts), ..Default::default() };
    SurrogateModel::from_table(table, outputs, meta)
}

fn nearest_node(axis: &Axis, x: f64) -> Option<usize> {
    let c = &axis.coords;
    let n = c.len();
    if !x.is_finite() {
        return None;
    }
    if n == 1 {
        return (x == c[0]).then_some(0);
    }
    let j = c.partition_point(|&v| v <= x);
    let i = if j == 0 {
        0
    } else if j == n {
        n - 1
    } else if x - c[j - 1] <= c[j] - x {
        j - 1
    } else {
        j
    };
    let half = |a: usize, b: usize| 0.5 * (c[b] - c[a]);
    let below = if i == 0 { half(0, 1) } else { half(i - 1, i) };
    let above = if i == n - 1 { half(n - 2, n - 1) } else { half(i, i + 1) };
    (x >= c[i] - below && x <= c[i] + above).then_some(i)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputMetrics {
    pub name: String,
    pub rmse: f64,
    pub max_abs_err: f64,
    /// Absent when the holdout targets have zero variance.
    pub r2: Option<f64>,
}

/// Root-mean-square error, max absolute error and coefficient of
/// determination per model output.
pub fn validate(model: &SurrogateModel, holdout: &[Sample]) -> Result<Vec<OutputMetrics>, ModelError> {
    if holdout.is_empty() {
        return Err(ModelError::Data("holdout set is empty".into()));
    }
    let m = model.outputs().len();
    let mut pred = vec![0.0; m];
    let mut sq = vec![0.0; m];
    let mut max = vec![0.0f64; m];
    let mut mean = vec![0.0; m];
    for s in holdout {
        if s.inputs.len() != model.inputs().len() || s.outputs.len() != m {
            return Err(ModelError::Data("holdout sample arity does not match model".into()));
        }
        model.eval_into(&s.inputs, &mut pred);
        for j in 0..m {
            let e = pred[j] - s.outputs[j];
            sq[j] += e * e;
            max[j] = max[j].max(e.abs());
            mean[j] += s.outputs[j];
        }
    }
    let n = holdout.len() as f64;
    Ok((0..m)
        .map(|j| {
            let mu = mean[j] / n;
            let ss_tot: f64 = holdout.iter().map(|s| (s.outputs[j] - mu).powi(2)).sum();
            OutputMetrics {
                name: model.outputs()[j].name.clone(),
                rmse: (sq[j] / n).sqrt(),
                max_abs_err: max[j],
                r2: (ss_tot > 0.0).then(|| 1.0 - sq[j] / ss_tot),
            }
        })
        .collect())
}

pub fn summarize(metrics: &[OutputMetrics]) -> ValidationSummary {
    ValidationSummary { rmse: metrics.iter().map(|m| m.rmse).collect(), max_abs_err: metrics.iter().map(|m| m.max_abs_err).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(inputs: &[f64], out: f64) -> Sample {
        Sample { inputs: inputs.to_vec(), outputs: vec![out] }
    }

    fn axes() -> Vec<Axis> {
        vec![Axis::new("x", "-", vec![0.0, 1.0, 2.0]), Axis::new("y", "-", vec![0.0, 10.0])]
    }

    #[test]
    fn exact_node_samples_reproduce() {
        let samples: Vec<Sample> = (0..3).flat_map(|i| (0..2).map(move |j| s(&[i as f64, 10.0 * j as f64], (i * 2 + j) as f64))).collect();
        let fit = fit_table(&samples, axes()).unwrap();
        assert_eq!(fit.table.values(), &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(fit.counts, vec![1; 6]);
    }

    #[test]
    fn node_value_is_sample_mean() {
        let mut samples: Vec<Sample> = (0..3).flat_map(|i| (0..2).map(move |j| s(&[i as f64, 10.0 * j as f64], 0.0))).collect();
        samples[0] = s(&[0.1, 1.0], 1.0);
        samples.push(s(&[-0.2, 0.0], 3.0));
        let fit = fit_table(&samples, axes()).unwrap();
        assert_eq!(fit.table.values()[0], 2.0);
        assert_eq!(fit.counts[0], 2);
    }

    #[test]
    fn uncovered_node_named() {
        let samples = vec![s(&[0.0, 0.0], 1.0), s(&[1.0, 0.0], 1.0)];
        let err = fit_table(&samples, axes()).unwrap_err();
        match &err {
            ModelError::Coverage { node, point } => {
                assert_eq!(*node, 1);
                assert_eq!(point, "x=0, y=10");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn far_outside_samples_ignored() {
        let a = [Axis::new("x", "-", vec![0.0, 1.0])];
        assert_eq!(nearest_node(&a[0], -0.5), Some(0));
        assert_eq!(nearest_node(&a[0], -0.51), None);
        assert_eq!(nearest_node(&a[0], 0.5), Some(0));
        assert_eq!(nearest_node(&a[0], 0.51), Some(1));
    }

    fn identity_model() -> SurrogateModel {
        let t = GridTable::from_fn(vec![Axis::new("x", "-", vec![0.0, 10.0])], |p| p[0]).unwrap();
        SurrogateModel::from_table(t, vec![PortInfo::new("y", "-")], Metadata::default()).unwrap()
    }

    #[test]
    fn metrics() {
        let m = identity_model();
        let perfect: Vec<Sample> = (0..5).map(|i| s(&[i as f64], i as f64)).collect();
        let r = &validate(&m, &perfect).unwrap()[0];
        assert_eq!((r.rmse, r.max_abs_err, r.r2), (0.0, 0.0, Some(1.0)));

        let offset: Vec<Sample> = (0..5).map(|i| s(&[i as f64], i as f64 - 1.0)).collect();
        let r = &validate(&m, &offset).unwrap()[0];
        assert_eq!((r.rmse, r.max_abs_err), (1.0, 1.0));

        let constant: Vec<Sample> = (0..5).map(|i| s(&[i as f64], 2.0)).collect();
        assert_eq!(validate(&m, &constant).unwrap()[0].r2, None);
        assert!(validate(&m, &[]).is_err());
    }

    #[test]
    fn csv_round_trip_with_units() {
        let d = Dataset {
            columns: vec![PortInfo::new("soc", "-"), PortInfo::new("terminal_v", "V")],
            rows: vec![vec![0.5, 370.25], vec![1.0, 0.1 + 0.2]],
        };
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# soc [-], terminal_v [V]\nsoc,terminal_v\n"));
        assert_eq!(Dataset::read_csv(&buf[..]).unwrap(), d);
        let plain = Dataset::read_csv("a,b\n1,2\n".as_bytes()).unwrap();
        assert_eq!(plain.columns[0].unit, "");
        assert!(Dataset::read_csv("a,b\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn samples_select_columns_by_name() {
        let d = Dataset::read_csv("b,a,y\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        let s = d.samples(&["a", "b"], &["y"]).unwrap();
        assert_eq!(s[1].inputs, vec![5.0, 4.0]);
        assert_eq!(s[1].outputs, vec![6.0]);
        assert_eq!(d.other_columns(&["a", "b"])[0].name, "y");
        assert!(d.samples(&["z"], &[]).is_err());
    }
}
