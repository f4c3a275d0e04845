use serde::{Deserialize, Serialize};

use super::ModelError;

/// A named, strictly increasing grid coordinate array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub unit: String,
    pub coords: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, coords: Vec<f64>) -> Self {
        Axis { name: name.into(), unit: unit.into(), coords }
    }

    /// `count` evenly spaced points from `start` to `stop` inclusive.
    pub fn linspace(name: impl Into<String>, unit: impl Into<String>, start: f64, stop: f64, count: usize) -> Self {
        let coords = match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
        };
        Axis::new(name, unit, coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.coords[0]
    }

    pub fn max(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub(crate) fn check(&self, location: &str) -> Result<(), ModelError> {
        if self.coords.is_empty() {
            return Err(ModelError::invalid(location, format!("axis `{}` has no coordinates", self.name)));
        }
        if let Some(i) = self.coords.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::invalid(location, format!("axis `{}` coordinate {i} is not finite", self.name)));
        }
        if let Some(i) = self.coords.windows(2).position(|w| w[1] <= w[0]) {
            return Err(ModelError::invalid(
                location,
                format!(
                    "axis `{}` is not strictly increasing at index {} ({} then {})",
                    self.name,
                    i + 1,
                    self.coords[i],
                    self.coords[i + 1]
                ),
            ));
        }
        Ok(())
    }

    /// Lower cell index and fractional position of `x`, clamped to the axis.
    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let c = &self.coords;
        let n = c.len();
        if n == 1 {
            return (0, 0.0);
        }
        let x = x.clamp(c[0], c[n - 1]);
        let i = c.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2);
        (i, (x - c[i]) / (c[i + 1] - c[i]))
    }
}

/// Regular-grid lookup table evaluated by multilinear interpolation.
///
/// Values are stored row-major with the last axis varying fastest. A table
/// may carry several outputs per node; they are interleaved as the innermost
/// index so a single-output table is exactly the plain row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTable {
    axes: Vec<Axis>,
    values: Vec<f64>,
    outputs: usize,
    strides: Vec<usize>,
}

pub const MAX_TABLE_DIMS: usize = 4;

impl GridTable {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_outputs(axes, values, 1)
    }

    pub fn with_outputs(axes: Vec<Axis>, values: Vec<f64>, outputs: usize) -> Result<Self, ModelError> {
        if axes.is_empty() || axes.len() > MAX_TABLE_DIMS {
            return Err(ModelError::invalid("table.axes", format!("table must have 1 to 4 axes, got {}", axes.len())));
        }
        if outputs == 0 {
            return Err(ModelError::invalid("table", "table must have at least one output"));
        }
        for (i, a) in axes.iter().enumerate() {
            a.check(&format!("table.axes[{i}]"))?;
        }
        let nodes: usize = axes.iter().map(Axis::len).product();
        if values.len() != nodes * outputs {
            return Err(ModelError::invalid(
                "table.values",
                format!("expected {} values ({} nodes x {} outputs), got {}", nodes * outputs, nodes, outputs, values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::invalid(format!("table.values[{i}]"), "value is not finite"));
        }
        let mut strides = vec![outputs; axes.len()];
        for d in (0..axes.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * axes[d + 1].len();
        }
        Ok(GridTable { axes, values, outputs, strides })
    }

    /// Builds a single-output table by evaluating `f` at every node.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self, ModelError> {
        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let nodes: usize = shape.iter().product();
        let mut values = Vec::with_capacity(nodes);
        let mut point = vec![0.0; axes.len()];
        for k in 0..nodes {
            node_point(&axes, &shape, k, &mut point);
            values.push(f(&point));
        }
        GridTable::new(axes, values)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    /// Coordinates of node `k` in row-major order.
    pub fn node(&self, k: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dims()];
        node_point(&self.axes, &self.shape(), k, &mut p);
        p
    }

    /// First output at `point`.
    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut out = [0.0];
        if self.outputs == 1 {
            self.eval_into(point, &mut out);
            out[0]
        } else {
            let mut all = vec![0.0; self.outputs];
            self.eval_into(point, &mut all);
            all[0]
        }
    }

    /// Multilinear interpolation of every output at `point`; coordinates
    /// outside an axis are clamped to it first.
    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) {
        debug_assert_eq!(point.len(), self.dims());
        debug_assert_eq!(out.len(), self.outputs);
        let d = self.dims();
        let mut lo = [0usize; MAX_TABLE_DIMS];
        let mut frac = [0.0f64; MAX_TABLE_DIMS];
        for k in 0..d {
            let (i, t) = self.axes[k].locate(point[k]);
            lo[k] = i;
            frac[k] = t;
        }
        out.fill(0.0);
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut base = 0;
            let mut skip = false;
            for k in 0..d {
                let hi = (corner >> (d - 1 - k)) & 1 == 1;
                if hi {
                    if self.axes[k].len() == 1 {
                        skip = true;
                        break;
                    }
                    w *= frac[k];
                    base += (lo[k] + 1) * self.strides[k];
                } else {
                    w *= 1.0 - frac[k];
                    base += lo[k] * self.strides[k];
                }
            }
            if skip || w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&self.values[base..base + self.outputs]) {
                *o += w * v;
            }
        }
    }
}

/// Interpolates a single-output table.
pub fn eval_table(table: &GridTable, point: &[f64]) -> f64 {
    table.eval(point)
}

pub(crate) fn node_point(axes: &[Axis], shape: &[usize], mut k: usize, point: &mut [f64]) {
    for d in (0..axes.len()).rev() {
        let i = k % shape[d];
        k /= shape[d];
        point[d] = axes[d].coords[i];
    }
}
