use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use super::component::{Component, StepContext};
use super::graph::{validate_graph, Connection, GraphError, Schedule};
use super::port::{PortRef, Quantity};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("t = {time} s: component `{component}` produced non-finite value on `{port}`")]
    NonFinite { time: f64, component: String, port: String },
    #[error("t = {time} s: component `{component}` failed: {message}")]
    Component { time: f64, component: String, message: String },
    #[error("duration {duration} s is negative or not an integral multiple of dt = {dt} s")]
    InvalidDuration { duration: f64, dt: f64 },
}

#[derive(Clone, Copy, Debug)]
enum Source {
    Current(usize),
    Previous(usize),
}

/// Scalar signal values for every output port, indexed by slot.
#[derive(Clone, Debug)]
pub struct SignalBus {
    names: Arc<[String]>,
    quantities: Arc<[Quantity]>,
    lookup: Arc<HashMap<String, usize>>,
    values: Vec<f64>,
    steps: u64,
    dt: f64,
}

impl SignalBus {
    /// Time is always `steps * dt`, never an accumulated sum.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn quantities(&self) -> &[Quantity] {
        &self.quantities
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slot(&self, qualified: &str) -> Option<usize> {
        self.lookup.get(qualified).copied()
    }

    pub fn get(&self, qualified: &str) -> Option<f64> {
        self.slot(qualified).map(|i| self.values[i])
    }
}

/// Receives the bus after every completed step.
pub trait Recorder {
    fn record(&mut self, bus: &SignalBus);
}

impl<F: FnMut(&SignalBus)> Recorder for F {
    fn record(&mut self, bus: &SignalBus) {
        self(bus)
    }
}

/// A validated, scheduled set of components advanced with a fixed step.
pub struct System {
    components: Vec<Box<dyn Component>>,
    schedule: Schedule,
    offsets: Vec<usize>,
    sources: Vec<Vec<Source>>,
    bus: SignalBus,
    previous: Vec<f64>,
    scratch: Vec<f64>,
}

impl std::fmt::Debug for System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System").field("schedule", &self.schedule).field("time", &self.bus.time()).finish()
    }
}

impl System {
    pub fn new(components: Vec<Box<dyn Component>>, connections: &[Connection], dt: f64) -> Result<Self, GraphError> {
        let schedule = validate_graph(&components, connections, dt)?;

        let mut by_id: HashMap<String, Box<dyn Component>> = components.into_iter().map(|c| (c.id().to_string(), c)).collect();
        let components: Vec<Box<dyn Component>> =
            schedule.order().iter().map(|id| by_id.remove(id).expect("scheduled id exists")).collect();

        let mut offsets = Vec::with_capacity(components.len());
        let mut names = Vec::new();
        let mut quantities = Vec::new();
        let mut values = Vec::new();
        for c in &components {
            offsets.push(names.len());
            let init = c.initial_outputs();
            assert_eq!(init.len(), c.outputs().len(), "component `{}` initial output count", c.id());
            for (p, v) in c.outputs().iter().zip(init) {
                names.push(format!("{}.{}", c.id(), p.name));
                quantities.push(p.quantity);
                values.push(v);
            }
        }
        let lookup: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let position: HashMap<&str, usize> = schedule.order().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut driver: HashMap<PortRef, &Connection> = HashMap::new();
        for c in connections {
            driver.insert(c.to.clone(), c);
        }
        let mut sources = Vec::with_capacity(components.len());
        for (ci, c) in components.iter().enumerate() {
            let mut srcs = Vec::with_capacity(c.inputs().len());
            for (pi, p) in c.inputs().iter().enumerate() {
                let conn = driver[&PortRef::new(c.id(), p.name.clone())];
                let slot = lookup[&conn.from.to_string()];
                let feeds = (0..c.outputs().len()).any(|o| c.feedthrough(pi, o));
                let upstream_first = position[conn.from.component.as_str()] < ci;
                srcs.push(if !conn.feedback && feeds && upstream_first { Source::Current(slot) } else { Source::Previous(slot) });
            }
            sources.push(srcs);
        }

        let previous = values.clone();
        let bus = SignalBus { names: names.into(), quantities: quantities.into(), lookup: Arc::new(lookup), values, steps: 0, dt };
        Ok(System { components, schedule, offsets, sources, bus, previous, scratch: Vec::new() })
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn bus(&self) -> &SignalBus {
        &self.bus
    }

    /// Advances every component exactly once in schedule order.
    pub fn step(&mut self) -> Result<(), SimError> {
        let ctx = StepContext { time: self.bus.time(), dt: self.schedule.dt() };
        self.previous.copy_from_slice(&self.bus.values);
        for (ci, comp) in self.components.iter_mut().enumerate() {
            self.scratch.clear();
            for src in &self.sources[ci] {
                self.scratch.push(match *src {
                    Source::Current(s) => self.bus.values[s],
                    Source::Previous(s) => self.previous[s],
                });
            }
            let off = self.offsets[ci];
            let n = comp.outputs().len();
            let out = &mut self.bus.values[off..off + n];
            comp.step(&ctx, &self.scratch, out).map_err(|e| SimError::Component {
                time: ctx.time,
                component: comp.id().to_string(),
                message: e.0,
            })?;
            if let Some(k) = out.iter().position(|v| !v.is_finite()) {
                return Err(SimError::NonFinite { time: ctx.time, component: comp.id().to_string(), port: comp.outputs()[k].name.clone() });
            }
        }
        self.bus.steps += 1;
        Ok(())
    }

    /// Runs `round(duration / dt)` steps, handing the bus to `recorder`
    /// after each one.
    pub fn run_with<R: Recorder + ?Sized>(&mut self, duration: f64, recorder: &mut R) -> Result<(), SimError> {
        let steps = step_count(duration, self.schedule.dt())?;
        for _ in 0..steps {
            self.step()?;
            recorder.record(&self.bus);
        }
        Ok(())
    }

    /// Runs and collects a [`Trace`] that starts from the current bus.
    pub fn run(&mut self, duration: f64) -> Result<Trace, SimError> {
        let mut trace = Trace::start(&self.bus);
        self.run_with(duration, &mut trace)?;
        Ok(trace)
    }
}

pub fn step_count(duration: f64, dt: f64) -> Result<u64, SimError> {
    let bad = || SimError::InvalidDuration { duration, dt };
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(bad());
    }
    let steps = (duration / dt).round();
    if (steps * dt - duration).abs() > 1e-9 * duration.max(dt) {
        return Err(bad());
    }
    Ok(steps as u64)
}

/// Time series of every bus signal: the initial state plus one row per step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    columns: Vec<String>,
    dt: f64,
    initial: Vec<f64>,
    data: Vec<f64>,
}

impl Recorder for Trace {
    fn record(&mut self, bus: &SignalBus) {
        debug_assert_eq!(bus.values.len(), self.columns.len());
        self.data.extend_from_slice(&bus.values);
    }
}

impl Trace {
    pub fn start(bus: &SignalBus) -> Self {
        Trace { columns: bus.names().to_vec(), dt: bus.dt, initial: bus.values.clone(), data: Vec::new() }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of recorded steps (the initial state is not counted).
    pub fn len(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.data.len() / self.columns.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.columns.len();
        &self.data[k * w..(k + 1) * w]
    }

    pub fn time(&self, k: usize) -> f64 {
        (k as u64 + 1) as f64 * self.dt
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Initial value followed by every recorded value of `name`.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(self.initial[j]);
        v.extend((0..self.len()).map(|k| self.row(k)[j]));
        Some(v)
    }

    /// CSV with a `time_s` column followed by `component.port` columns. The
    /// first data row is the initial state at t = 0.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["time_s".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(self.columns.len() + 1);
        let mut emit = |w: &mut csv::Writer<W>, t: f64, row: &[f64]| -> csv::Result<()> {
            rec.clear();
            rec.push(t.to_string());
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)
        };
        emit(&mut w, 0.0, &self.initial)?;
        for k in 0..self.len() {
            emit(&mut w, self.time(k), self.row(k))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV produced by [`Trace::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Trace, String> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(|e| e.to_string())?.clone();
        if header.get(0) != Some("time_s") {
            return Err("first column must be time_s".into());
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| format!("row {}: {e}", i + 2))?;
            if vals.len() != columns.len() + 1 {
                return Err(format!("row {}: expected {} fields", i + 2, columns.len() + 1));
            }
            rows.push((vals[0], vals[1..].to_vec()));
        }
        let Some((_, initial)) = rows.first().cloned() else {
            return Err("trace has no initial row".into());
        };
        let dt = rows.get(1).map(|r| r.0).unwrap_or(0.0);
        let data = rows.into_iter().skip(1).flat_map(|r| r.1).collect();
        Ok(Trace { columns, dt, initial, data })
    }
}
