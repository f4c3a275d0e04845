use std::path::Path;

use super::HarnessError;
use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};

/// Target speed over time; linearly interpolated between samples and held
/// at the last sample afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveCycle {
    pub name: String,
    times: Vec<f64>,
    speeds: Vec<f64>,
}

impl DriveCycle {
    pub fn new(name: impl Into<String>, samples: &[(f64, f64)]) -> Result<Self, String> {
        if samples.len() < 2 {
            return Err("a drive cycle needs at least two samples".into());
        }
        if samples[0].0 != 0.0 {
            return Err("a drive cycle must start at time 0".into());
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(format!("time not strictly increasing at sample {}", i + 2));
            }
        }
        if let Some(s) = samples.iter().find(|s| !(s.1 >= 0.0) || !s.0.is_finite() || !s.1.is_finite()) {
            return Err(format!("invalid speed {} at time {}", s.1, s.0));
        }
        Ok(DriveCycle { name: name.into(), times: samples.iter().map(|s| s.0).collect(), speeds: samples.iter().map(|s| s.1).collect() })
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("non-empty cycle")
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.speeds.iter().copied())
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.speeds[0];
        }
        if t >= self.times[n - 1] {
            return self.speeds[n - 1];
        }
        let j = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        self.speeds[j - 1] + w * (self.speeds[j] - self.speeds[j - 1])
    }
}

/// Parses `time_s,speed_mps` CSV. Line numbers in errors are 1-based file
/// lines, the header being line 1.
pub fn parse_drive_cycle(name: &str, text: &str) -> Result<DriveCycle, HarnessError> {
    let err = |line: u64, message: String| HarnessError::Cycle { path: name.to_string(), line, message };
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != ["time_s", "speed_mps"] {
        return Err(err(1, "expected header `time_s,speed_mps`".into()));
    }
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, what: &str| -> Result<f64, HarnessError> {
            rec.get(i)
                .ok_or_else(|| err(line, format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|e| err(line, format!("bad {what}: {e}")))
        };
        let (t, v) = (field(0, "time")?, field(1, "speed")?);
        if !t.is_finite() || !v.is_finite() {
            return Err(err(line, "non-finite value".into()));
        }
        if let Some(&(prev, _)) = samples.last() {
            if !(t > prev) {
                return Err(err(line, format!("time {t} does not increase (previous {prev})")));
            }
        } else if t != 0.0 {
            return Err(err(line, format!("first sample must be at time 0, got {t}")));
        }
        if v < 0.0 {
            return Err(err(line, format!("negative speed {v}")));
        }
        samples.push((t, v));
    }
    let last = r.position().line();
    DriveCycle::new(name, &samples).map_err(|m| err(last, m))
}

pub fn load_drive_cycle(path: impl AsRef<Path>) -> Result<DriveCycle, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    parse_drive_cycle(&path.display().to_string(), &text)
}

/// Publishes the cycle's target speed for the end of each step.
pub struct CycleComponent {
    id: String,
    cycle: DriveCycle,
    outputs: Vec<PortSpec>,
}

impl CycleComponent {
    pub fn new(id: impl Into<String>, cycle: DriveCycle) -> Self {
        CycleComponent { id: id.into(), cycle, outputs: vec![PortSpec::output("v_target", Quantity::Velocity)] }
    }
}

impl Component for CycleComponent {
    fn id(&self) -> &str {
        &self.id
    }

    fn inputs(&self) -> &[PortSpec] {
        &[]
    }

    fn outputs(&self) -> &[PortSpec] {
        &self.outputs
    }

    fn initial_outputs(&self) -> Vec<f64> {
        vec![self.cycle.speed_at(0.0)]
    }

    fn step(&mut self, ctx: &StepContext, _inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        out[0] = self.cycle.speed_at(ctx.end_time());
        Ok(())
    }
}
