use std::sync::Arc;

use super::model::SurrogateModel;
use super::ModelError;
use crate::sim::{Component, PortSpec, StepContext, StepError};

/// A surrogate whose ports have been matched by name and quantity against
/// the port spec of the core it replaces. Evaluation takes and returns
/// values in the replaced core's port order.
#[derive(Clone, Debug)]
pub struct BoundModel {
    model: Arc<SurrogateModel>,
    input_map: Vec<usize>,
    output_map: Vec<usize>,
}

impl BoundModel {
    pub fn model(&self) -> &SurrogateModel {
        &self.model
    }

    pub fn eval_into(&self, inputs: &[f64], out: &mut [f64]) {
        let mut x = [0.0; 8];
        let mut y = [0.0; 8];
        let (ni, no) = (self.input_map.len(), self.model.outputs().len());
        if ni <= 8 && no <= 8 {
            for (e, &m) in self.input_map.iter().enumerate() {
                x[m] = inputs[e];
            }
            self.model.eval_into(&x[..ni], &mut y[..no]);
            for (e, &m) in self.output_map.iter().enumerate() {
                out[e] = y[m];
            }
        } else {
            let mut xv = vec![0.0; ni];
            for (e, &m) in self.input_map.iter().enumerate() {
                xv[m] = inputs[e];
            }
            let yv = self.model.eval(&xv);
            for (e, &m) in self.output_map.iter().enumerate() {
                out[e] = yv[m];
            }
        }
    }

    pub fn eval1(&self, inputs: &[f64]) -> f64 {
        let mut out = [0.0];
        self.eval_into(inputs, &mut out);
        out[0]
    }
}

/// Matches model ports one-to-one onto `inputs`/`outputs` (name + quantity).
pub fn bind_core(model: Arc<SurrogateModel>, inputs: &[PortSpec], outputs: &[PortSpec]) -> Result<BoundModel, ModelError> {
    let mut problems = Vec::new();
    let mut map = |expected: &[PortSpec], actual: &[super::PortInfo], side: &str| -> Vec<usize> {
        let mut idx = Vec::new();
        let missing: Vec<&str> = expected.iter().filter(|e| !actual.iter().any(|a| a.name == e.name)).map(|e| e.name.as_str()).collect();
        if !missing.is_empty() {
            problems.push(format!("missing {side} ports: {}", missing.join(", ")));
        }
        let extra: Vec<&str> = actual.iter().filter(|a| !expected.iter().any(|e| e.name == a.name)).map(|a| a.name.as_str()).collect();
        if !extra.is_empty() {
            problems.push(format!("unexpected {side} ports: {}", extra.join(", ")));
        }
        for e in expected {
            if let Some(i) = actual.iter().position(|a| a.name == e.name) {
                let q = actual[i].quantity();
                if q != Some(e.quantity) {
                    problems.push(format!("{side} `{}` has unit `{}` but {} is required", e.name, actual[i].unit, e.quantity));
                }
                idx.push(i);
            }
        }
        idx
    };
    let input_map = map(inputs, model.inputs(), "input");
    let output_map = map(outputs, model.outputs(), "output");
    if !problems.is_empty() {
        return Err(ModelError::PortMismatch(problems.join("; ")));
    }
    Ok(BoundModel { model, input_map, output_map })
}

/// Which inputs feed through to which outputs in a wrapped surrogate.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Feedthrough {
    #[default]
    All,
    None,
    Pairs(Vec<(String, String)>),
}

/// A stateless component that evaluates a surrogate every step.
pub struct SurrogateComponent {
    id: String,
    model: Arc<SurrogateModel>,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
    feed: Vec<Vec<bool>>,
    initial: Vec<f64>,
}

/// Wraps a model as a component with ports named after the model's columns.
pub fn wrap_component(
    id: impl Into<String>,
    model: Arc<SurrogateModel>,
    feedthrough: Feedthrough,
) -> Result<SurrogateComponent, ModelError> {
    let tag = |p: &super::PortInfo| {
        p.quantity().ok_or_else(|| ModelError::PortMismatch(format!("port `{}` has unknown unit `{}`", p.name, p.unit)))
    };
    let inputs: Vec<PortSpec> =
        model.inputs().iter().map(|p| Ok(PortSpec::input(p.name.clone(), tag(p)?))).collect::<Result<_, ModelError>>()?;
    let outputs: Vec<PortSpec> =
        model.outputs().iter().map(|p| Ok(PortSpec::output(p.name.clone(), tag(p)?))).collect::<Result<_, ModelError>>()?;
    let feed = match &feedthrough {
        Feedthrough::All => vec![vec![true; outputs.len()]; inputs.len()],
        Feedthrough::None => vec![vec![false; outputs.len()]; inputs.len()],
        Feedthrough::Pairs(pairs) => {
            let mut f = vec![vec![false; outputs.len()]; inputs.len()];
            for (i, o) in pairs {
                let ii = model.input_index(i).ok_or_else(|| ModelError::PortMismatch(format!("no input `{i}`")))?;
                let oi = model.output_index(o).ok_or_else(|| ModelError::PortMismatch(format!("no output `{o}`")))?;
                f[ii][oi] = true;
            }
            f
        }
    };
    let initial = model.eval(&vec![0.0; inputs.len()]);
    Ok(SurrogateComponent { id: id.into(), model, inputs, outputs, feed, initial })
}

impl SurrogateComponent {
    /// Sets the outputs published before the first step to the model's
    /// response at `inputs`.
    pub fn with_initial_inputs(mut self, inputs: &[f64]) -> Self {
        self.initial = self.model.eval(inputs);
        self
    }
}

impl Component for SurrogateComponent {
    fn id(&self) -> &str {
        &self.id
    }

    fn inputs(&self) -> &[PortSpec] {
        &self.inputs
    }

    fn outputs(&self) -> &[PortSpec] {
        &self.outputs
    }

    fn feedthrough(&self, input: usize, output: usize) -> bool {
        self.feed[input][output]
    }

    fn initial_outputs(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn step(&mut self, _ctx: &StepContext, inputs: &[f64], outputs: &mut [f64]) -> Result<(), StepError> {
        self.model.eval_into(inputs, outputs);
        Ok(())
    }
}

#[cfg(test)]
pub(crate) fn spec(name: &str, q: crate::sim::Quantity, input: bool) -> PortSpec {
    if input {
        PortSpec::input(name, q)
    } else {
        PortSpec::output(name, q)
    }
}
