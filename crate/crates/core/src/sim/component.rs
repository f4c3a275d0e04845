use super::port::PortSpec;

/// Timing handed to every component step. `time` is the start of the step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepContext {
    pub time: f64,
    pub dt: f64,
}

impl StepContext {
    pub fn end_time(&self) -> f64 {
        self.time + self.dt
    }
}

/// Failure raised by a component from inside its step.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct StepError(pub String);

impl StepError {
    pub fn new(msg: impl Into<String>) -> Self {
        StepError(msg.into())
    }
}

/// The uniform step contract shared by physics plants, controllers and
/// surrogate-backed plants.
///
/// A component owns its continuous state. `step` reads the inputs for the
/// current tick, advances the state by `ctx.dt` and writes every output.
/// Implementations must be deterministic and must not touch anything besides
/// `self` and `outputs`.
pub trait Component: Send {
    fn id(&self) -> &str;

    fn inputs(&self) -> &[PortSpec];

    fn outputs(&self) -> &[PortSpec];

    /// Whether `inputs()[input]` influences `outputs()[output]` within the
    /// same step. Defaults to full feedthrough.
    fn feedthrough(&self, _input: usize, _output: usize) -> bool {
        true
    }

    /// Output values visible on the bus before the first step.
    fn initial_outputs(&self) -> Vec<f64>;

    fn step(&mut self, ctx: &StepContext, inputs: &[f64], outputs: &mut [f64]) -> Result<(), StepError>;
}

impl std::fmt::Debug for dyn Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Component")
            .field("id", &self.id())
            .field("inputs", &self.inputs().len())
            .field("outputs", &self.outputs().len())
            .finish()
    }
}
