use std::collections::{BTreeMap, HashMap, HashSet};

use super::component::Component;
use super::port::{PortRef, Quantity};

/// A directed signal connection. Feedback connections are read with a
/// one-tick delay and impose no ordering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Connection {
    pub from: PortRef,
    pub to: PortRef,
    pub feedback: bool,
}

impl Connection {
    pub fn direct(from: PortRef, to: PortRef) -> Self {
        Connection { from, to, feedback: false }
    }

    pub fn feedback(from: PortRef, to: PortRef) -> Self {
        Connection { from, to, feedback: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    order: Vec<String>,
    feedback: Vec<Connection>,
    dt: f64,
}

impl Schedule {
    pub fn order(&self) -> &[String] {
        &self.order
    }

    /// Connections carrying a unit delay; one per declared feedback edge.
    pub fn feedback_edges(&self) -> &[Connection] {
        &self.feedback
    }

    pub fn unit_delays(&self) -> usize {
        self.feedback.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("component graph is empty")]
    Empty,
    #[error("time step must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("duplicate component id `{0}`")]
    DuplicateComponent(String),
    #[error("component `{component}` declares port `{port}` twice")]
    DuplicatePort { component: String, port: String },
    #[error("connection references unknown port `{0}`")]
    UnknownPort(PortRef),
    #[error("connection {from} -> {to}: quantity mismatch ({from_quantity} vs {to_quantity})")]
    QuantityMismatch { from: PortRef, to: PortRef, from_quantity: Quantity, to_quantity: Quantity },
    #[error("input `{0}` is driven by more than one output")]
    MultipleDrivers(PortRef),
    #[error("input `{0}` is not connected")]
    UnconnectedInput(PortRef),
    #[error("algebraic loop without a declared feedback edge: {}", .0.join(" -> "))]
    AlgebraicLoop(Vec<String>),
}

/// Checks the port contract of `components` against `connections` and
/// derives a deterministic execution order.
///
/// Ordering constraints come from non-feedback connections whose target input
/// feeds through to an output of its component. Ties are broken by
/// registration order.
pub fn validate_graph(components: &[Box<dyn Component>], connections: &[Connection], dt: f64) -> Result<Schedule, GraphError> {
    if components.is_empty() {
        return Err(GraphError::Empty);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GraphError::InvalidDt(dt));
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, c) in components.iter().enumerate() {
        if index.insert(c.id(), i).is_some() {
            return Err(GraphError::DuplicateComponent(c.id().to_string()));
        }
        let mut seen = HashSet::new();
        for p in c.inputs().iter().chain(c.outputs()) {
            if !seen.insert(p.name.as_str()) {
                return Err(GraphError::DuplicatePort { component: c.id().to_string(), port: p.name.clone() });
            }
        }
    }

    let find_output = |r: &PortRef| -> Option<(usize, usize)> {
        let ci = *index.get(r.component.as_str())?;
        let pi = components[ci].outputs().iter().position(|p| p.name == r.port)?;
        Some((ci, pi))
    };
    let find_input = |r: &PortRef| -> Option<(usize, usize)> {
        let ci = *index.get(r.component.as_str())?;
        let pi = components[ci].inputs().iter().position(|p| p.name == r.port)?;
        Some((ci, pi))
    };

    let n = components.len();
    let mut driven: HashSet<(usize, usize)> = HashSet::new();
    let mut deps: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut feedback = Vec::new();

    for conn in connections {
        let (fc, fp) = find_output(&conn.from).ok_or_else(|| GraphError::UnknownPort(conn.from.clone()))?;
        let (tc, tp) = find_input(&conn.to).ok_or_else(|| GraphError::UnknownPort(conn.to.clone()))?;
        let fq = components[fc].outputs()[fp].quantity;
        let tq = components[tc].inputs()[tp].quantity;
        if fq != tq {
            return Err(GraphError::QuantityMismatch { from: conn.from.clone(), to: conn.to.clone(), from_quantity: fq, to_quantity: tq });
        }
        if !driven.insert((tc, tp)) {
            return Err(GraphError::MultipleDrivers(conn.to.clone()));
        }
        if conn.feedback {
            feedback.push(conn.clone());
            continue;
        }
        let target = &components[tc];
        let feeds = (0..target.outputs().len()).any(|o| target.feedthrough(tp, o));
        if feeds && !deps[tc].contains(&fc) {
            deps[tc].push(fc);
        }
    }

    for (ci, c) in components.iter().enumerate() {
        for (pi, p) in c.inputs().iter().enumerate() {
            if !driven.contains(&(ci, pi)) {
                return Err(GraphError::UnconnectedInput(PortRef::new(c.id(), p.name.clone())));
            }
        }
    }

    // Kahn's algorithm; the ready set is kept sorted by registration index.
    let mut indegree: Vec<usize> = deps.iter().map(Vec::len).collect();
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, ds) in deps.iter().enumerate() {
        for &d in ds {
            dependents[d].push(c);
        }
    }
    let mut ready: BTreeMap<usize, ()> = (0..n).filter(|&i| indegree[i] == 0).map(|i| (i, ())).collect();
    let mut order = Vec::with_capacity(n);
    while let Some((&next, _)) = ready.iter().next() {
        ready.remove(&next);
        order.push(next);
        for &d in &dependents[next] {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.insert(d, ());
            }
        }
    }

    if order.len() < n {
        let stuck: Vec<usize> = (0..n).filter(|i| indegree[*i] > 0).collect();
        let cycle = find_cycle(&deps, &stuck);
        return Err(GraphError::AlgebraicLoop(cycle.into_iter().map(|i| components[i].id().to_string()).collect()));
    }

    Ok(Schedule { order: order.into_iter().map(|i| components[i].id().to_string()).collect(), feedback, dt })
}

/// Walks dependency edges from a node that is part of a residual cycle and
/// returns the cycle, closed on its first node.
fn find_cycle(deps: &[Vec<usize>], stuck: &[usize]) -> Vec<usize> {
    let stuck_set: HashSet<usize> = stuck.iter().copied().collect();
    let mut path = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    let mut node = stuck[0];
    loop {
        if let Some(&start) = pos.get(&node) {
            let mut cycle: Vec<usize> = path[start..].to_vec();
            cycle.reverse();
            cycle.push(cycle[0]);
            return cycle;
        }
        pos.insert(node, path.len());
        path.push(node);
        // Every stuck node has at least one stuck dependency.
        node = *deps[node].iter().find(|d| stuck_set.contains(d)).expect("residual node without residual dependency");
    }
}
