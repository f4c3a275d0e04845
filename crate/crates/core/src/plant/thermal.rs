//! Lumped thermal network: capacitive nodes joined by conductances, with
//! ambient and coolant as fixed-temperature boundaries. Integrated with
//! explicit Euler; the steady state is solved directly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{params_err, PlantError};
use crate::sim::{Component, PortSpec, Quantity, StepContext, StepError};
use crate::surrogate::{bind_core, BoundModel, ModelError, SurrogateModel};

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalNode {
    pub id: String,
    pub capacity: f64,
    pub initial_k: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Node(String),
    Ambient,
    Coolant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalEdge {
    pub a: String,
    pub b: Endpoint,
    pub conductance: f64,
}

/// Coolant-side conductances become `m*cp*(1 - exp(-UA/(m*cp)))`, the
/// effectiveness form for a fixed-inlet-temperature loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoolantFlow {
    pub mass_flow: f64,
    pub cp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Target {
    Node(usize),
    Ambient,
    Coolant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThermalNetwork {
    nodes: Vec<ThermalNode>,
    edges: Vec<ThermalEdge>,
    ambient_k: f64,
    coolant_k: f64,
    flow: Option<CoolantFlow>,
    resolved: Vec<(usize, Target, f64)>,
}

impl ThermalNetwork {
    pub fn new(
        nodes: Vec<ThermalNode>,
        edges: Vec<ThermalEdge>,
        ambient_k: f64,
        coolant_k: f64,
        flow: Option<CoolantFlow>,
    ) -> Result<Self, PlantError> {
        if nodes.is_empty() {
            return Err(params_err("thermal network has no nodes"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if !(n.capacity > 0.0 && n.capacity.is_finite()) {
                return Err(params_err(format!("thermal node `{}` capacity must be positive", n.id)));
            }
            if !(n.initial_k > 0.0 && n.initial_k.is_finite()) {
                return Err(params_err(format!("thermal node `{}` initial temperature must be positive", n.id)));
            }
            if nodes[..i].iter().any(|m| m.id == n.id) {
                return Err(params_err(format!("duplicate thermal node `{}`", n.id)));
            }
        }
        for (name, t) in [("ambient", ambient_k), ("coolant", coolant_k)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(params_err(format!("{name} temperature must be positive")));
            }
        }
        if let Some(f) = flow {
            if !(f.mass_flow > 0.0 && f.cp > 0.0) {
                return Err(params_err("coolant mass flow and heat capacity must be positive"));
            }
        }
        let index = |id: &str| {
            nodes.iter().position(|n| n.id == id).ok_or_else(|| params_err(format!("thermal edge references unknown node `{id}`")))
        };
        let mut resolved = Vec::with_capacity(edges.len());
        for e in &edges {
            if !(e.conductance >= 0.0 && e.conductance.is_finite()) {
                return Err(params_err(format!("conductance on edge from `{}` must be non-negative", e.a)));
            }
            let a = index(&e.a)?;
            let (b, g) = match &e.b {
                Endpoint::Node(id) => {
                    let b = index(id)?;
                    if a == b {
                        return Err(params_err(format!("thermal edge from `{id}` to itself")));
                    }
                    (Target::Node(b), e.conductance)
                }
                Endpoint::Ambient => (Target::Ambient, e.conductance),
                Endpoint::Coolant => (Target::Coolant, effective_conductance(e.conductance, flow)),
            };
            resolved.push((a, b, g));
        }
        Ok(ThermalNetwork { nodes, edges, ambient_k, coolant_k, flow, resolved })
    }

    pub fn nodes(&self) -> &[ThermalNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[ThermalEdge] {
        &self.edges
    }

    pub fn ambient_k(&self) -> f64 {
        self.ambient_k
    }

    pub fn coolant_k(&self) -> f64 {
        self.coolant_k
    }

    pub fn flow(&self) -> Option<CoolantFlow> {
        self.flow
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn initial_temps(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.initial_k).collect()
    }

    /// Same network with different boundary temperatures.
    pub fn with_boundaries(&self, ambient_k: f64, coolant_k: f64) -> Self {
        ThermalNetwork { ambient_k, coolant_k, ..self.clone() }
    }

    /// Total conductance attached to each node.
    pub fn node_conductance(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.nodes.len()];
        for &(a, b, c) in &self.resolved {
            g[a] += c;
            if let Target::Node(b) = b {
                g[b] += c;
            }
        }
        g
    }

    /// Largest explicit-Euler step, `min C_i / sum_j G_ij`.
    pub fn max_stable_dt(&self) -> f64 {
        self.nodes
            .iter()
            .zip(self.node_conductance())
            .map(|(n, g)| if g > 0.0 { n.capacity / g } else { f64::INFINITY })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_dt(&self, dt: f64) -> Result<(), PlantError> {
        let limit = self.max_stable_dt();
        if !(dt < limit) {
            return Err(params_err(format!("dt {dt} is not below the thermal stability limit {limit}")));
        }
        Ok(())
    }

    fn boundary(&self, t: Target) -> f64 {
        match t {
            Target::Ambient => self.ambient_k,
            Target::Coolant => self.coolant_k,
            Target::Node(_) => unreachable!("node targets carry no boundary temperature"),
        }
    }

    /// Net heat flow into each node through the conductances, W.
    pub fn conduction(&self, temps: &[f64], flows: &mut [f64]) {
        flows.iter_mut().for_each(|f| *f = 0.0);
        for &(a, b, g) in &self.resolved {
            match b {
                Target::Node(b) => {
                    let q = g * (temps[b] - temps[a]);
                    flows[a] += q;
                    flows[b] -= q;
                }
                t => flows[a] += g * (self.boundary(t) - temps[a]),
            }
        }
    }

    /// Heat entering the network from ambient and coolant, W.
    pub fn boundary_inflow(&self, temps: &[f64]) -> f64 {
        self.resolved
            .iter()
            .filter_map(|&(a, b, g)| match b {
                Target::Node(_) => None,
                t => Some(g * (self.boundary(t) - temps[a])),
            })
            .sum()
    }
}

fn effective_conductance(ua: f64, flow: Option<CoolantFlow>) -> f64 {
    match flow {
        None => ua,
        Some(f) => {
            let c = f.mass_flow * f.cp;
            c * (1.0 - (-ua / c).exp())
        }
    }
}

impl Default for ThermalNetwork {
    /// Battery, inverter and motor nodes, each tied to a coolant loop and to
    /// ambient, both at 25 C.
    fn default() -> Self {
        let node = |id: &str, c: f64| ThermalNode { id: id.into(), capacity: c, initial_k: 298.15 };
        let mut edges = Vec::new();
        for (id, g) in [("battery", 50.0), ("inverter", 30.0), ("motor", 40.0)] {
            edges.push(ThermalEdge { a: id.into(), b: Endpoint::Coolant, conductance: g });
            edges.push(ThermalEdge { a: id.into(), b: Endpoint::Ambient, conductance: 2.0 });
        }
        ThermalNetwork::new(vec![node("battery", 3.0e5), node("inverter", 2000.0), node("motor", 15_000.0)], edges, 298.15, 298.15, None)
            .expect("default thermal network")
    }
}

/// `T_i' = T_i + dt/C_i * (heat_i + sum_j G_ij (T_j - T_i))`.
pub fn step_thermal(net: &ThermalNetwork, temps: &[f64], heats: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; temps.len()];
    step_thermal_into(net, temps, heats, dt, &mut out);
    out
}

pub fn step_thermal_into(net: &ThermalNetwork, temps: &[f64], heats: &[f64], dt: f64, out: &mut [f64]) {
    net.conduction(temps, out);
    for (i, n) in net.nodes.iter().enumerate() {
        out[i] = temps[i] + dt / n.capacity * (heats[i] + out[i]);
    }
}

/// Temperatures at which conduction balances constant `heats`.
pub fn steady_state(net: &ThermalNetwork, heats: &[f64]) -> Result<Vec<f64>, PlantError> {
    let n = net.nodes.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::from_column_slice(heats);
    for &(i, t, g) in &net.resolved {
        a[(i, i)] += g;
        match t {
            Target::Node(j) => {
                a[(j, j)] += g;
                a[(i, j)] -= g;
                a[(j, i)] -= g;
            }
            t => b[i] += g * net.boundary(t),
        }
    }
    a.lu()
        .solve(&b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| params_err("thermal network has a node group with no path to ambient or coolant"))
}

pub fn heat_port(node: &str) -> String {
    format!("heat_{node}")
}

pub fn temp_port(node: &str) -> String {
    format!("temp_{node}")
}

/// Resolves the nodes that receive plant heat, in port order.
pub fn heated_indices(net: &ThermalNetwork, heated: &[String]) -> Result<Vec<usize>, PlantError> {
    let mut idx = Vec::with_capacity(heated.len());
    for id in heated {
        let i = net.node_index(id).ok_or_else(|| params_err(format!("no thermal node `{id}` to receive heat")))?;
        if idx.contains(&i) {
            return Err(params_err(format!("thermal node `{id}` bound twice")));
        }
        idx.push(i);
    }
    Ok(idx)
}

fn node_ports(net: &ThermalNetwork, heated: &[usize]) -> (Vec<PortSpec>, Vec<PortSpec>) {
    let ins = heated.iter().map(|&i| PortSpec::input(heat_port(&net.nodes[i].id), Quantity::Power)).collect();
    let outs = net.nodes.iter().map(|n| PortSpec::output(temp_port(&n.id), Quantity::Temperature)).collect();
    (ins, outs)
}

/// Physics network as a component: `heat_<node>` in for each heated node,
/// `temp_<node>` out for every node. Unheated nodes see zero source.
pub struct ThermalComponent {
    id: String,
    net: Arc<ThermalNetwork>,
    heated: Vec<usize>,
    temps: Vec<f64>,
    heats: Vec<f64>,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

impl ThermalComponent {
    pub fn new(id: impl Into<String>, net: Arc<ThermalNetwork>, heated: &[String]) -> Result<Self, PlantError> {
        let heated = heated_indices(&net, heated)?;
        let (inputs, outputs) = node_ports(&net, &heated);
        let n = net.nodes.len();
        Ok(ThermalComponent { id: id.into(), temps: net.initial_temps(), heats: vec![0.0; n], net, heated, inputs, outputs })
    }

    pub fn temps(&self) -> &[f64] {
        &self.temps
    }
}

impl Component for ThermalComponent {
    fn id(&self) -> &str {
        &self.id
    }

    fn inputs(&self) -> &[PortSpec] {
        &self.inputs
    }

    fn outputs(&self) -> &[PortSpec] {
        &self.outputs
    }

    fn initial_outputs(&self) -> Vec<f64> {
        self.temps.clone()
    }

    fn step(&mut self, ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        for (&i, &q) in self.heated.iter().zip(inputs) {
            self.heats[i] = q;
        }
        step_thermal_into(&self.net, &self.temps, &self.heats, ctx.dt, out);
        self.temps.copy_from_slice(out);
        Ok(())
    }
}

/// Stateless thermal stand-in: maps node heats (and, when the model takes
/// them, the boundary temperatures from the network config) to node
/// temperatures.
pub struct ThermalSurrogate {
    id: String,
    model: BoundModel,
    boundary: Vec<f64>,
    scratch: Vec<f64>,
    initial: Vec<f64>,
    inputs: Vec<PortSpec>,
    outputs: Vec<PortSpec>,
}

pub const AMBIENT_PORT: &str = "ambient_k";
pub const COOLANT_PORT: &str = "coolant_k";

/// Binds `model` to the node set of `net`. The model must take one
/// `heat_<node>` input per heated node, optionally `ambient_k` and
/// `coolant_k`, and produce one `temp_<node>` output per node.
pub fn wrap_thermal_surrogate(
    id: impl Into<String>,
    model: Arc<SurrogateModel>,
    net: &ThermalNetwork,
    heated: &[String],
) -> Result<ThermalSurrogate, ModelError> {
    let idx = heated_indices(net, heated).map_err(|e| ModelError::PortMismatch(e.to_string()))?;
    let (inputs, outputs) = node_ports(net, &idx);
    let mut core_inputs = inputs.clone();
    let mut boundary = Vec::new();
    for (port, value) in [(AMBIENT_PORT, net.ambient_k), (COOLANT_PORT, net.coolant_k)] {
        if model.input_index(port).is_some() {
            core_inputs.push(PortSpec::input(port, Quantity::Temperature));
            boundary.push(value);
        }
    }
    let bound = bind_core(model, &core_inputs, &outputs)?;
    let mut scratch = vec![0.0; core_inputs.len()];
    scratch[inputs.len()..].copy_from_slice(&boundary);
    let mut initial = vec![0.0; outputs.len()];
    bound.eval_into(&scratch, &mut initial);
    Ok(ThermalSurrogate { id: id.into(), model: bound, boundary, scratch, initial, inputs, outputs })
}

impl ThermalSurrogate {
    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }
}

impl Component for ThermalSurrogate {
    fn id(&self) -> &str {
        &self.id
    }

    fn inputs(&self) -> &[PortSpec] {
        &self.inputs
    }

    fn outputs(&self) -> &[PortSpec] {
        &self.outputs
    }

    fn initial_outputs(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn step(&mut self, _ctx: &StepContext, inputs: &[f64], out: &mut [f64]) -> Result<(), StepError> {
        self.scratch[..inputs.len()].copy_from_slice(inputs);
        self.model.eval_into(&self.scratch, out);
        Ok(())
    }
}
