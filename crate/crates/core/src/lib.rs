//! Hybrid physics and data-driven electric powertrain simulation: a
//! fixed-step co-simulation core, plant and control models, table and
//! dense-net surrogates that swap in for physics cores, and a scenario
//! harness for drive cycles, sweeps and batches.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod exec;
pub mod harness;
pub mod plant;
pub mod sim;
pub mod surrogate;
