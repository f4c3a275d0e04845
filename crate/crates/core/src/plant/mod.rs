//! Physics plant models: equivalent-circuit battery, average-value inverter,
//! map-based motor and lumped thermal network.

pub mod battery;
pub mod inverter;
pub mod motor;
pub mod thermal;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("{quantity} = {value} outside valid range [{min}, {max}]")]
    Domain { quantity: &'static str, value: f64, min: f64, max: f64 },
    #[error("battery current {current} A exceeds limit {limit} A")]
    CurrentLimit { current: f64, limit: f64 },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("non-finite input `{0}`")]
    NonFinite(&'static str),
}

pub(crate) fn params_err(msg: impl Into<String>) -> PlantError {
    PlantError::Params(msg.into())
}
