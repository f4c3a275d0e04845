use std::fmt;

use serde::{Deserialize, Serialize};

/// Physical quantity carried by a scalar signal.
///
/// Connections are only legal between ports with the same tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Voltage,
    Current,
    Torque,
    AngularSpeed,
    Temperature,
    Power,
    Fraction,
    Frequency,
    Velocity,
    Force,
}

impl Quantity {
    /// Canonical unit string used in model files and CSV headers.
    pub fn unit(self) -> &'static str {
        match self {
            Quantity::Voltage => "V",
            Quantity::Current => "A",
            Quantity::Torque => "N*m",
            Quantity::AngularSpeed => "rad/s",
            Quantity::Temperature => "K",
            Quantity::Power => "W",
            Quantity::Fraction => "-",
            Quantity::Frequency => "Hz",
            Quantity::Velocity => "m/s",
            Quantity::Force => "N",
        }
    }

    /// Parses a unit annotation. Accepts a few common spellings.
    pub fn from_unit(unit: &str) -> Option<Quantity> {
        let q = match unit.trim() {
            "V" => Quantity::Voltage,
            "A" => Quantity::Current,
            "N*m" | "N·m" | "Nm" | "N.m" => Quantity::Torque,
            "rad/s" => Quantity::AngularSpeed,
            "K" => Quantity::Temperature,
            "W" => Quantity::Power,
            "-" | "1" | "" => Quantity::Fraction,
            "Hz" => Quantity::Frequency,
            "m/s" => Quantity::Velocity,
            "N" => Quantity::Force,
            _ => return None,
        };
        Some(q)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]", self, self.unit())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortSpec {
    pub name: String,
    pub direction: Direction,
    pub quantity: Quantity,
}

impl PortSpec {
    pub fn input(name: impl Into<String>, quantity: Quantity) -> Self {
        PortSpec { name: name.into(), direction: Direction::Input, quantity }
    }

    pub fn output(name: impl Into<String>, quantity: Quantity) -> Self {
        PortSpec { name: name.into(), direction: Direction::Output, quantity }
    }
}

/// Fully qualified `component.port` reference.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub component: String,
    pub port: String,
}

impl PortRef {
    pub fn new(component: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef { component: component.into(), port: port.into() }
    }

    /// Splits on the first `.`; returns `None` when either side is empty.
    pub fn parse(s: &str) -> Option<PortRef> {
        let (c, p) = s.split_once('.')?;
        if c.is_empty() || p.is_empty() {
            return None;
        }
        Some(PortRef::new(c, p))
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_round_trip() {
        for q in [
            Quantity::Voltage,
            Quantity::Current,
            Quantity::Torque,
            Quantity::AngularSpeed,
            Quantity::Temperature,
            Quantity::Power,
            Quantity::Fraction,
            Quantity::Frequency,
            Quantity::Velocity,
            Quantity::Force,
        ] {
            assert_eq!(Quantity::from_unit(q.unit()), Some(q));
        }
        assert_eq!(Quantity::from_unit("N·m"), Some(Quantity::Torque));
        assert_eq!(Quantity::from_unit("furlong"), None);
    }

    #[test]
    fn port_ref_parse() {
        assert_eq!(PortRef::parse("motor.omega"), Some(PortRef::new("motor", "omega")));
        assert_eq!(PortRef::parse("motor"), None);
        assert_eq!(PortRef::parse(".omega"), None);
    }
}
