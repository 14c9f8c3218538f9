//! Exit-code contract.

use sightline_core::budget::BudgetError;
use sightline_core::direction::DirectionError;
use sightline_core::geo::GeoError;
use sightline_core::grid::GridError;
use sightline_core::net::NetError;
use sightline_core::protocol::ProtocolError;
use sightline_core::sim::SimError;
use sightline_core::threat::ThreatError;

pub const INTERNAL: u8 = 1;
pub const INFEASIBLE: u8 = 2;
pub const CONNECTION: u8 = 3;
pub const VALIDATION: u8 = 4;
pub const ALARM: u8 = 5;

/// Bad input that no core type covers (flags, files).
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// `--fail-on-alarm` tripped.
#[derive(Debug)]
pub struct AlarmRaised(pub usize);

impl std::fmt::Display for AlarmRaised {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} alarm(s) raised", self.0)
    }
}

impl std::error::Error for AlarmRaised {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(b) = cause.downcast_ref::<BudgetError>() {
            return match b {
                BudgetError::Infeasible { .. } => INFEASIBLE,
                _ => VALIDATION,
            };
        }
        if let Some(n) = cause.downcast_ref::<NetError>() {
            return match n {
                NetError::Rejected(_) => VALIDATION,
                _ => CONNECTION,
            };
        }
        if cause.is::<AlarmRaised>() {
            return ALARM;
        }
        if cause.is::<Invalid>()
            || cause.is::<SimError>()
            || cause.is::<GeoError>()
            || cause.is::<GridError>()
            || cause.is::<ThreatError>()
            || cause.is::<DirectionError>()
            || cause.is::<ProtocolError>()
        {
            return VALIDATION;
        }
    }
    INTERNAL
}
