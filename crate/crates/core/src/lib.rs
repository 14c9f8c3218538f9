//! Camera-assisted collision warnings for road users.
//!
//! Roadside sensors detect emergency vehicles, a processing node decides
//! which way they are heading and forwards the event to users in nearby
//! cells, and each user classifies the threat against its own trajectory.

pub mod budget;
pub mod direction;
pub mod geo;
pub mod grid;
pub mod threat;
pub mod protocol;
pub mod stats;
#[cfg(not(target_arch = "wasm32"))]
pub mod net;
pub mod sim;
