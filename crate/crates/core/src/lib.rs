//! Robust output regulation of uncertain strict-feedback plants driven by a
//! bank of cooperating parallel actuators.
//!
//! The crate covers model description, regulator synthesis, closed-loop
//! certification over an uncertainty box, and fixed-step simulation.

pub mod analysis;
pub mod examples;
pub mod linalg;
pub mod models;
pub mod regulator;
pub mod scenario;
pub mod sim;
pub mod config;
pub mod pipeline;
