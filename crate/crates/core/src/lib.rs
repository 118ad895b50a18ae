//! Time-domain modeling of computing systems.
//!
//! Processor fabrics and biology-mimicking spiking networks share one
//! constraint: information moves at a finite speed, so the position of a
//! component is also a time coordinate. This crate builds on that single
//! idea:
//!
//! - [`timespace`] — the coordinate mapping and the apparent-time law;
//! - [`engine`] — a deterministic discrete-event kernel with CSV traces;
//! - [`fabric`] — cores, caches, parallel links and a shared serial bus
//!   with arbitration, composed into contention scenarios;
//! - [`perfmodel`] — closed-form payload-efficiency models (operand-length
//!   speedup, housekeeping fit, context-switch penalty);
//! - [`neuro`] — oscillator neurons with a dual-threshold trigger,
//!   modulated conduction velocity, phase locking, arrival-phase learning
//!   and feedback queues with a drop policy;
//! - [`scenario`] — config-driven runners behind the `tempologic` CLI.

pub mod engine;
pub mod error;
pub mod fabric;
pub mod neuro;
pub mod perfmodel;
pub mod scenario;
pub mod timespace;
pub mod trace;

pub use error::{Error, Result};
