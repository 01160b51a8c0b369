//! Simulation and numerical analysis of heavily loaded processor-sharing queues.
//!
//! The crate has three layers:
//!
//! - exact event-driven simulation of the GI/GI/1-PS queue with a
//!   measure-valued state descriptor ([`sim`]), together with the catalog of
//!   interarrival/service laws and their equilibrium (excess) distributions
//!   ([`dist`]) and finite-measure machinery ([`measure`]);
//! - numerical solutions of the critical fluid model ([`fluid`]) and the
//!   limiting reflected Brownian motion ([`rbm`]);
//! - a replicated-experiment harness ([`harness`]) that drives queue
//!   sequences into heavy traffic and tests state space collapse and the
//!   diffusion steady state against their predicted limits.
//!
//! Replications run in parallel through rayon when the `parallel` feature
//! (default) is enabled; disabling it leaves a sequential fallback with
//! identical results.

pub mod dist;
pub mod fluid;
pub mod harness;
pub mod measure;
pub mod quad;
pub mod rbm;
pub mod sim;
pub mod stats;
pub mod streams;

pub use dist::{HeavyTrafficFamily, InterarrivalDistribution, ServiceDistribution};
pub use measure::{FiniteMeasure, TestFunctionFamily};
pub use sim::{QueueState, SimPath};
