//! Active-set learning for DC optimal power flow under load uncertainty.
//!
//! A DC-OPF with fixed network data is a linear program whose right-hand
//! side moves with the load forecast error `ω`. Its optimum sits on a vertex
//! named by a set of binding inequality rows, and only a handful of such sets
//! occur in practice. This crate builds the LP polytope from a network, solves
//! sampled realizations with a bounded-variable simplex, collects the
//! distinct active sets, trains a classifier that ranks them for a new `ω`,
//! and recovers dispatches from the ranked sets by solving one square linear
//! system each.

#![no_std]

extern crate alloc;

pub mod active_set;
pub mod dcopf;
pub mod linalg;
pub mod network;
pub mod nn;
pub mod policy;
pub mod polytope;
pub mod ptdf;
pub mod rng;
pub mod scenario;
pub mod simplex;
