#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Packet detection with the compensated autocorrelation metric
//! `r = Re(a) - rho * b` on single- and multi-antenna receivers.
//!
//! The numeric core ([`signal`], [`metrics`], [`analytic`], [`weights`]) is
//! generic over [`Real`] (`f32` or `f64`). Simulation, benchmarking and
//! dataset handling ([`montecarlo`], [`pareto`], [`dataset`]) work in `f64`.

pub mod analytic;
pub mod dataset;
pub mod error;
pub mod fmt;
pub mod metrics;
pub mod montecarlo;
pub mod pareto;
pub mod qfunc;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod weights;

pub use error::{Error, Result};
pub use scalar::Real;
pub use signal::{Hypothesis, PreambleKind};

pub type Preamble = signal::PreambleSpec<f64>;
pub type Scenario = signal::AntennaScenario<f64>;
pub type Block = signal::ReceivedBlock<f64>;
pub type Weights = weights::WeightVector<f64>;
pub type Point = analytic::OperatingPoint<f64>;
pub type Stats = analytic::CompensatedStats<f64>;
pub type Sample = metrics::MetricSample<f64>;
pub type Threshold = metrics::DetectionThreshold<f64>;
