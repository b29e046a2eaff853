//! Class-based bandwidth differentiation.
//!
//! Capacity on a shared bottleneck is first split across weighted service
//! classes with a weighted alpha-fair rule ([`inter_class`]). Inside each
//! class, flows lagging the class mean by more than a z-score threshold are
//! carved into a lower sub-class with its own guaranteed share
//! ([`intra_class`]). [`estimator`] turns cumulative byte counters into
//! smoothed per-flow throughput and [`controller`] glues the pieces into a
//! per-epoch enforcement plan of metered groups.
//!
//! All arithmetic is generic over [`Scalar`], implemented for `f32`, `f64`
//! and [`Rational`]. The aliases below fix the common instantiations.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod controller;
pub mod error;
pub mod estimator;
pub mod inter_class;
pub mod intra_class;
pub mod scalar;

pub use controller::{
    control_epoch, plan_diff, Controller, ControllerConfig, EnforcementGroup, EnforcementPlan, EpochSnapshot, PlanDiff,
    Tier,
};
pub use error::{Error, Result};
pub use estimator::{EstimatorConfig, ThroughputEstimator};
pub use inter_class::{
    allocate_closed_form, allocate_numeric_oracle, per_flow_ratio, verify_kkt, InterClassAllocation, InterClassInput,
    ServiceClassSpec,
};
pub use intra_class::{
    allocate_subclasses, compute_stats, partition, ClassThroughputStats, FlowThroughputSample, IntraClassAllocation,
    SubClassPartition,
};
pub use scalar::{ratio, Scalar};

/// Exact arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

pub type InterClassInputF64 = InterClassInput<f64>;
pub type InterClassAllocationF64 = InterClassAllocation<f64>;
pub type FlowSampleF64 = FlowThroughputSample<f64>;
pub type ControllerConfigF64 = ControllerConfig<f64>;
pub type EstimatorF64 = ThroughputEstimator<f64>;
pub type ControllerF64 = Controller<f64>;

pub type ExactInterClassInput = InterClassInput<Rational>;
pub type ExactInterClassAllocation = InterClassAllocation<Rational>;
pub type ExactFlowSample = FlowThroughputSample<Rational>;
pub type ExactEstimator = ThroughputEstimator<Rational>;

/// Service class identifier, e.g. `"G"`, `"S"`, `"B"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub String);

impl ClassId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ClassId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u64);

impl From<u64> for FlowId {
    fn from(v: u64) -> Self {
        Self(v)
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
