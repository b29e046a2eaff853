//! Simulation harness for diffperf: a fluid bottleneck with token-bucket
//! meters, a DASH client population, and the run/sweep orchestration that
//! couples them to the controller.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dash;
pub mod error;
pub mod netsim;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sweep;

pub use dash::{abr_select, qoe, spawn_arrivals, DashClient, QoeParams, VideoSpec};
pub use error::{Result, SimError};
pub use netsim::{equilibrium_shares, kappa_of, CcModel, CcParams, FlowPathConfig, LinkConfig, World};
pub use report::write_report;
pub use runner::{jain_index, run, RunOutput};
pub use scenario::{Scenario, SweepParam};
pub use sweep::{sweep, write_sweep, SweepRow};
