//! Discrete-time simulator and analytic toolkit for a repeating switch that
//! routes multiple bipartite entanglement flows with max-weight scheduling.
//!
//! The crate is organized around the life of a request:
//!
//! - [`model`] defines the hub-and-spoke topology, the flows contending for
//!   it, and the three canonical 3-flow scenarios.
//! - [`linkgen`] samples per-time-step link states (heralding success plus an
//!   orientation bit) and provides the closed-form link-level probabilities.
//! - [`scheduler`] enumerates feasible matchings and selects the max-weight
//!   matching among serviceable flows.
//! - [`simulator`] runs the arrival/link/schedule/swap loop and records a
//!   queue-length trace.
//! - [`stability`] classifies a trace as stable or unstable from the
//!   regression slope of the queue series.
//! - [`region`] computes the analytic stably-supportable rate region as a set
//!   of subset-sum facets, both by exact enumeration and by closed forms.
//! - [`sweep`] drives rate-vector grids through the simulator and compares
//!   the empirical stability map against the analytic region.

pub mod error;
pub mod linkgen;
pub mod model;
pub mod region;
pub mod rng;
pub mod scheduler;
pub mod simulator;
pub mod stability;
pub mod sweep;

pub use error::Error;
pub use linkgen::{direct_capacity, herald_prob, saturation_prob, LinkSnapshot};
pub use model::{build_scenario, Scenario, ScenarioTag, SwitchTopology};
pub use region::{analytic_region, closed_form_region_3flow, RateRegion, SubsetBound};
pub use scheduler::{enumerate_matchings, max_weight, Matching, ServiceRule, TieBreak};
pub use simulator::{run, ArrivalModel, SimConfig, SimTrace};
pub use stability::{classify, regression_slope, SlopeBasis, StabilityVerdict};
pub use sweep::{agreement_report, run_sweep, SweepResult, SweepSpec};
