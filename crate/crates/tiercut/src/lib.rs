//! Toolkit for planning and evaluating split execution of DNN inference
//! across three tiers: end device, edge cluster, and cloud.
//!
//! The pipeline has three legs:
//!
//! * [`graph`] models an inference network as a DAG rooted at a virtual
//!   input vertex, computes longest-distance layerings, and checks spatial
//!   shape consistency along convolution chains.
//! * [`latency`] turns per-layer measurements (or a fitted regression) plus
//!   link bandwidths into a [`latency::WeightedGraph`]; [`planner`] assigns
//!   every vertex to a tier with a layered greedy pass, sibling realignment,
//!   and incremental re-planning under weight drift.
//! * [`tiler`] splits a convolution stack's output into a grid and walks
//!   receptive fields backwards so each grid cell can run the whole stack on
//!   a crop; [`tensor`] is the reference executor proving the tiled run is
//!   lossless; [`sim`] reports end-to-end latency, transfer volumes, and
//!   parallel-edge speedups against single-tier baselines.
//!
//! [`doc`] defines the versioned JSON documents the CLI reads and writes,
//! and [`synth`] generates the seeded random instances used by the
//! verification harnesses.

pub mod cli;
pub mod doc;
pub mod graph;
pub mod latency;
pub mod planner;
pub mod sim;
pub mod synth;
pub mod tensor;
pub mod tiler;
