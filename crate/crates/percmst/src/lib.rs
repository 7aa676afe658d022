//! Coupled percolation / minimal-spanning-tree Monte Carlo on finite lattices.
//!
//! One draw of i.i.d. Unif[0,1] labels on a lattice defines, at the same time,
//! a percolation configuration at every density `p` (a carrier is open iff its
//! label is at most `p`) and a unique minimal spanning tree. This crate builds
//! both sides of that coupling and the observables that connect them:
//!
//! * [`lattice`] — square bond lattices and triangular site lattices (with the
//!   series subdivision that pushes vertex labels onto edges);
//! * [`labels`] — reproducible label fields, including region-dependent
//!   distributions for the asymmetric-square experiment;
//! * [`percolation`] — thresholded cluster partitions, quad crossings, arm
//!   events, four-arm probability estimation and pivotal/important carriers;
//! * [`forest`] — Kruskal/invasion/cycle-rule spanning trees, minimax paths,
//!   cluster trees by contraction and diameter-cutoff cluster-graph paths;
//! * [`dynamics`] — dynamical and near-critical evolution under Poisson clocks;
//! * [`topology`] — degree statistics, macroscopic branch points and
//!   near-touch-point detection on tree paths;
//! * [`experiments`] — the asymmetric-label path experiment, symmetric
//!   baselines and scaling/rotation sanity sweeps;
//! * [`stats`] — the small statistical toolbox used by the estimators.
//!
//! All randomness flows from explicit 64-bit seeds; identical inputs produce
//! bit-identical outputs at any parallelism width.

pub mod dsu;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod forest;
pub mod labels;
pub mod lattice;
pub mod percolation;
pub mod stats;
pub mod svg;
pub mod topology;

pub use error::{Error, Result};
