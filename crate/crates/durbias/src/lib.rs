//! Monte Carlo laboratory for duration-dependence estimation under attrition.
//!
//! The crate simulates panel data from two attrition-prone processes (a binary
//! exit-indicator survival process and a multi-stage job-search process),
//! estimates duration profiles with pooled, heterogeneity-controlled and
//! fixed-effects specifications, and quantifies the mechanical bias the within
//! transformation introduces when the outcome is tied to sample exit.

pub mod config;
pub mod diagnostics;
pub mod estimate;
pub mod mc;
pub mod model;
pub mod report;
pub mod rng;
pub mod sim1;
pub mod sim2;
pub mod toy;

pub use model::{ExitPanel, ExitRow, JobSearchPanel, JobSearchRow, Panel, SpellMeta};
