//! Simulation of single- and two-stage peer selection.
//!
//! Agents are both candidates and reviewers. Each reviewer holds a noisy
//! (Mallows) view of the true ranking, reviews a handful of peers, and a
//! mechanism turns the resulting grades into a selection of `k` agents.
//! Vanilla takes the best-graded agents; Partition and Exact Dollar
//! Partition split agents into clusters so that nobody can influence their
//! own selection. The [`twostage`] pipeline adds an early round that
//! accepts or eliminates agents before the rest of the reviewing budget is
//! spent, and [`harness`] runs seeded parameter sweeps over all of it.

pub mod assign;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod theory;
pub mod twostage;

pub use error::{Error, Result};
