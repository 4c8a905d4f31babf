//! Exact solver for all five objectives.
//!
//! Every objective here is regular, so for fixed machine orders the
//! earliest-start schedule is optimal. The search therefore only decides the
//! orientation of each pair of operations sharing a machine
//! (see [`search`]); [`brute_force`] enumerates full machine orders instead
//! and serves as an independent oracle on small instances.

mod brute;
mod graph;
mod search;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{ConstraintSet, Formulation};
use crate::model::{JobShopInstance, ModelError, OpRef, Schedule, Time};

pub use brute::{brute_force, brute_force_with_cap, BRUTE_FORCE_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error(transparent)]
    Prerequisite(#[from] ModelError),
    #[error("time limit must be positive")]
    InvalidConfig,
    #[error("instance has {ops} operations, brute force is capped at {cap}")]
    CapExceeded { ops: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundMode {
    /// One-machine bound: earliest head plus remaining load plus shortest tail.
    MaxLoad,
    /// Chain bound from the heads of each job's last operation.
    JobLength,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub time_limit: Duration,
    pub node_limit: Option<u64>,
    pub lower_bound_mode: LowerBoundMode,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { time_limit: Duration::from_secs(5), node_limit: None, lower_bound_mode: LowerBoundMode::Both }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.time_limit.is_zero() {
            return Err(SolveError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// A limit stopped the search; the schedule is the best incumbent.
    Feasible,
    Infeasible,
    /// A limit stopped the search before any schedule was found.
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub schedule: Option<Schedule>,
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

impl SolveResult {
    pub fn objective(&self) -> Option<Time> {
        self.schedule.as_ref().map(|s| s.objective_value)
    }
}

/// Minimizes the instance objective subject to every model constraint.
pub fn solve(instance: &JobShopInstance, config: &SolveConfig) -> Result<SolveResult, SolveError> {
    solve_with(instance, ConstraintSet::FULL, config)
}

/// Solves a parsed formulation, honoring only the constraints it posts.
pub fn solve_formulation(formulation: &Formulation, config: &SolveConfig) -> Result<SolveResult, SolveError> {
    solve_with(&formulation.instance, formulation.constraints, config)
}

pub fn solve_with(
    instance: &JobShopInstance,
    constraints: ConstraintSet,
    config: &SolveConfig,
) -> Result<SolveResult, SolveError> {
    config.validate()?;
    instance.check_prerequisites()?;
    Ok(search::run(instance, constraints, config))
}

/// Orientations already decided for some pairs of operations that share a
/// machine: `(a, b)` means `a` runs before `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialOrdering {
    pub fixed: Vec<(OpRef, OpRef)>,
}

impl PartialOrdering {
    pub fn root() -> Self {
        Self::default()
    }
}

/// A bound no extension of `partial` can beat, using both bound families.
/// Returns `Time::MAX` when `partial` admits no feasible extension.
pub fn lower_bound(instance: &JobShopInstance, partial: &PartialOrdering) -> Time {
    lower_bound_with(instance, partial, LowerBoundMode::Both)
}

pub fn lower_bound_with(instance: &JobShopInstance, partial: &PartialOrdering, mode: LowerBoundMode) -> Time {
    if instance.check_prerequisites().is_err() {
        return 0;
    }
    search::partial_bound(instance, ConstraintSet::FULL, partial, mode)
}
