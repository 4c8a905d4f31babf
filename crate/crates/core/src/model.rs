//! Job-shop instances, schedules and modular formulation bundles.
//!
//! All times are integers in the base unit (seconds). Jobs whose durations are
//! declared in minutes are converted at construction time, so arithmetic on a
//! [`JobShopInstance`] never has to care about units.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Integer time in base units.
pub type Time = i64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("objective {objective} requires {field}, which the instance does not define")]
    MissingPrerequisite { objective: Objective, field: &'static str },
    #[error("schedule does not match instance: {0}")]
    DimensionMismatch(String),
    #[error("incomplete bundle, missing {}", display_tags(.missing))]
    IncompleteBundle { missing: Vec<InstructionTag> },
}

fn display_tags(tags: &[InstructionTag]) -> String {
    tags.iter().map(|t| t.suffix()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Makespan,
    MaxTardiness,
    TotalWeightedTardiness,
    TotalFlowTime,
    TotalWeightedFlowTime,
}

impl Objective {
    pub const ALL: [Objective; 5] = [
        Objective::Makespan,
        Objective::MaxTardiness,
        Objective::TotalWeightedTardiness,
        Objective::TotalFlowTime,
        Objective::TotalWeightedFlowTime,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Objective::Makespan => "makespan",
            Objective::MaxTardiness => "max_tardiness",
            Objective::TotalWeightedTardiness => "total_weighted_tardiness",
            Objective::TotalFlowTime => "total_flow_time",
            Objective::TotalWeightedFlowTime => "total_weighted_flow_time",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.keyword() == word)
    }

    pub fn needs_due_dates(self) -> bool {
        matches!(self, Objective::MaxTardiness | Objective::TotalWeightedTardiness)
    }

    pub fn needs_weights(self) -> bool {
        matches!(self, Objective::TotalWeightedTardiness | Objective::TotalWeightedFlowTime)
    }

    pub fn needs_releases(self) -> bool {
        matches!(self, Objective::TotalFlowTime | Objective::TotalWeightedFlowTime)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationUnit {
    #[default]
    Seconds,
    Minutes,
}

impl DurationUnit {
    /// Base units per one unit of `self`.
    pub fn factor(self) -> Time {
        match self {
            DurationUnit::Seconds => 1,
            DurationUnit::Minutes => 60,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            DurationUnit::Seconds => "seconds",
            DurationUnit::Minutes => "minutes",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "seconds" => Some(DurationUnit::Seconds),
            "minutes" => Some(DurationUnit::Minutes),
            _ => None,
        }
    }
}

/// Zero-based (job, operation index) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpRef {
    pub job: usize,
    pub op: usize,
}

impl OpRef {
    pub fn new(job: usize, op: usize) -> Self {
        OpRef { job, op }
    }
}

impl fmt::Display for OpRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.job, self.op)
    }
}

/// Cross-job ordering constraint on top of the route precedences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraPrecedence {
    /// `before` must end no later than `after` starts.
    EndBeforeStart { before: OpRef, after: OpRef },
    /// `op` must end no later than the completion of every job.
    EndBeforeAllCompletions { op: OpRef },
}

/// Raw, unvalidated instance fields. Durations are in base units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceData {
    pub num_jobs: usize,
    pub num_machines: usize,
    pub routes: Vec<Vec<usize>>,
    pub durations: Vec<Vec<Time>>,
    pub releases: Option<Vec<Time>>,
    pub due_dates: Option<Vec<Time>>,
    pub weights: Option<Vec<Time>>,
    pub objective: Objective,
    pub extra_precedences: Vec<ExtraPrecedence>,
    pub units: Vec<DurationUnit>,
}

/// A validated job-shop instance. Immutable once built; use
/// [`JobShopInstance::to_data`] to derive a modified copy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceData", into = "InstanceData")]
pub struct JobShopInstance {
    data: InstanceData,
}

pub const ALLOWED_WEIGHTS: [Time; 3] = [1, 2, 4];

impl JobShopInstance {
    pub fn new(data: InstanceData) -> Result<Self, ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidInstance(msg));
        if data.num_jobs == 0 {
            return bad("at least one job is required".into());
        }
        if data.num_machines == 0 {
            return bad("at least one machine is required".into());
        }
        let n = data.num_jobs;
        if data.routes.len() != n || data.durations.len() != n || data.units.len() != n {
            return bad(format!(
                "expected {n} routes, durations and units, got {}, {} and {}",
                data.routes.len(),
                data.durations.len(),
                data.units.len()
            ));
        }
        for (j, (route, durations)) in data.routes.iter().zip(&data.durations).enumerate() {
            if route.is_empty() {
                return bad(format!("job {j} has no operations"));
            }
            if route.len() != durations.len() {
                return bad(format!("job {j} has {} machines but {} durations", route.len(), durations.len()));
            }
            let mut seen = vec![false; data.num_machines];
            for &m in route {
                if m >= data.num_machines {
                    return bad(format!("job {j} visits machine {m} outside 0..{}", data.num_machines));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return bad(format!("job {j} visits machine {m} twice"));
                }
            }
            let factor = data.units[j].factor();
            for (i, &p) in durations.iter().enumerate() {
                if p < 1 {
                    return bad(format!("operation {j}.{i} has non-positive duration {p}"));
                }
                if p % factor != 0 {
                    return bad(format!(
                        "operation {j}.{i} duration {p} is not a whole number of {}",
                        data.units[j].keyword()
                    ));
                }
            }
        }
        for (name, field) in [("releases", &data.releases), ("due dates", &data.due_dates), ("weights", &data.weights)]
        {
            if let Some(values) = field {
                if values.len() != n {
                    return bad(format!("expected {n} {name}, got {}", values.len()));
                }
                if values.iter().any(|&v| v < 0) {
                    return bad(format!("{name} must be nonnegative"));
                }
            }
        }
        if let Some(weights) = &data.weights {
            if let Some(w) = weights.iter().find(|w| !ALLOWED_WEIGHTS.contains(w)) {
                return bad(format!("weight {w} is not one of 1, 2, 4"));
            }
        }
        let valid = |r: &OpRef| r.job < n && r.op < data.routes[r.job].len();
        for p in &data.extra_precedences {
            let ok = match p {
                ExtraPrecedence::EndBeforeStart { before, after } => valid(before) && valid(after),
                ExtraPrecedence::EndBeforeAllCompletions { op } => valid(op),
            };
            if !ok {
                return bad(format!("precedence {p:?} references a missing operation"));
            }
        }
        // Every time value must fit comfortably; the horizon is summed in i64.
        let total: Time = data.durations.iter().flatten().sum();
        let max_release = data.releases.iter().flatten().copied().max().unwrap_or(0);
        if total.checked_add(max_release).is_none_or(|h| h > Time::MAX / 64) {
            return bad("time horizon overflows".into());
        }
        Ok(JobShopInstance { data })
    }

    pub fn data(&self) -> &InstanceData {
        &self.data
    }

    pub fn to_data(&self) -> InstanceData {
        self.data.clone()
    }

    pub fn num_jobs(&self) -> usize {
        self.data.num_jobs
    }

    pub fn num_machines(&self) -> usize {
        self.data.num_machines
    }

    pub fn objective(&self) -> Objective {
        self.data.objective
    }

    pub fn route(&self, job: usize) -> &[usize] {
        &self.data.routes[job]
    }

    pub fn durations(&self, job: usize) -> &[Time] {
        &self.data.durations[job]
    }

    pub fn duration(&self, op: OpRef) -> Time {
        self.data.durations[op.job][op.op]
    }

    pub fn machine(&self, op: OpRef) -> usize {
        self.data.routes[op.job][op.op]
    }

    pub fn num_ops(&self, job: usize) -> usize {
        self.data.routes[job].len()
    }

    pub fn total_ops(&self) -> usize {
        self.data.routes.iter().map(Vec::len).sum()
    }

    /// Release of `job`, zero when the instance has no releases.
    pub fn release(&self, job: usize) -> Time {
        self.data.releases.as_ref().map_or(0, |r| r[job])
    }

    pub fn releases(&self) -> Option<&[Time]> {
        self.data.releases.as_deref()
    }

    pub fn due_dates(&self) -> Option<&[Time]> {
        self.data.due_dates.as_deref()
    }

    pub fn weights(&self) -> Option<&[Time]> {
        self.data.weights.as_deref()
    }

    pub fn units(&self) -> &[DurationUnit] {
        &self.data.units
    }

    pub fn extra_precedences(&self) -> &[ExtraPrecedence] {
        &self.data.extra_precedences
    }

    /// Sum of processing times of `job`.
    pub fn job_length(&self, job: usize) -> Time {
        self.data.durations[job].iter().sum()
    }

    /// Total processing time assigned to `machine`.
    pub fn machine_load(&self, machine: usize) -> Time {
        self.ops().filter(|&o| self.machine(o) == machine).map(|o| self.duration(o)).sum()
    }

    /// Upper bound on any start time in an earliest-start schedule.
    pub fn horizon(&self) -> Time {
        let total: Time = self.data.durations.iter().flatten().sum();
        total + self.data.releases.iter().flatten().copied().max().unwrap_or(0)
    }

    /// All operations in job-major order.
    pub fn ops(&self) -> impl Iterator<Item = OpRef> + '_ {
        (0..self.data.num_jobs).flat_map(move |j| (0..self.data.routes[j].len()).map(move |i| OpRef::new(j, i)))
    }

    /// Returns an error naming the first field required by the objective but
    /// missing from the instance.
    pub fn check_prerequisites(&self) -> Result<(), ModelError> {
        let objective = self.data.objective;
        let missing = if objective.needs_due_dates() && self.data.due_dates.is_none() {
            Some("due dates")
        } else if objective.needs_weights() && self.data.weights.is_none() {
            Some("weights")
        } else if objective.needs_releases() && self.data.releases.is_none() {
            Some("releases")
        } else {
            None
        };
        match missing {
            Some(field) => Err(ModelError::MissingPrerequisite { objective, field }),
            None => Ok(()),
        }
    }

    pub fn with_objective(&self, objective: Objective) -> JobShopInstance {
        let mut data = self.to_data();
        data.objective = objective;
        JobShopInstance { data }
    }
}

impl TryFrom<InstanceData> for JobShopInstance {
    type Error = ModelError;

    fn try_from(data: InstanceData) -> Result<Self, Self::Error> {
        JobShopInstance::new(data)
    }
}

impl From<JobShopInstance> for InstanceData {
    fn from(instance: JobShopInstance) -> Self {
        instance.data
    }
}

/// Per-operation times plus the derived per-job quantities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub starts: Vec<Vec<Time>>,
    pub ends: Vec<Vec<Time>>,
    pub completions: Vec<Time>,
    pub tardiness: Option<Vec<Time>>,
    pub objective_value: Time,
}

impl Schedule {
    /// Builds a schedule from start times, deriving ends, completions,
    /// tardiness and the objective value.
    pub fn from_starts(instance: &JobShopInstance, starts: Vec<Vec<Time>>) -> Result<Self, ModelError> {
        check_shape(instance, &starts, "starts")?;
        let ends: Vec<Vec<Time>> = starts
            .iter()
            .zip(&instance.data.durations)
            .map(|(s, p)| s.iter().zip(p).map(|(s, p)| s + p).collect())
            .collect();
        let completions: Vec<Time> = ends.iter().map(|e| *e.last().expect("nonempty job")).collect();
        let tardiness =
            instance.due_dates().map(|due| completions.iter().zip(due).map(|(c, d)| (c - d).max(0)).collect());
        let mut schedule = Schedule { starts, ends, completions, tardiness, objective_value: 0 };
        schedule.objective_value = objective_value(instance, &schedule)?;
        Ok(schedule)
    }

    pub fn start(&self, op: OpRef) -> Time {
        self.starts[op.job][op.op]
    }

    pub fn end(&self, op: OpRef) -> Time {
        self.ends[op.job][op.op]
    }
}

fn check_shape(instance: &JobShopInstance, rows: &[Vec<Time>], what: &str) -> Result<(), ModelError> {
    if rows.len() != instance.num_jobs() {
        return Err(ModelError::DimensionMismatch(format!(
            "{what} has {} jobs, instance has {}",
            rows.len(),
            instance.num_jobs()
        )));
    }
    for (j, row) in rows.iter().enumerate() {
        if row.len() != instance.num_ops(j) {
            return Err(ModelError::DimensionMismatch(format!(
                "{what} for job {j} has {} operations, instance has {}",
                row.len(),
                instance.num_ops(j)
            )));
        }
    }
    Ok(())
}

/// Objective value of `schedule`, computed from the operation end times.
pub fn objective_value(instance: &JobShopInstance, schedule: &Schedule) -> Result<Time, ModelError> {
    instance.check_prerequisites()?;
    check_shape(instance, &schedule.ends, "ends")?;
    let completions = schedule.ends.iter().map(|e| *e.last().expect("nonempty job"));
    Ok(evaluate_completions(instance, completions))
}

/// Objective of a vector of job completion times. Prerequisites must hold.
pub(crate) fn evaluate_completions(instance: &JobShopInstance, completions: impl IntoIterator<Item = Time>) -> Time {
    let per_job = completions.into_iter().enumerate().map(|(j, c)| job_cost(instance, j, c));
    match instance.objective() {
        Objective::Makespan | Objective::MaxTardiness => per_job.max().unwrap_or(0),
        _ => per_job.sum(),
    }
}

/// Contribution of one job to the objective; the objective aggregates these
/// with `max` (makespan, max tardiness) or `sum` (the rest).
pub(crate) fn job_cost(instance: &JobShopInstance, job: usize, completion: Time) -> Time {
    let due = || instance.data.due_dates.as_ref().expect("due dates")[job];
    let weight = || instance.data.weights.as_ref().expect("weights")[job];
    match instance.objective() {
        Objective::Makespan => completion,
        Objective::MaxTardiness => (completion - due()).max(0),
        Objective::TotalWeightedTardiness => weight() * (completion - due()).max(0),
        Objective::TotalFlowTime => completion - instance.release(job),
        Objective::TotalWeightedFlowTime => weight() * (completion - instance.release(job)),
    }
}

/// A single broken constraint found by [`validate_schedule`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeStart { op: OpRef, start: Time },
    Release { job: usize, start: Time, release: Time },
    EndTime { op: OpRef, expected: Time, actual: Time },
    Completion { job: usize, expected: Time, actual: Time },
    Tardiness { job: usize, expected: Time, actual: Time },
    Overlap { machine: usize, first: OpRef, second: OpRef },
    JobPrecedence { op: OpRef, start: Time, previous_end: Time },
    ExtraPrecedence { index: usize, before: OpRef, after: Option<OpRef> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeStart { op, start } => write!(f, "operation {op} starts at {start} < 0"),
            Violation::Release { job, start, release } => {
                write!(f, "job {job} starts at {start} before its release {release}")
            }
            Violation::EndTime { op, expected, actual } => {
                write!(f, "operation {op} ends at {actual}, expected {expected}")
            }
            Violation::Completion { job, expected, actual } => {
                write!(f, "job {job} completion is {actual}, expected {expected}")
            }
            Violation::Tardiness { job, expected, actual } => {
                write!(f, "job {job} tardiness is {actual}, expected {expected}")
            }
            Violation::Overlap { machine, first, second } => {
                write!(f, "operations {first} and {second} overlap on machine {machine}")
            }
            Violation::JobPrecedence { op, start, previous_end } => {
                write!(f, "operation {op} starts at {start} before its predecessor ends at {previous_end}")
            }
            Violation::ExtraPrecedence { index, before, after } => match after {
                Some(after) => write!(f, "precedence #{index}: {before} must end before {after} starts"),
                None => write!(f, "precedence #{index}: {before} must end before every job completes"),
            },
        }
    }
}

/// Checks every model constraint and returns all violations found.
///
/// Release times are enforced as `start >= release`.
pub fn validate_schedule(instance: &JobShopInstance, schedule: &Schedule) -> Result<Vec<Violation>, ModelError> {
    check_shape(instance, &schedule.starts, "starts")?;
    check_shape(instance, &schedule.ends, "ends")?;
    if schedule.completions.len() != instance.num_jobs() {
        return Err(ModelError::DimensionMismatch("completions length differs from job count".into()));
    }
    match (&schedule.tardiness, instance.due_dates()) {
        (Some(t), Some(_)) if t.len() != instance.num_jobs() => {
            return Err(ModelError::DimensionMismatch("tardiness length differs from job count".into()))
        }
        (None, Some(_)) => return Err(ModelError::DimensionMismatch("tardiness missing".into())),
        _ => {}
    }

    let mut violations = Vec::new();
    for op in instance.ops() {
        let start = schedule.start(op);
        if start < 0 {
            violations.push(Violation::NegativeStart { op, start });
        }
        let expected = start + instance.duration(op);
        let actual = schedule.end(op);
        if actual != expected {
            violations.push(Violation::EndTime { op, expected, actual });
        }
    }
    for job in 0..instance.num_jobs() {
        let start = schedule.starts[job][0];
        let release = instance.release(job);
        if start < release {
            violations.push(Violation::Release { job, start, release });
        }
        let expected = *schedule.ends[job].last().expect("nonempty job");
        let actual = schedule.completions[job];
        if actual != expected {
            violations.push(Violation::Completion { job, expected, actual });
        }
        if let (Some(tardiness), Some(due)) = (&schedule.tardiness, instance.due_dates()) {
            let expected = (actual - due[job]).max(0);
            if tardiness[job] != expected {
                violations.push(Violation::Tardiness { job, expected, actual: tardiness[job] });
            }
        }
        for i in 1..instance.num_ops(job) {
            let start = schedule.starts[job][i];
            let previous_end = schedule.ends[job][i - 1];
            if start < previous_end {
                violations.push(Violation::JobPrecedence { op: OpRef::new(job, i), start, previous_end });
            }
        }
    }

    let mut by_machine: Vec<Vec<OpRef>> = vec![Vec::new(); instance.num_machines()];
    for op in instance.ops() {
        by_machine[instance.machine(op)].push(op);
    }
    for (machine, ops) in by_machine.iter().enumerate() {
        for (k, &a) in ops.iter().enumerate() {
            for &b in &ops[k + 1..] {
                let disjoint = schedule.start(a) >= schedule.end(b) || schedule.start(b) >= schedule.end(a);
                if !disjoint {
                    violations.push(Violation::Overlap { machine, first: a, second: b });
                }
            }
        }
    }

    for (index, p) in instance.extra_precedences().iter().enumerate() {
        match *p {
            ExtraPrecedence::EndBeforeStart { before, after } => {
                if schedule.end(before) > schedule.start(after) {
                    violations.push(Violation::ExtraPrecedence { index, before, after: Some(after) });
                }
            }
            ExtraPrecedence::EndBeforeAllCompletions { op } => {
                let first_completion = schedule.completions.iter().copied().min().unwrap_or(Time::MAX);
                if schedule.end(op) > first_completion {
                    violations.push(Violation::ExtraPrecedence { index, before: op, after: None });
                }
            }
        }
    }
    Ok(violations)
}

/// The nine formulation modules, in canonical assembly order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InstructionTag {
    Imports,
    Data,
    UtilityFunctions,
    DefineModel,
    DefineVariables,
    DefineConstraints,
    DefineObjective,
    Solve,
    PresentSolution,
}

// Tag names live here and only here.
const TAG_SUFFIXES: [(InstructionTag, &str); 9] = [
    (InstructionTag::Imports, "[IMPORTS]"),
    (InstructionTag::Data, "[DATA]"),
    (InstructionTag::UtilityFunctions, "[UTILITY_FUNCTIONS]"),
    (InstructionTag::DefineModel, "[DEFINE_MODEL]"),
    (InstructionTag::DefineVariables, "[DEFINE_VARIABLES]"),
    (InstructionTag::DefineConstraints, "[DEFINE_CONSTRAINTS]"),
    (InstructionTag::DefineObjective, "[DEFINE_OBJECTIVE]"),
    (InstructionTag::Solve, "[SOLVE]"),
    (InstructionTag::PresentSolution, "[PRESENT_SOLUTION]"),
];

impl InstructionTag {
    pub const ALL: [InstructionTag; 9] = [
        InstructionTag::Imports,
        InstructionTag::Data,
        InstructionTag::UtilityFunctions,
        InstructionTag::DefineModel,
        InstructionTag::DefineVariables,
        InstructionTag::DefineConstraints,
        InstructionTag::DefineObjective,
        InstructionTag::Solve,
        InstructionTag::PresentSolution,
    ];

    /// Bracketed instruction appended to a description, e.g. `[DEFINE_CONSTRAINTS]`.
    pub fn suffix(self) -> &'static str {
        TAG_SUFFIXES[self as usize].1
    }

    /// Suffix without brackets.
    pub fn name(self) -> &'static str {
        let s = self.suffix();
        &s[1..s.len() - 1]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TAG_SUFFIXES.iter().find(|(_, s)| &s[1..s.len() - 1] == name).map(|(t, _)| *t)
    }
}

impl fmt::Display for InstructionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A problem description with its formulation split into nine modules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulationBundle {
    pub description: String,
    pub modules: BTreeMap<InstructionTag, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembled: Option<String>,
    /// Hex SHA-256 over description and assembled text, when sealed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checksum: Option<String>,
}

impl FormulationBundle {
    pub fn new(description: impl Into<String>) -> Self {
        FormulationBundle { description: description.into(), ..Default::default() }
    }

    pub fn missing_tags(&self) -> Vec<InstructionTag> {
        InstructionTag::ALL.into_iter().filter(|t| !self.modules.contains_key(t)).collect()
    }

    /// Joins the nine fragments in canonical order, one newline between each.
    pub fn assembled_text(&self) -> Result<String, ModelError> {
        let missing = self.missing_tags();
        if !missing.is_empty() {
            return Err(ModelError::IncompleteBundle { missing });
        }
        let parts: Vec<&str> = InstructionTag::ALL.iter().map(|t| self.modules[t].as_str()).collect();
        Ok(parts.join("\n"))
    }

    /// Assembles and stores the full formulation.
    pub fn assemble(&mut self) -> Result<&str, ModelError> {
        let text = self.assembled_text()?;
        Ok(self.assembled.insert(text))
    }
}

/// Free-function form of [`FormulationBundle::assemble`].
pub fn assemble(bundle: &mut FormulationBundle) -> Result<String, ModelError> {
    bundle.assemble().map(str::to_owned)
}
