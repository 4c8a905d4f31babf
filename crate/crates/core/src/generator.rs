//! Seeded synthesis of scenario instances, their problem descriptions and
//! the reference formulation bundles that make up a dataset.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::reference_bundle;
use crate::model::{
    DurationUnit, ExtraPrecedence, FormulationBundle, InstanceData, InstructionTag, JobShopInstance, ModelError,
    Objective, OpRef, Schedule, Time, ALLOWED_WEIGHTS,
};
use crate::parallel;
use crate::rng::{seeded_rng, RandomStream};
use crate::solver::{solve, SolveConfig, SolveError, SolveStatus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("dataset size must be at least 1")]
    ZeroCount,
    #[error("scenario mix is empty")]
    EmptyMix,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// The seven scenario families of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioType {
    TaskPrecedence,
    ReleaseTimes,
    MinMakespan,
    MinMaxTardiness,
    MinWeightedTardiness,
    MinTotalFlowTime,
    MinTotalWeightedFlowTime,
}

impl ScenarioType {
    pub const ALL: [ScenarioType; 7] = [
        ScenarioType::TaskPrecedence,
        ScenarioType::ReleaseTimes,
        ScenarioType::MinMakespan,
        ScenarioType::MinMaxTardiness,
        ScenarioType::MinWeightedTardiness,
        ScenarioType::MinTotalFlowTime,
        ScenarioType::MinTotalWeightedFlowTime,
    ];

    pub fn objective(self) -> Objective {
        match self {
            ScenarioType::TaskPrecedence | ScenarioType::ReleaseTimes | ScenarioType::MinMakespan => {
                Objective::Makespan
            }
            ScenarioType::MinMaxTardiness => Objective::MaxTardiness,
            ScenarioType::MinWeightedTardiness => Objective::TotalWeightedTardiness,
            ScenarioType::MinTotalFlowTime => Objective::TotalFlowTime,
            ScenarioType::MinTotalWeightedFlowTime => Objective::TotalWeightedFlowTime,
        }
    }

    pub fn has_releases(self) -> bool {
        matches!(
            self,
            ScenarioType::ReleaseTimes
                | ScenarioType::MinWeightedTardiness
                | ScenarioType::MinTotalFlowTime
                | ScenarioType::MinTotalWeightedFlowTime
        )
    }

    pub fn has_due_dates(self) -> bool {
        self.objective().needs_due_dates()
    }

    pub fn has_weights(self) -> bool {
        self.objective().needs_weights()
    }
}

/// Positive rational `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allowance {
    pub num: i64,
    pub den: i64,
}

impl Allowance {
    pub const DEFAULT: Allowance = Allowance { num: 13, den: 10 };

    /// `round_half_up(self * value)` for nonnegative `value`.
    pub fn apply(self, value: Time) -> Time {
        (2 * self.num * value + self.den).div_euclid(2 * self.den)
    }
}

impl Default for Allowance {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Structured form of the description's precedence note. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrecedenceNote {
    /// Operation `op` of `job` ends before operation `op` of every other job starts.
    BeforeSameTaskOfOthers { job: usize, op: usize },
    /// Operation `op` of every job ends before any job completes.
    BeforeAnyCompletion { op: usize },
}

fn default_max_duration() -> Time {
    20
}

fn default_release_range() -> (Time, Time) {
    (0, 50)
}

fn default_weights() -> Vec<(Time, f64)> {
    vec![(1, 0.2), (2, 0.6), (4, 0.2)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_type: ScenarioType,
    pub num_jobs: usize,
    pub num_machines: usize,
    #[serde(default = "default_max_duration")]
    pub max_duration: Time,
    #[serde(default = "default_release_range")]
    pub release_range: (Time, Time),
    #[serde(default)]
    pub due_date_allowance: Allowance,
    #[serde(default = "default_weights")]
    pub weight_distribution: Vec<(Time, f64)>,
    /// Jobs whose durations are stated in minutes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_rules: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precedence_note: Option<PrecedenceNote>,
}

impl ScenarioSpec {
    pub fn new(scenario_type: ScenarioType, num_jobs: usize, num_machines: usize) -> Self {
        ScenarioSpec {
            scenario_type,
            num_jobs,
            num_machines,
            max_duration: default_max_duration(),
            release_range: default_release_range(),
            due_date_allowance: Allowance::DEFAULT,
            weight_distribution: default_weights(),
            unit_rules: None,
            precedence_note: None,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InvalidSpec(m));
        if self.num_jobs == 0 || self.num_machines == 0 {
            return bad("jobs and machines must be positive".into());
        }
        if self.max_duration < 1 || self.max_duration > i64::from(u32::MAX) {
            return bad(format!("max duration {} out of range", self.max_duration));
        }
        let (lo, hi) = self.release_range;
        if lo < 0 || lo > hi || hi - lo >= i64::from(u32::MAX) {
            return bad(format!("release range {lo}..={hi} must be nonnegative and ordered"));
        }
        if self.due_date_allowance.num <= 0 || self.due_date_allowance.den <= 0 {
            return bad("due date allowance must be positive".into());
        }
        if self.weight_distribution.is_empty() {
            return bad("weight distribution is empty".into());
        }
        let total: f64 = self.weight_distribution.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 || self.weight_distribution.iter().any(|(_, p)| *p < 0.0) {
            return bad(format!("weight probabilities sum to {total}, not 1"));
        }
        if let Some((w, _)) = self.weight_distribution.iter().find(|(w, _)| !ALLOWED_WEIGHTS.contains(w)) {
            return bad(format!("weight {w} is not one of 1, 2, 4"));
        }
        if let Some(jobs) = &self.unit_rules {
            if let Some(j) = jobs.iter().find(|&&j| j >= self.num_jobs) {
                return bad(format!("unit rule names job {j} of {}", self.num_jobs));
            }
        }
        match self.precedence_note {
            Some(PrecedenceNote::BeforeSameTaskOfOthers { job, op })
                if job >= self.num_jobs || op >= self.num_machines =>
            {
                return bad(format!("precedence note names missing task {job}.{op}"))
            }
            Some(PrecedenceNote::BeforeAnyCompletion { op }) if op >= self.num_machines => {
                return bad(format!("precedence note names missing task index {op}"))
            }
            _ => {}
        }
        Ok(())
    }

    fn unit_of(&self, job: usize) -> DurationUnit {
        match &self.unit_rules {
            Some(jobs) if jobs.contains(&job) => DurationUnit::Minutes,
            _ => DurationUnit::Seconds,
        }
    }

    fn compile_precedences(&self) -> Vec<ExtraPrecedence> {
        match self.precedence_note {
            None => Vec::new(),
            Some(PrecedenceNote::BeforeSameTaskOfOthers { job, op }) => (0..self.num_jobs)
                .filter(|&k| k != job)
                .map(|k| ExtraPrecedence::EndBeforeStart { before: OpRef::new(job, op), after: OpRef::new(k, op) })
                .collect(),
            Some(PrecedenceNote::BeforeAnyCompletion { op }) => {
                (0..self.num_jobs).map(|j| ExtraPrecedence::EndBeforeAllCompletions { op: OpRef::new(j, op) }).collect()
            }
        }
    }
}

/// Weight for one uniform draw `u` in `[0, 1)`, via cumulative thresholds.
pub fn sample_weight(distribution: &[(Time, f64)], u: f64) -> Time {
    let mut cumulative = 0.0;
    for &(weight, p) in distribution {
        cumulative += p;
        if u < cumulative {
            return weight;
        }
    }
    distribution.last().map(|(w, _)| *w).expect("nonempty distribution")
}

/// Draws one instance. Draw order: routes, durations, releases, weights, each
/// job by job.
pub fn generate_instance(spec: &ScenarioSpec, rng: &mut RandomStream) -> Result<JobShopInstance, GeneratorError> {
    spec.validate()?;
    let (n, m) = (spec.num_jobs, spec.num_machines);
    let routes: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut route: Vec<usize> = (0..m).collect();
            rng.shuffle(&mut route);
            route
        })
        .collect();
    let mut durations: Vec<Vec<Time>> =
        (0..n).map(|_| (0..m).map(|_| rng.range_inclusive(1, spec.max_duration)).collect()).collect();
    let kind = spec.scenario_type;
    let releases = kind
        .has_releases()
        .then(|| (0..n).map(|_| rng.range_inclusive(spec.release_range.0, spec.release_range.1)).collect());
    let weights =
        kind.has_weights().then(|| (0..n).map(|_| sample_weight(&spec.weight_distribution, rng.unit())).collect());
    let units: Vec<DurationUnit> = (0..n).map(|j| spec.unit_of(j)).collect();
    for (row, unit) in durations.iter_mut().zip(&units) {
        row.iter_mut().for_each(|p| *p *= unit.factor());
    }
    let due_dates = kind
        .has_due_dates()
        .then(|| durations.iter().map(|row| spec.due_date_allowance.apply(row.iter().sum())).collect());
    let data = InstanceData {
        num_jobs: n,
        num_machines: m,
        routes,
        durations,
        releases,
        due_dates,
        weights,
        objective: kind.objective(),
        extra_precedences: spec.compile_precedences(),
        units,
    };
    Ok(JobShopInstance::new(data)?)
}

const NUMBER_WORDS: [&str; 21] = [
    "zero",
    "one",
    "two",
    "three",
    "four",
    "five",
    "six",
    "seven",
    "eight",
    "nine",
    "ten",
    "eleven",
    "twelve",
    "thirteen",
    "fourteen",
    "fifteen",
    "sixteen",
    "seventeen",
    "eighteen",
    "nineteen",
    "twenty",
];
const ORDINALS: [&str; 21] = [
    "zeroth",
    "first",
    "second",
    "third",
    "fourth",
    "fifth",
    "sixth",
    "seventh",
    "eighth",
    "ninth",
    "tenth",
    "eleventh",
    "twelfth",
    "thirteenth",
    "fourteenth",
    "fifteenth",
    "sixteenth",
    "seventeenth",
    "eighteenth",
    "nineteenth",
    "twentieth",
];

fn number_word(n: usize) -> String {
    NUMBER_WORDS.get(n).map_or_else(|| n.to_string(), |w| w.to_string())
}

fn ordinal(n: usize) -> String {
    ORDINALS.get(n).map_or_else(|| format!("{n}th"), |w| w.to_string())
}

fn english_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn format_allowance(a: Allowance) -> String {
    let value = a.num as f64 / a.den as f64;
    format!("{value}")
}

fn objective_sentence(objective: Objective) -> &'static str {
    match objective {
        Objective::Makespan => "The objective function is makespan.",
        Objective::MaxTardiness => "The objective function is maximum tardiness.",
        Objective::TotalWeightedTardiness => "The objective function is total weighted tardiness.",
        Objective::TotalFlowTime => "The objective function is total flow time (completion time - release time).",
        Objective::TotalWeightedFlowTime => "The objective function is the total weighted flowtime.",
    }
}

/// Number of description templates; `style` is taken modulo this.
pub const DESCRIPTION_STYLES: usize = 2;

/// Renders the problem description for a scenario. Deterministic in its
/// arguments.
pub fn describe(spec: &ScenarioSpec, style: usize) -> String {
    let kind = spec.scenario_type;
    let mut text = match style % DESCRIPTION_STYLES {
        0 => format!(
            "Create a job shop scheduling model with {} jobs and {} machines.",
            spec.num_jobs, spec.num_machines
        ),
        _ => format!("Job shop scheduling model with {} jobs and {} machines.", spec.num_jobs, spec.num_machines),
    };
    text.push_str(" All jobs have random routes and their operations have random durations.");
    if kind.has_due_dates() {
        let _ = write!(
            text,
            " The due dates are calculated based on the total processing time of each job multiplied by a due date allowance of {}.",
            format_allowance(spec.due_date_allowance)
        );
    }
    if kind.has_releases() {
        let (lo, hi) = spec.release_range;
        let _ = write!(
            text,
            " The release time of a job is a random value from {lo} to {hi}. Jobs cannot start before their release times."
        );
    }
    if kind.has_weights() {
        let parts: Vec<String> = spec
            .weight_distribution
            .iter()
            .map(|(w, p)| format!("{}% will have a weight of {w}", (p * 100.0).round() as i64))
            .collect();
        let joined = match parts.as_slice() {
            [init @ .., last] if !init.is_empty() => format!("{}, and {last}", init.join(", ")),
            _ => parts.join(""),
        };
        let _ = write!(text, " Each job has a weight following a random distribution in which {joined}.");
    }
    let _ = write!(text, " {}", objective_sentence(kind.objective()));
    let _ = write!(text, " Maximum duration is {}.", spec.max_duration);
    text.push_str(" After solving the problem, solutions will be printed and visualised.");

    let mut notes = Vec::new();
    match spec.precedence_note {
        Some(PrecedenceNote::BeforeSameTaskOfOthers { job, op }) => notes.push(format!(
            "The {} task of Job {} has to come before all the {} tasks of other jobs.",
            ordinal(op + 1),
            number_word(job + 1),
            ordinal(op + 1)
        )),
        Some(PrecedenceNote::BeforeAnyCompletion { op }) => notes.push(format!(
            "The {} task related to each job should be completed before the completion of any job.",
            ordinal(op + 1)
        )),
        None => {}
    }
    if let Some(jobs) = spec.unit_rules.as_ref().filter(|j| !j.is_empty()) {
        let mut sorted = jobs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        let names: Vec<String> = sorted.iter().map(|j| number_word(j + 1)).collect();
        let subject = if names.len() == 1 { "Job" } else { "Jobs" };
        notes.push(format!(
            "{subject} {} will have task durations in minutes. Other jobs will have task durations in seconds.",
            english_list(&names)
        ));
    }
    if !notes.is_empty() {
        let _ = write!(text, " Note: {}", notes.join(" "));
    }
    text
}

/// One dataset entry: scenario, drawn instance, reference formulation and
/// the solver's objective for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub index: usize,
    pub scenario: ScenarioSpec,
    pub instance: JobShopInstance,
    pub bundle: FormulationBundle,
    pub expected_objective: Option<Time>,
    pub solve_status: Option<SolveStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
}

impl DatasetItem {
    /// Items whose reference value is not a proven optimum.
    pub fn is_flagged(&self) -> bool {
        self.solve_status != Some(SolveStatus::Optimal)
    }
}

pub fn item_id(index: usize) -> String {
    format!("item-{index:04}")
}

pub fn render_description(item: &DatasetItem) -> String {
    describe(&item.scenario, item.index)
}

/// One instruction-suffixed prompt and the fragment it should produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModularPair {
    pub id: String,
    pub tag: InstructionTag,
    pub prompt: String,
    pub completion: String,
}

/// Splits an item into nine (description + suffix, fragment) pairs in
/// canonical tag order.
pub fn modularize(item: &DatasetItem) -> Result<Vec<ModularPair>, ModelError> {
    let missing = item.bundle.missing_tags();
    if !missing.is_empty() {
        return Err(ModelError::IncompleteBundle { missing });
    }
    Ok(InstructionTag::ALL
        .iter()
        .map(|&tag| ModularPair {
            id: item.id.clone(),
            tag,
            prompt: format!("{}{}", item.bundle.description, tag.suffix()),
            completion: item.bundle.modules[&tag].clone(),
        })
        .collect())
}

/// Job and machine counts of the default mix, paper-sample sizes first.
pub const DEFAULT_SIZES: [(usize, usize); 16] = [
    (5, 5),
    (6, 6),
    (6, 5),
    (5, 6),
    (4, 4),
    (3, 3),
    (4, 5),
    (5, 4),
    (3, 4),
    (4, 3),
    (6, 4),
    (4, 6),
    (3, 5),
    (5, 3),
    (3, 6),
    (6, 3),
];

/// Every scenario at every default size, sizes outermost. Precedence notes
/// alternate between the two note kinds; weighted flow time uses minute
/// durations for jobs two and four.
pub fn default_mix() -> Vec<ScenarioSpec> {
    let mut mix = Vec::with_capacity(DEFAULT_SIZES.len() * ScenarioType::ALL.len());
    for (k, &(jobs, machines)) in DEFAULT_SIZES.iter().enumerate() {
        for kind in ScenarioType::ALL {
            let mut spec = ScenarioSpec::new(kind, jobs, machines);
            match kind {
                ScenarioType::TaskPrecedence if k % 2 == 0 => {
                    spec.precedence_note = Some(PrecedenceNote::BeforeSameTaskOfOthers { job: 1, op: 1 })
                }
                ScenarioType::TaskPrecedence => {
                    spec.precedence_note = Some(PrecedenceNote::BeforeAnyCompletion { op: 0 })
                }
                ScenarioType::MinTotalWeightedFlowTime => {
                    spec.unit_rules = Some(if jobs > 3 { vec![1, 3] } else { vec![1] })
                }
                _ => {}
            }
            mix.push(spec);
        }
    }
    mix
}

/// Generates `count` items round-robin over `mix`, then solves them (in
/// parallel when enabled). Every instance is drawn from a fresh stream seeded
/// with `seed`, so its data depends only on its scenario and the seed, and
/// items with the same description share the same data.
pub fn build_dataset(
    count: usize,
    seed: u64,
    mix: &[ScenarioSpec],
    config: &SolveConfig,
) -> Result<Vec<DatasetItem>, GeneratorError> {
    if count == 0 {
        return Err(GeneratorError::ZeroCount);
    }
    if mix.is_empty() {
        return Err(GeneratorError::EmptyMix);
    }
    config.validate()?;
    for spec in mix {
        spec.validate()?;
    }
    let mut items = Vec::with_capacity(count);
    for index in 0..count {
        let scenario = mix[index % mix.len()].clone();
        let instance = generate_instance(&scenario, &mut seeded_rng(seed))?;
        let description = describe(&scenario, index);
        let bundle = reference_bundle(&instance, &description);
        items.push(DatasetItem {
            id: item_id(index),
            index,
            scenario,
            instance,
            bundle,
            expected_objective: None,
            solve_status: None,
            schedule: None,
        });
    }
    let results = parallel::map(&items, |item| solve(&item.instance, config));
    for (item, result) in items.iter_mut().zip(results) {
        let result = result?;
        item.expected_objective = result.objective();
        item.solve_status = Some(result.status);
        item.schedule = result.schedule;
    }
    Ok(items)
}
