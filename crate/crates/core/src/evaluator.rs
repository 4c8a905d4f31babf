//! Classifying candidate formulations as success, failure or exception,
//! aggregating the rates, and the token-level cross-entropy metric.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{objective_fragment, parse_formulation, seal, verify_seal};
use crate::generator::DatasetItem;
use crate::model::{validate_schedule, FormulationBundle, InstructionTag, ModelError, Objective, Schedule, Time};
use crate::process;
use crate::rng::RandomStream;
use crate::solver::{solve, solve_formulation, SolveConfig, SolveStatus};

/// Stdout marker a candidate script prints its objective value with.
pub const OBJECTIVE_MARKER: &str = "OBJECTIVE=";

pub const DEFAULT_IGNORE_INDEX: i64 = -100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no outcomes to aggregate")]
    EmptyInput,
    #[error("invalid token batch: {0}")]
    InvalidBatch(String),
    #[error("every position is ignored, the mean is undefined")]
    AllIgnored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Success,
    Failure,
    Exception,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub class: OutcomeClass,
    pub detail: String,
    pub candidate_value: Option<Time>,
    pub expected_value: Option<Time>,
    /// Modules an exception is attributed to, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failing_tags: Vec<InstructionTag>,
}

impl Outcome {
    fn exception(stage: &str, detail: impl std::fmt::Display, expected: Option<Time>) -> Self {
        Outcome {
            class: OutcomeClass::Exception,
            detail: format!("{stage}: {detail}"),
            candidate_value: None,
            expected_value: expected,
            failing_tags: Vec::new(),
        }
    }
}

/// One line of an outcomes file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub id: String,
    pub class: OutcomeClass,
    pub detail: String,
    pub candidate_value: Option<Time>,
    pub expected_value: Option<Time>,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failing_tags: Vec<InstructionTag>,
}

impl OutcomeRecord {
    pub fn new(id: impl Into<String>, outcome: Outcome, elapsed: Duration) -> Self {
        OutcomeRecord {
            id: id.into(),
            class: outcome.class,
            detail: outcome.detail,
            candidate_value: outcome.candidate_value,
            expected_value: outcome.expected_value,
            elapsed_ms: elapsed.as_millis() as u64,
            failing_tags: outcome.failing_tags,
        }
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            class: self.class,
            detail: self.detail.clone(),
            candidate_value: self.candidate_value,
            expected_value: self.expected_value,
            failing_tags: self.failing_tags.clone(),
        }
    }
}

/// External program that executes an opaque candidate script. The script
/// path is appended to `command`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRunner {
    pub command: Vec<String>,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Candidate {
    Bundle(FormulationBundle),
    Text(String),
    /// Raw file contents: a bundle in JSON or formulation text.
    Bytes(Vec<u8>),
    Script {
        path: PathBuf,
        runner: ScriptRunner,
    },
}

/// Runs the candidate through assembly, parsing and solving and compares its
/// objective with the reference. Every error becomes an exception outcome.
pub fn evaluate_candidate(candidate: &Candidate, reference: &DatasetItem, config: &SolveConfig) -> Outcome {
    let expected = reference.expected_objective;
    let Some(expected_value) = expected else {
        return Outcome::exception("reference", "item has no expected objective", None);
    };
    let text = match candidate {
        Candidate::Script { path, runner } => return evaluate_script(path, runner, expected_value),
        Candidate::Text(text) => text.clone(),
        Candidate::Bundle(bundle) => match bundle_text(bundle, expected) {
            Ok(t) => t,
            Err(outcome) => return outcome,
        },
        Candidate::Bytes(bytes) => {
            let Ok(text) = std::str::from_utf8(bytes) else {
                return Outcome::exception("decode", "candidate is not valid UTF-8", expected);
            };
            if text.trim_start().starts_with('{') {
                let bundle: FormulationBundle = match serde_json::from_str(text) {
                    Ok(b) => b,
                    Err(e) => return Outcome::exception("decode", e, expected),
                };
                match bundle_text(&bundle, expected) {
                    Ok(t) => t,
                    Err(outcome) => return outcome,
                }
            } else {
                text.to_string()
            }
        }
    };

    let formulation = match parse_formulation(&text) {
        Ok(f) => f,
        Err(e) => return Outcome::exception("parse", e, expected),
    };
    let result = match solve_formulation(&formulation, config) {
        Ok(r) => r,
        Err(e) => return Outcome::exception("solve", e, expected),
    };
    let schedule = match (result.status, result.schedule) {
        (_, Some(s)) => s,
        (SolveStatus::Infeasible, None) => return Outcome::exception("solve", "formulation is infeasible", expected),
        (_, None) => return Outcome::exception("solve", "no solution within the limits", expected),
    };
    let value = schedule.objective_value;
    if value != expected_value {
        return failure(format!("objective {value} differs from expected {expected_value}"), value, expected_value);
    }
    let violations = match Schedule::from_starts(&reference.instance, schedule.starts)
        .and_then(|s| validate_schedule(&reference.instance, &s))
    {
        Ok(v) => v,
        Err(e) => return failure(format!("schedule does not fit the reference instance: {e}"), value, expected_value),
    };
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().take(5).map(|v| v.to_string()).collect();
        return failure(
            format!("schedule violates {} constraint(s): {}", violations.len(), listed.join("; ")),
            value,
            expected_value,
        );
    }
    Outcome {
        class: OutcomeClass::Success,
        detail: format!("objective {value} matches"),
        candidate_value: Some(value),
        expected_value: expected,
        failing_tags: Vec::new(),
    }
}

fn failure(detail: String, value: Time, expected: Time) -> Outcome {
    Outcome {
        class: OutcomeClass::Failure,
        detail,
        candidate_value: Some(value),
        expected_value: Some(expected),
        failing_tags: Vec::new(),
    }
}

fn bundle_text(bundle: &FormulationBundle, expected: Option<Time>) -> Result<String, Outcome> {
    if let Err(ModelError::IncompleteBundle { missing }) = bundle.assembled_text() {
        let names: Vec<&str> = missing.iter().map(|t| t.name()).collect();
        let mut outcome =
            Outcome::exception("assemble", format!("incomplete bundle, missing {}", names.join(", ")), expected);
        outcome.failing_tags = missing;
        return Err(outcome);
    }
    verify_seal(bundle).map_err(|e| Outcome::exception("seal", e, expected))?;
    bundle.assembled_text().map_err(|e| Outcome::exception("assemble", e, expected))
}

fn evaluate_script(path: &std::path::Path, runner: &ScriptRunner, expected: Time) -> Outcome {
    let Some((program, args)) = runner.command.split_first() else {
        return Outcome::exception("run", "runner command is empty", Some(expected));
    };
    let mut command = Command::new(program);
    command.args(args).arg(path);
    let output = match process::run(command, None, runner.timeout) {
        Ok(o) => o,
        Err(e) => return Outcome::exception("run", e, Some(expected)),
    };
    if !output.status.success() {
        return Outcome::exception("run", format!("script exited with {}", output.status), Some(expected));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    match parse_objective_marker(&stdout) {
        Some(value) if value == expected => Outcome {
            class: OutcomeClass::Success,
            detail: format!("objective {value} matches"),
            candidate_value: Some(value),
            expected_value: Some(expected),
            failing_tags: Vec::new(),
        },
        Some(value) => failure(format!("objective {value} differs from expected {expected}"), value, expected),
        None => Outcome::exception("run", format!("no {OBJECTIVE_MARKER}<int> line in output"), Some(expected)),
    }
}

/// Value of the last `OBJECTIVE=<int>` line, if any.
pub fn parse_objective_marker(stdout: &str) -> Option<Time> {
    stdout.lines().filter_map(|l| l.trim().strip_prefix(OBJECTIVE_MARKER)).filter_map(|v| v.parse().ok()).next_back()
}

/// Class counts with exact rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u64,
    pub success: u64,
    pub failure: u64,
    pub exception: u64,
    /// Exceptions attributed to each module.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub exception_tags: BTreeMap<InstructionTag, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_losses: Option<BTreeMap<InstructionTag, f64>>,
}

pub fn aggregate(outcomes: &[Outcome]) -> Result<MetricsReport, EvalError> {
    if outcomes.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut report = MetricsReport {
        total: outcomes.len() as u64,
        success: 0,
        failure: 0,
        exception: 0,
        exception_tags: BTreeMap::new(),
        tag_losses: None,
    };
    for o in outcomes {
        match o.class {
            OutcomeClass::Success => report.success += 1,
            OutcomeClass::Failure => report.failure += 1,
            OutcomeClass::Exception => {
                report.exception += 1;
                for &tag in &o.failing_tags {
                    *report.exception_tags.entry(tag).or_default() += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Exact rational rendered with two decimals, halves rounded away from zero.
pub fn render_rate(rate: Ratio<u64>) -> String {
    let hundredths = (rate * 100).round().to_integer();
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

impl MetricsReport {
    pub fn success_rate(&self) -> Ratio<u64> {
        Ratio::new(self.success, self.total)
    }

    pub fn failure_rate(&self) -> Ratio<u64> {
        Ratio::new(self.failure, self.total)
    }

    pub fn exception_rate(&self) -> Ratio<u64> {
        Ratio::new(self.exception, self.total)
    }

    pub fn with_tag_losses(mut self, losses: BTreeMap<InstructionTag, f64>) -> Self {
        self.tag_losses = Some(losses);
        self
    }

    /// Success, failure and exception columns for one row labelled `label`.
    pub fn table(&self, label: &str) -> String {
        let width = label.len().max(5);
        let mut out = format!("{:<width$}  success  failure  exception\n", "model");
        out.push_str(&format!(
            "{:<width$}  {:>7}  {:>7}  {:>9}\n",
            label,
            render_rate(self.success_rate()),
            render_rate(self.failure_rate()),
            render_rate(self.exception_rate())
        ));
        out.push_str(&format!(
            "\nitems: {} ({} success, {} failure, {} exception)\n",
            self.total, self.success, self.failure, self.exception
        ));
        if !self.exception_tags.is_empty() {
            out.push_str("\nexceptions by module:\n");
            for (tag, n) in &self.exception_tags {
                out.push_str(&format!("  {:<22} {n}\n", tag.name()));
            }
        }
        if let Some(losses) = &self.tag_losses {
            out.push_str("\nloss by module:\n");
            for (tag, loss) in losses {
                out.push_str(&format!("  {:<22} {loss:.4}\n", tag.name()));
            }
        }
        out
    }

    /// Counts plus exact and rendered rates.
    pub fn summary_json(&self) -> serde_json::Value {
        let rate = |r: Ratio<u64>| serde_json::json!({ "exact": r.to_string(), "rendered": render_rate(r) });
        serde_json::json!({
            "total": self.total,
            "counts": { "success": self.success, "failure": self.failure, "exception": self.exception },
            "rates": {
                "success": rate(self.success_rate()),
                "failure": rate(self.failure_rate()),
                "exception": rate(self.exception_rate()),
            },
            "exception_tags": self.exception_tags,
            "tag_losses": self.tag_losses,
        })
    }
}

fn default_ignore_index() -> i64 {
    DEFAULT_IGNORE_INDEX
}

/// Scores for `N` positions over `C` classes with one target per position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenBatch {
    pub logits: Vec<Vec<f64>>,
    pub targets: Vec<i64>,
    #[serde(default = "default_ignore_index")]
    pub ignore_index: i64,
}

impl TokenBatch {
    pub fn new(logits: Vec<Vec<f64>>, targets: Vec<i64>) -> Self {
        TokenBatch { logits, targets, ignore_index: DEFAULT_IGNORE_INDEX }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidBatch(m));
        if self.targets.len() != self.logits.len() {
            return bad(format!("{} targets for {} rows", self.targets.len(), self.logits.len()));
        }
        let classes = self.logits.first().map_or(0, Vec::len);
        for (n, (row, &y)) in self.logits.iter().zip(&self.targets).enumerate() {
            if row.len() != classes || classes == 0 {
                return bad(format!("row {n} has {} classes, expected {classes}", row.len()));
            }
            if row.iter().any(|x| !x.is_finite()) {
                return bad(format!("row {n} has a non-finite logit"));
            }
            if y != self.ignore_index && !(0..classes as i64).contains(&y) {
                return bad(format!("target {y} at row {n} is outside 0..{classes}"));
            }
        }
        Ok(())
    }
}

/// Mean negative log-softmax of the target class over non-ignored positions.
pub fn cross_entropy(batch: &TokenBatch) -> Result<f64, EvalError> {
    batch.validate()?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (row, &y) in batch.logits.iter().zip(&batch.targets) {
        if y == batch.ignore_index {
            continue;
        }
        let (argmax, max) =
            row.iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (c, x)| if x > best.1 { (c, x) } else { best });
        let rest: f64 = row.iter().enumerate().filter(|&(c, _)| c != argmax).map(|(_, x)| (x - max).exp()).sum();
        total += max - row[y as usize] + rest.ln_1p();
        count += 1;
    }
    if count == 0 {
        return Err(EvalError::AllIgnored);
    }
    Ok(total / count as f64)
}

/// Cross-entropy of each module's batch.
pub fn tag_losses(batches: &BTreeMap<InstructionTag, TokenBatch>) -> Result<BTreeMap<InstructionTag, f64>, EvalError> {
    batches.iter().map(|(&tag, b)| Ok((tag, cross_entropy(b)?))).collect()
}

/// Replaces the objective module with the first other objective, in
/// declaration order, that the instance supports and whose optimum differs
/// from the expected value. `None` if no objective qualifies.
pub fn swap_objective(item: &DatasetItem, config: &SolveConfig) -> Option<FormulationBundle> {
    let current = item.instance.objective();
    let expected = item.expected_objective?;
    let alternative: Objective = Objective::ALL.into_iter().filter(|&o| o != current).find(|&o| {
        let inst = item.instance.with_objective(o);
        inst.check_prerequisites().is_ok()
            && solve(&inst, config).ok().and_then(|r| r.objective()).is_some_and(|v| v != expected)
    })?;
    let mut bundle = item.bundle.clone();
    bundle.modules.insert(InstructionTag::DefineObjective, objective_fragment(alternative));
    seal(&mut bundle).ok()?;
    Some(bundle)
}

/// The bundle without `tag`'s module.
pub fn drop_fragment(bundle: &FormulationBundle, tag: InstructionTag) -> FormulationBundle {
    let mut out = bundle.clone();
    out.modules.remove(&tag);
    out.assembled = None;
    out
}

/// The bundle's JSON encoding with one to four distinct bytes replaced by
/// different random values.
pub fn corrupt_bytes(bundle: &FormulationBundle, rng: &mut RandomStream) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(bundle).expect("bundle serializes");
    let len = bytes.len() as u32;
    let flips = 1 + rng.below(4).min(len - 1) as usize;
    let mut positions: Vec<usize> = Vec::with_capacity(flips);
    while positions.len() < flips {
        let pos = rng.below(len) as usize;
        if !positions.contains(&pos) {
            positions.push(pos);
        }
    }
    for pos in positions {
        let old = bytes[pos];
        bytes[pos] = old.wrapping_add(1 + rng.below(255) as u8);
    }
    bytes
}

/// Wall time of `f`, for outcome records.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let started = Instant::now();
    let value = f();
    (value, started.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_dataset, ScenarioSpec, ScenarioType};

    fn outcome(class: OutcomeClass) -> Outcome {
        Outcome { class, detail: String::new(), candidate_value: None, expected_value: None, failing_tags: vec![] }
    }

    fn item(kind: ScenarioType) -> DatasetItem {
        let spec = ScenarioSpec::new(kind, 3, 3);
        build_dataset(1, 5, &[spec], &SolveConfig::default()).unwrap().remove(0)
    }

    #[test]
    fn aggregate_counts() {
        use OutcomeClass::*;
        let list: Vec<Outcome> = [Success, Success, Failure, Exception, Exception].map(outcome).to_vec();
        let r = aggregate(&list).unwrap();
        assert_eq!(render_rate(r.success_rate()), "0.40");
        assert_eq!(render_rate(r.failure_rate()), "0.20");
        assert_eq!(render_rate(r.exception_rate()), "0.40");
        assert_eq!(r.success_rate() + r.failure_rate() + r.exception_rate(), Ratio::from_integer(1));

        let all = aggregate(&vec![outcome(Success); 20]).unwrap();
        assert_eq!(
            [all.success_rate(), all.failure_rate(), all.exception_rate()].map(render_rate),
            ["1.00", "0.00", "0.00"]
        );
        let one = aggregate(&[outcome(Exception)]).unwrap();
        assert_eq!(render_rate(one.exception_rate()), "1.00");
        assert_eq!(aggregate(&[]), Err(EvalError::EmptyInput));
    }

    #[test]
    fn rate_rendering_rounds() {
        assert_eq!(render_rate(Ratio::new(1, 3)), "0.33");
        assert_eq!(render_rate(Ratio::new(2, 3)), "0.67");
        assert_eq!(render_rate(Ratio::new(1, 200)), "0.01");
        assert_eq!(render_rate(Ratio::new(1, 1)), "1.00");
    }

    #[test]
    fn cross_entropy_cases() {
        let uniform = TokenBatch::new(vec![vec![0.0, 0.0]], vec![0]);
        assert!((cross_entropy(&uniform).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let big = TokenBatch::new(vec![vec![1000.0, 0.0]], vec![0]);
        let v = cross_entropy(&big).unwrap();
        assert!(v.is_finite() && v.abs() < 1e-12);
        let ignored = TokenBatch::new(vec![vec![0.3, 1.2], vec![5.0, -1.0]], vec![0, -100]);
        let single = TokenBatch::new(vec![vec![0.3, 1.2]], vec![0]);
        assert_eq!(cross_entropy(&ignored).unwrap(), cross_entropy(&single).unwrap());
        assert_eq!(cross_entropy(&TokenBatch::new(vec![vec![1.0]], vec![-100])), Err(EvalError::AllIgnored));
        assert!(cross_entropy(&TokenBatch::new(vec![vec![1.0, 2.0]], vec![2])).is_err());
        assert!(cross_entropy(&TokenBatch::new(vec![vec![1.0, 2.0]], vec![])).is_err());
    }

    #[test]
    fn objective_marker() {
        assert_eq!(parse_objective_marker("noise\nOBJECTIVE=12\n"), Some(12));
        assert_eq!(parse_objective_marker("OBJECTIVE=1\nOBJECTIVE=3"), Some(3));
        assert_eq!(parse_objective_marker("OBJECTIVE=x"), None);
        assert_eq!(parse_objective_marker(""), None);
    }

    #[test]
    fn reference_bundle_succeeds() {
        let it = item(ScenarioType::MinWeightedTardiness);
        let config = SolveConfig::default();
        let o = evaluate_candidate(&Candidate::Bundle(it.bundle.clone()), &it, &config);
        assert_eq!(o.class, OutcomeClass::Success, "{}", o.detail);
        let bytes = serde_json::to_vec(&it.bundle).unwrap();
        assert_eq!(evaluate_candidate(&Candidate::Bytes(bytes), &it, &config).class, OutcomeClass::Success);
        let text = it.bundle.assembled.clone().unwrap();
        assert_eq!(evaluate_candidate(&Candidate::Text(text), &it, &config).class, OutcomeClass::Success);
    }

    #[test]
    fn mutations_classify() {
        let config = SolveConfig::default();
        let it = item(ScenarioType::MinMaxTardiness);
        let swapped = swap_objective(&it, &config).expect("due dates allow a swap");
        let o = evaluate_candidate(&Candidate::Bundle(swapped), &it, &config);
        assert_eq!(o.class, OutcomeClass::Failure, "{}", o.detail);

        let dropped = drop_fragment(&it.bundle, InstructionTag::Solve);
        let o = evaluate_candidate(&Candidate::Bundle(dropped), &it, &config);
        assert_eq!(o.class, OutcomeClass::Exception);
        assert!(o.detail.contains("incomplete bundle"));
        assert_eq!(o.failing_tags, vec![InstructionTag::Solve]);

        let mut rng = crate::rng::seeded_rng(3);
        for _ in 0..50 {
            let bytes = corrupt_bytes(&it.bundle, &mut rng);
            let o = evaluate_candidate(&Candidate::Bytes(bytes), &it, &config);
            assert_eq!(o.class, OutcomeClass::Exception, "{}", o.detail);
        }
    }

    #[test]
    fn relaxed_formulation_fails() {
        let it = item(ScenarioType::MinMakespan);
        let text = it.bundle.assembled.clone().unwrap();
        let relaxed: Vec<&str> = text.lines().filter(|l| !l.starts_with("constraint no_overlap")).collect();
        let o = evaluate_candidate(&Candidate::Text(relaxed.join("\n")), &it, &SolveConfig::default());
        assert_eq!(o.class, OutcomeClass::Failure);
    }

    #[test]
    fn unsupported_makespan_swap_is_none() {
        let it = item(ScenarioType::MinMakespan);
        assert!(swap_objective(&it, &SolveConfig::default()).is_none());
    }
}
