//! Text formats: the versioned instance file and the modular formulation
//! language that reference bundles (and candidates) are written in.
//!
//! Both are line oriented. `#` starts a comment, tokens are separated by
//! whitespace, operations are written `job.op` with zero-based indices and
//! durations are given in the unit declared for their job.
//!
//! Instance file:
//!
//! ```text
//! shopform-instance 1
//! jobs 2
//! machines 2
//! objective makespan
//! job 0 unit seconds route 0 1 durations 3 4
//! job 1 unit minutes route 1 0 durations 1 2
//! releases 0 5
//! precedence end_before_start 0.0 1.1
//! ```
//!
//! A formulation spreads the same data over nine modules; see
//! [`reference_bundle`] for the canonical shape and [`parse_formulation`] for
//! the rules a candidate has to satisfy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    DurationUnit, ExtraPrecedence, FormulationBundle, InstanceData, InstructionTag, JobShopInstance, ModelError,
    Objective, OpRef, Time,
};

pub const INSTANCE_HEADER: &str = "shopform-instance";
pub const INSTANCE_VERSION: u32 = 1;
pub const CP_MODULE: &str = "shopform.cp";
pub const CP_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Incomplete(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn syntax<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Syntax { line, message: message.into() })
}

/// Constraint classes a formulation may leave out; the solver then optimizes
/// the relaxed model, as a real solver would.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintSet {
    pub release: bool,
    pub no_overlap: bool,
    pub job_precedence: bool,
}

impl ConstraintSet {
    pub const FULL: ConstraintSet = ConstraintSet { release: true, no_overlap: true, job_precedence: true };
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self::FULL
    }
}

/// A parsed formulation: the instance it encodes and which constraint
/// classes it actually posts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formulation {
    pub instance: JobShopInstance,
    pub constraints: ConstraintSet,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        (!tokens.is_empty()).then_some(Line { number: i + 1, tokens })
    })
}

fn parse_num<T: std::str::FromStr>(line: usize, token: &str, what: &str) -> Result<T, FormatError> {
    token.parse().or_else(|_| syntax(line, format!("expected {what}, found `{token}`")))
}

fn parse_op(line: usize, token: &str) -> Result<OpRef, FormatError> {
    let Some((job, op)) = token.split_once('.') else {
        return syntax(line, format!("expected job.op, found `{token}`"));
    };
    Ok(OpRef::new(parse_num(line, job, "job index")?, parse_num(line, op, "operation index")?))
}

fn parse_list<T: std::str::FromStr>(line: usize, tokens: &[&str], what: &str) -> Result<Vec<T>, FormatError> {
    tokens.iter().map(|t| parse_num(line, t, what)).collect()
}

#[derive(Default)]
struct JobRow {
    unit: String,
    route: Vec<usize>,
    durations: Vec<Time>,
}

/// Accumulates the data statements shared by both formats.
#[derive(Default)]
struct DataBuilder {
    jobs: Option<usize>,
    machines: Option<usize>,
    rows: BTreeMap<usize, JobRow>,
    releases: Option<Vec<Time>>,
    due_dates: Option<Vec<Time>>,
    weights: Option<Vec<Time>>,
}

impl DataBuilder {
    /// Consumes a data statement. Returns `Ok(false)` when the keyword is not
    /// a data keyword.
    fn accept(&mut self, line: &Line<'_>) -> Result<bool, FormatError> {
        let n = line.number;
        let t = &line.tokens;
        fn once<T>(slot: &mut Option<T>, value: T, n: usize, what: &str) -> Result<(), FormatError> {
            if slot.replace(value).is_some() {
                return syntax(n, format!("`{what}` given twice"));
            }
            Ok(())
        }
        match t[0] {
            "jobs" | "machines" => {
                if t.len() != 2 {
                    return syntax(n, format!("`{}` takes one count", t[0]));
                }
                let v: usize = parse_num(n, t[1], "count")?;
                let slot = if t[0] == "jobs" { &mut self.jobs } else { &mut self.machines };
                once(slot, v, n, t[0])?;
            }
            "job" => {
                // job J unit U route m... durations p...
                if t.len() < 7 || t[2] != "unit" || t[4] != "route" {
                    return syntax(n, "expected `job J unit U route m.. durations p..`");
                }
                let j: usize = parse_num(n, t[1], "job index")?;
                let Some(split) = t.iter().position(|&x| x == "durations") else {
                    return syntax(n, "missing `durations`");
                };
                let row = JobRow {
                    unit: t[3].to_string(),
                    route: parse_list(n, &t[5..split], "machine index")?,
                    durations: parse_list(n, &t[split + 1..], "duration")?,
                };
                if self.rows.insert(j, row).is_some() {
                    return syntax(n, format!("job {j} defined twice"));
                }
            }
            "releases" => once(&mut self.releases, parse_list(n, &t[1..], "release")?, n, "releases")?,
            "due_dates" => once(&mut self.due_dates, parse_list(n, &t[1..], "due date")?, n, "due_dates")?,
            "weights" => once(&mut self.weights, parse_list(n, &t[1..], "weight")?, n, "weights")?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn finish(
        self,
        factors: &BTreeMap<String, Time>,
        objective: Objective,
        extra_precedences: Vec<ExtraPrecedence>,
    ) -> Result<JobShopInstance, FormatError> {
        let num_jobs = self.jobs.ok_or_else(|| FormatError::Incomplete("missing `jobs`".into()))?;
        let num_machines = self.machines.ok_or_else(|| FormatError::Incomplete("missing `machines`".into()))?;
        if self.rows.keys().copied().ne(0..num_jobs) {
            return Err(FormatError::Incomplete(format!("expected rows for jobs 0..{num_jobs}")));
        }
        let mut routes = Vec::with_capacity(num_jobs);
        let mut durations = Vec::with_capacity(num_jobs);
        let mut units = Vec::with_capacity(num_jobs);
        for (j, row) in self.rows {
            let unit = DurationUnit::from_keyword(&row.unit)
                .ok_or_else(|| FormatError::Incomplete(format!("job {j}: unknown unit `{}`", row.unit)))?;
            let factor = *factors
                .get(&row.unit)
                .ok_or_else(|| FormatError::Incomplete(format!("job {j}: no conversion for unit `{}`", row.unit)))?;
            let converted = row
                .durations
                .iter()
                .map(|p| p.checked_mul(factor))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| FormatError::Incomplete(format!("job {j}: duration overflow")))?;
            routes.push(row.route);
            durations.push(converted);
            units.push(unit);
        }
        let data = InstanceData {
            num_jobs,
            num_machines,
            routes,
            durations,
            releases: self.releases,
            due_dates: self.due_dates,
            weights: self.weights,
            objective,
            extra_precedences,
            units,
        };
        Ok(JobShopInstance::new(data)?)
    }
}

fn parse_precedence(n: usize, t: &[&str]) -> Result<ExtraPrecedence, FormatError> {
    match t {
        ["end_before_start", a, b] => {
            Ok(ExtraPrecedence::EndBeforeStart { before: parse_op(n, a)?, after: parse_op(n, b)? })
        }
        ["end_before_all_completions", a] => Ok(ExtraPrecedence::EndBeforeAllCompletions { op: parse_op(n, a)? }),
        _ => syntax(n, "expected `end_before_start J.I K.L` or `end_before_all_completions J.I`"),
    }
}

fn precedence_tokens(p: &ExtraPrecedence) -> String {
    match p {
        ExtraPrecedence::EndBeforeStart { before, after } => format!("end_before_start {before} {after}"),
        ExtraPrecedence::EndBeforeAllCompletions { op } => format!("end_before_all_completions {op}"),
    }
}

fn canonical_factors() -> BTreeMap<String, Time> {
    [DurationUnit::Seconds, DurationUnit::Minutes].into_iter().map(|u| (u.keyword().to_string(), u.factor())).collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn write_data(out: &mut String, instance: &JobShopInstance) {
    let _ = writeln!(out, "jobs {}", instance.num_jobs());
    let _ = writeln!(out, "machines {}", instance.num_machines());
    for j in 0..instance.num_jobs() {
        let unit = instance.units()[j];
        let native: Vec<Time> = instance.durations(j).iter().map(|p| p / unit.factor()).collect();
        let _ = writeln!(
            out,
            "job {j} unit {} route {} durations {}",
            unit.keyword(),
            join(instance.route(j)),
            join(&native)
        );
    }
    if let Some(r) = instance.releases() {
        let _ = writeln!(out, "releases {}", join(r));
    }
    if let Some(d) = instance.due_dates() {
        let _ = writeln!(out, "due_dates {}", join(d));
    }
    if let Some(w) = instance.weights() {
        let _ = writeln!(out, "weights {}", join(w));
    }
}

/// Serializes an instance in the versioned instance file format.
pub fn write_instance(instance: &JobShopInstance) -> String {
    let mut out = format!("{INSTANCE_HEADER} {INSTANCE_VERSION}\n");
    write_data(&mut out, instance);
    let _ = writeln!(out, "objective {}", instance.objective());
    for p in instance.extra_precedences() {
        let _ = writeln!(out, "precedence {}", precedence_tokens(p));
    }
    out
}

pub fn parse_instance(text: &str) -> Result<JobShopInstance, FormatError> {
    let mut it = lines(text);
    match it.next() {
        Some(Line { tokens, number }) if tokens.len() == 2 && tokens[0] == INSTANCE_HEADER => {
            let version: u32 = parse_num(number, tokens[1], "version")?;
            if version != INSTANCE_VERSION {
                return syntax(number, format!("unsupported instance version {version}"));
            }
        }
        Some(line) => return syntax(line.number, format!("expected `{INSTANCE_HEADER} {INSTANCE_VERSION}` header")),
        None => return Err(FormatError::Incomplete("empty instance file".into())),
    }
    let mut data = DataBuilder::default();
    let mut objective = None;
    let mut precedences = Vec::new();
    for line in it {
        if data.accept(&line)? {
            continue;
        }
        let n = line.number;
        match line.tokens[0] {
            "objective" => {
                let [_, word] = line.tokens[..] else {
                    return syntax(n, "`objective` takes one keyword");
                };
                let o = Objective::from_keyword(word)
                    .ok_or(())
                    .or_else(|_| syntax(n, format!("unknown objective `{word}`")))?;
                if objective.replace(o).is_some() {
                    return syntax(n, "`objective` given twice");
                }
            }
            "precedence" => precedences.push(parse_precedence(n, &line.tokens[1..])?),
            other => return syntax(n, format!("unknown statement `{other}`")),
        }
    }
    let objective = objective.ok_or_else(|| FormatError::Incomplete("missing `objective`".into()))?;
    data.finish(&canonical_factors(), objective, precedences)
}

fn objective_comment(objective: Objective) -> &'static str {
    match objective {
        Objective::Makespan => "max_j completion[j]",
        Objective::MaxTardiness => "max_j tardiness[j]",
        Objective::TotalWeightedTardiness => "sum_j weight[j] * tardiness[j]",
        Objective::TotalFlowTime => "sum_j (completion[j] - release[j])",
        Objective::TotalWeightedFlowTime => "sum_j weight[j] * (completion[j] - release[j])",
    }
}

fn uses_tardiness(objective: Objective) -> bool {
    objective.needs_due_dates()
}

/// The reference nine-module formulation of `instance`, sealed with a
/// digest over its description and assembled text.
pub fn reference_bundle(instance: &JobShopInstance, description: &str) -> FormulationBundle {
    let objective = instance.objective();
    let tardy = uses_tardiness(objective);
    let mut modules = BTreeMap::new();

    modules.insert(InstructionTag::Imports, format!("# imports\nimport {CP_MODULE} {CP_VERSION}"));

    let mut data = String::from("# data\n");
    write_data(&mut data, instance);
    modules.insert(InstructionTag::Data, data.trim_end().to_string());

    let mut util = String::from("# utility functions\n");
    let mut used: Vec<DurationUnit> = Vec::new();
    for &u in instance.units() {
        if !used.contains(&u) {
            used.push(u);
        }
    }
    used.sort_by_key(|u| u.factor());
    for u in used {
        let _ = writeln!(util, "unit {} {}", u.keyword(), u.factor());
    }
    util.push_str("horizon = sum(durations) + max(releases)");
    modules.insert(InstructionTag::UtilityFunctions, util);

    modules.insert(InstructionTag::DefineModel, "# model\nmodel jobshop".to_string());

    let mut vars = String::from("# variables\nvar start[job,op] in 0..horizon\nvar end[job,op] in 0..horizon\nvar completion[job] in 0..horizon");
    if tardy {
        vars.push_str("\nvar tardiness[job] in 0..horizon");
    }
    modules.insert(InstructionTag::DefineVariables, vars);

    let mut cons = String::from("# constraints\n");
    if instance.releases().is_some() {
        cons.push_str("constraint release  # start[j,0] >= release[j]\n");
    }
    cons.push_str("constraint end_time  # end[j,i] == start[j,i] + duration[j,i]\n");
    cons.push_str("constraint completion  # completion[j] == end[j,last]\n");
    if tardy {
        cons.push_str("constraint tardiness  # tardiness[j] == max(completion[j] - due_date[j], 0)\n");
    }
    cons.push_str("constraint no_overlap  # same machine => end[a] <= start[b] or end[b] <= start[a]\n");
    cons.push_str("constraint job_precedence  # start[j,i+1] >= end[j,i]\n");
    for p in instance.extra_precedences() {
        let _ = writeln!(cons, "constraint precedence {}", precedence_tokens(p));
    }
    modules.insert(InstructionTag::DefineConstraints, cons.trim_end().to_string());

    modules.insert(
        InstructionTag::DefineObjective,
        format!("# objective\nminimize {objective}  # {}", objective_comment(objective)),
    );
    modules.insert(InstructionTag::Solve, "# solve\nsolve".to_string());
    modules.insert(
        InstructionTag::PresentSolution,
        "# present solution\nprint objective\nprint schedule\nplot gantt".to_string(),
    );

    let mut bundle =
        FormulationBundle { description: description.to_string(), modules, assembled: None, checksum: None };
    seal(&mut bundle).expect("reference bundle is complete");
    bundle
}

/// The objective module the reference formulation uses for `objective`.
pub fn objective_fragment(objective: Objective) -> String {
    format!("# objective\nminimize {objective}  # {}", objective_comment(objective))
}

pub fn checksum(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Digest over a bundle's description and assembled text.
pub fn bundle_digest(description: &str, assembled: &str) -> String {
    checksum(&format!("{description}\0{assembled}"))
}

/// Assembles the bundle and records its digest.
pub fn seal(bundle: &mut FormulationBundle) -> Result<(), ModelError> {
    let text = bundle.assemble()?.to_string();
    bundle.checksum = Some(bundle_digest(&bundle.description, &text));
    Ok(())
}

/// Checks a sealed bundle against its digest and its stored assembly.
/// Unsealed bundles pass.
pub fn verify_seal(bundle: &FormulationBundle) -> Result<(), String> {
    let Some(expected) = &bundle.checksum else {
        return Ok(());
    };
    let text = bundle.assembled_text().map_err(|e| e.to_string())?;
    if bundle.assembled.as_ref().is_some_and(|a| *a != text) {
        return Err("stored assembly does not match the modules".into());
    }
    if bundle_digest(&bundle.description, &text) != *expected {
        return Err("checksum mismatch".into());
    }
    Ok(())
}

// Section of each statement keyword, in canonical order.
fn section_of(keyword: &str) -> Option<InstructionTag> {
    use InstructionTag::*;
    Some(match keyword {
        "import" => Imports,
        "jobs" | "machines" | "job" | "releases" | "due_dates" | "weights" => Data,
        "unit" | "horizon" => UtilityFunctions,
        "model" => DefineModel,
        "var" => DefineVariables,
        "constraint" => DefineConstraints,
        "minimize" => DefineObjective,
        "solve" => Solve,
        "print" | "plot" => PresentSolution,
        _ => return None,
    })
}

const VARIABLES: [&str; 4] = ["start", "end", "completion", "tardiness"];

/// Parses an assembled formulation.
///
/// Statements must appear in canonical module order. The formulation must
/// import the constraint module, declare the model, the `start`, `end` and
/// `completion` variables, post the `end_time` and `completion` definitions,
/// state one objective, solve, and print the objective. The `release`,
/// `no_overlap` and `job_precedence` constraints may be omitted; the result
/// then describes a relaxed model.
pub fn parse_formulation(text: &str) -> Result<Formulation, FormatError> {
    let mut data = DataBuilder::default();
    let mut factors: BTreeMap<String, Time> = BTreeMap::new();
    let mut imported = false;
    let mut horizon = false;
    let mut model = false;
    let mut vars: BTreeMap<&str, usize> = BTreeMap::new();
    let mut constraints: BTreeMap<&str, usize> = BTreeMap::new();
    let mut precedences = Vec::new();
    let mut objective: Option<Objective> = None;
    let mut solved = false;
    let mut printed = false;
    let mut section = InstructionTag::Imports;

    for line in lines(text) {
        let n = line.number;
        let t = &line.tokens;
        let Some(this) = section_of(t[0]) else {
            return syntax(n, format!("unknown statement `{}`", t[0]));
        };
        if this < section {
            return syntax(n, format!("`{}` belongs to {} but follows {}", t[0], this.suffix(), section.suffix()));
        }
        section = this;
        match t[0] {
            "import" => {
                if t.len() != 3 || t[1] != CP_MODULE {
                    return syntax(n, format!("expected `import {CP_MODULE} {CP_VERSION}`"));
                }
                let v: u32 = parse_num(n, t[2], "version")?;
                if v != CP_VERSION {
                    return syntax(n, format!("unsupported {CP_MODULE} version {v}"));
                }
                imported = true;
            }
            "unit" => {
                let [_, name, factor] = t[..] else {
                    return syntax(n, "expected `unit NAME FACTOR`");
                };
                let factor: Time = parse_num(n, factor, "conversion factor")?;
                if factor < 1 {
                    return syntax(n, "conversion factor must be positive");
                }
                if factors.insert(name.to_string(), factor).is_some() {
                    return syntax(n, format!("unit `{name}` declared twice"));
                }
            }
            "horizon" => {
                if t[1..] != ["=", "sum(durations)", "+", "max(releases)"] {
                    return syntax(n, "expected `horizon = sum(durations) + max(releases)`");
                }
                horizon = true;
            }
            "model" => {
                if t[..] != ["model", "jobshop"] || std::mem::replace(&mut model, true) {
                    return syntax(n, "expected a single `model jobshop`");
                }
            }
            "var" => {
                // var NAME[index] in 0..horizon
                if t.len() != 4 || t[2] != "in" || t[3] != "0..horizon" {
                    return syntax(n, "expected `var NAME[...] in 0..horizon`");
                }
                if !horizon {
                    return syntax(n, "`horizon` is not defined");
                }
                let name = t[1].split('[').next().unwrap_or("");
                let Some(&name) = VARIABLES.iter().find(|v| **v == name) else {
                    return syntax(n, format!("unknown variable `{}`", t[1]));
                };
                let expected_index = if matches!(name, "start" | "end") { "[job,op]" } else { "[job]" };
                if &t[1][name.len()..] != expected_index {
                    return syntax(n, format!("`{name}` must be indexed {expected_index}"));
                }
                if vars.insert(name, n).is_some() {
                    return syntax(n, format!("variable `{name}` declared twice"));
                }
            }
            "constraint" => {
                if t.len() < 2 {
                    return syntax(n, "empty constraint");
                }
                let needs: &[&str] = match t[1] {
                    "release" => &["start"],
                    "end_time" => &["start", "end"],
                    "completion" => &["end", "completion"],
                    "tardiness" => &["completion", "tardiness"],
                    "no_overlap" | "job_precedence" => &["start", "end"],
                    "precedence" => {
                        precedences.push(parse_precedence(n, &t[2..])?);
                        continue;
                    }
                    other => return syntax(n, format!("unknown constraint `{other}`")),
                };
                if t.len() != 2 {
                    return syntax(n, format!("constraint `{}` takes no arguments", t[1]));
                }
                if let Some(missing) = needs.iter().find(|v| !vars.contains_key(*v)) {
                    return syntax(n, format!("constraint `{}` uses undeclared variable `{missing}`", t[1]));
                }
                if constraints.insert(t[1], n).is_some() {
                    return syntax(n, format!("constraint `{}` posted twice", t[1]));
                }
            }
            "minimize" => {
                if t.len() != 2 {
                    return syntax(n, "`minimize` takes one objective");
                }
                let o = Objective::from_keyword(t[1])
                    .ok_or(())
                    .or_else(|_| syntax(n, format!("unknown objective `{}`", t[1])))?;
                if objective.replace(o).is_some() {
                    return syntax(n, "more than one objective");
                }
            }
            "solve" => {
                if t.len() != 1 || std::mem::replace(&mut solved, true) {
                    return syntax(n, "expected a single `solve`");
                }
            }
            "print" | "plot" => match t[..] {
                ["print", "objective"] => printed = true,
                ["print", "schedule"] | ["plot", "gantt"] => {}
                _ => return syntax(n, format!("unknown output `{}`", t[1..].join(" "))),
            },
            _ => {
                data.accept(&line)?;
            }
        }
    }

    let incomplete = |msg: &str| Err(FormatError::Incomplete(msg.to_string()));
    if !imported {
        return incomplete("missing import");
    }
    if !horizon {
        return incomplete("missing horizon definition");
    }
    if !model {
        return incomplete("missing model definition");
    }
    for v in ["start", "end", "completion"] {
        if !vars.contains_key(v) {
            return Err(FormatError::Incomplete(format!("variable `{v}` is not declared")));
        }
    }
    for c in ["end_time", "completion"] {
        if !constraints.contains_key(c) {
            return Err(FormatError::Incomplete(format!("constraint `{c}` is not posted")));
        }
    }
    let Some(objective) = objective else {
        return incomplete("missing objective");
    };
    if !solved {
        return incomplete("missing solve");
    }
    if !printed {
        return incomplete("the objective is never printed");
    }
    let has_tardiness = vars.contains_key("tardiness");
    if uses_tardiness(objective) && !has_tardiness {
        return incomplete("objective needs the `tardiness` variable");
    }
    if has_tardiness != constraints.contains_key("tardiness") {
        return incomplete("`tardiness` variable and constraint must appear together");
    }
    let has_release_data = data.releases.is_some();
    if constraints.contains_key("release") && !has_release_data {
        return incomplete("constraint `release` needs release data");
    }
    if has_tardiness && data.due_dates.is_none() {
        return incomplete("`tardiness` needs due date data");
    }

    let instance = data.finish(&factors, objective, precedences)?;
    instance.check_prerequisites()?;
    let set = ConstraintSet {
        release: constraints.contains_key("release") || !has_release_data,
        no_overlap: constraints.contains_key("no_overlap"),
        job_precedence: constraints.contains_key("job_precedence"),
    };
    Ok(Formulation { instance, constraints: set })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> JobShopInstance {
        JobShopInstance::new(InstanceData {
            num_jobs: 3,
            num_machines: 3,
            routes: vec![vec![2, 0, 1], vec![0, 1, 2], vec![1, 2, 0]],
            durations: vec![vec![5, 3, 7], vec![120, 60, 180], vec![1, 1, 1]],
            releases: Some(vec![0, 12, 40]),
            due_dates: Some(vec![20, 470, 50]),
            weights: Some(vec![1, 2, 4]),
            objective: Objective::TotalWeightedTardiness,
            extra_precedences: vec![
                ExtraPrecedence::EndBeforeStart { before: OpRef::new(1, 1), after: OpRef::new(0, 1) },
                ExtraPrecedence::EndBeforeAllCompletions { op: OpRef::new(2, 0) },
            ],
            units: vec![DurationUnit::Seconds, DurationUnit::Minutes, DurationUnit::Seconds],
        })
        .unwrap()
    }

    #[test]
    fn instance_file_round_trip() {
        let inst = sample();
        let text = write_instance(&inst);
        assert!(text.contains("job 1 unit minutes route 0 1 2 durations 2 1 3"), "{text}");
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    #[test]
    fn instance_file_errors_carry_line_numbers() {
        let err = parse_instance("shopform-instance 1\njobs 1\nmachines x\n").unwrap_err();
        assert!(matches!(err, FormatError::Syntax { line: 3, .. }), "{err:?}");
        assert!(parse_instance("").is_err());
        assert!(parse_instance("shopform-instance 2\n").is_err());
        let missing = "shopform-instance 1\njobs 1\nmachines 1\njob 0 unit seconds route 0 durations 5\n";
        assert!(matches!(parse_instance(missing), Err(FormatError::Incomplete(_))));
        let ok = format!("{missing}objective makespan\n");
        assert_eq!(parse_instance(&ok).unwrap().durations(0), &[5]);
    }

    #[test]
    fn reference_formulation_parses_back() {
        let inst = sample();
        let bundle = reference_bundle(&inst, "desc");
        let text = bundle.assembled.as_deref().unwrap();
        let f = parse_formulation(text).unwrap();
        assert_eq!(f.instance, inst);
        assert_eq!(f.constraints, ConstraintSet::FULL);
        assert_eq!(bundle.checksum.as_deref(), Some(bundle_digest("desc", text).as_str()));
        assert!(verify_seal(&bundle).is_ok());
        let mut tampered = bundle.clone();
        tampered.description.push('!');
        assert!(verify_seal(&tampered).is_err());
        assert!(bundle.modules[&InstructionTag::DefineConstraints]
            .contains("constraint precedence end_before_start 1.1 0.1"));
    }

    #[test]
    fn dropping_no_overlap_relaxes() {
        let inst = sample();
        let text = reference_bundle(&inst, "").assembled.unwrap();
        let relaxed: String =
            text.lines().filter(|l| !l.starts_with("constraint no_overlap")).collect::<Vec<_>>().join("\n");
        let f = parse_formulation(&relaxed).unwrap();
        assert!(!f.constraints.no_overlap && f.constraints.job_precedence);
    }

    #[test]
    fn missing_conversion_is_an_error() {
        let text = reference_bundle(&sample(), "").assembled.unwrap().replace("unit minutes 60\n", "");
        assert!(matches!(parse_formulation(&text), Err(FormatError::Incomplete(m)) if m.contains("minutes")));
    }

    #[test]
    fn statements_must_follow_module_order() {
        let bundle = reference_bundle(&sample(), "");
        let mut swapped = bundle.clone();
        let solve = swapped.modules[&InstructionTag::Solve].clone();
        let objective = swapped.modules[&InstructionTag::DefineObjective].clone();
        swapped.modules.insert(InstructionTag::Solve, objective);
        swapped.modules.insert(InstructionTag::DefineObjective, solve);
        let err = parse_formulation(&swapped.assembled_text().unwrap()).unwrap_err();
        assert!(matches!(err, FormatError::Syntax { .. }), "{err:?}");
    }

    #[test]
    fn each_required_module_is_required() {
        let bundle = reference_bundle(&sample(), "");
        for tag in InstructionTag::ALL {
            let mut b = bundle.clone();
            b.modules.insert(tag, String::new());
            assert!(parse_formulation(&b.assembled_text().unwrap()).is_err(), "{tag} emptied but still parses");
        }
    }

    #[test]
    fn objective_prerequisites_checked() {
        let inst = sample();
        let mut data = inst.to_data();
        data.weights = None;
        data.objective = Objective::Makespan;
        let plain = JobShopInstance::new(data).unwrap();
        let mut b = reference_bundle(&plain, "");
        b.modules.insert(InstructionTag::DefineObjective, objective_fragment(Objective::TotalWeightedFlowTime));
        let err = parse_formulation(&b.assembled_text().unwrap()).unwrap_err();
        assert!(matches!(err, FormatError::Model(ModelError::MissingPrerequisite { field: "weights", .. })), "{err:?}");
    }

    #[test]
    fn garbage_never_parses() {
        for text in ["", "\u{0}", "minimize makespan", "import shopform.cp 1\nsolve"] {
            assert!(parse_formulation(text).is_err());
        }
    }
}
