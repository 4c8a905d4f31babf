use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, Context};
use shopform::adapter::{generate_bundles_via, AdapterConfig, AdapterError};
use shopform::evaluator::{
    aggregate, corrupt_bytes, drop_fragment, evaluate_candidate, swap_objective, tag_losses, timed, Candidate,
    MetricsReport, Outcome, OutcomeClass, OutcomeRecord, ScriptRunner, TokenBatch,
};
use shopform::formulation::{parse_instance, write_instance};
use shopform::gantt::render_svg;
use shopform::generator::{build_dataset, default_mix, modularize, GeneratorError, ScenarioSpec};
use shopform::model::{InstructionTag, Schedule};
use shopform::parallel;
use shopform::rng::RandomStream;
use shopform::solver::{self, SolveConfig, SolveError, SolveStatus};

use crate::store::{self, load_dataset, to_jsonl, Dataset, MissingManifest, OutputDir, RunManifest};
use crate::{
    CmdResult, Code, DatasetArgs, EvaluateArgs, Failure, LimitArgs, MutateArgs, MutationKind, ReportArgs, SolveArgs,
    WithCode,
};

fn fail(code: Code, message: impl Into<String>) -> Failure {
    Failure { code, error: anyhow!(message.into()) }
}

fn seconds(value: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(value)
        .ok()
        .filter(|d| !d.is_zero())
        .ok_or_else(|| fail(Code::Usage, format!("time limit {value} must be a positive number of seconds")))
}

fn solve_config(limits: &LimitArgs) -> Result<SolveConfig, Failure> {
    Ok(SolveConfig { time_limit: seconds(limits.time_limit)?, node_limit: limits.node_limit, ..SolveConfig::default() })
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).with_context(|| format!("reading {}", path.display())).code(Code::Io)
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display())).code(Code::Parse)
}

fn open_dataset(dir: &Path) -> Result<Dataset, Failure> {
    load_dataset(dir).map_err(|e| {
        let code = if e.downcast_ref::<MissingManifest>().is_some() { Code::MissingManifest } else { Code::Parse };
        Failure { code, error: e }
    })
}

pub fn dataset(args: DatasetArgs) -> CmdResult {
    let config = solve_config(&args.limits)?;
    let mix: Vec<ScenarioSpec> = match &args.mix {
        Some(path) => read_json(path)?,
        None => default_mix(),
    };
    let items = build_dataset(args.count as usize, args.seed, &mix, &config).map_err(|e| match e {
        GeneratorError::Solve(_) => Failure { code: Code::Internal, error: e.into() },
        _ => Failure { code: Code::Usage, error: e.into() },
    })?;

    let mut out = OutputDir::new(&args.out).code(Code::Io)?;
    let mut pairs = Vec::with_capacity(items.len() * InstructionTag::ALL.len());
    for item in &items {
        out.put(&format!("instances/{}.jss", item.id), write_instance(&item.instance).as_bytes()).code(Code::Io)?;
        let mut bundle = serde_json::to_vec_pretty(&item.bundle).code(Code::Internal)?;
        bundle.push(b'\n');
        out.put(&format!("bundles/{}.json", item.id), &bundle).code(Code::Io)?;
        pairs.extend(modularize(item).code(Code::Internal)?);
    }
    out.put(store::ITEMS, &to_jsonl(&items)).code(Code::Io)?;
    out.put(store::MODULARIZED, &to_jsonl(&pairs)).code(Code::Io)?;

    let flagged = items.iter().filter(|i| i.is_flagged()).count();
    let mut manifest = RunManifest::new("dataset", config);
    manifest.seed = Some(args.seed);
    manifest
        .config_hashes
        .insert("scenario_mix".into(), store::sha256_hex(&serde_json::to_vec(&mix).code(Code::Internal)?));
    manifest.scenario_mix = mix;
    manifest.counts = BTreeMap::from([
        ("items".into(), items.len() as u64),
        ("modularized_pairs".into(), pairs.len() as u64),
        ("flagged".into(), flagged as u64),
    ]);
    manifest.files = out.files;
    manifest.write(&args.out).code(Code::Io)?;
    println!(
        "wrote {} items and {} modularized pairs to {} ({flagged} flagged)",
        items.len(),
        pairs.len(),
        args.out.display()
    );
    Ok(())
}

/// Stdout layout of `solve`. Only the `OBJECTIVE=` line is a stable contract.
pub fn render_solution(
    status: SolveStatus,
    schedule: &Schedule,
    instance: &shopform::model::JobShopInstance,
) -> String {
    let mut out = String::from("# shopform solution v1\n");
    out.push_str(&format!("OBJECTIVE={}\n", schedule.objective_value));
    out.push_str(&format!("STATUS={}\n", serde_json::to_value(status).expect("status").as_str().unwrap_or("")));
    out.push_str(&format!("{:>4} {:>4} {:>8} {:>8} {:>8}\n", "job", "op", "machine", "start", "end"));
    for op in instance.ops() {
        out.push_str(&format!(
            "{:>4} {:>4} {:>8} {:>8} {:>8}\n",
            op.job,
            op.op,
            instance.machine(op),
            schedule.start(op),
            schedule.end(op)
        ));
    }
    out
}

pub fn solve(args: SolveArgs) -> CmdResult {
    let config = solve_config(&args.limits)?;
    let bytes = read(&args.instance)?;
    let text = String::from_utf8(bytes).map_err(|_| fail(Code::Parse, "instance file is not UTF-8"))?;
    let instance =
        parse_instance(&text).with_context(|| format!("parsing {}", args.instance.display())).code(Code::Parse)?;
    let result = solver::solve(&instance, &config).map_err(|e| match e {
        SolveError::Prerequisite(_) => Failure { code: Code::Parse, error: e.into() },
        _ => Failure { code: Code::Usage, error: e.into() },
    })?;
    let schedule = match (result.status, result.schedule) {
        (_, Some(s)) => s,
        (SolveStatus::Infeasible, None) => return Err(fail(Code::Infeasible, "instance is infeasible")),
        (_, None) => return Err(fail(Code::NoIncumbent, "no schedule found within the limits")),
    };
    print!("{}", render_solution(result.status, &schedule, &instance));
    if let Some(path) = &args.gantt {
        store::write_atomic(path, render_svg(&instance, &schedule).as_bytes()).code(Code::Io)?;
    }
    Ok(())
}

fn candidate_for(dir: &Path, id: &str, runner: Option<&ScriptRunner>) -> Result<Candidate, Outcome> {
    let missing = |detail: String| Outcome {
        class: OutcomeClass::Exception,
        detail,
        candidate_value: None,
        expected_value: None,
        failing_tags: Vec::new(),
    };
    for ext in ["json", "txt"] {
        let path = dir.join(format!("{id}.{ext}"));
        if path.is_file() {
            return fs::read(&path).map(Candidate::Bytes).map_err(|e| missing(format!("read: {e}")));
        }
    }
    let script = dir.join(format!("{id}.script"));
    if script.is_file() {
        return match runner {
            Some(r) => Ok(Candidate::Script { path: script, runner: r.clone() }),
            None => Err(missing("run: script candidate but no --runner given".into())),
        };
    }
    Err(missing("read: no candidate file".into()))
}

pub fn evaluate(args: EvaluateArgs) -> CmdResult {
    let dataset = open_dataset(&args.dataset)?;
    let mut config = dataset.manifest.solve_config;
    if let Some(t) = args.time_limit {
        config.time_limit = seconds(t)?;
    }
    if args.node_limit.is_some() {
        config.node_limit = args.node_limit;
    }
    let runner = match &args.runner {
        Some(cmd) => {
            let command = split_command(cmd).ok_or_else(|| fail(Code::Usage, "runner command does not parse"))?;
            Some(ScriptRunner { command, timeout: seconds(args.runner_timeout)? })
        }
        None => None,
    };
    let mut out = OutputDir::new(&args.out).code(Code::Io)?;
    let items = &dataset.items;

    let mut adapter_down = false;
    let candidates: Vec<Result<Candidate, Outcome>> = if let Some(path) = &args.adapter {
        let adapter: AdapterConfig = read_json(path)?;
        let source = adapter.source().map_err(|e| match e {
            AdapterError::InvalidConfig(_) => Failure { code: Code::Usage, error: e.into() },
            _ => Failure { code: Code::Adapter, error: e.into() },
        })?;
        let descriptions: Vec<String> = items.iter().map(|i| i.bundle.description.clone()).collect();
        let generated = generate_bundles_via(source.as_ref(), &adapter, &descriptions);
        adapter_down = generated.iter().all(|g| g.failures.len() == InstructionTag::ALL.len());
        let mut log = Vec::new();
        for (item, g) in items.iter().zip(&generated) {
            let mut bytes = serde_json::to_vec_pretty(&g.bundle).code(Code::Internal)?;
            bytes.push(b'\n');
            out.put(&format!("candidates/{}.json", item.id), &bytes).code(Code::Io)?;
            log.push(serde_json::json!({ "id": item.id, "failures": g.failures }));
        }
        out.put("generation.jsonl", &to_jsonl(&log)).code(Code::Io)?;
        generated.into_iter().map(|g| Ok(Candidate::Bundle(g.bundle))).collect()
    } else {
        let dir = args.candidates.as_deref().expect("clap requires candidates or adapter");
        if !dir.is_dir() {
            return Err(fail(Code::Io, format!("candidates directory {} does not exist", dir.display())));
        }
        items.iter().map(|i| candidate_for(dir, &i.id, runner.as_ref())).collect()
    };

    let jobs: Vec<_> = items.iter().zip(candidates).collect();
    let records: Vec<OutcomeRecord> = parallel::map(&jobs, |(item, candidate)| {
        let (mut outcome, elapsed) = timed(|| match candidate {
            Ok(c) => evaluate_candidate(c, item, &config),
            Err(o) => o.clone(),
        });
        outcome.expected_value = outcome.expected_value.or(item.expected_objective);
        OutcomeRecord::new(item.id.clone(), outcome, elapsed)
    });
    let outcomes: Vec<Outcome> = records.iter().map(OutcomeRecord::outcome).collect();
    let report = aggregate(&outcomes).code(Code::Usage)?;

    out.put(store::OUTCOMES, &to_jsonl(&records)).code(Code::Io)?;
    write_report(&mut out, &report, &args.label)?;
    let mut manifest = RunManifest::new("evaluate", config);
    manifest.counts = BTreeMap::from([
        ("items".into(), report.total),
        ("success".into(), report.success),
        ("failure".into(), report.failure),
        ("exception".into(), report.exception),
    ]);
    manifest
        .config_hashes
        .insert("dataset_manifest".into(), store::sha256_hex(&read(&args.dataset.join(store::MANIFEST))?));
    manifest.files = out.files.clone();
    manifest.write(&args.out).code(Code::Io)?;
    print!("{}", report.table(&args.label));
    if adapter_down {
        return Err(fail(Code::Adapter, "the generator answered no request"));
    }
    Ok(())
}

fn write_report(out: &mut OutputDir, report: &MetricsReport, label: &str) -> CmdResult {
    out.put("report.txt", report.table(label).as_bytes()).code(Code::Io)?;
    let mut json = serde_json::to_vec_pretty(&report.summary_json()).code(Code::Internal)?;
    json.push(b'\n');
    out.put("report.json", &json).code(Code::Io)
}

fn split_command(cmd: &str) -> Option<Vec<String>> {
    let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
    (!parts.is_empty()).then_some(parts)
}

pub fn report(args: ReportArgs) -> CmdResult {
    let path = if args.input.is_dir() { args.input.join(store::OUTCOMES) } else { args.input.clone() };
    if !path.is_file() {
        return Err(fail(Code::Io, format!("{} does not exist", path.display())));
    }
    let records: Vec<OutcomeRecord> = store::from_jsonl(&path).code(Code::Parse)?;
    let outcomes: Vec<Outcome> = records.iter().map(OutcomeRecord::outcome).collect();
    let mut report = aggregate(&outcomes).code(Code::Parse)?;
    if let Some(losses) = &args.losses {
        let batches: BTreeMap<InstructionTag, TokenBatch> = read_json(losses)?;
        report = report.with_tag_losses(tag_losses(&batches).code(Code::Parse)?);
    }
    if let Some(dir) = &args.out {
        let mut out = OutputDir::new(dir).code(Code::Io)?;
        write_report(&mut out, &report, &args.label)?;
    }
    print!("{}", report.table(&args.label));
    Ok(())
}

pub fn mutate(args: MutateArgs) -> CmdResult {
    let dataset = open_dataset(&args.dataset)?;
    let config = dataset.manifest.solve_config;
    let items = &dataset.items;
    let mutated: Vec<Option<Vec<u8>>> = parallel::map(items, |item| {
        let pretty = |b: &shopform::model::FormulationBundle| {
            let mut v = serde_json::to_vec_pretty(b).expect("bundle serializes");
            v.push(b'\n');
            v
        };
        match args.kind {
            MutationKind::ObjectiveSwap => swap_objective(item, &config).map(|b| pretty(&b)),
            MutationKind::DropSolve => Some(pretty(&drop_fragment(&item.bundle, InstructionTag::Solve))),
            MutationKind::CorruptBytes => {
                let mut rng = RandomStream::with_stream(args.seed, item.index as u64);
                Some(corrupt_bytes(&item.bundle, &mut rng))
            }
        }
    });
    let mut out = OutputDir::new(&args.out).code(Code::Io)?;
    let mut count = 0u64;
    for (item, bytes) in items.iter().zip(&mutated) {
        if let Some(bytes) = bytes {
            out.put(&format!("{}.json", item.id), bytes).code(Code::Io)?;
            count += 1;
        }
    }
    let mut manifest = RunManifest::new("mutate", config);
    manifest.seed = Some(args.seed);
    manifest.counts = BTreeMap::from([("mutated".into(), count), ("skipped".into(), items.len() as u64 - count)]);
    manifest.files = out.files;
    manifest.write(&args.out).code(Code::Io)?;
    println!(
        "wrote {count} mutated candidates to {} ({} items had no applicable mutation)",
        args.out.display(),
        items.len() as u64 - count
    );
    Ok(())
}
