//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use shopform::adapter::{generate_bundles_via, AdapterConfig, AdapterMode, FragmentSource};
use shopform::evaluator::{
    aggregate, corrupt_bytes, cross_entropy, drop_fragment, evaluate_candidate, swap_objective, Candidate, Outcome,
    OutcomeClass, TokenBatch, DEFAULT_IGNORE_INDEX,
};
use shopform::generator::{
    build_dataset, default_mix, generate_instance, modularize, sample_weight, DatasetItem, ScenarioSpec, ScenarioType,
};
use shopform::model::{validate_schedule, InstructionTag, Objective};
use shopform::rng::{seeded_rng, RandomStream};
use shopform::solver::{brute_force, solve, SolveConfig};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_equivalence() -> Check {
    let started = Instant::now();
    let config = SolveConfig::default();
    let kinds = [
        (Objective::Makespan, ScenarioType::ReleaseTimes),
        (Objective::MaxTardiness, ScenarioType::MinMaxTardiness),
        (Objective::TotalWeightedTardiness, ScenarioType::MinWeightedTardiness),
        (Objective::TotalFlowTime, ScenarioType::MinTotalFlowTime),
        (Objective::TotalWeightedFlowTime, ScenarioType::MinTotalWeightedFlowTime),
    ];
    let mut compared = 0;
    for (objective, kind) in kinds {
        for seed in 0..30 {
            let inst =
                generate_instance(&ScenarioSpec::new(kind, 3, 3), &mut seeded_rng(seed)).map_err(|e| e.to_string())?;
            ensure(inst.objective() == objective, || format!("{kind:?} has objective {:?}", inst.objective()))?;
            let got = solve(&inst, &config).map_err(|e| e.to_string())?.objective();
            let want = brute_force(&inst).map_err(|e| e.to_string())?.objective();
            ensure(got.is_some() && got == want, || {
                format!("{objective:?} seed {seed}: solve {got:?}, oracle {want:?}")
            })?;
            compared += 1;
        }
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{compared} instances, 5 objectives, all equal ({:.2}s)", elapsed.as_secs_f64()))
}

fn schedule_validity(items: &[DatasetItem], elapsed: Duration) -> Check {
    let mut statuses = BTreeMap::new();
    for item in items {
        *statuses.entry(format!("{:?}", item.solve_status)).or_insert(0) += 1;
        let schedule = item.schedule.as_ref().ok_or_else(|| format!("{} has no schedule", item.id))?;
        let violations = validate_schedule(&item.instance, schedule).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || format!("{}: {:?}", item.id, violations))?;
    }
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!("{} schedules, zero violations, statuses {statuses:?} ({:.2}s)", items.len(), elapsed.as_secs_f64()))
}

fn rates(outcomes: &[Outcome]) -> Result<[Ratio<u64>; 3], String> {
    let r = aggregate(outcomes).map_err(|e| e.to_string())?;
    Ok([r.success_rate(), r.failure_rate(), r.exception_rate()])
}

fn self_consistency(items: &[DatasetItem], config: &SolveConfig) -> Check {
    let outcomes: Vec<Outcome> =
        items.iter().map(|i| evaluate_candidate(&Candidate::Bundle(i.bundle.clone()), i, config)).collect();
    let r = rates(&outcomes)?;
    let want = [Ratio::from_integer(1), Ratio::from_integer(0), Ratio::from_integer(0)];
    ensure(r == want, || format!("rates {r:?}"))?;
    Ok(format!("{} items: success 1.00, failure 0.00, exception 0.00", items.len()))
}

fn fault_injection(items: &[DatasetItem], config: &SolveConfig) -> Check {
    let all = |outcomes: &[Outcome], class: OutcomeClass, what: &str| {
        let bad: Vec<&Outcome> = outcomes.iter().filter(|o| o.class != class).collect();
        ensure(bad.is_empty() && !outcomes.is_empty(), || {
            format!("{what}: {} of {} not {class:?}, first: {:?}", bad.len(), outcomes.len(), bad.first())
        })
    };
    let swapped: Vec<Outcome> = items
        .iter()
        .filter_map(|i| swap_objective(i, config).map(|b| evaluate_candidate(&Candidate::Bundle(b), i, config)))
        .collect();
    all(&swapped, OutcomeClass::Failure, "objective swap")?;
    let dropped: Vec<Outcome> = items
        .iter()
        .map(|i| evaluate_candidate(&Candidate::Bundle(drop_fragment(&i.bundle, InstructionTag::Solve)), i, config))
        .collect();
    all(&dropped, OutcomeClass::Exception, "deleted solve")?;
    let corrupted: Vec<Outcome> = items
        .iter()
        .map(|i| {
            let bytes = corrupt_bytes(&i.bundle, &mut RandomStream::with_stream(1, i.index as u64));
            evaluate_candidate(&Candidate::Bytes(bytes), i, config)
        })
        .collect();
    all(&corrupted, OutcomeClass::Exception, "byte corruption")?;
    Ok(format!(
        "objective swap {}/{} failure ({} makespan-only items admit no swap), deleted solve {}/{} exception, corruption {}/{} exception",
        swapped.len(),
        swapped.len(),
        items.len() - swapped.len(),
        dropped.len(),
        dropped.len(),
        corrupted.len(),
        corrupted.len()
    ))
}

/// Files under `root` keyed by relative path; the manifest timestamp is dropped.
fn tree(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let mut bytes = fs::read(&path).map_err(|e| e.to_string())?;
            if rel == "manifest.json" {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
                v.as_object_mut().ok_or("manifest is not an object")?.remove("created_unix");
                bytes = serde_json::to_vec(&v).unwrap();
            }
            files.insert(rel, bytes);
        }
    }
    Ok(files)
}

fn dataset_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let out = Command::new(env!("CARGO_BIN_EXE_shopform"))
            .args(["dataset", "--count", "100", "--seed", "1", "--out"])
            .arg(&dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into_owned())?;
        trees.push(tree(&dir)?);
    }
    ensure(trees[0] == trees[1], || "trees differ".into())?;
    let t = &trees[0];
    let items = String::from_utf8_lossy(&t["items.jsonl"]).lines().count();
    let pairs = String::from_utf8_lossy(&t["modularized.jsonl"]).lines().count();
    ensure(items == 100 && pairs == 900, || format!("{items} items, {pairs} pairs"))?;
    Ok(format!("{} files byte-identical across runs, {items} items, {pairs} modularized pairs", t.len()))
}

fn weight_distribution() -> Check {
    let dist = ScenarioSpec::new(ScenarioType::MinWeightedTardiness, 1, 1).weight_distribution;
    let mut rng = seeded_rng(1);
    let mut counts = BTreeMap::from([(1, 0u32), (2, 0), (4, 0)]);
    for _ in 0..10_000 {
        *counts.get_mut(&sample_weight(&dist, rng.unit())).ok_or("unexpected weight")? += 1;
    }
    let pct: Vec<f64> = counts.values().map(|c| *c as f64 / 100.0).collect();
    for (got, want) in pct.iter().zip([20.0, 60.0, 20.0]) {
        ensure((got - want).abs() <= 2.0, || format!("frequencies {pct:?}"))?;
    }
    Ok(format!("10000 draws: weight 1 {:.2}%, weight 2 {:.2}%, weight 4 {:.2}%", pct[0], pct[1], pct[2]))
}

fn naive_cross_entropy(b: &TokenBatch) -> f64 {
    let mut sum = 0.0;
    let mut n = 0.0;
    for (row, &y) in b.logits.iter().zip(&b.targets) {
        if y == b.ignore_index {
            continue;
        }
        let denom: f64 = row.iter().map(|x| x.exp()).sum();
        sum -= (row[y as usize].exp() / denom).ln();
        n += 1.0;
    }
    sum / n
}

fn cross_entropy_checks() -> Check {
    let ce = |b: &TokenBatch| cross_entropy(b).map_err(|e| e.to_string());
    let uniform = ce(&TokenBatch::new(vec![vec![0.0, 0.0]], vec![0]))?;
    ensure((uniform - std::f64::consts::LN_2).abs() < 1e-9, || format!("uniform gave {uniform}"))?;
    let big = ce(&TokenBatch::new(vec![vec![1000.0, 0.0]], vec![0]))?;
    ensure(big.is_finite() && big.abs() < 1e-12, || format!("magnitude 1000 gave {big}"))?;
    let big_loser = ce(&TokenBatch::new(vec![vec![1000.0, 0.0]], vec![1]))?;
    ensure((big_loser - 1000.0).abs() < 1e-9, || format!("losing target gave {big_loser}"))?;
    let mut rng = seeded_rng(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rows = 1 + rng.below(6) as usize;
        let classes = 1 + rng.below(8) as usize;
        let logits: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..classes).map(|_| rng.unit() * 16.0 - 8.0).collect()).collect();
        let mut targets: Vec<i64> = (0..rows).map(|_| rng.below(classes as u32) as i64).collect();
        if rows > 1 {
            targets[0] = DEFAULT_IGNORE_INDEX;
        }
        let b = TokenBatch::new(logits, targets);
        let got = ce(&b)?;
        worst = worst.max((got - naive_cross_entropy(&b)).abs());
        let shift = rng.unit() * 200.0 - 100.0;
        let mut shifted = b.clone();
        shifted.logits.iter_mut().flatten().for_each(|x| *x += shift);
        worst = worst.max((ce(&shifted)? - got).abs());
    }
    ensure(worst < 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("ln 2 exact, no overflow at 1000, 100 random batches within {worst:.1e} of the naive oracle and shift-invariant"))
}

fn due_date_rule(items: &[DatasetItem]) -> Check {
    let mut instances: Vec<_> = items.iter().map(|i| i.instance.clone()).collect();
    for seed in 0..200 {
        for kind in [ScenarioType::MinMaxTardiness, ScenarioType::MinWeightedTardiness] {
            let mut spec = ScenarioSpec::new(kind, 2 + seed as usize % 5, 2 + seed as usize % 4);
            spec.unit_rules = (seed % 3 == 0).then(|| vec![0]);
            instances.push(generate_instance(&spec, &mut seeded_rng(seed)).map_err(|e| e.to_string())?);
        }
    }
    let mut checked = 0;
    for inst in &instances {
        let Some(due) = inst.due_dates() else { continue };
        for (j, &d) in due.iter().enumerate() {
            let total: i64 = inst.durations(j).iter().sum();
            let want = (13 * total + 5).div_euclid(10);
            ensure(d == want, || format!("job {j}: due {d}, expected {want} for total {total}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} due dates equal round-half-up(1.3 x total processing time)"))
}

struct ReferenceStub(BTreeMap<String, String>);

impl FragmentSource for ReferenceStub {
    fn fetch(&self, prompt: &str) -> Result<String, String> {
        self.0.get(prompt).cloned().ok_or_else(|| "unknown prompt".into())
    }
}

fn adapter_stub_sweep(items: &[DatasetItem], config: &SolveConfig) -> Check {
    let mut answers = BTreeMap::new();
    for item in items {
        for pair in modularize(item).map_err(|e| e.to_string())? {
            answers.insert(pair.prompt, pair.completion);
        }
    }
    let stub = ReferenceStub(answers);
    let descriptions: Vec<String> = items.iter().map(|i| i.bundle.description.clone()).collect();
    let distinct: BTreeSet<&String> = descriptions.iter().collect();
    let generated = generate_bundles_via(&stub, &AdapterConfig::new(AdapterMode::Subprocess, "stub"), &descriptions);
    let outcomes: Vec<Outcome> =
        items.iter().zip(generated).map(|(i, g)| evaluate_candidate(&Candidate::Bundle(g.bundle), i, config)).collect();
    let r = rates(&outcomes)?;
    ensure(r[0] == Ratio::from_integer(1), || format!("rates {r:?}"))?;
    Ok(format!(
        "{} items ({} distinct descriptions) through the reference stub: success 1.00",
        items.len(),
        distinct.len()
    ))
}

fn main() {
    let config = SolveConfig { time_limit: Duration::from_secs(5), ..SolveConfig::default() };
    let started = Instant::now();
    let dataset = build_dataset(100, 1, &default_mix(), &config);
    let build_time = started.elapsed();

    let mut results: Vec<(&str, Check)> = vec![("oracle equivalence", oracle_equivalence())];
    match &dataset {
        Ok(items) => {
            results.push(("schedule validity", schedule_validity(items, build_time)));
            results.push(("self-consistency sweep", self_consistency(items, &config)));
            results.push(("fault-injection classification", fault_injection(items, &config)));
        }
        Err(e) => {
            for name in ["schedule validity", "self-consistency sweep", "fault-injection classification"] {
                results.push((name, Err(format!("dataset build failed: {e}"))));
            }
        }
    }
    results.push(("dataset determinism and counts", dataset_determinism()));
    results.push(("weight distribution", weight_distribution()));
    results.push(("cross-entropy correctness", cross_entropy_checks()));
    results.push(("due-date rule", due_date_rule(dataset.as_deref().unwrap_or(&[]))));
    if let Ok(items) = &dataset {
        results.push(("adapter stub sweep", adapter_stub_sweep(items, &config)));
    }

    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
