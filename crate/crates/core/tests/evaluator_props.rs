use num_rational::Ratio;
use proptest::prelude::*;
use shopform::evaluator::{
    aggregate, cross_entropy, evaluate_candidate, Candidate, Outcome, OutcomeClass, TokenBatch, DEFAULT_IGNORE_INDEX,
};
use shopform::generator::{build_dataset, default_mix};
use shopform::rng::seeded_rng;
use shopform::solver::SolveConfig;

/// Direct transcription of the per-position loss, no stabilisation.
fn naive_cross_entropy(logits: &[Vec<f64>], targets: &[i64]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for (row, &y) in logits.iter().zip(targets) {
        if y == DEFAULT_IGNORE_INDEX {
            continue;
        }
        let denom: f64 = row.iter().map(|x| x.exp()).sum();
        sum += -(row[y as usize].exp() / denom).ln();
        n += 1;
    }
    sum / n as f64
}

fn random_batch(seed: u64, rows: usize, classes: usize) -> TokenBatch {
    let mut rng = seeded_rng(seed);
    let logits: Vec<Vec<f64>> = (0..rows).map(|_| (0..classes).map(|_| rng.unit() * 20.0 - 10.0).collect()).collect();
    let mut targets: Vec<i64> = (0..rows).map(|_| rng.below(classes as u32) as i64).collect();
    if rows > 1 && rng.below(2) == 0 {
        targets[rng.below(rows as u32) as usize] = DEFAULT_IGNORE_INDEX;
    }
    TokenBatch::new(logits, targets)
}

#[test]
fn matches_naive_formula_on_random_batches() {
    for seed in 0..100 {
        let b = random_batch(seed, 4, 7);
        let got = cross_entropy(&b).unwrap();
        let want = naive_cross_entropy(&b.logits, &b.targets);
        assert!((got - want).abs() < 1e-9, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn reference_bundles_evaluate_as_success() {
    let config = SolveConfig::default();
    for seed in [2, 3] {
        let items = build_dataset(14, seed, &default_mix(), &config).unwrap();
        for item in &items {
            let o = evaluate_candidate(&Candidate::Bundle(item.bundle.clone()), item, &config);
            assert_eq!(o.class, OutcomeClass::Success, "{}: {}", item.id, o.detail);
        }
    }
}

fn outcome(class: OutcomeClass) -> Outcome {
    Outcome { class, detail: String::new(), candidate_value: None, expected_value: None, failing_tags: vec![] }
}

proptest! {
    #[test]
    fn rates_sum_to_one(classes in proptest::collection::vec(0u8..3, 1..200)) {
        let outcomes: Vec<Outcome> = classes
            .iter()
            .map(|c| outcome([OutcomeClass::Success, OutcomeClass::Failure, OutcomeClass::Exception][*c as usize]))
            .collect();
        let r = aggregate(&outcomes).unwrap();
        prop_assert_eq!(r.success_rate() + r.failure_rate() + r.exception_rate(), Ratio::from_integer(1));
        prop_assert_eq!(r.success + r.failure + r.exception, outcomes.len() as u64);
    }

    #[test]
    fn shift_invariant_and_nonnegative(seed in any::<u64>(), rows in 1usize..8, classes in 1usize..9, shift in -500.0f64..500.0) {
        let b = random_batch(seed, rows, classes);
        let Ok(base) = cross_entropy(&b) else { return Ok(()) };
        prop_assert!(base >= 0.0);
        let mut shifted = b.clone();
        for row in &mut shifted.logits {
            row.iter_mut().for_each(|x| *x += shift);
        }
        prop_assert!((cross_entropy(&shifted).unwrap() - base).abs() < 1e-9);
    }

    #[test]
    fn dominant_target_drives_loss_to_zero(gap in 50.0f64..2000.0) {
        let b = TokenBatch::new(vec![vec![gap, 0.0, -1.0]], vec![0]);
        let v = cross_entropy(&b).unwrap();
        prop_assert!((0.0..1e-20).contains(&v));
    }

    #[test]
    fn random_bytes_are_exceptions(bytes in proptest::collection::vec(any::<u8>(), 0..400), brace in any::<bool>()) {
        let config = SolveConfig::default();
        let item = &build_dataset(1, 4, &default_mix(), &config).unwrap()[0];
        let mut bytes = bytes;
        if brace {
            bytes.insert(0, b'{');
        }
        let o = evaluate_candidate(&Candidate::Bytes(bytes.clone()), item, &config);
        prop_assert_eq!(o.class, OutcomeClass::Exception);
        if let Ok(text) = String::from_utf8(bytes) {
            let o = evaluate_candidate(&Candidate::Text(text), item, &config);
            prop_assert_eq!(o.class, OutcomeClass::Exception);
        }
    }
}
