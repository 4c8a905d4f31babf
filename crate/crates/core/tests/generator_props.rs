use proptest::prelude::*;
use shopform::generator::{
    build_dataset, default_mix, generate_instance, modularize, render_description, sample_weight, Allowance,
    ScenarioSpec, ScenarioType,
};
use shopform::model::DurationUnit;
use shopform::rng::seeded_rng;
use shopform::solver::SolveConfig;

#[test]
fn weight_frequencies_match_distribution() {
    let dist = vec![(1, 0.2), (2, 0.6), (4, 0.2)];
    let mut rng = seeded_rng(1);
    let mut counts = [0usize; 3];
    for _ in 0..10_000 {
        match sample_weight(&dist, rng.unit()) {
            1 => counts[0] += 1,
            2 => counts[1] += 1,
            4 => counts[2] += 1,
            w => panic!("unexpected weight {w}"),
        }
    }
    for (count, target) in counts.iter().zip([20.0, 60.0, 20.0]) {
        let pct = *count as f64 / 100.0;
        assert!((pct - target).abs() <= 2.0, "{counts:?}");
    }
}

#[test]
fn due_dates_follow_allowance() {
    for seed in 0..200 {
        for kind in [ScenarioType::MinMaxTardiness, ScenarioType::MinWeightedTardiness] {
            let mut spec = ScenarioSpec::new(kind, 5, 5);
            if seed % 2 == 0 {
                spec.unit_rules = Some(vec![1, 3]);
            }
            let inst = generate_instance(&spec, &mut seeded_rng(seed)).unwrap();
            for (j, &d) in inst.due_dates().unwrap().iter().enumerate() {
                let total: i64 = inst.durations(j).iter().sum();
                // round half up of 1.3 * total, in integers
                assert_eq!(d, (13 * total + 5) / 10, "seed {seed} job {j}");
            }
        }
    }
}

#[test]
fn same_seed_same_dataset() {
    let config = SolveConfig::default();
    let a = build_dataset(14, 9, &default_mix(), &config).unwrap();
    let b = build_dataset(14, 9, &default_mix(), &config).unwrap();
    assert_eq!(a, b);
    let c = build_dataset(14, 10, &default_mix(), &config).unwrap();
    assert_ne!(a, c);
    let pairs: usize = a.iter().map(|i| modularize(i).unwrap().len()).sum();
    assert_eq!(pairs, 9 * a.len());
    for item in &a {
        assert_eq!(render_description(item), item.bundle.description);
        assert!(!item.is_flagged());
    }
}

#[test]
fn build_rejects_bad_input() {
    let config = SolveConfig::default();
    assert!(build_dataset(0, 1, &default_mix(), &config).is_err());
    assert!(build_dataset(1, 1, &[], &config).is_err());
    let mut bad = ScenarioSpec::new(ScenarioType::MinMakespan, 2, 2);
    bad.max_duration = 0;
    assert!(build_dataset(1, 1, &[bad], &config).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_instances_are_well_formed(
        seed in any::<u64>(),
        k in 0usize..7,
        jobs in 1usize..7,
        machines in 1usize..7,
        max_duration in 1i64..40,
        minutes in proptest::collection::vec(any::<bool>(), 6),
    ) {
        let mut spec = ScenarioSpec::new(ScenarioType::ALL[k], jobs, machines);
        spec.max_duration = max_duration;
        spec.unit_rules = Some((0..jobs).filter(|&j| minutes[j]).collect());
        let inst = generate_instance(&spec, &mut seeded_rng(seed)).unwrap();
        for j in 0..jobs {
            let mut route = inst.route(j).to_vec();
            route.sort_unstable();
            prop_assert_eq!(route, (0..machines).collect::<Vec<_>>());
            let factor = if minutes[j] { 60 } else { 1 };
            prop_assert_eq!(inst.units()[j], if minutes[j] { DurationUnit::Minutes } else { DurationUnit::Seconds });
            for &p in inst.durations(j) {
                prop_assert_eq!(p % factor, 0);
                prop_assert!((1..=max_duration).contains(&(p / factor)));
            }
        }
        if let Some(due) = inst.due_dates() {
            for (j, &d) in due.iter().enumerate() {
                prop_assert!(d >= inst.durations(j).iter().sum::<i64>());
            }
        }
        if let Some(r) = inst.releases() {
            prop_assert!(r.iter().all(|r| (0..=50).contains(r)));
        }
        if let Some(w) = inst.weights() {
            prop_assert!(w.iter().all(|w| [1, 2, 4].contains(w)));
        }
    }

    #[test]
    fn allowance_rounds_half_up(total in 0i64..1_000_000, num in 1i64..40, den in 1i64..20) {
        let a = Allowance { num, den };
        let got = a.apply(total);
        // got = floor(num * total / den + 1/2)
        prop_assert!(2 * den * got <= 2 * num * total + den);
        prop_assert!(2 * den * (got + 1) > 2 * num * total + den);
    }
}

#[test]
fn default_descriptions_are_distinct() {
    let items = build_dataset(100, 1, &default_mix(), &SolveConfig::default()).unwrap();
    let descriptions: std::collections::BTreeSet<&str> = items.iter().map(|i| i.bundle.description.as_str()).collect();
    assert_eq!(descriptions.len(), 100);
    assert!(items.iter().all(|i| !i.is_flagged()));
}

#[test]
fn data_depends_only_on_scenario_and_seed() {
    let mix = default_mix();
    let twice: Vec<ScenarioSpec> = vec![mix[3].clone(), mix[0].clone(), mix[3].clone()];
    let items = build_dataset(3, 5, &twice, &SolveConfig::default()).unwrap();
    assert_eq!(items[0].instance, items[2].instance);
    assert_eq!(items[0].instance, generate_instance(&mix[3], &mut seeded_rng(5)).unwrap());
}
