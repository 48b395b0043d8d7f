//! Two-party protocol integration: real hashing on both sides, wire
//! tables in between, and the statistical invariants of the draws the
//! platform accumulates.

mod common;

use std::collections::HashMap;

use common::{run_pipeline, run_rounds_until_quota, synthetic_world, chi_square, CHI2_CRIT_999};
use grouplink_core::classifier::{draw_pmf, ClassLabel, PopulationParams};
use grouplink_core::draws::DrawStore;
use grouplink_core::grouping::{build_group_table, table_stats, GroupParams};
use grouplink_core::identity::derive_round_salt;
use grouplink_core::validation::{build_truth_table, conditional_probabilities};

#[test]
fn registry_round_is_deterministic_and_turnout_consistent() {
    let world = synthetic_world(10_000, 0, 0.0, 0.45, 7);
    let params = GroupParams::new(10_000, 5).unwrap();

    let seed = derive_round_salt(99, 0);
    let table_a = build_group_table(&world.registry, &seed, &params);
    let table_b = build_group_table(&world.registry, &seed, &params);
    assert_eq!(table_a.to_wire_string(), table_b.to_wire_string());

    // Pool retained groups over rounds: mean voters per group tracks the
    // registry turnout within 3 standard errors.
    let mut counts: Vec<f64> = Vec::new();
    for round in 0..30 {
        let seed = derive_round_salt(99, round);
        let table = build_group_table(&world.registry, &seed, &params);
        let stats = table_stats(&table).unwrap();
        assert!(stats.retained_groups > 0);
        counts.extend(table.group_counts().values().map(|&v| f64::from(v)));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let turnout_estimate = mean / 5.0;
    assert!(
        (turnout_estimate - world.turnout).abs() <= 3.0 * se / 5.0 + 1e-9,
        "turnout {turnout_estimate} vs {} (se {se})",
        world.turnout
    );
}

// Draws collected through the real pipeline follow the model the
// classifier assumes: unmatched ~ Binomial(g, p), matched voters
// ~ 1 + Binomial(g-1, p), matched abstainers ~ Binomial(g-1, p).
// Chi-square goodness of fit at alpha = 0.001 over >= 10k draws per class.
#[test]
fn pipeline_draw_distributions_match_the_likelihood_model() {
    let world = synthetic_world(10_000, 1_500, 0.5, 0.45, 31);
    let params = GroupParams::new(10_000, 5).unwrap();
    let population = PopulationParams::new(world.turnout, 5, 0.5).unwrap();

    let all_ids: Vec<&str> = world.platform.iter().map(|r| r.user_id.as_str()).collect();
    let mut store = DrawStore::new(world.platform.iter().map(|r| r.user_id.clone()));
    // ~1500 records x 0.175 x rounds; 100 rounds gives >= 10k draws for
    // the thinnest class (matched voters at ~337 records).
    run_rounds_until_quota(&world, &params, &mut store, 31, &all_ids, 1234);

    let mut observed: HashMap<ClassLabel, Vec<u64>> = HashMap::new();
    for record in &world.platform {
        let truth = world.truth[&record.user_id];
        let cells = observed.entry(truth).or_insert_with(|| vec![0u64; 6]);
        for &(_, y) in store.draws_of(&record.user_id).unwrap() {
            cells[y as usize] += 1;
        }
    }

    for class in ClassLabel::ALL {
        let cells = &observed[&class];
        let total: u64 = cells.iter().sum();
        assert!(total >= 10_000, "{class:?}: only {total} draws");
        let expected: Vec<f64> = (0..=5)
            .map(|y| draw_pmf(y, class, &population).unwrap())
            .collect();
        let (stat, dof) = chi_square(cells, &expected);
        assert!(
            stat < CHI2_CRIT_999[dof - 1],
            "{class:?}: chi2 {stat:.2} at {dof} dof"
        );

        // Support bounds: a matched record's own contribution is fixed.
        match class {
            ClassLabel::MatchedVoter => assert_eq!(cells[0], 0, "matched voter drew 0"),
            ClassLabel::MatchedAbstainer => assert_eq!(cells[5], 0, "matched abstainer drew g"),
            ClassLabel::Unmatched => {}
        }
    }
}

#[test]
fn small_end_to_end_pipeline_classifies_with_expected_structure() {
    let world = synthetic_world(10_000, 2_000, 0.3, 0.45, 5);
    let (results, store) = run_pipeline(&world, 5, 56, 27, 777);

    assert_eq!(results.len(), 2_000);
    // Redo semantics: stage-2 results exist only for stage-1 abstainers
    // (t < 0.5) and use exactly m1 + m2 draws.
    for result in results.values() {
        match result.stage {
            1 => assert_eq!(result.n_draws_used, 56),
            2 => assert_eq!(result.n_draws_used, 83),
            other => panic!("stage {other}"),
        }
    }
    assert!(results.values().any(|r| r.stage == 2));

    // Every record reached the stage-1 quota; redo records reached both.
    for result in results.values() {
        assert!(store.draws_of(&result.user_id).unwrap().len() >= result.n_draws_used);
    }

    let table = build_truth_table(
        results.values().map(|r| (r.user_id.as_str(), r.label)),
        &world.truth,
    )
    .unwrap();
    assert_eq!(table.total(), 2_000);
    let conditional = conditional_probabilities(&table);
    // Moderate scale: generous bounds here, tight bounds in acceptance.
    assert!(conditional.voter.unwrap() > 0.85, "{conditional:?}");
    assert!(conditional.abstainer.unwrap() > 0.85, "{conditional:?}");
    assert!(conditional.unmatched.unwrap() > 0.95, "{conditional:?}");
}

#[test]
fn pipeline_is_deterministic_per_master_seed() {
    let world = synthetic_world(2_000, 300, 0.3, 0.45, 11);
    let (results_a, _) = run_pipeline(&world, 5, 10, 5, 42);
    let (results_b, _) = run_pipeline(&world, 5, 10, 5, 42);
    assert_eq!(results_a, results_b);

    let (results_c, _) = run_pipeline(&world, 5, 10, 5, 43);
    assert_ne!(results_a, results_c, "distinct master seeds should reshuffle groups");
}
