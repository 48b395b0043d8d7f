//! Shared helpers for integration suites: a synthetic two-party world
//! with known ground truth, the real-hashing pipeline driver, chi-square
//! goodness of fit, and a direct transcription of the reference two-stage
//! algorithm used as a label-for-label oracle.
//!
//! Each test target compiles this module separately and uses a subset.
#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use grouplink_core::calibration::SimulatedPopulation;
use grouplink_core::classifier::{two_stage_classify, ClassLabel, ClassificationResult};
use grouplink_core::draws::{assign_draws, DrawStore, RoundPlan};
use grouplink_core::grouping::{build_group_table, GroupParams};
use grouplink_core::identity::{derive_round_salt, CanonicalIdentity, PlatformRecord, RegistryRecord};
use grouplink_core::PopulationParams;

/// Deterministic unique identity for index `i`; both parties derive the
/// same five fields.
pub fn identity_for(i: usize) -> CanonicalIdentity {
    CanonicalIdentity::new(
        &format!("F{i}"),
        &format!("L{i}"),
        (i % 28 + 1) as u16,
        (i / 28 % 12 + 1) as u16,
        (1940 + i / 336 % 60) as u16,
    )
    .unwrap()
}

pub struct SyntheticWorld {
    pub registry: Vec<RegistryRecord>,
    pub platform: Vec<PlatformRecord>,
    /// Ground truth per platform user id.
    pub truth: HashMap<String, ClassLabel>,
    pub turnout: f64,
}

/// Build a registry of `n_registry` unique identities with exactly
/// `round(turnout * n_registry)` voters, and a platform of `n_platform`
/// records of which `round(match_rate * n_platform)` are true registry
/// matches.
pub fn synthetic_world(
    n_registry: usize,
    n_platform: usize,
    match_rate: f64,
    turnout: f64,
    seed: u64,
) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_voters = (turnout * n_registry as f64).round() as usize;
    let mut voted: Vec<bool> = (0..n_registry).map(|i| i < n_voters).collect();
    voted.shuffle(&mut rng);
    let registry: Vec<RegistryRecord> = (0..n_registry)
        .map(|i| RegistryRecord {
            identity: identity_for(i),
            voted: voted[i],
        })
        .collect();

    let n_matched = (match_rate * n_platform as f64).round() as usize;
    let mut registry_indices: Vec<usize> = (0..n_registry).collect();
    registry_indices.shuffle(&mut rng);

    let mut platform = Vec::with_capacity(n_platform);
    let mut truth = HashMap::with_capacity(n_platform);
    for k in 0..n_platform {
        let user_id = format!("u{k:06}");
        let (identity, label) = if k < n_matched {
            let idx = registry_indices[k];
            let label = if registry[idx].voted {
                ClassLabel::MatchedVoter
            } else {
                ClassLabel::MatchedAbstainer
            };
            (identity_for(idx), label)
        } else {
            // Fresh identities beyond the registry index range.
            (identity_for(n_registry + k), ClassLabel::Unmatched)
        };
        truth.insert(user_id.clone(), label);
        platform.push(PlatformRecord {
            user_id,
            identity,
            attribute: None,
        });
    }

    SyntheticWorld {
        registry,
        platform,
        truth,
        turnout: n_voters as f64 / n_registry as f64,
    }
}

/// Run real-hashing rounds until every platform record holds at least
/// `quota` draws. Returns the number of rounds executed in this call.
pub fn run_rounds_until_quota(
    world: &SyntheticWorld,
    params: &GroupParams,
    store: &mut DrawStore,
    quota: usize,
    record_set: &[&str],
    master_seed: u64,
) -> u32 {
    let mut executed = 0;
    while store.deficient(quota, record_set.iter().copied()) > 0 {
        let round = store.next_round();
        let seed = derive_round_salt(master_seed, round);
        let table = build_group_table(&world.registry, &seed, params);
        let round_draws = assign_draws(&world.platform, &table, &seed, params).unwrap();
        store.accumulate(&round_draws, round).unwrap();
        executed += 1;
        assert!(
            store.rounds_ingested() < 100_000,
            "round scheduling runaway"
        );
    }
    executed
}

/// Full two-party pipeline with occupancy-based scheduling: rounds until
/// the stage-1 quota holds everywhere, stage-1 classification to find the
/// redo set, more rounds until the redo set reaches the stage-2 quota,
/// then the final two-stage classification.
pub fn run_pipeline(
    world: &SyntheticWorld,
    g: u32,
    m1: usize,
    m2: usize,
    master_seed: u64,
) -> (BTreeMap<String, ClassificationResult>, DrawStore) {
    let params = GroupParams::new(world.registry.len(), g).unwrap();
    let population = PopulationParams::new(world.turnout, g, 0.3).unwrap();
    let all_ids: Vec<&str> = world.platform.iter().map(|r| r.user_id.as_str()).collect();

    let mut store = DrawStore::new(world.platform.iter().map(|r| r.user_id.clone()));
    run_rounds_until_quota(world, &params, &mut store, m1, &all_ids, master_seed);

    if m2 > 0 {
        let stage1 = two_stage_classify(&store, &RoundPlan::new(m1, 0), &population).unwrap();
        let redo_class = population.more_common_class();
        let redo_ids: Vec<&str> = stage1
            .values()
            .filter(|r| r.label == redo_class)
            .map(|r| r.user_id.as_str())
            .collect();
        if !redo_ids.is_empty() {
            run_rounds_until_quota(world, &params, &mut store, m1 + m2, &redo_ids, master_seed);
        }
    }

    let results = two_stage_classify(&store, &RoundPlan::new(m1, m2), &population).unwrap();
    (results, store)
}

/// Chi-square goodness-of-fit statistic against expected cell
/// probabilities; cells with expected count below 5 must be empty and are
/// excluded. Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square(observed: &[u64], expected_probability: &[f64]) -> (f64, usize) {
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&obs, &prob) in observed.iter().zip(expected_probability) {
        let expected = prob * total as f64;
        if expected < 5.0 {
            assert_eq!(obs, 0, "observation in a near-zero-probability cell");
            continue;
        }
        let diff = obs as f64 - expected;
        stat += diff * diff / expected;
        cells += 1;
    }
    (stat, cells - 1)
}

/// 0.999 chi-square quantiles for 1..=10 degrees of freedom.
pub const CHI2_CRIT_999: [f64; 10] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588,
];

/// Direct transcription of the reference two-stage algorithm, computing
/// per-draw log pmfs with an independent binomial implementation
/// (statrs) instead of the library's tables. Returns reference class
/// codes (0 abstainer, 1 voter, 2 unmatched).
pub fn reference_two_stage(
    population: &SimulatedPopulation,
    t: f64,
    g: u64,
    m1: usize,
    m2: usize,
) -> Vec<u8> {
    use statrs::distribution::{Binomial, Discrete};
    let shrunk = Binomial::new(t, g - 1).unwrap();
    let full = Binomial::new(t, g).unwrap();
    let dbinom = |dist: &Binomial, y: i64, n: u64| -> f64 {
        if y < 0 || y > n as i64 {
            f64::NEG_INFINITY
        } else {
            dist.ln_pmf(y as u64)
        }
    };
    let which_max = |lls: [f64; 3]| -> u8 {
        let mut best = 0u8;
        for (i, &ll) in lls.iter().enumerate().skip(1) {
            if ll > lls[best as usize] {
                best = i as u8;
            }
        }
        best
    };

    let classify_first = |record: usize, m: usize| -> u8 {
        let draws = &population.draws_of(record)[..m];
        let mut lls = [0.0f64; 3];
        for &y in draws {
            let y = i64::from(y);
            lls[0] += dbinom(&shrunk, y, g - 1);
            lls[1] += dbinom(&shrunk, y - 1, g - 1);
            lls[2] += dbinom(&full, y, g);
        }
        which_max(lls)
    };

    let mut predictions: Vec<u8> = (0..population.n).map(|i| classify_first(i, m1)).collect();
    if m2 > 0 {
        let redo_code: u8 = if t < 0.5 { 0 } else { 1 };
        for i in 0..population.n {
            if predictions[i] == redo_code {
                predictions[i] = classify_first(i, m1 + m2);
            }
        }
    }
    predictions
}
