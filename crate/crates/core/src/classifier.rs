//! Three-hypothesis likelihood classification of draw vectors.
//!
//! A platform record is either unmatched (its draws are pure noise from
//! groups it shares with no registry record), a matched voter (it always
//! contributes 1 to its own group count), or a matched abstainer (it
//! always contributes 0). Conditional on retention the draw `y` follows
//!
//! - unmatched:          `Binomial(g, p)` at `y`
//! - matched voter:      `Binomial(g-1, p)` at `y - 1`  (so `y >= 1`)
//! - matched abstainer:  `Binomial(g-1, p)` at `y`      (so `y <= g-1`)
//!
//! with `p` the registry turnout rate. Draws are independent across
//! rounds, so a record's log likelihood under each hypothesis is the sum
//! of per-draw log pmfs; the label is the arg max. Likelihood math stays
//! in natural-log space with pmf zeros mapped to negative infinity, which
//! keeps 50+ draw products from underflowing.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draws::{DrawStore, DrawVector, RoundPlan};

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("draw value {y} outside [0, {g}]")]
    DomainError { y: u32, g: u32 },
    #[error("cannot classify an empty draw vector")]
    EmptyDraws,
    #[error("turnout rate {0} outside open interval (0, 1)")]
    InvalidTurnout(f64),
    #[error("match rate {0} outside half-open interval (0, 1]")]
    InvalidMatchRate(f64),
    #[error("group size {0} outside supported range [2, 60]")]
    InvalidGroupSize(u32),
    #[error("{deficient_users} record(s) below the stage-{stage} quota of {required} draws")]
    QuotaNotMet {
        stage: u8,
        required: usize,
        deficient_users: usize,
    },
    #[error("classification output io: {0}")]
    Io(String),
    #[error("classification output format: {0}")]
    Format(String),
}

/// The three classification hypotheses, with the reference coding
/// 0 = matched abstainer, 1 = matched voter, 2 = unmatched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    MatchedAbstainer,
    MatchedVoter,
    Unmatched,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 3] = [
        ClassLabel::MatchedAbstainer,
        ClassLabel::MatchedVoter,
        ClassLabel::Unmatched,
    ];

    pub fn code(&self) -> u8 {
        match self {
            ClassLabel::MatchedAbstainer => 0,
            ClassLabel::MatchedVoter => 1,
            ClassLabel::Unmatched => 2,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::MatchedAbstainer => "abstainer",
            ClassLabel::MatchedVoter => "voter",
            ClassLabel::Unmatched => "unmatched",
        }
    }

    /// True when the record is classified as present in the registry.
    pub fn is_matched(&self) -> bool {
        !matches!(self, ClassLabel::Unmatched)
    }
}

impl FromStr for ClassLabel {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abstainer" => Ok(ClassLabel::MatchedAbstainer),
            "voter" => Ok(ClassLabel::MatchedVoter),
            "unmatched" => Ok(ClassLabel::Unmatched),
            other => Err(ClassifierError::Format(format!("unknown label {other:?}"))),
        }
    }
}

/// Population-level inputs of the likelihood model.
///
/// `p` is the registry turnout computed directly from the deduplicated
/// voter record, not re-estimated. `match_rate` is used by calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationParams {
    p: f64,
    g: u32,
    match_rate: f64,
}

impl PopulationParams {
    pub fn new(p: f64, g: u32, match_rate: f64) -> Result<Self, ClassifierError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ClassifierError::InvalidTurnout(p));
        }
        if !(match_rate > 0.0 && match_rate <= 1.0) {
            return Err(ClassifierError::InvalidMatchRate(match_rate));
        }
        // The exact binomial coefficients below are integer-exact well
        // past g = 60; group sizes beyond that are outside the protocol's
        // design envelope anyway.
        if !(2..=60).contains(&g) {
            return Err(ClassifierError::InvalidGroupSize(g));
        }
        Ok(Self { p, g, match_rate })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn match_rate(&self) -> f64 {
        self.match_rate
    }

    /// The behavior label fewer matched records carry (voting when
    /// `p < 0.5`); at `p = 0.5` voting is used as the nominal choice.
    pub fn less_common_class(&self) -> ClassLabel {
        if self.p < 0.5 {
            ClassLabel::MatchedVoter
        } else if self.p > 0.5 {
            ClassLabel::MatchedAbstainer
        } else {
            ClassLabel::MatchedVoter
        }
    }

    /// The redo class of the two-stage rule: stage-1 predictions of the
    /// more common behavior receive additional draws.
    pub fn more_common_class(&self) -> ClassLabel {
        match self.less_common_class() {
            ClassLabel::MatchedVoter => ClassLabel::MatchedAbstainer,
            _ => ClassLabel::MatchedVoter,
        }
    }
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=u128::from(k) {
        // Exact at every step: c * (n - k + i) is divisible by i.
        c = c * (u128::from(n - k) + i) / i;
    }
    c as f64
}

/// Probability of one draw `y` under a hypothesis.
pub fn draw_pmf(y: u32, hypothesis: ClassLabel, params: &PopulationParams) -> Result<f64, ClassifierError> {
    let g = params.g;
    if y > g {
        return Err(ClassifierError::DomainError { y, g });
    }
    let p = params.p;
    let q = 1.0 - p;
    let value = match hypothesis {
        ClassLabel::Unmatched => binomial_coefficient(g, y) * p.powi(y as i32) * q.powi((g - y) as i32),
        ClassLabel::MatchedVoter => {
            // A matched voter's own contribution is always 1.
            if y == 0 {
                0.0
            } else {
                binomial_coefficient(g - 1, y - 1) * p.powi((y - 1) as i32) * q.powi((g - y) as i32)
            }
        }
        ClassLabel::MatchedAbstainer => {
            if y == g {
                0.0
            } else {
                binomial_coefficient(g - 1, y) * p.powi(y as i32) * q.powi((g - 1 - y) as i32)
            }
        }
    };
    Ok(value)
}

/// Natural-log likelihoods of a draw vector under the three hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihoods {
    pub abstainer: f64,
    pub voter: f64,
    pub unmatched: f64,
}

impl LogLikelihoods {
    /// Arg max with ties broken in the reference order
    /// (abstainer, voter, unmatched).
    pub fn best_label(&self) -> ClassLabel {
        let mut best = ClassLabel::MatchedAbstainer;
        let mut best_ll = self.abstainer;
        if self.voter > best_ll {
            best = ClassLabel::MatchedVoter;
            best_ll = self.voter;
        }
        if self.unmatched > best_ll {
            best = ClassLabel::Unmatched;
        }
        best
    }
}

/// Per-parameter table of `ln draw_pmf(y)` for each hypothesis, the hot
/// path shared by classification and calibration.
#[derive(Debug, Clone)]
pub struct LogPmfTable {
    g: u32,
    // Indexed [class code][y]; zero-probability entries are -inf.
    ln: [Vec<f64>; 3],
}

impl LogPmfTable {
    pub fn new(params: &PopulationParams) -> Self {
        let g = params.g;
        let mut ln = [
            Vec::with_capacity(g as usize + 1),
            Vec::with_capacity(g as usize + 1),
            Vec::with_capacity(g as usize + 1),
        ];
        for class in ClassLabel::ALL {
            for y in 0..=g {
                let pmf = draw_pmf(y, class, params).expect("y in range by construction");
                ln[class.code() as usize].push(if pmf > 0.0 { pmf.ln() } else { f64::NEG_INFINITY });
            }
        }
        Self { g, ln }
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn ln_pmf(&self, class: ClassLabel, y: u32) -> f64 {
        self.ln[class.code() as usize][y as usize]
    }

    /// Log likelihoods via the draw histogram. The histogram is the
    /// sufficient statistic, which also makes the result exactly
    /// invariant under permutation of the draws.
    pub fn log_likelihoods_of(&self, ys: impl Iterator<Item = u32>) -> Result<LogLikelihoods, ClassifierError> {
        let mut counts = vec![0u32; self.g as usize + 1];
        let mut total = 0usize;
        for y in ys {
            if y > self.g {
                return Err(ClassifierError::DomainError { y, g: self.g });
            }
            counts[y as usize] += 1;
            total += 1;
        }
        if total == 0 {
            return Err(ClassifierError::EmptyDraws);
        }
        let sum_for = |class: ClassLabel| {
            let table = &self.ln[class.code() as usize];
            counts
                .iter()
                .zip(table)
                .filter(|&(&c, _)| c > 0)
                .map(|(&c, &lp)| f64::from(c) * lp)
                .sum()
        };
        Ok(LogLikelihoods {
            abstainer: sum_for(ClassLabel::MatchedAbstainer),
            voter: sum_for(ClassLabel::MatchedVoter),
            unmatched: sum_for(ClassLabel::Unmatched),
        })
    }
}

/// Log likelihoods of a draw vector truncated to its first `n_draws`.
pub fn log_likelihoods(
    ys: &[u32],
    params: &PopulationParams,
) -> Result<LogLikelihoods, ClassifierError> {
    LogPmfTable::new(params).log_likelihoods_of(ys.iter().copied())
}

/// Classification of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub user_id: String,
    pub label: ClassLabel,
    pub ll: LogLikelihoods,
    pub n_draws_used: usize,
    pub stage: u8,
}

/// Maximum-likelihood label of a full draw vector.
pub fn classify(
    vector: &DrawVector,
    params: &PopulationParams,
) -> Result<ClassificationResult, ClassifierError> {
    let table = LogPmfTable::new(params);
    let ll = table.log_likelihoods_of(vector.draws.iter().map(|&(_, y)| y))?;
    Ok(ClassificationResult {
        user_id: vector.user_id.clone(),
        label: ll.best_label(),
        ll,
        n_draws_used: vector.draws.len(),
        stage: 1,
    })
}

/// Two-stage classification over a draw store.
///
/// Stage 1 classifies every record on its first `quota_stage1` draws.
/// Records whose stage-1 label is the more common behavior are then
/// reclassified on their first `quota_stage1 + quota_stage2` draws (all
/// three hypotheses considered again, so a redo record may migrate to
/// unmatched). With `quota_stage2 = 0`, or at `p = 0.5` where neither
/// behavior is more common, the stage-1 labels stand.
pub fn two_stage_classify(
    store: &DrawStore,
    plan: &RoundPlan,
    params: &PopulationParams,
) -> Result<BTreeMap<String, ClassificationResult>, ClassifierError> {
    let m1 = plan.quota_stage1;
    let m2 = plan.quota_stage2;
    let table = LogPmfTable::new(params);

    let deficient = store.iter().filter(|(_, draws)| draws.len() < m1).count();
    if deficient > 0 {
        return Err(ClassifierError::QuotaNotMet {
            stage: 1,
            required: m1,
            deficient_users: deficient,
        });
    }

    let mut results = BTreeMap::new();
    for (user_id, draws) in store.iter() {
        let ll = table.log_likelihoods_of(draws.iter().take(m1).map(|&(_, y)| y))?;
        results.insert(
            user_id.to_string(),
            ClassificationResult {
                user_id: user_id.to_string(),
                label: ll.best_label(),
                ll,
                n_draws_used: m1,
                stage: 1,
            },
        );
    }

    if m2 == 0 || (params.p - 0.5).abs() < f64::EPSILON {
        return Ok(results);
    }

    let redo_class = params.more_common_class();
    let redo_ids: Vec<String> = results
        .values()
        .filter(|r| r.label == redo_class)
        .map(|r| r.user_id.clone())
        .collect();

    let total = m1 + m2;
    let deficient = redo_ids
        .iter()
        .filter(|id| store.draws_of(id).map_or(0, <[_]>::len) < total)
        .count();
    if deficient > 0 {
        return Err(ClassifierError::QuotaNotMet {
            stage: 2,
            required: total,
            deficient_users: deficient,
        });
    }

    for user_id in redo_ids {
        let draws = store.draws_of(&user_id).expect("redo id comes from store");
        let ll = table.log_likelihoods_of(draws.iter().take(total).map(|&(_, y)| y))?;
        results.insert(
            user_id.clone(),
            ClassificationResult {
                user_id,
                label: ll.best_label(),
                ll,
                n_draws_used: total,
                stage: 2,
            },
        );
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// Classification output file:
// `user_id,label,ll_abstainer,ll_voter,ll_unmatched,n_draws_used,stage`.
// ---------------------------------------------------------------------------

pub fn write_classification_csv<'a>(
    path: &Path,
    results: impl Iterator<Item = &'a ClassificationResult>,
) -> Result<(), ClassifierError> {
    let file = std::fs::File::create(path)
        .map_err(|e| ClassifierError::Io(format!("{}: {e}", path.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    writeln!(writer, "user_id,label,ll_abstainer,ll_voter,ll_unmatched,n_draws_used,stage")
        .map_err(|e| ClassifierError::Io(e.to_string()))?;
    for r in results {
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            r.user_id,
            r.label.as_str(),
            r.ll.abstainer,
            r.ll.voter,
            r.ll.unmatched,
            r.n_draws_used,
            r.stage
        )
        .map_err(|e| ClassifierError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| ClassifierError::Io(e.to_string()))?;
    Ok(())
}

pub fn read_classification_csv(path: &Path) -> Result<Vec<ClassificationResult>, ClassifierError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| ClassifierError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| ClassifierError::Format("empty file".into()))?;
    if header != "user_id,label,ll_abstainer,ll_voter,ll_unmatched,n_draws_used,stage" {
        return Err(ClassifierError::Format(format!("unexpected header {header:?}")));
    }
    let mut results = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(ClassifierError::Format(format!("expected 7 fields: {line:?}")));
        }
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| ClassifierError::Format(format!("bad float {s:?}")))
        };
        results.push(ClassificationResult {
            user_id: fields[0].to_string(),
            label: fields[1].parse()?,
            ll: LogLikelihoods {
                abstainer: parse_f64(fields[2])?,
                voter: parse_f64(fields[3])?,
                unmatched: parse_f64(fields[4])?,
            },
            n_draws_used: fields[5]
                .parse()
                .map_err(|_| ClassifierError::Format(format!("bad count {:?}", fields[5])))?,
            stage: fields[6]
                .parse()
                .map_err(|_| ClassifierError::Format(format!("bad stage {:?}", fields[6])))?,
        });
    }
    Ok(results)
}

// serde for ClassLabel uses the wire spelling.
impl Serialize for ClassLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, g: u32) -> PopulationParams {
        PopulationParams::new(p, g, 0.3).unwrap()
    }

    fn vector(ys: &[u32]) -> DrawVector {
        DrawVector {
            user_id: "u".to_string(),
            draws: ys.iter().enumerate().map(|(i, &y)| (i as u32, y)).collect(),
        }
    }

    #[test]
    fn params_validate_ranges() {
        assert!(PopulationParams::new(0.0, 5, 0.3).is_err());
        assert!(PopulationParams::new(1.0, 5, 0.3).is_err());
        assert!(PopulationParams::new(0.5, 1, 0.3).is_err());
        assert!(PopulationParams::new(0.5, 5, 0.0).is_err());
        assert!(PopulationParams::new(0.5, 5, 1.1).is_err());
        assert!(PopulationParams::new(0.5, 5, 1.0).is_ok());
    }

    #[test]
    fn pmf_impossibility_boundaries() {
        let p = params(0.45, 5);
        assert_eq!(draw_pmf(0, ClassLabel::MatchedVoter, &p).unwrap(), 0.0);
        assert_eq!(draw_pmf(5, ClassLabel::MatchedAbstainer, &p).unwrap(), 0.0);
        assert!(matches!(
            draw_pmf(6, ClassLabel::Unmatched, &p),
            Err(ClassifierError::DomainError { y: 6, g: 5 })
        ));
    }

    // Frozen from direct binomial evaluation: C(5,3)p^3q^2, C(4,2)p^2q^2,
    // C(4,3)p^3q^1 at p = 0.45.
    #[test]
    fn pmf_matches_frozen_oracle_values() {
        let p = params(0.45, 5);
        let cases = [
            (ClassLabel::Unmatched, 0.275653125),
            (ClassLabel::MatchedVoter, 0.3675375),
            (ClassLabel::MatchedAbstainer, 0.200475),
        ];
        for (class, expected) in cases {
            let got = draw_pmf(3, class, &p).unwrap();
            assert!(
                (got - expected).abs() / expected < 1e-12,
                "{class:?}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn single_extreme_draw_orders_hypotheses() {
        let p = params(0.45, 5);
        let ll = log_likelihoods(&[5], &p).unwrap();
        assert_eq!(ll.abstainer, f64::NEG_INFINITY);
        assert!((ll.voter - 0.45f64.powi(4).ln()).abs() < 1e-12);
        assert!((ll.unmatched - 0.45f64.powi(5).ln()).abs() < 1e-12);
        assert!(ll.voter > ll.unmatched);

        let ll = log_likelihoods(&[0, 0, 0], &p).unwrap();
        assert_eq!(ll.voter, f64::NEG_INFINITY);
        assert!(ll.abstainer > ll.unmatched);
    }

    // ln pmf sums frozen from the same independent evaluation as the pmf
    // oracle: draws [3, 2] at g = 5, p = 0.45.
    #[test]
    fn two_draw_log_likelihoods_match_oracle() {
        let p = params(0.45, 5);
        let ll = log_likelihoods(&[3, 2], &p).unwrap();
        let check = |got: f64, expected: f64| {
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        };
        check(ll.voter, -2.206654262083471);
        check(ll.abstainer, -2.607995653007773);
        check(ll.unmatched, -2.3765532988788682);
    }

    #[test]
    fn empty_draws_are_rejected() {
        let p = params(0.45, 5);
        assert!(matches!(
            log_likelihoods(&[], &p),
            Err(ClassifierError::EmptyDraws)
        ));
    }

    #[test]
    fn extreme_vectors_classify_to_matched_classes() {
        let p = params(0.45, 5);
        let all_g = vector(&[5, 5, 5, 5]);
        assert_eq!(classify(&all_g, &p).unwrap().label, ClassLabel::MatchedVoter);
        let all_zero = vector(&[0, 0, 0, 0]);
        assert_eq!(
            classify(&all_zero, &p).unwrap().label,
            ClassLabel::MatchedAbstainer
        );
    }

    #[test]
    fn conflicting_impossibilities_force_unmatched() {
        // A draw of 0 excludes voter and a draw of g excludes abstainer;
        // unmatched is the only hypothesis with finite likelihood.
        let p = params(0.45, 5);
        let result = classify(&vector(&[0, 5]), &p).unwrap();
        assert_eq!(result.label, ClassLabel::Unmatched);
        assert_eq!(result.ll.abstainer, f64::NEG_INFINITY);
        assert_eq!(result.ll.voter, f64::NEG_INFINITY);
        assert!(result.ll.unmatched.is_finite());
    }

    #[test]
    fn interior_draws_keep_all_hypotheses_alive() {
        // The privacy core: interior evidence never yields certainty.
        for g in 2..=8u32 {
            let p = params(0.45, g);
            let ys: Vec<u32> = (1..g).collect();
            let ll = log_likelihoods(&ys, &p).unwrap();
            assert!(ll.abstainer.is_finite());
            assert!(ll.voter.is_finite());
            assert!(ll.unmatched.is_finite());
        }
    }

    #[test]
    fn tie_break_follows_reference_order() {
        let ll = LogLikelihoods {
            abstainer: -1.0,
            voter: -1.0,
            unmatched: -1.0,
        };
        assert_eq!(ll.best_label(), ClassLabel::MatchedAbstainer);
        let ll = LogLikelihoods {
            abstainer: -2.0,
            voter: -1.0,
            unmatched: -1.0,
        };
        assert_eq!(ll.best_label(), ClassLabel::MatchedVoter);
    }

    fn store_with(vectors: &[(&str, Vec<u32>)]) -> DrawStore {
        let mut store = DrawStore::new(vectors.iter().map(|(id, _)| id.to_string()));
        let max_rounds = vectors.iter().map(|(_, ys)| ys.len()).max().unwrap_or(0);
        for round in 0..max_rounds {
            let rows: Vec<(String, u32)> = vectors
                .iter()
                .filter_map(|(id, ys)| ys.get(round).map(|&y| (id.to_string(), y)))
                .collect();
            store.accumulate(&rows, round as u32).unwrap();
        }
        store
    }

    #[test]
    fn two_stage_with_zero_m2_equals_stage_one() {
        let store = store_with(&[
            ("a", vec![0, 1, 0, 1]),
            ("b", vec![5, 4, 5, 4]),
            ("c", vec![2, 3, 2, 3]),
        ]);
        let p = params(0.45, 5);
        let single = two_stage_classify(&store, &RoundPlan::new(4, 0), &p).unwrap();
        for (id, result) in &single {
            assert_eq!(result.stage, 1, "{id}");
            assert_eq!(result.n_draws_used, 4);
            let direct = classify(
                &DrawVector {
                    user_id: id.clone(),
                    draws: store.draws_of(id).unwrap().to_vec(),
                },
                &p,
            )
            .unwrap();
            assert_eq!(result.label, direct.label);
        }
    }

    #[test]
    fn redo_set_is_the_more_common_behavior() {
        // p = 0.45 < 0.5: voting is less common, so stage-1 abstainers
        // are redone and everyone else keeps the stage-1 result.
        let store = store_with(&[
            ("abst", vec![0, 0, 1, 0, 1, 2]),
            ("voter", vec![5, 4, 5, 4, 5, 4]),
            ("noise", vec![2, 3, 2, 3, 2, 3]),
        ]);
        let p = params(0.45, 5);
        let results = two_stage_classify(&store, &RoundPlan::new(4, 2), &p).unwrap();

        let abst = &results["abst"];
        assert_eq!(abst.stage, 2);
        assert_eq!(abst.n_draws_used, 6);

        assert_eq!(results["voter"].stage, 1);
        assert_eq!(results["voter"].n_draws_used, 4);
        assert_eq!(results["noise"].stage, 1);
    }

    #[test]
    fn redo_set_is_empty_at_even_turnout() {
        let store = store_with(&[("abst", vec![0, 0, 0, 0, 0, 0])]);
        let p = params(0.5, 5);
        let results = two_stage_classify(&store, &RoundPlan::new(4, 2), &p).unwrap();
        assert_eq!(results["abst"].stage, 1);
    }

    #[test]
    fn quota_not_met_reports_deficient_counts() {
        let store = store_with(&[("a", vec![1, 2]), ("b", vec![1])]);
        let p = params(0.45, 5);
        let err = two_stage_classify(&store, &RoundPlan::new(2, 0), &p).unwrap_err();
        assert_eq!(
            err,
            ClassifierError::QuotaNotMet {
                stage: 1,
                required: 2,
                deficient_users: 1
            }
        );

        // Stage-2 shortfall: "a" classifies as abstainer at stage 1 but
        // lacks the m1 + m2 draws for the redo.
        let store = store_with(&[("a", vec![0, 0])]);
        let err = two_stage_classify(&store, &RoundPlan::new(2, 3), &p).unwrap_err();
        assert_eq!(
            err,
            ClassifierError::QuotaNotMet {
                stage: 2,
                required: 5,
                deficient_users: 1
            }
        );
    }

    #[test]
    fn classification_csv_round_trip_including_infinities() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let p = params(0.45, 5);
        let results = vec![
            classify(&vector(&[0, 5]), &p).unwrap(),
            classify(&vector(&[2, 3]), &p).unwrap(),
        ];
        write_classification_csv(&path, results.iter()).unwrap();
        let read_back = read_classification_csv(&path).unwrap();
        assert_eq!(read_back, results);
        assert_eq!(read_back[0].ll.voter, f64::NEG_INFINITY);
    }
}
