//! Monte Carlo calibration: simulate synthetic populations, sweep draw
//! counts, and select the `(m1, m2)` quotas that reach a target
//! conditional accuracy for both matched classes.
//!
//! Stage 1 finds the smallest `m1` (on a grid of 5) at which the less
//! common behavior is classified at the target accuracy; stage 2 finds
//! the additional `m2` draws that restore the more common behavior's
//! accuracy after the redo. Accuracies are pooled over independent
//! replicates to damp Monte Carlo noise, and the returned plan is
//! re-measured on a fresh replicate.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassLabel, LogPmfTable, PopulationParams};
use crate::identity::{identity_hash, CanonicalIdentity, HashValue, RoundSeed};

/// Draw-count grid step; the quota search moves in multiples of 5.
pub const GRID_STEP: usize = 5;
/// Draw-count grid cap; beyond this the target is declared unreachable.
pub const GRID_CAP: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(
        "target accuracy {target} unreachable for stage {stage} within {cap} draws (best {best:.4})"
    )]
    TargetUnreachable {
        stage: u8,
        target: f64,
        cap: usize,
        best: f64,
    },
    #[error("predictions ({predictions}) and truth ({truth}) differ in length")]
    LengthMismatch { predictions: usize, truth: usize },
}

/// Inputs of one synthetic-population experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Turnout rate of the synthetic registry.
    pub t: f64,
    /// Match rate: probability a platform record is in the registry.
    pub mm: f64,
    /// Population size.
    pub n: usize,
    /// Group size.
    pub g: u32,
    /// Target conditional accuracy for both matched classes.
    pub target_accuracy: f64,
    /// Seed of the deterministic RNG stream family.
    pub rng_seed: u64,
    /// Independent replicates pooled during calibration.
    pub replicates: usize,
}

impl SimulationConfig {
    pub fn new(t: f64, mm: f64, n: usize, g: u32, rng_seed: u64) -> Self {
        Self {
            t,
            mm,
            n,
            g,
            target_accuracy: 0.95,
            rng_seed,
            replicates: 3,
        }
    }

    pub fn validate(&self) -> Result<PopulationParams, CalibrationError> {
        if self.n < 1000 {
            return Err(CalibrationError::InvalidConfig(format!(
                "population size {} below 1000",
                self.n
            )));
        }
        if !(self.target_accuracy > 0.0 && self.target_accuracy < 1.0) {
            return Err(CalibrationError::InvalidConfig(format!(
                "target accuracy {} outside (0, 1)",
                self.target_accuracy
            )));
        }
        if self.replicates == 0 {
            return Err(CalibrationError::InvalidConfig("zero replicates".into()));
        }
        PopulationParams::new(self.t, self.g, self.mm)
            .map_err(|e| CalibrationError::InvalidConfig(e.to_string()))
    }
}

/// Class sizes implied by a config: matched abstainers, matched voters,
/// unmatched.
pub fn population_counts(cfg: &SimulationConfig) -> (usize, usize, usize) {
    let n0 = (cfg.mm * (1.0 - cfg.t) * cfg.n as f64).round() as usize;
    let n1 = (cfg.mm * cfg.t * cfg.n as f64).round() as usize;
    (n0, n1, cfg.n - n0 - n1)
}

/// Inverse-CDF sampler over one hypothesis' draw distribution.
struct ClassSampler {
    cdf: Vec<f64>,
    last_support: u32,
}

impl ClassSampler {
    fn new(table: &LogPmfTable, class: ClassLabel) -> Self {
        let g = table.g();
        let mut cdf = Vec::with_capacity(g as usize + 1);
        let mut acc = 0.0;
        let mut last_support = 0;
        for y in 0..=g {
            let lp = table.ln_pmf(class, y);
            if lp.is_finite() {
                acc += lp.exp();
                last_support = y;
            }
            cdf.push(acc);
        }
        Self { cdf, last_support }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let u: f64 = rng.random();
        for (y, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return y as u32;
            }
        }
        // cdf sums to 1 up to rounding; clamp to the last support point.
        self.last_support
    }
}

/// A synthetic population's ground truth and draw matrix (row-major,
/// `n` rows of `m` draws).
pub struct SimulatedPopulation {
    pub truth: Vec<ClassLabel>,
    pub n: usize,
    pub m: usize,
    draws: Vec<u8>,
}

impl SimulatedPopulation {
    pub fn draws_of(&self, record: usize) -> &[u8] {
        &self.draws[record * self.m..(record + 1) * self.m]
    }
}

fn truth_vector(cfg: &SimulationConfig) -> Vec<ClassLabel> {
    let (n0, n1, n2) = population_counts(cfg);
    let mut truth = Vec::with_capacity(cfg.n);
    truth.extend(std::iter::repeat_n(ClassLabel::MatchedAbstainer, n0));
    truth.extend(std::iter::repeat_n(ClassLabel::MatchedVoter, n1));
    truth.extend(std::iter::repeat_n(ClassLabel::Unmatched, n2));
    truth
}

fn replicate_rng(cfg: &SimulationConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(stream);
    rng
}

/// Generate a population with `m` draws per record, reproducible from
/// `cfg.rng_seed` (stream 0).
///
/// Matched abstainers draw `Binomial(g-1, t)`, matched voters draw
/// `Binomial(g-1, t) + 1`, unmatched records draw `Binomial(g, t)`,
/// independently across records and rounds. Draws are generated
/// column-by-column, so a larger `m` extends each record's vector without
/// changing its prefix.
pub fn simulate_population(
    cfg: &SimulationConfig,
    m: usize,
) -> Result<SimulatedPopulation, CalibrationError> {
    let params = cfg.validate()?;
    let table = LogPmfTable::new(&params);
    let samplers = ClassLabel::ALL.map(|c| ClassSampler::new(&table, c));
    let truth = truth_vector(cfg);
    let mut rng = replicate_rng(cfg, 0);
    let mut draws = vec![0u8; cfg.n * m];
    for j in 0..m {
        for (i, &class) in truth.iter().enumerate() {
            draws[i * m + j] = samplers[class.code() as usize].sample(&mut rng) as u8;
        }
    }
    Ok(SimulatedPopulation {
        truth,
        n: cfg.n,
        m,
        draws,
    })
}

/// Conditional accuracies `Pr(truth = c | prediction = c)` per class;
/// classes with zero predictions report `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAccuracy {
    pub abstainer: Option<f64>,
    pub voter: Option<f64>,
    pub unmatched: Option<f64>,
}

impl ConditionalAccuracy {
    pub fn of(&self, class: ClassLabel) -> Option<f64> {
        match class {
            ClassLabel::MatchedAbstainer => self.abstainer,
            ClassLabel::MatchedVoter => self.voter,
            ClassLabel::Unmatched => self.unmatched,
        }
    }
}

/// Fraction of each predicted class whose truth agrees.
pub fn evaluate_accuracy(
    predictions: &[ClassLabel],
    truth: &[ClassLabel],
) -> Result<ConditionalAccuracy, CalibrationError> {
    if predictions.len() != truth.len() {
        return Err(CalibrationError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let mut agree = [0usize; 3];
    let mut total = [0usize; 3];
    for (&p, &t) in predictions.iter().zip(truth) {
        total[p.code() as usize] += 1;
        if p == t {
            agree[p.code() as usize] += 1;
        }
    }
    let ratio = |c: usize| (total[c] > 0).then(|| agree[c] as f64 / total[c] as f64);
    Ok(ConditionalAccuracy {
        abstainer: ratio(0),
        voter: ratio(1),
        unmatched: ratio(2),
    })
}

/// One replicate's incremental simulation state: cumulative per-record
/// log likelihoods that extend column-by-column without storing draws.
struct ReplicateEngine {
    rng: ChaCha8Rng,
    lls: [Vec<f64>; 3],
    m: usize,
}

impl ReplicateEngine {
    fn new(cfg: &SimulationConfig, stream: u64, n: usize) -> Self {
        Self {
            rng: replicate_rng(cfg, stream),
            lls: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            m: 0,
        }
    }

    /// Generate `extra` more draws per record and fold them into the
    /// cumulative log likelihoods. Generation order matches
    /// [`simulate_population`], so the same seed and stream reproduce the
    /// same draw sequence.
    fn advance(
        &mut self,
        extra: usize,
        truth: &[ClassLabel],
        samplers: &[ClassSampler; 3],
        table: &LogPmfTable,
    ) {
        for _ in 0..extra {
            for (i, &class) in truth.iter().enumerate() {
                let y = samplers[class.code() as usize].sample(&mut self.rng);
                self.lls[0][i] += table.ln_pmf(ClassLabel::MatchedAbstainer, y);
                self.lls[1][i] += table.ln_pmf(ClassLabel::MatchedVoter, y);
                self.lls[2][i] += table.ln_pmf(ClassLabel::Unmatched, y);
            }
        }
        self.m += extra;
    }

    fn predictions(&self) -> Vec<ClassLabel> {
        (0..self.lls[0].len())
            .map(|i| {
                let mut best = ClassLabel::MatchedAbstainer;
                let mut best_ll = self.lls[0][i];
                if self.lls[1][i] > best_ll {
                    best = ClassLabel::MatchedVoter;
                    best_ll = self.lls[1][i];
                }
                if self.lls[2][i] > best_ll {
                    best = ClassLabel::Unmatched;
                }
                best
            })
            .collect()
    }
}

fn pooled_accuracy(
    predictions_per_replicate: &[Vec<ClassLabel>],
    truth: &[ClassLabel],
    class: ClassLabel,
) -> Option<f64> {
    let mut agree = 0usize;
    let mut total = 0usize;
    for predictions in predictions_per_replicate {
        for (&p, &t) in predictions.iter().zip(truth) {
            if p == class {
                total += 1;
                agree += usize::from(t == class);
            }
        }
    }
    (total > 0).then(|| agree as f64 / total as f64)
}

/// One point of an accuracy-versus-draws curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub m: usize,
    pub acc_voter: Option<f64>,
    pub acc_abstainer: Option<f64>,
}

/// Single-stage conditional accuracy of both matched classes at each
/// draw count in `m_values` (ascending), pooled over replicates.
pub fn accuracy_curve(
    cfg: &SimulationConfig,
    m_values: &[usize],
) -> Result<Vec<AccuracyPoint>, CalibrationError> {
    let params = cfg.validate()?;
    if m_values.is_empty() {
        return Err(CalibrationError::InvalidConfig("empty draw-count list".into()));
    }
    if m_values[0] == 0 || m_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CalibrationError::InvalidConfig(
            "draw counts must be positive and strictly ascending".into(),
        ));
    }
    let table = LogPmfTable::new(&params);
    let samplers = ClassLabel::ALL.map(|c| ClassSampler::new(&table, c));
    let truth = truth_vector(cfg);
    let mut engines: Vec<ReplicateEngine> = (0..cfg.replicates)
        .map(|r| ReplicateEngine::new(cfg, r as u64, cfg.n))
        .collect();

    let mut curve = Vec::with_capacity(m_values.len());
    for &m in m_values {
        for engine in &mut engines {
            engine.advance(m - engine.m, &truth, &samplers, &table);
        }
        let predictions: Vec<Vec<ClassLabel>> =
            engines.iter().map(ReplicateEngine::predictions).collect();
        curve.push(AccuracyPoint {
            m,
            acc_voter: pooled_accuracy(&predictions, &truth, ClassLabel::MatchedVoter),
            acc_abstainer: pooled_accuracy(&predictions, &truth, ClassLabel::MatchedAbstainer),
        });
    }
    Ok(curve)
}

/// Calibrated draw quotas and the accuracies they achieved on a fresh
/// replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub m1: usize,
    pub m2: usize,
    /// Stage-1 predictions of this class are redrawn in stage 2.
    pub redo_class: ClassLabel,
    pub achieved_accuracy_voter: f64,
    pub achieved_accuracy_abstainer: f64,
}

/// Full calibration output: the plan plus the stage-1 search curve for
/// reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub plan: CalibrationPlan,
    pub stage1_curve: Vec<AccuracyPoint>,
}

/// Search the draw-count grid for the smallest `(m1, m2)` meeting the
/// target.
///
/// `m1` is the smallest grid point where the less common behavior's
/// pooled conditional accuracy reaches the target; `m2` is the smallest
/// additional count restoring the more common behavior's accuracy after
/// stage-1 predictions of that class are reclassified on `m1 + m2`
/// draws. At `t = 0.5` the redo set is empty by construction and `m2`
/// is 0.
pub fn calibrate(cfg: &SimulationConfig) -> Result<CalibrationOutcome, CalibrationError> {
    let params = cfg.validate()?;
    let table = LogPmfTable::new(&params);
    let samplers = ClassLabel::ALL.map(|c| ClassSampler::new(&table, c));
    let truth = truth_vector(cfg);
    let less = params.less_common_class();
    let more = params.more_common_class();
    let target = cfg.target_accuracy;

    let mut engines: Vec<ReplicateEngine> = (0..cfg.replicates)
        .map(|r| ReplicateEngine::new(cfg, r as u64, cfg.n))
        .collect();

    // Stage 1: grow every replicate until the less common behavior hits
    // the target.
    let mut stage1_curve = Vec::new();
    let mut m1 = None;
    let mut best_less = 0.0f64;
    let mut predictions: Vec<Vec<ClassLabel>> = Vec::new();
    for m in (GRID_STEP..=GRID_CAP).step_by(GRID_STEP) {
        for engine in &mut engines {
            engine.advance(GRID_STEP, &truth, &samplers, &table);
        }
        predictions = engines.iter().map(ReplicateEngine::predictions).collect();
        let acc_voter = pooled_accuracy(&predictions, &truth, ClassLabel::MatchedVoter);
        let acc_abstainer = pooled_accuracy(&predictions, &truth, ClassLabel::MatchedAbstainer);
        stage1_curve.push(AccuracyPoint {
            m,
            acc_voter,
            acc_abstainer,
        });
        let acc_less = match less {
            ClassLabel::MatchedVoter => acc_voter,
            _ => acc_abstainer,
        };
        if let Some(acc) = acc_less {
            best_less = best_less.max(acc);
            if acc >= target {
                m1 = Some(m);
                break;
            }
        }
    }
    let m1 = m1.ok_or(CalibrationError::TargetUnreachable {
        stage: 1,
        target,
        cap: GRID_CAP,
        best: best_less,
    })?;

    // Stage 2: the redo set is frozen at the stage-1 predictions; extra
    // draws accumulate until the more common behavior recovers. An even
    // turnout has no more-common behavior, so the redo set is empty and
    // m2 stays 0.
    let m2 = if cfg.t == 0.5 {
        0
    } else {
        let stage1 = predictions;
        let redo: Vec<Vec<bool>> = stage1
            .iter()
            .map(|preds| preds.iter().map(|&p| p == more).collect())
            .collect();
        let mut m2 = None;
        let mut best_more = 0.0f64;
        let mut extra = 0;
        loop {
            let staged: Vec<Vec<ClassLabel>> = engines
                .iter()
                .zip(&stage1)
                .zip(&redo)
                .map(|((engine, stage1), redo)| {
                    let current = engine.predictions();
                    stage1
                        .iter()
                        .zip(&current)
                        .zip(redo)
                        .map(|((&s1, &cur), &is_redo)| if is_redo { cur } else { s1 })
                        .collect()
                })
                .collect();
            if let Some(acc) = pooled_accuracy(&staged, &truth, more) {
                best_more = best_more.max(acc);
                if acc >= target {
                    m2 = Some(extra);
                    break;
                }
            }
            if extra >= GRID_CAP {
                break;
            }
            extra += GRID_STEP;
            for engine in &mut engines {
                engine.advance(GRID_STEP, &truth, &samplers, &table);
            }
        }
        m2.ok_or(CalibrationError::TargetUnreachable {
            stage: 2,
            target,
            cap: GRID_CAP,
            best: best_more,
        })?
    };

    // Re-measure on a fresh replicate with the chosen quotas.
    let achieved = measure_plan(cfg, &params, m1, m2, cfg.replicates as u64)?;
    Ok(CalibrationOutcome {
        plan: CalibrationPlan {
            m1,
            m2,
            redo_class: more,
            achieved_accuracy_voter: achieved.voter.unwrap_or(f64::NAN),
            achieved_accuracy_abstainer: achieved.abstainer.unwrap_or(f64::NAN),
        },
        stage1_curve,
    })
}

/// Run one fresh replicate of the two-stage procedure at fixed quotas and
/// report the conditional accuracies.
pub fn measure_plan(
    cfg: &SimulationConfig,
    params: &PopulationParams,
    m1: usize,
    m2: usize,
    stream: u64,
) -> Result<ConditionalAccuracy, CalibrationError> {
    let table = LogPmfTable::new(params);
    let samplers = ClassLabel::ALL.map(|c| ClassSampler::new(&table, c));
    let truth = truth_vector(cfg);
    let mut engine = ReplicateEngine::new(cfg, stream, cfg.n);
    engine.advance(m1, &truth, &samplers, &table);
    let stage1 = engine.predictions();
    let final_predictions = if m2 > 0 && cfg.t != 0.5 {
        let more = params.more_common_class();
        engine.advance(m2, &truth, &samplers, &table);
        let current = engine.predictions();
        stage1
            .iter()
            .zip(&current)
            .map(|(&s1, &cur)| if s1 == more { cur } else { s1 })
            .collect()
    } else {
        stage1
    };
    evaluate_accuracy(&final_predictions, &truth)
}

/// Aggregate match-rate estimate: the fraction of sampled platform
/// identities whose seeded hash appears in the registry's hash set.
///
/// Uses a dedicated estimation seed distinct from every round salt. No
/// per-record result is retained; only the aggregate rate is returned.
pub fn estimate_match_rate(
    platform_sample: &[CanonicalIdentity],
    registry_hashes: &HashSet<HashValue>,
    seed: &RoundSeed,
) -> f64 {
    assert!(
        !platform_sample.is_empty(),
        "sample must contain at least one record"
    );
    let matches = platform_sample
        .iter()
        .filter(|id| registry_hashes.contains(&identity_hash(id, seed)))
        .count();
    matches as f64 / platform_sample.len() as f64
}
