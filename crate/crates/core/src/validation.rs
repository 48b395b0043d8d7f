//! Truth-table evaluation against ground truth, binomial null confidence
//! intervals, and aggregate turnout reporting.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::calibration::ConditionalAccuracy;
use crate::classifier::ClassLabel;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("no truth label for evaluated user {user_id:?}")]
    MissingTruth { user_id: String },
    #[error("no grouping attribute for matched user {user_id:?}")]
    MissingAttribute { user_id: String },
    #[error("report io: {0}")]
    Io(String),
}

/// 3x3 contingency table of true class (rows) against predicted class
/// (columns), both in the order abstainer, voter, unmatched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TruthTable {
    counts: [[u64; 3]; 3],
}

impl TruthTable {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts }
    }

    pub fn add(&mut self, truth: ClassLabel, predicted: ClassLabel) {
        self.counts[truth.code() as usize][predicted.code() as usize] += 1;
    }

    pub fn count(&self, truth: ClassLabel, predicted: ClassLabel) -> u64 {
        self.counts[truth.code() as usize][predicted.code() as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Records per true class.
    pub fn row_sum(&self, truth: ClassLabel) -> u64 {
        self.counts[truth.code() as usize].iter().sum()
    }

    /// Records per predicted class.
    pub fn column_sum(&self, predicted: ClassLabel) -> u64 {
        self.counts
            .iter()
            .map(|row| row[predicted.code() as usize])
            .sum()
    }
}

/// Tally predictions against ground truth. Every evaluated user must have
/// a truth label; sampling the evaluation subset is the caller's concern.
pub fn build_truth_table<'a>(
    predictions: impl IntoIterator<Item = (&'a str, ClassLabel)>,
    truth: &HashMap<String, ClassLabel>,
) -> Result<TruthTable, ValidationError> {
    let mut table = TruthTable::default();
    for (user_id, predicted) in predictions {
        let actual = truth.get(user_id).ok_or_else(|| ValidationError::MissingTruth {
            user_id: user_id.to_string(),
        })?;
        table.add(*actual, predicted);
    }
    Ok(table)
}

/// Column-wise diagonal ratios: `Pr(truth = c | predicted = c)` per
/// class, `None` for classes never predicted.
pub fn conditional_probabilities(table: &TruthTable) -> ConditionalAccuracy {
    let ratio = |class: ClassLabel| {
        let total = table.column_sum(class);
        (total > 0).then(|| table.count(class, class) as f64 / total as f64)
    };
    ConditionalAccuracy {
        abstainer: ratio(ClassLabel::MatchedAbstainer),
        voter: ratio(ClassLabel::MatchedVoter),
        unmatched: ratio(ClassLabel::Unmatched),
    }
}

/// Central (equal-tail) exact interval of the observed accuracy under a
/// `Binomial(n_predicted, p0)` null: quantiles at `(1-level)/2` and
/// `1-(1-level)/2`, divided by `n_predicted`.
pub fn null_accuracy_ci(n_predicted: usize, p0: f64, level: f64) -> (f64, f64) {
    assert!(n_predicted >= 1, "interval needs at least one prediction");
    assert!(p0 > 0.0 && p0 < 1.0, "null accuracy must be interior");
    assert!(level > 0.0 && level < 1.0, "confidence level must be interior");
    let n = n_predicted as u64;
    let tail = (1.0 - level) / 2.0;
    let lo = binomial_quantile(n, p0, tail);
    let hi = binomial_quantile(n, p0, 1.0 - tail);
    (lo as f64 / n as f64, hi as f64 / n as f64)
}

/// Smallest `k` with `Binomial(n, p) CDF(k) >= alpha`.
///
/// Weights are built by the pmf ratio recursion outward from the mode,
/// which stays in range even where `pmf(0)` underflows; mass more than
/// ~9 sigma from the mode is below 1e-18 of the mode weight and cannot
/// move a quantile at the alphas used here.
fn binomial_quantile(n: u64, p: f64, alpha: f64) -> u64 {
    let q = 1.0 - p;
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;

    const CUTOFF: f64 = 1e-18;
    // Weights relative to the mode. Downward:
    // pmf(k-1) / pmf(k) = (k q) / ((n - k + 1) p); lower[i] sits at mode-1-i.
    let mut lower = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k > 0 && w > CUTOFF {
        w *= (k as f64 * q) / ((n - k + 1) as f64 * p);
        lower.push(w);
        k -= 1;
    }
    // Upward: pmf(k+1) / pmf(k) = ((n - k) p) / ((k + 1) q).
    let mut upper = Vec::new();
    let mut w = 1.0;
    let mut k = mode;
    while k < n && w > CUTOFF {
        w *= ((n - k) as f64 * p) / ((k + 1) as f64 * q);
        upper.push(w);
        k += 1;
    }

    let total: f64 = lower.iter().sum::<f64>() + 1.0 + upper.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &w) in lower.iter().enumerate().rev() {
        acc += w;
        if acc / total >= alpha {
            return mode - 1 - i as u64;
        }
    }
    acc += 1.0;
    if acc / total >= alpha {
        return mode;
    }
    for (i, &w) in upper.iter().enumerate() {
        acc += w;
        if acc / total >= alpha {
            return mode + 1 + i as u64;
        }
    }
    n
}

/// Turnout of the matched sample within one attribute group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnoutCell {
    /// Classified voters over classified matched records.
    pub matched_turnout: f64,
    pub matched_count: usize,
}

/// Turnout of matched records grouped by a categorical attribute.
///
/// Unmatched records never enter the denominators; attribute keys with no
/// matched records are omitted.
pub fn grouped_turnout_report<'a>(
    predictions: impl IntoIterator<Item = (&'a str, ClassLabel)>,
    attributes: &HashMap<String, String>,
) -> Result<BTreeMap<String, TurnoutCell>, ValidationError> {
    let mut tallies: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (user_id, label) in predictions {
        if !label.is_matched() {
            continue;
        }
        let key = attributes
            .get(user_id)
            .ok_or_else(|| ValidationError::MissingAttribute {
                user_id: user_id.to_string(),
            })?;
        let (voters, matched) = tallies.entry(key.clone()).or_insert((0, 0));
        *matched += 1;
        if label == ClassLabel::MatchedVoter {
            *voters += 1;
        }
    }
    Ok(tallies
        .into_iter()
        .map(|(key, (voters, matched))| {
            (
                key,
                TurnoutCell {
                    matched_turnout: voters as f64 / matched as f64,
                    matched_count: matched,
                },
            )
        })
        .collect())
}

/// Overall matched-sample turnout: classified voters over all classified
/// matched records, `None` when nothing matched.
pub fn matched_turnout(labels: impl IntoIterator<Item = ClassLabel>) -> Option<f64> {
    let mut voters = 0usize;
    let mut matched = 0usize;
    for label in labels {
        if label.is_matched() {
            matched += 1;
            voters += usize::from(label == ClassLabel::MatchedVoter);
        }
    }
    (matched > 0).then(|| voters as f64 / matched as f64)
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

/// Truth-table CSV: rows are true classes, columns predicted classes.
pub fn write_truth_table_csv(path: &Path, table: &TruthTable) -> Result<(), ValidationError> {
    let mut out = String::from("true_class,abstainer,voter,unmatched\n");
    for truth in ClassLabel::ALL {
        out.push_str(truth.as_str());
        for predicted in ClassLabel::ALL {
            out.push_str(&format!(",{}", table.count(truth, predicted)));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| ValidationError::Io(format!("{}: {e}", path.display())))
}

/// Conditional-probability summary: `class,probability,ci_lo,ci_hi`, one
/// row per class, with `NA` markers for undefined entries. The interval
/// is the binomial null CI at `p0` for that class's prediction count.
pub fn write_conditional_report(
    path: &Path,
    table: &TruthTable,
    p0: f64,
    level: f64,
) -> Result<(), ValidationError> {
    let probabilities = conditional_probabilities(table);
    let mut file = std::fs::File::create(path)
        .map_err(|e| ValidationError::Io(format!("{}: {e}", path.display())))?;
    let io_err = |e: std::io::Error| ValidationError::Io(e.to_string());
    writeln!(file, "class,probability,ci_lo,ci_hi").map_err(io_err)?;
    for class in ClassLabel::ALL {
        let n_predicted = table.column_sum(class) as usize;
        let (probability, lo, hi) = match probabilities.of(class) {
            Some(p) => {
                let (lo, hi) = null_accuracy_ci(n_predicted, p0, level);
                (format!("{p}"), format!("{lo}"), format!("{hi}"))
            }
            None => ("NA".into(), "NA".into(), "NA".into()),
        };
        writeln!(file, "{},{probability},{lo},{hi}", class.as_str()).map_err(io_err)?;
    }
    Ok(())
}

/// Grouped turnout CSV: `key,matched_turnout,matched_count`.
pub fn write_turnout_report(
    path: &Path,
    report: &BTreeMap<String, TurnoutCell>,
) -> Result<(), ValidationError> {
    let mut out = String::from("key,matched_turnout,matched_count\n");
    for (key, cell) in report {
        out.push_str(&format!(
            "{key},{},{}\n",
            cell.matched_turnout, cell.matched_count
        ));
    }
    std::fs::write(path, out).map_err(|e| ValidationError::Io(format!("{}: {e}", path.display())))
}
