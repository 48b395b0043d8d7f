//! Platform-side per-round work: hash platform records with the round
//! seed, look their groups up in the registry's table, and accumulate
//! per-user draw vectors until the quota is met.
//!
//! Rounds where a record's group was discarded contribute nothing, so the
//! pipeline schedules extra rounds; the classifier later uses exactly the
//! first `m` draws per record, restoring the uniform-`m` likelihood model.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grouping::{group_id, GroupCountTable, GroupParams};
use crate::identity::{identity_hash, PlatformRecord, RoundSeed};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DrawsError {
    #[error("table does not match local configuration: {0}")]
    ParamsMismatch(String),
    #[error("round {0} already ingested")]
    DuplicateRound(u32),
    #[error("draw for unknown user {0:?}")]
    UnknownUser(String),
    #[error("draw store io: {0}")]
    Io(String),
    #[error("draw store format: {0}")]
    Format(String),
}

/// One user's accumulated draws, ordered by round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawVector {
    pub user_id: String,
    /// `(round_index, y)` pairs, at most one per round, each `y` in `[0, g]`.
    pub draws: Vec<(u32, u32)>,
}

/// Draw quotas for the two classification stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    /// Draws required per record before stage-1 classification.
    pub quota_stage1: usize,
    /// Additional draws required for the redo set before stage 2.
    pub quota_stage2: usize,
    /// Rounds executed so far (bookkeeping snapshot).
    pub rounds_executed: usize,
}

impl RoundPlan {
    pub fn new(quota_stage1: usize, quota_stage2: usize) -> Self {
        assert!(quota_stage1 >= 1, "stage-1 quota must be at least 1");
        Self {
            quota_stage1,
            quota_stage2,
            rounds_executed: 0,
        }
    }

    pub fn total_quota(&self) -> usize {
        self.quota_stage1 + self.quota_stage2
    }
}

/// Compute this round's draws: each platform record whose group id
/// appears in the table receives that group's voter count.
///
/// Records in discarded groups receive nothing this round. The table must
/// agree with the local configuration and the round seed; any divergence
/// is a params mismatch.
pub fn assign_draws(
    platform: &[PlatformRecord],
    table: &GroupCountTable,
    seed: &RoundSeed,
    expected: &GroupParams,
) -> Result<Vec<(String, u32)>, DrawsError> {
    if table.params() != expected {
        return Err(DrawsError::ParamsMismatch(format!(
            "table has g={} n_registry={}, local config has g={} n_registry={}",
            table.params().g(),
            table.params().n_registry(),
            expected.g(),
            expected.n_registry()
        )));
    }
    if table.round_index() != seed.round_index() {
        return Err(DrawsError::ParamsMismatch(format!(
            "table is for round {}, seed is for round {}",
            table.round_index(),
            seed.round_index()
        )));
    }
    if table.salt_id() != seed.fingerprint() {
        return Err(DrawsError::ParamsMismatch(format!(
            "salt fingerprint {} does not match locally derived {}",
            table.salt_id(),
            seed.fingerprint()
        )));
    }
    let mut out = Vec::new();
    for record in platform {
        let gid = group_id(identity_hash(&record.identity, seed), table.params());
        if let Some(count) = table.voter_count(gid) {
            out.push((record.user_id.clone(), count));
        }
    }
    Ok(out)
}

/// Accumulated draw vectors for a fixed platform record set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DrawStore {
    draws: BTreeMap<String, Vec<(u32, u32)>>,
    rounds: BTreeSet<u32>,
}

impl DrawStore {
    /// The record set is fixed before round 0; every user starts with an
    /// empty vector so quota checks see users that never drew.
    pub fn new(user_ids: impl IntoIterator<Item = String>) -> Self {
        Self {
            draws: user_ids.into_iter().map(|id| (id, Vec::new())).collect(),
            rounds: BTreeSet::new(),
        }
    }

    /// Append one round's draws. A round may be ingested once.
    pub fn accumulate(
        &mut self,
        round_draws: &[(String, u32)],
        round_index: u32,
    ) -> Result<(), DrawsError> {
        if self.rounds.contains(&round_index) {
            return Err(DrawsError::DuplicateRound(round_index));
        }
        for (user_id, y) in round_draws {
            let vector = self
                .draws
                .get_mut(user_id)
                .ok_or_else(|| DrawsError::UnknownUser(user_id.clone()))?;
            // Keep round order even if rounds arrive out of sequence.
            let pos = vector.partition_point(|&(r, _)| r < round_index);
            vector.insert(pos, (round_index, *y));
        }
        self.rounds.insert(round_index);
        Ok(())
    }

    pub fn draws_of(&self, user_id: &str) -> Option<&[(u32, u32)]> {
        self.draws.get(user_id).map(Vec::as_slice)
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.draws.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(u32, u32)])> {
        self.draws.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn rounds_ingested(&self) -> usize {
        self.rounds.len()
    }

    pub fn contains_round(&self, round_index: u32) -> bool {
        self.rounds.contains(&round_index)
    }

    /// Highest ingested round index plus one; the next fresh round.
    pub fn next_round(&self) -> u32 {
        self.rounds.last().map_or(0, |r| r + 1)
    }

    /// Number of users in `record_set` still below `quota` draws.
    pub fn deficient(&self, quota: usize, record_set: impl IntoIterator<Item = impl AsRef<str>>) -> usize {
        record_set
            .into_iter()
            .filter(|id| self.draws.get(id.as_ref()).is_none_or(|v| v.len() < quota))
            .count()
    }
}

/// Estimate the additional rounds needed for every user in `record_set`
/// to reach `quota` draws.
///
/// Uses the empirical per-round draw probability observed so far, falling
/// back to `fallback_p` (e.g. the occupancy-model retention probability)
/// before any rounds have run. This is a scheduling estimate only; the
/// pipeline loops until the quota condition literally holds.
pub fn plan_rounds(
    store: &DrawStore,
    quota: usize,
    record_set: &[&str],
    fallback_p: f64,
) -> usize {
    let max_deficit = record_set
        .iter()
        .map(|id| quota.saturating_sub(store.draws_of(id).map_or(0, <[_]>::len)))
        .max()
        .unwrap_or(0);
    if max_deficit == 0 {
        return 0;
    }
    let rounds = store.rounds_ingested();
    let total_draws: usize = record_set
        .iter()
        .map(|id| store.draws_of(id).map_or(0, <[_]>::len))
        .sum();
    let p = if rounds > 0 && total_draws > 0 {
        total_draws as f64 / (record_set.len() * rounds) as f64
    } else {
        fallback_p
    };
    (max_deficit as f64 / p).ceil() as usize
}

/// Per-round draw probability implied by the occupancy model: the chance
/// a record's group is retained at exactly `g` registry members.
pub fn occupancy_draw_probability(g: u32) -> f64 {
    // Poisson(g) mass at g: e^-g g^g / g!.
    let g = f64::from(g);
    let mut ln = -g + g * g.ln();
    for k in 2..=(g as u64) {
        ln -= (k as f64).ln();
    }
    ln.exp()
}

// ---------------------------------------------------------------------------
// Draw store file: `user_id,round_index,y`, append-only across rounds.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct DrawRow {
    user_id: String,
    round_index: u32,
    y: u32,
}

/// Append one round's draws to the store file, creating it (with header)
/// if absent.
pub fn append_round_to_file(
    path: &Path,
    round_draws: &[(String, u32)],
    round_index: u32,
) -> Result<(), DrawsError> {
    let exists = path.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| DrawsError::Io(format!("{}: {e}", path.display())))?;
    let mut writer = csv::WriterBuilder::new()
        .has_headers(!exists)
        .from_writer(file);
    for (user_id, y) in round_draws {
        writer
            .serialize(DrawRow {
                user_id: user_id.clone(),
                round_index,
                y: *y,
            })
            .map_err(|e| DrawsError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| DrawsError::Io(e.to_string()))?;
    Ok(())
}

/// Load a draw store file into memory for the given record set.
pub fn load_draw_store(
    path: &Path,
    user_ids: impl IntoIterator<Item = String>,
) -> Result<DrawStore, DrawsError> {
    let mut store = DrawStore::new(user_ids);
    if !path.exists() {
        return Ok(store);
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| DrawsError::Io(format!("{}: {e}", path.display())))?;
    let mut by_round: BTreeMap<u32, Vec<(String, u32)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: DrawRow = row.map_err(|e| DrawsError::Format(e.to_string()))?;
        by_round
            .entry(row.round_index)
            .or_default()
            .push((row.user_id, row.y));
    }
    for (round_index, rows) in by_round {
        store.accumulate(&rows, round_index)?;
    }
    Ok(store)
}

/// Write a whole store to a fresh file (used when rebuilding, not for the
/// per-round append path).
pub fn save_draw_store(path: &Path, store: &DrawStore) -> Result<(), DrawsError> {
    let file = std::fs::File::create(path)
        .map_err(|e| DrawsError::Io(format!("{}: {e}", path.display())))?;
    let mut writer = std::io::BufWriter::new(file);
    writeln!(writer, "user_id,round_index,y").map_err(|e| DrawsError::Io(e.to_string()))?;
    let mut rows: Vec<(u32, &str, u32)> = Vec::new();
    for (user_id, draws) in store.iter() {
        for &(round, y) in draws {
            rows.push((round, user_id, y));
        }
    }
    rows.sort();
    for (round, user_id, y) in rows {
        writeln!(writer, "{user_id},{round},{y}").map_err(|e| DrawsError::Io(e.to_string()))?;
    }
    writer.flush().map_err(|e| DrawsError::Io(e.to_string()))?;
    Ok(())
}
