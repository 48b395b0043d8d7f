//! Registry-side per-round work: assign hashed identities to groups,
//! retain only exact-size groups, and emit the anonymous group count
//! table — the only artifact that ever crosses the party boundary.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::identity::{identity_hash, HashValue, RegistryRecord, RoundSeed, HASH_SPACE};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupingError {
    #[error("group size g must be at least 2, got {0}")]
    GroupSizeTooSmall(u32),
    #[error("registry too small: {n_registry} records cannot fill one group of {g}")]
    RegistryTooSmall { n_registry: usize, g: u32 },
    #[error("divisor {divisor} must be below the 28-bit hash space")]
    DivisorTooLarge { divisor: u64 },
    #[error("group count table is empty")]
    EmptyTable,
    #[error("malformed table {context}: {detail}")]
    TableFormat { context: String, detail: String },
    #[error("table io: {0}")]
    Io(String),
}

/// Group-assignment parameters shared by both parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupParams {
    n_registry: usize,
    g: u32,
    divisor: u32,
}

impl GroupParams {
    /// `divisor = floor(n_registry / g)`, so mean group occupancy sits at
    /// or slightly above `g`; the exact-size retention rule absorbs the
    /// remainder. The divisor must stay below the 28-bit hash space for
    /// the modulus to reach every group id.
    pub fn new(n_registry: usize, g: u32) -> Result<Self, GroupingError> {
        if g < 2 {
            return Err(GroupingError::GroupSizeTooSmall(g));
        }
        let divisor = n_registry as u64 / u64::from(g);
        if divisor < 1 {
            return Err(GroupingError::RegistryTooSmall { n_registry, g });
        }
        if divisor >= u64::from(HASH_SPACE) {
            return Err(GroupingError::DivisorTooLarge { divisor });
        }
        Ok(Self {
            n_registry,
            g,
            divisor: divisor as u32,
        })
    }

    pub fn n_registry(&self) -> usize {
        self.n_registry
    }

    pub fn g(&self) -> u32 {
        self.g
    }

    pub fn divisor(&self) -> u32 {
        self.divisor
    }
}

/// Group id of a hashed identity: the remainder modulo the divisor.
pub fn group_id(h: HashValue, params: &GroupParams) -> u32 {
    h.value() % params.divisor
}

/// Per-round anonymous artifact: retained group ids mapped to their voter
/// counts. Carries no identity, hash, or record-level information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupCountTable {
    round_index: u32,
    params: GroupParams,
    salt_id: String,
    group_counts: BTreeMap<u32, u32>,
}

impl GroupCountTable {
    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    /// Public fingerprint of the round salt, used by the platform to
    /// check seed agreement without the salt itself crossing the wire.
    pub fn salt_id(&self) -> &str {
        &self.salt_id
    }

    pub fn group_counts(&self) -> &BTreeMap<u32, u32> {
        &self.group_counts
    }

    pub fn voter_count(&self, group: u32) -> Option<u32> {
        self.group_counts.get(&group).copied()
    }

    pub fn len(&self) -> usize {
        self.group_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_counts.is_empty()
    }
}

/// Build one round's table: hash every registry record, keep only groups
/// with exactly `g` members, and record each retained group's voter count.
///
/// Per-record group assignments are discarded after counting; only the
/// aggregate table survives the round.
pub fn build_group_table(
    registry: &[RegistryRecord],
    seed: &RoundSeed,
    params: &GroupParams,
) -> GroupCountTable {
    assert_eq!(
        registry.len(),
        params.n_registry,
        "params.n_registry must equal the deduplicated registry size"
    );
    let mut members = vec![0u32; params.divisor as usize];
    let mut voters = vec![0u32; params.divisor as usize];
    for record in registry {
        let gid = group_id(identity_hash(&record.identity, seed), params) as usize;
        members[gid] += 1;
        if record.voted {
            voters[gid] += 1;
        }
    }
    let group_counts = members
        .iter()
        .enumerate()
        .filter(|&(_, &m)| m == params.g)
        .map(|(gid, _)| (gid as u32, voters[gid]))
        .collect();
    GroupCountTable {
        round_index: seed.round_index(),
        params: *params,
        salt_id: seed.fingerprint(),
        group_counts,
    }
}

/// Summary statistics of a round's table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableStats {
    pub retained_groups: usize,
    pub mean_voters_per_group: f64,
}

/// Mean voter count over retained groups; `mean / g` approximates the
/// registry turnout rate.
pub fn table_stats(table: &GroupCountTable) -> Result<TableStats, GroupingError> {
    if table.is_empty() {
        return Err(GroupingError::EmptyTable);
    }
    let total: u64 = table.group_counts.values().map(|&v| u64::from(v)).sum();
    Ok(TableStats {
        retained_groups: table.len(),
        mean_voters_per_group: total as f64 / table.len() as f64,
    })
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------
//
// Byte-exact inter-party file:
//
//   # round=<i> g=<g> n_registry=<N> divisor=<d> salt_id=<label>
//   <group_id>,<voter_count>
//   ...
//
// Rows sorted ascending by group id, `\n` line endings, trailing newline.

impl GroupCountTable {
    pub fn write_to(&self, mut writer: impl Write) -> Result<(), GroupingError> {
        let io_err = |e: std::io::Error| GroupingError::Io(e.to_string());
        writeln!(
            writer,
            "# round={} g={} n_registry={} divisor={} salt_id={}",
            self.round_index,
            self.params.g,
            self.params.n_registry,
            self.params.divisor,
            self.salt_id
        )
        .map_err(io_err)?;
        for (gid, count) in &self.group_counts {
            writeln!(writer, "{gid},{count}").map_err(io_err)?;
        }
        Ok(())
    }

    pub fn to_wire_string(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("in-memory write cannot fail");
        String::from_utf8(out).expect("wire format is ASCII")
    }

    pub fn read_from(reader: impl BufRead) -> Result<Self, GroupingError> {
        let malformed = |context: &str, detail: String| GroupingError::TableFormat {
            context: context.to_string(),
            detail,
        };
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| malformed("header", "empty file".into()))?
            .map_err(|e| GroupingError::Io(e.to_string()))?;
        let rest = header
            .strip_prefix("# ")
            .ok_or_else(|| malformed("header", format!("missing '# ' prefix: {header:?}")))?;

        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for part in rest.split(' ') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| malformed("header", format!("bad field {part:?}")))?;
            fields.insert(key, value);
        }
        let field = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| malformed("header", format!("missing {key}")))
        };
        let parse_num = |key: &str, value: &str| {
            value
                .parse::<u64>()
                .map_err(|_| malformed("header", format!("{key}={value:?} is not an integer")))
        };

        let round_index = parse_num("round", field("round")?)? as u32;
        let g = parse_num("g", field("g")?)? as u32;
        let n_registry = parse_num("n_registry", field("n_registry")?)? as usize;
        let divisor = parse_num("divisor", field("divisor")?)?;
        let salt_id = field("salt_id")?.to_string();

        let params = GroupParams::new(n_registry, g)?;
        if u64::from(params.divisor) != divisor {
            return Err(malformed(
                "header",
                format!(
                    "divisor {divisor} inconsistent with n_registry={n_registry} g={g} (expected {})",
                    params.divisor
                ),
            ));
        }

        let mut group_counts = BTreeMap::new();
        let mut previous: Option<u32> = None;
        for (line_no, line) in lines.enumerate() {
            let line = line.map_err(|e| GroupingError::Io(e.to_string()))?;
            let context = format!("row {}", line_no + 2);
            let (gid, count) = line
                .split_once(',')
                .ok_or_else(|| malformed(&context, format!("expected 'group_id,count': {line:?}")))?;
            let gid: u32 = gid
                .parse()
                .map_err(|_| malformed(&context, format!("bad group id {gid:?}")))?;
            let count: u32 = count
                .parse()
                .map_err(|_| malformed(&context, format!("bad count {count:?}")))?;
            if gid >= params.divisor {
                return Err(malformed(&context, format!("group id {gid} >= divisor")));
            }
            if count > g {
                return Err(malformed(&context, format!("voter count {count} > g")));
            }
            if previous.is_some_and(|p| p >= gid) {
                return Err(malformed(&context, "group ids not strictly ascending".into()));
            }
            previous = Some(gid);
            group_counts.insert(gid, count);
        }

        Ok(Self {
            round_index,
            params,
            salt_id,
            group_counts,
        })
    }
}
