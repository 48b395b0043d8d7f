//! Canonical identities, the duplicate-drop rule, and the seeded identity
//! hash both parties must reproduce byte-for-byte.
//!
//! The join key is `(first name, last name, day, month, year)`. Names are
//! uppercased with trailing punctuation stripped; a record matches across
//! parties only if all five fields are equal. The per-round hash is the
//! last 7 hex characters (28 bits) of SHA-256 over `salt || serialization`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Upper bound (exclusive) of [`HashValue`]: 16^7.
pub const HASH_SPACE: u32 = 1 << 28;

/// Reserved round index for the match-rate estimation seed, which is not
/// part of the round sequence.
pub const ESTIMATION_ROUND: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdentityError {
    /// The name field has no usable tokens.
    #[error("name has no tokens")]
    EmptyName,
    /// First and last name cannot be told apart from a single token.
    #[error("name has a single token; first and last name required")]
    SingleToken,
    /// Names may not contain the canonical field separator.
    #[error("name token contains the separator character '|'")]
    SeparatorInName,
    #[error("birth day {0} outside 1-31")]
    InvalidDay(u16),
    #[error("birth month {0} outside 1-12")]
    InvalidMonth(u16),
    #[error("birth year {0} is not a 4-digit year")]
    InvalidYear(u16),
}

/// Normalized join key shared by both parties.
///
/// Construction normalizes the name tokens, so two identities built from
/// differently-cased or punctuated sources compare equal exactly when the
/// protocol would match them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalIdentity {
    first_name: String,
    last_name: String,
    birth_day: u8,
    birth_month: u8,
    birth_year: u16,
}

impl CanonicalIdentity {
    pub fn new(
        first_name: &str,
        last_name: &str,
        birth_day: u16,
        birth_month: u16,
        birth_year: u16,
    ) -> Result<Self, IdentityError> {
        if !(1..=31).contains(&birth_day) {
            return Err(IdentityError::InvalidDay(birth_day));
        }
        if !(1..=12).contains(&birth_month) {
            return Err(IdentityError::InvalidMonth(birth_month));
        }
        if !(1000..=9999).contains(&birth_year) {
            return Err(IdentityError::InvalidYear(birth_year));
        }
        Ok(Self {
            first_name: normalize_token(first_name)?,
            last_name: normalize_token(last_name)?,
            birth_day: birth_day as u8,
            birth_month: birth_month as u8,
            birth_year,
        })
    }

    pub fn first_name(&self) -> &str {
        &self.first_name
    }

    pub fn last_name(&self) -> &str {
        &self.last_name
    }

    pub fn birth_day(&self) -> u8 {
        self.birth_day
    }

    pub fn birth_month(&self) -> u8 {
        self.birth_month
    }

    pub fn birth_year(&self) -> u16 {
        self.birth_year
    }

    /// Canonical byte serialization: `FIRST|LAST|DD-MM-YYYY`.
    ///
    /// This exact layout is hashed by both parties; equal identities
    /// serialize identically.
    pub fn serialization(&self) -> String {
        format!(
            "{}|{}|{:02}-{:02}-{:04}",
            self.first_name, self.last_name, self.birth_day, self.birth_month, self.birth_year
        )
    }
}

impl fmt::Display for CanonicalIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialization())
    }
}

/// Uppercase a name token and strip trailing commas/periods.
///
/// No accent folding: matching is exact-string, so aggressive
/// normalization would change match semantics.
fn normalize_token(token: &str) -> Result<String, IdentityError> {
    let trimmed = token.trim().trim_end_matches(['.', ',']);
    if trimmed.is_empty() {
        return Err(IdentityError::EmptyName);
    }
    if trimmed.contains('|') {
        return Err(IdentityError::SeparatorInName);
    }
    Ok(trimmed.to_uppercase())
}

/// Split a free-text name into `(first_name, last_name)`.
///
/// First whitespace token and last whitespace token, normalized. This is
/// the naive rule the protocol uses: `"First M. Last"` works, honorific
/// forms like `"The Illustrious First M. Last, Esquire"` do not, and a
/// single-token name cannot be split at all.
pub fn canonicalize_name(raw_name: &str) -> Result<(String, String), IdentityError> {
    let mut tokens = raw_name.split_whitespace();
    let first = tokens.next().ok_or(IdentityError::EmptyName)?;
    let last = tokens.next_back().ok_or(IdentityError::SingleToken)?;
    Ok((normalize_token(first)?, normalize_token(last)?))
}

/// Remove every record whose identity occurs more than once.
///
/// All occurrences of a duplicated identity are dropped, not just the
/// extras: a duplicated key is ambiguous on either side of the protocol.
/// Returns the retained records in input order and the number dropped.
pub fn deduplicate<R>(
    records: Vec<R>,
    identity_of: impl Fn(&R) -> &CanonicalIdentity,
) -> (Vec<R>, usize) {
    let mut counts: HashMap<CanonicalIdentity, u32> = HashMap::with_capacity(records.len());
    for record in &records {
        *counts.entry(identity_of(record).clone()).or_insert(0) += 1;
    }
    let input_len = records.len();
    let retained: Vec<R> = records
        .into_iter()
        .filter(|r| counts[identity_of(r)] == 1)
        .collect();
    let dropped = input_len - retained.len();
    (retained, dropped)
}

/// Per-round hashing seed agreed by both parties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSeed {
    round_index: u32,
    salt: Vec<u8>,
}

impl RoundSeed {
    pub fn new(round_index: u32, salt: impl Into<Vec<u8>>) -> Self {
        Self {
            round_index,
            salt: salt.into(),
        }
    }

    /// Seed for aggregate match-rate estimation, kept distinct from every
    /// round salt by the `est:` prefix.
    pub fn estimation(label: &str) -> Self {
        Self {
            round_index: ESTIMATION_ROUND,
            salt: format!("est:{label}").into_bytes(),
        }
    }

    pub fn round_index(&self) -> u32 {
        self.round_index
    }

    pub fn salt(&self) -> &[u8] {
        &self.salt
    }

    /// Short public identifier of the salt, safe to embed in the wire
    /// artifact: parties compare fingerprints without exposing the salt.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(&self.salt);
        to_hex(&digest[..6])
    }
}

/// Derive the salt for one round from the shared master seed.
///
/// Both parties run this with the same `master_seed`, so the sequence of
/// salts agrees without any further exchange. The salt is rendered as a
/// fixed-width hex string.
pub fn derive_round_salt(master_seed: u64, round_index: u32) -> RoundSeed {
    let mut hasher = Sha256::new();
    hasher.update(b"grouplink.round-salt");
    hasher.update(master_seed.to_be_bytes());
    hasher.update(round_index.to_be_bytes());
    let digest = hasher.finalize();
    RoundSeed::new(round_index, to_hex(&digest[..8]).into_bytes())
}

/// 28-bit identity hash: the last 7 hex characters of SHA-256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashValue(u32);

impl HashValue {
    pub fn new(value: u32) -> Self {
        assert!(value < HASH_SPACE, "hash value outside 28-bit range");
        Self(value)
    }

    pub fn value(&self) -> u32 {
        self.0
    }
}

/// Seeded identity hash both parties reproduce byte-for-byte.
///
/// `SHA-256(salt || serialization)`, truncated to the last 7 hex
/// characters of the digest (equivalently, the low 28 bits of the final
/// four digest bytes).
pub fn identity_hash(id: &CanonicalIdentity, seed: &RoundSeed) -> HashValue {
    let mut hasher = Sha256::new();
    hasher.update(seed.salt());
    hasher.update(id.serialization().as_bytes());
    let digest = hasher.finalize();
    let value = (u32::from(digest[28] & 0x0F) << 24)
        | (u32::from(digest[29]) << 16)
        | (u32::from(digest[30]) << 8)
        | u32::from(digest[31]);
    HashValue(value)
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------------------
// Input records and CSV interfaces
// ---------------------------------------------------------------------------

/// Registry-side record: identity plus the behavior label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryRecord {
    pub identity: CanonicalIdentity,
    pub voted: bool,
}

/// Platform-side record: opaque user id plus identity, with an optional
/// categorical attribute for grouped reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatformRecord {
    pub user_id: String,
    pub identity: CanonicalIdentity,
    pub attribute: Option<String>,
}

/// Rows dropped before matching, by reason.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropStats {
    pub input_rows: usize,
    pub unparseable: usize,
    pub duplicates: usize,
}

impl DropStats {
    pub fn retained(&self) -> usize {
        self.input_rows - self.unparseable - self.duplicates
    }
}

#[derive(Debug, Error)]
pub enum FileFormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    Header {
        path: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path}: duplicate user_id {user_id:?} with distinct identities")]
    DuplicateUserId { path: String, user_id: String },
    #[error("{path}: missing attribute column {column:?}")]
    MissingAttribute { path: String, column: String },
}

const REGISTRY_HEADER: [&str; 6] = [
    "first_name",
    "last_name",
    "birth_day",
    "birth_month",
    "birth_year",
    "voted",
];
const PLATFORM_HEADER: [&str; 5] = ["user_id", "name", "birth_day", "birth_month", "birth_year"];

/// Read and canonicalize a registry CSV
/// (`first_name,last_name,birth_day,birth_month,birth_year,voted`).
///
/// Rows that fail canonicalization (bad date fields, empty names, a
/// `voted` value other than 0/1) are dropped and counted; duplicate
/// identities are then removed under the drop-all rule.
pub fn read_registry_csv(path: &Path) -> Result<(Vec<RegistryRecord>, DropStats), FileFormatError> {
    let mut reader = open_csv(path)?;
    check_header(path, &mut reader, &REGISTRY_HEADER, false)?;

    let mut stats = DropStats::default();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|source| FileFormatError::Csv {
            path: display_path(path),
            source,
        })?;
        stats.input_rows += 1;
        match parse_registry_row(&row) {
            Some(record) => records.push(record),
            None => stats.unparseable += 1,
        }
    }
    let (retained, dropped) = deduplicate(records, |r: &RegistryRecord| &r.identity);
    stats.duplicates = dropped;
    Ok((retained, stats))
}

fn parse_registry_row(row: &csv::StringRecord) -> Option<RegistryRecord> {
    let identity = CanonicalIdentity::new(
        row.get(0)?,
        row.get(1)?,
        row.get(2)?.trim().parse().ok()?,
        row.get(3)?.trim().parse().ok()?,
        row.get(4)?.trim().parse().ok()?,
    )
    .ok()?;
    let voted = match row.get(5)?.trim() {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    Some(RegistryRecord { identity, voted })
}

/// Read and canonicalize a platform CSV
/// (`user_id,name,birth_day,birth_month,birth_year`, extra columns
/// permitted).
///
/// The free-text `name` column is split by the first-token/last-token
/// rule. When `attribute_column` names one of the extra columns, its
/// value is carried on each record for grouped turnout reporting.
pub fn read_platform_csv(
    path: &Path,
    attribute_column: Option<&str>,
) -> Result<(Vec<PlatformRecord>, DropStats), FileFormatError> {
    let mut reader = open_csv(path)?;
    let headers = check_header(path, &mut reader, &PLATFORM_HEADER, true)?;
    let attribute_idx = match attribute_column {
        Some(col) => Some(headers.iter().position(|h| h == col).ok_or_else(|| {
            FileFormatError::MissingAttribute {
                path: display_path(path),
                column: col.to_string(),
            }
        })?),
        None => None,
    };

    let mut stats = DropStats::default();
    let mut records = Vec::new();
    let mut seen_user: HashMap<String, CanonicalIdentity> = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|source| FileFormatError::Csv {
            path: display_path(path),
            source,
        })?;
        stats.input_rows += 1;
        match parse_platform_row(&row, attribute_idx) {
            Some(record) => {
                if let Some(previous) = seen_user.get(&record.user_id) {
                    if *previous != record.identity {
                        return Err(FileFormatError::DuplicateUserId {
                            path: display_path(path),
                            user_id: record.user_id,
                        });
                    }
                }
                seen_user.insert(record.user_id.clone(), record.identity.clone());
                records.push(record);
            }
            None => stats.unparseable += 1,
        }
    }
    let (retained, dropped) = deduplicate(records, |r: &PlatformRecord| &r.identity);
    stats.duplicates = dropped;
    Ok((retained, stats))
}

fn parse_platform_row(row: &csv::StringRecord, attribute_idx: Option<usize>) -> Option<PlatformRecord> {
    let user_id = row.get(0)?.trim();
    if user_id.is_empty() {
        return None;
    }
    let (first, last) = canonicalize_name(row.get(1)?).ok()?;
    let identity = CanonicalIdentity::new(
        &first,
        &last,
        row.get(2)?.trim().parse().ok()?,
        row.get(3)?.trim().parse().ok()?,
        row.get(4)?.trim().parse().ok()?,
    )
    .ok()?;
    let attribute = attribute_idx.and_then(|i| row.get(i)).map(str::to_string);
    Some(PlatformRecord {
        user_id: user_id.to_string(),
        identity,
        attribute,
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, FileFormatError> {
    let file = std::fs::File::open(path).map_err(|source| FileFormatError::Io {
        path: display_path(path),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
    allow_extra: bool,
) -> Result<Vec<String>, FileFormatError> {
    let headers: Vec<String> = reader
        .headers()
        .map_err(|source| FileFormatError::Csv {
            path: display_path(path),
            source,
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let prefix_ok = headers.len() >= expected.len()
        && headers.iter().zip(expected).all(|(h, e)| h == e);
    let len_ok = allow_extra || headers.len() == expected.len();
    if !prefix_ok || !len_ok {
        return Err(FileFormatError::Header {
            path: display_path(path),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: headers,
        });
    }
    Ok(headers)
}

fn display_path(path: &Path) -> String {
    path.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(first: &str, last: &str, d: u16, m: u16, y: u16) -> CanonicalIdentity {
        CanonicalIdentity::new(first, last, d, m, y).unwrap()
    }

    #[test]
    fn canonicalize_takes_first_and_last_tokens() {
        assert_eq!(
            canonicalize_name("First M. Last").unwrap(),
            ("FIRST".to_string(), "LAST".to_string())
        );
        assert_eq!(
            canonicalize_name("Ann Lee").unwrap(),
            ("ANN".to_string(), "LEE".to_string())
        );
        // The naive tokenization rule, including its known failure mode.
        assert_eq!(
            canonicalize_name("The Illustrious First M. Last, Esquire").unwrap(),
            ("THE".to_string(), "ESQUIRE".to_string())
        );
    }

    #[test]
    fn canonicalize_rejects_degenerate_names() {
        assert_eq!(canonicalize_name(""), Err(IdentityError::EmptyName));
        assert_eq!(canonicalize_name("   "), Err(IdentityError::EmptyName));
        assert_eq!(canonicalize_name("Cher"), Err(IdentityError::SingleToken));
        assert_eq!(canonicalize_name("a |b"), Err(IdentityError::SeparatorInName));
    }

    #[test]
    fn canonicalize_strips_trailing_punctuation() {
        assert_eq!(
            canonicalize_name("Ann Lee,").unwrap(),
            ("ANN".to_string(), "LEE".to_string())
        );
        assert_eq!(
            canonicalize_name("ann. lee.").unwrap(),
            ("ANN".to_string(), "LEE".to_string())
        );
    }

    #[test]
    fn identity_validates_date_fields() {
        assert_eq!(
            CanonicalIdentity::new("A", "B", 0, 1, 1970),
            Err(IdentityError::InvalidDay(0))
        );
        assert_eq!(
            CanonicalIdentity::new("A", "B", 32, 1, 1970),
            Err(IdentityError::InvalidDay(32))
        );
        assert_eq!(
            CanonicalIdentity::new("A", "B", 1, 13, 1970),
            Err(IdentityError::InvalidMonth(13))
        );
        assert_eq!(
            CanonicalIdentity::new("A", "B", 1, 12, 970),
            Err(IdentityError::InvalidYear(970))
        );
    }

    #[test]
    fn serialization_is_zero_padded_and_uppercase() {
        let id = identity("john", "smith", 5, 1, 1970);
        assert_eq!(id.serialization(), "JOHN|SMITH|05-01-1970");
    }

    #[test]
    fn deduplicate_drops_all_occurrences() {
        let a = identity("A", "A", 1, 1, 1970);
        let b = identity("B", "B", 2, 2, 1980);
        let c = identity("C", "C", 3, 3, 1990);
        let input = vec![a.clone(), b.clone(), b.clone(), c.clone()];
        let (retained, dropped) = deduplicate(input, |i| i);
        assert_eq!(retained, vec![a, c]);
        assert_eq!(dropped, 2);
    }

    #[test]
    fn deduplicate_empty_input() {
        let (retained, dropped) = deduplicate(Vec::<CanonicalIdentity>::new(), |i| i);
        assert!(retained.is_empty());
        assert_eq!(dropped, 0);
    }

    #[test]
    fn deduplicate_is_idempotent() {
        let a = identity("A", "A", 1, 1, 1970);
        let b = identity("B", "B", 2, 2, 1980);
        let input = vec![a.clone(), a, b];
        let (retained, _) = deduplicate(input, |i| i);
        let (again, dropped) = deduplicate(retained.clone(), |i| i);
        assert_eq!(again, retained);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn half_percent_duplication_drops_one_percent_of_rows() {
        // 9,900 unique identities plus 50 identities appearing twice:
        // 10,000 rows, 100 of which are dropped under the drop-all rule.
        let mut records = Vec::new();
        for i in 0..9950u32 {
            let id = identity(&format!("F{i}"), &format!("L{i}"), 1, 1, 1970);
            records.push(id.clone());
            if i < 50 {
                records.push(id);
            }
        }
        assert_eq!(records.len(), 10_000);
        let (retained, dropped) = deduplicate(records, |i| i);
        assert_eq!(dropped, 100);
        assert_eq!(retained.len(), 9_900);
    }

    // Golden vectors frozen from an independent SHA-256 reference
    // implementation (Python hashlib over the documented serialization).
    #[test]
    fn identity_hash_matches_reference_vectors() {
        let john = identity("John", "Smith", 15, 1, 1970);
        let ann = identity("Ann", "Lee", 3, 11, 1988);
        let cases = [
            (&john, "round-0", 251_743_254u32),
            (&john, "round-1", 51_430_565),
            (&ann, "round-0", 128_363_997),
            (&ann, "round-1", 217_810_104),
        ];
        for (id, salt, expected) in cases {
            let seed = RoundSeed::new(0, salt.as_bytes());
            assert_eq!(identity_hash(id, &seed).value(), expected, "salt {salt}");
        }
    }

    #[test]
    fn estimation_seed_matches_reference_vector() {
        let john = identity("John", "Smith", 15, 1, 1970);
        let seed = RoundSeed::estimation("match-rate");
        assert_eq!(identity_hash(&john, &seed).value(), 15_644_233);
    }

    #[test]
    fn identity_hash_is_deterministic() {
        let id = identity("John", "Smith", 15, 1, 1970);
        let seed = derive_round_salt(42, 0);
        let first = identity_hash(&id, &seed);
        for _ in 0..100 {
            assert_eq!(identity_hash(&id, &seed), first);
        }
    }

    #[test]
    fn round_salts_are_fixed_width_and_stable() {
        let seed = derive_round_salt(42, 0);
        assert_eq!(seed.salt().len(), 16);
        assert_eq!(seed, derive_round_salt(42, 0));
        assert_ne!(seed.salt(), derive_round_salt(42, 1).salt());
        assert_ne!(seed.salt(), derive_round_salt(43, 0).salt());
    }

    #[test]
    fn estimation_salt_is_distinct_from_round_salts() {
        let est = RoundSeed::estimation("e");
        assert!(est.salt().starts_with(b"est:"));
        // Round salts are pure hex, so the prefix can never collide.
        for round in 0..64 {
            assert_ne!(est.salt(), derive_round_salt(7, round).salt());
        }
    }

    #[test]
    fn fingerprint_is_short_and_salt_dependent() {
        let a = derive_round_salt(42, 0).fingerprint();
        let b = derive_round_salt(42, 1).fingerprint();
        assert_eq!(a.len(), 12);
        assert_ne!(a, b);
    }

    #[test]
    fn registry_csv_round_trip_and_drop_stats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.csv");
        std::fs::write(
            &path,
            "first_name,last_name,birth_day,birth_month,birth_year,voted\n\
             Ann,Lee,3,11,1988,1\n\
             John,Smith,15,1,1970,0\n\
             John,Smith,15,1,1970,1\n\
             Bad,Date,42,1,1970,1\n\
             Bad,Vote,1,1,1970,yes\n",
        )
        .unwrap();
        let (records, stats) = read_registry_csv(&path).unwrap();
        assert_eq!(stats.input_rows, 5);
        assert_eq!(stats.unparseable, 2);
        assert_eq!(stats.duplicates, 2);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].identity.first_name(), "ANN");
        assert!(records[0].voted);
    }

    #[test]
    fn registry_csv_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.csv");
        std::fs::write(&path, "first,last\nA,B\n").unwrap();
        assert!(matches!(
            read_registry_csv(&path),
            Err(FileFormatError::Header { .. })
        ));
    }

    #[test]
    fn platform_csv_parses_names_and_attributes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("platform.csv");
        std::fs::write(
            &path,
            "user_id,name,birth_day,birth_month,birth_year,age_band\n\
             u1,Ann Lee,3,11,1988,25-34\n\
             u2,Cher,1,1,1950,65+\n\
             u3,First M. Last,2,2,1982,35-44\n",
        )
        .unwrap();
        let (records, stats) = read_platform_csv(&path, Some("age_band")).unwrap();
        assert_eq!(stats.unparseable, 1); // single-token name
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].identity.last_name(), "LEE");
        assert_eq!(records[0].attribute.as_deref(), Some("25-34"));
        assert_eq!(records[1].identity.first_name(), "FIRST");
    }

    #[test]
    fn platform_csv_rejects_conflicting_user_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("platform.csv");
        std::fs::write(
            &path,
            "user_id,name,birth_day,birth_month,birth_year\n\
             u1,Ann Lee,3,11,1988\n\
             u1,Bob Roy,4,5,1971\n",
        )
        .unwrap();
        assert!(matches!(
            read_platform_csv(&path, None),
            Err(FileFormatError::DuplicateUserId { .. })
        ));
    }

    // Cross-party agreement: an identity written to a registry CSV,
    // re-parsed on the other side, hashes to the same value.
    #[test]
    fn hash_agrees_after_csv_transport() {
        let id = identity("Ann", "Lee", 3, 11, 1988);
        let seed = derive_round_salt(99, 7);
        let local = identity_hash(&id, &seed);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(
            &path,
            "first_name,last_name,birth_day,birth_month,birth_year,voted\nAnn,Lee,3,11,1988,1\n",
        )
        .unwrap();
        let (records, _) = read_registry_csv(&path).unwrap();
        assert_eq!(identity_hash(&records[0].identity, &seed), local);
    }
}
