//! `grouplink`: command-line orchestration of the two-party group-level
//! record-linkage protocol.
//!
//! Registry-side subcommands (`registry-prepare`, `registry-round`) never
//! read platform files and vice versa (`platform-prepare`,
//! `platform-ingest-round`, `classify`); everything crossing the party
//! boundary is an explicit file: group count tables, the registry
//! aggregates, estimation hashes, and the match-rate estimate.

mod config;

use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use grouplink_core::calibration::{
    accuracy_curve, calibrate, estimate_match_rate, AccuracyPoint, CalibrationError,
    CalibrationPlan, SimulationConfig,
};
use grouplink_core::classifier::{
    read_classification_csv, two_stage_classify, write_classification_csv, ClassLabel,
    ClassifierError, PopulationParams,
};
use grouplink_core::draws::{
    append_round_to_file, assign_draws, load_draw_store, occupancy_draw_probability, plan_rounds,
    DrawsError, RoundPlan,
};
use grouplink_core::grouping::{build_group_table, GroupCountTable, GroupParams, GroupingError};
use grouplink_core::identity::{
    derive_round_salt, identity_hash, read_platform_csv, read_registry_csv, CanonicalIdentity,
    DropStats, FileFormatError, HashValue, PlatformRecord, RegistryRecord, RoundSeed,
};
use grouplink_core::validation::{
    build_truth_table, conditional_probabilities, grouped_turnout_report, matched_turnout,
    write_conditional_report, write_truth_table_csv, write_turnout_report, ValidationError,
};

use config::ProtocolConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    FileFormat(String),
    #[error("{0}")]
    ParamsMismatch(String),
    #[error("{0}")]
    QuotaNotMet(String),
    #[error("{0}")]
    TargetUnreachable(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::FileFormat(_) => 2,
            CliError::ParamsMismatch(_) => 3,
            CliError::QuotaNotMet(_) => 4,
            CliError::TargetUnreachable(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<FileFormatError> for CliError {
    fn from(e: FileFormatError) -> Self {
        CliError::FileFormat(e.to_string())
    }
}

impl From<GroupingError> for CliError {
    fn from(e: GroupingError) -> Self {
        match e {
            GroupingError::TableFormat { .. } => CliError::FileFormat(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<DrawsError> for CliError {
    fn from(e: DrawsError) -> Self {
        match e {
            DrawsError::ParamsMismatch(_) | DrawsError::DuplicateRound(_) => {
                CliError::ParamsMismatch(e.to_string())
            }
            DrawsError::Format(_) => CliError::FileFormat(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        match e {
            ClassifierError::QuotaNotMet { .. } => CliError::QuotaNotMet(e.to_string()),
            ClassifierError::Format(_) => CliError::FileFormat(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::TargetUnreachable { .. } => CliError::TargetUnreachable(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::Io(m) => CliError::Other(m),
            other => CliError::FileFormat(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "grouplink",
    about = "Two-party privacy-preserving record linkage via repeated anonymous group assignment",
    version
)]
struct Cli {
    /// Protocol config file (flat TOML key-value).
    #[arg(short, long, default_value = "grouplink.toml", global = true)]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize and deduplicate the registry CSV; emit the aggregates
    /// the platform side needs (N and turnout).
    RegistryPrepare,
    /// Build the anonymous group count table for one round or a range.
    RegistryRound {
        /// Single round index.
        #[arg(long, conflicts_with = "rounds")]
        round: Option<u32>,
        /// Half-open round range, e.g. `0..100`.
        #[arg(long, value_parser = parse_round_range)]
        rounds: Option<(u32, u32)>,
    },
    /// Canonicalize and deduplicate the platform CSV.
    PlatformPrepare,
    /// Ingest one or more group count table files into the draw store.
    PlatformIngestRound {
        /// Table files produced by registry-round.
        #[arg(required = true)]
        tables: Vec<PathBuf>,
    },
    /// Two-stage classification of every platform record.
    Classify,
    /// Monte Carlo search for the (m1, m2) draw quotas.
    Calibrate,
    /// Accuracy-versus-draws curve at the configured turnout/match rate.
    Simulate {
        /// Largest draw count on the curve.
        #[arg(long, default_value_t = 100)]
        m_max: usize,
        /// Grid step.
        #[arg(long, default_value_t = 5)]
        m_step: usize,
    },
    /// Truth-table report against known ground truth.
    Validate {
        /// CSV with header `user_id,truth` (abstainer|voter|unmatched).
        #[arg(long)]
        truth: PathBuf,
        /// Group turnout by the configured attribute column.
        #[arg(long)]
        group_by: bool,
    },
    /// Aggregate match-rate estimate from a random platform sample.
    EstimateMatchRate {
        /// Number of platform records to sample.
        #[arg(long, default_value_t = 1000)]
        sample_size: usize,
        /// Hash-set file exported by the registry side; when omitted the
        /// registry store is read directly.
        #[arg(long, conflicts_with = "export_hashes")]
        registry_hashes: Option<PathBuf>,
        /// Registry-side mode: write the estimation hash set for exchange
        /// and stop (reads no platform files).
        #[arg(long)]
        export_hashes: bool,
    },
}

fn parse_round_range(s: &str) -> Result<(u32, u32), String> {
    let (start, end) = s
        .split_once("..")
        .ok_or_else(|| format!("expected start..end, got {s:?}"))?;
    let start: u32 = start.parse().map_err(|_| format!("bad start {start:?}"))?;
    let end: u32 = end.parse().map_err(|_| format!("bad end {end:?}"))?;
    if end <= start {
        return Err(format!("empty range {s:?}"));
    }
    Ok((start, end))
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = ProtocolConfig::load(&cli.config)?;
    match cli.command {
        Command::RegistryPrepare => cmd_registry_prepare(&config),
        Command::RegistryRound { round, rounds } => {
            let range = match (round, rounds) {
                (Some(r), None) => (r, r + 1),
                (None, Some(range)) => range,
                (None, None) => {
                    return Err(CliError::Other("pass --round <i> or --rounds <a..b>".into()))
                }
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            cmd_registry_round(&config, range)
        }
        Command::PlatformPrepare => cmd_platform_prepare(&config),
        Command::PlatformIngestRound { tables } => cmd_platform_ingest_round(&config, &tables),
        Command::Classify => cmd_classify(&config),
        Command::Calibrate => cmd_calibrate(&config),
        Command::Simulate { m_max, m_step } => cmd_simulate(&config, m_max, m_step),
        Command::Validate { truth, group_by } => cmd_validate(&config, &truth, group_by),
        Command::EstimateMatchRate {
            sample_size,
            registry_hashes,
            export_hashes,
        } => cmd_estimate_match_rate(&config, sample_size, registry_hashes.as_deref(), export_hashes),
    }
}

// ---------------------------------------------------------------------------
// Registry side
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RegistryAggregates {
    n_registry: usize,
    turnout_p: f64,
    drop_stats: DropStats,
}

fn cmd_registry_prepare(config: &ProtocolConfig) -> Result<(), CliError> {
    let (records, stats) = read_registry_csv(&config.registry_csv)?;
    if records.is_empty() {
        return Err(CliError::FileFormat(format!(
            "{}: no usable registry records after deduplication",
            config.registry_csv.display()
        )));
    }
    let n = records.len();
    let voters = records.iter().filter(|r| r.voted).count();
    let p = voters as f64 / n as f64;
    if !(p > 0.0 && p < 1.0) {
        return Err(CliError::FileFormat(format!(
            "registry turnout {p} leaves nothing to classify"
        )));
    }
    if let Some(expected) = config.n_registry {
        if expected != n {
            return Err(CliError::ParamsMismatch(format!(
                "config n_registry = {expected} but the registry holds {n} records"
            )));
        }
    }
    if let Some(expected) = config.turnout_p {
        if (expected - p).abs() > 1e-9 {
            return Err(CliError::ParamsMismatch(format!(
                "config turnout_p = {expected} but the registry turnout is {p}"
            )));
        }
    }

    write_registry_store(&config.registry_store, &records)?;
    let aggregates = RegistryAggregates {
        n_registry: n,
        turnout_p: p,
        drop_stats: stats,
    };
    write_toml(
        &config.output_dir.join("registry_aggregates.toml"),
        &aggregates,
    )?;

    println!(
        "registry: {} rows read, {} unparseable, {} duplicate rows dropped",
        stats.input_rows, stats.unparseable, stats.duplicates
    );
    println!("registry: N = {n}, turnout_p = {p:.6}");
    println!(
        "aggregates written to {}",
        config.output_dir.join("registry_aggregates.toml").display()
    );
    Ok(())
}

fn cmd_registry_round(config: &ProtocolConfig, (start, end): (u32, u32)) -> Result<(), CliError> {
    let (records, _) = read_registry_csv(&config.registry_store)?;
    let params = GroupParams::new(records.len(), config.g)?;
    std::fs::create_dir_all(&config.table_dir)?;
    for round in start..end {
        let seed = derive_round_salt(config.master_seed, round);
        let table = build_group_table(&records, &seed, &params);
        let path = config.table_path(round);
        let mut file = std::fs::File::create(&path)?;
        table.write_to(&mut file)?;
        file.flush()?;
        println!(
            "round {round}: {} of {} groups retained -> {}",
            table.len(),
            params.divisor(),
            path.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Platform side
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PlatformStats {
    n_platform: usize,
    drop_stats: DropStats,
}

fn cmd_platform_prepare(config: &ProtocolConfig) -> Result<(), CliError> {
    let (records, stats) =
        read_platform_csv(&config.platform_csv, config.attribute_column.as_deref())?;
    if records.is_empty() {
        return Err(CliError::FileFormat(format!(
            "{}: no usable platform records after deduplication",
            config.platform_csv.display()
        )));
    }
    write_platform_store(&config.platform_store, &records)?;
    write_toml(
        &config.output_dir.join("platform_prepare_stats.toml"),
        &PlatformStats {
            n_platform: records.len(),
            drop_stats: stats,
        },
    )?;
    println!(
        "platform: {} rows read, {} unparseable, {} duplicate rows dropped, {} retained",
        stats.input_rows,
        stats.unparseable,
        stats.duplicates,
        records.len()
    );
    Ok(())
}

fn require_n_registry(config: &ProtocolConfig) -> Result<usize, CliError> {
    config.n_registry.ok_or_else(|| {
        CliError::ParamsMismatch(
            "n_registry missing from config; copy it from the registry aggregates".into(),
        )
    })
}

fn require_turnout(config: &ProtocolConfig) -> Result<f64, CliError> {
    config.turnout_p.ok_or_else(|| {
        CliError::ParamsMismatch(
            "turnout_p missing from config; copy it from the registry aggregates".into(),
        )
    })
}

fn cmd_platform_ingest_round(config: &ProtocolConfig, tables: &[PathBuf]) -> Result<(), CliError> {
    let platform = read_platform_store(&config.platform_store)?;
    let params = GroupParams::new(require_n_registry(config)?, config.g)?;
    let mut store = load_draw_store(
        &config.draw_store,
        platform.iter().map(|r| r.user_id.clone()),
    )?;

    for path in tables {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::FileFormat(format!("{}: {e}", path.display())))?;
        let table = GroupCountTable::read_from(BufReader::new(file))?;
        let round = table.round_index();
        let seed = derive_round_salt(config.master_seed, round);
        let round_draws = assign_draws(&platform, &table, &seed, &params)?;
        store.accumulate(&round_draws, round)?;
        append_round_to_file(&config.draw_store, &round_draws, round)?;
        println!(
            "round {round}: {} of {} records drew (coverage {:.4})",
            round_draws.len(),
            platform.len(),
            round_draws.len() as f64 / platform.len() as f64
        );
    }

    let quota = planned_quota(config).map(|plan| plan.quota_stage1);
    if let Some(quota) = quota {
        let ids: Vec<&str> = platform.iter().map(|r| r.user_id.as_str()).collect();
        let remaining = plan_rounds(
            &store,
            quota,
            &ids,
            occupancy_draw_probability(config.g),
        );
        println!(
            "draw store: {} rounds ingested, estimated {} more to reach the stage-1 quota of {}",
            store.rounds_ingested(),
            remaining,
            quota
        );
    }
    Ok(())
}

/// Quotas from the config, falling back to a calibration report.
fn planned_quota(config: &ProtocolConfig) -> Option<RoundPlan> {
    if let Some(m1) = config.m1 {
        return Some(RoundPlan::new(m1, config.m2.unwrap_or(0)));
    }
    let path = config.output_dir.join("calibration.toml");
    let text = std::fs::read_to_string(path).ok()?;
    let value: toml::Value = text.parse().ok()?;
    let plan = value.get("plan")?;
    let m1 = plan.get("m1")?.as_integer()? as usize;
    let m2 = plan.get("m2")?.as_integer()? as usize;
    Some(RoundPlan::new(m1, m2))
}

fn cmd_classify(config: &ProtocolConfig) -> Result<(), CliError> {
    let platform = read_platform_store(&config.platform_store)?;
    let p = require_turnout(config)?;
    let params = PopulationParams::new(p, config.g, config.match_rate.unwrap_or(1.0))?;
    let plan = planned_quota(config).ok_or_else(|| {
        CliError::Other("no m1/m2 in config and no calibration report; run calibrate first".into())
    })?;

    let store = load_draw_store(
        &config.draw_store,
        platform.iter().map(|r| r.user_id.clone()),
    )?;
    let results = two_stage_classify(&store, &plan, &params)?;

    std::fs::create_dir_all(&config.output_dir)?;
    let out = config.output_dir.join("classification.csv");
    write_classification_csv(&out, results.values())?;

    let mut by_label = [0usize; 3];
    let mut redone = 0usize;
    for r in results.values() {
        by_label[r.label.code() as usize] += 1;
        redone += usize::from(r.stage == 2);
    }
    println!(
        "classified {} records with m1 = {}, m2 = {} ({} redone)",
        results.len(),
        plan.quota_stage1,
        plan.quota_stage2,
        redone
    );
    println!(
        "labels: {} abstainer, {} voter, {} unmatched -> {}",
        by_label[0],
        by_label[1],
        by_label[2],
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Simulation, calibration, validation
// ---------------------------------------------------------------------------

fn simulation_config(config: &ProtocolConfig) -> Result<SimulationConfig, CliError> {
    let t = require_turnout(config)?;
    let mm = config.match_rate.ok_or_else(|| {
        CliError::ParamsMismatch(
            "match_rate missing from config; run estimate-match-rate and copy the value".into(),
        )
    })?;
    Ok(SimulationConfig {
        t,
        mm,
        n: config.sim_n,
        g: config.g,
        target_accuracy: config.target_accuracy,
        rng_seed: config.rng_seed(),
        replicates: config.replicates,
    })
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    config: &'a SimulationConfig,
    plan: &'a CalibrationPlan,
}

fn cmd_calibrate(config: &ProtocolConfig) -> Result<(), CliError> {
    let sim = simulation_config(config)?;
    let outcome = calibrate(&sim)?;
    std::fs::create_dir_all(&config.output_dir)?;
    write_toml(
        &config.output_dir.join("calibration.toml"),
        &CalibrationReport {
            config: &sim,
            plan: &outcome.plan,
        },
    )?;
    write_curve_csv(
        &config.output_dir.join("calibration_curve.csv"),
        &outcome.stage1_curve,
    )?;
    println!(
        "plan: m1 = {}, m2 = {}, redo class = {}",
        outcome.plan.m1,
        outcome.plan.m2,
        outcome.plan.redo_class.as_str()
    );
    println!(
        "achieved on a fresh replicate: voter {:.4}, abstainer {:.4}",
        outcome.plan.achieved_accuracy_voter, outcome.plan.achieved_accuracy_abstainer
    );
    Ok(())
}

fn cmd_simulate(config: &ProtocolConfig, m_max: usize, m_step: usize) -> Result<(), CliError> {
    if m_step == 0 || m_max < m_step {
        return Err(CliError::Other("m_step must be positive and at most m_max".into()));
    }
    let sim = simulation_config(config)?;
    let grid: Vec<usize> = (m_step..=m_max).step_by(m_step).collect();
    let curve = accuracy_curve(&sim, &grid)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let path = config.output_dir.join("accuracy_curve.csv");
    write_curve_csv(&path, &curve)?;
    let last = curve.last().expect("grid is non-empty");
    println!(
        "accuracy at m = {}: voter {}, abstainer {} -> {}",
        last.m,
        format_option(last.acc_voter),
        format_option(last.acc_abstainer),
        path.display()
    );
    Ok(())
}

fn cmd_validate(config: &ProtocolConfig, truth_csv: &Path, group_by: bool) -> Result<(), CliError> {
    let results = read_classification_csv(&config.output_dir.join("classification.csv"))?;
    let truth = read_truth_csv(truth_csv)?;
    let table = build_truth_table(
        results.iter().map(|r| (r.user_id.as_str(), r.label)),
        &truth,
    )?;

    std::fs::create_dir_all(&config.output_dir)?;
    write_truth_table_csv(&config.output_dir.join("truth_table.csv"), &table)?;
    write_conditional_report(
        &config.output_dir.join("conditional_report.csv"),
        &table,
        config.target_accuracy,
        0.95,
    )?;

    let conditional = conditional_probabilities(&table);
    for class in ClassLabel::ALL {
        println!(
            "Pr({} | classified {}) = {}",
            class.as_str(),
            class.as_str(),
            format_option(conditional.of(class))
        );
    }
    println!(
        "matched-sample turnout: {}",
        format_option(matched_turnout(results.iter().map(|r| r.label)))
    );

    if group_by {
        let column = config.attribute_column.as_deref().ok_or_else(|| {
            CliError::Other("--group-by needs attribute_column in the config".into())
        })?;
        let platform = read_platform_store(&config.platform_store)?;
        let attributes: HashMap<String, String> = platform
            .iter()
            .filter_map(|r| {
                r.attribute
                    .as_ref()
                    .map(|a| (r.user_id.clone(), a.clone()))
            })
            .collect();
        let report = grouped_turnout_report(
            results.iter().map(|r| (r.user_id.as_str(), r.label)),
            &attributes,
        )?;
        let path = config.output_dir.join(format!("turnout_by_{column}.csv"));
        write_turnout_report(&path, &report)?;
        println!("grouped turnout ({} keys) -> {}", report.len(), path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct MatchRateEstimate {
    match_rate: f64,
    sample_size: usize,
}

fn cmd_estimate_match_rate(
    config: &ProtocolConfig,
    sample_size: usize,
    registry_hashes: Option<&Path>,
    export_hashes: bool,
) -> Result<(), CliError> {
    if sample_size == 0 {
        return Err(CliError::Other("sample size must be positive".into()));
    }
    let seed = RoundSeed::estimation(&config.estimation_salt);

    let hashes: std::collections::HashSet<HashValue> = match registry_hashes {
        Some(path) => read_hashes_file(path)?,
        None => {
            // Registry side: hash the registry store into the exchange
            // artifact. With --export-hashes this is all that happens.
            let (records, _) = read_registry_csv(&config.registry_store)?;
            let hashes: std::collections::HashSet<HashValue> = records
                .iter()
                .map(|r| identity_hash(&r.identity, &seed))
                .collect();
            std::fs::create_dir_all(&config.output_dir)?;
            let export = config.output_dir.join("estimation_hashes.txt");
            let mut body = format!("# estimation salt_id={}\n", seed.fingerprint());
            for h in &hashes {
                body.push_str(&format!("{}\n", h.value()));
            }
            std::fs::write(&export, body)?;
            println!("estimation hash set -> {}", export.display());
            if export_hashes {
                return Ok(());
            }
            hashes
        }
    };

    let platform = read_platform_store(&config.platform_store)?;
    if sample_size > platform.len() {
        return Err(CliError::Other(format!(
            "sample size {sample_size} exceeds the {} platform records",
            platform.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let sample: Vec<CanonicalIdentity> =
        rand::seq::index::sample(&mut rng, platform.len(), sample_size)
            .into_iter()
            .map(|i| platform[i].identity.clone())
            .collect();

    let rate = estimate_match_rate(&sample, &hashes, &seed);
    std::fs::create_dir_all(&config.output_dir)?;
    write_toml(
        &config.output_dir.join("match_rate_estimate.toml"),
        &MatchRateEstimate {
            match_rate: rate,
            sample_size,
        },
    )?;
    println!("match_rate = {rate}");
    Ok(())
}

// ---------------------------------------------------------------------------
// Local file helpers
// ---------------------------------------------------------------------------

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    ensure_parent(path)?;
    let body = toml::to_string(value).map_err(|e| CliError::Other(e.to_string()))?;
    std::fs::write(path, body)?;
    Ok(())
}

fn write_registry_store(path: &Path, records: &[RegistryRecord]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut body = String::from("first_name,last_name,birth_day,birth_month,birth_year,voted\n");
    for r in records {
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.identity.first_name(),
            r.identity.last_name(),
            r.identity.birth_day(),
            r.identity.birth_month(),
            r.identity.birth_year(),
            u8::from(r.voted)
        ));
    }
    std::fs::write(path, body)?;
    Ok(())
}

fn write_platform_store(path: &Path, records: &[PlatformRecord]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut body =
        String::from("user_id,first_name,last_name,birth_day,birth_month,birth_year,attribute\n");
    for r in records {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.user_id,
            r.identity.first_name(),
            r.identity.last_name(),
            r.identity.birth_day(),
            r.identity.birth_month(),
            r.identity.birth_year(),
            r.attribute.as_deref().unwrap_or("")
        ));
    }
    std::fs::write(path, body)?;
    Ok(())
}

fn read_platform_store(path: &Path) -> Result<Vec<PlatformRecord>, CliError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| CliError::FileFormat(format!("{}: {e}", path.display())))?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::FileFormat(format!("{}: empty store", path.display())))?;
    if header != "user_id,first_name,last_name,birth_day,birth_month,birth_year,attribute" {
        return Err(CliError::FileFormat(format!(
            "{}: unexpected platform store header {header:?}",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::FileFormat(format!(
                "{}: malformed store row {line:?}",
                path.display()
            )));
        }
        let parse = |s: &str| {
            s.parse::<u16>()
                .map_err(|_| CliError::FileFormat(format!("{}: bad number {s:?}", path.display())))
        };
        let identity = CanonicalIdentity::new(
            fields[1],
            fields[2],
            parse(fields[3])?,
            parse(fields[4])?,
            parse(fields[5])?,
        )
        .map_err(|e| CliError::FileFormat(format!("{}: {e}", path.display())))?;
        records.push(PlatformRecord {
            user_id: fields[0].to_string(),
            identity,
            attribute: (!fields[6].is_empty()).then(|| fields[6].to_string()),
        });
    }
    Ok(records)
}

fn read_truth_csv(path: &Path) -> Result<HashMap<String, ClassLabel>, CliError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| CliError::FileFormat(format!("{}: {e}", path.display())))?;
    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::FileFormat(format!("{}: empty truth file", path.display())))?;
    if header != "user_id,truth" {
        return Err(CliError::FileFormat(format!(
            "{}: expected header user_id,truth, found {header:?}",
            path.display()
        )));
    }
    let mut truth = HashMap::new();
    for line in lines {
        let (user_id, label) = line.split_once(',').ok_or_else(|| {
            CliError::FileFormat(format!("{}: malformed truth row {line:?}", path.display()))
        })?;
        truth.insert(user_id.to_string(), label.parse::<ClassLabel>()?);
    }
    Ok(truth)
}

fn read_hashes_file(path: &Path) -> Result<std::collections::HashSet<HashValue>, CliError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| CliError::FileFormat(format!("{}: {e}", path.display())))?;
    let mut hashes = std::collections::HashSet::new();
    for line in content.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let value: u32 = line.parse().map_err(|_| {
            CliError::FileFormat(format!("{}: bad hash line {line:?}", path.display()))
        })?;
        hashes.insert(HashValue::new(value));
    }
    Ok(hashes)
}

fn write_curve_csv(path: &Path, curve: &[AccuracyPoint]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut body = String::from("m,acc_voter,acc_abstainer\n");
    for point in curve {
        body.push_str(&format!(
            "{},{},{}\n",
            point.m,
            format_option(point.acc_voter),
            format_option(point.acc_abstainer)
        ));
    }
    std::fs::write(path, body)?;
    Ok(())
}

fn format_option(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), |v| v.to_string())
}
