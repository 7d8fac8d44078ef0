//! Experiment configuration and the runners behind the CLI subcommands.
//!
//! A run is a pure function of its [`ExperimentConfig`]: outputs are rendered
//! in memory after all computation finishes, so callers can write them
//! atomically. The worker count is deliberately not part of the config.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::alignment::{certify, construct_strategy, dof_table, AlignmentOptions, StrategyDocument};
use crate::capacity::{asymptotic_sinr_experiment, ergodic_capacity, AlphaPolicy, CapacitySettings, RateRule};
use crate::channel::{apply_group_preinversion, enumerate_partitions, sample_channel, Partition};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::verify::{self, CHECK_SIGMA2, DEFAULT_INSTANCES};

pub const ERGODIC_HEADER: [&str; 7] = ["snr_db", "partition", "policy", "user", "dof", "e_sinr_linear", "rate_norm"];
pub const ASYMPTOTIC_HEADER: [&str; 6] = ["n", "snr_db", "mean_inv_sinr", "mean_sinr", "thm1_pred", "jensen_gap_db"];
pub const DOF_HEADER: [&str; 7] = ["partition", "dof", "normalized_sum_dof", "draws", "certified", "max_leakage", "status"];
pub const VERIFY_HEADER: [&str; 4] = ["suite", "passed", "total", "status"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    DofTable,
    AsymptoticSinr,
    ErgodicCapacity,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::DofTable => "dof-table",
            Command::AsymptoticSinr => "asymptotic-sinr",
            Command::ErgodicCapacity => "ergodic-capacity",
            Command::Verify => "verify",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PolicyChoice {
    Mmse,
    ZeroForcing,
    Both,
}

impl PolicyChoice {
    pub fn policies(self) -> Vec<AlphaPolicy> {
        match self {
            PolicyChoice::Mmse => vec![AlphaPolicy::Mmse],
            PolicyChoice::ZeroForcing => vec![AlphaPolicy::ZeroForcing],
            PolicyChoice::Both => vec![AlphaPolicy::Mmse, AlphaPolicy::ZeroForcing],
        }
    }
}

impl FromStr for PolicyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(PolicyChoice::Both),
            other => Ok(match other.parse::<AlphaPolicy>()? {
                AlphaPolicy::Mmse => PolicyChoice::Mmse,
                AlphaPolicy::ZeroForcing => PolicyChoice::ZeroForcing,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!("unknown format '{other}'"))),
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub trials: usize,
    pub snr_db: Vec<f64>,
    /// Matrix sizes for `asymptotic-sinr`.
    pub n: Vec<usize>,
    /// Partitions for `ergodic-capacity` and `dof-table`.
    pub partitions: Vec<Partition>,
    pub alpha_policy: PolicyChoice,
    pub rate_rule: RateRule,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_strategy: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            seed: 0,
            trials: 10_000,
            snr_db: (0..=8).map(|k| 5.0 * k as f64).collect(),
            n: vec![25, 50, 100],
            partitions: enumerate_partitions(4),
            alpha_policy: PolicyChoice::Both,
            rate_rule: RateRule::LogOfMean,
            format: Format::Csv,
            output: None,
            dump_strategy: None,
        }
    }

    /// Canonical TOML form; parsing it back yields an identical config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(format!("SNR {s} is not finite")));
        }
        if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidParameter(format!("matrix size must be >= 2, got {n}")));
        }
        if let Some(p) = self.partitions.iter().find(|p| p.users() != 4) {
            return Err(Error::UnsupportedConfiguration { k: p.users(), n: 5 });
        }
        match self.command {
            Command::AsymptoticSinr | Command::ErgodicCapacity if self.snr_db.is_empty() => {
                Err(Error::InvalidParameter("the SNR grid is empty".into()))
            }
            Command::AsymptoticSinr if self.n.is_empty() => Err(Error::InvalidParameter("the size grid is empty".into())),
            Command::ErgodicCapacity | Command::DofTable if self.partitions.is_empty() => {
                Err(Error::InvalidParameter("no partitions selected".into()))
            }
            _ => Ok(()),
        }
    }

    /// The config as `#`-prefixed comment lines.
    pub fn header_comment(&self) -> String {
        self.to_toml().lines().map(|l| format!("# {l}\n")).collect()
    }
}

/// Config fields as they appear in a config file, all optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub partitions: Option<Vec<Partition>>,
    pub alpha_policy: Option<PolicyChoice>,
    pub rate_rule: Option<RateRule>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub dump_strategy: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config file: {e}")))
    }

    /// Overlay the fields set here onto `base`.
    pub fn apply(self, mut base: ExperimentConfig) -> ExperimentConfig {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { base.$f = v; })* };
        }
        take!(command, seed, trials, snr_db, n, partitions, alpha_policy, rate_rule, format);
        if self.output.is_some() {
            base.output = self.output;
        }
        if self.dump_strategy.is_some() {
            base.dump_strategy = self.dump_strategy;
        }
        base
    }
}

/// Resolve `defaults < file < flags` for `command`.
pub fn resolve(command: Command, file: Option<PartialConfig>, flags: PartialConfig) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::defaults(command);
    if let Some(file) = file {
        cfg = file.apply(cfg);
    }
    cfg = flags.apply(cfg);
    cfg.command = command;
    cfg.validate()?;
    Ok(cfg)
}

/// Rendered outputs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub body: String,
    pub strategy_dump: Option<String>,
    /// False when a verification or certification check failed.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofRow {
    pub partition: Partition,
    pub dof: Vec<usize>,
    pub normalized_sum_dof: String,
    pub draws: usize,
    pub certified: usize,
    pub max_leakage: f64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicRow {
    pub snr_db: f64,
    pub partition: Partition,
    pub policy: AlphaPolicy,
    pub user: usize,
    pub dof: usize,
    pub e_sinr_linear: f64,
    pub rate_norm: f64,
}

#[derive(Serialize)]
struct JsonDocument<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    rows: T,
}

fn csv_text<F>(cfg: &ExperimentConfig, header: &[&str], extra_comments: &[String], fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).and_then(|_| fill(&mut w)).and_then(|_| w.flush().map_err(Into::into)).map_err(|e| {
            Error::InvalidParameter(format!("csv: {e}"))
        })?;
    }
    let mut text = cfg.header_comment();
    for c in extra_comments {
        text.push_str(&format!("# {c}\n"));
    }
    text.push_str(std::str::from_utf8(&buf).expect("csv output is utf-8"));
    Ok(text)
}

fn json_text<T: Serialize>(cfg: &ExperimentConfig, rows: T) -> String {
    let mut s = serde_json::to_string_pretty(&JsonDocument { config: cfg, rows }).expect("rows serialize");
    s.push('\n');
    s
}

fn run_dof_table(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut rows = Vec::with_capacity(cfg.partitions.len());
    let mut dumps = Vec::new();
    for (p_index, part) in cfg.partitions.iter().enumerate() {
        let record = dof_table(part, 5)?;
        let mut certified = 0;
        let mut max_leakage: f64 = 0.0;
        let mut first_failure = None;
        for draw in 0..cfg.trials as u64 {
            let seed = derive_seed(cfg.seed, &[p_index as u64, draw]);
            let outcome = apply_group_preinversion(&sample_channel(4, 5, seed), part, CHECK_SIGMA2, CHECK_SIGMA2)
                .and_then(|eff| {
                    let s = construct_strategy(&eff, &AlignmentOptions::with_seed(derive_seed(seed, &[1])))?;
                    let cert = certify(&eff, &s)?;
                    Ok((s, cert))
                });
            match outcome {
                Ok((s, cert)) if cert.record == record => {
                    certified += 1;
                    max_leakage = max_leakage.max(cert.leakage);
                    if draw == 0 && cfg.dump_strategy.is_some() {
                        dumps.push(StrategyDocument::from(&s));
                    }
                }
                Ok((_, cert)) => {
                    first_failure.get_or_insert(format!("draw {draw}: certified dof {:?}", cert.record.dof));
                }
                Err(e) => {
                    first_failure.get_or_insert(format!("draw {draw}: {e}"));
                }
            }
        }
        rows.push(DofRow {
            partition: part.clone(),
            dof: record.dof.clone(),
            normalized_sum_dof: record.normalized_sum_dof.to_string(),
            draws: cfg.trials,
            certified,
            max_leakage,
            status: if certified == cfg.trials { "pass" } else { "fail" },
            first_failure,
        });
    }
    let verified = rows.iter().all(|r| r.status == "pass");
    let body = match cfg.format {
        Format::Json => json_text(cfg, &rows),
        Format::Csv => csv_text(cfg, &DOF_HEADER, &[], |w| {
            for r in &rows {
                let dof = format!("({})", r.dof.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","));
                w.write_record([
                    r.partition.to_string(),
                    dof,
                    r.normalized_sum_dof.clone(),
                    r.draws.to_string(),
                    r.certified.to_string(),
                    format!("{:e}", r.max_leakage),
                    r.status.to_string(),
                ])?;
            }
            Ok(())
        })?,
    };
    let strategy_dump = cfg.dump_strategy.as_ref().map(|_| {
        let mut s = serde_json::to_string_pretty(&dumps).expect("strategies serialize");
        s.push('\n');
        s
    });
    Ok(RunOutput { body, strategy_dump, verified })
}

fn run_asymptotic(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rows = asymptotic_sinr_experiment(&cfg.n, &cfg.snr_db, cfg.trials, cfg.seed)?;
    let body = match cfg.format {
        Format::Json => json_text(cfg, &rows),
        Format::Csv => csv_text(cfg, &ASYMPTOTIC_HEADER, &[], |w| {
            for r in &rows {
                w.write_record([
                    r.n.to_string(),
                    r.snr_db.to_string(),
                    r.mean_inv_sinr.to_string(),
                    r.mean_sinr.to_string(),
                    r.thm1_pred.to_string(),
                    r.jensen_gap_db.to_string(),
                ])?;
            }
            Ok(())
        })?,
    };
    Ok(RunOutput { body, strategy_dump: None, verified: true })
}

fn run_ergodic(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut points = Vec::new();
    for &snr_db in &cfg.snr_db {
        for part in &cfg.partitions {
            for policy in cfg.alpha_policy.policies() {
                let settings = CapacitySettings {
                    rate_rule: cfg.rate_rule,
                    ..CapacitySettings::new(snr_db, cfg.trials, cfg.seed, policy)
                };
                points.push(ergodic_capacity(part, &settings)?);
            }
        }
    }
    let body = match cfg.format {
        Format::Json => json_text(cfg, &points),
        Format::Csv => {
            let rejections: Vec<String> = points
                .iter()
                .filter(|p| p.rejected > 0)
                .map(|p| format!("rejected {} {} {} dB: {}", p.partition, p.policy, p.snr_db, p.rejected))
                .collect();
            csv_text(cfg, &ERGODIC_HEADER, &rejections, |w| {
                for p in &points {
                    for user in 0..p.dof.len() {
                        let row = ErgodicRow {
                            snr_db: p.snr_db,
                            partition: p.partition.clone(),
                            policy: p.policy,
                            user: user + 1,
                            dof: p.dof[user],
                            e_sinr_linear: p.e_sinr[user],
                            rate_norm: p.rates[user],
                        };
                        w.write_record([
                            row.snr_db.to_string(),
                            row.partition.to_string(),
                            row.policy.to_string(),
                            row.user.to_string(),
                            row.dof.to_string(),
                            row.e_sinr_linear.to_string(),
                            row.rate_norm.to_string(),
                        ])?;
                    }
                }
                Ok(())
            })?
        }
    };
    Ok(RunOutput { body, strategy_dump: None, verified: true })
}

fn run_verify(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let reports = verify::run_all(cfg.seed, DEFAULT_INSTANCES);
    let verified = reports.iter().all(|r| r.ok());
    let body = match cfg.format {
        Format::Json => json_text(cfg, &reports),
        Format::Csv => csv_text(cfg, &VERIFY_HEADER, &[], |w| {
            for r in &reports {
                w.write_record([
                    r.name.to_string(),
                    r.passed.to_string(),
                    r.total.to_string(),
                    if r.ok() { "pass".into() } else { format!("fail: {}", r.first_failure.as_deref().unwrap_or("")) },
                ])?;
            }
            Ok(())
        })?,
    };
    Ok(RunOutput { body, strategy_dump: None, verified })
}

/// Execute the configured command.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.command {
        Command::DofTable => run_dof_table(cfg),
        Command::AsymptoticSinr => run_asymptotic(cfg),
        Command::ErgodicCapacity => run_ergodic(cfg),
        Command::Verify => run_verify(cfg),
    }
}
