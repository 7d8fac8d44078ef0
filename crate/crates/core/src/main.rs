use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_ia::capacity::RateRule;
use hybrid_ia::channel::Partition;
use hybrid_ia::experiment::{self, Command, ExperimentConfig, Format, PartialConfig, PolicyChoice, RunOutput};
use hybrid_ia::Error;

/// Environment variable holding the default worker count.
const WORKERS_ENV: &str = "HYBRID_IA_WORKERS";

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VERIFICATION: u8 = 4;

#[derive(Parser)]
#[command(name = "hybrid-ia", version, about = "Hybrid channel pre-inversion and interference alignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Degrees of freedom per partition, certified over seeded draws.
    DofTable(Common),
    /// Large-system SINR of MMSE pre-inversion against its closed form.
    AsymptoticSinr(Common),
    /// Ergodic SINR and normalized rates per SNR, partition and policy.
    ErgodicCapacity(Common),
    /// Run the invariant suites; exits 4 on any failure.
    Verify(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo trials (draws per partition for dof-table).
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Comma-separated matrix sizes (asymptotic-sinr).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Partition such as "3,1"; repeat for several.
    #[arg(long = "partition")]
    partitions: Option<Vec<Partition>>,
    /// mmse, zeroForcing or both.
    #[arg(long)]
    policy: Option<PolicyChoice>,
    /// Use E[log2(1+SINR)] instead of log2(1+E[SINR]).
    #[arg(long)]
    mean_of_log: bool,
    /// csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write the alignment strategy of each partition's first draw as JSON (dof-table).
    #[arg(long)]
    dump_strategy: Option<PathBuf>,
    /// Worker threads; defaults to $HYBRID_IA_WORKERS, then the core count.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn flags(&self) -> PartialConfig {
        PartialConfig {
            seed: self.seed,
            trials: self.trials,
            snr_db: self.snr.clone(),
            n: self.n.clone(),
            partitions: self.partitions.clone(),
            alpha_policy: self.policy,
            rate_rule: self.mean_of_log.then_some(RateRule::MeanOfLog),
            format: self.format,
            output: self.output.clone(),
            dump_strategy: self.dump_strategy.clone(),
            ..Default::default()
        }
    }
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::UnsupportedConfiguration { .. } => EXIT_CONFIG,
            Error::CertificationFailed { .. } => EXIT_VERIFICATION,
            _ => EXIT_NUMERICAL,
        };
        Failure { code, kind: e.kind(), message: e.to_string() }
    }
}

fn config_failure(message: String) -> Failure {
    Failure { code: EXIT_CONFIG, kind: "ConfigError", message }
}

fn workers(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_failure(format!("{WORKERS_ENV}={v} is not a worker count"))),
        Err(_) => Ok(None),
    }
}

/// Write `contents` to `path` via a temporary file in the same directory, so
/// a failed run never leaves a partial file behind.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| Failure { code: EXIT_CONFIG, kind: "IoError", message: format!("{}: {e}", path.display()) };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn execute(command: Command, args: &Common) -> Result<RunOutput, Failure> {
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_failure(format!("{}: {e}", path.display())))?;
            Some(PartialConfig::from_toml(&text)?)
        }
        None => None,
    };
    let cfg: ExperimentConfig = experiment::resolve(command, file, args.flags())?;
    if cfg.dump_strategy.is_some() && command != Command::DofTable {
        return Err(config_failure("--dump-strategy is only available for dof-table".into()));
    }
    let out = match workers(args.workers)? {
        Some(0) => return Err(config_failure("worker count must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_failure(e.to_string()))?
            .install(|| experiment::run(&cfg))?,
        None => experiment::run(&cfg)?,
    };
    match &cfg.output {
        Some(path) => write_atomic(path, &out.body)?,
        None => print!("{}", out.body),
    }
    if let (Some(path), Some(dump)) = (&cfg.dump_strategy, &out.strategy_dump) {
        write_atomic(path, dump)?;
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let (command, args) = match &cli.command {
        Sub::DofTable(a) => (Command::DofTable, a),
        Sub::AsymptoticSinr(a) => (Command::AsymptoticSinr, a),
        Sub::ErgodicCapacity(a) => (Command::ErgodicCapacity, a),
        Sub::Verify(a) => (Command::Verify, a),
    };
    match execute(command, args) {
        Ok(out) if out.verified => ExitCode::SUCCESS,
        Ok(_) => {
            let record = serde_json::json!({
                "error": "VerificationFailed",
                "message": "one or more checks failed; see the output",
                "exit_code": EXIT_VERIFICATION,
            });
            eprintln!("{record}");
            ExitCode::from(EXIT_VERIFICATION)
        }
        Err(f) => {
            let record = serde_json::json!({ "error": f.kind, "message": f.message, "exit_code": f.code });
            eprintln!("{record}");
            ExitCode::from(f.code)
        }
    }
}
