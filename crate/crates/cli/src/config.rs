//! Layered configuration resolution.
//!
//! Every run resolves one [`Resolved`] value from four layers, strongest
//! first: command-line flags, the `--config` key=value file, the
//! `BUFSIM_SEED` environment variable (seed only), and built-in defaults.
//! The resolved configuration is echoed verbatim into every output document
//! so a result file is self-describing.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use bufsim_core::{
    Architecture, ContentionModel, CycleBudget, SimConfig, SimError, SimMode, StopCondition,
    Wiring, DEFAULT_ISLIP_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU, DEFAULT_PACKETS,
    DEFAULT_REPLICATIONS, DEFAULT_SEED,
};

use crate::CommonArgs;

/// Environment variable consulted for the seed when neither a flag nor the
/// config file provides one.
pub const SEED_ENV_VAR: &str = "BUFSIM_SEED";

/// Terminal error for the binary; the variant fixes the process exit code.
#[derive(Debug)]
pub enum AppError {
    /// Invalid or contradictory configuration; exits with code 2.
    Config(String),
    /// Output could not be written; exits with code 3.
    Io(String),
    /// Internal model failure that no configuration should trigger.
    Internal(String),
}

impl AppError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Config(_) => ExitCode::from(2),
            AppError::Io(_) => ExitCode::from(3),
            AppError::Internal(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            AppError::Io(msg) => write!(f, "output error: {msg}"),
            AppError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl From<SimError> for AppError {
    fn from(err: SimError) -> Self {
        match err {
            SimError::InvalidConfig(_) | SimError::Traffic(_) | SimError::CycleModel(_) => {
                AppError::Config(err.to_string())
            }
            other => AppError::Internal(other.to_string()),
        }
    }
}

impl From<bufsim_core::AnalyticsError> for AppError {
    fn from(err: bufsim_core::AnalyticsError) -> Self {
        AppError::Config(err.to_string())
    }
}

impl From<bufsim_core::CycleModelError> for AppError {
    fn from(err: bufsim_core::CycleModelError) -> Self {
        AppError::Config(err.to_string())
    }
}

/// Which subcommand is being resolved; fixes defaults and allowed modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Analytics,
    Simulate,
    Compare,
    Cycle,
}

/// Resolved evaluation route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Analytics,
    Queueing,
    Voq,
    Cycle,
}

impl ModeKind {
    pub fn label(self) -> &'static str {
        match self {
            ModeKind::Analytics => "analytics",
            ModeKind::Queueing => "queueing",
            ModeKind::Voq => "voq",
            ModeKind::Cycle => "cycle",
        }
    }
}

/// Architectures a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchSelection {
    Common,
    Distributed,
    Both,
}

impl ArchSelection {
    pub fn label(self) -> &'static str {
        match self {
            ArchSelection::Common => "common",
            ArchSelection::Distributed => "distributed",
            ArchSelection::Both => "both",
        }
    }

    /// Selected architectures in output order: common before distributed.
    pub fn architectures(self) -> Vec<Architecture> {
        match self {
            ArchSelection::Common => vec![Architecture::Common],
            ArchSelection::Distributed => vec![Architecture::Distributed],
            ArchSelection::Both => vec![Architecture::Common, Architecture::Distributed],
        }
    }
}

/// Machine output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatKind {
    Csv,
    Json,
}

impl FormatKind {
    pub fn label(self) -> &'static str {
        match self {
            FormatKind::Csv => "csv",
            FormatKind::Json => "json",
        }
    }
}

/// Fully resolved run configuration; every field has a concrete value.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub mode: ModeKind,
    pub arch: ArchSelection,
    pub lambda: f64,
    pub mu: f64,
    pub distributed_capacity: usize,
    pub common_capacity: usize,
    pub ports: usize,
    pub wiring: Wiring,
    pub packets: u64,
    pub seed: u64,
    pub replications: usize,
    pub islip_iterations: usize,
    pub warmup: u64,
    pub store_cycles: u64,
    pub schedule_cycles: u64,
    pub traverse_cycles: u64,
    pub clock_period_ns: f64,
    pub crowding_threshold: f64,
    pub format: FormatKind,
    pub out: Option<PathBuf>,
}

/// Typed values read from the `--config` file; `None` means the key was
/// absent.  Field order mirrors [`CommonArgs`].
#[derive(Default)]
struct FileOptions {
    mode: Option<String>,
    arch: Option<String>,
    lambda: Option<f64>,
    mu: Option<f64>,
    capacity: Option<usize>,
    common_capacity: Option<usize>,
    ports: Option<usize>,
    wiring: Option<String>,
    packets: Option<u64>,
    seed: Option<u64>,
    replications: Option<usize>,
    islip_iterations: Option<usize>,
    warmup: Option<u64>,
    store_cycles: Option<u64>,
    schedule_cycles: Option<u64>,
    traverse_cycles: Option<u64>,
    clock_period_ns: Option<f64>,
    crowding_threshold: Option<f64>,
    format: Option<String>,
    out: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, AppError> {
    value
        .parse::<T>()
        .map_err(|_| AppError::Config(format!("config key {key} has invalid value {value:?}")))
}

fn parse_file(path: &PathBuf) -> Result<FileOptions, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| AppError::Config(format!("cannot read config file {}: {err}", path.display())))?;
    let mut opts = FileOptions::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(AppError::Config(format!(
                "config line {} is not key=value: {raw:?}",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "mode" => opts.mode = Some(value.to_string()),
            "arch" => opts.arch = Some(value.to_string()),
            "lambda" => opts.lambda = Some(parse_value(key, value)?),
            "mu" => opts.mu = Some(parse_value(key, value)?),
            "capacity" => opts.capacity = Some(parse_value(key, value)?),
            "common-capacity" | "common_capacity" => {
                opts.common_capacity = Some(parse_value(key, value)?)
            }
            "ports" => opts.ports = Some(parse_value(key, value)?),
            "wiring" => opts.wiring = Some(value.to_string()),
            "packets" => opts.packets = Some(parse_value(key, value)?),
            "seed" => opts.seed = Some(parse_value(key, value)?),
            "replications" => opts.replications = Some(parse_value(key, value)?),
            "islip-iterations" | "islip_iterations" => {
                opts.islip_iterations = Some(parse_value(key, value)?)
            }
            "warmup" => opts.warmup = Some(parse_value(key, value)?),
            "store-cycles" | "store_cycles" => opts.store_cycles = Some(parse_value(key, value)?),
            "schedule-cycles" | "schedule_cycles" => {
                opts.schedule_cycles = Some(parse_value(key, value)?)
            }
            "traverse-cycles" | "traverse_cycles" => {
                opts.traverse_cycles = Some(parse_value(key, value)?)
            }
            "clock-period-ns" | "clock_period_ns" => {
                opts.clock_period_ns = Some(parse_value(key, value)?)
            }
            "crowding-threshold" | "crowding_threshold" => {
                opts.crowding_threshold = Some(parse_value(key, value)?)
            }
            "format" => opts.format = Some(value.to_string()),
            "out" => opts.out = Some(PathBuf::from(value)),
            other => {
                return Err(AppError::Config(format!("unknown config key {other:?}")));
            }
        }
    }
    Ok(opts)
}

fn parse_mode(text: &str) -> Result<ModeKind, AppError> {
    match text {
        "analytics" => Ok(ModeKind::Analytics),
        "queueing" => Ok(ModeKind::Queueing),
        "voq" => Ok(ModeKind::Voq),
        "cycle" => Ok(ModeKind::Cycle),
        other => Err(AppError::Config(format!(
            "unknown mode {other:?}; expected analytics, queueing, voq, or cycle"
        ))),
    }
}

fn parse_arch(text: &str) -> Result<ArchSelection, AppError> {
    match text {
        "common" => Ok(ArchSelection::Common),
        "distributed" => Ok(ArchSelection::Distributed),
        "both" => Ok(ArchSelection::Both),
        other => Err(AppError::Config(format!(
            "unknown architecture {other:?}; expected common, distributed, or both"
        ))),
    }
}

fn parse_wiring(text: &str) -> Result<Wiring, AppError> {
    match text {
        "independent" => Ok(Wiring::Independent),
        "aggregate" => Ok(Wiring::Aggregate),
        other => Err(AppError::Config(format!(
            "unknown wiring {other:?}; expected independent or aggregate"
        ))),
    }
}

fn parse_format(text: &str) -> Result<FormatKind, AppError> {
    match text {
        "csv" => Ok(FormatKind::Csv),
        "json" => Ok(FormatKind::Json),
        other => Err(AppError::Config(format!(
            "unknown format {other:?}; expected csv or json"
        ))),
    }
}

fn env_seed() -> Result<Option<u64>, AppError> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => {
            let seed = text.parse::<u64>().map_err(|_| {
                AppError::Config(format!("{SEED_ENV_VAR} has invalid value {text:?}"))
            })?;
            Ok(Some(seed))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(err) => Err(AppError::Config(format!("{SEED_ENV_VAR}: {err}"))),
    }
}

/// Resolves one run configuration from flags, file, environment, and
/// defaults, then validates command-specific constraints.
pub fn resolve(command: CommandKind, args: &CommonArgs) -> Result<Resolved, AppError> {
    let file = match &args.config {
        Some(path) => parse_file(path)?,
        None => FileOptions::default(),
    };

    let mode_text = args.mode.clone().or(file.mode);
    let arch_text = args.arch.clone().or(file.arch);
    let wiring_text = args.wiring.clone().or(file.wiring);
    let format_text = args.format.clone().or(file.format);

    let mode = match mode_text {
        Some(text) => parse_mode(&text)?,
        None => match command {
            CommandKind::Analytics => ModeKind::Analytics,
            CommandKind::Simulate | CommandKind::Compare => ModeKind::Queueing,
            CommandKind::Cycle => ModeKind::Cycle,
        },
    };
    match command {
        CommandKind::Analytics if mode != ModeKind::Analytics => {
            return Err(AppError::Config(
                "the analytics command only runs analytics mode".to_string(),
            ));
        }
        CommandKind::Simulate if !matches!(mode, ModeKind::Queueing | ModeKind::Voq) => {
            return Err(AppError::Config(
                "simulate requires mode queueing or voq".to_string(),
            ));
        }
        CommandKind::Compare
            if !matches!(mode, ModeKind::Queueing | ModeKind::Voq | ModeKind::Cycle) =>
        {
            return Err(AppError::Config(
                "compare requires mode queueing, voq, or cycle".to_string(),
            ));
        }
        CommandKind::Cycle if mode != ModeKind::Cycle => {
            return Err(AppError::Config(
                "the cycle command only runs cycle mode".to_string(),
            ));
        }
        _ => {}
    }

    let arch = match arch_text {
        Some(text) => parse_arch(&text)?,
        None => match command {
            CommandKind::Simulate => ArchSelection::Distributed,
            _ => ArchSelection::Both,
        },
    };
    if command == CommandKind::Simulate && arch == ArchSelection::Both {
        return Err(AppError::Config(
            "simulate runs a single architecture; use compare for both".to_string(),
        ));
    }
    if command == CommandKind::Compare && arch != ArchSelection::Both {
        return Err(AppError::Config(
            "compare always runs both architectures; drop --arch or pass both".to_string(),
        ));
    }

    let ports = args.ports.or(file.ports).unwrap_or(bufsim_core::DEFAULT_PORTS);
    if ports == 0 {
        return Err(AppError::Config("ports must be at least 1".to_string()));
    }

    let capacity = args.capacity.or(file.capacity);
    let common_capacity_opt = args.common_capacity.or(file.common_capacity);
    let mut distributed_capacity = bufsim_core::DEFAULT_DISTRIBUTED_CAPACITY;
    let mut common_capacity = bufsim_core::DEFAULT_COMMON_CAPACITY;
    if let Some(n) = capacity {
        match arch {
            ArchSelection::Common => common_capacity = n,
            ArchSelection::Distributed => distributed_capacity = n,
            ArchSelection::Both => {
                distributed_capacity = n;
                common_capacity = n.saturating_mul(ports);
            }
        }
    }
    if let Some(n) = common_capacity_opt {
        common_capacity = n;
    }
    if distributed_capacity == 0 || common_capacity == 0 {
        return Err(AppError::Config("buffer capacity must be at least 1".to_string()));
    }

    let seed = match args.seed.or(file.seed) {
        Some(seed) => seed,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };

    let resolved = Resolved {
        mode,
        arch,
        lambda: args.lambda.or(file.lambda).unwrap_or(DEFAULT_LAMBDA),
        mu: args.mu.or(file.mu).unwrap_or(DEFAULT_MU),
        distributed_capacity,
        common_capacity,
        ports,
        wiring: match wiring_text {
            Some(text) => parse_wiring(&text)?,
            None => Wiring::Independent,
        },
        packets: args.packets.or(file.packets).unwrap_or(DEFAULT_PACKETS),
        seed,
        replications: args
            .replications
            .or(file.replications)
            .unwrap_or(DEFAULT_REPLICATIONS),
        islip_iterations: args
            .islip_iterations
            .or(file.islip_iterations)
            .unwrap_or(DEFAULT_ISLIP_ITERATIONS),
        warmup: args
            .warmup
            .or(file.warmup)
            .unwrap_or(bufsim_core::DEFAULT_WARMUP),
        store_cycles: args.store_cycles.or(file.store_cycles).unwrap_or(2),
        schedule_cycles: args.schedule_cycles.or(file.schedule_cycles).unwrap_or(4),
        traverse_cycles: args.traverse_cycles.or(file.traverse_cycles).unwrap_or(4),
        clock_period_ns: args
            .clock_period_ns
            .or(file.clock_period_ns)
            .unwrap_or(4.0),
        crowding_threshold: args
            .crowding_threshold
            .or(file.crowding_threshold)
            .unwrap_or(0.75),
        format: match format_text {
            Some(text) => parse_format(&text)?,
            None => FormatKind::Csv,
        },
        out: args.out.clone().or(file.out),
    };

    if resolved.lambda <= 0.0 || !resolved.lambda.is_finite() {
        return Err(AppError::Config("lambda must be positive and finite".to_string()));
    }
    if resolved.mu <= 0.0 || !resolved.mu.is_finite() {
        return Err(AppError::Config("mu must be positive and finite".to_string()));
    }
    if resolved.packets == 0 {
        return Err(AppError::Config("packets must be at least 1".to_string()));
    }
    if resolved.replications == 0 {
        return Err(AppError::Config("replications must be at least 1".to_string()));
    }
    if resolved.islip_iterations == 0 {
        return Err(AppError::Config("islip-iterations must be at least 1".to_string()));
    }
    resolved.budget()?;
    resolved.contention()?;
    Ok(resolved)
}

impl Resolved {
    /// Cycle budget assembled from the resolved stage counts.
    pub fn budget(&self) -> Result<CycleBudget, AppError> {
        let budget = CycleBudget {
            store_cycles: self.store_cycles,
            schedule_cycles: self.schedule_cycles,
            traverse_cycles: self.traverse_cycles,
            clock_period_ns: self.clock_period_ns,
        };
        budget.validate()?;
        Ok(budget)
    }

    /// Contention model with the resolved crowding threshold.
    pub fn contention(&self) -> Result<ContentionModel, AppError> {
        let model = ContentionModel {
            crowding_threshold: self.crowding_threshold,
            ..ContentionModel::distributed_reference()
        };
        model.validate()?;
        Ok(model)
    }

    /// Simulator configuration for one architecture of this run.
    pub fn sim_config(&self, arch: Architecture) -> Result<SimConfig, AppError> {
        let mode = match self.mode {
            ModeKind::Queueing => SimMode::Queueing,
            ModeKind::Voq => SimMode::Voq,
            other => {
                return Err(AppError::Config(format!(
                    "mode {} does not run the simulator",
                    other.label()
                )));
            }
        };
        let config = SimConfig {
            mode,
            arch,
            ports: self.ports,
            lambda: self.lambda,
            mu: self.mu,
            distributed_capacity: self.distributed_capacity,
            common_capacity: self.common_capacity,
            wiring: self.wiring,
            destination_weights: None,
            seed: self.seed,
            stop: StopCondition::GeneratedPackets(self.packets),
            warmup: self.warmup,
            islip_iterations: self.islip_iterations,
            budget: self.budget()?,
            contention: self.contention()?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Capacity of the buffer governing one architecture.
    pub fn capacity_of(&self, arch: Architecture) -> usize {
        match arch {
            Architecture::Common => self.common_capacity,
            Architecture::Distributed => self.distributed_capacity,
        }
    }

    /// Full resolved configuration as sorted key=value pairs.  The output
    /// path is deliberately excluded: it names the destination of the
    /// document, not the experiment, and would break byte-for-byte
    /// reproducibility across destinations.
    pub fn config_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![
            ("arch".to_string(), self.arch.label().to_string()),
            ("clock_period_ns".to_string(), self.clock_period_ns.to_string()),
            ("common_capacity".to_string(), self.common_capacity.to_string()),
            ("crowding_threshold".to_string(), self.crowding_threshold.to_string()),
            ("distributed_capacity".to_string(), self.distributed_capacity.to_string()),
            ("format".to_string(), self.format.label().to_string()),
            ("islip_iterations".to_string(), self.islip_iterations.to_string()),
            ("lambda".to_string(), self.lambda.to_string()),
            ("mode".to_string(), self.mode.label().to_string()),
            ("mu".to_string(), self.mu.to_string()),
            ("packets".to_string(), self.packets.to_string()),
            ("ports".to_string(), self.ports.to_string()),
            ("replications".to_string(), self.replications.to_string()),
            ("schedule_cycles".to_string(), self.schedule_cycles.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("store_cycles".to_string(), self.store_cycles.to_string()),
            ("traverse_cycles".to_string(), self.traverse_cycles.to_string()),
            ("warmup".to_string(), self.warmup.to_string()),
            (
                "wiring".to_string(),
                match self.wiring {
                    Wiring::Independent => "independent".to_string(),
                    Wiring::Aggregate => "aggregate".to_string(),
                },
            ),
        ];
        pairs.sort();
        pairs
    }
}
