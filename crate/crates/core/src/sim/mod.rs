//! Simulation wiring: configuration, the two run modes, and replication
//! aggregation.
//!
//! `queueing` mode abstracts each buffer pool as an exponential server
//! and validates the closed-form analytics. `voq` mode replaces the
//! server with the cycle-accurate crossbar: iSLIP epochs on a fixed cycle
//! grid retiring one packet per matched port pair.
//!
//! Replication `r` of a run seeded `s` draws every stream from substreams
//! of `derive_seed(s, DOMAIN_REPLICATION, r)`, so two architectures run
//! on identical arrival processes when given the same seed (common random
//! numbers), and any replication can be reproduced in isolation.

mod queueing;
mod voq;

use thiserror::Error;

use crate::cycle_model::{ContentionModel, CycleBudget, CycleModelError};
use crate::engine::{EngineError, Event, SimTime};
use crate::metrics::{MetricsError, ReplicationStat, SimReport, DEFAULT_WARMUP};
use crate::router::{
    BufferArchitecture, RouterError, DEFAULT_COMMON_CAPACITY, DEFAULT_DISTRIBUTED_CAPACITY,
    DEFAULT_PORTS,
};
use crate::scheduler::SchedulerError;
use crate::traffic::{derive_seed, mix64, TrafficError, Weights, DOMAIN_REPLICATION};

/// Reference offered load per input port, packets per second.
pub const DEFAULT_LAMBDA: f64 = 1.0e7;
/// Reference service rate per distributed pool, packets per second.
pub const DEFAULT_MU: f64 = 1.005e7;
/// Reference run length in generated packets.
pub const DEFAULT_PACKETS: u64 = 50_000;
/// Reference replication count.
pub const DEFAULT_REPLICATIONS: usize = 5;
/// Run-level seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 42;
/// iSLIP iterations per scheduling epoch.
pub const DEFAULT_ISLIP_ITERATIONS: usize = 4;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    CycleModel(#[from] CycleModelError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model inconsistency: {0}")]
    Inconsistent(String),
}

/// Which buffer organisation a run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Common,
    Distributed,
}

impl Architecture {
    pub fn label(&self) -> &'static str {
        match self {
            Architecture::Common => "common",
            Architecture::Distributed => "distributed",
        }
    }
}

/// Which service abstraction drains the buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Exponential aggregate server per pool; validates the analytics.
    Queueing,
    /// Cycle-gridded iSLIP crossbar retiring matched VOQ heads.
    Voq,
}

impl SimMode {
    pub fn label(&self) -> &'static str {
        match self {
            SimMode::Queueing => "queueing",
            SimMode::Voq => "voq",
        }
    }
}

/// How offered traffic is attached to input ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wiring {
    /// One Poisson source pinned to each input port.
    Independent,
    /// A single aggregate source at `ports * lambda` whose packets draw
    /// their input port uniformly.
    Aggregate,
}

/// When a run stops collecting new arrivals or ends outright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopCondition {
    /// Admit no arrivals beyond this count, then drain the buffers.
    GeneratedPackets(u64),
    /// End immediately once this many packets have been served.
    ServedPackets(u64),
    /// End at this instant in seconds; in-flight packets stay resident.
    TimeHorizon(f64),
}

/// Full description of one simulation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mode: SimMode,
    pub arch: Architecture,
    pub ports: usize,
    /// Offered rate per input port, packets per second.
    pub lambda: f64,
    /// Service rate per distributed pool; the common pool serves at
    /// `ports * mu`.
    pub mu: f64,
    pub distributed_capacity: usize,
    pub common_capacity: usize,
    pub wiring: Wiring,
    /// Output-port distribution; `None` means uniform.
    pub destination_weights: Option<Vec<f64>>,
    pub seed: u64,
    pub stop: StopCondition,
    /// Served packets excluded from trimmed latency statistics.
    pub warmup: u64,
    pub islip_iterations: usize,
    pub budget: CycleBudget,
    pub contention: ContentionModel,
}

impl SimConfig {
    /// Reference-load configuration for the given mode and architecture.
    pub fn defaults(mode: SimMode, arch: Architecture) -> Self {
        SimConfig {
            mode,
            arch,
            ports: DEFAULT_PORTS,
            lambda: DEFAULT_LAMBDA,
            mu: DEFAULT_MU,
            distributed_capacity: DEFAULT_DISTRIBUTED_CAPACITY,
            common_capacity: DEFAULT_COMMON_CAPACITY,
            wiring: Wiring::Independent,
            destination_weights: None,
            seed: DEFAULT_SEED,
            stop: StopCondition::GeneratedPackets(DEFAULT_PACKETS),
            warmup: DEFAULT_WARMUP,
            islip_iterations: DEFAULT_ISLIP_ITERATIONS,
            budget: CycleBudget::default(),
            contention: ContentionModel::distributed_reference(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.ports == 0 {
            return Err(SimError::InvalidConfig("ports must be at least 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !self.mu.is_finite() || self.mu <= 0.0 {
            return Err(SimError::InvalidConfig(format!(
                "mu must be positive and finite, got {}",
                self.mu
            )));
        }
        if self.distributed_capacity == 0 || self.common_capacity == 0 {
            return Err(SimError::InvalidConfig(
                "buffer capacities must be at least 1".into(),
            ));
        }
        if self.islip_iterations == 0 {
            return Err(SimError::InvalidConfig(
                "islip iterations must be at least 1".into(),
            ));
        }
        if let StopCondition::TimeHorizon(t) = self.stop {
            if !t.is_finite() || t < 0.0 {
                return Err(SimError::InvalidConfig(format!(
                    "time horizon must be non-negative and finite, got {t}"
                )));
            }
        }
        if let Some(weights) = &self.destination_weights {
            if weights.len() != self.ports {
                return Err(SimError::InvalidConfig(format!(
                    "{} destination weights for {} ports",
                    weights.len(),
                    self.ports
                )));
            }
            Weights::new(weights)?;
        }
        self.budget.validate()?;
        self.contention.validate()?;
        Ok(())
    }

    pub fn buffer_architecture(&self) -> BufferArchitecture {
        match self.arch {
            Architecture::Common => BufferArchitecture::Common {
                pool_capacity: self.common_capacity,
            },
            Architecture::Distributed => BufferArchitecture::Distributed {
                per_input_capacity: self.distributed_capacity,
            },
        }
    }

    /// Drain rate of one pool under this configuration.
    pub fn pool_service_rate(&self) -> f64 {
        match self.arch {
            Architecture::Common => self.mu * self.ports as f64,
            Architecture::Distributed => self.mu,
        }
    }

    pub(crate) fn weights(&self) -> Result<Weights, TrafficError> {
        match &self.destination_weights {
            Some(w) => Weights::new(w),
            None => Weights::uniform(self.ports),
        }
    }
}

/// Order-sensitive digest of a run's event trace. Two runs hash equal
/// exactly when they processed the same events in the same order.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TraceHash {
    state: u64,
}

impl TraceHash {
    pub(crate) fn new() -> Self {
        TraceHash {
            state: 0x51_7c_c1_b7_27_22_0a_95,
        }
    }

    pub(crate) fn fold(&mut self, word: u64) {
        self.state = mix64(self.state ^ word);
    }

    pub(crate) fn fold_event<T: SimTime, P>(&mut self, event: &Event<T, P>, detail: u64) {
        self.fold(event.class as u64);
        self.fold(event.seq);
        self.fold(detail);
    }

    pub(crate) fn value(&self) -> u64 {
        self.state
    }
}

pub(crate) fn epoch_after(now: u64, period: u64) -> u64 {
    (now / period + 1) * period
}

/// Runs one replication with an explicit replication-level seed.
pub fn run_seeded(config: &SimConfig, replication_seed: u64) -> Result<SimReport, SimError> {
    config.validate()?;
    match config.mode {
        SimMode::Queueing => queueing::run(config, replication_seed),
        SimMode::Voq => voq::run(config, replication_seed),
    }
}

/// Runs replication 0 of the configured seed.
pub fn run_single(config: &SimConfig) -> Result<SimReport, SimError> {
    run_seeded(config, derive_seed(config.seed, DOMAIN_REPLICATION, 0))
}

/// Aggregated results of `replications` independent runs.
#[derive(Debug, Clone)]
pub struct ReplicationReport {
    pub replications: usize,
    pub reports: Vec<SimReport>,
    /// Per-replication seeds, for reproducing any single run.
    pub seeds: Vec<u64>,
    /// Warm-up-trimmed mean time in system, seconds.
    pub mean_latency: ReplicationStat,
    pub blocking_probability: ReplicationStat,
    pub throughput: ReplicationStat,
    pub time_average_occupancy: ReplicationStat,
    /// Mean of per-replication trimmed p95 latencies, seconds.
    pub mean_p95_latency: f64,
    pub generated: u64,
    pub served: u64,
    pub blocked: u64,
}

/// Runs `replications` seeds and folds the per-run statistics.
pub fn run_replications(
    config: &SimConfig,
    replications: usize,
) -> Result<ReplicationReport, SimError> {
    if replications == 0 {
        return Err(SimError::InvalidConfig(
            "replications must be at least 1".into(),
        ));
    }
    config.validate()?;
    let mut reports = Vec::with_capacity(replications);
    let mut seeds = Vec::with_capacity(replications);
    for r in 0..replications {
        let seed = derive_seed(config.seed, DOMAIN_REPLICATION, r as u64);
        seeds.push(seed);
        reports.push(run_seeded(config, seed)?);
    }
    let latency_means: Vec<f64> = reports.iter().map(SimReport::reported_mean_latency).collect();
    let blocking: Vec<f64> = reports.iter().map(|r| r.blocking_probability).collect();
    let throughput: Vec<f64> = reports.iter().map(|r| r.throughput).collect();
    let occupancy: Vec<f64> = reports.iter().map(|r| r.time_average_occupancy).collect();
    let p95s: Vec<f64> = reports
        .iter()
        .map(|r| {
            if r.trimmed_latency.count > 0 {
                r.trimmed_latency.p95
            } else {
                r.latency.p95
            }
        })
        .collect();
    Ok(ReplicationReport {
        replications,
        mean_latency: ReplicationStat::from_means(&latency_means, 0.95)?,
        blocking_probability: ReplicationStat::from_means(&blocking, 0.95)?,
        throughput: ReplicationStat::from_means(&throughput, 0.95)?,
        time_average_occupancy: ReplicationStat::from_means(&occupancy, 0.95)?,
        mean_p95_latency: p95s.iter().sum::<f64>() / p95s.len() as f64,
        generated: reports.iter().map(|r| r.generated).sum(),
        served: reports.iter().map(|r| r.served).sum(),
        blocked: reports.iter().map(|r| r.blocked).sum(),
        seeds,
        reports,
    })
}
