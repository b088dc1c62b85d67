//! Buffer-architecture laboratory for a 4x4 input-queued router.
//!
//! Quantifies packet latency and blocking for a pooled (common) buffer
//! versus per-port (distributed) buffers through three independent routes:
//!
//! * [`analytics`]: closed-form M/M/1/N finite-buffer queue metrics,
//! * [`sim`]: a deterministic discrete-event simulator with virtual output
//!   queues and iSLIP crossbar scheduling,
//! * [`cycle_model`]: a clock-cycle latency budget with contention penalties.
//!
//! All randomness flows through seeded [`traffic::RandomStream`] instances,
//! so every simulation result is reproducible bit for bit from its seed.

pub mod analytics;
pub mod cycle_model;
pub mod engine;
pub mod metrics;
pub mod router;
pub mod scheduler;
pub mod sim;
pub mod traffic;

pub use analytics::{AnalyticsError, ArchitectureComparison, QueueMetrics, QueueSpec};
pub use cycle_model::{
    ContentionModel, CycleBudget, CycleModelError, ImprovementConvention, BASE_PIPELINE_CYCLES,
    DISTRIBUTED_REFERENCE_CYCLES,
};
pub use engine::{EngineError, Event, EventClass, EventQueue, SimTime};
pub use metrics::{
    Collector, MetricsError, ReplicationStat, SimReport, StreamingStats, SummaryStats,
    TimeWeightedMean, DEFAULT_WARMUP,
};
pub use router::{
    Admission, BufferArchitecture, BufferState, Packet, PacketIdGen, RouterError,
    DEFAULT_COMMON_CAPACITY, DEFAULT_DISTRIBUTED_CAPACITY, DEFAULT_PORTS,
};
pub use scheduler::{IslipState, Matching, RequestMatrix, SchedulerError};
pub use sim::{
    Architecture, ReplicationReport, SimConfig, SimError, SimMode, StopCondition, Wiring,
    DEFAULT_ISLIP_ITERATIONS, DEFAULT_LAMBDA, DEFAULT_MU, DEFAULT_PACKETS, DEFAULT_REPLICATIONS,
    DEFAULT_SEED,
};
pub use traffic::{RandomStream, Source, TrafficError, Weights};
