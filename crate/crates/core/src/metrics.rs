//! Measurement plumbing: streaming latency statistics, time-weighted
//! occupancy, per-run reports, and replication-level confidence intervals.
//!
//! Latency samples are kept exactly up to one million per statistic; past
//! that the store degrades to a logarithmically bucketed histogram whose
//! percentile error is bounded by the bucket width (under 0.5% relative).
//! Mean and variance are streaming (Welford) and never degrade.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::router::Packet;

/// Latency samples retained exactly before the histogram takes over.
pub const MAX_EXACT_SAMPLES: usize = 1_000_000;
/// Served packets discarded from the trimmed statistics by default, 10%
/// of the reference 50000-packet run.
pub const DEFAULT_WARMUP: u64 = 5000;

const HISTOGRAM_GROWTH: f64 = 1.01;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("packet {id} departs at {departed} before it was created at {created}")]
    NegativeLatency {
        id: u64,
        created: f64,
        departed: f64,
    },
    #[error("packet {0} has no departure timestamp")]
    MissingDeparture(u64),
    #[error("occupancy recorded at {time}, behind the last record at {last}")]
    TimeMovedBackwards { time: f64, last: f64 },
    #[error("confidence interval needs at least 2 replications, got {0}")]
    TooFewReplications(usize),
    #[error("confidence level {0} is not in (0, 1)")]
    InvalidLevel(f64),
    #[error("conservation violated: generated {generated} != served {served} + blocked {blocked} + resident {resident}")]
    ConservationViolated {
        generated: u64,
        served: u64,
        blocked: u64,
        resident: u64,
    },
}

/// Sample store that is exact until [`MAX_EXACT_SAMPLES`] and then folds
/// everything into geometric buckets.
#[derive(Debug, Clone)]
enum SampleStore {
    Exact(Vec<f64>),
    Bucketed {
        /// Count per bucket index `floor(log(x) / log(1.01))`; index 0 of
        /// `non_positive` holds samples at or below zero.
        counts: std::collections::BTreeMap<i32, u64>,
        non_positive: u64,
        total: u64,
    },
}

impl SampleStore {
    fn new() -> Self {
        SampleStore::Exact(Vec::new())
    }

    fn bucket_of(value: f64) -> i32 {
        (value.ln() / HISTOGRAM_GROWTH.ln()).floor() as i32
    }

    fn bucket_mid(bucket: i32) -> f64 {
        // Geometric midpoint of [g^b, g^(b+1)).
        HISTOGRAM_GROWTH.powf(bucket as f64 + 0.5)
    }

    fn push(&mut self, value: f64) {
        if let SampleStore::Exact(values) = self {
            if values.len() < MAX_EXACT_SAMPLES {
                values.push(value);
                return;
            }
            let mut counts = std::collections::BTreeMap::new();
            let mut non_positive = 0u64;
            let mut total = 0u64;
            for &v in values.iter() {
                if v <= 0.0 {
                    non_positive += 1;
                } else {
                    *counts.entry(Self::bucket_of(v)).or_insert(0) += 1;
                }
                total += 1;
            }
            *self = SampleStore::Bucketed {
                counts,
                non_positive,
                total,
            };
        }
        match self {
            SampleStore::Exact(_) => unreachable!("exact store handled above"),
            SampleStore::Bucketed {
                counts,
                non_positive,
                total,
            } => {
                if value <= 0.0 {
                    *non_positive += 1;
                } else {
                    *counts.entry(Self::bucket_of(value)).or_insert(0) += 1;
                }
                *total += 1;
            }
        }
    }

    /// Nearest-rank percentile; exact in exact mode, bucket-midpoint in
    /// bucketed mode.
    fn percentile(&self, q: f64) -> Option<f64> {
        match self {
            SampleStore::Exact(values) => {
                if values.is_empty() {
                    return None;
                }
                let mut sorted = values.clone();
                sorted.sort_by(f64::total_cmp);
                let rank = ((q * sorted.len() as f64).ceil() as usize).max(1);
                Some(sorted[rank.min(sorted.len()) - 1])
            }
            SampleStore::Bucketed {
                counts,
                non_positive,
                total,
            } => {
                if *total == 0 {
                    return None;
                }
                let rank = ((q * *total as f64).ceil() as u64).max(1);
                let mut seen = *non_positive;
                if rank <= seen {
                    return Some(0.0);
                }
                for (&bucket, &count) in counts {
                    seen += count;
                    if rank <= seen {
                        return Some(Self::bucket_mid(bucket));
                    }
                }
                counts.keys().last().map(|&b| Self::bucket_mid(b))
            }
        }
    }
}

/// Streaming mean, variance, extrema, and percentiles of one series.
#[derive(Debug, Clone)]
pub struct StreamingStats {
    count: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
    store: SampleStore,
}

impl StreamingStats {
    pub fn new() -> Self {
        StreamingStats {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            store: SampleStore::new(),
        }
    }

    pub fn record(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
        self.min = self.min.min(value);
        self.max = self.max.max(value);
        self.store.push(value);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.mean
        }
    }

    /// Sample variance (n - 1 denominator); zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn percentile(&self, q: f64) -> Option<f64> {
        self.store.percentile(q)
    }

    /// Point-in-time summary. Empty series summarise as all zeros.
    pub fn summary(&self) -> SummaryStats {
        if self.count == 0 {
            return SummaryStats::default();
        }
        SummaryStats {
            count: self.count,
            mean: self.mean(),
            variance: self.variance(),
            min: self.min,
            max: self.max,
            p50: self.percentile(0.50).unwrap_or(0.0),
            p95: self.percentile(0.95).unwrap_or(0.0),
            p99: self.percentile(0.99).unwrap_or(0.0),
        }
    }
}

impl Default for StreamingStats {
    fn default() -> Self {
        Self::new()
    }
}

/// Snapshot of one sample series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SummaryStats {
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Time integral of a piecewise-constant signal, for occupancy averages.
#[derive(Debug, Clone)]
pub struct TimeWeightedMean {
    start: f64,
    last_time: f64,
    last_value: f64,
    integral: f64,
}

impl TimeWeightedMean {
    pub fn new(start: f64) -> Self {
        TimeWeightedMean {
            start,
            last_time: start,
            last_value: 0.0,
            integral: 0.0,
        }
    }

    /// The signal takes `value` from `time` onward. Times must not move
    /// backwards.
    pub fn record(&mut self, time: f64, value: f64) -> Result<(), MetricsError> {
        if time < self.last_time {
            return Err(MetricsError::TimeMovedBackwards {
                time,
                last: self.last_time,
            });
        }
        self.integral += self.last_value * (time - self.last_time);
        self.last_time = time;
        self.last_value = value;
        Ok(())
    }

    /// Average over `[start, end]`, extending the last value to `end`.
    /// A zero-length window reads back the current value.
    pub fn average(&self, end: f64) -> f64 {
        let span = end - self.start;
        if span <= 0.0 {
            return self.last_value;
        }
        (self.integral + self.last_value * (end - self.last_time)) / span
    }
}

/// Per-run accumulator fed by the simulation loop.
///
/// Served packets beyond the first `warmup` also feed the trimmed
/// statistics; raw statistics always see every served packet.
#[derive(Debug, Clone)]
pub struct Collector {
    warmup: u64,
    generated: u64,
    served: u64,
    blocked: u64,
    raw_latency: StreamingStats,
    trimmed_latency: StreamingStats,
    occupancy: TimeWeightedMean,
}

impl Collector {
    pub fn new(warmup: u64) -> Self {
        Collector {
            warmup,
            generated: 0,
            served: 0,
            blocked: 0,
            raw_latency: StreamingStats::new(),
            trimmed_latency: StreamingStats::new(),
            occupancy: TimeWeightedMean::new(0.0),
        }
    }

    pub fn record_generated(&mut self) {
        self.generated += 1;
    }

    pub fn record_block(&mut self, _packet: &Packet) {
        self.blocked += 1;
    }

    pub fn record_departure(&mut self, packet: &Packet) -> Result<(), MetricsError> {
        let departed = packet
            .departed_at
            .ok_or(MetricsError::MissingDeparture(packet.id))?;
        let latency = departed - packet.created_at;
        if latency < 0.0 {
            return Err(MetricsError::NegativeLatency {
                id: packet.id,
                created: packet.created_at,
                departed,
            });
        }
        self.served += 1;
        self.raw_latency.record(latency);
        if self.served > self.warmup {
            self.trimmed_latency.record(latency);
        }
        Ok(())
    }

    pub fn record_occupancy(&mut self, time: f64, occupancy: usize) -> Result<(), MetricsError> {
        self.occupancy.record(time, occupancy as f64)
    }

    pub fn generated(&self) -> u64 {
        self.generated
    }

    pub fn served(&self) -> u64 {
        self.served
    }

    pub fn blocked(&self) -> u64 {
        self.blocked
    }

    /// Conservation identity against the buffer's resident count.
    pub fn check_conservation(&self, resident: u64) -> Result<(), MetricsError> {
        if self.generated != self.served + self.blocked + resident {
            return Err(MetricsError::ConservationViolated {
                generated: self.generated,
                served: self.served,
                blocked: self.blocked,
                resident,
            });
        }
        Ok(())
    }

    /// Final report. `elapsed` is the measurement window in the run's
    /// time unit; `resident` is what the buffer still holds.
    pub fn finish(
        self,
        arch: &str,
        mode: &str,
        elapsed: f64,
        resident: u64,
        trace_hash: u64,
    ) -> Result<SimReport, MetricsError> {
        self.check_conservation(resident)?;
        let throughput = if elapsed > 0.0 {
            self.served as f64 / elapsed
        } else {
            0.0
        };
        let blocking_probability = if self.generated > 0 {
            self.blocked as f64 / self.generated as f64
        } else {
            0.0
        };
        Ok(SimReport {
            arch: arch.to_string(),
            mode: mode.to_string(),
            generated: self.generated,
            served: self.served,
            blocked: self.blocked,
            resident,
            latency: self.raw_latency.summary(),
            trimmed_latency: self.trimmed_latency.summary(),
            warmup: self.warmup,
            time_average_occupancy: self.occupancy.average(elapsed),
            throughput,
            blocking_probability,
            elapsed,
            trace_hash,
            cycle_latency_ns: None,
        })
    }
}

/// Everything one simulation run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub arch: String,
    pub mode: String,
    pub generated: u64,
    pub served: u64,
    pub blocked: u64,
    pub resident: u64,
    /// Latency over every served packet, in the run's time unit.
    pub latency: SummaryStats,
    /// Latency excluding the first `warmup` served packets.
    pub trimmed_latency: SummaryStats,
    pub warmup: u64,
    pub time_average_occupancy: f64,
    /// Served packets per unit time.
    pub throughput: f64,
    /// Blocked over generated.
    pub blocking_probability: f64,
    /// Measurement window in the run's time unit.
    pub elapsed: f64,
    /// Order-sensitive digest of the event trace; equal traces hash equal.
    pub trace_hash: u64,
    /// Per-packet pipeline latency in nanoseconds, crossbar mode only.
    pub cycle_latency_ns: Option<SummaryStats>,
}

impl SimReport {
    /// Trimmed mean when the trim left samples, raw mean otherwise.
    pub fn reported_mean_latency(&self) -> f64 {
        if self.trimmed_latency.count > 0 {
            self.trimmed_latency.mean
        } else {
            self.latency.mean
        }
    }
}

/// Grand mean with an optional 95% half-width (absent below two
/// replications).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationStat {
    pub mean: f64,
    pub ci_half_width: Option<f64>,
}

impl ReplicationStat {
    /// Folds per-replication means; one replication gives a bare mean.
    pub fn from_means(means: &[f64], level: f64) -> Result<Self, MetricsError> {
        match means.len() {
            0 => Err(MetricsError::TooFewReplications(0)),
            1 => Ok(ReplicationStat {
                mean: means[0],
                ci_half_width: None,
            }),
            _ => {
                let (mean, half) = confidence_interval(means, level)?;
                Ok(ReplicationStat {
                    mean,
                    ci_half_width: Some(half),
                })
            }
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci_half_width.unwrap_or(0.0)
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci_half_width.unwrap_or(0.0)
    }
}

/// Student-t interval over replication means: grand mean and half-width
/// `t_{n-1,(1+level)/2} * s / sqrt(n)`.
pub fn confidence_interval(means: &[f64], level: f64) -> Result<(f64, f64), MetricsError> {
    let n = means.len();
    if n < 2 {
        return Err(MetricsError::TooFewReplications(n));
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(MetricsError::InvalidLevel(level));
    }
    let nf = n as f64;
    let grand_mean = means.iter().sum::<f64>() / nf;
    let ss: f64 = means.iter().map(|m| (m - grand_mean).powi(2)).sum();
    let std_dev = (ss / (nf - 1.0)).sqrt();
    let t = StudentsT::new(0.0, 1.0, nf - 1.0)
        .expect("freedom >= 1 is always a valid t distribution")
        .inverse_cdf(0.5 + level / 2.0);
    Ok((grand_mean, t * std_dev / nf.sqrt()))
}
