//! Closed-form metrics for the M/M/1/N finite-buffer queue.
//!
//! A buffer of capacity `N` fed by Poisson arrivals at rate `lambda` and
//! drained by exponential service at rate `mu` has the stationary state
//! distribution of a birth-death chain truncated at `N`. This module
//! evaluates that distribution, the expected occupancy, the blocking
//! probability `P_N`, and the latency figures derived from them, for any
//! traffic intensity `rho = lambda / mu` including `rho >= 1` (a finite
//! buffer is stable at any load).
//!
//! The expected-occupancy formula is evaluated in the rearranged two-term
//! form `rho/(1-rho) - (N+1)*rho^(N+1)/(1-rho^(N+1))`, which is algebraically
//! identical to the usual single-fraction expression but avoids the
//! catastrophic cancellation that the latter suffers near `rho = 1`.
//! Intensities above one are folded back with the reflection identities
//! `P_n(rho, N) = P_{N-n}(1/rho, N)` and `E(rho, N) = N - E(1/rho, N)`,
//! so large `rho^N` powers are never formed.

use thiserror::Error;

/// Intensities within this distance of 1 are evaluated with the exact
/// uniform-distribution limit instead of the geometric formula.
pub const RHO_SINGULARITY_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("arrival rate must be positive and finite, got {0}")]
    InvalidArrivalRate(f64),
    #[error("service rate must be positive and finite, got {0}")]
    InvalidServiceRate(f64),
    #[error("buffer capacity must be at least 1, got {0}")]
    InvalidCapacity(usize),
    #[error("traffic intensity must be positive and finite, got {0}")]
    InvalidIntensity(f64),
    #[error("state index {n} lies outside [0, {capacity}]")]
    StateOutOfRange { n: usize, capacity: usize },
    #[error("port count must be at least 1, got {0}")]
    InvalidPortCount(usize),
    #[error("admitted rate is zero, effective latency is undefined")]
    ZeroAdmittedRate,
}

/// Parameters of one M/M/1/N queue: offered rate, drain rate, buffer slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueSpec {
    /// Poisson arrival rate in packets per second.
    pub arrival_rate: f64,
    /// Exponential service rate in packets per second.
    pub service_rate: f64,
    /// Buffer capacity in packets, counting the one in service.
    pub capacity: usize,
}

impl QueueSpec {
    pub fn new(
        arrival_rate: f64,
        service_rate: f64,
        capacity: usize,
    ) -> Result<Self, AnalyticsError> {
        let spec = QueueSpec {
            arrival_rate,
            service_rate,
            capacity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if !self.arrival_rate.is_finite() || self.arrival_rate <= 0.0 {
            return Err(AnalyticsError::InvalidArrivalRate(self.arrival_rate));
        }
        if !self.service_rate.is_finite() || self.service_rate <= 0.0 {
            return Err(AnalyticsError::InvalidServiceRate(self.service_rate));
        }
        if self.capacity == 0 {
            return Err(AnalyticsError::InvalidCapacity(self.capacity));
        }
        Ok(())
    }

    /// The same queue with rates and capacity multiplied by `factor`,
    /// modelling `factor` ports pooled into one shared buffer.
    pub fn pooled(&self, factor: usize) -> QueueSpec {
        QueueSpec {
            arrival_rate: self.arrival_rate * factor as f64,
            service_rate: self.service_rate * factor as f64,
            capacity: self.capacity * factor,
        }
    }

    /// Traffic intensity `rho = lambda / mu`.
    pub fn intensity(&self) -> Result<f64, AnalyticsError> {
        self.validate()?;
        Ok(self.arrival_rate / self.service_rate)
    }
}

/// Full closed-form summary of one queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueMetrics {
    pub spec: QueueSpec,
    pub rho: f64,
    /// `P_0 ..= P_N`; sums to one.
    pub state_distribution: Vec<f64>,
    /// `P_N`, the probability an arriving packet finds the buffer full.
    pub blocking_probability: f64,
    /// Expected number of packets resident in the buffer.
    pub expected_occupancy: f64,
    /// `E(n) / lambda`: occupancy over the raw offered rate.
    pub naive_latency: f64,
    /// `E(n) / (lambda * (1 - P_N))`: mean time in system of the packets
    /// that are actually admitted (Little's law on the admitted rate).
    pub effective_latency: f64,
}

/// Side-by-side closed-form comparison of the two buffer organisations.
///
/// `distributed` describes one per-port queue; `common` describes the
/// pooled queue serving `ports` ports with `ports`-fold rates and capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureComparison {
    pub ports: usize,
    pub distributed: QueueMetrics,
    pub common: QueueMetrics,
    /// Distributed naive latency over common naive latency.
    pub latency_ratio: f64,
    /// Distributed blocking probability over common blocking probability.
    pub blocking_ratio: f64,
    /// Naive-latency gain of the pooled buffer as a percentage of the
    /// distributed figure: `100 * (d - c) / d`.
    pub latency_improvement_percent: f64,
}

fn validate_rho(rho: f64) -> Result<(), AnalyticsError> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(AnalyticsError::InvalidIntensity(rho));
    }
    Ok(())
}

fn validate_capacity(capacity: usize) -> Result<(), AnalyticsError> {
    if capacity == 0 {
        return Err(AnalyticsError::InvalidCapacity(capacity));
    }
    Ok(())
}

fn near_unit(rho: f64) -> bool {
    (rho - 1.0).abs() < RHO_SINGULARITY_EPS
}

/// `ln(rho)` computed as `ln_1p(rho - 1)`. The subtraction is exact for
/// `rho` in `[0.5, 2]`, which keeps full precision exactly where the
/// geometric terms are most cancellation-prone.
fn log_rho(rho: f64) -> f64 {
    (rho - 1.0).ln_1p()
}

/// `1 - rho^(capacity + 1)` for `rho < 1`, via `expm1` to preserve
/// precision when the power is close to one.
fn one_minus_rho_pow(rho: f64, capacity: usize) -> f64 {
    -f64::exp_m1((capacity as f64 + 1.0) * log_rho(rho))
}

/// Stationary probability of `n` resident packets, defined for any
/// positive intensity. At `rho = 1` every state is equally likely.
pub fn state_probability(rho: f64, n: usize, capacity: usize) -> Result<f64, AnalyticsError> {
    validate_rho(rho)?;
    validate_capacity(capacity)?;
    if n > capacity {
        return Err(AnalyticsError::StateOutOfRange { n, capacity });
    }
    if near_unit(rho) {
        return Ok(1.0 / (capacity as f64 + 1.0));
    }
    if rho > 1.0 {
        // Reverse the chain: state n under rho maps to state N - n under 1/rho.
        return state_probability(1.0 / rho, capacity - n, capacity);
    }
    let numerator = (1.0 - rho) * rho.powi(n as i32);
    Ok(numerator / one_minus_rho_pow(rho, capacity))
}

/// The whole stationary distribution `P_0 ..= P_N`.
pub fn state_distribution(rho: f64, capacity: usize) -> Result<Vec<f64>, AnalyticsError> {
    (0..=capacity)
        .map(|n| state_probability(rho, n, capacity))
        .collect()
}

/// Probability an arrival is turned away, `P_N`.
pub fn blocking_probability(rho: f64, capacity: usize) -> Result<f64, AnalyticsError> {
    state_probability(rho, capacity, capacity)
}

/// Expected resident packet count `E(n)`. At `rho = 1` this is `N / 2`;
/// above one it is folded to `N - E(1/rho)`.
pub fn expected_occupancy(rho: f64, capacity: usize) -> Result<f64, AnalyticsError> {
    validate_rho(rho)?;
    validate_capacity(capacity)?;
    if near_unit(rho) {
        return Ok(capacity as f64 / 2.0);
    }
    if rho > 1.0 {
        return Ok(capacity as f64 - expected_occupancy(1.0 / rho, capacity)?);
    }
    let m = capacity as f64 + 1.0;
    let geometric_mean = rho / (1.0 - rho);
    let truncation = m * f64::exp(m * log_rho(rho)) / one_minus_rho_pow(rho, capacity);
    Ok(geometric_mean - truncation)
}

/// Occupancy over the offered arrival rate, `E(n) / lambda`. This is the
/// latency figure a back-of-envelope Little's law gives when blocking is
/// ignored; it undershoots the truth whenever `P_N > 0`.
pub fn naive_latency(expected_occupancy: f64, arrival_rate: f64) -> Result<f64, AnalyticsError> {
    if !arrival_rate.is_finite() || arrival_rate <= 0.0 {
        return Err(AnalyticsError::InvalidArrivalRate(arrival_rate));
    }
    Ok(expected_occupancy / arrival_rate)
}

/// Mean time in system of admitted packets: Little's law applied to the
/// admitted rate `lambda * (1 - P_N)`.
pub fn effective_latency(spec: &QueueSpec) -> Result<f64, AnalyticsError> {
    let rho = spec.intensity()?;
    let occupancy = expected_occupancy(rho, spec.capacity)?;
    let admitted = spec.arrival_rate * (1.0 - blocking_probability(rho, spec.capacity)?);
    if admitted <= 0.0 {
        return Err(AnalyticsError::ZeroAdmittedRate);
    }
    Ok(occupancy / admitted)
}

/// Every closed-form figure for one queue in a single call.
pub fn metrics(spec: &QueueSpec) -> Result<QueueMetrics, AnalyticsError> {
    let rho = spec.intensity()?;
    let state_distribution = state_distribution(rho, spec.capacity)?;
    let blocking = state_distribution[spec.capacity];
    let occupancy = expected_occupancy(rho, spec.capacity)?;
    let naive = naive_latency(occupancy, spec.arrival_rate)?;
    let admitted = spec.arrival_rate * (1.0 - blocking);
    if admitted <= 0.0 {
        return Err(AnalyticsError::ZeroAdmittedRate);
    }
    Ok(QueueMetrics {
        spec: *spec,
        rho,
        state_distribution,
        blocking_probability: blocking,
        expected_occupancy: occupancy,
        naive_latency: naive,
        effective_latency: occupancy / admitted,
    })
}

/// Closed-form comparison of `ports` independent per-port queues against
/// one pooled queue with `ports`-fold rates and capacity. `base` describes
/// a single per-port queue.
pub fn compare_architectures(
    base: &QueueSpec,
    ports: usize,
) -> Result<ArchitectureComparison, AnalyticsError> {
    if ports == 0 {
        return Err(AnalyticsError::InvalidPortCount(ports));
    }
    let distributed = metrics(base)?;
    let common = metrics(&base.pooled(ports))?;
    let latency_ratio = distributed.naive_latency / common.naive_latency;
    let blocking_ratio = distributed.blocking_probability / common.blocking_probability;
    let improvement =
        100.0 * (distributed.naive_latency - common.naive_latency) / distributed.naive_latency;
    Ok(ArchitectureComparison {
        ports,
        distributed,
        common,
        latency_ratio,
        blocking_ratio,
        latency_improvement_percent: improvement,
    })
}
