//! Seeded packet generation: uniform, exponential, and categorical draws
//! plus Poisson arrival sources.
//!
//! Every random quantity in the simulator comes from a [`RandomStream`],
//! a ChaCha8 generator wrapped so that one logical draw consumes exactly
//! one 64-bit word. Substreams for replications, sources, and servers are
//! derived by mixing `(seed, domain, index)` through a SplitMix64-style
//! finaliser, so adding a source never perturbs the draws seen by another.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::router::{Packet, PacketIdGen};

/// Substream domain for per-replication seeds.
pub const DOMAIN_REPLICATION: u64 = 1;
/// Substream domain for per-source arrival and destination draws.
pub const DOMAIN_SOURCE: u64 = 2;
/// Substream domain for per-pool service time draws.
pub const DOMAIN_SERVICE: u64 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("rate must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("weight vector must not be empty")]
    EmptyWeights,
    #[error("weight {value} at index {index} is negative or not finite")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    UnnormalisedWeights { sum: f64 },
    #[error("port index {port} lies outside a {ports}-port router")]
    PortOutOfRange { port: usize, ports: usize },
}

/// SplitMix64 finalising permutation. Bijective on `u64`, so distinct
/// inputs can never collide.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapses `(seed, domain, index)` into one substream seed.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(domain)) ^ index)
}

/// Deterministic stream of uniform, exponential, and categorical variates.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        RandomStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for `(domain, index)` under a run-level seed.
    pub fn substream(seed: u64, domain: u64, index: u64) -> Self {
        Self::from_seed(derive_seed(seed, domain, index))
    }

    /// Raw 64-bit word, exposed for hashing and property tests.
    pub fn next_word(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform variate on the half-open interval `(0, 1]`. Using the top
    /// 53 bits gives every representable step of `2^-53`; the interval is
    /// closed at 1 so a logarithm of the result is always finite.
    pub fn next_uniform(&mut self) -> f64 {
        let step = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        1.0 - step
    }

    /// Exponential variate with the given rate by inverse transform,
    /// `-ln(U) / rate`. Consumes exactly one uniform draw.
    pub fn sample_exponential(&mut self, rate: f64) -> Result<f64, TrafficError> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(TrafficError::NonPositiveRate(rate));
        }
        Ok(-self.next_uniform().ln() / rate)
    }

    /// Categorical index drawn by inverting the cumulative weights.
    /// Consumes exactly one uniform draw.
    pub fn sample_index(&mut self, weights: &Weights) -> usize {
        weights.invert(self.next_uniform())
    }
}

/// Validated categorical distribution stored as cumulative sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    cumulative: Vec<f64>,
}

impl Weights {
    /// Builds from per-category weights, which must be non-negative and
    /// sum to one within `1e-12`.
    pub fn new(weights: &[f64]) -> Result<Self, TrafficError> {
        if weights.is_empty() {
            return Err(TrafficError::EmptyWeights);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(TrafficError::InvalidWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(TrafficError::UnnormalisedWeights { sum });
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut running = 0.0;
        for &w in weights {
            running += w;
            cumulative.push(running);
        }
        Ok(Weights { cumulative })
    }

    /// Equal weight on `n` categories. The cumulative entries are `k / n`,
    /// so the final entry is exactly one.
    pub fn uniform(n: usize) -> Result<Self, TrafficError> {
        if n == 0 {
            return Err(TrafficError::EmptyWeights);
        }
        let cumulative = (1..=n).map(|k| k as f64 / n as f64).collect();
        Ok(Weights { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Smallest index whose cumulative weight reaches `u`. Falls back to
    /// the last index when rounding leaves `u` above the final sum.
    fn invert(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| u <= c)
            .unwrap_or(self.cumulative.len() - 1)
    }
}

/// Offered-load description for a whole router: per-port rate, port
/// count, destination mix, and the run-level seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    /// Arrival rate of one input port in packets per second.
    pub per_source_rate: f64,
    pub num_sources: usize,
    /// Probability of each output port; must sum to one.
    pub destination_weights: Vec<f64>,
    pub seed: u64,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !self.per_source_rate.is_finite() || self.per_source_rate <= 0.0 {
            return Err(TrafficError::NonPositiveRate(self.per_source_rate));
        }
        if self.num_sources == 0 {
            return Err(TrafficError::EmptyWeights);
        }
        Weights::new(&self.destination_weights).map(|_| ())
    }

    /// Validated destination distribution.
    pub fn weights(&self) -> Result<Weights, TrafficError> {
        Weights::new(&self.destination_weights)
    }
}

/// Which input port a source feeds.
#[derive(Debug, Clone)]
pub enum PortChoice {
    /// Every packet enters at one fixed port.
    Fixed(usize),
    /// The input port is drawn per packet, modelling one aggregate
    /// arrival process spread over the router.
    Drawn(Weights),
}

/// One Poisson arrival process emitting packets with random destinations.
///
/// The source keeps the time of its next arrival pre-sampled, so the time
/// is known before the packet identity is allocated. Per arrival the draw
/// order on the underlying stream is: input port (only for [`PortChoice::Drawn`]),
/// destination, then the gap to the following arrival.
#[derive(Debug, Clone)]
pub struct Source {
    rate: f64,
    port: PortChoice,
    destinations: Weights,
    stream: RandomStream,
    next_time: f64,
}

impl Source {
    pub fn new(
        rate: f64,
        port: PortChoice,
        destinations: Weights,
        mut stream: RandomStream,
    ) -> Result<Self, TrafficError> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(TrafficError::NonPositiveRate(rate));
        }
        let first_gap = stream.sample_exponential(rate)?;
        Ok(Source {
            rate,
            port,
            destinations,
            stream,
            next_time: first_gap,
        })
    }

    /// Absolute time of the arrival that [`Source::next_arrival`] will emit.
    pub fn next_time(&self) -> f64 {
        self.next_time
    }

    /// Emits the pending arrival and pre-samples the one after it.
    ///
    /// Identifiers come from the shared generator at emission time, so
    /// merging several sources by `next_time` yields identifiers that
    /// strictly increase along the merged timeline.
    pub fn next_arrival(&mut self, ids: &mut PacketIdGen) -> (f64, Packet) {
        let at = self.next_time;
        let input_port = match &self.port {
            PortChoice::Fixed(p) => *p,
            PortChoice::Drawn(weights) => self.stream.sample_index(weights),
        };
        let output_port = self.stream.sample_index(&self.destinations);
        let packet = Packet::new(ids.allocate(), input_port, output_port, at);
        let gap = self
            .stream
            .sample_exponential(self.rate)
            .expect("rate was validated at construction");
        self.next_time = at + gap;
        (at, packet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_draws_live_in_half_open_unit_interval() {
        let mut stream = RandomStream::from_seed(7);
        for _ in 0..10_000 {
            let u = stream.next_uniform();
            assert!(u > 0.0 && u <= 1.0, "u = {u}");
        }
    }

    #[test]
    fn identical_seeds_replay_identical_streams() {
        let mut a = RandomStream::from_seed(42);
        let mut b = RandomStream::from_seed(42);
        for _ in 0..1000 {
            assert_eq!(a.next_word(), b.next_word());
        }
    }

    #[test]
    fn substreams_for_distinct_indices_diverge() {
        let mut a = RandomStream::substream(42, DOMAIN_SOURCE, 0);
        let mut b = RandomStream::substream(42, DOMAIN_SOURCE, 1);
        let same = (0..64).filter(|_| a.next_word() == b.next_word()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn exponential_inversion_consumes_one_draw() {
        let mut sampled = RandomStream::from_seed(9);
        let mut reference = RandomStream::from_seed(9);
        for _ in 0..100 {
            let x = sampled.sample_exponential(2.0).unwrap();
            let u = reference.next_uniform();
            assert_relative_eq!(x, -u.ln() / 2.0, max_relative = 1e-15);
            assert!(x.is_finite() && x >= 0.0);
        }
    }

    #[test]
    fn exponential_sample_mean_tracks_rate() {
        let mut stream = RandomStream::from_seed(11);
        let rate = 4.0;
        let n = 200_000;
        let total: f64 = (0..n)
            .map(|_| stream.sample_exponential(rate).unwrap())
            .sum();
        let mean = total / n as f64;
        assert_relative_eq!(mean, 1.0 / rate, max_relative = 0.01);
    }

    #[test]
    fn categorical_inversion_picks_first_bucket_reaching_u() {
        // Cumulative [0.5, 1.0]: u = 0.75 falls in the second bucket.
        let weights = Weights::new(&[0.5, 0.5]).unwrap();
        assert_eq!(weights.invert(0.75), 1);
        assert_eq!(weights.invert(0.5), 0);
        assert_eq!(weights.invert(1.0), 1);
        assert_eq!(weights.invert(f64::MIN_POSITIVE), 0);
    }

    #[test]
    fn zero_weight_bucket_is_never_drawn() {
        let weights = Weights::new(&[0.5, 0.0, 0.5]).unwrap();
        let mut stream = RandomStream::from_seed(3);
        for _ in 0..10_000 {
            assert_ne!(stream.sample_index(&weights), 1);
        }
    }

    #[test]
    fn weights_validation_rejects_bad_inputs() {
        assert_eq!(Weights::new(&[]), Err(TrafficError::EmptyWeights));
        assert!(matches!(
            Weights::new(&[0.5, -0.5, 1.0]),
            Err(TrafficError::InvalidWeight { index: 1, .. })
        ));
        assert!(matches!(
            Weights::new(&[0.5, 0.4]),
            Err(TrafficError::UnnormalisedWeights { .. })
        ));
        assert!(Weights::new(&[0.25; 4]).is_ok());
        assert_eq!(Weights::uniform(4).unwrap().len(), 4);
    }

    #[test]
    fn normalised_gaps_pass_a_kolmogorov_smirnov_check() {
        // Gaps scaled by the rate are Exp(1); the KS statistic against
        // the unit-exponential CDF must stay under the 1% critical value
        // 1.628 / sqrt(n).
        let mut stream = RandomStream::from_seed(17);
        let rate = 1.0e7;
        let n = 100_000;
        let mut normalised: Vec<f64> = (0..n)
            .map(|_| stream.sample_exponential(rate).unwrap() * rate)
            .collect();
        normalised.sort_by(f64::total_cmp);
        let mut ks = 0.0f64;
        for (k, x) in normalised.iter().enumerate() {
            let cdf = -f64::exp_m1(-x);
            let low = k as f64 / n as f64;
            let high = (k + 1) as f64 / n as f64;
            ks = ks.max((cdf - low).abs()).max((high - cdf).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(ks < critical, "KS = {ks}, critical = {critical}");
    }

    #[test]
    fn traffic_spec_validation() {
        let good = TrafficSpec {
            per_source_rate: 1.0e7,
            num_sources: 4,
            destination_weights: vec![0.25; 4],
            seed: 42,
        };
        assert!(good.validate().is_ok());
        assert_eq!(good.weights().unwrap().len(), 4);
        let bad_rate = TrafficSpec {
            per_source_rate: 0.0,
            ..good.clone()
        };
        assert!(bad_rate.validate().is_err());
        let bad_weights = TrafficSpec {
            destination_weights: vec![0.3, 0.3],
            ..good
        };
        assert!(bad_weights.validate().is_err());
    }

    #[test]
    fn source_arrivals_are_strictly_increasing() {
        let destinations = Weights::uniform(4).unwrap();
        let stream = RandomStream::substream(42, DOMAIN_SOURCE, 0);
        let mut source = Source::new(1.0e7, PortChoice::Fixed(0), destinations, stream).unwrap();
        let mut ids = PacketIdGen::new();
        let mut last = 0.0;
        for _ in 0..1000 {
            let (at, packet) = source.next_arrival(&mut ids);
            assert!(at > last);
            assert_eq!(packet.created_at, at);
            assert_eq!(packet.input_port, 0);
            assert!(packet.output_port < 4);
            last = at;
        }
    }

    #[test]
    fn merged_sources_allocate_ids_in_time_order() {
        let seed = 42;
        let mut sources: Vec<Source> = (0..4)
            .map(|i| {
                Source::new(
                    1.0e7,
                    PortChoice::Fixed(i as usize),
                    Weights::uniform(4).unwrap(),
                    RandomStream::substream(seed, DOMAIN_SOURCE, i),
                )
                .unwrap()
            })
            .collect();
        let mut ids = PacketIdGen::new();
        let mut last_time = f64::NEG_INFINITY;
        let mut last_id = None;
        for _ in 0..4000 {
            let next = (0..sources.len())
                .min_by(|&a, &b| sources[a].next_time().total_cmp(&sources[b].next_time()))
                .unwrap();
            let (at, packet) = sources[next].next_arrival(&mut ids);
            assert!(at >= last_time);
            if let Some(prev) = last_id {
                assert_eq!(packet.id, prev + 1, "ids must increase along the merge");
            }
            last_time = at;
            last_id = Some(packet.id);
        }
    }

    #[test]
    fn source_stream_consumption_matches_documented_order() {
        // A standalone replay of [destination, gap] pairs must reproduce
        // the source's packets exactly.
        let seed = 99;
        let destinations = Weights::uniform(4).unwrap();
        let mut source = Source::new(
            2.0e6,
            PortChoice::Fixed(2),
            destinations.clone(),
            RandomStream::substream(seed, DOMAIN_SOURCE, 2),
        )
        .unwrap();
        let mut ids = PacketIdGen::new();

        let mut replay = RandomStream::substream(seed, DOMAIN_SOURCE, 2);
        let mut expected_time = replay.sample_exponential(2.0e6).unwrap();
        for _ in 0..200 {
            let (at, packet) = source.next_arrival(&mut ids);
            let expected_dest = replay.sample_index(&destinations);
            assert_relative_eq!(at, expected_time, max_relative = 1e-15);
            assert_eq!(packet.output_port, expected_dest);
            expected_time += replay.sample_exponential(2.0e6).unwrap();
        }
    }
}
