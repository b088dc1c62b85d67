//! Cross-checks the closed-form queue metrics against an independent
//! brute-force oracle and against frozen reference values for the default
//! operating point.
//!
//! The oracle never uses the geometric-series closed form: it materialises
//! the raw weights `rho^n`, normalises them by direct summation, and takes
//! moments by direct summation.  Agreement between the two routes validates
//! the algebra and the numerically stable evaluation.

use approx::assert_relative_eq;
use bufsim_core::analytics::{
    blocking_probability, compare_architectures, expected_occupancy, metrics,
    state_distribution,
};
use bufsim_core::QueueSpec;

/// Normalised stationary distribution by direct summation of raw weights.
fn oracle_distribution(rho: f64, capacity: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..=capacity).map(|n| rho.powi(n as i32)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn oracle_occupancy(rho: f64, capacity: usize) -> f64 {
    oracle_distribution(rho, capacity)
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum()
}

fn oracle_blocking(rho: f64, capacity: usize) -> f64 {
    oracle_distribution(rho, capacity)[capacity]
}

#[test]
fn distribution_matches_oracle_on_a_grid() {
    let rhos = [
        0.05, 0.2, 0.5, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999, 1.001, 1.01, 1.1, 1.5, 2.0, 4.0,
        8.0,
    ];
    let capacities = [1usize, 2, 3, 8, 32, 64, 128, 200];
    for &rho in &rhos {
        for &capacity in &capacities {
            let oracle = oracle_distribution(rho, capacity);
            let lib = state_distribution(rho, capacity).unwrap();
            assert_eq!(lib.len(), capacity + 1);
            for (n, (o, l)) in oracle.iter().zip(lib.iter()).enumerate() {
                assert_relative_eq!(o, l, max_relative = 1e-10, epsilon = 1e-300);
                assert!(*l >= 0.0, "negative probability at rho={rho} N={capacity} n={n}");
            }
        }
    }
}

#[test]
fn occupancy_and_blocking_match_oracle_on_a_grid() {
    let rhos = [0.05, 0.5, 0.9, 0.99, 0.995, 0.9999, 1.0001, 1.01, 1.5, 2.0, 8.0];
    let capacities = [1usize, 2, 8, 32, 128, 200];
    for &rho in &rhos {
        for &capacity in &capacities {
            assert_relative_eq!(
                oracle_occupancy(rho, capacity),
                expected_occupancy(rho, capacity).unwrap(),
                max_relative = 1e-9,
            );
            assert_relative_eq!(
                oracle_blocking(rho, capacity),
                blocking_probability(rho, capacity).unwrap(),
                max_relative = 1e-9,
                epsilon = 1e-300,
            );
        }
    }
}

#[test]
fn default_operating_point_matches_frozen_references() {
    // rho = 1e7 / 1.005e7 and the derived metrics, frozen from an
    // independent evaluation of the normalised-weight sums.
    let distributed = metrics(&QueueSpec::new(1.0e7, 1.005e7, 32).unwrap()).unwrap();
    assert_relative_eq!(distributed.rho, 0.9950248756218906, max_relative = 1e-14);
    assert_relative_eq!(
        distributed.expected_occupancy,
        15.548000458297707,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        distributed.blocking_probability,
        0.027947272657833686,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        distributed.naive_latency,
        1.5548000458297708e-6,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        distributed.effective_latency,
        1.5995017575651275e-6,
        max_relative = 1e-12
    );

    let common = metrics(&QueueSpec::new(4.0e7, 4.02e7, 128).unwrap()).unwrap();
    assert_relative_eq!(common.rho, 0.9950248756218906, max_relative = 1e-14);
    assert_relative_eq!(common.expected_occupancy, 57.13119534399377, max_relative = 1e-12);
    assert_relative_eq!(
        common.blocking_probability,
        0.005537550568062265,
        max_relative = 1e-12
    );
    assert_relative_eq!(common.naive_latency, 1.428279883599844e-6, max_relative = 1e-12);
    assert_relative_eq!(
        common.effective_latency,
        1.4362330970020174e-6,
        max_relative = 1e-12
    );
}

#[test]
fn four_port_comparison_matches_frozen_references() {
    let base = QueueSpec::new(1.0e7, 1.005e7, 32).unwrap();
    let cmp = compare_architectures(&base, 4).unwrap();
    assert_relative_eq!(cmp.blocking_ratio, 5.046865453296109, max_relative = 1e-10);
    assert_relative_eq!(
        cmp.latency_improvement_percent,
        8.137391207909634,
        max_relative = 1e-10
    );
    assert_relative_eq!(
        cmp.latency_ratio,
        1.5548000458297708e-6 / 1.428279883599844e-6,
        max_relative = 1e-10
    );
    assert!(cmp.blocking_ratio >= 4.0);
}

#[test]
fn rounded_intensity_keeps_the_headline_occupancies() {
    // The headline figures are commonly quoted at rho rounded to 0.995;
    // both occupancies stay within a hundredth of the exact-rate values.
    assert_relative_eq!(
        expected_occupancy(0.995, 32).unwrap(),
        15.545736848393545,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        expected_occupancy(0.995, 128).unwrap(),
        57.097237684751235,
        max_relative = 1e-12
    );
}

#[test]
fn occupancy_approaches_the_infinite_buffer_limit() {
    // For rho < 1 and N large, E(n) tends to rho / (1 - rho).
    let rho = 0.5_f64;
    let limit = rho / (1.0 - rho);
    let e = expected_occupancy(rho, 10_000).unwrap();
    assert!((e - limit).abs() < 1e-9, "E = {e}, limit = {limit}");
    let p = blocking_probability(rho, 10_000).unwrap();
    assert!((0.0..1e-300).contains(&p));
}

#[test]
fn deep_buffers_stay_finite_for_heavy_overload() {
    // rho > 1 exercises the reflection path; raw weights would overflow
    // around rho^1024 for rho = 2 but the metrics stay finite.
    let e = expected_occupancy(2.0, 4096).unwrap();
    assert!(e.is_finite());
    assert_relative_eq!(e, 4096.0 - 1.0, max_relative = 1e-9);
    let p = blocking_probability(2.0, 4096).unwrap();
    assert_relative_eq!(p, 0.5, max_relative = 1e-12);
}
