//! Fixtures shared by the benchmarks.

use tvss_core::graph::{generate_two_cluster, TwoCluster, TwoClusterConfig};

/// Two clusters of `cluster_size` nodes with the default wiring.
pub fn two_cluster(cluster_size: usize, seed: u64) -> TwoCluster {
    generate_two_cluster(&TwoClusterConfig {
        cluster_size,
        seed,
        ..Default::default()
    })
    .expect("benchmark instance")
}

/// Error level used for the benchmark runs.
pub fn epsilon(data: &TwoCluster) -> f64 {
    1e-5 * data.truth.norm_squared().sqrt()
}
