//! Shared fixtures for the benchmark targets.

use memsizer_core::traceio::{generate_synthetic, SyntheticPattern, SyntheticSpec, Workload};
use memsizer_core::units::{InputBytes, MemBytes};

/// A two-band workload of `n` tasks, the shape that stresses both the
/// sizers and the placement loop.
pub fn bimodal_workload(n: usize, seed: u64) -> Workload {
    let spec = SyntheticSpec {
        pattern: SyntheticPattern::Bimodal,
        n,
        slope: 6.0,
        intercept: MemBytes::from_mib(256),
        noise_sigma: MemBytes::from_mib(32),
        cluster_fraction: 0.3,
        input_max: InputBytes(768 << 20),
        seed,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).expect("satisfiable benchmark spec")
}
