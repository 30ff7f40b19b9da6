//! Shared fixtures for the benchmarks.

use privlab_core::TabularMechanism;

/// A random mechanism with a fixed seed.
pub fn random_mechanism(domain_size: usize, n: usize, output_size: usize) -> TabularMechanism {
    TabularMechanism::random(domain_size, n, output_size, 0xbe7c).expect("valid shape")
}
