//! Benchmark helper crate; see the benches/ directory.
