//! Criterion benchmarks for the probe pipeline; see `benches/`.
