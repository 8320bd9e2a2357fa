//! Criterion benchmarks for the hot kernels of `dotsim-core`; see `benches/`.
