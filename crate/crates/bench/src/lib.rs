//! Criterion benchmarks for the centroflat kernels live in `benches/`.
