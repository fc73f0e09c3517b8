//! Criterion benchmarks for model fitting and the permutation engines; see `benches/`.
