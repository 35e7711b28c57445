//! Criterion benchmarks for `qcarleson-core`; see `benches/`.
