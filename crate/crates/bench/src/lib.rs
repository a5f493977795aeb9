//! Criterion benchmarks for the tradeaudit engine live under `benches/`.
