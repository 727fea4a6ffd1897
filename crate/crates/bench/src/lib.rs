//! Criterion benchmarks for mesh generation, assembly, solves and level samples; see `benches/`.
