//! Criterion benchmarks for hilbert-core; see benches/.
