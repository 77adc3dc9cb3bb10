//! Sequential-vs-parallel benchmarks (placeholder; filled in with the model).

fn main() {}
