//! Criterion benchmark shell for the core primitives. The measurements of
//! record come from the `risbench` binary, which enforces the vector gate
//! and the fixed CSV schema; the Criterion benches here are for interactive
//! profiling of individual primitives.
