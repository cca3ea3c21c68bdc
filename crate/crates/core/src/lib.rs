pub mod detector;
pub mod eval;
pub mod ingest;
pub mod lstm;
pub mod seed;
pub mod synth;
pub mod trace;
