pub mod baselines;
pub mod experiment;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod numkernel;
pub mod split;
pub mod vgae;
