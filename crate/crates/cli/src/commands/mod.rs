pub mod anomaly;
pub mod curves;
pub mod fit;
pub mod grid;
pub mod ingest;
pub mod report;
pub mod sample;
pub mod stats;
