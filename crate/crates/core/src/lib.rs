//! Desk-scale simulator for communication-efficient federated optimization.
//!
//! The crate implements a penalized consensus scheme (`fedepm`) in which a
//! central server aggregates noisy client parameters by minimizing an
//! elastic-net disagreement penalty, plus two gradient-descent baselines
//! (`sfedavg`, `sfedprox`) sharing the same round clock, partial-participation
//! model, and Laplace privacy noise. Everything runs in-process on real or
//! synthetic logistic-regression data; there is no network transport.
//!
//! Module map:
//! - [`numkit`]: dense vectors, logistic loss/gradient kernels, Lipschitz bounds
//! - [`elastic_net`]: soft-thresholding, the elastic-net penalty and its
//!   closed-form aggregation solver (ENS)
//! - [`privacy`]: Laplace sampling, the decaying noise-scale schedule, SNR
//! - [`algorithms`]: the per-iteration client update rules and aggregators
//! - [`diagnostics`]: stationarity residuals, penalty threshold, descent monitor
//! - [`harness`]: round-driven orchestration, selection policies, stopping rules
//! - [`data`]: Adult-income ingestion, partitioning, synthetic data
//! - [`sweep`]: config parsing, multi-seed sweep execution, metric aggregation

pub mod algorithms;
pub mod data;
pub mod diagnostics;
pub mod elastic_net;
pub mod harness;
pub mod numkit;
pub mod privacy;
pub mod rng;
pub mod sweep;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("ingest error at line {line}: {msg}")]
    Ingest { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use algorithms::{AlgorithmKind, BaselineConfig, ClientHyper, ClientState, StepRule};
pub use data::Dataset;
pub use elastic_net::PenaltyConfig;
pub use harness::{ExperimentConfig, RoundTrace, RunResult, StopReason};
pub use numkit::{DataShard, ModelVector, Objective, Quadratic};
pub use privacy::{DpConfig, NoiseRecord};
