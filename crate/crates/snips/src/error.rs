//! Error type shared by all simulator modules.

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum SimError {
    /// Parameter combination rejected before any work was done.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// Rejection sampling of the placement ran out of redraws.
    #[error("placement infeasible: redraw budget of {budget} exhausted")]
    PlacementInfeasible { budget: usize },
    /// The UE channel matrix carries no energy, so powers cannot be calibrated.
    #[error("degenerate channel: zero Frobenius norm")]
    DegenerateChannel,
    /// A jammer was requested but its channel carries no energy.
    #[error("degenerate jammer channel: zero norm with a jammer present")]
    DegenerateJammer,
    /// Operands do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// Cluster size must evenly divide the antenna count.
    #[error("cluster size {cluster_size} does not divide antenna count {antennas}")]
    ClusterMismatch { antennas: usize, cluster_size: usize },
    /// The loaded Gram matrix failed its positive-definite factorization.
    #[error("equalizer system matrix is not positive definite")]
    NotPositiveDefinite,
    /// A UE transmitted nothing, so its relative symbol error is undefined.
    #[error("zero-energy transmission for UE {0}")]
    ZeroEnergyTransmission(usize),
    /// An aggregate was requested over no data.
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    /// Config file or override could not be parsed.
    #[error("config error: {0}")]
    Config(String),
    /// A trial failed somewhere in the pipeline.
    #[error("trial {trial_index}: {source}")]
    Trial {
        trial_index: usize,
        #[source]
        source: Box<SimError>,
    },
    /// File could not be written.
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
