use thiserror::Error;

use crate::cluster::ClusterError;
use crate::dynamics::DynamicsError;
use crate::embedstore::EmbedError;
use crate::ingest::IngestError;
use crate::persistence::PersistError;
use crate::reduce::ReduceError;
use crate::represent::RepresentError;
use crate::stats::StatsError;
use crate::tune::TuneError;

/// Any error produced by a pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error(transparent)]
    Represent(#[from] RepresentError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
