use std::path::PathBuf;

use gomkit_core::bvh::BvhError;
use gomkit_core::dexterity::DexterityError;
use gomkit_core::gom::GomError;
use gomkit_core::metrics::EvaluateError;
use gomkit_core::preprocess::PreprocessError;
use gomkit_core::recognition::RecognitionError;
use gomkit_core::similarity::SimilarityError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing artifact {}; run `gomkit {stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Bvh { path: PathBuf, source: BvhError },
    #[error("{context}: {source}")]
    Preprocess { context: String, source: PreprocessError },
    #[error("{context}: {source}")]
    Gom { context: String, source: GomError },
    #[error("gesture {gesture}: {source}")]
    Similarity { gesture: String, source: SimilarityError },
    #[error("gesture {gesture}: {source}")]
    Evaluate { gesture: String, source: EvaluateError },
    #[error(transparent)]
    Dexterity(#[from] DexterityError),
    #[error("recognition: {0}")]
    Recognition(#[from] RecognitionError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("network: {0}")]
    Network(String),
    #[error("checksum mismatch for {}: expected {expected}, found {actual}; cache entry purged", path.display())]
    Checksum { path: PathBuf, expected: String, actual: String },
}

impl Error {
    /// Stable name of the error kind, printed by the binary.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Config(_) => "ConfigError",
            Error::MissingArtifact { .. } => "MissingArtifactError",
            Error::Io { .. } => "IoError",
            Error::Format { .. } => "FormatError",
            Error::Bvh { .. } => "BvhError",
            Error::Preprocess { .. } => "PreprocessError",
            Error::Gom { .. } => "GomError",
            Error::Similarity { .. } => "SimilarityError",
            Error::Evaluate { .. } => "EvaluateError",
            Error::Dexterity(_) => "DexterityError",
            Error::Recognition(_) => "RecognitionError",
            Error::Manifest(_) => "ManifestError",
            Error::Network(_) => "NetworkError",
            Error::Checksum { .. } => "ChecksumError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>) -> impl FnOnce(String) -> Self {
        let path = path.into();
        move |message| Error::Format { path, message }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
