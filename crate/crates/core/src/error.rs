use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis mismatch: ({0} photons, {1} modes) vs ({2} photons, {3} modes)")]
    BasisMismatch(usize, usize, usize, usize),

    #[error("invalid mode index set: {0}")]
    InvalidModes(String),

    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix of size {0} is too large for the naive permanent (max 8)")]
    TooLarge(usize),

    #[error("photon count mismatch: input carries {input}, output carries {output}")]
    PhotonMismatch { input: usize, output: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("transfer matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("parameter vector has length {got}, layout expects {expected}")]
    ParameterLength { expected: usize, got: usize },

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn read_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn create_file(path: impl AsRef<Path>) -> Result<fs::File> {
    let path = path.as_ref();
    fs::File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}
