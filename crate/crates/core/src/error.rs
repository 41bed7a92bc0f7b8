use std::path::PathBuf;

use thiserror::Error;

use crate::assembly::SolveError;
use crate::element::ElementError;
use crate::geometry::GeometryError;
use crate::material::MaterialError;
use crate::mesh::MeshError;
use crate::problem::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: ElementError,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
