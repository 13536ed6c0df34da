use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("material not strongly convex: {0}")]
    Convexity(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("singular map: det J = {0}")]
    SingularMap(f64),
    #[error("laminate target not realizable, best relative residual {best_residual:.3e}")]
    Realizability { best_residual: f64 },
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("no coefficient for region tag {0}")]
    MissingRegion(u32),
    #[error("non-finite coefficient at ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("incompatible boundary data: {0}")]
    Data(String),
    #[error("fields live on different meshes or orders")]
    MeshMismatch,
    #[error("fit error: {0}")]
    Fit(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
