use thiserror::Error;

/// Errors raised by the geometry, meshing, solver and sweep layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cell budget exceeded at eps = {eps}: {cells} cells > {budget}")]
    Budget { eps: f64, cells: usize, budget: usize },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("point ({0}, {1}) is outside the mesh")]
    Location(f64, f64),
    #[error("tag error: {0}")]
    Tag(String),
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("selected system singular (condition estimate {cond:e})")]
    Selection { cond: f64 },
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("config errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
