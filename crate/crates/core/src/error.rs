use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no edge between {0} and {1}")]
    MissingEdge(String, String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(String, String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("graph is not a DAG: {0}")]
    NotADag(String),
    #[error("not a legal MAG: {0}")]
    IllegalMag(String),
    #[error("circle component is not chordal around {0}")]
    NotChordal(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("structural error: {0}")]
    Structural(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot place {edges} edges on {nodes} nodes")]
    InfeasibleDensity { edges: usize, nodes: usize },
    #[error("node sets differ: {0}")]
    NodeSetMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
