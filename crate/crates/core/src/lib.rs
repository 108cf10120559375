pub mod error;
pub mod graph;

pub use error::{Error, Result};
pub use graph::{AncestorIndex, Edge, Endpoint, MixedGraph, NodeId, NodeSet, Triple};
pub mod blocking;
pub mod ci;
pub mod cpdag;
pub mod discpath;
pub mod grid;
pub mod orientation;
pub mod par;
pub mod search;
pub mod separation;
pub mod sepset;
pub mod sim;
pub mod stats;
pub mod text;
