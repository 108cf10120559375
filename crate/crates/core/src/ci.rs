//! The conditional-independence interface shared by tests and oracles.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::graph::{NodeId, NodeSet};

#[derive(Debug, Clone, PartialEq)]
pub struct CiDecision {
    pub independent: bool,
    pub p_value: f64,
    pub set: NodeSet,
    /// Set when the evidence was degenerate (singular matrix, depth cap).
    pub degenerate: bool,
}

impl CiDecision {
    pub fn oracle(independent: bool, set: &NodeSet) -> Self {
        CiDecision {
            independent,
            p_value: if independent { 1.0 } else { 0.0 },
            set: set.clone(),
            degenerate: false,
        }
    }

    pub fn degenerate(set: &NodeSet) -> Self {
        CiDecision {
            independent: false,
            p_value: 0.0,
            set: set.clone(),
            degenerate: true,
        }
    }
}

pub trait CiTest: Sync {
    fn test(&self, x: NodeId, y: NodeId, z: &NodeSet) -> CiDecision;

    fn independent(&self, x: NodeId, y: NodeId, z: &NodeSet) -> bool {
        self.test(x, y, z).independent
    }
}

impl<T: CiTest + ?Sized> CiTest for &T {
    fn test(&self, x: NodeId, y: NodeId, z: &NodeSet) -> CiDecision {
        (**self).test(x, y, z)
    }
}

/// Wraps a test with an optional cap on the conditioning-set size and a
/// counter of calls. Sets above the cap are reported dependent.
pub struct Budgeted<T> {
    inner: T,
    depth: Option<usize>,
    calls: AtomicU64,
}

impl<T: CiTest> Budgeted<T> {
    pub fn new(inner: T, depth: Option<usize>) -> Self {
        Budgeted {
            inner,
            depth,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn depth(&self) -> Option<usize> {
        self.depth
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: CiTest> CiTest for Budgeted<T> {
    fn test(&self, x: NodeId, y: NodeId, z: &NodeSet) -> CiDecision {
        if self.depth.is_some_and(|d| z.len() > d) {
            return CiDecision::degenerate(z);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.test(x, y, z)
    }
}
