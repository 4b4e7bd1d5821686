use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};
use libm::fabs;

use crate::error::{config, Result};
use crate::model::Interval;

/// Uniform grid on the reference interval. Only the `nodes` interior points
/// are unknowns; the two end points carry the Dirichlet value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    interval: Interval,
    nodes: usize,
}

impl Grid {
    pub fn new(interval: Interval, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return config(alloc::format!("grid needs at least 3 interior nodes, got {nodes}"));
        }
        Ok(Self { interval, nodes })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.interval.length() / (self.nodes + 1) as f64
    }

    /// Coordinate of node `j`, where `0` and `len() + 1` are the end points.
    pub fn node(&self, j: usize) -> f64 {
        if j == self.nodes + 1 {
            self.interval.right
        } else {
            self.interval.left + j as f64 * self.spacing()
        }
    }

    /// Coordinates of the interior nodes.
    pub fn interior(&self) -> Vec<f64> {
        (1..=self.nodes).map(|j| self.node(j)).collect()
    }

    /// Coordinates of all nodes including both end points.
    pub fn all_nodes(&self) -> Vec<f64> {
        (0..=self.nodes + 1).map(|j| self.node(j)).collect()
    }

    pub fn zeros(&self) -> Field {
        Field(vec![0.0; self.nodes])
    }

    /// `(-Delta_h u)_j` with boundary value `boundary` at both ends.
    pub fn neg_laplacian(&self, u: &[f64], boundary: f64) -> Vec<f64> {
        let n = u.len();
        let inv_h2 = 1.0 / (self.spacing() * self.spacing());
        (0..n)
            .map(|j| {
                let left = if j == 0 { boundary } else { u[j - 1] };
                let right = if j + 1 == n { boundary } else { u[j + 1] };
                (2.0 * u[j] - left - right) * inv_h2
            })
            .collect()
    }
}

/// Values at the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn sup(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(fabs(*v)))
    }

    pub fn sup_distance(&self, other: &Field) -> f64 {
        sup_distance(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Values including both Dirichlet end points.
    pub fn with_boundary(&self, boundary: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len() + 2);
        out.push(boundary);
        out.extend_from_slice(&self.0);
        out.push(boundary);
        out
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max(fabs(x - y)))
}

/// Densities of both species at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub v1: Field,
    pub v2: Field,
    pub t: f64,
}

impl StatePair {
    pub fn new(v1: Field, v2: Field, t: f64) -> Self {
        Self { v1, v2, t }
    }

    pub fn sup_distance(&self, other: &StatePair) -> f64 {
        self.v1.sup_distance(&other.v1).max(self.v2.sup_distance(&other.v2))
    }

    pub fn sup(&self) -> f64 {
        self.v1.sup().max(self.v2.sup())
    }

    pub fn sup_norm(&self) -> f64 {
        self.v1.sup_norm().max(self.v2.sup_norm())
    }
}

/// Snapshots ordered by strictly increasing time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    snapshots: Vec<StatePair>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: StatePair) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if !(s.t > last.t) {
                return config(alloc::format!(
                    "trajectory times must increase ({} after {})",
                    s.t,
                    last.t
                ));
            }
        }
        self.snapshots.push(s);
        Ok(())
    }

    pub fn snapshots(&self) -> &[StatePair] {
        &self.snapshots
    }

    pub fn last(&self) -> Option<&StatePair> {
        self.snapshots.last()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}
