//! Structured hexahedral grids and geometric node selection.
//!
//! Nodes and elements are numbered lexicographically with x varying fastest,
//! then y, then z. Local node order inside an element follows the usual
//! trilinear-hex convention: the bottom face (z-) counter-clockwise, then the
//! top face (z+) in the same order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("element count along {axis} must be at least 1, got {value}")]
    BadCount { axis: Axis, value: usize },
    #[error("extent along {axis} must be finite and positive, got {value}")]
    BadExtent { axis: Axis, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// Offsets of the eight element corners in (i, j, k) index space.
pub const HEX_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredMesh {
    pub nelx: usize,
    pub nely: usize,
    pub nelz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl StructuredMesh {
    pub fn new(
        nelx: usize,
        nely: usize,
        nelz: usize,
        lx: f64,
        ly: f64,
        lz: f64,
    ) -> Result<Self, MeshError> {
        for (axis, value) in Axis::ALL.into_iter().zip([nelx, nely, nelz]) {
            if value < 1 {
                return Err(MeshError::BadCount { axis, value });
            }
        }
        for (axis, value) in Axis::ALL.into_iter().zip([lx, ly, lz]) {
            if !(value.is_finite() && value > 0.0) {
                return Err(MeshError::BadExtent { axis, value });
            }
        }
        Ok(Self { nelx, nely, nelz, lx, ly, lz })
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.nelx, self.nely, self.nelz]
    }

    pub fn extents(&self) -> [f64; 3] {
        [self.lx, self.ly, self.lz]
    }

    pub fn node_counts(&self) -> [usize; 3] {
        [self.nelx + 1, self.nely + 1, self.nelz + 1]
    }

    pub fn num_nodes(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1) * (self.nelz + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.nelx * self.nely * self.nelz
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.num_nodes()
    }

    /// Element edge lengths along x, y, z.
    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lx / self.nelx as f64,
            self.ly / self.nely as f64,
            self.lz / self.nelz as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nelx + 1) * (j + (self.nely + 1) * k)
    }

    #[inline]
    pub fn node_ijk(&self, n: usize) -> [usize; 3] {
        let nx = self.nelx + 1;
        let ny = self.nely + 1;
        [n % nx, (n / nx) % ny, n / (nx * ny)]
    }

    pub fn node_coords(&self, n: usize) -> [f64; 3] {
        let [i, j, k] = self.node_ijk(n);
        let h = self.spacing();
        [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]
    }

    #[inline]
    pub fn element_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nelx * (j + self.nely * k)
    }

    #[inline]
    pub fn element_ijk(&self, e: usize) -> [usize; 3] {
        [e % self.nelx, (e / self.nelx) % self.nely, e / (self.nelx * self.nely)]
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let [i, j, k] = self.element_ijk(e);
        HEX_CORNERS.map(|[a, b, c]| self.node_index(i + a, j + b, k + c))
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 3] {
        let [i, j, k] = self.element_ijk(e);
        let h = self.spacing();
        [
            (i as f64 + 0.5) * h[0],
            (j as f64 + 0.5) * h[1],
            (k as f64 + 0.5) * h[2],
        ]
    }

    /// Global dof indices of an element, three per node in node order.
    pub fn element_dofs(&self, e: usize) -> [usize; 24] {
        let nodes = self.element_nodes(e);
        let mut dofs = [0usize; 24];
        for (a, n) in nodes.iter().enumerate() {
            for d in 0..3 {
                dofs[3 * a + d] = 3 * n + d;
            }
        }
        dofs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Eq,
    Le,
    Ge,
}

/// One half-space or plane condition on node coordinates.
///
/// Either an axis-aligned condition (`{"axis": "y", "op": "eq", "value": 0.0}`)
/// or a general plane through `normal · p = value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<[f64; 3]>,
    pub op: Comparator,
    pub value: f64,
}

impl Condition {
    pub fn axis(axis: Axis, op: Comparator, value: f64) -> Self {
        Self { axis: Some(axis), normal: None, op, value }
    }

    pub fn plane(normal: [f64; 3], op: Comparator, value: f64) -> Self {
        Self { axis: None, normal: Some(normal), op, value }
    }

    /// Unit-free direction the condition measures along.
    pub fn direction(&self) -> Option<[f64; 3]> {
        match (self.axis, self.normal) {
            (Some(a), None) => {
                let mut n = [0.0; 3];
                n[a.index()] = 1.0;
                Some(n)
            }
            (None, Some(n)) if n.iter().all(|v| v.is_finite()) && norm3(n) > 0.0 => Some(n),
            _ => None,
        }
    }

    /// Tests a point with geometric tolerance `tol` on the Euclidean distance
    /// to the plane.
    pub fn holds(&self, p: [f64; 3], tol: f64) -> bool {
        let Some(n) = self.direction() else {
            return false;
        };
        let len = norm3(n);
        let signed = (n[0] * p[0] + n[1] * p[1] + n[2] * p[2] - self.value) / len;
        match self.op {
            Comparator::Eq => signed.abs() <= tol,
            Comparator::Le => signed <= tol,
            Comparator::Ge => signed >= -tol,
        }
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Conjunction of conditions selecting a set of mesh nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct NodeSelector(pub Vec<Condition>);

impl NodeSelector {
    pub fn new(conditions: Vec<Condition>) -> Self {
        Self(conditions)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|c| {
                let op = match c.op {
                    Comparator::Eq => "=",
                    Comparator::Le => "<=",
                    Comparator::Ge => ">=",
                };
                match (c.axis, c.normal) {
                    (Some(a), _) => format!("{a} {op} {}", c.value),
                    (None, Some(n)) => {
                        format!("{}x+{}y+{}z {op} {}", n[0], n[1], n[2], c.value)
                    }
                    _ => "<invalid>".to_string(),
                }
            })
            .collect();
        if parts.is_empty() {
            "all nodes".to_string()
        } else {
            parts.join(" and ")
        }
    }

    /// Node indices satisfying every condition, in ascending order. The
    /// tolerance is half the minimum element spacing.
    pub fn select(&self, mesh: &StructuredMesh) -> Vec<usize> {
        let tol = 0.5 * mesh.min_spacing();
        (0..mesh.num_nodes())
            .filter(|&n| {
                let p = mesh.node_coords(n);
                self.0.iter().all(|c| c.holds(p, tol))
            })
            .collect()
    }
}
