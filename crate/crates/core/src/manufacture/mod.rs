//! Print preparation for a finished design: support geometry, isosurface
//! extraction and OBJ export.

mod marching;
mod obj;
mod supports;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use marching::marching_cubes;
pub use obj::{export_obj, parse_obj, read_obj, write_obj, ObjError};
pub use supports::{add_supports, SupportKind, SupportPreset};

pub const DEFAULT_ISO: f64 = 0.5;
pub const TARGET_LONGEST_EDGE_MM: f64 = 120.0;

/// Triangle mesh with per-vertex normals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn area_vector(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
    }

    pub fn centroid(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        [0, 1, 2].map(|k| (a[k] + b[k] + c[k]) / 3.0)
    }

    /// Axis-aligned bounds; `([0; 3], [0; 3])` for an empty mesh.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        if self.vertices.is_empty() {
            return ([0.0; 3], [0.0; 3]);
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn extents(&self) -> [f64; 3] {
        let (lo, hi) = self.bounding_box();
        [0, 1, 2].map(|k| hi[k] - lo[k])
    }

    /// Uses of every undirected edge.
    pub fn edge_uses(&self) -> HashMap<(u32, u32), usize> {
        let mut uses = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_closed_manifold(&self) -> bool {
        self.edge_uses().values().all(|&n| n == 2)
    }

    /// `V − E + F` over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        v - self.edge_uses().len() as i64 + self.triangles.len() as i64
    }

    /// Uniformly scaled copy whose longest bounding-box edge is `longest`.
    pub fn scaled_to_longest(&self, longest: f64) -> TriMesh {
        let edge = self.extents().into_iter().fold(0.0, f64::max);
        let s = if edge > 0.0 { longest / edge } else { 1.0 };
        TriMesh {
            vertices: self.vertices.iter().map(|v| v.map(|x| x * s)).collect(),
            normals: self.normals.clone(),
            triangles: self.triangles.clone(),
        }
    }

    /// Replaces zero normals by the area-weighted mean of adjacent faces.
    pub(crate) fn fill_missing_normals(&mut self) {
        let missing: Vec<bool> = self.normals.iter().map(|n| *n == [0.0; 3]).collect();
        if !missing.iter().any(|m| *m) {
            return;
        }
        let mut acc = vec![[0.0; 3]; self.vertices.len()];
        for t in 0..self.triangles.len() {
            let n = self.area_vector(t);
            for &i in &self.triangles[t] {
                if missing[i as usize] {
                    for k in 0..3 {
                        acc[i as usize][k] += n[k];
                    }
                }
            }
        }
        for (i, m) in missing.iter().enumerate() {
            if *m {
                self.normals[i] = marching::normalize(acc[i]);
            }
        }
    }
}

/// Highest score wins; ties go to the latest index.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b] > *s => {}
            _ => best = Some(i),
        }
    }
    best
}
