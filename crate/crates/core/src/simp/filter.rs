//! Linear cone density filter on a structured grid.

use crate::mesh::StructuredMesh;

/// Row-normalized sparse filter `x̃ = W x` with `w_ij = max(0, r − d_ij)` where
/// `d_ij` is the centroid distance in element-spacing units.
#[derive(Debug, Clone)]
pub struct DensityFilter {
    rmin: f64,
    /// CSR layout: neighbours of element i are `cols[start[i]..start[i+1]]`.
    start: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl DensityFilter {
    pub fn new(mesh: &StructuredMesh, rmin: f64) -> Self {
        let [nx, ny, nz] = mesh.counts();
        let reach = if rmin > 1.0 { rmin.ceil() as isize - 1 } else { 0 };
        let mut start = Vec::with_capacity(mesh.num_elements() + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        start.push(0);
        for k in 0..nz as isize {
            for j in 0..ny as isize {
                for i in 0..nx as isize {
                    let row_start = weights.len();
                    for dk in -reach..=reach {
                        for dj in -reach..=reach {
                            for di in -reach..=reach {
                                let (a, b, c) = (i + di, j + dj, k + dk);
                                if a < 0 || b < 0 || c < 0 || a >= nx as isize || b >= ny as isize || c >= nz as isize {
                                    continue;
                                }
                                let d = ((di * di + dj * dj + dk * dk) as f64).sqrt();
                                let w = (rmin - d).max(0.0);
                                if w > 0.0 {
                                    cols.push(mesh.element_index(a as usize, b as usize, c as usize));
                                    weights.push(w);
                                }
                            }
                        }
                    }
                    // rmin <= 1 leaves only the self weight, or none at all when
                    // rmin <= 0; fall back to the identity row.
                    if weights.len() == row_start {
                        cols.push(mesh.element_index(i as usize, j as usize, k as usize));
                        weights.push(1.0);
                    }
                    let total: f64 = weights[row_start..].iter().sum();
                    weights[row_start..].iter_mut().for_each(|w| *w /= total);
                    start.push(weights.len());
                }
            }
        }
        Self { rmin, start, cols, weights }
    }

    pub fn rmin(&self) -> f64 {
        self.rmin
    }

    pub fn len(&self) -> usize {
        self.start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let r = self.start[i]..self.start[i + 1];
                self.cols[r.clone()].iter().zip(&self.weights[r]).map(|(j, w)| w * x[*j]).sum()
            })
            .collect()
    }

    /// `Wᵀ g`, used to chain sensitivities back to the design variables.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for i in 0..self.len() {
            for idx in self.start[i]..self.start[i + 1] {
                out[self.cols[idx]] += self.weights[idx] * g[i];
            }
        }
        out
    }
}
