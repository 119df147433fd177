//! Deterministic offline judge scoring surface richness and skeleton
//! branching of the thresholded design.

use topoagent_core::mesh::StructuredMesh;

use crate::client::AgentError;
use crate::judge::{Design, Judge, JudgeVerdict};
use crate::transcript::Exchange;

pub const STUB_THRESHOLD: f64 = 0.5;

/// Boolean voxel grid, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub solid: Vec<bool>,
}

impl VoxelGrid {
    pub fn from_densities(densities: &[f64], mesh: &StructuredMesh, threshold: f64) -> Self {
        assert_eq!(densities.len(), mesh.num_elements(), "one density per element");
        Self { dims: mesh.counts(), solid: densities.iter().map(|d| *d >= threshold).collect() }
    }

    pub fn empty(dims: [usize; 3]) -> Self {
        Self { dims, solid: vec![false; dims.iter().product()] }
    }

    fn index(&self, p: [usize; 3]) -> usize {
        p[0] + self.dims[0] * (p[1] + self.dims[1] * p[2])
    }

    fn coords(&self, i: usize) -> [usize; 3] {
        [i % self.dims[0], (i / self.dims[0]) % self.dims[1], i / (self.dims[0] * self.dims[1])]
    }

    pub fn set(&mut self, p: [usize; 3], v: bool) {
        let i = self.index(p);
        self.solid[i] = v;
    }

    /// Solid test with everything outside the grid void.
    pub fn get(&self, p: [isize; 3]) -> bool {
        if (0..3).any(|a| p[a] < 0 || p[a] as usize >= self.dims[a]) {
            return false;
        }
        self.solid[self.index(p.map(|v| v as usize))]
    }

    pub fn count(&self) -> usize {
        self.solid.iter().filter(|s| **s).count()
    }

    /// Faces between a solid voxel and void (or the outside).
    pub fn boundary_faces(&self) -> usize {
        let mut n = 0;
        for i in 0..self.solid.len() {
            if !self.solid[i] {
                continue;
            }
            let p = self.coords(i).map(|v| v as isize);
            for a in 0..3 {
                for s in [-1, 1] {
                    let mut q = p;
                    q[a] += s;
                    n += !self.get(q) as usize;
                }
            }
        }
        n
    }

    fn neighbourhood(&self, i: usize) -> [bool; 27] {
        let p = self.coords(i).map(|v| v as isize);
        let mut out = [false; 27];
        for (k, o) in OFFSETS.iter().enumerate() {
            out[k] = self.get([p[0] + o[0], p[1] + o[1], p[2] + o[2]]);
        }
        out
    }

    fn solid_neighbours(&self, i: usize) -> usize {
        let n = self.neighbourhood(i);
        (0..27).filter(|&k| k != CENTER && n[k]).count()
    }

    /// Topology-preserving thinning: border voxels are peeled one direction
    /// at a time while they are simple points and not line ends.
    pub fn skeleton(&self) -> VoxelGrid {
        let mut s = self.clone();
        loop {
            let mut changed = false;
            for dir in FACE_DIRS {
                let candidates: Vec<usize> = (0..s.solid.len())
                    .filter(|&i| {
                        if !s.solid[i] {
                            return false;
                        }
                        let p = s.coords(i).map(|v| v as isize);
                        !s.get([p[0] + dir[0], p[1] + dir[1], p[2] + dir[2]])
                    })
                    .collect();
                for i in candidates {
                    let n = s.neighbourhood(i);
                    let degree = (0..27).filter(|&k| k != CENTER && n[k]).count();
                    if degree > 1 && is_simple(&n) {
                        s.solid[i] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                return s;
            }
        }
    }

    /// 26-connected clusters of voxels with three or more solid neighbours.
    pub fn junction_clusters(&self) -> usize {
        let junction: Vec<bool> = (0..self.solid.len()).map(|i| self.solid[i] && self.solid_neighbours(i) >= 3).collect();
        let mut seen = vec![false; junction.len()];
        let mut clusters = 0;
        for start in 0..junction.len() {
            if !junction[start] || seen[start] {
                continue;
            }
            clusters += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                let p = self.coords(i).map(|v| v as isize);
                for o in OFFSETS {
                    let q = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
                    if (0..3).any(|a| q[a] < 0 || q[a] as usize >= self.dims[a]) {
                        continue;
                    }
                    let j = self.index(q.map(|v| v as usize));
                    if junction[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        clusters
    }
}

const CENTER: usize = 13;

/// Offsets of the 3×3×3 neighbourhood, x fastest; index 13 is the centre.
const OFFSETS: [[isize; 3]; 27] = {
    let mut out = [[0; 3]; 27];
    let mut k = 0;
    while k < 27 {
        out[k] = [(k % 3) as isize - 1, ((k / 3) % 3) as isize - 1, (k / 9) as isize - 1];
        k += 1;
    }
    out
};

const FACE_DIRS: [[isize; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];

fn manhattan(k: usize) -> isize {
    OFFSETS[k].iter().map(|v| v.abs()).sum()
}

/// Components of `cells` under the adjacency `adjacent`, counting only those
/// that contain a cell accepted by `anchor`.
fn components(cells: &[usize], adjacent: impl Fn(usize, usize) -> bool, anchor: impl Fn(usize) -> bool) -> usize {
    let mut seen = vec![false; cells.len()];
    let mut count = 0;
    for s in 0..cells.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut anchored = false;
        while let Some(a) = stack.pop() {
            anchored |= anchor(cells[a]);
            for b in 0..cells.len() {
                if !seen[b] && adjacent(cells[a], cells[b]) {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        count += anchored as usize;
    }
    count
}

/// Removing the centre keeps one 26-component of solid in the punctured
/// 26-neighbourhood and one 6-component of void in the 18-neighbourhood
/// touching the centre.
fn is_simple(n: &[bool; 27]) -> bool {
    let diff = |a: usize, b: usize| [0, 1, 2].map(|k| (OFFSETS[a][k] - OFFSETS[b][k]).abs());
    let solid: Vec<usize> = (0..27).filter(|&k| k != CENTER && n[k]).collect();
    let adj26 = |a: usize, b: usize| diff(a, b).iter().all(|d| *d <= 1);
    if components(&solid, adj26, |_| true) != 1 {
        return false;
    }
    let void: Vec<usize> = (0..27).filter(|&k| k != CENTER && !n[k] && manhattan(k) <= 2).collect();
    let adj6 = |a: usize, b: usize| diff(a, b).iter().sum::<isize>() == 1;
    components(&void, adj6, |k| manhattan(k) == 1) == 1
}

/// Measurements behind a stub score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubMetrics {
    pub solid_voxels: usize,
    pub faces_per_voxel: f64,
    pub junctions: usize,
    pub surface_term: f64,
    pub junction_term: f64,
}

pub fn stub_metrics(grid: &VoxelGrid) -> StubMetrics {
    let n = grid.count();
    if n == 0 {
        return StubMetrics { solid_voxels: 0, faces_per_voxel: 0.0, junctions: 0, surface_term: 0.0, junction_term: 0.0 };
    }
    let faces_per_voxel = grid.boundary_faces() as f64 / n as f64;
    let junctions = grid.skeleton().junction_clusters();
    StubMetrics {
        solid_voxels: n,
        faces_per_voxel,
        junctions,
        surface_term: ((faces_per_voxel - 2.0) / 4.0).clamp(0.0, 1.0),
        junction_term: (10.0 * junctions as f64 / n as f64).min(1.0),
    }
}

pub fn stub_score(grid: &VoxelGrid) -> JudgeVerdict {
    let m = stub_metrics(grid);
    if m.solid_voxels == 0 {
        return JudgeVerdict::new(1.0, "No solid voxels.", None);
    }
    let raw = (1.0 + 2.0 * m.surface_term + 2.0 * m.junction_term).clamp(1.0, 5.0);
    JudgeVerdict::new(
        raw,
        format!(
            "{:.2} boundary faces per solid voxel; {} skeleton junction(s) over {} solid voxels.",
            m.faces_per_voxel, m.junctions, m.solid_voxels
        ),
        None,
    )
}

/// Scores thresholded projected densities.
pub fn stub_judge(densities: &[f64], mesh: &StructuredMesh) -> JudgeVerdict {
    stub_score(&VoxelGrid::from_densities(densities, mesh, STUB_THRESHOLD))
}

/// [`Judge`] that applies [`stub_judge`] to every design.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubJudge;

impl Judge for StubJudge {
    fn judge(&mut self, designs: &[Design], _: usize, _: &mut Vec<Exchange>) -> Result<Vec<JudgeVerdict>, AgentError> {
        if designs.len() < 2 {
            return Err(AgentError::Precondition(format!("judging needs at least two designs, got {}", designs.len())));
        }
        Ok(designs.iter().map(|d| stub_judge(&d.densities, &d.mesh)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dims: [usize; 3], voxels: &[[usize; 3]]) -> VoxelGrid {
        let mut g = VoxelGrid::empty(dims);
        for v in voxels {
            g.set(*v, true);
        }
        g
    }

    fn bar(len: usize) -> Vec<[usize; 3]> {
        (0..len).map(|i| [i + 1, 10, 0]).collect()
    }

    /// Stem of 7 below a centre voxel, two diagonal-free arms of 6.
    fn y_tree() -> Vec<[usize; 3]> {
        let mut v = vec![[10, 10, 0]];
        v.extend((1..=7).map(|k| [10, 10 - k, 0]));
        v.extend((1..=6).map(|k| [10 - k, 10, 0]));
        v.extend((1..=6).map(|k| [10 + k, 10, 0]));
        v
    }

    #[test]
    fn solid_cube_scores_one() {
        let mesh = StructuredMesh::new(4, 4, 4, 1.0, 1.0, 1.0).unwrap();
        let v = stub_judge(&[1.0; 64], &mesh);
        assert_eq!(v.score, 1.0);
        let m = stub_metrics(&VoxelGrid::from_densities(&[1.0; 64], &mesh, 0.5));
        assert_eq!(m.faces_per_voxel, 1.5);
        assert_eq!(m.junctions, 0);
    }

    #[test]
    fn empty_solid_scores_one() {
        let mesh = StructuredMesh::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(stub_judge(&[0.1; 8], &mesh).score, 1.0);
    }

    #[test]
    fn y_tree_beats_a_bar_of_equal_size() {
        let y = y_tree();
        let dims = [21, 21, 1];
        let (gy, gb) = (grid(dims, &y), grid(dims, &bar(y.len())));
        assert_eq!(gb.count(), gy.count());
        // Oracle: a face-connected tree of n voxels has n − 1 shared faces,
        // so 6n − 2(n − 1) exposed ones, the same as the bar.
        let n = y.len();
        assert_eq!(gy.boundary_faces(), 6 * n - 2 * (n - 1));
        assert_eq!(gb.boundary_faces(), gy.boundary_faces());
        let sa = ((gy.boundary_faces() as f64 / n as f64) - 2.0) / 4.0;
        let (my, mb) = (stub_metrics(&gy), stub_metrics(&gb));
        assert_eq!((mb.junctions, my.junctions), (0, 1));
        assert_eq!(stub_score(&gb).score, snap(1.0 + 2.0 * sa));
        assert_eq!(stub_score(&gy).score, snap(1.0 + 2.0 * sa + 2.0 * (10.0 / n as f64).min(1.0)));
        assert!(stub_score(&gy).score > stub_score(&gb).score);
    }

    fn snap(s: f64) -> f64 {
        ((s * 2.0).round() / 2.0).clamp(1.0, 5.0)
    }

    #[test]
    fn fourth_branch_never_lowers_the_score() {
        let dims = [21, 21, 1];
        let base = stub_score(&grid(dims, &y_tree())).score;
        // Branch off the stem.
        let mut side = y_tree();
        side.extend((1..=5).map(|k| [10 + k, 6, 0]));
        // Branch at the existing junction.
        let mut cross = y_tree();
        cross.extend((1..=6).map(|k| [10, 10 + k, 0]));
        for v in [side, cross] {
            let g = grid(dims, &v);
            assert!(stub_score(&g).score >= base, "{} < {base}", stub_score(&g).score);
        }
        assert_eq!(stub_metrics(&grid(dims, &{
            let mut s = y_tree();
            s.extend((1..=5).map(|k| [10 + k, 6, 0]));
            s
        })).junctions, 2);
    }

    #[test]
    fn thinning_keeps_lines_and_shrinks_slabs() {
        let dims = [21, 21, 1];
        let b = grid(dims, &bar(12));
        assert_eq!(b.skeleton(), b);
        // The centre of the Y is redundant under 26-adjacency: its arms touch
        // the stem diagonally.
        let y = grid(dims, &y_tree());
        let sk = y.skeleton();
        assert_eq!(sk.count(), y.count() - 1);
        assert!(!sk.get([10, 10, 0]));
        assert_eq!(sk.junction_clusters(), 1);
        let mut slab = VoxelGrid::empty([9, 5, 3]);
        slab.solid.iter_mut().for_each(|s| *s = true);
        let sk = slab.skeleton();
        assert!(sk.count() >= 1 && sk.count() < 9);
        assert_eq!(sk.junction_clusters(), 0);
    }

    #[test]
    fn ring_is_not_thinned_away() {
        let mut g = VoxelGrid::empty([5, 5, 1]);
        for i in 0..5 {
            for j in 0..5 {
                if i == 0 || j == 0 || i == 4 || j == 4 {
                    g.set([i, j, 0], true);
                }
            }
        }
        let sk = g.skeleton();
        assert!(sk.count() >= 4, "a loop cannot shrink to a point");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn skeleton_is_a_subset_and_scores_stay_on_the_lattice(bits in proptest::collection::vec(any::<bool>(), 6 * 5 * 4)) {
            let g = VoxelGrid { dims: [6, 5, 4], solid: bits };
            let sk = g.skeleton();
            prop_assert!(sk.solid.iter().zip(&g.solid).all(|(s, o)| !*s || *o));
            prop_assert_eq!(sk.skeleton(), sk.clone());
            let v = stub_score(&g);
            prop_assert!((1.0..=5.0).contains(&v.score));
            prop_assert_eq!((v.score * 2.0).fract(), 0.0);
        }
    }
}
