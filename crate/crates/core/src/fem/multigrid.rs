//! Geometric multigrid V-cycle on nested structured grids.
//!
//! The finest level is applied matrix-free from the unit element stiffness and
//! per-element moduli. Coarser levels carry one dense 24×24 matrix per element,
//! built as the Galerkin product `Pᵀ A P` with trilinear prolongation; since a
//! fine element only interpolates from the corners of its parent, the product
//! can be formed element by element. Axes are coarsened independently so thin
//! directions stop early.

use super::band::BandCholesky;
use super::element::{ElementMatrix, ELEMENT_DOFS};
use crate::mesh::HEX_CORNERS;

const JACOBI_DAMPING: f64 = 0.6;
/// Cap on `ω · λmax(D⁻¹A)`; the smoother stays an A-norm contraction below 2.
const DAMPING_SAFETY: f64 = 1.6;
const POWER_ITERATIONS: usize = 12;
const SMOOTHING_SWEEPS: usize = 2;
/// Work bound `n · bw²` above which the coarsest level is smoothed instead of
/// factorized.
const DIRECT_WORK_LIMIT: f64 = 4e8;
const COARSE_JACOBI_SWEEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dims {
    pub elems: [usize; 3],
}

impl Dims {
    pub fn nodes(&self) -> [usize; 3] {
        self.elems.map(|e| e + 1)
    }
    pub fn num_nodes(&self) -> usize {
        self.nodes().iter().product()
    }
    pub fn num_elements(&self) -> usize {
        self.elems.iter().product()
    }
    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.nodes();
        i + nx * (j + ny * k)
    }
    #[inline]
    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let [ex, ey, _] = self.elems;
        let (i, j, k) = (e % ex, (e / ex) % ey, e / (ex * ey));
        HEX_CORNERS.map(|[a, b, c]| self.node(i + a, j + b, k + c))
    }
}

/// Per-axis coarsening factors from the fine grid down, honouring the level
/// budget. An axis halves only while it stays at two or more elements.
pub(crate) fn plan_levels(fine: [usize; 3], n_level: usize) -> Vec<(Dims, [usize; 3])> {
    let mut out = vec![(Dims { elems: fine }, [1, 1, 1])];
    while out.len() < n_level {
        let cur = out.last().unwrap().0.elems;
        let ratio = cur.map(|c| if c % 2 == 0 && c / 2 >= 2 { 2 } else { 1 });
        if ratio == [1, 1, 1] {
            log::info!(
                "multigrid: {} level(s) requested, grid {:?} supports only {}",
                n_level,
                fine,
                out.len()
            );
            break;
        }
        let next = [cur[0] / ratio[0], cur[1] / ratio[1], cur[2] / ratio[2]];
        out.push((Dims { elems: next }, ratio));
    }
    out
}

/// 1D interpolation stencil from fine node `i` onto coarse nodes.
fn stencil(i: usize, ratio: usize) -> ([(usize, f64); 2], usize) {
    if ratio == 1 || i.is_multiple_of(2) {
        ([(i / ratio, 1.0), (0, 0.0)], 1)
    } else {
        ([((i - 1) / 2, 0.5), (i.div_ceil(2), 0.5)], 2)
    }
}

/// Weights `w[a][A]` from parent corner A to child corner a for a child at
/// `offset` inside its parent.
fn child_weights(offset: [usize; 3], ratio: [usize; 3]) -> [[f64; 8]; 8] {
    let mut w = [[0.0; 8]; 8];
    for (a, ca) in HEX_CORNERS.iter().enumerate() {
        let t: [f64; 3] = std::array::from_fn(|d| (offset[d] + ca[d]) as f64 / ratio[d] as f64);
        for (big, cb) in HEX_CORNERS.iter().enumerate() {
            let mut v = 1.0;
            for d in 0..3 {
                v *= if cb[d] == 1 { t[d] } else { 1.0 - t[d] };
            }
            w[a][big] = v;
        }
    }
    w
}

/// `out += s · Pᵀ K P` with `P[(a,d),(A,D)] = w[a][A] δ(d,D)`.
fn galerkin_add(k: &ElementMatrix, w: &[[f64; 8]; 8], s: f64, out: &mut ElementMatrix) {
    let mut t = [0.0; ELEMENT_DOFS * ELEMENT_DOFS];
    for i in 0..ELEMENT_DOFS {
        let row = k.row(i);
        for big in 0..8 {
            for comp in 0..3 {
                let mut acc = 0.0;
                for b in 0..8 {
                    acc += row[3 * b + comp] * w[b][big];
                }
                t[i * ELEMENT_DOFS + 3 * big + comp] = acc;
            }
        }
    }
    for big_a in 0..8 {
        for comp in 0..3 {
            let r = 3 * big_a + comp;
            for c in 0..ELEMENT_DOFS {
                let mut acc = 0.0;
                for a in 0..8 {
                    acc += w[a][big_a] * t[(3 * a + comp) * ELEMENT_DOFS + c];
                }
                out.0[r * ELEMENT_DOFS + c] += s * acc;
            }
        }
    }
}

/// The fine operator: `Σ_e E_e k0` restricted to free dofs.
pub(crate) struct FineOperator<'a> {
    pub dims: Dims,
    pub k0: &'a ElementMatrix,
    pub moduli: &'a [f64],
    pub free: &'a [bool],
}

impl FineOperator<'_> {
    /// `y = A x` with fixed entries of x treated as zero and of y set to zero.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        apply_elements(self.dims, x, y, |e, xl, yl| self.k0.mul_add(self.moduli[e], xl, yl));
        for (yi, &f) in y.iter_mut().zip(self.free) {
            if !f {
                *yi = 0.0;
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; 3 * self.dims.num_nodes()];
        for e in 0..self.dims.num_elements() {
            let nodes = self.dims.element_nodes(e);
            for (a, n) in nodes.iter().enumerate() {
                for c in 0..3 {
                    let l = 3 * a + c;
                    d[3 * n + c] += self.moduli[e] * self.k0.get(l, l);
                }
            }
        }
        d
    }

    fn element_matrix(&self, e: usize) -> ElementMatrix {
        let nodes = self.dims.element_nodes(e);
        let mut k = self.k0.scaled(self.moduli[e]);
        for (a, n) in nodes.iter().enumerate() {
            for c in 0..3 {
                if !self.free[3 * n + c] {
                    let l = 3 * a + c;
                    for m in 0..ELEMENT_DOFS {
                        k.0[l * ELEMENT_DOFS + m] = 0.0;
                        k.0[m * ELEMENT_DOFS + l] = 0.0;
                    }
                }
            }
        }
        k
    }

    fn element_touches_fixed(&self, e: usize) -> bool {
        self.dims
            .element_nodes(e)
            .iter()
            .any(|n| (0..3).any(|c| !self.free[3 * n + c]))
    }
}

#[inline]
fn apply_elements(
    dims: Dims,
    x: &[f64],
    y: &mut [f64],
    mut local: impl FnMut(usize, &[f64; ELEMENT_DOFS], &mut [f64; ELEMENT_DOFS]),
) {
    y.iter_mut().for_each(|v| *v = 0.0);
    let mut xl = [0.0; ELEMENT_DOFS];
    let mut yl = [0.0; ELEMENT_DOFS];
    for e in 0..dims.num_elements() {
        let nodes = dims.element_nodes(e);
        for (a, n) in nodes.iter().enumerate() {
            xl[3 * a..3 * a + 3].copy_from_slice(&x[3 * n..3 * n + 3]);
        }
        yl.iter_mut().for_each(|v| *v = 0.0);
        local(e, &xl, &mut yl);
        for (a, n) in nodes.iter().enumerate() {
            for c in 0..3 {
                y[3 * n + c] += yl[3 * a + c];
            }
        }
    }
}

struct CoarseLevel {
    dims: Dims,
    ratio: [usize; 3],
    elements: Vec<ElementMatrix>,
    inv_diag: Vec<f64>,
}

impl CoarseLevel {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        apply_elements(self.dims, x, y, |e, xl, yl| self.elements[e].mul_add(1.0, xl, yl));
        for (yi, d) in y.iter_mut().zip(&self.inv_diag) {
            if *d == 0.0 {
                *yi = 0.0;
            }
        }
    }
}

enum CoarseSolve {
    Direct(BandCholesky),
    Smooth,
}

pub(crate) struct Hierarchy<'a> {
    fine: FineOperator<'a>,
    fine_inv_diag: Vec<f64>,
    levels: Vec<CoarseLevel>,
    coarse: CoarseSolve,
    damping: Vec<f64>,
}

fn inverse_diagonal(diag: &[f64], active: impl Fn(usize) -> bool) -> Vec<f64> {
    let max = diag.iter().cloned().fold(0.0, f64::max);
    diag.iter()
        .enumerate()
        .map(|(i, &d)| if active(i) && d > 1e-13 * max { 1.0 / d } else { 0.0 })
        .collect()
}

impl<'a> Hierarchy<'a> {
    pub fn build(fine: FineOperator<'a>, plan: &[(Dims, [usize; 3])]) -> Self {
        let fine_inv_diag = {
            let d = fine.diagonal();
            inverse_diagonal(&d, |i| fine.free[i])
        };

        // Child-weight tables are shared by every parent with the same ratio.
        let mut levels: Vec<CoarseLevel> = Vec::new();
        for &(dims, ratio) in plan.iter().skip(1) {
            let finer_dims = levels.last().map(|l| l.dims).unwrap_or(fine.dims);
            let n_off = ratio[0] * ratio[1] * ratio[2];
            let offsets: Vec<[usize; 3]> = (0..n_off)
                .map(|o| [o % ratio[0], (o / ratio[0]) % ratio[1], o / (ratio[0] * ratio[1])])
                .collect();
            let weights: Vec<[[f64; 8]; 8]> =
                offsets.iter().map(|&o| child_weights(o, ratio)).collect();
            let unit_products: Vec<ElementMatrix> = if levels.is_empty() {
                weights
                    .iter()
                    .map(|w| {
                        let mut g = ElementMatrix::zeros();
                        galerkin_add(fine.k0, w, 1.0, &mut g);
                        g
                    })
                    .collect()
            } else {
                Vec::new()
            };

            let [ex, ey, _] = dims.elems;
            let [fx, fy, _] = finer_dims.elems;
            let mut elements = Vec::with_capacity(dims.num_elements());
            for big in 0..dims.num_elements() {
                let (i, j, k) = (big % ex, (big / ex) % ey, big / (ex * ey));
                let mut acc = ElementMatrix::zeros();
                for (o, off) in offsets.iter().enumerate() {
                    let ci = i * ratio[0] + off[0];
                    let cj = j * ratio[1] + off[1];
                    let ck = k * ratio[2] + off[2];
                    let child = ci + fx * (cj + fy * ck);
                    match levels.last() {
                        None => {
                            if fine.element_touches_fixed(child) {
                                galerkin_add(&fine.element_matrix(child), &weights[o], 1.0, &mut acc);
                            } else {
                                let s = fine.moduli[child];
                                for (a, g) in acc.0.iter_mut().zip(unit_products[o].0.iter()) {
                                    *a += s * g;
                                }
                            }
                        }
                        Some(prev) => galerkin_add(&prev.elements[child], &weights[o], 1.0, &mut acc),
                    }
                }
                elements.push(acc);
            }
            let mut diag = vec![0.0; 3 * dims.num_nodes()];
            for (e, m) in elements.iter().enumerate() {
                for (a, n) in dims.element_nodes(e).iter().enumerate() {
                    for c in 0..3 {
                        diag[3 * n + c] += m.get(3 * a + c, 3 * a + c);
                    }
                }
            }
            let inv_diag = inverse_diagonal(&diag, |_| true);
            levels.push(CoarseLevel { dims, ratio, elements, inv_diag });
        }

        let coarse = Self::factor_coarsest(&fine, &fine_inv_diag, &levels);
        let mut h = Self { fine, fine_inv_diag, levels, coarse, damping: Vec::new() };
        h.damping = (0..=h.levels.len())
            .map(|l| {
                let lambda = h.max_eigenvalue(l);
                if lambda * JACOBI_DAMPING > DAMPING_SAFETY {
                    DAMPING_SAFETY / lambda
                } else {
                    JACOBI_DAMPING
                }
            })
            .collect();
        log::debug!("multigrid: damping per level {:?}", h.damping);
        h
    }

    /// Power-iteration estimate of `λmax(D⁻¹A)`, padded since it converges
    /// from below.
    fn max_eigenvalue(&self, level: usize) -> f64 {
        let inv = self.inv_diag(level);
        let n = inv.len();
        let mut v: Vec<f64> = (0..n)
            .map(|i| if inv[i] != 0.0 { 1.0 + ((i * 7919) % 101) as f64 / 101.0 } else { 0.0 })
            .collect();
        let mut av = vec![0.0; n];
        let mut lambda = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv == 0.0 {
                return 1.0;
            }
            v.iter_mut().for_each(|x| *x /= nv);
            self.apply_level(level, &v, &mut av);
            for i in 0..n {
                av[i] *= inv[i];
            }
            lambda = av.iter().map(|x| x * x).sum::<f64>().sqrt();
            std::mem::swap(&mut v, &mut av);
        }
        1.1 * lambda
    }

    fn factor_coarsest(
        fine: &FineOperator<'_>,
        fine_inv_diag: &[f64],
        levels: &[CoarseLevel],
    ) -> CoarseSolve {
        let (dims, inv_diag) = match levels.last() {
            Some(l) => (l.dims, l.inv_diag.as_slice()),
            None => (fine.dims, fine_inv_diag),
        };
        let [nx, ny, _] = dims.nodes();
        let n = 3 * dims.num_nodes();
        let bw = 3 * (1 + nx + nx * ny) + 2;
        if n as f64 * (bw as f64).powi(2) > DIRECT_WORK_LIMIT {
            log::warn!("multigrid: coarsest grid {:?} too large to factor, smoothing instead", dims.elems);
            return CoarseSolve::Smooth;
        }
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for e in 0..dims.num_elements() {
            let m = match levels.last() {
                Some(l) => l.elements[e].clone(),
                None => fine.element_matrix(e),
            };
            let nodes = dims.element_nodes(e);
            for (a, na) in nodes.iter().enumerate() {
                for ca in 0..3 {
                    let gi = 3 * na + ca;
                    for (b, nb) in nodes.iter().enumerate() {
                        for cb in 0..3 {
                            let gj = 3 * nb + cb;
                            if gj <= gi {
                                band[gi * w + (gj + bw - gi)] += m.get(3 * a + ca, 3 * b + cb);
                            }
                        }
                    }
                }
            }
        }
        // Inactive dofs are decoupled rows; give them a unit pivot.
        for i in 0..n {
            if inv_diag[i] == 0.0 {
                for v in &mut band[i * w..(i + 1) * w] {
                    *v = 0.0;
                }
                band[i * w + bw] = 1.0;
            }
        }
        let lower = |i: usize, j: usize| {
            if inv_diag[i] == 0.0 || inv_diag[j] == 0.0 {
                if i == j {
                    1.0
                } else {
                    0.0
                }
            } else {
                band[i * w + (j + bw - i)]
            }
        };
        match BandCholesky::factor(n, bw, lower) {
            Some(c) => CoarseSolve::Direct(c),
            None => {
                log::warn!("multigrid: coarsest factorization failed, smoothing instead");
                CoarseSolve::Smooth
            }
        }
    }

    pub fn fine(&self) -> &FineOperator<'a> {
        &self.fine
    }

    /// `z ≈ A⁻¹ r` by one symmetric V-cycle.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
        for (zi, d) in z.iter_mut().zip(&self.fine_inv_diag) {
            if *d == 0.0 {
                *zi = 0.0;
            }
        }
    }

    fn apply_level(&self, level: usize, x: &[f64], y: &mut [f64]) {
        if level == 0 {
            self.fine.apply(x, y)
        } else {
            self.levels[level - 1].apply(x, y)
        }
    }

    fn inv_diag(&self, level: usize) -> &[f64] {
        if level == 0 {
            &self.fine_inv_diag
        } else {
            &self.levels[level - 1].inv_diag
        }
    }

    fn dims(&self, level: usize) -> Dims {
        if level == 0 {
            self.fine.dims
        } else {
            self.levels[level - 1].dims
        }
    }

    fn smooth(&self, level: usize, r: &[f64], z: &mut [f64], sweeps: usize, tmp: &mut [f64]) {
        let inv = self.inv_diag(level);
        let omega = self.damping[level];
        for _ in 0..sweeps {
            self.apply_level(level, z, tmp);
            for i in 0..z.len() {
                z[i] += omega * inv[i] * (r[i] - tmp[i]);
            }
        }
    }

    fn cycle(&self, level: usize, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        let n = r.len();
        let mut tmp = vec![0.0; n];
        if level == self.levels.len() {
            match &self.coarse {
                CoarseSolve::Direct(chol) => {
                    z.copy_from_slice(r);
                    let inv = self.inv_diag(level);
                    for (zi, d) in z.iter_mut().zip(inv) {
                        if *d == 0.0 {
                            *zi = 0.0;
                        }
                    }
                    chol.solve_in_place(z);
                    for (zi, d) in z.iter_mut().zip(inv) {
                        if *d == 0.0 {
                            *zi = 0.0;
                        }
                    }
                }
                CoarseSolve::Smooth => self.smooth(level, r, z, COARSE_JACOBI_SWEEPS, &mut tmp),
            }
            return;
        }

        self.smooth(level, r, z, SMOOTHING_SWEEPS, &mut tmp);
        self.apply_level(level, z, &mut tmp);
        let residual: Vec<f64> = r.iter().zip(&tmp).map(|(a, b)| a - b).collect();

        let coarse = &self.levels[level];
        let mut rc = vec![0.0; 3 * coarse.dims.num_nodes()];
        restrict(self.dims(level), coarse.dims, coarse.ratio, &residual, &mut rc);
        let mut zc = vec![0.0; rc.len()];
        self.cycle(level + 1, &rc, &mut zc);
        let mut correction = vec![0.0; n];
        prolong(self.dims(level), coarse.dims, coarse.ratio, &zc, &mut correction);
        let inv = self.inv_diag(level);
        for i in 0..n {
            if inv[i] != 0.0 {
                z[i] += correction[i];
            }
        }

        self.smooth(level, r, z, SMOOTHING_SWEEPS, &mut tmp);
    }
}

/// Visits every fine node with its trilinear weights onto coarse nodes.
fn for_each_weight(fine: Dims, coarse: Dims, ratio: [usize; 3], mut f: impl FnMut(usize, usize, f64)) {
    let [nx, ny, nz] = fine.nodes();
    for k in 0..nz {
        let (sk, ck) = stencil(k, ratio[2]);
        for j in 0..ny {
            let (sj, cj) = stencil(j, ratio[1]);
            for i in 0..nx {
                let (si, ci) = stencil(i, ratio[0]);
                let fnode = fine.node(i, j, k);
                for &(kk, wk) in &sk[..ck] {
                    for &(jj, wj) in &sj[..cj] {
                        for &(ii, wi) in &si[..ci] {
                            f(fnode, coarse.node(ii, jj, kk), wi * wj * wk);
                        }
                    }
                }
            }
        }
    }
}

/// `coarse = Pᵀ fine`.
fn restrict(fine: Dims, coarse: Dims, ratio: [usize; 3], fine_v: &[f64], coarse_v: &mut [f64]) {
    coarse_v.iter_mut().for_each(|v| *v = 0.0);
    for_each_weight(fine, coarse, ratio, |fnode, cnode, w| {
        for c in 0..3 {
            coarse_v[3 * cnode + c] += w * fine_v[3 * fnode + c];
        }
    });
}

/// `fine = P coarse`.
fn prolong(fine: Dims, coarse: Dims, ratio: [usize; 3], coarse_v: &[f64], fine_v: &mut [f64]) {
    fine_v.iter_mut().for_each(|v| *v = 0.0);
    for_each_weight(fine, coarse, ratio, |fnode, cnode, w| {
        for c in 0..3 {
            fine_v[3 * fnode + c] += w * coarse_v[3 * cnode + c];
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_clamps_thin_axes() {
        let plan = plan_levels([32, 16, 4], 5);
        let elems: Vec<[usize; 3]> = plan.iter().map(|(d, _)| d.elems).collect();
        assert_eq!(elems, vec![[32, 16, 4], [16, 8, 2], [8, 4, 2], [4, 2, 2], [2, 2, 2]]);
        let plan = plan_levels([128, 64, 16], 5);
        assert_eq!(plan.last().unwrap().0.elems, [8, 4, 2]);
        assert_eq!(plan_levels([1, 1, 1], 5).len(), 1);
        assert_eq!(plan_levels([8, 8, 8], 1).len(), 1);
    }

    #[test]
    fn child_weights_partition_unity() {
        for off in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
            let w = child_weights(off, [2, 2, 2]);
            for row in w {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
        let w = child_weights([0, 0, 0], [1, 1, 1]);
        for a in 0..8 {
            for b in 0..8 {
                assert_eq!(w[a][b], if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn restriction_is_prolongation_transpose() {
        let fine = Dims { elems: [4, 2, 3] };
        let ratio = [2, 2, 1];
        let coarse = Dims { elems: [2, 1, 3] };
        let nf = 3 * fine.num_nodes();
        let nc = 3 * coarse.num_nodes();
        let u: Vec<f64> = (0..nf).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let v: Vec<f64> = (0..nc).map(|i| ((i * 5) % 13) as f64 - 6.0).collect();
        let mut ru = vec![0.0; nc];
        restrict(fine, coarse, ratio, &u, &mut ru);
        let mut pv = vec![0.0; nf];
        prolong(fine, coarse, ratio, &v, &mut pv);
        let a: f64 = ru.iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&pv).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}
