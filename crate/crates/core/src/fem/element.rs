//! Trilinear 8-node hexahedron with full 2×2×2 Gauss integration.

use super::FemError;
use crate::mesh::HEX_CORNERS;

pub const ELEMENT_DOFS: usize = 24;

/// Dense 24×24 element matrix, row-major. Dofs are ordered node by node,
/// `(ux, uy, uz)` per node, nodes in [`HEX_CORNERS`] order.
#[derive(Clone, PartialEq)]
pub struct ElementMatrix(pub [f64; ELEMENT_DOFS * ELEMENT_DOFS]);

impl ElementMatrix {
    pub fn zeros() -> Self {
        Self([0.0; ELEMENT_DOFS * ELEMENT_DOFS])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i * ELEMENT_DOFS + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.0[i * ELEMENT_DOFS..(i + 1) * ELEMENT_DOFS]
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.0.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `uᵀ K u` for a local displacement vector.
    pub fn energy(&self, u: &[f64; ELEMENT_DOFS]) -> f64 {
        let mut total = 0.0;
        for i in 0..ELEMENT_DOFS {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..ELEMENT_DOFS {
                acc += row[j] * u[j];
            }
            total += u[i] * acc;
        }
        total
    }

    /// `y += s · K x`.
    #[inline]
    pub fn mul_add(&self, s: f64, x: &[f64; ELEMENT_DOFS], y: &mut [f64; ELEMENT_DOFS]) {
        for i in 0..ELEMENT_DOFS {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..ELEMENT_DOFS {
                acc += row[j] * x[j];
            }
            y[i] += s * acc;
        }
    }
}

impl std::fmt::Debug for ElementMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ElementMatrix").field("k00", &self.get(0, 0)).finish_non_exhaustive()
    }
}

/// Isotropic elasticity matrix in Voigt order `xx, yy, zz, xy, yz, zx` with
/// engineering shear strains.
pub fn elasticity_matrix(modulus: f64, nu: f64) -> Result<[[f64; 6]; 6], FemError> {
    if !(nu > -1.0 && nu < 0.5) {
        return Err(FemError::InvalidPoisson(nu));
    }
    let lambda = modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = modulus / (2.0 * (1.0 + nu));
    let mut c = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = lambda;
        }
        c[i][i] = lambda + 2.0 * mu;
        c[i + 3][i + 3] = mu;
    }
    Ok(c)
}

/// Stiffness of one box element with edge lengths `h` and Young's modulus
/// `modulus`.
pub fn element_stiffness(modulus: f64, nu: f64, h: [f64; 3]) -> Result<ElementMatrix, FemError> {
    let c = elasticity_matrix(modulus, nu)?;
    let g = 1.0 / 3f64.sqrt();
    let det_j = h[0] * h[1] * h[2] / 8.0;
    let mut k = ElementMatrix::zeros();

    for &gz in &[-g, g] {
        for &gy in &[-g, g] {
            for &gx in &[-g, g] {
                let xi = [gx, gy, gz];
                // Physical shape function gradients; the Jacobian of a box is
                // diagonal with entries h/2.
                let mut dn = [[0.0; 3]; 8];
                for (a, corner) in HEX_CORNERS.iter().enumerate() {
                    let s = corner.map(|c| if c == 0 { -1.0 } else { 1.0 });
                    let f = [
                        1.0 + s[0] * xi[0],
                        1.0 + s[1] * xi[1],
                        1.0 + s[2] * xi[2],
                    ];
                    dn[a][0] = 0.125 * s[0] * f[1] * f[2] * 2.0 / h[0];
                    dn[a][1] = 0.125 * f[0] * s[1] * f[2] * 2.0 / h[1];
                    dn[a][2] = 0.125 * f[0] * f[1] * s[2] * 2.0 / h[2];
                }
                let mut b = [[0.0; ELEMENT_DOFS]; 6];
                for a in 0..8 {
                    let [dx, dy, dz] = dn[a];
                    let col = 3 * a;
                    b[0][col] = dx;
                    b[1][col + 1] = dy;
                    b[2][col + 2] = dz;
                    b[3][col] = dy;
                    b[3][col + 1] = dx;
                    b[4][col + 1] = dz;
                    b[4][col + 2] = dy;
                    b[5][col] = dz;
                    b[5][col + 2] = dx;
                }
                let mut cb = [[0.0; ELEMENT_DOFS]; 6];
                for r in 0..6 {
                    for s in 0..6 {
                        if c[r][s] != 0.0 {
                            for j in 0..ELEMENT_DOFS {
                                cb[r][j] += c[r][s] * b[s][j];
                            }
                        }
                    }
                }
                for i in 0..ELEMENT_DOFS {
                    for j in 0..ELEMENT_DOFS {
                        let mut acc = 0.0;
                        for r in 0..6 {
                            acc += b[r][i] * cb[r][j];
                        }
                        k.0[i * ELEMENT_DOFS + j] += acc * det_j;
                    }
                }
            }
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn as_dmatrix(k: &ElementMatrix) -> DMatrix<f64> {
        DMatrix::from_row_slice(ELEMENT_DOFS, ELEMENT_DOFS, &k.0)
    }

    #[test]
    fn scales_linearly_in_modulus() {
        let h = [0.5, 0.25, 1.0];
        let k1 = element_stiffness(1.0, 0.3, h).unwrap();
        let k2 = element_stiffness(2.0, 0.3, h).unwrap();
        for (a, b) in k1.0.iter().zip(k2.0.iter()) {
            assert!((a - b / 2.0).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_with_six_rigid_modes() {
        for nu in [0.0, 0.3, 0.45, -0.5] {
            let k = element_stiffness(1.0, nu, [1.0, 1.0, 1.0]).unwrap();
            let m = as_dmatrix(&k);
            assert!((&m - m.transpose()).amax() < 1e-14);
            let eig = m.symmetric_eigen();
            let max = eig.eigenvalues.amax();
            let zero = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-10 * max).count();
            let negative = eig.eigenvalues.iter().filter(|v| **v < -1e-10 * max).count();
            assert_eq!(zero, 6, "nu = {nu}");
            assert_eq!(negative, 0);
        }
    }

    #[test]
    fn rejects_incompressible() {
        assert!(matches!(
            element_stiffness(1.0, 0.5, [1.0; 3]),
            Err(FemError::InvalidPoisson(_))
        ));
        assert!(element_stiffness(1.0, -1.0, [1.0; 3]).is_err());
    }

    #[test]
    fn energy_matches_mul_add() {
        let k = element_stiffness(1.0, 0.3, [1.0, 2.0, 0.5]).unwrap();
        let mut u = [0.0; ELEMENT_DOFS];
        for (i, v) in u.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let mut ku = [0.0; ELEMENT_DOFS];
        k.mul_add(1.0, &u, &mut ku);
        let dot: f64 = u.iter().zip(ku.iter()).map(|(a, b)| a * b).sum();
        assert!((dot - k.energy(&u)).abs() < 1e-12);
    }

    /// Independent integration: 3-point Gauss per axis (also exact for the
    /// trilinear integrand) with B built from nalgebra matrices.
    fn oracle(nu: f64, h: [f64; 3]) -> DMatrix<f64> {
        let e = 1.0;
        let lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        let mut c = DMatrix::<f64>::zeros(6, 6);
        for i in 0..3 {
            for j in 0..3 {
                c[(i, j)] = lam;
            }
            c[(i, i)] += 2.0 * mu;
            c[(i + 3, i + 3)] = mu;
        }
        let pts = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let wts = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut k = DMatrix::<f64>::zeros(24, 24);
        for (a, &x) in pts.iter().enumerate() {
            for (b, &y) in pts.iter().enumerate() {
                for (g, &z) in pts.iter().enumerate() {
                    // Map to [0, 1]^3 and differentiate N = Π (1 - t) or t.
                    let t = [(x + 1.0) / 2.0, (y + 1.0) / 2.0, (z + 1.0) / 2.0];
                    let mut bm = DMatrix::<f64>::zeros(6, 24);
                    for (n, corner) in HEX_CORNERS.iter().enumerate() {
                        let f = |d: usize| if corner[d] == 1 { t[d] } else { 1.0 - t[d] };
                        let df = |d: usize| if corner[d] == 1 { 1.0 } else { -1.0 } / h[d];
                        let gx = df(0) * f(1) * f(2);
                        let gy = f(0) * df(1) * f(2);
                        let gz = f(0) * f(1) * df(2);
                        bm[(0, 3 * n)] = gx;
                        bm[(1, 3 * n + 1)] = gy;
                        bm[(2, 3 * n + 2)] = gz;
                        bm[(3, 3 * n)] = gy;
                        bm[(3, 3 * n + 1)] = gx;
                        bm[(4, 3 * n + 1)] = gz;
                        bm[(4, 3 * n + 2)] = gy;
                        bm[(5, 3 * n)] = gz;
                        bm[(5, 3 * n + 2)] = gx;
                    }
                    let w = wts[a] * wts[b] * wts[g] * h[0] * h[1] * h[2] / 8.0;
                    k += bm.transpose() * &c * &bm * w;
                }
            }
        }
        k
    }

    #[test]
    fn matches_three_point_quadrature_oracle() {
        for h in [[1.0, 1.0, 1.0], [0.5, 0.25, 2.0]] {
            let k = as_dmatrix(&element_stiffness(1.0, 0.3, h).unwrap());
            let reference = oracle(0.3, h);
            let scale = reference.amax();
            assert!((k - reference).amax() <= 1e-10 * scale);
        }
    }
}
