//! SIMP minimum-compliance optimization: density filter, Heaviside projection,
//! interpolation, compliance sensitivities and the PGD / MMA update rules.

mod filter;
mod mma;
mod optimize;
mod pgd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{element_energies, ElementMatrix, FemError, Material};
use crate::mesh::StructuredMesh;

pub use filter::DensityFilter;
pub use mma::{Mma, MmaSettings};
pub use optimize::{optimize, OptimizeError, Optimizer};
pub use pgd::{pgd_step, project_volume, BarzilaiBorwein};

pub const DEFAULT_BETA: f64 = 8.0;
pub const DEFAULT_ETA: f64 = 0.5;
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimpError {
    #[error("field has {got} entries, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("volume constraint cannot be met inside the move limits (best volume {best:.6}, limit {limit:.6})")]
    Infeasible { best: f64, limit: f64 },
    #[error(transparent)]
    Fem(#[from] FemError),
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpParams {
    pub penalty: f64,
    pub volfrac: f64,
    /// Filter radius in element-spacing units.
    pub rmin: f64,
    #[serde(default)]
    pub heaviside: bool,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Pgd,
    Mma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Relative compliance change stopping threshold; 0 disables it.
    #[serde(default)]
    pub fun_tol: f64,
    /// Maximum density change stopping threshold; 0 disables it.
    #[serde(default)]
    pub change_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FunTol,
    ChangeTol,
    MaxIters,
}

/// The three density fields of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub x: Vec<f64>,
    pub filtered: Vec<f64>,
    pub projected: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub densities: DensityField,
    /// Compliance of each evaluated iterate, starting with the initial design.
    pub compliance: Vec<f64>,
    /// Mean projected density of each evaluated iterate.
    pub volume: Vec<f64>,
    pub iterations: usize,
    pub termination: StopReason,
    /// Compliance of the returned design.
    pub final_compliance: f64,
    pub final_volume: f64,
    /// Linear solves that hit `maxiter` before reaching `tol`.
    pub solver_warnings: usize,
}

/// Smoothed Heaviside `x̄ = [tanh(βη) + tanh(β(x̃−η))] / [tanh(βη) + tanh(β(1−η))]`.
pub fn heaviside(xt: f64, beta: f64, eta: f64) -> f64 {
    let a = (beta * eta).tanh();
    let den = a + (beta * (1.0 - eta)).tanh();
    if xt <= 0.0 {
        return 0.0;
    }
    if xt >= 1.0 {
        return 1.0;
    }
    ((a + (beta * (xt - eta)).tanh()) / den).clamp(0.0, 1.0)
}

pub fn heaviside_derivative(xt: f64, beta: f64, eta: f64) -> f64 {
    let den = (beta * eta).tanh() + (beta * (1.0 - eta)).tanh();
    let s = 1.0 / (beta * (xt - eta)).cosh();
    beta * s * s / den
}

/// `E = Emin + ρ^p (E0 − Emin)`.
pub fn simp_modulus(density: f64, e0: f64, emin: f64, penalty: f64) -> f64 {
    emin + density.powf(penalty) * (e0 - emin)
}

/// `c = F · U`.
pub fn compliance(u: &[f64], f: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), f.len());
    u.iter().zip(f).map(|(a, b)| a * b).sum()
}

/// `∂c/∂ρ_e = −p ρ_e^{p−1} (E0 − Emin) u_eᵀ k0 u_e` with respect to the
/// densities fed into the interpolation.
pub fn compliance_sensitivity(
    mesh: &StructuredMesh,
    k0: &ElementMatrix,
    u: &[f64],
    densities: &[f64],
    material: &Material,
    penalty: f64,
) -> Result<Vec<f64>, SimpError> {
    if densities.len() != mesh.num_elements() {
        return Err(SimpError::SizeMismatch { expected: mesh.num_elements(), got: densities.len() });
    }
    if u.len() != mesh.num_dofs() {
        return Err(SimpError::SizeMismatch { expected: mesh.num_dofs(), got: u.len() });
    }
    let energies = element_energies(mesh, k0, u);
    Ok(densities
        .iter()
        .zip(energies)
        .map(|(&rho, ue)| -penalty * rho.powf(penalty - 1.0) * (material.e0 - material.emin) * ue)
        .collect())
}

/// Design variables → filtered → projected densities, with the chain rule back.
#[derive(Debug, Clone)]
pub struct DensityPipeline {
    filter: DensityFilter,
    projection: Option<(f64, f64)>,
}

impl DensityPipeline {
    pub fn new(mesh: &StructuredMesh, params: &SimpParams) -> Self {
        Self {
            filter: DensityFilter::new(mesh, params.rmin),
            projection: params.heaviside.then_some((params.beta, params.eta)),
        }
    }

    pub fn filter(&self) -> &DensityFilter {
        &self.filter
    }

    pub fn evaluate(&self, x: &[f64]) -> DensityField {
        let filtered = self.filter.apply(x);
        let projected = match self.projection {
            Some((b, e)) => filtered.iter().map(|v| heaviside(*v, b, e)).collect(),
            None => filtered.clone(),
        };
        DensityField { x: x.to_vec(), filtered, projected }
    }

    /// Mean projected density.
    pub fn volume(&self, x: &[f64]) -> f64 {
        mean(&self.evaluate(x).projected)
    }

    /// Maps `∂/∂x̄` to `∂/∂x` at the given design.
    pub fn chain(&self, field: &DensityField, g_projected: &[f64]) -> Vec<f64> {
        let g_filtered: Vec<f64> = match self.projection {
            Some((b, e)) => g_projected
                .iter()
                .zip(&field.filtered)
                .map(|(g, xt)| g * heaviside_derivative(*xt, b, e))
                .collect(),
            None => g_projected.to_vec(),
        };
        self.filter.apply_transpose(&g_filtered)
    }

    /// Gradient of [`Self::volume`] with respect to `x`.
    pub fn volume_gradient(&self, field: &DensityField) -> Vec<f64> {
        let n = field.x.len() as f64;
        self.chain(field, &vec![1.0 / n; field.x.len()])
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_force, DirichletBc, EquilibriumSolver, FixedDofs, Force, LoadCase, SolverConfig};
    use crate::mesh::{Axis, Comparator, Condition, NodeSelector};
    use proptest::prelude::*;

    #[test]
    fn heaviside_endpoints_and_midpoint() {
        for beta in [0.5, 8.0, 64.0] {
            assert_eq!(heaviside(0.0, beta, 0.5), 0.0);
            assert_eq!(heaviside(1.0, beta, 0.5), 1.0);
            assert!((heaviside(0.5, beta, 0.5) - 0.5).abs() < 1e-15);
        }
        let (b, e) = (8.0_f64, 0.3_f64);
        let expect = (b * e).tanh() / ((b * e).tanh() + (b * (1.0 - e)).tanh());
        assert!((heaviside(e, b, e) - expect).abs() < 1e-15);
    }

    #[test]
    fn heaviside_matches_closed_form_at_point_six() {
        // tanh(4) = 0.999329299739067..., tanh(0.8) = 0.664036770267848...
        let t4 = 0.999_329_299_739_067_4_f64;
        let t08 = 0.664_036_770_267_848_9_f64;
        let expect = (t4 + t08) / (2.0 * t4);
        assert!((heaviside(0.6, 8.0, 0.5) - expect).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn heaviside_monotone_with_positive_slope(a in 0.0f64..1.0, b in 0.0f64..1.0, beta in 0.5f64..32.0, eta in 0.1f64..0.9) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(heaviside(lo, beta, eta) <= heaviside(hi, beta, eta));
            prop_assert!(heaviside_derivative(a, beta, eta) > 0.0);
            let h = 1e-6;
            if a > h && a < 1.0 - h {
                let fd = (heaviside(a + h, beta, eta) - heaviside(a - h, beta, eta)) / (2.0 * h);
                prop_assert!((fd - heaviside_derivative(a, beta, eta)).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        }

        #[test]
        fn modulus_bounded_and_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, p in 1.0f64..8.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (e0, emin) = (2.0, 1e-9);
            let ml = simp_modulus(lo, e0, emin, p);
            prop_assert!(ml >= emin && simp_modulus(hi, e0, emin, p) <= e0);
            prop_assert!(ml <= simp_modulus(hi, e0, emin, p));
        }
    }

    #[test]
    fn modulus_endpoints() {
        assert_eq!(simp_modulus(1.0, 1.0, 1e-9, 3.0), 1.0);
        assert_eq!(simp_modulus(0.0, 1.0, 1e-9, 3.0), 1e-9);
        assert_eq!(simp_modulus(0.5, 1.0, 1e-9, 3.0), 1e-9 + 0.125 * (1.0 - 1e-9));
    }

    pub(crate) fn cantilever(nx: usize, ny: usize, nz: usize) -> (StructuredMesh, Vec<DirichletBc>, Vec<LoadCase>) {
        let mesh = StructuredMesh::new(nx, ny, nz, 1.0, 0.5, 0.5 * nz as f64 / ny as f64).unwrap();
        let left = DirichletBc {
            select: NodeSelector::new(vec![Condition::axis(Axis::X, Comparator::Eq, 0.0)]),
            dofs: FixedDofs { ux: true, uy: false, uz: true },
            value: 0.0,
        };
        let corner = DirichletBc {
            select: NodeSelector::new(vec![
                Condition::axis(Axis::X, Comparator::Eq, 1.0),
                Condition::axis(Axis::Y, Comparator::Eq, 0.0),
            ]),
            dofs: FixedDofs { ux: false, uy: true, uz: true },
            value: 0.0,
        };
        let load = LoadCase {
            select: NodeSelector::new(vec![
                Condition::axis(Axis::X, Comparator::Eq, 0.0),
                Condition::axis(Axis::Y, Comparator::Eq, 0.5),
            ]),
            force: Force { fx: 0.0, fy: -1.0, fz: 0.0 },
        };
        (mesh, vec![left, corner], vec![load])
    }

    #[test]
    fn sensitivities_are_nonpositive_and_scale_inversely() {
        let (mesh, bcs, loads) = cantilever(8, 4, 4);
        let cfg = SolverConfig { tol: 1e-10, maxiter: 200, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &bcs, cfg).unwrap();
        let f = assemble_force(&mesh, &loads).unwrap();
        let rho: Vec<f64> = (0..mesh.num_elements()).map(|e| 0.2 + 0.6 * ((e * 13) % 7) as f64 / 7.0).collect();
        let run = |alpha: f64| {
            let m = Material { e0: alpha, emin: alpha * 1e-9, nu: 0.3 };
            let moduli = crate::fem::simp_moduli(&rho, &m, 3.0);
            let u = solver.solve(&moduli, &f, None).unwrap().displacement;
            compliance_sensitivity(&mesh, solver.unit_stiffness(), &u, &rho, &m, 3.0).unwrap()
        };
        let g1 = run(1.0);
        let g2 = run(2.0);
        assert!(g1.iter().all(|g| *g <= 0.0));
        for (a, b) in g1.iter().zip(&g2) {
            assert!((b - a / 2.0).abs() <= 1e-7 * a.abs());
        }
        let bad = compliance_sensitivity(&mesh, solver.unit_stiffness(), &[0.0; 3], &rho, &Material { e0: 1.0, emin: 1e-9, nu: 0.3 }, 3.0);
        assert!(matches!(bad, Err(SimpError::SizeMismatch { .. })));
    }

    #[test]
    fn compliance_bilinear_in_load() {
        let (mesh, bcs, loads) = cantilever(8, 4, 2);
        let cfg = SolverConfig { tol: 1e-10, maxiter: 200, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &bcs, cfg).unwrap();
        let f = assemble_force(&mesh, &loads).unwrap();
        let moduli = vec![1.0; mesh.num_elements()];
        let c1 = compliance(&solver.solve(&moduli, &f, None).unwrap().displacement, &f);
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let c3 = compliance(&solver.solve(&moduli, &f3, None).unwrap().displacement, &f3);
        assert!((c3 - 9.0 * c1).abs() <= 1e-8 * c3);
        let zero = vec![0.0; f.len()];
        assert_eq!(compliance(&solver.solve(&moduli, &zero, None).unwrap().displacement, &zero), 0.0);
    }

    #[test]
    fn chained_sensitivity_matches_finite_differences() {
        let (mesh, bcs, loads) = cantilever(8, 4, 4);
        let material = Material { e0: 1.0, emin: 1e-9, nu: 0.3 };
        let cfg = SolverConfig { tol: 1e-10, maxiter: 500, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, material.nu, &bcs, cfg).unwrap();
        let f = assemble_force(&mesh, &loads).unwrap();
        for heaviside in [false, true] {
            let params = SimpParams { penalty: 3.0, volfrac: 0.4, rmin: 1.5, heaviside, beta: 4.0, eta: 0.5 };
            let pipe = DensityPipeline::new(&mesh, &params);
            let n = mesh.num_elements();
            let x: Vec<f64> = (0..n).map(|e| 0.3 + 0.4 * ((e * 7) % 11) as f64 / 11.0).collect();
            let c_of = |x: &[f64]| {
                let field = pipe.evaluate(x);
                let moduli = crate::fem::simp_moduli(&field.projected, &material, params.penalty);
                let u = solver.solve(&moduli, &f, None).unwrap().displacement;
                (compliance(&u, &f), field, u)
            };
            let (_, field, u) = c_of(&x);
            let g_phys = compliance_sensitivity(&mesh, solver.unit_stiffness(), &u, &field.projected, &material, 3.0).unwrap();
            let g = pipe.chain(&field, &g_phys);
            let h = 1e-5;
            for e in (0..n).step_by(5) {
                let mut xp = x.clone();
                xp[e] += h;
                let mut xm = x.clone();
                xm[e] -= h;
                let fd = (c_of(&xp).0 - c_of(&xm).0) / (2.0 * h);
                assert!((fd - g[e]).abs() <= 1e-3 * fd.abs(), "element {e}: fd {fd} vs {}", g[e]);
            }
        }
    }

    #[test]
    fn volume_gradient_matches_finite_differences() {
        let mesh = StructuredMesh::new(5, 4, 3, 1.0, 1.0, 1.0).unwrap();
        let params = SimpParams { penalty: 3.0, volfrac: 0.4, rmin: 2.0, heaviside: true, beta: 8.0, eta: 0.5 };
        let pipe = DensityPipeline::new(&mesh, &params);
        let n = mesh.num_elements();
        let x: Vec<f64> = (0..n).map(|e| ((e * 17) % 13) as f64 / 13.0).collect();
        let g = pipe.volume_gradient(&pipe.evaluate(&x));
        let h = 1e-6;
        for e in 0..n {
            let mut xp = x.clone();
            xp[e] += h;
            let mut xm = x.clone();
            xm[e] -= h;
            let fd = (pipe.volume(&xp) - pipe.volume(&xm)) / (2.0 * h);
            assert!((fd - g[e]).abs() <= 1e-6 * fd.abs().max(1e-3));
        }
    }
}
