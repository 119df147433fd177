//! Linear elasticity on structured hexahedral meshes.

mod band;
pub mod element;
mod multigrid;
mod solver;

use nalgebra::{Matrix6, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{NodeSelector, StructuredMesh};

pub use element::{element_stiffness, ElementMatrix, ELEMENT_DOFS};
pub use solver::{apply_stiffness, element_energies, EquilibriumSolver, SolveOutcome, Termination};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("Poisson's ratio must lie in (-1, 0.5), got {0}")]
    InvalidPoisson(f64),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("{kind} selector `{selector}` matches no mesh nodes")]
    EmptySelection { kind: &'static str, selector: String },
    #[error("boundary condition `{0}` fixes no degree of freedom")]
    NothingFixed(String),
    #[error("system is singular: boundary conditions leave {modes} rigid-body mode(s) unconstrained")]
    UnconstrainedRigidBody { modes: usize },
    #[error("field has {got} entries, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("conjugate gradients broke down at iteration {iteration} (pᵀAp = {curvature:e})")]
    Breakdown { iteration: usize, curvature: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub const DEFAULT_EMIN: f64 = 1e-9;

fn default_emin() -> f64 {
    DEFAULT_EMIN
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub e0: f64,
    #[serde(default = "default_emin")]
    pub emin: f64,
    pub nu: f64,
}

impl Material {
    pub fn validate(&self) -> Result<(), FemError> {
        if !(self.emin > 0.0 && self.e0 > self.emin && self.e0.is_finite()) {
            return Err(FemError::InvalidMaterial(format!(
                "need e0 > emin > 0, got e0 = {}, emin = {}",
                self.e0, self.emin
            )));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(FemError::InvalidPoisson(self.nu));
        }
        Ok(())
    }
}

/// Which displacement components a Dirichlet condition fixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FixedDofs {
    pub ux: bool,
    pub uy: bool,
    pub uz: bool,
}

impl FixedDofs {
    pub const ALL: FixedDofs = FixedDofs { ux: true, uy: true, uz: true };

    pub fn as_array(&self) -> [bool; 3] {
        [self.ux, self.uy, self.uz]
    }

    pub fn any(&self) -> bool {
        self.ux || self.uy || self.uz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletBc {
    pub select: NodeSelector,
    pub dofs: FixedDofs,
    #[serde(default)]
    pub value: f64,
}

/// Total force per axis, split equally over the selected nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Force {
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
    #[serde(default)]
    pub fz: f64,
}

impl Force {
    pub fn as_array(&self) -> [f64; 3] {
        [self.fx, self.fy, self.fz]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCase {
    pub select: NodeSelector,
    pub force: Force,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxiter: usize,
    pub n_level: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-4, maxiter: 50, n_level: 5 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), FemError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(FemError::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.maxiter < 1 {
            return Err(FemError::InvalidConfig("maxiter must be >= 1".into()));
        }
        if self.n_level < 1 {
            return Err(FemError::InvalidConfig("n_level must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-dof Dirichlet data for one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraints {
    pub fixed: Vec<bool>,
    pub prescribed: Vec<f64>,
}

impl Constraints {
    pub fn build(mesh: &StructuredMesh, bcs: &[DirichletBc]) -> Result<Self, FemError> {
        let ndof = mesh.num_dofs();
        let mut fixed = vec![false; ndof];
        let mut prescribed = vec![0.0; ndof];
        for bc in bcs {
            if !bc.dofs.any() {
                return Err(FemError::NothingFixed(bc.select.describe()));
            }
            if !bc.value.is_finite() {
                return Err(FemError::NonFinite("prescribed displacement"));
            }
            let nodes = bc.select.select(mesh);
            if nodes.is_empty() {
                return Err(FemError::EmptySelection {
                    kind: "boundary condition",
                    selector: bc.select.describe(),
                });
            }
            let mask = bc.dofs.as_array();
            for n in nodes {
                for d in 0..3 {
                    if mask[d] {
                        fixed[3 * n + d] = true;
                        prescribed[3 * n + d] = bc.value;
                    }
                }
            }
        }
        Ok(Self { fixed, prescribed })
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.iter().filter(|f| **f).count()
    }

    /// Number of rigid-body modes (of six) the fixed dofs leave free.
    pub fn free_rigid_modes(&self, mesh: &StructuredMesh) -> usize {
        let ext = mesh.extents();
        let center = ext.map(|l| 0.5 * l);
        let scale = ext.iter().cloned().fold(0.0, f64::max);
        let mut gram = Matrix6::<f64>::zeros();
        for (dof, _) in self.fixed.iter().enumerate().filter(|(_, f)| **f) {
            let n = dof / 3;
            let d = dof % 3;
            let p = mesh.node_coords(n);
            let r = [
                (p[0] - center[0]) / scale,
                (p[1] - center[1]) / scale,
                (p[2] - center[2]) / scale,
            ];
            // Component d of each mode: translations, then ω × r for ω = e_x, e_y, e_z.
            let mut row = [0.0; 6];
            row[d] = 1.0;
            let rot = [[0.0, -r[2], r[1]], [r[2], 0.0, -r[0]], [-r[1], r[0], 0.0]];
            for w in 0..3 {
                row[3 + w] = rot[w][d];
            }
            for a in 0..6 {
                for b in 0..6 {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        let eig = SymmetricEigen::new(gram);
        let max = eig.eigenvalues.amax();
        if max == 0.0 {
            return 6;
        }
        eig.eigenvalues.iter().filter(|v| **v <= 1e-10 * max).count()
    }
}

/// Global load vector: each load's total force split equally over its nodes.
pub fn assemble_force(mesh: &StructuredMesh, loads: &[LoadCase]) -> Result<Vec<f64>, FemError> {
    let mut f = vec![0.0; mesh.num_dofs()];
    for load in loads {
        let total = load.force.as_array();
        if total.iter().any(|v| !v.is_finite()) {
            return Err(FemError::NonFinite("load"));
        }
        let nodes = load.select.select(mesh);
        if nodes.is_empty() {
            return Err(FemError::EmptySelection {
                kind: "load",
                selector: load.select.describe(),
            });
        }
        let share = total.map(|t| t / nodes.len() as f64);
        for n in nodes {
            for d in 0..3 {
                f[3 * n + d] += share[d];
            }
        }
    }
    Ok(f)
}

/// SIMP-interpolated element moduli.
pub fn simp_moduli(densities: &[f64], material: &Material, penalty: f64) -> Vec<f64> {
    densities
        .iter()
        .map(|&x| material.emin + x.powf(penalty) * (material.e0 - material.emin))
        .collect()
}

/// One-shot equilibrium solve `K(x) U = F` for physical densities `densities`.
#[allow(clippy::too_many_arguments)]
pub fn solve_equilibrium(
    mesh: &StructuredMesh,
    material: &Material,
    densities: &[f64],
    penalty: f64,
    bcs: &[DirichletBc],
    force: &[f64],
    config: &SolverConfig,
) -> Result<SolveOutcome, FemError> {
    material.validate()?;
    if densities.len() != mesh.num_elements() {
        return Err(FemError::SizeMismatch { expected: mesh.num_elements(), got: densities.len() });
    }
    let solver = EquilibriumSolver::new(*mesh, material.nu, bcs, *config)?;
    let moduli = simp_moduli(densities, material, penalty);
    solver.solve(&moduli, force, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Axis, Comparator, Condition};

    fn select(axis: Axis, value: f64) -> NodeSelector {
        NodeSelector::new(vec![Condition::axis(axis, Comparator::Eq, value)])
    }

    #[test]
    fn cantilever_edge_load_is_split_evenly() {
        let mesh = StructuredMesh::new(8, 4, 4, 1.0, 0.5, 0.5).unwrap();
        let load = LoadCase {
            select: NodeSelector::new(vec![
                Condition::axis(Axis::X, Comparator::Eq, 0.0),
                Condition::axis(Axis::Y, Comparator::Eq, 0.5),
            ]),
            force: Force { fx: 0.0, fy: -1.0, fz: 0.0 },
        };
        let f = assemble_force(&mesh, std::slice::from_ref(&load)).unwrap();
        let k = load.select.select(&mesh).len();
        assert_eq!(k, 5);
        for n in load.select.select(&mesh) {
            assert_eq!(f[3 * n + 1], -1.0 / k as f64);
        }
        let total: f64 = f.iter().skip(1).step_by(3).sum();
        assert!((total + 1.0).abs() <= 1e-12);
        assert_eq!(f.iter().filter(|v| **v != 0.0).count(), k);
    }

    #[test]
    fn no_loads_is_zero_and_overlaps_superpose() {
        let mesh = StructuredMesh::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        assert!(assemble_force(&mesh, &[]).unwrap().iter().all(|v| *v == 0.0));
        let a = LoadCase { select: select(Axis::X, 1.0), force: Force { fx: 9.0, fy: 0.0, fz: 0.0 } };
        let b = LoadCase { select: select(Axis::Y, 1.0), force: Force { fx: 0.0, fy: 0.0, fz: 9.0 } };
        let f = assemble_force(&mesh, &[a, b]).unwrap();
        let corner = mesh.node_index(2, 2, 0);
        assert_eq!(f[3 * corner], 1.0);
        assert_eq!(f[3 * corner + 2], 1.0);
    }

    #[test]
    fn empty_selection_names_the_predicate() {
        let mesh = StructuredMesh::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        let bad = LoadCase { select: select(Axis::X, 3.0), force: Force::default() };
        let err = assemble_force(&mesh, &[bad]).unwrap_err();
        assert!(err.to_string().contains("x = 3"), "{err}");
    }

    #[test]
    fn rigid_mode_count() {
        let mesh = StructuredMesh::new(4, 2, 2, 1.0, 0.5, 0.5).unwrap();
        let clamp = DirichletBc { select: select(Axis::X, 0.0), dofs: FixedDofs::ALL, value: 0.0 };
        assert_eq!(Constraints::build(&mesh, &[clamp]).unwrap().free_rigid_modes(&mesh), 0);
        assert_eq!(Constraints::build(&mesh, &[]).unwrap().free_rigid_modes(&mesh), 6);
        let roller = DirichletBc {
            select: select(Axis::Y, 0.0),
            dofs: FixedDofs { ux: false, uy: true, uz: false },
            value: 0.0,
        };
        // Only uy on a plane: x/z translations and rotation about y remain.
        assert_eq!(Constraints::build(&mesh, &[roller]).unwrap().free_rigid_modes(&mesh), 3);
    }

    #[test]
    fn cantilever_supports_remove_all_rigid_modes() {
        let mesh = StructuredMesh::new(8, 4, 4, 1.0, 0.5, 0.5).unwrap();
        let left = DirichletBc {
            select: select(Axis::X, 0.0),
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
        let c = Constraints::build(&mesh, &[left, corner]).unwrap();
        assert_eq!(c.free_rigid_modes(&mesh), 0);
    }
}
