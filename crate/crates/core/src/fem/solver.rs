//! Multigrid-preconditioned conjugate gradients for `K(x) U = F`.

use serde::{Deserialize, Serialize};

use super::element::{element_stiffness, ElementMatrix, ELEMENT_DOFS};
use super::multigrid::{plan_levels, Dims, FineOperator, Hierarchy};
use super::{Constraints, DirichletBc, FemError, SolverConfig};
use crate::mesh::StructuredMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub displacement: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖r‖ / ‖b‖` on the free dofs.
    pub residual: f64,
    pub termination: Termination,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Solver state that depends only on mesh, Poisson ratio and supports, so it
/// can be reused across density updates.
#[derive(Debug, Clone)]
pub struct EquilibriumSolver {
    mesh: StructuredMesh,
    k0: ElementMatrix,
    constraints: Constraints,
    config: SolverConfig,
    plan: Vec<(Dims, [usize; 3])>,
}

impl EquilibriumSolver {
    pub fn new(
        mesh: StructuredMesh,
        nu: f64,
        bcs: &[DirichletBc],
        config: SolverConfig,
    ) -> Result<Self, FemError> {
        config.validate()?;
        let k0 = element_stiffness(1.0, nu, mesh.spacing())?;
        let constraints = Constraints::build(&mesh, bcs)?;
        let modes = constraints.free_rigid_modes(&mesh);
        if modes > 0 {
            return Err(FemError::UnconstrainedRigidBody { modes });
        }
        let plan = plan_levels(mesh.counts(), config.n_level);
        Ok(Self { mesh, k0, constraints, config, plan })
    }

    pub fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    /// Unit-modulus element stiffness.
    pub fn unit_stiffness(&self) -> &ElementMatrix {
        &self.k0
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Number of multigrid levels actually used.
    pub fn num_levels(&self) -> usize {
        self.plan.len()
    }

    /// Solves with element moduli `moduli`, optionally warm-started from a
    /// previous displacement.
    pub fn solve(
        &self,
        moduli: &[f64],
        force: &[f64],
        warm: Option<&[f64]>,
    ) -> Result<SolveOutcome, FemError> {
        let ne = self.mesh.num_elements();
        let nd = self.mesh.num_dofs();
        if moduli.len() != ne {
            return Err(FemError::SizeMismatch { expected: ne, got: moduli.len() });
        }
        if force.len() != nd {
            return Err(FemError::SizeMismatch { expected: nd, got: force.len() });
        }
        if moduli.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(FemError::NonFinite("element moduli"));
        }
        if force.iter().any(|f| !f.is_finite()) {
            return Err(FemError::NonFinite("force"));
        }
        if let Some(w) = warm {
            if w.len() != nd {
                return Err(FemError::SizeMismatch { expected: nd, got: w.len() });
            }
        }

        let fixed = &self.constraints.fixed;
        let free: Vec<bool> = fixed.iter().map(|f| !f).collect();
        let lifting: Vec<f64> = (0..nd)
            .map(|i| if fixed[i] { self.constraints.prescribed[i] } else { 0.0 })
            .collect();

        // Eliminate prescribed values: b = D_f (F - K u_p).
        let k_lift = apply_stiffness(&self.mesh, &self.k0, moduli, &lifting);
        let b: Vec<f64> = (0..nd).map(|i| if free[i] { force[i] - k_lift[i] } else { 0.0 }).collect();
        let b_norm = norm(&b);

        let op = FineOperator { dims: Dims { elems: self.mesh.counts() }, k0: &self.k0, moduli, free: &free };
        let mut w: Vec<f64> = match warm {
            Some(w0) => (0..nd).map(|i| if free[i] { w0[i] } else { 0.0 }).collect(),
            None => vec![0.0; nd],
        };
        let finish = |w: Vec<f64>, iterations, residual, termination| {
            let displacement = w.iter().zip(&lifting).zip(fixed).map(|((w, l), f)| if *f { *l } else { *w }).collect();
            SolveOutcome { displacement, iterations, residual, termination }
        };
        if b_norm == 0.0 {
            return Ok(finish(vec![0.0; nd], 0, 0.0, Termination::Converged));
        }

        let mut r = vec![0.0; nd];
        op.apply(&w, &mut r);
        for i in 0..nd {
            r[i] = b[i] - r[i];
        }
        let mut rel = norm(&r) / b_norm;
        if rel <= self.config.tol {
            return Ok(finish(w, 0, rel, Termination::Converged));
        }

        let hierarchy = Hierarchy::build(op, &self.plan);
        let op = hierarchy.fine();
        let mut z = vec![0.0; nd];
        hierarchy.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; nd];
        let mut best = (rel, w.clone(), 0);

        for it in 1..=self.config.maxiter {
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) || !pap.is_finite() || !(rz > 0.0) {
                return Err(FemError::Breakdown { iteration: it, curvature: pap });
            }
            let alpha = rz / pap;
            for i in 0..nd {
                w[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            rel = norm(&r) / b_norm;
            if !rel.is_finite() {
                return Err(FemError::Breakdown { iteration: it, curvature: pap });
            }
            if rel < best.0 {
                best = (rel, w.clone(), it);
            }
            if rel <= self.config.tol {
                return Ok(finish(w, it, rel, Termination::Converged));
            }
            hierarchy.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..nd {
                p[i] = z[i] + beta * p[i];
            }
        }
        log::warn!(
            "solver: no convergence in {} iterations (best relative residual {:.3e} at iteration {})",
            self.config.maxiter,
            best.0,
            best.2
        );
        Ok(finish(best.1, self.config.maxiter, best.0, Termination::MaxIter))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn gather(mesh: &StructuredMesh, e: usize, u: &[f64]) -> [f64; ELEMENT_DOFS] {
    let dofs = mesh.element_dofs(e);
    dofs.map(|d| u[d])
}

/// Unconstrained `K u = Σ_e E_e k0 u_e`.
pub fn apply_stiffness(mesh: &StructuredMesh, k0: &ElementMatrix, moduli: &[f64], u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; mesh.num_dofs()];
    let mut yl = [0.0; ELEMENT_DOFS];
    for e in 0..mesh.num_elements() {
        let ul = gather(mesh, e, u);
        yl.iter_mut().for_each(|v| *v = 0.0);
        k0.mul_add(moduli[e], &ul, &mut yl);
        for (d, v) in mesh.element_dofs(e).iter().zip(yl.iter()) {
            y[*d] += v;
        }
    }
    y
}

/// Per-element `u_eᵀ k0 u_e`.
pub fn element_energies(mesh: &StructuredMesh, k0: &ElementMatrix, u: &[f64]) -> Vec<f64> {
    (0..mesh.num_elements()).map(|e| k0.energy(&gather(mesh, e, u))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_force, FixedDofs, Force, LoadCase};
    use crate::mesh::{Axis, Comparator, Condition, NodeSelector};
    use nalgebra::{DMatrix, DVector};

    fn cond(axis: Axis, value: f64) -> Condition {
        Condition::axis(axis, Comparator::Eq, value)
    }

    fn clamp_x0() -> DirichletBc {
        DirichletBc { select: NodeSelector::new(vec![cond(Axis::X, 0.0)]), dofs: FixedDofs::ALL, value: 0.0 }
    }

    fn tip_load(lx: f64, ly: f64) -> LoadCase {
        LoadCase {
            select: NodeSelector::new(vec![cond(Axis::X, lx), cond(Axis::Y, ly)]),
            force: Force { fx: 0.0, fy: -1.0, fz: 0.0 },
        }
    }

    /// Dense reference with fixed dofs eliminated, independent of the
    /// matrix-free and multigrid code paths.
    fn dense_solve(mesh: &StructuredMesh, k0: &ElementMatrix, moduli: &[f64], c: &Constraints, f: &[f64]) -> Vec<f64> {
        let n = mesh.num_dofs();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for e in 0..mesh.num_elements() {
            let dofs = mesh.element_dofs(e);
            for a in 0..ELEMENT_DOFS {
                for b in 0..ELEMENT_DOFS {
                    k[(dofs[a], dofs[b])] += moduli[e] * k0.get(a, b);
                }
            }
        }
        let free: Vec<usize> = (0..n).filter(|i| !c.fixed[*i]).collect();
        let mut rhs = DVector::from_column_slice(f);
        for i in 0..n {
            if c.fixed[i] {
                for j in 0..n {
                    rhs[j] -= k[(j, i)] * c.prescribed[i];
                }
            }
        }
        let kff = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
        let bf = DVector::from_fn(free.len(), |a, _| rhs[free[a]]);
        let uf = kff.cholesky().expect("SPD").solve(&bf);
        let mut u = c.prescribed.clone();
        for (a, &i) in free.iter().enumerate() {
            u[i] = uf[a];
        }
        u
    }

    fn varied_moduli(n: usize) -> Vec<f64> {
        (0..n).map(|e| 1e-3 + ((e * 37) % 17) as f64 / 17.0).collect()
    }

    #[test]
    fn single_element_matches_dense() {
        let mesh = StructuredMesh::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let cfg = SolverConfig { tol: 1e-12, maxiter: 200, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], cfg).unwrap();
        let f = assemble_force(&mesh, &[tip_load(1.0, 1.0)]).unwrap();
        let out = solver.solve(&[1.0], &f, None).unwrap();
        let reference = dense_solve(&mesh, solver.unit_stiffness(), &[1.0], solver.constraints(), &f);
        for (a, b) in out.displacement.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-8 * reference.iter().cloned().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        assert!(out.converged());
    }

    #[test]
    fn multigrid_pcg_matches_dense_on_small_meshes() {
        for (nx, ny, nz) in [(4, 4, 4), (4, 2, 2), (2, 4, 3), (3, 3, 1)] {
            let mesh = StructuredMesh::new(nx, ny, nz, nx as f64, ny as f64 * 0.5, nz as f64 * 0.8).unwrap();
            let cfg = SolverConfig { tol: 1e-11, maxiter: 500, n_level: 4 };
            let e = mesh.extents();
            let support = DirichletBc {
                select: NodeSelector::new(vec![cond(Axis::X, e[0])]),
                dofs: FixedDofs { ux: true, uy: false, uz: false },
                value: 0.01,
            };
            let bcs = [clamp_x0(), support];
            let solver = EquilibriumSolver::new(mesh, 0.3, &bcs, cfg).unwrap();
            let moduli = varied_moduli(mesh.num_elements());
            let f = assemble_force(&mesh, &[tip_load(e[0], e[1])]).unwrap();
            let out = solver.solve(&moduli, &f, None).unwrap();
            assert!(out.converged(), "{nx}x{ny}x{nz}: {}", out.residual);
            let reference = dense_solve(&mesh, solver.unit_stiffness(), &moduli, solver.constraints(), &f);
            let scale = reference.iter().cloned().fold(0.0_f64, |m, v| m.max(v.abs()));
            for (a, b) in out.displacement.iter().zip(&reference) {
                assert!((a - b).abs() <= 1e-7 * scale, "{nx}x{ny}x{nz}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_force_returns_zero_immediately() {
        let mesh = StructuredMesh::new(4, 2, 2, 1.0, 0.5, 0.5).unwrap();
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], SolverConfig::default()).unwrap();
        let out = solver.solve(&vec![1.0; mesh.num_elements()], &vec![0.0; mesh.num_dofs()], None).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.displacement.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_force_and_inverse_in_stiffness() {
        let mesh = StructuredMesh::new(8, 4, 2, 2.0, 1.0, 0.5).unwrap();
        let cfg = SolverConfig { tol: 1e-10, maxiter: 200, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], cfg).unwrap();
        let moduli = varied_moduli(mesh.num_elements());
        let f = assemble_force(&mesh, &[tip_load(2.0, 1.0)]).unwrap();
        let u1 = solver.solve(&moduli, &f, None).unwrap().displacement;
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let u3 = solver.solve(&moduli, &f3, None).unwrap().displacement;
        let m2: Vec<f64> = moduli.iter().map(|v| 2.0 * v).collect();
        let u_half = solver.solve(&m2, &f, None).unwrap().displacement;
        let scale = u1.iter().cloned().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..u1.len() {
            assert!((u3[i] - 3.0 * u1[i]).abs() <= 1e-7 * scale);
            assert!((u_half[i] - 0.5 * u1[i]).abs() <= 1e-7 * scale);
        }
    }

    #[test]
    fn stiffness_operator_is_symmetric() {
        let mesh = StructuredMesh::new(3, 2, 2, 1.0, 1.0, 1.0).unwrap();
        let k0 = element_stiffness(1.0, 0.3, mesh.spacing()).unwrap();
        let moduli = varied_moduli(mesh.num_elements());
        let n = mesh.num_dofs();
        let u: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let a = dot(&v, &apply_stiffness(&mesh, &k0, &moduli, &u));
        let b = dot(&u, &apply_stiffness(&mesh, &k0, &moduli, &v));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn prescribed_values_are_exact() {
        let mesh = StructuredMesh::new(4, 2, 2, 1.0, 0.5, 0.5).unwrap();
        let pull = DirichletBc {
            select: NodeSelector::new(vec![cond(Axis::X, 1.0)]),
            dofs: FixedDofs { ux: true, uy: false, uz: false },
            value: 0.02,
        };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0(), pull], SolverConfig::default()).unwrap();
        let out = solver.solve(&vec![1.0; mesh.num_elements()], &vec![0.0; mesh.num_dofs()], None).unwrap();
        for n in 0..mesh.num_nodes() {
            let x = mesh.node_coords(n)[0];
            if x == 1.0 {
                assert_eq!(out.displacement[3 * n], 0.02);
            } else if x == 0.0 {
                assert_eq!(out.displacement[3 * n], 0.0);
            }
        }
    }

    #[test]
    fn maxiter_reports_instead_of_failing() {
        let mesh = StructuredMesh::new(16, 8, 2, 2.0, 1.0, 0.25).unwrap();
        let cfg = SolverConfig { tol: 1e-15, maxiter: 1, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], cfg).unwrap();
        let f = assemble_force(&mesh, &[tip_load(2.0, 1.0)]).unwrap();
        let out = solver.solve(&varied_moduli(mesh.num_elements()), &f, None).unwrap();
        assert_eq!(out.termination, Termination::MaxIter);
        assert_eq!(out.iterations, 1);
        assert!(out.residual.is_finite());
    }

    #[test]
    fn warm_start_from_solution_needs_no_iterations() {
        let mesh = StructuredMesh::new(8, 4, 2, 2.0, 1.0, 0.5).unwrap();
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], SolverConfig::default()).unwrap();
        let moduli = vec![1.0; mesh.num_elements()];
        let f = assemble_force(&mesh, &[tip_load(2.0, 1.0)]).unwrap();
        let first = solver.solve(&moduli, &f, None).unwrap();
        let again = solver.solve(&moduli, &f, Some(&first.displacement)).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn unsupported_body_is_rejected() {
        let mesh = StructuredMesh::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        let err = EquilibriumSolver::new(mesh, 0.3, &[], SolverConfig::default()).unwrap_err();
        assert_eq!(err, FemError::UnconstrainedRigidBody { modes: 6 });
    }

    #[test]
    fn energies_sum_to_work() {
        let mesh = StructuredMesh::new(4, 2, 2, 1.0, 0.5, 0.5).unwrap();
        let cfg = SolverConfig { tol: 1e-10, maxiter: 200, n_level: 2 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], cfg).unwrap();
        let moduli = varied_moduli(mesh.num_elements());
        let f = assemble_force(&mesh, &[tip_load(1.0, 0.5)]).unwrap();
        let u = solver.solve(&moduli, &f, None).unwrap().displacement;
        let energies = element_energies(&mesh, solver.unit_stiffness(), &u);
        let strain: f64 = energies.iter().zip(&moduli).map(|(a, b)| a * b).sum();
        let work = dot(&f, &u);
        assert!((strain - work).abs() <= 1e-8 * work);
    }

    #[test]
    fn unit_element_axial_tension() {
        let mesh = StructuredMesh::new(1, 1, 1, 1.0, 1.0, 1.0).unwrap();
        let bottom = DirichletBc { select: NodeSelector::new(vec![cond(Axis::Y, 0.0)]), dofs: FixedDofs::ALL, value: 0.0 };
        let top = LoadCase { select: NodeSelector::new(vec![cond(Axis::Y, 1.0)]), force: Force { fx: 0.0, fy: 1.0, fz: 0.0 } };
        let cfg = SolverConfig { tol: 1e-12, maxiter: 100, n_level: 5 };
        let solver = EquilibriumSolver::new(mesh, 0.0, &[bottom], cfg).unwrap();
        let f = assemble_force(&mesh, &[top]).unwrap();
        let out = solver.solve(&[1.0], &f, None).unwrap();
        let reference = dense_solve(&mesh, solver.unit_stiffness(), &[1.0], solver.constraints(), &f);
        for (a, b) in out.displacement.iter().zip(&reference) {
            assert!((a - b).abs() <= 1e-8);
        }
        // With nu = 0 the top face translates uniformly by F L / (E A) = 1.
        for node in (0..8).filter(|n| mesh.node_coords(*n)[1] == 1.0) {
            assert!((out.displacement[3 * node + 1] - 1.0).abs() <= 1e-8);
        }
        let c: f64 = dot(&f, &out.displacement);
        let ku = apply_stiffness(&mesh, solver.unit_stiffness(), &[1.0], &reference);
        let uku = dot(&reference, &ku);
        assert!((c - uku).abs() <= 1e-10 * uku);
    }

    #[test]
    fn matrix_free_apply_matches_dense_assembly() {
        let mesh = StructuredMesh::new(3, 3, 3, 1.0, 0.8, 1.2).unwrap();
        let k0 = element_stiffness(1.0, 0.3, mesh.spacing()).unwrap();
        let moduli = varied_moduli(mesh.num_elements());
        let n = mesh.num_dofs();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for e in 0..mesh.num_elements() {
            let dofs = mesh.element_dofs(e);
            for a in 0..ELEMENT_DOFS {
                for b in 0..ELEMENT_DOFS {
                    k[(dofs[a], dofs[b])] += moduli[e] * k0.get(a, b);
                }
            }
        }
        let u = DVector::from_fn(n, |i, _| (i as f64 * 0.31).sin());
        let dense = &k * &u;
        let free = apply_stiffness(&mesh, &k0, &moduli, u.as_slice());
        let scale = dense.norm();
        for i in 0..n {
            assert!((dense[i] - free[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn negated_load_negates_displacement() {
        let mesh = StructuredMesh::new(8, 4, 2, 2.0, 1.0, 0.5).unwrap();
        let cfg = SolverConfig { tol: 1e-10, maxiter: 200, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0()], cfg).unwrap();
        let moduli = varied_moduli(mesh.num_elements());
        let f = assemble_force(&mesh, &[tip_load(2.0, 1.0)]).unwrap();
        let u = solver.solve(&moduli, &f, None).unwrap().displacement;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let un = solver.solve(&moduli, &neg, None).unwrap().displacement;
        let scale = u.iter().cloned().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..u.len() {
            assert!((un[i] + u[i]).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn symmetric_problem_gives_mirrored_field() {
        // Bridge clamped at both ends, loaded at mid-span: mirror about x = lx/2.
        let (nx, ny, nz) = (8, 4, 2);
        let mesh = StructuredMesh::new(nx, ny, nz, 2.0, 1.0, 0.5).unwrap();
        let right = DirichletBc { select: NodeSelector::new(vec![cond(Axis::X, 2.0)]), dofs: FixedDofs::ALL, value: 0.0 };
        let tol = 1e-9;
        let cfg = SolverConfig { tol, maxiter: 200, n_level: 3 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[clamp_x0(), right], cfg).unwrap();
        let f = assemble_force(&mesh, &[tip_load(1.0, 1.0)]).unwrap();
        let u = solver.solve(&vec![1.0; mesh.num_elements()], &f, None).unwrap().displacement;
        let scale = u.iter().cloned().fold(0.0_f64, |m, v| m.max(v.abs()));
        for n in 0..mesh.num_nodes() {
            let [i, j, k] = mesh.node_ijk(n);
            let m = mesh.node_index(nx - i, j, k);
            assert!((u[3 * n] + u[3 * m]).abs() <= 1e-6 * scale);
            assert!((u[3 * n + 1] - u[3 * m + 1]).abs() <= 1e-6 * scale);
            assert!((u[3 * n + 2] - u[3 * m + 2]).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn phone_stand_reduced_solve_converges() {
        let (lx, ly, lz) = (1.0, 0.5, 0.125);
        let mesh = StructuredMesh::new(32, 16, 4, lx, ly, lz).unwrap();
        let bottom = DirichletBc { select: NodeSelector::new(vec![cond(Axis::Y, 0.0)]), dofs: FixedDofs::ALL, value: 0.0 };
        let diagonal = LoadCase {
            select: NodeSelector::new(vec![Condition::plane([ly, lx, 0.0], Comparator::Eq, lx * ly)]),
            force: Force { fx: 0.0, fy: -1.0, fz: 0.0 },
        };
        let cfg = SolverConfig { tol: 1e-4, maxiter: 50, n_level: 5 };
        let solver = EquilibriumSolver::new(mesh, 0.3, &[bottom], cfg).unwrap();
        let f = assemble_force(&mesh, &[diagonal]).unwrap();
        for density in [1.0, 0.15] {
            let moduli = crate::fem::simp_moduli(&vec![density; mesh.num_elements()], &crate::fem::Material { e0: 1.0, emin: 1e-9, nu: 0.3 }, 3.0);
            let out = solver.solve(&moduli, &f, None).unwrap();
            assert!(out.converged(), "residual {}", out.residual);
            assert!(out.residual <= 1e-4 && out.iterations <= 50);
        }
    }
}
