//! The SIMP loop driving a [`ProblemSpec`] to a density field.

use thiserror::Error;

use super::{
    compliance, compliance_sensitivity, project_volume, BarzilaiBorwein, DensityField, DensityPipeline, Mma,
    MmaSettings, OptimizationResult, OptimizerKind, SimpError, StopReason,
};
use crate::fem::{assemble_force, simp_moduli, EquilibriumSolver, FemError, Material};
use crate::problem::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("setup failed: {0}")]
    Setup(#[from] FemError),
    /// A step failed after `compliance.len()` evaluated iterates.
    #[error("optimization aborted after {} iterations: {source}", compliance.len())]
    Aborted { source: SimpError, compliance: Vec<f64>, volume: Vec<f64> },
}

/// One evaluated design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub field: DensityField,
    pub compliance: f64,
    pub volume: f64,
    /// `∂c/∂x` with respect to the design variables.
    pub gradient: Vec<f64>,
    /// Displacement of the unit-modulus problem, reusable as a warm start.
    normalized_u: Vec<f64>,
    pub solver_converged: bool,
}

/// Per-iteration progress passed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub compliance: f64,
    pub volume: f64,
}

/// Owns the solver, filter and load vector of one problem.
#[derive(Debug)]
pub struct Optimizer {
    spec: ProblemSpec,
    solver: EquilibriumSolver,
    pipeline: DensityPipeline,
    force: Vec<f64>,
    /// Material rescaled to `E0 = 1`; results are rescaled by `1/E0`.
    unit_material: Material,
}

impl Optimizer {
    pub fn new(spec: &ProblemSpec) -> Result<Self, OptimizeError> {
        spec.material.validate()?;
        let solver = EquilibriumSolver::new(spec.mesh, spec.material.nu, &spec.bcs, spec.solver)?;
        let force = assemble_force(&spec.mesh, &spec.loads)?;
        let pipeline = DensityPipeline::new(&spec.mesh, &spec.simp);
        let m = spec.material;
        let unit_material = Material { e0: 1.0, emin: m.emin / m.e0, nu: m.nu };
        Ok(Self { spec: spec.clone(), solver, pipeline, force, unit_material })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn pipeline(&self) -> &DensityPipeline {
        &self.pipeline
    }

    pub fn solver(&self) -> &EquilibriumSolver {
        &self.solver
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }

    /// Solves for design `x` and returns compliance, volume and gradient.
    pub fn evaluate(&self, x: &[f64], warm: Option<&Evaluation>) -> Result<Evaluation, SimpError> {
        let n = self.spec.mesh.num_elements();
        if x.len() != n {
            return Err(SimpError::SizeMismatch { expected: n, got: x.len() });
        }
        let p = self.spec.simp.penalty;
        let e0 = self.spec.material.e0;
        let field = self.pipeline.evaluate(x);
        let moduli = simp_moduli(&field.projected, &self.unit_material, p);
        let outcome = self.solver.solve(&moduli, &self.force, warm.map(|w| w.normalized_u.as_slice()))?;
        let u = outcome.displacement;
        let c = compliance(&u, &self.force) / e0;
        let g_unit = compliance_sensitivity(
            &self.spec.mesh,
            self.solver.unit_stiffness(),
            &u,
            &field.projected,
            &self.unit_material,
            p,
        )?;
        let g_phys: Vec<f64> = g_unit.iter().map(|g| g / e0).collect();
        let gradient = self.pipeline.chain(&field, &g_phys);
        let volume = super::mean(&field.projected);
        Ok(Evaluation {
            field,
            compliance: c,
            volume,
            gradient,
            normalized_u: u,
            solver_converged: outcome.termination == crate::fem::Termination::Converged,
        })
    }

    pub fn run(&self) -> Result<OptimizationResult, OptimizeError> {
        self.run_with(|_| {})
    }

    /// Runs the loop from the uniform design `x ≡ volfrac`, reporting each
    /// evaluated iterate to `observe`.
    pub fn run_with(&self, mut observe: impl FnMut(Progress)) -> Result<OptimizationResult, OptimizeError> {
        let n = self.spec.mesh.num_elements();
        let simp = self.spec.simp;
        let opt = self.spec.optimizer;
        let volfrac = simp.volfrac;
        let mut x = vec![volfrac; n];
        let mut compliances = Vec::new();
        let mut volumes = Vec::new();
        let mut warnings = 0;
        let mut bb = BarzilaiBorwein::new();
        let mut mma = Mma::new(n, MmaSettings::default());
        let mut warm: Option<Evaluation> = None;

        let abort = |source: SimpError, c: &[f64], v: &[f64]| OptimizeError::Aborted {
            source,
            compliance: c.to_vec(),
            volume: v.to_vec(),
        };

        loop {
            let ev = self.evaluate(&x, warm.as_ref()).map_err(|e| abort(e, &compliances, &volumes))?;
            if !ev.solver_converged {
                warnings += 1;
            }
            compliances.push(ev.compliance);
            volumes.push(ev.volume);
            let it = compliances.len();
            observe(Progress { iteration: it, compliance: ev.compliance, volume: ev.volume });
            log::debug!("iteration {it}: compliance {:.6e}, volume {:.4}", ev.compliance, ev.volume);

            if it >= 2 && opt.fun_tol > 0.0 {
                let prev = compliances[it - 2];
                if (ev.compliance - prev).abs() <= opt.fun_tol * prev.abs() {
                    return Ok(OptimizationResult {
                        final_compliance: ev.compliance,
                        final_volume: ev.volume,
                        densities: ev.field,
                        compliance: compliances,
                        volume: volumes,
                        iterations: it,
                        termination: StopReason::FunTol,
                        solver_warnings: warnings,
                    });
                }
            }

            let a = self.pipeline.volume_gradient(&ev.field);
            let vol_fn = |y: &[f64]| self.pipeline.volume(y);
            let next = match opt.kind {
                OptimizerKind::Pgd => {
                    let step = bb.step(&x, &ev.gradient);
                    let y: Vec<f64> = x.iter().zip(&ev.gradient).map(|(x, g)| x - step * g).collect();
                    project_volume(&y, &a, vol_fn, volfrac)
                }
                OptimizerKind::Mma => {
                    let y = mma
                        .update(&x, &ev.gradient, ev.volume - volfrac, &a)
                        .map_err(|e| abort(e, &compliances, &volumes))?;
                    // The subproblem only sees a convex approximation of the
                    // projected volume; restore exact feasibility.
                    project_volume(&y, &a, vol_fn, volfrac)
                }
            };
            let change = next.iter().zip(&x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            x = next;
            let stop = if opt.change_tol > 0.0 && change <= opt.change_tol {
                Some(StopReason::ChangeTol)
            } else if it >= opt.max_iters {
                Some(StopReason::MaxIters)
            } else {
                None
            };
            warm = Some(ev);
            if let Some(termination) = stop {
                let fin = self.evaluate(&x, warm.as_ref()).map_err(|e| abort(e, &compliances, &volumes))?;
                if !fin.solver_converged {
                    warnings += 1;
                }
                if warnings > 0 {
                    log::warn!("{warnings} linear solve(s) stopped at maxiter before reaching tol");
                }
                return Ok(OptimizationResult {
                    final_compliance: fin.compliance,
                    final_volume: fin.volume,
                    densities: fin.field,
                    compliance: compliances,
                    volume: volumes,
                    iterations: it,
                    termination,
                    solver_warnings: warnings,
                });
            }
        }
    }
}

/// Builds an [`Optimizer`] for `spec` and runs it.
pub fn optimize(spec: &ProblemSpec) -> Result<OptimizationResult, OptimizeError> {
    Optimizer::new(spec)?.run()
}
