//! Built-in problems.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::revision::RevisionRules;
use super::ProblemSpec;
use crate::fem::{DirichletBc, FixedDofs, Force, LoadCase, Material, SolverConfig};
use crate::mesh::{Axis, Comparator, Condition, NodeSelector, StructuredMesh};
use crate::simp::{OptimizerConfig, OptimizerKind, SimpParams, DEFAULT_BETA, DEFAULT_ETA};

pub const PHONE_STAND_RULE: &str =
    "The design must remain functional as a phone stand where the phone lies along the diagonal surface.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    PhoneStand,
    Cantilever,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::PhoneStand, Preset::Cantilever];

    pub fn name(self) -> &'static str {
        match self {
            Preset::PhoneStand => "phone_stand",
            Preset::Cantilever => "cantilever",
        }
    }

    pub fn spec(self) -> ProblemSpec {
        match self {
            Preset::PhoneStand => phone_stand(),
            Preset::Cantilever => cantilever(),
        }
    }

    pub fn rules(self) -> RevisionRules {
        match self {
            Preset::PhoneStand => RevisionRules {
                protected: vec!["bcs".into(), "loads".into()],
                requirement: Some(PHONE_STAND_RULE.into()),
                ..Default::default()
            },
            Preset::Cantilever => RevisionRules { protected: vec!["bcs".into()], ..Default::default() },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s || p.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected phone_stand or cantilever)"))
    }
}

pub fn preset(p: Preset) -> (ProblemSpec, RevisionRules) {
    (p.spec(), p.rules())
}

fn simp(volfrac: f64) -> SimpParams {
    SimpParams { penalty: 3.0, volfrac, rmin: 1.5, heaviside: true, beta: DEFAULT_BETA, eta: DEFAULT_ETA }
}

fn pgd() -> OptimizerConfig {
    OptimizerConfig { kind: OptimizerKind::Pgd, fun_tol: 1e-4, change_tol: 0.0, max_iters: 200 }
}

/// Box domain with the bottom face clamped and a downward load spread along
/// the diagonal from the top-left to the bottom-right edge of the xy profile.
pub fn phone_stand() -> ProblemSpec {
    let (lx, ly, lz) = (1.0, 0.5, 0.125);
    ProblemSpec {
        mesh: StructuredMesh { nelx: 128, nely: 64, nelz: 16, lx, ly, lz },
        material: Material { e0: 1.0, emin: 1e-9, nu: 0.3 },
        bcs: vec![DirichletBc {
            select: NodeSelector::new(vec![Condition::axis(Axis::Y, Comparator::Eq, 0.0)]),
            dofs: FixedDofs::ALL,
            value: 0.0,
        }],
        loads: vec![LoadCase {
            select: NodeSelector::new(vec![Condition::plane([ly, lx, 0.0], Comparator::Eq, lx * ly)]),
            force: Force { fx: 0.0, fy: -1.0, fz: 0.0 },
        }],
        solver: SolverConfig { tol: 1e-4, maxiter: 50, n_level: 5 },
        simp: simp(0.15),
        optimizer: pgd(),
        label: "phone_stand".into(),
    }
}

/// Cantilever with the left face held in x and z, a roller at the bottom of
/// the far end, and a downward load along the top edge of the left face.
pub fn cantilever() -> ProblemSpec {
    let (lx, ly, lz) = (1.0, 0.5, 0.5);
    ProblemSpec {
        mesh: StructuredMesh { nelx: 128, nely: 64, nelz: 64, lx, ly, lz },
        material: Material { e0: 1.0, emin: 1e-9, nu: 0.3 },
        bcs: vec![
            DirichletBc {
                select: NodeSelector::new(vec![Condition::axis(Axis::X, Comparator::Eq, 0.0)]),
                dofs: FixedDofs { ux: true, uy: false, uz: true },
                value: 0.0,
            },
            DirichletBc {
                select: NodeSelector::new(vec![
                    Condition::axis(Axis::X, Comparator::Eq, lx),
                    Condition::axis(Axis::Y, Comparator::Eq, 0.0),
                ]),
                dofs: FixedDofs { ux: false, uy: true, uz: true },
                value: 0.0,
            },
        ],
        loads: vec![LoadCase {
            select: NodeSelector::new(vec![
                Condition::axis(Axis::X, Comparator::Eq, 0.0),
                Condition::axis(Axis::Y, Comparator::Eq, ly),
            ]),
            force: Force { fx: 0.0, fy: -1.0, fz: 0.0 },
        }],
        solver: SolverConfig { tol: 1e-4, maxiter: 200, n_level: 5 },
        simp: simp(0.40),
        optimizer: pgd(),
        label: "cantilever".into(),
    }
}
