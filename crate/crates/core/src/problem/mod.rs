//! The structured problem description: schema, validation, parameter diffs
//! and clamped revisions.

mod presets;
mod revision;
mod schema;

use serde::{Deserialize, Serialize};

use crate::fem::{DirichletBc, LoadCase, Material, SolverConfig};
use crate::mesh::StructuredMesh;
use crate::simp::{OptimizerConfig, SimpParams};

pub use presets::{cantilever, phone_stand, preset, Preset, PHONE_STAND_RULE};
pub use revision::{
    apply_revision, diff, Clamp, ClampReport, ParamChange, ParameterDiff, Rejection, RevisionError, RevisionRules,
    DEFAULT_RMIN_FLOOR,
};
pub use schema::{bounds, Bound, FieldError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub mesh: StructuredMesh,
    pub material: Material,
    pub bcs: Vec<DirichletBc>,
    pub loads: Vec<LoadCase>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub simp: SimpParams,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub label: String,
}

impl ProblemSpec {
    /// Canonical pretty JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem spec serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("problem spec serializes")
    }

    /// Same problem with every element count divided by `factor` (at least
    /// one element per axis).
    pub fn coarsened(&self, factor: usize) -> ProblemSpec {
        let mut out = self.clone();
        let f = factor.max(1);
        out.mesh.nelx = (self.mesh.nelx / f).max(1);
        out.mesh.nely = (self.mesh.nely / f).max(1);
        out.mesh.nelz = (self.mesh.nelz / f).max(1);
        out
    }
}

/// Parses and validates a problem file, reporting every violated field.
pub fn validate(json_text: &str) -> Result<ProblemSpec, Vec<FieldError>> {
    let value: serde_json::Value = serde_json::from_str(json_text).map_err(|e| {
        vec![FieldError { path: String::new(), message: format!("invalid JSON: {e}") }]
    })?;
    validate_value(&value)
}

pub fn validate_value(value: &serde_json::Value) -> Result<ProblemSpec, Vec<FieldError>> {
    let errors = schema::check(value);
    if !errors.is_empty() {
        return Err(errors);
    }
    let spec: ProblemSpec = serde_json::from_value(value.clone())
        .map_err(|e| vec![FieldError { path: String::new(), message: e.to_string() }])?;
    let errors = schema::check_selections(&spec);
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phone_stand_preset_validates_with_defaults() {
        let mut v = phone_stand().to_value();
        v["material"].as_object_mut().unwrap().remove("emin");
        let spec = validate_value(&v).unwrap();
        assert_eq!(spec.simp.volfrac, 0.15);
        assert_eq!(spec.simp.penalty, 3.0);
        assert_eq!(spec.simp.rmin, 1.5);
        assert_eq!(spec.material.emin, 1e-9);
        assert!(spec.simp.heaviside);
    }

    #[test]
    fn missing_loads_is_a_single_error() {
        let mut v = phone_stand().to_value();
        v.as_object_mut().unwrap().remove("loads");
        let errors = validate_value(&v).unwrap_err();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].to_string(), "loads: required");
    }

    #[test]
    fn reports_every_violation() {
        let mut v = phone_stand().to_value();
        v["simp"]["volfrac"] = 1.3.into();
        v["mesh"]["nelx"] = 0.into();
        v["material"]["nu"] = 0.5.into();
        v["optimizer"]["kind"] = "adam".into();
        v["simp"]["continuation"] = true.into();
        let errors = validate_value(&v).unwrap_err();
        let paths: Vec<&str> = errors.iter().map(|e| e.path.as_str()).collect();
        for p in ["simp.volfrac", "mesh.nelx", "material.nu", "optimizer.kind", "simp.continuation"] {
            assert!(paths.contains(&p), "{p} missing from {paths:?}");
        }
        assert!(errors.iter().any(|e| e.path == "simp.volfrac" && e.message.contains("range")));
    }

    #[test]
    fn selectors_must_hit_nodes() {
        let mut v = cantilever().to_value();
        v["loads"][0]["select"][0]["value"] = 3.0.into();
        let errors = validate_value(&v).unwrap_err();
        assert_eq!(errors[0].path, "loads[0].select");
    }

    #[test]
    fn invalid_json_is_reported() {
        assert!(validate("{").unwrap_err()[0].message.contains("invalid JSON"));
    }

    #[test]
    fn canonical_json_round_trips() {
        for spec in [phone_stand(), cantilever()] {
            let text = spec.to_json();
            let back = validate(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.to_json(), text);
        }
    }
}
