//! Parameter diffs between problem specs and clamped application of agent
//! revisions.

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::schema::{bounds, Bound, FieldError};
use super::{validate_value, ProblemSpec};

pub const DEFAULT_RMIN_FLOOR: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RevisionError {
    #[error("unknown parameter path `{0}`")]
    UnknownPath(String),
    #[error("revised spec is invalid: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamChange {
    pub path: String,
    pub old: Value,
    pub new: Value,
}

/// Changed parameter paths with their old and new values.
///
/// Serialized as `{"simp.penalty": [3.0, 5.0], ..., "rationale": "..."}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterDiff {
    pub changes: Vec<ParamChange>,
    pub rationale: String,
}

impl ParameterDiff {
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&ParamChange> {
        self.changes.iter().find(|c| c.path == path)
    }

    /// Re-expresses the diff against `base`: old values are read from `base`
    /// and changes that would be no-ops there are dropped. Paths that do not
    /// resolve in `base` are kept so that applying reports them.
    pub fn rebase_onto(&self, base: &ProblemSpec) -> ParameterDiff {
        let v = base.to_value();
        let changes = self
            .changes
            .iter()
            .filter_map(|c| match lookup(&v, &c.path) {
                Some(old) if old == &c.new => None,
                Some(old) => Some(ParamChange { path: c.path.clone(), old: old.clone(), new: c.new.clone() }),
                None => Some(c.clone()),
            })
            .collect();
        ParameterDiff { changes, rationale: self.rationale.clone() }
    }
}

impl Serialize for ParameterDiff {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.changes.len() + 1))?;
        for c in &self.changes {
            m.serialize_entry(&c.path, &[&c.old, &c.new])?;
        }
        m.serialize_entry("rationale", &self.rationale)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for ParameterDiff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct DiffVisitor;
        impl<'de> Visitor<'de> for DiffVisitor {
            type Value = ParameterDiff;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of parameter paths to [old, new] pairs")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<ParameterDiff, A::Error> {
                let mut diff = ParameterDiff::default();
                while let Some(key) = map.next_key::<String>()? {
                    if key == "rationale" {
                        diff.rationale = map.next_value()?;
                        continue;
                    }
                    let pair: Value = map.next_value()?;
                    match pair.as_array().map(|a| a.as_slice()) {
                        Some([old, new]) => diff.changes.push(ParamChange { path: key, old: old.clone(), new: new.clone() }),
                        _ => return Err(de::Error::custom(format!("`{key}`: expected [old, new]"))),
                    }
                }
                Ok(diff)
            }
        }
        d.deserialize_map(DiffVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub path: String,
    pub proposed: Value,
    pub enforced: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub path: String,
    pub proposed: Value,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClampReport {
    pub clamps: Vec<Clamp>,
    pub rejected: Vec<Rejection>,
}

impl ClampReport {
    pub fn is_empty(&self) -> bool {
        self.clamps.is_empty() && self.rejected.is_empty()
    }
}

/// Constraints imposed on agent revisions.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionRules {
    pub rmin_floor: f64,
    /// Path prefixes agents may not edit.
    pub protected: Vec<String>,
    pub bounds: Vec<Bound>,
    /// Preset-specific functional requirement stated to the agent.
    pub requirement: Option<String>,
}

impl Default for RevisionRules {
    fn default() -> Self {
        Self { rmin_floor: DEFAULT_RMIN_FLOOR, protected: Vec::new(), bounds: bounds().to_vec(), requirement: None }
    }
}

impl RevisionRules {
    pub fn is_protected(&self, path: &str) -> bool {
        self.protected.iter().any(|p| {
            path == p || path.strip_prefix(p.as_str()).is_some_and(|rest| rest.starts_with('.') || rest.starts_with('['))
        })
    }

    /// The numbered rules shown to the revising agent.
    pub fn instructions(&self) -> Vec<String> {
        let mut out: Vec<String> = self.requirement.iter().cloned().collect();
        out.push(format!("Do not go below a density filter radius of {}.", self.rmin_floor));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Option<Vec<Segment>> {
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return None;
        }
        out.push(Segment::Key(key.to_string()));
        while !rest.is_empty() {
            let close = rest.find(']')?;
            out.push(Segment::Index(rest[1..close].parse().ok()?));
            rest = &rest[close + 1..];
            if !rest.is_empty() && !rest.starts_with('[') {
                return None;
            }
        }
    }
    Some(out)
}

fn lookup<'v>(v: &'v Value, path: &str) -> Option<&'v Value> {
    let mut cur = v;
    for seg in parse_path(path)? {
        cur = match seg {
            Segment::Key(k) => cur.as_object()?.get(&k)?,
            Segment::Index(i) => cur.as_array()?.get(i)?,
        };
    }
    Some(cur)
}

fn lookup_mut<'v>(v: &'v mut Value, path: &str) -> Option<&'v mut Value> {
    let mut cur = v;
    for seg in parse_path(path)? {
        cur = match seg {
            Segment::Key(k) => cur.as_object_mut()?.get_mut(&k)?,
            Segment::Index(i) => cur.as_array_mut()?.get_mut(i)?,
        };
    }
    Some(cur)
}

fn flatten(prefix: &str, a: &Value, b: &Value, out: &mut Vec<ParamChange>) {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) if ma.len() == mb.len() && ma.keys().all(|k| mb.contains_key(k)) => {
            for (k, va) in ma {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&p, va, &mb[k], out);
            }
        }
        (Value::Array(xa), Value::Array(xb)) if xa.len() == xb.len() => {
            for (i, (va, vb)) in xa.iter().zip(xb).enumerate() {
                flatten(&format!("{prefix}[{i}]"), va, vb, out);
            }
        }
        _ => {
            if a != b {
                out.push(ParamChange { path: prefix.to_string(), old: a.clone(), new: b.clone() });
            }
        }
    }
}

/// Every changed leaf path from `base` to `revised`. Arrays of different
/// length and objects with different keys are reported whole.
pub fn diff(base: &ProblemSpec, revised: &ProblemSpec) -> ParameterDiff {
    let mut changes = Vec::new();
    flatten("", &base.to_value(), &revised.to_value(), &mut changes);
    ParameterDiff { changes, rationale: String::new() }
}

fn clamp_number(b: &Bound, x: f64) -> f64 {
    let mut y = if b.integer { x.round() } else { x };
    if b.lo_open && y <= b.lo {
        // Smallest admissible value that still reads as a deliberate choice.
        y = b.lo + 1e-3 * (b.hi - b.lo);
    }
    y.clamp(b.lo, b.hi)
}

fn number_value(x: f64, integer: bool) -> Value {
    if integer {
        Value::from(x as i64)
    } else {
        Value::from(x)
    }
}

/// Applies `diff` to `spec`, enforcing `rules`. Protected edits are skipped
/// and reported; out-of-range values are clamped and reported.
pub fn apply_revision(
    spec: &ProblemSpec,
    diff: &ParameterDiff,
    rules: &RevisionRules,
) -> Result<(ProblemSpec, ClampReport), RevisionError> {
    let mut v = spec.to_value();
    let mut report = ClampReport::default();
    for change in &diff.changes {
        if rules.is_protected(&change.path) {
            report.rejected.push(Rejection {
                path: change.path.clone(),
                proposed: change.new.clone(),
                reason: "protected by the preset".to_string(),
            });
            continue;
        }
        let slot = lookup_mut(&mut v, &change.path).ok_or_else(|| RevisionError::UnknownPath(change.path.clone()))?;
        *slot = change.new.clone();
    }

    for b in &rules.bounds {
        let Some(slot) = lookup_mut(&mut v, b.path) else { continue };
        let Some(x) = slot.as_f64() else { continue };
        if !x.is_finite() || b.contains(x) {
            continue;
        }
        let y = clamp_number(b, x);
        report.clamps.push(Clamp { path: b.path.to_string(), proposed: slot.clone(), enforced: number_value(y, b.integer) });
        *slot = number_value(y, b.integer);
    }
    if let Some(slot) = lookup_mut(&mut v, "simp.rmin") {
        if let Some(r) = slot.as_f64() {
            if r < rules.rmin_floor {
                report.clamps.push(Clamp { path: "simp.rmin".into(), proposed: slot.clone(), enforced: rules.rmin_floor.into() });
                *slot = rules.rmin_floor.into();
            }
        }
    }
    if let (Some(e0), Some(emin)) = (
        lookup(&v, "material.e0").and_then(Value::as_f64),
        lookup(&v, "material.emin").and_then(Value::as_f64),
    ) {
        if emin > 1e-3 * e0 {
            let slot = lookup_mut(&mut v, "material.emin").expect("looked up above");
            report.clamps.push(Clamp { path: "material.emin".into(), proposed: slot.clone(), enforced: (1e-3 * e0).into() });
            *slot = (1e-3 * e0).into();
        }
    }

    let revised = validate_value(&v).map_err(RevisionError::Invalid)?;
    Ok((revised, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{cantilever, phone_stand, preset, Preset};
    use proptest::prelude::*;

    fn change(path: &str, old: impl Into<Value>, new: impl Into<Value>) -> ParamChange {
        ParamChange { path: path.into(), old: old.into(), new: new.into() }
    }

    #[test]
    fn path_parsing() {
        assert_eq!(
            parse_path("bcs[0].select[1].value").unwrap(),
            vec![
                Segment::Key("bcs".into()),
                Segment::Index(0),
                Segment::Key("select".into()),
                Segment::Index(1),
                Segment::Key("value".into()),
            ]
        );
        assert!(parse_path("a..b").is_none());
        assert!(parse_path("a[x]").is_none());
        assert!(parse_path("a[0]b").is_none());
    }

    #[test]
    fn first_revision_of_the_trajectory() {
        let (spec, rules) = preset(Preset::PhoneStand);
        let d = ParameterDiff {
            changes: vec![change("simp.penalty", 3.0, 5.0), change("simp.volfrac", 0.15, 0.10)],
            rationale: "thinner members".into(),
        };
        let (out, report) = apply_revision(&spec, &d, &rules).unwrap();
        assert_eq!(out.simp.penalty, 5.0);
        assert_eq!(out.simp.volfrac, 0.10);
        assert!(report.is_empty());
    }

    #[test]
    fn filter_radius_is_floored() {
        let (spec, rules) = preset(Preset::Cantilever);
        let d = ParameterDiff { changes: vec![change("simp.rmin", 1.5, 1.0)], rationale: String::new() };
        let (out, report) = apply_revision(&spec, &d, &rules).unwrap();
        assert_eq!(out.simp.rmin, 1.5);
        assert_eq!(report.clamps, vec![Clamp { path: "simp.rmin".into(), proposed: 1.0.into(), enforced: 1.5.into() }]);
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let (spec, rules) = preset(Preset::Cantilever);
        let d = ParameterDiff {
            changes: vec![change("simp.penalty", 3.0, 40.0), change("mesh.nelx", 128, 1000), change("simp.volfrac", 0.4, -0.2)],
            rationale: String::new(),
        };
        let (out, report) = apply_revision(&spec, &d, &rules).unwrap();
        assert_eq!(out.simp.penalty, 16.0);
        assert_eq!(out.mesh.nelx, 512);
        assert!(out.simp.volfrac > 0.0 && out.simp.volfrac <= 0.01);
        assert_eq!(report.clamps.len(), 3);
        // Idempotent once clamped.
        let again = diff(&spec, &out);
        let (twice, report2) = apply_revision(&spec, &again, &rules).unwrap();
        assert_eq!(twice, out);
        assert!(report2.is_empty());
    }

    #[test]
    fn protected_edits_are_rejected() {
        let (spec, rules) = preset(Preset::PhoneStand);
        let d = ParameterDiff {
            changes: vec![change("loads[0].force.fy", -1.0, -2.0), change("simp.penalty", 3.0, 4.0)],
            rationale: String::new(),
        };
        let (out, report) = apply_revision(&spec, &d, &rules).unwrap();
        assert_eq!(out.loads, spec.loads);
        assert_eq!(out.simp.penalty, 4.0);
        assert_eq!(report.rejected.len(), 1);
        assert!(rules.is_protected("bcs"));
        assert!(!rules.is_protected("bcsx"));
    }

    #[test]
    fn unknown_path_is_named() {
        let spec = cantilever();
        let d = ParameterDiff { changes: vec![change("simp.continuation", Value::Null, true)], rationale: String::new() };
        let err = apply_revision(&spec, &d, &RevisionRules::default()).unwrap_err();
        assert_eq!(err, RevisionError::UnknownPath("simp.continuation".into()));
        assert!(err.to_string().contains("simp.continuation"));
    }

    #[test]
    fn empty_diff_is_identity() {
        let spec = phone_stand();
        let (out, report) = apply_revision(&spec, &ParameterDiff::default(), &RevisionRules::default()).unwrap();
        assert_eq!(out.to_json(), spec.to_json());
        assert!(report.is_empty());
        assert!(diff(&spec, &spec).is_empty());
    }

    #[test]
    fn recovery_revision_reports_filter_change() {
        let mut r3 = phone_stand();
        r3.simp.rmin = 3.75;
        let mut r4 = r3.clone();
        r4.simp.rmin = 2.5;
        r4.simp.penalty = 8.0;
        let d = diff(&r3, &r4);
        assert_eq!(d.get("simp.rmin").unwrap().old, Value::from(3.75));
        assert_eq!(d.get("simp.rmin").unwrap().new, Value::from(2.5));
        assert_eq!(d.changes.len(), 2);
    }

    #[test]
    fn diff_wire_format_round_trips() {
        let d = ParameterDiff { changes: vec![change("simp.penalty", 3.0, 5.0)], rationale: "why".into() };
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(text, r#"{"simp.penalty":[3.0,5.0],"rationale":"why"}"#);
        assert_eq!(serde_json::from_str::<ParameterDiff>(&text).unwrap(), d);
        assert!(serde_json::from_str::<ParameterDiff>(r#"{"simp.penalty": 5}"#).is_err());
    }

    #[test]
    fn rebase_reads_old_values_from_base() {
        let spec = phone_stand();
        let d = ParameterDiff {
            changes: vec![change("simp.penalty", 7.0, 9.0), change("simp.volfrac", 0.15, 0.15)],
            rationale: String::new(),
        };
        let r = d.rebase_onto(&spec);
        assert_eq!(r.changes, vec![change("simp.penalty", 3.0, 9.0)]);
    }

    prop_compose! {
        fn arb_spec()(p in 1.0f64..16.0, f in 0.01f64..1.0, r in 1.5f64..6.0, nx in 1usize..64, ny in 1usize..64,
                      heaviside in any::<bool>(), tol in 1e-8f64..1e-2, fun_tol in 0.0f64..0.1, mma in any::<bool>(),
                      e0 in 0.01f64..100.0, nu in -0.5f64..0.45) -> ProblemSpec {
            let mut s = phone_stand();
            s.simp.penalty = p;
            s.simp.volfrac = f;
            s.simp.rmin = r;
            s.simp.heaviside = heaviside;
            s.mesh.nelx = nx;
            s.mesh.nely = ny;
            s.solver.tol = tol;
            s.optimizer.fun_tol = fun_tol;
            s.optimizer.kind = if mma { crate::simp::OptimizerKind::Mma } else { crate::simp::OptimizerKind::Pgd };
            s.material.e0 = e0;
            s.material.nu = nu;
            s
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn diff_then_apply_reconstructs(a in arb_spec(), b in arb_spec()) {
            let d = diff(&a, &b);
            let (out, report) = apply_revision(&a, &d, &RevisionRules::default()).unwrap();
            prop_assert_eq!(out, b);
            prop_assert!(report.is_empty());
        }

        #[test]
        fn serialization_round_trips(a in arb_spec()) {
            prop_assert_eq!(crate::problem::validate(&a.to_json()).unwrap(), a);
        }

        #[test]
        fn clamping_never_yields_invalid_specs(p in -5.0f64..40.0, f in -1.0f64..2.0, r in -1.0f64..20.0, n in -10i64..2000) {
            let spec = cantilever().coarsened(16);
            let d = ParameterDiff {
                changes: vec![change("simp.penalty", 3.0, p), change("simp.volfrac", 0.4, f), change("simp.rmin", 1.5, r), change("mesh.nely", 64, n)],
                rationale: String::new(),
            };
            let rules = RevisionRules::default();
            let (out, _) = apply_revision(&spec, &d, &rules).unwrap();
            prop_assert!(out.simp.rmin >= rules.rmin_floor);
            prop_assert!(crate::problem::validate(&out.to_json()).is_ok());
        }
    }
}
