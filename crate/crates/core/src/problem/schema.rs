//! Field-by-field validation of the problem JSON, collecting every error.

use serde_json::{Map, Value};

use super::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for FieldError {}

/// Admissible numeric range of one scalar field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub path: &'static str,
    pub lo: f64,
    pub hi: f64,
    /// The lower end is excluded.
    pub lo_open: bool,
    pub integer: bool,
}

impl Bound {
    const fn closed(path: &'static str, lo: f64, hi: f64) -> Self {
        Self { path, lo, hi, lo_open: false, integer: false }
    }
    const fn open(path: &'static str, lo: f64, hi: f64) -> Self {
        Self { path, lo, hi, lo_open: true, integer: false }
    }
    const fn int(path: &'static str, lo: f64, hi: f64) -> Self {
        Self { path, lo, hi, lo_open: false, integer: true }
    }

    pub fn contains(&self, v: f64) -> bool {
        let lo_ok = if self.lo_open { v > self.lo } else { v >= self.lo };
        lo_ok && v <= self.hi && (!self.integer || v.fract() == 0.0)
    }

    pub fn describe(&self) -> String {
        format!("{}{}, {}]", if self.lo_open { "(" } else { "[" }, self.lo, self.hi)
    }
}

const BOUNDS: &[Bound] = &[
    Bound::int("mesh.nelx", 1.0, 512.0),
    Bound::int("mesh.nely", 1.0, 512.0),
    Bound::int("mesh.nelz", 1.0, 512.0),
    Bound::closed("mesh.lx", 1e-3, 1e3),
    Bound::closed("mesh.ly", 1e-3, 1e3),
    Bound::closed("mesh.lz", 1e-3, 1e3),
    Bound::closed("material.e0", 1e-3, 1e3),
    Bound::open("material.emin", 0.0, 1.0),
    Bound::closed("material.nu", -0.99, 0.49),
    Bound::closed("solver.tol", 1e-12, 0.1),
    Bound::int("solver.maxiter", 1.0, 10_000.0),
    Bound::int("solver.n_level", 1.0, 10.0),
    Bound::closed("simp.penalty", 1.0, 16.0),
    Bound::open("simp.volfrac", 0.0, 1.0),
    Bound::open("simp.rmin", 0.0, 16.0),
    Bound::closed("simp.beta", 0.1, 64.0),
    Bound::closed("simp.eta", 0.05, 0.95),
    Bound::closed("optimizer.fun_tol", 0.0, 1.0),
    Bound::closed("optimizer.change_tol", 0.0, 1.0),
    Bound::int("optimizer.max_iters", 1.0, 2000.0),
];

/// Numeric bounds applied by validation and by revision clamping.
pub fn bounds() -> &'static [Bound] {
    BOUNDS
}

enum Kind {
    Num,
    Bool,
    Str,
    Choice(&'static [&'static str]),
}

struct Field {
    key: &'static str,
    kind: Kind,
    required: bool,
}

const fn num(key: &'static str, required: bool) -> Field {
    Field { key, kind: Kind::Num, required }
}

const MESH: &[Field] = &[
    num("nelx", true),
    num("nely", true),
    num("nelz", true),
    num("lx", true),
    num("ly", true),
    num("lz", true),
];
const MATERIAL: &[Field] = &[num("e0", true), num("emin", false), num("nu", true)];
const SOLVER: &[Field] = &[num("tol", true), num("maxiter", true), num("n_level", true)];
const SIMP: &[Field] = &[
    num("penalty", true),
    num("volfrac", true),
    num("rmin", true),
    Field { key: "heaviside", kind: Kind::Bool, required: false },
    num("beta", false),
    num("eta", false),
];
const OPTIMIZER: &[Field] = &[
    Field { key: "kind", kind: Kind::Choice(&["pgd", "mma"]), required: true },
    num("fun_tol", false),
    num("change_tol", false),
    num("max_iters", false),
];

struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError { path: path.into(), message: message.into() });
    }

    fn object<'v>(&mut self, path: &str, v: &'v Value) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(m) => Some(m),
            None => {
                self.push(path, "expected an object");
                None
            }
        }
    }

    fn unknown_keys(&mut self, path: &str, m: &Map<String, Value>, allowed: &[&str]) {
        for k in m.keys() {
            if !allowed.contains(&k.as_str()) {
                self.push(join(path, k), "unknown field");
            }
        }
    }

    fn section(&mut self, path: &str, v: &Value, fields: &[Field]) {
        let Some(m) = self.object(path, v) else { return };
        let keys: Vec<&str> = fields.iter().map(|f| f.key).collect();
        self.unknown_keys(path, m, &keys);
        for f in fields {
            let p = join(path, f.key);
            match m.get(f.key) {
                None if f.required => self.push(p, "required"),
                None => {}
                Some(v) => self.scalar(&p, v, &f.kind),
            }
        }
    }

    fn scalar(&mut self, path: &str, v: &Value, kind: &Kind) {
        match kind {
            Kind::Num => match v.as_f64() {
                Some(x) if x.is_finite() => {
                    if let Some(b) = BOUNDS.iter().find(|b| b.path == path) {
                        if !b.contains(x) {
                            let what = if b.integer { "integer" } else { "value" };
                            self.push(path, format!("{what} {x} out of range {}", b.describe()));
                        }
                    }
                }
                _ => self.push(path, "expected a finite number"),
            },
            Kind::Bool => {
                if !v.is_boolean() {
                    self.push(path, "expected true or false");
                }
            }
            Kind::Str => {
                if !v.is_string() {
                    self.push(path, "expected a string");
                }
            }
            Kind::Choice(options) => match v.as_str() {
                Some(s) if options.contains(&s) => {}
                _ => self.push(path, format!("expected one of {}", options.join(", "))),
            },
        }
    }

    fn selector(&mut self, path: &str, v: &Value) {
        let Some(items) = v.as_array() else {
            self.push(path, "expected an array of conditions");
            return;
        };
        if items.is_empty() {
            self.push(path, "needs at least one condition");
        }
        for (i, c) in items.iter().enumerate() {
            let p = format!("{path}[{i}]");
            let Some(m) = self.object(&p, c) else { continue };
            self.unknown_keys(&p, m, &["axis", "normal", "op", "value"]);
            match (m.get("axis"), m.get("normal")) {
                (Some(a), None) => self.scalar(&join(&p, "axis"), a, &Kind::Choice(&["x", "y", "z"])),
                (None, Some(n)) => {
                    let ok = n.as_array().is_some_and(|a| {
                        a.len() == 3
                            && a.iter().all(|x| x.as_f64().is_some_and(f64::is_finite))
                            && a.iter().any(|x| x.as_f64() != Some(0.0))
                    });
                    if !ok {
                        self.push(join(&p, "normal"), "expected three finite numbers, not all zero");
                    }
                }
                (Some(_), Some(_)) => self.push(&p, "give either axis or normal, not both"),
                (None, None) => self.push(&p, "axis or normal required"),
            }
            match m.get("op") {
                Some(op) => self.scalar(&join(&p, "op"), op, &Kind::Choice(&["eq", "le", "ge"])),
                None => self.push(join(&p, "op"), "required"),
            }
            match m.get("value") {
                Some(x) => self.scalar(&join(&p, "value"), x, &Kind::Num),
                None => self.push(join(&p, "value"), "required"),
            }
        }
    }

    fn boundary_conditions(&mut self, v: &Value) {
        let Some(items) = v.as_array() else {
            self.push("bcs", "expected an array");
            return;
        };
        for (i, bc) in items.iter().enumerate() {
            let p = format!("bcs[{i}]");
            let Some(m) = self.object(&p, bc) else { continue };
            self.unknown_keys(&p, m, &["select", "dofs", "value"]);
            match m.get("select") {
                Some(s) => self.selector(&join(&p, "select"), s),
                None => self.push(join(&p, "select"), "required"),
            }
            match m.get("dofs") {
                Some(d) => {
                    let dp = join(&p, "dofs");
                    let fields = [
                        Field { key: "ux", kind: Kind::Bool, required: false },
                        Field { key: "uy", kind: Kind::Bool, required: false },
                        Field { key: "uz", kind: Kind::Bool, required: false },
                    ];
                    let before = self.errors.len();
                    self.section(&dp, d, &fields);
                    let any = d.as_object().is_some_and(|m| m.values().any(|v| v == &Value::Bool(true)));
                    if self.errors.len() == before && !any {
                        self.push(dp, "at least one of ux, uy, uz must be fixed");
                    }
                }
                None => self.push(join(&p, "dofs"), "required"),
            }
            if let Some(x) = m.get("value") {
                self.scalar(&join(&p, "value"), x, &Kind::Num);
            }
        }
    }

    fn loads(&mut self, v: &Value) {
        let Some(items) = v.as_array() else {
            self.push("loads", "expected an array");
            return;
        };
        for (i, load) in items.iter().enumerate() {
            let p = format!("loads[{i}]");
            let Some(m) = self.object(&p, load) else { continue };
            self.unknown_keys(&p, m, &["select", "force"]);
            match m.get("select") {
                Some(s) => self.selector(&join(&p, "select"), s),
                None => self.push(join(&p, "select"), "required"),
            }
            match m.get("force") {
                Some(f) => self.section(&join(&p, "force"), f, &[num("fx", false), num("fy", false), num("fz", false)]),
                None => self.push(join(&p, "force"), "required"),
            }
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

pub(super) fn check(v: &Value) -> Vec<FieldError> {
    let mut c = Checker { errors: Vec::new() };
    let Some(top) = c.object("", v) else { return c.errors };
    c.unknown_keys("", top, &["mesh", "material", "bcs", "loads", "solver", "simp", "optimizer", "label"]);
    let sections: [(&str, &[Field], bool); 5] = [
        ("mesh", MESH, true),
        ("material", MATERIAL, true),
        ("solver", SOLVER, false),
        ("simp", SIMP, true),
        ("optimizer", OPTIMIZER, true),
    ];
    for (key, fields, required) in sections {
        match top.get(key) {
            Some(v) => c.section(key, v, fields),
            None if required => c.push(key, "required"),
            None => {}
        }
    }
    match top.get("bcs") {
        Some(v) => c.boundary_conditions(v),
        None => c.push("bcs", "required"),
    }
    match top.get("loads") {
        Some(v) => c.loads(v),
        None => c.push("loads", "required"),
    }
    if let Some(l) = top.get("label") {
        c.scalar("label", l, &Kind::Str);
    }
    let e0 = v.pointer("/material/e0").and_then(Value::as_f64);
    let emin = v.pointer("/material/emin").and_then(Value::as_f64).unwrap_or(crate::fem::DEFAULT_EMIN);
    if let Some(e0) = e0 {
        if emin > 1e-3 * e0 && !c.errors.iter().any(|e| e.path.starts_with("material.")) {
            c.push("material.emin", format!("must be at most 1e-3 · e0 = {}", 1e-3 * e0));
        }
    }
    c.errors
}

/// Checks that every selector picks at least one node of the mesh.
pub(super) fn check_selections(spec: &ProblemSpec) -> Vec<FieldError> {
    let mut errors = Vec::new();
    for (i, bc) in spec.bcs.iter().enumerate() {
        if bc.select.select(&spec.mesh).is_empty() {
            errors.push(FieldError {
                path: format!("bcs[{i}].select"),
                message: format!("`{}` matches no mesh nodes", bc.select.describe()),
            });
        }
    }
    for (i, load) in spec.loads.iter().enumerate() {
        if load.select.select(&spec.mesh).is_empty() {
            errors.push(FieldError {
                path: format!("loads[{i}].select"),
                message: format!("`{}` matches no mesh nodes", load.select.describe()),
            });
        }
    }
    errors
}
