//! Projected gradient descent onto `{0 ≤ x ≤ 1, v(x) ≤ f}`.

const BISECTION_STEPS: usize = 200;
/// Largest per-element move of a single step, as a fraction of the box.
pub const MAX_MOVE: f64 = 0.2;

fn clamp_shifted(y: &[f64], a: &[f64], lambda: f64) -> Vec<f64> {
    y.iter().zip(a).map(|(y, a)| (y - lambda * a).clamp(0.0, 1.0)).collect()
}

/// Finds the smallest shift `λ ≥ 0` with `volume(clamp(y − λ a)) ≤ limit` by
/// bisection and returns the shifted point. `a` must be nonnegative; with
/// `a ≡ 1` and `volume = mean` this is the Euclidean projection onto the box
/// intersected with the volume halfspace. When the constraint is already met
/// at `λ = 0` the clamped point is returned unchanged.
pub fn project_volume(y: &[f64], a: &[f64], volume: impl Fn(&[f64]) -> f64, limit: f64) -> Vec<f64> {
    let at_zero = clamp_shifted(y, a, 0.0);
    if volume(&at_zero) <= limit {
        return at_zero;
    }
    let mut hi = y
        .iter()
        .zip(a)
        .filter(|(_, a)| **a > 0.0)
        .map(|(y, a)| y / a)
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut best = clamp_shifted(y, a, hi);
    if volume(&best) > limit {
        log::warn!("volume projection: limit {limit} unreachable, returning the emptiest point");
        return best;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let x = clamp_shifted(y, a, mid);
        if volume(&x) <= limit {
            hi = mid;
            best = x;
        } else {
            lo = mid;
        }
    }
    best
}

/// `x' = Proj_C(x − step · grad)` with `C = {0 ≤ x ≤ 1, mean(x) ≤ f}`.
pub fn pgd_step(x: &[f64], grad: &[f64], step: f64, volfrac: f64) -> Vec<f64> {
    let y: Vec<f64> = x.iter().zip(grad).map(|(x, g)| x - step * g).collect();
    let ones = vec![1.0; x.len()];
    project_volume(&y, &ones, super::mean, volfrac)
}

/// Barzilai–Borwein step lengths. The first step moves the steepest element
/// by [`MAX_MOVE`]; later steps use `sᵀs / sᵀy`, capped at the same move and
/// falling back to the previous step when the curvature estimate is not
/// positive. Both rules are invariant to a constant rescaling of the gradient.
#[derive(Debug, Clone, Default)]
pub struct BarzilaiBorwein {
    previous: Option<(Vec<f64>, Vec<f64>, f64)>,
}

impl BarzilaiBorwein {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step(&mut self, x: &[f64], grad: &[f64]) -> f64 {
        let gmax = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gmax == 0.0 {
            return 0.0;
        }
        let cap = MAX_MOVE / gmax;
        let step = match &self.previous {
            None => cap,
            Some((xp, gp, sp)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..x.len() {
                    let s = x[i] - xp[i];
                    ss += s * s;
                    sy += s * (grad[i] - gp[i]);
                }
                let bb = if sy > 0.0 && ss > 0.0 { ss / sy } else { *sp };
                if bb.is_finite() && bb > 0.0 {
                    bb.min(cap)
                } else {
                    cap
                }
            }
        };
        self.previous = Some((x.to_vec(), grad.to_vec(), step));
        step
    }
}
