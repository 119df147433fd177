//! Method of Moving Asymptotes for one inequality constraint on `[0, 1]ⁿ`.

use super::SimpError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmaSettings {
    /// Initial asymptote distance as a fraction of the box width.
    pub asyinit: f64,
    pub asydecr: f64,
    pub asyincr: f64,
    pub move_limit: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self { asyinit: 0.5, asydecr: 0.7, asyincr: 1.2, move_limit: 0.2 }
    }
}

/// Asymptote state carried between calls.
#[derive(Debug, Clone)]
pub struct Mma {
    settings: MmaSettings,
    iteration: usize,
    low: Vec<f64>,
    upp: Vec<f64>,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
}

const DUAL_STEPS: usize = 200;

impl Mma {
    pub fn new(n: usize, settings: MmaSettings) -> Self {
        Self {
            settings,
            iteration: 0,
            low: vec![0.0; n],
            upp: vec![1.0; n],
            xold1: Vec::new(),
            xold2: Vec::new(),
        }
    }

    pub fn asymptotes(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.upp)
    }

    /// One MMA step minimizing the objective with gradient `df` subject to
    /// `g(x) ≤ 0`, where `g` has value `g0` and gradient `dg` at `x`.
    pub fn update(&mut self, x: &[f64], df: &[f64], g0: f64, dg: &[f64]) -> Result<Vec<f64>, SimpError> {
        let n = x.len();
        for v in [df.len(), dg.len()] {
            if v != n {
                return Err(SimpError::SizeMismatch { expected: n, got: v });
            }
        }
        let s = self.settings;
        self.iteration += 1;
        if self.iteration <= 2 {
            for j in 0..n {
                self.low[j] = x[j] - s.asyinit;
                self.upp[j] = x[j] + s.asyinit;
            }
        } else {
            for j in 0..n {
                let trend = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let gamma = if trend < 0.0 {
                    s.asydecr
                } else if trend > 0.0 {
                    s.asyincr
                } else {
                    1.0
                };
                self.low[j] = (x[j] - gamma * (self.xold1[j] - self.low[j])).clamp(x[j] - 10.0, x[j] - 0.01);
                self.upp[j] = (x[j] + gamma * (self.upp[j] - self.xold1[j])).clamp(x[j] + 0.01, x[j] + 10.0);
            }
        }

        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for j in 0..n {
            alpha[j] = (self.low[j] + 0.1 * (x[j] - self.low[j])).max(x[j] - s.move_limit).max(0.0);
            beta[j] = (self.upp[j] - 0.1 * (self.upp[j] - x[j])).min(x[j] + s.move_limit).min(1.0);
        }

        let sub = Subproblem::new(x, df, g0, dg, &self.low, &self.upp, &alpha, &beta);
        let lambda = sub.solve_dual()?;
        let xnew = sub.primal(lambda);

        self.xold2 = std::mem::replace(&mut self.xold1, x.to_vec());
        Ok(xnew)
    }
}

/// Separable convex approximation around `x`:
/// `Σ p/(U−x) + q/(x−L)` for the objective and constraint alike.
struct Subproblem<'a> {
    x: &'a [f64],
    low: &'a [f64],
    upp: &'a [f64],
    alpha: &'a [f64],
    beta: &'a [f64],
    p0: Vec<f64>,
    q0: Vec<f64>,
    p1: Vec<f64>,
    q1: Vec<f64>,
    rhs: f64,
}

impl<'a> Subproblem<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        x: &'a [f64],
        df: &[f64],
        g0: f64,
        dg: &[f64],
        low: &'a [f64],
        upp: &'a [f64],
        alpha: &'a [f64],
        beta: &'a [f64],
    ) -> Self {
        let n = x.len();
        let (mut p0, mut q0, mut p1, mut q1) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut rhs = -g0;
        for j in 0..n {
            let ux = upp[j] - x[j];
            let xl = x[j] - low[j];
            p0[j] = ux * ux * df[j].max(0.0);
            q0[j] = xl * xl * (-df[j]).max(0.0);
            p1[j] = ux * ux * dg[j].max(0.0);
            q1[j] = xl * xl * (-dg[j]).max(0.0);
            rhs += p1[j] / ux + q1[j] / xl;
        }
        Self { x, low, upp, alpha, beta, p0, q0, p1, q1, rhs }
    }

    fn primal(&self, lambda: f64) -> Vec<f64> {
        (0..self.x.len())
            .map(|j| {
                let p = self.p0[j] + lambda * self.p1[j];
                let q = self.q0[j] + lambda * self.q1[j];
                let v = if p + q > 0.0 {
                    let (sp, sq) = (p.sqrt(), q.sqrt());
                    (sp * self.low[j] + sq * self.upp[j]) / (sp + sq)
                } else {
                    self.x[j]
                };
                v.clamp(self.alpha[j], self.beta[j])
            })
            .collect()
    }

    /// Approximate constraint value `g̃(x) = Σ p1/(U−x) + q1/(x−L) − rhs`.
    fn constraint(&self, x: &[f64]) -> f64 {
        let mut total = -self.rhs;
        for j in 0..x.len() {
            total += self.p1[j] / (self.upp[j] - x[j]) + self.q1[j] / (x[j] - self.low[j]);
        }
        total
    }

    /// Dual maximizer: the smallest `λ ≥ 0` at which the primal minimizer
    /// satisfies the approximate constraint (it is decreasing in λ).
    fn solve_dual(&self) -> Result<f64, SimpError> {
        if self.constraint(&self.primal(0.0)) <= 0.0 {
            return Ok(0.0);
        }
        let scale = {
            let f: f64 = self.p0.iter().chain(&self.q0).sum();
            let g: f64 = self.p1.iter().chain(&self.q1).sum();
            if g > 0.0 && f > 0.0 {
                f / g
            } else {
                1.0
            }
        };
        let mut hi = scale;
        let mut doublings = 0;
        while self.constraint(&self.primal(hi)) > 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 || !hi.is_finite() {
                let best = self.constraint(&self.primal(f64::MAX.sqrt()));
                return Err(SimpError::Infeasible { best: best + self.rhs, limit: self.rhs });
            }
        }
        let mut lo = 0.0;
        for _ in 0..DUAL_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.constraint(&self.primal(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}
