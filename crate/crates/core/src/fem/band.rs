//! Banded Cholesky factorization for the coarsest multigrid level.

/// Lower-triangular band factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // Row i holds L[i][i - bw..=i], leftmost first.
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factorizes a symmetric positive definite matrix given through its lower
    /// band, where `lower(i, j)` for `i - bw <= j <= i` returns `A[i][j]`.
    /// Returns `None` on a non-positive pivot.
    pub fn factor(n: usize, bw: usize, lower: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = lower(i, j);
                for k in k0..j {
                    s -= data[at(i, k)] * data[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    data[at(i, i)] = s.sqrt();
                } else {
                    data[at(i, j)] = s / data[at(j, j)];
                }
            }
        }
        Some(Self { n, bw, data })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let w = self.bw + 1;
        let bw = self.bw;
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[at(i, k)] * b[k];
            }
            b[i] = s / self.data[at(i, i)];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(self.n) {
                s -= self.data[at(k, i)] * b[k];
            }
            b[i] = s / self.data[at(i, i)];
        }
    }
}
