//! Symmetric positive definite band matrices with Cholesky solves.

/// Lower band storage: `rows[i][d]` holds `A[i][i - d]` for `d <= bandwidth`.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, rows: vec![0.0; n * (bw + 1)] }
    }

    /// Adds `v` to `A[i][j]` (and its mirror). Requires `j <= i <= j + bw`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.rows[i * (self.bw + 1) + (i - j)] += v;
    }

    fn get(&self, i: usize, d: usize) -> f64 {
        self.rows[i * (self.bw + 1) + d]
    }

    /// In-place Cholesky `A = L L^T`. Returns `None` if `A` is not positive definite.
    pub fn cholesky(mut self) -> Option<BandCholesky> {
        let w = self.bw + 1;
        for i in 0..self.n {
            let j_lo = i.saturating_sub(self.bw);
            for j in j_lo..=i {
                let mut s = self.rows[i * w + (i - j)];
                let k_lo = j_lo.max(j.saturating_sub(self.bw));
                for k in k_lo..j {
                    s -= self.rows[i * w + (i - k)] * self.rows[j * w + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return None;
                    }
                    self.rows[i * w] = s.sqrt();
                } else {
                    self.rows[i * w + (i - j)] = s / self.rows[j * w];
                }
            }
        }
        Some(BandCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    l: BandMatrix,
}

impl BandCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.n;
        let bw = self.l.bw;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l.get(i, i - k) * b[k];
            }
            b[i] = s / self.l.get(i, 0);
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= self.l.get(k, k - i) * b[k];
            }
            b[i] = s / self.l.get(i, 0);
        }
    }
}

/// Fourth-difference stencil.
pub(crate) const D4: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

/// `D4 x`, length `n - 4`.
pub(crate) fn apply_d4(x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = x[r] - 4.0 * x[r + 1] + 6.0 * x[r + 2] - 4.0 * x[r + 3] + x[r + 4];
    }
}

/// `D4^T z`, length `z.len() + 4`.
pub(crate) fn apply_d4t(z: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (r, &zr) in z.iter().enumerate() {
        for (c, w) in D4.iter().enumerate() {
            out[r + c] += w * zr;
        }
    }
}

/// `a I + D4^T diag(weights) D4`; `weights` has length `n - 4`.
pub(crate) fn weighted_d4_gram(n: usize, a: f64, weights: &[f64]) -> BandMatrix {
    let mut m = BandMatrix::zeros(n, 4);
    for i in 0..n {
        m.add(i, i, a);
    }
    for (r, &b) in weights.iter().enumerate() {
        for (ci, wi) in D4.iter().enumerate() {
            for (cj, wj) in D4.iter().enumerate().take(ci + 1) {
                m.add(r + ci, r + cj, b * wi * wj);
            }
        }
    }
    m
}
