use super::Csr;

/// In-place LU factorization of a banded matrix, no pivoting.
///
/// Storage is row-major with `2·bw + 1` slots per row; entry `(i, j)` lives
/// at `data[i·w + (j − i + bw)]`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedLu {
    /// Assembles and factors `A = I + lam·N + diag(extra)`.
    /// Returns `None` on a (near-)zero pivot.
    pub fn factor_shifted(
        n_mat: &Csr,
        bw: usize,
        lam: f64,
        extra_diag: Option<&[f64]>,
    ) -> Option<Self> {
        let n = n_mat.n();
        let w = 2 * bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            data[i * w + bw] = 1.0 + extra_diag.map_or(0.0, |d| d[i]);
            let (cols, vals) = n_mat.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                debug_assert!(c.abs_diff(i) <= bw, "entry outside band");
                data[i * w + (c + bw - i)] += lam * v;
            }
        }
        Self::factor(n, bw, data)
    }

    fn factor(n: usize, bw: usize, mut data: Vec<f64>) -> Option<Self> {
        let w = 2 * bw + 1;
        for k in 0..n {
            let pivot = data[k * w + bw];
            if pivot.abs() < 1e-300 {
                return None;
            }
            let i_max = (k + bw).min(n - 1);
            for i in k + 1..=i_max {
                // Column k in row i.
                let lik = data[i * w + (k + bw - i)] / pivot;
                data[i * w + (k + bw - i)] = lik;
                if lik != 0.0 {
                    let j_max = (k + bw).min(n - 1);
                    for j in k + 1..=j_max {
                        let ukj = data[k * w + (j + bw - k)];
                        if ukj != 0.0 {
                            data[i * w + (j + bw - i)] -= lik * ukj;
                        }
                    }
                }
            }
        }
        Some(BandedLu { n, bw, data })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, 2 * self.bw + 1);
        // Forward: L y = b (unit diagonal).
        for i in 0..n {
            let j_lo = i.saturating_sub(bw);
            let mut acc = b[i];
            for j in j_lo..i {
                acc -= self.data[i * w + (j + bw - i)] * b[j];
            }
            b[i] = acc;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let j_hi = (i + bw).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=j_hi {
                acc -= self.data[i * w + (j + bw - i)] * b[j];
            }
            b[i] = acc / self.data[i * w + bw];
        }
    }
}
