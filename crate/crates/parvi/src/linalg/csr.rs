/// Row-compressed sparse matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl Csr {
    /// Builds from per-row entry lists; entries within a row are merged by
    /// column and sorted.
    pub fn from_rows(n: usize, rows: impl IntoIterator<Item = Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                debug_assert!(c < n);
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        assert_eq!(indptr.len(), n + 1, "row count mismatch");
        Csr {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Csr::from_rows(n, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter()
                    .zip(vals)
                    .find(|(c, _)| **c == i)
                    .map(|(_, v)| *v)
                    .unwrap_or(0.0)
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for i in 0..self.n {
            for &c in self.row(i).0 {
                bw = bw.max(i.abs_diff(c));
            }
        }
        bw
    }

    /// Coordinate-format text dump (one `row col value` line per entry),
    /// for debugging.
    pub fn to_coo_string(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                out.push_str(&format!("{} {} {}\n", i, c, v));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_and_matvec() {
        let a = Csr::from_triplets(3, &[(0, 0, 1.0), (0, 0, 1.0), (1, 2, 2.0), (2, 1, -1.0)]);
        assert_eq!(a.nnz(), 3);
        let mut y = vec![0.0; 3];
        a.matvec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![2.0, 6.0, -2.0]);
        assert_eq!(a.bandwidth(), 1);
    }
}
