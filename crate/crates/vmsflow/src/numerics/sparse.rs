//! Triplet accumulation and compressed sparse rows.
//!
//! Compression, products, and combinations are written so the result is
//! bit-identical whether or not the `parallel` feature is active: work is
//! split per row, and every per-row reduction runs in a fixed traversal
//! order.

use crate::exec::map_indexed;
use crate::numerics::dense::DenseMatrix;

/// Unordered triplet accumulator used during assembly.
///
/// Duplicate (row, col) entries are allowed and sum on compression, in
/// insertion order.
#[derive(Debug, Clone)]
pub struct Coo {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Coo { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        Coo { n_rows, n_cols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols, "entry ({row}, {col}) out of bounds");
        self.entries.push((row, col, value));
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn to_csr(&self) -> Csr {
        Csr::from_coo(self)
    }
}

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row and duplicates are merged, so the layout is canonical for
/// a given insertion sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Compresses a triplet list: stable counting sort by row, stable sort by
    /// column within each row, duplicates summed in insertion order.
    pub fn from_coo(coo: &Coo) -> Csr {
        let n_rows = coo.n_rows;
        // Stable scatter into per-row segments.
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in &coo.entries {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut scattered: Vec<(usize, f64)> = vec![(0, 0.0); coo.entries.len()];
        for &(r, c, v) in &coo.entries {
            scattered[cursor[r]] = (c, v);
            cursor[r] += 1;
        }
        // Per row: stable sort by column, then fold duplicates left to right.
        let rows: Vec<(Vec<usize>, Vec<f64>)> = map_indexed(n_rows, |r| {
            let mut seg: Vec<(usize, f64)> = scattered[counts[r]..counts[r + 1]].to_vec();
            seg.sort_by_key(|&(c, _)| c);
            let mut cols = Vec::with_capacity(seg.len());
            let mut vals: Vec<f64> = Vec::with_capacity(seg.len());
            for (c, v) in seg {
                if cols.last() == Some(&c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            (cols, vals)
        });
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        let nnz: usize = rows.iter().map(|(c, _)| c.len()).sum();
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (cols, vals) in rows {
            col_indices.extend_from_slice(&cols);
            values.extend_from_slice(&vals);
            row_offsets.push(col_indices.len());
        }
        Csr { n_rows, n_cols: coo.n_cols, row_offsets, col_indices, values }
    }

    pub fn identity(n: usize) -> Csr {
        Csr {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        map_indexed(self.n_rows, |r| {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c];
            }
            s
        })
    }

    /// xᵀ A y, reduced in row order.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_rows);
        assert_eq!(y.len(), self.n_cols);
        let terms = map_indexed(self.n_rows, |r| {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * y[c];
            }
            x[r] * s
        });
        terms.iter().sum()
    }

    /// Σ coeffᵢ·Aᵢ over matrices of identical dimensions. The result pattern
    /// is the union; terms accumulate per column in argument order.
    pub fn linear_combination(terms: &[(f64, &Csr)]) -> Csr {
        assert!(!terms.is_empty(), "linear combination of no terms");
        let (n_rows, n_cols) = (terms[0].1.n_rows, terms[0].1.n_cols);
        for &(_, m) in terms {
            assert!(
                m.n_rows == n_rows && m.n_cols == n_cols,
                "linear combination dimension mismatch"
            );
        }
        let rows: Vec<(Vec<usize>, Vec<f64>)> = map_indexed(n_rows, |r| {
            let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            for &(coeff, m) in terms {
                let (cols, vals) = m.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    *acc.entry(c).or_insert(0.0) += coeff * v;
                }
            }
            (acc.keys().copied().collect(), acc.values().copied().collect())
        });
        Csr::from_rows(n_rows, n_cols, rows)
    }

    pub fn scale(&self, s: f64) -> Csr {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.iter() {
            let k = cursor[c];
            col_indices[k] = r;
            values[k] = v;
            cursor[c] += 1;
        }
        Csr {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Sparse product self · other.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.n_cols, other.n_rows, "matmul dimension mismatch");
        let rows: Vec<(Vec<usize>, Vec<f64>)> = map_indexed(self.n_rows, |r| {
            let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
            let (cols, vals) = self.row(r);
            for (&k, &a_rk) in cols.iter().zip(vals) {
                let (bcols, bvals) = other.row(k);
                for (&c, &b_kc) in bcols.iter().zip(bvals) {
                    *acc.entry(c).or_insert(0.0) += a_rk * b_kc;
                }
            }
            (acc.keys().copied().collect(), acc.values().copied().collect())
        });
        Csr::from_rows(self.n_rows, other.n_cols, rows)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.iter() {
            d[(r, c)] = v;
        }
        d
    }

    fn from_rows(n_rows: usize, n_cols: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> Csr {
        let nnz: usize = rows.iter().map(|(c, _)| c.len()).sum();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for (cols, vals) in rows {
            col_indices.extend_from_slice(&cols);
            values.extend_from_slice(&vals);
            row_offsets.push(col_indices.len());
        }
        Csr { n_rows, n_cols, row_offsets, col_indices, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rng, unit};

    fn sample() -> Csr {
        // [[2, 1, 0], [0, 0, 3], [4, 0, 5]] assembled with duplicates, out of order.
        let mut coo = Coo::new(3, 3);
        coo.push(2, 2, 5.0);
        coo.push(0, 1, 1.0);
        coo.push(0, 0, 1.5);
        coo.push(1, 2, 3.0);
        coo.push(2, 0, 4.0);
        coo.push(0, 0, 0.5);
        coo.to_csr()
    }

    #[test]
    fn compression_sorts_and_merges() {
        let m = sample();
        assert_eq!(m.nnz(), 5);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 2), 3.0);
        assert_eq!(m.get(2, 0), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
        let (cols, _) = m.row(2);
        assert_eq!(cols, &[0, 2]);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = sample();
        let x = [1.0, 2.0, 3.0];
        let y = m.matvec(&x);
        assert_eq!(y, vec![4.0, 9.0, 19.0]);
    }

    #[test]
    fn quadratic_form_matches_hand_value() {
        let m = sample();
        let x = [1.0, 1.0, 1.0];
        let y = [1.0, 2.0, 3.0];
        // 1ᵀ(My) with My = [4, 9, 19].
        assert_eq!(m.quadratic_form(&x, &y), 32.0);
    }

    #[test]
    fn transpose_involution_is_exact() {
        let m = sample();
        let t = m.transpose().transpose();
        assert_eq!(m, t);
    }

    #[test]
    fn linear_combination_matches_dense_oracle() {
        let m = sample();
        let id = Csr::identity(3);
        let lc = Csr::linear_combination(&[(2.0, &m), (-3.0, &id)]);
        let d = lc.to_dense();
        let md = m.to_dense();
        for r in 0..3 {
            for c in 0..3 {
                let want = 2.0 * md[(r, c)] - 3.0 * if r == c { 1.0 } else { 0.0 };
                assert_eq!(d[(r, c)], want);
            }
        }
    }

    #[test]
    fn matmul_matches_dense_oracle() {
        let mut r = rng(7);
        let (n, m, p) = (13, 9, 11);
        let mut a = Coo::new(n, m);
        let mut b = Coo::new(m, p);
        for _ in 0..40 {
            use rand::Rng;
            a.push(r.random_range(0..n), r.random_range(0..m), unit(&mut r));
            b.push(r.random_range(0..m), r.random_range(0..p), unit(&mut r));
        }
        let (a, b) = (a.to_csr(), b.to_csr());
        let c = a.matmul(&b);
        let (ad, bd, cd) = (a.to_dense(), b.to_dense(), c.to_dense());
        for i in 0..n {
            for j in 0..p {
                let mut want = 0.0;
                for k in 0..m {
                    want += ad[(i, k)] * bd[(k, j)];
                }
                assert!((cd[(i, j)] - want).abs() < 1e-14, "({i}, {j})");
            }
        }
    }

    proptest::proptest! {
        /// Compression agrees with a dense scatter-add for arbitrary triplet
        /// streams, including duplicates, and yields strictly increasing
        /// column indices per row.
        #[test]
        fn compression_matches_dense_scatter(
            triplets in proptest::collection::vec((0usize..8, 0usize..6, -10.0f64..10.0), 0..60)
        ) {
            let mut coo = Coo::new(8, 6);
            let mut dense = [[0.0f64; 6]; 8];
            for &(r, c, v) in &triplets {
                coo.push(r, c, v);
                dense[r][c] += v;
            }
            let m = coo.to_csr();
            for r in 0..8 {
                let (cols, _) = m.row(r);
                proptest::prop_assert!(cols.windows(2).all(|w| w[0] < w[1]));
                for c in 0..6 {
                    // Same additions in the same order: exact equality.
                    proptest::prop_assert_eq!(m.get(r, c), dense[r][c]);
                }
            }
        }
    }
}
