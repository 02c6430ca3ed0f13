//! Compressed sparse row operators with complex entries.

use std::io::{BufRead, Write};

use crate::dense::DenseMatrix;
use crate::error::{check_dims, QfelError, Result};
use crate::scalar::{re, Cx, Real};

/// Magnitude below which entries are dropped after coalescing.
pub const PRUNE_TOLERANCE: f64 = 1e-15;

/// Square sparse complex matrix in CSR layout.
///
/// Constructed from triplets; duplicate `(row, col)` pairs are summed and entries
/// with magnitude below [`PRUNE_TOLERANCE`] are removed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Cx<T>>,
}

impl<T: Real> SparseOp<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal((0..dim).map(|_| re(T::one())))
    }

    /// Diagonal matrix from the given values (zeros are pruned).
    pub fn diagonal(values: impl IntoIterator<Item = Cx<T>>) -> Self {
        let prune = T::lit(PRUNE_TOLERANCE);
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for (i, v) in values.into_iter().enumerate() {
            if v.norm() >= prune {
                cols.push(i);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { dim: row_ptr.len() - 1, row_ptr, cols, vals }
    }

    /// Builds from `(row, col, value)` triplets, coalescing duplicates and pruning.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Cx<T>)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, Cx<T>)> = triplets.into_iter().collect();
        for &(r, c, _) in &t {
            if r >= dim || c >= dim {
                return Err(QfelError::Domain(format!(
                    "entry ({r}, {c}) outside a {dim}x{dim} operator"
                )));
            }
        }
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let prune = T::lit(PRUNE_TOLERANCE);
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals = Vec::with_capacity(t.len());
        let mut i = 0;
        while i < t.len() {
            let (r, c, mut v) = t[i];
            i += 1;
            while i < t.len() && t[i].0 == r && t[i].1 == c {
                v += t[i].2;
                i += 1;
            }
            if v.norm() >= prune {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { dim, row_ptr, cols, vals })
    }

    fn from_rows(dim: usize, rows: Vec<Vec<(usize, Cx<T>)>>) -> Self {
        let prune = T::lit(PRUNE_TOLERANCE);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in rows {
            for (c, v) in row {
                if v.norm() >= prune {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }

    /// Iterates stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Cx<T>)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    /// Stored entries of one row as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Cx<T>)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Cx<T> {
        let span = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match span.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => Cx::new(T::zero(), T::zero()),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut counts = vec![0usize; self.dim + 1];
        for &c in &self.cols {
            counts[c + 1] += 1;
        }
        for i in 0..self.dim {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut cols = vec![0; self.nnz()];
        let mut vals = vec![Cx::new(T::zero(), T::zero()); self.nnz()];
        for (r, c, v) in self.entries() {
            let k = next[c];
            cols[k] = r;
            vals[k] = v.conj();
            next[c] += 1;
        }
        Self { dim: self.dim, row_ptr, cols, vals }
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        let rows = (0..self.dim).map(|r| self.row(r).map(|(c, v)| (c, v * s)).collect()).collect();
        Self::from_rows(self.dim, rows)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(re(s))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: Cx<T>) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let mut rows = Vec::with_capacity(self.dim);
        for r in 0..self.dim {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).map(|(c, v)| (c, v * s)).peekable();
            let mut out = Vec::new();
            loop {
                match (a.peek(), b.peek()) {
                    (Some(&(ca, va)), Some(&(cb, vb))) => {
                        if ca == cb {
                            out.push((ca, va + vb));
                            a.next();
                            b.next();
                        } else if ca < cb {
                            out.push((ca, va));
                            a.next();
                        } else {
                            out.push((cb, vb));
                            b.next();
                        }
                    }
                    (Some(&e), None) => {
                        out.push(e);
                        a.next();
                    }
                    (None, Some(&e)) => {
                        out.push(e);
                        b.next();
                    }
                    (None, None) => break,
                }
            }
            rows.push(out);
        }
        Ok(Self::from_rows(self.dim, rows))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, re(T::one()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(other, re(-T::one()))
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let zero = Cx::new(T::zero(), T::zero());
        let mut acc = vec![zero; n];
        let mut seen = vec![false; n];
        let mut touched = Vec::new();
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !seen[c] {
                        seen[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            let row: Vec<(usize, Cx<T>)> = touched.iter().map(|&c| (c, acc[c])).collect();
            for &c in &touched {
                acc[c] = zero;
                seen[c] = false;
            }
            touched.clear();
            rows.push(row);
        }
        Ok(Self::from_rows(n, rows))
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        let mut y = vec![Cx::new(T::zero(), T::zero()); self.dim];
        self.apply_add(x, re(T::one()), &mut y);
        y
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        let mut colsum = vec![T::zero(); self.dim];
        for (_, c, v) in self.entries() {
            colsum[c] += v.norm();
        }
        colsum.into_iter().fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.vals.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// `⟨x| self |x⟩`.
    pub fn expectation(&self, x: &[Cx<T>]) -> Cx<T> {
        let mut s = Cx::new(T::zero(), T::zero());
        for r in 0..self.dim {
            let mut row = Cx::new(T::zero(), T::zero());
            for (c, v) in self.row(r) {
                row += v * x[c];
            }
            s += x[r].conj() * row;
        }
        s
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.dim);
        for (r, c, v) in self.entries() {
            d[(r, c)] = v;
        }
        d
    }

    pub fn from_dense(d: &DenseMatrix<T>) -> Self {
        let n = d.dim();
        let rows = (0..n).map(|r| (0..n).map(|c| (c, d[(r, c)])).collect()).collect();
        Self::from_rows(n, rows)
    }

    /// Largest `|self[r,c] − other[r,c]|` over all rows `r` and the listed columns.
    pub fn max_diff_on_columns(&self, other: &Self, columns: &[usize]) -> Result<T> {
        check_dims(self.dim, other.dim)?;
        let diff = self.sub(other)?;
        let mut mask = vec![false; self.dim];
        for &c in columns {
            mask[c] = true;
        }
        Ok(diff.entries().filter(|&(_, c, _)| mask[c]).fold(T::zero(), |m, (_, _, v)| m.max(v.norm())))
    }

    /// Largest `|A[i,j] − conj(A[j,i])|` with both indices in `indices`.
    pub fn hermiticity_defect(&self, indices: &[usize]) -> T {
        let mut mask = vec![false; self.dim];
        for &i in indices {
            mask[i] = true;
        }
        let diff = self.sub(&self.adjoint()).expect("same dimension");
        diff.entries()
            .filter(|&(r, c, _)| mask[r] && mask[c])
            .fold(T::zero(), |m, (_, _, v)| m.max(v.norm()))
    }

    /// Writes the `dim nnz` / `row col re im` text dump.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.dim, self.nnz())?;
        for (r, c, v) in self.entries() {
            writeln!(w, "{} {} {:.17e} {:.17e}", r, c, v.re, v.im)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`SparseOp::write_text`].
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |m: String| QfelError::Parse(m);
        let header = lines
            .next()
            .ok_or_else(|| bad("empty operator dump".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let mut it = header.split_whitespace();
        let dim: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad header".into()))?;
        let nnz: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad header".into()))?;
        let mut trip = Vec::with_capacity(nnz);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", i + 2)));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 2)));
            let r: usize = f[0].parse().map_err(|_| bad(format!("line {}: bad row", i + 2)))?;
            let c: usize = f[1].parse().map_err(|_| bad(format!("line {}: bad col", i + 2)))?;
            trip.push((r, c, Cx::new(T::lit(p(f[2])?), T::lit(p(f[3])?))));
        }
        if trip.len() != nnz {
            return Err(bad(format!("header announces {nnz} entries, found {}", trip.len())));
        }
        Self::from_triplets(dim, trip)
    }
}

/// `AB − BA`.
pub fn commutator<T: Real>(a: &SparseOp<T>, b: &SparseOp<T>) -> Result<SparseOp<T>> {
    let ab = a.matmul(b)?;
    let ba = b.matmul(a)?;
    ab.sub(&ba)
}

/// Anything that can accumulate `y += coef * A x`.
pub trait LinearOperator<T: Real> {
    fn dim(&self) -> usize;
    fn apply_add(&self, x: &[Cx<T>], coef: Cx<T>, y: &mut [Cx<T>]);
    /// Upper bound on the induced 1-norm.
    fn norm1_bound(&self) -> T;
}

impl<T: Real> LinearOperator<T> for SparseOp<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_add(&self, x: &[Cx<T>], coef: Cx<T>, y: &mut [Cx<T>]) {
        for r in 0..self.dim {
            let mut s = Cx::new(T::zero(), T::zero());
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] += coef * s;
        }
    }

    fn norm1_bound(&self) -> T {
        self.norm1()
    }
}

/// Lazy `Σ c_k A_k`, applied term by term.
#[derive(Clone, Debug)]
pub struct LinearCombination<'a, T> {
    dim: usize,
    terms: Vec<(Cx<T>, &'a SparseOp<T>)>,
}

impl<'a, T: Real> LinearCombination<'a, T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn push(&mut self, coef: Cx<T>, op: &'a SparseOp<T>) -> Result<()> {
        check_dims(self.dim, op.dim())?;
        if !op.is_zero() && coef.norm() > T::zero() {
            self.terms.push((coef, op));
        }
        Ok(())
    }

    pub fn terms(&self) -> &[(Cx<T>, &'a SparseOp<T>)] {
        &self.terms
    }

    /// Assembles the combination into one sparse matrix.
    pub fn assemble(&self) -> SparseOp<T> {
        let mut out = SparseOp::zeros(self.dim);
        for &(c, op) in &self.terms {
            out = out.add_scaled(op, c).expect("dimensions checked on push");
        }
        out
    }
}

impl<T: Real> LinearOperator<T> for LinearCombination<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_add(&self, x: &[Cx<T>], coef: Cx<T>, y: &mut [Cx<T>]) {
        for &(c, op) in &self.terms {
            op.apply_add(x, coef * c, y);
        }
    }

    fn norm1_bound(&self) -> T {
        self.terms.iter().map(|(c, op)| c.norm() * op.norm1()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn sample() -> SparseOp<f64> {
        SparseOp::from_triplets(
            3,
            vec![(0, 1, cx(1.0, 2.0)), (2, 0, cx(-0.5, 0.0)), (0, 1, cx(1.0, 0.0)), (1, 1, cx(0.0, 3.0))],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 1), cx(2.0, 2.0));
    }

    #[test]
    fn tiny_entries_pruned() {
        let a = SparseOp::<f64>::from_triplets(2, vec![(0, 0, cx(1e-16, 0.0)), (1, 1, cx(1.0, 0.0))]).unwrap();
        assert_eq!(a.nnz(), 1);
        let b = SparseOp::<f64>::from_triplets(2, vec![(0, 0, cx(1.0, 0.0)), (0, 0, cx(-1.0, 0.0))]).unwrap();
        assert!(b.is_zero());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(SparseOp::<f64>::from_triplets(2, vec![(2, 0, cx(1.0, 0.0))]).is_err());
    }

    #[test]
    fn adjoint_swaps_and_conjugates() {
        let a = sample();
        let h = a.adjoint();
        for (r, c, v) in a.entries() {
            assert_eq!(h.get(c, r), v.conj());
        }
        assert_eq!(h.nnz(), a.nnz());
        assert_eq!(h.adjoint(), a);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let b = a.adjoint().add(&SparseOp::identity(3)).unwrap();
        let p = a.matmul(&b).unwrap().to_dense();
        let q = a.to_dense().matmul(&b.to_dense());
        assert!(p.sub(&q).max_abs() < 1e-14);
    }

    #[test]
    fn commutator_dimension_mismatch() {
        let a = SparseOp::<f64>::identity(2);
        let b = SparseOp::<f64>::identity(3);
        assert!(matches!(commutator(&a, &b), Err(QfelError::DimensionMismatch { .. })));
    }

    #[test]
    fn text_round_trip() {
        let a = sample();
        let mut buf = Vec::new();
        a.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3 3\n"));
        let b = SparseOp::<f64>::read_text(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn combination_matches_assembled() {
        let a = sample();
        let b = a.adjoint();
        let mut lc = LinearCombination::new(3);
        lc.push(cx(0.5, 0.25), &a).unwrap();
        lc.push(cx(-1.0, 0.0), &b).unwrap();
        let x = vec![cx(1.0, 0.0), cx(0.0, -1.0), cx(2.0, 0.5)];
        let mut y = vec![cx(0.0, 0.0); 3];
        lc.apply_add(&x, cx(1.0, 0.0), &mut y);
        let z = lc.assemble().matvec(&x);
        for (u, v) in y.iter().zip(&z) {
            assert!((u - v).norm() < 1e-14);
        }
    }
}
