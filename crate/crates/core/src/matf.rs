//! Dense matrices over a [`Field`] and the structured matrix groups acting on
//! them (permutation and monomial matrices).
//!
//! Column convention, used everywhere in the crate: a permutation `P` is stored
//! as the map `sigma` with `(A*P)[i] = A[sigma(i)]`, i.e. column `i` of the
//! product reads column `sigma(i)` of `A`. A monomial matrix is `M = D*P` with
//! `D = diag(d_0, ..., d_{n-1})`, so `(A*M)[i] = d[sigma(i)] * A[sigma(i)]`.
//! All indices are 0-based in memory; file formats use 1-based indices.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::ff::{Elem, Field, FieldError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("matrices are over different fields")]
    FieldMismatch,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix does not have full row rank ({rank} < {rows})")]
    NotFullRank { rank: usize, rows: usize },
    #[error("not a permutation of 0..{0}")]
    NotBijection(usize),
    #[error("monomial diagonal entry {0} is zero")]
    ZeroDiagonal(usize),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, PartialEq, Eq)]
pub struct Mat {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} over {}", self.rows, self.cols, self.field)?;
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|e| e.to_string()).collect();
            writeln!(f, "  [{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Result of Gauss-Jordan elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rref {
    pub matrix: Mat,
    pub rank: usize,
    pub pivots: Vec<usize>,
}

/// Occurrence counts of the distinct column values of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnProfile {
    /// Sorted in decreasing order.
    pub counts: Vec<usize>,
}

impl ColumnProfile {
    /// Maximum multiplicity of any column (0 for a matrix without columns).
    pub fn max(&self) -> usize {
        self.counts.first().copied().unwrap_or(0)
    }
}

impl Mat {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Mat {
        Mat { field: field.clone(), rows, cols, data: vec![Elem::ZERO; rows * cols] }
    }

    pub fn identity(field: &Field, n: usize) -> Mat {
        let mut m = Mat::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, Elem::ONE);
        }
        m
    }

    /// From rows of encoded integers. All rows must have length `cols`.
    pub fn from_rows<R: AsRef<[u64]>>(field: &Field, rows: usize, cols: usize, values: &[R]) -> Result<Mat, MatError> {
        if values.len() != rows {
            return Err(MatError::DimMismatch(format!("expected {rows} rows, got {}", values.len())));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for row in values {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(MatError::DimMismatch(format!("expected {cols} columns, got {}", row.len())));
            }
            for &v in row {
                data.push(field.elem(v)?);
            }
        }
        Ok(Mat { field: field.clone(), rows, cols, data })
    }

    pub fn from_elems(field: &Field, rows: usize, cols: usize, data: Vec<Elem>) -> Mat {
        assert_eq!(data.len(), rows * cols);
        Mat { field: field.clone(), rows, cols, data }
    }

    /// Column vectors, each of length `rows`.
    pub fn from_columns(field: &Field, rows: usize, columns: &[Vec<Elem>]) -> Mat {
        let mut m = Mat::zeros(field, rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Elem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Elem> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Elem>> {
        (0..self.cols).map(|c| self.column(c)).collect()
    }

    /// Entries as encoded integers, row by row.
    pub fn to_values(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).iter().map(|e| e.value()).collect()).collect()
    }

    pub fn is_zero_column(&self, c: usize) -> bool {
        (0..self.rows).all(|r| self.get(r, c).is_zero())
    }

    /// Canonical byte encoding of a column: two little-endian bytes per entry.
    pub fn column_key(&self, c: usize) -> Vec<u8> {
        (0..self.rows).flat_map(|r| (self.get(r, c).value() as u16).to_le_bytes()).collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> Mat {
        let mut m = Mat::zeros(&self.field, self.rows, idx.len());
        for (j, &c) in idx.iter().enumerate() {
            for r in 0..self.rows {
                m.set(r, j, self.get(r, c));
            }
        }
        m
    }

    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Mat { field: self.field.clone(), rows: idx.len(), cols: self.cols, data }
    }

    /// Block `[r0, r1) x [c0, c1)`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Mat {
        let mut m = Mat::zeros(&self.field, r1 - r0, c1 - c0);
        for r in r0..r1 {
            for c in c0..c1 {
                m.set(r - r0, c - c0, self.get(r, c));
            }
        }
        m
    }

    fn check_field(&self, other: &Mat) -> Result<(), MatError> {
        if self.field == other.field {
            Ok(())
        } else {
            Err(MatError::FieldMismatch)
        }
    }

    pub fn hstack(&self, other: &Mat) -> Result<Mat, MatError> {
        self.check_field(other)?;
        if self.rows != other.rows {
            return Err(MatError::DimMismatch(format!("hstack of {} and {} rows", self.rows, other.rows)));
        }
        let mut m = Mat::zeros(&self.field, self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m.set(r, c, self.get(r, c));
            }
            for c in 0..other.cols {
                m.set(r, self.cols + c, other.get(r, c));
            }
        }
        Ok(m)
    }

    pub fn scale(&self, a: Elem) -> Mat {
        let f = &self.field;
        Mat { field: f.clone(), rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f.mul(a, x)).collect() }
    }

    pub fn mul(&self, other: &Mat) -> Result<Mat, MatError> {
        self.check_field(other)?;
        if self.cols != other.rows {
            return Err(MatError::DimMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = &self.field;
        let mut out = Mat::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for t in 0..self.cols {
                let a = self.get(i, t);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = f.add(out.get(i, j), f.mul(a, other.get(t, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// `A * M` by column relocation and scaling; never forms `M` densely.
    pub fn apply_mono(&self, m: &MonoMat) -> Result<Mat, MatError> {
        if m.len() != self.cols {
            return Err(MatError::DimMismatch(format!("{} columns, monomial of size {}", self.cols, m.len())));
        }
        let f = &self.field;
        let mut out = Mat::zeros(f, self.rows, self.cols);
        for i in 0..self.cols {
            let src = m.perm.sigma[i];
            let d = m.diag[src];
            for r in 0..self.rows {
                out.set(r, i, f.mul(d, self.get(r, src)));
            }
        }
        Ok(out)
    }

    pub fn apply_perm(&self, p: &PermMat) -> Result<Mat, MatError> {
        if p.len() != self.cols {
            return Err(MatError::DimMismatch(format!("{} columns, permutation of size {}", self.cols, p.len())));
        }
        Ok(self.select_columns(&p.sigma))
    }

    /// Reduced row echelon form. Pivot search scans columns left to right and,
    /// within a column, rows top to bottom.
    pub fn rref(&self) -> Rref {
        let f = &self.field;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pr) = (r..m.rows).find(|&i| !m.get(i, c).is_zero()) else {
                continue;
            };
            m.swap_rows(r, pr);
            let inv = f.inv(m.get(r, c)).expect("pivot is non-zero");
            for j in c..m.cols {
                let v = f.mul(inv, m.get(r, j));
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let factor = m.get(i, c);
                if factor.is_zero() {
                    continue;
                }
                for j in c..m.cols {
                    let v = f.sub(m.get(i, j), f.mul(factor, m.get(r, j)));
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        Rref { matrix: m, rank: r, pivots }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().rank
    }

    pub fn has_full_row_rank(&self) -> bool {
        self.rank() == self.rows
    }

    /// The non-zero rows of the RREF: a canonical basis of the row space.
    pub fn row_basis(&self) -> Mat {
        let r = self.rref();
        r.matrix.select_rows(&(0..r.rank).collect::<Vec<_>>())
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    pub fn inverse(&self) -> Result<Mat, MatError> {
        if self.rows != self.cols {
            return Err(MatError::NotSquare { rows: self.rows, cols: self.cols });
        }
        let n = self.rows;
        let aug = self.hstack(&Mat::identity(&self.field, n))?;
        let r = aug.rref();
        if r.pivots.iter().take(n).filter(|&&c| c < n).count() < n {
            return Err(MatError::Singular);
        }
        Ok(r.matrix.submatrix(0, n, n, 2 * n))
    }

    pub fn column_multiplicity_profile(&self) -> ColumnProfile {
        let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
        for c in 0..self.cols {
            *counts.entry(self.column_key(c)).or_default() += 1;
        }
        let mut counts: Vec<usize> = counts.into_values().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        ColumnProfile { counts }
    }

    /// Removes all-zero columns; returns the submatrix and the removed indices.
    pub fn strip_zero_columns(&self) -> (Mat, Vec<usize>) {
        let (removed, kept): (Vec<usize>, Vec<usize>) = (0..self.cols).partition(|&c| self.is_zero_column(c));
        (self.select_columns(&kept), removed)
    }
}

/// True iff the two matrices span the same row space.
pub fn rowspace_equal(a: &Mat, b: &Mat) -> Result<bool, MatError> {
    a.check_field(b)?;
    if a.cols != b.cols {
        return Err(MatError::DimMismatch(format!("{} vs {} columns", a.cols, b.cols)));
    }
    Ok(a.row_basis() == b.row_basis())
}

/// `S` with `S*A = B` for full-row-rank `k x n` matrices `A`, `B`; `None` when
/// their row spaces differ.
pub fn solve_change_of_basis(a: &Mat, b: &Mat) -> Result<Option<Mat>, MatError> {
    a.check_field(b)?;
    if a.shape() != b.shape() {
        return Err(MatError::DimMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let ra = a.rref();
    if ra.rank != a.rows {
        return Err(MatError::NotFullRank { rank: ra.rank, rows: a.rows });
    }
    let rb = b.rank();
    if rb != b.rows {
        return Err(MatError::NotFullRank { rank: rb, rows: b.rows });
    }
    let a_piv = a.select_columns(&ra.pivots);
    let b_piv = b.select_columns(&ra.pivots);
    let s = b_piv.mul(&a_piv.inverse()?)?;
    Ok((s.mul(a)? == *b).then_some(s))
}

/// Invertible `S` with `S*A = B` for matrices of any rank; `None` if none exists.
pub fn find_change_of_basis(a: &Mat, b: &Mat) -> Result<Option<Mat>, MatError> {
    a.check_field(b)?;
    if a.shape() != b.shape() {
        return Err(MatError::DimMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let ra = a.rref();
    if ra.rank != b.rank() {
        return Ok(None);
    }
    let x = extend_to_basis(&a.select_columns(&ra.pivots));
    let y = extend_to_basis(&b.select_columns(&ra.pivots));
    if !y.is_invertible() {
        return Ok(None);
    }
    let s = y.mul(&x.inverse()?)?;
    Ok((s.mul(a)? == *b).then_some(s))
}

/// Completes linearly independent columns to a square invertible matrix by
/// appending standard basis vectors.
fn extend_to_basis(cols: &Mat) -> Mat {
    let k = cols.rows;
    let f = cols.field.clone();
    let mut span = IncrementalSpan::new(&f, k);
    let mut out: Vec<Vec<Elem>> = Vec::with_capacity(k);
    for c in cols.columns() {
        span.insert(&c);
        out.push(c);
    }
    for i in 0..k {
        if out.len() == k {
            break;
        }
        let mut e = vec![Elem::ZERO; k];
        e[i] = Elem::ONE;
        if span.insert(&e) {
            out.push(e);
        }
    }
    Mat::from_columns(&f, k, &out)
}

/// A growing echelon basis supporting membership tests and undo by truncation.
#[derive(Debug, Clone)]
pub struct IncrementalSpan {
    field: Field,
    dim: usize,
    rows: Vec<(usize, Vec<Elem>)>,
}

impl IncrementalSpan {
    pub fn new(field: &Field, dim: usize) -> IncrementalSpan {
        IncrementalSpan { field: field.clone(), dim, rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn truncate(&mut self, rank: usize) {
        self.rows.truncate(rank);
    }

    /// Reduces `v` against the basis in place.
    pub fn reduce(&self, v: &mut [Elem]) {
        let f = &self.field;
        for (p, row) in &self.rows {
            let c = v[*p];
            if c.is_zero() {
                continue;
            }
            for (x, &y) in v.iter_mut().zip(row) {
                *x = f.sub(*x, f.mul(c, y));
            }
        }
    }

    pub fn contains(&self, v: &[Elem]) -> bool {
        let mut w = v.to_vec();
        self.reduce(&mut w);
        w.iter().all(|x| x.is_zero())
    }

    /// Adds `v`; returns whether the rank grew.
    pub fn insert(&mut self, v: &[Elem]) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let mut w = v.to_vec();
        self.reduce(&mut w);
        let Some(p) = w.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = self.field.inv(w[p]).expect("non-zero");
        for x in w.iter_mut() {
            *x = self.field.mul(inv, *x);
        }
        self.rows.push((p, w));
        true
    }
}

/// Permutation matrix in column-index form: `(A*P)[i] = A[sigma[i]]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PermMat {
    sigma: Vec<usize>,
}

impl PermMat {
    pub fn identity(n: usize) -> PermMat {
        PermMat { sigma: (0..n).collect() }
    }

    pub fn from_sigma(sigma: Vec<usize>) -> Result<PermMat, MatError> {
        let n = sigma.len();
        let mut seen = vec![false; n];
        for &s in &sigma {
            if s >= n || seen[s] {
                return Err(MatError::NotBijection(n));
            }
            seen[s] = true;
        }
        Ok(PermMat { sigma })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.sigma[i]
    }

    pub fn inverse(&self) -> PermMat {
        let mut inv = vec![0; self.sigma.len()];
        for (i, &s) in self.sigma.iter().enumerate() {
            inv[s] = i;
        }
        PermMat { sigma: inv }
    }

    /// `self * other` as matrices: `(A*P*Q)[i] = A[sigma_P(sigma_Q(i))]`.
    pub fn then(&self, other: &PermMat) -> PermMat {
        PermMat { sigma: other.sigma.iter().map(|&i| self.sigma[i]).collect() }
    }

    pub fn dense(&self, field: &Field) -> Mat {
        let n = self.sigma.len();
        let mut m = Mat::zeros(field, n, n);
        for (i, &s) in self.sigma.iter().enumerate() {
            m.set(s, i, Elem::ONE);
        }
        m
    }
}

/// Monomial matrix `M = D*P`, `diag[j]` scaling column `j` of the operand.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonoMat {
    perm: PermMat,
    diag: Vec<Elem>,
}

impl MonoMat {
    pub fn new(perm: PermMat, diag: Vec<Elem>) -> Result<MonoMat, MatError> {
        if diag.len() != perm.len() {
            return Err(MatError::DimMismatch(format!("diagonal of length {} for size {}", diag.len(), perm.len())));
        }
        if let Some(i) = diag.iter().position(|d| d.is_zero()) {
            return Err(MatError::ZeroDiagonal(i));
        }
        Ok(MonoMat { perm, diag })
    }

    pub fn identity(n: usize) -> MonoMat {
        MonoMat { perm: PermMat::identity(n), diag: vec![Elem::ONE; n] }
    }

    pub fn from_perm(perm: PermMat) -> MonoMat {
        let n = perm.len();
        MonoMat { perm, diag: vec![Elem::ONE; n] }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn perm(&self) -> &PermMat {
        &self.perm
    }

    pub fn diag(&self) -> &[Elem] {
        &self.diag
    }

    pub fn is_permutation(&self) -> bool {
        self.diag.iter().all(|&d| d == Elem::ONE)
    }

    pub fn is_signed(&self, field: &Field) -> bool {
        self.diag.iter().all(|&d| field.is_sign(d))
    }

    pub fn dense(&self, field: &Field) -> Mat {
        let n = self.len();
        let mut m = Mat::zeros(field, n, n);
        for (i, &s) in self.perm.sigma.iter().enumerate() {
            m.set(s, i, self.diag[s]);
        }
        m
    }
}
