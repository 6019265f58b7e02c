//! Arithmetic in GF(p) and dense linear algebra over it.
//!
//! Vectors are plain `Vec<u32>` of residues; matrices are row-major. Every
//! matrix carries its [`PrimeField`], and binary operations check that the
//! moduli agree.

use std::fmt;

use crate::error::{Error, Result};

/// Largest prime accepted by [`PrimeField::new`].
pub const MAX_PRIME: u32 = 31;

/// The prime field GF(p) for an odd prime `p <= 31`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeField {
    p: u32,
}

fn is_prime(n: u32) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
}

impl PrimeField {
    pub fn new(p: u32) -> Result<Self> {
        if p == 2 || p > MAX_PRIME || !is_prime(p) {
            return Err(Error::UnsupportedPrime(p));
        }
        Ok(PrimeField { p })
    }

    #[inline]
    pub fn p(self) -> u32 {
        self.p
    }

    /// Canonical residue of an arbitrary integer.
    #[inline]
    pub fn reduce(self, x: i64) -> u32 {
        x.rem_euclid(self.p as i64) as u32
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        a * b % self.p
    }

    pub fn pow(self, a: u32, mut e: u64) -> u32 {
        let mut base = a % self.p;
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(self, a: u32) -> u32 {
        assert!(!a.is_multiple_of(self.p), "inverse of zero in GF({})", self.p);
        self.pow(a, (self.p - 2) as u64)
    }

    pub fn div(self, a: u32, b: u32) -> u32 {
        self.mul(a, self.inv(b))
    }

    pub fn scalar(self, x: i64) -> Scalar {
        Scalar {
            residue: self.reduce(x),
            modulus: self.p,
        }
    }
}

/// A residue together with its modulus.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    residue: u32,
    modulus: u32,
}

impl Scalar {
    pub fn residue(self) -> u32 {
        self.residue
    }

    pub fn modulus(self) -> u32 {
        self.modulus
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.residue)
    }
}

/// Dense row-major matrix over GF(p).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl Matrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Matrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from integer rows, reducing every entry mod p.
    pub fn from_rows(field: PrimeField, rows: &[Vec<i64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeError("ragged rows".into()));
        }
        let data = rows.iter().flatten().map(|&x| field.reduce(x)).collect();
        Ok(Matrix {
            field,
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose rows are the given residue vectors.
    pub fn from_vectors(field: PrimeField, cols: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeError(format!(
                    "row of length {} in a matrix with {} columns",
                    r.len(),
                    cols
                )));
            }
            data.extend(r.iter().map(|&x| x % field.p()));
        }
        Ok(Matrix {
            field,
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(field: PrimeField, rows: usize, columns: &[Vec<u32>]) -> Result<Self> {
        Ok(Self::from_vectors(field, rows, columns)?.transpose())
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v % self.field.p();
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<u32> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row_vectors(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    fn check_modulus(&self, other: &Matrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::ModulusMismatch(self.field.p(), other.field.p()));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_modulus(other)?;
        if self.cols != other.rows {
            return Err(Error::ShapeError(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let p = self.field.p() as u64;
        let mut out = Matrix::zeros(self.field, self.rows, other.cols);
        let mut acc = vec![0u64; other.cols];
        for i in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = 0);
            for k in 0..self.cols {
                let a = self.get(i, k) as u64;
                if a == 0 {
                    continue;
                }
                for (slot, &b) in acc.iter_mut().zip(other.row(k)) {
                    *slot += a * b as u64;
                }
            }
            for (j, a) in acc.iter().enumerate() {
                out.data[i * other.cols + j] = (a % p) as u32;
            }
        }
        Ok(out)
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[u32]) -> Vec<u32> {
        assert_eq!(v.len(), self.cols, "vector length does not match columns");
        let p = self.field.p() as u64;
        (0..self.rows)
            .map(|i| {
                let s: u64 = self
                    .row(i)
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a as u64 * b as u64)
                    .sum();
                (s % p) as u32
            })
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_modulus(other)?;
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeError("addition of differently shaped matrices".into()));
        }
        let f = self.field;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f.add(a, b))
            .collect();
        Ok(Matrix { data, ..*self })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.add(&other.scale(self.field.neg(1)))
    }

    pub fn scale(&self, c: u32) -> Matrix {
        let f = self.field;
        Matrix {
            data: self.data.iter().map(|&a| f.mul(a, c)).collect(),
            ..*self
        }
    }

    pub fn pow(&self, mut e: u64) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::ShapeError("power of a non-square matrix".into()));
        }
        let mut base = self.clone();
        let mut acc = Matrix::identity(self.field, self.rows);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Commutator `self * other - other * self`.
    pub fn commutator(&self, other: &Matrix) -> Result<Matrix> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Stacks matrices vertically.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeError("vstack of nothing".into()))?;
        let mut out = Matrix::zeros(first.field, 0, first.cols);
        for m in parts {
            first.check_modulus(m)?;
            if m.cols != first.cols {
                return Err(Error::ShapeError("vstack column mismatch".into()));
            }
            out.data.extend_from_slice(&m.data);
            out.rows += m.rows;
        }
        Ok(out)
    }

    /// Reduced row-echelon form together with its pivot columns.
    pub fn rref_with_pivots(&self) -> (Matrix, Vec<usize>) {
        let f = self.field;
        let mut m = self.clone();
        let cols = m.cols;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == m.rows {
                break;
            }
            let Some(pr) = (r..m.rows).find(|&i| m.data[i * cols + c] != 0) else {
                continue;
            };
            if pr != r {
                for j in 0..cols {
                    m.data.swap(pr * cols + j, r * cols + j);
                }
            }
            let inv = f.inv(m.data[r * cols + c]);
            for j in c..cols {
                m.data[r * cols + j] = f.mul(m.data[r * cols + j], inv);
            }
            let (before, rest) = m.data.split_at_mut(r * cols);
            let (prow, after) = rest.split_at_mut(cols);
            for other in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
                let factor = other[c];
                if factor == 0 {
                    continue;
                }
                let nf = f.neg(factor);
                for j in c..cols {
                    if prow[j] != 0 {
                        other[j] = f.add(other[j], f.mul(nf, prow[j]));
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref_with_pivots().1.len()
    }

    pub fn is_invertible(&self) -> bool {
        self.is_square() && self.rank() == self.rows
    }

    /// Right kernel `{ v : self * v = 0 }`.
    pub fn kernel(&self) -> Subspace {
        let (r, pivots) = self.rref_with_pivots();
        let f = self.field;
        let mut is_pivot = vec![false; self.cols];
        for &c in &pivots {
            is_pivot[c] = true;
        }
        let vectors: Vec<Vec<u32>> = (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = vec![0; self.cols];
                v[free] = 1;
                for (i, &pc) in pivots.iter().enumerate() {
                    v[pc] = f.neg(r.get(i, free));
                }
                v
            })
            .collect();
        Subspace::from_vectors(f, self.cols, &vectors).expect("kernel vectors have ambient length")
    }
}

/// Reduced row-echelon form and rank of `m`.
pub fn rref(m: &Matrix) -> (usize, Matrix) {
    let (r, pivots) = m.rref_with_pivots();
    (pivots.len(), r)
}

/// The `lambda`-eigenspace of a square matrix acting on column vectors.
pub fn eigenspace(m: &Matrix, lambda: Scalar) -> Result<Subspace> {
    if !m.is_square() {
        return Err(Error::ShapeError(format!(
            "eigenspace of a {}x{} matrix",
            m.rows, m.cols
        )));
    }
    if lambda.modulus() != m.field.p() {
        return Err(Error::ModulusMismatch(m.field.p(), lambda.modulus()));
    }
    let shifted = m.sub(&Matrix::identity(m.field, m.rows).scale(lambda.residue()))?;
    Ok(shifted.kernel())
}

/// A subspace of GF(p)^n stored by its reduced row-echelon basis.
///
/// Equal subspaces have equal representations.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace {
    basis: Matrix,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn zero(field: PrimeField, ambient_dim: usize) -> Self {
        Subspace {
            basis: Matrix::zeros(field, 0, ambient_dim),
            pivots: Vec::new(),
        }
    }

    pub fn full(field: PrimeField, ambient_dim: usize) -> Self {
        Subspace {
            basis: Matrix::identity(field, ambient_dim),
            pivots: (0..ambient_dim).collect(),
        }
    }

    pub fn from_vectors(field: PrimeField, ambient_dim: usize, vectors: &[Vec<u32>]) -> Result<Self> {
        Ok(Self::from_matrix(&Matrix::from_vectors(field, ambient_dim, vectors)?))
    }

    /// Row space of `m`.
    pub fn from_matrix(m: &Matrix) -> Self {
        let (r, pivots) = m.rref_with_pivots();
        let k = pivots.len();
        let basis = Matrix {
            field: r.field,
            rows: k,
            cols: r.cols,
            data: r.data[..k * r.cols].to_vec(),
        };
        Subspace { basis, pivots }
    }

    pub fn field(&self) -> PrimeField {
        self.basis.field
    }

    pub fn dim(&self) -> usize {
        self.basis.rows
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.cols
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn vectors(&self) -> Vec<Vec<u32>> {
        self.basis.row_vectors().map(<[u32]>::to_vec).collect()
    }

    /// Coordinates of `v` in the echelon basis, or `None` when `v` is outside.
    pub fn coordinates(&self, v: &[u32]) -> Option<Vec<u32>> {
        assert_eq!(v.len(), self.ambient_dim());
        let f = self.field();
        let coeffs: Vec<u32> = self.pivots.iter().map(|&c| v[c]).collect();
        let mut rest = v.to_vec();
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let nc = f.neg(c);
            for (slot, &b) in rest.iter_mut().zip(self.basis.row(i)) {
                if b != 0 {
                    *slot = f.add(*slot, f.mul(nc, b));
                }
            }
        }
        rest.iter().all(|&x| x == 0).then_some(coeffs)
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.coordinates(v).is_some()
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.basis.row_vectors().all(|v| self.contains(v))
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::ShapeError("sum of subspaces of different ambient spaces".into()));
        }
        Ok(Subspace::from_matrix(&Matrix::vstack(&[&self.basis, &other.basis])?))
    }

    /// `dim(self ∩ other)` by the dimension formula.
    pub fn intersection_dim(&self, other: &Subspace) -> Result<usize> {
        Ok(self.dim() + other.dim() - self.sum(other)?.dim())
    }

    /// Linear combination of the basis vectors with the given coefficients.
    pub fn combine(&self, coeffs: &[u32]) -> Vec<u32> {
        let f = self.field();
        let mut out = vec![0; self.ambient_dim()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (slot, &b) in out.iter_mut().zip(self.basis.row(i)) {
                *slot = f.add(*slot, f.mul(c, b));
            }
        }
        out
    }
}

/// Incrementally built echelon basis used for rank computations over many
/// candidate vectors.
#[derive(Clone, Debug)]
pub struct Echelon {
    field: PrimeField,
    ambient_dim: usize,
    rows: Vec<(usize, Vec<u32>)>,
}

impl Echelon {
    pub fn new(field: PrimeField, ambient_dim: usize) -> Self {
        Echelon {
            field,
            ambient_dim,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.ambient_dim
    }

    /// Reduces `v` in place against the stored rows; returns whether a
    /// nonzero remainder is left.
    pub fn reduce(&self, v: &mut [u32]) -> bool {
        let f = self.field;
        for (pivot, row) in &self.rows {
            let c = v[*pivot];
            if c == 0 {
                continue;
            }
            let nc = f.neg(c);
            for (slot, &b) in v.iter_mut().zip(row) {
                if b != 0 {
                    *slot = f.add(*slot, f.mul(nc, b));
                }
            }
        }
        v.iter().any(|&x| x != 0)
    }

    /// Adds `v` if it is independent of the stored rows.
    pub fn insert(&mut self, mut v: Vec<u32>) -> bool {
        assert_eq!(v.len(), self.ambient_dim);
        if !self.reduce(&mut v) {
            return false;
        }
        let pivot = v.iter().position(|&x| x != 0).expect("nonzero remainder");
        let inv = self.field.inv(v[pivot]);
        v.iter_mut().for_each(|x| *x = self.field.mul(*x, inv));
        self.rows.push((pivot, v));
        true
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        let mut w = v.to_vec();
        !self.reduce(&mut w)
    }

    pub fn to_subspace(&self) -> Subspace {
        let rows: Vec<Vec<u32>> = self.rows.iter().map(|(_, r)| r.clone()).collect();
        Subspace::from_vectors(self.field, self.ambient_dim, &rows).expect("rows have ambient length")
    }
}

/// Coordinates relative to a fixed list of independent vectors.
#[derive(Clone, Debug)]
pub struct Frame {
    vectors: Vec<Vec<u32>>,
    span: Subspace,
    change: Matrix,
}

impl Frame {
    /// Fails with `ShapeError` if the vectors are dependent or of the wrong length.
    pub fn new(field: PrimeField, ambient_dim: usize, vectors: &[Vec<u32>]) -> Result<Self> {
        let s = vectors.len();
        let mut rows = Vec::with_capacity(s);
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != ambient_dim {
                return Err(Error::ShapeError(format!("vector of length {} in dimension {ambient_dim}", v.len())));
            }
            let mut row = v.clone();
            row.extend((0..s).map(|j| u32::from(i == j)));
            rows.push(row);
        }
        let (r, pivots) = Matrix::from_vectors(field, ambient_dim + s, &rows)?.rref_with_pivots();
        if pivots.iter().any(|&c| c >= ambient_dim) || pivots.len() < s {
            return Err(Error::ShapeError("frame vectors are linearly dependent".into()));
        }
        let left: Vec<Vec<u32>> = (0..s).map(|i| r.row(i)[..ambient_dim].to_vec()).collect();
        let right: Vec<Vec<u32>> = (0..s).map(|i| r.row(i)[ambient_dim..].to_vec()).collect();
        Ok(Frame {
            vectors: vectors.to_vec(),
            span: Subspace::from_vectors(field, ambient_dim, &left)?,
            change: Matrix::from_vectors(field, s, &right)?,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<u32>] {
        &self.vectors
    }

    pub fn span(&self) -> &Subspace {
        &self.span
    }

    /// `c` with `v = Σ c_i vectors[i]`, or `None` outside the span.
    pub fn coordinates(&self, v: &[u32]) -> Option<Vec<u32>> {
        let c = self.span.coordinates(v)?;
        // rref rows = change * vectors, so v = (c * change) * vectors
        Some(self.change.transpose().mul_vec(&c))
    }
}
