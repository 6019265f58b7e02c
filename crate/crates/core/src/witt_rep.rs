//! Restricted modules over the Witt algebra W(1) = span{x^i ∂ : i ∈ I}.
//!
//! A module is stored by the p matrices of `x^i ∂`, i = 0..p-1, acting on
//! column vectors. `h = x∂` is the Cartan element; weights are its
//! eigenvalues.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::cartan::{CartanAlgebra, Embedding};
use crate::error::{Error, Result};
use crate::ffla::{Echelon, Frame, Matrix, PrimeField, Subspace};
use crate::graded::{GradedSpan, Torus};
use crate::witt::Deriv;

/// Largest prime for which the brute-force composition oracle runs.
pub const ORACLE_MAX_PRIME: u32 = 7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WOneModule {
    field: PrimeField,
    dim: usize,
    action: Vec<Matrix>,
}

impl WOneModule {
    /// Checks shapes, the bracket relations and restrictedness.
    pub fn new(field: PrimeField, dim: usize, action: Vec<Matrix>) -> Result<Self> {
        let m = WOneModule { field, dim, action };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let p = self.field.p();
        if self.action.len() != p as usize {
            return Err(Error::ShapeError(format!("expected {p} action matrices, got {}", self.action.len())));
        }
        for a in &self.action {
            if a.field() != self.field {
                return Err(Error::ModulusMismatch(p, a.field().p()));
            }
            if a.rows() != self.dim || a.cols() != self.dim {
                return Err(Error::ShapeError(format!(
                    "{}x{} action matrix on a module of dimension {}",
                    a.rows(),
                    a.cols(),
                    self.dim
                )));
            }
        }
        let zero = Matrix::zeros(self.field, self.dim, self.dim);
        for a in 0..p {
            for b in a + 1..p {
                let lhs = self.action(a).commutator(self.action(b))?;
                let rhs = if a + b <= p {
                    self.action(a + b - 1).scale(self.field.reduce(b as i64 - a as i64))
                } else {
                    zero.clone()
                };
                if lhs != rhs {
                    return Err(Error::ArgumentError(format!(
                        "[x^{a}*d, x^{b}*d] is not represented correctly"
                    )));
                }
            }
            let expect = if a == 1 { self.action(1).clone() } else { zero.clone() };
            if self.action(a).pow(p as u64)? != expect {
                return Err(Error::ArgumentError(format!("x^{a}*d violates the restricted condition")));
            }
        }
        Ok(())
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Matrix of `x^i ∂`.
    pub fn action(&self, i: u32) -> &Matrix {
        &self.action[i as usize]
    }

    pub fn actions(&self) -> &[Matrix] {
        &self.action
    }

    pub fn h(&self) -> &Matrix {
        self.action(1)
    }

    /// Multiplicity of each weight λ ∈ I.
    pub fn weights(&self) -> Vec<usize> {
        let f = self.field;
        (0..f.p())
            .map(|l| crate::ffla::eigenspace(self.h(), f.scalar(l as i64)).expect("square").dim())
            .collect()
    }

    pub fn direct_sum(parts: &[WOneModule]) -> Result<WOneModule> {
        let Some(first) = parts.first() else {
            return Err(Error::ArgumentError("direct sum of no modules".into()));
        };
        let field = first.field;
        let dim: usize = parts.iter().map(|m| m.dim).sum();
        let mut action = vec![Matrix::zeros(field, dim, dim); field.p() as usize];
        let mut off = 0;
        for m in parts {
            if m.field != field {
                return Err(Error::ModulusMismatch(field.p(), m.p()));
            }
            for (big, small) in action.iter_mut().zip(&m.action) {
                for r in 0..m.dim {
                    for c in 0..m.dim {
                        big.set(off + r, off + c, small.get(r, c));
                    }
                }
            }
            off += m.dim;
        }
        WOneModule::new(field, dim, action)
    }

    /// The submodule on `s`, in the basis of `s`.
    pub fn restrict(&self, s: &Subspace) -> Result<WOneModule> {
        if s.ambient_dim() != self.dim {
            return Err(Error::ShapeError(format!("subspace of GF(p)^{} in a module of dimension {}", s.ambient_dim(), self.dim)));
        }
        let basis = s.vectors();
        let mut action = Vec::with_capacity(self.action.len());
        for (i, a) in self.action.iter().enumerate() {
            let mut cols = Vec::with_capacity(basis.len());
            for (j, v) in basis.iter().enumerate() {
                let c = s
                    .coordinates(&a.mul_vec(v))
                    .ok_or(Error::NotInvariant { generator: i, vector: j })?;
                cols.push(c);
            }
            action.push(Matrix::from_columns(self.field, basis.len(), &cols)?);
        }
        WOneModule::new(self.field, basis.len(), action)
    }

    /// The subquotient `big / small` for submodules `small ⊆ big`.
    pub fn subquotient(&self, big: &Subspace, small: &Subspace) -> Result<WOneModule> {
        let mut ech = Echelon::new(self.field, self.dim);
        let mut frame_vecs = small.vectors();
        for v in &frame_vecs {
            ech.insert(v.clone());
        }
        let skip = frame_vecs.len();
        for v in big.vectors() {
            if ech.insert(v.clone()) {
                frame_vecs.push(v);
            }
        }
        let frame = Frame::new(self.field, self.dim, &frame_vecs)?;
        let q = frame_vecs.len() - skip;
        let mut action = Vec::with_capacity(self.action.len());
        for (i, a) in self.action.iter().enumerate() {
            let mut cols = Vec::with_capacity(q);
            for (j, v) in frame_vecs[skip..].iter().enumerate() {
                let c = frame
                    .coordinates(&a.mul_vec(v))
                    .ok_or(Error::NotInvariant { generator: i, vector: j })?;
                cols.push(c[skip..].to_vec());
            }
            action.push(Matrix::from_columns(self.field, q, &cols)?);
        }
        WOneModule::new(self.field, q, action)
    }
}

fn check_lambda(lambda: u32, p: u32) -> Result<PrimeField> {
    let field = PrimeField::new(p)?;
    if lambda >= p {
        return Err(Error::ArgumentError(format!("weight {lambda} outside 0..{p}")));
    }
    Ok(field)
}

/// The restricted baby Verma module V(λ) on `m_k = y^k ⊗ 1`, `y = ∂`.
pub fn baby_verma(lambda: u32, p: u32) -> Result<WOneModule> {
    let field = check_lambda(lambda, p)?;
    let d = p as usize;
    // cols[i][k] = x^i∂ · m_k
    let mut cols = vec![vec![vec![0u32; d]; d]; d];
    for k in 0..d {
        if k + 1 < d {
            cols[0][k][k + 1] = 1;
        }
    }
    cols[1][0][0] = lambda;
    for k in 0..d - 1 {
        for i in 1..d {
            // e_i m_{k+1} = y (e_i m_k) - i e_{i-1} m_k
            let prev = cols[i][k].clone();
            let lower = cols[i - 1][k].clone();
            let mut next = vec![0u32; d];
            next[1..].copy_from_slice(&prev[..d - 1]);
            let ni = field.reduce(-(i as i64));
            for j in 0..d {
                next[j] = field.add(next[j], field.mul(ni, lower[j]));
            }
            cols[i][k + 1] = next;
        }
    }
    let action = cols
        .iter()
        .map(|c| Matrix::from_columns(field, d, c))
        .collect::<Result<Vec<_>>>()?;
    WOneModule::new(field, d, action)
}

/// The natural module A(1) on `1, x, …, x^{p-1}`.
pub fn natural_module(p: u32) -> Result<WOneModule> {
    let field = PrimeField::new(p)?;
    monomial_module(field, 0)
}

/// `A(1)` modulo constants when `low = 1`, on `x^low, …, x^{p-1}`.
fn monomial_module(field: PrimeField, low: u32) -> Result<WOneModule> {
    let p = field.p();
    let d = (p - low) as usize;
    let action = (0..p)
        .map(|i| {
            let mut m = Matrix::zeros(field, d, d);
            for k in low..p {
                let target = k + i;
                if k > 0 && target >= 1 && target > low && target - 1 < p {
                    m.set((target - 1 - low) as usize, (k - low) as usize, k % p);
                }
            }
            m
        })
        .collect();
    WOneModule::new(field, d, action)
}

/// The adjoint module W(1) on `x^j ∂`.
pub fn adjoint_w1(p: u32) -> Result<WOneModule> {
    let field = PrimeField::new(p)?;
    let d = p as usize;
    let action = (0..p)
        .map(|i| {
            let mut m = Matrix::zeros(field, d, d);
            for j in 0..p {
                if i + j >= 1 && i + j - 1 < p {
                    m.set((i + j - 1) as usize, j as usize, field.reduce(j as i64 - i as i64));
                }
            }
            m
        })
        .collect();
    WOneModule::new(field, d, action)
}

/// The simple module L(λ): trivial for λ = 0, `A(1)/constants` for
/// λ = p-1, and V(λ) otherwise.
pub fn simple(lambda: u32, p: u32) -> Result<WOneModule> {
    let field = check_lambda(lambda, p)?;
    if lambda == 0 {
        WOneModule::new(field, 1, vec![Matrix::zeros(field, 1, 1); p as usize])
    } else if lambda == p - 1 {
        monomial_module(field, 1)
    } else {
        baby_verma(lambda, p)
    }
}

fn w_module_from_columns(field: PrimeField, dim: usize, columns: Vec<Vec<Vec<u32>>>) -> Result<WOneModule> {
    let action = columns
        .iter()
        .map(|c| Matrix::from_columns(field, dim, c))
        .collect::<Result<Vec<_>>>()?;
    WOneModule::new(field, dim, action)
}

/// `ad Θ(x^i ∂)` on the subspace `span` of the algebra's coordinate space.
pub fn submodule_action(alg: &CartanAlgebra, emb: &Embedding, span: &Subspace) -> Result<WOneModule> {
    if span.ambient_dim() != alg.dim() {
        return Err(Error::ShapeError(format!(
            "subspace of GF(p)^{} in an algebra of dimension {}",
            span.ambient_dim(),
            alg.dim()
        )));
    }
    let elems = span
        .vectors()
        .iter()
        .map(|v| alg.element(v))
        .collect::<Result<Vec<_>>>()?;
    let mut columns = Vec::with_capacity(alg.p() as usize);
    for (i, th) in emb.images().iter().enumerate() {
        let mut cols = Vec::with_capacity(elems.len());
        for (j, e) in elems.iter().enumerate() {
            let c = alg
                .coordinates(&th.bracket_unchecked(e))
                .and_then(|x| span.coordinates(&x))
                .ok_or(Error::NotInvariant { generator: i, vector: j })?;
            cols.push(c);
        }
        columns.push(cols);
    }
    w_module_from_columns(alg.field(), elems.len(), columns)
}

/// `ad Θ(x^i ∂)` on the span of homogeneous, independent elements, in
/// the basis `elems`.
pub fn block_action(emb: &Embedding, torus: &Torus, elems: &[Deriv]) -> Result<WOneModule> {
    let field = emb.images()[0].field();
    let mut span = GradedSpan::new(torus.clone(), field);
    for (k, e) in elems.iter().enumerate() {
        if span.insert(e)? != Some(k) {
            return Err(Error::ArgumentError(format!("block element {k} ({e}) is dependent on earlier ones")));
        }
    }
    let mut columns = Vec::with_capacity(field.p() as usize);
    for (i, th) in emb.images().iter().enumerate() {
        let mut cols = Vec::with_capacity(elems.len());
        for (j, e) in elems.iter().enumerate() {
            let c = span
                .coordinates(&th.bracket_unchecked(e))
                .ok_or(Error::NotInvariant { generator: i, vector: j })?;
            cols.push(c);
        }
        columns.push(cols);
    }
    w_module_from_columns(field, elems.len(), columns)
}

/// The whole algebra as a W(1)-module through `emb`.
pub fn adjoint_module(alg: &CartanAlgebra, emb: &Embedding) -> Result<WOneModule> {
    submodule_action(alg, emb, &Subspace::full(alg.field(), alg.dim()))
}

/// Bases of the spaces of maximal vectors (h-eigenvectors killed by all
/// `x^i ∂`, i ≥ 2), listed by weight.
pub fn maximal_vectors(m: &WOneModule) -> Vec<(u32, Vec<u32>)> {
    let (f, d) = (m.field, m.dim);
    if d == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for l in 0..f.p() {
        let shifted = m.h().sub(&Matrix::identity(f, d).scale(l)).expect("same shape");
        let mut parts: Vec<&Matrix> = vec![&shifted];
        parts.extend(m.action.iter().skip(2));
        let stacked = Matrix::vstack(&parts).expect("same width");
        for v in stacked.kernel().vectors() {
            out.push((l, v));
        }
    }
    out
}

/// The submodule generated by `v`.
pub fn spin(m: &WOneModule, v: &[u32]) -> Subspace {
    let mut ech = Echelon::new(m.field, m.dim);
    let mut queue = Vec::new();
    if ech.insert(v.to_vec()) {
        queue.push(v.to_vec());
    }
    while let Some(w) = queue.pop() {
        for a in &m.action {
            let u = a.mul_vec(&w);
            if ech.insert(u.clone()) {
                queue.push(u);
            }
        }
    }
    ech.to_subspace()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IsoKind {
    Verma,
    Simple,
}

/// V(λ) or L(λ).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IsoType {
    pub kind: IsoKind,
    pub lambda: u32,
}

impl IsoType {
    pub fn verma(lambda: u32) -> Self {
        IsoType {
            kind: IsoKind::Verma,
            lambda,
        }
    }

    pub fn simple(lambda: u32) -> Self {
        IsoType {
            kind: IsoKind::Simple,
            lambda,
        }
    }

    pub fn is_simple(self, p: u32) -> bool {
        self.kind == IsoKind::Simple || (self.lambda > 0 && self.lambda < p - 1)
    }

    /// Writes V(λ) as L(λ) when the two coincide.
    pub fn canonical(self, p: u32) -> Self {
        if self.is_simple(p) {
            IsoType::simple(self.lambda)
        } else {
            self
        }
    }

    pub fn dim(self, p: u32) -> usize {
        match (self.kind, self.lambda) {
            (IsoKind::Simple, 0) => 1,
            (IsoKind::Simple, l) if l == p - 1 => p as usize - 1,
            _ => p as usize,
        }
    }

    /// Composition factors.
    pub fn factors(self, p: u32) -> CompositionMultiset {
        let mut c = CompositionMultiset::new(p);
        match self.kind {
            IsoKind::Verma if self.lambda == 0 || self.lambda == p - 1 => {
                c.add(0, 1);
                c.add(p - 1, 1);
            }
            _ => c.add(self.lambda, 1),
        }
        c
    }

    pub fn reference(self, p: u32) -> Result<WOneModule> {
        match self.kind {
            IsoKind::Verma => baby_verma(self.lambda, p),
            IsoKind::Simple => simple(self.lambda, p),
        }
    }
}

impl fmt::Display for IsoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            IsoKind::Verma => write!(f, "V({})", self.lambda),
            IsoKind::Simple => write!(f, "L({})", self.lambda),
        }
    }
}

impl Serialize for IsoType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Multiplicities of the simple modules L(λ), λ ∈ I.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompositionMultiset {
    mult: Vec<usize>,
}

impl CompositionMultiset {
    pub fn new(p: u32) -> Self {
        CompositionMultiset {
            mult: vec![0; p as usize],
        }
    }

    pub fn from_counts(counts: Vec<usize>) -> Self {
        CompositionMultiset { mult: counts }
    }

    pub fn p(&self) -> u32 {
        self.mult.len() as u32
    }

    pub fn get(&self, lambda: u32) -> usize {
        self.mult[lambda as usize]
    }

    pub fn counts(&self) -> &[usize] {
        &self.mult
    }

    pub fn add(&mut self, lambda: u32, k: usize) {
        self.mult[lambda as usize] += k;
    }

    pub fn merge(&mut self, other: &CompositionMultiset) {
        for (a, b) in self.mult.iter_mut().zip(&other.mult) {
            *a += b;
        }
    }

    pub fn scaled(&self, k: usize) -> CompositionMultiset {
        CompositionMultiset {
            mult: self.mult.iter().map(|m| m * k).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mult.iter().all(|&m| m == 0)
    }

    /// Σ mult(λ)·dim L(λ).
    pub fn total_dim(&self) -> usize {
        let p = self.p();
        (0..p).map(|l| self.get(l) * IsoType::simple(l).dim(p)).sum()
    }
}

impl fmt::Display for CompositionMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .mult
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(l, &m)| if m == 1 { format!("L({l})") } else { format!("{m}*L({l})") })
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

impl Serialize for CompositionMultiset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.mult.len()))?;
        for (l, m) in self.mult.iter().enumerate() {
            map.serialize_entry(&l.to_string(), m)?;
        }
        map.end()
    }
}

/// Multiplicities of isomorphism types, ordered V(0), V(1), …, L(0), L(1), ….
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IsoCounts(BTreeMap<IsoType, usize>);

impl IsoCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, iso: IsoType, k: usize) {
        if k > 0 {
            *self.0.entry(iso).or_insert(0) += k;
        }
    }

    pub fn get(&self, iso: IsoType) -> usize {
        self.0.get(&iso).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (IsoType, usize)> + '_ {
        self.0.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn merge(&mut self, other: &IsoCounts) {
        for (k, v) in other.iter() {
            self.add(k, v);
        }
    }

    pub fn total_dim(&self, p: u32) -> usize {
        self.iter().map(|(t, k)| t.dim(p) * k).sum()
    }

    pub fn multiset(&self, p: u32) -> CompositionMultiset {
        let mut c = CompositionMultiset::new(p);
        for (t, k) in self.iter() {
            c.merge(&t.factors(p).scaled(k));
        }
        c
    }
}

impl FromIterator<IsoType> for IsoCounts {
    fn from_iter<T: IntoIterator<Item = IsoType>>(iter: T) -> Self {
        let mut c = IsoCounts::new();
        for t in iter {
            c.add(t, 1);
        }
        c
    }
}

impl fmt::Display for IsoCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .iter()
            .map(|(t, k)| if k == 1 { t.to_string() } else { format!("{t}^{k}") })
            .collect();
        f.write_str(&parts.join(" (+) "))
    }
}

impl Serialize for IsoCounts {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (t, k) in self.iter() {
            map.serialize_entry(&t.to_string(), &k)?;
        }
        map.end()
    }
}

/// Generators of W(1) as a Lie algebra.
fn lie_generators(p: u32) -> [u32; 2] {
    if p == 3 {
        [0, 2]
    } else {
        [0, 3]
    }
}

/// An invertible `T` with `T·a(x) = b(x)·T` for all x ∈ W(1), if any.
pub fn iso_intertwiner(a: &WOneModule, b: &WOneModule) -> Option<Matrix> {
    if a.dim != b.dim || a.field != b.field {
        return None;
    }
    let (f, d) = (a.field, a.dim);
    if d == 0 {
        return Some(Matrix::zeros(f, 0, 0));
    }
    // unknown t_{rs} at index r*d + s
    let mut rows = Vec::new();
    for g in lie_generators(f.p()) {
        let (ma, mb) = (a.action(g), b.action(g));
        for r in 0..d {
            for s in 0..d {
                let mut row = vec![0u32; d * d];
                for k in 0..d {
                    let x = ma.get(k, s);
                    if x != 0 {
                        row[r * d + k] = f.add(row[r * d + k], x);
                    }
                    let y = mb.get(r, k);
                    if y != 0 {
                        row[k * d + s] = f.sub(row[k * d + s], y);
                    }
                }
                rows.push(row);
            }
        }
    }
    let system = Matrix::from_vectors(f, d * d, &rows).expect("rows of length d^2");
    let sols = system.kernel().vectors();
    if sols.is_empty() {
        return None;
    }
    let as_matrix = |v: &[u32]| Matrix::from_vectors(f, d, &v.chunks(d).map(<[u32]>::to_vec).collect::<Vec<_>>()).expect("d x d");
    let works = |t: &Matrix| {
        t.is_invertible()
            && a.action.iter().zip(&b.action).all(|(x, y)| t.mul(x).ok() == y.mul(t).ok())
    };
    for v in &sols {
        let t = as_matrix(v);
        if works(&t) {
            return Some(t);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..64 {
        let mut v = vec![0u32; d * d];
        for s in &sols {
            let c = rng.gen_range(0..f.p());
            for (slot, &x) in v.iter_mut().zip(s) {
                *slot = f.add(*slot, f.mul(c, x));
            }
        }
        let t = as_matrix(&v);
        if works(&t) {
            return Some(t);
        }
    }
    None
}

/// Identifies a module generated by a maximal vector, of dimension 1,
/// p-1 or p.
pub fn classify_block(m: &WOneModule) -> Result<IsoType> {
    let (p, d) = (m.p(), m.dim);
    for (lambda, v) in maximal_vectors(m) {
        if spin(m, &v).dim() != d {
            continue;
        }
        let iso = if d == p as usize {
            IsoType::verma(lambda)
        } else if d == p as usize - 1 && lambda == p - 1 {
            IsoType::simple(p - 1)
        } else if d == 1 && lambda == 0 {
            IsoType::simple(0)
        } else {
            continue;
        };
        if iso_intertwiner(&iso.reference(p)?, m).is_none() {
            return Err(Error::Unclassifiable(format!("generated by a weight-{lambda} maximal vector but not isomorphic to {iso}")));
        }
        return Ok(iso);
    }
    Err(Error::Unclassifiable(format!(
        "no maximal vector generates this {d}-dimensional module"
    )))
}

/// Greedy splitting into blocks generated by maximal vectors.
pub fn decompose(m: &WOneModule) -> Result<Vec<(Subspace, IsoType)>> {
    let (f, d) = (m.field, m.dim);
    let mut cands: Vec<(usize, u32, usize, Subspace)> = maximal_vectors(m)
        .into_iter()
        .enumerate()
        .map(|(idx, (l, v))| {
            let s = spin(m, &v);
            (s.dim(), l, idx, s)
        })
        .collect();
    cands.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut acc = Echelon::new(f, d);
    let mut blocks = Vec::new();
    for (dim, _, _, s) in cands {
        if acc.rank() == d {
            break;
        }
        let mut trial = acc.clone();
        if !s.vectors().into_iter().all(|v| trial.insert(v)) {
            continue;
        }
        debug_assert_eq!(trial.rank(), acc.rank() + dim);
        acc = trial;
        let iso = classify_block(&m.restrict(&s)?)?;
        blocks.push((s, iso));
    }
    if acc.rank() != d {
        return Err(Error::DecompositionStuck(format!(
            "blocks generated by maximal vectors span {} of {d} dimensions",
            acc.rank()
        )));
    }
    Ok(blocks)
}

/// Composition factors from the block decomposition, checked against the
/// brute-force oracle when `dim ≤ p ≤ 7`.
pub fn composition_multiset(m: &WOneModule) -> Result<CompositionMultiset> {
    let p = m.p();
    let mut main = CompositionMultiset::new(p);
    for (_, iso) in decompose(m)? {
        main.merge(&iso.factors(p));
    }
    if m.dim <= p as usize && p <= ORACLE_MAX_PRIME {
        let oracle = composition_oracle(m)?;
        if oracle != main {
            return Err(Error::OracleMismatch(format!("blocks give {main}, composition series gives {oracle}")));
        }
    }
    Ok(main)
}

/// All cyclic submodules, found by spinning every projective point.
pub fn cyclic_submodules(m: &WOneModule) -> Vec<Subspace> {
    let (p, d) = (m.p() as usize, m.dim);
    let mut seen: HashSet<Subspace> = HashSet::new();
    let mut out = Vec::new();
    for lead in 0..d {
        let tail = d - lead - 1;
        let count = p.pow(tail as u32);
        for mut code in 0..count {
            let mut v = vec![0u32; d];
            v[lead] = 1;
            for slot in v[lead + 1..].iter_mut() {
                *slot = (code % p) as u32;
                code /= p;
            }
            let s = spin(m, &v);
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
    }
    out
}

/// Composition factors of a small module from an explicit composition
/// series through the lattice of submodules.
pub fn composition_oracle(m: &WOneModule) -> Result<CompositionMultiset> {
    let (f, p, d) = (m.field, m.p(), m.dim);
    if p > ORACLE_MAX_PRIME || d > p as usize {
        return Err(Error::ArgumentError(format!("oracle limited to dim <= p <= {ORACLE_MAX_PRIME}")));
    }
    let cyclic = cyclic_submodules(m);
    let mut out = CompositionMultiset::new(p);
    let mut current = Subspace::zero(f, d);
    while current.dim() < d {
        let next = cyclic
            .iter()
            .map(|c| current.sum(c).expect("same ambient"))
            .filter(|s| s.dim() > current.dim())
            .min_by(|a, b| a.dim().cmp(&b.dim()).then_with(|| a.pivots().cmp(b.pivots())))
            .expect("a vector outside a proper submodule spins to a larger one");
        let factor = m.subquotient(&next, &current)?;
        let iso = identify_simple(&factor)?;
        out.add(iso.lambda, 1);
        current = next;
    }
    Ok(out)
}

fn identify_simple(m: &WOneModule) -> Result<IsoType> {
    let p = m.p();
    let (lambda, _) = maximal_vectors(m)
        .into_iter()
        .next()
        .ok_or_else(|| Error::OracleMismatch("composition factor without a maximal vector".into()))?;
    let iso = IsoType::simple(lambda);
    if iso.dim(p) != m.dim {
        return Err(Error::OracleMismatch(format!(
            "{}-dimensional composition factor with a weight-{lambda} maximal vector",
            m.dim
        )));
    }
    Ok(iso)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::{self, build_h, build_k, build_s, build_w, Family};
    use crate::poly::{MultiIndex, Poly};
    use proptest::prelude::*;

    fn gf(p: u32) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn mono(p: u32, e: &[u32]) -> Poly {
        Poly::monomial(gf(p), MultiIndex::new(e, p).unwrap(), 1)
    }

    fn h_spectrum(m: &WOneModule) -> Vec<u32> {
        let w = m.weights();
        (0..m.p()).flat_map(|l| std::iter::repeat_n(l, w[l as usize])).collect()
    }

    #[test]
    fn verma_weights() {
        let v = baby_verma(2, 5).unwrap();
        assert_eq!(v.dim(), 5);
        // m_k has weight λ - k
        for k in 0..5 {
            let mut e = vec![0; 5];
            e[k] = 1;
            let expect: Vec<u32> = e.iter().map(|&x| gf(5).mul(x, gf(5).reduce(2 - k as i64))).collect();
            assert_eq!(v.h().mul_vec(&e), expect);
        }
        assert_eq!(h_spectrum(&v), vec![0, 1, 2, 3, 4]);
        assert!(matches!(baby_verma(5, 5), Err(Error::ArgumentError(_))));
        assert_eq!(baby_verma(0, 2).unwrap_err(), Error::UnsupportedPrime(2));
    }

    #[test]
    fn natural_is_top_verma() {
        for p in [3, 5, 7] {
            let t = iso_intertwiner(&natural_module(p).unwrap(), &baby_verma(p - 1, p).unwrap());
            assert!(t.is_some(), "p={p}");
        }
    }

    #[test]
    fn verma_zero_maximal_vectors() {
        let mv = maximal_vectors(&baby_verma(0, 5).unwrap());
        let weights: Vec<u32> = mv.iter().map(|(l, _)| *l).collect();
        assert_eq!(weights, vec![0, 4]);
    }

    #[test]
    fn simple_modules() {
        let ad = adjoint_w1(5).unwrap();
        assert!(iso_intertwiner(&simple(3, 5).unwrap(), &ad).is_some());
        let l0 = simple(0, 5).unwrap();
        assert!(l0.actions().iter().all(Matrix::is_zero));
        let l4 = simple(4, 5).unwrap();
        assert_eq!(l4.dim(), 4);
        assert_eq!(h_spectrum(&l4), vec![1, 2, 3, 4]);
    }

    #[test]
    fn simples_are_simple() {
        for p in [3, 5] {
            for l in 0..p {
                let m = simple(l, p).unwrap();
                let c = composition_oracle(&m).unwrap();
                assert_eq!(c, IsoType::simple(l).factors(p), "L({l}) p={p}");
            }
        }
        let m = simple(3, 7).unwrap();
        assert_eq!(cyclic_submodules(&m).len(), 1);
    }

    #[test]
    fn maximal_vector_examples() {
        let mv = maximal_vectors(&baby_verma(2, 5).unwrap());
        assert_eq!(mv.len(), 1);
        assert_eq!(mv[0].0, 2);
        let nat = maximal_vectors(&natural_module(5).unwrap());
        assert_eq!(nat, vec![(0, vec![1, 0, 0, 0, 0]), (4, vec![0, 0, 0, 0, 1])]);
        let l4 = maximal_vectors(&simple(4, 5).unwrap());
        assert_eq!(l4.len(), 1);
        assert_eq!(l4[0].0, 4);
    }

    #[test]
    fn spin_examples() {
        let v0 = baby_verma(0, 5).unwrap();
        let mv = maximal_vectors(&v0);
        assert_eq!(spin(&v0, &mv[0].1).dim(), 5);
        let sub = spin(&v0, &mv[1].1);
        assert_eq!(sub.dim(), 4);
        assert!(iso_intertwiner(&v0.restrict(&sub).unwrap(), &simple(4, 5).unwrap()).is_some());
        assert_eq!(spin(&v0, &[0; 5]).dim(), 0);
    }

    #[test]
    fn intertwiner_examples() {
        let v2 = baby_verma(2, 5).unwrap();
        assert!(iso_intertwiner(&v2, &v2).is_some());
        assert!(iso_intertwiner(&simple(1, 5).unwrap(), &simple(2, 5).unwrap()).is_none());
        assert!(iso_intertwiner(&baby_verma(0, 5).unwrap(), &baby_verma(4, 5).unwrap()).is_none());
    }

    #[test]
    fn submodule_action_examples() {
        let w2 = build_w(2, 5).unwrap();
        let emb = Embedding::new(&w2).unwrap();
        let vecs: Vec<Vec<u32>> = (0..5)
            .map(|t| {
                let d = Deriv::term(gf(5), MultiIndex::new(&[t, 3], 5).unwrap(), 1, 1);
                w2.coordinates(&d).unwrap()
            })
            .collect();
        let span = Subspace::from_vectors(gf(5), w2.dim(), &vecs).unwrap();
        let m = submodule_action(&w2, &emb, &span).unwrap();
        assert_eq!(m.dim(), 5);
        assert_eq!(classify_block(&m).unwrap(), IsoType::verma(4));

        let s2 = build_s(2, 5).unwrap();
        let emb = Embedding::new(&s2).unwrap();
        let elems: Vec<Deriv> = (0..5).map(|t| cartan::d_ij(0, 1, &mono(5, &[t, 2])).unwrap()).collect();
        let m = block_action(&emb, s2.torus(), &elems).unwrap();
        assert_eq!(m.dim(), 5);

        let line = Subspace::from_vectors(gf(5), w2.dim(), &[vec![1; 50]]).unwrap();
        let emb = Embedding::new(&w2).unwrap();
        assert!(matches!(submodule_action(&w2, &emb, &line), Err(Error::NotInvariant { .. })));
    }

    #[test]
    fn classify_examples() {
        let w2 = build_w(2, 5).unwrap();
        let emb = Embedding::new(&w2).unwrap();
        let elems: Vec<Deriv> = (0..5)
            .map(|t| Deriv::term(gf(5), MultiIndex::new(&[t, 3], 5).unwrap(), 0, 1))
            .collect();
        let m = block_action(&emb, w2.torus(), &elems).unwrap();
        assert_eq!(classify_block(&m).unwrap().canonical(5), IsoType::simple(3));

        let s2 = build_s(2, 5).unwrap();
        let emb = Embedding::new(&s2).unwrap();
        let elems: Vec<Deriv> = (0..4)
            .map(|t| Deriv::term(gf(5), MultiIndex::new(&[t, 0], 5).unwrap(), 1, 1))
            .collect();
        let m = block_action(&emb, s2.torus(), &elems).unwrap();
        assert_eq!(classify_block(&m).unwrap(), IsoType::simple(4));

        let k3 = build_k(3, 5).unwrap();
        let emb = Embedding::new(&k3).unwrap();
        let elems: Vec<Deriv> = (0..5).map(|t| cartan::d_k(&mono(5, &[1, 1, t])).unwrap()).collect();
        let m = block_action(&emb, k3.torus(), &elems).unwrap();
        assert_eq!(classify_block(&m).unwrap(), IsoType::verma(4));
    }

    #[test]
    fn unclassifiable_sum() {
        let m = WOneModule::direct_sum(&[simple(1, 5).unwrap(), simple(2, 5).unwrap()]).unwrap();
        assert!(matches!(classify_block(&m), Err(Error::Unclassifiable(_))));
    }

    #[test]
    fn composition_examples() {
        let c = composition_multiset(&baby_verma(0, 5).unwrap()).unwrap();
        assert_eq!(c.counts(), &[1, 0, 0, 0, 1]);
        let c = composition_multiset(&simple(3, 5).unwrap()).unwrap();
        assert_eq!(c.counts(), &[0, 0, 0, 1, 0]);
        let h2 = build_h(2, 5).unwrap();
        let m = adjoint_module(&h2, &Embedding::new(&h2).unwrap()).unwrap();
        let c = composition_multiset(&m).unwrap();
        assert_eq!(c.counts(), &[0, 1, 1, 1, 2]);
        assert_eq!(c.total_dim(), 23);
        let zero = WOneModule::new(gf(5), 0, vec![Matrix::zeros(gf(5), 0, 0); 5]).unwrap();
        assert!(composition_multiset(&zero).unwrap().is_empty());
        assert!(decompose(&zero).unwrap().is_empty());
    }

    #[test]
    fn oracle_matches_on_sums() {
        let m = WOneModule::direct_sum(&[simple(0, 5).unwrap(), simple(4, 5).unwrap()]).unwrap();
        assert_eq!(composition_oracle(&m).unwrap().counts(), &[1, 0, 0, 0, 1]);
        assert_eq!(composition_multiset(&m).unwrap().counts(), &[1, 0, 0, 0, 1]);
    }

    fn block_types(fam: Family, n: usize, p: u32) -> Vec<IsoType> {
        let alg = cartan::CartanAlgebra::build(fam, n, p).unwrap();
        let m = adjoint_module(&alg, &Embedding::new(&alg).unwrap()).unwrap();
        let mut types: Vec<IsoType> = decompose(&m).unwrap().into_iter().map(|(_, t)| t.canonical(p)).collect();
        types.sort();
        types
    }

    #[test]
    fn decompose_examples() {
        let mut expect = vec![IsoType::verma(4); 5];
        expect.extend(vec![IsoType::simple(3); 5]);
        expect.sort();
        assert_eq!(block_types(Family::W, 2, 5), expect);

        let mut expect = vec![IsoType::verma(0)];
        expect.extend((1..5).map(IsoType::simple));
        expect.sort();
        assert_eq!(block_types(Family::S, 2, 5), expect);
    }

    #[test]
    fn non_module_rejected() {
        let f = gf(3);
        let mut action = vec![Matrix::identity(f, 1); 3];
        action[1] = Matrix::zeros(f, 1, 1);
        assert!(matches!(WOneModule::new(f, 1, action), Err(Error::ArgumentError(_))));
        assert!(matches!(WOneModule::new(f, 1, vec![]), Err(Error::ShapeError(_))));
    }

    #[test]
    fn counts_render() {
        let c: IsoCounts = [IsoType::simple(1), IsoType::verma(0), IsoType::simple(1), IsoType::verma(4)]
            .into_iter()
            .collect();
        assert_eq!(c.to_string(), "V(0) (+) V(4) (+) L(1)^2");
        assert_eq!(c.total_dim(5), 20);
        assert_eq!(c.multiset(5).counts(), &[2, 2, 0, 0, 2]);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"V(0)":1,"V(4)":1,"L(1)":2}"#);
    }

    #[test]
    fn multiset_json() {
        let c = IsoType::verma(0).factors(5);
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"0":1,"1":0,"2":0,"3":0,"4":1}"#);
        assert_eq!(c.to_string(), "L(0) + L(4)");
        assert_eq!(serde_json::to_string(&IsoType::simple(3)).unwrap(), "\"L(3)\"");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn verma_invariants(pi in 0usize..4, l in 0u32..11) {
            let p = [3u32, 5, 7, 11][pi];
            let l = l % p;
            let v = baby_verma(l, p).unwrap();
            prop_assert_eq!(v.weights(), vec![1; p as usize]);
            prop_assert_eq!(IsoType::verma(l).factors(p).total_dim(), p as usize);
            prop_assert_eq!(classify_block(&v).unwrap(), IsoType::verma(l));
        }

        #[test]
        fn decompose_direct_sums(ls in proptest::collection::vec(0u32..5, 1..4)) {
            let parts: Vec<WOneModule> = ls.iter().map(|&l| baby_verma(l, 5).unwrap()).collect();
            let m = WOneModule::direct_sum(&parts).unwrap();
            let blocks = decompose(&m).unwrap();
            let mut got: Vec<IsoType> = blocks.iter().map(|(_, t)| *t).collect();
            let mut want: Vec<IsoType> = ls.iter().map(|&l| IsoType::verma(l)).collect();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
            let total: usize = blocks.iter().map(|(s, _)| s.dim()).sum();
            prop_assert_eq!(total, m.dim());
        }
    }
}
