//! The truncated polynomial algebra A(n) = GF(p)[x_1..x_n] / (x_i^p).
//!
//! Variable and direction indices are 0-based in the API (`x_1` is index 0);
//! rendered text and JSON use the usual 1-based names.

use std::collections::BTreeMap;
use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::ffla::PrimeField;

/// Exponent tuple of a monomial, each entry in `0..p`.
///
/// The derived ordering is lexicographic on exponent tuples, which is the
/// canonical term order everywhere in this crate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(SmallVec<[u8; 8]>);

impl MultiIndex {
    pub fn new(exps: &[u32], p: u32) -> Result<Self> {
        if let Some(&e) = exps.iter().find(|&&e| e >= p) {
            return Err(Error::ArgumentError(format!("exponent {e} outside 0..{p}")));
        }
        Ok(MultiIndex(exps.iter().map(|&e| e as u8).collect()))
    }

    pub(crate) fn from_exps_unchecked(exps: impl IntoIterator<Item = u32>) -> Self {
        MultiIndex(exps.into_iter().map(|e| e as u8).collect())
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, n))
    }

    /// The all-`(p-1)` tuple τ.
    pub fn tau(n: usize, p: u32) -> Self {
        MultiIndex(SmallVec::from_elem((p - 1) as u8, n))
    }

    /// The unit tuple ε_i.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut m = Self::zero(n);
        m.0[i] = 1;
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i] as u32
    }

    pub fn exps(&self) -> Vec<u32> {
        self.0.iter().map(|&e| e as u32).collect()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn with(&self, i: usize, e: u32) -> Self {
        let mut m = self.clone();
        m.0[i] = e as u8;
        m
    }

    /// `self - ε_i`, or `None` when the i-th exponent is zero.
    pub fn lower(&self, i: usize) -> Option<Self> {
        (self.0[i] > 0).then(|| {
            let mut m = self.clone();
            m.0[i] -= 1;
            m
        })
    }

    /// `self + ε_i`, or `None` when that leaves A(n).
    pub fn raise(&self, i: usize, p: u32) -> Option<Self> {
        ((self.0[i] as u32) + 1 < p).then(|| {
            let mut m = self.clone();
            m.0[i] += 1;
            m
        })
    }

    /// Ω(a): the positions whose exponent is not `p-1`.
    pub fn omega(&self, p: u32) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.get(i) != p - 1).collect()
    }

    /// ℓ(a) = |Ω(a)|.
    pub fn ell(&self, p: u32) -> usize {
        self.omega(p).len()
    }

    /// Contact degree ‖α‖ = Σα_i + α_{2r+1} - 2 for a tuple of odd length.
    pub fn contact_norm(&self) -> i64 {
        let last = *self.0.last().expect("nonempty multi-index") as i64;
        self.degree() as i64 + last - 2
    }

    /// Position of the monomial in lexicographic order on A(n).
    pub fn lex_index(&self, p: u32) -> usize {
        self.0
            .iter()
            .fold(0usize, |acc, &e| acc * p as usize + e as usize)
    }

    pub fn from_lex_index(mut idx: usize, n: usize, p: u32) -> Self {
        let mut v: SmallVec<[u8; 8]> = SmallVec::from_elem(0, n);
        for slot in v.iter_mut().rev() {
            *slot = (idx % p as usize) as u8;
            idx /= p as usize;
        }
        MultiIndex(v)
    }

    /// Every element of A(n) in lexicographic order.
    pub fn all(n: usize, p: u32) -> impl Iterator<Item = MultiIndex> {
        let count = (p as usize).pow(n as u32);
        (0..count).map(move |i| Self::from_lex_index(i, n, p))
    }

    /// Renders as `x1^a1*...*xn^an`, omitting zero exponents; `1` for the
    /// empty product.
    pub fn render(&self) -> String {
        let factors: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, e)| format!("x{}^{}", i + 1, e))
            .collect();
        if factors.is_empty() {
            "1".to_string()
        } else {
            factors.join("*")
        }
    }
}

/// σ(i) for the Hamiltonian and contact operators in 2r variables (0-based).
pub fn sigma(i: usize, r: usize) -> i64 {
    if i < r {
        1
    } else {
        -1
    }
}

/// The partner index i′ in 2r variables (0-based).
pub fn prime_index(i: usize, r: usize) -> usize {
    if i < r {
        i + r
    } else {
        i - r
    }
}

/// Product of monomials: `Some(a + b)` when it stays inside A(n), `None`
/// when the product is truncated to zero.
pub fn mono_mul(a: &MultiIndex, b: &MultiIndex, p: u32) -> Result<Option<MultiIndex>> {
    if a.len() != b.len() {
        return Err(Error::ShapeError(format!(
            "monomials in {} and {} variables",
            a.len(),
            b.len()
        )));
    }
    Ok(mono_mul_unchecked(a, b, p))
}

#[inline]
pub(crate) fn mono_mul_unchecked(a: &MultiIndex, b: &MultiIndex, p: u32) -> Option<MultiIndex> {
    let mut out = a.clone();
    for (slot, &e) in out.0.iter_mut().zip(b.0.iter()) {
        let s = *slot as u32 + e as u32;
        if s >= p {
            return None;
        }
        *slot = s as u8;
    }
    Some(out)
}

/// Element of A(n): a finitely supported map from monomials to GF(p).
/// Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    n: usize,
    field: PrimeField,
    terms: BTreeMap<MultiIndex, u32>,
}

impl Poly {
    pub fn zero(field: PrimeField, n: usize) -> Self {
        Poly {
            n,
            field,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(field: PrimeField, n: usize, c: i64) -> Self {
        Self::monomial(field, MultiIndex::zero(n), c)
    }

    pub fn monomial(field: PrimeField, alpha: MultiIndex, c: i64) -> Self {
        let mut f = Self::zero(field, alpha.len());
        f.add_term(alpha, field.reduce(c));
        f
    }

    /// The coordinate function `x_i` (0-based).
    pub fn var(field: PrimeField, n: usize, i: usize) -> Self {
        Self::monomial(field, MultiIndex::unit(n, i), 1)
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs.
    pub fn from_terms(field: PrimeField, n: usize, terms: &[(Vec<u32>, i64)]) -> Result<Self> {
        let mut f = Self::zero(field, n);
        for (exps, c) in terms {
            if exps.len() != n {
                return Err(Error::ShapeError(format!(
                    "exponent tuple of length {} in {} variables",
                    exps.len(),
                    n
                )));
            }
            f.add_term(MultiIndex::new(exps, field.p())?, field.reduce(*c));
        }
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> u32 {
        self.terms.get(alpha).copied().unwrap_or(0)
    }

    /// Terms in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, u32)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    /// Adds `c * x^alpha` in place.
    pub fn add_term(&mut self, alpha: MultiIndex, c: u32) {
        if c == 0 {
            return;
        }
        let f = self.field;
        match self.terms.entry(alpha) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = f.add(*e.get(), c);
                if s == 0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn check_compatible(&self, other: &Poly) -> Result<()> {
        if self.field != other.field {
            return Err(Error::ModulusMismatch(self.field.p(), other.field.p()));
        }
        if self.n != other.n {
            return Err(Error::ShapeError(format!(
                "polynomials in {} and {} variables",
                self.n, other.n
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other, 1);
        Ok(out)
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other, self.field.neg(1));
        Ok(out)
    }

    /// `self += c * other`, without shape checks.
    pub(crate) fn add_assign_unchecked(&mut self, other: &Poly, c: u32) {
        if c == 0 {
            return;
        }
        for (m, &v) in &other.terms {
            self.add_term(m.clone(), self.field.mul(v, c));
        }
    }

    pub fn scale(&self, c: i64) -> Poly {
        let c = self.field.reduce(c);
        let mut out = Poly::zero(self.field, self.n);
        if c != 0 {
            out.terms = self
                .terms
                .iter()
                .map(|(m, &v)| (m.clone(), self.field.mul(v, c)))
                .collect();
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly> {
        self.check_compatible(other)?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Poly) -> Poly {
        let f = self.field;
        let mut out = Poly::zero(f, self.n);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                if let Some(m) = mono_mul_unchecked(a, b, f.p()) {
                    out.add_term(m, f.mul(ca, cb));
                }
            }
        }
        out
    }

    /// Partial derivative ∂_i (0-based direction).
    pub fn partial(&self, i: usize) -> Result<Poly> {
        if i >= self.n {
            return Err(Error::ShapeError(format!(
                "direction {} out of range for {} variables",
                i + 1,
                self.n
            )));
        }
        Ok(self.partial_unchecked(i))
    }

    pub(crate) fn partial_unchecked(&self, i: usize) -> Poly {
        let f = self.field;
        let mut out = Poly::zero(f, self.n);
        for (m, &c) in &self.terms {
            if let Some(lower) = m.lower(i) {
                out.add_term(lower, f.mul(c, m.get(i) % f.p()));
            }
        }
        out
    }

    /// Homogeneous components keyed by an arbitrary grading of monomials.
    pub fn split_by<K: Ord>(&self, key: impl Fn(&MultiIndex) -> K) -> BTreeMap<K, Poly> {
        let mut parts: BTreeMap<K, Poly> = BTreeMap::new();
        for (m, &c) in &self.terms {
            parts
                .entry(key(m))
                .or_insert_with(|| Poly::zero(self.field, self.n))
                .add_term(m.clone(), c);
        }
        parts
    }

    /// Dense coefficient vector in lexicographic monomial order (length p^n).
    pub fn to_dense(&self) -> Vec<u32> {
        let mut v = vec![0; (self.field.p() as usize).pow(self.n as u32)];
        for (m, &c) in &self.terms {
            v[m.lex_index(self.field.p())] = c;
        }
        v
    }

    pub fn from_dense(field: PrimeField, n: usize, v: &[u32]) -> Poly {
        let mut f = Poly::zero(field, n);
        for (i, &c) in v.iter().enumerate() {
            if c != 0 {
                f.terms.insert(MultiIndex::from_lex_index(i, n, field.p()), c);
            }
        }
        f
    }
}

/// `f * g` in A(n).
pub fn poly_mul(f: &Poly, g: &Poly) -> Result<Poly> {
    f.mul(g)
}

/// `∂_i f` (0-based direction).
pub fn partial(i: usize, f: &Poly) -> Result<Poly> {
    f.partial(i)
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| format!("{}*{}", c, m.render()))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(p: u32) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e, 31).unwrap()
    }

    fn poly(p: u32, n: usize, terms: &[(&[u32], i64)]) -> Poly {
        let t: Vec<(Vec<u32>, i64)> = terms.iter().map(|(e, c)| (e.to_vec(), *c)).collect();
        Poly::from_terms(gf(p), n, &t).unwrap()
    }

    #[test]
    fn mono_mul_examples() {
        assert_eq!(mono_mul(&mi(&[4]), &mi(&[1]), 5).unwrap(), None);
        assert_eq!(mono_mul(&mi(&[1, 0]), &mi(&[1, 0]), 5).unwrap(), Some(mi(&[2, 0])));
        assert_eq!(mono_mul(&mi(&[0, 0]), &mi(&[3, 4]), 5).unwrap(), Some(mi(&[3, 4])));
        assert!(matches!(mono_mul(&mi(&[1]), &mi(&[1, 0]), 5), Err(Error::ShapeError(_))));
    }

    #[test]
    fn poly_mul_examples() {
        let a = poly(5, 1, &[(&[0], 1), (&[1], 1)]);
        let b = poly(5, 1, &[(&[0], 1), (&[1], -1)]);
        assert_eq!(poly_mul(&a, &b).unwrap(), poly(5, 1, &[(&[0], 1), (&[2], -1)]));

        let x3 = poly(5, 1, &[(&[3], 1)]);
        let x2 = poly(5, 1, &[(&[2], 1)]);
        assert!(poly_mul(&x3, &x2).unwrap().is_zero());

        let s = poly(5, 2, &[(&[1, 0], 1), (&[0, 1], 1)]);
        assert_eq!(
            poly_mul(&s, &s).unwrap(),
            poly(5, 2, &[(&[2, 0], 1), (&[1, 1], 2), (&[0, 2], 1)])
        );
        let other = poly(5, 1, &[(&[1], 1)]);
        assert!(matches!(poly_mul(&s, &other), Err(Error::ShapeError(_))));
    }

    #[test]
    fn partial_examples() {
        assert_eq!(
            partial(0, &poly(5, 1, &[(&[3], 1)])).unwrap(),
            poly(5, 1, &[(&[2], 3)])
        );
        assert!(partial(1, &poly(5, 2, &[(&[2, 0], 1)])).unwrap().is_zero());
        assert_eq!(
            partial(0, &poly(5, 2, &[(&[4, 1], 1)])).unwrap(),
            poly(5, 2, &[(&[3, 1], 4)])
        );
        assert!(matches!(
            partial(2, &poly(5, 2, &[(&[1, 1], 1)])),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn partials_commute_and_are_nilpotent() {
        let f = gf(5);
        for n in 1..=3 {
            for m in MultiIndex::all(n, 5) {
                let x = Poly::monomial(f, m, 1);
                for i in 0..n {
                    for j in 0..n {
                        let a = x.partial(i).unwrap().partial(j).unwrap();
                        let b = x.partial(j).unwrap().partial(i).unwrap();
                        assert_eq!(a, b);
                    }
                    let mut y = x.clone();
                    for _ in 0..5 {
                        y = y.partial(i).unwrap();
                    }
                    assert!(y.is_zero());
                }
            }
        }
    }

    #[test]
    fn index_helpers() {
        let p = 5;
        let a = MultiIndex::new(&[4, 0, 2], p).unwrap();
        assert_eq!(a.omega(p), vec![1, 2]);
        assert_eq!(a.ell(p), 2);
        assert_eq!(MultiIndex::tau(3, p).ell(p), 0);
        assert_eq!(MultiIndex::zero(3).ell(p), 3);
        // ‖τ‖ = (2r+1)(p-1) + (p-1) - 2
        for r in 1..=3 {
            let n = 2 * r + 1;
            let t = MultiIndex::tau(n, p);
            assert_eq!(t.contact_norm(), (n as i64) * 4 + 4 - 2);
        }
        assert_eq!(MultiIndex::new(&[0, 0, 1], p).unwrap().contact_norm(), 0);
        assert_eq!(sigma(0, 1), 1);
        assert_eq!(sigma(1, 1), -1);
        assert_eq!(prime_index(0, 2), 2);
        assert_eq!(prime_index(3, 2), 1);
        for (i, m) in MultiIndex::all(3, 3).enumerate() {
            assert_eq!(m.lex_index(3), i);
        }
        assert_eq!(MultiIndex::new(&[5], 5), Err(Error::ArgumentError("exponent 5 outside 0..5".into())));
        assert_eq!(a.render(), "x1^4*x3^2");
        assert_eq!(MultiIndex::zero(2).render(), "1");
    }

    fn arb_poly(n: usize) -> impl Strategy<Value = Poly> {
        proptest::collection::vec((proptest::collection::vec(0u32..5, n), 0i64..5), 0..6)
            .prop_map(move |terms| Poly::from_terms(gf(5), n, &terms).unwrap())
    }

    proptest! {
        #[test]
        fn leibniz_n2(f in arb_poly(2), g in arb_poly(2), i in 0usize..2) {
            let lhs = f.mul(&g).unwrap().partial(i).unwrap();
            let rhs = f.partial(i).unwrap().mul(&g).unwrap()
                .add(&f.mul(&g.partial(i).unwrap()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn leibniz_n3(f in arb_poly(3), g in arb_poly(3), i in 0usize..3) {
            let lhs = f.mul(&g).unwrap().partial(i).unwrap();
            let rhs = f.partial(i).unwrap().mul(&g).unwrap()
                .add(&f.mul(&g.partial(i).unwrap()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn ring_axioms(f in arb_poly(2), g in arb_poly(2), h in arb_poly(2)) {
            prop_assert_eq!(f.mul(&g).unwrap(), g.mul(&f).unwrap());
            prop_assert_eq!(
                f.mul(&g).unwrap().mul(&h).unwrap(),
                f.mul(&g.mul(&h).unwrap()).unwrap()
            );
            prop_assert!(f.terms().all(|(_, c)| c != 0));
        }

        #[test]
        fn dense_round_trip(f in arb_poly(3)) {
            prop_assert_eq!(Poly::from_dense(gf(5), 3, &f.to_dense()), f);
        }
    }
}
