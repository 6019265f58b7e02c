//! Derivations of A(n): the Jacobson-Witt algebra W(n).

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::cartan::{self, Family};
use crate::error::{Error, Result};
use crate::ffla::PrimeField;
use crate::poly::{MultiIndex, Poly};

/// A derivation `D = Σ f_i ∂_i` of A(n).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Deriv {
    n: usize,
    field: PrimeField,
    comps: Vec<Poly>,
}

impl Deriv {
    pub fn zero(field: PrimeField, n: usize) -> Self {
        Deriv {
            n,
            field,
            comps: vec![Poly::zero(field, n); n],
        }
    }

    /// `c * x^alpha ∂_dir` (0-based direction).
    pub fn term(field: PrimeField, alpha: MultiIndex, dir: usize, c: i64) -> Self {
        let n = alpha.len();
        let mut d = Self::zero(field, n);
        d.comps[dir] = Poly::monomial(field, alpha, c);
        d
    }

    /// `∂_dir`.
    pub fn partial(field: PrimeField, n: usize, dir: usize) -> Self {
        Self::term(field, MultiIndex::zero(n), dir, 1)
    }

    pub fn from_components(comps: Vec<Poly>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| Error::ShapeError("derivation with no components".into()))?;
        let (n, field) = (first.n(), first.field());
        if comps.len() != n || comps.iter().any(|c| c.n() != n || c.field() != field) {
            return Err(Error::ShapeError(
                "components must be n polynomials in n variables over one field".into(),
            ));
        }
        Ok(Deriv { n, field, comps })
    }

    /// Builds `Σ c * x^exps ∂_dir` from `(dir, exps, c)` triples (0-based dir).
    pub fn from_terms(field: PrimeField, n: usize, terms: &[(usize, Vec<u32>, i64)]) -> Result<Self> {
        let mut d = Self::zero(field, n);
        for (dir, exps, c) in terms {
            if *dir >= n || exps.len() != n {
                return Err(Error::ShapeError(format!(
                    "term ({dir}, {exps:?}) does not fit {n} variables"
                )));
            }
            d.comps[*dir].add_term(MultiIndex::new(exps, field.p())?, field.reduce(*c));
        }
        Ok(d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.comps[i]
    }

    pub fn components(&self) -> &[Poly] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Poly::is_zero)
    }

    /// Number of nonzero terms `x^α ∂_i`.
    pub fn len(&self) -> usize {
        self.comps.iter().map(Poly::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero()
    }

    /// Terms `(dir, α, c)` sorted by direction, then exponent tuple.
    pub fn terms(&self) -> impl Iterator<Item = (usize, &MultiIndex, u32)> + '_ {
        self.comps
            .iter()
            .enumerate()
            .flat_map(|(i, f)| f.terms().map(move |(m, c)| (i, m, c)))
    }

    pub fn coeff(&self, dir: usize, alpha: &MultiIndex) -> u32 {
        self.comps[dir].coeff(alpha)
    }

    pub(crate) fn add_term(&mut self, dir: usize, alpha: MultiIndex, c: u32) {
        self.comps[dir].add_term(alpha, c);
    }

    fn check_compatible(&self, other: &Deriv) -> Result<()> {
        if self.field != other.field {
            return Err(Error::ModulusMismatch(self.field.p(), other.field.p()));
        }
        if self.n != other.n {
            return Err(Error::ShapeError(format!(
                "derivations of A({}) and A({})",
                self.n, other.n
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Deriv) -> Result<Deriv> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other, 1);
        Ok(out)
    }

    pub fn sub(&self, other: &Deriv) -> Result<Deriv> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other, self.field.neg(1));
        Ok(out)
    }

    pub(crate) fn add_assign_unchecked(&mut self, other: &Deriv, c: u32) {
        for (mine, theirs) in self.comps.iter_mut().zip(&other.comps) {
            mine.add_assign_unchecked(theirs, c);
        }
    }

    pub fn scale(&self, c: i64) -> Deriv {
        Deriv {
            comps: self.comps.iter().map(|f| f.scale(c)).collect(),
            ..*self
        }
    }

    /// `D(f) = Σ f_i ∂_i(f)`.
    pub fn apply(&self, f: &Poly) -> Result<Poly> {
        if f.n() != self.n {
            return Err(Error::ShapeError(format!(
                "derivation of A({}) applied to a polynomial in {} variables",
                self.n,
                f.n()
            )));
        }
        if f.field() != self.field {
            return Err(Error::ModulusMismatch(self.field.p(), f.field().p()));
        }
        Ok(self.apply_unchecked(f))
    }

    pub(crate) fn apply_unchecked(&self, f: &Poly) -> Poly {
        let mut out = Poly::zero(self.field, self.n);
        for (i, fi) in self.comps.iter().enumerate() {
            if fi.is_zero() {
                continue;
            }
            let df = f.partial_unchecked(i);
            if df.is_zero() {
                continue;
            }
            out.add_assign_unchecked(&fi.mul_unchecked(&df), 1);
        }
        out
    }

    /// `[D, E]`, componentwise `D(g_j) - E(f_j)`.
    pub fn bracket(&self, other: &Deriv) -> Result<Deriv> {
        self.check_compatible(other)?;
        Ok(self.bracket_unchecked(other))
    }

    pub(crate) fn bracket_unchecked(&self, other: &Deriv) -> Deriv {
        let minus_one = self.field.neg(1);
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(fj, gj)| {
                let mut c = self.apply_unchecked(gj);
                c.add_assign_unchecked(&other.apply_unchecked(fj), minus_one);
                c
            })
            .collect();
        Deriv { comps, ..*self }
    }

    /// `div(Σ f_i ∂_i) = Σ ∂_i(f_i)`.
    pub fn divergence(&self) -> Poly {
        let mut out = Poly::zero(self.field, self.n);
        for (i, fi) in self.comps.iter().enumerate() {
            out.add_assign_unchecked(&fi.partial_unchecked(i), 1);
        }
        out
    }

    /// The restricted map `D ↦ D^p`, read off from the p-fold composite on
    /// the coordinate functions.
    pub fn p_power(&self) -> Deriv {
        let p = self.field.p();
        let comps: Vec<Poly> = (0..self.n)
            .map(|i| {
                let mut g = Poly::var(self.field, self.n, i);
                for _ in 0..p {
                    if g.is_zero() {
                        break;
                    }
                    g = self.apply_unchecked(&g);
                }
                g
            })
            .collect();
        let out = Deriv { comps, ..*self };
        debug_assert!(self.n > 2 || out.agrees_with_power_on_monomials(self));
        out
    }

    /// Checks `out(x^α) = self^p(x^α)` on every monomial.
    fn agrees_with_power_on_monomials(&self, base: &Deriv) -> bool {
        MultiIndex::all(self.n, self.field.p()).all(|m| {
            let x = Poly::monomial(self.field, m, 1);
            let mut g = x.clone();
            for _ in 0..self.field.p() {
                g = base.apply_unchecked(&g);
            }
            g == self.apply_unchecked(&x)
        })
    }

    /// Coordinate of `x^α ∂_dir` in the monomial basis of W(n): directions
    /// outermost, exponents in lexicographic order.
    pub fn ambient_index(dir: usize, alpha: &MultiIndex, p: u32) -> usize {
        dir * (p as usize).pow(alpha.len() as u32) + alpha.lex_index(p)
    }

    pub fn ambient_term(idx: usize, n: usize, p: u32) -> (usize, MultiIndex) {
        let block = (p as usize).pow(n as u32);
        (idx / block, MultiIndex::from_lex_index(idx % block, n, p))
    }

    /// Dense coordinates in the monomial basis of W(n) (length n·p^n).
    pub fn to_dense(&self) -> Vec<u32> {
        let p = self.field.p();
        let mut v = vec![0; self.n * (p as usize).pow(self.n as u32)];
        for (dir, m, c) in self.terms() {
            v[Self::ambient_index(dir, m, p)] = c;
        }
        v
    }

    pub fn from_dense(field: PrimeField, n: usize, v: &[u32]) -> Deriv {
        let mut d = Deriv::zero(field, n);
        for (idx, &c) in v.iter().enumerate() {
            if c != 0 {
                let (dir, m) = Self::ambient_term(idx, n, field.p());
                d.comps[dir].add_term(m, c);
            }
        }
        d
    }

    /// `(dir, exps, coeff)` triples with 1-based directions, sorted.
    pub fn to_triples(&self) -> Vec<(usize, Vec<u32>, u32)> {
        self.terms().map(|(d, m, c)| (d + 1, m.exps(), c)).collect()
    }
}

impl fmt::Display for Deriv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(d, m, c)| format!("{}*{}*d{}", c, m.render(), d + 1))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl Serialize for Deriv {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for t in self.to_triples() {
            seq.serialize_element(&t)?;
        }
        seq.end()
    }
}

pub fn apply(d: &Deriv, f: &Poly) -> Result<Poly> {
    d.apply(f)
}

pub fn bracket(d: &Deriv, e: &Deriv) -> Result<Deriv> {
    d.bracket(e)
}

pub fn divergence(d: &Deriv) -> Poly {
    d.divergence()
}

pub fn p_power(d: &Deriv) -> Deriv {
    d.p_power()
}

/// Splits `d` into homogeneous parts.
///
/// W, S and H use the standard grading `deg(x^α ∂_i) = |α| - 1`; K uses
/// `‖α‖` on the contact polynomial of `d`.
pub fn graded_parts(d: &Deriv, family: Family) -> Result<BTreeMap<i64, Deriv>> {
    match family {
        Family::K => {
            if d.n().is_multiple_of(2) {
                return Err(Error::ShapeError("contact grading needs an odd variable count".into()));
            }
            let f = cartan::recover_k_poly(d)?;
            f.split_by(MultiIndex::contact_norm)
                .into_iter()
                .map(|(deg, part)| Ok((deg, cartan::d_k(&part)?)))
                .collect()
        }
        _ => {
            let mut parts: BTreeMap<i64, Deriv> = BTreeMap::new();
            for (dir, m, c) in d.terms() {
                parts
                    .entry(m.degree() as i64 - 1)
                    .or_insert_with(|| Deriv::zero(d.field(), d.n()))
                    .add_term(dir, m.clone(), c);
            }
            Ok(parts)
        }
    }
}

/// Matrix of `ad d` on the monomial basis of W(n), acting on columns.
pub fn ad_matrix(d: &Deriv) -> crate::ffla::Matrix {
    let (n, field) = (d.n(), d.field());
    let p = field.p();
    let dim = n * (p as usize).pow(n as u32);
    let columns: Vec<Vec<u32>> = (0..dim)
        .map(|idx| {
            let (dir, m) = Deriv::ambient_term(idx, n, p);
            d.bracket_unchecked(&Deriv::term(field, m, dir, 1)).to_dense()
        })
        .collect();
    crate::ffla::Matrix::from_columns(field, dim, &columns).expect("columns have ambient length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(p: u32) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    fn der(p: u32, n: usize, terms: &[(usize, &[u32], i64)]) -> Deriv {
        let t: Vec<(usize, Vec<u32>, i64)> = terms.iter().map(|(d, e, c)| (*d, e.to_vec(), *c)).collect();
        Deriv::from_terms(gf(p), n, &t).unwrap()
    }

    fn poly(p: u32, n: usize, terms: &[(&[u32], i64)]) -> Poly {
        let t: Vec<(Vec<u32>, i64)> = terms.iter().map(|(e, c)| (e.to_vec(), *c)).collect();
        Poly::from_terms(gf(p), n, &t).unwrap()
    }

    #[test]
    fn apply_examples() {
        let h = der(5, 1, &[(0, &[1], 1)]);
        assert_eq!(apply(&h, &poly(5, 1, &[(&[2], 1)])).unwrap(), poly(5, 1, &[(&[2], 2)]));
        let d1 = Deriv::partial(gf(5), 2, 0);
        assert!(apply(&d1, &poly(5, 2, &[(&[0, 1], 1)])).unwrap().is_zero());
        let e = der(5, 2, &[(0, &[0, 1], 1)]);
        assert_eq!(
            apply(&e, &poly(5, 2, &[(&[1, 1], 1)])).unwrap(),
            poly(5, 2, &[(&[0, 2], 1)])
        );
        assert!(matches!(apply(&e, &poly(5, 1, &[(&[1], 1)])), Err(Error::ShapeError(_))));
    }

    #[test]
    fn bracket_examples() {
        let d = Deriv::partial(gf(5), 1, 0);
        let h = der(5, 1, &[(0, &[1], 1)]);
        assert_eq!(bracket(&d, &h).unwrap(), d);
        let x2 = der(5, 1, &[(0, &[2], 1)]);
        assert!(bracket(&x2, &x2).unwrap().is_zero());
        let a = der(5, 2, &[(0, &[1, 0], 1), (1, &[0, 1], -1)]);
        let b = der(5, 2, &[(0, &[2, 0], 1), (1, &[1, 1], -2)]);
        assert_eq!(bracket(&a, &b).unwrap(), b);
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence(&der(5, 1, &[(0, &[1], 1)])), poly(5, 1, &[(&[0], 1)]));
        assert!(divergence(&der(5, 2, &[(0, &[0, 1], 1)])).is_zero());
        let d = der(5, 2, &[(0, &[2, 0], 1), (1, &[1, 1], 1)]);
        assert_eq!(divergence(&d), poly(5, 2, &[(&[1, 0], 3)]));
    }

    /// p-fold operator composition on every monomial, as an independent oracle.
    fn power_by_composition(d: &Deriv) -> Deriv {
        let p = d.field().p();
        let n = d.n();
        let mut out = Deriv::zero(d.field(), n);
        // E(x_i) determines E; confirm on all monomials below
        for i in 0..n {
            let mut g = Poly::var(d.field(), n, i);
            for _ in 0..p {
                g = d.apply(&g).unwrap();
            }
            for (m, c) in g.terms() {
                out.add_term(i, m.clone(), c);
            }
        }
        for m in MultiIndex::all(n, p) {
            let x = Poly::monomial(d.field(), m, 1);
            let mut g = x.clone();
            for _ in 0..p {
                g = d.apply(&g).unwrap();
            }
            assert_eq!(out.apply(&x).unwrap(), g);
        }
        out
    }

    #[test]
    fn p_power_examples() {
        let f = gf(5);
        assert!(p_power(&Deriv::partial(f, 1, 0)).is_zero());
        let h = der(5, 1, &[(0, &[1], 1)]);
        assert_eq!(p_power(&h), h);
        assert_eq!(power_by_composition(&h), h);
        let x2 = der(5, 1, &[(0, &[2], 1)]);
        assert!(p_power(&x2).is_zero());
        assert!(power_by_composition(&x2).is_zero());
        let mixed = der(5, 2, &[(0, &[1, 1], 2), (1, &[0, 1], 3), (1, &[0, 0], 1)]);
        assert_eq!(p_power(&mixed), power_by_composition(&mixed));
    }

    #[test]
    fn graded_parts_examples() {
        let h = der(5, 1, &[(0, &[1], 1)]);
        let parts = graded_parts(&h, Family::W).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[&0], h);
        let d = der(5, 1, &[(0, &[0], 1), (0, &[2], 1)]);
        let parts = graded_parts(&d, Family::W).unwrap();
        assert_eq!(parts[&-1], der(5, 1, &[(0, &[0], 1)]));
        assert_eq!(parts[&1], der(5, 1, &[(0, &[2], 1)]));
        let dk = cartan::d_k(&poly(5, 3, &[(&[0, 0, 1], 1)])).unwrap();
        let parts = graded_parts(&dk, Family::K).unwrap();
        assert_eq!(parts.keys().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn restrictedness_on_w2() {
        let f = gf(5);
        let n = 2;
        for idx in 0..n * 25 {
            let (dir, m) = Deriv::ambient_term(idx, n, 5);
            let d = Deriv::term(f, m, dir, 1);
            let lhs = ad_matrix(&p_power(&d));
            let rhs = ad_matrix(&d).pow(5).unwrap();
            assert_eq!(lhs, rhs, "ad(d^[p]) != (ad d)^p for {d}");
        }
    }

    fn arb_deriv(n: usize) -> impl Strategy<Value = Deriv> {
        proptest::collection::vec((0..n, proptest::collection::vec(0u32..5, n), 0i64..5), 0..5)
            .prop_map(move |terms| Deriv::from_terms(gf(5), n, &terms).unwrap())
    }

    fn arb_poly(n: usize) -> impl Strategy<Value = Poly> {
        proptest::collection::vec((proptest::collection::vec(0u32..5, n), 0i64..5), 0..5)
            .prop_map(move |terms| Poly::from_terms(gf(5), n, &terms).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn jacobi(a in arb_deriv(2), b in arb_deriv(2), c in arb_deriv(2)) {
            let t1 = a.bracket(&b.bracket(&c).unwrap()).unwrap();
            let t2 = b.bracket(&c.bracket(&a).unwrap()).unwrap();
            let t3 = c.bracket(&a.bracket(&b).unwrap()).unwrap();
            prop_assert!(t1.add(&t2).unwrap().add(&t3).unwrap().is_zero());
            prop_assert!(a.bracket(&b).unwrap().add(&b.bracket(&a).unwrap()).unwrap().is_zero());
        }

        #[test]
        fn bracket_matches_operator_commutator(a in arb_deriv(2), b in arb_deriv(2)) {
            let ab = a.bracket(&b).unwrap();
            for m in MultiIndex::all(2, 5) {
                let x = Poly::monomial(gf(5), m, 1);
                let lhs = ab.apply(&x).unwrap();
                let rhs = a.apply(&b.apply(&x).unwrap()).unwrap()
                    .sub(&b.apply(&a.apply(&x).unwrap()).unwrap()).unwrap();
                prop_assert_eq!(lhs, rhs);
            }
        }

        #[test]
        fn leibniz(d in arb_deriv(2), f in arb_poly(2), g in arb_poly(2)) {
            let lhs = d.apply(&f.mul(&g).unwrap()).unwrap();
            let rhs = d.apply(&f).unwrap().mul(&g).unwrap()
                .add(&f.mul(&d.apply(&g).unwrap()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn divergence_cocycle(a in arb_deriv(2), b in arb_deriv(2)) {
            let lhs = a.bracket(&b).unwrap().divergence();
            let rhs = a.apply(&b.divergence()).unwrap().sub(&b.apply(&a.divergence()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn grading_is_additive(a in (0usize..2, proptest::collection::vec(0u32..5, 2)),
                               b in (0usize..2, proptest::collection::vec(0u32..5, 2))) {
            let f = gf(5);
            let da = Deriv::term(f, MultiIndex::new(&a.1, 5).unwrap(), a.0, 1);
            let db = Deriv::term(f, MultiIndex::new(&b.1, 5).unwrap(), b.0, 1);
            let deg = |m: &Vec<u32>| m.iter().sum::<u32>() as i64 - 1;
            let c = da.bracket(&db).unwrap();
            if !c.is_zero() {
                let parts = graded_parts(&c, Family::W).unwrap();
                prop_assert_eq!(parts.keys().copied().collect::<Vec<_>>(), vec![deg(&a.1) + deg(&b.1)]);
            }
        }
    }

    #[test]
    fn full_space_dimension() {
        let d = Deriv::zero(gf(3), 2).to_dense();
        assert_eq!(d.len(), 2 * 9);
    }
}
