//! The graded Cartan-type algebras W(n), S(n), H(2r), K(2r+1) inside W(n),
//! their defining operators, and the embeddings of W(1).

use std::fmt;
use std::str::FromStr;

use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ffla::{Echelon, Matrix, PrimeField};
use crate::graded::{derived_span, GradedSpan, Key, Torus};
use crate::poly::{prime_index, sigma, MultiIndex, Poly};
use crate::witt::Deriv;

/// Polynomial coordinate `f` of the contact derivation `D_K(f)`.
pub type KPoly = Poly;

/// Largest ambient dimension `n·p^n` accepted by the builders.
pub const MAX_AMBIENT_DIM: usize = 1 << 17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    W,
    S,
    H,
    K,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::W, Family::S, Family::H, Family::K];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::W => "W",
            Family::S => "S",
            Family::H => "H",
            Family::K => "K",
        }
    }

    /// Checks that `n` is a valid variable count for the family.
    pub fn validate_n(self, n: usize) -> Result<()> {
        let ok = match self {
            Family::W => n >= 1,
            Family::S => n >= 2,
            Family::H => n >= 2 && n.is_multiple_of(2),
            Family::K => n >= 3 && n % 2 == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ArgumentError(format!(
                "{self}({n}) is not defined; expected {}",
                match self {
                    Family::W => "n >= 1",
                    Family::S => "n >= 2",
                    Family::H => "an even n >= 2",
                    Family::K => "an odd n >= 3",
                }
            )))
        }
    }

    /// Expected dimension of the algebra in `n` variables over GF(p).
    pub fn expected_dim(self, n: usize, p: u32) -> usize {
        let pn = (p as usize).pow(n as u32);
        match self {
            Family::W => n * pn,
            Family::S => (n - 1) * (pn - 1),
            Family::H => pn - 2,
            Family::K => pn - usize::from((n + 3).is_multiple_of(p as usize)),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "W" | "w" => Ok(Family::W),
            "S" | "s" => Ok(Family::S),
            "H" | "h" => Ok(Family::H),
            "K" | "k" => Ok(Family::K),
            _ => Err(Error::ArgumentError(format!("unknown family {s:?}"))),
        }
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// One named pass/fail entry of a report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn torus_for(family: Family, n: usize) -> Torus {
    match family {
        Family::W | Family::S => Torus::standard(n),
        Family::H => Torus::hamiltonian(n / 2),
        Family::K => Torus::contact(n / 2),
    }
}

fn check_size(n: usize, p: u32) -> Result<()> {
    let too_big = (p as usize)
        .checked_pow(n as u32)
        .and_then(|x| x.checked_mul(n))
        .is_none_or(|d| d > MAX_AMBIENT_DIM);
    if too_big {
        return Err(Error::ArgumentError(format!(
            "W({n}) over GF({p}) exceeds the supported ambient dimension {MAX_AMBIENT_DIM}"
        )));
    }
    Ok(())
}

fn even_r(n: usize) -> Result<usize> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::ArgumentError(format!("expected an even variable count, got {n}")));
    }
    Ok(n / 2)
}

fn odd_r(n: usize) -> Result<usize> {
    if n.is_multiple_of(2) {
        return Err(Error::ArgumentError(format!("expected an odd variable count, got {n}")));
    }
    Ok(n / 2)
}

/// `D_ij(f) = ∂_j(f)∂_i - ∂_i(f)∂_j` (0-based indices).
pub fn d_ij(i: usize, j: usize, f: &Poly) -> Result<Deriv> {
    let n = f.n();
    if i == j {
        return Err(Error::ArgumentError(format!("D_ij needs i != j, got i = j = {}", i + 1)));
    }
    if i >= n || j >= n {
        return Err(Error::ArgumentError(format!("index out of range for {n} variables")));
    }
    let mut comps = vec![Poly::zero(f.field(), n); n];
    comps[i] = f.partial_unchecked(j);
    comps[j] = f.partial_unchecked(i).scale(-1);
    Deriv::from_components(comps)
}

/// `D_H(f) = Σ σ(i) ∂_i(f) ∂_i′` in 2r variables.
pub fn d_h(f: &Poly) -> Result<Deriv> {
    let r = even_r(f.n())?;
    let mut comps = vec![Poly::zero(f.field(), f.n()); f.n()];
    for i in 0..2 * r {
        comps[prime_index(i, r)] = f.partial_unchecked(i).scale(sigma(i, r));
    }
    Deriv::from_components(comps)
}

/// The contact derivation `D_K(f)` in 2r+1 variables.
pub fn d_k(f: &Poly) -> Result<Deriv> {
    let r = odd_r(f.n())?;
    let (field, n) = (f.field(), f.n());
    let t = 2 * r;
    let dt = f.partial_unchecked(t);
    let mut comps = Vec::with_capacity(n);
    for j in 0..t {
        let jp = prime_index(j, r);
        let mut c = Poly::var(field, n, j).mul_unchecked(&dt);
        c.add_assign_unchecked(&f.partial_unchecked(jp), field.reduce(sigma(jp, r)));
        comps.push(c);
    }
    let mut last = f.scale(2);
    for j in 0..t {
        let term = Poly::var(field, n, j).mul_unchecked(&comps[prime_index(j, r)]);
        last.add_assign_unchecked(&term, field.reduce(-sigma(j, r)));
    }
    comps.push(last);
    Deriv::from_components(comps)
}

/// Inverse of [`d_k`] on its image.
pub fn recover_k_poly(d: &Deriv) -> Result<KPoly> {
    let r = odd_r(d.n())?;
    let (field, n) = (d.field(), d.n());
    let mut f = d.component(2 * r).clone();
    for j in 0..2 * r {
        let term = Poly::var(field, n, j).mul_unchecked(d.component(prime_index(j, r)));
        f.add_assign_unchecked(&term, field.reduce(sigma(j, r)));
    }
    let f = f.scale(field.inv(2) as i64);
    if d_k(&f)? != *d {
        return Err(Error::NotInContactImage);
    }
    Ok(f)
}

/// The bracket on contact coordinates: `D_K(⟨f,g⟩) = [D_K(f), D_K(g)]`.
pub fn contact_bracket(f: &KPoly, g: &KPoly) -> Result<KPoly> {
    if f.n() != g.n() {
        return Err(Error::ShapeError(format!("{} vs {} variables", f.n(), g.n())));
    }
    recover_k_poly(&d_k(f)?.bracket(&d_k(g)?)?)
}

/// `Θ_X(x_1^i ∂_1)` in `n` variables.
pub fn theta(family: Family, p: u32, n: usize, i: u32) -> Result<Deriv> {
    let field = PrimeField::new(p)?;
    family.validate_n(n)?;
    if i >= p {
        return Err(Error::ArgumentError(format!("exponent {i} outside 0..{p}")));
    }
    let mono = |pairs: &[(usize, u32)]| {
        let mut e = vec![0; n];
        for &(k, v) in pairs {
            e[k] = v;
        }
        MultiIndex::from_exps_unchecked(e)
    };
    match family {
        Family::W => Ok(Deriv::term(field, mono(&[(0, i)]), 0, 1)),
        Family::S => d_ij(0, 1, &Poly::monomial(field, mono(&[(0, i), (1, 1)]), 1)),
        Family::H => {
            let r = n / 2;
            Ok(d_h(&Poly::monomial(field, mono(&[(0, i), (r, 1)]), 1))?.scale(-1))
        }
        Family::K => {
            let half = field.inv(2) as i64;
            Ok(d_k(&Poly::monomial(field, mono(&[(n - 1, i)]), 1))?.scale(half))
        }
    }
}

/// A coordinatized Cartan-type algebra.
#[derive(Clone, Debug)]
pub struct CartanAlgebra {
    family: Family,
    n: usize,
    field: PrimeField,
    basis: Vec<Deriv>,
    kpolys: Option<Vec<KPoly>>,
    span: GradedSpan,
}

impl CartanAlgebra {
    pub fn build(family: Family, n: usize, p: u32) -> Result<Self> {
        match family {
            Family::W => build_w(n, p),
            Family::S => build_s(n, p),
            Family::H => build_h(n, p),
            Family::K => build_k(n, p),
        }
    }

    fn from_basis(family: Family, n: usize, field: PrimeField, basis: Vec<Deriv>, kpolys: Option<Vec<KPoly>>) -> Result<Self> {
        let mut span = GradedSpan::new(torus_for(family, n), field);
        for (i, b) in basis.iter().enumerate() {
            if span.insert(b)? != Some(i) {
                return Err(Error::ConstructionMismatch(format!(
                    "{family}({n}) basis element {i} ({b}) is dependent on earlier ones"
                )));
            }
        }
        Ok(CartanAlgebra {
            family,
            n,
            field,
            basis,
            kpolys,
            span,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Deriv] {
        &self.basis
    }

    /// Contact polynomials of the basis (K only).
    pub fn kpolys(&self) -> Option<&[KPoly]> {
        self.kpolys.as_deref()
    }

    pub fn torus(&self) -> &Torus {
        self.span.torus()
    }

    pub fn contains(&self, d: &Deriv) -> bool {
        d.n() == self.n && d.field() == self.field && self.span.contains(d)
    }

    /// Coordinates of `d` in the basis, or `None` outside the algebra.
    pub fn coordinates(&self, d: &Deriv) -> Option<Vec<u32>> {
        if d.n() != self.n || d.field() != self.field {
            return None;
        }
        self.span.coordinates(d)
    }

    pub fn element(&self, coords: &[u32]) -> Result<Deriv> {
        if coords.len() != self.dim() {
            return Err(Error::ShapeError(format!("{} coordinates for dimension {}", coords.len(), self.dim())));
        }
        let mut d = Deriv::zero(self.field, self.n);
        for (b, &c) in self.basis.iter().zip(coords) {
            if c != 0 {
                d.add_assign_unchecked(b, c);
            }
        }
        Ok(d)
    }

    /// Bracket closure on all basis pairs and p-map closure on the basis.
    pub fn check_closure(&self) -> Result<()> {
        for (a, x) in self.basis.iter().enumerate() {
            for (b, y) in self.basis.iter().enumerate().skip(a + 1) {
                if !self.span.contains(&x.bracket_unchecked(y)) {
                    return Err(Error::ConstructionMismatch(format!(
                        "{}({}) is not closed: [b{a}, b{b}] leaves the span",
                        self.family, self.n
                    )));
                }
            }
            if !self.span.contains(&x.p_power()) {
                return Err(Error::ConstructionMismatch(format!(
                    "{}({}) is not restricted: b{a}^[p] leaves the span",
                    self.family, self.n
                )));
            }
        }
        Ok(())
    }
}

impl Serialize for CartanAlgebra {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("CartanAlgebra", 5)?;
        st.serialize_field("family", &self.family)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("p", &self.p())?;
        st.serialize_field("dim", &self.dim())?;
        st.serialize_field("basis", &self.basis)?;
        st.end()
    }
}

pub fn build_w(n: usize, p: u32) -> Result<CartanAlgebra> {
    let field = PrimeField::new(p)?;
    Family::W.validate_n(n)?;
    check_size(n, p)?;
    let mut basis = Vec::with_capacity(n * (p as usize).pow(n as u32));
    for i in 0..n {
        for a in MultiIndex::all(n, p) {
            basis.push(Deriv::term(field, a, i, 1));
        }
    }
    CartanAlgebra::from_basis(Family::W, n, field, basis, None)
}

/// `x^a ∂_i` with `a_i = 0` and some other exponent below `p-1`.
pub fn s_basis_one(n: usize, field: PrimeField) -> Vec<Deriv> {
    let p = field.p();
    let mut out = Vec::new();
    for i in 0..n {
        for a in MultiIndex::all(n, p) {
            if a.get(i) == 0 && (0..n).any(|j| j != i && a.get(j) != p - 1) {
                out.push(Deriv::term(field, a, i, 1));
            }
        }
    }
    out
}

/// `D_{i_j i_{j+1}}(x^a x_{i_j} x_{i_{j+1}})` over consecutive pairs of `Ω(a)`.
pub fn s_basis_two(n: usize, field: PrimeField) -> Vec<Deriv> {
    let p = field.p();
    let mut out = Vec::new();
    for a in MultiIndex::all(n, p) {
        let om = a.omega(p);
        for w in om.windows(2) {
            let (k, l) = (w[0], w[1]);
            let m = a.raise(k, p).and_then(|m| m.raise(l, p)).expect("exponents below p-1");
            out.push(d_ij(k, l, &Poly::monomial(field, m, 1)).expect("distinct indices"));
        }
    }
    out
}

/// A basis of `ker(div)`, computed per multidegree.
pub fn divergence_free_basis(n: usize, field: PrimeField) -> Result<Vec<Deriv>> {
    let p = field.p();
    let torus = Torus::standard(n);
    let mut by_key: std::collections::BTreeMap<Key, Vec<(usize, MultiIndex)>> = Default::default();
    for i in 0..n {
        for a in MultiIndex::all(n, p) {
            let key = torus.term_key(i, &a);
            by_key.entry(key).or_default().push((i, a));
        }
    }
    let mut out = Vec::new();
    for terms in by_key.values() {
        let row: Vec<i64> = terms.iter().map(|(i, a)| a.get(*i) as i64).collect();
        let kernel = Matrix::from_rows(field, &[row])?.kernel();
        for v in kernel.vectors() {
            let mut d = Deriv::zero(field, n);
            for ((i, a), c) in terms.iter().zip(v) {
                if c != 0 {
                    d.add_term(*i, a.clone(), c);
                }
            }
            out.push(d);
        }
    }
    Ok(out)
}

fn component_counts(gens: &[Deriv], torus: &Torus) -> Result<std::collections::HashMap<Key, usize>> {
    let mut counts = std::collections::HashMap::new();
    for g in gens {
        if let Some(k) = torus.key(g)? {
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Derived algebra of the span of `gens`, computed from one round of
/// pairwise brackets; a second round must add nothing.
fn derived_algebra(gens: &[Deriv], torus: &Torus, field: PrimeField, n: usize, what: &str) -> Result<GradedSpan> {
    let ceiling = component_counts(gens, torus)?;
    let cap = |k: &Key| Some(ceiling.get(k).copied().unwrap_or(0));
    let mut derived = derived_span(gens, torus, field, cap)?;
    let first = derived.dim();
    let rows: Vec<(Key, Deriv)> = derived.echelon_basis(n);
    for (a, (ka, x)) in rows.iter().enumerate() {
        for (kb, y) in &rows[a + 1..] {
            let target = Torus::add_keys(ka, kb);
            if derived.component_dim(&target) >= ceiling.get(&target).copied().unwrap_or(0) {
                continue;
            }
            let c = x.bracket_unchecked(y);
            if !c.is_zero() {
                derived.insert(&c)?;
            }
        }
    }
    if derived.dim() != first {
        return Err(Error::ConstructionMismatch(format!(
            "brackets of the derived algebra of {what} leave it: {first} then {}",
            derived.dim()
        )));
    }
    Ok(derived)
}

pub fn build_s(n: usize, p: u32) -> Result<CartanAlgebra> {
    let field = PrimeField::new(p)?;
    Family::S.validate_n(n)?;
    check_size(n, p)?;

    // the closed form D_12(x_1^i x_2) = x_1^i∂_1 - i x_1^{i-1} x_2 ∂_2
    let probe = theta(Family::S, p, n, 2)?;
    let mut expect = Deriv::term(field, MultiIndex::unit(n, 0).with(0, 2), 0, 1);
    expect.add_term(1, MultiIndex::unit(n, 0).with(1, 1), field.reduce(-2));
    if probe != expect {
        return Err(Error::ConstructionMismatch(format!("D_12(x1^2*x2) = {probe}")));
    }

    let mut basis = s_basis_one(n, field);
    basis.extend(s_basis_two(n, field));
    if let Some(b) = basis.iter().find(|b| !b.divergence().is_zero()) {
        return Err(Error::ConstructionMismatch(format!("{b} has nonzero divergence")));
    }
    let torus = Torus::standard(n);
    let derived = derived_algebra(&divergence_free_basis(n, field)?, &torus, field, n, "ker(div)")?;
    if derived.dim() != basis.len() || basis.iter().any(|b| !derived.contains(b)) {
        return Err(Error::ConstructionMismatch(format!(
            "S({n}): explicit basis has {} elements, derived algebra has dimension {}",
            basis.len(),
            derived.dim()
        )));
    }
    CartanAlgebra::from_basis(Family::S, n, field, basis, None)
}

pub fn build_h(n: usize, p: u32) -> Result<CartanAlgebra> {
    let field = PrimeField::new(p)?;
    Family::H.validate_n(n)?;
    check_size(n, p)?;
    let tau = MultiIndex::tau(n, p);
    let basis = MultiIndex::all(n, p)
        .filter(|a| !a.is_zero() && *a != tau)
        .map(|a| d_h(&Poly::monomial(field, a, 1)))
        .collect::<Result<Vec<_>>>()?;
    CartanAlgebra::from_basis(Family::H, n, field, basis, None)
}

pub fn build_k(n: usize, p: u32) -> Result<CartanAlgebra> {
    let field = PrimeField::new(p)?;
    Family::K.validate_n(n)?;
    check_size(n, p)?;
    let torus = Torus::contact(n / 2);
    let (polys, gens): (Vec<KPoly>, Vec<Deriv>) = MultiIndex::all(n, p)
        .map(|a| {
            let f = Poly::monomial(field, a, 1);
            let d = d_k(&f)?;
            Ok((f, d))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let derived = derived_algebra(&gens, &torus, field, n, "the contact algebra")?;
    let (kpolys, basis): (Vec<KPoly>, Vec<Deriv>) = polys
        .into_iter()
        .zip(gens)
        .filter(|(_, d)| derived.contains(d))
        .unzip();
    if basis.len() != derived.dim() {
        return Err(Error::ConstructionMismatch(format!(
            "K({n}): derived algebra has dimension {} but only {} contact monomials lie in it",
            derived.dim(),
            basis.len()
        )));
    }
    CartanAlgebra::from_basis(Family::K, n, field, basis, Some(kpolys))
}

/// The images `Θ(x^i ∂)`, `i = 0..p-1`, of an embedding `W(1) → X`.
#[derive(Clone, Debug)]
pub struct Embedding {
    family: Family,
    images: Vec<Deriv>,
}

impl Embedding {
    /// The standard embedding into `alg`.
    pub fn new(alg: &CartanAlgebra) -> Result<Self> {
        let images = (0..alg.p())
            .map(|i| theta(alg.family(), alg.p(), alg.n(), i))
            .collect::<Result<Vec<_>>>()?;
        Self::from_images(alg, images)
    }

    /// An arbitrary assignment of images (used for negative controls).
    pub fn from_images(alg: &CartanAlgebra, images: Vec<Deriv>) -> Result<Self> {
        if images.len() != alg.p() as usize {
            return Err(Error::EmbeddingError(format!("expected {} images, got {}", alg.p(), images.len())));
        }
        if let Some(i) = images.iter().position(|d| !alg.contains(d)) {
            return Err(Error::EmbeddingError(format!(
                "image of x^{i}*d lies outside {}({})",
                alg.family(),
                alg.n()
            )));
        }
        Ok(Embedding {
            family: alg.family(),
            images,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn images(&self) -> &[Deriv] {
        &self.images
    }

    /// Linear extension to an element of W(1).
    pub fn apply(&self, w: &Deriv) -> Result<Deriv> {
        if w.n() != 1 {
            return Err(Error::ShapeError(format!("expected an element of W(1), got {} variables", w.n())));
        }
        let first = &self.images[0];
        if w.field() != first.field() {
            return Err(Error::ModulusMismatch(w.field().p(), first.field().p()));
        }
        let mut out = Deriv::zero(first.field(), first.n());
        for (_, m, c) in w.terms() {
            out.add_assign_unchecked(&self.images[m.get(0) as usize], c);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub family: Family,
    pub n: usize,
    pub p: u32,
    pub checks: Vec<Check>,
}

impl EmbeddingReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Independence, bracket compatibility and p-map compatibility of `emb`.
pub fn check_embedding_images(alg: &CartanAlgebra, emb: &Embedding) -> EmbeddingReport {
    let field = alg.field();
    let p = field.p();
    let w1 = |i: u32| Deriv::term(field, MultiIndex::from_exps_unchecked([i]), 0, 1);

    let mut ech = Echelon::new(field, alg.dim());
    let independent = emb
        .images()
        .iter()
        .all(|d| alg.coordinates(d).is_some_and(|c| ech.insert(c)));

    let mut bracket_fail = None;
    'outer: for a in 0..p {
        for b in 0..p {
            let lhs = emb.images()[a as usize].bracket_unchecked(&emb.images()[b as usize]);
            let rhs = emb.apply(&w1(a).bracket_unchecked(&w1(b))).expect("W(1) element");
            if lhs != rhs {
                bracket_fail = Some((a, b));
                break 'outer;
            }
        }
    }

    let pmap_fail = (0..p).find(|&a| {
        let lhs = emb.images()[a as usize].p_power();
        let rhs = emb.apply(&w1(a).p_power()).expect("W(1) element");
        lhs != rhs
    });

    let checks = vec![
        Check::new("images independent", independent, ""),
        Check::new(
            "bracket compatible",
            bracket_fail.is_none(),
            bracket_fail.map_or(String::new(), |(a, b)| format!("fails on (x^{a}*d, x^{b}*d)")),
        ),
        Check::new(
            "p-map compatible",
            pmap_fail.is_none(),
            pmap_fail.map_or(String::new(), |a| format!("fails on x^{a}*d")),
        ),
    ];
    EmbeddingReport {
        family: alg.family(),
        n: alg.n(),
        p,
        checks,
    }
}

pub fn check_embedding(family: Family, p: u32, n: usize) -> Result<EmbeddingReport> {
    let alg = CartanAlgebra::build(family, n, p)?;
    let emb = Embedding::new(&alg)?;
    Ok(check_embedding_images(&alg, &emb))
}
