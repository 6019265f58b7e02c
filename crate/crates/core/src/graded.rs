//! Spans of derivations split along a torus grading.
//!
//! Every algebra built here is spanned by elements that are homogeneous for
//! a multigrading by a torus of automorphisms (`Z^n` for W and S, `Z^(r+1)`
//! for H and K). Brackets add degrees, and each graded piece of W(n) is
//! small, so rank and membership questions reduce to tiny eliminations.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::ffla::PrimeField;
use crate::poly::MultiIndex;
use crate::witt::Deriv;

pub type Key = SmallVec<[i32; 6]>;

/// Weights of the coordinate functions under a torus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torus {
    weights: Vec<Key>,
    rank: usize,
}

impl Torus {
    /// `x_i` has weight `e_i`.
    pub fn standard(n: usize) -> Self {
        let weights = (0..n)
            .map(|i| (0..n).map(|j| i32::from(i == j)).collect())
            .collect();
        Torus { weights, rank: n }
    }

    /// Torus preserving the Hamiltonian form in 2r variables.
    pub fn hamiltonian(r: usize) -> Self {
        let c = r;
        let weight = |i: usize| -> Key {
            let mut w: Key = SmallVec::from_elem(0, r + 1);
            if i < r {
                w[i] = 1;
            } else {
                w[i - r] = -1;
                w[c] = 1;
            }
            w
        };
        Torus {
            weights: (0..2 * r).map(weight).collect(),
            rank: r + 1,
        }
    }

    /// Torus scaling the contact form in 2r+1 variables.
    pub fn contact(r: usize) -> Self {
        let mut t = Self::hamiltonian(r);
        let mut last: Key = SmallVec::from_elem(0, r + 1);
        last[r] = 1;
        t.weights.push(last);
        t
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn monomial_weight(&self, alpha: &MultiIndex) -> Key {
        let mut k: Key = SmallVec::from_elem(0, self.rank);
        for (i, w) in self.weights.iter().enumerate() {
            let e = alpha.get(i) as i32;
            if e != 0 {
                for (slot, &x) in k.iter_mut().zip(w) {
                    *slot += e * x;
                }
            }
        }
        k
    }

    /// Weight of `x^α ∂_dir`.
    pub fn term_key(&self, dir: usize, alpha: &MultiIndex) -> Key {
        let mut k = self.monomial_weight(alpha);
        for (slot, &x) in k.iter_mut().zip(&self.weights[dir]) {
            *slot -= x;
        }
        k
    }

    /// Weight of a homogeneous derivation; `None` for zero.
    pub fn key(&self, d: &Deriv) -> Result<Option<Key>> {
        let mut key: Option<Key> = None;
        for (dir, m, _) in d.terms() {
            let k = self.term_key(dir, m);
            match &key {
                None => key = Some(k),
                Some(prev) if *prev != k => {
                    return Err(Error::ArgumentError(format!("{d} is not homogeneous")));
                }
                _ => {}
            }
        }
        Ok(key)
    }

    pub fn add_keys(a: &Key, b: &Key) -> Key {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    /// Homogeneous parts of `d`.
    pub fn split(&self, d: &Deriv) -> HashMap<Key, Vec<(usize, u32)>> {
        let p = d.field().p();
        let mut parts: HashMap<Key, Vec<(usize, u32)>> = HashMap::new();
        for (dir, m, c) in d.terms() {
            parts
                .entry(self.term_key(dir, m))
                .or_default()
                .push((Deriv::ambient_index(dir, m, p), c));
        }
        parts
    }
}

#[derive(Clone, Debug, Default)]
struct Row {
    pivot: usize,
    vec: Vec<u32>,
    combo: Vec<u32>,
}

#[derive(Clone, Debug, Default)]
struct Component {
    cols: Vec<usize>,
    col_pos: HashMap<usize, usize>,
    rows: Vec<Row>,
    members: Vec<usize>,
}

impl Component {
    fn local(&self, terms: &[(usize, u32)]) -> Option<Vec<u32>> {
        let mut v = vec![0; self.cols.len()];
        for &(idx, c) in terms {
            v[*self.col_pos.get(&idx)?] = c;
        }
        Some(v)
    }

    fn reduce(&self, f: PrimeField, v: &mut [u32], mut coords: Option<&mut Vec<u32>>) {
        for row in &self.rows {
            let c = v[row.pivot];
            if c == 0 {
                continue;
            }
            let nc = f.neg(c);
            for (slot, &b) in v.iter_mut().zip(&row.vec) {
                if b != 0 {
                    *slot = f.add(*slot, f.mul(nc, b));
                }
            }
            if let Some(acc) = coords.as_deref_mut() {
                for (slot, &b) in acc.iter_mut().zip(&row.combo) {
                    if b != 0 {
                        *slot = f.add(*slot, f.mul(c, b));
                    }
                }
            }
        }
    }
}

/// A span of derivations maintained as echelon bases per torus weight.
///
/// Inserted generators must be homogeneous. Accepted (independent)
/// generators are numbered consecutively; [`GradedSpan::coordinates`]
/// expresses any element of the span in those generators.
#[derive(Clone, Debug)]
pub struct GradedSpan {
    torus: Torus,
    field: PrimeField,
    comps: HashMap<Key, Component>,
    generators: Vec<Key>,
}

impl GradedSpan {
    pub fn new(torus: Torus, field: PrimeField) -> Self {
        GradedSpan {
            torus,
            field,
            comps: HashMap::new(),
            generators: Vec::new(),
        }
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn component_dim(&self, key: &Key) -> usize {
        self.comps.get(key).map_or(0, |c| c.rows.len())
    }

    /// Inserts a homogeneous generator; returns its number when it is
    /// independent of everything inserted so far.
    pub fn insert(&mut self, d: &Deriv) -> Result<Option<usize>> {
        let Some(key) = self.torus.key(d)? else {
            return Ok(None);
        };
        let p = self.field.p();
        let terms: Vec<(usize, u32)> = d
            .terms()
            .map(|(dir, m, c)| (Deriv::ambient_index(dir, m, p), c))
            .collect();
        Ok(self.insert_terms(key, &terms))
    }

    fn insert_terms(&mut self, key: Key, terms: &[(usize, u32)]) -> Option<usize> {
        let f = self.field;
        let id = self.generators.len();
        let comp = self.comps.entry(key.clone()).or_default();
        for &(idx, _) in terms {
            if !comp.col_pos.contains_key(&idx) {
                comp.col_pos.insert(idx, comp.cols.len());
                comp.cols.push(idx);
            }
        }
        let mut v = comp.local(terms).expect("columns registered");
        let local_member = comp.members.len();
        let mut combo = vec![0; local_member + 1];
        combo[local_member] = 1;
        // combo tracks g_new - Σ c_j R_j
        let mut coeffs = vec![0; local_member + 1];
        comp.reduce(f, &mut v, Some(&mut coeffs));
        let pivot = v.iter().position(|&x| x != 0)?;
        for (slot, &c) in combo.iter_mut().zip(&coeffs) {
            *slot = f.sub(*slot, c);
        }
        let inv = f.inv(v[pivot]);
        v.iter_mut().for_each(|x| *x = f.mul(*x, inv));
        combo.iter_mut().for_each(|x| *x = f.mul(*x, inv));
        comp.rows.push(Row {
            pivot,
            vec: v,
            combo,
        });
        comp.members.push(id);
        self.generators.push(key);
        Some(id)
    }

    /// Whether `d` (homogeneous or not) lies in the span.
    pub fn contains(&self, d: &Deriv) -> bool {
        self.coordinates_sparse(d).is_some()
    }

    /// Coordinates of `d` as `(generator number, coefficient)` pairs.
    pub fn coordinates_sparse(&self, d: &Deriv) -> Option<Vec<(usize, u32)>> {
        let f = self.field;
        let mut out = Vec::new();
        for (key, terms) in self.torus.split(d) {
            let comp = self.comps.get(&key)?;
            let mut v = comp.local(&terms)?;
            let mut acc = vec![0; comp.members.len()];
            comp.reduce(f, &mut v, Some(&mut acc));
            if v.iter().any(|&x| x != 0) {
                return None;
            }
            out.extend(
                acc.into_iter()
                    .enumerate()
                    .filter(|(_, c)| *c != 0)
                    .map(|(i, c)| (comp.members[i], c)),
            );
        }
        out.sort_unstable();
        Some(out)
    }

    /// Dense coordinates in the accepted generators.
    pub fn coordinates(&self, d: &Deriv) -> Option<Vec<u32>> {
        let sparse = self.coordinates_sparse(d)?;
        let mut v = vec![0; self.dim()];
        for (i, c) in sparse {
            v[i] = c;
        }
        Some(v)
    }

    /// An echelon basis of the span, one homogeneous derivation per row.
    pub fn echelon_basis(&self, n: usize) -> Vec<(Key, Deriv)> {
        let p = self.field.p();
        let mut keys: Vec<&Key> = self.comps.keys().collect();
        keys.sort();
        let mut out = Vec::with_capacity(self.dim());
        for key in keys {
            let comp = &self.comps[key];
            for row in &comp.rows {
                let mut d = Deriv::zero(self.field, n);
                for (j, &c) in row.vec.iter().enumerate() {
                    if c != 0 {
                        let (dir, m) = Deriv::ambient_term(comp.cols[j], n, p);
                        d.add_term(dir, m, c);
                    }
                }
                out.push((key.clone(), d));
            }
        }
        out
    }
}

/// Span of all brackets `[g_a, g_b]` of homogeneous generators.
///
/// `ceiling` gives, per weight, the dimension of a span known to contain
/// every bracket (the ambient subalgebra); pairs landing in a weight whose
/// piece has already reached the ceiling are skipped.
pub fn derived_span(
    gens: &[Deriv],
    torus: &Torus,
    field: PrimeField,
    ceiling: impl Fn(&Key) -> Option<usize>,
) -> Result<GradedSpan> {
    let keys: Vec<Option<Key>> = gens.iter().map(|g| torus.key(g)).collect::<Result<_>>()?;
    let mut span = GradedSpan::new(torus.clone(), field);
    for a in 0..gens.len() {
        let Some(ka) = &keys[a] else { continue };
        for b in a + 1..gens.len() {
            let Some(kb) = &keys[b] else { continue };
            let target = Torus::add_keys(ka, kb);
            if let Some(cap) = ceiling(&target) {
                if span.component_dim(&target) >= cap {
                    continue;
                }
            }
            let c = gens[a].bracket_unchecked(&gens[b]);
            if !c.is_zero() {
                span.insert(&c)?;
            }
        }
    }
    Ok(span)
}
