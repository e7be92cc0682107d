//! Graph of partial multimorphisms on two-element supports.
//!
//! Vertices are commutative idempotent partial operation pairs on a support `{a, b}`. Two
//! vertices are adjacent when some expressible binary cost function violates the
//! multimorphism inequality across them. Edges are certified by explicit gadgets found in a
//! bounded search, then closed under derivation rules. The result is used to look for loop
//! witnesses of hardness and to extract candidate multimorphisms, which are always verified
//! directly against the language.

mod closure;
mod gadgets;
mod output;
mod witness;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::lang::{Domain, Elem, Instance, Language};
use crate::oracle::Oracle;
use crate::rational::Rational;

pub use closure::{close_edges, replay_steps, Closure, EdgeOrigin, EdgeRecord};
pub use gadgets::{certify_sigma, expressible_unary_tables, search_edges, EdgeSearch};
pub use output::{to_dot, to_json};
pub use witness::{
    extract_candidates, find_hardness_witness, is_independent, is_normal_form,
    normalize_edge_function, pair_vertices, Candidate, CandidateKind, CandidateSource, Correction,
    HardnessWitness, NormalizedFunction, Separators,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("no unary separator for elements {0} and {1}; the language is not a core")]
    SeparatorUnavailable(Elem, Elem),
    #[error("edge is not between conservative vertices")]
    NotConservative,
    #[error("certificate does not satisfy the edge inequality")]
    BadCertificate,
}

/// Commutative idempotent partial pair on `{a, b}` (`a ≤ b`), given by `f(a,b)` and `g(a,b)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Vertex {
    pub a: Elem,
    pub b: Elem,
    pub f: Elem,
    pub g: Elem,
}

impl Vertex {
    pub fn singleton(a: Elem) -> Self {
        Vertex {
            a,
            b: a,
            f: a,
            g: a,
        }
    }

    /// `⟨xy⟩`: `f = x`, `g = y` on `{x, y}`.
    pub fn conservative(x: Elem, y: Elem) -> Self {
        assert_ne!(x, y, "conservative vertices need two elements");
        Vertex {
            a: x.min(y),
            b: x.max(y),
            f: x,
            g: y,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.a == self.b
    }

    pub fn is_conservative(&self) -> bool {
        !self.is_singleton()
            && ((self.f == self.a && self.g == self.b) || (self.f == self.b && self.g == self.a))
    }

    /// The vertex with `f` and `g` exchanged.
    pub fn bar(&self) -> Self {
        Vertex {
            f: self.g,
            g: self.f,
            ..*self
        }
    }

    pub fn support(&self) -> (Elem, Elem) {
        (self.a, self.b)
    }

    pub fn label(&self, domain: &Domain) -> String {
        if self.is_singleton() {
            domain.label(self.a).to_string()
        } else if self.is_conservative() {
            format!("<{}{}>", domain.label(self.f), domain.label(self.g))
        } else {
            format!(
                "{{{},{}}}->({},{})",
                domain.label(self.a),
                domain.label(self.b),
                domain.label(self.f),
                domain.label(self.g)
            )
        }
    }
}

/// All vertices: per two-element support, both conservative pairs and every pair of images
/// outside the support; plus one vertex per singleton. Sorted.
pub fn enumerate_vertices(domain: &Domain) -> Vec<Vertex> {
    let d = domain.size();
    let mut out = Vec::new();
    for a in 0..d {
        out.push(Vertex::singleton(a));
        for b in a + 1..d {
            out.push(Vertex::conservative(a, b));
            out.push(Vertex::conservative(b, a));
            for f in (0..d).filter(|&e| e != a && e != b) {
                for g in (0..d).filter(|&e| e != a && e != b) {
                    out.push(Vertex { a, b, f, g });
                }
            }
        }
    }
    out.sort();
    out
}

/// Whether a binary table (row-major, first argument from `u`'s support) violates the
/// multimorphism inequality across `u` and `v`.
pub fn edge_inequality<T>(table: &[T], d: usize, u: &Vertex, v: &Vertex) -> bool
where
    T: Clone + PartialOrd + std::ops::Add<Output = T>,
{
    let h = |x: Elem, y: Elem| table[x * d + y].clone();
    let straight = h(u.a, v.a) + h(u.b, v.b);
    let crossed = h(u.a, v.b) + h(u.b, v.a);
    let lhs = if straight < crossed {
        straight
    } else {
        crossed
    };
    lhs < h(u.f, v.f) + h(u.g, v.g)
}

/// Bounds for the gadget search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetBudget {
    /// Auxiliary (minimized) variables per gadget.
    pub max_aux: usize,
    pub weights: Vec<Rational>,
    pub max_terms: usize,
    /// Gadgets with auxiliary variables examined per search.
    pub max_gadgets: usize,
}

impl Default for GadgetBudget {
    fn default() -> Self {
        GadgetBudget {
            max_aux: 2,
            weights: vec![
                Rational::one(),
                Rational::from_integer(2),
                Rational::new(1, 2),
            ],
            max_terms: 6,
            max_gadgets: 20_000,
        }
    }
}

impl GadgetBudget {
    pub fn with_aux(max_aux: usize) -> Self {
        GadgetBudget {
            max_aux,
            ..GadgetBudget::default()
        }
    }
}

/// Instance with designated variables whose optimal values define a table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gadget {
    pub instance: Instance,
    pub vars: Vec<usize>,
}

impl Gadget {
    /// Re-expresses the table with the exhaustive oracle.
    pub fn express(&self, oracle: &Oracle) -> Option<Vec<Rational>> {
        oracle.express(&self.instance, &self.vars).ok()?.values()
    }
}

/// A gadget-certified edge: the gadget's expressed table `h` satisfies the edge inequality with
/// `u`'s support on the first argument and `v`'s on the second.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeCertificate {
    pub u: Vertex,
    pub v: Vertex,
    pub gadget: Gadget,
    pub table: Vec<Rational>,
}

impl EdgeCertificate {
    pub fn replays(&self, oracle: &Oracle) -> bool {
        let d = self.gadget.instance.domain().size();
        self.gadget.express(oracle).as_deref() == Some(&self.table[..])
            && edge_inequality(&self.table, d, &self.u, &self.v)
    }
}

/// A two-element subset with an instance whose optimal solutions project onto exactly it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaCertificate {
    pub pair: (Elem, Elem),
    pub gadget: Gadget,
}

impl SigmaCertificate {
    pub fn replays(&self, oracle: &Oracle) -> bool {
        match oracle.project_optsol(&self.gadget.instance, &self.gadget.vars) {
            Ok(p) => {
                let tuples: Vec<Vec<Elem>> = p.tuples.into_iter().collect();
                tuples == vec![vec![self.pair.0], vec![self.pair.1]]
            }
            Err(_) => false,
        }
    }
}

/// Membership of two-element subsets in the definable set: certified by gadgets, or inferred
/// for four-element cores from a missing subset (reported only; never used by the rules).
#[derive(Clone, Debug, Default)]
pub struct SigmaSets {
    pub domain_size: usize,
    pub certified: BTreeMap<(Elem, Elem), SigmaCertificate>,
    /// Inferred pair with the uncertified subset `{b, c}` it was inferred from.
    pub inferred: BTreeMap<(Elem, Elem), (Elem, Elem)>,
    pub exhausted: bool,
}

impl SigmaSets {
    pub fn is_certified(&self, x: Elem, y: Elem) -> bool {
        self.certified.contains_key(&(x.min(y), x.max(y)))
    }

    pub fn is_certified_vertex(&self, v: &Vertex) -> bool {
        v.is_conservative() && self.is_certified(v.a, v.b)
    }
}

/// All two-element subsets.
pub fn sigma(d: usize) -> Vec<(Elem, Elem)> {
    (0..d)
        .flat_map(|x| (x + 1..d).map(move |y| (x, y)))
        .collect()
}

/// Two-element subsets other than `{b, c}`.
pub fn sigma_ad(d: usize, b: Elem, c: Elem) -> Vec<(Elem, Elem)> {
    let bc = (b.min(c), b.max(c));
    sigma(d).into_iter().filter(|&p| p != bc).collect()
}

/// Two-element subsets other than `{b, c}` and its complement (four-element domains).
pub fn sigma_0(d: usize, b: Elem, c: Elem) -> Vec<(Elem, Elem)> {
    let bc = (b.min(c), b.max(c));
    let rest: Vec<Elem> = (0..d).filter(|&e| e != b && e != c).collect();
    let ad = if rest.len() == 2 {
        Some((rest[0], rest[1]))
    } else {
        None
    };
    sigma(d)
        .into_iter()
        .filter(|&p| p != bc && Some(p) != ad)
        .collect()
}

/// Everything computed for one language.
#[derive(Clone, Debug)]
pub struct Exploration {
    pub language: Language,
    pub vertices: Vec<Vertex>,
    pub sigma: SigmaSets,
    pub search: EdgeSearch,
    pub closure: Closure,
    pub witness: Option<HardnessWitness>,
    pub candidates: Vec<Candidate>,
}

/// Runs certification, edge search, closure, witness search and candidate extraction.
pub fn explore(language: &Language, budget: &GadgetBudget) -> Exploration {
    let oracle = Oracle::default();
    let vertices = enumerate_vertices(language.domain());
    let sigma = certify_sigma(language, budget, &oracle);
    let search = search_edges(language, budget, &oracle);
    let closure = close_edges(language, &vertices, &search, &sigma);
    let witness = find_hardness_witness(language, &closure, &search, &sigma);
    let candidates = extract_candidates(language, &vertices, &closure);
    Exploration {
        language: language.clone(),
        vertices,
        sigma,
        search,
        closure,
        witness,
        candidates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts() {
        assert_eq!(enumerate_vertices(&Domain::letters(4)).len(), 40);
        let two = enumerate_vertices(&Domain::letters(2));
        assert_eq!(two.len(), 4);
        assert_eq!(two.iter().filter(|v| v.is_conservative()).count(), 2);
        assert_eq!(two.iter().filter(|v| v.is_singleton()).count(), 2);
    }

    #[test]
    fn bar_is_an_involution_on_the_vertex_set() {
        let vs = enumerate_vertices(&Domain::letters(4));
        for v in &vs {
            assert_eq!(v.bar().bar(), *v);
            assert!(vs.contains(&v.bar()));
        }
    }

    #[test]
    fn vertex_conditions_hold() {
        for v in enumerate_vertices(&Domain::letters(4)) {
            let s = [v.a, v.b];
            let conservative = (v.f == v.a && v.g == v.b) || (v.f == v.b && v.g == v.a);
            let disjoint = !s.contains(&v.f) && !s.contains(&v.g);
            assert!(v.is_singleton() || conservative || disjoint);
        }
    }

    #[test]
    fn sigma_families() {
        assert_eq!(sigma(4).len(), 6);
        assert_eq!(sigma_ad(4, 1, 2).len(), 5);
        assert_eq!(sigma_0(4, 1, 2), vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn singleton_and_conservative_vertices_are_never_adjacent() {
        let d = 3;
        let tables: Vec<Vec<i64>> = (0..200u64)
            .map(|s| (0..9).map(|i| ((s * 31 + i * 17) % 5) as i64).collect())
            .collect();
        for t in tables {
            for x in 0..d {
                for (p, q) in [(0, 1), (1, 2), (0, 2)] {
                    let u = Vertex::singleton(x);
                    let v = Vertex::conservative(p, q);
                    assert!(!edge_inequality(&t, d, &u, &v));
                }
            }
        }
    }
}
