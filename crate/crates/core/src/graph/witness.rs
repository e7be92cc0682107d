//! Normal forms of edge tables, loop witnesses of hardness, and multimorphism candidates read
//! off independent vertex sets.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::closure::{replay_steps, Closure, EdgeRecord};
use super::{EdgeCertificate, EdgeSearch, Gadget, GraphError, SigmaCertificate, SigmaSets, Vertex};
use crate::endo::{unary_separator, UnarySeparator};
use crate::lang::{Elem, Instance, Language};
use crate::morphisms::{
    enumerate_chains, enumerate_one_defect, is_multimorphism_structured, BinaryOpPair, ChainOrder,
    OneDefectChain, Structured, Violation,
};
use crate::oracle::Oracle;
use crate::rational::Rational;

type PairSet = BTreeSet<(Elem, Elem)>;

/// Unary separators `s_ab` (`s(a) = 0`, `s(b) = 1`) for every ordered pair, where they exist.
#[derive(Clone, Debug)]
pub struct Separators {
    by_pair: BTreeMap<(Elem, Elem), UnarySeparator>,
}

impl Separators {
    pub fn new(language: &Language) -> Self {
        let d = language.domain().size();
        let mut by_pair = BTreeMap::new();
        for a in 0..d {
            for b in (0..d).filter(|&b| b != a) {
                if let Some(s) = unary_separator(language, a, b) {
                    by_pair.insert((a, b), s);
                }
            }
        }
        Separators { by_pair }
    }

    pub fn get(&self, a: Elem, b: Elem) -> Option<&UnarySeparator> {
        self.by_pair.get(&(a, b))
    }

    fn value(&self, a: Elem, b: Elem, x: Elem) -> Option<Rational> {
        self.get(a, b)?.table.get(&[x]).cloned()
    }
}

/// A scaled separator added on one argument of a binary table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Correction {
    /// 0 for the first argument, 1 for the second.
    pub argument: usize,
    pub separator: (Elem, Elem),
    pub weight: Rational,
}

/// A table in normal form for a conservative edge `(⟨a1 b1⟩, ⟨a2 b2⟩)`:
/// `h(a1,b2) = h(b1,a2) < h(a1,a2) = h(b1,b2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedFunction {
    pub u: Vertex,
    pub v: Vertex,
    pub base: Vec<Rational>,
    pub corrections: Vec<Correction>,
    pub table: Vec<Rational>,
    /// Instance expressing `table`, when the base table came with one.
    pub gadget: Option<Gadget>,
}

/// The normal-form predicate with `a_i = f_i`, `b_i = g_i` of the two vertices.
pub fn is_normal_form(table: &[Rational], d: usize, u: &Vertex, v: &Vertex) -> bool {
    let h = |x: Elem, y: Elem| &table[x * d + y];
    h(u.f, v.g) == h(u.g, v.f) && h(u.f, v.g) < h(u.f, v.f) && h(u.f, v.f) == h(u.g, v.g)
}

/// Adds `weight * s(argument)` corrections to a table.
fn apply(
    seps: &Separators,
    d: usize,
    base: &[Rational],
    corrections: &[Correction],
) -> Option<Vec<Rational>> {
    let mut table = base.to_vec();
    for c in corrections {
        for x in 0..d {
            for y in 0..d {
                let e = if c.argument == 0 { x } else { y };
                let s = seps.value(c.separator.0, c.separator.1, e)?;
                table[x * d + y] += &c.weight * &s;
            }
        }
    }
    Some(table)
}

/// Normal form by separator corrections: first balance the two crossed entries on the first
/// argument, then split half the difference of the straight entries over both arguments.
pub(crate) fn normalize_table(
    seps: &Separators,
    d: usize,
    u: &Vertex,
    v: &Vertex,
    table: &[Rational],
) -> Result<NormalizedFunction, GraphError> {
    if !u.is_conservative() || !v.is_conservative() {
        return Err(GraphError::NotConservative);
    }
    let (a1, b1, a2, b2) = (u.f, u.g, v.f, v.g);
    let h = |t: &[Rational], x: Elem, y: Elem| t[x * d + y].clone();
    if !(h(table, a1, b2) + h(table, b1, a2) < h(table, a1, a2) + h(table, b1, b2)) {
        return Err(GraphError::BadCertificate);
    }
    let missing = |a: Elem, b: Elem| GraphError::SeparatorUnavailable(a, b);
    let mut corrections = Vec::new();
    let delta = h(table, a1, b2) - h(table, b1, a2);
    if delta.is_positive() {
        seps.get(a1, b1).ok_or_else(|| missing(a1, b1))?;
        corrections.push(Correction {
            argument: 0,
            separator: (a1, b1),
            weight: delta,
        });
    } else if delta.is_negative() {
        seps.get(b1, a1).ok_or_else(|| missing(b1, a1))?;
        corrections.push(Correction {
            argument: 0,
            separator: (b1, a1),
            weight: -delta,
        });
    }
    let step = apply(seps, d, table, &corrections).expect("separators checked");
    let gamma = (h(&step, a1, a2) - h(&step, b1, b2)) / Rational::from_integer(2);
    let (first, second, weight) = if gamma.is_positive() {
        ((a1, b1), (a2, b2), gamma)
    } else {
        ((b1, a1), (b2, a2), -gamma)
    };
    if !weight.is_zero() {
        for (argument, sep) in [(0, first), (1, second)] {
            seps.get(sep.0, sep.1)
                .ok_or_else(|| missing(sep.0, sep.1))?;
            corrections.push(Correction {
                argument,
                separator: sep,
                weight: weight.clone(),
            });
        }
    }
    let out = apply(seps, d, table, &corrections).expect("separators checked");
    debug_assert!(is_normal_form(&out, d, u, v));
    Ok(NormalizedFunction {
        u: *u,
        v: *v,
        base: table.to_vec(),
        corrections,
        table: out,
        gadget: None,
    })
}

/// Copies `source` into `target` with all weights scaled, binding the listed source variables
/// to target variables and adding fresh ones for the rest.
fn embed(target: &mut Instance, source: &Instance, weight: &Rational, bind: &[(usize, usize)]) {
    let map: Vec<usize> = (0..source.num_vars())
        .map(|v| match bind.iter().find(|b| b.0 == v) {
            Some(&(_, t)) => t,
            None => target.add_fresh_variable(&source.variables()[v]),
        })
        .collect();
    for t in source.terms() {
        target
            .add_term(
                &t.weight * weight,
                t.function.clone(),
                t.scope.iter().map(|&v| map[v]).collect(),
            )
            .expect("embedded term");
    }
    for c in source.constraints() {
        target
            .add_constraint(
                c.relation.clone(),
                c.scope.iter().map(|&v| map[v]).collect(),
            )
            .expect("embedded constraint");
    }
}

/// Normal form of a certified conservative edge, with an instance expressing it: the
/// certificate's gadget plus the scaled separator gadgets on the designated variables.
pub fn normalize_edge_function(
    language: &Language,
    certificate: &EdgeCertificate,
) -> Result<NormalizedFunction, GraphError> {
    let d = language.domain().size();
    let seps = Separators::new(language);
    let mut n = normalize_table(&seps, d, &certificate.u, &certificate.v, &certificate.table)?;
    let mut instance = certificate.gadget.instance.clone();
    for c in &n.corrections {
        let sep = seps.get(c.separator.0, c.separator.1).expect("used above");
        embed(
            &mut instance,
            &sep.gadget,
            &c.weight,
            &[(sep.var, certificate.gadget.vars[c.argument])],
        );
    }
    n.gadget = Some(Gadget {
        instance,
        vars: certificate.gadget.vars.clone(),
    });
    Ok(n)
}

/// A loop on `⟨xy⟩` whose support is certified definable, with its derivation, the
/// normalized function `h(x,y) = h(y,x) < h(x,x) = h(y,y)`, and the definability gadgets.
/// Hardness follows from the NP-hardness of minimizing such a function over a definable
/// two-element subset (a Max-Cut-type problem).
#[derive(Clone, Debug)]
pub struct HardnessWitness {
    pub vertex: Vertex,
    /// Derivation steps; the last one is the loop.
    pub steps: Vec<EdgeRecord>,
    pub certificates: Vec<EdgeCertificate>,
    /// Certificate for the loop's support followed by those of composition middles.
    pub sigma: Vec<SigmaCertificate>,
    pub normalized: NormalizedFunction,
    pub note: String,
}

impl HardnessWitness {
    /// Replays certificates, derivation steps, definability gadgets and the normal form.
    pub fn replay(&self, language: &Language, oracle: &Oracle) -> bool {
        let d = language.domain().size();
        let Some(last) = self.steps.last() else {
            return false;
        };
        let definable =
            |a: Elem, b: Elem| self.sigma.iter().any(|s| s.pair == (a.min(b), a.max(b)));
        let seps = Separators::new(language);
        last.u == self.vertex
            && last.v == self.vertex
            && self
                .sigma
                .first()
                .is_some_and(|s| s.pair == (self.vertex.a, self.vertex.b))
            && self.sigma.iter().all(|s| s.replays(oracle))
            && replay_steps(
                language,
                &self.steps,
                &self.certificates,
                &definable,
                oracle,
            )
            && normalize_table(&seps, d, &self.vertex, &self.vertex, &last.table).is_ok_and(|n| {
                n.table == self.normalized.table
                    && is_normal_form(&n.table, d, &self.vertex, &self.vertex)
            })
    }
}

/// First loop (in derivation order) on a conservative vertex with certified definable support.
pub fn find_hardness_witness(
    language: &Language,
    closure: &Closure,
    search: &EdgeSearch,
    sigma: &SigmaSets,
) -> Option<HardnessWitness> {
    let d = language.domain().size();
    let seps = Separators::new(language);
    for (idx, e) in closure.edges.iter().enumerate() {
        if !e.is_loop() || !sigma.is_certified_vertex(&e.u) {
            continue;
        }
        let Ok(mut normalized) = normalize_table(&seps, d, &e.u, &e.v, &e.table) else {
            continue;
        };
        let (steps, certificates) = closure.extract(idx, search);
        if let (1, Some(cert)) = (steps.len(), certificates.first()) {
            if let Ok(n) = normalize_edge_function(language, cert) {
                normalized = n;
            }
        }
        let mut pairs = vec![(e.u.a, e.u.b)];
        for s in &steps {
            if let super::EdgeOrigin::Compose { middle, .. } = s.origin {
                if !pairs.contains(&(middle.a, middle.b)) {
                    pairs.push((middle.a, middle.b));
                }
            }
        }
        let certs: Vec<SigmaCertificate> =
            pairs.iter().map(|p| sigma.certified[p].clone()).collect();
        let dom = language.domain();
        let note = format!(
            "h({x},{y}) = h({y},{x}) < h({x},{x}) = h({y},{y}) with {{{x},{y}}} definable: \
             minimizing h over that subset is Max-Cut, so the problem is NP-hard",
            x = dom.label(e.u.a),
            y = dom.label(e.u.b)
        );
        return Some(HardnessWitness {
            vertex: e.u,
            steps,
            certificates,
            sigma: certs,
            normalized,
            note,
        });
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CandidateKind {
    Chain(ChainOrder),
    OneDefect(OneDefectChain),
}

/// How a candidate was proposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    /// From a 2-colouring of the conservative subgraph and an extension of its order.
    Colouring,
    /// Any other structure whose vertex set is independent in the known graph.
    IndependentSet,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub kind: CandidateKind,
    pub source: CandidateSource,
    pub pair: BinaryOpPair,
    /// Result of the direct multimorphism check against the language.
    pub violation: Option<Violation>,
}

impl Candidate {
    pub fn verified(&self) -> bool {
        self.violation.is_none()
    }

    pub fn is_one_defect(&self) -> bool {
        matches!(self.kind, CandidateKind::OneDefect(_))
    }
}

/// Vertices `(f(x,y), g(x,y))` on every support of a commutative idempotent pair.
pub fn pair_vertices(pair: &BinaryOpPair) -> Vec<Vertex> {
    let d = pair.size();
    let mut out = Vec::new();
    for a in 0..d {
        for b in a..d {
            out.push(Vertex {
                a,
                b,
                f: pair.f.get(a, b),
                g: pair.g.get(a, b),
            });
        }
    }
    out
}

/// Whether no two of the vertices (or one with itself) are joined.
pub fn is_independent(closure: &Closure, vertices: &[Vertex]) -> bool {
    vertices
        .iter()
        .enumerate()
        .all(|(i, u)| vertices[i..].iter().all(|v| !closure.contains(u, v)))
}

/// Colour classes per connected component of the non-isolated part of the subgraph induced by
/// `vertices`; `None` if some component is not bipartite.
fn colourings(closure: &Closure, vertices: &[Vertex]) -> Option<Vec<Vec<(Vertex, bool)>>> {
    let adjacent = |u: &Vertex| -> Vec<Vertex> {
        vertices
            .iter()
            .copied()
            .filter(|v| closure.contains(u, v))
            .collect()
    };
    let mut colour: BTreeMap<Vertex, bool> = BTreeMap::new();
    let mut components = Vec::new();
    for &start in vertices {
        if colour.contains_key(&start) || adjacent(&start).is_empty() {
            continue;
        }
        let mut comp = vec![(start, false)];
        colour.insert(start, false);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in adjacent(&u) {
                match colour.get(&v) {
                    Some(&c) if c == colour[&u] => return None,
                    Some(_) => {}
                    None => {
                        let c = !colour[&u];
                        colour.insert(v, c);
                        comp.push((v, c));
                        queue.push_back(v);
                    }
                }
            }
        }
        components.push(comp);
    }
    Some(components)
}

/// Strict orders `x < y` read off every choice of colour class per component.
fn coloured_relations(closure: &Closure, vertices: &[Vertex]) -> Vec<BTreeSet<(Elem, Elem)>> {
    let Some(components) = colourings(closure, vertices) else {
        return vec![];
    };
    if components.len() > 16 {
        return vec![];
    }
    (0..1u32 << components.len())
        .map(|mask| {
            components
                .iter()
                .enumerate()
                .flat_map(|(i, comp)| {
                    let pick = mask >> i & 1 == 1;
                    comp.iter()
                        .filter(move |(_, c)| *c == pick)
                        .map(|(v, _)| (v.f, v.g))
                })
                .collect()
        })
        .collect()
}

/// Extracts chain and 1-defect candidates and verifies each against the language.
///
/// Colouring candidates: 2-colour the non-isolated conservative subgraph, take one class `I`
/// per component, read the relation `x < y` iff `⟨xy⟩ ∈ I`, and keep the total orders (for
/// 1-defect chains: the orders leaving only the defect pair incomparable, using the subgraph
/// without the defect vertices) that extend it and whose vertex sets are independent. Every
/// other structure with an independent vertex set is added afterwards.
pub fn extract_candidates(
    language: &Language,
    vertices: &[Vertex],
    closure: &Closure,
) -> Vec<Candidate> {
    let domain = language.domain();
    let conservative: Vec<Vertex> = vertices
        .iter()
        .copied()
        .filter(|v| v.is_conservative())
        .collect();
    let mut out: Vec<Candidate> = Vec::new();

    let chains = enumerate_chains(domain);
    let relations = coloured_relations(closure, &conservative);
    let mut chain_sources = BTreeMap::new();
    for (i, chain) in chains.iter().enumerate() {
        if !is_independent(closure, &pair_vertices(chain.pair())) {
            continue;
        }
        let extends = relations
            .iter()
            .any(|r| r.iter().all(|&(x, y)| chain.rank(x) < chain.rank(y)));
        chain_sources.insert(
            i,
            if extends {
                CandidateSource::Colouring
            } else {
                CandidateSource::IndependentSet
            },
        );
    }

    let defects = enumerate_one_defect(domain).unwrap_or_default();
    let mut defect_sources = BTreeMap::new();
    let mut by_defect: BTreeMap<(Elem, Elem), Vec<PairSet>> = BTreeMap::new();
    for (i, odc) in defects.iter().enumerate() {
        if !is_independent(closure, &pair_vertices(odc.pair())) {
            continue;
        }
        let (b, c) = odc.defect();
        let relations = by_defect.entry((b, c)).or_insert_with(|| {
            let st_ad: Vec<Vertex> = conservative
                .iter()
                .copied()
                .filter(|v| (v.a, v.b) != (b.min(c), b.max(c)))
                .collect();
            coloured_relations(closure, &st_ad)
        });
        let extends = relations.iter().any(|r| {
            r.iter()
                .all(|&(x, y)| odc.compare(x, y) == Some(std::cmp::Ordering::Less))
        });
        defect_sources.insert(
            i,
            if extends {
                CandidateSource::Colouring
            } else {
                CandidateSource::IndependentSet
            },
        );
    }

    for source in [CandidateSource::Colouring, CandidateSource::IndependentSet] {
        for (&i, _) in chain_sources.iter().filter(|(_, s)| **s == source) {
            let chain = &chains[i];
            out.push(Candidate {
                kind: CandidateKind::Chain(chain.clone()),
                source,
                pair: chain.pair().clone(),
                violation: is_multimorphism_structured(Structured::Chain(chain), language),
            });
        }
        for (&i, _) in defect_sources.iter().filter(|(_, s)| **s == source) {
            let odc = &defects[i];
            out.push(Candidate {
                kind: CandidateKind::OneDefect(odc.clone()),
                source,
                pair: odc.pair().clone(),
                violation: is_multimorphism_structured(Structured::OneDefect(odc), language),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_pair_1, gamma_ex, h_eq};
    use crate::graph::{
        close_edges, enumerate_vertices, explore, search_edges, GadgetBudget, SigmaSets,
    };
    use crate::lang::{CostFunction, Domain};

    #[test]
    fn h_eq_loop_is_already_normal() {
        let lang = h_eq();
        let oracle = Oracle::default();
        let search = search_edges(&lang, &GadgetBudget::default(), &oracle);
        let ab = Vertex::conservative(0, 1);
        let cert = search.find(&ab, &ab).unwrap();
        let n = normalize_edge_function(&lang, cert).unwrap();
        assert!(n.corrections.is_empty());
        assert_eq!(n.table, n.base);
        assert!(is_normal_form(&n.table, 2, &ab, &ab));
        let again = n.gadget.unwrap().express(&oracle).unwrap();
        assert_eq!(again, n.table);
    }

    #[test]
    fn gamma_ex_conservative_edges_normalize() {
        let lang = gamma_ex();
        let oracle = Oracle::default();
        let budget = GadgetBudget {
            max_gadgets: 500,
            ..GadgetBudget::default()
        };
        let search = search_edges(&lang, &budget, &oracle);
        let mut checked = 0;
        for cert in search
            .certificates
            .iter()
            .filter(|c| c.u.is_conservative() && c.v.is_conservative())
        {
            let n = normalize_edge_function(&lang, cert).unwrap();
            assert!(is_normal_form(&n.table, 4, &cert.u, &cert.v));
            assert_eq!(n.gadget.unwrap().express(&oracle).unwrap(), n.table);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn non_core_language_lacks_separators() {
        let u = CostFunction::from_zeros("u_ab", 1, 4, [vec![0], vec![1]]).unwrap();
        let lang = Language::new(Domain::letters(4), vec![u], vec![]).unwrap();
        let seps = Separators::new(&lang);
        let table: Vec<Rational> = [1, 0, 1, 0, 1, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]
            .into_iter()
            .map(Rational::from_integer)
            .collect();
        let x = Vertex::conservative(0, 1);
        let err = normalize_table(&seps, 4, &x, &x, &table).unwrap_err();
        assert!(matches!(err, GraphError::SeparatorUnavailable(..)));
    }

    #[test]
    fn h_eq_has_a_replaying_witness() {
        let lang = h_eq();
        let ex = explore(&lang, &GadgetBudget::default());
        let w = ex.witness.expect("loop witness");
        assert_eq!(w.vertex, Vertex::conservative(0, 1));
        assert!(w.replay(&lang, &Oracle::default()));
    }

    #[test]
    fn empty_graph_gives_no_witness_and_all_chains() {
        let lang = Language::new(Domain::letters(4), vec![], vec![]).unwrap();
        let vertices = enumerate_vertices(lang.domain());
        let search = EdgeSearch::default();
        let sigma = SigmaSets::default();
        let closure = close_edges(&lang, &vertices, &search, &sigma);
        assert!(find_hardness_witness(&lang, &closure, &search, &sigma).is_none());
        let cands = extract_candidates(&lang, &vertices, &closure);
        let chains = cands
            .iter()
            .filter(|c| matches!(c.kind, CandidateKind::Chain(_)))
            .count();
        assert_eq!(chains, 24);
        assert!(cands
            .iter()
            .filter(|c| matches!(c.kind, CandidateKind::Chain(_)))
            .all(|c| c.source == CandidateSource::Colouring && c.verified()));
    }

    #[test]
    fn gamma_ex_yields_a_verified_one_defect_candidate() {
        let lang = gamma_ex();
        let ex = explore(&lang, &GadgetBudget::default());
        assert!(ex.witness.is_none());
        let verified: Vec<&Candidate> = ex
            .candidates
            .iter()
            .filter(|c| c.is_one_defect() && c.verified())
            .collect();
        assert!(!verified.is_empty());
        assert!(verified.iter().any(|c| c.pair == example_pair_1()));
        for c in &ex.candidates {
            assert!(is_independent(&ex.closure, &pair_vertices(&c.pair)));
        }
    }

    #[test]
    fn pair_vertices_of_a_chain_are_conservative_or_singletons() {
        let chain = ChainOrder::new(vec![2, 0, 1, 3]);
        let vs = pair_vertices(chain.pair());
        assert_eq!(vs.len(), 10);
        assert!(vs.iter().all(|v| v.is_singleton() || v.is_conservative()));
    }
}
