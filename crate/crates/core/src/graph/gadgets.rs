//! Bounded gadget search: binary tables certifying edges, unary tables certifying
//! two-element definable subsets.

use std::collections::{BTreeMap, HashSet};

use num_integer::Integer;

use super::{
    edge_inequality, enumerate_vertices, sigma, sigma_0, EdgeCertificate, Gadget, GadgetBudget,
    SigmaCertificate, SigmaSets, Vertex,
};
use crate::lang::{Elem, Instance, Language};
use crate::oracle::Oracle;
use crate::rational::Rational;

/// Variable slot of an atom: the designated pair `P`, `Q`, an auxiliary variable, or a
/// pinned constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Slot {
    P,
    Q,
    Aux(usize),
    Const(Elem),
}

/// One application of a language function to slots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Atom {
    pub function: usize,
    pub slots: Vec<Slot>,
}

impl Atom {
    fn uses(&self, pred: impl Fn(&Slot) -> bool) -> bool {
        self.slots.iter().any(pred)
    }

    fn has_aux(&self) -> bool {
        self.uses(|s| matches!(s, Slot::Aux(_)))
    }

    fn has_designated(&self) -> bool {
        self.uses(|s| matches!(s, Slot::P | Slot::Q))
    }
}

/// All atoms whose slots are drawn from `P`, `Q`, `Aux(0..aux)` and the constants.
fn atoms(language: &Language, aux: usize) -> Vec<Atom> {
    let d = language.domain().size();
    let mut options = vec![Slot::P, Slot::Q];
    options.extend((0..aux).map(Slot::Aux));
    options.extend((0..d).map(Slot::Const));
    let mut out = Vec::new();
    for (fi, f) in language.functions().iter().enumerate() {
        let k = f.arity();
        for idx in 0..options.len().pow(k as u32) {
            let mut rest = idx;
            let mut slots = vec![Slot::P; k];
            for s in slots.iter_mut().rev() {
                *s = options[rest % options.len()];
                rest /= options.len();
            }
            out.push(Atom {
                function: fi,
                slots,
            });
        }
    }
    out
}

/// Values of an atom on every assignment of `[P, Q, Aux(0), ..]` (`P` most significant).
fn atom_table(language: &Language, atom: &Atom, aux: usize) -> Vec<i64> {
    let d = language.domain().size();
    let f = &language.functions()[atom.function];
    let n = 2 + aux;
    let mut out = Vec::with_capacity(d.pow(n as u32));
    let mut assignment = vec![0; n];
    let mut t = vec![0; atom.slots.len()];
    for idx in 0..d.pow(n as u32) {
        let mut rest = idx;
        for v in assignment.iter_mut().rev() {
            *v = rest % d;
            rest /= d;
        }
        for (x, s) in t.iter_mut().zip(&atom.slots) {
            *x = match *s {
                Slot::P => assignment[0],
                Slot::Q => assignment[1],
                Slot::Aux(i) => assignment[2 + i],
                Slot::Const(e) => e,
            };
        }
        out.push(f.value(&t) as i64);
    }
    out
}

/// Shift to minimum zero and divide by the gcd; invariant under the edge inequality.
fn canonical(table: &[i64]) -> Vec<i64> {
    let min = table.iter().copied().min().unwrap_or(0);
    let g = table.iter().fold(0i64, |g, &x| g.gcd(&(x - min)));
    table
        .iter()
        .map(|&x| if g == 0 { 0 } else { (x - min) / g })
        .collect()
}

fn integer_weights(weights: &[Rational]) -> Vec<i64> {
    let scale = Rational::common_denominator(weights);
    weights
        .iter()
        .map(|w| w.scaled_to_i128(&scale).expect("small weights") as i64)
        .collect()
}

/// Builds an instance from weighted atoms. Designated slots and constants are shared; `Q` and
/// auxiliary slots are local to the atom's group.
fn build_gadget(
    language: &Language,
    terms: &[(Rational, &Atom, usize)],
    designated: &[Slot],
) -> Gadget {
    let domain = language.domain();
    let mut instance = Instance::new(domain.clone());
    let mut vars: BTreeMap<(Option<usize>, Slot), usize> = BTreeMap::new();
    let name = |s: &Slot| match s {
        Slot::P => "p".to_string(),
        Slot::Q => "q".to_string(),
        Slot::Aux(i) => format!("z{i}"),
        Slot::Const(e) => format!("k_{}", domain.label(*e)),
    };
    for s in designated {
        let v = instance.add_fresh_variable(&name(s));
        vars.insert((None, *s), v);
    }
    for (weight, atom, group) in terms {
        let mut scope = Vec::with_capacity(atom.slots.len());
        for s in &atom.slots {
            let key = if designated.contains(s) || matches!(s, Slot::Const(_)) {
                (None, *s)
            } else {
                (Some(*group), *s)
            };
            let v = match vars.get(&key) {
                Some(&v) => v,
                None => {
                    let v = instance.add_fresh_variable(&name(s));
                    if let Slot::Const(e) = s {
                        instance.pin(v, *e).expect("valid pin");
                    }
                    vars.insert(key, v);
                    v
                }
            };
            scope.push(v);
        }
        instance
            .add_term(
                weight.clone(),
                language.functions()[atom.function].clone(),
                scope,
            )
            .expect("well-formed term");
    }
    let vars = designated.iter().map(|s| vars[&(None, *s)]).collect();
    Gadget { instance, vars }
}

/// Certified edges found by the bounded search, one per unordered vertex pair.
#[derive(Clone, Debug, Default)]
pub struct EdgeSearch {
    pub certificates: Vec<EdgeCertificate>,
    pub gadgets_examined: usize,
    pub distinct_tables: usize,
    /// Whether some stage stopped at the gadget cap.
    pub capped: bool,
}

impl EdgeSearch {
    pub fn find(&self, u: &Vertex, v: &Vertex) -> Option<&EdgeCertificate> {
        self.certificates
            .iter()
            .find(|c| (c.u == *u && c.v == *v) || (c.u == *v && c.v == *u))
    }
}

struct EdgeCollector<'a> {
    language: &'a Language,
    oracle: &'a Oracle,
    vertices: Vec<Vertex>,
    seen: HashSet<Vec<i64>>,
    found: BTreeMap<(Vertex, Vertex), EdgeCertificate>,
}

impl EdgeCollector<'_> {
    /// Records every vertex pair newly certified by a `(P, Q)` table; `build` makes the gadget.
    fn offer(&mut self, table: &[i64], build: impl Fn() -> Gadget) {
        let key = canonical(table);
        if !self.seen.insert(key) {
            return;
        }
        let d = self.language.domain().size();
        let mut gadget: Option<(Gadget, Vec<Rational>)> = None;
        for i in 0..self.vertices.len() {
            for j in 0..self.vertices.len() {
                let (u, v) = (self.vertices[i], self.vertices[j]);
                let key = (u.min(v), u.max(v));
                if self.found.contains_key(&key) || !edge_inequality(table, d, &u, &v) {
                    continue;
                }
                if gadget.is_none() {
                    let g = build();
                    let exact = g.express(self.oracle).expect("gadget tables are total");
                    gadget = Some((g, exact));
                }
                let (g, exact) = gadget.as_ref().expect("built above");
                if edge_inequality(exact, d, &u, &v) {
                    self.found.insert(
                        key,
                        EdgeCertificate {
                            u,
                            v,
                            gadget: g.clone(),
                            table: exact.clone(),
                        },
                    );
                }
            }
        }
    }
}

/// Searches single atoms, then gadgets with one, two, ... auxiliary variables (each stage
/// capped at `budget.max_gadgets`), returning a certificate for every vertex pair some
/// examined gadget separates.
pub fn search_edges(language: &Language, budget: &GadgetBudget, oracle: &Oracle) -> EdgeSearch {
    let d = language.domain().size();
    let mut collector = EdgeCollector {
        language,
        oracle,
        vertices: enumerate_vertices(language.domain()),
        seen: HashSet::new(),
        found: BTreeMap::new(),
    };
    let mut examined = 0;
    let mut capped = false;

    for atom in atoms(language, 0) {
        if !atom.has_designated() {
            continue;
        }
        examined += 1;
        let table = atom_table(language, &atom, 0);
        collector.offer(&table, || {
            build_gadget(
                language,
                &[(Rational::one(), &atom, 0)],
                &[Slot::P, Slot::Q],
            )
        });
    }

    let weights = integer_weights(&budget.weights);
    for aux in 1..=budget.max_aux {
        let block = d.pow(aux as u32);
        let mut seen_atoms = HashSet::new();
        let mut pool: Vec<(Atom, Vec<i64>)> = Vec::new();
        for atom in atoms(language, aux) {
            if !atom.has_aux() {
                continue;
            }
            let table = atom_table(language, &atom, aux);
            if seen_atoms.insert(table.clone()) {
                pool.push((atom, table));
            }
        }
        let items: Vec<(usize, usize)> = (0..pool.len())
            .flat_map(|a| (0..weights.len()).map(move |w| (a, w)))
            .collect();
        let mut count = 0;
        let mut chosen = Vec::new();
        for size in 1..=budget.max_terms {
            let complete = multisets(items.len(), size, &mut chosen, 0, &mut |combo| {
                let uses_all = (0..aux).all(|i| {
                    combo
                        .iter()
                        .any(|&c| pool[items[c].0].0.uses(|s| *s == Slot::Aux(i)))
                });
                let linked = combo.iter().any(|&c| pool[items[c].0].0.has_designated());
                if !uses_all || !linked {
                    return true;
                }
                if count == budget.max_gadgets {
                    return false;
                }
                count += 1;
                let mut sum = vec![0i64; d * d * block];
                for &c in combo {
                    let (a, w) = items[c];
                    for (s, x) in sum.iter_mut().zip(&pool[a].1) {
                        *s += weights[w] * x;
                    }
                }
                let table: Vec<i64> = sum
                    .chunks(block)
                    .map(|c| *c.iter().min().expect("nonempty block"))
                    .collect();
                collector.offer(&table, || {
                    let terms: Vec<(Rational, &Atom, usize)> = combo
                        .iter()
                        .map(|&c| (budget.weights[items[c].1].clone(), &pool[items[c].0].0, 0))
                        .collect();
                    build_gadget(language, &terms, &[Slot::P, Slot::Q])
                });
                true
            });
            if !complete {
                capped = true;
                break;
            }
        }
        examined += count;
    }

    EdgeSearch {
        distinct_tables: collector.seen.len(),
        certificates: collector.found.into_values().collect(),
        gadgets_examined: examined,
        capped,
    }
}

/// Visits nondecreasing index sequences of length `size` over `0..n`; stops early (returning
/// false) when `visit` does.
fn multisets(
    n: usize,
    size: usize,
    chosen: &mut Vec<usize>,
    start: usize,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    if chosen.len() == size {
        return visit(chosen);
    }
    for i in start..n {
        chosen.push(i);
        let go_on = multisets(n, size, chosen, i, visit);
        chosen.pop();
        if !go_on {
            return false;
        }
    }
    true
}

/// A unary table with the atom producing it; `Q` (if used) is minimized out.
struct UnaryRecipe {
    table: Vec<i64>,
    atom: Atom,
}

fn unary_recipes(language: &Language) -> Vec<UnaryRecipe> {
    let d = language.domain().size();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for atom in atoms(language, 0) {
        if !atom.uses(|s| *s == Slot::P) {
            continue;
        }
        let full = atom_table(language, &atom, 0);
        let table: Vec<i64> = full
            .chunks(d)
            .map(|r| *r.iter().min().expect("nonempty row"))
            .collect();
        if seen.insert(canonical(&table)) {
            out.push(UnaryRecipe { table, atom });
        }
    }
    out
}

/// Unary tables `u(p) = min_q h(p, q)` of single atoms, exact.
pub fn expressible_unary_tables(language: &Language) -> Vec<Vec<Rational>> {
    unary_recipes(language)
        .into_iter()
        .map(|r| r.table.into_iter().map(Rational::from_integer).collect())
        .collect()
}

/// Searches weighted sums of up to three single-atom unary tables whose minimizers are
/// exactly a two-element subset. On four elements, records the subsets implied by a
/// missing subset `{b, c}` (conditional on `{b, c}` not being definable) as inferred.
pub fn certify_sigma(language: &Language, budget: &GadgetBudget, oracle: &Oracle) -> SigmaSets {
    let d = language.domain().size();
    let recipes = unary_recipes(language);
    let weights = integer_weights(&budget.weights);
    let items: Vec<(usize, usize)> = (0..recipes.len())
        .flat_map(|a| (0..weights.len()).map(move |w| (a, w)))
        .collect();
    let mut certified: BTreeMap<(Elem, Elem), SigmaCertificate> = BTreeMap::new();
    let mut count = 0;
    let mut exhausted = false;
    let mut chosen = Vec::new();
    for size in 0..=3 {
        let complete = multisets(items.len(), size, &mut chosen, 0, &mut |combo| {
            if certified.len() == d * (d - 1) / 2 {
                return true;
            }
            if count == budget.max_gadgets {
                return false;
            }
            count += 1;
            let mut sum = vec![0i64; d];
            for &c in combo {
                let (r, w) = items[c];
                for (s, x) in sum.iter_mut().zip(&recipes[r].table) {
                    *s += weights[w] * x;
                }
            }
            let min = *sum.iter().min().expect("nonempty domain");
            let argmin: Vec<Elem> = (0..d).filter(|&e| sum[e] == min).collect();
            if argmin.len() != 2 || certified.contains_key(&(argmin[0], argmin[1])) {
                return true;
            }
            let terms: Vec<(Rational, &Atom, usize)> = combo
                .iter()
                .enumerate()
                .map(|(g, &c)| {
                    (
                        budget.weights[items[c].1].clone(),
                        &recipes[items[c].0].atom,
                        g,
                    )
                })
                .collect();
            let cert = SigmaCertificate {
                pair: (argmin[0], argmin[1]),
                gadget: build_gadget(language, &terms, &[Slot::P]),
            };
            if cert.replays(oracle) {
                certified.insert(cert.pair, cert);
            }
            true
        });
        if !complete {
            exhausted = true;
            break;
        }
    }
    let mut inferred = BTreeMap::new();
    if d == 4 {
        for (b, c) in sigma(d) {
            if certified.contains_key(&(b, c)) {
                continue;
            }
            for p in sigma_0(d, b, c) {
                if !certified.contains_key(&p) {
                    inferred.entry(p).or_insert((b, c));
                }
            }
        }
    }
    SigmaSets {
        domain_size: d,
        certified,
        inferred,
        exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{gamma_ex, h_eq};
    use crate::lang::Domain;

    #[test]
    fn h_eq_has_a_certified_loop() {
        let lang = h_eq();
        let oracle = Oracle::default();
        let search = search_edges(&lang, &GadgetBudget::default(), &oracle);
        let ab = Vertex::conservative(0, 1);
        let cert = search.find(&ab, &ab).expect("loop on <ab>");
        assert!(cert.replays(&oracle));
        assert_eq!(cert.gadget.instance.terms().len(), 1);
    }

    #[test]
    fn empty_language_has_no_edges() {
        let lang = Language::new(Domain::letters(4), vec![], vec![]).unwrap();
        let search = search_edges(&lang, &GadgetBudget::default(), &Oracle::default());
        assert!(search.certificates.is_empty());
        let sigma = certify_sigma(&lang, &GadgetBudget::default(), &Oracle::default());
        assert!(sigma.certified.is_empty());
    }

    #[test]
    fn two_elements_are_certified_by_the_empty_gadget() {
        let sigma = certify_sigma(&h_eq(), &GadgetBudget::default(), &Oracle::default());
        let cert = &sigma.certified[&(0, 1)];
        assert!(cert.gadget.instance.terms().is_empty());
    }

    #[test]
    fn gamma_ex_sigma_contains_the_four_outer_pairs() {
        let lang = gamma_ex();
        let oracle = Oracle::default();
        let sigma = certify_sigma(&lang, &GadgetBudget::default(), &oracle);
        for p in sigma_0(4, 1, 2) {
            assert!(
                sigma.certified.contains_key(&p) || sigma.inferred.contains_key(&p),
                "{p:?}"
            );
        }
        for cert in sigma.certified.values() {
            assert!(cert.replays(&oracle));
        }
    }

    #[test]
    fn gamma_ex_certificates_replay() {
        let lang = gamma_ex();
        let oracle = Oracle::default();
        let budget = GadgetBudget {
            max_gadgets: 2000,
            ..GadgetBudget::default()
        };
        let search = search_edges(&lang, &budget, &oracle);
        assert!(!search.certificates.is_empty());
        for c in &search.certificates {
            assert!(c.replays(&oracle));
        }
    }

    #[test]
    fn larger_budgets_keep_every_edge() {
        let lang = gamma_ex();
        let oracle = Oracle::default();
        let small = search_edges(
            &lang,
            &GadgetBudget {
                max_aux: 1,
                max_gadgets: 300,
                ..GadgetBudget::default()
            },
            &oracle,
        );
        let large = search_edges(
            &lang,
            &GadgetBudget {
                max_aux: 2,
                max_gadgets: 1500,
                ..GadgetBudget::default()
            },
            &oracle,
        );
        for c in &small.certificates {
            assert!(large.find(&c.u, &c.v).is_some());
        }
    }

    #[test]
    fn canonical_tables_ignore_shift_and_scale() {
        assert_eq!(canonical(&[3, 5, 7]), vec![0, 1, 2]);
        assert_eq!(canonical(&[2, 2]), vec![0, 0]);
    }
}
