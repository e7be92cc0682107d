//! Closure of certified edges under bar symmetry, composition through definable
//! conservative vertices, and reuse of derived tables on other vertex pairs.

use std::collections::{BTreeMap, BTreeSet};

use super::witness::{normalize_table, Separators};
use super::{edge_inequality, EdgeCertificate, EdgeSearch, SigmaSets, Vertex};
use crate::lang::{Elem, Language};
use crate::oracle::Oracle;
use crate::rational::Rational;

/// How an edge was obtained. Premise indices refer to earlier edges of the same list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeOrigin {
    /// Certified by the gadget of a search certificate.
    Gadget { certificate: usize },
    /// `{x̄, ȳ}` from `{x, y}`, with the same table.
    Symmetry { premise: usize },
    /// `{x, z̄}` from `{x, y}` and `{y, z}` where the support of `y` is definable: the table
    /// is `min over u in supp(y)` of the normalized premise tables summed through `u`.
    Compose {
        first: usize,
        second: usize,
        middle: Vertex,
    },
    /// A derived table that also satisfies the inequality on another pair.
    Reuse { premise: usize },
}

impl EdgeOrigin {
    pub fn rule(&self) -> &'static str {
        match self {
            EdgeOrigin::Gadget { .. } => "gadget",
            EdgeOrigin::Symmetry { .. } => "symmetry",
            EdgeOrigin::Compose { .. } => "compose",
            EdgeOrigin::Reuse { .. } => "reuse",
        }
    }

    pub fn premises(&self) -> Vec<usize> {
        match *self {
            EdgeOrigin::Gadget { .. } => vec![],
            EdgeOrigin::Symmetry { premise } | EdgeOrigin::Reuse { premise } => vec![premise],
            EdgeOrigin::Compose { first, second, .. } => vec![first, second],
        }
    }
}

/// An edge with a table oriented as `(u's support, v's support)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeRecord {
    pub u: Vertex,
    pub v: Vertex,
    pub table: Vec<Rational>,
    pub origin: EdgeOrigin,
}

impl EdgeRecord {
    /// The table with `first`'s support as first argument, if `first` is an endpoint.
    pub fn oriented(&self, first: &Vertex, d: usize) -> Option<Vec<Rational>> {
        if self.u == *first {
            Some(self.table.clone())
        } else if self.v == *first {
            Some(transpose(&self.table, d))
        } else {
            None
        }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

fn transpose(table: &[Rational], d: usize) -> Vec<Rational> {
    (0..d * d)
        .map(|i| table[(i % d) * d + i / d].clone())
        .collect()
}

fn key(u: Vertex, v: Vertex) -> (Vertex, Vertex) {
    (u.min(v), u.max(v))
}

/// Fixpoint of the derivation rules over the certified edges.
#[derive(Clone, Debug, Default)]
pub struct Closure {
    pub edges: Vec<EdgeRecord>,
    index: BTreeMap<(Vertex, Vertex), usize>,
    /// Definable supports used as composition middles.
    pub sigma_used: BTreeSet<(Elem, Elem)>,
}

impl Closure {
    pub fn contains(&self, u: &Vertex, v: &Vertex) -> bool {
        self.index.contains_key(&key(*u, *v))
    }

    pub fn get(&self, u: &Vertex, v: &Vertex) -> Option<(usize, &EdgeRecord)> {
        self.index.get(&key(*u, *v)).map(|&i| (i, &self.edges[i]))
    }

    pub fn certified_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e.origin, EdgeOrigin::Gadget { .. }))
            .count()
    }

    pub fn derived_count(&self) -> usize {
        self.edges.len() - self.certified_count()
    }

    /// Whether `{x, y}` present implies `{x̄, ȳ}` present.
    pub fn is_bar_closed(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.contains(&e.u.bar(), &e.v.bar()))
    }

    fn insert(&mut self, record: EdgeRecord) -> bool {
        let k = key(record.u, record.v);
        if self.index.contains_key(&k) {
            return false;
        }
        self.index.insert(k, self.edges.len());
        self.edges.push(record);
        true
    }

    /// Indices of `idx` and all its premises, ascending.
    pub fn ancestors(&self, idx: usize) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![idx];
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                stack.extend(self.edges[i].origin.premises());
            }
        }
        seen.into_iter().collect()
    }

    /// Self-contained copy of the derivation of `idx`: steps with premises re-indexed into the
    /// returned list, and the gadget certificates they use.
    pub fn extract(
        &self,
        idx: usize,
        search: &EdgeSearch,
    ) -> (Vec<EdgeRecord>, Vec<EdgeCertificate>) {
        let order = self.ancestors(idx);
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(n, &i)| (i, n)).collect();
        let mut certificates = Vec::new();
        let steps = order
            .iter()
            .map(|&i| {
                let e = &self.edges[i];
                let origin = match e.origin {
                    EdgeOrigin::Gadget { certificate } => {
                        certificates.push(search.certificates[certificate].clone());
                        EdgeOrigin::Gadget {
                            certificate: certificates.len() - 1,
                        }
                    }
                    EdgeOrigin::Symmetry { premise } => EdgeOrigin::Symmetry {
                        premise: pos[&premise],
                    },
                    EdgeOrigin::Reuse { premise } => EdgeOrigin::Reuse {
                        premise: pos[&premise],
                    },
                    EdgeOrigin::Compose {
                        first,
                        second,
                        middle,
                    } => EdgeOrigin::Compose {
                        first: pos[&first],
                        second: pos[&second],
                        middle,
                    },
                };
                EdgeRecord {
                    origin,
                    ..e.clone()
                }
            })
            .collect();
        (steps, certificates)
    }
}

/// `{x, z̄}` table from `h1` on `(x, y)` and `h2` on `(y, z)`; `None` without separators.
pub(crate) fn compose(
    seps: &Separators,
    d: usize,
    (x, y, z): (&Vertex, &Vertex, &Vertex),
    h1: &[Rational],
    h2: &[Rational],
) -> Option<Vec<Rational>> {
    let n1 = normalize_table(seps, d, x, y, h1).ok()?;
    let n2 = normalize_table(seps, d, y, z, h2).ok()?;
    let table = (0..d * d)
        .map(|i| {
            let (u1, u3) = (i / d, i % d);
            [y.a, y.b]
                .iter()
                .map(|&u2| &n1.table[u1 * d + u2] + &n2.table[u2 * d + u3])
                .min()
                .expect("two middle values")
        })
        .collect();
    Some(table)
}

fn orientations(e: &EdgeRecord) -> Vec<(Vertex, Vertex)> {
    if e.is_loop() {
        vec![(e.u, e.v)]
    } else {
        vec![(e.u, e.v), (e.v, e.u)]
    }
}

/// Closes the certified edges: bar symmetry on all edges; composition through conservative
/// middles whose support is certified definable; reuse of composed tables on all
/// conservative pairs. Repeated composition covers paths and odd cycles; reuse covers the
/// table-level case splits on a third element.
pub fn close_edges(
    language: &Language,
    vertices: &[Vertex],
    search: &EdgeSearch,
    sigma: &SigmaSets,
) -> Closure {
    let d = language.domain().size();
    let seps = Separators::new(language);
    let conservative: Vec<Vertex> = vertices
        .iter()
        .copied()
        .filter(|v| v.is_conservative())
        .collect();
    let mut closure = Closure::default();
    for (i, c) in search.certificates.iter().enumerate() {
        closure.insert(EdgeRecord {
            u: c.u,
            v: c.v,
            table: c.table.clone(),
            origin: EdgeOrigin::Gadget { certificate: i },
        });
    }
    let mut reused_from = 0;
    loop {
        let n = closure.edges.len();
        for i in 0..n {
            let e = &closure.edges[i];
            let record = EdgeRecord {
                u: e.u.bar(),
                v: e.v.bar(),
                table: e.table.clone(),
                origin: EdgeOrigin::Symmetry { premise: i },
            };
            closure.insert(record);
        }
        for i in 0..n {
            for j in 0..n {
                for (x, y) in orientations(&closure.edges[i]) {
                    if !x.is_conservative() || !sigma.is_certified_vertex(&y) {
                        continue;
                    }
                    for (y2, z) in orientations(&closure.edges[j]) {
                        if y2 != y || !z.is_conservative() || closure.contains(&x, &z.bar()) {
                            continue;
                        }
                        let h1 = closure.edges[i].oriented(&x, d).expect("endpoint");
                        let h2 = closure.edges[j].oriented(&y, d).expect("endpoint");
                        let Some(table) = compose(&seps, d, (&x, &y, &z), &h1, &h2) else {
                            continue;
                        };
                        if edge_inequality(&table, d, &x, &z.bar()) {
                            closure.sigma_used.insert((y.a, y.b));
                            closure.insert(EdgeRecord {
                                u: x,
                                v: z.bar(),
                                table,
                                origin: EdgeOrigin::Compose {
                                    first: i,
                                    second: j,
                                    middle: y,
                                },
                            });
                        }
                    }
                }
            }
        }
        let end = closure.edges.len();
        for i in reused_from..end {
            if !matches!(closure.edges[i].origin, EdgeOrigin::Compose { .. }) {
                continue;
            }
            for u in &conservative {
                for v in &conservative {
                    if !closure.contains(u, v) && edge_inequality(&closure.edges[i].table, d, u, v)
                    {
                        let table = closure.edges[i].table.clone();
                        closure.insert(EdgeRecord {
                            u: *u,
                            v: *v,
                            table,
                            origin: EdgeOrigin::Reuse { premise: i },
                        });
                    }
                }
            }
        }
        reused_from = end;
        if closure.edges.len() == n {
            break;
        }
    }
    closure
}

/// Re-checks a derivation from scratch: certificates re-expressed by the oracle, symmetric and
/// reused tables copied, compositions recomputed through middles accepted by `definable`, and
/// the edge inequality on every step.
pub fn replay_steps(
    language: &Language,
    steps: &[EdgeRecord],
    certificates: &[EdgeCertificate],
    definable: &dyn Fn(Elem, Elem) -> bool,
    oracle: &Oracle,
) -> bool {
    let d = language.domain().size();
    let seps = Separators::new(language);
    steps.iter().enumerate().all(|(n, s)| {
        if s.origin.premises().iter().any(|&p| p >= n) || !edge_inequality(&s.table, d, &s.u, &s.v)
        {
            return false;
        }
        match s.origin {
            EdgeOrigin::Gadget { certificate } => certificates.get(certificate).is_some_and(|c| {
                c.u == s.u && c.v == s.v && c.table == s.table && c.replays(oracle)
            }),
            EdgeOrigin::Symmetry { premise } => {
                let p = &steps[premise];
                p.table == s.table && p.u.bar() == s.u && p.v.bar() == s.v
            }
            EdgeOrigin::Reuse { premise } => steps[premise].table == s.table,
            EdgeOrigin::Compose {
                first,
                second,
                middle,
            } => {
                let z = s.v.bar();
                if !definable(middle.a, middle.b) {
                    return false;
                }
                let (Some(h1), Some(h2)) = (
                    steps[first].oriented(&s.u, d),
                    steps[second].oriented(&middle, d),
                ) else {
                    return false;
                };
                let other = |e: &EdgeRecord, end: &Vertex| if e.u == *end { e.v } else { e.u };
                if other(&steps[first], &s.u) != middle || other(&steps[second], &middle) != z {
                    return false;
                }
                compose(&seps, d, (&s.u, &middle, &z), &h1, &h2).as_deref() == Some(&s.table[..])
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_vertices, Gadget, SigmaCertificate};
    use crate::lang::{CostFunction, Domain, Instance};

    fn fake_sigma(d: usize, pairs: &[(Elem, Elem)]) -> SigmaSets {
        let mut s = SigmaSets {
            domain_size: d,
            ..SigmaSets::default()
        };
        for &p in pairs {
            s.certified.insert(
                p,
                SigmaCertificate {
                    pair: p,
                    gadget: Gadget {
                        instance: Instance::new(Domain::letters(d)),
                        vars: vec![],
                    },
                },
            );
        }
        s
    }

    /// Certificate for `{u, v}` with a hand-made table and a placeholder gadget.
    fn fake_cert(d: usize, u: Vertex, v: Vertex, table: Vec<i64>) -> EdgeCertificate {
        EdgeCertificate {
            u,
            v,
            gadget: Gadget {
                instance: Instance::new(Domain::letters(d)),
                vars: vec![],
            },
            table: table.into_iter().map(Rational::from_integer).collect(),
        }
    }

    /// Language with every unary indicator, so every separator exists.
    fn separating_language(d: usize) -> Language {
        let fns = (0..d)
            .map(|e| CostFunction::from_fn(format!("u{e}"), 1, d, move |t| (t[0] == e) as u8))
            .collect();
        Language::new(Domain::letters(d), fns, vec![]).unwrap()
    }

    /// `h(p,q)` with `h(a1,b2) = h(b1,a2) = 0 < h(a1,a2) = h(b1,b2) = 1` for `x = ⟨a1b1⟩`,
    /// `y = ⟨a2b2⟩`, zero elsewhere.
    fn normal_table(d: usize, x: Vertex, y: Vertex) -> Vec<i64> {
        let mut t = vec![0; d * d];
        t[x.f * d + y.f] = 1;
        t[x.g * d + y.g] = 1;
        t
    }

    #[test]
    fn symmetry_adds_bar_edges() {
        let d = 3;
        let lang = separating_language(d);
        let x = Vertex::conservative(0, 1);
        let y = Vertex::conservative(1, 2);
        let search = EdgeSearch {
            certificates: vec![fake_cert(d, x, y, normal_table(d, x, y))],
            ..EdgeSearch::default()
        };
        let closure = close_edges(
            &lang,
            &enumerate_vertices(lang.domain()),
            &search,
            &fake_sigma(d, &[]),
        );
        assert!(closure.contains(&x.bar(), &y.bar()));
        assert!(closure.is_bar_closed());
    }

    #[test]
    fn composition_through_a_definable_middle() {
        let d = 3;
        let lang = separating_language(d);
        let x = Vertex::conservative(0, 1);
        let y = Vertex::conservative(1, 2);
        let z = Vertex::conservative(0, 2);
        let search = EdgeSearch {
            certificates: vec![
                fake_cert(d, x, y, normal_table(d, x, y)),
                fake_cert(d, y, z, normal_table(d, y, z)),
            ],
            ..EdgeSearch::default()
        };
        let sigma = fake_sigma(d, &[(1, 2)]);
        let closure = close_edges(&lang, &enumerate_vertices(lang.domain()), &search, &sigma);
        let (idx, rec) = closure.get(&x, &z.bar()).expect("derived {x, z-bar}");
        assert!(matches!(
            rec.origin,
            EdgeOrigin::Compose { .. } | EdgeOrigin::Symmetry { .. }
        ));
        let (steps, _) = closure.extract(idx, &search);
        let seps = Separators::new(&lang);
        for s in steps
            .iter()
            .filter(|s| matches!(s.origin, EdgeOrigin::Compose { .. }))
        {
            let EdgeOrigin::Compose {
                first,
                second,
                middle,
            } = s.origin
            else {
                unreachable!()
            };
            let h1 = steps[first].oriented(&s.u, d).unwrap();
            let h2 = steps[second].oriented(&middle, d).unwrap();
            let again = compose(&seps, d, (&s.u, &middle, &s.v.bar()), &h1, &h2).unwrap();
            assert_eq!(again, s.table);
        }

        let without = close_edges(
            &lang,
            &enumerate_vertices(lang.domain()),
            &search,
            &fake_sigma(d, &[]),
        );
        assert!(!without.contains(&x, &z.bar()));
    }

    #[test]
    fn odd_cycle_through_definable_vertices_gives_a_loop() {
        let d = 3;
        let lang = separating_language(d);
        let x1 = Vertex::conservative(0, 1);
        let x2 = Vertex::conservative(1, 2);
        let x3 = Vertex::conservative(2, 0);
        let search = EdgeSearch {
            certificates: vec![
                fake_cert(d, x1, x2, normal_table(d, x1, x2)),
                fake_cert(d, x2, x3, normal_table(d, x2, x3)),
                fake_cert(d, x3, x1, normal_table(d, x3, x1)),
            ],
            ..EdgeSearch::default()
        };
        let sigma = fake_sigma(d, &[(1, 2), (0, 2)]);
        let closure = close_edges(&lang, &enumerate_vertices(lang.domain()), &search, &sigma);
        assert!(closure.contains(&x1, &x1));
        assert!(closure.is_bar_closed());
    }

    #[test]
    fn transpose_is_an_involution() {
        let t: Vec<Rational> = (0..9).map(Rational::from_integer).collect();
        assert_eq!(transpose(&transpose(&t, 3), 3), t);
        assert_eq!(transpose(&t, 3)[1], Rational::from_integer(3));
    }
}
