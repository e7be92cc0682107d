//! DOT and JSON renderings of an exploration.

use std::fmt::Write;

use serde_json::{json, Value};

use super::{CandidateKind, EdgeOrigin, Exploration, Vertex};
use crate::lang::{Domain, Instance};
use crate::rational::Rational;

fn instance_value(instance: &Instance) -> Value {
    serde_json::from_str(&instance.to_json()).expect("instance JSON round-trips")
}

fn table_value(table: &[Rational], d: usize) -> Value {
    Value::Array(
        table
            .chunks(d)
            .map(|row| Value::Array(row.iter().map(|x| Value::String(x.to_string())).collect()))
            .collect(),
    )
}

fn node_id(v: &Vertex) -> String {
    format!("v{}_{}_{}_{}", v.a, v.b, v.f, v.g)
}

/// Graph in DOT: conservative vertices as boxes, gadget edges solid, derived edges dashed,
/// loops red. Only conservative vertices and vertices on some edge are drawn.
pub fn to_dot(ex: &Exploration) -> String {
    let domain = ex.language.domain();
    let mut out = String::from("graph mm {\n  node [fontname=\"Helvetica\"];\n");
    for v in &ex.vertices {
        let on_edge = ex.closure.edges.iter().any(|e| e.u == *v || e.v == *v);
        if !v.is_conservative() && !on_edge {
            continue;
        }
        let shape = if v.is_conservative() {
            "box"
        } else {
            "ellipse"
        };
        let style = if ex.sigma.is_certified_vertex(v) {
            ", style=bold"
        } else {
            ""
        };
        writeln!(
            out,
            "  {} [label=\"{}\", shape={shape}{style}];",
            node_id(v),
            v.label(domain)
        )
        .expect("string write");
    }
    for e in &ex.closure.edges {
        let mut attrs = vec![];
        if !matches!(e.origin, EdgeOrigin::Gadget { .. }) {
            attrs.push(format!("style=dashed, label=\"{}\"", e.origin.rule()));
        }
        if e.is_loop() {
            attrs.push("color=red".to_string());
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        writeln!(out, "  {} -- {}{attrs};", node_id(&e.u), node_id(&e.v)).expect("string write");
    }
    out.push_str("}\n");
    out
}

fn pair_value(domain: &Domain, p: (usize, usize)) -> Value {
    json!([domain.label(p.0), domain.label(p.1)])
}

/// Certificates, derived edges with premises, definable subsets, witness and candidates.
pub fn to_json(ex: &Exploration) -> Value {
    let domain = ex.language.domain();
    let d = domain.size();
    let label = |v: &Vertex| v.label(domain);
    let sigma = json!({
        "certified": ex.sigma.certified.values().map(|c| json!({
            "pair": pair_value(domain, c.pair),
            "gadget": instance_value(&c.gadget.instance),
            "designated": c.gadget.vars.iter().map(|&v| c.gadget.instance.variables()[v].clone()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "inferred": ex.sigma.inferred.iter().map(|(p, from)| json!({
            "pair": pair_value(domain, *p),
            "unless_definable": pair_value(domain, *from),
        })).collect::<Vec<_>>(),
        "search_capped": ex.sigma.exhausted,
    });
    let certificates: Vec<Value> = ex
        .search
        .certificates
        .iter()
        .map(|c| {
            json!({
                "u": label(&c.u),
                "v": label(&c.v),
                "table": table_value(&c.table, d),
                "gadget": instance_value(&c.gadget.instance),
                "designated": c.gadget.vars.iter().map(|&v| c.gadget.instance.variables()[v].clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let edges: Vec<Value> = ex
        .closure
        .edges
        .iter()
        .map(|e| {
            let mut v = json!({
                "u": label(&e.u),
                "v": label(&e.v),
                "rule": e.origin.rule(),
                "premises": e.origin.premises(),
                "table": table_value(&e.table, d),
            });
            match e.origin {
                EdgeOrigin::Gadget { certificate } => v["certificate"] = json!(certificate),
                EdgeOrigin::Compose { middle, .. } => v["middle"] = json!(label(&middle)),
                _ => {}
            }
            v
        })
        .collect();
    let witness = ex.witness.as_ref().map(|w| {
        json!({
            "vertex": label(&w.vertex),
            "steps": w.steps.iter().map(|s| json!({
                "u": label(&s.u),
                "v": label(&s.v),
                "rule": s.origin.rule(),
                "premises": s.origin.premises(),
            })).collect::<Vec<_>>(),
            "normalized": table_value(&w.normalized.table, d),
            "definable": w.sigma.iter().map(|s| pair_value(domain, s.pair)).collect::<Vec<_>>(),
            "note": w.note,
        })
    });
    let candidates: Vec<Value> = ex
        .candidates
        .iter()
        .map(|c| {
            let (kind, description) = match &c.kind {
                CandidateKind::Chain(ch) => ("chain", ch.describe(domain)),
                CandidateKind::OneDefect(o) => ("one_defect", o.describe(domain)),
            };
            json!({
                "kind": kind,
                "structure": description,
                "source": c.source,
                "verified": c.verified(),
                "counterexample": c.violation.as_ref().map(|v| v.to_json_value(domain)),
            })
        })
        .collect();
    json!({
        "domain": domain.labels(),
        "vertices": ex.vertices.len(),
        "search": {
            "gadgets_examined": ex.search.gadgets_examined,
            "distinct_tables": ex.search.distinct_tables,
            "capped": ex.search.capped,
        },
        "sigma": sigma,
        "certificates": certificates,
        "edges": edges,
        "witness": witness,
        "candidates": candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::h_eq;
    use crate::graph::{explore, GadgetBudget};

    #[test]
    fn dot_marks_the_loop() {
        let ex = explore(&h_eq(), &GadgetBudget::default());
        let dot = to_dot(&ex);
        assert!(dot.starts_with("graph mm {"));
        assert!(dot.contains("label=\"<ab>\", shape=box"));
        assert!(dot.contains("color=red"));
    }

    #[test]
    fn json_is_stable() {
        let a = to_json(&explore(&h_eq(), &GadgetBudget::default()));
        let b = to_json(&explore(&h_eq(), &GadgetBudget::default()));
        assert_eq!(a, b);
        assert_eq!(a["witness"]["vertex"], "<ab>");
    }
}
