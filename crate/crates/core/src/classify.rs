//! Complexity classification of finite-valued languages on at most four elements.
//!
//! The language's {0,1} cost functions are retracted to a core. A one-element core is
//! trivially tractable. Two- and three-element cores are tractable exactly when submodular
//! on some total order. Four-element cores are tractable exactly when submodular on some
//! total order or invariant under some 1-defect chain; otherwise the problem is NP-hard.
//! Every structure is checked and every failure keeps its counterexample.

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::endo::{core, Endomorphism};
use crate::graph::{explore, GadgetBudget};
use crate::lang::{Domain, Elem, Language};
use crate::morphisms::{
    enumerate_chains, enumerate_one_defect, is_multimorphism, is_multimorphism_structured,
    BinaryOpPair, OpTable, Recognized, Violation, DEFAULT_CHECK_BUDGET,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("classification is only available for domains of at most 4 elements, got {0}")]
    DomainTooLarge(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Tractable,
    NpHard,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Tractable => "tractable",
            Verdict::NpHard => "np_hard",
        }
    }
}

/// Structure of a tractability witness on the core domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessKind {
    /// One-element core: the constant pair.
    Constant,
    Structured(Recognized),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub kind: WitnessKind,
    /// Pair on the core domain (core positions).
    pub core_pair: BinaryOpPair,
    /// The core pair composed with the retraction, on the full domain.
    pub pair: BinaryOpPair,
    /// Direct check of `pair` against the input functions; `None` if over budget.
    pub lifted_verified: Option<bool>,
}

impl Witness {
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            WitnessKind::Constant => "constant",
            WitnessKind::Structured(Recognized::Chain(_)) => "chain",
            WitnessKind::Structured(Recognized::OneDefect(_)) => "one_defect",
        }
    }
}

/// A structure that is not a multimorphism of the core, with the failing inequality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub structure: Recognized,
    pub violation: Violation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TraceEvent {
    IgnoredRelations {
        relations: Vec<String>,
    },
    Core {
        image: Vec<String>,
        retraction: Vec<String>,
        steps: usize,
    },
    Criterion {
        statement: String,
    },
    Check {
        kind: String,
        structure: String,
        passed: bool,
        function: Option<String>,
    },
    Verdict {
        verdict: Verdict,
    },
    Lifted {
        verified: Option<bool>,
    },
    Graph {
        loop_witness: Option<String>,
        verified_candidates: usize,
        capped: bool,
    },
}

/// Summary of the optional graph exploration of the core.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphCorroboration {
    /// Label of a loop vertex with definable support, if one was derived.
    pub loop_witness: Option<String>,
    pub verified_candidates: Vec<Recognized>,
    pub capped: bool,
}

#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub domain: Domain,
    /// Original elements forming the core, in domain order.
    pub core_domain: Vec<Elem>,
    pub retraction: Endomorphism,
    pub core_language: Language,
    pub criterion: String,
    pub witness: Option<Witness>,
    /// Every chain or 1-defect chain that is a multimorphism of the core.
    pub verified: Vec<Recognized>,
    pub failures: Vec<Failure>,
    pub ignored_relations: Vec<String>,
    pub trace: Vec<TraceEvent>,
    pub graph: Option<GraphCorroboration>,
}

#[derive(Clone, Debug, Default)]
pub struct ClassifyOptions {
    /// Explore the multimorphism graph of the core with this budget.
    pub graph: Option<GadgetBudget>,
}

fn describe(r: &Recognized, domain: &Domain) -> (&'static str, String) {
    match r {
        Recognized::Chain(c) => ("chain", c.describe(domain)),
        Recognized::OneDefect(o) => ("one_defect", o.describe(domain)),
    }
}

fn criterion(k: usize) -> &'static str {
    match k {
        1 => "one-element core: the constant assignment is optimal for every instance",
        2 | 3 => {
            "two- and three-element cores: tractable if submodular on some total order of the core \
             domain, NP-hard otherwise (known dichotomies for these domain sizes)"
        }
        _ => {
            "four-element cores: tractable if submodular on some total order or invariant under some \
             1-defect chain multimorphism, NP-hard otherwise"
        }
    }
}

pub fn classify(language: &Language) -> Result<ClassificationReport, ClassifyError> {
    classify_with(language, &ClassifyOptions::default())
}

pub fn classify_with(
    language: &Language,
    options: &ClassifyOptions,
) -> Result<ClassificationReport, ClassifyError> {
    let domain = language.domain().clone();
    let d = domain.size();
    if d > 4 {
        return Err(ClassifyError::DomainTooLarge(d));
    }
    let mut trace = Vec::new();
    let ignored_relations: Vec<String> = language
        .relations()
        .iter()
        .map(|r| r.name().to_string())
        .collect();
    if !ignored_relations.is_empty() {
        trace.push(TraceEvent::IgnoredRelations {
            relations: ignored_relations.clone(),
        });
    }
    let functions_only = Language::new(
        domain.clone(),
        language.functions().iter().map(|f| (**f).clone()).collect(),
        vec![],
    )
    .expect("subset of a valid language");
    let c = core(&functions_only);
    let core_lang = c.language.clone();
    let core_domain = core_lang.domain().clone();
    let k = core_domain.size();
    trace.push(TraceEvent::Core {
        image: domain.format_tuple(&c.image),
        retraction: domain.format_tuple(c.retraction.map()),
        steps: c.steps,
    });
    trace.push(TraceEvent::Criterion {
        statement: criterion(k).to_string(),
    });

    let mut structures: Vec<Recognized> = Vec::new();
    if k >= 2 {
        structures.extend(
            enumerate_chains(&core_domain)
                .into_iter()
                .map(Recognized::Chain),
        );
    }
    if k == 4 {
        structures.extend(
            enumerate_one_defect(&core_domain)
                .expect("four elements supported")
                .into_iter()
                .map(Recognized::OneDefect),
        );
    }
    let mut verified = Vec::new();
    let mut failures = Vec::new();
    for s in structures {
        let violation = is_multimorphism_structured(s.as_structured(), &core_lang);
        let (kind, structure) = describe(&s, &core_domain);
        trace.push(TraceEvent::Check {
            kind: kind.to_string(),
            structure,
            passed: violation.is_none(),
            function: violation.as_ref().map(|v| v.function.clone()),
        });
        match violation {
            None => verified.push(s),
            Some(violation) => failures.push(Failure {
                structure: s,
                violation,
            }),
        }
    }

    let witness_kind = if k == 1 {
        Some(WitnessKind::Constant)
    } else {
        verified.first().cloned().map(WitnessKind::Structured)
    };
    let verdict = if witness_kind.is_some() {
        Verdict::Tractable
    } else {
        Verdict::NpHard
    };
    trace.push(TraceEvent::Verdict { verdict });

    let witness = witness_kind.map(|kind| {
        let core_pair = match &kind {
            WitnessKind::Constant => {
                BinaryOpPair::new(OpTable::from_fn(1, |_, _| 0), OpTable::from_fn(1, |_, _| 0))
            }
            WitnessKind::Structured(r) => r.as_structured().pair().clone(),
        };
        let pair = core_pair.lift(&c.image, c.retraction.map());
        let lifted_verified = is_multimorphism(&pair, &functions_only, DEFAULT_CHECK_BUDGET)
            .ok()
            .map(|v| v.is_none());
        trace.push(TraceEvent::Lifted {
            verified: lifted_verified,
        });
        Witness {
            kind,
            core_pair,
            pair,
            lifted_verified,
        }
    });

    let graph = match &options.graph {
        Some(budget) if k >= 2 => {
            let ex = explore(&core_lang, budget);
            let g = GraphCorroboration {
                loop_witness: ex.witness.as_ref().map(|w| w.vertex.label(&core_domain)),
                verified_candidates: ex
                    .candidates
                    .iter()
                    .filter(|c| c.verified())
                    .map(|c| match &c.kind {
                        crate::graph::CandidateKind::Chain(ch) => Recognized::Chain(ch.clone()),
                        crate::graph::CandidateKind::OneDefect(o) => {
                            Recognized::OneDefect(o.clone())
                        }
                    })
                    .collect(),
                capped: ex.search.capped,
            };
            trace.push(TraceEvent::Graph {
                loop_witness: g.loop_witness.clone(),
                verified_candidates: g.verified_candidates.len(),
                capped: g.capped,
            });
            Some(g)
        }
        _ => None,
    };

    Ok(ClassificationReport {
        verdict,
        domain,
        core_domain: c.image.clone(),
        retraction: c.retraction.clone(),
        core_language: core_lang,
        criterion: criterion(k).to_string(),
        witness,
        verified,
        failures,
        ignored_relations,
        trace,
        graph,
    })
}

impl ClassificationReport {
    /// Counts of failed (chain, 1-defect chain) checks.
    pub fn failure_counts(&self) -> (usize, usize) {
        let chains = self
            .failures
            .iter()
            .filter(|f| matches!(f.structure, Recognized::Chain(_)))
            .count();
        (chains, self.failures.len() - chains)
    }

    /// Whether every recorded counterexample violates the inequality for its function.
    pub fn failures_replay(&self) -> bool {
        self.failures.iter().all(|f| {
            self.core_language
                .function(&f.violation.function)
                .is_some_and(|h| f.violation.replays(f.structure.as_structured().pair(), h))
        })
    }

    pub fn to_json_value(&self) -> Value {
        let core_domain = self.core_language.domain();
        let witness = self.witness.as_ref().map(|w| {
            let mut v = json!({ "kind": w.kind_name() });
            if let WitnessKind::Structured(r) = &w.kind {
                v["structure"] = json!(describe(r, core_domain).1);
            }
            let tables = w.pair.to_json_value(&self.domain);
            v["f"] = tables["f"].clone();
            v["g"] = tables["g"].clone();
            v["lifted_verified"] = json!(w.lifted_verified);
            v
        });
        let structure = |r: &Recognized| {
            let (kind, s) = describe(r, core_domain);
            json!({ "kind": kind, "structure": s })
        };
        let mut out = json!({
            "verdict": self.verdict,
            "domain": self.domain.labels(),
            "core_domain": self.domain.format_tuple(&self.core_domain),
            "retraction": self.domain.format_tuple(self.retraction.map()),
            "criterion": self.criterion,
            "witness": witness,
            "verified": self.verified.iter().map(structure).collect::<Vec<_>>(),
            "failures": self.failures.iter().map(|f| {
                let mut v = structure(&f.structure);
                v["counterexample"] = f.violation.to_json_value(core_domain);
                v
            }).collect::<Vec<_>>(),
            "ignored_relations": self.ignored_relations,
            "trace": self.trace,
        });
        if let Some(g) = &self.graph {
            out["graph"] = json!({
                "loop_witness": g.loop_witness,
                "verified_candidates": g.verified_candidates.iter().map(structure).collect::<Vec<_>>(),
                "capped": g.capped,
            });
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_pair_1, example_pair_2, gamma_ex, h_eq};
    use crate::gen;
    use crate::lang::CostFunction;
    use crate::morphisms::permutations;
    use proptest::prelude::*;

    #[test]
    fn gamma_ex_is_tractable_by_a_one_defect_chain() {
        let r = classify(&gamma_ex()).unwrap();
        assert_eq!(r.verdict, Verdict::Tractable);
        assert_eq!(r.core_domain, vec![0, 1, 2, 3]);
        let w = r.witness.as_ref().unwrap();
        assert_eq!(w.kind_name(), "one_defect");
        assert_eq!(w.lifted_verified, Some(true));
        let pairs: Vec<BinaryOpPair> = r
            .verified
            .iter()
            .map(|s| s.as_structured().pair().clone())
            .collect();
        assert!(pairs.contains(&example_pair_1()));
        assert!(pairs.contains(&example_pair_2()));
        assert_eq!(r.failure_counts().0, 24);
        assert!(r.failures_replay());
    }

    #[test]
    fn h_eq_is_hard() {
        let r = classify(&h_eq()).unwrap();
        assert_eq!(r.verdict, Verdict::NpHard);
        assert!(r.witness.is_none());
        assert_eq!(r.failure_counts(), (2, 0));
        assert!(r.failures_replay());
    }

    #[test]
    fn single_unary_retracts_to_a_point() {
        let u = CostFunction::from_zeros("u_ab", 1, 4, [vec![0], vec![1]]).unwrap();
        let lang = Language::new(Domain::letters(4), vec![u], vec![]).unwrap();
        let r = classify(&lang).unwrap();
        assert_eq!(r.verdict, Verdict::Tractable);
        assert_eq!(r.core_domain.len(), 1);
        let w = r.witness.unwrap();
        assert_eq!(w.kind, WitnessKind::Constant);
        assert_eq!(w.lifted_verified, Some(true));
    }

    #[test]
    fn five_elements_are_rejected() {
        let lang = Language::new(Domain::letters(5), vec![], vec![]).unwrap();
        assert_eq!(
            classify(&lang).unwrap_err(),
            ClassifyError::DomainTooLarge(5)
        );
    }

    #[test]
    fn json_has_the_documented_shape() {
        let v = classify(&gamma_ex()).unwrap().to_json_value();
        assert_eq!(v["verdict"], "tractable");
        assert_eq!(v["core_domain"], json!(["a", "b", "c", "d"]));
        assert_eq!(v["witness"]["kind"], "one_defect");
        assert_eq!(v["witness"]["f"].as_array().unwrap().len(), 4);
        assert!(v["trace"].as_array().unwrap().len() > 60);
    }

    #[test]
    fn relabelling_gamma_ex_keeps_the_verdict() {
        for perm in permutations(4) {
            let r = classify(&gamma_ex().relabel(&perm)).unwrap();
            assert_eq!(r.verdict, Verdict::Tractable);
        }
    }

    #[test]
    fn graph_corroboration_for_gamma_ex() {
        let opts = ClassifyOptions {
            graph: Some(GadgetBudget::default()),
        };
        let r = classify_with(&gamma_ex(), &opts).unwrap();
        let g = r.graph.unwrap();
        assert!(g.loop_witness.is_none());
        assert!(g.verified_candidates.iter().all(|c| r.verified.contains(c)));
        assert!(!g.verified_candidates.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn witnesses_verify_and_failures_replay(seed in any::<u64>()) {
            let mut rng = gen::rng(seed);
            let d = 2 + (seed % 3) as usize;
            let lang = gen::random_language(&mut rng, d, 3, 2);
            let r = classify(&lang).unwrap();
            prop_assert!(r.failures_replay());
            match r.verdict {
                Verdict::Tractable => {
                    let w = r.witness.as_ref().unwrap();
                    prop_assert_eq!(w.lifted_verified, Some(true));
                }
                Verdict::NpHard => {
                    if r.core_domain.len() == 4 {
                        prop_assert_eq!(r.failure_counts(), (24, 36));
                    }
                }
            }
        }

        #[test]
        fn core_retraction_keeps_the_verdict(seed in any::<u64>()) {
            let mut rng = gen::rng(seed);
            let lang = gen::random_noncore_language(&mut rng, 4);
            let r = classify(&lang).unwrap();
            let again = classify(&r.core_language).unwrap();
            prop_assert_eq!(r.verdict, again.verdict);
        }

        #[test]
        fn adding_a_compatible_function_keeps_tractability(seed in any::<u64>()) {
            let mut rng = gen::rng(seed);
            let lang = gen::random_language(&mut rng, 4, 2, 2);
            let r = classify(&lang).unwrap();
            if let Some(w) = &r.witness {
                let extra = gen::random_function_with(&mut rng, "extra", 2, &w.pair);
                let mut fns: Vec<CostFunction> = lang.functions().iter().map(|f| (**f).clone()).collect();
                fns.push(extra);
                let bigger = Language::new(lang.domain().clone(), fns, vec![]).unwrap();
                prop_assert_eq!(classify(&bigger).unwrap().verdict, Verdict::Tractable);
            }
        }
    }
}
