//! Exact solvers for tractable languages: chain-submodular minimization, the 1-defect
//! decomposition, and a dispatcher that falls back to the exhaustive oracle.

pub mod bisub;
pub mod mfm;
pub mod sfm;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::endo::{self, ConstantsReduction, EndoError};
use crate::lang::{CostFunction, Domain, Elem, Instance, Language, Pins};
use crate::morphisms::{
    direct_check, enumerate_chains, enumerate_one_defect, is_multimorphism_structured, recognize,
    BinaryOpPair, ChainOrder, OneDefectChain, Recognized,
};
use crate::oracle::{Compiled, Oracle, OracleError};
use crate::rational::Rational;

pub use bisub::{minimize_bisubmodular_bruteforce, DEFAULT_BISUBMODULAR_CAP};
pub use mfm::{Congruence, Coordinate, MfmProblem, StructuredMinimizer};
pub use sfm::{SfmConfig, SfmStrategy};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("function `{function}` does not admit the {structure} multimorphism")]
    Precondition { function: String, structure: String },
    #[error("tractable solvers accept only pins as crisp constraints; found `{0}`")]
    CrispConstraint(String),
    #[error("pair is not a {0}")]
    WrongStructure(&'static str),
    #[error("no tractable witness and brute force is over budget: {0}")]
    NoTractableWitness(OracleError),
    #[error("instance is infeasible")]
    Infeasible,
    #[error(transparent)]
    Decomposition(#[from] mfm::DecompositionError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Endo(#[from] EndoError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Auto,
    Brute,
    Chain,
    OneDefect,
}

/// How pinned variables reach the tractable solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PinHandling {
    /// Pinned variables are substituted by their constants before decomposition.
    #[default]
    Substitute,
    /// Pins are removed with the constants reduction (language must be a core); the witness is
    /// mapped back through the inverse automorphism and need not be lexicographically least.
    ReduceConstants,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub method: Method,
    pub witness: Option<BinaryOpPair>,
    pub oracle: Oracle,
    pub sfm: SfmConfig,
    pub cap: usize,
    pub pins: PinHandling,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::Auto,
            witness: None,
            oracle: Oracle::default(),
            sfm: SfmConfig::default(),
            cap: DEFAULT_BISUBMODULAR_CAP,
            pins: PinHandling::default(),
        }
    }
}

/// How an instance was solved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Route {
    Brute,
    Structured(Recognized),
    /// Solved on the core domain with the given structure (core elements as original labels).
    Core {
        image: Vec<Elem>,
        witness: Recognized,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub value: Rational,
    pub assignment: Vec<Elem>,
    pub route: Route,
}

/// First chain, then first 1-defect chain (enumeration order) that is a multimorphism.
pub fn find_structured_witness(language: &Language) -> Option<Recognized> {
    let domain = language.domain();
    if let Some(c) = enumerate_chains(domain).into_iter().find(|c| {
        is_multimorphism_structured(crate::morphisms::Structured::Chain(c), language).is_none()
    }) {
        return Some(Recognized::Chain(c));
    }
    if domain.size() == 4 {
        return enumerate_one_defect(domain)
            .expect("size 4 supported")
            .into_iter()
            .find(|o| {
                is_multimorphism_structured(crate::morphisms::Structured::OneDefect(o), language)
                    .is_none()
            })
            .map(Recognized::OneDefect);
    }
    None
}

fn distinct_functions(instance: &Instance) -> Vec<Arc<CostFunction>> {
    let mut seen: BTreeMap<String, Arc<CostFunction>> = BTreeMap::new();
    let mut out = Vec::new();
    for t in instance.terms() {
        let key = t.function.name().to_string();
        match seen.get(&key) {
            Some(f) if Arc::ptr_eq(f, &t.function) || **f == *t.function => {}
            _ => {
                seen.insert(key, t.function.clone());
                out.push(t.function.clone());
            }
        }
    }
    out
}

fn check_precondition(
    instance: &Instance,
    pair: &BinaryOpPair,
    structure: &str,
) -> Result<(), SolverError> {
    for f in distinct_functions(instance) {
        if direct_check(pair, &f).is_some() {
            return Err(SolverError::Precondition {
                function: f.name().to_string(),
                structure: structure.to_string(),
            });
        }
    }
    Ok(())
}

fn pins_only(instance: &Instance) -> Result<Vec<Option<Elem>>, SolverError> {
    if let Some(c) = instance.non_pin_constraints().next() {
        return Err(SolverError::CrispConstraint(c.relation.name().to_string()));
    }
    match instance.pins() {
        Pins::Contradictory => Err(SolverError::Infeasible),
        Pins::Consistent(p) => Ok(p),
    }
}

fn run_structured(
    instance: &Instance,
    coordinate: Coordinate,
    options: &SolveOptions,
) -> Result<(Rational, Vec<Elem>), SolverError> {
    let pins = pins_only(instance)?;
    let compiled = Compiled::new(instance)?;
    let coords: Vec<Coordinate> = pins
        .iter()
        .map(|p| match p {
            Some(e) => Coordinate::Fixed(*e),
            None => coordinate.clone(),
        })
        .collect();
    let objective = |x: &[Elem]| compiled.energy(x);
    let minimizer = StructuredMinimizer {
        objective: &objective,
        penalty: compiled.total_weight() + 1,
        sfm: options.sfm,
        cap: options.cap,
    };
    let (value, assignment) = minimizer.minimize(&coords)?;
    Ok((compiled.to_rational(value), assignment))
}

/// Exact optimum and lexicographically least optimal assignment of an instance whose
/// functions are all submodular on `chain`.
pub fn solve_chain(
    instance: &Instance,
    chain: &ChainOrder,
) -> Result<(Rational, Vec<Elem>), SolverError> {
    solve_chain_with(instance, chain, &SolveOptions::default())
}

pub fn solve_chain_with(
    instance: &Instance,
    chain: &ChainOrder,
    options: &SolveOptions,
) -> Result<(Rational, Vec<Elem>), SolverError> {
    check_precondition(instance, chain.pair(), "chain")?;
    run_structured(instance, Coordinate::Chain(chain.clone()), options)
}

/// Exact optimum and lexicographically least optimal assignment of an instance whose
/// functions all admit the 1-defect chain multimorphism `odc`.
pub fn solve_one_defect(
    instance: &Instance,
    odc: &OneDefectChain,
) -> Result<(Rational, Vec<Elem>), SolverError> {
    solve_one_defect_with(instance, odc, &SolveOptions::default())
}

pub fn solve_one_defect_with(
    instance: &Instance,
    odc: &OneDefectChain,
    options: &SolveOptions,
) -> Result<(Rational, Vec<Elem>), SolverError> {
    check_precondition(instance, odc.pair(), "1-defect chain")?;
    run_structured(instance, Coordinate::OneDefect(odc.clone()), options)
}

fn solve_with_witness(
    instance: &Instance,
    language: &Language,
    witness: &Recognized,
    options: &SolveOptions,
) -> Result<Option<Solution>, SolverError> {
    let has_pins =
        matches!(instance.pins(), Pins::Consistent(ref p) if p.iter().any(Option::is_some));
    if options.pins == PinHandling::ReduceConstants && has_pins {
        return match endo::reduce_constants(language, instance, &options.oracle)? {
            ConstantsReduction::Infeasible => Ok(None),
            ConstantsReduction::Unchanged(i) => solve_with_witness(&i, language, witness, options),
            ConstantsReduction::Reduced(r) => {
                let plain = SolveOptions {
                    pins: PinHandling::Substitute,
                    ..options.clone()
                };
                let Some(sol) = solve_with_witness(&r.instance, language, witness, &plain)? else {
                    return Ok(None);
                };
                let assignment = r.recover(&sol.assignment).ok_or(SolverError::Infeasible)?;
                let value = instance
                    .measure(&assignment)
                    .ok_or(SolverError::Infeasible)?;
                Ok(Some(Solution {
                    value,
                    assignment,
                    route: sol.route,
                }))
            }
        };
    }
    let result = match witness {
        Recognized::Chain(c) => solve_chain_with(instance, c, options),
        Recognized::OneDefect(o) => solve_one_defect_with(instance, o, options),
    };
    match result {
        Ok((value, assignment)) => Ok(Some(Solution {
            value,
            assignment,
            route: Route::Structured(witness.clone()),
        })),
        Err(SolverError::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

fn solve_brute(instance: &Instance, oracle: &Oracle) -> Result<Option<Solution>, OracleError> {
    Ok(oracle.solve(instance)?.map(|(value, assignment)| Solution {
        value,
        assignment,
        route: Route::Brute,
    }))
}

fn requested_witness(
    language: &Language,
    options: &SolveOptions,
    want: Method,
) -> Result<Option<Recognized>, SolverError> {
    let found = match &options.witness {
        Some(pair) => {
            Some(recognize(pair).ok_or(SolverError::WrongStructure("chain or 1-defect chain"))?)
        }
        None => match want {
            Method::Chain => enumerate_chains(language.domain())
                .into_iter()
                .find(|c| {
                    is_multimorphism_structured(crate::morphisms::Structured::Chain(c), language)
                        .is_none()
                })
                .map(Recognized::Chain),
            Method::OneDefect => match enumerate_one_defect(language.domain()) {
                Ok(list) => list
                    .into_iter()
                    .find(|o| {
                        is_multimorphism_structured(
                            crate::morphisms::Structured::OneDefect(o),
                            language,
                        )
                        .is_none()
                    })
                    .map(Recognized::OneDefect),
                Err(_) => None,
            },
            _ => find_structured_witness(language),
        },
    };
    match (&found, want) {
        (Some(Recognized::OneDefect(_)), Method::Chain) => {
            Err(SolverError::WrongStructure("chain"))
        }
        (Some(Recognized::Chain(_)), Method::OneDefect) => {
            Err(SolverError::WrongStructure("1-defect chain"))
        }
        _ => Ok(found),
    }
}

/// Solves an instance over `language`; `None` when it is infeasible.
///
/// With `Method::Auto`: a structured witness (given, or the first enumerated chain or
/// 1-defect chain of the language) is used when the instance has no crisp constraints besides
/// pins; otherwise a language that is not a core is solved on its core when there are no pins;
/// otherwise the exhaustive oracle is used within its budget.
pub fn solve(
    instance: &Instance,
    language: &Language,
    options: &SolveOptions,
) -> Result<Option<Solution>, SolverError> {
    if matches!(instance.pins(), Pins::Contradictory) {
        return Ok(None);
    }
    match options.method {
        Method::Brute => Ok(solve_brute(instance, &options.oracle)?),
        Method::Chain | Method::OneDefect => {
            let label = if options.method == Method::Chain {
                "chain"
            } else {
                "1-defect chain"
            };
            let witness = requested_witness(language, options, options.method)?.ok_or(
                SolverError::Precondition {
                    function: "*".to_string(),
                    structure: label.to_string(),
                },
            )?;
            solve_with_witness(instance, language, &witness, options)
        }
        Method::Auto => {
            let crisp_free = instance.non_pin_constraints().next().is_none();
            if crisp_free {
                if let Some(w) = requested_witness(language, options, Method::Auto)? {
                    return solve_with_witness(instance, language, &w, options);
                }
                let has_pins = matches!(instance.pins(), Pins::Consistent(ref p) if p.iter().any(Option::is_some));
                if !has_pins && options.witness.is_none() {
                    if let Some(sol) = solve_on_core(instance, language, options)? {
                        return Ok(Some(sol));
                    }
                }
            }
            match solve_brute(instance, &options.oracle) {
                Ok(s) => Ok(s),
                Err(e @ OracleError::BudgetExceeded { .. }) => {
                    Err(SolverError::NoTractableWitness(e))
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

/// Maps a pin-free instance onto the core of its language and solves it there if the core has
/// a structured witness. Core elements are reported as original elements.
fn solve_on_core(
    instance: &Instance,
    language: &Language,
    options: &SolveOptions,
) -> Result<Option<Solution>, SolverError> {
    let core = endo::core(language);
    if core.steps == 0 {
        return Ok(None);
    }
    let Some(witness) = find_structured_witness(&core.language) else {
        return Ok(None);
    };
    let core_domain: Domain = core.language.domain().clone();
    let mapped = instance.map_language(
        core_domain,
        |f| {
            core.language
                .function(f.name())
                .cloned()
                .unwrap_or_else(|| Arc::new(f.restrict(&core.image)))
        },
        |r| Arc::new(r.restrict(&core.image)),
    );
    let inner = SolveOptions {
        witness: None,
        ..options.clone()
    };
    let Some(sol) = solve_with_witness(&mapped, &core.language, &witness, &inner)? else {
        return Ok(None);
    };
    Ok(Some(Solution {
        value: sol.value,
        assignment: sol.assignment.iter().map(|&p| core.image[p]).collect(),
        route: Route::Core {
            image: core.image.clone(),
            witness,
        },
    }))
}
