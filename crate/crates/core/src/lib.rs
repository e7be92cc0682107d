//! Exact algorithms for finite-valued minimum constraint satisfaction problems over small
//! domains: an exhaustive oracle, endomorphisms and cores, multimorphism checking,
//! submodular and 1-defect solvers, a gadget-certified multimorphism graph, and a
//! four-element classifier.

pub mod classify;
pub mod endo;
pub mod fixtures;
pub mod gen;
pub mod graph;
pub mod lang;
pub mod morphisms;
pub mod oracle;
pub mod rational;
pub mod solver;

#[cfg(test)]
mod testing;

pub use classify::{
    classify, classify_with, ClassificationReport, ClassifyError, ClassifyOptions, Failure,
    TraceEvent, Verdict, Witness, WitnessKind,
};
pub use endo::{core, core_retract, endomorphisms, indicator_problem, is_core, Core, Endomorphism};
pub use graph::{explore, Exploration, GadgetBudget, HardnessWitness, Vertex};
pub use lang::{CostFunction, Domain, Elem, Instance, LangError, Language, Relation};
pub use morphisms::{
    binary_restriction_check, enumerate_chains, enumerate_one_defect, is_multimorphism,
    is_multimorphism_structured, recognize, BinaryOpPair, ChainOrder, MorphismError,
    OneDefectChain, OpTable, Recognized, Structured, Violation,
};
pub use oracle::{solve_brute, Oracle, OracleError, PartialCostTable};
pub use rational::Rational;
pub use solver::{
    solve, solve_chain, solve_one_defect, Method, Route, Solution, SolveOptions, SolverError,
};
