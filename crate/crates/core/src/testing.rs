//! Helpers shared by unit tests.

use crate::gen;
use crate::lang::{all_tuples, Elem, Instance, Language};
use crate::rational::Rational;

pub use crate::fixtures::gamma_ex;

pub fn random_language(seed: u64, d: usize, n_functions: usize, max_arity: usize) -> Language {
    gen::random_language(&mut gen::rng(seed), d, n_functions, max_arity)
}

pub fn random_core_language(seed: u64, d: usize) -> Language {
    gen::random_core_language(&mut gen::rng(seed), d)
}

pub fn random_instance_over(
    seed: u64,
    l: &Language,
    n_vars: usize,
    n_terms: usize,
    pins: bool,
) -> Instance {
    gen::random_instance(&mut gen::rng(seed), l, n_vars, n_terms, pins)
}

/// Random language over `d` elements plus a random instance over it.
pub fn random_instance(seed: u64, d: usize, n_vars: usize, n_terms: usize, pins: bool) -> Instance {
    let mut r = gen::rng(seed);
    let l = gen::random_language(&mut r, d, 3, 3);
    gen::random_instance(&mut r, &l, n_vars, n_terms, pins)
}

/// Every feasible assignment with its measure, in lexicographic order.
pub fn naive_all(inst: &Instance) -> Vec<(Rational, Vec<Elem>)> {
    all_tuples(inst.domain().size(), inst.num_vars())
        .filter_map(|a| inst.measure(&a).map(|m| (m, a)))
        .collect()
}
