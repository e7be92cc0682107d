//! Seeded random languages, instances and operation-compatible cost functions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::endo::is_core;
use crate::lang::{
    all_tuples, decode, encode, tuple_count, CostFunction, Domain, Elem, Instance, Language,
};
use crate::morphisms::BinaryOpPair;
use crate::rational::Rational;

pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Each tuple is a zero independently with probability `zero_prob`.
pub fn random_function(
    rng: &mut GenRng,
    name: &str,
    arity: usize,
    d: usize,
    zero_prob: f64,
) -> CostFunction {
    CostFunction::from_fn(name, arity, d, |_| (!rng.gen_bool(zero_prob)) as u8)
}

/// `n_functions` functions `f0, f1, ...` of arity `1..=max_arity`.
pub fn random_language(
    rng: &mut GenRng,
    d: usize,
    n_functions: usize,
    max_arity: usize,
) -> Language {
    let functions = (0..n_functions)
        .map(|i| {
            let k = rng.gen_range(1..=max_arity);
            let p = rng.gen_range(0.3..0.8);
            random_function(rng, &format!("f{i}"), k, d, p)
        })
        .collect();
    Language::new(Domain::letters(d), functions, vec![]).expect("distinct names")
}

/// Random language that is a core (rejection sampling, unary functions help separate).
pub fn random_core_language(rng: &mut GenRng, d: usize) -> Language {
    loop {
        let n = rng.gen_range(2..=4);
        let l = random_language(rng, d, n, 2);
        if is_core(&l) {
            return l;
        }
    }
}

/// Random language that is not a core.
pub fn random_noncore_language(rng: &mut GenRng, d: usize) -> Language {
    loop {
        let n = rng.gen_range(1..=3);
        let functions = (0..n)
            .map(|i| {
                let k = rng.gen_range(1..=2);
                let p = rng.gen_range(0.5..0.95);
                random_function(rng, &format!("f{i}"), k, d, p)
            })
            .collect();
        let l = Language::new(Domain::letters(d), functions, vec![]).expect("distinct names");
        if !is_core(&l) {
            return l;
        }
    }
}

const WEIGHTS: [(i64, i64); 5] = [(1, 1), (2, 1), (3, 1), (1, 2), (3, 2)];

pub fn random_weight(rng: &mut GenRng) -> Rational {
    let (n, d) = WEIGHTS[rng.gen_range(0..WEIGHTS.len())];
    Rational::new(n, d)
}

/// Terms drawn uniformly from the language with random scopes (repeats allowed) and
/// weights from {1, 2, 3, 1/2, 3/2}; optionally a few pins.
pub fn random_instance(
    rng: &mut GenRng,
    language: &Language,
    n_vars: usize,
    n_terms: usize,
    pins: bool,
) -> Instance {
    let d = language.domain().size();
    let mut inst = Instance::new(language.domain().clone());
    for i in 0..n_vars {
        inst.add_variable(format!("v{i}")).expect("fresh names");
    }
    if language.functions().is_empty() || n_vars == 0 {
        return inst;
    }
    for _ in 0..n_terms {
        let f = language.functions()[rng.gen_range(0..language.functions().len())].clone();
        let scope = (0..f.arity()).map(|_| rng.gen_range(0..n_vars)).collect();
        let w = random_weight(rng);
        inst.add_term(w, f, scope).expect("well formed");
    }
    if pins {
        let count = rng.gen_range(0..=2.min(n_vars));
        for _ in 0..count {
            let v = rng.gen_range(0..n_vars);
            inst.pin(v, rng.gen_range(0..d)).expect("valid pin");
        }
    }
    inst
}

/// Random {0,1}-valued function admitting `(f, g)` as a multimorphism.
///
/// The zero set must be closed under `f` and `g`, and whenever `x` is a zero and `y` is not,
/// one of `f(x,y)`, `g(x,y)` must be a zero. Starting from a few random zeros, the set is
/// closed and repaired by adding missing images until both conditions hold.
pub fn random_function_with(
    rng: &mut GenRng,
    name: &str,
    arity: usize,
    pair: &BinaryOpPair,
) -> CostFunction {
    let d = pair.size();
    let n = tuple_count(d, arity);
    let seeds = rng.gen_range(1..=3.min(n));
    let mut zeros: BTreeSet<usize> = (0..seeds).map(|_| rng.gen_range(0..n)).collect();
    loop {
        close(&mut zeros, pair, d, arity);
        let mut broken = Vec::new();
        for &xi in &zeros {
            let x = decode(xi, d, arity);
            for yi in 0..n {
                if zeros.contains(&yi) {
                    continue;
                }
                let y = decode(yi, d, arity);
                let fx = encode(&pair.f.apply(&x, &y), d);
                let gx = encode(&pair.g.apply(&x, &y), d);
                if !zeros.contains(&fx) && !zeros.contains(&gx) {
                    broken.push((fx, gx));
                }
            }
        }
        if broken.is_empty() {
            break;
        }
        let &(fx, gx) = broken.choose(rng).expect("nonempty");
        zeros.insert(if rng.gen_bool(0.5) { fx } else { gx });
    }
    CostFunction::from_zeros(
        name,
        arity,
        d,
        zeros.into_iter().map(|i| decode(i, d, arity)),
    )
    .expect("valid tuples")
}

fn close(zeros: &mut BTreeSet<usize>, pair: &BinaryOpPair, d: usize, k: usize) {
    loop {
        let current: Vec<Vec<Elem>> = zeros.iter().map(|&i| decode(i, d, k)).collect();
        let mut added = false;
        for x in &current {
            for y in &current {
                for t in [pair.f.apply(x, y), pair.g.apply(x, y)] {
                    added |= zeros.insert(encode(&t, d));
                }
            }
        }
        if !added {
            return;
        }
    }
}

/// Language of random functions all admitting `(f, g)`.
pub fn random_language_with(
    rng: &mut GenRng,
    pair: &BinaryOpPair,
    n_functions: usize,
    max_arity: usize,
) -> Language {
    let functions = (0..n_functions)
        .map(|i| {
            let k = rng.gen_range(1..=max_arity);
            random_function_with(rng, &format!("f{i}"), k, pair)
        })
        .collect();
    Language::new(Domain::letters(pair.size()), functions, vec![]).expect("distinct names")
}

/// Every tuple of arity `k`, for callers that need deterministic scans.
pub fn tuples(d: usize, k: usize) -> Vec<Vec<Elem>> {
    all_tuples(d, k).collect()
}
