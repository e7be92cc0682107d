//! Worked-example languages, operation pairs and instances.

use crate::lang::{CostFunction, Domain, Instance, Language};
use crate::morphisms::{BinaryOpPair, OpTable};
use crate::rational::Rational;

fn unary(name: &str, zeros: [usize; 2]) -> CostFunction {
    CostFunction::from_zeros(name, 1, 4, zeros.map(|z| vec![z])).expect("valid unary")
}

/// The four-element core with two 1-defect chain multimorphisms and no chain one:
/// `u_xy(z) = 0` iff `z ∈ {x, y}`, and `h(x, y) = 1` iff `x = c` or `y = b`.
pub fn gamma_ex() -> Language {
    let h = CostFunction::from_fn("h", 2, 4, |t| (t[0] == 2 || t[1] == 1) as u8);
    Language::new(
        Domain::letters(4),
        vec![
            unary("u_bd", [1, 3]),
            unary("u_cd", [2, 3]),
            unary("u_ab", [0, 1]),
            unary("u_ac", [0, 2]),
            h,
        ],
        vec![],
    )
    .expect("valid language")
}

/// Two-element language with `h_eq(x, y) = 1` iff `x = y`.
pub fn h_eq() -> Language {
    let h = CostFunction::from_fn("h_eq", 2, 2, |t| (t[0] == t[1]) as u8);
    Language::new(Domain::letters(2), vec![h], vec![]).expect("valid language")
}

fn pair(f: [[usize; 4]; 4], g: [[usize; 4]; 4]) -> BinaryOpPair {
    let rows = |t: [[usize; 4]; 4]| t.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    BinaryOpPair::new(
        OpTable::from_rows(&rows(f)).expect("4x4"),
        OpTable::from_rows(&rows(g)).expect("4x4"),
    )
}

const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const D: usize = 3;

/// 1-defect chain with order `a < d < {b, c}`.
pub fn example_pair_1() -> BinaryOpPair {
    pair(
        [[A, A, A, A], [A, B, A, D], [A, A, C, D], [A, D, D, D]],
        [[A, B, C, D], [B, B, D, B], [C, D, C, C], [D, B, C, D]],
    )
}

/// 1-defect chain with order `{b, c} < a < d`.
pub fn example_pair_2() -> BinaryOpPair {
    pair(
        [[A, B, C, A], [B, B, A, B], [C, A, C, C], [A, B, C, D]],
        [[A, A, A, D], [A, B, D, D], [A, D, C, D], [D, D, D, D]],
    )
}

/// `h(x, y) + h(y, x)` over [`gamma_ex`].
pub fn symmetric_h_instance() -> Instance {
    let l = gamma_ex();
    let h = l.function("h").expect("h exists").clone();
    let mut i = Instance::new(l.domain().clone());
    let x = i.add_variable("x").expect("fresh");
    let y = i.add_variable("y").expect("fresh");
    i.add_term(Rational::one(), h.clone(), vec![x, y])
        .expect("valid");
    i.add_term(Rational::one(), h, vec![y, x]).expect("valid");
    i
}
