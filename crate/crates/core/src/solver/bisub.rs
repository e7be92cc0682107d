//! Bisubmodular functions on `{0,1,2}^n`: the `(u, v)` operations and a capped exhaustive
//! minimizer.

use thiserror::Error;

use crate::lang::{all_tuples, Elem};
use crate::morphisms::{BinaryOpPair, OpTable};

/// Default limit on the number of variables the exhaustive minimizer accepts.
pub const DEFAULT_BISUBMODULAR_CAP: usize = 14;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("bisubmodular brute force limited to {cap} variables, got {n}")]
pub struct CapExceeded {
    pub n: usize,
    pub cap: usize,
}

/// `u(x, y) = min{x, y}` except on `{1, 2}` where it is 0.
pub fn bisub_u(x: Elem, y: Elem) -> Elem {
    if x + y == 3 && x != y {
        0
    } else {
        x.min(y)
    }
}

/// `v(x, y) = max{x, y}` except on `{1, 2}` where it is 0.
pub fn bisub_v(x: Elem, y: Elem) -> Elem {
    if x + y == 3 && x != y {
        0
    } else {
        x.max(y)
    }
}

pub fn bisubmodular_pair() -> BinaryOpPair {
    BinaryOpPair::new(OpTable::from_fn(3, bisub_u), OpTable::from_fn(3, bisub_v))
}

/// Checks `h(u(x,y)) + h(v(x,y)) ≤ h(x) + h(y)` for every pair of tuples of a table over
/// `{0,1,2}^k` (first coordinate most significant).
pub fn is_bisubmodular<T>(k: usize, table: &[T]) -> bool
where
    T: Copy + std::ops::Add<Output = T> + PartialOrd,
{
    let tuples: Vec<Vec<Elem>> = all_tuples(3, k).collect();
    let index = |t: &[Elem]| t.iter().fold(0, |acc, &e| acc * 3 + e);
    for (i, x) in tuples.iter().enumerate() {
        for y in &tuples[i + 1..] {
            let u: Vec<Elem> = x.iter().zip(y).map(|(&a, &b)| bisub_u(a, b)).collect();
            let v: Vec<Elem> = x.iter().zip(y).map(|(&a, &b)| bisub_v(a, b)).collect();
            if table[index(&u)] + table[index(&v)] > table[index(x)] + table[index(y)] {
                return false;
            }
        }
    }
    true
}

/// Lexicographically least minimizer of `oracle` over `{0,1,2}^n` by full enumeration.
pub fn minimize_bisubmodular_bruteforce<T: Ord + Clone>(
    n: usize,
    cap: usize,
    mut oracle: impl FnMut(&[Elem]) -> T,
) -> Result<(T, Vec<Elem>), CapExceeded> {
    if n > cap {
        return Err(CapExceeded { n, cap });
    }
    let mut z = vec![0; n];
    let mut best = (oracle(&z), z.clone());
    'outer: loop {
        let mut i = n;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            z[i] += 1;
            if z[i] < 3 {
                break;
            }
            z[i] = 0;
        }
        let v = oracle(&z);
        if v < best.0 {
            best = (v, z.clone());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::CostFunction;
    use crate::morphisms::direct_check;
    use proptest::prelude::*;

    #[test]
    fn operations_match_the_definition() {
        assert_eq!(bisub_u(1, 2), 0);
        assert_eq!(bisub_v(2, 1), 0);
        assert_eq!(bisub_u(0, 2), 0);
        assert_eq!(bisub_v(0, 2), 2);
        assert_eq!(bisub_v(1, 1), 1);
    }

    #[test]
    fn constant_oracle_returns_zero_tuple() {
        let (v, t) = minimize_bisubmodular_bruteforce(4, 14, |_| 5).unwrap();
        assert_eq!((v, t), (5, vec![0, 0, 0, 0]));
    }

    #[test]
    fn cap_is_enforced() {
        let err = minimize_bisubmodular_bruteforce(15, 14, |_| 0).unwrap_err();
        assert_eq!(err, CapExceeded { n: 15, cap: 14 });
    }

    proptest! {
        #[test]
        fn table_check_agrees_with_multimorphism_check(table in proptest::collection::vec(0u8..2, 9)) {
            let h = CostFunction::from_table("h", 2, 3, table.clone());
            let direct = direct_check(&bisubmodular_pair(), &h).is_none();
            prop_assert_eq!(is_bisubmodular(2, &table), direct);
        }

        #[test]
        fn brute_force_finds_the_scan_minimum(table in proptest::collection::vec(-5i64..5, 9)) {
            let (v, t) = minimize_bisubmodular_bruteforce(2, 14, |z| table[z[0] * 3 + z[1]]).unwrap();
            let min = *table.iter().min().unwrap();
            prop_assert_eq!(v, min);
            let first = table.iter().position(|&x| x == min).unwrap();
            prop_assert_eq!(t, vec![first / 3, first % 3]);
        }
    }
}
