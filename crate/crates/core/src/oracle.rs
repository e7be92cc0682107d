//! Exhaustive reference solver: optima, optimal-set projections, expressed tables, measure gaps.
//!
//! Assignments are enumerated lexicographically (first variable most significant, elements in
//! domain order) with branch-and-bound pruning on the non-negative partial cost.

use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

use crate::lang::{encode, tuple_count, Elem, Instance, Relation};
use crate::rational::Rational;

/// Default ceiling on the number of assignments an enumeration may cover.
pub const DEFAULT_BUDGET: u128 = 1 << 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration of {needed} assignments exceeds the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("instance is infeasible")]
    Infeasible,
    #[error("weights do not fit in 128-bit integers after scaling")]
    Overflow,
}

/// Integer-scaled view of an instance used by the enumerators and solvers.
#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub d: usize,
    pub n: usize,
    pub scale: BigInt,
    pub weights: Vec<i128>,
    pub tables: Vec<Arc<crate::lang::CostFunction>>,
    pub scopes: Vec<Vec<usize>>,
    /// Allowed values per variable after folding unary constraints.
    pub allowed: Vec<Vec<Elem>>,
    /// Constraints of arity ≥ 2 (and nullary), checked once all scope variables are set.
    pub crisp: Vec<(Arc<Relation>, Vec<usize>)>,
    terms_at: Vec<Vec<usize>>,
    crisp_at: Vec<Vec<usize>>,
    nullary_cost: i128,
    nullary_ok: bool,
}

impl Compiled {
    pub fn new(inst: &Instance) -> Result<Self, OracleError> {
        let d = inst.domain().size();
        let n = inst.num_vars();
        let scale = Rational::common_denominator(inst.terms().iter().map(|t| &t.weight));
        let mut weights = Vec::new();
        let mut tables = Vec::new();
        let mut scopes = Vec::new();
        let mut total: i128 = 0;
        for t in inst.terms() {
            let w = t
                .weight
                .scaled_to_i128(&scale)
                .ok_or(OracleError::Overflow)?;
            total = total.checked_add(w).ok_or(OracleError::Overflow)?;
            weights.push(w);
            tables.push(t.function.clone());
            scopes.push(t.scope.clone());
        }
        if total > i128::MAX / 4 {
            return Err(OracleError::Overflow);
        }
        let mut allowed: Vec<Vec<Elem>> = vec![(0..d).collect(); n];
        let mut crisp = Vec::new();
        for c in inst.constraints() {
            if c.scope.len() == 1 {
                let v = c.scope[0];
                allowed[v].retain(|&e| c.relation.contains(&[e]));
            } else {
                crisp.push((c.relation.clone(), c.scope.clone()));
            }
        }
        let mut terms_at = vec![Vec::new(); n];
        let mut nullary_cost = 0;
        for (i, s) in scopes.iter().enumerate() {
            match s.iter().max() {
                Some(&m) => terms_at[m].push(i),
                None => nullary_cost += weights[i] * tables[i].table()[0] as i128,
            }
        }
        let mut crisp_at = vec![Vec::new(); n];
        let mut nullary_ok = true;
        for (i, (r, s)) in crisp.iter().enumerate() {
            match s.iter().max() {
                Some(&m) => crisp_at[m].push(i),
                None => nullary_ok &= r.contains(&[]),
            }
        }
        Ok(Compiled {
            d,
            n,
            scale,
            weights,
            tables,
            scopes,
            allowed,
            crisp,
            terms_at,
            crisp_at,
            nullary_cost,
            nullary_ok,
        })
    }

    pub fn to_rational(&self, v: i128) -> Rational {
        Rational::from_big(num_rational::BigRational::new(
            BigInt::from(v),
            self.scale.clone(),
        ))
    }

    pub fn total_weight(&self) -> i128 {
        self.weights.iter().sum()
    }

    pub fn search_space(&self) -> u128 {
        self.allowed
            .iter()
            .fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128))
    }

    pub fn check_budget(&self, budget: u128) -> Result<(), OracleError> {
        let needed = self.search_space();
        if needed > budget {
            Err(OracleError::BudgetExceeded { needed, budget })
        } else {
            Ok(())
        }
    }

    /// Objective of a complete assignment ignoring crisp constraints.
    pub fn energy(&self, a: &[Elem]) -> i128 {
        let mut total = self.nullary_cost;
        for (i, s) in self.scopes.iter().enumerate() {
            let idx = s.iter().fold(0, |acc, &v| acc * self.d + a[v]);
            total += self.weights[i] * self.tables[i].table()[idx] as i128;
        }
        total
    }

    fn step(&self, depth: usize, a: &[Elem], buf: &mut Vec<Elem>) -> Option<i128> {
        for &ci in &self.crisp_at[depth] {
            let (r, s) = &self.crisp[ci];
            buf.clear();
            buf.extend(s.iter().map(|&v| a[v]));
            if !r.contains(buf) {
                return None;
            }
        }
        let mut cost = 0;
        for &ti in &self.terms_at[depth] {
            buf.clear();
            buf.extend(self.scopes[ti].iter().map(|&v| a[v]));
            cost += self.weights[ti] * self.tables[ti].table()[encode(buf, self.d)] as i128;
        }
        Some(cost)
    }

    /// Lexicographic branch and bound. `visit` is called on each reached leaf with its cost
    /// and returns the new pruning bound: subtrees whose partial cost exceeds it are skipped.
    pub fn enumerate<V: FnMut(i128, &[Elem]) -> i128>(&self, allowed: &[Vec<Elem>], visit: &mut V) {
        if !self.nullary_ok {
            return;
        }
        let mut a = vec![0; self.n];
        let mut bound = i128::MAX;
        let mut buf = Vec::new();
        self.rec(
            0,
            self.nullary_cost,
            allowed,
            &mut a,
            &mut bound,
            &mut buf,
            visit,
        );
    }

    #[allow(clippy::too_many_arguments)]
    fn rec<V: FnMut(i128, &[Elem]) -> i128>(
        &self,
        depth: usize,
        partial: i128,
        allowed: &[Vec<Elem>],
        a: &mut Vec<Elem>,
        bound: &mut i128,
        buf: &mut Vec<Elem>,
        visit: &mut V,
    ) {
        if partial > *bound {
            return;
        }
        if depth == self.n {
            *bound = visit(partial, a);
            return;
        }
        for &e in &allowed[depth] {
            a[depth] = e;
            let Some(c) = self.step(depth, a, buf) else {
                continue;
            };
            let next = partial + c;
            if next > *bound {
                continue;
            }
            self.rec(depth + 1, next, allowed, a, bound, buf, visit);
        }
    }

    /// Lexicographically least optimal assignment under the given domains.
    pub fn best(&self, allowed: &[Vec<Elem>]) -> Option<(i128, Vec<Elem>)> {
        let mut best: Option<(i128, Vec<Elem>)> = None;
        self.enumerate(allowed, &mut |c, a| {
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, a.to_vec()));
            }
            best.as_ref().map_or(i128::MAX, |(b, _)| b - 1)
        });
        best
    }
}

/// Optimal value of an instance with the variables in `vars` pinned to each tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialCostTable {
    arity: usize,
    domain_size: usize,
    entries: Vec<Option<Rational>>,
}

impl PartialCostTable {
    pub fn new(arity: usize, domain_size: usize, entries: Vec<Option<Rational>>) -> Self {
        assert_eq!(entries.len(), tuple_count(domain_size, arity));
        PartialCostTable {
            arity,
            domain_size,
            entries,
        }
    }

    pub fn total(arity: usize, domain_size: usize, values: Vec<Rational>) -> Self {
        Self::new(arity, domain_size, values.into_iter().map(Some).collect())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn get(&self, t: &[Elem]) -> Option<&Rational> {
        self.entries[encode(t, self.domain_size)].as_ref()
    }

    pub fn entries(&self) -> &[Option<Rational>] {
        &self.entries
    }

    pub fn is_total(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    /// Values in tuple order if the table is total.
    pub fn values(&self) -> Option<Vec<Rational>> {
        self.entries.iter().cloned().collect()
    }
}

/// Optimal value together with the set of optimal tuples on the projected variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Projection {
    pub optimum: Rational,
    pub tuples: BTreeSet<Vec<Elem>>,
}

impl Projection {
    pub fn to_relation(
        &self,
        name: impl Into<String>,
        arity: usize,
        domain_size: usize,
    ) -> Relation {
        Relation::new(name, arity, domain_size, self.tuples.iter().cloned())
            .expect("projected tuples are well formed")
    }
}

/// Exhaustive solver with an assignment-count budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Oracle {
    pub budget: u128,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            budget: DEFAULT_BUDGET,
        }
    }
}

impl Oracle {
    pub fn with_budget(budget: u128) -> Self {
        Oracle { budget }
    }

    /// Optimum and lexicographically least optimal assignment; `None` if infeasible.
    pub fn solve(&self, inst: &Instance) -> Result<Option<(Rational, Vec<Elem>)>, OracleError> {
        let c = Compiled::new(inst)?;
        c.check_budget(self.budget)?;
        Ok(c.best(&c.allowed).map(|(v, a)| (c.to_rational(v), a)))
    }

    /// Set of restrictions of optimal assignments to `vars`.
    pub fn project_optsol(
        &self,
        inst: &Instance,
        vars: &[usize],
    ) -> Result<Projection, OracleError> {
        let c = Compiled::new(inst)?;
        c.check_budget(self.budget)?;
        let mut best = i128::MAX;
        let mut tuples = BTreeSet::new();
        c.enumerate(&c.allowed, &mut |cost, a| {
            if cost < best {
                best = cost;
                tuples.clear();
            }
            tuples.insert(vars.iter().map(|&v| a[v]).collect());
            best
        });
        if tuples.is_empty() {
            return Err(OracleError::Infeasible);
        }
        Ok(Projection {
            optimum: c.to_rational(best),
            tuples,
        })
    }

    /// Table of optima with `vars` pinned to every tuple.
    pub fn express(
        &self,
        inst: &Instance,
        vars: &[usize],
    ) -> Result<PartialCostTable, OracleError> {
        let c = Compiled::new(inst)?;
        c.check_budget(self.budget)?;
        let k = vars.len();
        let mut entries = Vec::with_capacity(tuple_count(c.d, k));
        for idx in 0..tuple_count(c.d, k) {
            let t = crate::lang::decode(idx, c.d, k);
            let mut allowed = c.allowed.clone();
            for (&v, &e) in vars.iter().zip(&t) {
                allowed[v].retain(|&x| x == e);
            }
            entries.push(c.best(&allowed).map(|(v, _)| c.to_rational(v)));
        }
        Ok(PartialCostTable::new(k, c.d, entries))
    }

    /// Difference between the second-smallest and smallest feasible measures.
    pub fn min_gap(&self, inst: &Instance) -> Result<Option<Rational>, OracleError> {
        let c = Compiled::new(inst)?;
        c.check_budget(self.budget)?;
        let mut first = i128::MAX;
        let mut second = i128::MAX;
        let mut feasible = false;
        c.enumerate(&c.allowed, &mut |cost, _| {
            feasible = true;
            if cost < first {
                second = first;
                first = cost;
            } else if cost > first && cost < second {
                second = cost;
            }
            if second == i128::MAX {
                i128::MAX
            } else {
                second - 1
            }
        });
        if !feasible {
            return Err(OracleError::Infeasible);
        }
        Ok((second != i128::MAX).then(|| c.to_rational(second - first)))
    }
}

pub fn solve_brute(inst: &Instance) -> Result<Option<(Rational, Vec<Elem>)>, OracleError> {
    Oracle::default().solve(inst)
}

pub fn project_optsol(inst: &Instance, vars: &[usize]) -> Result<Projection, OracleError> {
    Oracle::default().project_optsol(inst, vars)
}

pub fn express(inst: &Instance, vars: &[usize]) -> Result<PartialCostTable, OracleError> {
    Oracle::default().express(inst, vars)
}

pub fn min_gap(inst: &Instance) -> Result<Option<Rational>, OracleError> {
    Oracle::default().min_gap(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{CostFunction, Domain, Language};
    use crate::testing::{gamma_ex, naive_all};
    use proptest::prelude::*;

    fn inst_over(l: &Language, vars: &[&str]) -> Instance {
        let mut i = Instance::new(l.domain().clone());
        for v in vars {
            i.add_variable(*v).unwrap();
        }
        i
    }

    #[test]
    fn empty_instance() {
        let l = gamma_ex();
        let i = inst_over(&l, &[]);
        assert_eq!(solve_brute(&i).unwrap(), Some((Rational::zero(), vec![])));
        assert_eq!(min_gap(&i).unwrap(), None);
        let x = inst_over(&l, &["x"]);
        let p = project_optsol(&x, &[0]).unwrap();
        assert_eq!(p.tuples.len(), 4);
    }

    #[test]
    fn contradictory_pins_infeasible() {
        let l = gamma_ex();
        let mut i = inst_over(&l, &["x"]);
        i.pin(0, 0).unwrap();
        i.pin(0, 1).unwrap();
        assert_eq!(solve_brute(&i).unwrap(), None);
        assert_eq!(min_gap(&i), Err(OracleError::Infeasible));
        assert_eq!(project_optsol(&i, &[0]), Err(OracleError::Infeasible));
    }

    #[test]
    fn symmetric_h_instance_has_optimum_zero() {
        let l = gamma_ex();
        let h = l.function("h").unwrap().clone();
        let mut i = inst_over(&l, &["x", "y"]);
        i.add_term(Rational::one(), h.clone(), vec![0, 1]).unwrap();
        i.add_term(Rational::one(), h, vec![1, 0]).unwrap();
        assert_eq!(
            solve_brute(&i).unwrap(),
            Some((Rational::zero(), vec![0, 0]))
        );
    }

    #[test]
    fn projections_and_gaps() {
        let l = gamma_ex();
        let u = l.function("u_ab").unwrap().clone();
        let mut i = inst_over(&l, &["x"]);
        i.add_term(Rational::one(), u.clone(), vec![0]).unwrap();
        let p = project_optsol(&i, &[0]).unwrap();
        assert_eq!(p.tuples, [vec![0], vec![1]].into_iter().collect());
        assert_eq!(min_gap(&i).unwrap(), Some(Rational::one()));
        let mut j = inst_over(&l, &["x"]);
        j.add_term(Rational::new(1, 3), u, vec![0]).unwrap();
        assert_eq!(min_gap(&j).unwrap(), Some(Rational::new(1, 3)));
    }

    #[test]
    fn express_reproduces_single_term() {
        let l = gamma_ex();
        let h = l.function("h").unwrap().clone();
        let mut i = inst_over(&l, &["x", "y"]);
        i.add_term(Rational::one(), h.clone(), vec![0, 1]).unwrap();
        let t = express(&i, &[0, 1]).unwrap();
        assert!(t.is_total());
        for (idx, v) in t.values().unwrap().iter().enumerate() {
            assert_eq!(*v, Rational::from(h.table()[idx] as u32));
        }
    }

    #[test]
    fn express_marks_unsatisfiable_pins() {
        let l = gamma_ex();
        let mut i = inst_over(&l, &["x"]);
        i.pin(0, 2).unwrap();
        let t = express(&i, &[0]).unwrap();
        assert!(!t.is_total());
        assert_eq!(t.get(&[2]), Some(&Rational::zero()));
        assert_eq!(t.get(&[0]), None);
    }

    #[test]
    fn express_min_convolution() {
        let d = Domain::letters(3);
        let h1 = Arc::new(CostFunction::from_fn("h1", 2, 3, |t| (t[0] > t[1]) as u8));
        let h2 = Arc::new(CostFunction::from_fn("h2", 2, 3, |t| (t[0] == t[1]) as u8));
        let mut i = Instance::new(d);
        let x = i.add_variable("x").unwrap();
        let u = i.add_variable("u").unwrap();
        let y = i.add_variable("y").unwrap();
        i.add_term(Rational::one(), h1.clone(), vec![x, u]).unwrap();
        i.add_term(Rational::from_integer(2), h2.clone(), vec![u, y])
            .unwrap();
        let t = express(&i, &[x, y]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let expect = (0..3)
                    .map(|m| h1.value(&[a, m]) as i64 + 2 * h2.value(&[m, b]) as i64)
                    .min()
                    .unwrap();
                assert_eq!(t.get(&[a, b]), Some(&Rational::from_integer(expect)));
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let l = gamma_ex();
        let names: Vec<String> = (0..17).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let i = inst_over(&l, &refs);
        assert!(matches!(
            solve_brute(&i),
            Err(OracleError::BudgetExceeded { .. })
        ));
        assert!(Oracle::with_budget(u128::MAX)
            .solve(&inst_over(&l, &refs[..3]))
            .is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn oracle_matches_naive_scan(seed in any::<u64>()) {
            let inst = crate::testing::random_instance(seed, 3, 4, 5, true);
            let naive = naive_all(&inst);
            let best = naive.iter().map(|(v, _)| v.clone()).min();
            let solved = solve_brute(&inst).unwrap();
            prop_assert_eq!(solved.as_ref().map(|s| s.0.clone()), best.clone());
            if let Some((v, a)) = &solved {
                let lex_least = naive.iter().find(|(m, _)| m == v).map(|(_, a)| a.clone()).unwrap();
                prop_assert_eq!(a, &lex_least);
                let proj = project_optsol(&inst, &[0, 1]).unwrap();
                let expect: BTreeSet<Vec<usize>> = naive.iter().filter(|(m, _)| m == v)
                    .map(|(_, a)| vec![a[0], a[1]]).collect();
                prop_assert_eq!(proj.tuples, expect);
                let second = naive.iter().map(|(m, _)| m.clone()).filter(|m| m > v).min();
                prop_assert_eq!(min_gap(&inst).unwrap(), second.map(|s| s - v.clone()));
                let table = express(&inst, &[0, 2]).unwrap();
                for t in crate::lang::all_tuples(3, 2) {
                    let e = naive.iter().filter(|(_, a)| a[0] == t[0] && a[2] == t[1])
                        .map(|(m, _)| m.clone()).min();
                    prop_assert_eq!(table.get(&t).cloned(), e);
                }
            }
        }
    }
}
