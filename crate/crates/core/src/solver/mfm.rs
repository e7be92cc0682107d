//! Multimorphism function minimisation: per-coordinate operation pairs, congruences and
//! quotient decomposition, and the structured minimizer for mixtures of chain and 1-defect
//! coordinates.

use std::cell::RefCell;
use std::collections::BTreeSet;

use rand::Rng;

use crate::gen::GenRng;
use crate::lang::Elem;
use crate::morphisms::{BinaryOpPair, ChainOrder, DefectPlacement, OneDefectChain};

use super::bisub::{minimize_bisubmodular_bruteforce, CapExceeded};
use super::sfm::{self, SfmConfig, SfmError, SfmProblem};

/// Mixed-radix index of `t` where coordinate `i` ranges over `sizes[i]` values.
pub fn mixed_index(t: &[Elem], sizes: &[usize]) -> usize {
    t.iter().zip(sizes).fold(0, |acc, (&e, &s)| acc * s + e)
}

fn mixed_tuples(sizes: &[usize]) -> Vec<Vec<Elem>> {
    let total: usize = sizes.iter().product();
    (0..total)
        .map(|mut idx| {
            let mut t = vec![0; sizes.len()];
            for i in (0..sizes.len()).rev() {
                t[i] = idx % sizes[i];
                idx /= sizes[i];
            }
            t
        })
        .collect()
}

/// `{0,1}`-valued term over a few coordinates, weighted by a positive integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MfmTerm {
    pub weight: i128,
    pub scope: Vec<usize>,
    pub table: Vec<u8>,
}

/// Objective `Σ w·t(x|scope)` over `D_1 × … × D_n`, with operation pair `(f_i, g_i)` on `D_i`.
#[derive(Clone, Debug)]
pub struct MfmProblem {
    pub pairs: Vec<BinaryOpPair>,
    pub terms: Vec<MfmTerm>,
}

impl MfmProblem {
    pub fn sizes(&self) -> Vec<usize> {
        self.pairs.iter().map(BinaryOpPair::size).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.pairs.len()
    }

    pub fn evaluate(&self, x: &[Elem]) -> i128 {
        let sizes = self.sizes();
        self.terms
            .iter()
            .map(|t| {
                let local: Vec<usize> = t.scope.iter().map(|&v| sizes[v]).collect();
                let idx = t
                    .scope
                    .iter()
                    .zip(&local)
                    .fold(0, |acc, (&v, &s)| acc * s + x[v]);
                t.weight * t.table[idx] as i128
            })
            .sum()
    }

    pub fn total_weight(&self) -> i128 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Exhaustive check of `h(f(x,y)) + h(g(x,y)) ≤ h(x) + h(y)` with coordinate-wise operations.
    pub fn is_instance(&self) -> bool {
        let tuples = mixed_tuples(&self.sizes());
        let values: Vec<i128> = tuples.iter().map(|t| self.evaluate(t)).collect();
        let sizes = self.sizes();
        for (i, x) in tuples.iter().enumerate() {
            for (j, y) in tuples.iter().enumerate().skip(i + 1) {
                let (fx, gx) = self.apply(x, y);
                let lhs = values[mixed_index(&fx, &sizes)] + values[mixed_index(&gx, &sizes)];
                if lhs > values[i] + values[j] {
                    return false;
                }
            }
        }
        true
    }

    fn apply(&self, x: &[Elem], y: &[Elem]) -> (Vec<Elem>, Vec<Elem>) {
        let f = (0..x.len())
            .map(|i| self.pairs[i].f.get(x[i], y[i]))
            .collect();
        let g = (0..x.len())
            .map(|i| self.pairs[i].g.get(x[i], y[i]))
            .collect();
        (f, g)
    }

    /// Lexicographically least minimizer by enumeration.
    pub fn brute_minimum(&self) -> (i128, Vec<Elem>) {
        mixed_tuples(&self.sizes())
            .into_iter()
            .map(|t| (self.evaluate(&t), t))
            .min()
            .expect("product of nonempty domains")
    }

    /// Random instance: weighted `{0,1}` terms whose zero sets are repaired until each term
    /// admits the coordinate-wise pair.
    pub fn random(
        rng: &mut GenRng,
        pairs: Vec<BinaryOpPair>,
        n_terms: usize,
        max_arity: usize,
    ) -> Self {
        let n = pairs.len();
        let terms = (0..n_terms)
            .map(|_| {
                let k = rng.gen_range(1..=max_arity.min(n));
                let mut scope: Vec<usize> = Vec::new();
                while scope.len() < k {
                    let v = rng.gen_range(0..n);
                    if !scope.contains(&v) {
                        scope.push(v);
                    }
                }
                let local: Vec<&BinaryOpPair> = scope.iter().map(|&v| &pairs[v]).collect();
                MfmTerm {
                    weight: rng.gen_range(1..=3),
                    table: random_compatible_table(rng, &local),
                    scope,
                }
            })
            .collect();
        MfmProblem { pairs, terms }
    }
}

/// `{0,1}` table over the product of the pairs' domains admitting the coordinate-wise pair.
pub fn random_compatible_table(rng: &mut GenRng, pairs: &[&BinaryOpPair]) -> Vec<u8> {
    let sizes: Vec<usize> = pairs.iter().map(|p| p.size()).collect();
    let tuples = mixed_tuples(&sizes);
    let n = tuples.len();
    let apply = |x: &[Elem], y: &[Elem]| -> (usize, usize) {
        let f: Vec<Elem> = (0..x.len()).map(|i| pairs[i].f.get(x[i], y[i])).collect();
        let g: Vec<Elem> = (0..x.len()).map(|i| pairs[i].g.get(x[i], y[i])).collect();
        (mixed_index(&f, &sizes), mixed_index(&g, &sizes))
    };
    let seeds = rng.gen_range(1..=3.min(n));
    let mut zeros: BTreeSet<usize> = (0..seeds).map(|_| rng.gen_range(0..n)).collect();
    loop {
        loop {
            let current: Vec<usize> = zeros.iter().copied().collect();
            let mut added = false;
            for &a in &current {
                for &b in &current {
                    let (f, g) = apply(&tuples[a], &tuples[b]);
                    added |= zeros.insert(f);
                    added |= zeros.insert(g);
                }
            }
            if !added {
                break;
            }
        }
        let mut broken = Vec::new();
        for &a in &zeros {
            for b in 0..n {
                if !zeros.contains(&b) {
                    let (f, g) = apply(&tuples[a], &tuples[b]);
                    if !zeros.contains(&f) && !zeros.contains(&g) {
                        broken.push((f, g));
                    }
                }
            }
        }
        if broken.is_empty() {
            break;
        }
        let (f, g) = broken[rng.gen_range(0..broken.len())];
        zeros.insert(if rng.gen_bool(0.5) { f } else { g });
    }
    (0..n).map(|i| (!zeros.contains(&i)) as u8).collect()
}

/// Partition of a domain into classes, ordered by their least element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Congruence {
    classes: Vec<Vec<Elem>>,
    class_of: Vec<usize>,
}

impl Congruence {
    /// Builds the partition; `None` unless `classes` partition `0..size`.
    pub fn new(size: usize, classes: Vec<Vec<Elem>>) -> Option<Self> {
        let mut class_of = vec![usize::MAX; size];
        let mut classes: Vec<Vec<Elem>> = classes
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        classes.sort();
        for (k, c) in classes.iter().enumerate() {
            for &e in c {
                if e >= size || class_of[e] != usize::MAX {
                    return None;
                }
                class_of[e] = k;
            }
        }
        if class_of.contains(&usize::MAX) {
            return None;
        }
        Some(Congruence { classes, class_of })
    }

    pub fn classes(&self) -> &[Vec<Elem>] {
        &self.classes
    }

    pub fn class_of(&self, e: Elem) -> usize {
        self.class_of[e]
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Whether both operations respect the partition.
    pub fn is_congruence_of(&self, pair: &BinaryOpPair) -> bool {
        self.quotient(pair).is_some()
    }

    /// Quotient pair on class indices, if well defined.
    pub fn quotient(&self, pair: &BinaryOpPair) -> Option<BinaryOpPair> {
        let m = self.classes.len();
        let mut f = vec![vec![None; m]; m];
        let mut g = vec![vec![None; m]; m];
        let d = pair.size();
        for x in 0..d {
            for y in 0..d {
                let (cx, cy) = (self.class_of[x], self.class_of[y]);
                for (table, op) in [(&mut f, &pair.f), (&mut g, &pair.g)] {
                    let c = self.class_of[op.get(x, y)];
                    match table[cx][cy] {
                        None => table[cx][cy] = Some(c),
                        Some(prev) if prev != c => return None,
                        _ => {}
                    }
                }
            }
        }
        let build = |t: &Vec<Vec<Option<usize>>>| {
            crate::morphisms::OpTable::from_fn(m, |a, b| t[a][b].expect("every class pair visited"))
        };
        Some(BinaryOpPair::new(build(&f), build(&g)))
    }
}

/// Every congruence of `pair`, including the two trivial ones.
pub fn congruences(pair: &BinaryOpPair) -> Vec<Congruence> {
    let d = pair.size();
    let mut out = Vec::new();
    let mut rgs = vec![0usize; d];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, d: usize, out: &mut Vec<Vec<usize>>) {
        if i == d {
            out.push(rgs.clone());
            return;
        }
        for c in 0..=max + 1 {
            rgs[i] = c;
            rec(i + 1, max.max(c), rgs, d, out);
        }
    }
    let mut strings = Vec::new();
    if d > 0 {
        rec(1, 0, &mut rgs, d, &mut strings);
    }
    for s in strings {
        let m = s.iter().max().map_or(0, |&x| x + 1);
        let mut classes = vec![Vec::new(); m];
        for (e, &c) in s.iter().enumerate() {
            classes[c].push(e);
        }
        let cong = Congruence::new(d, classes).expect("restricted growth string is a partition");
        if cong.is_congruence_of(pair) {
            out.push(cong);
        }
    }
    out
}

/// `h'(z) = min { h(x) : x_i ∈ class z_i }` by enumeration inside the blocks.
pub fn quotient_value(problem: &MfmProblem, congs: &[Congruence], z: &[usize]) -> i128 {
    let blocks: Vec<&Vec<Elem>> = congs.iter().zip(z).map(|(c, &k)| &c.classes()[k]).collect();
    let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
    mixed_tuples(&sizes)
        .into_iter()
        .map(|t| {
            let x: Vec<Elem> = t.iter().zip(&blocks).map(|(&i, b)| b[i]).collect();
            problem.evaluate(&x)
        })
        .min()
        .expect("classes are nonempty")
}

/// Minimum of `h'` over the quotient product and a lexicographically least minimizing class tuple.
pub fn quotient_minimum(problem: &MfmProblem, congs: &[Congruence]) -> (i128, Vec<usize>) {
    let sizes: Vec<usize> = congs.iter().map(Congruence::len).collect();
    mixed_tuples(&sizes)
        .into_iter()
        .map(|z| (quotient_value(problem, congs, &z), z))
        .min()
        .expect("nonempty quotient")
}

/// `h'` as a problem on the quotient domains with the quotient pairs.
pub fn quotient_problem(problem: &MfmProblem, congs: &[Congruence]) -> Option<MfmProblem> {
    let pairs = problem
        .pairs
        .iter()
        .zip(congs)
        .map(|(p, c)| c.quotient(p))
        .collect::<Option<Vec<_>>>()?;
    let sizes: Vec<usize> = congs.iter().map(Congruence::len).collect();
    let table: Vec<i128> = mixed_tuples(&sizes)
        .iter()
        .map(|z| quotient_value(problem, congs, z))
        .collect();
    // h' is represented as a single term over all coordinates with integer values folded into
    // unit-weight indicator tables, one per value level.
    let max = table.iter().copied().max().unwrap_or(0);
    let scope: Vec<usize> = (0..sizes.len()).collect();
    let terms = (1..=max)
        .map(|level| MfmTerm {
            weight: 1,
            scope: scope.clone(),
            table: table.iter().map(|&v| (v >= level) as u8).collect(),
        })
        .collect();
    Some(MfmProblem { pairs, terms })
}

/// Operation structure of one coordinate for the structured minimizer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coordinate {
    Chain(ChainOrder),
    OneDefect(OneDefectChain),
    Fixed(Elem),
}

impl Coordinate {
    fn candidates(&self) -> Vec<Elem> {
        match self {
            Coordinate::Chain(c) => {
                let mut v = c.order().to_vec();
                v.sort_unstable();
                v
            }
            Coordinate::OneDefect(o) => (0..o.pair().size()).collect(),
            Coordinate::Fixed(e) => vec![*e],
        }
    }

    fn is_quotiented(&self) -> bool {
        matches!(self, Coordinate::OneDefect(o) if o.placement() != DefectPlacement::Product)
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error(transparent)]
    Sfm(#[from] SfmError),
    #[error(transparent)]
    Cap(#[from] CapExceeded),
}

#[derive(Clone, Debug)]
enum Layout {
    Const(Elem),
    Level {
        coord: usize,
        elems: Vec<Elem>,
    },
    Square {
        lo: usize,
        hi: usize,
        table: [Elem; 4],
    },
}

/// Minimizes an objective that is an MFM instance for the given coordinate structures.
///
/// Chain coordinates and product-lattice 1-defect coordinates go straight to the chain-product
/// SFM engine. 1-defect coordinates whose defect is minimal or maximal are quotiented by the
/// congruence {others}, {b}, {c}; the quotient objective (bisubmodular) is minimized by capped
/// enumeration, each value computed by SFM with the `others` block as a two-element chain.
pub struct StructuredMinimizer<'a> {
    pub objective: &'a dyn Fn(&[Elem]) -> i128,
    /// Upper bound on the change of the objective when one coordinate changes.
    pub penalty: i128,
    pub sfm: SfmConfig,
    pub cap: usize,
}

impl StructuredMinimizer<'_> {
    /// Minimum value over the product.
    pub fn minimum(&self, coords: &[Coordinate]) -> Result<i128, DecompositionError> {
        let quotiented: Vec<usize> = (0..coords.len())
            .filter(|&i| coords[i].is_quotiented())
            .collect();
        let mut err = None;
        let (value, _) =
            minimize_bisubmodular_bruteforce(quotiented.len(), self.cap, |z| {
                match self.block_minimum(coords, &quotiented, z) {
                    Ok(v) => v,
                    Err(e) => {
                        err.get_or_insert(e);
                        i128::MAX
                    }
                }
            })?;
        match err {
            Some(e) => Err(e.into()),
            None => Ok(value),
        }
    }

    /// Whether some assignment attains `target`; stops at the first quotient tuple that does.
    pub fn attains(&self, coords: &[Coordinate], target: i128) -> Result<bool, DecompositionError> {
        let quotiented: Vec<usize> = (0..coords.len())
            .filter(|&i| coords[i].is_quotiented())
            .collect();
        if quotiented.len() > self.cap {
            return Err(CapExceeded {
                n: quotiented.len(),
                cap: self.cap,
            }
            .into());
        }
        let mut z = vec![0; quotiented.len()];
        loop {
            if self.block_minimum(coords, &quotiented, &z)? <= target {
                return Ok(true);
            }
            let mut i = z.len();
            loop {
                if i == 0 {
                    return Ok(false);
                }
                i -= 1;
                z[i] += 1;
                if z[i] < 3 {
                    break;
                }
                z[i] = 0;
            }
        }
    }

    /// Lexicographically least minimizer (domain order), by fixing coordinates one at a time.
    pub fn minimize(&self, coords: &[Coordinate]) -> Result<(i128, Vec<Elem>), DecompositionError> {
        let best = self.minimum(coords)?;
        let mut coords = coords.to_vec();
        for v in 0..coords.len() {
            let candidates = coords[v].candidates();
            let last = candidates.len() - 1;
            for (k, &e) in candidates.iter().enumerate() {
                let mut trial = coords.clone();
                trial[v] = Coordinate::Fixed(e);
                if k == last || self.attains(&trial, best)? {
                    coords = trial;
                    break;
                }
            }
        }
        let x: Vec<Elem> = coords
            .iter()
            .map(|c| match c {
                Coordinate::Fixed(e) => *e,
                _ => unreachable!("every coordinate fixed"),
            })
            .collect();
        if (self.objective)(&x) != best {
            return Err(SfmError::CertificateFailed.into());
        }
        Ok((best, x))
    }

    /// `h'(z)`: minimum over the blocks selected by `z` on the quotiented coordinates.
    fn block_minimum(
        &self,
        coords: &[Coordinate],
        quotiented: &[usize],
        z: &[Elem],
    ) -> Result<i128, SfmError> {
        let mut lens = Vec::new();
        let mut layout = Vec::with_capacity(coords.len());
        let mut q = 0;
        for c in coords {
            let l = match c {
                Coordinate::Fixed(e) => Layout::Const(*e),
                Coordinate::Chain(ch) => {
                    lens.push(ch.order().len());
                    Layout::Level {
                        coord: lens.len() - 1,
                        elems: ch.order().to_vec(),
                    }
                }
                Coordinate::OneDefect(o) => {
                    let (b, cc) = o.defect();
                    if o.placement() == DefectPlacement::Product {
                        lens.push(2);
                        lens.push(2);
                        let n = lens.len();
                        Layout::Square {
                            lo: n - 2,
                            hi: n - 1,
                            table: [o.lower(), b, cc, o.upper()],
                        }
                    } else {
                        let zi = z[q];
                        q += 1;
                        match zi {
                            0 => {
                                lens.push(2);
                                Layout::Level {
                                    coord: lens.len() - 1,
                                    elems: vec![o.lower(), o.upper()],
                                }
                            }
                            1 => Layout::Const(b),
                            _ => Layout::Const(cc),
                        }
                    }
                }
            };
            layout.push(l);
        }
        debug_assert_eq!(q, quotiented.len());
        let buf = RefCell::new(vec![0; coords.len()]);
        let energy = |levels: &[usize]| -> i128 {
            let mut x = buf.borrow_mut();
            for (i, l) in layout.iter().enumerate() {
                x[i] = match l {
                    Layout::Const(e) => *e,
                    Layout::Level { coord, elems } => elems[levels[*coord]],
                    Layout::Square { lo, hi, table } => table[levels[*lo] + 2 * levels[*hi]],
                };
            }
            (self.objective)(&x)
        };
        let problem = SfmProblem {
            lens,
            penalty: self.penalty,
            energy: &energy,
        };
        Ok(sfm::minimize(&problem, &self.sfm)?.value)
    }
}

/// Coordinate structure of a recognised pair on a single domain.
pub fn coordinate_for(pair: &BinaryOpPair) -> Option<Coordinate> {
    crate::morphisms::recognize(pair).map(|r| match r {
        crate::morphisms::Recognized::Chain(c) => Coordinate::Chain(c),
        crate::morphisms::Recognized::OneDefect(o) => Coordinate::OneDefect(o),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::lang::Domain;
    use crate::morphisms::{enumerate_chains, enumerate_one_defect};
    use crate::solver::bisub::bisubmodular_pair;
    use proptest::prelude::*;
    use rand::Rng;

    fn structures() -> Vec<Coordinate> {
        let d4 = Domain::letters(4);
        let mut out: Vec<Coordinate> = enumerate_chains(&Domain::letters(3))
            .into_iter()
            .map(Coordinate::Chain)
            .collect();
        out.extend(
            enumerate_chains(&d4)
                .into_iter()
                .take(4)
                .map(Coordinate::Chain),
        );
        out.extend(
            enumerate_one_defect(&d4)
                .unwrap()
                .into_iter()
                .map(Coordinate::OneDefect),
        );
        out
    }

    fn pair_of(c: &Coordinate) -> BinaryOpPair {
        match c {
            Coordinate::Chain(ch) => ch.pair().clone(),
            Coordinate::OneDefect(o) => o.pair().clone(),
            Coordinate::Fixed(_) => unreachable!(),
        }
    }

    #[test]
    fn one_defect_quotient_is_bisubmodular() {
        for o in enumerate_one_defect(&Domain::letters(4)).unwrap() {
            if o.placement() == DefectPlacement::Product {
                continue;
            }
            let (b, c) = o.defect();
            let cong =
                Congruence::new(4, vec![vec![o.lower(), o.upper()], vec![b], vec![c]]).unwrap();
            let q = cong.quotient(o.pair()).expect("congruence");
            let label = [cong.class_of(o.lower()), cong.class_of(b), cong.class_of(c)];
            let bisub = bisubmodular_pair();
            let matches = |p: &BinaryOpPair| {
                (0..3).all(|x| {
                    (0..3).all(|y| {
                        p.f.get(label[x], label[y]) == label[bisub.f.get(x, y)]
                            && p.g.get(label[x], label[y]) == label[bisub.g.get(x, y)]
                    })
                })
            };
            assert!(
                matches(&q) || matches(&q.swapped()),
                "{}",
                o.describe(&Domain::letters(4))
            );
        }
    }

    #[test]
    fn congruence_enumeration_includes_trivial_partitions() {
        let chain = ChainOrder::new(vec![0, 1, 2]);
        let cs = congruences(chain.pair());
        assert!(cs.iter().any(|c| c.len() == 1));
        assert!(cs.iter().any(|c| c.len() == 3));
        // Intervals of the chain are exactly the nontrivial congruences on three elements.
        assert_eq!(cs.len(), 4);
    }

    #[test]
    fn partition_validation() {
        assert!(Congruence::new(3, vec![vec![0, 1], vec![1, 2]]).is_none());
        assert!(Congruence::new(3, vec![vec![0, 1]]).is_none());
        assert!(Congruence::new(3, vec![vec![2], vec![1, 0]]).is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn random_problems_are_instances(seed in any::<u64>()) {
            let mut rng = gen::rng(seed);
            let all = structures();
            let n = rng.gen_range(1..=3);
            let pairs: Vec<BinaryOpPair> = (0..n).map(|_| pair_of(&all[rng.gen_range(0..all.len())])).collect();
            let p = MfmProblem::random(&mut rng, pairs, 3, 2);
            prop_assert!(p.is_instance());
        }

        #[test]
        fn quotient_keeps_minimum_and_inherits_pair(seed in any::<u64>()) {
            let mut rng = gen::rng(seed);
            let all = structures();
            let n = rng.gen_range(1..=3);
            let pairs: Vec<BinaryOpPair> = (0..n).map(|_| pair_of(&all[rng.gen_range(0..all.len())])).collect();
            let p = MfmProblem::random(&mut rng, pairs, 4, 2);
            let congs: Vec<Congruence> = p.pairs.iter().map(|pair| {
                let cs = congruences(pair);
                cs[rng.gen_range(0..cs.len())].clone()
            }).collect();
            prop_assert_eq!(quotient_minimum(&p, &congs).0, p.brute_minimum().0);
            let q = quotient_problem(&p, &congs).unwrap();
            prop_assert!(q.is_instance());
        }

        #[test]
        fn structured_minimizer_handles_mixtures(seed in any::<u64>()) {
            let mut rng = gen::rng(seed);
            let all = structures();
            let n = rng.gen_range(1..=5);
            let coords: Vec<Coordinate> = (0..n).map(|_| all[rng.gen_range(0..all.len())].clone()).collect();
            let pairs = coords.iter().map(pair_of).collect();
            let p = MfmProblem::random(&mut rng, pairs, 6, 3);
            let objective = |x: &[Elem]| p.evaluate(x);
            let m = StructuredMinimizer {
                objective: &objective,
                penalty: p.total_weight() + 1,
                sfm: SfmConfig::default(),
                cap: 14,
            };
            let got = m.minimize(&coords).unwrap();
            prop_assert_eq!(got, p.brute_minimum());
        }
    }
}
