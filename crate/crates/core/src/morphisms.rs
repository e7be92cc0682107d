//! Binary operation pairs, chains, 1-defect chains, and multimorphism checking.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{all_tuples, encode, hamming, CostFunction, Domain, Elem, LangError, Language};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphismError {
    #[error("checking needs {needed} tuple-pair evaluations, over the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("1-defect chains need a domain of at least 3 elements")]
    DomainTooSmall,
    #[error("1-defect chains are only enumerated for domains of size 3 and 4")]
    UnsupportedDomain,
    #[error("operation pair is neither a chain nor a 1-defect chain")]
    NotStructured,
    #[error("table is not {0}x{0}")]
    BadTable(usize),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// Default evaluation cap for multimorphism checks.
pub const DEFAULT_CHECK_BUDGET: u128 = 1 << 28;

/// A binary operation on `0..size`, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OpTable {
    size: usize,
    table: Vec<Elem>,
}

impl OpTable {
    pub fn from_fn(size: usize, mut op: impl FnMut(Elem, Elem) -> Elem) -> Self {
        let mut table = Vec::with_capacity(size * size);
        for x in 0..size {
            for y in 0..size {
                table.push(op(x, y));
            }
        }
        OpTable { size, table }
    }

    pub fn from_rows(rows: &[Vec<Elem>]) -> Result<Self, MorphismError> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) || rows.iter().flatten().any(|&e| e >= size) {
            return Err(MorphismError::BadTable(size));
        }
        Ok(OpTable {
            size,
            table: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, x: Elem, y: Elem) -> Elem {
        self.table[x * self.size + y]
    }

    pub fn rows(&self) -> Vec<Vec<Elem>> {
        self.table.chunks(self.size).map(<[Elem]>::to_vec).collect()
    }

    pub fn apply(&self, x: &[Elem], y: &[Elem]) -> Vec<Elem> {
        x.iter().zip(y).map(|(&a, &b)| self.get(a, b)).collect()
    }

    pub fn is_commutative(&self) -> bool {
        (0..self.size).all(|x| (0..self.size).all(|y| self.get(x, y) == self.get(y, x)))
    }

    pub fn is_idempotent(&self) -> bool {
        (0..self.size).all(|x| self.get(x, x) == x)
    }

    /// Same operation after renaming element `i` to `perm[i]`.
    pub fn relabel(&self, perm: &[Elem]) -> Self {
        let inv = crate::lang::invert(perm);
        OpTable::from_fn(self.size, |x, y| perm[self.get(inv[x], inv[y])])
    }
}

/// Idempotent, commutative, and `f(f(x,y),x) = f(x,y)`.
pub fn check_2semilattice(f: &OpTable) -> bool {
    let n = f.size();
    f.is_idempotent()
        && f.is_commutative()
        && (0..n).all(|x| (0..n).all(|y| f.get(f.get(x, y), x) == f.get(x, y)))
}

/// `outer(inner(x,y),x) = x` for all `x, y`.
pub fn absorbs(outer: &OpTable, inner: &OpTable) -> bool {
    let n = outer.size();
    (0..n).all(|x| (0..n).all(|y| outer.get(inner.get(x, y), x) == x))
}

/// A pair of binary operations `(f, g)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryOpPair {
    pub f: OpTable,
    pub g: OpTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairFile {
    f: Vec<Vec<String>>,
    g: Vec<Vec<String>>,
}

impl BinaryOpPair {
    pub fn new(f: OpTable, g: OpTable) -> Self {
        assert_eq!(f.size(), g.size());
        BinaryOpPair { f, g }
    }

    pub fn size(&self) -> usize {
        self.f.size()
    }

    pub fn swapped(&self) -> Self {
        BinaryOpPair {
            f: self.g.clone(),
            g: self.f.clone(),
        }
    }

    pub fn relabel(&self, perm: &[Elem]) -> Self {
        BinaryOpPair {
            f: self.f.relabel(perm),
            g: self.g.relabel(perm),
        }
    }

    /// Pair on the full domain acting as `self` after applying `retraction`, where `self`
    /// lives on `image` (element `i` of `self` is `image[i]`).
    pub fn lift(&self, image: &[Elem], retraction: &[Elem]) -> Self {
        let pos = |e: Elem| {
            image
                .iter()
                .position(|&x| x == e)
                .expect("retraction lands in image")
        };
        let d = retraction.len();
        let lift_op = |op: &OpTable| {
            OpTable::from_fn(d, |x, y| {
                image[op.get(pos(retraction[x]), pos(retraction[y]))]
            })
        };
        BinaryOpPair {
            f: lift_op(&self.f),
            g: lift_op(&self.g),
        }
    }

    pub fn to_json_value(&self, domain: &Domain) -> serde_json::Value {
        let rows = |t: &OpTable| -> Vec<Vec<String>> {
            t.rows().iter().map(|r| domain.format_tuple(r)).collect()
        };
        serde_json::to_value(PairFile {
            f: rows(&self.f),
            g: rows(&self.g),
        })
        .expect("pair serializes")
    }

    pub fn to_json(&self, domain: &Domain) -> String {
        serde_json::to_string_pretty(&self.to_json_value(domain)).expect("pair serializes")
    }

    pub fn from_json(text: &str, domain: &Domain) -> Result<Self, MorphismError> {
        let file: PairFile =
            serde_json::from_str(text).map_err(|e| LangError::Json(e.to_string()))?;
        let parse = |rows: &[Vec<String>]| -> Result<OpTable, MorphismError> {
            let rows = rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|l| {
                            domain
                                .index_of(l)
                                .ok_or_else(|| LangError::UnknownLabel(l.clone()))
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let t = OpTable::from_rows(&rows)?;
            if t.size() != domain.size() {
                return Err(MorphismError::BadTable(domain.size()));
            }
            Ok(t)
        };
        Ok(BinaryOpPair {
            f: parse(&file.f)?,
            g: parse(&file.g)?,
        })
    }
}

/// A total order on the domain with its meet and join.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChainOrder {
    order: Vec<Elem>,
    rank: Vec<usize>,
    pair: BinaryOpPair,
}

impl ChainOrder {
    /// `order` lists the elements from bottom to top.
    pub fn new(order: Vec<Elem>) -> Self {
        let mut rank = vec![0; order.len()];
        for (r, &e) in order.iter().enumerate() {
            rank[e] = r;
        }
        let n = order.len();
        let meet = OpTable::from_fn(n, |x, y| if rank[x] <= rank[y] { x } else { y });
        let join = OpTable::from_fn(n, |x, y| if rank[x] >= rank[y] { x } else { y });
        ChainOrder {
            order,
            rank,
            pair: BinaryOpPair::new(meet, join),
        }
    }

    pub fn order(&self) -> &[Elem] {
        &self.order
    }

    pub fn rank(&self, e: Elem) -> usize {
        self.rank[e]
    }

    pub fn pair(&self) -> &BinaryOpPair {
        &self.pair
    }

    pub fn meet(&self, x: Elem, y: Elem) -> Elem {
        self.pair.f.get(x, y)
    }

    pub fn join(&self, x: Elem, y: Elem) -> Elem {
        self.pair.g.get(x, y)
    }

    pub fn describe(&self, domain: &Domain) -> String {
        self.order
            .iter()
            .map(|&e| domain.label(e))
            .collect::<Vec<_>>()
            .join("<")
    }
}

/// Where the incomparable pair sits relative to the other elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectPlacement {
    /// Below every other element.
    Minimal,
    /// Strictly between the other elements: the product of two 2-chains.
    Product,
    /// Above every other element.
    Maximal,
}

/// A partial order relating every pair except `{b, c}`, with glb/lub operations and the
/// defect images `f(b,c) = lower`, `g(b,c) = upper`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OneDefectChain {
    defect: (Elem, Elem),
    lower: Elem,
    upper: Elem,
    placement: DefectPlacement,
    /// Rank in the order; `b` and `c` share a rank.
    rank: Vec<usize>,
    pair: BinaryOpPair,
}

impl OneDefectChain {
    /// Builds the structure on a domain of size 4 (or 3, where no valid structure exists).
    /// `others` lists the two non-defect elements from lower to upper.
    pub fn new(
        size: usize,
        defect: (Elem, Elem),
        others: (Elem, Elem),
        placement: DefectPlacement,
    ) -> Self {
        let (b, c) = defect;
        let (o1, o2) = others;
        let mut rank = vec![0; size];
        let (rb, r1, r2) = match placement {
            DefectPlacement::Minimal => (0, 1, 2),
            DefectPlacement::Product => (1, 0, 2),
            DefectPlacement::Maximal => (2, 0, 1),
        };
        rank[b] = rb;
        rank[c] = rb;
        rank[o1] = r1;
        rank[o2] = r2;
        let is_defect = |x: Elem, y: Elem| (x == b && y == c) || (x == c && y == b);
        let f = OpTable::from_fn(size, |x, y| {
            if is_defect(x, y) {
                o1
            } else if rank[x] <= rank[y] {
                x
            } else {
                y
            }
        });
        let g = OpTable::from_fn(size, |x, y| {
            if is_defect(x, y) {
                o2
            } else if rank[x] >= rank[y] {
                x
            } else {
                y
            }
        });
        OneDefectChain {
            defect: (b.min(c), b.max(c)),
            lower: o1,
            upper: o2,
            placement,
            rank,
            pair: BinaryOpPair::new(f, g),
        }
    }

    pub fn defect(&self) -> (Elem, Elem) {
        self.defect
    }

    pub fn lower(&self) -> Elem {
        self.lower
    }

    pub fn upper(&self) -> Elem {
        self.upper
    }

    pub fn placement(&self) -> DefectPlacement {
        self.placement
    }

    pub fn pair(&self) -> &BinaryOpPair {
        &self.pair
    }

    /// Order comparison; `None` only for the defect pair.
    pub fn compare(&self, x: Elem, y: Elem) -> Option<Ordering> {
        if x == y {
            return Some(Ordering::Equal);
        }
        if (x, y) == self.defect || (y, x) == self.defect {
            return None;
        }
        Some(self.rank[x].cmp(&self.rank[y]))
    }

    pub fn describe(&self, domain: &Domain) -> String {
        let (b, c) = self.defect;
        let anti = format!("{{{},{}}}", domain.label(b), domain.label(c));
        let lo = domain.label(self.lower);
        let hi = domain.label(self.upper);
        match self.placement {
            DefectPlacement::Minimal => format!("{anti}<{lo}<{hi}"),
            DefectPlacement::Product => format!("{lo}<{anti}<{hi}"),
            DefectPlacement::Maximal => format!("{lo}<{hi}<{anti}"),
        }
    }
}

/// All total orders in lexicographic order of the bottom-to-top element sequence.
pub fn enumerate_chains(domain: &Domain) -> Vec<ChainOrder> {
    permutations(domain.size())
        .into_iter()
        .map(ChainOrder::new)
        .collect()
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<Elem>> {
    fn rec(prefix: &mut Vec<Elem>, used: &mut [bool], out: &mut Vec<Vec<Elem>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for e in 0..used.len() {
            if !used[e] {
                used[e] = true;
                prefix.push(e);
                rec(prefix, used, out);
                prefix.pop();
                used[e] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// All 1-defect chains: defect pair, order of the other two elements, and placement of the
/// antichain. On three elements the defect images cannot avoid the defect pair, so the list
/// is empty.
pub fn enumerate_one_defect(domain: &Domain) -> Result<Vec<OneDefectChain>, MorphismError> {
    let d = domain.size();
    match d {
        0..=2 => Err(MorphismError::DomainTooSmall),
        3 => Ok(Vec::new()),
        4 => {
            let mut out = Vec::new();
            for b in 0..4 {
                for c in b + 1..4 {
                    let rest: Vec<Elem> = (0..4).filter(|&e| e != b && e != c).collect();
                    for (o1, o2) in [(rest[0], rest[1]), (rest[1], rest[0])] {
                        for p in [
                            DefectPlacement::Minimal,
                            DefectPlacement::Product,
                            DefectPlacement::Maximal,
                        ] {
                            out.push(OneDefectChain::new(4, (b, c), (o1, o2), p));
                        }
                    }
                }
            }
            Ok(out)
        }
        _ => Err(MorphismError::UnsupportedDomain),
    }
}

/// Pair shapes for which binary restrictions decide the multimorphism property.
#[derive(Clone, Copy, Debug)]
pub enum Structured<'a> {
    Chain(&'a ChainOrder),
    OneDefect(&'a OneDefectChain),
}

impl Structured<'_> {
    pub fn pair(&self) -> &BinaryOpPair {
        match self {
            Structured::Chain(c) => c.pair(),
            Structured::OneDefect(o) => o.pair(),
        }
    }
}

/// Identifies a pair as a chain or 1-defect chain (domains up to 6 for chains, 4 for defects).
pub fn recognize(pair: &BinaryOpPair) -> Option<Recognized> {
    let d = pair.size();
    if d <= 6 {
        let domain = Domain::letters(d);
        if let Some(c) = enumerate_chains(&domain)
            .into_iter()
            .find(|c| c.pair() == pair)
        {
            return Some(Recognized::Chain(c));
        }
        if d == 4 {
            let found = enumerate_one_defect(&domain)
                .expect("size 4 supported")
                .into_iter()
                .find(|o| o.pair() == pair);
            if let Some(o) = found {
                return Some(Recognized::OneDefect(o));
            }
        }
    }
    None
}

/// Owned counterpart of [`Structured`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recognized {
    Chain(ChainOrder),
    OneDefect(OneDefectChain),
}

impl Recognized {
    pub fn as_structured(&self) -> Structured<'_> {
        match self {
            Recognized::Chain(c) => Structured::Chain(c),
            Recognized::OneDefect(o) => Structured::OneDefect(o),
        }
    }
}

/// A violated inequality `h(f(x,y)) + h(g(x,y)) > h(x) + h(y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub function: String,
    pub x: Vec<Elem>,
    pub y: Vec<Elem>,
    pub fxy: Vec<Elem>,
    pub gxy: Vec<Elem>,
    /// `h(x) + h(y)`.
    pub lhs: u32,
    /// `h(f(x,y)) + h(g(x,y))`.
    pub rhs: u32,
}

impl Violation {
    pub fn hamming(&self) -> usize {
        hamming(&self.x, &self.y)
    }

    fn key(&self) -> (usize, &[Elem], &[Elem]) {
        (self.hamming(), &self.x, &self.y)
    }

    /// Re-evaluates the inequality from scratch.
    pub fn replays(&self, pair: &BinaryOpPair, h: &CostFunction) -> bool {
        let fx = pair.f.apply(&self.x, &self.y);
        let gx = pair.g.apply(&self.x, &self.y);
        fx == self.fxy
            && gx == self.gxy
            && (h.value(&self.x) + h.value(&self.y)) as u32 == self.lhs
            && (h.value(&fx) + h.value(&gx)) as u32 == self.rhs
            && self.rhs > self.lhs
    }

    pub fn to_json_value(&self, domain: &Domain) -> serde_json::Value {
        serde_json::json!({
            "function": self.function,
            "x": domain.format_tuple(&self.x),
            "y": domain.format_tuple(&self.y),
            "f": domain.format_tuple(&self.fxy),
            "g": domain.format_tuple(&self.gxy),
            "lhs": self.lhs,
            "rhs": self.rhs,
        })
    }
}

fn better(candidate: &Violation, best: &Option<Violation>) -> bool {
    best.as_ref().is_none_or(|b| candidate.key() < b.key())
}

/// Direct check over all tuple pairs; returns the violation minimal in
/// (Hamming distance, x, y) order.
pub fn direct_check(pair: &BinaryOpPair, h: &CostFunction) -> Option<Violation> {
    let d = h.domain_size();
    let k = h.arity();
    let table = h.table();
    let mut best: Option<Violation> = None;
    let mut best_key = (usize::MAX, usize::MAX, usize::MAX);
    let tuples: Vec<Vec<Elem>> = all_tuples(d, k).collect();
    let mut fx = vec![0; k];
    let mut gx = vec![0; k];
    for (xi, x) in tuples.iter().enumerate() {
        for (yi, y) in tuples.iter().enumerate() {
            let base = table[xi] + table[yi];
            if base >= 2 {
                continue;
            }
            for i in 0..k {
                fx[i] = pair.f.get(x[i], y[i]);
                gx[i] = pair.g.get(x[i], y[i]);
            }
            let rhs = table[encode(&fx, d)] + table[encode(&gx, d)];
            if rhs > base {
                let key = (hamming(x, y), xi, yi);
                if key < best_key {
                    best_key = key;
                    best = Some(Violation {
                        function: h.name().to_string(),
                        x: x.clone(),
                        y: y.clone(),
                        fxy: fx.clone(),
                        gxy: gx.clone(),
                        lhs: base as u32,
                        rhs: rhs as u32,
                    });
                }
            }
        }
    }
    best
}

/// Checks every binary restriction of `h` (all but two coordinates fixed in every way).
/// For chains and 1-defect chains this decides the multimorphism property.
pub fn binary_restriction_check(pair: Structured<'_>, h: &CostFunction) -> Option<Violation> {
    let p = pair.pair();
    let k = h.arity();
    if k <= 2 {
        return direct_check(p, h);
    }
    let d = h.domain_size();
    let mut best: Option<Violation> = None;
    for i in 0..k {
        for j in i + 1..k {
            for rest in all_tuples(d, k - 2) {
                let embed = |u: Elem, v: Elem| -> Vec<Elem> {
                    let mut t = Vec::with_capacity(k);
                    let mut it = rest.iter();
                    for pos in 0..k {
                        if pos == i {
                            t.push(u);
                        } else if pos == j {
                            t.push(v);
                        } else {
                            t.push(*it.next().expect("k-2 fixed values"));
                        }
                    }
                    t
                };
                let r = CostFunction::from_fn(h.name(), 2, d, |t| h.value(&embed(t[0], t[1])));
                if let Some(v) = direct_check(p, &r) {
                    let x = embed(v.x[0], v.x[1]);
                    let y = embed(v.y[0], v.y[1]);
                    let full = Violation {
                        function: h.name().to_string(),
                        fxy: p.f.apply(&x, &y),
                        gxy: p.g.apply(&x, &y),
                        x,
                        y,
                        lhs: v.lhs,
                        rhs: v.rhs,
                    };
                    if better(&full, &best) {
                        best = Some(full);
                    }
                }
            }
        }
    }
    best
}

/// Cost of checking `pair` against every function of `language` directly.
pub fn check_cost(language: &Language) -> u128 {
    let d = language.domain().size() as u128;
    language
        .functions()
        .iter()
        .map(|f| d.saturating_pow(2 * f.arity() as u32))
        .fold(0u128, u128::saturating_add)
}

/// Whether `pair` is a multimorphism of every cost function of `language`; on failure the
/// first failing function (in language order) and its minimal violation. Chains and 1-defect
/// chains use the binary-restriction check for arity ≥ 3.
pub fn is_multimorphism(
    pair: &BinaryOpPair,
    language: &Language,
    budget: u128,
) -> Result<Option<Violation>, MorphismError> {
    let needed = check_cost(language);
    if needed > budget {
        return Err(MorphismError::BudgetExceeded { needed, budget });
    }
    let shape = recognize(pair);
    Ok(check_with_shape(pair, shape.as_ref(), language))
}

/// As [`is_multimorphism`] for an already recognised chain or 1-defect chain.
pub fn is_multimorphism_structured(pair: Structured<'_>, language: &Language) -> Option<Violation> {
    language.functions().iter().find_map(|h| {
        if h.arity() >= 3 {
            binary_restriction_check(pair, h)
        } else {
            direct_check(pair.pair(), h)
        }
    })
}

fn check_with_shape(
    pair: &BinaryOpPair,
    shape: Option<&Recognized>,
    language: &Language,
) -> Option<Violation> {
    match shape {
        Some(r) => is_multimorphism_structured(r.as_structured(), language),
        None => language
            .functions()
            .iter()
            .find_map(|h| direct_check(pair, h)),
    }
}

/// Swap identities on `{b,c}^k`: `{f(f(x,y),x), g(f(x,y),x)} = {f(x,y), x}` and
/// `{g(g(x,y),x), f(g(x,y),x)} = {g(x,y), x}` as sets of tuples.
pub fn swap_identities_hold(odc: &OneDefectChain, k: usize) -> bool {
    let (b, c) = odc.defect();
    let p = odc.pair();
    let lift =
        |t: &[Elem]| -> Vec<Elem> { t.iter().map(|&z| if z == 0 { b } else { c }).collect() };
    let same = |u: (Vec<Elem>, Vec<Elem>), v: (Vec<Elem>, Vec<Elem>)| {
        (u.0 == v.0 && u.1 == v.1) || (u.0 == v.1 && u.1 == v.0)
    };
    for xs in all_tuples(2, k) {
        for ys in all_tuples(2, k) {
            let x = lift(&xs);
            let y = lift(&ys);
            let fxy = p.f.apply(&x, &y);
            let gxy = p.g.apply(&x, &y);
            let first = (p.f.apply(&fxy, &x), p.g.apply(&fxy, &x));
            if !same(first, (fxy.clone(), x.clone())) {
                return false;
            }
            let second = (p.g.apply(&gxy, &x), p.f.apply(&gxy, &x));
            if !same(second, (gxy, x.clone())) {
                return false;
            }
        }
    }
    true
}

impl fmt::Display for OpTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let s: Vec<String> = row.iter().map(|e| e.to_string()).collect();
            writeln!(f, "{}", s.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example_pair_1, example_pair_2, gamma_ex, h_eq};
    use crate::lang::tuple_count;
    use proptest::prelude::*;

    #[test]
    fn example_pairs_are_one_defect() {
        let g = gamma_ex();
        assert_eq!(
            is_multimorphism(&example_pair_1(), &g, DEFAULT_CHECK_BUDGET).unwrap(),
            None
        );
        assert_eq!(
            is_multimorphism(&example_pair_2(), &g, DEFAULT_CHECK_BUDGET).unwrap(),
            None
        );
        let odcs = enumerate_one_defect(g.domain()).unwrap();
        assert_eq!(odcs.len(), 36);
        let d = g.domain();
        let f1 = odcs.iter().find(|o| o.describe(d) == "a<d<{b,c}").unwrap();
        assert_eq!(f1.pair(), &example_pair_1());
        let f2 = odcs.iter().find(|o| o.describe(d) == "{b,c}<a<d").unwrap();
        assert_eq!(f2.pair(), &example_pair_2());
        let lad = odcs.iter().find(|o| o.describe(d) == "a<{b,c}<d").unwrap();
        assert_eq!(lad.placement(), DefectPlacement::Product);
        let meet = |x: Elem, y: Elem| {
            let bits = |e: Elem| [(0, 0), (1, 0), (0, 1), (1, 1)][e];
            let (a1, a2) = bits(x);
            let (b1, b2) = bits(y);
            [(0, 0), (1, 0), (0, 1), (1, 1)]
                .iter()
                .position(|&p| p == (a1.min(b1), a2.min(b2)))
                .unwrap()
        };
        assert_eq!(lad.pair().f, OpTable::from_fn(4, meet));
    }

    #[test]
    fn chains_fail_on_gamma_ex() {
        let g = gamma_ex();
        let chains = enumerate_chains(g.domain());
        assert_eq!(chains.len(), 24);
        for c in &chains {
            let v = is_multimorphism(c.pair(), &g, DEFAULT_CHECK_BUDGET).unwrap();
            let v = v.expect("no chain works");
            assert!(v.replays(c.pair(), g.function(&v.function).unwrap()));
        }
    }

    #[test]
    fn chain_basics() {
        assert_eq!(enumerate_chains(&Domain::letters(1)).len(), 1);
        let c = ChainOrder::new(vec![0, 1, 2, 3]);
        assert_eq!(c.meet(1, 3), 1);
        assert_eq!(c.join(1, 3), 3);
        assert!(check_2semilattice(&c.pair().f));
    }

    #[test]
    fn one_defect_domain_errors() {
        assert_eq!(
            enumerate_one_defect(&Domain::letters(2)),
            Err(MorphismError::DomainTooSmall)
        );
        assert_eq!(enumerate_one_defect(&Domain::letters(3)).unwrap().len(), 0);
        assert_eq!(
            enumerate_one_defect(&Domain::letters(5)),
            Err(MorphismError::UnsupportedDomain)
        );
    }

    #[test]
    fn h_eq_counterexample() {
        let l = h_eq();
        let c = ChainOrder::new(vec![0, 1]);
        let v = is_multimorphism(c.pair(), &l, DEFAULT_CHECK_BUDGET)
            .unwrap()
            .unwrap();
        assert_eq!((v.x.clone(), v.y.clone()), (vec![0, 1], vec![1, 0]));
        assert_eq!((v.lhs, v.rhs), (0, 2));
    }

    #[test]
    fn unary_functions_are_chain_submodular() {
        let g = gamma_ex();
        let u = Language::new(
            g.domain().clone(),
            vec![(**g.function("u_ab").unwrap()).clone()],
            vec![],
        )
        .unwrap();
        for c in enumerate_chains(g.domain()) {
            assert!(is_multimorphism(c.pair(), &u, DEFAULT_CHECK_BUDGET)
                .unwrap()
                .is_none());
        }
    }

    #[test]
    fn semilattice_examples() {
        assert!(check_2semilattice(&example_pair_1().f));
        assert!(!check_2semilattice(&example_pair_2().f));
        let f2 = &example_pair_2().f;
        assert_eq!(f2.get(f2.get(1, 2), 1), 1);
    }

    #[test]
    fn prop4_identities_for_all_defect_chains() {
        for o in enumerate_one_defect(&Domain::letters(4)).unwrap() {
            let p = o.pair();
            let (b, c) = o.defect();
            let f_below = o.compare(p.f.get(b, c), b) == Some(Ordering::Less)
                && o.compare(p.f.get(b, c), c) == Some(Ordering::Less);
            let g_above = o.compare(p.g.get(b, c), b) == Some(Ordering::Greater)
                && o.compare(p.g.get(b, c), c) == Some(Ordering::Greater);
            assert!(f_below || g_above);
            if f_below {
                assert!(check_2semilattice(&p.f));
                assert!(absorbs(&p.g, &p.f));
            }
            if g_above {
                assert!(check_2semilattice(&p.g));
                assert!(absorbs(&p.f, &p.g));
            }
            for k in 1..=3 {
                assert!(swap_identities_hold(&o, k));
            }
        }
    }

    #[test]
    fn pair_json_roundtrip() {
        let d = Domain::letters(4);
        let p = example_pair_1();
        let text = p.to_json(&d);
        assert_eq!(BinaryOpPair::from_json(&text, &d).unwrap(), p);
        assert!(BinaryOpPair::from_json(r#"{"f":[["a"]],"g":[["a"]]}"#, &d).is_err());
    }

    #[test]
    fn budget_error() {
        let g = gamma_ex();
        assert!(matches!(
            is_multimorphism(&example_pair_1(), &g, 10),
            Err(MorphismError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn lift_acts_through_retraction() {
        let c = ChainOrder::new(vec![1, 0]);
        let lifted = c.pair().lift(&[0, 3], &[0, 0, 3, 3]);
        assert_eq!(lifted.f.get(1, 2), 3);
        assert_eq!(lifted.g.get(1, 2), 0);
    }

    fn arb_function(max_arity: usize) -> impl Strategy<Value = CostFunction> {
        (1..=max_arity)
            .prop_flat_map(|k| {
                (
                    Just(k),
                    proptest::collection::vec(prop::bool::weighted(0.25), tuple_count(4, k)),
                )
            })
            .prop_map(|(k, bits)| {
                CostFunction::from_table("h", k, 4, bits.iter().map(|&b| b as u8).collect())
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn restriction_check_equals_direct(h in arb_function(3), which in 0usize..60) {
            let d = Domain::letters(4);
            let chains = enumerate_chains(&d);
            let odcs = enumerate_one_defect(&d).unwrap();
            let (s, p) = if which < 24 {
                (Structured::Chain(&chains[which]), chains[which].pair().clone())
            } else {
                (Structured::OneDefect(&odcs[which - 24]), odcs[which - 24].pair().clone())
            };
            let fast = binary_restriction_check(s, &h);
            let slow = direct_check(&p, &h);
            prop_assert_eq!(fast.is_none(), slow.is_none());
            if let (Some(a), Some(b)) = (&fast, &slow) {
                prop_assert!(a.hamming() <= 2);
                prop_assert!(a.replays(&p, &h));
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn multimorphism_is_additive(h1 in arb_function(2), h2 in arb_function(2), which in 0usize..36) {
            let d = Domain::letters(4);
            let p = enumerate_one_defect(&d).unwrap()[which].pair().clone();
            let l = Language::new(d.clone(), vec![h1.clone(), h2.with_name("h2")], vec![]).unwrap();
            let joint = is_multimorphism(&p, &l, DEFAULT_CHECK_BUDGET).unwrap().is_none();
            prop_assert_eq!(joint, direct_check(&p, &h1).is_none() && direct_check(&p, &h2).is_none());
        }

        #[test]
        fn relabeling_preserves_multimorphisms(h in arb_function(2), which in 0usize..36, perm_idx in 0usize..24) {
            let d = Domain::letters(4);
            let p = enumerate_one_defect(&d).unwrap()[which].pair().clone();
            let perm = &permutations(4)[perm_idx];
            let held = direct_check(&p, &h).is_none();
            prop_assert_eq!(held, direct_check(&p.relabel(perm), &h.relabel(perm)).is_none());
        }
    }
}
