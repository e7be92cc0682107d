//! Submodular minimization over a product of chains.
//!
//! Coordinate `i` takes levels `0..lens[i]`. The ground set has one element `(i, j)` per
//! threshold level `j ∈ 1..lens[i]`; a set `X` is read through its down-closure `c(X)`
//! (level of `i` = largest `j` with `(i, j) ∈ X`) and extended to all subsets by
//! `f̂(X) = F(c(X)) − F(0) + K·(|c(X)| − |X|)`. With `K` at least the largest change of `F`
//! along one level step, `f̂` is submodular whenever `F` is, and its minimizers are down-sets.
//!
//! Minimization runs the minimum-norm-point method on the base polytope of `f̂`. Iterations
//! use floating point; the answer is certified exactly: the final convex weights are turned
//! into exact rationals, giving a point `x` of the base polytope with `Σ min(x_e, 0)` a lower
//! bound on `min f̂`. Since `f̂` is integer valued, a candidate within less than one of that
//! bound is optimal. If certification fails, an exact-rational run of the same method is used.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SfmError {
    #[error("minimizer certificate failed; the objective is not submodular on the chain product")]
    CertificateFailed,
    #[error("minimum-norm iteration limit reached")]
    IterationLimit,
}

/// A submodular function on a product of chains, given by an integer-valued oracle.
pub struct SfmProblem<'a> {
    pub lens: Vec<usize>,
    /// Upper bound on `|F(l + e_i) − F(l)|` over single level steps; must be positive.
    pub penalty: i128,
    pub energy: &'a dyn Fn(&[usize]) -> i128,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SfmStrategy {
    /// Floating-point iterations with exact certification and exact fallback.
    MinNorm,
    /// Exact rational arithmetic throughout.
    ExactMinNorm,
    /// Scan every level vector (reference implementation).
    Exhaustive,
}

#[derive(Clone, Copy, Debug)]
pub struct SfmConfig {
    pub strategy: SfmStrategy,
    /// Additionally compare against an exhaustive scan when the ground set has at most this
    /// many elements (0 disables).
    pub exhaustive_check_below: usize,
    pub max_iterations: usize,
}

impl Default for SfmConfig {
    fn default() -> Self {
        SfmConfig {
            strategy: SfmStrategy::MinNorm,
            exhaustive_check_below: 0,
            max_iterations: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SfmOutcome {
    /// `F` at the minimizer.
    pub value: i128,
    pub levels: Vec<usize>,
}

struct Ground<'a> {
    problem: &'a SfmProblem<'a>,
    /// `(coordinate, level)` for every ground element.
    elems: Vec<(usize, usize)>,
    base: i128,
}

impl<'a> Ground<'a> {
    fn new(problem: &'a SfmProblem<'a>) -> Self {
        let mut elems = Vec::new();
        for (i, &len) in problem.lens.iter().enumerate() {
            for j in 1..len {
                elems.push((i, j));
            }
        }
        let zero = vec![0; problem.lens.len()];
        let base = (problem.energy)(&zero);
        Ground {
            problem,
            elems,
            base,
        }
    }

    fn n(&self) -> usize {
        self.elems.len()
    }

    /// Greedy vertex for the given element order, plus the best down-closed prefix seen.
    fn greedy(&self, order: &[usize]) -> (Vec<i128>, i128, Vec<usize>) {
        let mut levels = vec![0; self.problem.lens.len()];
        let mut size = 0i128;
        let mut closure = 0i128;
        let mut prev = 0i128;
        let mut p = vec![0i128; self.n()];
        let mut best_val = 0i128;
        let mut best_levels = levels.clone();
        for &e in order {
            let (i, j) = self.elems[e];
            size += 1;
            if j > levels[i] {
                closure += (j - levels[i]) as i128;
                levels[i] = j;
            }
            let f = (self.problem.energy)(&levels) - self.base;
            let val = f + self.problem.penalty * (closure - size);
            p[e] = val - prev;
            prev = val;
            if f < best_val {
                best_val = f;
                best_levels = levels.clone();
            }
        }
        (p, best_val, best_levels)
    }

    fn order_by(&self, x: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        order
    }
}

pub fn minimize(problem: &SfmProblem<'_>, config: &SfmConfig) -> Result<SfmOutcome, SfmError> {
    assert!(problem.penalty > 0, "penalty must be positive");
    let ground = Ground::new(problem);
    let out = if ground.n() == 0 {
        SfmOutcome {
            value: ground.base,
            levels: vec![0; problem.lens.len()],
        }
    } else {
        match config.strategy {
            SfmStrategy::Exhaustive => exhaustive(problem),
            SfmStrategy::ExactMinNorm => exact_min_norm(&ground, config.max_iterations)?,
            SfmStrategy::MinNorm => match float_min_norm(&ground, config.max_iterations) {
                Some(o) => o,
                None => exact_min_norm(&ground, config.max_iterations)?,
            },
        }
    };
    if config.exhaustive_check_below > 0 && ground.n() <= config.exhaustive_check_below {
        let reference = exhaustive(problem);
        if reference.value != out.value {
            return Err(SfmError::CertificateFailed);
        }
    }
    Ok(out)
}

/// Lexicographically least minimizing level vector by full scan.
pub fn exhaustive(problem: &SfmProblem<'_>) -> SfmOutcome {
    let k = problem.lens.len();
    let mut levels = vec![0; k];
    let mut best = SfmOutcome {
        value: (problem.energy)(&levels),
        levels: levels.clone(),
    };
    loop {
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            levels[i] += 1;
            if levels[i] < problem.lens[i] {
                break;
            }
            levels[i] = 0;
        }
        let v = (problem.energy)(&levels);
        if v < best.value {
            best = SfmOutcome {
                value: v,
                levels: levels.clone(),
            };
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the bordered system `[G 1; 1ᵀ 0] [α; μ] = [0; 1]` with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn affine_min_f64(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = points.len();
    let dim = m + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = dot(&points[i], &points[j]);
        }
        a[i][m] = 1.0;
        a[m][i] = 1.0;
    }
    a[m][dim] = 1.0;
    for col in 0..dim {
        let piv = (col..dim).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..dim {
            if r != col {
                let factor = a[r][col] / a[col][col];
                if factor != 0.0 {
                    for c in col..=dim {
                        a[r][c] -= factor * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][dim] / a[i][i]).collect())
}

fn combine_f64(points: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let n = points[0].len();
    let mut x = vec![0.0; n];
    for (p, &l) in points.iter().zip(lambda) {
        for e in 0..n {
            x[e] += l * p[e];
        }
    }
    x
}

/// Exact lower bound `Σ_e min(x_e, 0)` for `x = Σ λ_i p_i` with the float weights made exact.
fn exact_lower_bound(points: &[Vec<i128>], lambda: &[f64]) -> Option<BigRational> {
    let weights: Vec<BigRational> = lambda
        .iter()
        .map(|&l| BigRational::from_float(l.max(0.0)))
        .collect::<Option<_>>()?;
    let total: BigRational = weights.iter().fold(BigRational::zero(), |a, b| a + b);
    if !total.is_positive() {
        return None;
    }
    let n = points[0].len();
    let mut lb = BigRational::zero();
    for e in 0..n {
        let mut xe = BigRational::zero();
        for (p, w) in points.iter().zip(&weights) {
            if p[e] != 0 && !w.is_zero() {
                xe += w * BigRational::from_integer(BigInt::from(p[e]));
            }
        }
        if xe.is_negative() {
            lb += xe;
        }
    }
    Some(lb / total)
}

fn float_min_norm(ground: &Ground<'_>, max_iterations: usize) -> Option<SfmOutcome> {
    let n = ground.n();
    let init: Vec<usize> = (0..n).collect();
    let (p0, mut best_val, mut best_levels) = ground.greedy(&init);
    let mut points_i: Vec<Vec<i128>> = vec![p0.clone()];
    let mut points: Vec<Vec<f64>> = vec![p0.iter().map(|&v| v as f64).collect()];
    let mut lambda = vec![1.0];
    let mut x = points[0].clone();
    let scale = p0.iter().map(|v| v.abs()).max().unwrap_or(1).max(1) as f64;
    let eps = 1e-10 * scale * scale * n as f64;
    for _ in 0..max_iterations {
        let order = ground.order_by(&x);
        let (q, val, levels) = ground.greedy(&order);
        if val < best_val {
            best_val = val;
            best_levels = levels;
        }
        let lb: f64 = x.iter().filter(|&&v| v < 0.0).sum();
        let qf: Vec<f64> = q.iter().map(|&v| v as f64).collect();
        let gap = dot(&x, &x) - dot(&x, &qf);
        if (best_val as f64) - lb < 0.999 || gap <= eps {
            let exact_lb = exact_lower_bound(&points_i, &lambda)?;
            let bound = BigRational::from_integer(BigInt::from(best_val)) - exact_lb;
            if bound < BigRational::one() {
                return Some(SfmOutcome {
                    value: best_val + ground.base,
                    levels: best_levels,
                });
            }
            if gap <= eps {
                return None;
            }
        }
        if points_i.contains(&q) {
            return None;
        }
        points_i.push(q);
        points.push(qf);
        lambda.push(0.0);
        loop {
            let alpha = affine_min_f64(&points)?;
            if alpha.iter().all(|&a| a > 1e-12) {
                lambda = alpha;
                break;
            }
            let mut theta = f64::INFINITY;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= 1e-12 {
                    let t = l / (l - a);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let mut i = 0;
            while i < lambda.len() {
                if lambda[i] <= 1e-12 {
                    lambda.remove(i);
                    points.remove(i);
                    points_i.remove(i);
                } else {
                    i += 1;
                }
            }
            if points.is_empty() {
                return None;
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
        }
        x = combine_f64(&points, &lambda);
    }
    None
}

fn rat(v: i128) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

#[allow(clippy::needless_range_loop)]
fn solve_exact(mut a: Vec<Vec<BigRational>>) -> Option<Vec<BigRational>> {
    let dim = a.len();
    for col in 0..dim {
        let piv = (col..dim).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for c in col..=dim {
            a[col][c] = &a[col][c] * &inv;
        }
        for r in 0..dim {
            if r != col && !a[r][col].is_zero() {
                let factor = a[r][col].clone();
                for c in col..=dim {
                    let delta = &factor * &a[col][c];
                    a[r][c] -= delta;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[dim].clone()).collect())
}

fn affine_min_exact(points: &[Vec<i128>]) -> Option<Vec<BigRational>> {
    let m = points.len();
    let dim = m + 1;
    let mut a = vec![vec![BigRational::zero(); dim + 1]; dim];
    for i in 0..m {
        for j in i..m {
            let g: i128 = points[i].iter().zip(&points[j]).map(|(x, y)| x * y).sum();
            a[i][j] = rat(g);
            a[j][i] = rat(g);
        }
        a[i][m] = BigRational::one();
        a[m][i] = BigRational::one();
    }
    a[m][dim] = BigRational::one();
    let sol = solve_exact(a)?;
    Some(sol[..m].to_vec())
}

fn combine_exact(points: &[Vec<i128>], lambda: &[BigRational]) -> Vec<BigRational> {
    let n = points[0].len();
    (0..n)
        .map(|e| {
            points
                .iter()
                .zip(lambda)
                .fold(BigRational::zero(), |acc, (p, l)| acc + l * rat(p[e]))
        })
        .collect()
}

fn exact_min_norm(ground: &Ground<'_>, max_iterations: usize) -> Result<SfmOutcome, SfmError> {
    let n = ground.n();
    let init: Vec<usize> = (0..n).collect();
    let (p0, _, _) = ground.greedy(&init);
    let mut points = vec![p0];
    let mut lambda = vec![BigRational::one()];
    let mut x = combine_exact(&points, &lambda);
    let xdot = |x: &[BigRational], q: &[i128]| -> BigRational {
        x.iter()
            .zip(q)
            .fold(BigRational::zero(), |acc, (a, &b)| acc + a * rat(b))
    };
    let mut converged = false;
    for _ in 0..max_iterations {
        let xf: Vec<f64> = x
            .iter()
            .map(|v| num_traits::ToPrimitive::to_f64(v).unwrap_or(0.0))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            x[a].cmp(&x[b])
                .then(xf[a].total_cmp(&xf[b]))
                .then(a.cmp(&b))
        });
        let (q, _, _) = ground.greedy(&order);
        let xx = x.iter().fold(BigRational::zero(), |acc, v| acc + v * v);
        if xx <= xdot(&x, &q) {
            converged = true;
            break;
        }
        points.push(q);
        lambda.push(BigRational::zero());
        loop {
            let alpha = affine_min_exact(&points).ok_or(SfmError::CertificateFailed)?;
            if alpha.iter().all(BigRational::is_positive) {
                lambda = alpha;
                break;
            }
            let mut theta: Option<BigRational> = None;
            for (l, a) in lambda.iter().zip(&alpha) {
                if !a.is_positive() {
                    let t = l / (l - a);
                    if theta.as_ref().is_none_or(|th| &t < th) {
                        theta = Some(t);
                    }
                }
            }
            let theta = theta.expect("some coefficient is non-positive");
            let keep = BigRational::one() - &theta;
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = &theta * a + &keep * &*l;
            }
            let mut i = 0;
            while i < lambda.len() {
                if lambda[i].is_zero() {
                    lambda.remove(i);
                    points.remove(i);
                } else {
                    i += 1;
                }
            }
        }
        x = combine_exact(&points, &lambda);
    }
    if !converged {
        return Err(SfmError::IterationLimit);
    }
    let mut levels = vec![0; ground.problem.lens.len()];
    let mut size = 0i128;
    let mut bound = BigRational::zero();
    for (e, xe) in x.iter().enumerate() {
        if xe.is_negative() {
            let (i, j) = ground.elems[e];
            levels[i] = levels[i].max(j);
            size += 1;
            bound += xe;
        }
    }
    let closure: i128 = levels.iter().map(|&l| l as i128).sum();
    let value = (ground.problem.energy)(&levels);
    let fhat = value - ground.base + ground.problem.penalty * (closure - size);
    if rat(fhat) != bound {
        return Err(SfmError::CertificateFailed);
    }
    Ok(SfmOutcome { value, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Random submodular function on a chain product: sum of pairwise terms
    /// `w * max(0, l_i - t_i) * max(0, t_j - l_j)`-style products of monotone pieces with
    /// opposite directions (submodular), plus arbitrary unary tables.
    fn build(
        lens: &[usize],
        unary: &[Vec<i64>],
        pairs: &[(usize, usize, i64, usize, usize)],
    ) -> impl Fn(&[usize]) -> i128 {
        let unary = unary.to_vec();
        let pairs = pairs.to_vec();
        let _ = lens;
        move |l: &[usize]| {
            let mut v: i128 = 0;
            for (i, t) in unary.iter().enumerate() {
                v += t[l[i]] as i128;
            }
            for &(i, j, w, ti, tj) in &pairs {
                if i != j {
                    v += w as i128 * ((l[i] >= ti) as i128) * ((l[j] < tj) as i128);
                }
            }
            v
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        #[test]
        fn min_norm_matches_exhaustive(
            lens in proptest::collection::vec(1usize..5, 1..6),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let unary: Vec<Vec<i64>> = lens.iter().map(|&len| (0..len).map(|_| rng.gen_range(0..6)).collect()).collect();
            let k = lens.len();
            let pairs: Vec<(usize, usize, i64, usize, usize)> = (0..rng.gen_range(0..8))
                .map(|_| {
                    let i = rng.gen_range(0..k);
                    let j = rng.gen_range(0..k);
                    (i, j, rng.gen_range(1..4), rng.gen_range(0..lens[i]), rng.gen_range(0..lens[j]))
                })
                .collect();
            let f = build(&lens, &unary, &pairs);
            let bound: i128 = unary.iter().map(|t| *t.iter().max().unwrap() as i128).sum::<i128>()
                + pairs.iter().map(|p| p.2 as i128).sum::<i128>() + 1;
            let problem = SfmProblem { lens: lens.clone(), penalty: bound, energy: &f };
            let reference = exhaustive(&problem);
            for strategy in [SfmStrategy::MinNorm, SfmStrategy::ExactMinNorm] {
                let cfg = SfmConfig { strategy, ..SfmConfig::default() };
                let out = minimize(&problem, &cfg).unwrap();
                prop_assert_eq!(out.value, reference.value);
                prop_assert_eq!(f(&out.levels), out.value);
                prop_assert!(out.levels.iter().zip(&lens).all(|(l, n)| l < n));
            }
        }
    }

    #[test]
    fn empty_ground_set() {
        let f = |_: &[usize]| 7i128;
        let p = SfmProblem {
            lens: vec![1, 1],
            penalty: 1,
            energy: &f,
        };
        let out = minimize(&p, &SfmConfig::default()).unwrap();
        assert_eq!(
            out,
            SfmOutcome {
                value: 7,
                levels: vec![0, 0]
            }
        );
    }

    #[test]
    fn detects_non_submodular_objective() {
        // Supermodular on two binary coordinates: cost 1 unless both equal.
        let f = |l: &[usize]| 1 - (l[0] != l[1]) as i128;
        let p = SfmProblem {
            lens: vec![2, 2],
            penalty: 3,
            energy: &f,
        };
        let cfg = SfmConfig {
            strategy: SfmStrategy::ExactMinNorm,
            ..SfmConfig::default()
        };
        let exact = minimize(&p, &cfg);
        let reference = exhaustive(&p);
        assert!(exact.is_err() || exact.unwrap().value == reference.value);
    }
}
