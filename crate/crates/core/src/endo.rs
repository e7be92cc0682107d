//! Endomorphisms, cores, indicator problems, unary separators, and the two instance
//! reductions: big-M elimination of a definable relation, and elimination of constants.

use std::sync::Arc;

use thiserror::Error;

use crate::lang::{all_tuples, CostFunction, Elem, Instance, LangError, Language, Pins, Relation};
use crate::oracle::{Oracle, OracleError, PartialCostTable};
use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EndoError {
    #[error("language is not a core")]
    NotCore,
    #[error("relation `{0}` differs from the optimal-solution projection of its definition")]
    RelationMismatch(String),
    #[error("projection variables must be distinct")]
    RepeatedVariable,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// A total map on the domain, stored as its table of images.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endomorphism {
    map: Vec<Elem>,
}

impl Endomorphism {
    pub fn new(map: Vec<Elem>) -> Self {
        Endomorphism { map }
    }

    pub fn identity(d: usize) -> Self {
        Endomorphism {
            map: (0..d).collect(),
        }
    }

    /// The map sending `a` to `b` and fixing everything else.
    pub fn e(d: usize, a: Elem, b: Elem) -> Self {
        let mut map: Vec<Elem> = (0..d).collect();
        map[a] = b;
        Endomorphism { map }
    }

    pub fn map(&self) -> &[Elem] {
        &self.map
    }

    pub fn apply(&self, x: Elem) -> Elem {
        self.map[x]
    }

    pub fn apply_tuple(&self, t: &[Elem]) -> Vec<Elem> {
        t.iter().map(|&x| self.map[x]).collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Endomorphism) -> Endomorphism {
        Endomorphism {
            map: other.map.iter().map(|&x| self.map[x]).collect(),
        }
    }

    pub fn is_injective(&self) -> bool {
        self.image().len() == self.map.len()
    }

    pub fn is_idempotent(&self) -> bool {
        self.compose(self) == *self
    }

    /// Sorted image.
    pub fn image(&self) -> Vec<Elem> {
        let mut img = self.map.clone();
        img.sort_unstable();
        img.dedup();
        img
    }

    pub fn inverse(&self) -> Option<Endomorphism> {
        if !self.is_injective() {
            return None;
        }
        Some(Endomorphism {
            map: crate::lang::invert(&self.map),
        })
    }

    /// Whether the map sends every zero of `f` to a zero of `f`.
    pub fn preserves(&self, f: &CostFunction) -> bool {
        f.zeros().iter().all(|t| f.is_zero(&self.apply_tuple(t)))
    }

    /// Smallest power that is idempotent.
    pub fn idempotent_power(&self) -> Endomorphism {
        let mut p = self.clone();
        while !p.is_idempotent() {
            p = p.compose(self);
        }
        p
    }
}

/// All zero-preserving maps of the language's cost functions, in lexicographic order.
pub fn endomorphisms(language: &Language) -> Vec<Endomorphism> {
    let d = language.domain().size();
    let zeros: Vec<(Arc<CostFunction>, Vec<Vec<Elem>>)> = language
        .functions()
        .iter()
        .map(|f| (f.clone(), f.zeros()))
        .collect();
    let mut out = Vec::new();
    let mut buf = Vec::new();
    'maps: for map in all_tuples(d, d) {
        for (f, zs) in &zeros {
            for z in zs {
                buf.clear();
                buf.extend(z.iter().map(|&x| map[x]));
                if !f.is_zero(&buf) {
                    continue 'maps;
                }
            }
        }
        out.push(Endomorphism { map });
    }
    out
}

/// The indicator instance together with the variable `x_d` of each element `d`.
#[derive(Clone, Debug)]
pub struct IndicatorInstance {
    pub instance: Instance,
    pub iota: Vec<usize>,
}

impl IndicatorInstance {
    /// `σ ∘ ι` for an assignment `σ` of the indicator instance.
    pub fn decode(&self, assignment: &[Elem]) -> Endomorphism {
        Endomorphism {
            map: self.iota.iter().map(|&v| assignment[v]).collect(),
        }
    }
}

/// One unit-weight term `f(x_t)` for every function `f` and every zero `t` of `f`.
pub fn indicator_problem(language: &Language) -> IndicatorInstance {
    let domain = language.domain().clone();
    let mut instance = Instance::new(domain.clone());
    let iota: Vec<usize> = domain
        .labels()
        .iter()
        .map(|l| instance.add_fresh_variable(&format!("x_{l}")))
        .collect();
    for f in language.functions() {
        for z in f.zeros() {
            let scope = z.iter().map(|&e| iota[e]).collect();
            instance
                .add_term(Rational::one(), f.clone(), scope)
                .expect("indicator terms are well formed");
        }
    }
    IndicatorInstance { instance, iota }
}

/// Result of one retraction step.
#[derive(Clone, Debug)]
pub struct CoreRetraction {
    pub language: Language,
    pub endomorphism: Endomorphism,
    pub is_core: bool,
    /// Elements of the input domain kept by the retraction, in domain order.
    pub image: Vec<Elem>,
}

pub fn is_core(language: &Language) -> bool {
    endomorphisms(language)
        .iter()
        .all(Endomorphism::is_injective)
}

/// Retracts onto the image of an idempotent endomorphism of minimum image size
/// (lexicographically least such map, then its idempotent power).
pub fn core_retract(language: &Language) -> CoreRetraction {
    let d = language.domain().size();
    let ends = endomorphisms(language);
    let min_size = ends.iter().map(|e| e.image().len()).min().unwrap_or(d);
    if min_size == d {
        return CoreRetraction {
            language: language.clone(),
            endomorphism: Endomorphism::identity(d),
            is_core: true,
            image: (0..d).collect(),
        };
    }
    let e = ends
        .iter()
        .find(|e| e.image().len() == min_size)
        .expect("minimum is attained")
        .idempotent_power();
    let image = e.image();
    CoreRetraction {
        language: language.restrict(&image),
        endomorphism: e,
        is_core: false,
        image,
    }
}

/// A core of the language with the composite retraction into it.
#[derive(Clone, Debug)]
pub struct Core {
    pub language: Language,
    /// Original elements forming the core domain, in domain order.
    pub image: Vec<Elem>,
    /// Retraction of the original domain onto `image` (as original elements).
    pub retraction: Endomorphism,
    pub steps: usize,
}

pub fn core(language: &Language) -> Core {
    let d = language.domain().size();
    let mut current = language.clone();
    let mut image: Vec<Elem> = (0..d).collect();
    let mut retraction = Endomorphism::identity(d);
    let mut steps = 0;
    loop {
        let r = core_retract(&current);
        if r.is_core {
            break;
        }
        steps += 1;
        // r maps positions of `current` (indexes into `image`) to positions.
        let new_map = retraction
            .map
            .iter()
            .map(|&orig| {
                let pos = image.iter().position(|&x| x == orig).expect("in image");
                image[r.endomorphism.apply(pos)]
            })
            .collect();
        retraction = Endomorphism { map: new_map };
        image = r.image.iter().map(|&p| image[p]).collect();
        current = r.language;
    }
    Core {
        language: current,
        image,
        retraction,
        steps,
    }
}

/// A unary table `u` with `u(a) = 0`, `u(b) = 1`, realised by an explicit gadget.
#[derive(Clone, Debug)]
pub struct UnarySeparator {
    pub table: PartialCostTable,
    pub gadget: Instance,
    pub var: usize,
    pub function: String,
    pub tuple: Vec<Elem>,
}

/// Gadget: one term `h(x_t)` for a zero `t` of `h` with `h(e_ab(t)) = 1`, every `x_d`
/// with `d ≠ a` pinned to `d`, expressed on `x_a`. Absent if `e_ab` is an endomorphism.
pub fn unary_separator(language: &Language, a: Elem, b: Elem) -> Option<UnarySeparator> {
    assert_ne!(a, b, "separator needs distinct elements");
    let d = language.domain().size();
    let e = Endomorphism::e(d, a, b);
    let (h, t) = language.functions().iter().find_map(|h| {
        h.zeros()
            .into_iter()
            .find(|t| !h.is_zero(&e.apply_tuple(t)))
            .map(|t| (h.clone(), t))
    })?;
    let domain = language.domain().clone();
    let mut gadget = Instance::new(domain.clone());
    let vars: Vec<usize> = domain
        .labels()
        .iter()
        .map(|l| gadget.add_fresh_variable(&format!("x_{l}")))
        .collect();
    gadget
        .add_term(
            Rational::one(),
            h.clone(),
            t.iter().map(|&x| vars[x]).collect(),
        )
        .expect("well-formed term");
    for (x, &v) in vars.iter().enumerate() {
        if x != a {
            gadget.pin(v, x).expect("valid pin");
        }
    }
    let table = Oracle::default()
        .express(&gadget, &[vars[a]])
        .expect("gadget has |D| assignments");
    Some(UnarySeparator {
        table,
        gadget,
        var: vars[a],
        function: h.name().to_string(),
        tuple: t,
    })
}

/// Output of [`eliminate_relation`].
#[derive(Clone, Debug)]
pub struct Elimination {
    pub instance: Instance,
    pub m: Rational,
    pub applications: usize,
    pub definition_optimum: Rational,
}

/// Replaces every application of `relation` in `host` by a copy of `definition` scaled by
/// `M = (U+1)/δ` (or 0 when all measures of the definition coincide), identifying
/// `definition_vars` with the application's scope.
pub fn eliminate_relation(
    host: &Instance,
    relation: &Relation,
    definition: &Instance,
    definition_vars: &[usize],
    oracle: &Oracle,
) -> Result<Elimination, EndoError> {
    let mut seen = vec![false; definition.num_vars()];
    for &v in definition_vars {
        if std::mem::replace(&mut seen[v], true) {
            return Err(EndoError::RepeatedVariable);
        }
    }
    let proj = oracle.project_optsol(definition, definition_vars)?;
    if &proj.tuples != relation.tuples() || definition_vars.len() != relation.arity() {
        return Err(EndoError::RelationMismatch(relation.name().to_string()));
    }
    let u = host.total_weight();
    let m = match oracle.min_gap(definition)? {
        Some(delta) => (u + Rational::one()) / delta,
        None => Rational::zero(),
    };
    let mut out = Instance::new(host.domain().clone());
    for v in host.variables() {
        out.add_variable(v.clone())?;
    }
    for t in host.terms() {
        out.add_term(t.weight.clone(), t.function.clone(), t.scope.clone())?;
    }
    let mut applications = 0;
    for c in host.constraints() {
        let matches =
            c.relation.name() == relation.name() && c.relation.tuples() == relation.tuples();
        if !matches {
            out.add_constraint(c.relation.clone(), c.scope.clone())?;
            continue;
        }
        applications += 1;
        let mut map = vec![usize::MAX; definition.num_vars()];
        for (&dv, &hv) in definition_vars.iter().zip(&c.scope) {
            map[dv] = hv;
        }
        for (dv, slot) in map.iter_mut().enumerate() {
            if *slot == usize::MAX {
                let name = format!("{}_{}", definition.variables()[dv], applications);
                *slot = out.add_fresh_variable(&name);
            }
        }
        for t in definition.terms() {
            let scope = t.scope.iter().map(|&v| map[v]).collect();
            out.add_term(&m * &t.weight, t.function.clone(), scope)?;
        }
        for k in definition.constraints() {
            let scope = k.scope.iter().map(|&v| map[v]).collect();
            out.add_constraint(k.relation.clone(), scope)?;
        }
    }
    Ok(Elimination {
        instance: out,
        m,
        applications,
        definition_optimum: proj.optimum,
    })
}

/// Outcome of [`reduce_constants`].
#[derive(Clone, Debug)]
pub enum ConstantsReduction {
    Infeasible,
    Unchanged(Instance),
    Reduced(ReducedInstance),
}

/// An instance without pins, equivalent to the input up to an automorphism.
#[derive(Clone, Debug)]
pub struct ReducedInstance {
    pub instance: Instance,
    /// New variable for each original variable.
    pub var_map: Vec<usize>,
    /// New variable `x_d` for each element `d`.
    pub iota: Vec<usize>,
    pub m: Rational,
}

impl ReducedInstance {
    /// Maps an optimal assignment of the reduced instance back to the original variables
    /// through the inverse of the automorphism read off the indicator variables.
    pub fn recover(&self, assignment: &[Elem]) -> Option<Vec<Elem>> {
        let g = Endomorphism::new(self.iota.iter().map(|&v| assignment[v]).collect());
        let inv = g.inverse()?;
        Some(
            self.var_map
                .iter()
                .map(|&v| inv.apply(assignment[v]))
                .collect(),
        )
    }
}

/// Removes pins from an instance over a core: each pinned variable is merged into the
/// indicator variable of its constant, the indicator instance's optimal-solution relation is
/// applied once to the indicator variables, and that relation is eliminated with big-M.
pub fn reduce_constants(
    language: &Language,
    instance: &Instance,
    oracle: &Oracle,
) -> Result<ConstantsReduction, EndoError> {
    if !is_core(language) {
        return Err(EndoError::NotCore);
    }
    let pins = match instance.pins() {
        Pins::Contradictory => return Ok(ConstantsReduction::Infeasible),
        Pins::Consistent(p) => p,
    };
    if pins.iter().all(Option::is_none) {
        return Ok(ConstantsReduction::Unchanged(instance.clone()));
    }
    let domain = instance.domain().clone();
    let d = domain.size();
    let mut out = Instance::new(domain.clone());
    let mut var_map = vec![usize::MAX; instance.num_vars()];
    for (v, name) in instance.variables().iter().enumerate() {
        if pins[v].is_none() {
            var_map[v] = out.add_variable(name.clone())?;
        }
    }
    let iota: Vec<usize> = domain
        .labels()
        .iter()
        .map(|l| out.add_fresh_variable(&format!("x_{l}")))
        .collect();
    for (v, p) in pins.iter().enumerate() {
        if let Some(e) = p {
            var_map[v] = iota[*e];
        }
    }
    for t in instance.terms() {
        let scope = t.scope.iter().map(|&v| var_map[v]).collect();
        out.add_term(t.weight.clone(), t.function.clone(), scope)?;
    }
    for c in instance.non_pin_constraints() {
        let scope = c.scope.iter().map(|&v| var_map[v]).collect();
        out.add_constraint(c.relation.clone(), scope)?;
    }
    let ip = indicator_problem(language);
    let proj = oracle.project_optsol(&ip.instance, &ip.iota)?;
    let r = Arc::new(proj.to_relation("endomorphisms", d, d));
    out.add_constraint(r.clone(), iota.clone())?;
    let elim = eliminate_relation(&out, &r, &ip.instance, &ip.iota, oracle)?;
    Ok(ConstantsReduction::Reduced(ReducedInstance {
        instance: elim.instance,
        var_map,
        iota,
        m: elim.m,
    }))
}
