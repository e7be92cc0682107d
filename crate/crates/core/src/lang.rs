//! Domains, {0,1}-valued cost functions, crisp relations, languages and instances.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

/// A domain element, stored as its position in the domain's label list.
pub type Elem = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("domain is empty")]
    EmptyDomain,
    #[error("duplicate domain label `{0}`")]
    DuplicateLabel(String),
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown domain label `{0}`")]
    UnknownLabel(String),
    #[error("`{name}` expects arity {expected}, got a tuple or scope of length {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("negative weight {0}")]
    NegativeWeight(Rational),
    #[error("`{0}` is defined over a different domain size")]
    DomainMismatch(String),
    #[error("variable index {0} out of range")]
    VariableOutOfRange(usize),
    #[error("element {0} out of range")]
    ElementOutOfRange(usize),
}

/// Number of tuples of length `k` over a domain of size `d`.
pub fn tuple_count(d: usize, k: usize) -> usize {
    d.pow(k as u32)
}

/// Mixed-radix index of a tuple; the first coordinate is most significant.
pub fn encode(t: &[Elem], d: usize) -> usize {
    t.iter().fold(0, |acc, &x| acc * d + x)
}

pub fn decode(mut idx: usize, d: usize, k: usize) -> Vec<Elem> {
    let mut t = vec![0; k];
    for slot in t.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
    t
}

/// All tuples of length `k` over `0..d` in lexicographic order.
pub fn all_tuples(d: usize, k: usize) -> impl Iterator<Item = Vec<Elem>> {
    (0..tuple_count(d, k)).map(move |i| decode(i, d, k))
}

/// Hamming distance between two tuples of equal length.
pub fn hamming(x: &[Elem], y: &[Elem]) -> usize {
    x.iter().zip(y).filter(|(a, b)| a != b).count()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Domain {
    labels: Vec<String>,
}

impl Domain {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, LangError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(LangError::EmptyDomain);
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(LangError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Domain { labels })
    }

    /// Domain `a, b, c, ...` of the given size (falls back to `e<i>` past 26).
    pub fn letters(size: usize) -> Self {
        let labels = (0..size)
            .map(|i| {
                if i < 26 {
                    ((b'a' + i as u8) as char).to_string()
                } else {
                    format!("e{i}")
                }
            })
            .collect();
        Domain { labels }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, e: Elem) -> &str {
        &self.labels[e]
    }

    pub fn index_of(&self, label: &str) -> Option<Elem> {
        self.labels.iter().position(|l| l == label)
    }

    fn parse_tuple(&self, t: &[String]) -> Result<Vec<Elem>, LangError> {
        t.iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| LangError::UnknownLabel(l.clone()))
            })
            .collect()
    }

    pub fn format_tuple(&self, t: &[Elem]) -> Vec<String> {
        t.iter().map(|&e| self.labels[e].clone()).collect()
    }

    /// Subdomain made of the given elements, in the given order.
    pub fn subdomain(&self, elems: &[Elem]) -> Domain {
        Domain {
            labels: elems.iter().map(|&e| self.labels[e].clone()).collect(),
        }
    }

    /// Domain whose element `perm[i]` carries label `i`'s label.
    pub fn permuted(&self, perm: &[Elem]) -> Domain {
        let mut labels = vec![String::new(); self.size()];
        for (old, &new) in perm.iter().enumerate() {
            labels[new] = self.labels[old].clone();
        }
        Domain { labels }
    }
}

/// A cost function taking values in {0, 1}, stored as a dense table.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CostFunction {
    name: String,
    arity: usize,
    domain_size: usize,
    table: Vec<u8>,
}

impl CostFunction {
    pub fn from_zeros(
        name: impl Into<String>,
        arity: usize,
        domain_size: usize,
        zeros: impl IntoIterator<Item = Vec<Elem>>,
    ) -> Result<Self, LangError> {
        let name = name.into();
        let mut table = vec![1u8; tuple_count(domain_size, arity)];
        for z in zeros {
            if z.len() != arity {
                return Err(LangError::ArityMismatch {
                    name,
                    expected: arity,
                    found: z.len(),
                });
            }
            if let Some(&bad) = z.iter().find(|&&e| e >= domain_size) {
                return Err(LangError::ElementOutOfRange(bad));
            }
            table[encode(&z, domain_size)] = 0;
        }
        Ok(CostFunction {
            name,
            arity,
            domain_size,
            table,
        })
    }

    /// Builds a function from a predicate returning the value (0 or 1) of each tuple.
    pub fn from_fn(
        name: impl Into<String>,
        arity: usize,
        domain_size: usize,
        mut value: impl FnMut(&[Elem]) -> u8,
    ) -> Self {
        let table = all_tuples(domain_size, arity)
            .map(|t| value(&t).min(1))
            .collect();
        CostFunction {
            name: name.into(),
            arity,
            domain_size,
            table,
        }
    }

    pub fn from_table(
        name: impl Into<String>,
        arity: usize,
        domain_size: usize,
        table: Vec<u8>,
    ) -> Self {
        assert_eq!(table.len(), tuple_count(domain_size, arity));
        CostFunction {
            name: name.into(),
            arity,
            domain_size,
            table: table.into_iter().map(|v| v.min(1)).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    pub fn value(&self, t: &[Elem]) -> u8 {
        self.table[encode(t, self.domain_size)]
    }

    pub fn is_zero(&self, t: &[Elem]) -> bool {
        self.value(t) == 0
    }

    /// Zero tuples in lexicographic order.
    pub fn zeros(&self) -> Vec<Vec<Elem>> {
        self.table
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0)
            .map(|(i, _)| decode(i, self.domain_size, self.arity))
            .collect()
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        CostFunction {
            name: name.into(),
            ..self.clone()
        }
    }

    /// Restriction to `image`, re-indexed so that new element `i` is `image[i]`.
    pub fn restrict(&self, image: &[Elem]) -> Self {
        let k = image.len();
        CostFunction::from_fn(self.name.clone(), self.arity, k, |t| {
            let orig: Vec<Elem> = t.iter().map(|&e| image[e]).collect();
            self.value(&orig)
        })
    }

    /// Same function after renaming element `i` to `perm[i]`.
    pub fn relabel(&self, perm: &[Elem]) -> Self {
        let inv = invert(perm);
        CostFunction::from_fn(self.name.clone(), self.arity, self.domain_size, |t| {
            let orig: Vec<Elem> = t.iter().map(|&e| inv[e]).collect();
            self.value(&orig)
        })
    }
}

pub(crate) fn invert(perm: &[Elem]) -> Vec<Elem> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// A crisp relation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation {
    name: String,
    arity: usize,
    domain_size: usize,
    tuples: BTreeSet<Vec<Elem>>,
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        domain_size: usize,
        tuples: impl IntoIterator<Item = Vec<Elem>>,
    ) -> Result<Self, LangError> {
        let name = name.into();
        let mut set = BTreeSet::new();
        for t in tuples {
            if t.len() != arity {
                return Err(LangError::ArityMismatch {
                    name,
                    expected: arity,
                    found: t.len(),
                });
            }
            if let Some(&bad) = t.iter().find(|&&e| e >= domain_size) {
                return Err(LangError::ElementOutOfRange(bad));
            }
            set.insert(t);
        }
        Ok(Relation {
            name,
            arity,
            domain_size,
            tuples: set,
        })
    }

    /// The unary relation `{(e)}` named `const_<label>`.
    pub fn constant(domain: &Domain, e: Elem) -> Self {
        Relation {
            name: constant_name(domain, e),
            arity: 1,
            domain_size: domain.size(),
            tuples: [vec![e]].into_iter().collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn tuples(&self) -> &BTreeSet<Vec<Elem>> {
        &self.tuples
    }

    pub fn contains(&self, t: &[Elem]) -> bool {
        self.tuples.contains(t)
    }

    /// The pinned element if this is a unary singleton relation.
    pub fn as_constant(&self) -> Option<Elem> {
        if self.arity == 1 && self.tuples.len() == 1 {
            self.tuples.iter().next().map(|t| t[0])
        } else {
            None
        }
    }

    pub fn restrict(&self, image: &[Elem]) -> Self {
        let tuples = self
            .tuples
            .iter()
            .filter_map(|t| {
                t.iter()
                    .map(|e| image.iter().position(|x| x == e))
                    .collect::<Option<Vec<_>>>()
            })
            .collect();
        Relation {
            name: self.name.clone(),
            arity: self.arity,
            domain_size: image.len(),
            tuples,
        }
    }

    pub fn relabel(&self, perm: &[Elem]) -> Self {
        Relation {
            name: self.name.clone(),
            arity: self.arity,
            domain_size: self.domain_size,
            tuples: self
                .tuples
                .iter()
                .map(|t| t.iter().map(|&e| perm[e]).collect())
                .collect(),
        }
    }
}

pub fn constant_name(domain: &Domain, e: Elem) -> String {
    format!("const_{}", domain.label(e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionEntry {
    name: String,
    arity: usize,
    zeros: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationEntry {
    name: String,
    arity: usize,
    tuples: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LanguageFile {
    domain: Vec<String>,
    functions: Vec<FunctionEntry>,
    #[serde(default)]
    relations: Vec<RelationEntry>,
}

/// A finite set of {0,1}-valued cost functions plus optional crisp relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Language {
    domain: Domain,
    functions: Vec<Arc<CostFunction>>,
    relations: Vec<Arc<Relation>>,
}

impl Language {
    pub fn new(
        domain: Domain,
        functions: Vec<CostFunction>,
        relations: Vec<Relation>,
    ) -> Result<Self, LangError> {
        let mut names = HashSet::new();
        for f in &functions {
            if !names.insert(f.name().to_string()) {
                return Err(LangError::DuplicateName(f.name().to_string()));
            }
            if f.domain_size() != domain.size() {
                return Err(LangError::DomainMismatch(f.name().to_string()));
            }
        }
        for r in &relations {
            if !names.insert(r.name().to_string()) {
                return Err(LangError::DuplicateName(r.name().to_string()));
            }
            if r.domain_size() != domain.size() {
                return Err(LangError::DomainMismatch(r.name().to_string()));
            }
        }
        Ok(Language {
            domain,
            functions: functions.into_iter().map(Arc::new).collect(),
            relations: relations.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn functions(&self) -> &[Arc<CostFunction>] {
        &self.functions
    }

    pub fn relations(&self) -> &[Arc<Relation>] {
        &self.relations
    }

    pub fn function(&self, name: &str) -> Option<&Arc<CostFunction>> {
        self.functions.iter().find(|f| f.name() == name)
    }

    /// Looks up a relation; `const_<label>` resolves to a pin even if undeclared.
    pub fn relation(&self, name: &str) -> Option<Arc<Relation>> {
        if let Some(r) = self.relations.iter().find(|r| r.name() == name) {
            return Some(r.clone());
        }
        let label = name.strip_prefix("const_")?;
        let e = self.domain.index_of(label)?;
        Some(Arc::new(Relation::constant(&self.domain, e)))
    }

    pub fn max_arity(&self) -> usize {
        self.functions.iter().map(|f| f.arity()).max().unwrap_or(0)
    }

    /// Language restricted to `image`; element `i` of the result is `image[i]`.
    pub fn restrict(&self, image: &[Elem]) -> Language {
        Language {
            domain: self.domain.subdomain(image),
            functions: self
                .functions
                .iter()
                .map(|f| Arc::new(f.restrict(image)))
                .collect(),
            relations: self
                .relations
                .iter()
                .map(|r| Arc::new(r.restrict(image)))
                .collect(),
        }
    }

    /// Isomorphic copy with element `i` moved to position `perm[i]`.
    pub fn relabel(&self, perm: &[Elem]) -> Language {
        Language {
            domain: self.domain.permuted(perm),
            functions: self
                .functions
                .iter()
                .map(|f| Arc::new(f.relabel(perm)))
                .collect(),
            relations: self
                .relations
                .iter()
                .map(|r| Arc::new(r.relabel(perm)))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LangError> {
        let file: LanguageFile =
            serde_json::from_str(text).map_err(|e| LangError::Json(e.to_string()))?;
        let domain = Domain::new(file.domain)?;
        let mut functions = Vec::new();
        for entry in file.functions {
            let zeros = entry
                .zeros
                .iter()
                .map(|t| {
                    if t.len() != entry.arity {
                        return Err(LangError::ArityMismatch {
                            name: entry.name.clone(),
                            expected: entry.arity,
                            found: t.len(),
                        });
                    }
                    domain.parse_tuple(t)
                })
                .collect::<Result<Vec<_>, _>>()?;
            functions.push(CostFunction::from_zeros(
                entry.name,
                entry.arity,
                domain.size(),
                zeros,
            )?);
        }
        let mut relations = Vec::new();
        for entry in file.relations {
            let tuples = entry
                .tuples
                .iter()
                .map(|t| {
                    if t.len() != entry.arity {
                        return Err(LangError::ArityMismatch {
                            name: entry.name.clone(),
                            expected: entry.arity,
                            found: t.len(),
                        });
                    }
                    domain.parse_tuple(t)
                })
                .collect::<Result<Vec<_>, _>>()?;
            relations.push(Relation::new(
                entry.name,
                entry.arity,
                domain.size(),
                tuples,
            )?);
        }
        Language::new(domain, functions, relations)
    }

    /// Canonical JSON: fixed key order, tuples sorted in domain order.
    pub fn to_json(&self) -> String {
        let file = LanguageFile {
            domain: self.domain.labels.clone(),
            functions: self
                .functions
                .iter()
                .map(|f| FunctionEntry {
                    name: f.name().to_string(),
                    arity: f.arity(),
                    zeros: f
                        .zeros()
                        .iter()
                        .map(|t| self.domain.format_tuple(t))
                        .collect(),
                })
                .collect(),
            relations: self
                .relations
                .iter()
                .map(|r| RelationEntry {
                    name: r.name().to_string(),
                    arity: r.arity(),
                    tuples: r
                        .tuples()
                        .iter()
                        .map(|t| self.domain.format_tuple(t))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("language serializes")
    }
}

/// A weighted cost-function application `weight * function(scope)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub weight: Rational,
    pub function: Arc<CostFunction>,
    pub scope: Vec<usize>,
}

/// A crisp constraint `(scope; relation)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub relation: Arc<Relation>,
    pub scope: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermEntry {
    function: String,
    weight: Rational,
    scope: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintEntry {
    relation: String,
    scope: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    variables: Vec<String>,
    terms: Vec<TermEntry>,
    #[serde(default)]
    constraints: Vec<ConstraintEntry>,
}

/// Pin status of every variable, derived from unary singleton constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pins {
    Consistent(Vec<Option<Elem>>),
    Contradictory,
}

/// A min CSP instance: variables, weighted terms and crisp constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    domain: Domain,
    variables: Vec<String>,
    terms: Vec<Term>,
    constraints: Vec<Constraint>,
}

impl Instance {
    pub fn new(domain: Domain) -> Self {
        Instance {
            domain,
            variables: Vec::new(),
            terms: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> Result<usize, LangError> {
        let name = name.into();
        if self.variable_index(&name).is_some() {
            return Err(LangError::DuplicateVariable(name));
        }
        self.variables.push(name);
        Ok(self.variables.len() - 1)
    }

    /// Adds a variable named `prefix`, `prefix1`, `prefix2`, ... whichever is free.
    pub fn add_fresh_variable(&mut self, prefix: &str) -> usize {
        let taken: HashSet<&str> = self.variables.iter().map(String::as_str).collect();
        let mut name = prefix.to_string();
        let mut i = 1;
        while taken.contains(name.as_str()) {
            name = format!("{prefix}{i}");
            i += 1;
        }
        self.variables.push(name);
        self.variables.len() - 1
    }

    pub fn add_term(
        &mut self,
        weight: Rational,
        function: Arc<CostFunction>,
        scope: Vec<usize>,
    ) -> Result<(), LangError> {
        if weight.is_negative() {
            return Err(LangError::NegativeWeight(weight));
        }
        if function.domain_size() != self.domain.size() {
            return Err(LangError::DomainMismatch(function.name().to_string()));
        }
        if scope.len() != function.arity() {
            return Err(LangError::ArityMismatch {
                name: function.name().to_string(),
                expected: function.arity(),
                found: scope.len(),
            });
        }
        self.check_scope(&scope)?;
        self.terms.push(Term {
            weight,
            function,
            scope,
        });
        Ok(())
    }

    pub fn add_constraint(
        &mut self,
        relation: Arc<Relation>,
        scope: Vec<usize>,
    ) -> Result<(), LangError> {
        if relation.domain_size() != self.domain.size() {
            return Err(LangError::DomainMismatch(relation.name().to_string()));
        }
        if scope.len() != relation.arity() {
            return Err(LangError::ArityMismatch {
                name: relation.name().to_string(),
                expected: relation.arity(),
                found: scope.len(),
            });
        }
        self.check_scope(&scope)?;
        self.constraints.push(Constraint { relation, scope });
        Ok(())
    }

    /// Adds the constraint `var = e`.
    pub fn pin(&mut self, var: usize, e: Elem) -> Result<(), LangError> {
        if e >= self.domain.size() {
            return Err(LangError::ElementOutOfRange(e));
        }
        let r = Arc::new(Relation::constant(&self.domain, e));
        self.add_constraint(r, vec![var])
    }

    fn check_scope(&self, scope: &[usize]) -> Result<(), LangError> {
        match scope.iter().find(|&&v| v >= self.variables.len()) {
            Some(&v) => Err(LangError::VariableOutOfRange(v)),
            None => Ok(()),
        }
    }

    /// Objective value, or `None` if a crisp constraint is violated.
    pub fn measure(&self, assignment: &[Elem]) -> Option<Rational> {
        for c in &self.constraints {
            let t: Vec<Elem> = c.scope.iter().map(|&v| assignment[v]).collect();
            if !c.relation.contains(&t) {
                return None;
            }
        }
        let mut total = Rational::zero();
        for term in &self.terms {
            let t: Vec<Elem> = term.scope.iter().map(|&v| assignment[v]).collect();
            if term.function.value(&t) == 1 {
                total += &term.weight;
            }
        }
        Some(total)
    }

    /// Sum of all term weights.
    pub fn total_weight(&self) -> Rational {
        self.terms.iter().map(|t| &t.weight).sum()
    }

    /// Pins from unary singleton constraints, ignoring all other constraints.
    pub fn pins(&self) -> Pins {
        let mut pins = vec![None; self.num_vars()];
        for c in &self.constraints {
            if let Some(e) = c.relation.as_constant() {
                let v = c.scope[0];
                match pins[v] {
                    Some(p) if p != e => return Pins::Contradictory,
                    _ => pins[v] = Some(e),
                }
            }
        }
        Pins::Consistent(pins)
    }

    /// Constraints that are not pins.
    pub fn non_pin_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints
            .iter()
            .filter(|c| c.relation.as_constant().is_none())
    }

    /// Copy of the instance with every function and relation replaced via the given maps.
    pub fn map_language(
        &self,
        domain: Domain,
        mut f: impl FnMut(&Arc<CostFunction>) -> Arc<CostFunction>,
        mut r: impl FnMut(&Arc<Relation>) -> Arc<Relation>,
    ) -> Instance {
        Instance {
            domain,
            variables: self.variables.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    weight: t.weight.clone(),
                    function: f(&t.function),
                    scope: t.scope.clone(),
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    relation: r(&c.relation),
                    scope: c.scope.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str, language: &Language) -> Result<Self, LangError> {
        let file: InstanceFile =
            serde_json::from_str(text).map_err(|e| LangError::Json(e.to_string()))?;
        let mut inst = Instance::new(language.domain().clone());
        for v in file.variables {
            inst.add_variable(v)?;
        }
        let resolve = |inst: &Instance, scope: &[String]| {
            scope
                .iter()
                .map(|v| {
                    inst.variable_index(v)
                        .ok_or_else(|| LangError::UnknownVariable(v.clone()))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        for t in file.terms {
            let f = language
                .function(&t.function)
                .ok_or_else(|| LangError::UnknownFunction(t.function.clone()))?
                .clone();
            let scope = resolve(&inst, &t.scope)?;
            inst.add_term(t.weight, f, scope)?;
        }
        for c in file.constraints {
            let r = language
                .relation(&c.relation)
                .ok_or_else(|| LangError::UnknownRelation(c.relation.clone()))?;
            let scope = resolve(&inst, &c.scope)?;
            inst.add_constraint(r, scope)?;
        }
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let name = |v: &usize| self.variables[*v].clone();
        let file = InstanceFile {
            variables: self.variables.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| TermEntry {
                    function: t.function.name().to_string(),
                    weight: t.weight.clone(),
                    scope: t.scope.iter().map(name).collect(),
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintEntry {
                    relation: c.relation.name().to_string(),
                    scope: c.scope.iter().map(name).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    /// Assignment as a variable-name to label map.
    pub fn label_assignment(&self, assignment: &[Elem]) -> BTreeMap<String, String> {
        self.variables
            .iter()
            .zip(assignment)
            .map(|(v, &e)| (v.clone(), self.domain.label(e).to_string()))
            .collect()
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            let args: Vec<&str> = t
                .scope
                .iter()
                .map(|&v| self.variables[v].as_str())
                .collect();
            write!(f, "{}*{}({})", t.weight, t.function.name(), args.join(","))?;
        }
        for c in &self.constraints {
            let args: Vec<&str> = c
                .scope
                .iter()
                .map(|&v| self.variables[v].as_str())
                .collect();
            write!(f, " | {}({})", c.relation.name(), args.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GAMMA: &str = r#"{
      "domain": ["a","b","c","d"],
      "functions": [
        {"name":"u_ab","arity":1,"zeros":[["b"],["a"]]},
        {"name":"h","arity":2,"zeros":[["a","a"],["d","a"]]}
      ],
      "relations": [{"name":"const_a","arity":1,"tuples":[["a"]]}]
    }"#;

    #[test]
    fn parses_and_canonicalizes() {
        let l = Language::from_json(GAMMA).unwrap();
        assert_eq!(l.domain().size(), 4);
        let u = l.function("u_ab").unwrap();
        assert_eq!(u.zeros(), vec![vec![0], vec![1]]);
        assert_eq!(u.value(&[2]), 1);
        let text = l.to_json();
        let again = Language::from_json(&text).unwrap();
        assert_eq!(again, l);
        assert_eq!(again.to_json(), text);
    }

    #[test]
    fn language_errors() {
        let dup = r#"{"domain":["a"],"functions":[{"name":"f","arity":1,"zeros":[]},{"name":"f","arity":1,"zeros":[]}]}"#;
        assert!(matches!(
            Language::from_json(dup),
            Err(LangError::DuplicateName(_))
        ));
        let arity = r#"{"domain":["a"],"functions":[{"name":"f","arity":2,"zeros":[["a"]]}]}"#;
        assert!(matches!(
            Language::from_json(arity),
            Err(LangError::ArityMismatch { .. })
        ));
        let label = r#"{"domain":["a"],"functions":[{"name":"f","arity":1,"zeros":[["z"]]}]}"#;
        assert!(matches!(
            Language::from_json(label),
            Err(LangError::UnknownLabel(_))
        ));
        let malformed = r#"{"domain":["a"],"functions":[{"name":"f","arity":1,"zeros":[[1]]}]}"#;
        assert!(matches!(
            Language::from_json(malformed),
            Err(LangError::Json(_))
        ));
        let dup_label = r#"{"domain":["a","a"],"functions":[]}"#;
        assert!(matches!(
            Language::from_json(dup_label),
            Err(LangError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn instance_roundtrip_and_errors() {
        let l = Language::from_json(GAMMA).unwrap();
        let text = r#"{"variables":["x","y"],
            "terms":[{"function":"h","weight":"2","scope":["x","y"]},{"function":"u_ab","weight":"1/2","scope":["y"]}],
            "constraints":[{"relation":"const_a","scope":["x"]}]}"#;
        let inst = Instance::from_json(text, &l).unwrap();
        assert_eq!(inst.measure(&[0, 0]), Some(Rational::zero()));
        assert_eq!(inst.measure(&[0, 2]), Some(Rational::new(5, 2)));
        assert_eq!(inst.measure(&[1, 0]), None);
        let out = inst.to_json();
        let again = Instance::from_json(&out, &l).unwrap();
        assert_eq!(again, inst);
        assert_eq!(again.to_json(), out);

        let unknown =
            r#"{"variables":["x"],"terms":[{"function":"g","weight":"1","scope":["x"]}]}"#;
        assert!(matches!(
            Instance::from_json(unknown, &l),
            Err(LangError::UnknownFunction(_))
        ));
        let rel =
            r#"{"variables":["x"],"terms":[],"constraints":[{"relation":"nope","scope":["x"]}]}"#;
        assert!(matches!(
            Instance::from_json(rel, &l),
            Err(LangError::UnknownRelation(_))
        ));
        let scope = r#"{"variables":["x"],"terms":[{"function":"h","weight":"1","scope":["x"]}]}"#;
        assert!(matches!(
            Instance::from_json(scope, &l),
            Err(LangError::ArityMismatch { .. })
        ));
        let neg =
            r#"{"variables":["x"],"terms":[{"function":"u_ab","weight":"-1","scope":["x"]}]}"#;
        assert!(matches!(
            Instance::from_json(neg, &l),
            Err(LangError::NegativeWeight(_))
        ));
    }

    #[test]
    fn implicit_constant_relations_resolve() {
        let l = Language::from_json(GAMMA).unwrap();
        let r = l.relation("const_c").unwrap();
        assert_eq!(r.as_constant(), Some(2));
        assert!(l.relation("const_q").is_none());
    }

    #[test]
    fn restrict_and_relabel() {
        let l = Language::from_json(GAMMA).unwrap();
        let r = l.restrict(&[0, 3]);
        assert_eq!(r.domain().labels(), &["a".to_string(), "d".to_string()]);
        let h = r.function("h").unwrap();
        assert_eq!(h.zeros(), vec![vec![0, 0], vec![1, 0]]);
        let perm = [3, 2, 1, 0];
        let p = l.relabel(&perm);
        assert_eq!(p.domain().labels()[3], "a");
        assert_eq!(
            p.function("h").unwrap().zeros(),
            vec![vec![0, 3], vec![3, 3]]
        );
    }

    proptest! {
        #[test]
        fn encode_decode_inverse(d in 1usize..5, k in 0usize..5, seed in 0usize..10_000) {
            let n = tuple_count(d, k);
            let idx = seed % n;
            prop_assert_eq!(encode(&decode(idx, d, k), d), idx);
        }

        #[test]
        fn random_language_roundtrip(d in 1usize..5, bits in proptest::collection::vec(any::<bool>(), 16 + 4)) {
            let f = CostFunction::from_fn("f", 2, d, |t| bits[encode(t, d) % bits.len()] as u8);
            let g = CostFunction::from_fn("g", 1, d, |t| bits[16 + t[0]] as u8);
            let l = Language::new(Domain::letters(d), vec![f, g], vec![]).unwrap();
            let text = l.to_json();
            let back = Language::from_json(&text).unwrap();
            prop_assert_eq!(&back, &l);
            prop_assert_eq!(back.to_json(), text);
        }
    }
}
