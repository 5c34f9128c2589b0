//! Variables, values, assignments and the constraint formula AST shared by
//! every solver and by the scenario runtime.
//!
//! Arithmetic is exact: real-sorted values are arbitrary-precision rationals,
//! and linear atoms are evaluated without rounding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, BitAnd, BitOr, Mul, Neg, Not, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Exact rational number used for every real-sorted quantity.
pub type Rational = BigRational;

/// Integer as a rational.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `num / den` in lowest terms. Panics when `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Parse `"p/q"`, `"p"` or a decimal such as `"-2.75"` into a rational.
pub fn parse_rational(text: &str) -> Result<Rational, FormulaError> {
    let bad = || FormulaError::InvalidValue(text.to_string());
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let int_part: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits.parse().map_err(|_| bad())?
        };
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let magnitude = Rational::new(int_part * &scale + frac_part, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    let int: BigInt = text.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(int))
}

/// Canonical `p/q` rendering; integers render as `p/1`.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("unknown variable id {0}")]
    UnknownVariable(u32),
    #[error("unknown variable name `{0}`")]
    UnknownName(String),
    #[error("variable `{0}` is already declared")]
    DuplicateVariable(String),
    #[error("variable {var} has sort {expected:?} but was used as {found:?}")]
    SortMismatch {
        var: u32,
        expected: Sort,
        found: Sort,
    },
    #[error("empty and/or connective")]
    EmptyConnective,
    #[error("invalid value `{0}`")]
    InvalidValue(String),
    #[error("assignment covers {found} variables, registry has {expected}")]
    NotTotal { expected: usize, found: usize },
}

/// Input outside the fragment a solver accepts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("linear arithmetic atom in a boolean-only context")]
    LinearAtom,
    #[error("disequality atom passed to the linear feasibility solver")]
    Disequality,
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// Dense variable identifier; registration order is the canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Bool,
    Real,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Var {
    pub id: VarId,
    pub name: String,
    pub sort: Sort,
}

/// The variable set of a model. Names and ids are in bijection.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableRegistry {
    vars: Vec<Var>,
    by_name: HashMap<String, VarId>,
}

impl VariableRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, sort: Sort) -> Result<VarId, FormulaError> {
        if self.by_name.contains_key(name) {
            return Err(FormulaError::DuplicateVariable(name.to_string()));
        }
        let id = VarId(self.vars.len() as u32);
        self.vars.push(Var {
            id,
            name: name.to_string(),
            sort,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn bool_var(&mut self, name: &str) -> Result<VarId, FormulaError> {
        self.declare(name, Sort::Bool)
    }

    pub fn real_var(&mut self, name: &str) -> Result<VarId, FormulaError> {
        self.declare(name, Sort::Real)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: VarId) -> Option<&Var> {
        self.vars.get(id.index())
    }

    pub fn sort(&self, id: VarId) -> Option<Sort> {
        self.get(id).map(|v| v.sort)
    }

    pub fn name(&self, id: VarId) -> &str {
        self.get(id).map(|v| v.name.as_str()).unwrap_or("?")
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter()
    }

    pub fn sorts(&self) -> Vec<Sort> {
        self.vars.iter().map(|v| v.sort).collect()
    }

    pub fn bool_vars(&self) -> Vec<VarId> {
        self.vars
            .iter()
            .filter(|v| v.sort == Sort::Bool)
            .map(|v| v.id)
            .collect()
    }
}

/// A value in the codomain of an assignment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bool(bool),
    Real(Rational),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Real(_) => Sort::Real,
        }
    }

    pub fn default_for(sort: Sort) -> Value {
        match sort {
            Sort::Bool => Value::Bool(false),
            Sort::Real => Value::Real(Rational::zero()),
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&Rational> {
        match self {
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    /// `true`/`false` for booleans, the string `"p/q"` for rationals.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Real(r) => serde_json::Value::String(format_rational(r)),
        }
    }

    pub fn from_json(json: &serde_json::Value) -> Result<Value, FormulaError> {
        match json {
            serde_json::Value::Bool(b) => Ok(Value::Bool(*b)),
            serde_json::Value::String(s) => parse_rational(s).map(Value::Real),
            other => Err(FormulaError::InvalidValue(other.to_string())),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Real(r) => write!(f, "{}", format_rational(r)),
        }
    }
}

/// Total map from the variables of a registry to values of matching sort.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    values: Vec<Value>,
}

impl Assignment {
    /// Every boolean false, every real zero.
    pub fn defaults(registry: &VariableRegistry) -> Self {
        Self::from_sorts(&registry.sorts())
    }

    pub fn from_sorts(sorts: &[Sort]) -> Self {
        Assignment {
            values: sorts.iter().map(|s| Value::default_for(*s)).collect(),
        }
    }

    pub fn from_values(
        registry: &VariableRegistry,
        values: Vec<Value>,
    ) -> Result<Self, FormulaError> {
        if values.len() != registry.len() {
            return Err(FormulaError::NotTotal {
                expected: registry.len(),
                found: values.len(),
            });
        }
        for (var, value) in registry.iter().zip(&values) {
            if var.sort != value.sort() {
                return Err(FormulaError::SortMismatch {
                    var: var.id.0,
                    expected: var.sort,
                    found: value.sort(),
                });
            }
        }
        Ok(Assignment { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: VarId) -> Option<&Value> {
        self.values.get(id.index())
    }

    pub fn bool(&self, id: VarId) -> Option<bool> {
        self.get(id).and_then(Value::as_bool)
    }

    pub fn real(&self, id: VarId) -> Option<&Rational> {
        self.get(id).and_then(Value::as_real)
    }

    /// Overwrite one value; the sort must match the existing entry.
    pub fn set(&mut self, id: VarId, value: Value) -> Result<(), FormulaError> {
        let slot = self
            .values
            .get_mut(id.index())
            .ok_or(FormulaError::UnknownVariable(id.0))?;
        if slot.sort() != value.sort() {
            return Err(FormulaError::SortMismatch {
                var: id.0,
                expected: slot.sort(),
                found: value.sort(),
            });
        }
        *slot = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &Value)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (VarId(i as u32), v))
    }

    /// JSON object keyed by variable name, in registration order.
    pub fn to_json(&self, registry: &VariableRegistry) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (id, value) in self.iter() {
            map.insert(registry.name(id).to_string(), value.to_json());
        }
        serde_json::Value::Object(map)
    }

    pub fn from_json(
        registry: &VariableRegistry,
        json: &serde_json::Value,
    ) -> Result<Self, FormulaError> {
        let object = json
            .as_object()
            .ok_or_else(|| FormulaError::InvalidValue(json.to_string()))?;
        let mut values = Vec::with_capacity(registry.len());
        for var in registry.iter() {
            let raw = object
                .get(&var.name)
                .ok_or_else(|| FormulaError::UnknownName(var.name.clone()))?;
            values.push(Value::from_json(raw)?);
        }
        if object.len() != registry.len() {
            return Err(FormulaError::NotTotal {
                expected: registry.len(),
                found: object.len(),
            });
        }
        Self::from_values(registry, values)
    }
}

/// Relation of a linear atom `Σ cᵢ·xᵢ ⟨rel⟩ bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl Rel {
    /// The relation of the logical negation.
    pub fn negate(self) -> Rel {
        match self {
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Eq => Rel::Ne,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
            Rel::Ne => Rel::Eq,
        }
    }

    /// The relation obtained when both sides are multiplied by -1.
    pub fn mirror(self) -> Rel {
        match self {
            Rel::Lt => Rel::Gt,
            Rel::Le => Rel::Ge,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
            other => other,
        }
    }

    pub fn holds<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            Rel::Lt => lhs < rhs,
            Rel::Le => lhs <= rhs,
            Rel::Eq => lhs == rhs,
            Rel::Ge => lhs >= rhs,
            Rel::Gt => lhs > rhs,
            Rel::Ne => lhs != rhs,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Rel::Lt | Rel::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Ne => "distinct",
        }
    }
}

/// Linear term `Σ cᵢ·xᵢ + constant` used to build atoms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinExpr {
    coeffs: BTreeMap<VarId, Rational>,
    constant: Rational,
}

impl LinExpr {
    pub fn var(id: VarId) -> Self {
        Self::term(id, Rational::one())
    }

    pub fn term(id: VarId, coeff: Rational) -> Self {
        let mut e = LinExpr::default();
        e.add_term(id, coeff);
        e
    }

    pub fn constant(c: Rational) -> Self {
        LinExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn add_term(&mut self, id: VarId, coeff: Rational) {
        let entry = self.coeffs.entry(id).or_insert_with(Rational::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.coeffs.remove(&id);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<VarId, Rational> {
        &self.coeffs
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    fn atom(self, rel: Rel, rhs: impl Into<LinExpr>) -> Formula {
        let diff = self - rhs.into();
        Formula::Lin(LinAtom::new(diff.coeffs, rel, -diff.constant))
    }

    pub fn lt(self, rhs: impl Into<LinExpr>) -> Formula {
        self.atom(Rel::Lt, rhs)
    }
    pub fn le(self, rhs: impl Into<LinExpr>) -> Formula {
        self.atom(Rel::Le, rhs)
    }
    pub fn eq(self, rhs: impl Into<LinExpr>) -> Formula {
        self.atom(Rel::Eq, rhs)
    }
    pub fn ge(self, rhs: impl Into<LinExpr>) -> Formula {
        self.atom(Rel::Ge, rhs)
    }
    pub fn gt(self, rhs: impl Into<LinExpr>) -> Formula {
        self.atom(Rel::Gt, rhs)
    }
    pub fn ne(self, rhs: impl Into<LinExpr>) -> Formula {
        self.atom(Rel::Ne, rhs)
    }
}

impl From<VarId> for LinExpr {
    fn from(id: VarId) -> Self {
        LinExpr::var(id)
    }
}

impl From<Rational> for LinExpr {
    fn from(c: Rational) -> Self {
        LinExpr::constant(c)
    }
}

impl From<&Rational> for LinExpr {
    fn from(c: &Rational) -> Self {
        LinExpr::constant(c.clone())
    }
}

impl From<i64> for LinExpr {
    fn from(c: i64) -> Self {
        LinExpr::constant(rat(c))
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        let rhs = rhs.into();
        for (id, c) in rhs.coeffs {
            self.add_term(id, c);
        }
        self.constant += rhs.constant;
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        self + (-rhs.into())
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        LinExpr {
            coeffs: self.coeffs.into_iter().map(|(id, c)| (id, -c)).collect(),
            constant: -self.constant,
        }
    }
}

impl Mul<Rational> for LinExpr {
    type Output = LinExpr;
    fn mul(self, k: Rational) -> LinExpr {
        if k.is_zero() {
            return LinExpr::default();
        }
        LinExpr {
            coeffs: self
                .coeffs
                .into_iter()
                .map(|(id, c)| (id, c * &k))
                .collect(),
            constant: self.constant * &k,
        }
    }
}

/// `Σ cᵢ·xᵢ ⟨rel⟩ bound` over real-sorted variables. Zero coefficients are
/// never stored, so structurally equal atoms compare equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinAtom {
    pub coeffs: BTreeMap<VarId, Rational>,
    pub rel: Rel,
    pub bound: Rational,
}

impl LinAtom {
    pub fn new(coeffs: BTreeMap<VarId, Rational>, rel: Rel, bound: Rational) -> Self {
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        LinAtom { coeffs, rel, bound }
    }

    pub fn negated(&self) -> LinAtom {
        LinAtom {
            coeffs: self.coeffs.clone(),
            rel: self.rel.negate(),
            bound: self.bound.clone(),
        }
    }

    pub fn with_rel(&self, rel: Rel) -> LinAtom {
        LinAtom {
            coeffs: self.coeffs.clone(),
            rel,
            bound: self.bound.clone(),
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.coeffs.keys().copied()
    }

    /// Value of the left-hand side under `a`.
    pub fn lhs(&self, a: &Assignment) -> Result<Rational, FormulaError> {
        let mut sum = Rational::zero();
        for (id, c) in &self.coeffs {
            match a.get(*id) {
                Some(Value::Real(x)) => sum += c * x,
                Some(Value::Bool(_)) => {
                    return Err(FormulaError::SortMismatch {
                        var: id.0,
                        expected: Sort::Bool,
                        found: Sort::Real,
                    })
                }
                None => return Err(FormulaError::UnknownVariable(id.0)),
            }
        }
        Ok(sum)
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, FormulaError> {
        Ok(self.rel.holds(&self.lhs(a)?, &self.bound))
    }
}

/// Quantifier-free formula over boolean variables and linear atoms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Bool(VarId),
    Lin(LinAtom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(id: VarId) -> Formula {
        Formula::Bool(id)
    }

    pub fn negate(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn implies(self, consequent: Formula) -> Formula {
        Formula::Implies(Box::new(self), Box::new(consequent))
    }

    /// Conjunction; no operands gives `True`, one operand is returned as is.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        match parts.len() {
            0 => Formula::True,
            1 => parts.pop().unwrap(),
            _ => Formula::And(parts),
        }
    }

    /// Disjunction; no operands gives `False`, one operand is returned as is.
    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        match parts.len() {
            0 => Formula::False,
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    pub fn eval(&self, a: &Assignment) -> Result<bool, FormulaError> {
        Ok(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Bool(id) => match a.get(*id) {
                Some(Value::Bool(b)) => *b,
                Some(Value::Real(_)) => {
                    return Err(FormulaError::SortMismatch {
                        var: id.0,
                        expected: Sort::Real,
                        found: Sort::Bool,
                    })
                }
                None => return Err(FormulaError::UnknownVariable(id.0)),
            },
            Formula::Lin(atom) => atom.eval(a)?,
            Formula::Not(inner) => !inner.eval(a)?,
            Formula::And(parts) => {
                // No short-circuit: sort errors in later operands still surface.
                let mut result = true;
                for p in parts {
                    result &= p.eval(a)?;
                }
                result
            }
            Formula::Or(parts) => {
                let mut result = false;
                for p in parts {
                    result |= p.eval(a)?;
                }
                result
            }
            Formula::Implies(p, q) => {
                let p = p.eval(a)?;
                let q = q.eval(a)?;
                !p || q
            }
        })
    }

    pub fn free_vars(&self) -> BTreeSet<VarId> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarId>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Bool(id) => {
                out.insert(*id);
            }
            Formula::Lin(atom) => out.extend(atom.vars()),
            Formula::Not(inner) => inner.collect_vars(out),
            Formula::And(parts) | Formula::Or(parts) => {
                parts.iter().for_each(|p| p.collect_vars(out))
            }
            Formula::Implies(p, q) => {
                p.collect_vars(out);
                q.collect_vars(out);
            }
        }
    }

    pub fn has_linear_atoms(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Bool(_) => false,
            Formula::Lin(_) => true,
            Formula::Not(inner) => inner.has_linear_atoms(),
            Formula::And(parts) | Formula::Or(parts) => parts.iter().any(Formula::has_linear_atoms),
            Formula::Implies(p, q) => p.has_linear_atoms() || q.has_linear_atoms(),
        }
    }

    /// Negation normal form: no `Implies`, negation only directly above
    /// boolean atoms, negated linear atoms replaced by the flipped relation.
    pub fn to_nnf(&self) -> Formula {
        self.nnf(false)
    }

    fn nnf(&self, negated: bool) -> Formula {
        match (self, negated) {
            (Formula::True, false) | (Formula::False, true) => Formula::True,
            (Formula::True, true) | (Formula::False, false) => Formula::False,
            (Formula::Bool(id), false) => Formula::Bool(*id),
            (Formula::Bool(id), true) => Formula::Bool(*id).negate(),
            (Formula::Lin(atom), false) => Formula::Lin(atom.clone()),
            (Formula::Lin(atom), true) => Formula::Lin(atom.negated()),
            (Formula::Not(inner), _) => inner.nnf(!negated),
            (Formula::And(parts), false) | (Formula::Or(parts), true) => {
                Formula::And(parts.iter().map(|p| p.nnf(negated)).collect())
            }
            (Formula::Or(parts), false) | (Formula::And(parts), true) => {
                Formula::Or(parts.iter().map(|p| p.nnf(negated)).collect())
            }
            (Formula::Implies(p, q), false) => Formula::Or(vec![p.nnf(true), q.nnf(false)]),
            (Formula::Implies(p, q), true) => Formula::And(vec![p.nnf(false), q.nnf(true)]),
        }
    }

    /// Constant folding: the result is `True`, `False`, or free of constants.
    pub fn simplify(&self) -> Formula {
        match self {
            Formula::True | Formula::False | Formula::Bool(_) => self.clone(),
            Formula::Lin(atom) if atom.coeffs.is_empty() => {
                if atom.rel.holds(&Rational::zero(), &atom.bound) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Formula::Lin(_) => self.clone(),
            Formula::Not(inner) => match inner.simplify() {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                other => other.negate(),
            },
            Formula::And(parts) => {
                let mut kept = Vec::with_capacity(parts.len());
                for p in parts {
                    match p.simplify() {
                        Formula::True => {}
                        Formula::False => return Formula::False,
                        other => kept.push(other),
                    }
                }
                Formula::and(kept)
            }
            Formula::Or(parts) => {
                let mut kept = Vec::with_capacity(parts.len());
                for p in parts {
                    match p.simplify() {
                        Formula::False => {}
                        Formula::True => return Formula::True,
                        other => kept.push(other),
                    }
                }
                Formula::or(kept)
            }
            Formula::Implies(p, q) => {
                Formula::Or(vec![(**p).clone().negate(), (**q).clone()]).simplify()
            }
        }
    }

    /// Check that variables exist with the right sorts and that no and/or
    /// node is empty.
    pub fn check(&self, registry: &VariableRegistry) -> Result<(), FormulaError> {
        match self {
            Formula::True | Formula::False => Ok(()),
            Formula::Bool(id) => expect_sort(registry, *id, Sort::Bool),
            Formula::Lin(atom) => atom
                .vars()
                .try_for_each(|id| expect_sort(registry, id, Sort::Real)),
            Formula::Not(inner) => inner.check(registry),
            Formula::And(parts) | Formula::Or(parts) => {
                if parts.is_empty() {
                    return Err(FormulaError::EmptyConnective);
                }
                parts.iter().try_for_each(|p| p.check(registry))
            }
            Formula::Implies(p, q) => {
                p.check(registry)?;
                q.check(registry)
            }
        }
    }

    /// S-expression rendering with variable names taken from `registry`.
    pub fn display<'a>(&'a self, registry: &'a VariableRegistry) -> impl fmt::Display + 'a {
        Named {
            formula: self,
            registry,
        }
    }
}

fn expect_sort(registry: &VariableRegistry, id: VarId, sort: Sort) -> Result<(), FormulaError> {
    match registry.sort(id) {
        None => Err(FormulaError::UnknownVariable(id.0)),
        Some(found) if found != sort => Err(FormulaError::SortMismatch {
            var: id.0,
            expected: found,
            found: sort,
        }),
        Some(_) => Ok(()),
    }
}

impl Not for Formula {
    type Output = Formula;
    fn not(self) -> Formula {
        self.negate()
    }
}

impl BitAnd for Formula {
    type Output = Formula;
    fn bitand(self, rhs: Formula) -> Formula {
        Formula::And(vec![self, rhs])
    }
}

impl BitOr for Formula {
    type Output = Formula;
    fn bitor(self, rhs: Formula) -> Formula {
        Formula::Or(vec![self, rhs])
    }
}

struct Named<'a> {
    formula: &'a Formula,
    registry: &'a VariableRegistry,
}

impl Named<'_> {
    fn write(&self, f: &mut fmt::Formatter<'_>, formula: &Formula) -> fmt::Result {
        let name = |id: VarId| self.registry.name(id).to_string();
        match formula {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Bool(id) => write!(f, "{}", name(*id)),
            Formula::Lin(atom) => {
                write!(f, "({} (+", atom.rel.symbol())?;
                for (id, c) in &atom.coeffs {
                    if c.is_one() {
                        write!(f, " {}", name(*id))?;
                    } else {
                        write!(f, " (* {} {})", sexp_rational(c), name(*id))?;
                    }
                }
                write!(f, ") {})", sexp_rational(&atom.bound))
            }
            Formula::Not(inner) => {
                write!(f, "(not ")?;
                self.write(f, inner)?;
                write!(f, ")")
            }
            Formula::And(parts) | Formula::Or(parts) => {
                let op = if matches!(formula, Formula::And(_)) {
                    "and"
                } else {
                    "or"
                };
                write!(f, "({op}")?;
                for p in parts {
                    write!(f, " ")?;
                    self.write(f, p)?;
                }
                write!(f, ")")
            }
            Formula::Implies(p, q) => {
                write!(f, "(=> ")?;
                self.write(f, p)?;
                write!(f, " ")?;
                self.write(f, q)?;
                write!(f, ")")
            }
        }
    }
}

fn sexp_rational(r: &Rational) -> String {
    let body = if r.is_integer() {
        r.numer().abs().to_string()
    } else {
        format!("{}/{}", r.numer().abs(), r.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, self.formula)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (VariableRegistry, VarId, VarId, VarId) {
        let mut reg = VariableRegistry::new();
        let x = reg.real_var("x").unwrap();
        let y = reg.real_var("y").unwrap();
        let z = reg.real_var("z").unwrap();
        (reg, x, y, z)
    }

    fn reals(reg: &VariableRegistry, vals: &[i64]) -> Assignment {
        Assignment::from_values(reg, vals.iter().map(|v| Value::Real(rat(*v))).collect()).unwrap()
    }

    #[test]
    fn two_clause_instance_evaluates_true() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let q = reg.bool_var("q").unwrap();
        let phi = (Formula::var(p) | Formula::var(q)) & (Formula::var(p) | !Formula::var(q));
        let a = Assignment::from_values(&reg, vec![Value::Bool(true), Value::Bool(false)]).unwrap();
        assert!(phi.eval(&a).unwrap());
        assert!(Formula::True.eval(&a).unwrap());
    }

    #[test]
    fn linear_atom_exact_evaluation() {
        let (reg, x, y, z) = setup();
        let atom = (LinExpr::var(x) + y).le(z);
        assert!(atom.eval(&reals(&reg, &[1, 1, 3])).unwrap());
        assert!(!atom.eval(&reals(&reg, &[1, 1, 1])).unwrap());
    }

    #[test]
    fn sort_mismatch_is_an_error() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let x = reg.real_var("x").unwrap();
        let a = Assignment::defaults(&reg);
        assert!(matches!(
            Formula::var(x).eval(&a),
            Err(FormulaError::SortMismatch { .. })
        ));
        let bad = Formula::Lin(LinAtom::new([(p, rat(1))].into(), Rel::Le, rat(0)));
        assert!(bad.eval(&a).is_err());
        assert!(bad.check(&reg).is_err());
    }

    #[test]
    fn free_vars_examples() {
        let mut reg = VariableRegistry::new();
        let xa = reg.bool_var("x_A").unwrap();
        let xb = reg.bool_var("x_B").unwrap();
        let x1 = reg.real_var("x1").unwrap();
        let dep = !Formula::var(xa) | Formula::var(xb);
        assert_eq!(dep.free_vars(), [xa, xb].into());
        assert!(Formula::True.free_vars().is_empty());
        assert_eq!(LinExpr::var(x1).gt(50).free_vars(), [x1].into());
    }

    #[test]
    fn nnf_examples() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let q = reg.bool_var("q").unwrap();
        let x = reg.real_var("x").unwrap();
        assert_eq!(
            (!(Formula::var(p) & Formula::var(q))).to_nnf(),
            Formula::Or(vec![!Formula::var(p), !Formula::var(q)])
        );
        assert_eq!((!LinExpr::var(x).le(5)).to_nnf(), LinExpr::var(x).gt(5));
        assert_eq!((!LinExpr::var(x).eq(5)).to_nnf(), LinExpr::var(x).ne(5));
        let hot = p;
        let imp = Formula::var(hot).implies(LinExpr::var(x).gt(50));
        assert_eq!(
            imp.to_nnf(),
            Formula::Or(vec![!Formula::var(hot), LinExpr::var(x).gt(50)])
        );
    }

    #[test]
    fn rational_canonical_form() {
        assert_eq!(ratio(2, 4), ratio(1, 2));
        assert_eq!(Value::Real(ratio(2, 4)), Value::Real(ratio(1, 2)));
        assert_eq!(format_rational(&rat(3)), "3/1");
        assert_eq!(format_rational(&ratio(-6, 4)), "-3/2");
        assert_eq!(parse_rational("-2.75").unwrap(), ratio(-11, 4));
        assert_eq!(parse_rational("4/6").unwrap(), ratio(2, 3));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn value_json_round_trip() {
        let mut reg = VariableRegistry::new();
        reg.bool_var("p").unwrap();
        reg.real_var("t").unwrap();
        let a = Assignment::from_values(&reg, vec![Value::Bool(true), Value::Real(ratio(7, 3))])
            .unwrap();
        let json = a.to_json(&reg);
        assert_eq!(json.to_string(), r#"{"p":true,"t":"7/3"}"#);
        assert_eq!(Assignment::from_json(&reg, &json).unwrap(), a);
    }

    #[test]
    fn registry_rejects_duplicates_and_checks_totality() {
        let mut reg = VariableRegistry::new();
        reg.bool_var("p").unwrap();
        assert!(matches!(
            reg.real_var("p"),
            Err(FormulaError::DuplicateVariable(_))
        ));
        assert!(Assignment::from_values(&reg, vec![]).is_err());
        assert!(Assignment::from_values(&reg, vec![Value::Real(rat(0))]).is_err());
    }

    #[test]
    fn simplify_folds_constants() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let f = Formula::And(vec![
            Formula::True,
            Formula::Or(vec![Formula::False, Formula::var(p)]),
        ]);
        assert_eq!(f.simplify(), Formula::var(p));
        assert_eq!(
            Formula::And(vec![Formula::var(p), Formula::False]).simplify(),
            Formula::False
        );
        let constant_atom = LinExpr::from(3).le(5);
        assert_eq!(constant_atom.simplify(), Formula::True);
    }

    #[test]
    fn display_uses_names() {
        let (reg, x, y, z) = setup();
        let f = (LinExpr::var(x) + y).le(z);
        assert_eq!(f.display(&reg).to_string(), "(<= (+ x y (* (- 1) z)) 0)");
    }
}
