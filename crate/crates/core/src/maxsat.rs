//! Weighted partial MaxSAT over boolean formulas by solution-improving
//! linear search: after each model of weight `W`, the next call requires
//! soft weight at least `W + 1`, until no such model exists.

use std::collections::HashMap;

use crate::formula::{Assignment, Formula, FragmentError, Sort, Value, VarId, VariableRegistry};
use crate::sat::{solve_full, Cnf, Lit};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MaxSatProblem {
    pub hard: Vec<Formula>,
    pub soft: Vec<(Formula, u64)>,
}

impl MaxSatProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hard(mut self, f: Formula) -> Self {
        self.hard.push(f);
        self
    }

    pub fn soft(self, f: Formula) -> Self {
        self.weighted(f, 1)
    }

    pub fn weighted(mut self, f: Formula, weight: u64) -> Self {
        assert!(weight > 0, "soft weights are positive");
        self.soft.push((f, weight));
        self
    }

    /// Summed weight of the soft formulas true under `a`, and their indices.
    pub fn score(&self, a: &Assignment) -> (u64, Vec<usize>) {
        let satisfied: Vec<usize> = self
            .soft
            .iter()
            .enumerate()
            .filter(|(_, (f, _))| f.eval(a) == Ok(true))
            .map(|(i, _)| i)
            .collect();
        let weight = satisfied.iter().map(|i| self.soft[*i].1).sum();
        (weight, satisfied)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MaxSatResult {
    Optimal {
        assignment: Assignment,
        weight: u64,
        satisfied: Vec<usize>,
    },
    HardUnsat,
}

impl MaxSatResult {
    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            MaxSatResult::Optimal { assignment, .. } => Some(assignment),
            MaxSatResult::HardUnsat => None,
        }
    }

    pub fn weight(&self) -> Option<u64> {
        match self {
            MaxSatResult::Optimal { weight, .. } => Some(*weight),
            MaxSatResult::HardUnsat => None,
        }
    }
}

pub fn maxsat_solve(
    problem: &MaxSatProblem,
    registry: &VariableRegistry,
) -> Result<MaxSatResult, FragmentError> {
    let mut base = Cnf::new(registry.sorts());
    for f in &problem.hard {
        f.check(registry)?;
        base.assert_formula(f)?;
    }
    let mut indicators = Vec::with_capacity(problem.soft.len());
    for (f, w) in &problem.soft {
        f.check(registry)?;
        indicators.push((base.reify(f)?, *w));
    }
    let total: u64 = indicators.iter().map(|(_, w)| w).sum();

    let mut cnf = base.clone();
    let mut best = None;
    while let Some(model) = solve_full(&cnf) {
        let assignment = project(&model, registry);
        let (weight, satisfied) = problem.score(&assignment);
        best = Some(MaxSatResult::Optimal {
            assignment,
            weight,
            satisfied,
        });
        if weight >= total {
            break;
        }
        cnf = base.clone();
        at_least(&mut cnf, &indicators, weight + 1);
    }
    Ok(best.unwrap_or(MaxSatResult::HardUnsat))
}

fn project(model: &[bool], registry: &VariableRegistry) -> Assignment {
    let mut a = Assignment::defaults(registry);
    for var in registry.iter().filter(|v| v.sort == Sort::Bool) {
        a.set(var.id, Value::Bool(model[var.id.index()]))
            .expect("boolean slot");
    }
    a
}

#[derive(Clone, Copy)]
enum Node {
    Const(bool),
    Lit(Lit),
}

/// Assert `Σ wᵢ·lᵢ ≥ k` through a decision diagram over prefixes of the
/// terms, one auxiliary per `(position, remaining)` pair.
fn at_least(cnf: &mut Cnf, terms: &[(Lit, u64)], k: u64) {
    let mut suffix = vec![0u64; terms.len() + 1];
    for i in (0..terms.len()).rev() {
        suffix[i] = suffix[i + 1] + terms[i].1;
    }
    let mut memo = HashMap::new();
    match node(cnf, terms, &suffix, &mut memo, 0, k) {
        Node::Const(true) => {}
        Node::Const(false) => {
            cnf.add_clause(std::iter::empty());
        }
        Node::Lit(l) => {
            cnf.add_clause([l]);
        }
    }
}

fn node(
    cnf: &mut Cnf,
    terms: &[(Lit, u64)],
    suffix: &[u64],
    memo: &mut HashMap<(usize, u64), Node>,
    i: usize,
    k: u64,
) -> Node {
    if k == 0 {
        return Node::Const(true);
    }
    if suffix[i] < k {
        return Node::Const(false);
    }
    if let Some(n) = memo.get(&(i, k)) {
        return *n;
    }
    let (lit, w) = terms[i];
    let take = node(cnf, terms, suffix, memo, i + 1, k.saturating_sub(w));
    let skip = node(cnf, terms, suffix, memo, i + 1, k);
    let a = Lit::pos(cnf.fresh_var());
    // a → (lit ∧ take) ∨ skip
    emit(cnf, a, &[Node::Lit(lit), skip]);
    emit(cnf, a, &[take, skip]);
    let n = Node::Lit(a);
    memo.insert((i, k), n);
    n
}

fn emit(cnf: &mut Cnf, a: Lit, parts: &[Node]) {
    let mut clause = vec![!a];
    for part in parts {
        match part {
            Node::Const(true) => return,
            Node::Const(false) => {}
            Node::Lit(l) => clause.push(*l),
        }
    }
    cnf.add_clause(clause);
}

/// Value of a boolean registry variable in an optimal result.
pub fn value_of(result: &MaxSatResult, id: VarId) -> Option<bool> {
    result.assignment().and_then(|a| a.bool(id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn package_manager_removes_only_c() {
        let mut reg = VariableRegistry::new();
        let a = reg.bool_var("x_A").unwrap();
        let b = reg.bool_var("x_B").unwrap();
        let c = reg.bool_var("x_C").unwrap();
        let p = MaxSatProblem::new()
            .hard(!Formula::var(a) | Formula::var(b))
            .hard(!(Formula::var(a) & Formula::var(c)))
            .hard(Formula::var(a))
            .soft(Formula::var(b))
            .soft(Formula::var(c));
        let r = maxsat_solve(&p, &reg).unwrap();
        assert_eq!(value_of(&r, a), Some(true));
        assert_eq!(value_of(&r, b), Some(true));
        assert_eq!(value_of(&r, c), Some(false));
        assert_eq!(r.weight(), Some(1));
    }

    #[test]
    fn contradictory_hard_set() {
        let mut reg = VariableRegistry::new();
        let x = reg.bool_var("x").unwrap();
        let p = MaxSatProblem::new().hard(Formula::var(x) & !Formula::var(x));
        assert_eq!(maxsat_solve(&p, &reg).unwrap(), MaxSatResult::HardUnsat);
    }

    #[test]
    fn complementary_softs() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let prob = MaxSatProblem::new()
            .soft(Formula::var(p))
            .soft(!Formula::var(p));
        assert_eq!(maxsat_solve(&prob, &reg).unwrap().weight(), Some(1));
    }

    #[test]
    fn weights_dominate_counts() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let q = reg.bool_var("q").unwrap();
        let prob = MaxSatProblem::new()
            .hard(!Formula::var(p) | !Formula::var(q))
            .soft(Formula::var(p))
            .weighted(Formula::var(q), 3);
        let r = maxsat_solve(&prob, &reg).unwrap();
        assert_eq!(r.weight(), Some(3));
        assert_eq!(value_of(&r, q), Some(true));
    }

    #[test]
    fn linear_softs_rejected() {
        let mut reg = VariableRegistry::new();
        let x = reg.real_var("x").unwrap();
        let prob = MaxSatProblem::new().soft(crate::formula::LinExpr::var(x).ge(1));
        assert_eq!(maxsat_solve(&prob, &reg), Err(FragmentError::LinearAtom));
    }

    #[test]
    fn empty_problem_has_weight_zero() {
        let reg = VariableRegistry::new();
        assert_eq!(
            maxsat_solve(&MaxSatProblem::new(), &reg).unwrap().weight(),
            Some(0)
        );
    }
}
