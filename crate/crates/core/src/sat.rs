//! Propositional satisfiability: Tseitin-style CNF encoding and a
//! deterministic DPLL solver with two-watched-literal unit propagation.
//!
//! Branching picks the lowest-numbered unassigned variable that occurs in
//! some clause and tries `true` first. Variables that occur in no clause are
//! reported as `false`.

use std::collections::HashMap;
use std::ops::Not;

use crate::formula::{
    Assignment, Formula, FormulaError, FragmentError, Sort, Value, VariableRegistry,
};

/// A variable index together with a polarity, packed as `2·var + negated`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, positive: bool) -> Lit {
        Lit(var << 1 | u32::from(!positive))
    }

    pub fn pos(var: u32) -> Lit {
        Lit::new(var, true)
    }

    pub fn neg(var: u32) -> Lit {
        Lit::new(var, false)
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    fn code(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

/// Clause set over the original variables of a registry (ids `0..n`) plus
/// auxiliary variables appended after them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    clauses: Vec<Vec<Lit>>,
    sorts: Vec<Sort>,
    num_vars: usize,
}

impl Cnf {
    /// Empty clause set whose original variables have the given sorts.
    pub fn new(sorts: Vec<Sort>) -> Cnf {
        let num_vars = sorts.len();
        Cnf {
            clauses: Vec::new(),
            sorts,
            num_vars,
        }
    }

    pub fn num_original(&self) -> usize {
        self.sorts.len()
    }

    pub fn num_auxiliary(&self) -> usize {
        self.num_vars - self.sorts.len()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn fresh_var(&mut self) -> u32 {
        self.num_vars += 1;
        (self.num_vars - 1) as u32
    }

    /// Add a clause after sorting and removing duplicates. Tautologies are
    /// dropped (returns `false`); an empty clause becomes a contradiction on
    /// a fresh auxiliary.
    pub fn add_clause(&mut self, lits: impl IntoIterator<Item = Lit>) -> bool {
        let mut lits: Vec<Lit> = lits.into_iter().collect();
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return false;
        }
        if lits.is_empty() {
            self.add_contradiction();
            return true;
        }
        self.clauses.push(lits);
        true
    }

    fn add_contradiction(&mut self) {
        let aux = self.fresh_var();
        self.clauses.push(vec![Lit::pos(aux)]);
        self.clauses.push(vec![Lit::neg(aux)]);
    }

    /// Assert `f`: every model of the clause set satisfies `f` on the
    /// original variables, and every model of `f` extends to one.
    pub fn assert_formula(&mut self, f: &Formula) -> Result<(), FragmentError> {
        self.check_vars(f)?;
        let mut enc = Encoder::new(self);
        match f.to_nnf().simplify() {
            Formula::True => {}
            Formula::False => enc.cnf.add_contradiction(),
            nnf => enc.assert_conjunct(&nnf)?,
        }
        Ok(())
    }

    /// A literal `l` such that every model with `l` true satisfies `f`.
    pub fn reify(&mut self, f: &Formula) -> Result<Lit, FragmentError> {
        self.check_vars(f)?;
        let mut enc = Encoder::new(self);
        match f.to_nnf().simplify() {
            Formula::True => Ok(Lit::pos(enc.cnf.fresh_var())),
            Formula::False => {
                let aux = enc.cnf.fresh_var();
                enc.cnf.add_clause([Lit::neg(aux)]);
                Ok(Lit::pos(aux))
            }
            nnf => enc.literal_for(&nnf),
        }
    }

    fn check_vars(&self, f: &Formula) -> Result<(), FragmentError> {
        if f.has_linear_atoms() {
            return Err(FragmentError::LinearAtom);
        }
        for id in f.free_vars() {
            match self.sorts.get(id.index()) {
                None => return Err(FormulaError::UnknownVariable(id.0).into()),
                Some(Sort::Real) => {
                    return Err(FormulaError::SortMismatch {
                        var: id.0,
                        expected: Sort::Bool,
                        found: Sort::Real,
                    }
                    .into())
                }
                Some(Sort::Bool) => {}
            }
        }
        Ok(())
    }

    /// Whether `model` (indexed by variable) satisfies every clause.
    pub fn satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|l| model.get(l.var() as usize).copied() == Some(l.is_positive()))
        })
    }
}

/// Polarity-aware Tseitin encoder over formulas in negation normal form.
/// Subformulas are shared by structural equality.
struct Encoder<'a> {
    cnf: &'a mut Cnf,
    memo: HashMap<Formula, Lit>,
}

impl<'a> Encoder<'a> {
    fn new(cnf: &'a mut Cnf) -> Self {
        Encoder {
            cnf,
            memo: HashMap::new(),
        }
    }

    fn assert_conjunct(&mut self, f: &Formula) -> Result<(), FragmentError> {
        match f {
            Formula::And(parts) => parts.iter().try_for_each(|p| self.assert_conjunct(p)),
            Formula::Or(parts) => {
                let lits = parts
                    .iter()
                    .map(|p| self.literal_for(p))
                    .collect::<Result<Vec<_>, _>>()?;
                self.cnf.add_clause(lits);
                Ok(())
            }
            other => {
                let lit = self.literal_for(other)?;
                self.cnf.add_clause([lit]);
                Ok(())
            }
        }
    }

    fn literal_for(&mut self, f: &Formula) -> Result<Lit, FragmentError> {
        match f {
            Formula::Bool(id) => return Ok(Lit::pos(id.0)),
            Formula::Not(inner) => {
                if let Formula::Bool(id) = **inner {
                    return Ok(Lit::neg(id.0));
                }
            }
            Formula::Lin(_) => return Err(FragmentError::LinearAtom),
            _ => {}
        }
        if let Some(lit) = self.memo.get(f) {
            return Ok(*lit);
        }
        let aux = Lit::pos(self.cnf.fresh_var());
        match f {
            Formula::And(parts) => {
                for p in parts {
                    let l = self.literal_for(p)?;
                    self.cnf.add_clause([!aux, l]);
                }
            }
            Formula::Or(parts) => {
                let mut clause = vec![!aux];
                for p in parts {
                    clause.push(self.literal_for(p)?);
                }
                self.cnf.add_clause(clause);
            }
            Formula::True => {}
            Formula::False => {
                self.cnf.add_clause([!aux]);
            }
            // to_nnf + simplify leave nothing else.
            other => unreachable!("not in negation normal form: {other:?}"),
        }
        self.memo.insert(f.clone(), aux);
        Ok(aux)
    }
}

/// Encode a boolean formula over `registry`'s variables.
pub fn to_cnf(f: &Formula, registry: &VariableRegistry) -> Result<Cnf, FragmentError> {
    let mut cnf = Cnf::new(registry.sorts());
    cnf.assert_formula(f)?;
    Ok(cnf)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    /// Assignment over the original variables; real-sorted slots are zero.
    Sat(Assignment),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }

    pub fn model(&self) -> Option<&Assignment> {
        match self {
            SatResult::Sat(a) => Some(a),
            SatResult::Unsat => None,
        }
    }
}

pub fn sat_solve(cnf: &Cnf) -> SatResult {
    match solve_full(cnf) {
        None => SatResult::Unsat,
        Some(model) => {
            let mut a = Assignment::from_sorts(cnf.sorts());
            for (i, sort) in cnf.sorts().iter().enumerate() {
                if *sort == Sort::Bool {
                    a.set(crate::formula::VarId(i as u32), Value::Bool(model[i]))
                        .expect("sort checked");
                }
            }
            SatResult::Sat(a)
        }
    }
}

/// Model over all variables, auxiliaries included.
pub fn solve_full(cnf: &Cnf) -> Option<Vec<bool>> {
    let model = Dpll::new(cnf).solve()?;
    debug_assert!(cnf.satisfied_by(&model));
    Some(model)
}

struct Decision {
    lit: Lit,
    flipped: bool,
    trail_start: usize,
}

struct Dpll {
    clauses: Vec<Vec<Lit>>,
    units: Vec<Lit>,
    watches: Vec<Vec<usize>>,
    values: Vec<Option<bool>>,
    trail: Vec<Lit>,
    queue_head: usize,
    decisions: Vec<Decision>,
    branch_order: Vec<u32>,
}

impl Dpll {
    fn new(cnf: &Cnf) -> Dpll {
        let n = cnf.num_vars();
        let mut occurs = vec![false; n];
        let mut clauses = Vec::new();
        let mut units = Vec::new();
        let mut watches = vec![Vec::new(); 2 * n];
        for clause in cnf.clauses() {
            for l in clause {
                occurs[l.var() as usize] = true;
            }
            if clause.len() == 1 {
                units.push(clause[0]);
            } else {
                watches[clause[0].code()].push(clauses.len());
                watches[clause[1].code()].push(clauses.len());
                clauses.push(clause.clone());
            }
        }
        let branch_order = (0..n as u32).filter(|v| occurs[*v as usize]).collect();
        Dpll {
            clauses,
            units,
            watches,
            values: vec![None; n],
            trail: Vec::new(),
            queue_head: 0,
            decisions: Vec::new(),
            branch_order,
        }
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        self.values[l.var() as usize].map(|v| v == l.is_positive())
    }

    /// Returns `false` when `l` is already false.
    fn enqueue(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            Some(v) => v,
            None => {
                self.values[l.var() as usize] = Some(l.is_positive());
                self.trail.push(l);
                true
            }
        }
    }

    /// Unit propagation to fixpoint; `false` on conflict.
    fn propagate(&mut self) -> bool {
        while self.queue_head < self.trail.len() {
            let falsified = !self.trail[self.queue_head];
            self.queue_head += 1;
            let watching = std::mem::take(&mut self.watches[falsified.code()]);
            let mut kept = Vec::with_capacity(watching.len());
            let mut conflict = false;
            for (pos, &ci) in watching.iter().enumerate() {
                if conflict {
                    kept.extend_from_slice(&watching[pos..]);
                    break;
                }
                let clause = &mut self.clauses[ci];
                if clause[0] == falsified {
                    clause.swap(0, 1);
                }
                let other = clause[0];
                if self.values[other.var() as usize].map(|v| v == other.is_positive()) == Some(true)
                {
                    kept.push(ci);
                    continue;
                }
                let replacement = (2..clause.len()).find(|&k| {
                    let l = clause[k];
                    self.values[l.var() as usize].map(|v| v == l.is_positive()) != Some(false)
                });
                match replacement {
                    Some(k) => {
                        clause.swap(1, k);
                        let new_watch = clause[1];
                        self.watches[new_watch.code()].push(ci);
                    }
                    None => {
                        kept.push(ci);
                        if !self.enqueue(other) {
                            conflict = true;
                        }
                    }
                }
            }
            self.watches[falsified.code()] = kept;
            if conflict {
                return false;
            }
        }
        true
    }

    fn undo_to(&mut self, trail_len: usize) {
        for l in self.trail.drain(trail_len..) {
            self.values[l.var() as usize] = None;
        }
        self.queue_head = trail_len;
    }

    /// Chronological backtracking to the most recent unflipped decision.
    fn backtrack(&mut self) -> bool {
        while let Some(d) = self.decisions.pop() {
            self.undo_to(d.trail_start);
            if !d.flipped {
                let lit = !d.lit;
                self.decisions.push(Decision {
                    lit,
                    flipped: true,
                    trail_start: d.trail_start,
                });
                self.enqueue(lit);
                return true;
            }
        }
        false
    }

    fn solve(mut self) -> Option<Vec<bool>> {
        for l in std::mem::take(&mut self.units) {
            if !self.enqueue(l) {
                return None;
            }
        }
        loop {
            if !self.propagate() {
                if !self.backtrack() {
                    return None;
                }
                continue;
            }
            let next = self
                .branch_order
                .iter()
                .copied()
                .find(|v| self.values[*v as usize].is_none());
            match next {
                None => {
                    return Some(self.values.iter().map(|v| v.unwrap_or(false)).collect());
                }
                Some(v) => {
                    let lit = Lit::pos(v);
                    self.decisions.push(Decision {
                        lit,
                        flipped: false,
                        trail_start: self.trail.len(),
                    });
                    self.enqueue(lit);
                }
            }
        }
    }
}
