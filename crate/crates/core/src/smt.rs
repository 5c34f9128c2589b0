//! Satisfiability of boolean combinations of boolean variables and linear
//! real atoms, by lazy boolean abstraction with the simplex as theory oracle.
//!
//! The input is put in negation normal form and `≠` atoms are split into
//! `< ∨ >`, so every linear atom occurs positively. A skeleton model then
//! only needs the atoms it sets true to hold: those are handed to the LP, and
//! an infeasible subset comes back as a blocking clause.

use std::collections::BTreeMap;

use crate::formula::{
    Assignment, Formula, FragmentError, LinAtom, Rel, Sort, Value, VarId, VariableRegistry,
};
use crate::lp::{lp_feasible, LinSystem, LpResult};
use crate::sat::{solve_full, Cnf, Lit};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmtResult {
    Sat(Assignment),
    Unsat,
}

impl SmtResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SmtResult::Sat(_))
    }

    pub fn model(&self) -> Option<&Assignment> {
        match self {
            SmtResult::Sat(a) => Some(a),
            SmtResult::Unsat => None,
        }
    }
}

/// Linear atoms of a formula, each bound to a boolean abstraction variable
/// numbered after the registry's variables in order of first occurrence.
#[derive(Clone, Debug, Default)]
pub struct AtomTable {
    offset: u32,
    atoms: Vec<LinAtom>,
    index: BTreeMap<LinAtom, usize>,
}

impl AtomTable {
    pub fn new(offset: usize) -> Self {
        AtomTable {
            offset: offset as u32,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[LinAtom] {
        &self.atoms
    }

    pub fn var_of(&self, atom: &LinAtom) -> Option<VarId> {
        self.index.get(atom).map(|i| VarId(self.offset + *i as u32))
    }

    fn intern(&mut self, atom: &LinAtom) -> VarId {
        let next = self.atoms.len();
        let i = *self.index.entry(atom.clone()).or_insert(next);
        if i == next {
            self.atoms.push(atom.clone());
        }
        VarId(self.offset + i as u32)
    }

    /// Replace every linear atom of an NNF formula by its abstraction variable.
    pub fn abstract_formula(&mut self, f: &Formula) -> Formula {
        match f {
            Formula::Lin(atom) => Formula::Bool(self.intern(atom)),
            Formula::Not(inner) => Formula::Not(Box::new(self.abstract_formula(inner))),
            Formula::And(parts) => {
                Formula::And(parts.iter().map(|p| self.abstract_formula(p)).collect())
            }
            Formula::Or(parts) => {
                Formula::Or(parts.iter().map(|p| self.abstract_formula(p)).collect())
            }
            Formula::Implies(p, q) => Formula::Implies(
                Box::new(self.abstract_formula(p)),
                Box::new(self.abstract_formula(q)),
            ),
            other => other.clone(),
        }
    }
}

/// Rewrite `t ≠ b` into `t < b ∨ t > b` throughout an NNF formula.
pub fn split_disequalities(f: &Formula) -> Formula {
    match f {
        Formula::Lin(atom) if atom.rel == Rel::Ne => Formula::Or(vec![
            Formula::Lin(atom.with_rel(Rel::Lt)),
            Formula::Lin(atom.with_rel(Rel::Gt)),
        ]),
        Formula::Not(inner) => Formula::Not(Box::new(split_disequalities(inner))),
        Formula::And(parts) => Formula::And(parts.iter().map(split_disequalities).collect()),
        Formula::Or(parts) => Formula::Or(parts.iter().map(split_disequalities).collect()),
        Formula::Implies(p, q) => Formula::Implies(
            Box::new(split_disequalities(p)),
            Box::new(split_disequalities(q)),
        ),
        other => other.clone(),
    }
}

pub fn smt_solve(f: &Formula, registry: &VariableRegistry) -> Result<SmtResult, FragmentError> {
    f.check(registry)?;
    let prepared = split_disequalities(&f.to_nnf()).simplify();
    let mut table = AtomTable::new(registry.len());
    let skeleton = table.abstract_formula(&prepared);

    let mut sorts = registry.sorts();
    sorts.extend(std::iter::repeat_n(Sort::Bool, table.len()));
    let mut cnf = Cnf::new(sorts);
    cnf.assert_formula(&skeleton)?;

    let reals: Vec<VarId> = registry
        .iter()
        .filter(|v| v.sort == Sort::Real)
        .map(|v| v.id)
        .collect();
    let offset = registry.len();

    loop {
        let Some(model) = solve_full(&cnf) else {
            return Ok(SmtResult::Unsat);
        };
        let active: Vec<usize> = (0..table.len()).filter(|i| model[offset + i]).collect();
        let system = LinSystem::with_vars(
            active.iter().map(|i| table.atoms[*i].clone()).collect(),
            reals.clone(),
        );
        match lp_feasible(&system)? {
            LpResult::Feasible(values) => {
                let mut a = Assignment::defaults(registry);
                for var in registry.iter() {
                    let value = match var.sort {
                        Sort::Bool => Value::Bool(model[var.id.index()]),
                        Sort::Real => Value::Real(values[&var.id].clone()),
                    };
                    a.set(var.id, value)?;
                }
                debug_assert_eq!(f.eval(&a), Ok(true));
                return Ok(SmtResult::Sat(a));
            }
            LpResult::Infeasible(conflict) => {
                let block = conflict
                    .iter()
                    .map(|k| Lit::neg((offset + active[*k]) as u32));
                cnf.add_clause(block);
            }
        }
    }
}

/// `eval(f, a)`, with evaluation errors reported as `false`.
pub fn check_assignment(f: &Formula, a: &Assignment) -> bool {
    f.eval(a).unwrap_or(false)
}
