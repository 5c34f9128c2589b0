//! Feasibility of conjunctions of linear atoms over the rationals.
//!
//! General simplex in the bounded-variable form used by DPLL(T) solvers:
//! every multi-variable left-hand side gets a slack variable, atoms become
//! bounds, and strict bounds are handled with delta-rationals `a + b·δ`.
//! Pivoting follows Bland's rule (smallest index first), which makes the
//! procedure terminate and deterministic. Infeasibility comes with the set
//! of atoms whose bounds explain the conflict.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Mul, Sub};

use num_traits::{One, Signed, Zero};

use crate::formula::{FragmentError, LinAtom, Rational, Rel, VarId};

/// A conjunction of linear atoms (no `≠`) over a set of real variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinSystem {
    pub atoms: Vec<LinAtom>,
    /// Variables reported in a feasible result, in addition to the ones the
    /// atoms mention.
    pub vars: Vec<VarId>,
}

impl LinSystem {
    pub fn new(atoms: Vec<LinAtom>) -> Self {
        LinSystem {
            atoms,
            vars: Vec::new(),
        }
    }

    pub fn with_vars(atoms: Vec<LinAtom>, vars: Vec<VarId>) -> Self {
        LinSystem { atoms, vars }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpResult {
    Feasible(BTreeMap<VarId, Rational>),
    /// Sorted indices of an infeasible subset of the input atoms.
    Infeasible(Vec<usize>),
}

impl LpResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpResult::Feasible(_))
    }
}

pub fn lp_feasible(system: &LinSystem) -> Result<LpResult, FragmentError> {
    if system.atoms.iter().any(|a| a.rel == Rel::Ne) {
        return Err(FragmentError::Disequality);
    }
    let mut vars: BTreeSet<VarId> = system.vars.iter().copied().collect();
    for atom in &system.atoms {
        vars.extend(atom.vars());
    }
    let vars: Vec<VarId> = vars.into_iter().collect();

    let mut tableau = Tableau::new(&vars);
    for (index, atom) in system.atoms.iter().enumerate() {
        if let Err(conflict) = tableau.assert_atom(index, atom) {
            return Ok(LpResult::Infeasible(normalize(conflict)));
        }
    }
    if let Err(conflict) = tableau.check() {
        return Ok(LpResult::Infeasible(normalize(conflict)));
    }
    let values = tableau.concrete_values();
    let model: BTreeMap<VarId, Rational> = vars
        .iter()
        .copied()
        .zip(values.into_iter().take(vars.len()))
        .collect();
    debug_assert!(system.atoms.iter().all(|a| holds(a, &model)));
    Ok(LpResult::Feasible(model))
}

/// Evaluate an atom against a sparse real model (missing entries are 0).
pub fn holds(atom: &LinAtom, model: &BTreeMap<VarId, Rational>) -> bool {
    let lhs = atom
        .coeffs
        .iter()
        .fold(Rational::zero(), |acc, (id, c)| match model.get(id) {
            Some(x) => acc + c * x,
            None => acc,
        });
    atom.rel.holds(&lhs, &atom.bound)
}

fn normalize(mut atoms: Vec<usize>) -> Vec<usize> {
    atoms.sort_unstable();
    atoms.dedup();
    atoms
}

/// `real + delta·δ` for a positive infinitesimal δ, ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
struct DeltaRational {
    real: Rational,
    delta: Rational,
}

impl DeltaRational {
    fn new(real: Rational, delta: Rational) -> Self {
        DeltaRational { real, delta }
    }

    fn zero() -> Self {
        DeltaRational::new(Rational::zero(), Rational::zero())
    }

    fn substitute(&self, delta: &Rational) -> Rational {
        &self.real + &self.delta * delta
    }
}

impl Ord for DeltaRational {
    fn cmp(&self, other: &Self) -> Ordering {
        self.real
            .cmp(&other.real)
            .then_with(|| self.delta.cmp(&other.delta))
    }
}

impl PartialOrd for DeltaRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&DeltaRational> for &DeltaRational {
    type Output = DeltaRational;
    fn add(self, rhs: &DeltaRational) -> DeltaRational {
        DeltaRational::new(&self.real + &rhs.real, &self.delta + &rhs.delta)
    }
}

impl Sub<&DeltaRational> for &DeltaRational {
    type Output = DeltaRational;
    fn sub(self, rhs: &DeltaRational) -> DeltaRational {
        DeltaRational::new(&self.real - &rhs.real, &self.delta - &rhs.delta)
    }
}

impl Mul<&Rational> for &DeltaRational {
    type Output = DeltaRational;
    fn mul(self, k: &Rational) -> DeltaRational {
        DeltaRational::new(&self.real * k, &self.delta * k)
    }
}

#[derive(Clone, Debug)]
struct Bound {
    value: DeltaRational,
    reason: usize,
}

/// Dense tableau; columns `0..n` are the problem variables, the rest slacks.
/// Each row reads `basic = Σ coeff[j]·x_j` over nonbasic columns `j`.
struct Tableau {
    num_original: usize,
    rows: Vec<Vec<Rational>>,
    basic_of_row: Vec<usize>,
    row_of: Vec<Option<usize>>,
    lower: Vec<Option<Bound>>,
    upper: Vec<Option<Bound>>,
    values: Vec<DeltaRational>,
    column_of_var: BTreeMap<VarId, usize>,
    slack_of_form: BTreeMap<Vec<(usize, Rational)>, usize>,
}

impl Tableau {
    fn new(vars: &[VarId]) -> Self {
        let n = vars.len();
        Tableau {
            num_original: n,
            rows: Vec::new(),
            basic_of_row: Vec::new(),
            row_of: vec![None; n],
            lower: vec![None; n],
            upper: vec![None; n],
            values: vec![DeltaRational::zero(); n],
            column_of_var: vars.iter().enumerate().map(|(i, v)| (*v, i)).collect(),
            slack_of_form: BTreeMap::new(),
        }
    }

    fn num_columns(&self) -> usize {
        self.values.len()
    }

    /// Column whose value equals the atom's left-hand side, and the scale
    /// `k` such that `lhs = k · column`.
    fn column_for(&mut self, atom: &LinAtom) -> (usize, Rational) {
        if atom.coeffs.len() == 1 {
            let (id, c) = atom.coeffs.iter().next().unwrap();
            return (self.column_of_var[id], c.clone());
        }
        let form: Vec<(usize, Rational)> = atom
            .coeffs
            .iter()
            .map(|(id, c)| (self.column_of_var[id], c.clone()))
            .collect();
        if let Some(&col) = self.slack_of_form.get(&form) {
            return (col, Rational::one());
        }
        let col = self.num_columns();
        for row in &mut self.rows {
            row.push(Rational::zero());
        }
        self.values.push(DeltaRational::zero());
        self.lower.push(None);
        self.upper.push(None);
        self.row_of.push(Some(self.rows.len()));

        // Express the slack over the current nonbasic columns.
        let mut row = vec![Rational::zero(); col + 1];
        for (j, c) in &form {
            match self.row_of[*j] {
                None => row[*j] += c,
                Some(r) => {
                    for (k, a) in self.rows[r].iter().enumerate() {
                        if !a.is_zero() {
                            row[k] += c * a;
                        }
                    }
                }
            }
        }
        self.values[col] = self.row_value(&row);
        self.rows.push(row);
        self.basic_of_row.push(col);
        self.slack_of_form.insert(form, col);
        (col, Rational::one())
    }

    fn row_value(&self, row: &[Rational]) -> DeltaRational {
        let mut v = DeltaRational::zero();
        for (j, a) in row.iter().enumerate() {
            if !a.is_zero() {
                v = &v + &(&self.values[j] * a);
            }
        }
        v
    }

    fn assert_atom(&mut self, index: usize, atom: &LinAtom) -> Result<(), Vec<usize>> {
        if atom.coeffs.is_empty() {
            return if atom.rel.holds(&Rational::zero(), &atom.bound) {
                Ok(())
            } else {
                Err(vec![index])
            };
        }
        let (col, scale) = self.column_for(atom);
        let bound = &atom.bound / &scale;
        let rel = if scale.is_negative() {
            atom.rel.mirror()
        } else {
            atom.rel
        };
        let zero = Rational::zero;
        let one = Rational::one;
        match rel {
            Rel::Le => self.tighten_upper(col, DeltaRational::new(bound, zero()), index),
            Rel::Lt => self.tighten_upper(col, DeltaRational::new(bound, -one()), index),
            Rel::Ge => self.tighten_lower(col, DeltaRational::new(bound, zero()), index),
            Rel::Gt => self.tighten_lower(col, DeltaRational::new(bound, one()), index),
            Rel::Eq => {
                self.tighten_lower(col, DeltaRational::new(bound.clone(), zero()), index)?;
                self.tighten_upper(col, DeltaRational::new(bound, zero()), index)
            }
            Rel::Ne => unreachable!("rejected before solving"),
        }
    }

    fn tighten_lower(
        &mut self,
        col: usize,
        value: DeltaRational,
        reason: usize,
    ) -> Result<(), Vec<usize>> {
        if let Some(existing) = &self.lower[col] {
            if existing.value >= value {
                return Ok(());
            }
        }
        if let Some(up) = &self.upper[col] {
            if value > up.value {
                return Err(vec![reason, up.reason]);
            }
        }
        self.lower[col] = Some(Bound {
            value: value.clone(),
            reason,
        });
        if self.row_of[col].is_none() && self.values[col] < value {
            self.update_nonbasic(col, value);
        }
        Ok(())
    }

    fn tighten_upper(
        &mut self,
        col: usize,
        value: DeltaRational,
        reason: usize,
    ) -> Result<(), Vec<usize>> {
        if let Some(existing) = &self.upper[col] {
            if existing.value <= value {
                return Ok(());
            }
        }
        if let Some(low) = &self.lower[col] {
            if value < low.value {
                return Err(vec![reason, low.reason]);
            }
        }
        self.upper[col] = Some(Bound {
            value: value.clone(),
            reason,
        });
        if self.row_of[col].is_none() && self.values[col] > value {
            self.update_nonbasic(col, value);
        }
        Ok(())
    }

    fn update_nonbasic(&mut self, col: usize, value: DeltaRational) {
        let shift = &value - &self.values[col];
        for (r, row) in self.rows.iter().enumerate() {
            let a = &row[col];
            if !a.is_zero() {
                let b = self.basic_of_row[r];
                self.values[b] = &self.values[b] + &(&shift * a);
            }
        }
        self.values[col] = value;
    }

    fn below_lower(&self, col: usize) -> bool {
        matches!(&self.lower[col], Some(b) if self.values[col] < b.value)
    }

    fn above_upper(&self, col: usize) -> bool {
        matches!(&self.upper[col], Some(b) if self.values[col] > b.value)
    }

    fn can_increase(&self, col: usize) -> bool {
        !matches!(&self.upper[col], Some(b) if self.values[col] >= b.value)
    }

    fn can_decrease(&self, col: usize) -> bool {
        !matches!(&self.lower[col], Some(b) if self.values[col] <= b.value)
    }

    fn check(&mut self) -> Result<(), Vec<usize>> {
        loop {
            let violated = (0..self.num_columns())
                .filter(|c| self.row_of[*c].is_some())
                .find(|c| self.below_lower(*c) || self.above_upper(*c));
            let Some(basic) = violated else {
                return Ok(());
            };
            let r = self.row_of[basic].unwrap();
            let raise = self.below_lower(basic);
            let entering = (0..self.num_columns()).find(|j| {
                let a = &self.rows[r][*j];
                if a.is_zero() || self.row_of[*j].is_some() {
                    return false;
                }
                let up = a.is_positive() == raise;
                if up {
                    self.can_increase(*j)
                } else {
                    self.can_decrease(*j)
                }
            });
            match entering {
                Some(j) => {
                    let target = if raise {
                        self.lower[basic].as_ref().unwrap().value.clone()
                    } else {
                        self.upper[basic].as_ref().unwrap().value.clone()
                    };
                    self.pivot_and_update(basic, j, target);
                }
                None => return Err(self.explain(basic, raise)),
            }
        }
    }

    /// Farkas-style explanation: the violated bound of `basic` together with
    /// the bounds pinning every nonbasic column of its row.
    fn explain(&self, basic: usize, raise: bool) -> Vec<usize> {
        let r = self.row_of[basic].unwrap();
        let own = if raise {
            &self.lower[basic]
        } else {
            &self.upper[basic]
        };
        let mut reasons = vec![own.as_ref().unwrap().reason];
        for (j, a) in self.rows[r].iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let pinned_by_upper = a.is_positive() == raise;
            let bound = if pinned_by_upper {
                &self.upper[j]
            } else {
                &self.lower[j]
            };
            reasons.push(bound.as_ref().expect("pinned column has a bound").reason);
        }
        reasons
    }

    fn pivot_and_update(&mut self, basic: usize, entering: usize, target: DeltaRational) {
        let r = self.row_of[basic].unwrap();
        let a = self.rows[r][entering].clone();
        let theta = &(&target - &self.values[basic]) * &(Rational::one() / &a);
        self.values[basic] = target;
        self.values[entering] = &self.values[entering] + &theta;
        for (k, row) in self.rows.iter().enumerate() {
            if k == r {
                continue;
            }
            let coeff = &row[entering];
            if !coeff.is_zero() {
                let b = self.basic_of_row[k];
                self.values[b] = &self.values[b] + &(&theta * coeff);
            }
        }
        self.pivot(r, basic, entering);
    }

    fn pivot(&mut self, r: usize, leaving: usize, entering: usize) {
        let a = self.rows[r][entering].clone();
        let inv = Rational::one() / &a;
        // entering = inv·leaving − Σ_{k≠entering} (row[k]·inv)·x_k
        let mut new_row: Vec<Rational> = self.rows[r].iter().map(|c| -(c * &inv)).collect();
        new_row[entering] = Rational::zero();
        new_row[leaving] = inv;
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let c = std::mem::replace(&mut row[entering], Rational::zero());
            if c.is_zero() {
                continue;
            }
            for (j, v) in new_row.iter().enumerate() {
                if !v.is_zero() {
                    row[j] += &c * v;
                }
            }
        }
        self.rows[r] = new_row;
        self.basic_of_row[r] = entering;
        self.row_of[entering] = Some(r);
        self.row_of[leaving] = None;
    }

    /// Pick a concrete δ that keeps every bound satisfied and substitute it.
    fn concrete_values(&self) -> Vec<Rational> {
        let mut delta = Rational::one();
        for (col, v) in self.values.iter().enumerate() {
            if let Some(l) = &self.lower[col] {
                if l.value.real < v.real && l.value.delta > v.delta {
                    let limit = (&v.real - &l.value.real) / (&l.value.delta - &v.delta);
                    delta = delta.min(limit);
                }
            }
            if let Some(u) = &self.upper[col] {
                if v.real < u.value.real && v.delta > u.value.delta {
                    let limit = (&u.value.real - &v.real) / (&v.delta - &u.value.delta);
                    delta = delta.min(limit);
                }
            }
        }
        self.values[..self.num_original]
            .iter()
            .map(|v| v.substitute(&delta))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{rat, Formula, LinExpr, VariableRegistry};

    fn atom(f: Formula) -> LinAtom {
        match f {
            Formula::Lin(a) => a,
            other => panic!("not an atom: {other:?}"),
        }
    }

    fn xyz() -> (VarId, VarId, VarId) {
        let mut reg = VariableRegistry::new();
        (
            reg.real_var("x").unwrap(),
            reg.real_var("y").unwrap(),
            reg.real_var("z").unwrap(),
        )
    }

    #[test]
    fn bounded_system_is_feasible() {
        let (x, y, z) = xyz();
        let sys = LinSystem::new(vec![
            atom(LinExpr::var(x).le(5)),
            atom((LinExpr::var(x) + y).le(z)),
        ]);
        let LpResult::Feasible(model) = lp_feasible(&sys).unwrap() else {
            panic!("expected feasible");
        };
        assert!(sys.atoms.iter().all(|a| holds(a, &model)));
        assert_eq!(model[&x], rat(0));
        assert_eq!(model[&y], rat(0));
        assert_eq!(model[&z], rat(0));
    }

    #[test]
    fn contradictory_system_has_full_conflict() {
        let (x, y, _) = xyz();
        let sys = LinSystem::new(vec![
            atom(LinExpr::var(x).le(5)),
            atom(LinExpr::var(y).le(2)),
            atom((LinExpr::var(x) + y).ge(20)),
        ]);
        assert_eq!(
            lp_feasible(&sys).unwrap(),
            LpResult::Infeasible(vec![0, 1, 2])
        );
    }

    #[test]
    fn empty_system_is_all_zero() {
        let (x, y, _) = xyz();
        let sys = LinSystem::with_vars(vec![], vec![x, y]);
        let LpResult::Feasible(model) = lp_feasible(&sys).unwrap() else {
            panic!();
        };
        assert_eq!(model.len(), 2);
        assert!(model.values().all(Zero::is_zero));
    }

    #[test]
    fn strict_bounds_hold_strictly() {
        let (x, y, _) = xyz();
        let sys = LinSystem::new(vec![
            atom(LinExpr::var(x).gt(50)),
            atom(LinExpr::var(x).lt(51)),
            atom((LinExpr::var(x) + y).lt(0)),
        ]);
        let LpResult::Feasible(model) = lp_feasible(&sys).unwrap() else {
            panic!();
        };
        assert!(model[&x] > rat(50) && model[&x] < rat(51));
        assert!(&model[&x] + &model[&y] < rat(0));
    }

    #[test]
    fn opposite_strict_bounds_conflict() {
        let (x, _, _) = xyz();
        let sys = LinSystem::new(vec![
            atom(LinExpr::var(x).lt(5)),
            atom(LinExpr::var(x).gt(5)),
        ]);
        assert_eq!(lp_feasible(&sys).unwrap(), LpResult::Infeasible(vec![0, 1]));
    }

    #[test]
    fn disequality_is_rejected() {
        let (x, _, _) = xyz();
        let sys = LinSystem::new(vec![atom(LinExpr::var(x).ne(5))]);
        assert_eq!(lp_feasible(&sys), Err(FragmentError::Disequality));
    }

    #[test]
    fn constant_atoms() {
        let ok = LinAtom::new(BTreeMap::new(), Rel::Le, rat(1));
        let bad = LinAtom::new(BTreeMap::new(), Rel::Gt, rat(1));
        assert!(lp_feasible(&LinSystem::new(vec![ok.clone()]))
            .unwrap()
            .is_feasible());
        assert_eq!(
            lp_feasible(&LinSystem::new(vec![ok, bad])).unwrap(),
            LpResult::Infeasible(vec![1])
        );
    }

    #[test]
    fn negative_coefficients_and_equalities() {
        let (x, y, z) = xyz();
        let sys = LinSystem::new(vec![
            atom((LinExpr::var(x) * rat(-2)).ge(-8)),
            atom((LinExpr::var(x) - y).eq(3)),
            atom((LinExpr::var(y) + z).gt(9)),
            atom(LinExpr::var(z).le(9)),
        ]);
        let LpResult::Feasible(model) = lp_feasible(&sys).unwrap() else {
            panic!();
        };
        assert!(sys.atoms.iter().all(|a| holds(a, &model)));
    }
}
