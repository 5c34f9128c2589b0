//! Generators and brute-force oracles shared by the integration tests. None of
//! the oracles call into the solvers they check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbp_core::formula::{
    rat, Assignment, Formula, LinAtom, Rational, Rel, Sort, Value, VarId, VariableRegistry,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bool_registry(n: usize) -> VariableRegistry {
    let mut r = VariableRegistry::new();
    for i in 0..n {
        r.bool_var(&format!("p{i}")).unwrap();
    }
    r
}

/// Random propositional formula over the first `n` variables.
pub fn random_bool_formula(rng: &mut impl Rng, n: usize, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..12) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::var(VarId(rng.gen_range(0..n) as u32)),
        };
    }
    let sub = |rng: &mut _| random_bool_formula(rng, n, depth - 1);
    match rng.gen_range(0..4) {
        0 => !sub(rng),
        1 => Formula::And((0..rng.gen_range(2..4)).map(|_| sub(rng)).collect()),
        2 => Formula::Or((0..rng.gen_range(2..4)).map(|_| sub(rng)).collect()),
        _ => sub(rng).implies(sub(rng)),
    }
}

/// All assignments over a purely boolean registry.
pub fn all_bool_assignments(registry: &VariableRegistry) -> Vec<Assignment> {
    let n = registry.len();
    (0u32..1 << n)
        .map(|bits| {
            let values = (0..n).map(|i| Value::Bool(bits >> i & 1 == 1)).collect();
            Assignment::from_values(registry, values).unwrap()
        })
        .collect()
}

pub fn truth_table_sat(f: &Formula, registry: &VariableRegistry) -> bool {
    all_bool_assignments(registry)
        .iter()
        .any(|a| f.eval(a).unwrap())
}

pub fn random_atom(rng: &mut impl Rng, vars: &[VarId], rels: &[Rel]) -> LinAtom {
    let mut coeffs = BTreeMap::new();
    for &v in vars {
        if rng.gen_bool(0.6) {
            coeffs.insert(v, rat(rng.gen_range(-3..=3)));
        }
    }
    let rel = rels[rng.gen_range(0..rels.len())];
    LinAtom::new(coeffs, rel, rat(rng.gen_range(-6..=6)))
}

/// `Σ c·x ≤ b`, or `< b` when strict.
#[derive(Clone, Debug)]
struct Half {
    coeffs: BTreeMap<VarId, Rational>,
    bound: Rational,
    strict: bool,
}

fn halves(atom: &LinAtom) -> Vec<Half> {
    let pos = |strict| Half {
        coeffs: atom.coeffs.clone(),
        bound: atom.bound.clone(),
        strict,
    };
    let neg = |strict| Half {
        coeffs: atom.coeffs.iter().map(|(v, c)| (*v, -c)).collect(),
        bound: -atom.bound.clone(),
        strict,
    };
    match atom.rel {
        Rel::Le => vec![pos(false)],
        Rel::Lt => vec![pos(true)],
        Rel::Ge => vec![neg(false)],
        Rel::Gt => vec![neg(true)],
        Rel::Eq => vec![pos(false), neg(false)],
        Rel::Ne => panic!("disequalities are split before elimination"),
    }
}

/// Fourier–Motzkin elimination over the rationals; strictness propagates
/// through every combination that involves a strict inequality.
pub fn fm_feasible(atoms: &[LinAtom]) -> bool {
    let mut rows: Vec<Half> = atoms.iter().flat_map(halves).collect();
    while let Some(v) = rows.iter().flat_map(|r| r.coeffs.keys()).next().copied() {
        let (mut upper, mut lower, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            match r.coeffs.get(&v) {
                Some(c) if c.is_positive() => upper.push(r),
                Some(_) => lower.push(r),
                None => rest.push(r),
            }
        }
        for u in &upper {
            for l in &lower {
                let cu = u.coeffs[&v].clone();
                let cl = -l.coeffs[&v].clone();
                let mut coeffs = BTreeMap::new();
                for (x, c) in &u.coeffs {
                    *coeffs.entry(*x).or_insert_with(Rational::zero) += c * &cl;
                }
                for (x, c) in &l.coeffs {
                    *coeffs.entry(*x).or_insert_with(Rational::zero) += c * &cu;
                }
                coeffs.retain(|_, c| !c.is_zero());
                rest.push(Half {
                    coeffs,
                    bound: &u.bound * &cl + &l.bound * &cu,
                    strict: u.strict || l.strict,
                });
            }
        }
        rows = rest;
    }
    rows.iter().all(|r| {
        let zero = Rational::zero();
        if r.strict {
            zero < r.bound
        } else {
            zero <= r.bound
        }
    })
}

#[derive(Clone, Debug)]
enum Literal {
    Bool(VarId, bool),
    Atom(LinAtom),
}

fn negate_rel(rel: Rel) -> Rel {
    match rel {
        Rel::Lt => Rel::Ge,
        Rel::Le => Rel::Gt,
        Rel::Eq => Rel::Ne,
        Rel::Ge => Rel::Lt,
        Rel::Gt => Rel::Le,
        Rel::Ne => Rel::Eq,
    }
}

fn product(a: Vec<Vec<Literal>>, b: Vec<Vec<Literal>>) -> Vec<Vec<Literal>> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a {
        for y in &b {
            out.push(x.iter().chain(y).cloned().collect());
        }
    }
    out
}

/// Cubes of `f` (or of `¬f` when `positive` is false).
fn dnf(f: &Formula, positive: bool) -> Vec<Vec<Literal>> {
    match (f, positive) {
        (Formula::True, true) | (Formula::False, false) => vec![vec![]],
        (Formula::True, false) | (Formula::False, true) => vec![],
        (Formula::Bool(v), p) => vec![vec![Literal::Bool(*v, p)]],
        (Formula::Lin(a), p) => {
            let rel = if p { a.rel } else { negate_rel(a.rel) };
            let atom = LinAtom::new(a.coeffs.clone(), rel, a.bound.clone());
            if rel == Rel::Ne {
                vec![
                    vec![Literal::Atom(LinAtom {
                        rel: Rel::Lt,
                        ..atom.clone()
                    })],
                    vec![Literal::Atom(LinAtom {
                        rel: Rel::Gt,
                        ..atom
                    })],
                ]
            } else {
                vec![vec![Literal::Atom(atom)]]
            }
        }
        (Formula::Not(g), p) => dnf(g, !p),
        (Formula::And(gs), true) | (Formula::Or(gs), false) => gs
            .iter()
            .fold(vec![vec![]], |acc, g| product(acc, dnf(g, positive))),
        (Formula::Or(gs), true) | (Formula::And(gs), false) => {
            gs.iter().flat_map(|g| dnf(g, positive)).collect()
        }
        (Formula::Implies(a, b), true) => {
            let mut cubes = dnf(a, false);
            cubes.extend(dnf(b, true));
            cubes
        }
        (Formula::Implies(a, b), false) => product(dnf(a, true), dnf(b, false)),
    }
}

/// Satisfiability by expanding to DNF and checking each cube with
/// Fourier–Motzkin.
pub fn dnf_sat(f: &Formula) -> bool {
    dnf(f, true).into_iter().any(|cube| {
        let mut bools: BTreeMap<VarId, bool> = BTreeMap::new();
        let mut atoms = Vec::new();
        for lit in cube {
            match lit {
                Literal::Bool(v, p) => {
                    if *bools.entry(v).or_insert(p) != p {
                        return false;
                    }
                }
                Literal::Atom(a) => atoms.push(a),
            }
        }
        fm_feasible(&atoms)
    })
}

/// Registry with `nb` booleans `b*` followed by `nr` reals `x*`.
pub fn mixed_registry(nb: usize, nr: usize) -> VariableRegistry {
    let mut r = VariableRegistry::new();
    for i in 0..nb {
        r.declare(&format!("b{i}"), Sort::Bool).unwrap();
    }
    for i in 0..nr {
        r.declare(&format!("x{i}"), Sort::Real).unwrap();
    }
    r
}

/// Random Bool+LRA formula with at most `max_atoms` leaves.
pub fn random_mixed_formula(
    rng: &mut impl Rng,
    registry: &VariableRegistry,
    max_atoms: usize,
) -> Formula {
    let bools: Vec<VarId> = registry.bool_vars();
    let reals: Vec<VarId> = registry
        .iter()
        .enumerate()
        .filter(|(_, v)| v.sort == Sort::Real)
        .map(|(i, _)| VarId(i as u32))
        .collect();
    let rels = [Rel::Lt, Rel::Le, Rel::Eq, Rel::Ge, Rel::Gt, Rel::Ne];
    let mut leaves = rng.gen_range(1..=max_atoms);
    build_mixed(rng, &bools, &reals, &rels, &mut leaves)
}

fn build_mixed(
    rng: &mut impl Rng,
    bools: &[VarId],
    reals: &[VarId],
    rels: &[Rel],
    leaves: &mut usize,
) -> Formula {
    if *leaves <= 1 || rng.gen_bool(0.3) {
        *leaves = leaves.saturating_sub(1);
        return if !bools.is_empty() && rng.gen_bool(0.35) {
            Formula::var(bools[rng.gen_range(0..bools.len())])
        } else {
            Formula::Lin(random_atom(rng, reals, rels))
        };
    }
    let mut sub = |rng: &mut _| build_mixed(rng, bools, reals, rels, leaves);
    match rng.gen_range(0..4) {
        0 => !sub(rng),
        1 => {
            let a = sub(rng);
            Formula::And(vec![a, sub(rng)])
        }
        2 => {
            let a = sub(rng);
            Formula::Or(vec![a, sub(rng)])
        }
        _ => {
            let a = sub(rng);
            a.implies(sub(rng))
        }
    }
}

/// Best total soft weight over assignments meeting every hard formula.
pub fn brute_force_maxsat(
    hard: &[Formula],
    soft: &[(Formula, u64)],
    registry: &VariableRegistry,
) -> Option<u64> {
    all_bool_assignments(registry)
        .iter()
        .filter(|a| hard.iter().all(|h| h.eval(a).unwrap()))
        .map(|a| {
            soft.iter()
                .filter(|(f, _)| f.eval(a).unwrap())
                .map(|(_, w)| w)
                .sum()
        })
        .max()
}

pub fn to_f64(r: &Rational) -> f64 {
    num_traits::ToPrimitive::to_f64(r).unwrap()
}
