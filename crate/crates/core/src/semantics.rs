//! Labels, tickets, and the composition rules that turn the tickets
//! collected at a synchronization point into one solver request.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::formal::EventDomain;
use crate::formula::{Assignment, Formula, FragmentError, VarId, VariableRegistry};
use crate::maxsat::{maxsat_solve, MaxSatProblem, MaxSatResult};
use crate::smt::{smt_solve, SmtResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Request,
    Block,
    May,
    Must,
    Hard,
    Soft,
}

impl Label {
    pub fn symbol(self) -> &'static str {
        match self {
            Label::Request => "r",
            Label::Block => "b",
            Label::May => "may",
            Label::Must => "must",
            Label::Hard => "h",
            Label::Soft => "s",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One scenario's contribution at a synchronization point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ticket {
    /// Position of the owning scenario; constraints are ordered by it.
    pub scenario: usize,
    pub constraints: Vec<(Formula, BTreeSet<Label>)>,
    /// Resume the scenario when this holds under the chosen assignment.
    /// `None` means the scenario is never resumed.
    pub guard: Option<Formula>,
}

impl Ticket {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn labeled(mut self, f: Formula, labels: impl IntoIterator<Item = Label>) -> Self {
        self.constraints.push((f, labels.into_iter().collect()));
        self
    }

    pub fn constraint(self, f: Formula) -> Self {
        self.labeled(f, [])
    }

    pub fn request(self, f: Formula) -> Self {
        self.labeled(f, [Label::Request])
    }

    pub fn block(self, f: Formula) -> Self {
        self.labeled(f, [Label::Block])
    }

    pub fn may(self, f: Formula) -> Self {
        self.labeled(f, [Label::May])
    }

    pub fn must(self, f: Formula) -> Self {
        self.labeled(f, [Label::Must])
    }

    pub fn hard(self, f: Formula) -> Self {
        self.labeled(f, [Label::Hard])
    }

    pub fn soft(self, f: Formula) -> Self {
        self.labeled(f, [Label::Soft])
    }

    pub fn wait_for(mut self, guard: Formula) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_scenario(mut self, scenario: usize) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        self.constraints
            .iter()
            .flat_map(|(_, ls)| ls.iter().copied())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub vars: BTreeSet<VarId>,
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverRequest {
    Single(Formula),
    HardSoft(MaxSatProblem),
    Partitioned(Vec<Group>),
}

impl SolverRequest {
    /// Whether `a` meets the request: the formula for single requests, all
    /// hard constraints for hard/soft ones, every group otherwise.
    pub fn satisfied_by(&self, a: &Assignment) -> bool {
        let holds = |f: &Formula| f.eval(a) == Ok(true);
        match self {
            SolverRequest::Single(f) => holds(f),
            SolverRequest::HardSoft(p) => p.hard.iter().all(holds),
            SolverRequest::Partitioned(groups) => groups.iter().all(|g| holds(&g.formula)),
        }
    }

    /// The conjunction whose models are the admissible assignments, ignoring
    /// soft preferences.
    pub fn admissible(&self) -> Formula {
        match self {
            SolverRequest::Single(f) => f.clone(),
            SolverRequest::HardSoft(p) => Formula::and(p.hard.iter().cloned()),
            SolverRequest::Partitioned(groups) => {
                Formula::and(groups.iter().map(|g| g.formula.clone()))
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule `{rule}` does not accept label `{label}`")]
    ForeignLabel { rule: &'static str, label: Label },
    #[error("constraint is not an event of the domain: {0}")]
    NotAnEvent(String),
    #[error("unknown composition rule `{0}`")]
    UnknownRule(String),
    #[error("rule `traditional` needs an event domain")]
    MissingDomain,
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}

pub trait CompositionRule {
    fn name(&self) -> &'static str;

    fn labels(&self) -> &'static [Label];

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError>;

    fn solve(
        &self,
        request: &SolverRequest,
        registry: &VariableRegistry,
    ) -> Result<Option<Assignment>, RuleError> {
        solve_request(request, registry)
    }
}

pub fn solve_request(
    request: &SolverRequest,
    registry: &VariableRegistry,
) -> Result<Option<Assignment>, RuleError> {
    match request {
        SolverRequest::Single(f) => Ok(match smt_solve(f, registry)? {
            SmtResult::Sat(a) => Some(a),
            SmtResult::Unsat => None,
        }),
        SolverRequest::HardSoft(p) => Ok(match maxsat_solve(p, registry)? {
            MaxSatResult::Optimal { assignment, .. } => Some(assignment),
            MaxSatResult::HardUnsat => None,
        }),
        SolverRequest::Partitioned(groups) => {
            let mut merged = Assignment::defaults(registry);
            for group in groups {
                let SmtResult::Sat(a) = smt_solve(&group.formula, registry)? else {
                    return Ok(None);
                };
                for id in &group.vars {
                    let value = a.get(*id).expect("total assignment").clone();
                    merged.set(*id, value).map_err(FragmentError::from)?;
                }
            }
            Ok(Some(merged))
        }
    }
}

/// Constraints in canonical order (scenario, then declaration), after
/// checking every label against the rule.
fn collect<'a>(
    rule: &dyn CompositionRule,
    tickets: &'a [Ticket],
) -> Result<Vec<(&'a Formula, &'a BTreeSet<Label>)>, RuleError> {
    let mut ordered: Vec<&Ticket> = tickets.iter().collect();
    ordered.sort_by_key(|t| t.scenario);
    let mut out = Vec::new();
    for t in ordered {
        for (f, labels) in &t.constraints {
            if let Some(label) = labels.iter().find(|l| !rule.labels().contains(l)) {
                return Err(RuleError::ForeignLabel {
                    rule: rule.name(),
                    label: *label,
                });
            }
            out.push((f, labels));
        }
    }
    Ok(out)
}

fn with_label<'a>(
    constraints: &[(&'a Formula, &BTreeSet<Label>)],
    label: Label,
) -> Vec<&'a Formula> {
    constraints
        .iter()
        .filter(|(_, ls)| ls.contains(&label))
        .map(|(f, _)| *f)
        .collect()
}

/// Classic semantics over a one-hot event domain: some requested event
/// happens and no blocked one does.
#[derive(Clone, Debug)]
pub struct TraditionalRule {
    pub domain: EventDomain,
}

impl TraditionalRule {
    pub fn new(domain: EventDomain) -> Self {
        TraditionalRule { domain }
    }

    fn check_shape(&self, f: &Formula) -> Result<(), RuleError> {
        let is_event = matches!(f, Formula::Bool(id) if self.domain.index_of_var(*id).is_some());
        if is_event || *f == !self.domain.exactly_one() {
            Ok(())
        } else {
            Err(RuleError::NotAnEvent(format!("{f:?}")))
        }
    }
}

impl CompositionRule for TraditionalRule {
    fn name(&self) -> &'static str {
        "traditional"
    }

    fn labels(&self) -> &'static [Label] {
        &[Label::Request, Label::Block]
    }

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError> {
        let cs = collect(self, tickets)?;
        for (f, ls) in &cs {
            if !ls.is_empty() {
                self.check_shape(f)?;
            }
        }
        let requested = with_label(&cs, Label::Request);
        let blocked = with_label(&cs, Label::Block);
        let any = Formula::Or(requested.into_iter().cloned().collect());
        Ok(SolverRequest::Single(finish_disjunction(
            any,
            blocked.into_iter().map(|f| !f.clone()),
        )))
    }
}

/// `(⋁ disjuncts) ∧ (⋀ conjuncts)`, folding an empty disjunction to false.
fn finish_disjunction(any: Formula, all: impl Iterator<Item = Formula>) -> Formula {
    let any = match any {
        Formula::Or(parts) if parts.is_empty() => return Formula::False,
        Formula::Or(mut parts) if parts.len() == 1 => parts.pop().unwrap(),
        other => other,
    };
    let mut conj = vec![any];
    conj.extend(all);
    Formula::and(conj)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MayMustRule;

impl CompositionRule for MayMustRule {
    fn name(&self) -> &'static str {
        "may-must"
    }

    fn labels(&self) -> &'static [Label] {
        &[Label::May, Label::Must]
    }

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError> {
        let cs = collect(self, tickets)?;
        Ok(SolverRequest::Single(may_must(
            &with_label(&cs, Label::May),
            &with_label(&cs, Label::Must),
        )))
    }
}

fn may_must(mays: &[&Formula], musts: &[&Formula]) -> Formula {
    finish_disjunction(
        Formula::Or(mays.iter().map(|f| (*f).clone()).collect()),
        musts.iter().map(|f| (*f).clone()),
    )
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConjunctionRule;

impl CompositionRule for ConjunctionRule {
    fn name(&self) -> &'static str {
        "conjunction"
    }

    fn labels(&self) -> &'static [Label] {
        &[]
    }

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError> {
        let cs = collect(self, tickets)?;
        Ok(SolverRequest::Single(Formula::and(
            cs.into_iter().map(|(f, _)| f.clone()),
        )))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HardSoftRule;

impl CompositionRule for HardSoftRule {
    fn name(&self) -> &'static str {
        "hard-soft"
    }

    fn labels(&self) -> &'static [Label] {
        &[Label::Hard, Label::Soft]
    }

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError> {
        let cs = collect(self, tickets)?;
        let mut problem = MaxSatProblem::new();
        for f in with_label(&cs, Label::Hard) {
            problem = problem.hard(f.clone());
        }
        for f in with_label(&cs, Label::Soft) {
            problem = problem.soft(f.clone());
        }
        Ok(SolverRequest::HardSoft(problem))
    }
}

/// May/must composition applied separately to each group of constraints
/// connected through shared variables.
#[derive(Clone, Copy, Debug, Default)]
pub struct PartitionedRule;

impl CompositionRule for PartitionedRule {
    fn name(&self) -> &'static str {
        "partitioned"
    }

    fn labels(&self) -> &'static [Label] {
        &[Label::May, Label::Must]
    }

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError> {
        let cs: Vec<_> = collect(self, tickets)?
            .into_iter()
            .filter(|(_, ls)| !ls.is_empty())
            .collect();
        if with_label(&cs, Label::May).is_empty() {
            return Ok(SolverRequest::Partitioned(vec![Group {
                vars: BTreeSet::new(),
                formula: Formula::False,
            }]));
        }

        let vars: Vec<BTreeSet<VarId>> = cs.iter().map(|(f, _)| f.free_vars()).collect();
        let mut uf = UnionFind::new(cs.len());
        let mut owner: BTreeMap<VarId, usize> = BTreeMap::new();
        for (i, vs) in vars.iter().enumerate() {
            for v in vs {
                match owner.get(v) {
                    Some(j) => uf.union(i, *j),
                    None => {
                        owner.insert(*v, i);
                    }
                }
            }
        }
        // Constraints without variables share one group.
        let closed: Vec<usize> = (0..cs.len()).filter(|i| vars[*i].is_empty()).collect();
        for w in closed.windows(2) {
            uf.union(w[0], w[1]);
        }

        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..cs.len() {
            members.entry(uf.find(i)).or_default().push(i);
        }
        let mut groups: Vec<(usize, Group)> = members
            .into_values()
            .map(|idx| {
                let part: Vec<_> = idx.iter().map(|i| cs[*i]).collect();
                let mays = with_label(&part, Label::May);
                let musts = with_label(&part, Label::Must);
                let formula = if mays.is_empty() {
                    Formula::and(musts.into_iter().cloned())
                } else {
                    may_must(&mays, &musts)
                };
                let vars = idx.iter().flat_map(|i| vars[*i].iter().copied()).collect();
                (idx[0], Group { vars, formula })
            })
            .collect();
        groups.sort_by_key(|(first, _)| *first);
        Ok(SolverRequest::Partitioned(
            groups.into_iter().map(|(_, g)| g).collect(),
        ))
    }
}

/// Musts hard, at least one may hard, and as many mays as possible.
#[derive(Clone, Copy, Debug, Default)]
pub struct MayMustMaxSatRule;

impl CompositionRule for MayMustMaxSatRule {
    fn name(&self) -> &'static str {
        "maymust-maxsat"
    }

    fn labels(&self) -> &'static [Label] {
        &[Label::May, Label::Must]
    }

    fn compose(&self, tickets: &[Ticket]) -> Result<SolverRequest, RuleError> {
        let cs = collect(self, tickets)?;
        let mays = with_label(&cs, Label::May);
        let mut problem = MaxSatProblem::new();
        for f in with_label(&cs, Label::Must) {
            problem = problem.hard(f.clone());
        }
        problem = problem.hard(Formula::or(mays.iter().map(|f| (*f).clone())));
        for f in mays {
            problem = problem.soft(f.clone());
        }
        Ok(SolverRequest::HardSoft(problem))
    }
}

pub const RULE_NAMES: [&str; 6] = [
    "traditional",
    "may-must",
    "conjunction",
    "hard-soft",
    "partitioned",
    "maymust-maxsat",
];

pub fn rule_by_name(
    name: &str,
    domain: Option<&EventDomain>,
) -> Result<Box<dyn CompositionRule>, RuleError> {
    Ok(match name {
        "traditional" => Box::new(TraditionalRule::new(
            domain.cloned().ok_or(RuleError::MissingDomain)?,
        )),
        "may-must" => Box::new(MayMustRule),
        "conjunction" => Box::new(ConjunctionRule),
        "hard-soft" => Box::new(HardSoftRule),
        "partitioned" => Box::new(PartitionedRule),
        "maymust-maxsat" => Box::new(MayMustMaxSatRule),
        other => return Err(RuleError::UnknownRule(other.to_string())),
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller root so group order follows declaration order.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}
