//! Explicit transition-system scenario objects and their composition, the
//! one-hot adapter that runs classic request/block objects on the solver
//! engine, and an exhaustive execution enumerator used as an oracle.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::engine::{constant, Scenario, ScenarioError, Step};
use crate::formula::{
    Assignment, Formula, FormulaError, FragmentError, Sort, Value, VarId, VariableRegistry,
};
use crate::semantics::{CompositionRule, Label, RuleError, SolverRequest, Ticket};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormalError {
    #[error("scenario objects have different event alphabets")]
    AlphabetMismatch,
    #[error("scenario objects are defined over different variable registries")]
    RegistryMismatch,
    #[error("unknown state {0}")]
    UnknownState(usize),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error(
        "scenario `{scenario}` has no transition from state {state} under the chosen assignment"
    )]
    NoTransition { scenario: String, state: usize },
    #[error("enumeration needs boolean variables only; `{0}` is real")]
    NonBoolean(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

impl From<FragmentError> for FormalError {
    fn from(e: FragmentError) -> Self {
        FormalError::Rule(e.into())
    }
}

/// A finite event set encoded one-hot: one boolean per event.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventDomain {
    names: Vec<String>,
    vars: Vec<VarId>,
}

impl EventDomain {
    /// Declare one boolean variable per event, named after the event.
    pub fn declare(registry: &mut VariableRegistry, names: &[&str]) -> Result<Self, FormulaError> {
        let vars = names
            .iter()
            .map(|n| registry.bool_var(n))
            .collect::<Result<_, _>>()?;
        Ok(EventDomain {
            names: names.iter().map(|n| n.to_string()).collect(),
            vars,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn var(&self, event: usize) -> VarId {
        self.vars[event]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn index_of_var(&self, id: VarId) -> Option<usize> {
        self.vars.iter().position(|v| *v == id)
    }

    /// The formula `e = event`.
    pub fn is(&self, event: usize) -> Formula {
        Formula::Bool(self.vars[event])
    }

    pub fn exactly_one(&self) -> Formula {
        let mut parts = vec![Formula::Or(
            self.vars.iter().map(|v| Formula::Bool(*v)).collect(),
        )];
        for i in 0..self.vars.len() {
            for j in i + 1..self.vars.len() {
                parts.push(!Formula::Bool(self.vars[i]) | !Formula::Bool(self.vars[j]));
            }
        }
        Formula::and(parts)
    }

    /// The event whose variable is the only true one.
    pub fn decode(&self, a: &Assignment) -> Option<usize> {
        let on: Vec<usize> = (0..self.len())
            .filter(|i| a.bool(self.vars[*i]) == Some(true))
            .collect();
        match on.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }

    pub fn encode(&self, event: usize, registry: &VariableRegistry) -> Assignment {
        let mut a = Assignment::defaults(registry);
        a.set(self.vars[event], Value::Bool(true))
            .expect("event variables are boolean");
        a
    }
}

/// A classic object `⟨Q, δ, q0, R, B⟩` over a finite event alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicScenario {
    pub name: String,
    pub events: Vec<String>,
    pub initial: usize,
    pub requested: Vec<BTreeSet<usize>>,
    pub blocked: Vec<BTreeSet<usize>>,
    /// `delta[q][e]`, possibly empty.
    pub delta: Vec<Vec<BTreeSet<usize>>>,
}

impl ClassicScenario {
    pub fn new(name: &str, events: &[&str], states: usize) -> Self {
        assert!(states > 0, "a scenario object has at least one state");
        ClassicScenario {
            name: name.to_string(),
            events: events.iter().map(|e| e.to_string()).collect(),
            initial: 0,
            requested: vec![BTreeSet::new(); states],
            blocked: vec![BTreeSet::new(); states],
            delta: vec![vec![BTreeSet::new(); events.len()]; states],
        }
    }

    fn event(&self, name: &str) -> usize {
        self.events
            .iter()
            .position(|e| e == name)
            .unwrap_or_else(|| panic!("event `{name}` not in the alphabet"))
    }

    pub fn num_states(&self) -> usize {
        self.requested.len()
    }

    pub fn request(mut self, state: usize, event: &str) -> Self {
        let e = self.event(event);
        self.requested[state].insert(e);
        self
    }

    pub fn block(mut self, state: usize, event: &str) -> Self {
        let e = self.event(event);
        self.blocked[state].insert(e);
        self
    }

    pub fn on(mut self, state: usize, event: &str, target: usize) -> Self {
        let e = self.event(event);
        self.delta[state][e].insert(target);
        self
    }

    /// Self-loop on every `(state, event)` pair that has no transition yet.
    pub fn stay_otherwise(mut self) -> Self {
        for (q, row) in self.delta.iter_mut().enumerate() {
            for targets in row.iter_mut() {
                if targets.is_empty() {
                    targets.insert(q);
                }
            }
        }
        self
    }

    pub fn successors(&self, state: usize, event: usize) -> &BTreeSet<usize> {
        &self.delta[state][event]
    }
}

/// Synchronous product: both components must admit the event.
pub fn compose_classic(
    o1: &ClassicScenario,
    o2: &ClassicScenario,
) -> Result<ClassicScenario, FormalError> {
    if o1.events != o2.events {
        return Err(FormalError::AlphabetMismatch);
    }
    let (n1, n2) = (o1.num_states(), o2.num_states());
    let pair = |p: usize, q: usize| p * n2 + q;
    let mut out = ClassicScenario {
        name: format!("{}*{}", o1.name, o2.name),
        events: o1.events.clone(),
        initial: pair(o1.initial, o2.initial),
        requested: Vec::with_capacity(n1 * n2),
        blocked: Vec::with_capacity(n1 * n2),
        delta: Vec::with_capacity(n1 * n2),
    };
    for p in 0..n1 {
        for q in 0..n2 {
            out.requested
                .push(o1.requested[p].union(&o2.requested[q]).copied().collect());
            out.blocked
                .push(o1.blocked[p].union(&o2.blocked[q]).copied().collect());
            let row = (0..o1.events.len())
                .map(|e| {
                    let mut targets = BTreeSet::new();
                    for t1 in &o1.delta[p][e] {
                        for t2 in &o2.delta[q][e] {
                            targets.insert(pair(*t1, *t2));
                        }
                    }
                    targets
                })
                .collect();
            out.delta.push(row);
        }
    }
    Ok(out)
}

pub fn compose_classic_all(objects: &[ClassicScenario]) -> Result<ClassicScenario, FormalError> {
    let (first, rest) = objects.split_first().expect("at least one object");
    rest.iter()
        .try_fold(first.clone(), |acc, o| compose_classic(&acc, o))
}

/// `R(q) \ B(q)`.
pub fn enabled_events(o: &ClassicScenario, state: usize) -> Result<BTreeSet<usize>, FormalError> {
    if state >= o.num_states() {
        return Err(FormalError::UnknownState(state));
    }
    Ok(o.requested[state]
        .difference(&o.blocked[state])
        .copied()
        .collect())
}

/// An object `⟨Q, δ, q0, C, L⟩` whose transitions are guarded by formulas
/// over the chosen assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedScenario {
    pub name: String,
    pub registry: VariableRegistry,
    pub initial: usize,
    pub constraints: Vec<Vec<(Formula, BTreeSet<Label>)>>,
    pub transitions: Vec<Vec<(Formula, usize)>>,
}

impl ExtendedScenario {
    pub fn new(name: &str, registry: &VariableRegistry, states: usize) -> Self {
        assert!(states > 0, "a scenario object has at least one state");
        ExtendedScenario {
            name: name.to_string(),
            registry: registry.clone(),
            initial: 0,
            constraints: vec![Vec::new(); states],
            transitions: vec![Vec::new(); states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.constraints.len()
    }

    /// Add `f` to `C(state)` with the given labels, merging labels when `f`
    /// is already present.
    pub fn constrain(
        mut self,
        state: usize,
        f: Formula,
        labels: impl IntoIterator<Item = Label>,
    ) -> Self {
        add_constraint(
            &mut self.constraints[state],
            f,
            labels.into_iter().collect(),
        );
        self
    }

    pub fn transition(mut self, state: usize, guard: Formula, target: usize) -> Self {
        self.transitions[state].push((guard, target));
        self
    }

    /// `L(state, f)`; empty when `f ∉ C(state)`.
    pub fn labels(&self, state: usize, f: &Formula) -> BTreeSet<Label> {
        self.constraints[state]
            .iter()
            .find(|(g, _)| g == f)
            .map(|(_, ls)| ls.clone())
            .unwrap_or_default()
    }

    pub fn ticket(&self, state: usize) -> Ticket {
        Ticket {
            scenario: 0,
            constraints: self.constraints[state].clone(),
            guard: None,
        }
    }

    pub fn successors(
        &self,
        state: usize,
        a: &Assignment,
    ) -> Result<BTreeSet<usize>, FormulaError> {
        let mut out = BTreeSet::new();
        for (guard, target) in &self.transitions[state] {
            if guard.eval(a)? {
                out.insert(*target);
            }
        }
        Ok(out)
    }
}

fn add_constraint(set: &mut Vec<(Formula, BTreeSet<Label>)>, f: Formula, labels: BTreeSet<Label>) {
    match set.iter_mut().find(|(g, _)| *g == f) {
        Some((_, ls)) => ls.extend(labels),
        None => set.push((f, labels)),
    }
}

/// Product with `C` and `L` taken as unions and guards conjoined.
pub fn compose_extended(
    o1: &ExtendedScenario,
    o2: &ExtendedScenario,
) -> Result<ExtendedScenario, FormalError> {
    if o1.registry != o2.registry {
        return Err(FormalError::RegistryMismatch);
    }
    let (n1, n2) = (o1.num_states(), o2.num_states());
    let pair = |p: usize, q: usize| p * n2 + q;
    let mut out = ExtendedScenario::new(&format!("{}*{}", o1.name, o2.name), &o1.registry, n1 * n2);
    out.initial = pair(o1.initial, o2.initial);
    for p in 0..n1 {
        for q in 0..n2 {
            let s = pair(p, q);
            for (f, ls) in o1.constraints[p].iter().chain(&o2.constraints[q]) {
                add_constraint(&mut out.constraints[s], f.clone(), ls.clone());
            }
            for (g1, t1) in &o1.transitions[p] {
                for (g2, t2) in &o2.transitions[q] {
                    out.transitions[s]
                        .push((Formula::and([g1.clone(), g2.clone()]), pair(*t1, *t2)));
                }
            }
        }
    }
    Ok(out)
}

/// Classic object as an extended one over the domain's one-hot variables:
/// requested events labeled `r`, blocked ones `b`, transitions guarded by the
/// event that fired.
pub fn classic_to_extended(
    o: &ClassicScenario,
    domain: &EventDomain,
    registry: &VariableRegistry,
) -> Result<ExtendedScenario, FormalError> {
    check_alphabet(o, domain)?;
    let mut out = ExtendedScenario::new(&o.name, registry, o.num_states());
    out.initial = o.initial;
    for q in 0..o.num_states() {
        for e in &o.requested[q] {
            add_constraint(
                &mut out.constraints[q],
                domain.is(*e),
                [Label::Request].into(),
            );
        }
        for e in &o.blocked[q] {
            add_constraint(
                &mut out.constraints[q],
                domain.is(*e),
                [Label::Block].into(),
            );
        }
        for e in 0..domain.len() {
            for t in &o.delta[q][e] {
                out.transitions[q].push((domain.is(e), *t));
            }
        }
    }
    Ok(out)
}

/// The always-on object that restricts assignments to single events.
pub fn domain_object(domain: &EventDomain, registry: &VariableRegistry) -> ExtendedScenario {
    ExtendedScenario::new("event-domain", registry, 1)
        .constrain(0, !domain.exactly_one(), [Label::Block])
        .transition(0, Formula::True, 0)
}

fn check_alphabet(o: &ClassicScenario, domain: &EventDomain) -> Result<(), FormalError> {
    if let Some(extra) = o.events.iter().find(|e| domain.index_of(e).is_none()) {
        return Err(FormalError::UnknownEvent(extra.clone()));
    }
    if o.events != domain.names() {
        return Err(FormalError::AlphabetMismatch);
    }
    Ok(())
}

struct ClassicHandle {
    object: ClassicScenario,
    domain: EventDomain,
    state: usize,
}

impl ClassicHandle {
    fn ticket(&self) -> Ticket {
        let q = self.state;
        let mut t = Ticket::new();
        for e in &self.object.requested[q] {
            t = t.request(self.domain.is(*e));
        }
        for e in &self.object.blocked[q] {
            t = t.block(self.domain.is(*e));
        }
        t.wait_for(Formula::True)
    }
}

impl Scenario for ClassicHandle {
    fn name(&self) -> &str {
        &self.object.name
    }

    fn start(&mut self) -> Result<Step, ScenarioError> {
        self.state = self.object.initial;
        Ok(Step::Yield(self.ticket()))
    }

    fn resume(&mut self, a: &Assignment) -> Result<Step, ScenarioError> {
        let event = self
            .domain
            .decode(a)
            .ok_or_else(|| ScenarioError::new("assignment is not a single event"))?;
        let next = self.object.successors(self.state, event);
        // Nondeterministic choices resolve to the smallest state.
        let Some(target) = next.iter().next() else {
            return Err(ScenarioError::new(format!(
                "no transition from state {} on `{}`",
                self.state,
                self.domain.names()[event]
            )));
        };
        self.state = *target;
        Ok(Step::Yield(self.ticket()))
    }
}

/// Engine handles for classic objects, followed by one handle that blocks
/// every assignment other than a single event.
pub fn encode_traditional(
    objects: &[ClassicScenario],
    domain: &EventDomain,
) -> Result<Vec<Box<dyn Scenario>>, FormalError> {
    let mut out: Vec<Box<dyn Scenario>> = Vec::new();
    for o in objects {
        check_alphabet(o, domain)?;
        out.push(Box::new(ClassicHandle {
            object: o.clone(),
            domain: domain.clone(),
            state: o.initial,
        }));
    }
    out.push(constant(
        "event-domain",
        Ticket::new().block(!domain.exactly_one()),
    ));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExploredTrace {
    pub assignments: Vec<Assignment>,
    /// Ended because no assignment satisfied the request.
    pub deadlocked: bool,
}

/// Every assignment over the registry's booleans that `request` admits.
/// For hard/soft requests only the optimal ones are kept.
pub fn admitted_assignments(
    request: &SolverRequest,
    registry: &VariableRegistry,
) -> Result<Vec<Assignment>, FormalError> {
    if let Some(v) = registry.iter().find(|v| v.sort == Sort::Real) {
        return Err(FormalError::NonBoolean(v.name.clone()));
    }
    let n = registry.len();
    assert!(n <= 20, "enumeration bound exceeded");
    let mut admitted = Vec::new();
    for bits in 0u32..(1 << n) {
        let values = (0..n)
            .map(|i| Value::Bool(bits >> (n - 1 - i) & 1 == 1))
            .collect();
        let a = Assignment::from_values(registry, values)?;
        if request.satisfied_by(&a) {
            admitted.push(a);
        }
    }
    if let SolverRequest::HardSoft(p) = request {
        let best = admitted.iter().map(|a| p.score(a).0).max();
        admitted.retain(|a| Some(p.score(a).0) == best);
    }
    Ok(admitted)
}

/// All executions of the composed objects up to `depth` steps, branching on
/// every admitted assignment and every nondeterministic successor.
pub fn enumerate_traces(
    objects: &[ExtendedScenario],
    rule: &dyn CompositionRule,
    registry: &VariableRegistry,
    depth: usize,
) -> Result<BTreeSet<ExploredTrace>, FormalError> {
    if objects.iter().any(|o| o.registry != *registry) {
        return Err(FormalError::RegistryMismatch);
    }
    let mut out = BTreeSet::new();
    let initial: Vec<usize> = objects.iter().map(|o| o.initial).collect();
    explore(
        objects,
        rule,
        registry,
        depth,
        initial,
        &mut Vec::new(),
        &mut out,
    )?;
    Ok(out)
}

fn explore(
    objects: &[ExtendedScenario],
    rule: &dyn CompositionRule,
    registry: &VariableRegistry,
    depth: usize,
    states: Vec<usize>,
    prefix: &mut Vec<Assignment>,
    out: &mut BTreeSet<ExploredTrace>,
) -> Result<(), FormalError> {
    if prefix.len() == depth {
        out.insert(ExploredTrace {
            assignments: prefix.clone(),
            deadlocked: false,
        });
        return Ok(());
    }
    let tickets: Vec<Ticket> = objects
        .iter()
        .zip(&states)
        .enumerate()
        .map(|(i, (o, q))| o.ticket(*q).with_scenario(i))
        .collect();
    let request = rule.compose(&tickets)?;
    let admitted = admitted_assignments(&request, registry)?;
    if admitted.is_empty() {
        out.insert(ExploredTrace {
            assignments: prefix.clone(),
            deadlocked: true,
        });
        return Ok(());
    }
    for a in admitted {
        let mut choices: Vec<Vec<usize>> = Vec::with_capacity(objects.len());
        for (o, q) in objects.iter().zip(&states) {
            let next = o.successors(*q, &a)?;
            if next.is_empty() {
                return Err(FormalError::NoTransition {
                    scenario: o.name.clone(),
                    state: *q,
                });
            }
            choices.push(next.into_iter().collect());
        }
        prefix.push(a);
        for next in cartesian(&choices) {
            explore(objects, rule, registry, depth, next, prefix, out)?;
        }
        prefix.pop();
    }
    Ok(())
}

fn cartesian(choices: &[Vec<usize>]) -> Vec<Vec<usize>> {
    choices.iter().fold(vec![Vec::new()], |acc, options| {
        acc.iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(*o);
                    p
                })
            })
            .collect()
    })
}

/// Whether `trace` is an execution of the enumerated tree: a prefix of some
/// explored trace, ending in a deadlock exactly where one was explored.
pub fn contains_trace(
    explored: &BTreeSet<ExploredTrace>,
    trace: &[Assignment],
    deadlocked: bool,
) -> bool {
    explored.iter().any(|t| {
        t.assignments.len() >= trace.len()
            && t.assignments[..trace.len()] == *trace
            && (!deadlocked || (t.deadlocked && t.assignments.len() == trace.len()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{ConjunctionRule, TraditionalRule};

    const EVENTS: [&str; 3] = ["AddHot", "AddCold", "WaterLow"];

    fn hot_tap() -> ClassicScenario {
        ClassicScenario::new("AddHotWater", &EVENTS, 4)
            .on(0, "WaterLow", 1)
            .request(1, "AddHot")
            .on(1, "AddHot", 2)
            .request(2, "AddHot")
            .on(2, "AddHot", 3)
            .request(3, "AddHot")
            .on(3, "AddHot", 0)
            .stay_otherwise()
    }

    fn cold_tap() -> ClassicScenario {
        ClassicScenario::new("AddColdWater", &EVENTS, 4)
            .on(0, "WaterLow", 1)
            .request(1, "AddCold")
            .on(1, "AddCold", 2)
            .request(2, "AddCold")
            .on(2, "AddCold", 3)
            .request(3, "AddCold")
            .on(3, "AddCold", 0)
            .stay_otherwise()
    }

    fn stability() -> ClassicScenario {
        ClassicScenario::new("Stability", &EVENTS, 2)
            .block(0, "AddCold")
            .on(0, "AddHot", 1)
            .block(1, "AddHot")
            .on(1, "AddCold", 0)
            .stay_otherwise()
    }

    #[test]
    fn taps_product_has_sixteen_states() {
        let p = compose_classic(&hot_tap(), &cold_tap()).unwrap();
        assert_eq!(p.num_states(), 16);
        let after_low = p.successors(p.initial, 2).iter().next().copied().unwrap();
        assert_eq!(enabled_events(&p, after_low).unwrap(), [0, 1].into());
    }

    #[test]
    fn stability_blocks_cold() {
        let p = compose_classic_all(&[hot_tap(), cold_tap(), stability()]).unwrap();
        let after_low = *p.successors(p.initial, 2).iter().next().unwrap();
        assert_eq!(enabled_events(&p, after_low).unwrap(), [0].into());
    }

    #[test]
    fn identity_and_symmetry() {
        let unit = ClassicScenario::new("unit", &EVENTS, 1).stay_otherwise();
        let hot = hot_tap();
        let p = compose_classic(&hot, &unit).unwrap();
        for q in 0..hot.num_states() {
            assert_eq!(p.requested[q], hot.requested[q]);
            assert_eq!(p.blocked[q], hot.blocked[q]);
        }
        let ab = compose_classic(&hot, &cold_tap()).unwrap();
        let ba = compose_classic(&cold_tap(), &hot).unwrap();
        for p1 in 0..4 {
            for q1 in 0..4 {
                assert_eq!(ab.requested[p1 * 4 + q1], ba.requested[q1 * 4 + p1]);
            }
        }
    }

    #[test]
    fn enabled_event_edge_cases() {
        let o = ClassicScenario::new("o", &["a", "b"], 2)
            .request(1, "a")
            .request(1, "b")
            .block(1, "a")
            .block(1, "b");
        assert!(enabled_events(&o, 0).unwrap().is_empty());
        assert!(enabled_events(&o, 1).unwrap().is_empty());
        assert_eq!(enabled_events(&o, 7), Err(FormalError::UnknownState(7)));
    }

    #[test]
    fn alphabet_mismatch() {
        let a = ClassicScenario::new("a", &["x"], 1);
        let b = ClassicScenario::new("b", &["y"], 1);
        assert_eq!(compose_classic(&a, &b), Err(FormalError::AlphabetMismatch));
    }

    #[test]
    fn extended_composition_unions_constraints() {
        let mut reg = VariableRegistry::new();
        let p = Formula::var(reg.bool_var("p").unwrap());
        let q = Formula::var(reg.bool_var("q").unwrap());
        let o1 = ExtendedScenario::new("o1", &reg, 1)
            .constrain(0, p.clone(), [Label::May])
            .transition(0, Formula::True, 0);
        let o2 = ExtendedScenario::new("o2", &reg, 1)
            .constrain(0, q.clone(), [])
            .constrain(0, p.clone(), [Label::Must])
            .transition(0, Formula::True, 0);
        let c = compose_extended(&o1, &o2).unwrap();
        assert_eq!(c.num_states(), 1);
        assert_eq!(c.labels(0, &p), [Label::May, Label::Must].into());
        assert!(c.labels(0, &q).is_empty());
        assert!(c.labels(0, &Formula::True).is_empty());

        let empty = ExtendedScenario::new("id", &reg, 1).transition(0, Formula::True, 0);
        assert_eq!(
            compose_extended(&o1, &empty).unwrap().constraints,
            o1.constraints
        );

        let other = ExtendedScenario::new("x", &VariableRegistry::new(), 1);
        assert_eq!(
            compose_extended(&o1, &other),
            Err(FormalError::RegistryMismatch)
        );
    }

    #[test]
    fn empty_model_repeats_the_default_assignment() {
        let reg = VariableRegistry::new();
        let traces = enumerate_traces(&[], &ConjunctionRule, &reg, 3).unwrap();
        assert_eq!(traces.len(), 1);
        let t = traces.iter().next().unwrap();
        assert_eq!(t.assignments, vec![Assignment::defaults(&reg); 3]);
        assert!(!t.deadlocked);
    }

    #[test]
    fn request_and_block_same_event_deadlocks() {
        let mut reg = VariableRegistry::new();
        let domain = EventDomain::declare(&mut reg, &["X", "Y"]).unwrap();
        let o = ClassicScenario::new("o", &["X", "Y"], 1)
            .request(0, "X")
            .block(0, "X")
            .stay_otherwise();
        let handles = encode_traditional(std::slice::from_ref(&o), &domain).unwrap();
        let out = crate::engine::run(
            handles,
            Box::new(TraditionalRule::new(domain.clone())),
            reg.clone(),
            3,
        )
        .unwrap();
        assert_eq!(out.termination, crate::engine::Termination::Deadlock);
        let objects = [
            classic_to_extended(&o, &domain, &reg).unwrap(),
            domain_object(&domain, &reg),
        ];
        let traces = enumerate_traces(&objects, &TraditionalRule::new(domain), &reg, 3).unwrap();
        assert_eq!(traces.len(), 1);
        assert!(traces
            .iter()
            .all(|t| t.deadlocked && t.assignments.is_empty()));
    }

    #[test]
    fn nothing_requested_deadlocks() {
        let mut reg = VariableRegistry::new();
        let domain = EventDomain::declare(&mut reg, &["X"]).unwrap();
        let o = ClassicScenario::new("idle", &["X"], 1).stay_otherwise();
        let out = crate::engine::run(
            encode_traditional(&[o], &domain).unwrap(),
            Box::new(TraditionalRule::new(domain)),
            reg,
            3,
        )
        .unwrap();
        assert_eq!(out.termination, crate::engine::Termination::Deadlock);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn foreign_event_rejected() {
        let mut reg = VariableRegistry::new();
        let domain = EventDomain::declare(&mut reg, &["X"]).unwrap();
        let o = ClassicScenario::new("o", &["Z"], 1);
        assert!(matches!(
            encode_traditional(&[o], &domain),
            Err(FormalError::UnknownEvent(_))
        ));
    }

    #[test]
    fn one_hot_round_trip() {
        let mut reg = VariableRegistry::new();
        let domain = EventDomain::declare(&mut reg, &EVENTS).unwrap();
        for e in 0..3 {
            let a = domain.encode(e, &reg);
            assert_eq!(domain.decode(&a), Some(e));
            assert_eq!(domain.exactly_one().eval(&a), Ok(true));
        }
        assert_eq!(domain.decode(&Assignment::defaults(&reg)), None);
    }
}
