//! The synchronization loop: collect one ticket per live scenario, compose,
//! solve, broadcast the assignment, and resume the scenarios whose guard
//! holds.
//!
//! A ticket without a guard is never resumed and stays live for the rest of
//! the run. A scenario that ends when started is dropped.

use thiserror::Error;

use crate::formula::{Assignment, VariableRegistry};
use crate::semantics::{CompositionRule, RuleError, SolverRequest, Ticket};

pub enum Step {
    Yield(Ticket),
    Ended,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct ScenarioError(pub String);

impl ScenarioError {
    pub fn new(message: impl Into<String>) -> Self {
        ScenarioError(message.into())
    }
}

/// A resumable computation that pauses at synchronization points.
pub trait Scenario {
    fn name(&self) -> &str;

    fn start(&mut self) -> Result<Step, ScenarioError>;

    /// Called only after a yielded ticket's guard held under `a`.
    fn resume(&mut self, a: &Assignment) -> Result<Step, ScenarioError>;
}

type Body = Box<dyn FnMut(Option<&Assignment>) -> Result<Step, ScenarioError>>;

/// Scenario from a closure that receives `None` when started and the chosen
/// assignment when resumed.
pub struct FnScenario {
    name: String,
    body: Body,
}

impl FnScenario {
    pub fn new(
        name: impl Into<String>,
        body: impl FnMut(Option<&Assignment>) -> Result<Step, ScenarioError> + 'static,
    ) -> Self {
        FnScenario {
            name: name.into(),
            body: Box::new(body),
        }
    }

    pub fn boxed(
        name: impl Into<String>,
        body: impl FnMut(Option<&Assignment>) -> Result<Step, ScenarioError> + 'static,
    ) -> Box<dyn Scenario> {
        Box::new(Self::new(name, body))
    }
}

impl Scenario for FnScenario {
    fn name(&self) -> &str {
        &self.name
    }

    fn start(&mut self) -> Result<Step, ScenarioError> {
        (self.body)(None)
    }

    fn resume(&mut self, a: &Assignment) -> Result<Step, ScenarioError> {
        (self.body)(Some(a))
    }
}

/// A scenario that yields the same ticket once and is never resumed.
pub fn constant(name: impl Into<String>, ticket: Ticket) -> Box<dyn Scenario> {
    let mut ticket = Some(ticket);
    FnScenario::boxed(name, move |a| match (a, ticket.take()) {
        (None, Some(t)) => Ok(Step::Yield(t)),
        _ => Ok(Step::Ended),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub step: usize,
    pub assignment: Assignment,
    pub resumed: Vec<String>,
    pub ended: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Deadlock,
    StepLimit,
    AllEnded,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Deadlock => "deadlock",
            Termination::StepLimit => "step-limit",
            Termination::AllEnded => "all-ended",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("scenario `{scenario}` failed at step {step}: {message}")]
    Scenario {
        scenario: String,
        step: usize,
        message: String,
    },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("step {step}: solver assignment violates the composed request")]
    Unsound { step: usize },
    #[error("step {step}: plant rejected the assignment: {message}")]
    Plant { step: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Solved(TraceEntry),
    Deadlock,
}

pub struct Engine {
    scenarios: Vec<Box<dyn Scenario>>,
    rule: Box<dyn CompositionRule>,
    registry: VariableRegistry,
    /// Ticket per scenario; `None` once the scenario has ended.
    live: Vec<Option<Ticket>>,
    step: usize,
    started: bool,
    all_ended: bool,
}

impl Engine {
    pub fn new(
        scenarios: Vec<Box<dyn Scenario>>,
        rule: Box<dyn CompositionRule>,
        registry: VariableRegistry,
    ) -> Self {
        let n = scenarios.len();
        Engine {
            scenarios,
            rule,
            registry,
            live: vec![None; n],
            step: 0,
            started: false,
            all_ended: false,
        }
    }

    pub fn registry(&self) -> &VariableRegistry {
        &self.registry
    }

    pub fn rule(&self) -> &dyn CompositionRule {
        self.rule.as_ref()
    }

    /// Number of solved steps so far.
    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn all_ended(&self) -> bool {
        self.all_ended
    }

    pub fn scenario_names(&self) -> Vec<&str> {
        self.scenarios.iter().map(|s| s.name()).collect()
    }

    fn fault(&self, index: usize, err: ScenarioError) -> EngineError {
        EngineError::Scenario {
            scenario: self.scenarios[index].name().to_string(),
            step: self.step,
            message: err.0,
        }
    }

    fn accept(&mut self, index: usize, step: Step) -> bool {
        match step {
            Step::Yield(ticket) => {
                self.live[index] = Some(ticket.with_scenario(index));
                true
            }
            Step::Ended => {
                self.live[index] = None;
                false
            }
        }
    }

    pub fn start(&mut self) -> Result<(), EngineError> {
        if self.started {
            return Ok(());
        }
        self.started = true;
        for i in 0..self.scenarios.len() {
            let step = self.scenarios[i].start().map_err(|e| self.fault(i, e))?;
            self.accept(i, step);
        }
        Ok(())
    }

    pub fn tickets(&self) -> Vec<Ticket> {
        self.live.iter().flatten().cloned().collect()
    }

    /// The request composed from the current live tickets.
    pub fn request(&self) -> Result<SolverRequest, RuleError> {
        self.rule.compose(&self.tickets())
    }

    pub fn step_once(&mut self) -> Result<StepOutcome, EngineError> {
        self.step_with(|_| Ok(()))
    }

    /// One round; `plant` sees the assignment before any scenario resumes.
    pub fn step_with(
        &mut self,
        mut plant: impl FnMut(&Assignment) -> Result<(), String>,
    ) -> Result<StepOutcome, EngineError> {
        self.start()?;
        let request = self.request()?;
        let Some(assignment) = self.rule.solve(&request, &self.registry)? else {
            return Ok(StepOutcome::Deadlock);
        };
        if !request.satisfied_by(&assignment) {
            return Err(EngineError::Unsound { step: self.step });
        }
        plant(&assignment).map_err(|message| EngineError::Plant {
            step: self.step,
            message,
        })?;

        let mut resumed = Vec::new();
        let mut ended = Vec::new();
        for i in 0..self.scenarios.len() {
            let wake = match &self.live[i] {
                Some(Ticket { guard: Some(g), .. }) => g
                    .eval(&assignment)
                    .map_err(|e| self.fault(i, ScenarioError(format!("guard evaluation: {e}"))))?,
                _ => false,
            };
            if !wake {
                continue;
            }
            let name = self.scenarios[i].name().to_string();
            let step = self.scenarios[i]
                .resume(&assignment)
                .map_err(|e| self.fault(i, e))?;
            if !self.accept(i, step) {
                ended.push(name.clone());
            }
            resumed.push(name);
        }
        let entry = TraceEntry {
            step: self.step,
            assignment,
            resumed,
            ended,
        };
        self.step += 1;
        if !self.live.iter().any(Option::is_some) && !entry.ended.is_empty() {
            self.all_ended = true;
        }
        Ok(StepOutcome::Solved(entry))
    }

    pub fn run(&mut self, max_steps: usize) -> Result<RunOutcome, EngineError> {
        self.run_with(max_steps, |_| Ok(()))
    }

    pub fn run_with(
        &mut self,
        max_steps: usize,
        mut plant: impl FnMut(&Assignment) -> Result<(), String>,
    ) -> Result<RunOutcome, EngineError> {
        let mut trace = Vec::new();
        let termination = loop {
            if self.all_ended {
                break Termination::AllEnded;
            }
            if trace.len() >= max_steps {
                break Termination::StepLimit;
            }
            match self.step_with(&mut plant)? {
                StepOutcome::Solved(entry) => trace.push(entry),
                StepOutcome::Deadlock => break Termination::Deadlock,
            }
        };
        Ok(RunOutcome { trace, termination })
    }
}

pub fn run(
    scenarios: Vec<Box<dyn Scenario>>,
    rule: Box<dyn CompositionRule>,
    registry: VariableRegistry,
    max_steps: usize,
) -> Result<RunOutcome, EngineError> {
    Engine::new(scenarios, rule, registry).run(max_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::Formula;
    use crate::semantics::{ConjunctionRule, MayMustRule};

    #[test]
    fn no_scenarios_deadlock_under_may_must() {
        let out = run(vec![], Box::new(MayMustRule), VariableRegistry::new(), 5).unwrap();
        assert_eq!(out.termination, Termination::Deadlock);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn true_ticket_is_resumed() {
        let s = FnScenario::boxed("loop", |_| {
            Ok(Step::Yield(
                Ticket::new()
                    .constraint(Formula::True)
                    .wait_for(Formula::True),
            ))
        });
        let mut engine = Engine::new(vec![s], Box::new(ConjunctionRule), VariableRegistry::new());
        let StepOutcome::Solved(entry) = engine.step_once().unwrap() else {
            panic!();
        };
        assert_eq!(entry.resumed, vec!["loop".to_string()]);
        assert_eq!(entry.step, 0);
    }

    #[test]
    fn contradictory_musts_deadlock() {
        let mut reg = VariableRegistry::new();
        let p = Formula::var(reg.bool_var("p").unwrap());
        let t = Ticket::new().may(Formula::True).must(p.clone()).must(!p);
        let mut engine = Engine::new(vec![constant("c", t)], Box::new(MayMustRule), reg);
        assert_eq!(engine.step_once().unwrap(), StepOutcome::Deadlock);
    }

    #[test]
    fn guardless_ticket_persists() {
        let mut reg = VariableRegistry::new();
        let p = reg.bool_var("p").unwrap();
        let t = Ticket::new().may(Formula::var(p));
        let out = run(vec![constant("keep", t)], Box::new(MayMustRule), reg, 4).unwrap();
        assert_eq!(out.termination, Termination::StepLimit);
        assert_eq!(out.trace.len(), 4);
        assert!(out
            .trace
            .iter()
            .all(|e| e.resumed.is_empty() && e.assignment.bool(p) == Some(true)));
    }

    #[test]
    fn ending_every_scenario_stops_the_run() {
        let mut count = 0;
        let s = FnScenario::boxed("twice", move |_| {
            count += 1;
            Ok(if count <= 2 {
                Step::Yield(Ticket::new().wait_for(Formula::True))
            } else {
                Step::Ended
            })
        });
        let out = run(
            vec![s],
            Box::new(ConjunctionRule),
            VariableRegistry::new(),
            10,
        )
        .unwrap();
        assert_eq!(out.termination, Termination::AllEnded);
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace[1].ended, vec!["twice".to_string()]);
    }

    #[test]
    fn faults_name_scenario_and_step() {
        let s = FnScenario::boxed("bad", |a| match a {
            None => Ok(Step::Yield(Ticket::new().wait_for(Formula::True))),
            Some(_) => Err(ScenarioError::new("boom")),
        });
        let err = run(
            vec![s],
            Box::new(ConjunctionRule),
            VariableRegistry::new(),
            3,
        )
        .unwrap_err();
        assert_eq!(
            err,
            EngineError::Scenario {
                scenario: "bad".into(),
                step: 0,
                message: "boom".into()
            }
        );
    }
}
