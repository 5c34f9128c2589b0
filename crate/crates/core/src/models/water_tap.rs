//! Hot/cold doses under may/must semantics, and the temperature extension.

use super::{ExplicitModel, Model, ModelError};
use crate::engine::{constant, FnScenario, Scenario, ScenarioError, Step};
use crate::formal::ExtendedScenario;
use crate::formula::{Assignment, Formula, LinExpr, VarId, VariableRegistry};
use crate::semantics::{Label, MayMustRule, Ticket};

struct Vars {
    hot: VarId,
    cold: VarId,
}

impl Vars {
    fn declare(registry: &mut VariableRegistry) -> Self {
        Vars {
            hot: registry.bool_var("hot").expect("fresh registry"),
            cold: registry.bool_var("cold").expect("fresh registry"),
        }
    }
}

fn mutual_exclusion(v: &Vars) -> Box<dyn Scenario> {
    constant(
        "mutual_exclusion",
        Ticket::new().must(!Formula::var(v.hot) | !Formula::var(v.cold)),
    )
}

/// `for _ in range(3): yield {may: flag, wait-for: flag}`
fn three(name: &str, flag: VarId) -> Box<dyn Scenario> {
    let mut yielded = 0;
    FnScenario::boxed(name, move |_| {
        if yielded == 3 {
            return Ok(Step::Ended);
        }
        yielded += 1;
        Ok(Step::Yield(
            Ticket::new()
                .may(Formula::var(flag))
                .wait_for(Formula::var(flag)),
        ))
    })
}

#[derive(Clone, Copy)]
enum Position {
    Start,
    AfterCold,
    AfterHot,
}

/// The loop that checks `cold` then `hot` in the published model. A model
/// with neither flag set would spin forever; that is reported as a fault.
fn no_two_same_in_a_row(v: &Vars) -> Box<dyn Scenario> {
    let (hot, cold) = (v.hot, v.cold);
    let mut at = Position::Start;
    FnScenario::boxed("no_two_same_in_a_row", move |m| {
        let Some(m) = m else {
            return Ok(Step::Yield(Ticket::new().wait_for(Formula::True)));
        };
        let is = |id: VarId| m.bool(id) == Some(true);
        let block_cold = || {
            Ticket::new()
                .must(!Formula::var(cold))
                .wait_for(Formula::True)
        };
        let block_hot = || {
            Ticket::new()
                .must(!Formula::var(hot))
                .wait_for(Formula::True)
        };
        let (next, ticket) = match at {
            Position::Start | Position::AfterHot if is(cold) => (Position::AfterCold, block_cold()),
            Position::Start | Position::AfterHot if is(hot) => (Position::AfterHot, block_hot()),
            Position::AfterCold if is(hot) => (Position::AfterHot, block_hot()),
            Position::AfterCold if is(cold) => (Position::AfterCold, block_cold()),
            _ => return Err(ScenarioError::new("loop without a yield: neither flag set")),
        };
        at = next;
        Ok(Step::Yield(ticket))
    })
}

pub(super) fn maymust() -> Result<Model, ModelError> {
    let mut registry = VariableRegistry::new();
    let v = Vars::declare(&mut registry);
    let scenarios = vec![
        mutual_exclusion(&v),
        three("three_hot", v.hot),
        three("three_cold", v.cold),
        no_two_same_in_a_row(&v),
    ];
    Ok(Model {
        name: "water-tap-maymust".into(),
        rule: "may-must".into(),
        registry,
        domain: None,
        scenarios,
        plant: None,
    })
}

/// `while True: yield {wait-for: flag}; while m[flag]: yield {must: bound}`
fn after(name: &str, flag: VarId, bound: Formula) -> Box<dyn Scenario> {
    FnScenario::boxed(name, move |m: Option<&Assignment>| {
        let flag_set = m.is_some_and(|m| m.bool(flag) == Some(true));
        Ok(Step::Yield(if flag_set {
            Ticket::new().must(bound.clone()).wait_for(Formula::True)
        } else {
            Ticket::new().wait_for(Formula::var(flag))
        }))
    })
}

pub(super) fn temps() -> Result<Model, ModelError> {
    let mut registry = VariableRegistry::new();
    let v = Vars::declare(&mut registry);
    let temp = registry.real_var("temp")?;
    let t = || LinExpr::var(temp);
    let scenarios = vec![
        mutual_exclusion(&v),
        three("three_hot", v.hot),
        three("three_cold", v.cold),
        constant(
            "hot_temp",
            Ticket::new().must(Formula::var(v.hot).implies(t().gt(50))),
        ),
        constant(
            "cold_temp",
            Ticket::new().must(Formula::var(v.cold).implies(t().lt(50))),
        ),
        after("after_hot_temp", v.hot, t().gt(20)),
        after("after_cold_temp", v.cold, t().lt(80)),
    ];
    Ok(Model {
        name: "water-tap-temps".into(),
        rule: "may-must".into(),
        registry,
        domain: None,
        scenarios,
        plant: None,
    })
}

pub(super) fn explicit() -> Result<ExplicitModel, ModelError> {
    let mut registry = VariableRegistry::new();
    let v = Vars::declare(&mut registry);
    let (hot, cold) = (Formula::var(v.hot), Formula::var(v.cold));
    let reg = &registry;

    let exclusion = ExtendedScenario::new("mutual_exclusion", reg, 1)
        .constrain(0, !hot.clone() | !cold.clone(), [Label::Must])
        .transition(0, Formula::True, 0);

    let counter = |name: &str, flag: &Formula| {
        let mut o = ExtendedScenario::new(name, reg, 4).transition(3, Formula::True, 3);
        for q in 0..3 {
            o = o
                .constrain(q, flag.clone(), [Label::May])
                .transition(q, flag.clone(), q + 1)
                .transition(q, !flag.clone(), q);
        }
        o
    };

    // States: 0 before the loop, 1 after blocking cold, 2 after blocking hot.
    let alternation = ExtendedScenario::new("no_two_same_in_a_row", reg, 3)
        .constrain(1, !cold.clone(), [Label::Must])
        .constrain(2, !hot.clone(), [Label::Must])
        .transition(0, cold.clone(), 1)
        .transition(0, !cold.clone() & hot.clone(), 2)
        .transition(1, hot.clone(), 2)
        .transition(1, !hot.clone() & cold.clone(), 1)
        .transition(2, cold.clone(), 1)
        .transition(2, !cold.clone() & hot.clone(), 2);

    Ok(ExplicitModel {
        objects: vec![
            exclusion,
            counter("three_hot", &hot),
            counter("three_cold", &cold),
            alternation,
        ],
        rule: Box::new(MayMustRule),
        registry,
    })
}
