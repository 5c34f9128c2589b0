//! The drone velocity limits and the package manager.

use super::{ExplicitModel, Model, ModelError};
use crate::engine::{FnScenario, Scenario, Step};
use crate::formal::ExtendedScenario;
use crate::formula::{Formula, LinExpr, VarId, VariableRegistry};
use crate::semantics::{HardSoftRule, Label, Ticket};

/// A single synchronization point with a `true` self-loop.
fn steady(name: &str, ticket: Ticket) -> Box<dyn Scenario> {
    let ticket = ticket.wait_for(Formula::True);
    FnScenario::boxed(name, move |_| Ok(Step::Yield(ticket.clone())))
}

pub(super) fn drone() -> Result<Model, ModelError> {
    let mut registry = VariableRegistry::new();
    let v = LinExpr::var(registry.real_var("v")?);
    let h = LinExpr::var(registry.real_var("h")?);
    let scenarios = vec![
        steady(
            "vertical_limit",
            Ticket::new().constraint(v.clone().ge(-5) & v.clone().le(5)),
        ),
        steady(
            "horizontal_limit",
            Ticket::new().constraint(h.clone().ge(-10) & h.clone().le(10)),
        ),
        steady("navigation", Ticket::new().constraint(h.clone().ge(6))),
        steady(
            "wire_avoidance",
            Ticket::new().constraint(h.le(-3) | v.ge(2)),
        ),
    ];
    Ok(Model {
        name: "drone".into(),
        rule: "conjunction".into(),
        registry,
        domain: None,
        scenarios,
        plant: None,
    })
}

struct Packages {
    a: VarId,
    b: VarId,
    c: VarId,
}

fn packages(registry: &mut VariableRegistry) -> Result<Packages, ModelError> {
    Ok(Packages {
        a: registry.bool_var("x_A")?,
        b: registry.bool_var("x_B")?,
        c: registry.bool_var("x_C")?,
    })
}

/// Soft `x` while the package is installed; nothing once it is removed.
fn installed(name: &str, x: VarId) -> Box<dyn Scenario> {
    FnScenario::boxed(name, move |m| {
        let present = m.is_none_or(|m| m.bool(x) == Some(true));
        Ok(Step::Yield(if present {
            Ticket::new().soft(Formula::var(x)).wait_for(Formula::True)
        } else {
            Ticket::new().wait_for(Formula::True)
        }))
    })
}

/// Goal: install A. A requires B, A is incompatible with C, and both B and
/// C start out installed.
pub(super) fn package_manager() -> Result<Model, ModelError> {
    let mut registry = VariableRegistry::new();
    let p = packages(&mut registry)?;
    let (a, b, c) = (Formula::var(p.a), Formula::var(p.b), Formula::var(p.c));
    let scenarios = vec![
        steady("goal_install_A", Ticket::new().hard(a.clone())),
        steady("A_requires_B", Ticket::new().hard(!a.clone() | b)),
        steady("A_conflicts_C", Ticket::new().hard(!(a & c))),
        installed("installed_B", p.b),
        installed("installed_C", p.c),
    ];
    Ok(Model {
        name: "package-manager".into(),
        rule: "hard-soft".into(),
        registry,
        domain: None,
        scenarios,
        plant: None,
    })
}

pub(super) fn package_manager_explicit() -> Result<ExplicitModel, ModelError> {
    let mut registry = VariableRegistry::new();
    let p = packages(&mut registry)?;
    let (a, b, c) = (Formula::var(p.a), Formula::var(p.b), Formula::var(p.c));
    let reg = &registry;
    let hard = |name: &str, f: Formula| {
        ExtendedScenario::new(name, reg, 1)
            .constrain(0, f, [Label::Hard])
            .transition(0, Formula::True, 0)
    };
    let soft = |name: &str, x: &Formula| {
        ExtendedScenario::new(name, reg, 2)
            .constrain(0, x.clone(), [Label::Soft])
            .transition(0, x.clone(), 0)
            .transition(0, !x.clone(), 1)
            .transition(1, !x.clone(), 1)
            .transition(1, x.clone(), 0)
    };
    Ok(ExplicitModel {
        objects: vec![
            hard("goal_install_A", a.clone()),
            hard("A_requires_B", !a.clone() | b.clone()),
            hard("A_conflicts_C", !(a & c.clone())),
            soft("installed_B", &b),
            soft("installed_C", &c),
        ],
        rule: Box::new(HardSoftRule),
        registry,
    })
}
