//! Two scenarios that each only know about their own variable.

use super::{ExplicitModel, Model, ModelError};
use crate::engine::constant;
use crate::formal::ExtendedScenario;
use crate::formula::{Formula, LinExpr, VariableRegistry};
use crate::semantics::{rule_by_name, Label, Ticket};

pub(super) fn model() -> Result<Model, ModelError> {
    let mut registry = VariableRegistry::new();
    let x1 = registry.real_var("x1")?;
    let x2 = registry.real_var("x2")?;
    let scenarios = vec![
        constant("scenario1", Ticket::new().may(LinExpr::var(x1).gt(50))),
        constant("scenario2", Ticket::new().may(LinExpr::var(x2).gt(50))),
    ];
    Ok(Model {
        name: "maymust-pitfall".into(),
        rule: "may-must".into(),
        registry,
        domain: None,
        scenarios,
        plant: None,
    })
}

/// The same model with `big1 ⇔ x1 > 50` and `big2 ⇔ x2 > 50` as booleans.
pub(super) fn boolean_explicit(rule: &str) -> Result<ExplicitModel, ModelError> {
    let mut registry = VariableRegistry::new();
    let big1 = Formula::var(registry.bool_var("big1")?);
    let big2 = Formula::var(registry.bool_var("big2")?);
    let object = |name: &str, f: Formula| {
        ExtendedScenario::new(name, &registry, 1)
            .constrain(0, f, [Label::May])
            .transition(0, Formula::True, 0)
    };
    Ok(ExplicitModel {
        objects: vec![object("scenario1", big1), object("scenario2", big2)],
        rule: rule_by_name(rule, None)?,
        registry,
    })
}
