//! The hot/cold water tap as classic request/block objects.

use super::{ExplicitModel, Model, ModelError};
use crate::formal::{
    classic_to_extended, domain_object, encode_traditional, ClassicScenario, EventDomain,
};
use crate::formula::VariableRegistry;
use crate::semantics::TraditionalRule;

pub const EVENTS: [&str; 3] = ["AddHot", "AddCold", "WaterLow"];

fn tap(name: &str, event: &str) -> ClassicScenario {
    ClassicScenario::new(name, &EVENTS, 4)
        .on(0, "WaterLow", 1)
        .request(1, event)
        .on(1, event, 2)
        .request(2, event)
        .on(2, event, 3)
        .request(3, event)
        .on(3, event, 0)
        .stay_otherwise()
}

/// AddHotWater, AddColdWater, Stability, and a level sensor that keeps
/// requesting WaterLow so the taps have something to wait for.
pub fn water_tap_objects() -> Vec<ClassicScenario> {
    vec![
        tap("AddHotWater", "AddHot"),
        tap("AddColdWater", "AddCold"),
        ClassicScenario::new("Stability", &EVENTS, 2)
            .block(0, "AddCold")
            .on(0, "AddHot", 1)
            .block(1, "AddHot")
            .on(1, "AddCold", 0)
            .stay_otherwise(),
        ClassicScenario::new("WaterLevelSensor", &EVENTS, 1)
            .request(0, "WaterLow")
            .stay_otherwise(),
    ]
}

fn domain() -> (VariableRegistry, EventDomain) {
    let mut registry = VariableRegistry::new();
    let domain = EventDomain::declare(&mut registry, &EVENTS).expect("fresh registry");
    (registry, domain)
}

pub(super) fn model() -> Result<Model, ModelError> {
    let (registry, domain) = domain();
    Ok(Model {
        name: "water-tap-classic".into(),
        rule: "traditional".into(),
        scenarios: encode_traditional(&water_tap_objects(), &domain)?,
        registry,
        domain: Some(domain),
        plant: None,
    })
}

pub(super) fn explicit() -> Result<ExplicitModel, ModelError> {
    let (registry, domain) = domain();
    let mut objects = water_tap_objects()
        .iter()
        .map(|o| classic_to_extended(o, &domain, &registry))
        .collect::<Result<Vec<_>, _>>()?;
    objects.push(domain_object(&domain, &registry));
    Ok(ExplicitModel {
        objects,
        rule: Box::new(TraditionalRule::new(domain)),
        registry,
    })
}
