//! Ready-to-run scenario sets for the example models, plus the two
//! kinematic simulators that the control models are coupled to.

mod classic;
mod pitfall;
mod static_models;
mod water_tap;

pub mod patrol;
pub mod rover;

use thiserror::Error;

use crate::engine::{Engine, EngineError, Scenario};
use crate::formal::{EventDomain, ExtendedScenario, FormalError};
use crate::formula::{Assignment, FormulaError, Rational, VariableRegistry};
use crate::semantics::{rule_by_name, CompositionRule, RuleError};

pub use classic::water_tap_objects;

/// Catalog names with the rule each model is written for.
pub const CATALOG: [(&str, &str); 8] = [
    ("water-tap-classic", "traditional"),
    ("water-tap-maymust", "may-must"),
    ("water-tap-temps", "may-must"),
    ("drone", "conjunction"),
    ("package-manager", "hard-soft"),
    ("maymust-pitfall", "may-must"),
    ("leader-follower", "may-must"),
    ("patrol-vehicle", "may-must"),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` has no setting `{key}`")]
    UnknownSetting { model: String, key: String },
    #[error("invalid value `{value}` for `{key}`")]
    InvalidSetting { key: String, value: String },
    #[error("wheel power {0} outside [-100, 100]")]
    PowerOutOfRange(f64),
    #[error("simulation deadlocked at tick {0}")]
    Deadlock(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Formal(#[from] FormalError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// The simulated environment of a control model.
pub trait Plant {
    /// Advance one tick under the chosen assignment.
    fn apply(&mut self, a: &Assignment) -> Result<(), String>;

    /// World state as JSON, with reals as fixed six-digit decimal strings.
    fn world(&self) -> serde_json::Value;
}

pub struct Model {
    pub name: String,
    pub rule: String,
    pub registry: VariableRegistry,
    pub domain: Option<EventDomain>,
    pub scenarios: Vec<Box<dyn Scenario>>,
    pub plant: Option<Box<dyn Plant>>,
}

impl Model {
    pub fn composition_rule(
        &self,
        name: Option<&str>,
    ) -> Result<Box<dyn CompositionRule>, RuleError> {
        rule_by_name(name.unwrap_or(&self.rule), self.domain.as_ref())
    }

    /// Engine for the model's scenarios, and its plant if it has one.
    pub fn into_engine(
        self,
        rule: Option<&str>,
    ) -> Result<(Engine, Option<Box<dyn Plant>>), ModelError> {
        let rule = self.composition_rule(rule)?;
        Ok((Engine::new(self.scenarios, rule, self.registry), self.plant))
    }
}

pub fn build(name: &str) -> Result<Model, ModelError> {
    build_with(name, &[])
}

/// Build a catalog model with `key=value` settings applied to its config.
pub fn build_with(name: &str, settings: &[(String, String)]) -> Result<Model, ModelError> {
    let reject = |settings: &[(String, String)]| match settings.first() {
        Some((key, _)) => Err(ModelError::UnknownSetting {
            model: name.to_string(),
            key: key.clone(),
        }),
        None => Ok(()),
    };
    match name {
        "leader-follower" => {
            let mut config = rover::LeaderFollowerConfig::default();
            for (k, v) in settings {
                config.set(k, v)?;
            }
            Ok(rover::model(&config)?)
        }
        "patrol-vehicle" => {
            let mut config = patrol::PatrolConfig::default();
            for (k, v) in settings {
                config.set(k, v)?;
            }
            Ok(patrol::model(&config)?)
        }
        other => {
            reject(settings)?;
            match other {
                "water-tap-classic" => classic::model(),
                "water-tap-maymust" => water_tap::maymust(),
                "water-tap-temps" => water_tap::temps(),
                "drone" => static_models::drone(),
                "package-manager" => static_models::package_manager(),
                "maymust-pitfall" => pitfall::model(),
                unknown => Err(ModelError::UnknownModel(unknown.to_string())),
            }
        }
    }
}

/// A boolean model written out as explicit transition systems, for the
/// enumeration oracle.
pub struct ExplicitModel {
    pub objects: Vec<ExtendedScenario>,
    pub rule: Box<dyn CompositionRule>,
    pub registry: VariableRegistry,
}

pub fn explicit(name: &str) -> Result<ExplicitModel, ModelError> {
    match name {
        "water-tap-classic" => classic::explicit(),
        "water-tap-maymust" => water_tap::explicit(),
        "package-manager" => static_models::package_manager_explicit(),
        "maymust-pitfall-boolean" => pitfall::boolean_explicit("may-must"),
        "maymust-pitfall-boolean-partitioned" => pitfall::boolean_explicit("partitioned"),
        other => Err(ModelError::UnknownModel(other.to_string())),
    }
}

/// `x` rounded to six decimal places, as an exact rational.
pub fn decimal(x: f64) -> Rational {
    Rational::new(((x * 1e6).round() as i64).into(), 1_000_000i64.into())
}

/// Fixed six-digit rendering without a negative zero.
pub fn fixed6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("finite rational")
}

fn parse_setting<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ModelError> {
    value.parse().map_err(|_| ModelError::InvalidSetting {
        key: key.to_string(),
        value: value.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_builds() {
        for (name, rule) in CATALOG {
            let m = build(name).unwrap();
            assert_eq!(m.rule, rule);
            assert_eq!(m.name, name);
        }
        assert!(matches!(build("nope"), Err(ModelError::UnknownModel(_))));
    }

    #[test]
    fn settings_are_checked() {
        let bad = [("speed".to_string(), "1".to_string())];
        assert!(matches!(
            build_with("drone", &bad),
            Err(ModelError::UnknownSetting { .. })
        ));
        let bad_value = [("far".to_string(), "x".to_string())];
        assert!(matches!(
            build_with("leader-follower", &bad_value),
            Err(ModelError::InvalidSetting { .. })
        ));
    }

    #[test]
    fn decimals() {
        assert_eq!(decimal(0.1), crate::formula::ratio(1, 10));
        assert_eq!(fixed6(-0.0000001), "0.000000");
        assert_eq!(fixed6(2.5), "2.500000");
    }
}
