//! JSON Lines traces: one record per solved step, then a termination record.
//!
//! ```text
//! {"step":0,"assignment":{"hot":true,"cold":false},"resumed":["three_hot"],"ended":[]}
//! {"termination":"deadlock"}
//! ```
//!
//! Simulator-coupled models add a `"world"` object to each step record.

use std::io::{self, Write};

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::engine::{StepOutcome, Termination, TraceEntry};
use crate::formula::{Assignment, FormulaError, VariableRegistry};
use crate::models::{Model, ModelError};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn step_record(entry: &TraceEntry, registry: &VariableRegistry, world: Option<Value>) -> Value {
    let mut record = Map::new();
    record.insert("step".into(), json!(entry.step));
    record.insert("assignment".into(), entry.assignment.to_json(registry));
    record.insert("resumed".into(), json!(entry.resumed));
    record.insert("ended".into(), json!(entry.ended));
    if let Some(world) = world {
        record.insert("world".into(), world);
    }
    Value::Object(record)
}

pub fn termination_record(t: Termination) -> Value {
    json!({ "termination": t.as_str() })
}

fn termination_from(s: &str) -> Option<Termination> {
    [
        Termination::Deadlock,
        Termination::StepLimit,
        Termination::AllEnded,
    ]
    .into_iter()
    .find(|t| t.as_str() == s)
}

/// A parsed trace line.
#[derive(Clone, Debug, PartialEq)]
pub enum Record {
    Step {
        entry: TraceEntry,
        world: Option<Value>,
    },
    End(Termination),
}

fn names(v: Option<&Value>, key: &str, line: usize) -> Result<Vec<String>, TraceError> {
    let malformed = || TraceError::Malformed {
        line,
        message: format!("`{key}` must be an array of strings"),
    };
    v.and_then(Value::as_array)
        .ok_or_else(malformed)?
        .iter()
        .map(|n| n.as_str().map(str::to_string).ok_or_else(malformed))
        .collect()
}

pub fn parse_record(
    text: &str,
    line: usize,
    registry: &VariableRegistry,
) -> Result<Record, TraceError> {
    let malformed = |message: String| TraceError::Malformed { line, message };
    let value: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("record is not an object".into()))?;
    if let Some(t) = obj.get("termination") {
        let t = t
            .as_str()
            .and_then(termination_from)
            .ok_or_else(|| malformed(format!("unknown termination {t}")))?;
        return Ok(Record::End(t));
    }
    let step = obj
        .get("step")
        .and_then(Value::as_u64)
        .ok_or_else(|| malformed("missing `step`".into()))? as usize;
    let assignment = Assignment::from_json(
        registry,
        obj.get("assignment")
            .ok_or_else(|| malformed("missing `assignment`".into()))?,
    )?;
    Ok(Record::Step {
        entry: TraceEntry {
            step,
            assignment,
            resumed: names(obj.get("resumed"), "resumed", line)?,
            ended: names(obj.get("ended"), "ended", line)?,
        },
        world: obj.get("world").cloned(),
    })
}

pub fn parse_trace(text: &str, registry: &VariableRegistry) -> Result<Vec<Record>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_record(l, i + 1, registry))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSummary {
    pub steps: usize,
    pub termination: Termination,
}

/// Run a catalog model for at most `max_steps` steps, writing its trace.
/// Models with a plant advance it once per solved step.
pub fn run_to_trace(
    model: Model,
    rule: Option<&str>,
    max_steps: usize,
    out: &mut impl Write,
) -> Result<RunSummary, TraceError> {
    let registry = model.registry.clone();
    let (mut engine, mut plant) = model.into_engine(rule)?;
    let mut steps = 0;
    let termination = loop {
        if engine.all_ended() {
            break Termination::AllEnded;
        }
        if steps >= max_steps {
            break Termination::StepLimit;
        }
        let outcome = match plant.as_mut() {
            Some(p) => engine.step_with(|a| p.apply(a)),
            None => engine.step_once(),
        }
        .map_err(ModelError::from)?;
        match outcome {
            StepOutcome::Solved(entry) => {
                let world = plant.as_ref().map(|p| p.world());
                writeln!(out, "{}", step_record(&entry, &registry, world))?;
                steps += 1;
            }
            StepOutcome::Deadlock => break Termination::Deadlock,
        }
    };
    writeln!(out, "{}", termination_record(termination))?;
    Ok(RunSummary { steps, termination })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build;

    #[test]
    fn maymust_trace_round_trips() {
        let model = build("water-tap-maymust").unwrap();
        let registry = model.registry.clone();
        let mut out = Vec::new();
        let summary = run_to_trace(model, None, 20, &mut out).unwrap();
        assert_eq!(summary.termination, Termination::Deadlock);
        let text = String::from_utf8(out).unwrap();
        let records = parse_trace(&text, &registry).unwrap();
        assert_eq!(records.len(), summary.steps + 1);
        assert_eq!(records.last(), Some(&Record::End(Termination::Deadlock)));
        for (line, record) in text.lines().zip(&records) {
            let again = match record {
                Record::Step { entry, world } => step_record(entry, &registry, world.clone()),
                Record::End(t) => termination_record(*t),
            };
            assert_eq!(again.to_string(), line);
        }
    }

    #[test]
    fn simulator_steps_carry_world() {
        let model = build("patrol-vehicle").unwrap();
        let registry = model.registry.clone();
        let mut out = Vec::new();
        run_to_trace(model, None, 3, &mut out).unwrap();
        let records = parse_trace(std::str::from_utf8(&out).unwrap(), &registry).unwrap();
        assert!(matches!(&records[0], Record::Step { world: Some(_), .. }));
        assert_eq!(records[3], Record::End(Termination::StepLimit));
    }

    #[test]
    fn malformed_lines() {
        let r = VariableRegistry::new();
        assert!(parse_record("[1]", 1, &r).is_err());
        assert!(parse_record(r#"{"termination":"later"}"#, 1, &r).is_err());
        assert!(parse_record(
            r#"{"step":0,"assignment":{},"resumed":[1],"ended":[]}"#,
            1,
            &r
        )
        .is_err());
    }
}
