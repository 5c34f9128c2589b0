//! A vehicle lapping a figure-eight track made of two tangent circles.
//!
//! Position is arc length from the tangent point; the track length is
//! `4πR` and the tangent point is passed at `0` and `2πR`. The sharp
//! segments are fixed windows around those two crossings.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::rc::Rc;

use serde_json::json;

use super::{decimal, fixed6, parse_setting, to_f64, Model, ModelError, Plant};
use crate::engine::{constant, FnScenario, Step, StepOutcome};
use crate::formula::{Assignment, Formula, LinExpr, Rational, VarId, VariableRegistry};
use crate::semantics::Ticket;

#[derive(Clone, Debug, PartialEq)]
pub struct PatrolConfig {
    pub radius: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub accel: f64,
    pub curve_cap: f64,
    pub curve_half_width: f64,
    pub hot_speed: f64,
    pub hot_ticks: usize,
    pub cool_cap: f64,
    pub cool_accel: f64,
    pub cool_ticks: usize,
}

impl Default for PatrolConfig {
    fn default() -> Self {
        PatrolConfig {
            radius: 50.0,
            dt: 0.1,
            max_speed: 20.0,
            accel: 2.0,
            curve_cap: 12.0,
            curve_half_width: 20.0,
            hot_speed: 15.0,
            hot_ticks: 100,
            cool_cap: 10.0,
            cool_accel: 0.5,
            cool_ticks: 80,
        }
    }
}

impl PatrolConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        match key {
            "hot_ticks" => self.hot_ticks = parse_setting(key, value)?,
            "cool_ticks" => self.cool_ticks = parse_setting(key, value)?,
            _ => {
                let slot = match key {
                    "radius" => &mut self.radius,
                    "dt" => &mut self.dt,
                    "max_speed" => &mut self.max_speed,
                    "accel" => &mut self.accel,
                    "curve_cap" => &mut self.curve_cap,
                    "curve_half_width" => &mut self.curve_half_width,
                    "hot_speed" => &mut self.hot_speed,
                    "cool_cap" => &mut self.cool_cap,
                    "cool_accel" => &mut self.cool_accel,
                    other => {
                        return Err(ModelError::UnknownSetting {
                            model: "patrol-vehicle".into(),
                            key: other.into(),
                        })
                    }
                };
                *slot = parse_setting(key, value)?;
            }
        }
        Ok(())
    }

    pub fn track_length(&self) -> f64 {
        4.0 * PI * self.radius
    }

    pub fn in_curve(&self, position: f64) -> bool {
        let l = self.track_length();
        let w = self.curve_half_width;
        position < w || position > l - w || (position - l / 2.0).abs() < w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatrolWorld {
    pub position: f64,
    pub speed: Rational,
    /// Speed cap in force for the coming tick.
    pub cap: Rational,
    /// Consecutive ticks above the hot speed.
    pub hot_count: usize,
    /// Cooldown ticks still to serve.
    pub cooldown: usize,
    pub triggered: bool,
}

/// One tick of the patrol run.
#[derive(Clone, Debug, PartialEq)]
pub struct PatrolTick {
    pub tick: usize,
    /// Position seen by the scenarios when choosing this tick's speed.
    pub position: f64,
    pub in_curve: bool,
    pub prev_speed: Rational,
    pub speed: Rational,
    /// Whether this tick was chosen under the cooldown caps.
    pub cooldown: bool,
    /// Whether the overheat timer fired after this tick.
    pub triggered: bool,
}

struct PatrolPlant {
    world: Rc<RefCell<PatrolWorld>>,
    speed: VarId,
    dt: f64,
    length: f64,
}

impl Plant for PatrolPlant {
    fn apply(&mut self, a: &Assignment) -> Result<(), String> {
        let v = a.real(self.speed).cloned().ok_or("missing speed")?;
        if v < Rational::from_integer(0.into()) {
            return Err("negative speed".into());
        }
        let mut w = self.world.borrow_mut();
        w.position = (w.position + to_f64(&v) * self.dt).rem_euclid(self.length);
        w.speed = v;
        Ok(())
    }

    fn world(&self) -> serde_json::Value {
        let w = self.world.borrow();
        json!({
            "position": fixed6(w.position),
            "speed": fixed6(to_f64(&w.speed)),
            "cap": fixed6(to_f64(&w.cap)),
            "cooldown": w.cooldown,
            "triggered": w.triggered,
        })
    }
}

fn min(a: Rational, b: &Rational) -> Rational {
    if &a < b {
        a
    } else {
        b.clone()
    }
}

fn parts(config: &PatrolConfig) -> Result<(Model, Rc<RefCell<PatrolWorld>>), ModelError> {
    let mut registry = VariableRegistry::new();
    let speed = registry.real_var("speed")?;
    let s = move || LinExpr::var(speed);
    let vmax = decimal(config.max_speed);
    let world = Rc::new(RefCell::new(PatrolWorld {
        position: 0.0,
        speed: Rational::from_integer(0.into()),
        cap: vmax.clone(),
        hot_count: 0,
        cooldown: 0,
        triggered: false,
    }));
    let step_up = decimal(config.accel * config.dt);

    let bounds = constant("bounds", Ticket::new().must(s().ge(0)));

    let seen = Rc::clone(&world);
    let up = step_up.clone();
    let accelerate = FnScenario::boxed("accelerate", move |_| {
        let target = min(seen.borrow().speed.clone() + &up, &vmax);
        Ok(Step::Yield(
            Ticket::new().may(s().eq(target)).wait_for(Formula::True),
        ))
    });

    let seen = Rc::clone(&world);
    let cfg = config.clone();
    let curve_cap = decimal(config.curve_cap);
    let up = step_up;
    let curve = FnScenario::boxed("sharp_curve", move |_| {
        let w = seen.borrow();
        Ok(Step::Yield(if cfg.in_curve(w.position) {
            let target = min(w.speed.clone() + &up, &curve_cap);
            Ticket::new()
                .may(s().eq(target))
                .must(s().le(curve_cap.clone()))
                .wait_for(Formula::True)
        } else {
            Ticket::new().wait_for(Formula::True)
        }))
    });

    let seen = Rc::clone(&world);
    let cfg = config.clone();
    let hot = decimal(config.hot_speed);
    let cool_cap = decimal(config.cool_cap);
    let cool_up = decimal(config.cool_accel * config.dt);
    let overheat = FnScenario::boxed("overheat", move |m| {
        let mut w = seen.borrow_mut();
        w.triggered = false;
        if m.is_some() {
            if w.cooldown > 0 {
                w.cooldown -= 1;
            } else {
                w.hot_count = if w.speed > hot { w.hot_count + 1 } else { 0 };
                if w.hot_count >= cfg.hot_ticks {
                    w.hot_count = 0;
                    w.cooldown = cfg.cool_ticks;
                    w.triggered = true;
                }
            }
        }
        Ok(Step::Yield(if w.cooldown > 0 {
            let ceiling = w.speed.clone() + &cool_up;
            let target = min(ceiling.clone(), &cool_cap);
            w.cap = target.clone();
            Ticket::new()
                .may(s().eq(target))
                .must(s().le(cool_cap.clone()) & s().le(ceiling))
                .wait_for(Formula::True)
        } else {
            w.cap = decimal(cfg.max_speed);
            Ticket::new().wait_for(Formula::True)
        }))
    });

    let model = Model {
        name: "patrol-vehicle".into(),
        rule: "may-must".into(),
        registry,
        domain: None,
        scenarios: vec![bounds, accelerate, curve, overheat],
        plant: Some(Box::new(PatrolPlant {
            world: Rc::clone(&world),
            speed,
            dt: config.dt,
            length: config.track_length(),
        })),
    };
    Ok((model, world))
}

pub(super) fn model(config: &PatrolConfig) -> Result<Model, ModelError> {
    parts(config).map(|(m, _)| m)
}

pub fn run_patrol(ticks: usize, config: &PatrolConfig) -> Result<Vec<PatrolTick>, ModelError> {
    let (model, world) = parts(config)?;
    let (mut engine, plant) = model.into_engine(None)?;
    let mut plant = plant.expect("simulator model");
    engine.start()?;
    let mut log = Vec::with_capacity(ticks);
    for tick in 0..ticks {
        let (position, prev_speed, cooldown) = {
            let w = world.borrow();
            (w.position, w.speed.clone(), w.cooldown > 0)
        };
        match engine.step_with(|a| plant.apply(a))? {
            StepOutcome::Solved(_) => {
                let w = world.borrow();
                log.push(PatrolTick {
                    tick,
                    position,
                    in_curve: config.in_curve(position),
                    prev_speed,
                    speed: w.speed.clone(),
                    cooldown,
                    triggered: w.triggered,
                });
            }
            StepOutcome::Deadlock => return Err(ModelError::Deadlock(tick)),
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::ratio;

    #[test]
    fn starts_by_accelerating() {
        let log = run_patrol(
            5,
            &PatrolConfig {
                curve_half_width: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        for (i, t) in log.iter().enumerate() {
            assert_eq!(t.speed, ratio(2 * (i as i64 + 1), 10));
        }
    }

    #[test]
    fn curve_windows() {
        let c = PatrolConfig::default();
        assert!(c.in_curve(0.0));
        assert!(c.in_curve(c.track_length() - 1.0));
        assert!(c.in_curve(c.track_length() / 2.0));
        assert!(!c.in_curve(c.track_length() / 4.0));
    }

    #[test]
    fn unknown_setting() {
        let mut c = PatrolConfig::default();
        assert!(c.set("hot_ticks", "5").is_ok());
        assert_eq!(c.hot_ticks, 5);
        assert!(matches!(
            c.set("wings", "2"),
            Err(ModelError::UnknownSetting { .. })
        ));
    }
}
