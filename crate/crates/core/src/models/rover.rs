//! Differential-drive leader/follower rovers and the follower's controller.
//!
//! Headings are compass degrees: 0 is north, 90 is east, clockwise
//! positive. `dir_error` is the bearing to the leader minus the follower's
//! heading, so a positive value means the leader is to the right and a
//! right turn (`pL > pR`) closes it.

use std::cell::RefCell;
use std::rc::Rc;

use serde_json::json;

use super::{decimal, fixed6, parse_setting, to_f64, Model, ModelError, Plant};
use crate::engine::{constant, FnScenario, StepOutcome};
use crate::formula::{Assignment, Formula, LinExpr, Rational, VarId, VariableRegistry};
use crate::semantics::Ticket;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LeaderPath {
    Circle,
    FigureEight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderFollowerConfig {
    pub max_power: f64,
    pub close: f64,
    pub far: f64,
    pub very_close: f64,
    pub dt: f64,
    pub wheelbase: f64,
    pub gain: f64,
    pub turn_threshold: f64,
    pub turn_power: f64,
    pub leader_path: LeaderPath,
    pub leader_radius: f64,
    pub leader_speed: f64,
    pub follower_start: Pose,
}

impl Default for LeaderFollowerConfig {
    fn default() -> Self {
        LeaderFollowerConfig {
            max_power: 100.0,
            close: 5.0,
            far: 15.0,
            very_close: 2.0,
            dt: 0.1,
            wheelbase: 1.0,
            gain: 0.02,
            turn_threshold: 3.0,
            turn_power: 40.0,
            leader_path: LeaderPath::Circle,
            leader_radius: 20.0,
            leader_speed: 0.5,
            follower_start: Pose {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
        }
    }
}

impl LeaderFollowerConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let slot = match key {
            "max_power" => &mut self.max_power,
            "close" => &mut self.close,
            "far" => &mut self.far,
            "very_close" => &mut self.very_close,
            "dt" => &mut self.dt,
            "wheelbase" => &mut self.wheelbase,
            "gain" => &mut self.gain,
            "turn_threshold" => &mut self.turn_threshold,
            "turn_power" => &mut self.turn_power,
            "leader_radius" => &mut self.leader_radius,
            "leader_speed" => &mut self.leader_speed,
            "follower_x" => &mut self.follower_start.x,
            "follower_y" => &mut self.follower_start.y,
            "follower_heading" => &mut self.follower_start.heading,
            "leader_path" => {
                self.leader_path = match value {
                    "circle" => LeaderPath::Circle,
                    "figure-eight" => LeaderPath::FigureEight,
                    _ => {
                        return Err(ModelError::InvalidSetting {
                            key: key.into(),
                            value: value.into(),
                        })
                    }
                };
                return Ok(());
            }
            other => {
                return Err(ModelError::UnknownSetting {
                    model: "leader-follower".into(),
                    key: other.into(),
                })
            }
        };
        *slot = parse_setting(key, value)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoverWorld {
    pub follower: Pose,
    pub leader: Pose,
    /// Parameter of the leader along its path.
    pub leader_phase: f64,
    pub dt: f64,
    pub wheelbase: f64,
    pub gain: f64,
    pub path: LeaderPath,
    pub leader_radius: f64,
    pub leader_speed: f64,
}

impl RoverWorld {
    pub fn new(config: &LeaderFollowerConfig) -> Self {
        assert!(config.dt > 0.0, "dt must be positive");
        let mut w = RoverWorld {
            follower: config.follower_start,
            leader: config.follower_start,
            leader_phase: 0.0,
            dt: config.dt,
            wheelbase: config.wheelbase,
            gain: config.gain,
            path: config.leader_path,
            leader_radius: config.leader_radius,
            leader_speed: config.leader_speed,
        };
        w.follower.heading = normalize(w.follower.heading);
        w.leader = w.leader_pose(0.0);
        w
    }

    fn leader_pose(&self, phase: f64) -> Pose {
        let r = self.leader_radius;
        let (x, y, dx, dy) = match self.path {
            Circle => (r * phase.cos(), r * phase.sin(), -phase.sin(), phase.cos()),
            FigureEight => (
                r * phase.sin(),
                r * phase.sin() * phase.cos(),
                phase.cos(),
                (2.0 * phase).cos(),
            ),
        };
        Pose {
            x,
            y,
            heading: normalize(dx.atan2(dy).to_degrees()),
        }
    }
}

use LeaderPath::{Circle, FigureEight};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoverObservation {
    pub dist: f64,
    /// Degrees in (-180, 180].
    pub dir_error: f64,
}

fn normalize(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

fn wrap(deg: f64) -> f64 {
    let d = normalize(deg);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

pub fn observe(w: &RoverWorld) -> RoverObservation {
    let dx = w.leader.x - w.follower.x;
    let dy = w.leader.y - w.follower.y;
    let dist = dx.hypot(dy);
    if dist == 0.0 {
        return RoverObservation {
            dist,
            dir_error: 0.0,
        };
    }
    let bearing = dx.atan2(dy).to_degrees();
    RoverObservation {
        dist,
        dir_error: wrap(bearing - w.follower.heading),
    }
}

/// One Euler step of the follower's differential drive; the leader moves
/// along its path.
pub fn rover_step(w: &RoverWorld, p_left: f64, p_right: f64) -> Result<RoverWorld, ModelError> {
    for p in [p_left, p_right] {
        if !(-100.0..=100.0).contains(&p) {
            return Err(ModelError::PowerOutOfRange(p));
        }
    }
    let mut next = w.clone();
    let speed = w.gain * (p_left + p_right) / 2.0;
    let turn_rate = (w.gain * (p_left - p_right) / w.wheelbase).to_degrees();
    let h = w.follower.heading.to_radians();
    next.follower.x += speed * h.sin() * w.dt;
    next.follower.y += speed * h.cos() * w.dt;
    next.follower.heading = normalize(w.follower.heading + turn_rate * w.dt);

    let phase_rate = if w.leader_radius > 0.0 {
        w.leader_speed / w.leader_radius
    } else {
        0.0
    };
    next.leader_phase += phase_rate * w.dt;
    next.leader = next.leader_pose(next.leader_phase);
    Ok(next)
}

/// One control tick: what the follower saw and the powers it chose.
#[derive(Clone, Debug, PartialEq)]
pub struct LeaderFollowerTick {
    pub tick: usize,
    pub observation: RoverObservation,
    pub p_left: Rational,
    pub p_right: Rational,
    pub follower: Pose,
    pub leader: Pose,
}

struct RoverPlant {
    world: Rc<RefCell<RoverWorld>>,
    p_left: VarId,
    p_right: VarId,
}

impl Plant for RoverPlant {
    fn apply(&mut self, a: &Assignment) -> Result<(), String> {
        let power = |id| a.real(id).map(to_f64).ok_or("missing wheel power");
        let next = rover_step(
            &self.world.borrow(),
            power(self.p_left)?,
            power(self.p_right)?,
        )
        .map_err(|e| e.to_string())?;
        *self.world.borrow_mut() = next;
        Ok(())
    }

    fn world(&self) -> serde_json::Value {
        let w = self.world.borrow();
        let obs = observe(&w);
        json!({
            "follower": {
                "x": fixed6(w.follower.x),
                "y": fixed6(w.follower.y),
                "heading": fixed6(w.follower.heading),
            },
            "leader": { "x": fixed6(w.leader.x), "y": fixed6(w.leader.y) },
            "dist": fixed6(obs.dist),
            "dir_error": fixed6(obs.dir_error),
        })
    }
}

fn parts(config: &LeaderFollowerConfig) -> Result<(Model, Rc<RefCell<RoverWorld>>), ModelError> {
    let mut registry = VariableRegistry::new();
    let p_left = registry.real_var("pL")?;
    let p_right = registry.real_var("pR")?;
    let world = Rc::new(RefCell::new(RoverWorld::new(config)));
    let pl = move || LinExpr::var(p_left);
    let pr = move || LinExpr::var(p_right);
    let c = config.clone();
    let max = decimal(c.max_power);

    let bounds = constant(
        "bounds",
        Ticket::new().must(Formula::and([
            pl().ge(-max.clone()),
            pl().le(max.clone()),
            pr().ge(-max.clone()),
            pr().le(max.clone()),
        ])),
    );

    let seen = Rc::clone(&world);
    let forward_backward = FnScenario::boxed("forward_backward", move |_| {
        let dist = observe(&seen.borrow()).dist;
        let power = if dist > c.close {
            if dist < c.far {
                c.max_power * (dist - c.close) / (c.far - c.close)
            } else {
                c.max_power
            }
        } else if dist > c.very_close {
            c.max_power * (dist - c.close) / (c.close - c.very_close)
        } else {
            -c.max_power
        };
        let power = decimal(power);
        Ok(crate::engine::Step::Yield(
            Ticket::new()
                .may(pl().eq(power.clone()) & pr().eq(power))
                .wait_for(Formula::True),
        ))
    });

    let seen = Rc::clone(&world);
    let threshold = config.turn_threshold;
    let spin = FnScenario::boxed("spin", move |_| {
        let dir_error = observe(&seen.borrow()).dir_error;
        let ticket = if dir_error.abs() > threshold {
            let turn = if dir_error > 0.0 {
                pl().gt(pr())
            } else {
                pl().lt(pr())
            };
            Ticket::new().may(turn.clone()).must(turn)
        } else {
            Ticket::new()
        };
        Ok(crate::engine::Step::Yield(ticket.wait_for(Formula::True)))
    });

    let turn = decimal(config.turn_power);
    let turnpowers =
        constant(
            "turnpowers",
            Ticket::new().must(pl().ne(pr()).implies(
                (pl().eq(0) & pr().eq(turn.clone())) | (pl().eq(turn.clone()) & pr().eq(0)),
            )),
        );

    let model = Model {
        name: "leader-follower".into(),
        rule: "may-must".into(),
        registry,
        domain: None,
        scenarios: vec![bounds, forward_backward, spin, turnpowers],
        plant: Some(Box::new(RoverPlant {
            world: Rc::clone(&world),
            p_left,
            p_right,
        })),
    };
    Ok((model, world))
}

pub(super) fn model(config: &LeaderFollowerConfig) -> Result<Model, ModelError> {
    parts(config).map(|(m, _)| m)
}

/// Closed-loop simulation for `ticks` control steps.
pub fn run_leader_follower(
    ticks: usize,
    config: &LeaderFollowerConfig,
) -> Result<Vec<LeaderFollowerTick>, ModelError> {
    let (model, world) = parts(config)?;
    let p_left = model.registry.lookup("pL").expect("declared");
    let p_right = model.registry.lookup("pR").expect("declared");
    let (mut engine, plant) = model.into_engine(None)?;
    let mut plant = plant.expect("simulator model");
    let mut log = Vec::with_capacity(ticks);
    for tick in 0..ticks {
        let (observation, follower, leader) = {
            let w = world.borrow();
            (observe(&w), w.follower, w.leader)
        };
        match engine.step_with(|a| plant.apply(a))? {
            StepOutcome::Solved(entry) => log.push(LeaderFollowerTick {
                tick,
                observation,
                p_left: entry.assignment.real(p_left).cloned().expect("real"),
                p_right: entry.assignment.real(p_right).cloned().expect("real"),
                follower,
                leader,
            }),
            StepOutcome::Deadlock => return Err(ModelError::Deadlock(tick)),
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> RoverWorld {
        RoverWorld::new(&LeaderFollowerConfig::default())
    }

    #[test]
    fn equal_powers_drive_straight() {
        let w = world();
        let n = rover_step(&w, 50.0, 50.0).unwrap();
        assert_eq!(n.follower.heading, w.follower.heading);
        assert!(n.follower.y > w.follower.y);
        assert!((n.follower.x - w.follower.x).abs() < 1e-12);
    }

    #[test]
    fn more_left_power_turns_right() {
        let w = world();
        let n = rover_step(&w, 40.0, 0.0).unwrap();
        assert!(n.follower.heading > 0.0 && n.follower.heading < 180.0);
    }

    #[test]
    fn opposite_powers_rotate_in_place() {
        let w = world();
        let n = rover_step(&w, 30.0, -30.0).unwrap();
        assert_eq!((n.follower.x, n.follower.y), (w.follower.x, w.follower.y));
        assert_ne!(n.follower.heading, w.follower.heading);
    }

    #[test]
    fn power_range_enforced() {
        assert_eq!(
            rover_step(&world(), 101.0, 0.0),
            Err(ModelError::PowerOutOfRange(101.0))
        );
    }

    #[test]
    fn observation_geometry() {
        let mut w = world();
        w.follower = Pose {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        };
        w.leader = Pose {
            x: 0.0,
            y: 10.0,
            heading: 0.0,
        };
        assert_eq!(observe(&w).dir_error, 0.0);
        assert_eq!(observe(&w).dist, 10.0);
        w.leader = Pose {
            x: 10.0,
            y: 0.0,
            heading: 0.0,
        };
        assert_eq!(observe(&w).dir_error, 90.0);
        w.leader = Pose {
            x: -10.0,
            y: 0.0,
            heading: 0.0,
        };
        assert_eq!(observe(&w).dir_error, -90.0);
        w.leader = Pose {
            x: 0.0,
            y: -10.0,
            heading: 0.0,
        };
        assert_eq!(observe(&w).dir_error, 180.0);
        w.leader = w.follower;
        assert_eq!(
            observe(&w),
            RoverObservation {
                dist: 0.0,
                dir_error: 0.0
            }
        );
    }

    #[test]
    fn far_leader_means_full_power() {
        let log = run_leader_follower(
            1,
            &LeaderFollowerConfig {
                follower_start: Pose {
                    x: 20.0,
                    y: -30.0,
                    heading: 0.0,
                },
                ..Default::default()
            },
        )
        .unwrap();
        assert!(log[0].observation.dist > 15.0 && log[0].observation.dir_error.abs() <= 3.0);
        assert_eq!(log[0].p_left, crate::formula::rat(100));
        assert_eq!(log[0].p_right, crate::formula::rat(100));
    }
}
