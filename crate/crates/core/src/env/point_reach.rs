use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{render, EnvSpec, Observation};
use crate::rng::Stream;

/// Displacement per unit action.
pub const SPEED: f64 = 0.1;
const DEFAULT_GOAL: [f64; 2] = [0.5, 0.5];
const MIN_START_DIST: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointState {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub goal: [f64; 2],
}

impl PointState {
    pub fn reset(&mut self, spec: &EnvSpec, rng: &mut Stream) {
        self.goal = if spec.randomize_goal {
            [rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8)]
        } else {
            spec.fixed_goal.as_ref().map_or(DEFAULT_GOAL, |g| [g[0], g[1]])
        };
        loop {
            self.pos = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if self.distance() >= MIN_START_DIST {
                break;
            }
        }
        self.vel = [0.0; 2];
    }

    pub fn distance(&self) -> f64 {
        libm::hypot(self.pos[0] - self.goal[0], self.pos[1] - self.goal[1])
    }

    pub fn observe(&self, pixels: bool) -> Observation {
        Observation {
            proprio: vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]],
            object: Vec::new(),
            pixels: pixels.then(|| render(&[(self.goal, 0.5), (self.pos, 1.0)])),
            goal: self.goal.to_vec(),
        }
    }

    /// Returns whether the step solved the task.
    pub fn step(&mut self, spec: &EnvSpec, exec: &[f64]) -> bool {
        let old = self.pos;
        for i in 0..2 {
            self.pos[i] = (self.pos[i] + SPEED * exec[i]).clamp(-1.0, 1.0);
            self.vel[i] = (self.pos[i] - old[i]) / SPEED;
        }
        self.distance() <= spec.success_tol
    }

    /// Proportional law: the action that lands exactly on the goal, clipped.
    pub fn expert(&self, spec: &EnvSpec) -> Vec<f64> {
        (0..2)
            .map(|i| ((self.goal[i] - self.pos[i]) / SPEED).clamp(spec.action_low, spec.action_high))
            .collect()
    }
}
