use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{render, EnvSpec, Observation};
use crate::rng::Stream;

pub const SPEED: f64 = 0.1;
/// Agent–block centre distance at which contact pushes the block.
pub const CONTACT: f64 = 0.1;
const DEFAULT_GOAL: [f64; 2] = [0.5, 0.5];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockState {
    pub agent: [f64; 2],
    pub vel: [f64; 2],
    pub block: [f64; 2],
    pub goal: [f64; 2],
}

fn norm(v: [f64; 2]) -> f64 {
    libm::hypot(v[0], v[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl BlockState {
    pub fn reset(&mut self, spec: &EnvSpec, rng: &mut Stream) {
        loop {
            self.block = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            self.goal = if spec.randomize_goal {
                [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)]
            } else {
                spec.fixed_goal.as_ref().map_or(DEFAULT_GOAL, |g| [g[0], g[1]])
            };
            self.agent = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            if self.distance() >= 0.3 && norm(sub(self.agent, self.block)) >= 2.0 * CONTACT {
                break;
            }
        }
        self.vel = [0.0; 2];
    }

    pub fn distance(&self) -> f64 {
        norm(sub(self.block, self.goal))
    }

    pub fn observe(&self, pixels: bool) -> Observation {
        Observation {
            proprio: vec![self.agent[0], self.agent[1], self.vel[0], self.vel[1]],
            object: self.block.to_vec(),
            pixels: pixels.then(|| render(&[(self.goal, 0.33), (self.block, 0.66), (self.agent, 1.0)])),
            goal: self.goal.to_vec(),
        }
    }

    pub fn step(&mut self, spec: &EnvSpec, exec: &[f64]) -> bool {
        let old = self.agent;
        for i in 0..2 {
            self.agent[i] = (self.agent[i] + SPEED * exec[i]).clamp(-1.0, 1.0);
            self.vel[i] = (self.agent[i] - old[i]) / SPEED;
        }
        let rel = sub(self.block, self.agent);
        let d = norm(rel);
        if d < CONTACT {
            let dir = if d > 1e-12 { [rel[0] / d, rel[1] / d] } else { [exec[0].signum(), 0.0] };
            for i in 0..2 {
                self.block[i] = (self.agent[i] + CONTACT * dir[i]).clamp(-1.0, 1.0);
            }
        }
        self.distance() <= spec.success_tol
    }

    /// Get behind the block (relative to the goal), going around it when
    /// needed, then push straight through.
    pub fn expert(&self, spec: &EnvSpec) -> Vec<f64> {
        let to_goal = sub(self.goal, self.block);
        let dist = norm(to_goal);
        if dist < 1e-12 {
            return vec![0.0, 0.0];
        }
        let d = [to_goal[0] / dist, to_goal[1] / dist];
        let n = [-d[1], d[0]];
        let rel = sub(self.agent, self.block);
        let along = rel[0] * d[0] + rel[1] * d[1];
        let across = rel[0] * n[0] + rel[1] * n[1];
        let target = if along < -0.5 * CONTACT && across.abs() < 0.03 {
            // aligned behind: aim slightly inside the contact radius on the far side
            let push = (dist + 0.02).min(SPEED);
            [self.agent[0] + push * d[0] - 0.5 * across * n[0], self.agent[1] + push * d[1] - 0.5 * across * n[1]]
        } else if along < -0.5 * CONTACT {
            // behind but off-axis: slide sideways onto the push line
            let back = -1.3 * CONTACT;
            [self.block[0] + back * d[0], self.block[1] + back * d[1]]
        } else {
            // in front or beside: go around on the near side
            let side = if across >= 0.0 { 1.0 } else { -1.0 };
            let r = 1.6 * CONTACT;
            if along > -0.2 * CONTACT && across.abs() < 1.5 * CONTACT {
                [self.block[0] + side * r * n[0], self.block[1] + side * r * n[1]]
            } else {
                [self.block[0] - r * d[0] + side * 0.5 * r * n[0], self.block[1] - r * d[1] + side * 0.5 * r * n[1]]
            }
        };
        (0..2)
            .map(|i| ((target[i] - self.agent[i]) / SPEED).clamp(spec.action_low, spec.action_high))
            .collect()
    }
}
