use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{render, EnvSpec, Observation};
use crate::rng::Stream;

pub const GRID: usize = 9;

/// `#` wall, `.` floor; row index is `y`.
pub const WALLS: [&str; GRID] = [
    "#########",
    "#...#...#",
    "#.......#",
    "#...#...#",
    "##.###.##",
    "#...#...#",
    "#.......#",
    "#...#...#",
    "#########",
];

/// Moves for action components 0..4: up, right, down, left.
const MOVES: [(i32, i32); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
const DEFAULT_GOAL: (i32, i32) = (7, 7);

pub fn is_free(x: i32, y: i32) -> bool {
    (0..GRID as i32).contains(&x) && (0..GRID as i32).contains(&y) && WALLS[y as usize].as_bytes()[x as usize] == b'.'
}

/// Shortest-path step counts to `goal` (`None` where unreachable).
pub fn bfs_distances(goal: (i32, i32)) -> Vec<Option<usize>> {
    let mut dist = vec![None; GRID * GRID];
    if !is_free(goal.0, goal.1) {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[goal.1 as usize * GRID + goal.0 as usize] = Some(0);
    queue.push_back(goal);
    while let Some((x, y)) = queue.pop_front() {
        let d = dist[y as usize * GRID + x as usize].unwrap();
        for (dx, dy) in MOVES {
            let (nx, ny) = (x + dx, y + dy);
            if is_free(nx, ny) && dist[ny as usize * GRID + nx as usize].is_none() {
                dist[ny as usize * GRID + nx as usize] = Some(d + 1);
                queue.push_back((nx, ny));
            }
        }
    }
    dist
}

fn norm_coord(c: i32) -> f64 {
    c as f64 / (GRID - 1) as f64 * 2.0 - 1.0
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridState {
    pub cell: (i32, i32),
    pub goal: (i32, i32),
    dist: Vec<Option<usize>>,
}

impl GridState {
    pub fn set_goal(&mut self, goal: (i32, i32)) {
        self.goal = goal;
        self.dist = bfs_distances(goal);
    }

    pub fn reset(&mut self, spec: &EnvSpec, rng: &mut Stream) {
        // start anywhere in the top-left room
        self.cell = (rng.random_range(1..4), rng.random_range(1..4));
        let goal = if spec.randomize_goal {
            loop {
                let g = (rng.random_range(1..8), rng.random_range(1..8));
                if is_free(g.0, g.1) && !(g.0 < 4 && g.1 < 4) {
                    break g;
                }
            }
        } else {
            spec.fixed_goal.as_ref().map_or(DEFAULT_GOAL, |g| (g[0] as i32, g[1] as i32))
        };
        if goal != self.goal || self.dist.is_empty() {
            self.set_goal(goal);
        }
    }

    pub fn distance(&self) -> f64 {
        ((self.cell.0 - self.goal.0).abs() + (self.cell.1 - self.goal.1).abs()) as f64
    }

    pub fn observe(&self, pixels: bool) -> Observation {
        let (ax, ay) = (norm_coord(self.cell.0), norm_coord(self.cell.1));
        let (gx, gy) = (norm_coord(self.goal.0), norm_coord(self.goal.1));
        Observation {
            proprio: vec![ax, ay],
            object: Vec::new(),
            pixels: pixels.then(|| render(&[([gx, gy], 0.5), ([ax, ay], 1.0)])),
            goal: vec![gx, gy],
        }
    }

    pub fn step(&mut self, spec: &EnvSpec, exec: &[f64]) -> bool {
        let k = argmax(exec);
        let (dx, dy) = MOVES[k];
        let (nx, ny) = (self.cell.0 + dx, self.cell.1 + dy);
        if is_free(nx, ny) {
            self.cell = (nx, ny);
        }
        self.distance() < spec.success_tol
    }

    /// One-hot move along a shortest path; ties between equally short
    /// routes are broken at random, so demonstrations cover several routes.
    pub fn expert(&self, spec: &EnvSpec, rng: &mut Stream) -> Vec<f64> {
        let mut a = vec![spec.action_low; 4];
        let here = self.dist_at(self.cell);
        let Some(here) = here else { return vec![0.0; 4] };
        if here == 0 {
            return vec![0.0; 4];
        }
        let best: Vec<usize> = (0..4)
            .filter(|&k| {
                let (dx, dy) = MOVES[k];
                self.dist_at((self.cell.0 + dx, self.cell.1 + dy)) == Some(here - 1)
            })
            .collect();
        let k = best[rng.random_range(0..best.len())];
        a[k] = spec.action_high;
        a
    }

    fn dist_at(&self, c: (i32, i32)) -> Option<usize> {
        if !is_free(c.0, c.1) {
            return None;
        }
        self.dist.get(c.1 as usize * GRID + c.0 as usize).copied().flatten()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
