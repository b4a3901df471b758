use rand::Rng;

use super::Vec2;
use crate::trajectory::Vec3;

pub const N_NODES: usize = 12;
pub const REST_LENGTH: f64 = 0.015;
pub const SPOOL_CENTER: Vec2 = Vec2::new(0.25, 0.215);
pub const SPOOL_RADIUS: f64 = 0.03;
/// Nodes reported as keypoints; the held end is left out.
const KEYPOINT_NODES: [usize; 8] = [3, 4, 5, 6, 7, 8, 9, 10];
const MAX_ITERS: usize = 50;

pub(super) fn home_effector() -> Vec3 {
    Vec3::new(SPOOL_CENTER.x + 0.10, SPOOL_CENTER.y, 0.01)
}

/// Inextensible chain tied to a free-spinning ring on the spool. The last
/// node is held by the effector; the tie point slides along the ring so the
/// rope can be swung around the spool indefinitely.
///
/// Each step solves the chain with forward/backward reaching passes. Every
/// node is placed exactly one rest length from its predecessor and outside
/// the spool, so spacing is exact and the rope never leaves a disk of radius
/// `SPOOL_RADIUS + (N_NODES - 1) * REST_LENGTH` around the spool.
#[derive(Debug, Clone, PartialEq)]
pub struct Rope {
    nodes: Vec<Vec2>,
}

fn dir(v: Vec2, fallback: Vec2) -> Vec2 {
    let n = v.norm();
    if n > 1e-12 {
        v / n
    } else {
        fallback
    }
}

/// Point at distance `REST_LENGTH` from `from` in the direction of `toward`,
/// moved onto the spool rim if it would fall inside the spool.
fn place(from: Vec2, toward: Vec2) -> Vec2 {
    let d = dir(toward - from, dir(from - SPOOL_CENTER, Vec2::new(1.0, 0.0)));
    let p = from + d * REST_LENGTH;
    if (p - SPOOL_CENTER).norm() >= SPOOL_RADIUS {
        return p;
    }
    // intersect circle(from, REST_LENGTH) with the spool rim, keep the
    // intersection closest to the proposal
    let cf = from - SPOOL_CENTER;
    let dist = cf.norm().max(1e-12);
    let u = cf / dist;
    let a = (dist * dist + SPOOL_RADIUS * SPOOL_RADIUS - REST_LENGTH * REST_LENGTH) / (2.0 * dist);
    let h = (SPOOL_RADIUS * SPOOL_RADIUS - a * a).max(0.0).sqrt();
    let base = SPOOL_CENTER + u * a;
    let perp = Vec2::new(-u.y, u.x);
    let (c1, c2) = (base + perp * h, base - perp * h);
    if (c1 - p).norm() <= (c2 - p).norm() {
        c1
    } else {
        c2
    }
}

impl Rope {
    pub(super) fn new(ee: &Vec3, rng: &mut impl Rng) -> Self {
        let mut nodes = Vec::with_capacity(N_NODES);
        let mut angle: f64 = rng.random_range(-0.3..0.3);
        nodes.push(SPOOL_CENTER + Vec2::new(angle.cos(), angle.sin()) * SPOOL_RADIUS);
        for _ in 1..N_NODES {
            angle += rng.random_range(-0.6..0.6);
            let prev = *nodes.last().expect("non-empty");
            nodes.push(place(prev, prev + Vec2::new(angle.cos(), angle.sin())));
        }
        let mut rope = Self { nodes };
        rope.step(ee);
        rope
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn keypoint_nodes(&self) -> Vec<Vec2> {
        KEYPOINT_NODES.iter().map(|&i| self.nodes[i]).collect()
    }

    pub(super) fn step(&mut self, ee: &Vec3) {
        let grip = Vec2::new(ee.x, ee.y);
        let last = N_NODES - 1;
        for _ in 0..MAX_ITERS {
            let before = self.nodes.clone();
            // backward pass from the effector
            self.nodes[last] = grip;
            for i in (1..last).rev() {
                self.nodes[i] = place(self.nodes[i + 1], self.nodes[i]);
            }
            // forward pass from the ring
            let ring_dir = dir(self.nodes[1] - SPOOL_CENTER, Vec2::new(1.0, 0.0));
            self.nodes[0] = SPOOL_CENTER + ring_dir * SPOOL_RADIUS;
            for i in 1..N_NODES {
                self.nodes[i] = place(self.nodes[i - 1], self.nodes[i]);
            }
            let moved = before
                .iter()
                .zip(&self.nodes)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            if moved < 1e-10 || (self.nodes[last] - grip).norm() < 1e-10 {
                break;
            }
        }
    }
}
