use rand::Rng;

use super::{Vec2, CONTACT_HEIGHT, HOVER_HEIGHT};
use crate::trajectory::Vec3;

pub const N_GRANULES: usize = 20;
pub const GRANULE_RADIUS: f64 = 0.012;
pub const SPOON_RADIUS: f64 = 0.02;
pub const TRAY_CENTER: Vec2 = Vec2::new(0.25, 0.215);
pub const TRAY_RADIUS: f64 = 0.15;
const CLUSTER_RADIUS: f64 = 0.05;
/// Granules closer than this to the spoon rim are dragged along with it.
const WAKE: f64 = 0.02;
/// Drag coupling rate toward the spoon velocity (1/s).
const DRAG_RATE: f64 = 20.0;
/// Velocity damping rate (1/s).
const DAMPING_RATE: f64 = 3.0;
const SEPARATION_ITERS: usize = 2;
/// Positional drift toward the tray center (1/s); the tray is a shallow bowl.
const CREEP_RATE: f64 = 0.5;

pub(super) fn home_effector() -> Vec3 {
    Vec3::new(TRAY_CENTER.x + 0.06, TRAY_CENTER.y, HOVER_HEIGHT)
}

/// Damped disks in a round tray, pushed and dragged by a spoon disk when the
/// spoon is lowered into the tray.
///
/// Only drag and damping change velocities, and both pull them toward the
/// spoon velocity or zero; contacts and the slow drift back to the bowl
/// center act on positions alone. With a still
/// spoon every granule's speed therefore decays monotonically.
#[derive(Debug, Clone, PartialEq)]
pub struct Granules {
    positions: Vec<Vec2>,
    velocities: Vec<Vec2>,
}

impl Granules {
    pub(super) fn new(rng: &mut impl Rng) -> Self {
        let mut positions: Vec<Vec2> = Vec::with_capacity(N_GRANULES);
        let mut guard = 0;
        while positions.len() < N_GRANULES {
            let r = CLUSTER_RADIUS * rng.random_range(0.0f64..1.0).sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let p = TRAY_CENTER + Vec2::new(a.cos(), a.sin()) * r;
            guard += 1;
            // accept overlaps once rejection has clearly stalled
            if guard < 10_000 && positions.iter().any(|q| (p - q).norm() < 2.0 * GRANULE_RADIUS) {
                continue;
            }
            positions.push(p);
        }
        Self {
            velocities: vec![Vec2::zeros(); N_GRANULES],
            positions,
        }
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn velocities(&self) -> &[Vec2] {
        &self.velocities
    }

    /// Centroids of `groups` fixed granule groups (granule `i` belongs to
    /// group `i % groups`).
    pub fn group_centroids(&self, groups: usize) -> Vec<Vec2> {
        let mut sums = vec![Vec2::zeros(); groups];
        let mut counts = vec![0usize; groups];
        for (i, p) in self.positions.iter().enumerate() {
            sums[i % groups] += p;
            counts[i % groups] += 1;
        }
        sums.iter().zip(counts).map(|(s, c)| s / c.max(1) as f64).collect()
    }

    pub fn positional_variance(&self) -> f64 {
        let n = self.positions.len() as f64;
        let mean = self.positions.iter().sum::<Vec2>() / n;
        self.positions.iter().map(|p| (p - mean).norm_squared()).sum::<f64>() / n
    }

    pub(super) fn step(&mut self, ee_before: &Vec3, ee_after: &Vec3, dt: f64) {
        let spoon = Vec2::new(ee_after.x, ee_after.y);
        let spoon_vel = Vec2::new(ee_after.x - ee_before.x, ee_after.y - ee_before.y) / dt;
        let contact = ee_after.z <= CONTACT_HEIGHT;
        let reach = SPOON_RADIUS + GRANULE_RADIUS;

        if contact {
            let k = 1.0 - (-DRAG_RATE * dt).exp();
            for (p, v) in self.positions.iter().zip(self.velocities.iter_mut()) {
                if (p - spoon).norm() < reach + WAKE {
                    *v += (spoon_vel - *v) * k;
                }
            }
        }
        let creep = 1.0 - (-CREEP_RATE * dt).exp();
        for (p, v) in self.positions.iter_mut().zip(&self.velocities) {
            *p += v * dt + (TRAY_CENTER - *p) * creep;
        }
        if contact {
            for p in &mut self.positions {
                let d = *p - spoon;
                let n = d.norm();
                if n < reach {
                    let u = if n > 1e-12 { d / n } else { Vec2::new(1.0, 0.0) };
                    *p = spoon + u * reach;
                }
            }
        }
        for _ in 0..SEPARATION_ITERS {
            for i in 0..N_GRANULES {
                for j in i + 1..N_GRANULES {
                    let d = self.positions[j] - self.positions[i];
                    let n = d.norm();
                    let min = 2.0 * GRANULE_RADIUS;
                    if n < min && n > 1e-12 {
                        let push = d / n * (0.5 * (min - n));
                        self.positions[i] -= push;
                        self.positions[j] += push;
                    }
                }
            }
        }
        let wall = TRAY_RADIUS - GRANULE_RADIUS;
        for (p, v) in self.positions.iter_mut().zip(self.velocities.iter_mut()) {
            let d = *p - TRAY_CENTER;
            let n = d.norm();
            if n > wall {
                let u = d / n;
                *p = TRAY_CENTER + u * wall;
                let outward = v.dot(&u);
                if outward > 0.0 {
                    *v -= u * outward;
                }
            }
        }
        let damp = (-DAMPING_RATE * dt).exp();
        for v in &mut self.velocities {
            *v *= damp;
        }
    }
}
