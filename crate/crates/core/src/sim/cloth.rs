use rand::Rng;

use super::{Vec2, Workspace, CONTACT_HEIGHT};
use crate::trajectory::Vec3;

const HALF_EXTENT: Vec2 = Vec2::new(0.08, 0.06);
const CORNER_CENTER: Vec2 = Vec2::new(0.10, 0.08);

/// Rigid rectangular cloth patch. It translates with the effector whenever
/// the effector presses on it (low enough and over the patch).
#[derive(Debug, Clone, PartialEq)]
pub struct Cloth {
    center: Vec2,
    points: Vec<Vec2>,
}

/// Corners and edge midpoints, counter-clockwise from the lower left.
fn offsets() -> [Vec2; 8] {
    let (hx, hy) = (HALF_EXTENT.x, HALF_EXTENT.y);
    [
        Vec2::new(-hx, -hy),
        Vec2::new(0.0, -hy),
        Vec2::new(hx, -hy),
        Vec2::new(hx, 0.0),
        Vec2::new(hx, hy),
        Vec2::new(0.0, hy),
        Vec2::new(-hx, hy),
        Vec2::new(-hx, 0.0),
    ]
}

impl Cloth {
    pub(super) fn at_corner(rng: &mut impl Rng) -> Self {
        let jitter = Vec2::new(rng.random_range(-0.005..0.005), rng.random_range(-0.005..0.005));
        Self::at(CORNER_CENTER + jitter)
    }

    fn at(center: Vec2) -> Self {
        Self {
            center,
            points: offsets().iter().map(|o| center + o).collect(),
        }
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn in_contact(&self, ee: &Vec3) -> bool {
        ee.z <= CONTACT_HEIGHT
            && (ee.x - self.center.x).abs() <= HALF_EXTENT.x
            && (ee.y - self.center.y).abs() <= HALF_EXTENT.y
    }

    pub(super) fn step(&mut self, ee_before: &Vec3, ee_after: &Vec3, ws: &Workspace) {
        if !self.in_contact(ee_before) {
            return;
        }
        let moved = self.center + Vec2::new(ee_after.x - ee_before.x, ee_after.y - ee_before.y);
        let center = Vec2::new(
            moved.x.clamp(ws.min.x + HALF_EXTENT.x, ws.max.x - HALF_EXTENT.x),
            moved.y.clamp(ws.min.y + HALF_EXTENT.y, ws.max.y - HALF_EXTENT.y),
        );
        *self = Self::at(center);
    }
}
