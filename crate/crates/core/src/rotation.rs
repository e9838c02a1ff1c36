use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::mesh::Vec3;

/// A DHF axis: unit direction plus the rotation taking it to `+z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhfAxis {
    pub direction: [f64; 3],
    /// Row-major rotation matrix.
    pub rotation: [f64; 9],
}

impl DhfAxis {
    pub fn new(direction: Vec3) -> Self {
        let d = direction.normalize();
        let r = minimal_rotation(&d);
        DhfAxis {
            direction: [d.x, d.y, d.z],
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
        }
    }

    pub fn from_parts(direction: [f64; 3], rotation: [f64; 9]) -> Self {
        DhfAxis { direction, rotation }
    }

    pub fn direction(&self) -> Vec3 {
        Vec3::from(self.direction)
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.rotation)
    }

    /// World point to the axis frame, `R p`.
    #[inline]
    pub fn to_frame(&self, p: &Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0] * p.x + r[1] * p.y + r[2] * p.z,
            r[3] * p.x + r[4] * p.y + r[5] * p.z,
            r[6] * p.x + r[7] * p.y + r[8] * p.z,
        )
    }

    /// Axis-frame point back to world, `R^T q`.
    #[inline]
    pub fn from_frame(&self, q: &Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0] * q.x + r[3] * q.y + r[6] * q.z,
            r[1] * q.x + r[4] * q.y + r[7] * q.z,
            r[2] * q.x + r[5] * q.y + r[8] * q.z,
        )
    }

    pub fn angle_to(&self, other: &DhfAxis) -> f64 {
        self.direction().dot(&other.direction()).clamp(-1.0, 1.0).acos()
    }
}

/// Rodrigues rotation about `d x z` taking the unit vector `d` to `+z`.
///
/// For `d = -z` the rotation is 180 degrees about `+x`.
pub fn minimal_rotation(d: &Vec3) -> Matrix3<f64> {
    let k = Vec3::new(d.y, -d.x, 0.0); // d x z
    let c = d.z;
    let s2 = k.norm_squared();
    if s2 == 0.0 {
        return if c > 0.0 {
            Matrix3::identity()
        } else {
            Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
        };
    }
    // 1/(1+c) = (1-c)/s^2 avoids cancellation near the antipode.
    let factor = if c >= 0.0 { 1.0 / (1.0 + c) } else { (1.0 - c) / s2 };
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx + kx * kx * factor
}
