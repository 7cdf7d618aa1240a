use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};

use super::SimError;

/// Rotation followed by translation, mapping head-frame points to world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: DMat3,
    pub translation: DVec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: Self = Self { rotation: DMat3::IDENTITY, translation: DVec3::ZERO };

    /// Accepts only proper rotations: orthonormal columns and determinant +1.
    pub fn new(rotation: DMat3, translation: DVec3) -> Result<Self, SimError> {
        const TOL: f64 = 1e-6;
        let finite = rotation.to_cols_array().iter().all(|v| v.is_finite()) && translation.is_finite();
        if !finite {
            return Err(SimError::NonRigidTransform);
        }
        let gram = rotation.transpose() * rotation;
        let off = (gram - DMat3::IDENTITY).to_cols_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if off > TOL || (rotation.determinant() - 1.0).abs() > TOL {
            return Err(SimError::NonRigidTransform);
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_yaw(radians: f64) -> Self {
        Self { rotation: DMat3::from_rotation_y(radians), translation: DVec3::ZERO }
    }

    pub fn from_translation(translation: DVec3) -> Self {
        Self { rotation: DMat3::IDENTITY, translation }
    }

    #[inline]
    pub fn apply(&self, p: DVec3) -> DVec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_inverse(&self, p: DVec3) -> DVec3 {
        self.rotation.transpose() * (p - self.translation)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}
