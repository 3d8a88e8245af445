//! Rigid camera-to-world transforms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Mat3, Vec3};
use crate::scalar::Real;

pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("rotation is not orthonormal (error {0:e})")]
    NotOrthonormal(f64),
    #[error("rotation is a reflection (det {0})")]
    NotProper(f64),
    #[error("homogeneous matrix bottom row must be [0, 0, 0, 1]")]
    BadHomogeneousRow,
    #[error("translation must be finite")]
    NonFinite,
}

/// `P_w = R · P_c + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[T; 4]; 4]", into = "[[T; 4]; 4]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct RigidTransform<T> {
    rotation: Mat3<T>,
    translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Result<Self, TransformError> {
        let err = rotation.orthonormality_error();
        if !(err <= T::lit(ORTHONORMAL_TOLERANCE)) {
            return Err(TransformError::NotOrthonormal(err.to_f64_lossy()));
        }
        let det = rotation.det();
        if !((det - T::one()).abs() <= T::lit(ORTHONORMAL_TOLERANCE)) {
            return Err(TransformError::NotProper(det.to_f64_lossy()));
        }
        if !translation.is_finite() {
            return Err(TransformError::NonFinite);
        }
        Ok(RigidTransform { rotation, translation })
    }

    pub fn identity() -> Self {
        RigidTransform { rotation: Mat3::identity(), translation: Vec3::zero() }
    }

    pub fn rotation(&self) -> &Mat3<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3<T> {
        &self.translation
    }

    pub fn to_world(&self, p_c: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p_c) + self.translation
    }

    /// `Rᵀ · (P_w − t)`.
    pub fn to_camera(&self, p_w: &Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(&(*p_w - self.translation))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -rt.mul_vec(&self.translation) }
    }

    pub fn from_homogeneous(m: [[T; 4]; 4]) -> Result<Self, TransformError> {
        let (z, o) = (T::zero(), T::one());
        if m[3] != [z, z, z, o] {
            return Err(TransformError::BadHomogeneousRow);
        }
        let rotation = Mat3 { rows: [[m[0][0], m[0][1], m[0][2]], [m[1][0], m[1][1], m[1][2]], [m[2][0], m[2][1], m[2][2]]] };
        Self::new(rotation, Vec3::new(m[0][3], m[1][3], m[2][3]))
    }

    pub fn to_homogeneous(&self) -> [[T; 4]; 4] {
        let r = &self.rotation.rows;
        let t = &self.translation;
        let (z, o) = (T::zero(), T::one());
        [[r[0][0], r[0][1], r[0][2], t.x], [r[1][0], r[1][1], r[1][2], t.y], [r[2][0], r[2][1], r[2][2], t.z], [z, z, z, o]]
    }
}

impl<T: Real> TryFrom<[[T; 4]; 4]> for RigidTransform<T> {
    type Error = TransformError;
    fn try_from(m: [[T; 4]; 4]) -> Result<Self, TransformError> {
        Self::from_homogeneous(m)
    }
}

impl<T: Real> From<RigidTransform<T>> for [[T; 4]; 4] {
    fn from(t: RigidTransform<T>) -> Self {
        t.to_homogeneous()
    }
}
