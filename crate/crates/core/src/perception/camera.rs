//! Pinhole camera model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("focal lengths must be positive and finite")]
    BadFocalLength,
    #[error("principal point must be finite")]
    BadPrincipalPoint,
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("point is behind the camera")]
    BehindCamera,
}

/// `K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics<T>", into = "RawIntrinsics<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct CameraIntrinsics<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics<T> {
    fx: T,
    fy: T,
    cx: T,
    cy: T,
}

impl<T: Real> TryFrom<RawIntrinsics<T>> for CameraIntrinsics<T> {
    type Error = CameraError;
    fn try_from(r: RawIntrinsics<T>) -> Result<Self, CameraError> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy)
    }
}

impl<T: Real> From<CameraIntrinsics<T>> for RawIntrinsics<T> {
    fn from(k: CameraIntrinsics<T>) -> Self {
        RawIntrinsics { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy }
    }
}

impl<T: Real> CameraIntrinsics<T> {
    /// Rejects non-positive focal lengths, which are exactly the singular `K`.
    pub fn new(fx: T, fy: T, cx: T, cy: T) -> Result<Self, CameraError> {
        if !(fx > T::zero() && fy > T::zero() && fx.is_finite() && fy.is_finite()) {
            return Err(CameraError::BadFocalLength);
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(CameraError::BadPrincipalPoint);
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }

    pub fn fx(&self) -> T {
        self.fx
    }
    pub fn fy(&self) -> T {
        self.fy
    }
    pub fn cx(&self) -> T {
        self.cx
    }
    pub fn cy(&self) -> T {
        self.cy
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        let (o, z) = (T::one(), T::zero());
        [[self.fx, z, self.cx], [z, self.fy, self.cy], [z, z, o]]
    }

    /// `d · K⁻¹ · (u, v, 1)ᵀ`. The z component is `depth` exactly.
    pub fn backproject(&self, u: T, v: T, depth: T) -> Result<Vec3<T>, CameraError> {
        if !(depth > T::zero()) {
            return Err(CameraError::NonPositiveDepth(depth.to_f64_lossy()));
        }
        Ok(Vec3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth))
    }

    /// Pixel coordinates and depth of a camera-frame point.
    pub fn project(&self, p: &Vec3<T>) -> Result<(T, T, T), CameraError> {
        if !(p.z > T::zero()) {
            return Err(CameraError::BehindCamera);
        }
        Ok((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy, p.z))
    }
}

/// One detector output record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelDetection {
    pub name: String,
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    /// `(u_min, v_min, u_max, v_max)`; `(u, v)` is its centre.
    pub bbox: [f64; 4],
    pub confidence: f64,
}

impl PixelDetection {
    pub fn is_valid(&self) -> bool {
        let [u0, v0, u1, v1] = self.bbox;
        let centred = ((u0 + u1) * 0.5 - self.u).abs() < 1e-6 && ((v0 + v1) * 0.5 - self.v).abs() < 1e-6;
        self.depth > 0.0
            && u0 <= self.u
            && self.u <= u1
            && v0 <= self.v
            && self.v <= v1
            && centred
            && (0.0..=1.0).contains(&self.confidence)
    }

    pub fn backproject(&self, k: &CameraIntrinsics<f64>) -> Result<Vec3<f64>, CameraError> {
        k.backproject(self.u, self.v, self.depth)
    }
}
