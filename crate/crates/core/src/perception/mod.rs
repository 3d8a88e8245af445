//! From pixel detections to labeled world-frame objects and obstacle reports.

mod camera;
mod detector;
mod labeling;
mod obstacles;
mod transform;

pub use camera::{CameraError, CameraIntrinsics, PixelDetection};
pub use detector::{detect, DetectorConfig};
pub use labeling::{make_label, sort_and_label, LabeledObject, LateralAxis, LateralAxisError};
pub use obstacles::{identify_obstacles, DetectionTriangle, ObstacleError, ObstacleReport, BOUNDARY_TOLERANCE};
pub use transform::{RigidTransform, TransformError, ORTHONORMAL_TOLERANCE};

use crate::geom::Vec3;
use crate::scene::Camera;

/// Back-projects every detection into the world and labels the result.
pub fn localize(
    detections: &[PixelDetection],
    camera: &Camera,
    axis: LateralAxis,
) -> Result<Vec<LabeledObject<f64>>, CameraError> {
    let mut world = Vec::with_capacity(detections.len());
    for d in detections {
        let p_c = d.backproject(&camera.intrinsics)?;
        world.push((d.name.clone(), camera.extrinsics.to_world(&p_c)));
    }
    Ok(sort_and_label(&world, axis))
}

/// Labeled ground truth, as a noiseless detector would report it.
pub fn ground_truth(scene: &crate::scene::Scene) -> Vec<LabeledObject<f64>> {
    let truth: Vec<(String, Vec3<f64>)> = scene.objects.iter().map(|o| (o.name.clone(), o.position)).collect();
    sort_and_label(&truth, scene.lateral_axis)
}
