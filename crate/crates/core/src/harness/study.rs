//! Detector-versus-ground-truth discrepancy over a window of frames.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::perception::{detect, DetectorConfig};
use crate::scene::Scene;

pub const STUDY_RATE_HZ: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyStats {
    pub samples: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl DiscrepancyStats {
    fn from_values(mut v: Vec<f64>) -> Result<Self, HarnessError> {
        if v.is_empty() {
            return Err(HarnessError::NoDetections);
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Ok(DiscrepancyStats { samples: n, min: v[0], median, max: v[n - 1] })
    }
}

/// `planar` measures on the ground plane (x, y); `spatial` is the full 3-D distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyStudy {
    pub frames: usize,
    pub planar: DiscrepancyStats,
    pub spatial: DiscrepancyStats,
}

/// Detects the scene at `STUDY_RATE_HZ` for `n_seconds` and compares each back-projected
/// detection with the nearest ground-truth object of the same class.
pub fn perception_discrepancy_study(
    scene: &Scene,
    detector: &DetectorConfig,
    n_seconds: f64,
    seed: u64,
) -> Result<DiscrepancyStudy, HarnessError> {
    if !(n_seconds.is_finite() && n_seconds > 0.0) {
        return Err(HarnessError::BadWindow(format!("{n_seconds} s")));
    }
    let frames = (n_seconds * STUDY_RATE_HZ).round().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut planar, mut spatial) = (Vec::new(), Vec::new());
    for _ in 0..frames {
        for d in detect(scene, detector, &mut rng) {
            let Ok(p_c) = d.backproject(&scene.camera.intrinsics) else { continue };
            let p = scene.camera.extrinsics.to_world(&p_c);
            let nearest = scene.objects_named(&d.name).map(|o| o.position - p).min_by(|a, b| a.norm().total_cmp(&b.norm()));
            if let Some(e) = nearest {
                planar.push(e.x.hypot(e.y));
                spatial.push(e.norm());
            }
        }
    }
    Ok(DiscrepancyStudy {
        frames,
        planar: DiscrepancyStats::from_values(planar)?,
        spatial: DiscrepancyStats::from_values(spatial)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::builtin;

    #[test]
    fn median_of_even_count_averages() {
        let s = DiscrepancyStats::from_values(vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.median, s.max), (1.0, 2.5, 4.0));
    }

    #[test]
    fn window_is_validated() {
        let scene = Scene::from_json(builtin::KITCHEN).unwrap();
        assert!(perception_discrepancy_study(&scene, &DetectorConfig::default(), 0.0, 1).is_err());
        assert_eq!(perception_discrepancy_study(&scene, &DetectorConfig::default(), 5.0, 1).unwrap().frames, 50);
    }
}
