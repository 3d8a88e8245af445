//! Demonstration recordings: sample intake rules, segmentation at grasp closures, and
//! validated primitive fitting.

use serde::{Deserialize, Serialize};

use crate::dmp::{fit_dmp, reproduction_rmse, DmpConfig, DmpError, DmpModel, ForcingScaling, Sample, Trajectory};
use crate::library::Anchor;
use crate::motion::MotionFunction;

pub const MIN_SAMPLES: usize = 3;
pub const MAX_DURATION: f64 = 120.0;
pub const MAX_GAP: f64 = 2.0;
pub const MAX_RATE_HZ: f64 = 60.0;
/// Reproduction RMSE bound as a fraction of each dimension's range.
pub const RMSE_FRACTION: f64 = 0.05;
/// Basis functions per second of demonstration, within [`MIN_BASIS`, `MAX_BASIS`].
pub const BASIS_PER_SECOND: f64 = 12.0;
pub const MIN_BASIS: usize = 15;
pub const MAX_BASIS: usize = 120;
/// Step used to replay fitted primitives during validation.
pub const VALIDATION_DT: f64 = 0.002;

/// One streamed teleoperation sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub aperture: f64,
}

impl DemoSample {
    pub fn values(&self) -> Vec<f64> {
        vec![self.x, self.y, self.z, self.aperture]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationRecording {
    pub id: String,
    pub samples: Vec<DemoSample>,
    pub subject_subtask: Option<String>,
    pub proposed_skill_name: Option<String>,
    /// Basic motions of the subject sub-task, replaced once the skill is stored.
    pub replaced_motions: Vec<MotionFunction>,
    pub anchor: Option<Anchor>,
    pub warnings: Vec<String>,
}

impl DemonstrationRecording {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

/// What happened to a streamed sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleDisposition {
    Recorded,
    /// Arrived faster than the rate cap and was skipped.
    Dropped,
    /// Recorded at the nearest reachable point.
    Clamped,
}

/// Sample index ranges `[start, end]` (inclusive, sharing boundary samples) split at
/// the end of each gripper closure, including any hold that follows it. Tails too short to fit merge into the previous
/// segment.
pub fn segment_bounds(samples: &[DemoSample]) -> Vec<(usize, usize)> {
    let n = samples.len();
    let mut cuts = Vec::new();
    let mut i = 1;
    while i < n {
        if samples[i - 1].aperture >= 0.5 && samples[i].aperture < 0.5 {
            let mut j = i;
            while j + 1 < n && samples[j + 1].aperture < samples[j].aperture {
                j += 1;
            }
            // A hold after the closure belongs to the grasp.
            while j + 1 < n && samples[j + 1].values() == samples[j].values() {
                j += 1;
            }
            cuts.push(j);
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let mut bounds = Vec::new();
    let mut start = 0;
    for c in cuts {
        if c + 1 - start >= MIN_SAMPLES && n - c >= MIN_SAMPLES {
            bounds.push((start, c));
            start = c;
        }
    }
    bounds.push((start, n - 1));
    bounds
}

/// Primitive names for `k` segments: `name`, `name_ex`, `name_ex2`, ...
pub fn segment_names(name: &str, k: usize) -> Vec<String> {
    (0..k)
        .map(|i| match i {
            0 => name.to_string(),
            1 => format!("{name}_ex"),
            _ => format!("{name}_ex{i}"),
        })
        .collect()
}

pub fn segment_trajectory(samples: &[DemoSample]) -> Result<Trajectory<f64>, DmpError> {
    let t0 = samples.first().map_or(0.0, |s| s.t);
    Trajectory::new(samples.iter().map(|s| Sample { t: s.t - t0, y: s.values() }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub scaling: ForcingScaling,
    pub rmse: Vec<f64>,
    pub range: Vec<f64>,
    pub endpoint_error: Vec<f64>,
    pub accepted: bool,
}

fn validate(demo: &Trajectory<f64>, model: &DmpModel<f64>) -> FitReport {
    let first = demo.first().y.clone();
    let last = demo.last().y.clone();
    let ranges: Vec<f64> = (0..demo.dim())
        .map(|d| {
            let c = demo.column(d);
            c.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - c.iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .collect();
    let replay = model.rollout(&first, &last, demo.duration(), VALIDATION_DT);
    let (rmse, endpoint) = match &replay {
        Ok(r) => (reproduction_rmse(demo, r), (0..demo.dim()).map(|d| (r.last().y[d] - last[d]).abs()).collect()),
        Err(_) => (vec![f64::INFINITY; demo.dim()], vec![f64::INFINITY; demo.dim()]),
    };
    let accepted = (0..demo.dim()).all(|d| {
        let span = (last[d] - first[d]).abs();
        let end_ok = endpoint[d] <= (1e-2 * span).max(1e-3);
        let shape_ok = ranges[d] < 1e-6 || rmse[d] <= RMSE_FRACTION * ranges[d];
        end_ok && shape_ok
    });
    FitReport { scaling: model.config.scaling, rmse, range: ranges, endpoint_error: endpoint, accepted }
}

/// Fits one segment with the state-relative forcing scale, falling back to the
/// start-relative one when replay does not reproduce the demonstration.
pub fn fit_segment(demo: &Trajectory<f64>) -> Result<(DmpModel<f64>, FitReport), (DmpError, Option<FitReport>)> {
    let mut last_report = None;
    for scaling in [ForcingScaling::GoalMinusState, ForcingScaling::GoalMinusStart] {
        let n_basis = ((BASIS_PER_SECOND * demo.duration()).ceil() as usize).clamp(MIN_BASIS, MAX_BASIS);
        let config = DmpConfig::default().with_basis(n_basis).with_scaling(scaling);
        let model = fit_dmp(demo, &config).map_err(|e| (e, None))?;
        if model.all_degenerate() {
            return Err((DmpError::InvalidConfig("every dimension is stationary"), None));
        }
        let report = validate(demo, &model);
        if report.accepted {
            return Ok((model, report));
        }
        last_report = Some(report);
    }
    Err((DmpError::InvalidRollout("reproduction outside tolerance"), last_report))
}
