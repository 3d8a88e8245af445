//! Checks shared by the integration suites and the acceptance runner. Each returns a
//! one-line summary on success and the first counterexample on failure.
#![allow(dead_code)]

pub mod session;

use hrc_core::dmp::{self, DmpConfig, DmpModel, Sample, Trajectory};
use hrc_core::geom::{Mat3, Vec3};
use hrc_core::perception::{
    identify_obstacles, sort_and_label, CameraIntrinsics, DetectionTriangle, LabeledObject, LateralAxis, ObstacleReport,
    RigidTransform,
};
use nalgebra::{Isometry3, Matrix3, Point2, Point3, Translation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- movement primitives

/// Goal tolerance for a rollout from `y0` to `g`.
pub fn goal_tolerance(y0: f64, g: f64) -> f64 {
    (1e-2 * (g - y0).abs()).max(1e-3)
}

pub fn random_model(rng: &mut ChaCha8Rng, dims: usize) -> DmpModel<f64> {
    let tau = rng.random_range(0.5..3.0);
    let mut m = DmpModel::zero(DmpConfig { tau, ..DmpConfig::default() }, dims).unwrap();
    for w in m.weights.iter_mut().flatten() {
        *w = rng.random_range(-100.0..100.0);
    }
    m
}

pub fn goal_convergence(n_models: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for k in 0..n_models {
        let dims = rng.random_range(1..=3);
        let m = random_model(&mut rng, dims);
        let y0: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = m.rollout(&y0, &g, m.config.tau, 1e-3).map_err(|e| format!("model {k}: {e}"))?;
        for d in 0..dims {
            let ratio = (r.last().y[d] - g[d]).abs() / goal_tolerance(y0[d], g[d]);
            worst = worst.max(ratio);
            if ratio > 1.0 {
                return Err(format!("model {k} dim {d}: |y(T) - g| = {:.3e}", (r.last().y[d] - g[d]).abs()));
            }
        }
    }
    Ok(format!("{n_models} models, worst error {:.1}% of tolerance", 100.0 * worst))
}

pub type Profile = fn(f64) -> f64;

/// Smooth rest-to-rest profiles on [0, 1].
pub const PROFILES: [(&str, Profile); 3] = [
    ("min-jerk", |s| s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)),
    ("cubic", |s| s * s * (3.0 - 2.0 * s)),
    ("septic", |s| s.powi(4) * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s.powi(3))),
];

pub fn profile_demo(profile: Profile, y0: &[f64], g: &[f64], duration: f64, hz: f64) -> Trajectory<f64> {
    let n = (duration * hz).round() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = duration * k as f64 / n as f64;
            let s = profile(t / duration);
            Sample { t, y: y0.iter().zip(g).map(|(a, b)| a + (b - a) * s).collect() }
        })
        .collect();
    Trajectory::new(samples).unwrap()
}

pub fn fit_reproduce(n_demos: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for k in 0..n_demos {
        let (name, profile) = PROFILES[k % PROFILES.len()];
        let dims = rng.random_range(1..=3);
        let y0: Vec<f64> = (0..dims).map(|_| rng.random_range(-0.5..0.5)).collect();
        let g: Vec<f64> = y0.iter().map(|a| a + rng.random_range(0.05..0.6) * if rng.random() { 1.0 } else { -1.0 }).collect();
        let duration = rng.random_range(0.5..4.0);
        let demo = profile_demo(profile, &y0, &g, duration, 100.0);
        let m = dmp::fit_dmp(&demo, &DmpConfig::default()).map_err(|e| format!("demo {k}: {e}"))?;
        if m.n_basis() != 15 {
            return Err(format!("demo {k}: fitted with {} basis functions", m.n_basis()));
        }
        let replay = m.rollout(&y0, &g, m.config.tau, 1e-3).map_err(|e| format!("demo {k}: {e}"))?;
        for (d, rmse) in dmp::reproduction_rmse(&demo, &replay).into_iter().enumerate() {
            let frac = rmse / (g[d] - y0[d]).abs();
            worst = worst.max(frac);
            if frac > 0.05 {
                return Err(format!("demo {k} ({name}, {duration:.2} s) dim {d}: RMSE {:.2}% of range", 100.0 * frac));
            }
        }
    }
    Ok(format!("{n_demos} demos, worst RMSE {:.2}% of range", 100.0 * worst))
}

pub fn constant_weight_normalization(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let mut m = DmpModel::<f64>::zero(DmpConfig::default().with_basis(rng.random_range(2..40)), 1).unwrap();
        let c = rng.random_range(-100.0..100.0);
        m.weights[0].iter_mut().for_each(|w| *w = c);
        // the phase range a rollout visits; below the last centre the activation floor applies
        let x = rng.random_range(m.config.phase_at(m.config.tau)..=1.0);
        let err = (m.forcing_term(x, 0) - c * x).abs();
        worst = worst.max(err);
        if err > 1e-12 {
            return Err(format!("c = {c}, x = {x}: error {err:.3e}"));
        }
    }
    Ok(format!("{n} cases, worst |f - c·x| = {worst:.1e}"))
}

pub fn zero_weight_fixed_point(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let dims = rng.random_range(1..=7);
        let m = DmpModel::<f64>::zero(DmpConfig { tau: rng.random_range(0.5..3.0), ..DmpConfig::default() }, dims).unwrap();
        let y: Vec<f64> = (0..dims).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r = m.rollout(&y, &y, 2.0, 1e-3).map_err(|e| e.to_string())?;
        for s in r.samples() {
            for (a, b) in s.y.iter().zip(&y) {
                worst = worst.max((a - b).abs());
            }
        }
        if worst > 1e-9 {
            return Err(format!("drift {worst:.3e} from the start/goal {y:?}"));
        }
    }
    Ok(format!("{n} rollouts, worst drift {worst:.1e}"))
}

// ---------------------------------------------------------------------- geometry

pub fn random_rotation(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    UnitQuaternion::from_scaled_axis(axis.normalize() * angle)
}

pub fn to_mat3(r: &Matrix3<f64>) -> Mat3<f64> {
    Mat3 { rows: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])) }
}

pub fn transform_round_trips(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for k in 0..n {
        let q = random_rotation(&mut rng);
        let t = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let ours =
            RigidTransform::new(to_mat3(q.to_rotation_matrix().matrix()), Vec3::new(t.x, t.y, t.z)).map_err(|e| e.to_string())?;
        // camera-to-world transform as an isometry
        let iso = Isometry3::from_parts(Translation3::from(t), q);
        let p = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let pv = Vec3::new(p.x, p.y, p.z);
        let w = ours.to_world(&pv);
        let w_ref = iso.transform_point(&p);
        let back = ours.to_camera(&w);
        let back_inv = ours.inverse().to_world(&w);
        let homo = RigidTransform::from_homogeneous(ours.to_homogeneous()).map_err(|e| e.to_string())?;
        let errs = [
            (w - Vec3::new(w_ref.x, w_ref.y, w_ref.z)).norm(),
            (back - pv).norm(),
            (back_inv - pv).norm(),
            (homo.to_world(&pv) - w).norm(),
        ];
        let e = errs.iter().copied().fold(0.0, f64::max);
        worst = worst.max(e);
        if e > 1e-9 {
            return Err(format!("case {k}: errors {errs:?}"));
        }
    }
    Ok(format!("{n} transforms, worst {worst:.1e}"))
}

pub fn projection_round_trips(n: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for k in 0..n {
        let (fx, fy): (f64, f64) = (rng.random_range(200.0..1500.0), rng.random_range(200.0..1500.0));
        let (cx, cy): (f64, f64) = (rng.random_range(100.0..800.0), rng.random_range(100.0..600.0));
        let cam = CameraIntrinsics::new(fx, fy, cx, cy).map_err(|e| e.to_string())?;
        let kmat = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
        let p = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.1..10.0));
        let (u, v, d) = cam.project(&Vec3::new(p.x, p.y, p.z)).map_err(|e| e.to_string())?;
        let h = kmat * p;
        let pix_err = (u - h.x / h.z).abs().max((v - h.y / h.z).abs());
        let ray = kmat.try_inverse().expect("intrinsics are invertible") * Vector3::new(u, v, 1.0) * d;
        let back = cam.backproject(u, v, d).map_err(|e| e.to_string())?;
        let e = (back - Vec3::new(p.x, p.y, p.z)).norm().max((back - Vec3::new(ray.x, ray.y, ray.z)).norm());
        worst = worst.max(e).max(pix_err * 1e-3);
        if e > 1e-9 || pix_err > 1e-6 {
            return Err(format!("case {k}: point error {e:.3e}, pixel error {pix_err:.3e}"));
        }
    }
    Ok(format!("{n} projections, worst {worst:.1e}"))
}

const CLASSES: [&str; 4] = ["cup", "bottle", "apple", "plate"];
const AXES: [LateralAxis; 4] = [LateralAxis::PosX, LateralAxis::NegX, LateralAxis::PosY, LateralAxis::NegY];

/// Rank of each detection by counting, class order by first appearance.
pub fn brute_force_labels(dets: &[(String, Vec3<f64>)], axis: LateralAxis) -> Vec<(String, usize)> {
    let coord = |p: &Vec3<f64>| match axis {
        LateralAxis::PosX => p.x,
        LateralAxis::NegX => -p.x,
        LateralAxis::PosY => p.y,
        LateralAxis::NegY => -p.y,
    };
    let mut ranked: Vec<(usize, usize, String, usize)> = Vec::new();
    for (i, (name, p)) in dets.iter().enumerate() {
        let first = dets.iter().position(|(n, _)| n == name).unwrap();
        let before = dets
            .iter()
            .enumerate()
            .filter(|(j, (n, q))| n == name && (coord(q) < coord(p) || (coord(q) == coord(p) && *j < i)))
            .count();
        ranked.push((first, before + 1, format!("{name}{}", before + 1), i));
    }
    ranked.sort();
    ranked.into_iter().map(|(_, _, label, i)| (label, i)).collect()
}

pub fn labeling_oracle(n_scenes: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut total = 0;
    for k in 0..n_scenes {
        let n = rng.random_range(0..12);
        // coarse grid so equal coordinates occur
        let dets: Vec<(String, Vec3<f64>)> = (0..n)
            .map(|_| {
                let name = CLASSES[rng.random_range(0..CLASSES.len())].to_string();
                let p = Vec3::new(rng.random_range(0..8) as f64 * 0.1, rng.random_range(-4..4) as f64 * 0.1, 0.7);
                (name, p)
            })
            .collect();
        let axis = AXES[k % AXES.len()];
        let got = sort_and_label(&dets, axis);
        let want = brute_force_labels(&dets, axis);
        let got_pairs: Vec<(String, Vec3<f64>)> = got.iter().map(|o| (o.label.clone(), o.position_world)).collect();
        let want_pairs: Vec<(String, Vec3<f64>)> = want.iter().map(|(l, i)| (l.clone(), dets[*i].1)).collect();
        if got_pairs != want_pairs {
            return Err(format!("scene {k} ({axis}): got {got_pairs:?}, want {want_pairs:?}"));
        }
        total += n;
    }
    Ok(format!("{n_scenes} scenes, {total} detections"))
}

/// Membership by barycentric coordinates of an equilateral triangle whose apex is the
/// base and whose far side is centred on the target.
pub fn barycentric_contains(base: (f64, f64), target: (f64, f64), p: (f64, f64)) -> bool {
    let apex = Point2::new(base.0, base.1);
    let m = Point2::new(target.0, target.1);
    let dir = m - apex;
    let normal = nalgebra::Vector2::new(-dir.y, dir.x) / 3f64.sqrt();
    let (b, c) = (m + normal, m - normal);
    let t = nalgebra::Matrix2::from_columns(&[b - apex, c - apex]);
    let l = t.try_inverse().expect("non-degenerate triangle") * (Point2::new(p.0, p.1) - apex);
    l.x >= 0.0 && l.y >= 0.0 && l.x + l.y <= 1.0
}

pub fn triangle_oracle(n_triangles: usize, points_per: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let mut inside = 0;
    for k in 0..n_triangles {
        let base = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let target = (base.0 + rng.random_range(-2.0..2.0), base.1 + rng.random_range(-2.0..2.0));
        let tri = DetectionTriangle::new(&Vec3::new(base.0, base.1, 0.0), &Vec3::new(target.0, target.1, 0.0))
            .map_err(|e| e.to_string())?;
        let reach = tri.height() * 1.3;
        for _ in 0..points_per {
            let p = (base.0 + rng.random_range(-reach..reach), base.1 + rng.random_range(-reach..reach));
            let want = barycentric_contains(base, target, p);
            if tri.contains(&Vec3::new(p.0, p.1, rng.random_range(0.0..1.0))) != want {
                return Err(format!("triangle {k}: point {p:?} expected inside = {want}"));
            }
            inside += usize::from(want);
        }
    }
    Ok(format!("{} points over {n_triangles} triangles, {inside} inside", n_triangles * points_per))
}

pub fn empty_workspace() -> Check {
    let none: [LabeledObject<f64>; 0] = [];
    let r = identify_obstacles(&Vec3::new(0.7, 0.2, 0.7), &Vec3::zero(), &none, &[]).map_err(|e| e.to_string())?;
    match r {
        ObstacleReport::NoObjects if r.to_string() == "No objects" => Ok("\"No objects\"".into()),
        other => Err(format!("got {other:?}")),
    }
}
