use std::time::Instant;

use hrc_core::harness::{
    emit_report, perception_discrepancy_study, run_experiment, HarnessError, ReportFormat, TaskSuite, TrialSpec,
};
use hrc_core::perception::DetectorConfig;
use hrc_core::scene::builtin;
use hrc_core::Scene;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, Discrete};

#[test]
fn benchmark_identities_hold() {
    let start = Instant::now();
    let exp = run_experiment(&TaskSuite::benchmark().with_seed(7), 23).unwrap();
    let elapsed = start.elapsed();
    print!("{}", emit_report(&exp.report, ReportFormat::Text).unwrap());
    println!("{elapsed:?}");
    assert_eq!(exp.report.rows.len(), 8);
    assert_eq!(exp.report.total().unwrap().trials, 161);
    for row in &exp.report.rows {
        assert!(row.success <= row.feasible, "{row:?}");
        assert!(row.success <= row.executable, "{row:?}");
    }
    assert!(exp.records.iter().all(|r| !r.success || r.executable));
    let csv = emit_report(&exp.report, ReportFormat::Csv).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("Tasks,Num of trials,Executability,Feasibility,Success rate\n"));
}

#[test]
fn noiseless_success_equals_feasibility() {
    let exp = run_experiment(&TaskSuite::benchmark().with_seed(3).with_noise(0.0), 23).unwrap();
    for r in &exp.records {
        assert_eq!(r.success, r.feasible, "{r:?}");
    }
    for row in &exp.report.rows {
        assert_eq!(row.success, row.feasible);
    }
}

#[test]
fn fixed_seed_gives_identical_csv() {
    let suite = TaskSuite::benchmark().with_seed(11);
    let a = emit_report(&run_experiment(&suite, 5).unwrap().report, ReportFormat::Csv).unwrap();
    let b = emit_report(&run_experiment(&suite, 5).unwrap().report, ReportFormat::Csv).unwrap();
    assert_eq!(a, b);
}

#[test]
fn door_tasks_need_a_demonstration() {
    let exp = run_experiment(&TaskSuite::door_contrast().with_noise(0.0), 23).unwrap();
    let cells: Vec<(usize, f64, f64, f64)> =
        exp.report.rows.iter().map(|r| (r.trials, r.executability(), r.feasibility(), r.success_rate())).collect();
    assert_eq!(cells[0], (1, 1.0, 0.0, 0.0));
    assert_eq!(cells[1], (23, 1.0, 1.0, 1.0));
    assert_eq!(cells[2], (1, 1.0, 0.0, 0.0));
    assert_eq!(cells[3], (23, 1.0, 1.0, 1.0));
    let text = emit_report(&exp.report, ReportFormat::Text).unwrap();
    let first = text.lines().nth(1).unwrap().split_whitespace().collect::<Vec<_>>().join(" ");
    assert_eq!(first, "Open oven 1 100.0% 0.0% 0.0%");
}

#[test]
fn suite_file_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("k.json"), builtin::KITCHEN).unwrap();
    let suite = r#"{"tasks":[{"label":"m","task_text":"Open the microwave","scene_file":"k.json","noise":0.0}]}"#;
    std::fs::write(dir.path().join("suite.json"), suite).unwrap();
    let exp = run_experiment(&TaskSuite::load(dir.path().join("suite.json")).unwrap(), 2).unwrap();
    assert_eq!(exp.report.row("m").unwrap().feasible, 2);

    let missing = r#"{"tasks":[{"label":"m","task_text":"Open the microwave","scene_file":"nope.json"}]}"#;
    let err = run_experiment(&TaskSuite::from_json(missing, dir.path()).unwrap(), 1).unwrap_err();
    assert!(matches!(err, HarnessError::Scene { .. }));
    let lib = r#"{"tasks":[{"label":"m","task_text":"Open the oven","dmp_library":"skills"}]}"#;
    let err = run_experiment(&TaskSuite::from_json(lib, dir.path()).unwrap(), 1).unwrap_err();
    assert!(matches!(err, HarnessError::MissingLibrary { .. }));
}

#[test]
fn empty_suite_is_refused() {
    assert!(matches!(run_experiment(&TaskSuite::new(vec![]), 1), Err(HarnessError::EmptySuite)));
}

#[test]
fn study_at_zero_noise_is_exact() {
    let scene = Scene::from_json(builtin::KITCHEN).unwrap();
    let s = perception_discrepancy_study(&scene, &DetectorConfig::noiseless(), 5.0, 1).unwrap();
    assert!(s.planar.max < 1e-9 && s.spatial.max < 1e-9, "{s:?}");
}

#[test]
fn study_respects_the_noise_bounds() {
    let scene = Scene::from_json(builtin::KITCHEN).unwrap();
    for h in [0.002, 0.011, 0.03] {
        let det = DetectorConfig { noise_half_width: h, miss_probability: 0.02 };
        let s = perception_discrepancy_study(&scene, &det, 5.0, 9).unwrap();
        assert!(s.planar.max <= h * 2f64.sqrt() + 1e-9, "{h} {s:?}");
        assert!(s.spatial.max <= h * 3f64.sqrt() + 1e-9, "{h} {s:?}");
        assert!(s.planar.min >= 0.0 && s.planar.median <= s.spatial.median);
    }
}

/// Medians of the two distances of a uniform cube sample, by direct sampling.
fn sampled_medians(h: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut planar, mut spatial) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let [x, y, z]: [f64; 3] = std::array::from_fn(|_| rng.random_range(-h..=h));
        planar.push(x.hypot(y));
        spatial.push((x * x + y * y + z * z).sqrt());
    }
    planar.sort_by(f64::total_cmp);
    spatial.sort_by(f64::total_cmp);
    (planar[n / 2], spatial[n / 2])
}

#[test]
fn study_medians_match_a_sampling_oracle() {
    let h = 0.011;
    let scene = Scene::from_json(builtin::KITCHEN).unwrap();
    let det = DetectorConfig { noise_half_width: h, ..DetectorConfig::default() };
    let s = perception_discrepancy_study(&scene, &det, 60.0, 4).unwrap();
    let (planar, spatial) = sampled_medians(h, 200_000, 5);
    assert!((s.planar.median - planar).abs() < 0.04 * h, "{} vs {planar}", s.planar.median);
    assert!((s.spatial.median - spatial).abs() < 0.04 * h, "{} vs {spatial}", s.spatial.median);
}

/// Apples 45 degrees apart around the robot so none lies in another's approach
/// triangle, each with its plate on the same bearing nearer the base.
fn chain_scene(k: usize) -> String {
    let mut objects = vec![serde_json::json!({
        "name": "counter", "position": [0.55, 0.0, 0.35], "size": [0.7, 1.4, 0.7]
    })];
    for i in 0..k {
        let a = (i as f64 - (k - 1) as f64 / 2.0) * std::f64::consts::FRAC_PI_4;
        let (s, c) = a.sin_cos();
        objects.push(serde_json::json!({ "name": "plate", "position": [0.48 * c, 0.48 * s, 0.71], "size": [0.2, 0.2, 0.02] }));
        objects.push(
            serde_json::json!({ "name": "apple", "position": [0.75 * c, 0.75 * s, 0.7315], "size": [0.063, 0.063, 0.063] }),
        );
    }
    let mut scene: serde_json::Value = serde_json::from_str(builtin::KITCHEN).unwrap();
    scene["objects"] = serde_json::Value::Array(objects);
    scene.to_string()
}

/// Two-sided exact binomial p-value: total mass of outcomes no likelier than `x`.
fn binomial_p_value(x: u64, n: u64, p: f64) -> f64 {
    let b = Binomial::new(p, n).unwrap();
    let px = b.pmf(x);
    (0..=n).map(|k| b.pmf(k)).filter(|q| *q <= px * (1.0 + 1e-9)).sum::<f64>().min(1.0)
}

#[test]
fn chains_degrade_geometrically() {
    let dir = tempfile::tempdir().unwrap();
    let k = 3;
    std::fs::write(dir.path().join("chain.json"), chain_scene(k)).unwrap();
    let steps: Vec<String> = (1..=k).map(|i| format!("put the apple{i} on the plate{i}")).collect();
    let spec = |label: &str, text: &str| TrialSpec {
        scene_file: "chain.json".into(),
        miss_probability: 0.0,
        seed: 21,
        ..TrialSpec::new(label, text)
    };
    let suite = TaskSuite {
        tasks: vec![spec("single", &steps[1]), spec("chain", &steps.join(", then "))],
        base_dir: dir.path().to_path_buf(),
    };
    let exp = run_experiment(&suite, 400).unwrap();
    let single = exp.report.row("single").unwrap();
    let chain = exp.report.row("chain").unwrap();
    assert_eq!(chain.feasible, chain.trials, "{:?}", exp.records.iter().find(|r| r.task == "chain" && !r.feasible));
    let p = single.success_rate();
    assert!(p > 0.2 && p < 0.95, "single-step success {p}");
    let pv = binomial_p_value(chain.success as u64, chain.trials as u64, p.powi(k as i32));
    assert!(pv >= 0.05, "chain {} / {} vs p^k = {}, p-value {pv}", chain.success, chain.trials, p.powi(k as i32));
}
