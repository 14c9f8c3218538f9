use sightline_core::geo::{intersect, Trajectory};
use sightline_core::sim::{self, LatencyModel, LatencySpec, Position, Scenario};
use sightline_core::threat::ThreatLevel;
use sightline_testkit::stats;

fn measured(runs: u32, seed: u64) -> Scenario {
    Scenario {
        runs,
        seed,
        latency: LatencyModel::measured(),
        ..Scenario::crossing()
    }
}

#[test]
fn same_seed_same_bytes() {
    let sc = measured(200, 7);
    let a = sim::to_csv_string(&sim::run(&sc).unwrap().records);
    let b = sim::to_csv_string(&sim::run(&sc).unwrap().records);
    assert_eq!(a, b);
    let c = sim::to_csv_string(&sim::run(&measured(200, 8)).unwrap().records);
    assert_ne!(a, c);
}

#[test]
fn runs_can_be_replayed_individually() {
    let all = sim::run(&measured(50, 3)).unwrap().records;
    // the first k runs of a longer sweep are the same as a shorter sweep
    let head = sim::run(&measured(10, 3)).unwrap().records;
    assert_eq!(&all[..head.len()], &head[..]);
}

#[test]
fn totals_are_the_exact_stage_sum() {
    let sc = Scenario {
        latency: LatencyModel {
            t_eval: LatencySpec::Normal { mean: 25.0, std: 8.0 },
            t_exe: LatencySpec::Uniform { lo: 5.0, hi: 40.0 },
            ..LatencyModel::measured()
        },
        ..measured(300, 11)
    };
    for r in sim::run(&sc).unwrap().records {
        let s = r.stages;
        let sum = s.t_s + s.t_eval + s.t_p_dec + s.t_p_ai + s.t_p_tc + s.t_exe + s.t_c + s.t_act;
        assert_eq!(r.total, sum);
        assert_eq!(r.met_deadline, r.total <= sc.t_max_ms);
        assert_eq!(r.impact_mps.is_some(), !r.met_deadline && r.verdict == ThreatLevel::Alarm);
        assert!(s.as_array().iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn user_closes_in_at_its_own_speed() {
    let sc = measured(100, 5);
    let v2 = &sc.users[1];
    let Position::Cart { x, y } = v2.position else { unreachable!() };
    let user0 = Trajectory::new(sightline_core::geo::CartPoint::new(x, y), v2.bearing, v2.speed).unwrap();
    let s = &sc.sensors[0];
    let Position::Cart { x: sx, y: sy } = s.position else { unreachable!() };
    // oncoming object bearing is the camera bearing reversed
    let ray = Trajectory::new(sightline_core::geo::CartPoint::new(sx, sy), s.camera_bearing - 180.0, 0.0).unwrap();
    let d0 = intersect(&user0, &ray).solution().unwrap().t_u;
    for r in sim::run(&sc).unwrap().records.iter().filter(|r| r.user_id == "V2") {
        let elapsed_s = (r.t_capture_ms + r.total) / 1000.0;
        let expected = d0 - v2.speed * elapsed_s;
        assert!((r.distance_m.unwrap() - expected).abs() < 1e-6);
    }
}

#[test]
fn published_inference_statistics_are_replayed() {
    let out = sim::run(&measured(1000, 2024)).unwrap();
    let summary = out.summary.unwrap();
    let ai: Vec<f64> = out
        .records
        .iter()
        .filter(|r| r.user_id == "V2")
        .map(|r| r.stages.t_p_ai)
        .collect();
    assert_eq!(ai.len(), 1000);
    assert!((stats::mean(&ai) - 79.02).abs() <= 1.5);
    assert!((stats::median(&ai) - 74.49).abs() <= 2.0);
    let d = summary.stage("t_p_ai").unwrap();
    assert!((d.mean - 79.02).abs() <= 1.5);
    assert!((summary.stage("t_p_tc").unwrap().mean - 0.95).abs() <= 0.1);
    let (lo, hi) = summary.histogram_t_p_ai.mode_bin();
    assert!(lo >= 72.5 && hi <= 75.0, "mode bin [{lo}, {hi})");
    assert!(summary.clipping.is_empty());
}

#[test]
fn heavy_clipping_is_reported() {
    let sc = Scenario {
        latency: LatencyModel {
            t_c: LatencySpec::Normal { mean: 0.0, std: 1.0 },
            ..LatencyModel::reference()
        },
        ..measured(100, 1)
    };
    let summary = sim::run(&sc).unwrap().summary.unwrap();
    assert_eq!(summary.clipping.len(), 1);
    assert_eq!(summary.clipping[0].stage, "t_c");
    assert!(summary.clipping[0].clipped > 0);
}

#[test]
fn no_detection_means_no_summary() {
    let mut sc = Scenario::crossing();
    sc.emergency_vehicles[0].bearing = 270.0;
    let out = sim::run(&sc).unwrap();
    assert!(out.records.is_empty());
    assert!(out.summary.is_none());
}
