use std::io::{BufRead, BufReader};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn sightline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sightline"))
        .args(args)
        .output()
        .expect("spawn sightline")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.push("--json");
    let o = sightline(&a);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn budget_defaults_match_the_explicit_call() {
    let explicit = json(&["budget", "--t-tot", "150", "--t-s", "22", "--t-p", "76.39", "--t-c", "1.2"]);
    assert_eq!(json(&["budget", "--t-tot", "150"]), explicit);
    assert!((explicit["t_eval_alloc"].as_f64().unwrap() - 25.205).abs() < 1e-9);
    assert!((explicit["t_exe_alloc"].as_f64().unwrap() - 25.205).abs() < 1e-9);
    let text = stdout(&sightline(&["budget"]));
    assert!(text.contains("25.205"), "{text}");
}

#[test]
fn infeasible_budget_exits_2_with_the_deficit() {
    let o = sightline(&["budget", "--t-tot", "90"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("9.5900"));
    let o = sightline(&["budget", "--t-tot", "90", "--json"]);
    assert_eq!(code(&o), 2);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["exit_code"], 2);
}

#[test]
fn budget_csv_has_one_row() {
    let text = stdout(&sightline(&["budget", "--csv"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].ends_with(",25.2050,25.2050"), "{}", lines[1]);
}

#[test]
fn impact_rows() {
    let rows = json(&["impact", "--latencies", "150,200,250,300,350,400"]);
    assert_eq!(rows.as_array().unwrap().len(), 6);
    let zero = json(&["impact", "--latencies", "0"]);
    assert_eq!(zero[0]["mps"], 0.0);
    let alt = json(&["impact", "--k", "8.53", "--latencies", "150"]);
    assert!((alt[0]["mps"].as_f64().unwrap() - 1.2795).abs() < 1e-9);
    assert_eq!(code(&sightline(&["impact", "--latencies", "-5"])), 4);
}

#[test]
fn intersect_replays_the_geometry_examples() {
    let v = json(&["intersect", "--user", "0,0", "--user-theta", "0", "--sensor", "5,-5", "--sensor-theta", "1.5707963267948966"]);
    let i = &v["intersection"];
    assert_eq!(i["outcome"], "point");
    assert!((i["t_u"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert!((i["t_s"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert!((i["point"]["x"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    let v = json(&["intersect", "--user", "0,0", "--user-theta", "0", "--sensor", "0,3", "--sensor-theta", "0"]);
    assert_eq!(v["intersection"]["outcome"], "parallel");
    let v = json(&["intersect", "--user", "0,0", "--user-bearing", "90", "--sensor", "-5,-5", "--sensor-bearing", "0"]);
    assert_eq!(v["intersection"]["outcome"], "behind");
}

#[test]
fn intersect_reads_geodetic_positions() {
    // 0.01° north of the origin is 1111.949 m
    let v = json(&[
        "intersect", "--origin", "0,0", "--user", "0.01,0", "--user-bearing", "90", "--sensor", "0,0.005",
        "--sensor-bearing", "0",
    ]);
    let p = &v["intersection"]["point"];
    assert!((p["y"].as_f64().unwrap() - 1111.949).abs() < 1e-3);
}

fn level(extra: &[&str], user: &str, ub: &str, sensor: &str, sb: &str) -> String {
    let mut a = vec!["classify", "--user", user, "--user-bearing", ub, "--sensor", sensor, "--sensor-bearing", sb];
    a.extend_from_slice(extra);
    json(&a)["verdict"]["level"].as_str().unwrap().to_string()
}

#[test]
fn classify_replays_the_threat_examples() {
    // user in B3 heading east, crossing at (1700, 3400)
    assert_eq!(level(&[], "1400,3400", "90", "1700,3700", "180"), "Alarm");
    assert_eq!(level(&[], "1400,3400", "90", "1700,4300", "180"), "Warning1");
    assert_eq!(level(&[], "1400,3400", "90", "1700,3700", "90"), "Warning2");
    assert_eq!(level(&[], "1400,3400", "90", "3500,5500", "0"), "None");
    assert_eq!(level(&["--no-event"], "1400,3400", "90", "1700,3700", "90"), "None");
}

#[test]
fn classify_fail_on_alarm_exits_5() {
    let base = ["classify", "--user", "1400,3400", "--user-bearing", "90", "--sensor", "1700,3700", "--sensor-bearing", "180"];
    assert_eq!(code(&sightline(&base)), 0);
    let mut a = base.to_vec();
    a.push("--fail-on-alarm");
    assert_eq!(code(&sightline(&a)), 5);
}

#[test]
fn classify_reads_a_fragment_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("frag.json");
    std::fs::write(
        &f,
        r#"{"user": {"x": 1400, "y": 3400, "bearing": 90, "speed": 20},
            "sensor": {"x": 1700, "y": 3700, "bearing": 180}, "event": true}"#,
    )
    .unwrap();
    let v = json(&["classify", "--input", f.to_str().unwrap()]);
    assert_eq!(v["verdict"]["level"], "Alarm");
    assert_eq!(v["user_cell"], "B3");
    std::fs::write(&f, "{").unwrap();
    assert_eq!(code(&sightline(&["classify", "--input", f.to_str().unwrap()])), 4);
}

#[test]
fn validation_errors_exit_4() {
    assert_eq!(code(&sightline(&["budget", "--bogus"])), 4);
    assert_eq!(code(&sightline(&["intersect", "--user", "0,0", "--sensor", "1,1"])), 4);
    assert_eq!(code(&sightline(&["budget", "--t-s", "-1"])), 4);
    assert_eq!(code(&sightline(&["scenario", "validate", "/nonexistent.toml"])), 4);
    assert_eq!(code(&sightline(&["--help"])), 0);
}

#[test]
fn help_documents_defaults() {
    let h = stdout(&sightline(&["budget", "--help"]));
    for d in ["[default: 150]", "[default: 22]", "[default: 76.39]", "[default: 1.2]", "[default: 0.5]"] {
        assert!(h.contains(d), "missing {d} in\n{h}");
    }
    let h = stdout(&sightline(&["impact", "--help"]));
    assert!(h.contains("[default: 7.63]") && h.contains("150,200,250,300,350,400"), "{h}");
    let h = stdout(&sightline(&["consumer", "--help"]));
    assert!(h.contains("25.205") && h.contains("[default: 1]"), "{h}");
    let h = stdout(&sightline(&["scenario", "init", "--help"]));
    assert!(h.contains("149.99") && h.contains("79.02"), "{h}");
}

#[test]
fn json_output_is_stable() {
    let a = ["simulate", "--profile", "measured", "--runs", "50", "--json"];
    assert_eq!(stdout(&sightline(&a)), stdout(&sightline(&a)));
    let a = ["classify", "--user", "1400,3400", "--user-bearing", "90", "--sensor", "1700,3700", "--sensor-bearing", "180", "--json"];
    assert_eq!(stdout(&sightline(&a)), stdout(&sightline(&a)));
}

#[test]
fn scenario_init_validate_simulate_report() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    let csv = dir.path().join("out.csv");
    assert!(sightline(&["scenario", "init", "--profile", "measured", "--out", sc.to_str().unwrap()]).status.success());
    let v = json(&["scenario", "validate", sc.to_str().unwrap()]);
    assert_eq!(v["valid"], true);
    assert_eq!(v["placements"].as_array().unwrap().len(), 4);

    let s = sc.to_str().unwrap();
    let sim = json(&["simulate", "--scenario", s, "--runs", "200", "--out", csv.to_str().unwrap()]);
    let rep = json(&["report", csv.to_str().unwrap()]);
    assert_eq!(sim["records"], rep["records"]);
    assert_eq!(sim["runs"], rep["runs"]);
    assert_eq!(sim["verdicts"], rep["verdicts"]);
    // CSV keeps four decimals, so the statistics agree to that precision
    let mean = |v: &Value| v["stages"][3]["mean"].as_f64().unwrap();
    assert!((mean(&sim) - mean(&rep)).abs() < 1e-4);

    let piped = stdout(&sightline(&["simulate", "--scenario", s, "--runs", "200", "--out", "-"]));
    assert_eq!(piped, std::fs::read_to_string(&csv).unwrap());
}

#[test]
fn broken_scenario_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("s.toml");
    std::fs::write(&sc, "runs = 0\n").unwrap();
    assert_eq!(code(&sightline(&["scenario", "validate", sc.to_str().unwrap()])), 4);
    assert_eq!(code(&sightline(&["simulate", "--scenario", sc.to_str().unwrap()])), 4);
}

#[test]
fn serve_prints_the_bound_port() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sightline"))
        .args(["serve", "--listen", "127.0.0.1:0", "--duration-s", "0.2"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut line).unwrap();
    let port: u16 = line.trim().rsplit(':').next().unwrap().parse().unwrap();
    assert!(port > 0, "{line}");
    assert!(child.wait().unwrap().success());
}

#[test]
fn unreachable_node_exits_3() {
    // bind then drop, so nothing listens on the port
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    assert_eq!(code(&sightline(&["sensor", "--connect", &addr])), 3);
    assert_eq!(code(&sightline(&["consumer", "--connect", &addr])), 3);
}
