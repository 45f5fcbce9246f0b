//! End-to-end tests of the command-line binary: exit statuses, report
//! schema, determinism, metric dumps and point-file validation.

use std::path::PathBuf;
use std::process::{Command, Output};

use openwdvv::catalog;
use openwdvv::C64;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_openwdvv")).args(args).output().expect("run binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("openwdvv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

/// Parses a `name r c` header followed by rows of `re,im` entries.
fn parse_block(text: &str, name: &str) -> Vec<Vec<C64>> {
    let mut lines = text.lines().skip_while(|l| !l.starts_with(&format!("{name} ")));
    let header: Vec<usize> = lines.next().unwrap().split_whitespace().skip(1).map(|s| s.parse().unwrap()).collect();
    let rows = header[..header.len() - 1].iter().product::<usize>();
    lines
        .take(rows)
        .map(|l| {
            l.split_whitespace()
                .map(|e| {
                    let (re, im) = e.split_once(',').unwrap();
                    C64::new(re.parse().unwrap(), im.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn verify_all_pass_exits_zero_with_schema() {
    let o = cli(&["verify", "--model", "dual-saito-a", "--param", "ell=2", "--samples", "10", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["model", "params", "seed", "samples", "checks", "wall_ms"]);
    assert_eq!(v["model"], "dual-saito-a");
    assert_eq!(v["params"]["ell"], "2");
    assert_eq!(v["seed"], 42);
    assert_eq!(v["samples"], 10);
    assert_eq!(v["wall_ms"], 0);
    for c in v["checks"].as_array().unwrap() {
        let keys: Vec<&str> = c.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ["name", "max_residual", "tolerance", "pass"]);
        assert_eq!(c["pass"], true);
    }
}

#[test]
fn failing_tolerance_exits_one_and_names_the_check() {
    let o = cli(&["verify", "--model", "saito-a", "--param", "ell=2", "--samples", "3", "--tol", "open-r2=1e-300"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("open-r2"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failing: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["open-r2"]);
}

#[test]
fn configuration_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &["verify", "--model", "no-such-model"],
        &["verify", "--model", "saito-a", "--param", "ell=2", "--checks", "bogus"],
        &["verify", "--model", "saito-a", "--param", "ell"],
        &["verify", "--model", "saito-a", "--param", "ell=99"],
        &["verify", "--model", "saito-a", "--param", "ell=2", "--param", "q=1"],
        &["verify", "--model", "saito-a", "--param", "ell=2", "--tol", "bogus=1e-3"],
        &["verify", "--model", "saito-a", "--param", "ell=2", "--tol", "open-r1=abc"],
        &["verify", "--model", "saito-d", "--param", "ell=4", "--checks", "open-r1"],
        &["verify", "--model", "saito-a", "--param", "ell=2", "--samples", "0"],
        &["periods", "--model", "saito-a", "--param", "ell=2"],
        &["varpi", "--ell", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        let o = cli(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = [
        "verify",
        "--model",
        "ma-zuo",
        "--param",
        "ell=1",
        "--param",
        "r=1",
        "--param",
        "k=1",
        "--samples",
        "6",
        "--seed",
        "9",
    ];
    let a = cli(&args);
    let b = cli(&args);
    let mut parallel = args.to_vec();
    parallel.extend(["--jobs", "3"]);
    let c = cli(&parallel);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn out_flag_writes_the_report() {
    let path = temp_file("report.json", "");
    let p = path.to_str().unwrap();
    let o = cli(&["verify", "--model", "fold-b", "--param", "ell=2", "--samples", "3", "--out", p]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let again = cli(&["verify", "--model", "fold-b", "--param", "ell=2", "--samples", "3"]);
    assert_eq!(std::fs::read(&path).unwrap(), again.stdout);
}

#[test]
fn timing_flag_fills_wall_time_field() {
    let o = cli(&["verify", "--model", "saito-a", "--param", "ell=1", "--samples", "2", "--timing"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["wall_ms"].is_u64());
}

#[test]
fn list_models_prints_every_family() {
    let o = cli(&["list-models"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for id in ["saito-a", "saito-d", "dual-saito-a", "dz-a", "ma-zuo", "jacobi-a", "rank2-a", "fold-b", "fold-i2"] {
        assert!(text.lines().any(|l| l.split('\t').next() == Some(id)), "{id}");
    }
}

#[test]
fn varpi_prints_coefficients() {
    assert_eq!(stdout(&cli(&["varpi", "--ell", "3"])).trim(), "1/4*v1*v2");
    assert_eq!(stdout(&cli(&["varpi", "--ell", "2"])).trim(), "1/6*v1^2");
    assert_eq!(stdout(&cli(&["varpi", "--ell", "1"])).trim(), "0");
}

#[test]
fn periods_subcommand_reports_period_checks() {
    let o = cli(&["periods", "--model", "dual-saito-a", "--param", "ell=1", "--samples", "2", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["gauss-manin", "period-doubling"]);
    assert_eq!(v["checks"][0]["tolerance"], 1e-6);
}

#[test]
fn rank_two_model_runs_from_the_command_line() {
    let o = cli(&["verify", "--model", "rank2-a", "--param", "ell=2", "--samples", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn metric_dump_of_trigonometric_model() {
    let path = temp_file("dz.json", r#"{"w1":[0.3,0.1],"w2":[1.1,-0.4],"w3":[-0.7,0.5]}"#);
    let o =
        cli(&["metric", "--model", "dz-a", "--param", "ell=2", "--param", "r=1", "--point", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let g = parse_block(&stdout(&o), "g");
    for (a, row) in g.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            let expected = 0.5 - if a == b { 1.0 } else { 0.0 };
            assert!((v - expected).norm() < 1e-10);
        }
    }
    let c = parse_block(&stdout(&o), "c");
    assert_eq!(c.len(), 9);
    assert!(c.iter().all(|row| row.len() == 3));
}

#[test]
fn metric_dump_uses_fifteen_significant_digits() {
    let path = temp_file("fmt.json", r#"{"v1":[0.3,0.2],"v2":[0.5,0.0]}"#);
    let o = cli(&["metric", "--model", "saito-a", "--param", "ell=2", "--point", path.to_str().unwrap()]);
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let first = line.split_whitespace().next().unwrap().split(',').next().unwrap();
    let mantissa = first.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 15);
}

#[test]
fn flat_metric_is_identical_at_different_points() {
    let a = temp_file("a.json", r#"{"v1":[0.3,0.2],"v2":[0.5,0.0]}"#);
    let b = temp_file("b.json", r#"{"v1":[-1.1,0.4],"v2":[0.2,0.7]}"#);
    let run = |p: &PathBuf| {
        stdout(&cli(&["metric", "--model", "saito-a", "--param", "ell=2", "--point", p.to_str().unwrap()]))
    };
    let (ea, eb) = (parse_block(&run(&a), "eta"), parse_block(&run(&b), "eta"));
    for (ra, rb) in ea.iter().zip(&eb) {
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn jacobi_metric_echoes_closed_form() {
    let path = temp_file("j.json", r#"{"w1":[0.3,0.1],"u":[0.2,0.1],"tau":[0.0,1.0]}"#);
    let o = cli(&["metric", "--model", "jacobi-a", "--param", "ell=1", "--point", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let g = parse_block(&stdout(&o), "g");
    let m = catalog::build_jacobi_a(1, C64::new(0.0, 1.0)).unwrap();
    let closed = m.metric.unwrap();
    for (a, row) in g.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            assert!((v - closed[(a, b)]).norm() < 1e-13);
        }
    }
}

#[test]
fn point_file_errors() {
    let missing = temp_file("missing.json", r#"{"v1":[0.3,0.2]}"#);
    let extra = temp_file("extra.json", r#"{"v1":[0.3,0.2],"v2":[0.1,0.0],"q":[0,0]}"#);
    let malformed = temp_file("malformed.json", r#"{"v1":0.3,"v2":[0.1,0.0]}"#);
    for p in [&missing, &extra, &malformed] {
        let o = cli(&["metric", "--model", "saito-a", "--param", "ell=2", "--point", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    }
    let o = cli(&["metric", "--model", "saito-a", "--param", "ell=2", "--point", "/nonexistent/point.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn inadmissible_point_names_the_guard() {
    let origin = temp_file("origin.json", r#"{"v1":[0.0,0.0],"v2":[0.0,0.0]}"#);
    let o = cli(&["metric", "--model", "saito-a", "--param", "ell=2", "--point", origin.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("degenerate") || msg.contains("discriminant"), "{msg}");
}
