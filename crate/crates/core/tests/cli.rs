use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kernel_regions::data::generate_two_class;
use kernel_regions::prelude::*;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kernel-regions"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulated(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec![
        "simulate",
        "--n",
        "20",
        "--range",
        "0",
        "10",
        "--noise",
        "laplace:0:0.5",
        "--seed",
        "1",
    ];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", p(&path)]);
    ok(&args);
    path
}

#[test]
fn simulate_is_deterministic_and_records_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulated(dir.path(), "a.csv", &[]);
    let b = simulated(dir.path(), "b.csv", &[]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 21);
    assert_eq!(load_csv(&a).unwrap().n(), 20);

    let c = dir.path().join("c.csv");
    ok(&["simulate", "--noise", "binomial:20", "--out", p(&c)]);
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.csv.json")).unwrap())
            .unwrap();
    assert_eq!(side["schema_version"], 1);
    let prob = side["noise_spec"]["success_prob"].as_f64().unwrap();
    assert!((prob - 0.052786).abs() < 1e-6, "{prob}");
}

#[test]
fn member_estimate_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), "d.csv", &[]);
    let out = ok(&[
        "member",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--m",
        "20",
        "--q",
        "2",
    ]);
    let v = json_stdout(&out);
    assert_eq!(v["member"], true);
    assert_eq!(v["rank_k"], 1);
    assert!((v["rank"].as_f64().unwrap() - 0.05).abs() < 1e-15);
    assert_eq!(v["z_values"].as_array().unwrap().len(), 20);

    let bad_q = run(&[
        "member",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--m",
        "20",
        "--q",
        "20",
    ]);
    assert_eq!(bad_q.status.code(), Some(2));

    let alpha = dir.path().join("alpha.txt");
    std::fs::write(&alpha, "1, 2, 3\n").unwrap();
    let bad_dim = run(&[
        "member",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--alpha",
        p(&alpha),
    ]);
    assert_eq!(bad_dim.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&bad_dim.stderr);
    assert!(msg.contains('3') && msg.contains("20"), "{msg}");

    // A coefficient file works the same as the estimate.
    let est: Vec<String> = v["alpha"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.to_string())
        .collect();
    std::fs::write(&alpha, est.join("\n")).unwrap();
    let again = ok(&[
        "member",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--alpha",
        p(&alpha),
    ]);
    assert_eq!(json_stdout(&again)["rank_k"], 1);

    let pd = run(&[
        "member",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--kernel",
        "rectangular:c=100",
    ]);
    assert_eq!(pd.status.code(), Some(4));
    let parse = run(&["member", "--data", p(&data), "--estimator", "krr"]);
    assert_eq!(parse.status.code(), Some(2));
    let missing = run(&[
        "member",
        "--data",
        p(&dir.path().join("none.csv")),
        "--estimator",
        "krr:lambda=0.1",
    ]);
    assert_eq!(missing.status.code(), Some(3));
}

fn read_band(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn band_csv_nests_and_contains_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), "d.csv", &[]);
    let out = dir.path().join("band.csv");
    ok(&[
        "band",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--levels",
        "0.5,0.9",
        "--rays",
        "100",
        "--out",
        p(&out),
    ]);
    let (header, rows) = read_band(&out);
    assert_eq!(
        header,
        ["grid_x", "lower_0.5", "upper_0.5", "lower_0.9", "upper_0.9"]
    );
    assert_eq!(rows.len(), 201);

    let sample = load_csv(&data).unwrap();
    let kernel = KernelSpec::gaussian(0.5).unwrap();
    let problem = build_problem(
        &EstimatorConfig::krr(0.1),
        &kernel,
        &sample,
        &TransformGroup::SignChange,
    )
    .unwrap();
    let grid: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0]]).collect();
    let fit = evaluate_model(
        &kernel,
        sample.inputs(),
        problem.as_sps().unwrap().estimate(),
        &grid,
    )
    .unwrap();
    for (r, f) in rows.iter().zip(&fit) {
        assert!(r[3] <= r[1] && r[1] <= f + 1e-9 && *f <= r[2] + 1e-9 && r[2] <= r[4]);
    }
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("band.csv.json")).unwrap())
            .unwrap();
    assert_eq!(side["schema_version"], 1);
    assert_eq!(side["bands"].as_array().unwrap().len(), 2);

    let empty = run(&[
        "band",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--levels",
        "",
        "--out",
        p(&out),
    ]);
    assert_eq!(empty.status.code(), Some(2));
    let bad = run(&[
        "band",
        "--data",
        p(&data),
        "--estimator",
        "krr:lambda=0.1",
        "--levels",
        "0.33",
        "--out",
        p(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

fn average_width(path: &Path) -> f64 {
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{}.json", path.display())).unwrap())
            .unwrap();
    side["bands"][0]["average_width"].as_f64().unwrap()
}

#[test]
fn rectangular_kernel_bands_are_wider() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulated(dir.path(), "d.csv", &[]);
    let mut widths = Vec::new();
    for (name, kernel) in [
        ("g.csv", "gaussian:sigma=0.5"),
        ("r.csv", "rectangular:c=0.02631578947368421"),
    ] {
        let out = dir.path().join(name);
        ok(&[
            "band",
            "--data",
            p(&data),
            "--estimator",
            "klasso:lambda=1",
            "--kernel",
            kernel,
            "--levels",
            "0.9",
            "--rays",
            "200",
            "--grid",
            "inputs",
            "--half-width",
            "10",
            "--out",
            p(&out),
        ]);
        widths.push(average_width(&out));
    }
    assert!(widths[1] / widths[0] > 1.0, "{widths:?}");
}

#[test]
fn ellipsoids_nest_and_contain_members() {
    let dir = tempfile::tempdir().unwrap();
    let sample = generate_two_class(
        &[1.0, 1.0],
        &[-1.0, -1.0],
        50,
        &NoiseSpec::gaussian(1.0).unwrap(),
        4,
    )
    .unwrap();
    let data = dir.path().join("two.csv");
    save_csv(&sample, &data).unwrap();
    let out = dir.path().join("e.json");
    ok(&[
        "ellipsoid",
        "--data",
        p(&data),
        "--estimator",
        "lssvc:lambda=0.1",
        "--m",
        "20",
        "--q",
        "18,10,2",
        "--seed",
        "5",
        "--out",
        p(&out),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    let es = v["ellipsoids"].as_array().unwrap();
    let radii: Vec<f64> = es.iter().map(|e| e["radius"].as_f64().unwrap()).collect();
    assert!(radii[0] < radii[1] && radii[1] < radii[2], "{radii:?}");
    assert!(es.iter().all(|e| e["degenerate"] == false));

    // Re-read and check against members of the q = 2 region.
    let center = DVector::from_iterator(
        3,
        v["center"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_f64().unwrap()),
    );
    let rows: Vec<f64> = v["shape"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .collect();
    let shape = DMatrix::from_row_slice(3, 3, &rows);
    let problem = build_problem(
        &EstimatorConfig::Lssvc { lambda: 0.1 },
        &KernelSpec::linear(),
        &sample,
        &TransformGroup::SignChange,
    )
    .unwrap();
    let region = Region::new(&problem, RegionConfig::new(20, 2, 5).unwrap()).unwrap();
    let members = boundary_samples(&region, &center, 1000, 2, 10.0, 9).unwrap();
    assert_eq!(members.len(), 1000);
    for s in &members {
        assert!(s.rank.within(2));
        let d = DVector::from_column_slice(&s.alpha) - &center;
        assert!(d.dot(&(&shape * &d)) <= radii[2] * (1.0 + 1e-8));
    }

    let krr_data = simulated(dir.path(), "d.csv", &[]);
    let krr = ok(&[
        "ellipsoid",
        "--data",
        p(&krr_data),
        "--estimator",
        "krr:lambda=0.1",
        "--q",
        "2",
    ]);
    let v = json_stdout(&krr);
    assert_eq!(v["ellipsoids"][0]["degenerate"], true);
    assert!(v["ellipsoids"][0]["radius"].is_null());

    let svr = run(&[
        "ellipsoid",
        "--data",
        p(&krr_data),
        "--estimator",
        "svr:c=250,eps=0.2",
    ]);
    assert_eq!(svr.status.code(), Some(2));
}

#[test]
fn coverage_matches_nominal() {
    let v = json_stdout(&ok(&[
        "coverage", "--trials", "2000", "--m", "10", "--q", "5", "--seed", "3",
    ]));
    assert_eq!(v["nominal"], 0.5);
    assert!(
        (v["empirical"].as_f64().unwrap() - 0.5).abs() <= 0.034,
        "{v}"
    );
    let ci = v["ci"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() < ci[1].as_f64().unwrap());

    let v = json_stdout(&ok(&[
        "coverage", "--trials", "2000", "--m", "20", "--q", "2", "--seed", "4",
    ]));
    let e = v["empirical"].as_f64().unwrap();
    assert!((0.88..=0.92).contains(&e), "{e}");

    assert_eq!(run(&["coverage", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(
        run(&["coverage", "--estimator", "lssvc:lambda=1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "# coverage run\ntrials = 50\nm = 10\nq = 5\nseed = 8\n",
    )
    .unwrap();
    let v = json_stdout(&ok(&["coverage", "--config", p(&cfg), "--q", "2"]));
    assert_eq!(v["trials"], 50);
    assert_eq!(v["m"], 10);
    assert_eq!(v["q"], 2);
    assert_eq!(
        run(&["coverage", "--config", p(&dir.path().join("missing.cfg"))])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn help_and_unknown_subcommand() {
    let out = ok(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["simulate", "member", "band", "ellipsoid", "coverage"] {
        assert!(text.contains(cmd));
    }
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
