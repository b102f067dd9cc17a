use std::path::Path;
use std::process::{Command, Output};

use serrin_core::io::{parse_key_values, read_csv, write_csv};
use tempfile::TempDir;

fn serrin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_serrin")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(text: &str) -> std::collections::HashMap<String, String> {
    parse_key_values(text).unwrap().into_iter().collect()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn ball_solve(dir: &TempDir) -> Output {
    serrin(&[
        "solve2d",
        "--domain",
        "ball",
        "--space",
        "hyperbolic",
        "--center",
        "0,1",
        "--R",
        "0.5",
        "--lambda",
        "1",
        "--Lambda",
        "1.1",
        "--c",
        "1",
        "--h",
        "1/32",
        "--out",
        &p(dir, "u.csv"),
        "--profile-out",
        &p(dir, "g.csv"),
        "--domain-out",
        &p(dir, "d.csv"),
    ])
}

#[test]
fn cone_beta_harmonic_anchors() {
    let o = serrin(&["cone-beta", "--theta0", "pi/2", "--lambda", "1", "--Lambda", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(o.stdout.as_slice(), &["epsilon", "beta", "residual"]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 2.0).abs() < 1e-6);
    assert!(stdout(&o).contains(",2.00000000,"));

    let o = serrin(&["cone-beta", "--theta0", "pi"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("0.00000000,1.00000000,"));
}

#[test]
fn cone_beta_rejects_bad_input() {
    assert_eq!(code(&serrin(&["cone-beta", "--theta0", "4"])), 1);
    assert_eq!(code(&serrin(&["cone-beta", "--lambda", "2", "--Lambda", "1"])), 1);
    assert_eq!(code(&serrin(&["cone-beta", "--sweep", "1/2", "--Lambda", "2"])), 1);
    assert_eq!(code(&serrin(&["cone-beta", "--sweep", "1,x"])), 1);
}

#[test]
fn cone_sweep_rows_follow_input_order() {
    let o = serrin(&["cone-beta", "--sweep", "1/2,1/8", "--tol", "1e-8"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(o.stdout.as_slice(), &["epsilon", "beta", "residual"]).unwrap();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.5, 0.125]);
    assert!(rows[0][1] > rows[1][1] && rows[1][1] > 2.0);
}

#[test]
fn radial_quadratic_family_and_hemisphere() {
    let o = serrin(&["radial", "--space", "euclidean", "--N", "2", "--c", "2", "--R", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("r,u,du\n"));
    assert_eq!(text.lines().last().unwrap(), "c0 = 1.00000000");

    let o = serrin(&["radial", "--space", "sphere", "--R", "1.6"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("hemisphere"));

    let o = serrin(&["radial", "--R", "1", "--radii", "1,2"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn radial_sweep_emits_one_row_per_radius() {
    let o = serrin(&["radial", "--space", "hyperbolic", "--radii", "0.25,0.5,1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(o.stdout.as_slice(), &["R", "c0"]).unwrap();
    assert_eq!(rows.len(), 3);
    // c₀ increases with the radius
    assert!(rows.windows(2).all(|w| w[1][1] > w[0][1]));
}

#[test]
fn radial_profile_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = |name: &str| {
        vec![
            "radial".to_string(),
            "--space".into(),
            "hyperbolic".into(),
            "--R".into(),
            "0.5".into(),
            "--Lambda".into(),
            "1.1".into(),
            "--out".into(),
            p(&dir, name),
        ]
    };
    let run = |name: &str| {
        let a = args(name);
        serrin(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    let fa = std::fs::read(dir.path().join("a.csv")).unwrap();
    let fb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
}

#[test]
fn verify_suites() {
    let o = serrin(&["verify", "pucci", "--seed", "11", "--trials", "300"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.starts_with("[pucci]\n"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("PASS")));

    let o = serrin(&["verify", "all", "--seed", "3", "--trials", "200"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    for s in ["[geometry]", "[pucci]", "[lemma21]", "[sphere64]"] {
        assert!(text.contains(s), "missing {s}");
    }
    assert!(text.lines().last().unwrap().starts_with("PASS"));
}

#[test]
fn verify_is_deterministic_per_seed() {
    let a = serrin(&["verify", "lemma21", "--seed", "5", "--trials", "500"]);
    let b = serrin(&["verify", "lemma21", "--seed", "5", "--trials", "500"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_validates_before_running() {
    let o = serrin(&["verify", "lemma21", "--seed", "1", "--lambda", "2", "--Lambda", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).is_empty());
    assert_eq!(code(&serrin(&["verify", "pucci"])), 1, "seed is mandatory");
    assert_eq!(code(&serrin(&["verify", "nonsense", "--seed", "1"])), 1);
    assert_eq!(code(&serrin(&["verify", "pucci", "--seed", "1", "--bogus"])), 1);
}

#[test]
fn verify_reports_counterexample_outside_validity_range() {
    let o = serrin(&["verify", "sphere64", "--seed", "2", "--trials", "2000", "--lambda", "0.1", "--Lambda", "10"]);
    assert_eq!(code(&o), 2);
    let text = stdout(&o);
    assert!(text.contains("FAIL sphere_inequality"));
    assert!(text.contains("counterexample"));
}

#[test]
fn config_file_supplies_and_is_overridden() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# quadratic family\nspace = euclidean\nN = 2\nc = 2\nR = 1\n").unwrap();
    let o = serrin(&["radial", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().last().unwrap(), "c0 = 1.00000000");

    let o = serrin(&["radial", "--config", cfg.to_str().unwrap(), "--c", "4"]);
    assert_eq!(stdout(&o).lines().last().unwrap(), "c0 = 2.00000000");

    std::fs::write(&cfg, "R = 1\ncolour = blue\n").unwrap();
    let o = serrin(&["radial", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("colour"));

    std::fs::write(&cfg, "suite = lemma21\nseed = 4\nlambda = 3\nLambda = 1\n").unwrap();
    assert_eq!(code(&serrin(&["verify", "--config", cfg.to_str().unwrap()])), 1);

    assert_eq!(code(&serrin(&["radial", "--config", p(&dir, "missing.cfg").as_str()])), 3);
}

#[test]
fn solve2d_ball_then_moving_plane() {
    let dir = TempDir::new().unwrap();
    let o = ball_solve(&dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = report(&stdout(&o));
    assert_eq!(summary["converged"], "true");
    let spread: f64 = summary["gradient_spread"].parse().unwrap();
    assert!(spread < 0.03, "spread {spread}");
    let profile = read_csv(
        std::fs::File::open(dir.path().join("g.csv")).map(std::io::BufReader::new).unwrap(),
        &["x1", "x2", "grad"],
    )
    .unwrap();
    assert!(!profile.is_empty());

    let o =
        serrin(&["moving-plane", "--field", &p(&dir, "u.csv"), "--domain", &p(&dir, "d.csv"), "--space", "hyperbolic"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&stdout(&o));
    assert_eq!(r["symmetric"], "true");
    assert!(["Corner", "Tangency"].contains(&r["plus_e1.situation"].as_str()));

    let o = serrin(&[
        "moving-plane",
        "--field",
        &p(&dir, "u.csv"),
        "--domain",
        &p(&dir, "d.csv"),
        "--space",
        "hyperbolic",
        "--direction",
        "plus",
        "--out",
        &p(&dir, "report.txt"),
    ]);
    assert_eq!(code(&o), 0);
    let r = report(&std::fs::read_to_string(dir.path().join("report.txt")).unwrap());
    assert_eq!(r["symmetric"], "true");
    assert_eq!(r["direction"], "1.00000000,0.00000000");
}

fn tilt(dir: &TempDir) {
    let rows = read_csv(std::fs::read(dir.path().join("u.csv")).unwrap().as_slice(), &["x1", "x2", "u"]).unwrap();
    let mask = read_csv(std::fs::read(dir.path().join("d.csv")).unwrap().as_slice(), &["x1", "x2", "mask"]).unwrap();
    let tilted = rows.iter().zip(&mask).map(|(r, m)| {
        let u = if m[2] == 1.0 { r[2] + 0.02 * r[0] } else { r[2] };
        vec![r[0], r[1], u]
    });
    let mut out = Vec::new();
    write_csv(&mut out, &["x1", "x2", "u"], tilted).unwrap();
    std::fs::write(dir.path().join("tilted.csv"), out).unwrap();
}

#[test]
fn tilted_field_is_not_symmetric() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ball_solve(&dir)), 0);
    tilt(&dir);
    let o = serrin(&[
        "moving-plane",
        "--field",
        &p(&dir, "tilted.csv"),
        "--domain",
        &p(&dir, "d.csv"),
        "--space",
        "hyperbolic",
    ]);
    assert_eq!(code(&o), 0, "a verdict is a success: {}", stderr(&o));
    assert_eq!(report(&stdout(&o))["symmetric"], "false");
}

#[test]
fn solve2d_ellipse_profile_is_nonconstant() {
    let dir = TempDir::new().unwrap();
    let o = serrin(&[
        "solve2d",
        "--domain",
        "ellipse",
        "--space",
        "hyperbolic",
        "--center",
        "0,1",
        "--semi-axes",
        "0.5,0.25",
        "--Lambda",
        "1.1",
        "--h",
        "1/32",
        "--out",
        &p(&dir, "u.csv"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let spread: f64 = report(&stdout(&o))["gradient_spread"].parse().unwrap();
    assert!(spread > 0.2, "spread {spread}");
}

#[test]
fn solve2d_zero_source_gives_zero_field() {
    let dir = TempDir::new().unwrap();
    let o = serrin(&[
        "solve2d",
        "--domain",
        "ball",
        "--center",
        "0,0",
        "--R",
        "1",
        "--c",
        "0",
        "--h",
        "1/16",
        "--out",
        &p(&dir, "u.csv"),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(std::fs::read(dir.path().join("u.csv")).unwrap().as_slice(), &["x1", "x2", "u"]).unwrap();
    assert!(rows.iter().all(|r| r[2] == 0.0));
}

#[test]
fn solve2d_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(code(&ball_solve(&a)), 0);
    assert_eq!(code(&ball_solve(&b)), 0);
    for f in ["u.csv", "g.csv", "d.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn solve2d_nonconvergence_writes_partial_field() {
    let dir = TempDir::new().unwrap();
    let o = serrin(&[
        "solve2d",
        "--domain",
        "ball",
        "--center",
        "0,0",
        "--R",
        "1",
        "--Lambda",
        "3",
        "--h",
        "1/16",
        "--max-iters",
        "1",
        "--out",
        &p(&dir, "u.csv"),
    ]);
    assert_eq!(code(&o), 2);
    let text = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# WARN"));
    assert_eq!(lines.next().unwrap(), "x1,x2,u");
    assert!(lines.count() > 0);
}

#[test]
fn solve2d_validation() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "u.csv");
    assert_eq!(code(&serrin(&["solve2d", "--domain", "ball", "--center", "0,0", "--out", &out])), 1);
    assert_eq!(code(&serrin(&["solve2d", "--domain", "ball", "--center", "0,0", "--R", "1"])), 1);
    assert_eq!(code(&serrin(&["solve2d", "--domain", "square", "--center", "0,0", "--R", "1", "--out", &out])), 1);
    let o = serrin(&[
        "solve2d",
        "--domain",
        "ball",
        "--space",
        "hyperbolic",
        "--center",
        "0,0.1",
        "--R",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 1, "ball leaving the half-space");
    assert!(!Path::new(&out).exists());
}

#[test]
fn moving_plane_reports_parse_position() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&ball_solve(&dir)), 0);
    let d = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let mut lines: Vec<String> = d.lines().map(String::from).collect();
    let first = lines[4].split(',').next().unwrap().to_string();
    lines[4] = format!("{first},abc,1");
    std::fs::write(dir.path().join("bad.csv"), lines.join("\n")).unwrap();
    let o = serrin(&[
        "moving-plane",
        "--field",
        &p(&dir, "u.csv"),
        "--domain",
        &p(&dir, "bad.csv"),
        "--space",
        "hyperbolic",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("row 5, column 2"), "{}", stderr(&o));

    let o = serrin(&["moving-plane", "--field", &p(&dir, "missing.csv"), "--domain", &p(&dir, "d.csv")]);
    assert_eq!(code(&o), 3);
}

#[test]
fn moving_plane_empty_mask_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let rows: Vec<Vec<f64>> =
        (0..4).flat_map(|j| (0..4).map(move |i| vec![i as f64 * 0.5, j as f64 * 0.5, 0.0])).collect();
    let mut buf = Vec::new();
    write_csv(&mut buf, &["x1", "x2", "mask"], rows.clone()).unwrap();
    std::fs::write(dir.path().join("d.csv"), &buf).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &["x1", "x2", "u"], rows).unwrap();
    std::fs::write(dir.path().join("u.csv"), &buf).unwrap();
    let o = serrin(&["moving-plane", "--field", &p(&dir, "u.csv"), "--domain", &p(&dir, "d.csv")]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn usage_errors_are_validation_errors() {
    assert_eq!(code(&serrin(&["no-such-command"])), 1);
    assert_eq!(code(&serrin(&["radial", "--R", "one"])), 1);
    assert_eq!(code(&serrin(&["--help"])), 0);
}
