use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("trunckit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trunckit")).args(args).env_remove("TRUNCKIT_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn edited(src: &str, name: &str, f: impl Fn(&str) -> String) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, f(&std::fs::read_to_string(data(src)).unwrap())).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn figure_eight_validates() {
    let o = run(&["validate", path(&data("figure-eight.trk"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("validation: ok"));
}

#[test]
fn non_involutive_gluing_fails_validation() {
    // tet 1 face 0 now points at tet 0 face 1, which points elsewhere
    let p = edited("figure-eight.trk", "ni.trk", |s| s.replacen("tet 1: 0.0.132", "tet 1: 0.1.032", 1));
    let o = run(&["validate", path(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("inconsistent gluing"));
}

#[test]
fn torus_boundary_fails_validation() {
    let p = edited("figure-eight.trk", "torus.trk", |s| s.replace("ideal=1111", "ideal=0000"));
    let o = run(&["validate", "--json", path(&p)]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["validation"]["ok"], false);
    assert!(v["validation"]["error"].as_str().unwrap().contains("euler characteristic 0"));
}

#[test]
fn parse_errors_carry_position() {
    let p = edited("figure-eight.trk", "garbled.trk", |s| s.replacen("1.0.132", "1.0.1x2", 1));
    let o = run(&["validate", path(&p)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4, column 8"));
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&["canonize", path(&data("figure-eight.trk")), "--perturb-move", "0.7"]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn solve_writes_regular_angles_and_verifies() {
    let out = scratch("solved.trk");
    let o = run(&["solve", path(&data("figure-eight.trk")), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let solved = trunckit::format::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for a in solved.angles.as_ref().unwrap() {
        assert!(a.0.iter().all(|x| (x - std::f64::consts::FRAC_PI_3).abs() < 1e-10));
    }
    let o = run(&["solve", path(&out), "--verify-only"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("certificate: valid"));
    assert!(!text.contains("solve:"));
    // no angles to verify
    assert_eq!(run(&["solve", path(&data("figure-eight.trk")), "--verify-only"]).status.code(), Some(5));
}

#[test]
fn unsolvable_combinatorics_report_no_convergence() {
    // valid, but one edge has valence 1 and can never reach 2 pi
    let out = scratch("never.trk");
    let o = run(&["solve", path(&data("unsolvable.trk")), "--seeds", "2", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("NoConvergence"));
    assert!(!out.exists());
    assert!(stdout(&run(&["validate", path(&data("unsolvable.trk"))])).contains("LowValence"));
}

#[test]
fn figure_eight_is_already_canonical() {
    let o = run(&["canonize", path(&data("figure-eight.trk"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("canonical: Canonical after 0 moves"));
}

#[test]
fn perturbed_figure_eight_returns_in_one_move() {
    let out = scratch("back.trk");
    let o = run(&["canonize", path(&data("figure-eight.trk")), "--perturb-move", "0.0", "--json", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["canonical"]["moves"].as_array().unwrap().len(), 1);
    let a = stdout(&run(&["isosig", path(&out)]));
    let b = stdout(&run(&["isosig", path(&data("figure-eight.trk"))]));
    assert_eq!(a, b);
    // the written file carries angles and heights and is itself canonical
    let o = run(&["canonize", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn whitehead_with_octahedral_heights_is_a_subdivision() {
    let o = run(&["canonize", "--json", path(&data("whitehead.trk"))]);
    assert_eq!(o.status.code(), Some(6));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["canonical"]["status"], "Subdivision");
    assert_eq!(v["canonical"]["cells"]["transparent"].as_array().unwrap().len(), 4);
}

#[test]
fn tilts_json_matches_text() {
    let f = data("mixed-pair.trk");
    let text = stdout(&run(&["tilts", path(&f)]));
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["tilts", "--json", path(&f)]))).unwrap();
    let faces = v["tilts"]["faces"].as_array().unwrap();
    let rows: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("tilts")).skip(2).take_while(|l| l.starts_with("  ")).collect();
    assert_eq!(rows.len(), faces.len());
    for (row, face) in rows.iter().zip(faces) {
        let cols: Vec<&str> = row.split_whitespace().collect();
        for (i, key) in ["tet", "face", "other_tet", "other_face"].iter().enumerate() {
            assert_eq!(cols[i].parse::<u64>().unwrap(), face[key].as_u64().unwrap());
        }
        for (i, key) in ["t", "t_other", "sum"].iter().enumerate() {
            let x: f64 = cols[4 + i].parse().unwrap();
            let y = face[key].as_f64().unwrap();
            assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-12), "{key}: {x} vs {y}");
        }
        assert_eq!(cols[7], face["class"].as_str().unwrap());
    }
    // the cusp of the mixed example gets a height
    assert_eq!(v["heights_used"].as_array().unwrap().len(), 1);
    assert!(text.contains("heights used:"));
}

#[test]
fn figure_eight_tilts_are_equal_and_convex() {
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["tilts", "--json", path(&data("figure-eight.trk"))]))).unwrap();
    let faces = v["tilts"]["faces"].as_array().unwrap();
    let s0 = faces[0]["sum"].as_f64().unwrap();
    assert!(s0 < 0.0);
    for f in faces {
        assert!((f["sum"].as_f64().unwrap() - s0).abs() < 1e-9);
        assert_eq!(f["class"], "Convex");
    }
}

#[test]
fn isosig_ignores_labelling() {
    let src = std::fs::read_to_string(data("figure-eight.trk")).unwrap();
    // swap the two tetrahedra: exchange the lines and the target indices
    let swap = |rec: &str| {
        rec.split_whitespace()
            .map(|w| match w.split_once('.') {
                Some(("0", rest)) if w.len() == 7 => format!("1.{rest}"),
                Some(("1", rest)) if w.len() == 7 => format!("0.{rest}"),
                _ => w.to_string(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let lines: Vec<&str> = src.lines().collect();
    let t0 = lines.iter().position(|l| l.starts_with("tet 0:")).unwrap();
    let body0 = lines[t0].trim_start_matches("tet 0: ");
    let body1 = lines[t0 + 1].trim_start_matches("tet 1: ");
    let mut out: Vec<String> = lines[..t0].iter().map(|s| s.to_string()).collect();
    out.push(format!("tet 0: {}", swap(body1)));
    out.push(format!("tet 1: {}", swap(body0)));
    let p = scratch("swapped.trk");
    std::fs::write(&p, out.join("\n") + "\n").unwrap();
    let a = run(&["isosig", path(&p)]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&run(&["isosig", path(&data("figure-eight.trk"))])));
    assert_ne!(stdout(&a), stdout(&run(&["isosig", path(&data("whitehead.trk"))])));
}

#[test]
fn repeated_runs_are_byte_identical() {
    for f in ["figure-eight.trk", "whitehead.trk", "mixed-pair.trk", "compact-pair.trk"] {
        for args in [vec!["canonize", "--json"], vec!["tilts"], vec!["solve"]] {
            let mut a = args.clone();
            let p = data(f);
            a.push(path(&p));
            let x = run(&a);
            let y = Command::new(env!("CARGO_BIN_EXE_trunckit")).args(&a).env("TRUNCKIT_THREADS", "1").output().unwrap();
            assert_eq!(x.stdout, y.stdout, "{a:?}");
            assert_eq!(x.status.code(), y.status.code());
        }
    }
}

#[test]
fn timing_is_opt_in() {
    let f = data("figure-eight.trk");
    assert!(!stdout(&run(&["canonize", path(&f)])).contains("timing"));
    assert!(stdout(&run(&["canonize", "--timing", path(&f)])).contains("timing:"));
}
