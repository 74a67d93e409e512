use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TOY: &str = "Texture,Color,RootShape,Sweetness
clear,white,straight,low
blurry,yellow,straight,low
blurry,yellow,curled,low
clear,green,slightly curled,low
blurry,green,curled,high
clear,black,slightly curled,high
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catcouple"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails_with(dir: &Path, args: &[&str], code: i32) -> String {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "diagnostic is one line: {err}");
    err
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.csv"), TOY).unwrap();
    dir
}

const FIT: &[&str] = &[
    "fit",
    "--input",
    "toy.csv",
    "--label",
    "Sweetness",
    "--clusters",
    "2",
    "--model",
    "m.model",
    "--embedding",
    "x.csv",
    "--trace",
    "t.csv",
];

#[test]
fn fit_writes_all_artifacts() {
    let dir = setup();
    let mut args = FIT.to_vec();
    args.extend(["--similarity", "s.csv", "--max-iterations", "30"]);
    ok(dir.path(), &args);
    let x = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    assert!(x.starts_with("# "), "config echo first");
    assert!(x.lines().next().unwrap().contains("n_clusters=2"));
    let rows: Vec<&str> = x.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    // 6 spaces, 9 + 9 values, 14 kernels
    assert_eq!(rows[0].split(',').count(), 18 * 14);
    let trace = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(trace.lines().any(|l| l == "iteration,loss,delta,omega_hash"));
    assert!(fs::read_to_string(dir.path().join("m.model")).unwrap().starts_with("catcouple-model 1\n"));
    assert!(dir.path().join("s.csv").exists());
}

#[test]
fn same_seed_same_bytes() {
    let dir = setup();
    let mut args = FIT.to_vec();
    args.extend(["--seed", "7", "--max-iterations", "40"]);
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    ok(dir.path(), &args);
    let first = (read("m.model"), read("x.csv"), read("t.csv"));
    ok(dir.path(), &args);
    assert_eq!(first, (read("m.model"), read("x.csv"), read("t.csv")));

    let mut seq = args.clone();
    seq.extend(["--sequential", "--threads", "1"]);
    ok(dir.path(), &seq);
    let seq_x: Vec<String> = String::from_utf8(read("x.csv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    let par_x: Vec<String> = String::from_utf8(first.1)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(seq_x, par_x);
}

#[test]
fn infinite_delta_runs_one_iteration() {
    let dir = setup();
    let mut args = FIT.to_vec();
    args.extend(["--delta", "inf"]);
    ok(dir.path(), &args);
    let trace = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let data: Vec<&str> = trace.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(data.len(), 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = setup();
    fs::write(dir.path().join("run.cfg"), "max_iterations=3\nseed=5\nmode=full\n").unwrap();
    let mut args = FIT.to_vec();
    args.extend(["--config", "run.cfg", "--seed", "9"]);
    ok(dir.path(), &args);
    let x = fs::read_to_string(dir.path().join("x.csv")).unwrap();
    let echo = x.lines().next().unwrap();
    assert!(echo.contains("seed=9") && echo.contains("max_iterations=3") && echo.contains("mode=full"), "{echo}");

    fs::write(dir.path().join("bad.cfg"), "colour=red\n").unwrap();
    let mut bad = FIT.to_vec();
    bad.extend(["--config", "bad.cfg"]);
    fails_with(dir.path(), &bad, 2);
}

#[test]
fn transform_reproduces_fit_embedding() {
    let dir = setup();
    ok(dir.path(), FIT);
    ok(
        dir.path(),
        &["transform", "--model", "m.model", "--input", "toy.csv", "--label", "Sweetness", "--out", "x2.csv"],
    );
    let body = |name: &str| -> Vec<String> {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(String::from)
            .collect()
    };
    assert_eq!(body("x.csv"), body("x2.csv"));
}

#[test]
fn evaluate_and_cluster() {
    let dir = setup();
    let p = dir.path();
    ok(
        p,
        &["synth", "--n-o", "90", "--n-a", "5", "--n-mv", "3", "--clusters", "3", "--separation", "1", "--seed", "2", "--out", "d.csv"],
    );
    ok(
        p,
        &["fit", "--input", "d.csv", "--label", "cluster", "--clusters", "3", "--model", "d.model.gz", "--embedding", "dx.csv", "--trace", "dt.csv"],
    );
    ok(
        p,
        &[
            "evaluate", "--input", "d.csv", "--label", "cluster", "--model", "d.model.gz", "--baseline", "--seeds", "3", "--k-list", "1,5,10",
            "--summary", "sum.txt", "--curve", "curve.csv", "--precision", "prec.csv",
        ],
    );
    let summary = fs::read_to_string(p.join("sum.txt")).unwrap();
    assert!(summary.lines().any(|l| l == "f_score_median=1.0"), "{summary}");
    assert!(summary.contains("kmodes_f_score_median="));
    let prec = fs::read_to_string(p.join("prec.csv")).unwrap();
    assert_eq!(prec.lines().filter(|l| !l.starts_with('#')).count(), 4);
    assert!(fs::read_to_string(p.join("curve.csv")).unwrap().contains("epsilon,gamma"));

    ok(p, &["cluster", "--embedding", "dx.csv", "--clusters", "3", "--out", "a.csv"]);
    let a = fs::read_to_string(p.join("a.csv")).unwrap();
    assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 91);
    ok(p, &["cluster", "--method", "kmodes", "--input", "d.csv", "--label", "cluster", "--clusters", "3", "--out", "b.csv"]);

    let described = ok(p, &["describe", "--input", "d.csv", "--label", "cluster"]);
    assert_eq!(String::from_utf8(described.stdout).unwrap(), "n_o=90\nn_a=5\nn_c=3\nn_av=3\nn_mv=3\n");
}

#[test]
fn synth_is_reproducible() {
    let dir = setup();
    let args = |out: &'static str| {
        vec!["synth", "--n-o", "50", "--n-a", "4", "--n-mv", "3", "--clusters", "2", "--separation", "0.7", "--seed", "3", "--out", out]
    };
    ok(dir.path(), &args("a.csv"));
    ok(dir.path(), &args("b.csv"));
    assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), fs::read(dir.path().join("b.csv")).unwrap());
}

#[test]
fn failure_classes_map_to_exit_codes() {
    let dir = setup();
    let p = dir.path();
    let mut bad_kernel = FIT.to_vec();
    bad_kernel.extend(["--kernels", "bogus:1"]);
    fails_with(p, &bad_kernel, 2);

    let mut missing = FIT.to_vec();
    missing[2] = "absent.csv";
    fails_with(p, &missing, 3);

    fs::write(p.join("ragged.csv"), "a,b\nx\n").unwrap();
    let err = fails_with(p, &["describe", "--input", "ragged.csv"], 4);
    assert!(err.contains("row 2"), "{err}");

    fs::write(p.join("nan.csv"), "1.0,2.0\nNaN,1.0\n3.0,1.0\n").unwrap();
    fails_with(p, &["cluster", "--embedding", "nan.csv", "--clusters", "2", "--out", "z.csv"], 5);
    assert!(!p.join("z.csv").exists());

    fails_with(
        p,
        &["evaluate", "--input", "toy.csv", "--embedding", "nan.csv", "--summary", "s.txt"],
        2,
    );
}

#[test]
fn failed_fit_writes_nothing() {
    let dir = setup();
    let mut args = FIT.to_vec();
    args.push("--learning-rate=-1");
    fails_with(dir.path(), &args, 2);
    for f in ["m.model", "x.csv", "t.csv"] {
        assert!(!dir.path().join(f).exists(), "{f} written");
    }
}
