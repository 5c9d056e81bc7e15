use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trafficgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trafficgame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_out(args: &[&str], out: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.push("--out-dir");
    all.push(out.to_str().unwrap());
    trafficgame(&all)
}

fn echo_value(csv: &str, key: &str) -> Option<String> {
    let prefix = format!("# {key}=");
    csv.lines().find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

const QUICK: &[&str] = &["--replicates", "2", "--steps", "100", "--p-new", "0.3", "--p-de", "0.5"];

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(trafficgame(&["--help"]).status.code(), Some(0));
    assert_eq!(trafficgame(&["--version"]).status.code(), Some(0));
    assert_eq!(trafficgame(&["model3", "--help"]).status.code(), Some(0));
}

#[test]
fn bad_input_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["model1", "--bogus"],
        &["model1", "--p-new", "2"],
        &["model1", "--p-de", "x"],
        &["model1", "--set", "no_such_key=1"],
        &["model1", "--set", "steps"],
        &["model2", "--tau", "0"],
        &["estimate", "/does/not/exist.csv"],
        &[],
    ];
    for args in cases {
        let out = with_out(args, tmp.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn model1_writes_echo_then_header() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["model1"];
    args.extend_from_slice(QUICK);
    let out = with_out(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert!(listed.contains("model1_summary.csv"));
    assert!(listed.contains("model1_speeds.csv"));

    let csv = fs::read_to_string(tmp.path().join("model1_summary.csv")).unwrap();
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    let header = lines.next().unwrap();
    assert!(header.starts_with("p_new,p_de,replicates,recorded_steps,mean_speed_all"));
    assert_eq!(lines.count(), 1);
    assert_eq!(echo_value(&csv, "experiment").as_deref(), Some("model1"));
    assert_eq!(echo_value(&csv, "replicates").as_deref(), Some("2"));
}

#[test]
fn flags_override_config_file_and_set_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# quick run\nseed = 3\nsteps = 80\nreplicates = 2\nmax_vehicles = 120\n").unwrap();
    let out = with_out(
        &[
            "model3",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
            "--max-vehicles",
            "150",
            "--set",
            "max_vehicles=140",
            "--p-new",
            "0.2,0.4",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("model3_table.csv")).unwrap();
    assert_eq!(echo_value(&csv, "seed").as_deref(), Some("4"));
    assert_eq!(echo_value(&csv, "steps").as_deref(), Some("80"));
    assert_eq!(echo_value(&csv, "max_vehicles").as_deref(), Some("140"));
    assert_eq!(echo_value(&csv, "p_new").as_deref(), Some("0.2,0.4"));
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        let mut args = vec!["model1", "--seed", seed, "--emit-meetings"];
        args.extend_from_slice(QUICK);
        assert!(with_out(&args, &dir).status.success());
        fs::read(dir.join("model1_meetings.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}

#[test]
fn meetings_feed_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["model1", "--emit-meetings", "--set", "p_de=0.25"];
    args.extend_from_slice(&["--replicates", "2", "--steps", "400", "--p-new", "0.4"]);
    assert!(with_out(&args, tmp.path()).status.success());
    let log = tmp.path().join("model1_meetings.csv");
    let est_dir = tmp.path().join("est");
    let out = with_out(&["estimate", log.to_str().unwrap(), "--prior-alpha", "2"], &est_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(est_dir.join("estimate.csv")).unwrap();
    assert_eq!(echo_value(&csv, "prior_alpha").as_deref(), Some("2"));
    let mut rows = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let row: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    assert!(col("meetings") > 0.0);
    assert!((0.0..=1.0).contains(&col("minimax")));
    assert!((0.0..=1.0).contains(&col("bayes")));
}

#[test]
fn snapshot_and_checked_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = with_out(
        &["snapshot", "--model", "2", "--steps", "60", "--snapshot-every", "30", "--check-invariants"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.len() >= 2, "{names:?}");
    assert!(names.iter().all(|n| n.starts_with("snapshot_step") && n.ends_with(".txt")));
}
