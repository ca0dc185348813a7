use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn vrjp(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vrjp"));
    cmd.args(args).env_remove("VRJP_WORKERS");
    if let Some(w) = workers {
        cmd.env("VRJP_WORKERS", w);
    }
    cmd.output().expect("spawn vrjp")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn record_path(o: &Output) -> PathBuf {
    let out = stdout(o);
    let line = out.lines().find_map(|l| l.strip_prefix("record: ")).expect("record line");
    PathBuf::from(line)
}

#[test]
fn classify_fixture_and_flags() {
    let o = vrjp(&["classify", "--config", fixture("psi-curve.toml").to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("regime=transient-ballistic"));

    let o = vrjp(&["classify", "--offspring", "0,0.95,0,0,0,0,0,0,0,0,0.05", "--c", "1"], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("regime=transient-null"));

    let o = vrjp(&["classify", "--offspring", "0,0,1", "--c", "0.1"], None);
    assert!(stdout(&o).contains("regime=recurrent"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema = 1\nkind = \"classify\"\nseed = 1\noffspring = [0, 0, 1]\nc = 1.0\ncolour = \"red\"\n")
        .unwrap();
    assert_eq!(code(&vrjp(&["classify", "--config", bad.to_str().unwrap()], None)), 2);

    std::fs::write(&bad, "schema = 1\nkind = \"teleport\"\nseed = 1\n").unwrap();
    assert_eq!(code(&vrjp(&["classify", "--config", bad.to_str().unwrap()], None)), 2);

    // subcommand and config kind disagree
    let o = vrjp(&["scan", "--config", fixture("ballistic.toml").to_str().unwrap()], None);
    assert_eq!(code(&o), 2);

    // subcritical law
    assert_eq!(code(&vrjp(&["classify", "--offspring", "0.5,0.5", "--c", "1"], None)), 2);
    assert_eq!(code(&vrjp(&["classify", "--offspring", "0,0,1", "--c", "1"], Some("none"))), 2);
    assert_eq!(code(&vrjp(&["nonsense"], None)), 2);
}

#[test]
fn plotdata_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = vrjp(&["scan", "--config", fixture("phase-scan-binary.toml").to_str().unwrap(), "-o", out], None);
    assert_eq!(code(&o), 0);
    let rec = record_path(&o);

    let o = vrjp(&["plotdata", "--record", rec.to_str().unwrap(), "--kind", "phase-diagram", "-o", "-"], None);
    assert_eq!(code(&o), 0);
    let table = stdout(&o);
    assert!(table.starts_with("c\tq1\tb\tmu"));
    assert_eq!(table.lines().count(), 21);

    let o = vrjp(&["plotdata", "--record", rec.to_str().unwrap(), "--kind", "psi-curve"], None);
    assert_eq!(code(&o), 0);
    assert!(rec.parent().unwrap().join("psi-curve.tsv").exists());

    assert_eq!(code(&vrjp(&["plotdata", "--record", rec.to_str().unwrap(), "--kind", "speed"], None)), 2);
    assert_eq!(code(&vrjp(&["plotdata", "--record", rec.to_str().unwrap(), "--kind", "pie"], None)), 2);
    assert_eq!(code(&vrjp(&["plotdata", "--record", "/nonexistent/record.json", "--kind", "speed"], None)), 2);
}

#[test]
fn reruns_and_worker_counts_give_identical_bytes() {
    let cfg = fixture("ballistic.toml");
    let args = |out: &str| {
        vec![
            "simulate".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--steps".into(),
            "20000".into(),
            "--replicas".into(),
            "6".into(),
            "-o".into(),
            out.into(),
        ]
    };
    let mut records = Vec::new();
    for workers in [None, Some("1"), Some("3")] {
        let dir = tempfile::tempdir().unwrap();
        let a: Vec<String> = args(dir.path().to_str().unwrap());
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = vrjp(&a, workers);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let rec = record_path(&o);
        let o = vrjp(&["plotdata", "--record", rec.to_str().unwrap(), "--kind", "speed", "-o", "-"], None);
        records.push((std::fs::read(&rec).unwrap(), o.stdout));
    }
    assert!(records.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn failed_replicas_exit_4() {
    // 100 steps is too short for some replicas to leave the root often enough to fit a slope
    let dir = tempfile::tempdir().unwrap();
    let o = vrjp(
        &[
            "simulate",
            "--config",
            fixture("exponent.toml").to_str().unwrap(),
            "--steps",
            "100",
            "--replicas",
            "30",
            "-o",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed"));
    assert!(record_path(&o).exists());
}

#[test]
fn output_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = vrjp(
        &[
            "oracle",
            "--config",
            fixture("halfline-oracle.toml").to_str().unwrap(),
            "--replicas",
            "5",
            "--seed",
            "3",
            "-o",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    assert!(record_path(&o).starts_with(dir.path()));
}

#[test]
fn trajectory_export_matches_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = fixture("ballistic.toml");
    let common = ["--config", cfg.to_str().unwrap(), "--steps", "5000", "--replicas", "3", "-o", out];
    let o = vrjp(&[&["simulate"][..], &common].concat(), None);
    assert_eq!(code(&o), 0);
    let record = std::fs::read_to_string(record_path(&o)).unwrap();

    let o = vrjp(&[&["trajectory"][..], &common, &["--replica", "2"]].concat(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let walk = stdout(&o).lines().find_map(|l| l.strip_prefix("walk: ")).map(PathBuf::from).unwrap();
    let traj = std::fs::read_to_string(walk.join("trajectory.tsv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("# vrjp trajectory 1"));
    assert_eq!(lines.next(), Some("# step\tvertex\tgeneration"));
    let rows: Vec<Vec<i64>> = lines.map(|l| l.split('\t').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5001);
    assert_eq!(rows[0], vec![0, 1, 0]);
    assert!(rows.windows(2).all(|w| (w[1][2] - w[0][2]).abs() == 1));

    // the replayed walk is replica 2 of the record
    let max_gen = rows.iter().map(|r| r[2]).max().unwrap();
    let v: serde_json::Value = serde_json::from_str(&record).unwrap();
    let entry = &v["replicas"][2];
    assert_eq!(entry["index"], 2);
    assert_eq!(entry["summary"]["max_generation"], max_gen);
    assert_eq!(entry["summary"]["final_generation"], rows[5000][2]);

    let regen = std::fs::read_to_string(walk.join("regenerations.tsv")).unwrap();
    assert_eq!(regen.lines().count() - 2, entry["summary"]["regenerations"].as_u64().unwrap() as usize);
    let tree = std::fs::read_to_string(walk.join("tree.tsv")).unwrap();
    assert!(tree.starts_with("# id\tparent\tgeneration\ta\n1\t0\t0\t"));

    assert_eq!(code(&vrjp(&[&["trajectory"][..], &common, &["--point", "1"]].concat(), None)), 2);
}
