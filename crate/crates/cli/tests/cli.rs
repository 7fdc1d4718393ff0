use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cortical(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cortical")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn bounds_at_unit_peak() {
    let o = cortical(&["baseline", "bounds", "A=1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("shannon     0.500000 bits"), "{s}");
    assert!(s.contains("mckellips   0.500000 bits"), "{s}");
}

#[test]
fn ba_binary_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cortical(&["baseline", "ba", "bsc", "p=0.1", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("capacity    0.368064 nats"), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("ba.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn ba_rejects_unsupported_channel() {
    let o = cortical(&["baseline", "ba", "mimo-peak"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_keys_exit_two_and_are_named() {
    for (args, key) in [
        (vec!["run", "awgn-peak", "colour=red"], "'colour'"),
        (vec!["run", "rayleigh", "gamma=2"], "'gamma'"),
        (vec!["run", "awgn-peak", "--steps", "many"], "'steps'"),
        (vec!["sweep", "awgn-peak", "A=2"], "'A'"),
        (vec!["baseline", "bounds", "p=0.1"], "'p'"),
    ] {
        let o = cortical(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr(&o).contains(key), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_file_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "experiment = awgn-peak\nstepz = 10\n").unwrap();
    let o = cortical(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'stepz'"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = cortical(&[
        "run",
        "awgn-peak",
        "steps=5",
        "generator_lr=1e300",
        "discriminator_lr=1e300",
        "reference=false",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "").unwrap();
    let out = file.join("sub");
    let o = cortical(&["run", "awgn-peak", "steps=2", "reference=false", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn run_is_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let conf = dirs[0].path().join("run.conf");
    fs::write(&conf, "# short run\nexperiment = awgn-peak\nA = 1\nsteps = 40\nbatch_size = 128\n").unwrap();
    for d in &dirs {
        let o = cortical(&["run", conf.to_str().unwrap(), "--seed", "5", "--out", d.path().to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["trace.csv", "pmf.csv", "pmf.svg", "trace.svg"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let mut s = [summary(dirs[0].path()), summary(dirs[1].path())];
    for v in &mut s {
        v.as_object_mut().unwrap().remove("wall_time_seconds");
    }
    assert_eq!(s[0], s[1]);
    assert_eq!(s[0]["seed"], 5);
    assert_eq!(s[0]["steps"], 40);
    let nats = s[0]["capacity_nats"].as_f64().unwrap();
    let bits = s[0]["capacity_bits"].as_f64().unwrap();
    assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-12);
    assert!((s[0]["reference_nats"].as_f64().unwrap() - 0.33682).abs() < 1e-4);
    let trace = fs::read_to_string(dirs[0].path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("step,J,capacity_nats,penalty"));
    assert_eq!(trace.lines().count(), 41);
}

#[test]
fn mimo_run_writes_radial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = cortical(&["run", "mimo-peak", "r2=3", "steps=10", "batch_size=64", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["radial.csv", "clusters.csv", "scatter.svg", "pmf.svg", "summary.json", "trace.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let s = summary(dir.path());
    assert_eq!(s["support_space"], "|Hx|");
    assert!(s["clusters"].as_u64().unwrap() >= 1);
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = cortical(&[
        "sweep",
        "awgn-peak",
        "grid=0.5,1.0",
        "steps=10",
        "batch_size=64",
        "threads=2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "A,capacity_nats,capacity_bits,shannon_bits,mckellips_bits,n_atoms");
    assert_eq!(lines.len(), 3);
    assert!(dir.path().join("bifurcation.svg").is_file());
    assert!(dir.path().join("capacity.svg").is_file());
}

#[test]
fn gradient_check_passes() {
    let o = cortical(&["check", "grad"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn undertrained_discriminator_fails_check() {
    let o = cortical(&["check", "discriminator", "rho=0.9", "steps=1"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}
