use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pic-offload"))
        .args(args)
        .output()
        .unwrap()
}

fn tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.cfg");
    std::fs::write(
        &p,
        "preset = small  # 8x8x8\nppc = 2\ncycles = 2\nrepetitions = 2\ntransfer.throttle = off\n",
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = cli(&["bench", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(cli(&[]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "warp = 9\n").unwrap();
    let out = cli(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp"));
    let missing = dir.path().join("nope.cfg");
    assert_eq!(
        cli(&["run", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let cfg = tiny_config(dir.path());
    let out = cli(&["run", "--config", &cfg, "--workers", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("workers"));
}

#[test]
fn run_writes_timings_and_device_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = cli(&[
        "run",
        "--config",
        &cfg,
        "--engine",
        "prefetch",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bench = lines(&out_dir.join("bench.csv"));
    assert_eq!(
        bench[0],
        "engine,workers,ppc,rep,cycle,t_field,t_mover,t_moments,t_exchange"
    );
    assert_eq!(bench.len(), 3);
    assert!(lines(&out_dir.join("executor_0.csv")).len() > 1);
}

#[test]
fn scale_writes_one_summary_row_per_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("s");
    let out = cli(&[
        "scale",
        "--config",
        &cfg,
        "--engine",
        "prefetch",
        "--workers",
        "1,2,4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = lines(&out_dir.join("summary.csv"));
    assert_eq!(
        summary[0],
        "engine,workers,ppc,mpa,stddev,speedup,efficiency"
    );
    assert_eq!(summary.len(), 4);
    assert!(summary[1].starts_with("prefetch,1,2,"));
    assert!(summary[1].ends_with(",1.0000,1.0000"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("efficiency"));
}

#[test]
fn profile_writes_one_row_per_ppc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out_dir = dir.path().join("p");
    let out = cli(&[
        "profile",
        "--config",
        &cfg,
        "--ppc",
        "1,2,3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = lines(&out_dir.join("profile.csv"));
    assert_eq!(rows[0], "ppc,field_pct,mover_pct,moments_pct");
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        let sum: f64 = r
            .split(',')
            .skip(1)
            .map(|x| x.parse::<f64>().unwrap())
            .sum();
        assert!((sum - 100.0).abs() <= 0.1, "{r}");
    }
}

#[test]
fn bench_and_sweep_are_repeatable_outside_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let shape = |sub: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = cli(&[
            sub,
            "--config",
            &cfg,
            "--engine",
            "cpu,naive",
            "--ppc",
            "1,2",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        lines(&out_dir.join("bench.csv"))
            .iter()
            .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
    };
    let a = shape("bench", "a");
    assert_eq!(a, shape("bench", "b"));
    assert_eq!(a.len(), 1 + 2 * 2 * 2 * 2);
    let sweep = shape("ppc-sweep", "c");
    assert_eq!(sweep.len(), 1 + 2 * 2 * 2);
    assert!(sweep[1..].iter().all(|l| l.starts_with("prefetch,")));
}
