use std::path::Path;
use std::process::{Command, Output};

fn rbergomi(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rbergomi"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("RVT_THREADS", t),
        None => cmd.env_remove("RVT_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn out_arg(path: &Path) -> String {
    format!("--out={}", path.display())
}

const SMALL_SMILE: [&str; 5] = [
    "smile",
    "--n_steps=32",
    "--n_paths=2000",
    "--maturities=0.25,1",
    "--deltas=0.1,0.3,0.5,0.7,0.9",
];

#[test]
fn smile_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smile.csv");
    let o = rbergomi(&[&SMALL_SMILE[..], &[&out_arg(&out)]].concat(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# rbergomi"));
    assert!(text.contains("# seed=20170831\n"));
    assert!(text.contains("# command=smile\n"));
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "maturity,delta_put,log_strike,implied_vol,std_err");
    assert_eq!(body.len(), 11);
    assert!(body[1].starts_with("0.25,0.1,-0."));
}

#[test]
fn output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("b{i}.csv"))).collect();
    let args = |p: &Path| {
        vec![
            "benchmark".to_string(),
            "--n_steps=16".into(),
            "--n_paths=200".into(),
            "--n_reps=6".into(),
            "--estimators=base,mixed".into(),
            "--tau_ms=1".into(),
            "--seed=9".into(),
            out_arg(p),
        ]
    };
    for (p, threads) in paths.iter().zip([Some("1"), Some("1"), Some("3")]) {
        let a = args(p);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = rbergomi(&a, threads);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let texts: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(texts[0], texts[1]);
    assert_eq!(texts[0], texts[2]);
    let s = String::from_utf8(texts[0].clone()).unwrap();
    assert!(s.contains("estimator,rho,label,log_strike,target_vol,bias,std,tau_ms,phi2,psi2\n"));
    assert!(s.contains("\nbase,-0.9,10P,-0.1787,0.2961,"));
}

#[test]
fn smile_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = rbergomi(&[&SMALL_SMILE[..], &["--seed=3", &out_arg(p)]].concat(), Some("2"));
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"alpha": -0.2, "n_steps": 4, "n_paths": 300, "seed": 5}"#).unwrap();
    let out = dir.path().join("v.csv");
    let cfg_arg = cfg.display().to_string();
    let o = rbergomi(
        &["volterra-check", "--config", &cfg_arg, "--seed=6", &out_arg(&out)],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("# seed=6\n"));
    assert!(text.contains("# alpha=-0.2\n"));
    assert!(text.contains("# n_steps=4\n"));
    assert!(text.contains("time,sample_mean,sample_var,model_var\n"));
    // five grid times plus the column row
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = rbergomi(&["smile", "--rho=1.5", &out_arg(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho"));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rho": -0.5, "volatility": 0.3}"#).unwrap();
    let cfg_arg = cfg.display().to_string();
    let o = rbergomi(&["smile", "--config", &cfg_arg, &out_arg(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("volatility"));

    let o = rbergomi(&["price", &out_arg(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    let o = rbergomi(&["smile"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = rbergomi(&["smile", "--out=x.csv"], Some("many"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn io_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    let o = rbergomi(&["volterra-check", "--n_steps=4", "--n_paths=10", &out_arg(&out)], None);
    assert_eq!(o.status.code(), Some(3));

    let missing = dir.path().join("nope.json").display().to_string();
    let o = rbergomi(
        &["smile", "--config", &missing, &out_arg(&dir.path().join("y.csv"))],
        None,
    );
    assert_eq!(o.status.code(), Some(3));

    let o = rbergomi(
        &[
            "extract-xi",
            &format!("--input={missing}"),
            &out_arg(&dir.path().join("z.csv")),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn extract_xi_reads_a_smile_file() {
    let dir = tempfile::tempdir().unwrap();
    let smile = dir.path().join("smile.csv");
    let xi = dir.path().join("xi.csv");
    let o = rbergomi(&[&SMALL_SMILE[..], &["--rho=0", &out_arg(&smile)]].concat(), None);
    assert_eq!(o.status.code(), Some(0));
    let input = format!("--input={}", smile.display());
    let o = rbergomi(&["extract-xi", &input, &out_arg(&xi)], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&xi).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!((r[1] / (0.235 * 0.235 * r[0]) - 1.0).abs() < 0.15, "{r:?}");
    }
}
