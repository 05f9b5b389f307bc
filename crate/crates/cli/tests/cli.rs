use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stein(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stein-sense"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STEIN_SENSE_THREADS")
        .output()
        .unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn header(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(String::from).collect()
}

fn assert_numeric_with_se(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let cols = header(path);
    for c in cols.iter().skip(1).filter(|c| !c.ends_with("_se")) {
        assert!(cols.contains(&format!("{c}_se")), "{c} has no error column");
    }
    for line in text.lines().skip(1) {
        for cell in line.split(',') {
            assert!(cell.parse::<f64>().unwrap().is_finite(), "{line}");
        }
    }
}

#[test]
fn manifest_reproduces_its_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&stein(&["fig1", "--reps", "2000", "--n-points", "4", "--seed", "7"], &a));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let keys: Vec<&str> = manifest.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["config", "seed", "version", "started_at", "duration_s", "outputs"] {
        assert!(keys.contains(&k), "missing {k}");
    }
    assert_eq!(manifest["seed"], 7);
    ok(&stein(&["--config", a.join("manifest.json").to_str().unwrap()], &b));
    assert_eq!(fs::read(a.join("fig1.csv")).unwrap(), fs::read(b.join("fig1.csv")).unwrap());
    assert_eq!(
        header(&a.join("fig1.csv")),
        [
            "N",
            "ad_sep_noisy_js",
            "ad_sep_noisy_js_se",
            "ad_seq_noisy_js",
            "ad_seq_noisy_js_se",
            "ad_seq_noiseless_js",
            "ad_seq_noiseless_js_se",
            "ad_seq_vs_sep_js",
            "ad_seq_vs_sep_js_se"
        ]
    );
    assert_numeric_with_se(&a.join("fig1.csv"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["fig2a", "--runs", "150", "--reps", "5000", "--n-min", "5", "--n-max", "30", "--n-step", "5"];
    let one = dir.path().join("one");
    let o = Command::new(env!("CARGO_BIN_EXE_stein-sense"))
        .args(args)
        .arg("--out")
        .arg(&one)
        .env("STEIN_SENSE_THREADS", "1")
        .output()
        .unwrap();
    ok(&o);
    let many = dir.path().join("many");
    let mut with_threads = args.to_vec();
    with_threads.extend(["--threads", "4"]);
    ok(&stein(&with_threads, &many));
    assert_eq!(fs::read(one.join("fig2a.csv")).unwrap(), fs::read(many.join("fig2a.csv")).unwrap());
    assert_eq!(
        header(&one.join("fig2a.csv")),
        [
            "N",
            "risk_pmle",
            "risk_pmle_se",
            "risk_pmjs",
            "risk_pmjs_se",
            "risk_mle",
            "risk_mle_se",
            "risk_mjs",
            "risk_mjs_se",
            "ad_pmjs_pmle",
            "ad_pmjs_pmle_se",
            "ad_mjs_mle",
            "ad_mjs_mle_se"
        ]
    );
    assert_numeric_with_se(&one.join("fig2a.csv"));
}

#[test]
fn fig2b_writes_curves_and_thetas() {
    let dir = tempfile::tempdir().unwrap();
    ok(&stein(&["fig2b", "--runs", "100", "--reps", "2000", "--n-min", "5", "--n-max", "15", "--n-step", "5"], dir.path()));
    assert_eq!(header(&dir.path().join("fig2b.csv")).len(), 9);
    assert_numeric_with_se(&dir.path().join("fig2b.csv"));
    let thetas = fs::read_to_string(dir.path().join("fig2b_theta.csv")).unwrap();
    let v: Vec<f64> = thetas.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(v.len(), 4);
    assert!(v.windows(2).all(|w| w[0] < w[1]));
    assert!(v[3] / v[0] > 100.0);
}

#[test]
fn bayes_and_risk_run() {
    let dir = tempfile::tempdir().unwrap();
    ok(&stein(&["bayes", "--reps", "2000", "--n-points", "2"], &dir.path().join("b")));
    let cols = header(&dir.path().join("b/bayes.csv"));
    assert!(cols.contains(&"table_bayes".to_string()) && cols.contains(&"mc_js_se".to_string()));
    assert_numeric_with_se(&dir.path().join("b/bayes.csv"));
    let noisy = ["risk", "--strategy", "sequential-noisy", "--delta", "2*I", "--reps", "2000", "--n-points", "3"];
    ok(&stein(&noisy, &dir.path().join("r")));
    assert_numeric_with_se(&dir.path().join("r/risk.csv"));
}

#[test]
fn missing_noise_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = stein(&["risk", "--strategy", "separate-noisy"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`delta`"));
    assert!(!dir.path().join("risk.csv").exists());
}

#[test]
fn bad_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, "{\n  \"experiment\": \"risk\",\n  \"reps\": \"many\"\n}\n").unwrap();
    let o = stein(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cfg.json:3:"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn selfcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = stein(&["selfcheck", "--reps", "20000", "--seed", "3"], dir.path());
    ok(&o);
    let text = fs::read_to_string(dir.path().join("selfcheck.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")), "{text}");
}
