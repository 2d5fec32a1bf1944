use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use statrs::distribution::{DiscreteCDF, Poisson};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

fn histbayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_histbayes"))
        .args(args)
        .env_remove("HISTBAYES_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{"workspace": {:?}, "priors": {{"mu": {{"normal": [0.0, 2.0]}}}}{extra}}}"#,
        data("three_bin.json")
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn sample_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = dir.path().join("o");
    let r = histbayes(&["sample", "--config", s(&cfg), "--draws", "150", "--warmup", "50", "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let csv = read(&out.join("chains.csv"));
    assert_eq!(csv.lines().next().unwrap(), "chain,draw,mu,bkg_norm");
    assert_eq!(csv.lines().count(), 1 + 4 * 150);
    let meta: Value = serde_json::from_str(&read(&out.join("chains_meta.json"))).unwrap();
    assert_eq!(meta["chains"].as_array().unwrap().len(), 4);
    assert!(out.join("priors_resolved.json").exists());
}

#[test]
fn samplers_share_resolved_priors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let (a, b) = (dir.path().join("hmc"), dir.path().join("mh"));
    for (kind, out) in [("hmc", &a), ("mh", &b)] {
        let r = histbayes(&["sample", "--config", s(&cfg), "--sampler", kind, "--draws", "100", "--seed", "3", "--out", s(out)]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
    }
    assert_eq!(read(&a.join("priors_resolved.json")), read(&b.join("priors_resolved.json")));
    assert_ne!(read(&a.join("chains.csv")), read(&b.join("chains.csv")));
}

#[test]
fn resolved_priors_reproduce_the_chains() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let first = dir.path().join("first");
    let r = histbayes(&["sample", "--config", s(&cfg), "--draws", "100", "--seed", "9", "--out", s(&first)]);
    assert_eq!(code(&r), 0);
    let replay = dir.path().join("replay.json");
    std::fs::write(
        &replay,
        format!(
            r#"{{"workspace": {:?}, "resolved_priors": {:?}}}"#,
            data("three_bin.json"),
            first.join("priors_resolved.json")
        ),
    )
    .unwrap();
    let second = dir.path().join("second");
    let r = histbayes(&["sample", "--config", s(&replay), "--draws", "100", "--seed", "9", "--out", s(&second)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(read(&first.join("chains.csv")), read(&second.join("chains.csv")));
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let r = histbayes(&["sample", "--config", s(&cfg), "--draws", "50", "--seed", "77", "--out", s(&a)]);
    assert_eq!(code(&r), 0);
    let r = Command::new(env!("CARGO_BIN_EXE_histbayes"))
        .args(["sample", "--config", s(&cfg), "--draws", "50", "--out", s(&b)])
        .env("HISTBAYES_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&r), 0);
    assert_eq!(read(&a.join("chains.csv")), read(&b.join("chains.csv")));
}

#[test]
fn missing_aux_exits_with_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws.json");
    let text = read(&data("three_bin.json")).replace(r#""aux": {"bkg_norm": {"a": 1.0, "sigma": 0.1}}"#, r#""aux": {}"#);
    std::fs::write(&ws, text).unwrap();
    let r = histbayes(&["sample", "--workspace", s(&ws), "--config", s(&config(dir.path(), "")), "--out", s(dir.path())]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains("bkg_norm"), "{}", stderr(&r));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(dir.path(), r#", "sampler": {"nsteps": 3}"#);
    assert_eq!(code(&histbayes(&["sample", "--config", s(&bad)])), 1);
    let no_prior = dir.path().join("np.json");
    std::fs::write(&no_prior, format!(r#"{{"workspace": {:?}}}"#, data("three_bin.json"))).unwrap();
    let r = histbayes(&["sample", "--config", s(&no_prior), "--out", s(dir.path())]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("mu"));
}

fn write_chain_file(path: &Path, rows: impl Iterator<Item = (usize, usize, Vec<f64>)>, names: &[&str]) {
    let mut text = format!("chain,draw,{}\n", names.join(","));
    for (c, d, v) in rows {
        let vals: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
        text.push_str(&format!("{c},{d},{}\n", vals.join(",")));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn diagnose_rejects_single_draw() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("one.csv");
    write_chain_file(&f, std::iter::once((0, 0, vec![1.0])), &["x"]);
    let r = histbayes(&["diagnose", s(&f), "--out", s(dir.path())]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("insufficient draws"), "{}", stderr(&r));
}

#[test]
fn diagnose_iid_needs_no_thinning() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("iid.csv");
    let rows: Vec<_> = (0..2)
        .flat_map(|c| (0..5000).map(move |d| (c, d)))
        .map(|(c, d)| {
            let v: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            (c, d, v)
        })
        .collect();
    write_chain_file(&f, rows.into_iter(), &["a", "b"]);
    let r = histbayes(&["diagnose", s(&f), "--out", s(dir.path())]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let report: Value = serde_json::from_str(&read(&dir.path().join("diagnostics.json"))).unwrap();
    for p in report["parameters"].as_array().unwrap() {
        assert_eq!(p["required_thinning"], 1, "{p}");
    }
    let acf = read(&dir.path().join("acf.csv"));
    assert_eq!(acf.lines().next().unwrap(), "parameter,lag,acf_raw,acf_thinned");
}

#[test]
fn predict_kinds_share_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let chains = dir.path().join("s");
    assert_eq!(code(&histbayes(&["sample", "--config", s(&cfg), "--draws", "200", "--out", s(&chains)])), 0);

    let r = histbayes(&["predict", "--kind", "posterior", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&r), 1);

    let (a, b) = (dir.path().join("prior"), dir.path().join("post"));
    assert_eq!(code(&histbayes(&["predict", "--kind", "prior", "--config", s(&cfg), "--out", s(&a)])), 0);
    let r = histbayes(&["predict", "--kind", "posterior", s(&chains.join("chains.csv")), "--config", s(&cfg), "--out", s(&b)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let keys = |p: &Path| {
        let v: Value = serde_json::from_str(&read(&p.join("summary.json"))).unwrap();
        let top: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        let bin: Vec<String> = v["bins"][0].as_object().unwrap().keys().cloned().collect();
        (top, bin)
    };
    assert_eq!(keys(&a), keys(&b));
    let header = |p: &Path| read(&p.join("predictive.csv")).lines().next().unwrap().to_owned();
    assert_eq!(header(&a), "draw,channel,bin,count");
    assert_eq!(header(&a), header(&b));
}

#[test]
fn constant_chain_intervals_are_poisson_quantiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let f = dir.path().join("const.csv");
    write_chain_file(&f, (0..20_000).map(|d| (0, d, vec![1.0, 1.0])), &["mu", "bkg_norm"]);
    let r = histbayes(&["predict", "--kind", "posterior", s(&f), "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let v: Value = serde_json::from_str(&read(&dir.path().join("summary.json"))).unwrap();
    for (b, nu) in [55.0, 60.0, 65.0].into_iter().enumerate() {
        let poisson = Poisson::new(nu).unwrap();
        for (key, mass) in [("central_68", 0.68), ("central_95", 0.95), ("central_99", 0.99)] {
            let lo = poisson.inverse_cdf((1.0 - mass) / 2.0) as i64;
            let hi = poisson.inverse_cdf((1.0 + mass) / 2.0) as i64;
            let got = &v["bins"][b][key];
            let (glo, ghi) = (got[0].as_i64().unwrap(), got[1].as_i64().unwrap());
            assert!((glo - lo).abs() <= 1 && (ghi - hi).abs() <= 1, "bin {b} {key}: [{glo}, {ghi}] vs [{lo}, {hi}]");
        }
    }
}

#[test]
fn calibrate_argument_and_control_exits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let r = histbayes(&["calibrate", "--config", s(&cfg), "--n-pseudo", "50", "--out", s(dir.path())]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("n-pseudo below minimum"));

    let r = histbayes(&[
        "calibrate", "--config", s(&cfg), "--n-pseudo", "100", "--sampler", "mh", "--proposal-scale", "1e-9",
        "--draws", "10", "--warmup", "0", "--out", s(dir.path()),
    ]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
    for f in ["calibration.json", "ranks.csv", "rank_histogram.csv", "pooled_histogram.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
