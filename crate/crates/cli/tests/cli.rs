use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const ORTHO_MODEL: &str = r#"{"d": 2, "k": 1, "n": 1000,
    "noise": {"data": {"kind": "orthogonal_complement", "level": 1.01},
              "augmentation": {"kind": "orthogonal_complement", "level": 1.01}}}"#;

const ISO_MODEL: &str = r#"{"d": 3, "k": 1, "n": 400,
    "noise": {"data": {"kind": "isotropic", "scale": 0.1},
              "augmentation": {"kind": "isotropic", "scale": 0.1}}}"#;

fn ssl_genlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssl-genlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SSL_GENLAB_THREADS")
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn sample(tmp: &TempDir, model: &str, name: &str) -> PathBuf {
    let cfg = write(tmp, &format!("{name}.json"), model);
    let out = tmp.path().join(name);
    let o = ssl_genlab(&["sample", s(&cfg)], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("dataset.csv")
}

#[test]
fn sample_writes_n_rows_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = sample(&tmp, ORTHO_MODEL, "a");
    let b = sample(&tmp, ORTHO_MODEL, "b");
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert!(text.starts_with("index,z1,x1,x2,xplus1,xplus2\n"));
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(a.parent().unwrap().join("manifest.json").exists());
    assert!(a.parent().unwrap().join("params.json").exists());
}

#[test]
fn seed_flag_changes_the_sample() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "m.json", ORTHO_MODEL);
    ssl_genlab(&["sample", s(&cfg), "--seed", "1"], &tmp.path().join("s1"));
    ssl_genlab(&["sample", s(&cfg), "--seed", "2"], &tmp.path().join("s2"));
    let a = fs::read(tmp.path().join("s1/dataset.csv")).unwrap();
    let b = fs::read(tmp.path().join("s2/dataset.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn invalid_gamma_exits_2_and_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "bad.json", &ORTHO_MODEL.replacen("1.01}}}", "0.5}}}", 1));
    let out = tmp.path().join("out");
    let o = ssl_genlab(&["sample", s(&cfg)], &out);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("noise.augmentation.level") && err.contains("γ > 1"), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_is_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "bad.json", &ORTHO_MODEL.replacen("\"n\"", "\"samples\"", 1));
    let o = ssl_genlab(&["sample", s(&cfg)], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("samples"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_3() {
    let tmp = TempDir::new().unwrap();
    let o = ssl_genlab(&["sample", "/nonexistent/model.json"], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn pca_fit_is_orthonormal() {
    let tmp = TempDir::new().unwrap();
    let data = sample(&tmp, ISO_MODEL, "iso");
    let out = tmp.path().join("fit");
    let o = ssl_genlab(&["fit", s(&data), "--method", "pca"], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(out.join("fit.json"));
    let w: Vec<f64> = v["w_hat"].as_array().unwrap().iter().map(|r| r[0].as_f64().unwrap()).collect();
    let norm: f64 = w.iter().map(|x| x * x).sum();
    assert!((norm - 1.0).abs() < 1e-10);
    assert_eq!(v["method"], "pca");
    assert!(v["alignment"][0].as_f64().unwrap() > 0.99);
}

#[test]
fn ssl_beats_pca_on_orthogonal_data() {
    let tmp = TempDir::new().unwrap();
    let data = sample(&tmp, ORTHO_MODEL, "ortho");
    let align = |method: &str| {
        let out = tmp.path().join(method);
        let o = ssl_genlab(&["fit", s(&data), "--method", method], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        json(out.join("fit.json"))["alignment"][0].as_f64().unwrap()
    };
    assert!(align("ssl") > align("pca"));
}

#[test]
fn numeric_fit_matches_ssl_and_uses_model_frame() {
    let tmp = TempDir::new().unwrap();
    let model = ORTHO_MODEL.replacen("\"n\": 1000", "\"n\": 1000, \"w\": [[0.6], [0.8]]", 1);
    let data = sample(&tmp, &model, "m");
    let cfg = tmp.path().join("m.json");
    let out = tmp.path().join("fit");
    let o = ssl_genlab(&["fit", s(&data), "--method", "numeric", "--model", s(&cfg)], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(out.join("fit.json"));
    assert_eq!(v["true_w_source"], "model");
    assert_eq!(v["converged"], true);
    assert!(v["alignment"][0].as_f64().unwrap() > 0.99);
}

#[test]
fn fit_errors() {
    let tmp = TempDir::new().unwrap();
    let data = sample(&tmp, ORTHO_MODEL, "d");
    let out = tmp.path().join("fit");

    let o = ssl_genlab(&["fit", s(&data), "--method", "pca", "--k", "3"], &out);
    assert_eq!(o.status.code(), Some(2));
    let o = ssl_genlab(&["fit", s(&data), "--method", "map"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--model"));

    let bad = write(&tmp, "bad.csv", "index,x1,x2,xplus1,xplus2\n0,1,2,3,4\n1,5,6,7\n");
    let o = ssl_genlab(&["fit", s(&bad), "--method", "pca", "--k", "1"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn small_sweep_is_deterministic_and_draws_svg() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "sweep.json",
        r#"{"regime": "orthogonal", "grid_a": [1.1, 1.8], "grid_b": [1.2, 1.6],
            "d": 2, "k": 1, "n": 200, "reps": 3, "base_seed": 4}"#,
    );
    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        let o = ssl_genlab(&["sweep", s(&cfg), "--svg", "--threads", threads], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a", "1"), run("b", "4"));
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert_eq!(csv, fs::read_to_string(b.join("sweep.csv")).unwrap());
    assert!(fs::read_to_string(a.join("heatmap.svg")).unwrap().contains("<rect"));
}

#[test]
fn sweep_rejects_bad_grid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "sweep.json",
        r#"{"regime": "orthogonal", "grid_a": [0.9], "grid_b": [1.2],
            "d": 2, "k": 1, "n": 200, "reps": 3, "base_seed": 4}"#,
    );
    let o = ssl_genlab(&["sweep", s(&cfg)], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gmm_demo_defaults() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = ssl_genlab(&["gmm-demo", "--seed", "7", "--svg"], &out);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["embeddings.csv", "points.csv", "kde_true.csv", "kde_pca.csv", "kde_ssl.csv", "frames.json", "kde.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let emb = fs::read_to_string(a.join("embeddings.csv")).unwrap();
    assert_eq!(emb.lines().count(), 1001);
    assert!(emb.starts_with("index,z_true,z_pca,z_ssl\n"));
    assert!(fs::read_to_string(a.join("points.csv")).unwrap().starts_with("index,x1,x2,xplus1,xplus2\n"));
    let frames = json(a.join("frames.json"));
    assert!(frames["alignment_ssl"].as_f64().unwrap() > 0.99);
}

#[test]
fn gmm_demo_weights_must_sum_to_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "gmm.json", r#"{"weights": [0.5, 0.4, 0.2]}"#);
    let o = ssl_genlab(&["gmm-demo", s(&cfg)], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn posterior_writes_chain() {
    let tmp = TempDir::new().unwrap();
    let data = sample(&tmp, ORTHO_MODEL, "d");
    let cfg = tmp.path().join("d.json");
    let out = tmp.path().join("post");
    let o = ssl_genlab(
        &["posterior", "--model", s(&cfg), "--data", s(&data), "--samples", "300"],
        &out,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let chain = fs::read_to_string(out.join("chain.csv")).unwrap();
    assert!(chain.starts_with("index,w1,w2\n"));
    assert_eq!(chain.lines().count(), 301);
    let v = json(out.join("posterior.json"));
    assert!(v["mean_alignment_to_ssl"].as_f64().unwrap() > 0.95);
    let rate = v["acceptance_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("gmm");
    let o = ssl_genlab(&["gmm-demo", "--seed", "3"], &out);
    assert!(o.status.success());
    let replayed = tmp.path().join("replayed");
    let o = ssl_genlab(&["replay", s(&out.join("manifest.json"))], &replayed);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["embeddings.csv", "points.csv", "frames.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(replayed.join(f)).unwrap(), "{f}");
    }
    let m = json(replayed.join("manifest.json"));
    assert_eq!(m["subcommand"], "gmm-demo");
    assert_eq!(m["seed"], 3);
    assert!(m["duration_secs"].as_f64().is_some());
}
