use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use shapx_core::{Activation, Checkpoint, ExplainerNet, Objective};

fn shapx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapx"))
        .args(args)
        .env_remove("SHAPX_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = shapx(args);
    assert!(
        out.status.success(),
        "shapx {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn phi(v: &Value) -> Vec<f64> {
    v["phi"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exact_glove_to_stdout() {
    let out = ok(&["exact", "--game", "glove"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = phi(&v);
    for (a, b) in p.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    for key in ["method", "d", "v_empty", "v_full", "seed", "elapsed_ms"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["d"], 3);
}

#[test]
fn exact_additive_and_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut results = Vec::new();
    for method in ["shapley", "random-order", "least-squares", "unified:lsv"] {
        let path = dir.path().join(format!("{method}.json"));
        ok(&["exact", "--game", "additive", "--method", method, "--output", s(&path)]);
        results.push(phi(&json(&path)));
    }
    for p in &results {
        for (a, b) in p.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-10, "{p:?}");
        }
    }
    assert!(dir.path().join("shapley.config.toml").exists());
}

#[test]
fn missing_input_path_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent-model.json");
    let out = shapx(&["exact", "--model", s(&missing), "--data", "data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent-model.json"));

    let cfg = dir.path().join("absent.toml");
    let out = shapx(&["--config", s(&cfg), "exact", "--game", "glove"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["estimate", "--game", "glove", "--samples", "0"],
        vec!["estimate", "--game", "glove", "--method", "bogus"],
        vec!["estimate", "--game", "nope"],
        vec!["exact"],
        vec!["--workers", "0", "exact", "--game", "glove"],
        vec!["eval", "--metric", "l1l2", "--out-dir", "x"],
        vec!["estimate", "--game", "glove", "--method", "kernelshap", "--paired", "--samples", "3"],
        vec!["frobnicate"],
    ] {
        let out = shapx(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn paired_kernelshap_output_is_efficient() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.json");
    ok(&[
        "estimate", "--game", "random_uniform", "--players", "12", "--method", "kernelshap", "--paired",
        "--samples", "2048", "--output", s(&path),
    ]);
    let v = json(&path);
    let total: f64 = phi(&v).iter().sum();
    let v_all = v["v_full"].as_f64().unwrap() - v["v_empty"].as_f64().unwrap();
    assert!((total - v_all).abs() < 1e-8);
    assert_eq!(v["samples_used"], 2048);
    assert_eq!(v["estimator"]["paired"], true);
    assert_eq!(v["estimator"]["samples"], 2048);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, omit: bool| {
        let path = dir.path().join(name);
        let mut args = vec!["estimate", "--game", "mlp", "--method", "permutation", "--samples", "64", "--seed", "9"];
        if omit {
            args.push("--omit-timing");
        }
        args.extend(["--output", s(&path)]);
        ok(&args);
        fs::read(&path).unwrap()
    };
    assert_eq!(run("a.json", true), run("b.json", true));
    let strip = |bytes: Vec<u8>| {
        let mut v: Value = serde_json::from_slice(&bytes).unwrap();
        v.as_object_mut().unwrap().remove("elapsed_ms");
        v
    };
    assert_eq!(strip(run("c.json", false)), strip(run("d.json", false)));
}

#[test]
fn seed_env_fallback_and_flag_precedence() {
    let run = |flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_shapx"));
        cmd.args(["estimate", "--game", "glove", "--method", "permutation", "--samples", "8"]);
        if let Some(seed) = flag {
            cmd.args(["--seed", seed]);
        }
        let out = cmd.env("SHAPX_SEED", "41").output().unwrap();
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None), 41);
    assert_eq!(run(Some("5")), 5);
    let bad = Command::new(env!("CARGO_BIN_EXE_shapx"))
        .args(["exact", "--game", "glove"])
        .env("SHAPX_SEED", "minus one")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn config_file_precedence_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[estimate]\ngame = \"random_uniform\"\nplayers = 6\nsamples = 64\nmethod = \"kernelshap\"\n").unwrap();
    let out_file = dir.path().join("from-file.json");
    ok(&["--config", s(&cfg), "estimate", "--omit-timing", "--output", s(&out_file)]);
    let v = json(&out_file);
    assert_eq!(v["estimator"]["samples"], 64);
    assert_eq!(v["d"], 6);

    let flag_file = dir.path().join("flag.json");
    ok(&["--config", s(&cfg), "estimate", "--samples", "128", "--omit-timing", "--output", s(&flag_file)]);
    assert_eq!(json(&flag_file)["estimator"]["samples"], 128);

    let resolved = fs::read_to_string(dir.path().join("flag.config.toml")).unwrap();
    for line in ["samples = 128", "paired = false", "seed = 0", "game_seed = 0"] {
        assert!(resolved.contains(line), "{resolved}");
    }
    let before = fs::read(&flag_file).unwrap();
    fs::remove_file(&flag_file).unwrap();
    ok(&["--config", s(&dir.path().join("flag.config.toml")), "estimate"]);
    assert_eq!(fs::read(&flag_file).unwrap(), before);

    fs::write(&cfg, "[estimate]\nsamplez = 3\n").unwrap();
    let out = shapx(&["--config", s(&cfg), "estimate", "--game", "glove"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("samplez"));
}

#[test]
fn zero_epochs_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--epochs", "0", "--rows", "200", "--seed", "3", "--out-dir", s(dir.path())]);
    assert_eq!(fs::read_to_string(dir.path().join("loss.csv")).unwrap(), "epoch,train_loss,validation_loss\n");
    let ckpt = Checkpoint::load(&dir.path().join("explainer.json")).unwrap();
    let init = ExplainerNet::new(8, 8, 1, &ExplainerNet::default_hidden(8), Activation::Elu, Objective::SimShap, 3).unwrap();
    assert_eq!(ckpt.params, init.mlp().params());
    assert_eq!(ckpt.seed, 3);
    assert!(ckpt.train_config.is_some());
}

#[test]
fn checkpoint_reload_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--epochs", "2", "--rows", "200", "--out-dir", s(dir.path())]);
    let path = dir.path().join("explainer.json");
    let ckpt = Checkpoint::load(&path).unwrap();
    let again = dir.path().join("again.json");
    ckpt.save(&again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    let net = ExplainerNet::from_checkpoint(&ckpt).unwrap();
    let bits: Vec<u64> = net.mlp().params().iter().map(|p| p.to_bits()).collect();
    let reloaded: Vec<u64> = Checkpoint::load(&again).unwrap().params.iter().map(|p| p.to_bits()).collect();
    assert_eq!(bits, reloaded);
}

#[test]
fn simshap_recovers_linear_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--method", "simshap", "--epochs", "150", "--out-dir", s(dir.path())]);
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["reference"], "linear-closed-form");
    let rel = report["relative_l2"].as_f64().unwrap();
    assert!(rel < 0.05, "relative l2 {rel}");
}

#[test]
fn normalized_fastshap_emits_efficient_attributions() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["train", "--method", "fastshap", "--normalize", "--epochs", "3", "--rows", "300", "--out-dir", s(dir.path())]);
    let attrs = json(&dir.path().join("attributions.json"));
    let attrs = attrs.as_array().unwrap();
    assert!(!attrs.is_empty());
    for a in attrs {
        let total: f64 = phi(a).iter().sum();
        assert!((total - a["v_all"].as_f64().unwrap()).abs() < 1e-8);
        assert_eq!(a["method"], "amortized-fast-shap-normalized");
    }
}

#[test]
fn training_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let out = dir.path().join(format!("w{workers}"));
        ok(&["--workers", workers, "train", "--epochs", "2", "--rows", "200", "--out-dir", s(&out)]);
        ["explainer.json", "loss.csv", "attributions.json", "report.json"]
            .map(|f| fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn csv_dataset_with_missing_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "a,b,label\n1,2,0\n3,,1\n").unwrap();
    let out = shapx(&["train", "--data", s(&data), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("\"b\"") && err.contains("d.csv"), "{err}");
}

#[test]
fn csv_training_then_model_game() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("u,v,w,target\n");
    for k in 0..60 {
        let (u, v, w) = (k as f64 * 0.1, (k % 7) as f64, ((k * 13) % 5) as f64 - 2.0);
        text.push_str(&format!("{u},{v},{w},{}\n", 2.0 * u - v + 0.5 * w + 1.0));
    }
    let data = dir.path().join("lin.csv");
    fs::write(&data, text).unwrap();
    let out = dir.path().join("run");
    ok(&["train", "--data", s(&data), "--label", "target", "--epochs", "1", "--out-dir", s(&out)]);
    let model = out.join("model.json");
    let phi_path = dir.path().join("phi.json");
    ok(&["exact", "--model", s(&model), "--data", s(&data), "--label", "target", "--row", "10", "--output", s(&phi_path)]);
    let p = phi(&json(&phi_path));
    // Row 10: u = 1, v = 3, w = -2; zero baseline.
    for (a, b) in p.iter().zip([2.0, -3.0, -1.0]) {
        assert!((a - b).abs() < 1e-8, "{p:?}");
    }
}

#[test]
fn eval_l1l2_of_exact_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("t.json");
    ok(&["exact", "--game", "majority", "--output", s(&truth)]);
    ok(&["eval", "--metric", "l1l2", "--estimate", s(&truth), "--truth", s(&truth), "--out-dir", s(dir.path())]);
    let report = json(&dir.path().join("distances.json"));
    assert_eq!(report["l1"], 0.0);
    assert_eq!(report["l2"], 0.0);
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn eval_convergence_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["eval", "--metric", "convergence", "--game", "random_uniform", "--players", "10", "--out-dir", s(dir.path())]);
    let report = json(&dir.path().join("convergence.json"));
    assert_eq!(report["monotone"], true);
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("samples,mean_l1,std_l1,mean_l2,std_l2,seeds\n"));
}

#[test]
fn eval_insertion_and_deletion_curves() {
    let dir = tempfile::tempdir().unwrap();
    for metric in ["insertion", "deletion"] {
        let out = dir.path().join(metric);
        ok(&["eval", "--metric", metric, "--game", "mlp", "--out-dir", s(&out)]);
        let report = json(&out.join("curve.json"));
        let auc = report["auc"].as_f64().unwrap();
        let random = report["random_mean_auc"].as_f64().unwrap();
        if metric == "insertion" {
            assert!(auc > random);
        } else {
            assert!(auc < random);
        }
        let csv = fs::read_to_string(out.join("curve.csv")).unwrap();
        assert!(csv.starts_with("fraction,score\n"));
        assert_eq!(csv.lines().count(), 14);
    }
}

#[test]
fn bench_shows_amortized_speedup() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["eval", "--metric", "bench", "--out-dir", s(dir.path())]);
    let report = json(&dir.path().join("bench.json"));
    assert_eq!(report["features"], 64);
    let ratio = report["ratio"].as_f64().unwrap();
    assert!(ratio >= 100.0, "ratio {ratio}");
    assert!(fs::read_to_string(dir.path().join("timing.csv")).unwrap().starts_with("method,median_ms,p95_ms,runs\n"));
}
