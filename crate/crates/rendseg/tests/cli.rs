//! Black-box tests of the `rendseg` binary.

use std::path::Path;
use std::process::{Command, Output};

use rendseg::data::grid_io::load_grid;
use rendseg::data::predictions::load_predictions;
use rendseg::mask::rle_encode;
use rendseg::renderer::{binarize, upsample_baseline};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rendseg"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn rendseg");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, extra: &[&str]) {
    run_ok(bin().args([
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--size",
        "64",
        "--pitch",
        "16",
        "--line-width",
        "8",
        "--total",
        "58",
        "--seed",
        "7",
    ])
    .args(extra));
}

#[test]
fn synth_layout_determinism_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    for name in ["manifest.json", "annotations.json", "splits.json", "synth_config.json"] {
        assert!(data.join(name).is_file(), "{name} missing");
    }
    assert!(data.join("images").read_dir().unwrap().count() > 0);

    let manifest1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("manifest.json")).unwrap())
            .unwrap();

    // Refusing to overwrite without --force.
    let out = bin()
        .args(["synth", "--out", data.to_str().unwrap(), "--size", "64", "--pitch", "16", "--line-width", "8", "--total", "58", "--seed", "7"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));

    // Same seed + --force reproduces identical output hashes.
    synth(&data, &["--force"]);
    let manifest2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest1["output_hashes"], manifest2["output_hashes"]);
    assert_eq!(manifest1["seed"], manifest2["seed"]);
}

#[test]
fn seed_env_variable_matches_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let by_flag = tmp.path().join("flag");
    let by_env = tmp.path().join("env");
    synth(&by_flag, &[]);
    run_ok(
        bin()
            .args([
                "synth", "--out", by_env.to_str().unwrap(), "--size", "64", "--pitch", "16",
                "--line-width", "8", "--total", "58",
            ])
            .env("RENDSEG_SEED", "7"),
    );
    let h = |d: &Path| -> serde_json::Value {
        serde_json::from_str::<serde_json::Value>(
            &std::fs::read_to_string(d.join("manifest.json")).unwrap(),
        )
        .unwrap()["output_hashes"]
            .clone()
    };
    assert_eq!(h(&by_flag), h(&by_env));
}

#[test]
fn config_file_merges_with_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "[synth]\nseed = 7\ntotal = 58\nsize = 128\npitch = 16\nline_width = 8\n").unwrap();
    let data = tmp.path().join("data");
    // --size overrides the config's 128.
    run_ok(bin().args([
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--size",
        "64",
    ]));
    let sc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("synth_config.json")).unwrap())
            .unwrap();
    assert_eq!(sc["image_size"], 64);
    assert_eq!(sc["total_images"], 58);
    assert_eq!(sc["rng_seed"], 7);
}

#[test]
fn full_pipeline_train_refine_eval_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);

    let head = tmp.path().join("head.rsph");
    run_ok(bin().args([
        "train-head",
        "--data",
        data.to_str().unwrap(),
        "--out",
        head.to_str().unwrap(),
        "--steps",
        "3000",
        "--lr",
        "0.1",
        "--batch",
        "32",
        "--points-per-image",
        "128",
        "--seed",
        "5",
    ]));
    assert!(head.is_file());
    let csv = std::fs::read_to_string(head.with_extension("loss.csv")).unwrap();
    assert!(csv.starts_with("step,probe_loss\n"));
    assert!(csv.lines().count() > 2, "loss curve should have entries");

    let preds = tmp.path().join("preds.json");
    run_ok(bin().args([
        "refine",
        "--data",
        data.to_str().unwrap(),
        "--head",
        head.to_str().unwrap(),
        "--out",
        preds.to_str().unwrap(),
        "--split",
        "test",
        "--points",
        "128",
    ]));
    let instances = load_predictions(&preds).unwrap();
    assert!(!instances.is_empty());

    // --points 0 must reproduce plain bilinear upsampling of the coarse grid.
    let base_preds = tmp.path().join("baseline.json");
    run_ok(bin().args([
        "refine",
        "--data",
        data.to_str().unwrap(),
        "--head",
        head.to_str().unwrap(),
        "--out",
        base_preds.to_str().unwrap(),
        "--split",
        "test",
        "--points",
        "0",
    ]));
    let baseline = load_predictions(&base_preds).unwrap();
    let sc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("synth_config.json")).unwrap())
            .unwrap();
    let steps = sc["coarse_steps"].as_u64().unwrap() as usize;
    for inst in &baseline {
        let coarse = load_grid(&data.join("coarse").join(format!("{}.grid", inst.image_id))).unwrap();
        let expected = rle_encode(&binarize(&upsample_baseline(&coarse, steps), 0.5).unwrap());
        assert_eq!(inst.mask, expected, "image {}", inst.image_id);
    }

    let eval_dir = tmp.path().join("eval");
    let out = run_ok(bin().args([
        "eval",
        "--preds",
        preds.to_str().unwrap(),
        "--gt",
        data.to_str().unwrap(),
        "--split",
        "test",
        "--out",
        eval_dir.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Total (mAP)"), "{stdout}");
    assert!(eval_dir.join("report_bbox.json").is_file());
    assert!(eval_dir.join("report_segm.json").is_file());
    assert!(eval_dir.join("report.txt").is_file());

    let stats_dir = tmp.path().join("stats");
    let out = run_ok(bin().args([
        "stats",
        "--preds",
        preds.to_str().unwrap(),
        "--out",
        stats_dir.to_str().unwrap(),
        "--min-score",
        "0.0",
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Count"), "{stdout}");
    assert!(stats_dir.join("area_stats.json").is_file());
    assert!(stats_dir.join("boxplot.json").is_file());
}

#[test]
fn report_prints_published_relative_improvements() {
    // Totals from the reference comparison: bbox 0.584 -> 0.653 and
    // segmentation 0.542 -> 0.617 must render as +11.8% and +13.8%.
    let tmp = tempfile::tempdir().unwrap();
    let write_report = |name: &str, mode: &str, map: f64| -> std::path::PathBuf {
        let path = tmp.path().join(name);
        let doc = serde_json::json!({
            "mode": mode,
            "per_class": {},
            "map": map,
            "ap50": null,
            "ap75": null,
            "area_map": {},
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
        path
    };
    for (mode, base, improved, expect) in [
        ("bbox", 0.584, 0.653, "+11.8%"),
        ("segmentation", 0.542, 0.617, "+13.8%"),
    ] {
        let b = write_report(&format!("b_{mode}.json"), mode, base);
        let i = write_report(&format!("i_{mode}.json"), mode, improved);
        let out = run_ok(bin().args([
            "report",
            "--baseline",
            b.to_str().unwrap(),
            "--improved",
            i.to_str().unwrap(),
        ]));
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(stdout.contains(expect), "mode {mode}: {stdout}");
    }
}

#[test]
fn eval_rejects_missing_split() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let preds = tmp.path().join("nothing.json");
    std::fs::write(&preds, "[]").unwrap();
    let out = bin()
        .args([
            "eval",
            "--preds",
            preds.to_str().unwrap(),
            "--gt",
            data.to_str().unwrap(),
            "--split",
            "nope",
            "--out",
            tmp.path().join("e").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}
