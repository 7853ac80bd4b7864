//! End-to-end tests of the `geolift` binary: artifact contracts, exit codes
//! and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geolift_core::ingestion::{save_dense_matrix, save_point_cloud};
use geolift_core::kernels::{kernel_matrix, sample_latent_grid, KernelModel};
use geolift_core::points::PointCloud;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_geolift")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("geolift-cli-tests")
        .join(format!("{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn simulate_writes_grid_and_is_deterministic() {
    let dir = workdir("simulate");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "seed": 123,
            "input": {"simulate": {"kernel": {"name": "cosine-grid", "rho": 1.0}, "n": 100}}
        }"#,
    );
    for out in ["a", "b"] {
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.join(out).to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    // Same seed twice: byte-identical outputs.
    for f in ["Z.csv", "A.edges", "meta.json"] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f} differs between identical runs"
        );
    }
    // 100-row Z.csv whose first point is the box corner.
    let z = fs::read_to_string(dir.join("a/Z.csv")).unwrap();
    assert_eq!(z.lines().count(), 100);
    let first: Vec<f64> = z
        .lines()
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let corner = -(std::f64::consts::PI - 0.25);
    assert!((first[0] - corner).abs() < 1e-12);
    assert!((first[1] - corner).abs() < 1e-12);
}

#[test]
fn simulate_rho_zero_gives_empty_edge_file() {
    let dir = workdir("rho-zero");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "seed": 5,
            "input": {"simulate": {"kernel": {"name": "cosine-grid", "rho": 0.0}, "n": 64}}
        }"#,
    );
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read(dir.join("out/A.edges")).unwrap(), b"");
}

#[test]
fn unknown_config_key_exits_2_before_work() {
    let dir = workdir("unknown-key");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{"seed": 1, "input": {"simulate": {"kernel": {"name": "cosine-grid"}, "n": 100}}, "typo_key": 1}"#,
    );
    let o = run(&[
        "pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.join("out/Z.csv").exists(), "no artifacts before validation");
}

#[test]
fn invalid_kernel_name_lists_catalog() {
    let dir = workdir("bad-kernel");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{"seed": 1, "input": {"simulate": {"kernel": {"name": "no-such-kernel"}, "n": 100}}}"#,
    );
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn embed_p_larger_than_n_exits_2() {
    let dir = workdir("p-too-big");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "seed": 1,
            "input": {"simulate": {"kernel": {"name": "cosine-grid"}, "n": 16}},
            "spectral": {"p": 17}
        }"#,
    );
    let o = run(&[
        "embed",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn embed_degree_correct_gives_unit_rows() {
    let dir = workdir("degree-correct");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "seed": 9,
            "input": {"simulate": {"kernel": {"name": "cosine-grid"}, "n": 100}},
            "spectral": {"p": 5, "degree_correct": true}
        }"#,
    );
    let o = run(&[
        "embed",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = fs::read_to_string(dir.join("out/X.csv")).unwrap();
    for line in x.lines() {
        let norm: f64 = line
            .split(',')
            .map(|v| v.parse::<f64>().unwrap().powi(2))
            .sum::<f64>()
            .sqrt();
        assert!((norm - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn embed_auto_rank_reports_finite_rank_of_noiseless_matrix() {
    // Additive cosine with two components and no constant term: exact rank 4
    // with a balanced signal group on the wide box, which the
    // profile-likelihood split finds in one pass.
    let dir = workdir("auto-rank");
    let h = std::f64::consts::PI - 0.25;
    let kernel =
        KernelModel::additive_cosine(1.0, vec![0.25, 0.25], 0.0, vec![(-h, h), (-h, h)]).unwrap();
    let z = sample_latent_grid(kernel.domain(), 100).unwrap();
    let a = kernel_matrix(&kernel, &z).unwrap();
    save_dense_matrix(&a, &dir.join("A.csv")).unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        &format!(
            r#"{{
                "seed": 1,
                "input": {{"dense": {{"path": {:?}}}}},
                "spectral": {{"p": "auto", "max_p": 12}}
            }}"#,
            dir.join("A.csv")
        ),
    );
    let o = run(&[
        "embed",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rank: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/rank.json")).unwrap()).unwrap();
    assert_eq!(rank["p"], 4);
    assert_eq!(rank["requested"], "auto");
    // X.csv has 4 columns.
    let x = fs::read_to_string(dir.join("out/X.csv")).unwrap();
    assert_eq!(x.lines().next().unwrap().split(',').count(), 4);
}

#[test]
fn isomap_line_cloud_and_quantile_echo() {
    let dir = workdir("isomap-line");
    let out = dir.join("out");
    fs::create_dir_all(&out).unwrap();
    let values: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
    let x = PointCloud::from_scalars(&values).unwrap();
    save_point_cloud(&x, &out.join("X.csv")).unwrap();

    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "seed": 1,
            "isomap": {"rule": {"epsilon_quantile": 0.05}, "d": 1, "write_geodesics": true,
                       "scatter": {}}
        }"#,
    );
    let o = run(&[
        "isomap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // Diagnostics echo the realized epsilon, which must match the quantile of
    // pairwise distances computed directly.
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    let expected = geolift_core::manifold::pairwise_distance_quantile(&x, 0.05).unwrap();
    assert_eq!(diag["rule"]["epsilon"].as_f64().unwrap(), expected);

    // Output equals the input up to flip and shift: compare sorted gaps.
    let zhat: Vec<f64> = fs::read_to_string(out.join("Zhat.csv"))
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(zhat.len(), 40);
    let mut gaps: Vec<f64> = zhat.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for g in gaps {
        assert!((g - 0.25).abs() <= 1e-8, "gap {g}");
    }

    let svg = fs::read_to_string(out.join("scatter.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn isomap_auto_epsilon_matches_library_value() {
    let dir = workdir("isomap-auto");
    let out = dir.join("out");
    fs::create_dir_all(&out).unwrap();
    let kernel = KernelModel::cosine_grid(1.0).unwrap();
    let z = sample_latent_grid(kernel.domain(), 64).unwrap();
    save_point_cloud(&z, &out.join("X.csv")).unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{"seed": 1, "isomap": {"rule": "epsilon_auto", "d": 2}}"#,
    );
    let o = run(&[
        "isomap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    let expected = geolift_core::manifold::min_connecting_epsilon(&z).unwrap();
    assert_eq!(diag["rule"]["epsilon"].as_f64().unwrap(), expected);
}

#[test]
fn isomap_missing_embedding_exits_2() {
    let dir = workdir("isomap-missing");
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{"seed": 1, "isomap": {"rule": "epsilon_auto", "d": 2}}"#,
    );
    let o = run(&[
        "isomap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn disconnected_with_require_connected_exits_3() {
    let dir = workdir("disconnected");
    let out = dir.join("out");
    fs::create_dir_all(&out).unwrap();
    let x = PointCloud::from_scalars(&[0.0, 0.1, 0.2, 100.0, 100.1]).unwrap();
    save_point_cloud(&x, &out.join("X.csv")).unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        r#"{
            "seed": 1,
            "isomap": {"rule": {"epsilon": 0.5}, "d": 1,
                       "component_policy": "require_connected"}
        }"#,
    );
    let o = run(&[
        "isomap",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains('3') && stderr.contains('2'), "component sizes on stderr: {stderr}");
}

#[test]
fn evaluate_identity_recovery_and_emd() {
    let dir = workdir("evaluate");
    let out = dir.join("out");
    fs::create_dir_all(&out).unwrap();

    // A 2-D cloud, isomap with a generous epsilon, then evaluate against the
    // Isomap output itself: recovery must be zero. Identical EMD groups with
    // full sampling give zero as well.
    let rows: Vec<Vec<f64>> = (0..20)
        .map(|i| vec![(i % 5) as f64, (i / 5) as f64])
        .collect();
    let x = PointCloud::from_rows(&rows).unwrap();
    save_point_cloud(&x, &out.join("X.csv")).unwrap();

    let labels: Vec<String> = (0..20)
        .map(|i| if i < 10 { "north".into() } else { "south".into() })
        .collect();
    fs::write(dir.join("labels.csv"), labels.join("\n") + "\n").unwrap();

    let iso_cfg = write_config(
        &dir,
        "iso.json",
        r#"{
            "seed": 7,
            "isomap": {"rule": {"epsilon": 10.0}, "d": 2, "write_geodesics": true}
        }"#,
    );
    let o = run(&[
        "isomap",
        "--config",
        iso_cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let eval_cfg = write_config(
        &dir,
        "eval.json",
        &format!(
            r#"{{
                "seed": 7,
                "evaluation": {{
                    "recovery_truth": {zhat:?},
                    "emd": {{"labels": {labels:?}, "group_a": "north", "group_b": "north",
                             "sample": 10, "reps": 1}}
                }}
            }}"#,
            zhat = out.join("Zhat.csv"),
            labels = dir.join("labels.csv")
        ),
    );
    let o = run(&[
        "evaluate",
        "--config",
        eval_cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["recovery_error"].as_f64().unwrap() <= 1e-12);
    assert_eq!(metrics["emd"]["mean"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluate_without_geodesics_explains_the_gate() {
    let dir = workdir("evaluate-gate");
    let out = dir.join("out");
    fs::create_dir_all(&out).unwrap();
    let x = PointCloud::from_scalars(&[0.0, 1.0, 2.0, 3.0]).unwrap();
    save_point_cloud(&x, &out.join("X.csv")).unwrap();
    let iso_cfg = write_config(
        &dir,
        "iso.json",
        r#"{"seed": 1, "isomap": {"rule": {"epsilon": 10.0}, "d": 1}}"#,
    );
    assert!(run(&[
        "isomap",
        "--config",
        iso_cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap()
    ])
    .status
    .success());
    let eval_cfg = write_config(
        &dir,
        "eval.json",
        &format!(
            r#"{{"seed": 1, "evaluation": {{"regression_truth": {:?}}}}}"#,
            out.join("Zhat.csv")
        ),
    );
    let o = run(&[
        "evaluate",
        "--config",
        eval_cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("write_geodesics"));
}

#[test]
fn pipeline_is_byte_deterministic_and_manifest_complete() {
    let dir = workdir("pipeline-determinism");
    let cfg_text = format!(
        r#"{{
            "seed": 123,
            "input": {{"simulate": {{"kernel": {{"name": "cosine-grid", "rho": 1.0}}, "n": 100}}}},
            "spectral": {{"p": 5}},
            "isomap": {{"rule": "epsilon_auto", "d": 2, "write_geodesics": true,
                        "scatter": {{"covariate": {{"path": {cov:?}, "column": 1}}}}}},
            "evaluation": {{"recovery_truth": {truth_a:?}, "regression_truth": {truth_a:?}}}
        }}"#,
        cov = dir.join("a/Z.csv"),
        truth_a = dir.join("a/Z.csv"),
    );
    let cfg_a = write_config(&dir, "cfg_a.json", &cfg_text);
    // Second run reads the truth from the first run's directory too, so the
    // runs differ only in the output directory and the thread cap; capping
    // to one worker must not change a single byte.
    for (out, threads) in [("a", None), ("b", Some("1"))] {
        let mut args = vec![
            "pipeline",
            "--config",
            cfg_a.to_str().unwrap(),
            "--out",
        ];
        let out_path = dir.join(out);
        let out_str = out_path.to_str().unwrap().to_string();
        args.push(&out_str);
        if let Some(t) = threads {
            args.push("--threads");
            args.push(t);
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names = [
        "Z.csv",
        "A.edges",
        "meta.json",
        "X.csv",
        "spectrum.csv",
        "rank.json",
        "Zhat.csv",
        "geodesics.csv",
        "diagnostics.json",
        "scatter.svg",
        "metrics.json",
        "pairs.csv",
        "run.json",
    ];
    for f in &names {
        let a = fs::read(dir.join("a").join(f)).unwrap();
        let b = fs::read(dir.join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    // run.json carries a hash for every artifact it wrote.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("a/run.json")).unwrap()).unwrap();
    for f in &names {
        if *f == "run.json" {
            continue;
        }
        assert!(
            manifest["artifacts"][f].as_str().unwrap().starts_with("sha256:"),
            "{f} missing from manifest"
        );
    }
}

#[test]
fn pipeline_time_series_to_correlation_runs() {
    let dir = workdir("pipeline-ts");
    // Four sinusoidal "cities" with one incomplete row to exercise dropping.
    let mut csv = String::from("city,d1,d2,d3,d4,d5,d6\n");
    for (name, phase) in [("a", 0.0), ("b", 0.4), ("c", 0.9), ("d", 1.5), ("e", 2.2)] {
        csv.push_str(name);
        for t in 0..6 {
            if name == "e" && t == 3 {
                csv.push(',');
            } else {
                csv.push_str(&format!(",{}", ((t as f64) * 0.7 + phase).sin()));
            }
        }
        csv.push('\n');
    }
    fs::write(dir.join("temps.csv"), csv).unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        &format!(
            r#"{{
                "seed": 3,
                "input": {{"time_series": {{"path": {:?}}}}},
                "spectral": {{"p": 2}},
                "isomap": {{"rule": {{"knn": 2}}, "d": 1}}
            }}"#,
            dir.join("temps.csv")
        ),
    );
    let o = run(&[
        "pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // The incomplete timestamp was dropped, not the entity: all five labels
    // survive.
    let labels = fs::read_to_string(dir.join("out/labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 5);
    let zhat = fs::read_to_string(dir.join("out/Zhat.csv")).unwrap();
    assert_eq!(zhat.lines().count(), 5);
}

#[test]
fn pipeline_edge_list_input_runs() {
    let dir = workdir("pipeline-edges");
    // A 6-cycle as a tiny connected graph.
    let mut edges = String::new();
    for i in 0..6 {
        edges.push_str(&format!("v{}\tv{}\n", i, (i + 1) % 6));
    }
    fs::write(dir.join("g.edges"), edges).unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        &format!(
            r#"{{
                "seed": 3,
                "input": {{"edge_list": {{"path": {:?}}}}},
                "spectral": {{"p": 2}},
                "isomap": {{"rule": {{"knn": 2}}, "d": 2}}
            }}"#,
            dir.join("g.edges")
        ),
    );
    let o = run(&[
        "pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let labels = fs::read_to_string(dir.join("out/labels.csv")).unwrap();
    assert_eq!(labels.lines().next().unwrap(), "v0");
}

#[test]
fn pipeline_recovery_error_decreases_with_n() {
    let dir = workdir("pipeline-sizes");
    let mut errors = Vec::new();
    for n in [100usize, 400] {
        let out = dir.join(format!("n{n}"));
        let cfg = write_config(
            &dir,
            &format!("cfg{n}.json"),
            &format!(
                r#"{{
                    "seed": 0,
                    "input": {{"simulate": {{"kernel": {{"name": "cosine-grid", "rho": 1.0}}, "n": {n}}}}},
                    "spectral": {{"p": 5}},
                    "isomap": {{"rule": "epsilon_auto", "d": 2}},
                    "evaluation": {{"recovery_truth": {truth:?}}}
                }}"#,
                truth = out.join("Z.csv"),
            ),
        );
        let o = run(&[
            "pipeline",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let metrics: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
        errors.push(metrics["recovery_error"].as_f64().unwrap());
    }
    assert!(errors[1] < errors[0], "recovery errors not decreasing: {errors:?}");
}

#[test]
fn asymmetric_dense_input_exits_2() {
    let dir = workdir("asym");
    fs::write(dir.join("A.csv"), "0,1\n0.5,0\n").unwrap();
    let cfg = write_config(
        &dir,
        "cfg.json",
        &format!(
            r#"{{"seed": 1, "input": {{"dense": {{"path": {:?}}}}}, "spectral": {{"p": 1}}}}"#,
            dir.join("A.csv")
        ),
    );
    let o = run(&[
        "embed",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
