//! The five subcommands. Each is a pure function of (config, input files,
//! seed): artifacts are written in a fixed order with deterministic bytes,
//! so reruns are byte-identical.

use std::path::Path;

use geolift_core::distance::DistanceMatrix;
use geolift_core::eigen::{symmetric_eigs, EigenPairs};
use geolift_core::evaluation::{
    earth_mover_distance, geodesic_regression, monotonicity_diagnostic, recovery_error,
};
use geolift_core::ingestion::{
    correlation_matrix, drop_incomplete, fmt_float17, load_dense_matrix, load_edge_list,
    load_point_cloud, load_time_series, save_edge_list,
};
use geolift_core::kernels::{sample_adjacency, sample_latent_grid, KernelModel};
use geolift_core::manifold::{isomap, IsomapOutput, NeighborRule};
use geolift_core::matrix::SimilarityMatrix;
use geolift_core::points::PointCloud;
use geolift_core::rng::{stream_rng, StreamDomain};
use geolift_core::spectral::{degree_correct, embed_from_eigs, select_rank, RankChoice};
use geolift_core::Seed;
use rand::seq::index::sample as index_sample;
use serde::{Deserialize, Serialize};

use crate::config::{EvaluationSection, InputConfig, IsomapSection, PipelineConfig};
use crate::outputs::{load_covariate, load_labels, ArtifactWriter};
use crate::svg;
use crate::CliError;

#[derive(Serialize)]
struct MetaDoc<'a> {
    kernel: &'a geolift_core::kernels::KernelSpec,
    n: usize,
    rho: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct RankDoc {
    requested: RankChoice,
    p: usize,
    spectrum_len: usize,
    degree_correct: bool,
    /// Rows of the input matrix dropped by degree correction.
    dropped_rows: Vec<usize>,
    /// Surviving rows, in order; row i of X.csv is `kept_rows[i]` of the input.
    kept_rows: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DiagnosticsDoc {
    n_input: usize,
    rule: NeighborRule,
    component_sizes: Vec<usize>,
    /// X.csv rows outside the largest component.
    dropped: Vec<usize>,
    /// Surviving X.csv rows, in order.
    kept_x_rows: Vec<usize>,
    /// The same rows traced back to the original input (through any
    /// degree-correction drops).
    kept_original: Vec<usize>,
    centered_spectrum: Vec<f64>,
    d_used: usize,
    d_auto: bool,
    positive_deficiency: usize,
    /// Summary quantiles (q, value) of the geodesic distances, carried here
    /// since the full matrix is only written on request.
    geodesic_quantiles: Vec<(f64, f64)>,
}

fn geodesic_quantiles(d: &DistanceMatrix) -> Vec<(f64, f64)> {
    let mut values = d.upper_triangle();
    values.retain(|v| v.is_finite());
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    [0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0]
        .iter()
        .map(|&q| {
            let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
            (q, values[rank - 1])
        })
        .collect()
}

#[derive(Serialize)]
struct RegressionDoc {
    slope: f64,
    r2: f64,
    pairs_used: usize,
    excluded_infinite: usize,
}

#[derive(Serialize)]
struct EmdDoc {
    group_a: String,
    group_b: String,
    sample: usize,
    reps: usize,
    mean: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct MetricsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regression: Option<RegressionDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spearman: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    emd: Option<EmdDoc>,
}

#[derive(Serialize)]
struct RunDoc<'a> {
    command: &'a str,
    seed: u64,
    artifacts: &'a std::collections::BTreeMap<String, String>,
}

struct SimulatedInput {
    kernel: KernelModel,
    positions: PointCloud,
    matrix: SimilarityMatrix,
}

fn simulate_in_memory(cfg: &PipelineConfig) -> Result<SimulatedInput, CliError> {
    let InputConfig::Simulate { kernel: spec, n } = cfg.input_required()? else {
        return Err(CliError::Usage(
            "this command needs input.simulate in the config".into(),
        ));
    };
    let kernel = KernelModel::from_spec(spec).map_err(|e| match e {
        geolift_core::Error::Validation(msg) => geolift_core::Error::Validation(format!(
            "{msg}; catalog kernels: {}",
            KernelModel::catalog_names().join(", ")
        ))
        .into(),
        other => CliError::Core(other),
    })?;
    let positions = sample_latent_grid(kernel.domain(), *n)?;
    let matrix = sample_adjacency(&kernel, &positions, Seed::new(cfg.seed))?;
    Ok(SimulatedInput {
        kernel,
        positions,
        matrix,
    })
}

pub fn cmd_simulate(cfg: &PipelineConfig, writer: &mut ArtifactWriter) -> Result<(), CliError> {
    let InputConfig::Simulate { kernel: spec, n } = cfg.input_required()? else {
        return Err(CliError::Usage(
            "simulate needs input.simulate in the config".into(),
        ));
    };
    let sim = simulate_in_memory(cfg)?;
    writer.write_point_cloud("Z.csv", &sim.positions)?;
    let edges_path = writer.dir().join("A.edges");
    save_edge_list(&sim.matrix, &edges_path)?;
    rehash_external(writer, "A.edges")?;
    writer.write_json(
        "meta.json",
        &MetaDoc {
            kernel: spec,
            n: *n,
            rho: sim.kernel.rho(),
            seed: cfg.seed,
        },
    )?;
    Ok(())
}

/// save_edge_list writes directly; fold the file into the manifest.
fn rehash_external(writer: &mut ArtifactWriter, name: &str) -> Result<(), CliError> {
    let bytes = std::fs::read(writer.dir().join(name))
        .map_err(|e| CliError::Usage(format!("cannot reread {name}: {e}")))?;
    writer.write_bytes(name, &bytes)
}

struct InputProduct {
    matrix: SimilarityMatrix,
    labels: Option<Vec<String>>,
}

fn acquire_matrix(cfg: &PipelineConfig) -> Result<InputProduct, CliError> {
    match cfg.input_required()? {
        InputConfig::Simulate { .. } => {
            let sim = simulate_in_memory(cfg)?;
            Ok(InputProduct {
                matrix: sim.matrix,
                labels: None,
            })
        }
        InputConfig::EdgeList {
            path,
            directed_policy,
        } => {
            let (matrix, labels, _report) = load_edge_list(path, *directed_policy)?;
            Ok(InputProduct {
                matrix,
                labels: Some(labels),
            })
        }
        InputConfig::Dense { path } => Ok(InputProduct {
            matrix: load_dense_matrix(path)?,
            labels: None,
        }),
        InputConfig::TimeSeries { path } => {
            let table = load_time_series(path)?;
            let (complete, _report) = drop_incomplete(&table)?;
            let labels = complete.entities.clone();
            Ok(InputProduct {
                matrix: correlation_matrix(&complete)?,
                labels: Some(labels),
            })
        }
    }
}

struct EmbedProduct {
    x: PointCloud,
    kept_rows: Vec<usize>,
    spectrum: Vec<f64>,
    p_used: usize,
}

fn column_prefix(cloud: &PointCloud, p: usize) -> PointCloud {
    let rows: Vec<Vec<f64>> = cloud.rows().map(|r| r[..p].to_vec()).collect();
    PointCloud::from_rows(&rows).expect("column prefix of a finite cloud")
}

fn stage_embed(cfg: &PipelineConfig, matrix: &SimilarityMatrix) -> Result<EmbedProduct, CliError> {
    let sc = cfg.spectral_or_default();
    let n = matrix.n();
    let (pairs, p_used): (EigenPairs, usize) = match sc.p {
        RankChoice::Fixed(p) => (symmetric_eigs(matrix, p)?, p),
        RankChoice::Auto => {
            let k = sc.max_p.min(n);
            let pairs = symmetric_eigs(matrix, k)?;
            let p = select_rank(&pairs.values, sc.max_p)?;
            (pairs, p)
        }
    };
    let full = embed_from_eigs(&pairs);
    let x = if p_used < full.dim() {
        column_prefix(&full, p_used)
    } else {
        full
    };
    let (x, dropped) = if sc.degree_correct {
        degree_correct(&x)
    } else {
        (x, Vec::new())
    };
    let mut is_dropped = vec![false; n];
    for &i in &dropped {
        is_dropped[i] = true;
    }
    let kept_rows: Vec<usize> = (0..n).filter(|&i| !is_dropped[i]).collect();
    Ok(EmbedProduct {
        x,
        kept_rows,
        spectrum: pairs.values,
        p_used,
    })
}

fn write_embed_artifacts(
    cfg: &PipelineConfig,
    writer: &mut ArtifactWriter,
    input: &InputProduct,
    embed: &EmbedProduct,
) -> Result<(), CliError> {
    let sc = cfg.spectral_or_default();
    writer.write_point_cloud("X.csv", &embed.x)?;
    writer.write_scalar_column("spectrum.csv", &embed.spectrum)?;
    let dropped_rows: Vec<usize> = {
        let mut kept = vec![false; input.matrix.n()];
        for &i in &embed.kept_rows {
            kept[i] = true;
        }
        (0..input.matrix.n()).filter(|&i| !kept[i]).collect()
    };
    writer.write_json(
        "rank.json",
        &RankDoc {
            requested: sc.p,
            p: embed.p_used,
            spectrum_len: embed.spectrum.len(),
            degree_correct: sc.degree_correct,
            dropped_rows,
            kept_rows: embed.kept_rows.clone(),
        },
    )?;
    if let Some(labels) = &input.labels {
        writer.write_lines("labels.csv", labels)?;
    }
    Ok(())
}

pub fn cmd_embed(cfg: &PipelineConfig, writer: &mut ArtifactWriter) -> Result<(), CliError> {
    let input = acquire_matrix(cfg)?;
    let embed = stage_embed(cfg, &input.matrix)?;
    write_embed_artifacts(cfg, writer, &input, &embed)
}

struct IsomapProduct {
    output: IsomapOutput,
    /// Output rows traced back to the original input rows.
    kept_original: Vec<usize>,
}

fn stage_isomap(
    section: &IsomapSection,
    x: &PointCloud,
    embed_kept: Option<&[usize]>,
) -> Result<IsomapProduct, CliError> {
    let output = isomap(x, &section.core_config())?;
    let kept_original = match embed_kept {
        Some(map) => output.kept.iter().map(|&i| map[i]).collect(),
        None => output.kept.clone(),
    };
    Ok(IsomapProduct {
        output,
        kept_original,
    })
}

fn write_isomap_artifacts(
    section: &IsomapSection,
    writer: &mut ArtifactWriter,
    x_rows: usize,
    product: &IsomapProduct,
) -> Result<(), CliError> {
    let out = &product.output;
    writer.write_point_cloud("Zhat.csv", &out.points)?;
    if section.write_geodesics {
        writer.write_distance_matrix("geodesics.csv", &out.geodesics)?;
    }
    let d = &out.diagnostics;
    writer.write_json(
        "diagnostics.json",
        &DiagnosticsDoc {
            n_input: x_rows,
            rule: d.rule,
            component_sizes: d.component_sizes.clone(),
            dropped: d.dropped.clone(),
            kept_x_rows: out.kept.clone(),
            kept_original: product.kept_original.clone(),
            centered_spectrum: d.centered_spectrum.clone(),
            d_used: d.d_used,
            d_auto: d.d_auto,
            positive_deficiency: d.positive_deficiency,
            geodesic_quantiles: geodesic_quantiles(&out.geodesics),
        },
    )?;
    if let Some(scatter) = &section.scatter {
        let covariate = match &scatter.covariate {
            Some(cov) => {
                let values = load_covariate(&cov.path, cov.column)?;
                let mapped: Vec<f64> = product
                    .kept_original
                    .iter()
                    .map(|&i| {
                        values.get(i).copied().ok_or_else(|| {
                            CliError::Usage(format!(
                                "covariate {} has {} rows but original index {i} is needed",
                                cov.path.display(),
                                values.len()
                            ))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                Some(mapped)
            }
            None => None,
        };
        let image = svg::scatter(&out.points, covariate.as_deref());
        writer.write_bytes("scatter.svg", image.as_bytes())?;
    }
    Ok(())
}

fn read_rank_doc(dir: &Path) -> Option<RankDoc> {
    let text = std::fs::read_to_string(dir.join("rank.json")).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn cmd_isomap(cfg: &PipelineConfig, writer: &mut ArtifactWriter) -> Result<(), CliError> {
    let section = cfg.isomap_required()?;
    let x_path = writer.dir().join("X.csv");
    if !x_path.exists() {
        return Err(CliError::Usage(format!(
            "{} not found; run `geolift embed` first",
            x_path.display()
        )));
    }
    let x = load_point_cloud(&x_path)?;
    let rank = read_rank_doc(writer.dir());
    let product = stage_isomap(section, &x, rank.as_ref().map(|r| r.kept_rows.as_slice()))?;
    write_isomap_artifacts(section, writer, x.n(), &product)
}

fn stage_evaluate(
    section: &EvaluationSection,
    seed: u64,
    zhat: &PointCloud,
    kept_original: &[usize],
    geodesics: Option<&DistanceMatrix>,
) -> Result<(MetricsDoc, Option<Vec<String>>), CliError> {
    let mut metrics = MetricsDoc {
        recovery_error: None,
        regression: None,
        spearman: None,
        emd: None,
    };
    let mut pairs_lines: Option<Vec<String>> = None;

    let subset_truth = |path: &Path| -> Result<PointCloud, CliError> {
        let truth = load_point_cloud(path)?;
        let max = kept_original.iter().copied().max().unwrap_or(0);
        if truth.n() <= max {
            return Err(CliError::Usage(format!(
                "truth file {} has {} rows but original index {max} is needed",
                path.display(),
                truth.n()
            )));
        }
        Ok(truth.subset(kept_original))
    };

    if let Some(path) = &section.recovery_truth {
        let truth = subset_truth(path)?;
        metrics.recovery_error = Some(recovery_error(zhat, &truth)?);
    }

    if let Some(path) = &section.regression_truth {
        let geodesics = geodesics.ok_or_else(|| {
            CliError::Usage(
                "regression needs geodesics.csv; enable isomap.write_geodesics or run the pipeline command".into(),
            )
        })?;
        let truth = subset_truth(path)?;
        let dz = DistanceMatrix::euclidean(&truth);
        let reg = geodesic_regression(geodesics, &dz)?;
        metrics.regression = Some(RegressionDoc {
            slope: reg.slope,
            r2: reg.r2,
            pairs_used: reg.pairs_used,
            excluded_infinite: reg.excluded_infinite,
        });
        pairs_lines = Some(sample_pair_lines(seed, &dz, geodesics, section.pairs_limit));
    }

    if let Some(cov) = &section.monotonicity {
        let values = load_covariate(&cov.path, cov.column)?;
        let mapped: Vec<f64> = kept_original
            .iter()
            .map(|&i| {
                values.get(i).copied().ok_or_else(|| {
                    CliError::Usage(format!(
                        "covariate {} has {} rows but original index {i} is needed",
                        cov.path.display(),
                        values.len()
                    ))
                })
            })
            .collect::<Result<_, _>>()?;
        let first_coord: Vec<f64> = (0..zhat.n()).map(|i| zhat.row(i)[0]).collect();
        metrics.spearman = Some(monotonicity_diagnostic(&first_coord, &mapped)?);
    }

    if let Some(emd_cfg) = &section.emd {
        let geodesics = geodesics.ok_or_else(|| {
            CliError::Usage(
                "EMD needs geodesics.csv; enable isomap.write_geodesics or run the pipeline command".into(),
            )
        })?;
        let labels = load_labels(&emd_cfg.labels)?;
        let group = |name: &str| -> Result<Vec<usize>, CliError> {
            let mut out = Vec::new();
            for (row, &orig) in kept_original.iter().enumerate() {
                let label = labels.get(orig).ok_or_else(|| {
                    CliError::Usage(format!(
                        "label file {} has {} rows but original index {orig} is needed",
                        emd_cfg.labels.display(),
                        labels.len()
                    ))
                })?;
                if label == name {
                    out.push(row);
                }
            }
            Ok(out)
        };
        let ga = group(&emd_cfg.group_a)?;
        let gb = group(&emd_cfg.group_b)?;
        let result = earth_mover_distance(
            geodesics,
            &ga,
            &gb,
            emd_cfg.sample,
            Seed::new(seed),
            emd_cfg.reps,
        )?;
        metrics.emd = Some(EmdDoc {
            group_a: emd_cfg.group_a.clone(),
            group_b: emd_cfg.group_b.clone(),
            sample: emd_cfg.sample,
            reps: emd_cfg.reps,
            mean: result.mean,
            stderr: result.stderr,
        });
    }

    Ok((metrics, pairs_lines))
}

/// Upper-triangle (d_z, d_m) pairs, subsampled without replacement to the
/// limit under a seed-derived stream, written in index order.
fn sample_pair_lines(
    seed: u64,
    dz: &DistanceMatrix,
    dm: &DistanceMatrix,
    limit: usize,
) -> Vec<String> {
    let n = dz.n();
    let total = n * (n - 1) / 2;
    let mut lines = Vec::with_capacity(total.min(limit) + 1);
    lines.push("d_z,d_m".to_string());
    let emit =
        |lines: &mut Vec<String>, i: usize, j: usize| {
            lines.push(format!(
                "{},{}",
                fmt_float17(dz.get(i, j)),
                fmt_float17(dm.get(i, j))
            ));
        };
    if total <= limit {
        for i in 0..n {
            for j in (i + 1)..n {
                emit(&mut lines, i, j);
            }
        }
        return lines;
    }
    let mut rng = stream_rng(Seed::new(seed), StreamDomain::PairSample, 0);
    let mut picks: Vec<usize> = index_sample(&mut rng, total, limit).into_iter().collect();
    picks.sort_unstable();
    // Walk the strict upper triangle once, emitting selected linear indices.
    let mut next = 0usize;
    let mut linear = 0usize;
    'outer: for i in 0..n {
        for j in (i + 1)..n {
            if next >= picks.len() {
                break 'outer;
            }
            if picks[next] == linear {
                emit(&mut lines, i, j);
                next += 1;
            }
            linear += 1;
        }
    }
    lines
}

fn read_diagnostics_doc(dir: &Path) -> Result<DiagnosticsDoc, CliError> {
    let path = dir.join("diagnostics.json");
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::Usage(format!(
            "{} not found ({e}); run `geolift isomap` first",
            path.display()
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid {}: {e}", path.display())))
}

pub fn cmd_evaluate(cfg: &PipelineConfig, writer: &mut ArtifactWriter) -> Result<(), CliError> {
    let Some(section) = &cfg.evaluation else {
        return Err(CliError::Usage(
            "config is missing the \"evaluation\" section".into(),
        ));
    };
    let zhat = load_point_cloud(&writer.dir().join("Zhat.csv")).map_err(|e| match e {
        geolift_core::Error::Io(io) => CliError::Usage(format!(
            "Zhat.csv not found ({io}); run `geolift isomap` first"
        )),
        other => CliError::Core(other),
    })?;
    let diag = read_diagnostics_doc(writer.dir())?;
    let geodesics_path = writer.dir().join("geodesics.csv");
    let geodesics = if geodesics_path.exists() {
        let rows = geolift_core::ingestion::read_numeric_csv(&geodesics_path)?;
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Some(DistanceMatrix::new(n, flat)?)
    } else {
        None
    };
    let (metrics, pairs) =
        stage_evaluate(section, cfg.seed, &zhat, &diag.kept_original, geodesics.as_ref())?;
    writer.write_json("metrics.json", &metrics)?;
    if let Some(lines) = pairs {
        writer.write_lines("pairs.csv", &lines)?;
    }
    Ok(())
}

pub fn cmd_pipeline(cfg: &PipelineConfig, writer: &mut ArtifactWriter) -> Result<(), CliError> {
    // Stage 1: simulate or load.
    let input = match cfg.input_required()? {
        InputConfig::Simulate { kernel: spec, n } => {
            let sim = simulate_in_memory(cfg)?;
            writer.write_point_cloud("Z.csv", &sim.positions)?;
            let edges_path = writer.dir().join("A.edges");
            save_edge_list(&sim.matrix, &edges_path)?;
            rehash_external(writer, "A.edges")?;
            writer.write_json(
                "meta.json",
                &MetaDoc {
                    kernel: spec,
                    n: *n,
                    rho: sim.kernel.rho(),
                    seed: cfg.seed,
                },
            )?;
            InputProduct {
                matrix: sim.matrix,
                labels: None,
            }
        }
        _ => acquire_matrix(cfg)?,
    };

    // Stage 2: embed.
    let embed = stage_embed(cfg, &input.matrix)?;
    write_embed_artifacts(cfg, writer, &input, &embed)?;

    // Stage 3: isomap.
    let section = cfg.isomap_required()?;
    let product = stage_isomap(section, &embed.x, Some(&embed.kept_rows))?;
    write_isomap_artifacts(section, writer, embed.x.n(), &product)?;

    // Stage 4: evaluate (optional), with the geodesics passed in memory.
    if let Some(ev) = &cfg.evaluation {
        let (metrics, pairs) = stage_evaluate(
            ev,
            cfg.seed,
            &product.output.points,
            &product.kept_original,
            Some(&product.output.geodesics),
        )?;
        writer.write_json("metrics.json", &metrics)?;
        if let Some(lines) = pairs {
            writer.write_lines("pairs.csv", &lines)?;
        }
    }

    let run = RunDoc {
        command: "pipeline",
        seed: cfg.seed,
        artifacts: writer.manifest(),
    };
    let text = serde_json::to_string_pretty(&run)
        .map_err(|e| CliError::Usage(format!("cannot serialize run.json: {e}")))?;
    std::fs::write(writer.dir().join("run.json"), text + "\n")
        .map_err(|e| CliError::Usage(format!("cannot write run.json: {e}")))?;
    Ok(())
}
