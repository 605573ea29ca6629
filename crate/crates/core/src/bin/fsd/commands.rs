use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use fsd_core::bench::{report_to_csv, report_to_json, run_benchmark, BenchConfig};
use fsd_core::cloud::{read_ply, write_ply, PointCloud};
use fsd_core::extract::{extract_batched, ExtractionConfig};
use fsd_core::geometry::{
    backproject_depth, read_depth_pgm, read_intrinsics, read_mask_pgm, svd_orthogonalize,
};
use fsd_core::losses::{chamfer_thresholded, ChamferConfig, ChamferMode};
use fsd_core::metrics::{evaluate_suite, read_records_jsonl, SuiteConfig};
use fsd_core::sdf::{
    gen_random_decoder, gen_shape_decoder, load_weights_any, weights_to_bytes, weights_to_json,
    AnalyticField, Field, LatentCode,
};
use fsd_core::{FsdError, Vec3};
use nalgebra::Matrix3;
use serde_json::json;

use crate::{ChamferModeArg, Cli, CliError, Command, Format};

type CmdResult<T = ()> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn compute_err(e: FsdError) -> CliError {
    CliError::Compute(e.to_string())
}

fn open(path: &Path) -> CmdResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_err(path, e))
}

fn read_bytes(path: &Path) -> CmdResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_err(path, e))
}

/// Writes the primary output to `path`, or standard output.
fn emit(path: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| io_err(p, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn json_line(value: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn parse_shape(spec: &str) -> CmdResult<AnalyticField> {
    let usage = || {
        CliError::Usage(format!(
            "bad shape `{spec}`; use sphere:R, box:HX,HY,HZ or torus:R,r"
        ))
    };
    let (kind, args) = spec.split_once(':').ok_or_else(usage)?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage())?;
    let shape = match (kind, nums.as_slice()) {
        ("sphere", [r]) => AnalyticField::sphere(*r),
        ("box", [x, y, z]) => AnalyticField::cuboid([*x, *y, *z]),
        ("torus", [big, small]) => AnalyticField::torus(*big, *small),
        _ => return Err(usage()),
    };
    shape.map_err(|e| CliError::Usage(e.to_string()))
}

pub fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Extract {
            weights,
            shape,
            latent,
            random_latents,
            latent_std,
            lod,
            lod_start,
            prune_k,
            projection_steps,
            out,
        } => {
            let cfg = ExtractionConfig {
                lod_start: *lod_start,
                lod_end: *lod,
                prune_factor: *prune_k,
                projection_steps: *projection_steps,
                ..Default::default()
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let out = out.as_deref().or(cli.output.as_deref());
            match weights {
                Some(path) => {
                    if !latent.is_empty() && random_latents.is_some() {
                        return Err(CliError::Usage(
                            "use either --latent files or --random-latents".into(),
                        ));
                    }
                    let decoder =
                        load_weights_any(&read_bytes(path)?).map_err(|e| io_err(path, e))?;
                    let latents: Vec<LatentCode> = match random_latents {
                        Some(0) => {
                            return Err(CliError::Usage("--random-latents must be positive".into()))
                        }
                        Some(n) => (0..*n)
                            .map(|i| {
                                LatentCode::random(
                                    cli.seed.wrapping_add(i as u64),
                                    decoder.latent_dim(),
                                    *latent_std,
                                )
                            })
                            .collect(),
                        None if latent.is_empty() => {
                            return Err(CliError::Usage(
                                "--weights needs one --latent per object".into(),
                            ))
                        }
                        None => latent
                            .iter()
                            .map(|p| serde_json::from_reader(open(p)?).map_err(|e| io_err(p, e)))
                            .collect::<CmdResult<_>>()?,
                    };
                    let fields = latents
                        .iter()
                        .map(|z| Field::neural(&decoder, z))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(compute_err)?;
                    extract_and_write(&fields, &cfg, out)
                }
                None => {
                    if !latent.is_empty() || random_latents.is_some() {
                        return Err(CliError::Usage("latents only apply with --weights".into()));
                    }
                    let fields = shape
                        .iter()
                        .map(|s| parse_shape(s).map(Field::Analytic))
                        .collect::<CmdResult<Vec<_>>>()?;
                    extract_and_write(&fields, &cfg, out)
                }
            }
        }

        Command::Chamfer {
            a,
            b,
            epsilon,
            mode,
        } => {
            if !(*epsilon > 0.0) {
                return Err(CliError::Usage("--epsilon must be positive".into()));
            }
            let load = |p: &Path| -> CmdResult<Vec<Vec3>> {
                let clouds = read_ply(open(p)?).map_err(|e| io_err(p, e))?;
                Ok(clouds.into_iter().flat_map(|c| c.points).collect())
            };
            let (pa, pb) = (load(a)?, load(b)?);
            let cfg = ChamferConfig {
                epsilon: *epsilon,
                mode: match mode {
                    ChamferModeArg::Hinge => ChamferMode::Hinge,
                    ChamferModeArg::Clamped => ChamferMode::ClampedInlier,
                },
            };
            let r = chamfer_thresholded(&pa, &pb, &cfg).map_err(compute_err)?;
            emit(
                cli.output.as_deref(),
                &json_line(&serde_json::to_value(r).expect("serializable")),
            )
        }

        Command::Backproject {
            depth,
            intrinsics,
            mask,
            out,
        } => {
            let d = read_depth_pgm(open(depth)?).map_err(|e| io_err(depth, e))?;
            let k = read_intrinsics(open(intrinsics)?).map_err(|e| io_err(intrinsics, e))?;
            let m = match mask {
                Some(p) => Some(read_mask_pgm(open(p)?).map_err(|e| io_err(p, e))?),
                None => None,
            };
            let points = backproject_depth(&d, &k, m.as_ref()).map_err(compute_err)?;
            let mut bytes = Vec::new();
            write_ply(&mut bytes, &[PointCloud::new(points)]).map_err(compute_err)?;
            emit(out.as_deref().or(cli.output.as_deref()), &bytes)
        }

        Command::Orthogonalize { matrix } => {
            let rows: Vec<Vec<f64>> =
                serde_json::from_reader(open(matrix)?).map_err(|e| io_err(matrix, e))?;
            if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                return Err(io_err(matrix, "expected a 3x3 array of rows"));
            }
            let m = Matrix3::from_fn(|i, j| rows[i][j]);
            let r = svd_orthogonalize(&m).map_err(compute_err)?;
            let out: Vec<Vec<f64>> = (0..3)
                .map(|i| (0..3).map(|j| r[(i, j)]).collect())
                .collect();
            emit(cli.output.as_deref(), &json_line(&json!(out)))
        }

        Command::Metrics { preds, gts, config } => {
            let p = read_records_jsonl(open(preds)?).map_err(|e| io_err(preds, e))?;
            let g = read_records_jsonl(open(gts)?).map_err(|e| io_err(gts, e))?;
            let mut cfg: SuiteConfig = match config {
                Some(c) => serde_json::from_reader(open(c)?).map_err(|e| io_err(c, e))?,
                None => SuiteConfig::default(),
            };
            if config.is_none() {
                cfg.seed = cli.seed;
            }
            let report = evaluate_suite(&p, &g, &cfg).map_err(compute_err)?;
            emit(cli.output.as_deref(), &json_line(&report.to_json_value()))
        }

        Command::Bench { config } => {
            let mut cfg: BenchConfig = match config {
                Some(c) => serde_json::from_reader(open(c)?).map_err(|e| io_err(c, e))?,
                None => BenchConfig::default(),
            };
            if cli.threads != 0 {
                cfg.threads = cli.threads;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let report = run_benchmark(&cfg).map_err(compute_err)?;
            let bytes = match cli.format {
                Some(Format::Csv) => report_to_csv(&report).map_err(compute_err)?.into_bytes(),
                Some(Format::Ply) => {
                    return Err(CliError::Usage("bench writes json or csv".into()))
                }
                _ => {
                    let mut b = report_to_json(&report).map_err(compute_err)?;
                    b.push(b'\n');
                    b
                }
            };
            emit(cli.output.as_deref(), &bytes)
        }

        Command::GenWeights {
            out,
            latent_dim,
            hidden_dim,
            depth,
            shape_calibrated,
        } => {
            if *latent_dim == 0 || *hidden_dim == 0 || *depth == 0 {
                return Err(CliError::Usage(
                    "decoder dimensions must be positive".into(),
                ));
            }
            let decoder = if *shape_calibrated {
                gen_shape_decoder(cli.seed, *latent_dim, *hidden_dim, *depth)
            } else {
                gen_random_decoder(cli.seed, *latent_dim, *hidden_dim, *depth)
            };
            let bytes = match cli.format {
                Some(Format::Json) => weights_to_json(&decoder).into_bytes(),
                None => weights_to_bytes(&decoder),
                Some(_) => {
                    return Err(CliError::Usage(
                        "weights are written as binary or json".into(),
                    ))
                }
            };
            let target: Option<PathBuf> = out.clone().or_else(|| cli.output.clone());
            emit(target.as_deref(), &bytes)
        }
    }
}

fn extract_and_write(
    fields: &[Field<'_>],
    cfg: &ExtractionConfig,
    out: Option<&Path>,
) -> CmdResult {
    let extraction = extract_batched(fields, cfg).map_err(compute_err)?;
    let clouds: Vec<PointCloud> = extraction.surfaces.iter().map(|s| s.to_cloud()).collect();
    let mut bytes = Vec::new();
    write_ply(&mut bytes, &clouds).map_err(compute_err)?;
    emit(out, &bytes)?;

    let objects: Vec<serde_json::Value> = extraction
        .surfaces
        .iter()
        .map(|s| {
            let n = s.residuals.len().max(1) as f64;
            json!({
                "points": s.len(),
                "max_abs_residual": s.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs())),
                "mean_abs_residual": s.residuals.iter().map(|r| r.abs()).sum::<f64>() / n,
                "flagged": s.flagged.iter().filter(|f| **f).count(),
            })
        })
        .collect();
    let summary = json!({
        "objects": objects,
        "sdf_evals": extraction.stats.sdf_evals,
        "eval_batches": extraction.stats.eval_batches,
    });
    let text = serde_json::to_string(&summary).expect("json value serializes");
    if out.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    Ok(())
}
