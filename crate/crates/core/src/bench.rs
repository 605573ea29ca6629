//! Timing comparison of dense-grid extraction, per-object octree extraction
//! and batched octree extraction on identical fields.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::extract::{
    dense_grid_extract, extract_batched, extract_sequential, Extraction, ExtractionConfig,
};
use crate::sdf::{gen_shape_decoder, AnalyticField, Field, LatentCode, MlpSdfDecoder};

pub const METHOD_DENSE: &str = "dense";
pub const METHOD_SEQUENTIAL: &str = "octree_sequential";
pub const METHOD_BATCHED: &str = "octree_batched";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    /// Spheres, boxes and tori of slightly varying size.
    AnalyticMix,
    /// One seeded decoder shared by all objects, one seeded latent each.
    SeededDecoder { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub num_objects: usize,
    pub lod_end: u32,
    pub dense_resolution: u32,
    pub repetitions: usize,
    pub warmup: usize,
    pub field_source: FieldSource,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub depth: usize,
    pub latent_std: f64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            num_objects: 8,
            lod_end: 6,
            dense_resolution: 64,
            repetitions: 20,
            warmup: 3,
            field_source: FieldSource::AnalyticMix,
            latent_dim: crate::sdf::DEFAULT_LATENT_DIM,
            hidden_dim: crate::sdf::DEFAULT_HIDDEN_DIM,
            depth: crate::sdf::DEFAULT_DEPTH,
            latent_std: 0.1,
            threads: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_objects == 0 {
            return Err(FsdError::invalid("num_objects must be at least 1"));
        }
        if self.repetitions < 3 {
            return Err(FsdError::invalid("repetitions must be at least 3"));
        }
        if !(self.latent_std >= 0.0 && self.latent_std.is_finite()) {
            return Err(FsdError::invalid("latent_std must be non-negative"));
        }
        if matches!(self.field_source, FieldSource::SeededDecoder { .. })
            && (self.latent_dim == 0 || self.hidden_dim == 0 || self.depth == 0)
        {
            return Err(FsdError::invalid("decoder dimensions must be positive"));
        }
        ExtractionConfig::with_lod(self.lod_end).validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Field evaluations for one run over all objects.
    pub evals: usize,
    /// Evaluation calls for one run over all objects.
    pub batches: usize,
    pub points: usize,
}

/// Ratios of median times; above one means the first method is faster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Speedups {
    pub batched_vs_dense: f64,
    pub batched_vs_sequential: f64,
    pub sequential_vs_dense: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub methods: Vec<MethodReport>,
    pub speedups: Speedups,
    pub threads: usize,
    pub available_parallelism: usize,
}

impl BenchmarkReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(FsdError::invalid("report has no methods"));
        }
        for m in &self.methods {
            if !(m.min_s <= m.median_s && m.median_s <= m.max_s) {
                return Err(FsdError::invalid(format!(
                    "method `{}` has inconsistent timings",
                    m.method
                )));
            }
        }
        Ok(())
    }
}

/// Fields owned by the benchmark; [`BenchFields::fields`] borrows them.
pub enum BenchFields {
    Analytic(Vec<AnalyticField>),
    Neural {
        decoder: MlpSdfDecoder,
        latents: Vec<LatentCode>,
    },
}

impl BenchFields {
    pub fn generate(cfg: &BenchConfig) -> Result<Self> {
        match cfg.field_source {
            FieldSource::AnalyticMix => (0..cfg.num_objects)
                .map(|i| {
                    let s = 1.0 - 0.1 * (i / 3 % 5) as f64;
                    match i % 3 {
                        0 => AnalyticField::sphere(0.5 * s),
                        1 => AnalyticField::cuboid([0.4 * s, 0.3 * s, 0.2 * s]),
                        _ => AnalyticField::torus(0.5 * s, 0.15 * s),
                    }
                })
                .collect::<Result<_>>()
                .map(BenchFields::Analytic),
            FieldSource::SeededDecoder { seed } => Ok(BenchFields::Neural {
                decoder: gen_shape_decoder(seed, cfg.latent_dim, cfg.hidden_dim, cfg.depth),
                latents: (0..cfg.num_objects)
                    .map(|i| {
                        LatentCode::random(
                            seed.wrapping_add(1 + i as u64),
                            cfg.latent_dim,
                            cfg.latent_std,
                        )
                    })
                    .collect(),
            }),
        }
    }

    pub fn fields(&self) -> Vec<Field<'_>> {
        match self {
            BenchFields::Analytic(a) => a.iter().map(|f| Field::Analytic(*f)).collect(),
            BenchFields::Neural { decoder, latents } => latents
                .iter()
                .map(|latent| Field::Neural { decoder, latent })
                .collect(),
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, BenchFields::Analytic(_))
    }
}

struct RunCounts {
    evals: usize,
    batches: usize,
    points: usize,
}

fn extraction_counts(e: &Extraction) -> RunCounts {
    RunCounts {
        evals: e.stats.sdf_evals,
        batches: e.stats.eval_batches,
        points: e.surfaces.iter().map(|s| s.len()).sum(),
    }
}

fn run_dense(fields: &[Field<'_>], resolution: u32, cfg: &ExtractionConfig) -> Result<RunCounts> {
    let mut counts = RunCounts {
        evals: 0,
        batches: 0,
        points: 0,
    };
    for f in fields {
        let d = dense_grid_extract(*f, resolution, cfg)?;
        counts.evals += d.evaluations;
        counts.batches += 2 + cfg.projection_steps as usize;
        counts.points += d.kept.len();
    }
    Ok(counts)
}

/// Checks the three methods agree before anything is timed.
fn verify(
    fields: &[Field<'_>],
    analytic: bool,
    bench: &BenchConfig,
    cfg: &ExtractionConfig,
) -> Result<()> {
    let batched = extract_batched(fields, cfg)?;
    let sequential = extract_sequential(fields, cfg)?;
    for (i, (b, s)) in batched
        .surfaces
        .iter()
        .zip(&sequential.surfaces)
        .enumerate()
    {
        if b.cells != s.cells || b.points != s.points {
            return Err(FsdError::Consistency(format!(
                "object {i}: batched and sequential octree surfaces differ ({} vs {} points)",
                b.len(),
                s.len()
            )));
        }
    }
    if !analytic || bench.dense_resolution != 1 << bench.lod_end {
        return Ok(());
    }
    for (i, (f, surface)) in fields.iter().zip(&batched.surfaces).enumerate() {
        let dense = dense_grid_extract(*f, bench.dense_resolution, cfg)?;
        let kept: BTreeSet<[u32; 3]> = dense.kept.iter().copied().collect();
        if let Some(c) = surface.cells.iter().find(|c| !kept.contains(*c)) {
            return Err(FsdError::Consistency(format!(
                "object {i}: octree cell {c:?} is not in the dense surface band"
            )));
        }
        let octree: BTreeSet<[u32; 3]> = surface.cells.iter().copied().collect();
        let band = 3f64.sqrt() / 2.0 * dense.edge();
        if let Some(c) = dense
            .kept
            .iter()
            .find(|c| dense.value_at(**c).abs() <= band && !octree.contains(*c))
        {
            return Err(FsdError::Consistency(format!(
                "object {i}: octree missed surface cell {c:?}"
            )));
        }
    }
    Ok(())
}

fn summarize(method: &str, mut times: Vec<f64>, counts: RunCounts) -> MethodReport {
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    MethodReport {
        method: method.to_string(),
        median_s: median,
        min_s: times[0],
        max_s: times[n - 1],
        evals: counts.evals,
        batches: counts.batches,
        points: counts.points,
    }
}

fn time_it(f: impl FnOnce() -> Result<RunCounts>) -> Result<(f64, RunCounts)> {
    let start = Instant::now();
    let counts = f()?;
    Ok((start.elapsed().as_secs_f64(), counts))
}

/// Verifies consistency, then times every method `repetitions` times after
/// `warmup` untimed rounds. Methods are interleaved within each round.
pub fn run_benchmark(bench: &BenchConfig) -> Result<BenchmarkReport> {
    bench.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench.threads)
        .build()
        .map_err(|e| FsdError::invalid(format!("thread pool: {e}")))?;
    let owned = BenchFields::generate(bench)?;
    let fields = owned.fields();
    let cfg = ExtractionConfig::with_lod(bench.lod_end);

    pool.install(|| {
        verify(&fields, owned.is_analytic(), bench, &cfg)?;

        let mut times = [Vec::new(), Vec::new(), Vec::new()];
        let mut counts: [Option<RunCounts>; 3] = [None, None, None];
        for round in 0..bench.warmup + bench.repetitions {
            let runs = [
                time_it(|| run_dense(&fields, bench.dense_resolution, &cfg))?,
                time_it(|| extract_sequential(&fields, &cfg).map(|e| extraction_counts(&e)))?,
                time_it(|| extract_batched(&fields, &cfg).map(|e| extraction_counts(&e)))?,
            ];
            if round < bench.warmup {
                continue;
            }
            for (k, (t, c)) in runs.into_iter().enumerate() {
                times[k].push(t);
                counts[k] = Some(c);
            }
        }
        let [td, ts, tb] = times;
        let [cd, cs, cb] = counts.map(|c| c.expect("at least one timed round"));
        let methods = vec![
            summarize(METHOD_DENSE, td, cd),
            summarize(METHOD_SEQUENTIAL, ts, cs),
            summarize(METHOD_BATCHED, tb, cb),
        ];
        let speedups = Speedups {
            batched_vs_dense: methods[0].median_s / methods[2].median_s,
            batched_vs_sequential: methods[1].median_s / methods[2].median_s,
            sequential_vs_dense: methods[0].median_s / methods[1].median_s,
        };
        Ok(BenchmarkReport {
            config: bench.clone(),
            methods,
            speedups,
            threads: rayon::current_num_threads(),
            available_parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        })
    })
}

pub fn report_to_json(report: &BenchmarkReport) -> Result<Vec<u8>> {
    report.validate()?;
    Ok(serde_json::to_vec_pretty(report)?)
}

pub fn report_from_json(bytes: &[u8]) -> Result<BenchmarkReport> {
    let report: BenchmarkReport = serde_json::from_slice(bytes)?;
    report.validate()?;
    Ok(report)
}

/// `method,median_s,min_s,max_s,evals,points` with one row per method.
pub fn report_to_csv(report: &BenchmarkReport) -> Result<String> {
    report.validate()?;
    let mut out = String::from("method,median_s,min_s,max_s,evals,points\n");
    for m in &report.methods {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.method, m.median_s, m.min_s, m.max_s, m.evals, m.points
        ));
    }
    Ok(out)
}
