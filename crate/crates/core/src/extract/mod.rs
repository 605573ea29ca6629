//! Octree surface extraction from signed distance fields.
//!
//! Starting from a full grid at `lod_start`, each level evaluates the field
//! at every live voxel center, discards voxels with `|f| > k * edge` and
//! splits the rest into eight children. At `lod_end` the survivors are
//! pruned once more and projected onto the zero level set along the field
//! gradient.
//!
//! Several objects are traversed together: a single frontier holds the
//! voxels of all objects tagged with their object index, every level is one
//! concatenated evaluation batch, and per-object results are recovered from
//! the index boundaries. Per-object output is bit-identical to extracting
//! each object on its own.

mod dense;
mod frontier;
mod project;

use serde::{Deserialize, Serialize};

pub use dense::{dense_grid_extract, kept_as_entries, DenseExtraction};
pub use frontier::{
    cell_center, init_frontier, prune_frontier, refine_frontier, subdivide, voxel_edge,
    FrontierEntry, PassStats, VoxelFrontier, MAX_LOD,
};
pub use project::{project_to_surface, Projection};

use crate::cloud::PointCloud;
use crate::error::{FsdError, Result};
use crate::sdf::Field;
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub lod_start: u32,
    pub lod_end: u32,
    /// Pruning threshold is `prune_factor * edge` at each level.
    pub prune_factor: f64,
    pub projection_steps: u32,
    pub normalize_gradient: bool,
    pub gradient_floor: f64,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            lod_start: 1,
            lod_end: 6,
            prune_factor: 1.0,
            projection_steps: 1,
            normalize_gradient: true,
            gradient_floor: 1e-8,
        }
    }
}

impl ExtractionConfig {
    pub fn with_lod(lod_end: u32) -> Self {
        Self {
            lod_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.lod_start && self.lod_start <= self.lod_end && self.lod_end <= MAX_LOD) {
            return Err(FsdError::invalid(format!(
                "need 1 <= lod_start ({}) <= lod_end ({}) <= {MAX_LOD}",
                self.lod_start, self.lod_end
            )));
        }
        if !(self.prune_factor > 0.0 && self.prune_factor.is_finite()) {
            return Err(FsdError::invalid("prune_factor must be positive"));
        }
        if !(self.gradient_floor >= 0.0) {
            return Err(FsdError::invalid("gradient_floor must be non-negative"));
        }
        Ok(())
    }
}

/// Surface samples of one object in its canonical frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractedSurface {
    /// Surviving voxel centers at the final level, before projection.
    pub cells: Vec<[u32; 3]>,
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub residuals: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl ExtractedSurface {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_cloud(&self) -> PointCloud {
        PointCloud {
            points: self.points.clone(),
            normals: Some(self.normals.clone()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    /// Point evaluations of the field, pruning and projection together.
    pub sdf_evals: usize,
    /// Number of evaluation calls issued.
    pub eval_batches: usize,
    /// Survivor count after pruning at each level, `lod_start..=lod_end`.
    pub survivors_per_level: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct Extraction {
    pub surfaces: Vec<ExtractedSurface>,
    pub stats: ExtractionStats,
}

/// Final-level survivors of the octree traversal, before projection.
pub fn octree_survivors(
    fields: &[Field<'_>],
    config: &ExtractionConfig,
) -> Result<(VoxelFrontier, ExtractionStats)> {
    config.validate()?;
    let mut frontier = init_frontier(fields.len(), config.lod_start)?;
    let mut stats = ExtractionStats::default();
    loop {
        let (kept, pass) = prune_frontier(&frontier, fields, config)?;
        stats.sdf_evals += pass.evaluations;
        stats.eval_batches += pass.batches;
        stats.survivors_per_level.push(pass.survivors);
        if kept.level() == config.lod_end {
            return Ok((kept, stats));
        }
        frontier = subdivide(&kept)?;
    }
}

/// Extracts every object in one shared traversal.
pub fn extract_batched(fields: &[Field<'_>], config: &ExtractionConfig) -> Result<Extraction> {
    if fields.is_empty() {
        return Err(FsdError::invalid("at least one field is required"));
    }
    let (survivors, mut stats) = octree_survivors(fields, config)?;
    let offsets = survivors.object_offsets(fields.len());
    let centers = survivors.centers();
    let (projection, evals, batches) =
        project::project_concatenated(fields, &offsets, &centers, config)?;
    stats.sdf_evals += evals;
    stats.eval_batches += batches;

    let surfaces = offsets
        .windows(2)
        .map(|w| {
            let r = w[0]..w[1];
            ExtractedSurface {
                cells: survivors.entries()[r.clone()]
                    .iter()
                    .map(|e| e.cell)
                    .collect(),
                points: projection.points[r.clone()].to_vec(),
                normals: projection.normals[r.clone()].to_vec(),
                residuals: projection.residuals[r.clone()].to_vec(),
                flagged: projection.flagged[r].to_vec(),
            }
        })
        .collect();
    Ok(Extraction { surfaces, stats })
}

/// Extracts objects one at a time, each with its own traversal.
pub fn extract_sequential(fields: &[Field<'_>], config: &ExtractionConfig) -> Result<Extraction> {
    let mut out = Extraction::default();
    for field in fields {
        let single = extract_batched(std::slice::from_ref(field), config)?;
        out.stats.sdf_evals += single.stats.sdf_evals;
        out.stats.eval_batches += single.stats.eval_batches;
        if out.stats.survivors_per_level.is_empty() {
            out.stats.survivors_per_level = single.stats.survivors_per_level;
        } else {
            for (acc, s) in out
                .stats
                .survivors_per_level
                .iter_mut()
                .zip(single.stats.survivors_per_level)
            {
                *acc += s;
            }
        }
        out.surfaces.extend(single.surfaces);
    }
    Ok(out)
}
