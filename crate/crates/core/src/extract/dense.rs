use crate::error::{FsdError, Result};
use crate::sdf::Field;
use crate::Vec3;

use super::frontier::{cell_center, FrontierEntry};
use super::project::{project_concatenated, Projection};
use super::ExtractionConfig;

/// Result of evaluating every cell of a regular grid.
#[derive(Clone, Debug, Default)]
pub struct DenseExtraction {
    pub resolution: u32,
    /// Signed distance at every cell center, row-major `(x, y, z)`.
    pub values: Vec<f64>,
    /// Cells with `|f(center)| <= k * edge`, row-major order.
    pub kept: Vec<[u32; 3]>,
    pub projection: Projection,
    pub evaluations: usize,
}

impl DenseExtraction {
    pub fn edge(&self) -> f64 {
        2.0 / self.resolution as f64
    }

    pub fn kept_centers(&self) -> Vec<Vec3> {
        let edge = self.edge();
        self.kept.iter().map(|c| cell_center(*c, edge)).collect()
    }

    pub fn value_at(&self, cell: [u32; 3]) -> f64 {
        let n = self.resolution as usize;
        self.values[(cell[0] as usize * n + cell[1] as usize) * n + cell[2] as usize]
    }
}

/// Brute-force baseline: evaluates all `resolution^3` cell centers, keeps
/// those within the pruning threshold and projects them.
pub fn dense_grid_extract(
    field: Field<'_>,
    resolution: u32,
    config: &ExtractionConfig,
) -> Result<DenseExtraction> {
    if resolution < 2 {
        return Err(FsdError::invalid("dense resolution must be at least 2"));
    }
    let edge = 2.0 / resolution as f64;
    let mut cells = Vec::with_capacity((resolution as usize).pow(3));
    for x in 0..resolution {
        for y in 0..resolution {
            for z in 0..resolution {
                cells.push([x, y, z]);
            }
        }
    }
    let centers: Vec<Vec3> = cells.iter().map(|c| cell_center(*c, edge)).collect();
    let values = field.eval(&centers)?;
    let threshold = config.prune_factor * edge;
    let (kept, kept_centers): (Vec<[u32; 3]>, Vec<Vec3>) = cells
        .iter()
        .zip(&centers)
        .zip(&values)
        .filter(|(_, v)| v.abs() <= threshold)
        .map(|((c, p), _)| (*c, *p))
        .unzip();
    let (projection, proj_evals, _) =
        project_concatenated(&[field], &[0, kept_centers.len()], &kept_centers, config)?;
    Ok(DenseExtraction {
        resolution,
        evaluations: centers.len() + proj_evals,
        values,
        kept,
        projection,
    })
}

/// Cells of a dense extraction as frontier entries of object 0.
pub fn kept_as_entries(dense: &DenseExtraction) -> Vec<FrontierEntry> {
    dense
        .kept
        .iter()
        .map(|&cell| FrontierEntry {
            object_index: 0,
            cell,
        })
        .collect()
}
