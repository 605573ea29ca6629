use crate::error::{FsdError, Result};
use crate::sdf::{eval_concatenated, Field};
use crate::Vec3;

use super::ExtractionConfig;

/// Highest supported level of detail.
pub const MAX_LOD: u32 = 12;

/// Edge length of a voxel at `level` in the edge-2 canonical cube.
pub fn voxel_edge(level: u32) -> f64 {
    2.0 / (1u64 << level) as f64
}

/// Center coordinate of grid index `i` at the given edge length.
#[inline]
pub fn cell_center_coord(i: u32, edge: f64) -> f64 {
    -1.0 + edge * (i as f64 + 0.5)
}

pub fn cell_center(cell: [u32; 3], edge: f64) -> Vec3 {
    Vec3::new(
        cell_center_coord(cell[0], edge),
        cell_center_coord(cell[1], edge),
        cell_center_coord(cell[2], edge),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrontierEntry {
    pub object_index: usize,
    /// Integer grid coordinates `(x, y, z)` at the frontier level.
    pub cell: [u32; 3],
}

/// Live voxels of every object at one octree level, sorted by
/// `(object_index, row-major grid index)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelFrontier {
    level: u32,
    entries: Vec<FrontierEntry>,
}

impl VoxelFrontier {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn edge(&self) -> f64 {
        voxel_edge(self.level)
    }

    pub fn entries(&self) -> &[FrontierEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn center(&self, entry: &FrontierEntry) -> Vec3 {
        cell_center(entry.cell, self.edge())
    }

    pub fn centers(&self) -> Vec<Vec3> {
        let edge = self.edge();
        self.entries
            .iter()
            .map(|e| cell_center(e.cell, edge))
            .collect()
    }

    /// Row-major linear index of a cell at this level.
    pub fn linear_index(&self, cell: [u32; 3]) -> u64 {
        let n = 1u64 << self.level;
        (cell[0] as u64 * n + cell[1] as u64) * n + cell[2] as u64
    }

    /// Start offset of each object's run of entries, plus a final end offset.
    pub fn object_offsets(&self, num_objects: usize) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(num_objects + 1);
        for obj in 0..=num_objects {
            offsets.push(self.entries.partition_point(|e| e.object_index < obj));
        }
        offsets
    }

    /// Entries belonging to one object.
    pub fn object_entries(&self, object_index: usize) -> &[FrontierEntry] {
        let lo = self
            .entries
            .partition_point(|e| e.object_index < object_index);
        let hi = self
            .entries
            .partition_point(|e| e.object_index <= object_index);
        &self.entries[lo..hi]
    }

    fn sort(&mut self) {
        let n = 1u64 << self.level;
        self.entries.sort_unstable_by_key(|e| {
            (
                e.object_index,
                (e.cell[0] as u64 * n + e.cell[1] as u64) * n + e.cell[2] as u64,
            )
        });
    }
}

/// Full `(2^lod)^3` grid for every object.
pub fn init_frontier(num_objects: usize, lod: u32) -> Result<VoxelFrontier> {
    if num_objects == 0 {
        return Err(FsdError::invalid("at least one object is required"));
    }
    if !(1..=MAX_LOD).contains(&lod) {
        return Err(FsdError::invalid(format!(
            "level {lod} outside 1..={MAX_LOD}"
        )));
    }
    let n = 1u32 << lod;
    let mut entries = Vec::with_capacity(num_objects * (n as usize).pow(3));
    for object_index in 0..num_objects {
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    entries.push(FrontierEntry {
                        object_index,
                        cell: [x, y, z],
                    });
                }
            }
        }
    }
    Ok(VoxelFrontier {
        level: lod,
        entries,
    })
}

/// Counters from one pruning pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PassStats {
    pub evaluations: usize,
    pub batches: usize,
    pub survivors: usize,
}

/// Evaluates every entry in one concatenated batch and keeps those with
/// `|f(center)| <= k * edge`.
pub fn prune_frontier(
    frontier: &VoxelFrontier,
    fields: &[Field<'_>],
    config: &ExtractionConfig,
) -> Result<(VoxelFrontier, PassStats)> {
    if let Some(e) = frontier.entries.last() {
        if e.object_index >= fields.len() {
            return Err(FsdError::invalid(format!(
                "frontier references object {} but only {} fields were given",
                e.object_index,
                fields.len()
            )));
        }
    }
    let centers = frontier.centers();
    let offsets = frontier.object_offsets(fields.len());
    let (values, _, batches) = eval_concatenated(fields, &offsets, &centers, false)?;
    let threshold = config.prune_factor * frontier.edge();
    let entries: Vec<FrontierEntry> = frontier
        .entries
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.abs() <= threshold)
        .map(|(e, _)| *e)
        .collect();
    let stats = PassStats {
        evaluations: centers.len(),
        batches,
        survivors: entries.len(),
    };
    Ok((
        VoxelFrontier {
            level: frontier.level,
            entries,
        },
        stats,
    ))
}

/// Splits every entry into its eight children one level down.
pub fn subdivide(frontier: &VoxelFrontier) -> Result<VoxelFrontier> {
    if frontier.level >= MAX_LOD {
        return Err(FsdError::invalid(format!(
            "cannot subdivide past level {MAX_LOD}"
        )));
    }
    let mut entries = Vec::with_capacity(frontier.entries.len() * 8);
    for e in &frontier.entries {
        let [x, y, z] = e.cell;
        for dx in 0..2 {
            for dy in 0..2 {
                for dz in 0..2 {
                    entries.push(FrontierEntry {
                        object_index: e.object_index,
                        cell: [2 * x + dx, 2 * y + dy, 2 * z + dz],
                    });
                }
            }
        }
    }
    let mut out = VoxelFrontier {
        level: frontier.level + 1,
        entries,
    };
    out.sort();
    Ok(out)
}

/// One octree step: prune at the current level, then subdivide survivors.
pub fn refine_frontier(
    frontier: &VoxelFrontier,
    fields: &[Field<'_>],
    config: &ExtractionConfig,
) -> Result<(VoxelFrontier, PassStats)> {
    if frontier.level >= config.lod_end {
        return Err(FsdError::invalid(format!(
            "frontier level {} is not below lod_end {}",
            frontier.level, config.lod_end
        )));
    }
    let (kept, stats) = prune_frontier(frontier, fields, config)?;
    Ok((subdivide(&kept)?, stats))
}
