use crate::error::Result;
use crate::sdf::{eval_concatenated, Field};
use crate::Vec3;

use super::ExtractionConfig;

/// Points moved onto the zero level set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Projection {
    pub points: Vec<Vec3>,
    /// Unit normals; zero for flagged points.
    pub normals: Vec<Vec3>,
    /// `|f(p)|` at the final position.
    pub residuals: Vec<f64>,
    /// Set where the gradient fell below the floor; such points were not moved.
    pub flagged: Vec<bool>,
}

/// Applies `p <- p - g * f(p)` `projection_steps` times, with `g` the
/// (optionally normalized) gradient, then evaluates normals and residuals
/// at the final positions.
pub fn project_to_surface(
    field: Field<'_>,
    points: &[Vec3],
    config: &ExtractionConfig,
) -> Result<Projection> {
    Ok(project_concatenated(&[field], &[0, points.len()], points, config)?.0)
}

/// Multi-object projection over a concatenated batch. Returns the projection,
/// the number of point evaluations and the number of evaluation batches.
pub(crate) fn project_concatenated(
    fields: &[Field<'_>],
    offsets: &[usize],
    points: &[Vec3],
    config: &ExtractionConfig,
) -> Result<(Projection, usize, usize)> {
    let mut current = points.to_vec();
    let mut flagged = vec![false; points.len()];
    let mut evals = 0;
    let mut batches = 0;
    for _ in 0..config.projection_steps {
        let (values, grads, b) = eval_concatenated(fields, offsets, &current, true)?;
        evals += current.len();
        batches += b;
        let grads = grads.expect("gradient requested");
        for (((p, f), g), flag) in current
            .iter_mut()
            .zip(&values)
            .zip(&grads)
            .zip(&mut flagged)
        {
            let norm = g.norm();
            if norm < config.gradient_floor {
                *flag = true;
                continue;
            }
            let dir = if config.normalize_gradient {
                g / norm
            } else {
                *g
            };
            *p -= dir * *f;
        }
    }
    let (values, grads, b) = eval_concatenated(fields, offsets, &current, true)?;
    evals += current.len();
    batches += b;
    let grads = grads.expect("gradient requested");
    let normals = grads
        .iter()
        .zip(&mut flagged)
        .map(|(g, flag)| {
            let norm = g.norm();
            if norm < config.gradient_floor {
                *flag = true;
                Vec3::zeros()
            } else {
                g / norm
            }
        })
        .collect();
    let projection = Projection {
        residuals: values.iter().map(|v| v.abs()).collect(),
        points: current,
        normals,
        flagged,
    };
    Ok((projection, evals, batches))
}
