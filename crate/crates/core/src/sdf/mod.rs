//! Scalar fields: exact analytic SDFs and latent-conditioned decoders.

mod analytic;
mod decoder;
mod weights;

use rayon::prelude::*;

pub use analytic::AnalyticField;
pub use decoder::{
    gen_random_decoder, gen_random_decoder_with_gain, gen_shape_decoder, LatentCode, Layer,
    MlpSdfDecoder, OutputActivation, DEFAULT_DEPTH, DEFAULT_HIDDEN_DIM, DEFAULT_LATENT_DIM,
};
pub use weights::{
    load_weights, load_weights_any, save_weights, weights_from_bytes, weights_from_json,
    weights_to_bytes, weights_to_json,
};

use crate::error::{FsdError, Result};
use crate::Vec3;

/// A signed distance field for one object.
#[derive(Clone, Copy, Debug)]
pub enum Field<'a> {
    Analytic(AnalyticField),
    Neural {
        decoder: &'a MlpSdfDecoder,
        latent: &'a LatentCode,
    },
}

impl<'a> From<AnalyticField> for Field<'a> {
    fn from(f: AnalyticField) -> Self {
        Field::Analytic(f)
    }
}

impl<'a> Field<'a> {
    pub fn neural(decoder: &'a MlpSdfDecoder, latent: &'a LatentCode) -> Result<Self> {
        if latent.len() != decoder.latent_dim() {
            return Err(FsdError::invalid(format!(
                "latent has {} entries but the decoder expects {}",
                latent.len(),
                decoder.latent_dim()
            )));
        }
        Ok(Field::Neural { decoder, latent })
    }

    pub fn eval(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        check_points(points)?;
        match self {
            Field::Analytic(f) => Ok(points.par_iter().map(|p| f.value(p)).collect()),
            Field::Neural { decoder, latent } => decoder.eval(latent, points),
        }
    }

    pub fn gradient(&self, points: &[Vec3]) -> Result<Vec<Vec3>> {
        Ok(self.eval_with_gradient(points)?.1)
    }

    pub fn eval_with_gradient(&self, points: &[Vec3]) -> Result<(Vec<f64>, Vec<Vec3>)> {
        check_points(points)?;
        match self {
            Field::Analytic(f) => Ok(points
                .par_iter()
                .map(|p| (f.value(p), f.gradient(p)))
                .unzip()),
            Field::Neural { decoder, latent } => decoder.eval_with_gradient(latent, points),
        }
    }
}

fn check_points(points: &[Vec3]) -> Result<()> {
    match points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
        Some(i) => Err(FsdError::invalid(format!("point {i} is not finite"))),
        None => Ok(()),
    }
}

/// Evaluates a concatenated multi-object batch: `points[offsets[i]..offsets[i+1]]`
/// belong to `fields[i]`. Consecutive neural objects sharing one decoder are
/// evaluated as a single forward pass. Returns the values and the number of
/// evaluation batches issued.
pub fn eval_concatenated(
    fields: &[Field<'_>],
    offsets: &[usize],
    points: &[Vec3],
    with_gradient: bool,
) -> Result<(Vec<f64>, Option<Vec<Vec3>>, usize)> {
    if offsets.len() != fields.len() + 1 || offsets.last() != Some(&points.len()) {
        return Err(FsdError::invalid(
            "segment offsets do not match the field list",
        ));
    }
    check_points(points)?;
    let mut values = Vec::with_capacity(points.len());
    let mut grads = with_gradient.then(|| Vec::with_capacity(points.len()));
    let mut batches = 0;
    let mut i = 0;
    while i < fields.len() {
        match fields[i] {
            Field::Analytic(_) => {
                let seg = &points[offsets[i]..offsets[i + 1]];
                if !seg.is_empty() {
                    batches += 1;
                    if let Some(g) = grads.as_mut() {
                        let (v, gr) = fields[i].eval_with_gradient(seg)?;
                        values.extend(v);
                        g.extend(gr);
                    } else {
                        values.extend(fields[i].eval(seg)?);
                    }
                }
                i += 1;
            }
            Field::Neural { decoder, .. } => {
                let mut j = i;
                let mut latents = Vec::new();
                while j < fields.len() {
                    match fields[j] {
                        Field::Neural { decoder: d, latent } if std::ptr::eq(d, decoder) => {
                            latents.push(latent);
                            j += 1;
                        }
                        _ => break,
                    }
                }
                let base = offsets[i];
                let local: Vec<usize> = offsets[i..=j].iter().map(|o| o - base).collect();
                let seg = &points[base..offsets[j]];
                if !seg.is_empty() {
                    batches += 1;
                    if let Some(g) = grads.as_mut() {
                        let (v, gr) = decoder.eval_segments_with_gradient(&latents, &local, seg)?;
                        values.extend(v);
                        g.extend(gr);
                    } else {
                        values.extend(decoder.eval_segments(&latents, &local, seg)?);
                    }
                }
                i = j;
            }
        }
    }
    Ok((values, grads, batches))
}
