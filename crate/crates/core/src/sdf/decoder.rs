//! Latent-conditioned MLP signed distance decoder.
//!
//! The network input is the latent code followed by the query point,
//! `[z_0 .. z_{D-1}, x, y, z]`. Hidden layers use a rectifier, the output
//! layer is either linear or `tanh`. Weights are stored as `f32` (the file
//! format precision) and widened to `f64` for evaluation.
//!
//! Evaluation splits the first layer into a latent part, computed once per
//! latent code, and a point part, so a batch mixing several objects that
//! share the decoder costs one forward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};
use crate::Vec3;

pub const DEFAULT_LATENT_DIM: usize = 64;
pub const DEFAULT_HIDDEN_DIM: usize = 512;
pub const DEFAULT_DEPTH: usize = 8;

/// Points evaluated per work item. Results do not depend on this value.
const CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    None,
    Tanh,
}

impl OutputActivation {
    pub fn code(self) -> u8 {
        match self {
            OutputActivation::None => 0,
            OutputActivation::Tanh => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OutputActivation::None),
            1 => Some(OutputActivation::Tanh),
            _ => None,
        }
    }
}

/// Shape embedding conditioning the decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LatentCode(Vec<f64>);

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(FsdError::invalid("latent code is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FsdError::invalid(format!("latent entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Gaussian latent with the given standard deviation, deterministic in `seed`.
    pub fn random(seed: u64, dim: usize, std: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std).expect("std must be finite and non-negative");
        Self((0..dim).map(|_| normal.sample(&mut rng)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for LatentCode {
    type Error = FsdError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LatentCode> for Vec<f64> {
    fn from(z: LatentCode) -> Self {
        z.0
    }
}

/// One affine layer, `rows` outputs by `cols` inputs, row-major weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f32>, bias: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(FsdError::invalid("layer dimensions must be non-zero"));
        }
        if weights.len() != rows * cols {
            return Err(FsdError::invalid(format!(
                "layer weights have {} entries, expected {rows}x{cols}",
                weights.len()
            )));
        }
        if bias.len() != rows {
            return Err(FsdError::invalid(format!(
                "layer bias has {} entries, expected {rows}",
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(FsdError::invalid("layer contains non-finite values"));
        }
        Ok(Self {
            rows,
            cols,
            weights: weights.into_iter().map(f64::from).collect(),
            bias: bias.into_iter().map(f64::from).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major weights. Every value is exactly representable as `f32`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSdfDecoder {
    latent_dim: usize,
    hidden_dim: usize,
    output_activation: OutputActivation,
    layers: Vec<Layer>,
}

impl MlpSdfDecoder {
    pub fn new(
        latent_dim: usize,
        hidden_dim: usize,
        output_activation: OutputActivation,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let depth = layers.len();
        if depth == 0 {
            return Err(FsdError::invalid("decoder needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            let want_cols = if i == 0 { latent_dim + 3 } else { hidden_dim };
            let want_rows = if i + 1 == depth { 1 } else { hidden_dim };
            if layer.cols != want_cols || layer.rows != want_rows {
                return Err(FsdError::invalid(format!(
                    "layer {i} is {}x{}, expected {want_rows}x{want_cols}",
                    layer.rows, layer.cols
                )));
            }
        }
        Ok(Self {
            latent_dim,
            hidden_dim,
            output_activation,
            layers,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    fn check_latent(&self, latent: &LatentCode) -> Result<()> {
        if latent.len() != self.latent_dim {
            return Err(FsdError::invalid(format!(
                "latent has {} entries but the decoder expects {}",
                latent.len(),
                self.latent_dim
            )));
        }
        Ok(())
    }

    pub fn eval(&self, latent: &LatentCode, points: &[Vec3]) -> Result<Vec<f64>> {
        self.eval_segments(&[latent], &[0, points.len()], points)
    }

    pub fn eval_gradient(&self, latent: &LatentCode, points: &[Vec3]) -> Result<Vec<Vec3>> {
        Ok(self.eval_with_gradient(latent, points)?.1)
    }

    pub fn eval_with_gradient(
        &self,
        latent: &LatentCode,
        points: &[Vec3],
    ) -> Result<(Vec<f64>, Vec<Vec3>)> {
        self.eval_segments_with_gradient(&[latent], &[0, points.len()], points)
    }

    /// Evaluates a concatenated batch in which `points[offsets[i]..offsets[i+1]]`
    /// belong to `latents[i]`.
    pub fn eval_segments(
        &self,
        latents: &[&LatentCode],
        offsets: &[usize],
        points: &[Vec3],
    ) -> Result<Vec<f64>> {
        let plan = self.plan(latents, offsets, points)?;
        let out = plan
            .chunks()
            .into_par_iter()
            .flat_map_iter(|(start, end)| {
                let mut ws = Workspace::new(self, end - start, false);
                self.forward(&plan, start, end, &mut ws);
                ws.output
            })
            .collect();
        Ok(out)
    }

    pub fn eval_segments_with_gradient(
        &self,
        latents: &[&LatentCode],
        offsets: &[usize],
        points: &[Vec3],
    ) -> Result<(Vec<f64>, Vec<Vec3>)> {
        let plan = self.plan(latents, offsets, points)?;
        let parts: Vec<(Vec<f64>, Vec<Vec3>)> = plan
            .chunks()
            .into_par_iter()
            .map(|(start, end)| {
                let mut ws = Workspace::new(self, end - start, true);
                self.forward(&plan, start, end, &mut ws);
                let grads = self.backward(&mut ws);
                (ws.output, grads)
            })
            .collect();
        let mut values = Vec::with_capacity(points.len());
        let mut grads = Vec::with_capacity(points.len());
        for (v, g) in parts {
            values.extend(v);
            grads.extend(g);
        }
        Ok((values, grads))
    }

    /// Hidden-layer pre-activations at one point, for kink diagnostics.
    pub fn pre_activations(&self, latent: &LatentCode, point: &Vec3) -> Result<Vec<Vec<f64>>> {
        let plan = self.plan(&[latent], &[0, 1], std::slice::from_ref(point))?;
        let mut ws = Workspace::new(self, 1, true);
        self.forward(&plan, 0, 1, &mut ws);
        ws.pre.pop();
        Ok(ws.pre)
    }

    fn plan<'a>(
        &self,
        latents: &[&LatentCode],
        offsets: &'a [usize],
        points: &'a [Vec3],
    ) -> Result<Plan<'a>> {
        if offsets.len() != latents.len() + 1
            || offsets.first() != Some(&0)
            || offsets.last() != Some(&points.len())
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(FsdError::invalid(
                "segment offsets do not partition the batch",
            ));
        }
        let first = &self.layers[0];
        let mut projected = Vec::with_capacity(latents.len());
        for latent in latents {
            self.check_latent(latent)?;
            // bias + W[:, :D] z, once per latent code
            let z = latent.as_slice();
            let proj: Vec<f64> = (0..first.rows)
                .map(|r| {
                    let row = &first.weights[r * first.cols..r * first.cols + self.latent_dim];
                    row.iter()
                        .zip(z)
                        .fold(first.bias[r], |acc, (w, v)| acc + w * v)
                })
                .collect();
            projected.push(proj);
        }
        Ok(Plan {
            projected,
            offsets,
            points,
        })
    }

    fn forward(&self, plan: &Plan<'_>, start: usize, end: usize, ws: &mut Workspace) {
        let n = end - start;
        let first = &self.layers[0];
        let d = self.latent_dim;
        let last = self.layers.len() - 1;

        // Layer 0: latent projection of the owning segment + point part.
        let mut z0 = vec![0.0; first.rows * n];
        let mut seg = plan.segment_of(start);
        for j in 0..n {
            let idx = start + j;
            while idx >= plan.offsets[seg + 1] {
                seg += 1;
            }
            let p = &plan.points[idx];
            let proj = &plan.projected[seg];
            for r in 0..first.rows {
                let w = &first.weights[r * first.cols + d..r * first.cols + d + 3];
                z0[r * n + j] = proj[r] + w[0] * p.x + w[1] * p.y + w[2] * p.z;
            }
        }
        let mut z = z0;
        let mut h = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                z = vec![0.0; layer.rows * n];
                for r in 0..layer.rows {
                    z[r * n..(r + 1) * n].fill(layer.bias[r]);
                }
                // z (rows x n) += W (rows x cols) * h (cols x n)
                unsafe {
                    matrixmultiply::dgemm(
                        layer.rows,
                        layer.cols,
                        n,
                        1.0,
                        layer.weights.as_ptr(),
                        layer.cols as isize,
                        1,
                        h.as_ptr(),
                        n as isize,
                        1,
                        1.0,
                        z.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
            if l == last {
                ws.output = match self.output_activation {
                    OutputActivation::None => z.clone(),
                    OutputActivation::Tanh => z.iter().map(|v| v.tanh()).collect(),
                };
            } else {
                h = z.iter().map(|&v| v.max(0.0)).collect();
            }
            if ws.keep {
                ws.pre.push(std::mem::take(&mut z));
            }
        }
    }

    fn backward(&self, ws: &mut Workspace) -> Vec<Vec3> {
        let n = ws.output.len();
        let last = self.layers.len() - 1;
        // delta on the output pre-activation
        let mut delta: Vec<f64> = match self.output_activation {
            OutputActivation::None => vec![1.0; n],
            OutputActivation::Tanh => ws.output.iter().map(|t| 1.0 - t * t).collect(),
        };
        for l in (1..=last).rev() {
            let layer = &self.layers[l];
            let mut prev = vec![0.0; layer.cols * n];
            // prev (cols x n) = W^T (cols x rows) * delta (rows x n)
            unsafe {
                matrixmultiply::dgemm(
                    layer.cols,
                    layer.rows,
                    n,
                    1.0,
                    layer.weights.as_ptr(),
                    1,
                    layer.cols as isize,
                    delta.as_ptr(),
                    n as isize,
                    1,
                    0.0,
                    prev.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
            let pre = &ws.pre[l - 1];
            for (g, z) in prev.iter_mut().zip(pre) {
                if *z <= 0.0 {
                    *g = 0.0;
                }
            }
            delta = prev;
        }
        let first = &self.layers[0];
        let d = self.latent_dim;
        (0..n)
            .map(|j| {
                let mut g = Vec3::zeros();
                for r in 0..first.rows {
                    let w = &first.weights[r * first.cols + d..r * first.cols + d + 3];
                    let dr = delta[r * n + j];
                    g.x += w[0] * dr;
                    g.y += w[1] * dr;
                    g.z += w[2] * dr;
                }
                g
            })
            .collect()
    }
}

struct Plan<'a> {
    projected: Vec<Vec<f64>>,
    offsets: &'a [usize],
    points: &'a [Vec3],
}

impl Plan<'_> {
    fn chunks(&self) -> Vec<(usize, usize)> {
        let n = self.points.len();
        (0..n)
            .step_by(CHUNK)
            .map(|s| (s, (s + CHUNK).min(n)))
            .collect()
    }

    fn segment_of(&self, idx: usize) -> usize {
        // last segment whose start is <= idx, skipping empty segments
        self.offsets
            .partition_point(|&o| o <= idx)
            .saturating_sub(1)
    }
}

struct Workspace {
    keep: bool,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Workspace {
    fn new(decoder: &MlpSdfDecoder, n: usize, keep: bool) -> Self {
        Self {
            keep,
            pre: Vec::with_capacity(if keep { decoder.depth() } else { 0 }),
            output: Vec::with_capacity(n),
        }
    }
}

/// Deterministic decoder with weights and biases uniform in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, drawn layer by layer (weights
/// row-major, then biases) from a ChaCha8 stream seeded with `seed`.
pub fn gen_random_decoder(
    seed: u64,
    latent_dim: usize,
    hidden_dim: usize,
    depth: usize,
) -> MlpSdfDecoder {
    gen_random_decoder_with_gain(seed, latent_dim, hidden_dim, depth, 1.0)
}

/// As [`gen_random_decoder`] with the bound scaled to `gain/sqrt(fan_in)`.
/// A gain of `sqrt(6)` keeps activations from vanishing through deep
/// rectifier stacks, which gives fields with visible zero level sets.
pub fn gen_random_decoder_with_gain(
    seed: u64,
    latent_dim: usize,
    hidden_dim: usize,
    depth: usize,
    gain: f64,
) -> MlpSdfDecoder {
    assert!(latent_dim >= 1 && hidden_dim >= 1 && depth >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = (0..depth)
        .map(|i| {
            let cols = if i == 0 { latent_dim + 3 } else { hidden_dim };
            let rows = if i + 1 == depth { 1 } else { hidden_dim };
            let bound = (gain / (cols as f64).sqrt()) as f32;
            let mut draw = |count: usize| -> Vec<f32> {
                (0..count).map(|_| rng.gen_range(-bound..=bound)).collect()
            };
            let weights = draw(rows * cols);
            let bias = draw(rows);
            Layer::new(rows, cols, weights, bias).expect("generated layer is well formed")
        })
        .collect();
    MlpSdfDecoder::new(latent_dim, hidden_dim, OutputActivation::Tanh, layers)
        .expect("generated decoder is well formed")
}

/// Seeded decoder whose zero-latent field crosses zero inside the unit cube.
///
/// Starts from [`gen_random_decoder_with_gain`] with gain `sqrt(6)` and
/// rescales the output layer so that, on a probe grid, the pre-tanh value has
/// median zero and mean gradient norm one.
pub fn gen_shape_decoder(
    seed: u64,
    latent_dim: usize,
    hidden_dim: usize,
    depth: usize,
) -> MlpSdfDecoder {
    const PROBE: u32 = 12;
    let base = gen_random_decoder_with_gain(seed, latent_dim, hidden_dim, depth, 6f64.sqrt());
    let linear = MlpSdfDecoder {
        output_activation: OutputActivation::None,
        ..base.clone()
    };
    let probes: Vec<Vec3> = (0..PROBE.pow(3))
        .map(|i| {
            let c = |k: u32| -1.0 + 2.0 * (k as f64 + 0.5) / PROBE as f64;
            Vec3::new(c(i / (PROBE * PROBE)), c(i / PROBE % PROBE), c(i % PROBE))
        })
        .collect();
    let (mut u, grads) = linear
        .eval_with_gradient(&LatentCode::zeros(latent_dim), &probes)
        .expect("probe points are finite");
    let mean_grad = grads.iter().map(|g| g.norm()).sum::<f64>() / grads.len() as f64;
    u.sort_by(f64::total_cmp);
    let median = u[u.len() / 2];
    let c = if mean_grad > 0.0 {
        1.0 / mean_grad
    } else {
        1.0
    };

    let mut layers = base.layers;
    let last = layers.pop().expect("at least one layer");
    let weights = last.weights().iter().map(|w| (w * c) as f32).collect();
    let bias = vec![(c * last.bias()[0] - c * median) as f32];
    layers.push(Layer::new(last.rows(), last.cols(), weights, bias).expect("same shape"));
    MlpSdfDecoder::new(latent_dim, hidden_dim, OutputActivation::Tanh, layers)
        .expect("generated decoder is well formed")
}
