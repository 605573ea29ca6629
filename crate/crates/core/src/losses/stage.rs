//! Stage-wise loss composition.
//!
//! * pretrain: `seg + depth + heatmap + pose + shape`, every sample synthetic
//! * mixed: `seg + depth + heatmap + [syn](pose + shape) + [real] chamfer`
//! * finetune: `seg + depth + heatmap + chamfer`, every sample real
//!
//! Each term carries its weight and the batch total is the mean over samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FsdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pretrain,
    Mixed,
    Finetune,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleDomain {
    Synthetic,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub seg: f64,
    pub depth: f64,
    pub heatmap: f64,
    pub pose: f64,
    pub shape: f64,
    pub chamfer: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            seg: 1.0,
            depth: 1.0,
            heatmap: 100.0,
            pose: 0.1,
            shape: 0.1,
            chamfer: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLossSpec {
    pub stage: Stage,
    pub weights: LossWeights,
    /// Synthetic samples per real sample when mixing batches.
    pub synthetic_ratio: u32,
}

impl StageLossSpec {
    pub fn new(stage: Stage) -> Self {
        Self {
            stage,
            weights: LossWeights::default(),
            synthetic_ratio: 5,
        }
    }
}

/// Unweighted loss values of one sample. Absent terms count as zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub seg: f64,
    pub depth: f64,
    pub heatmap: f64,
    pub pose: Option<f64>,
    pub shape: Option<f64>,
    pub chamfer: Option<f64>,
}

impl LossComponents {
    pub fn uniform(v: f64) -> Self {
        Self {
            seg: v,
            depth: v,
            heatmap: v,
            pose: Some(v),
            shape: Some(v),
            chamfer: Some(v),
        }
    }
}

pub const TERM_NAMES: [&str; 6] = ["seg", "depth", "heatmap", "pose", "shape", "chamfer"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub terms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl LossBreakdown {
    pub fn term(&self, name: &str) -> f64 {
        self.terms.get(name).copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("breakdown serializes")
    }
}

pub fn stage_loss(
    spec: &StageLossSpec,
    samples: &[LossComponents],
    domains: &[SampleDomain],
) -> Result<LossBreakdown> {
    if samples.len() != domains.len() {
        return Err(FsdError::invalid(format!(
            "{} samples but {} domain flags",
            samples.len(),
            domains.len()
        )));
    }
    let w = &spec.weights;
    for (name, v) in [
        ("seg", w.seg),
        ("depth", w.depth),
        ("heatmap", w.heatmap),
        ("pose", w.pose),
        ("shape", w.shape),
        ("chamfer", w.chamfer),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(FsdError::invalid(format!(
                "weight `{name}` must be non-negative"
            )));
        }
    }
    let mut sums = [0.0f64; 6];
    let mut warnings = Vec::new();
    for (i, (s, d)) in samples.iter().zip(domains).enumerate() {
        let values = [
            s.seg,
            s.depth,
            s.heatmap,
            s.pose.unwrap_or(0.0),
            s.shape.unwrap_or(0.0),
            s.chamfer.unwrap_or(0.0),
        ];
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(FsdError::invalid(format!(
                "sample {i}: `{}` is not finite",
                TERM_NAMES[k]
            )));
        }
        let synthetic = match spec.stage {
            Stage::Pretrain => true,
            Stage::Finetune => false,
            Stage::Mixed => *d == SampleDomain::Synthetic,
        };
        if spec.stage == Stage::Finetune && (s.pose.is_some() || s.shape.is_some()) {
            warnings.push(format!(
                "sample {i}: pose/shape terms are ignored during fine-tuning"
            ));
        }
        let mask = [true, true, true, synthetic, synthetic, !synthetic];
        for k in 0..6 {
            if mask[k] {
                sums[k] += values[k];
            }
        }
    }
    let n = samples.len().max(1) as f64;
    let lambdas = [w.seg, w.depth, w.heatmap, w.pose, w.shape, w.chamfer];
    let weighted: Vec<f64> = (0..6).map(|k| lambdas[k] * sums[k] / n).collect();
    let terms = TERM_NAMES
        .iter()
        .zip(&weighted)
        .map(|(name, v)| (name.to_string(), *v))
        .collect();
    Ok(LossBreakdown {
        total: compensated_sum(&weighted),
        terms,
        warnings,
    })
}

/// Neumaier summation.
fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
