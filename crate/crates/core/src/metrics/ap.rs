use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::iou::{iou3d, OrientedBox3, MIN_IOU_SAMPLES};
use super::{rotation_error_deg, translation_error_cm};
use crate::error::{FsdError, Result};
use crate::geometry::SimilarityTransform;
use crate::Vec3;

/// One detection or ground-truth instance. Ground-truth scores are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    /// Matching only happens within one image.
    #[serde(default)]
    pub image_id: String,
    pub category: String,
    #[serde(default = "one")]
    pub score: f64,
    pub transform: SimilarityTransform,
    #[serde(rename = "box")]
    pub bbox: OrientedBox3,
}

fn one() -> f64 {
    1.0
}

impl PoseRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(FsdError::invalid(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MatchPredicate {
    /// 3D IoU of the boxes at least the threshold.
    Iou {
        threshold: f64,
        samples: usize,
        seed: u64,
    },
    /// Rotation error below `degrees` and translation error below `cm`.
    Pose {
        degrees: f64,
        cm: f64,
        symmetry_axis: Option<Vec3>,
    },
}

impl MatchPredicate {
    /// Match quality (higher is better), or `None` when the pair does not match.
    fn quality(&self, pred: &PoseRecord, gt: &PoseRecord) -> Result<Option<f64>> {
        match self {
            MatchPredicate::Iou {
                threshold,
                samples,
                seed,
            } => {
                let iou = iou3d(&pred.bbox, &gt.bbox, *samples, *seed)?;
                Ok((iou >= *threshold).then_some(iou))
            }
            MatchPredicate::Pose {
                degrees,
                cm,
                symmetry_axis,
            } => {
                let r = rotation_error_deg(
                    pred.transform.rotation(),
                    gt.transform.rotation(),
                    symmetry_axis.as_ref(),
                )?;
                let t =
                    translation_error_cm(pred.transform.translation(), gt.transform.translation());
                Ok((r < *degrees && t < *cm).then_some(-(r / degrees + t / cm)))
            }
        }
    }
}

/// All-point interpolated area under the precision/recall curve.
fn interpolated_ap(hits: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 || hits.is_empty() {
        return 0.0;
    }
    let mut recall = vec![0.0];
    let mut precision = vec![0.0];
    let mut tp = 0usize;
    for (i, &hit) in hits.iter().enumerate() {
        tp += hit as usize;
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    (1..recall.len())
        .filter(|&i| recall[i] != recall[i - 1])
        .map(|i| (recall[i] - recall[i - 1]) * precision[i])
        .sum()
}

/// Greedy matching of one category: predictions in descending score order
/// each claim the best still-unmatched ground truth of the same image.
fn category_hits(
    preds: &[&PoseRecord],
    gts: &[&PoseRecord],
    predicate: &MatchPredicate,
) -> Result<Vec<bool>> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score).then(a.cmp(&b)));
    let mut taken = vec![false; gts.len()];
    let mut hits = Vec::with_capacity(preds.len());
    for i in order {
        let p = preds[i];
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gts.iter().enumerate() {
            if taken[j] || g.image_id != p.image_id {
                continue;
            }
            if let Some(q) = predicate.quality(p, g)? {
                if best.is_none_or(|(_, bq)| q > bq) {
                    best = Some((j, q));
                }
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
        }
        hits.push(best.is_some());
    }
    Ok(hits)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoryAp {
    pub per_category: BTreeMap<String, f64>,
    /// Mean over categories that have ground truth; zero when none do.
    pub mean: f64,
}

pub fn average_precision(
    records: &[PoseRecord],
    gts: &[PoseRecord],
    predicate: &MatchPredicate,
) -> Result<CategoryAp> {
    average_precision_with(records, gts, |_| predicate.clone())
}

fn average_precision_with(
    records: &[PoseRecord],
    gts: &[PoseRecord],
    predicate_for: impl Fn(&str) -> MatchPredicate,
) -> Result<CategoryAp> {
    for r in records {
        r.validate()?;
    }
    let categories: BTreeSet<&str> = gts.iter().map(|g| g.category.as_str()).collect();
    let mut per_category = BTreeMap::new();
    for cat in categories {
        let preds: Vec<&PoseRecord> = records.iter().filter(|r| r.category == cat).collect();
        let cat_gts: Vec<&PoseRecord> = gts.iter().filter(|g| g.category == cat).collect();
        let hits = category_hits(&preds, &cat_gts, &predicate_for(cat))?;
        per_category.insert(cat.to_string(), interpolated_ap(&hits, cat_gts.len()));
    }
    let mean = if per_category.is_empty() {
        0.0
    } else {
        per_category.values().sum::<f64>() / per_category.len() as f64
    };
    Ok(CategoryAp { per_category, mean })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub iou: Vec<f64>,
    /// `(degrees, centimeters)` pairs.
    pub pose: Vec<(f64, f64)>,
    pub iou_samples: usize,
    pub seed: u64,
    /// Per-category symmetry axis used by the pose thresholds.
    pub symmetry_axes: BTreeMap<String, [f64; 3]>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            iou: vec![0.25, 0.5],
            pose: vec![(5.0, 5.0), (5.0, 10.0), (10.0, 5.0), (10.0, 10.0)],
            iou_samples: MIN_IOU_SAMPLES,
            seed: 0,
            symmetry_axes: BTreeMap::new(),
        }
    }
}

fn number_label(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    /// `(key, AP)` in threshold order.
    pub entries: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

impl SuiteReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.entries {
            map.insert(k.clone(), (*v).into());
        }
        map.insert("flags".into(), self.flags.clone().into());
        serde_json::Value::Object(map)
    }
}

/// AP at every configured IoU and degree/centimeter threshold.
pub fn evaluate_suite(
    preds: &[PoseRecord],
    gts: &[PoseRecord],
    cfg: &SuiteConfig,
) -> Result<SuiteReport> {
    let mut flags = Vec::new();
    if gts.is_empty() {
        flags.push("empty_ground_truth".to_string());
    }
    if preds.is_empty() {
        flags.push("empty_predictions".to_string());
    }
    let gt_categories: BTreeSet<&str> = gts.iter().map(|g| g.category.as_str()).collect();
    let unknown: BTreeSet<&str> = preds
        .iter()
        .map(|p| p.category.as_str())
        .filter(|c| !gt_categories.contains(c))
        .collect();
    for c in unknown {
        flags.push(format!("category_without_ground_truth:{c}"));
    }
    let mut entries = Vec::new();
    for &t in &cfg.iou {
        let predicate = MatchPredicate::Iou {
            threshold: t,
            samples: cfg.iou_samples,
            seed: cfg.seed,
        };
        let ap = average_precision(preds, gts, &predicate)?;
        entries.push((format!("iou{}", number_label(t * 100.0)), ap.mean));
    }
    for &(deg, cm) in &cfg.pose {
        let ap = average_precision_with(preds, gts, |cat| MatchPredicate::Pose {
            degrees: deg,
            cm,
            symmetry_axis: cfg.symmetry_axes.get(cat).map(|a| Vec3::from(*a)),
        })?;
        entries.push((
            format!("deg{}cm{}", number_label(deg), number_label(cm)),
            ap.mean,
        ));
    }
    Ok(SuiteReport { entries, flags })
}

/// One JSON record per non-empty line.
pub fn read_records_jsonl<R: BufRead>(reader: R) -> Result<Vec<PoseRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PoseRecord = serde_json::from_str(&line).map_err(|e| FsdError::Format {
            field: format!("line {}", i + 1),
            message: e.to_string(),
        })?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}
