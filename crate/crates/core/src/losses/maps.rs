use crate::error::{FsdError, Result};
use crate::geometry::{DenseEmbeddingMap, Heatmap};

/// Sum (not mean) of squared per-pixel differences.
pub fn heatmap_l2(pred: &Heatmap, gt: &Heatmap) -> Result<f64> {
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(FsdError::invalid("heatmaps differ in size"));
    }
    Ok(pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(p, g)| (p - g) * (p - g))
        .sum())
}

/// `sum_xy w(x,y) |pred(x,y) - gt(x,y)|_1 / sum_xy w(x,y)`; zero when the
/// weights sum to zero.
pub fn weighted_l1(
    pred: &DenseEmbeddingMap,
    gt: &DenseEmbeddingMap,
    weight: &Heatmap,
) -> Result<f64> {
    if pred.width() != gt.width()
        || pred.height() != gt.height()
        || pred.channels() != gt.channels()
        || pred.width() != weight.width()
        || pred.height() != weight.height()
    {
        return Err(FsdError::invalid(
            "embedding maps and weight differ in size",
        ));
    }
    let c = pred.channels();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, w) in weight.values().iter().enumerate() {
        let p = &pred.values()[i * c..(i + 1) * c];
        let g = &gt.values()[i * c..(i + 1) * c];
        let l1: f64 = p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum();
        num += w * l1;
        den += w;
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}
