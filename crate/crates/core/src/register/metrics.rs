use crate::harris::Keypoint;
use crate::matching::MatchSet;
use crate::transform::AffineModel;

/// Number of pairs whose sensed point lands within `tol` pixels of its
/// reference point under the ground-truth model.
pub fn ncm(matches: &MatchSet, kref: &[Keypoint], ksen: &[Keypoint], truth: &AffineModel, tol: f64) -> usize {
    matches
        .pairs
        .iter()
        .filter(|p| {
            let s = &ksen[p.sen_idx];
            let r = &kref[p.ref_idx];
            let (x, y) = truth.apply(s.x, s.y);
            (x - r.x).hypot(y - r.y) <= tol
        })
        .count()
}

/// Root-mean-square distance between the estimated and true positions of
/// the matched sensed keypoints.
pub fn model_rmse(matches: &MatchSet, ksen: &[Keypoint], estimate: &AffineModel, truth: &AffineModel) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    let sum: f64 = matches
        .pairs
        .iter()
        .map(|p| {
            let s = &ksen[p.sen_idx];
            let (ex, ey) = estimate.apply(s.x, s.y);
            let (tx, ty) = truth.apply(s.x, s.y);
            (ex - tx).powi(2) + (ey - ty).powi(2)
        })
        .sum();
    (sum / matches.len() as f64).sqrt()
}
