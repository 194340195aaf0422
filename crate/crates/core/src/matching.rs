//! Descriptor matching, sample-consensus outlier removal and the
//! union-then-filter merge across pyramid scales.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggloh::Descriptor;
use crate::harris::Keypoint;
use crate::scalespace::ScaleDescriptorSet;
use crate::transform::{affine_from_three, fit_affine_points, AffineModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchStage {
    SingleScale,
    OctaveMerged,
    Final,
}

/// Reference keypoint index, sensed keypoint index, descriptor distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub ref_idx: usize,
    pub sen_idx: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub pairs: Vec<MatchPair>,
    pub stage: MatchStage,
}

impl MatchSet {
    pub fn new(pairs: Vec<MatchPair>, stage: MatchStage) -> Self {
        Self { pairs, stage }
    }

    pub fn empty(stage: MatchStage) -> Self {
        Self::new(Vec::new(), stage)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// True when no reference or sensed index appears twice.
    pub fn is_one_to_one(&self) -> bool {
        let mut r = HashSet::new();
        let mut s = HashSet::new();
        self.pairs
            .iter()
            .all(|p| r.insert(p.ref_idx) && s.insert(p.sen_idx))
    }

    /// `(sensed point, reference point)` coordinates of every pair.
    pub fn points(&self, kref: &[Keypoint], ksen: &[Keypoint]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        self.pairs
            .iter()
            .map(|p| {
                let s = &ksen[p.sen_idx];
                let r = &kref[p.ref_idx];
                ((s.x, s.y), (r.x, r.y))
            })
            .unzip()
    }
}

/// Settings of the sample-consensus filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    /// Reprojection error (pixels) below which a pair is an inlier.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    /// `None` draws a seed from the OS.
    pub rng_seed: Option<u64>,
    /// Smallest consensus set accepted. Three points fit an affine model
    /// exactly, so a set of three carries no evidence; the default asks
    /// for three more.
    pub min_inliers: usize,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 3.0,
            max_iterations: 2000,
            confidence: 0.995,
            rng_seed: Some(0),
            min_inliers: 6,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidParameter("inlier threshold must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter("confidence must lie in (0, 1)".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        if self.min_inliers < 3 {
            return Err(Error::InvalidParameter("min_inliers must be at least 3".into()));
        }
        Ok(())
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            rng_seed: Some(seed),
            ..self.clone()
        }
    }
}

/// Matching settings shared by every stage of the multi-scale merge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Nearest over second-nearest distance bound.
    pub ratio: f64,
    pub consensus: ConsensusConfig,
    /// Number of seeds tried for the final consensus; the run with the
    /// most inliers wins.
    pub repeats: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            ratio: 0.9,
            consensus: ConsensusConfig::default(),
            repeats: 1,
        }
    }
}

/// Descriptors of one layer packed for fast scoring.
struct LayerMatrix<'a> {
    descs: Vec<&'a Descriptor>,
    packed: Vec<f32>,
    dim: usize,
}

impl<'a> LayerMatrix<'a> {
    fn new(descs: &'a [Descriptor]) -> Result<Self> {
        let descs: Vec<&Descriptor> = descs.iter().filter(|d| !d.empty).collect();
        let dim = descs.first().map_or(0, |d| d.values.len());
        if descs.iter().any(|d| d.values.len() != dim) {
            return Err(Error::DimensionMismatch("descriptor lengths differ within a layer".into()));
        }
        let packed = descs
            .iter()
            .flat_map(|d| d.values.iter().map(|&v| v as f32))
            .collect();
        Ok(Self { descs, packed, dim })
    }

    fn len(&self) -> usize {
        self.descs.len()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mutual nearest neighbours under Euclidean distance that also pass the
/// nearest/second-nearest ratio test. Empty descriptors never match.
/// Pair indices are the descriptors' `keypoint_id`s.
pub fn match_layer(dref: &[Descriptor], dsen: &[Descriptor], ratio: f64) -> Result<MatchSet> {
    let a = LayerMatrix::new(dref)?;
    let b = LayerMatrix::new(dsen)?;
    match_matrices(&a, &b, ratio)
}

fn match_matrices(a: &LayerMatrix, b: &LayerMatrix, ratio: f64) -> Result<MatchSet> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Ok(MatchSet::empty(MatchStage::SingleScale));
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(format!(
            "descriptor length {} vs {}",
            a.dim, b.dim
        )));
    }
    let d = a.dim;
    // unit vectors: larger dot product means smaller distance
    let mut dots = vec![0f32; n * m];
    unsafe {
        matrixmultiply::sgemm(
            n,
            d,
            m,
            1.0,
            a.packed.as_ptr(),
            d as isize,
            1,
            b.packed.as_ptr(),
            1,
            d as isize,
            0.0,
            dots.as_mut_ptr(),
            m as isize,
            1,
        );
    }
    let mut col_best = vec![(f32::NEG_INFINITY, usize::MAX); m];
    for i in 0..n {
        let row = &dots[i * m..(i + 1) * m];
        for (j, &v) in row.iter().enumerate() {
            if v > col_best[j].0 {
                col_best[j] = (v, i);
            }
        }
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        let row = &dots[i * m..(i + 1) * m];
        let (mut j1, mut j2) = (usize::MAX, usize::MAX);
        for (j, &v) in row.iter().enumerate() {
            if j1 == usize::MAX || v > row[j1] {
                j2 = j1;
                j1 = j;
            } else if j2 == usize::MAX || v > row[j2] {
                j2 = j;
            }
        }
        if col_best[j1].1 != i {
            continue;
        }
        let va = &a.descs[i].values;
        let d1 = distance(va, &b.descs[j1].values);
        if j2 != usize::MAX {
            let d2 = distance(va, &b.descs[j2].values);
            if d1 > ratio * d2 {
                continue;
            }
        }
        pairs.push(MatchPair {
            ref_idx: a.descs[i].keypoint_id,
            sen_idx: b.descs[j1].keypoint_id,
            distance: d1,
        });
    }
    Ok(MatchSet::new(pairs, MatchStage::SingleScale))
}

fn count_inliers(model: &AffineModel, src: &[(f64, f64)], dst: &[(f64, f64)], thr2: f64) -> Vec<usize> {
    src.iter()
        .zip(dst)
        .enumerate()
        .filter(|(_, (s, d))| {
            let (x, y) = model.apply(s.0, s.1);
            let (ex, ey) = (x - d.0, y - d.1);
            ex * ex + ey * ey < thr2
        })
        .map(|(i, _)| i)
        .collect()
}

/// Sample-consensus filtering with a 3-point affine model.
///
/// The least-squares fit of all matches is tried first, then random minimal
/// samples until the adaptive iteration bound or `max_iterations` is hit.
/// The best consensus set is refit by least squares until it stops growing.
/// Returns the inlier pairs (in input order) and the refit model, or a
/// registration failure when the best set is smaller than `min_inliers`.
pub fn consensus_filter(
    matches: &MatchSet,
    kref: &[Keypoint],
    ksen: &[Keypoint],
    cfg: &ConsensusConfig,
) -> Result<(MatchSet, AffineModel)> {
    cfg.validate()?;
    let n = matches.len();
    if n < 3.max(cfg.min_inliers) {
        return Err(Error::RegistrationFailure { inliers: n });
    }
    let (src, dst) = matches.points(kref, ksen);
    let thr2 = cfg.inlier_threshold * cfg.inlier_threshold;
    let mut rng = match cfg.rng_seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_entropy(),
    };

    let mut best: Vec<usize> = Vec::new();
    if let Ok(m) = fit_affine_points(&src, &dst) {
        best = count_inliers(&m, &src, &dst, thr2);
    }
    let mut needed = cfg.max_iterations;
    let mut iter = 0;
    while iter < needed.min(cfg.max_iterations) {
        iter += 1;
        let idx = sample(&mut rng, n, 3);
        let (i, j, k) = (idx.index(0), idx.index(1), idx.index(2));
        let Some(model) = affine_from_three([src[i], src[j], src[k]], [dst[i], dst[j], dst[k]]) else {
            continue;
        };
        let inl = count_inliers(&model, &src, &dst, thr2);
        if inl.len() > best.len() {
            best = inl;
            let w = best.len() as f64 / n as f64;
            let p_fail = 1.0 - w.powi(3);
            needed = if p_fail <= f64::EPSILON {
                0
            } else {
                ((1.0 - cfg.confidence).ln() / p_fail.ln()).ceil().max(0.0) as usize
            };
        }
    }
    if best.len() < cfg.min_inliers {
        return Err(Error::RegistrationFailure { inliers: best.len() });
    }
    let subset = |ids: &[usize]| -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        ids.iter().map(|&i| (src[i], dst[i])).unzip()
    };
    let (s, d) = subset(&best);
    let mut model = fit_affine_points(&s, &d).map_err(|_| Error::RegistrationFailure {
        inliers: best.len(),
    })?;
    let mut inliers = count_inliers(&model, &src, &dst, thr2);
    for _ in 0..10 {
        if inliers.len() < 3 {
            break;
        }
        let (s, d) = subset(&inliers);
        let Ok(refit) = fit_affine_points(&s, &d) else { break };
        let next = count_inliers(&refit, &src, &dst, thr2);
        if next.len() < inliers.len() || next == inliers {
            break;
        }
        model = refit;
        inliers = next;
    }
    if inliers.len() < cfg.min_inliers {
        return Err(Error::RegistrationFailure {
            inliers: inliers.len(),
        });
    }
    let pairs = inliers.iter().map(|&i| matches.pairs[i]).collect();
    Ok((MatchSet::new(pairs, matches.stage), model))
}

/// Union of match sets keeping the smallest distance for each `(ref, sen)`.
/// Output is sorted by `(ref, sen)`.
fn union_dedup<'a>(sets: impl IntoIterator<Item = &'a MatchSet>, stage: MatchStage) -> MatchSet {
    let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for set in sets {
        for p in &set.pairs {
            best.entry((p.ref_idx, p.sen_idx))
                .and_modify(|d| *d = d.min(p.distance))
                .or_insert(p.distance);
        }
    }
    let pairs = best
        .into_iter()
        .map(|((ref_idx, sen_idx), distance)| MatchPair {
            ref_idx,
            sen_idx,
            distance,
        })
        .collect();
    MatchSet::new(pairs, stage)
}

/// Keep at most one pair per keypoint on each side, preferring smaller
/// distances.
fn enforce_one_to_one(set: &MatchSet) -> MatchSet {
    let mut pairs = set.pairs.clone();
    pairs.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then(a.ref_idx.cmp(&b.ref_idx))
            .then(a.sen_idx.cmp(&b.sen_idx))
    });
    let mut used_r = HashSet::new();
    let mut used_s = HashSet::new();
    pairs.retain(|p| {
        if used_r.contains(&p.ref_idx) || used_s.contains(&p.sen_idx) {
            return false;
        }
        used_r.insert(p.ref_idx);
        used_s.insert(p.sen_idx);
        true
    });
    pairs.sort_by_key(|p| (p.ref_idx, p.sen_idx));
    MatchSet::new(pairs, set.stage)
}

fn mix_seed(base: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn filter_or_empty(
    set: &MatchSet,
    kref: &[Keypoint],
    ksen: &[Keypoint],
    cfg: &ConsensusConfig,
) -> Result<MatchSet> {
    match consensus_filter(set, kref, ksen, cfg) {
        Ok((s, _)) => Ok(s),
        Err(Error::RegistrationFailure { .. }) => Ok(MatchSet::empty(set.stage)),
        Err(e) => Err(e),
    }
}

/// Inlier counts of one octave pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OctavePairCount {
    pub ref_octave: usize,
    pub sen_octave: usize,
    /// Inliers summed over that octave pair's layer pairs.
    pub single_scale: usize,
    pub merged: usize,
}

/// Result of the multi-scale merge.
#[derive(Clone, Debug)]
pub struct MultiScaleMatches {
    pub matches: MatchSet,
    pub model: AffineModel,
    /// Inliers of every layer pair, keyed by `((o_ref, l_ref), (o_sen, l_sen))`.
    pub single_scale: BTreeMap<((usize, usize), (usize, usize)), MatchSet>,
    pub octave_pairs: Vec<OctavePairCount>,
    /// Size of the one-to-one candidate set entering the final filter.
    pub final_candidates: usize,
}

impl MultiScaleMatches {
    pub fn best_single_scale(&self) -> usize {
        self.single_scale.values().map(MatchSet::len).max().unwrap_or(0)
    }
}

/// Match every reference layer against every sensed layer, filter each
/// layer pair, union the layer pairs of each octave pair and filter again,
/// then union all octave pairs, make the result one-to-one and run the final
/// filter. Matches are always expressed in full-resolution keypoint indices.
pub fn match_multiscale(
    sets_ref: &ScaleDescriptorSet,
    sets_sen: &ScaleDescriptorSet,
    kref: &[Keypoint],
    ksen: &[Keypoint],
    cfg: &MatchConfig,
) -> Result<MultiScaleMatches> {
    cfg.consensus.validate()?;
    if sets_ref.is_empty() || sets_sen.is_empty() {
        return Err(Error::RegistrationFailure { inliers: 0 });
    }
    let base_seed = cfg.consensus.rng_seed.unwrap_or_else(rand::random);

    let ref_mats = sets_ref
        .layers
        .iter()
        .map(|(k, v)| Ok((*k, LayerMatrix::new(v)?)))
        .collect::<Result<Vec<_>>>()?;
    let sen_mats = sets_sen
        .layers
        .iter()
        .map(|(k, v)| Ok((*k, LayerMatrix::new(v)?)))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..ref_mats.len())
        .flat_map(|i| (0..sen_mats.len()).map(move |j| (i, j)))
        .collect();
    let layer_results = jobs
        .par_iter()
        .enumerate()
        .map(|(tag, &(i, j))| {
            let (rk, rm) = &ref_mats[i];
            let (sk, sm) = &sen_mats[j];
            let raw = match_matrices(rm, sm, cfg.ratio)?;
            let cc = cfg.consensus.with_seed(mix_seed(base_seed, tag as u64));
            Ok(((*rk, *sk), filter_or_empty(&raw, kref, ksen, &cc)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let single_scale: BTreeMap<_, _> = layer_results.into_iter().collect();

    let mut by_octave: BTreeMap<(usize, usize), Vec<&MatchSet>> = BTreeMap::new();
    for ((rk, sk), set) in &single_scale {
        by_octave.entry((rk.0, sk.0)).or_default().push(set);
    }
    let octave_keys: Vec<(usize, usize)> = by_octave.keys().copied().collect();
    let octave_results = octave_keys
        .par_iter()
        .enumerate()
        .map(|(tag, key)| {
            let union = union_dedup(by_octave[key].iter().copied(), MatchStage::OctaveMerged);
            let cc = cfg
                .consensus
                .with_seed(mix_seed(base_seed, (1 << 32) + tag as u64));
            Ok((*key, filter_or_empty(&union, kref, ksen, &cc)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let octave_pairs = octave_results
        .iter()
        .map(|(key, merged)| OctavePairCount {
            ref_octave: key.0,
            sen_octave: key.1,
            single_scale: by_octave[key].iter().map(|s| s.len()).sum(),
            merged: merged.len(),
        })
        .collect();

    let union = union_dedup(octave_results.iter().map(|(_, s)| s), MatchStage::Final);
    let candidates = enforce_one_to_one(&union);
    let final_candidates = candidates.len();

    let mut best: Option<(MatchSet, AffineModel)> = None;
    let mut last_err = None;
    for rep in 0..cfg.repeats.max(1) {
        let cc = cfg
            .consensus
            .with_seed(mix_seed(base_seed, (2 << 32) + rep as u64));
        match consensus_filter(&candidates, kref, ksen, &cc) {
            Ok(r) => {
                if best.as_ref().map_or(true, |b| r.0.len() > b.0.len()) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (matches, model) = match best {
        Some(b) => b,
        None => return Err(last_err.unwrap_or(Error::RegistrationFailure { inliers: 0 })),
    };
    Ok(MultiScaleMatches {
        matches,
        model,
        single_scale,
        octave_pairs,
        final_candidates,
    })
}
