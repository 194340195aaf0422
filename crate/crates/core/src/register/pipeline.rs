use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::ggloh::GglohGeometry;
use crate::harris::{detect, window_ratios, HarrisParams, Keypoint};
use crate::image::GrayImage;
use crate::matching::{match_multiscale, MatchConfig, MatchSet, MultiScaleMatches, OctavePairCount};
use crate::pmom::ScaleBank;
use crate::scalespace::{build_pyramid, OrientationPyramid, Pyramid, PyramidParams, ScaleDescriptorSet};
use crate::transform::AffineModel;

use super::metrics::{model_rmse, ncm};

/// Keypoints and their multi-scale descriptors for one image.
#[derive(Clone, Debug)]
pub struct ImageFeatures {
    pub size: (usize, usize),
    pub keypoints: Vec<Keypoint>,
    pub descriptors: ScaleDescriptorSet,
}

/// Match counts at each stage of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    pub keypoints_ref: usize,
    pub keypoints_sen: usize,
    pub descriptors_ref: usize,
    pub descriptors_sen: usize,
    /// Largest inlier set of any single layer pair.
    pub best_single_scale: usize,
    pub octave_pairs: Vec<OctavePairCount>,
    pub final_candidates: usize,
    pub final_inliers: usize,
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub detect_s: f64,
    pub describe_s: f64,
    pub match_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    /// Size of the final consensus set.
    pub inlier_count: usize,
    /// Correct matches against a known transform; only for synthetic pairs.
    pub ncm: Option<usize>,
    /// Model error at the matched sensed points against a known transform.
    pub rmse: Option<f64>,
    pub model: AffineModel,
    pub runtime_s: f64,
    pub counts: StageCounts,
    pub timings: StageTimings,
    /// True when the inputs were swapped so the larger image is the reference.
    pub swapped: bool,
}

/// Everything produced by one registration.
#[derive(Clone, Debug)]
pub struct Registration {
    pub model: AffineModel,
    pub matches: MatchSet,
    pub ref_keypoints: Vec<Keypoint>,
    pub sen_keypoints: Vec<Keypoint>,
    pub multiscale: MultiScaleMatches,
    pub report: RegistrationReport,
}

impl Registration {
    /// Fill in NCM and RMSE against a known sensed-to-reference transform.
    pub fn evaluate(&mut self, truth: &AffineModel, tol: f64) -> usize {
        let n = ncm(&self.matches, &self.ref_keypoints, &self.sen_keypoints, truth, tol);
        self.report.ncm = Some(n);
        self.report.rmse = Some(model_rmse(&self.matches, &self.sen_keypoints, &self.model, truth));
        n
    }

    /// Correct matches of the best single layer pair against `truth`.
    pub fn best_single_scale_ncm(&self, truth: &AffineModel, tol: f64) -> usize {
        self.multiscale
            .single_scale
            .values()
            .map(|s| ncm(s, &self.ref_keypoints, &self.sen_keypoints, truth, tol))
            .max()
            .unwrap_or(0)
    }
}

/// The larger-area image becomes the reference; returns true when the
/// given order should be swapped.
pub fn should_swap(first: (usize, usize), second: (usize, usize)) -> bool {
    second.0 * second.1 > first.0 * first.1
}

/// Configured feature extraction, matching and estimation.
#[derive(Clone, Debug)]
pub struct Pipeline {
    cfg: PipelineConfig,
    geometry: GglohGeometry,
    bank: ScaleBank,
    harris: HarrisParams,
    pyramid: PyramidParams,
    matching: MatchConfig,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            geometry: cfg.geometry()?,
            bank: cfg.scale_bank()?,
            harris: cfg.harris(),
            pyramid: cfg.pyramid(),
            matching: cfg.matching(),
            cfg,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &GglohGeometry {
        &self.geometry
    }

    pub fn pyramid(&self, img: &GrayImage) -> Pyramid {
        build_pyramid(img, &self.pyramid)
    }

    pub fn orientation_pyramid(&self, img: &GrayImage) -> Result<OrientationPyramid> {
        OrientationPyramid::from_image(img, &self.pyramid, &self.bank)
    }

    pub fn detect(&self, img: &GrayImage, ratio: f64) -> Vec<Keypoint> {
        detect(img, &self.harris, ratio)
    }

    /// Describe `keypoints` on a precomputed orientation pyramid.
    pub fn describe(&self, orient: &OrientationPyramid, keypoints: &[Keypoint]) -> ScaleDescriptorSet {
        orient.describe(keypoints, &self.geometry, self.cfg.rotation_invariant)
    }

    pub fn features(&self, img: &GrayImage, ratio: f64) -> Result<ImageFeatures> {
        let orient = self.orientation_pyramid(img)?;
        Ok(self.features_with(img, &orient, ratio))
    }

    pub fn features_with(&self, img: &GrayImage, orient: &OrientationPyramid, ratio: f64) -> ImageFeatures {
        let keypoints = self.detect(img, ratio);
        let descriptors = self.describe(orient, &keypoints);
        ImageFeatures { size: img.dims(), keypoints, descriptors }
    }

    pub fn match_features(&self, fref: &ImageFeatures, fsen: &ImageFeatures) -> Result<MultiScaleMatches> {
        match_multiscale(
            &fref.descriptors,
            &fsen.descriptors,
            &fref.keypoints,
            &fsen.keypoints,
            &self.matching,
        )
    }

    /// Register `sen` onto `reference` in the given order.
    pub fn register(&self, reference: &GrayImage, sen: &GrayImage) -> Result<Registration> {
        self.register_cached(reference, None, sen)
    }

    /// Same as [`Pipeline::register`], reusing the reference orientation
    /// pyramid when one is supplied.
    pub fn register_cached(
        &self,
        reference: &GrayImage,
        ref_orient: Option<&OrientationPyramid>,
        sen: &GrayImage,
    ) -> Result<Registration> {
        let start = Instant::now();
        let (ratio_ref, ratio_sen) = window_ratios(reference.dims(), sen.dims());

        let t = Instant::now();
        let kref = self.detect(reference, ratio_ref);
        let ksen = self.detect(sen, ratio_sen);
        let detect_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let owned;
        let ref_orient = match ref_orient {
            Some(o) => o,
            None => {
                owned = self.orientation_pyramid(reference)?;
                &owned
            }
        };
        let sen_orient = self.orientation_pyramid(sen)?;
        let fref = ImageFeatures {
            size: reference.dims(),
            descriptors: self.describe(ref_orient, &kref),
            keypoints: kref,
        };
        let fsen = ImageFeatures {
            size: sen.dims(),
            descriptors: self.describe(&sen_orient, &ksen),
            keypoints: ksen,
        };
        let describe_s = t.elapsed().as_secs_f64();
        log::debug!(
            "{} / {} keypoints, {} / {} descriptors",
            fref.keypoints.len(),
            fsen.keypoints.len(),
            fref.descriptors.total(),
            fsen.descriptors.total()
        );

        let t = Instant::now();
        let ms = self.match_features(&fref, &fsen)?;
        let match_s = t.elapsed().as_secs_f64();

        let counts = StageCounts {
            keypoints_ref: fref.keypoints.len(),
            keypoints_sen: fsen.keypoints.len(),
            descriptors_ref: fref.descriptors.total(),
            descriptors_sen: fsen.descriptors.total(),
            best_single_scale: ms.best_single_scale(),
            octave_pairs: ms.octave_pairs.clone(),
            final_candidates: ms.final_candidates,
            final_inliers: ms.matches.len(),
        };
        let report = RegistrationReport {
            inlier_count: ms.matches.len(),
            ncm: None,
            rmse: None,
            model: ms.model,
            runtime_s: start.elapsed().as_secs_f64(),
            counts,
            timings: StageTimings { detect_s, describe_s, match_s },
            swapped: false,
        };
        Ok(Registration {
            model: ms.model,
            matches: ms.matches.clone(),
            ref_keypoints: fref.keypoints,
            sen_keypoints: fsen.keypoints,
            multiscale: ms,
            report,
        })
    }
}
