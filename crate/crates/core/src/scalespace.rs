//! Gaussian pyramid and per-layer descriptor extraction.
//!
//! Keypoints are detected once at full resolution. Every layer gets its own
//! orientation map; keypoints are projected into each octave and described
//! there.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filter::{downsample_mean, gaussian_blur};
use crate::ggloh::{Descriptor, GglohGeometry, PatchSampler};
use crate::harris::Keypoint;
use crate::image::GrayImage;
use crate::pmom::{pmom, OrientationMap, ScaleBank};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PyramidParams {
    pub n_octaves: usize,
    pub n_layers: usize,
    /// Nominal blur of layer 0 of every octave.
    pub sigma_base: f64,
    /// Octaves with a side shorter than this are dropped.
    pub min_size: usize,
}

impl Default for PyramidParams {
    fn default() -> Self {
        Self {
            n_octaves: 3,
            n_layers: 4,
            sigma_base: 1.6,
            min_size: 96,
        }
    }
}

/// Nominal blur of each layer: `sigma_base * k^l` with
/// `k = 2^(1 / (n_layers - 1))`, so the last layer doubles the first.
pub fn layer_sigmas(n_layers: usize, sigma_base: f64) -> Vec<f64> {
    if n_layers <= 1 {
        return vec![sigma_base; n_layers];
    }
    let k = 2f64.powf(1.0 / (n_layers - 1) as f64);
    (0..n_layers).map(|l| sigma_base * k.powi(l as i32)).collect()
}

#[derive(Clone, Debug)]
pub struct Pyramid {
    /// `octaves[o][l]`.
    pub octaves: Vec<Vec<GrayImage>>,
    pub sigmas: Vec<f64>,
    /// Requested octaves that were too small to hold a descriptor patch.
    pub dropped_octaves: usize,
}

impl Pyramid {
    pub fn layer(&self, octave: usize, layer: usize) -> &GrayImage {
        &self.octaves[octave][layer]
    }

    pub fn n_octaves(&self) -> usize {
        self.octaves.len()
    }

    pub fn n_layers(&self) -> usize {
        self.sigmas.len()
    }

    pub fn layer_count(&self) -> usize {
        self.octaves.iter().map(Vec::len).sum()
    }
}

/// Build the pyramid. Octave bases are successive 2x2-mean reductions of
/// the input; layer 0 is the base itself and layer `l > 0` is the base
/// blurred by the increment `sqrt(sigma_l^2 - sigma_0^2)`.
pub fn build_pyramid(img: &GrayImage, params: &PyramidParams) -> Pyramid {
    let sigmas = layer_sigmas(params.n_layers.max(1), params.sigma_base);
    let mut octaves = Vec::new();
    let mut base = img.clone();
    for o in 0..params.n_octaves.max(1) {
        if o > 0 {
            base = downsample_mean(&base);
        }
        if base.width().min(base.height()) < params.min_size {
            break;
        }
        let layers: Vec<GrayImage> = sigmas
            .par_iter()
            .enumerate()
            .map(|(l, &s)| {
                if l == 0 {
                    base.clone()
                } else {
                    gaussian_blur(&base, (s * s - sigmas[0] * sigmas[0]).sqrt())
                }
            })
            .collect();
        octaves.push(layers);
    }
    let dropped = params.n_octaves.max(1) - octaves.len();
    if dropped > 0 {
        log::info!(
            "{dropped} octave(s) dropped: {}x{} image is too small for {} px patches",
            img.width(),
            img.height(),
            params.min_size
        );
    }
    Pyramid {
        octaves,
        sigmas,
        dropped_octaves: dropped,
    }
}

/// Project a full-resolution pixel coordinate into an octave, treating pixel
/// centers consistently with 2x2 averaging, and round to the anchor pixel.
pub fn project_to_octave(v: f64, octave: usize) -> i64 {
    let f = (1u64 << octave) as f64;
    ((v + 0.5) / f - 0.5).round() as i64
}

/// Orientation map of every pyramid layer.
#[derive(Clone, Debug)]
pub struct OrientationPyramid {
    /// `maps[o][l]`.
    pub maps: Vec<Vec<OrientationMap>>,
}

impl OrientationPyramid {
    pub fn build(pyramid: &Pyramid, bank: &ScaleBank) -> Result<Self> {
        let jobs: Vec<(usize, usize)> = pyramid
            .octaves
            .iter()
            .enumerate()
            .flat_map(|(o, ls)| (0..ls.len()).map(move |l| (o, l)))
            .collect();
        let flat = jobs
            .par_iter()
            .map(|&(o, l)| pmom(pyramid.layer(o, l), bank))
            .collect::<Result<Vec<_>>>()?;
        let mut it = flat.into_iter();
        let maps = pyramid
            .octaves
            .iter()
            .map(|ls| it.by_ref().take(ls.len()).collect())
            .collect();
        Ok(Self { maps })
    }

    pub fn from_image(img: &GrayImage, params: &PyramidParams, bank: &ScaleBank) -> Result<Self> {
        Self::build(&build_pyramid(img, params), bank)
    }

    /// Describe every keypoint at every layer where its projected support
    /// disc fits inside the layer.
    pub fn describe(
        &self,
        keypoints: &[Keypoint],
        geom: &GglohGeometry,
        rotation_invariant: bool,
    ) -> ScaleDescriptorSet {
        let sampler = PatchSampler::new(geom.clone());
        let jobs: Vec<(usize, usize)> = self
            .maps
            .iter()
            .enumerate()
            .flat_map(|(o, ls)| (0..ls.len()).map(move |l| (o, l)))
            .collect();
        let layers = jobs
            .par_iter()
            .map(|&(o, l)| {
                let pm = &self.maps[o][l];
                let descs = keypoints
                    .iter()
                    .enumerate()
                    .filter_map(|(id, kp)| {
                        let x = project_to_octave(kp.x, o);
                        let y = project_to_octave(kp.y, o);
                        sampler.check_anchor(x, y, pm.width(), pm.height()).ok()?;
                        let theta0 = if rotation_invariant {
                            pm.get(x as usize, y as usize)
                        } else {
                            0.0
                        };
                        let mut d = sampler.describe_with_reference(pm, x, y, theta0).ok()?;
                        d.octave = o;
                        d.layer = l;
                        d.keypoint_id = id;
                        Some(d)
                    })
                    .collect::<Vec<_>>();
                ((o, l), descs)
            })
            .collect::<Vec<_>>();
        ScaleDescriptorSet {
            layers: layers.into_iter().collect(),
        }
    }
}

/// Descriptors keyed by `(octave, layer)`, each list in keypoint order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScaleDescriptorSet {
    pub layers: BTreeMap<(usize, usize), Vec<Descriptor>>,
}

impl ScaleDescriptorSet {
    pub fn total(&self) -> usize {
        self.layers.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn octaves(&self) -> Vec<usize> {
        let mut o: Vec<usize> = self.layers.keys().map(|k| k.0).collect();
        o.dedup();
        o
    }

    pub fn get(&self, octave: usize, layer: usize) -> Option<&[Descriptor]> {
        self.layers.get(&(octave, layer)).map(Vec::as_slice)
    }

    /// Keep only one layer, e.g. to compare against single-scale matching.
    pub fn only(&self, octave: usize, layer: usize) -> Self {
        let layers = self
            .layers
            .iter()
            .filter(|(k, _)| **k == (octave, layer))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        Self { layers }
    }
}

/// Build the pyramid, compute per-layer orientation maps and describe all
/// keypoints.
pub fn extract_all(
    img: &GrayImage,
    keypoints: &[Keypoint],
    geom: &GglohGeometry,
    bank: &ScaleBank,
    params: &PyramidParams,
    rotation_invariant: bool,
) -> Result<ScaleDescriptorSet> {
    Ok(OrientationPyramid::from_image(img, params, bank)?.describe(keypoints, geom, rotation_invariant))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut s = seed;
        GrayImage::from_fn(w, h, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    fn small_params(n_octaves: usize, n_layers: usize) -> PyramidParams {
        PyramidParams {
            n_octaves,
            n_layers,
            sigma_base: 1.6,
            min_size: 8,
        }
    }

    #[test]
    fn layer_sigma_schedule() {
        let s = layer_sigmas(4, 1.6);
        assert_eq!(s[0], 1.6);
        assert!((s[3] - 3.2).abs() < 1e-12);
        assert!((s[1] - 1.6 * 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(layer_sigmas(1, 1.6), vec![1.6]);
    }

    #[test]
    fn pyramid_shape() {
        let img = noise(100, 100, 1);
        let p = build_pyramid(&img, &small_params(3, 4));
        assert_eq!(p.layer_count(), 12);
        let dims: Vec<_> = p.octaves.iter().map(|o| o[0].dims()).collect();
        assert_eq!(dims, vec![(100, 100), (50, 50), (25, 25)]);
        assert_eq!(p.layer(0, 0), &img);
        assert_eq!(p.dropped_octaves, 0);

        let odd = build_pyramid(&noise(101, 37, 2), &small_params(3, 2));
        let dims: Vec<_> = odd.octaves.iter().map(|o| o[1].dims()).collect();
        assert_eq!(dims, vec![(101, 37), (51, 19), (26, 10)]);
    }

    #[test]
    fn small_octaves_are_dropped() {
        let p = build_pyramid(&noise(200, 200, 3), &PyramidParams::default());
        assert_eq!(p.n_octaves(), 2);
        assert_eq!(p.dropped_octaves, 1);
    }

    #[test]
    fn half_resolution_pyramid_lines_up() {
        let img = noise(64, 48, 4);
        let full = build_pyramid(&img, &small_params(3, 3));
        let half = build_pyramid(&downsample_mean(&img), &small_params(2, 3));
        for o in 1..3 {
            for l in 0..3 {
                assert_eq!(full.layer(o, l).dims(), half.layer(o - 1, l).dims());
            }
        }
        assert_eq!(full.layer(1, 0), half.layer(0, 0));
    }

    #[test]
    fn projection_examples() {
        assert_eq!((project_to_octave(100.0, 1), project_to_octave(60.0, 1)), (50, 30));
        assert_eq!(project_to_octave(100.0, 0), 100);
        // quarter-turn symmetry inside a 512 image
        for v in 0..512 {
            let a = project_to_octave(v as f64, 1);
            let b = project_to_octave((511 - v) as f64, 1);
            assert_eq!(a + b, 255);
            let a = project_to_octave(v as f64, 2);
            let b = project_to_octave((511 - v) as f64, 2);
            assert_eq!(a + b, 127);
        }
    }

    #[test]
    fn extraction_skips_margin_violations_and_is_deterministic() {
        let img = noise(240, 240, 5);
        let geom = GglohGeometry::new(4, 6, 24.0).unwrap();
        let bank = ScaleBank::evenly_spaced(geom.r0, geom.r2, 3).unwrap();
        let params = PyramidParams {
            min_size: 48,
            ..small_params(2, 2)
        };
        let kps = vec![
            Keypoint { x: 120.0, y: 120.0, score: 1.0 },
            Keypoint { x: 40.0, y: 120.0, score: 1.0 },
            Keypoint { x: 100.0, y: 60.0, score: 1.0 },
        ];
        let set = extract_all(&img, &kps, &geom, &bank, &params, true).unwrap();
        let ids = |o, l| set.get(o, l).unwrap().iter().map(|d| d.keypoint_id).collect::<Vec<_>>();
        assert_eq!(ids(0, 0), vec![0, 1, 2]);
        // (40 + 0.5) / 2 - 0.5 rounds to 20 < 24
        assert_eq!(ids(1, 1), vec![0, 2]);
        assert!(set.total() <= 2 * 2 * kps.len());
        for ((o, l), ds) in &set.layers {
            for d in ds {
                assert_eq!((d.octave, d.layer), (*o, *l));
                assert_eq!(d.values.len(), geom.descriptor_len());
            }
        }
        let again = extract_all(&img, &kps, &geom, &bank, &params, true).unwrap();
        assert_eq!(set, again);
    }
}
