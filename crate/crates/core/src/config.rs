//! Flat pipeline configuration with the published default settings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggloh::GglohGeometry;
use crate::harris::HarrisParams;
use crate::ingest::BandPolicy;
use crate::matching::{ConsensusConfig, MatchConfig};
use crate::pmom::ScaleBank;
use crate::scalespace::PyramidParams;

/// Every tunable of the pipeline, one key per field.
///
/// The text form is `key = value` lines (TOML), e.g.
///
/// ```text
/// max_points = 1500
/// rotation_invariant = false
/// band_policy = "band(2)"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub max_points: usize,
    pub n_sectors: usize,
    pub n_bins: usize,
    pub r2: f64,
    pub n_octaves: usize,
    pub n_layers: usize,
    pub pmom_scales: usize,
    pub rotation_invariant: bool,
    pub harris_sigma: f64,
    pub lnms_window: f64,
    pub sigma_base: f64,
    pub flip_weight: f64,
    pub ratio_test: f64,
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub min_inliers: usize,
    pub repeats: usize,
    pub band_policy: BandPolicy,
    pub denoise: bool,
    pub seed: u64,
    pub ncm_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_points: 2000,
            n_sectors: 12,
            n_bins: 12,
            r2: 48.0,
            n_octaves: 3,
            n_layers: 4,
            pmom_scales: 10,
            rotation_invariant: true,
            harris_sigma: 1.5,
            lnms_window: 11.0,
            sigma_base: 1.6,
            flip_weight: 1.0,
            ratio_test: 0.9,
            inlier_threshold: 3.0,
            max_iterations: 2000,
            confidence: 0.995,
            min_inliers: 6,
            repeats: 1,
            band_policy: BandPolicy::Sum,
            denoise: false,
            seed: 0,
            ncm_tolerance: 3.0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_points", self.max_points),
            ("n_bins", self.n_bins),
            ("n_octaves", self.n_octaves),
            ("n_layers", self.n_layers),
            ("pmom_scales", self.pmom_scales),
            ("max_iterations", self.max_iterations),
            ("repeats", self.repeats),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidParameter(format!("{name} must be at least 1")));
        }
        if self.n_sectors < 2 || self.n_sectors % 2 != 0 {
            return Err(Error::OddSectorCount(self.n_sectors));
        }
        let positive = [
            ("r2", self.r2),
            ("harris_sigma", self.harris_sigma),
            ("lnms_window", self.lnms_window),
            ("sigma_base", self.sigma_base),
            ("ratio_test", self.ratio_test),
            ("inlier_threshold", self.inlier_threshold),
            ("ncm_tolerance", self.ncm_tolerance),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
        if self.ratio_test > 1.0 {
            return Err(Error::InvalidParameter(format!("ratio_test must be at most 1, got {}", self.ratio_test)));
        }
        self.consensus().validate()?;
        self.geometry()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<GglohGeometry> {
        Ok(GglohGeometry::new(self.n_sectors, self.n_bins, self.r2)?.with_flip_weight(self.flip_weight))
    }

    /// Radii evenly spaced between the central-disc radius and `r2`.
    pub fn scale_bank(&self) -> Result<ScaleBank> {
        let g = self.geometry()?;
        ScaleBank::evenly_spaced(g.r0.max(1.0), g.r2, self.pmom_scales)
    }

    pub fn harris(&self) -> HarrisParams {
        HarrisParams {
            window_sigma: self.harris_sigma,
            max_points: self.max_points,
            base_window: self.lnms_window,
            border_margin: self.r2.ceil() as usize,
        }
    }

    pub fn pyramid(&self) -> PyramidParams {
        PyramidParams {
            n_octaves: self.n_octaves,
            n_layers: self.n_layers,
            sigma_base: self.sigma_base,
            min_size: (2.0 * self.r2).ceil() as usize,
        }
    }

    pub fn consensus(&self) -> ConsensusConfig {
        ConsensusConfig {
            inlier_threshold: self.inlier_threshold,
            max_iterations: self.max_iterations,
            confidence: self.confidence,
            rng_seed: Some(self.seed),
            min_inliers: self.min_inliers,
        }
    }

    pub fn matching(&self) -> MatchConfig {
        MatchConfig {
            ratio: self.ratio_test,
            consensus: self.consensus(),
            repeats: self.repeats,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_snapshot() {
        let c = PipelineConfig::default();
        assert_eq!(
            (c.max_points, c.n_sectors, c.n_bins, c.r2, c.n_octaves, c.n_layers, c.pmom_scales),
            (2000, 12, 12, 48.0, 3, 4, 10)
        );
        assert!(c.rotation_invariant);
        let g = c.geometry().unwrap();
        assert_eq!(g.descriptor_len(), 300);
        assert_eq!(g.patch_size(), 96.0);
        let bank = c.scale_bank().unwrap();
        assert_eq!(bank.scales().len(), 10);
        assert!((bank.scales()[0].radius - 9.6).abs() < 1e-12);
        assert!((bank.scales()[9].radius - 48.0).abs() < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let c = PipelineConfig::from_toml("max_points = 500\nband_policy = \"band(1)\"\n").unwrap();
        assert_eq!(c.max_points, 500);
        assert_eq!(c.band_policy, BandPolicy::Band(1));
        assert_eq!(c.n_sectors, 12);
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("n_sectors = 7").is_err());
        assert!(PipelineConfig::from_toml("max_points = 0").is_err());
        assert!(PipelineConfig::from_toml("confidence = 1.5").is_err());
        assert!(PipelineConfig::from_toml("ratio_test = 1.2").is_err());
        assert!(PipelineConfig::from_toml("no_such_key = 1").is_err());
    }
}
