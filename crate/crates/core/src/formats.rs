//! On-disk forms of keypoints, descriptors, matches, models and reports.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggloh::Descriptor;
use crate::harris::Keypoint;
use crate::ingest::{save_png, save_rawf};
use crate::matching::{MatchSet, MatchStage};
use crate::scalespace::{OrientationPyramid, Pyramid};
use crate::transform::AffineModel;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Encode(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::CorruptStream(e.to_string()))
}

pub fn save_keypoints(path: impl AsRef<Path>, kps: &[Keypoint]) -> Result<()> {
    write_json(path.as_ref(), &kps)
}

pub fn load_keypoints(path: impl AsRef<Path>) -> Result<Vec<Keypoint>> {
    read_json(path.as_ref())
}

/// Descriptor table: `u32 count`, `u32 dim`, then `count * dim` f32 values,
/// all little endian.
pub fn encode_descriptor_table(descs: &[Descriptor]) -> Result<Vec<u8>> {
    let dim = descs.first().map_or(0, |d| d.values.len());
    if descs.iter().any(|d| d.values.len() != dim) {
        return Err(Error::DimensionMismatch("descriptors of differing length".into()));
    }
    let mut out = Vec::with_capacity(8 + 4 * dim * descs.len());
    out.extend_from_slice(&(descs.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for d in descs {
        for &v in &d.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_descriptor_table(bytes: &[u8]) -> Result<Vec<Vec<f32>>> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::CorruptStream("truncated descriptor header".into()))
    };
    let (count, dim) = (word(0)? as usize, word(1)? as usize);
    if bytes.len() != 8 + 4 * count * dim {
        return Err(Error::CorruptStream(format!(
            "descriptor table of {count}x{dim} needs {} bytes, got {}",
            8 + 4 * count * dim,
            bytes.len()
        )));
    }
    Ok(bytes[8..]
        .chunks_exact(4 * dim.max(1))
        .take(count)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct MatchRecord {
    #[serde(rename = "ref")]
    reference: [f64; 2],
    sen: [f64; 2],
    dist: f64,
}

#[derive(Serialize, Deserialize)]
struct MatchFile {
    stage: MatchStage,
    pairs: Vec<MatchRecord>,
}

/// Match set as JSON with coordinates resolved, e.g.
/// `{"stage":"final","pairs":[{"ref":[x,y],"sen":[x,y],"dist":d}]}`.
pub fn matches_to_json(set: &MatchSet, kref: &[Keypoint], ksen: &[Keypoint]) -> Result<String> {
    let file = MatchFile {
        stage: set.stage,
        pairs: set
            .pairs
            .iter()
            .map(|p| MatchRecord {
                reference: [kref[p.ref_idx].x, kref[p.ref_idx].y],
                sen: [ksen[p.sen_idx].x, ksen[p.sen_idx].y],
                dist: p.distance,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Encode(e.to_string()))
}

pub fn save_matches(path: impl AsRef<Path>, set: &MatchSet, kref: &[Keypoint], ksen: &[Keypoint]) -> Result<()> {
    fs::write(path, matches_to_json(set, kref, ksen)?)?;
    Ok(())
}

/// Read a match file back as `(reference point, sensed point)` pairs.
pub fn load_match_points(path: impl AsRef<Path>) -> Result<(MatchStage, Vec<((f64, f64), (f64, f64))>)> {
    let file: MatchFile = read_json(path.as_ref())?;
    let pts = file
        .pairs
        .iter()
        .map(|r| ((r.reference[0], r.reference[1]), (r.sen[0], r.sen[1])))
        .collect();
    Ok((file.stage, pts))
}

pub fn save_model(path: impl AsRef<Path>, model: &AffineModel) -> Result<()> {
    fs::write(path, format!("{model}\n"))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<AffineModel> {
    fs::read_to_string(path)?.trim().parse()
}

pub fn save_report<T: Serialize>(path: impl AsRef<Path>, report: &T) -> Result<()> {
    write_json(path.as_ref(), report)
}

/// Write every pyramid layer as `{prefix}_o{o}_l{l}.png`.
pub fn dump_pyramid(dir: impl AsRef<Path>, prefix: &str, pyramid: &Pyramid) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (o, layers) in pyramid.octaves.iter().enumerate() {
        for (l, img) in layers.iter().enumerate() {
            save_png(dir.join(format!("{prefix}_o{o}_l{l}.png")), img)?;
        }
    }
    Ok(())
}

/// Write every orientation map as raw float `{prefix}_pmom_o{o}_l{l}.rawf`.
pub fn dump_orientation(dir: impl AsRef<Path>, prefix: &str, orient: &OrientationPyramid) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (o, layers) in orient.maps.iter().enumerate() {
        for (l, map) in layers.iter().enumerate() {
            save_rawf(dir.join(format!("{prefix}_pmom_o{o}_l{l}.rawf")), map.as_image())?;
        }
    }
    Ok(())
}
