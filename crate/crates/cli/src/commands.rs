use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use msreg_core::formats::{dump_orientation, dump_pyramid, load_model, save_matches, save_model, save_report};
use msreg_core::ingest::{load_gray, save_png};
use msreg_core::register::sweep::{self, param_range};
use msreg_core::register::{render as compose, should_swap, warp};
use msreg_core::{BandPolicy, GrayImage, Pipeline, PipelineConfig, Registration, RenderMode};

use crate::args::{MatchArgs, RegisterArgs, RenderArgs, SweepArgs, SweepKind};

fn load(path: &Path, cfg: &PipelineConfig) -> Result<GrayImage> {
    load_gray(path, cfg.band_policy, cfg.denoise).with_context(|| format!("loading {}", path.display()))
}

/// Load both images and order them so the reference comes first.
fn load_pair(a: &Path, b: &Path, cfg: &PipelineConfig, keep_order: bool) -> Result<(GrayImage, GrayImage, bool)> {
    let first = load(a, cfg)?;
    let second = load(b, cfg)?;
    if !keep_order && should_swap(first.dims(), second.dims()) {
        log::info!("using {} as reference (larger image)", b.display());
        Ok((second, first, true))
    } else {
        Ok((first, second, false))
    }
}

fn run(pipeline: &Pipeline, reference: &GrayImage, sensed: &GrayImage, swapped: bool) -> Result<Registration> {
    let mut reg = pipeline.register(reference, sensed)?;
    reg.report.swapped = swapped;
    log::info!(
        "{} inliers in {:.2} s, model {}",
        reg.report.inlier_count,
        reg.report.runtime_s,
        reg.model
    );
    Ok(reg)
}

pub fn register(args: RegisterArgs) -> Result<()> {
    let cfg = args.pipeline.resolve()?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let (reference, sensed, swapped) = load_pair(&args.reference, &args.sensed, &cfg, args.keep_order)?;

    if let Some(dir) = &args.dump_pyramid {
        for (name, img) in [("reference", &reference), ("sensed", &sensed)] {
            dump_pyramid(dir, name, &pipeline.pyramid(img))?;
            dump_orientation(dir, name, &pipeline.orientation_pyramid(img)?)?;
        }
    }

    let reg = run(&pipeline, &reference, &sensed, swapped)?;
    let out = &args.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save_model(out.join("model.txt"), &reg.model)?;
    save_matches(out.join("matches.json"), &reg.matches, &reg.ref_keypoints, &reg.sen_keypoints)?;
    let warped = warp(&sensed, &reg.model, reference.dims())?;
    save_png(out.join("warped.png"), &warped)?;
    for (mode, name) in [(RenderMode::Fusion, "fusion.png"), (RenderMode::Checkerboard, "checkerboard.png")] {
        compose(&reference, &warped, mode, args.block)?
            .save(out.join(name))
            .with_context(|| format!("writing {name}"))?;
    }
    save_report(out.join("report.json"), &reg.report)?;
    println!("{}", reg.model);
    Ok(())
}

pub fn match_pair(args: MatchArgs) -> Result<()> {
    let cfg = args.pipeline.resolve()?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let (reference, sensed, swapped) = load_pair(&args.reference, &args.sensed, &cfg, args.keep_order)?;
    let reg = run(&pipeline, &reference, &sensed, swapped)?;
    save_matches(&args.output, &reg.matches, &reg.ref_keypoints, &reg.sen_keypoints)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("{} matches", reg.matches.len());
    Ok(())
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.pipeline.resolve()?;
    let pipeline = Pipeline::new(cfg.clone())?;
    let img = load(&args.image, &cfg)?;
    let rows = match args.kind {
        SweepKind::Rotation => {
            let angles = param_range(
                args.start.unwrap_or(0.0),
                args.end.unwrap_or(359.0),
                args.step.unwrap_or(1.0),
            )?;
            sweep::sweep_rotation(&pipeline, &img, &angles)?
        }
        SweepKind::Scale => {
            let ratios = param_range(
                args.start.unwrap_or(1.0),
                args.end.unwrap_or(2.0),
                args.step.unwrap_or(0.1),
            )?;
            sweep::sweep_scale(&pipeline, &img, &ratios)?
        }
        SweepKind::Intensity => sweep::sweep_intensity(&pipeline, &img)?,
    };
    sweep::write_csv(&args.output, &rows).with_context(|| format!("writing {}", args.output.display()))?;
    let ok = rows.iter().filter(|r| r.success).count();
    println!("{ok}/{} cases registered", rows.len());
    Ok(())
}

pub fn render(args: RenderArgs) -> Result<()> {
    let band = args.band.unwrap_or(BandPolicy::Sum);
    let reference = load_gray(&args.reference, band, false)?;
    let sensed = load_gray(&args.sensed, band, false)?;
    let model = load_model(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let warped = warp(&sensed, &model, reference.dims())?;
    compose(&reference, &warped, args.mode, args.block)?
        .save(&args.output)
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}
