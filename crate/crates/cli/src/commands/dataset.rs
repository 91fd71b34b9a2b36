use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use histosr_core::iqa_dataset::{curate as curate_ladder, list_pngs, split_manifest, BlurType, Manifest};
use histosr_core::noref::{evaluate_scorer, fit_scorer, predict_score, ScorerModel};
use histosr_core::raster::load_image;

use super::{existing_dir, existing_file, write_file, Context};
use crate::cli::{CurateArgs, ScoreNorefArgs, TrainNorefArgs};
use crate::config::{require, resolve};
use crate::error::{CliError, CliResult};

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_TRAIN_FRAC: f64 = 0.8;

fn blur_types(spec: Option<&str>) -> CliResult<Vec<BlurType>> {
    match spec.unwrap_or("both") {
        "both" | "all" => Ok(BlurType::ALL.to_vec()),
        other => other
            .parse::<BlurType>()
            .map(|b| vec![b])
            .map_err(|e| CliError::validation(format!("`blur`: {e}"))),
    }
}

pub fn curate(args: &CurateArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "curate")?;
    let hr_dir = existing_dir(a.hr_dir, "hr_dir")?;
    let out_dir = require(a.out_dir, "out_dir")?;
    let blurs = blur_types(a.blur.as_deref())?;
    if list_pngs(&hr_dir)?.is_empty() {
        return Err(CliError::validation(format!(
            "`hr_dir`: no PNG files in {}",
            hr_dir.display()
        )));
    }
    let mut out = String::new();
    for blur in blurs {
        let m = curate_ladder(&hr_dir, blur, out_dir.join(blur.as_str()))?;
        let _ = writeln!(
            out,
            "{blur}: {} sources x {} levels -> {}",
            m.sources().len(),
            m.level_count,
            out_dir.join(blur.as_str()).join(format!("manifest_{blur}.csv")).display()
        );
    }
    Ok(out)
}

pub fn train_noref(args: &TrainNorefArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "train-noref")?;
    let manifest_path = existing_file(a.manifest, "manifest")?;
    let out = require(a.out, "out")?;
    let lambda = a.lambda.unwrap_or(DEFAULT_LAMBDA);
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CliError::validation(format!("`lambda` must be finite and >= 0, got {lambda}")));
    }
    let frac = a.train_frac.unwrap_or(DEFAULT_TRAIN_FRAC);
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(CliError::validation(format!("`train_frac` must be in (0, 1], got {frac}")));
    }
    let manifest = Manifest::read_csv(&manifest_path)?;
    let (train, test) = if frac < 1.0 {
        let (tr, te) = split_manifest(&manifest, frac, ctx.seed)?;
        (tr, Some(te))
    } else {
        (manifest, None)
    };
    let model = fit_scorer(&train, lambda)?;
    model.save(&out)?;
    let mut text = format!(
        "trained {} scorer on {} images ({} dropped feature(s)) -> {}\n",
        model.blur_type,
        model.training_samples,
        model.dropped_features.len(),
        out.display()
    );
    if let Some(test) = test {
        let e = evaluate_scorer(&model, &test)?;
        let _ = writeln!(
            text,
            "held-out: samples {} mae {:.4} spearman {:.4}{} pairwise {:.4} ({} pairs)",
            e.samples,
            e.mae,
            e.spearman,
            if e.spearman_degenerate { " (degenerate)" } else { "" },
            e.pairwise_accuracy,
            e.pairs
        );
    }
    Ok(text)
}

pub fn score_noref(args: &ScoreNorefArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "score-noref")?;
    let model = ScorerModel::load(existing_file(a.model, "model")?)?;
    let input = require(a.input, "input")?;
    let images: Vec<PathBuf> = if input.is_dir() {
        list_pngs(&input)?
    } else if input.is_file() {
        vec![input.clone()]
    } else {
        return Err(CliError::validation(format!("`input`: {} does not exist", input.display())));
    };
    if images.is_empty() {
        return Err(CliError::validation(format!("`input`: no PNG files in {}", input.display())));
    }
    let scores = images
        .par_iter()
        .map(|p| Ok(predict_score(&model, &load_image(p)?)?))
        .collect::<CliResult<Vec<f64>>>()?;
    let mut csv = String::from("image,score\n");
    for (p, s) in images.iter().zip(scores) {
        let name = p.file_name().unwrap_or_default().to_string_lossy();
        let _ = writeln!(csv, "{name},{s:.4}");
    }
    match a.out {
        Some(path) => {
            write_file(&path, &csv)?;
            Ok(format!("scored {} image(s) -> {}\n", images.len(), path.display()))
        }
        None => Ok(csv),
    }
}
