use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use histosr_core::fullref::{evaluate_pair, load_mask, InstanceMask};
use histosr_core::iqa_dataset::{list_pngs, BlurType};
use histosr_core::noref::{predict_score, ScorerModel};
use histosr_core::raster::load_image;
use histosr_core::report::{
    merge_external_metrics, render_report, Direction, EvalReport, ImageScores, MetricRegistry,
    MetricSource, MetricSpec, ReportFormat, Score, BLUR_SCORE_BOX, BLUR_SCORE_GAUSSIAN,
    L1_INTENSITY, L1_TEXTURE, MSE, PSNR, SSIM,
};

use super::{existing_dir, existing_file, stem, write_file, Context};
use crate::cli::{EvalArgs, ReportArgs};
use crate::config::{require, resolve};
use crate::error::{io_err, CliError, CliResult};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const REPORT_CSV: &str = "report.csv";

/// Parse `name:up|down[:decimals]` into an external metric.
pub fn parse_extra_metric(spec: &str) -> CliResult<MetricSpec> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::validation(format!("`extra_metrics`: expected name:up|down[:decimals], got {spec:?}"));
    let (name, dir) = match parts.as_slice() {
        [n, d] | [n, d, _] => (*n, *d),
        _ => return Err(bad()),
    };
    let direction = match dir {
        "up" | "higher" | "higher_better" => Direction::HigherBetter,
        "down" | "lower" | "lower_better" => Direction::LowerBetter,
        _ => return Err(bad()),
    };
    let decimals = match parts.get(2) {
        Some(d) => d.parse().map_err(|_| bad())?,
        None => 4,
    };
    Ok(MetricSpec::new(name, direction, MetricSource::External, decimals))
}

fn registry_with(extra: &[String]) -> CliResult<MetricRegistry> {
    let mut reg = MetricRegistry::default();
    for spec in extra {
        reg.register(parse_extra_metric(spec)?)?;
    }
    Ok(reg)
}

fn parse_method(spec: &str) -> CliResult<(String, PathBuf)> {
    let (name, dir) = match spec.split_once('=') {
        Some((n, d)) => (n.to_string(), PathBuf::from(d)),
        None => {
            let dir = PathBuf::from(spec);
            let name = dir
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (name, dir)
        }
    };
    if name.is_empty() || name.contains('|') {
        return Err(CliError::validation(format!("`sr_dirs`: invalid method name in {spec:?}")));
    }
    let dir = existing_dir(Some(dir), "sr_dirs")?;
    Ok((name, dir))
}

fn stems(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    Ok(list_pngs(dir)?.into_iter().map(|p| (stem(&p), p)).collect())
}

fn blur_metric(b: BlurType) -> &'static str {
    match b {
        BlurType::Box => BLUR_SCORE_BOX,
        BlurType::Gaussian => BLUR_SCORE_GAUSSIAN,
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn eval(args: &EvalArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "eval")?;
    let hr_dir = existing_dir(a.hr_dir, "hr_dir")?;
    let out_dir = require(a.out_dir, "out_dir")?;
    if a.sr_dirs.is_empty() {
        return Err(CliError::validation(
            "missing required field `sr_dirs` (flag --sr-dir or config key \"sr_dirs\")",
        ));
    }
    let methods = a.sr_dirs.iter().map(|s| parse_method(s)).collect::<CliResult<Vec<_>>>()?;
    let mut names = BTreeSet::new();
    for (n, _) in &methods {
        if !names.insert(n.as_str()) {
            return Err(CliError::validation(format!("`sr_dirs`: duplicate method name {n}")));
        }
    }
    let registry = registry_with(&a.extra_metrics)?;
    let mut models: Vec<(&'static str, ScorerModel)> = vec![];
    for path in &a.models {
        let m = ScorerModel::load(existing_file(Some(path.clone()), "models")?)?;
        let metric = blur_metric(m.blur_type);
        if models.iter().any(|(n, _)| *n == metric) {
            return Err(CliError::validation(format!("`models`: two {} models given", m.blur_type)));
        }
        models.push((metric, m));
    }

    let hr = stems(&hr_dir)?;
    let method_files = methods
        .iter()
        .map(|(_, d)| stems(d))
        .collect::<CliResult<Vec<_>>>()?;
    let mut warnings = vec![];
    let mut images: BTreeSet<String> = hr.keys().cloned().collect();
    for ((name, _), files) in methods.iter().zip(&method_files) {
        for s in files.keys().filter(|s| !hr.contains_key(*s)) {
            warnings.push(format!("{name}: {s} has no HR reference"));
        }
        for s in hr.keys().filter(|s| !files.contains_key(*s)) {
            warnings.push(format!("{name}: missing output for {s}"));
        }
        images.retain(|s| files.contains_key(s));
    }
    if images.is_empty() {
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        return Err(CliError::validation(format!(
            "no image stems are shared by hr_dir {} and every sr dir",
            hr_dir.display()
        )));
    }
    let images: Vec<String> = images.into_iter().collect();
    let masks: Vec<Option<PathBuf>> = match &a.mask_dir {
        None => vec![None; images.len()],
        Some(dir) => {
            let dir = existing_dir(Some(dir.clone()), "mask_dir")?;
            images
                .iter()
                .map(|s| {
                    let p = dir.join(format!("{s}.png"));
                    if p.is_file() {
                        Some(p)
                    } else {
                        warnings.push(format!("no mask for {s}; nuclear metrics skipped"));
                        None
                    }
                })
                .collect()
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let per_image: Vec<Vec<ImageScores>> = images
        .par_iter()
        .zip(&masks)
        .map(|(s, mask_path)| -> CliResult<Vec<ImageScores>> {
            let hr_img = load_image(&hr[s])?;
            let mask: Option<InstanceMask> = mask_path.as_ref().map(load_mask).transpose()?;
            if let Some(m) = &mask {
                if !m.matches(hr_img.width(), hr_img.height()) {
                    return Err(CliError::validation(format!(
                        "mask for {s} is {}x{}, image is {}x{}",
                        m.width(),
                        m.height(),
                        hr_img.width(),
                        hr_img.height()
                    )));
                }
            }
            method_files
                .iter()
                .map(|files| {
                    let sr = load_image(&files[s])?;
                    let r = evaluate_pair(&hr_img, &sr, mask.as_ref()).map_err(|e| {
                        CliError::validation(format!("{s}: {e}"))
                    })?;
                    let mut values = BTreeMap::new();
                    values.insert(PSNR.to_string(), Score(r.psnr));
                    values.insert(SSIM.to_string(), Score(r.ssim));
                    values.insert(MSE.to_string(), Score(r.mse));
                    if let Some(n) = r.nuclear {
                        if let (Some(t), Some(i)) = (n.l1_texture, n.l1_intensity) {
                            values.insert(L1_TEXTURE.to_string(), Score(t));
                            values.insert(L1_INTENSITY.to_string(), Score(i));
                        }
                    }
                    for (metric, model) in &models {
                        values.insert(metric.to_string(), Score(predict_score(model, &sr)?));
                    }
                    Ok(ImageScores {
                        image: s.clone(),
                        values,
                    })
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;

    let method_rows = methods
        .iter()
        .enumerate()
        .map(|(m, (name, _))| (name.clone(), per_image.iter().map(|row| row[m].clone()).collect()))
        .collect();
    let dataset = a.dataset.unwrap_or_else(|| stem(&hr_dir));
    let mut report = EvalReport::build(&dataset, images, method_rows, &registry)?;
    if let Some(path) = &a.external_csv {
        let path = existing_file(Some(path.clone()), "external_csv")?;
        report = merge_external_metrics(&report, &read_text(&path)?, &registry)?;
    }
    let markdown = render_report(&report, ReportFormat::Markdown);
    write_file(&out_dir.join(REPORT_JSON), render_report(&report, ReportFormat::Json))?;
    write_file(&out_dir.join(REPORT_MD), &markdown)?;
    write_file(&out_dir.join(REPORT_CSV), render_report(&report, ReportFormat::Csv))?;
    Ok(markdown)
}

pub fn report(args: &ReportArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "report")?;
    if a.inputs.is_empty() {
        return Err(CliError::validation(
            "missing required field `inputs` (flag --input or config key \"inputs\")",
        ));
    }
    let format: ReportFormat = a.format.as_deref().unwrap_or("markdown").parse()?;
    let mut reports = a
        .inputs
        .iter()
        .map(|p| {
            let p = existing_file(Some(p.clone()), "inputs")?;
            Ok(EvalReport::from_json(&read_text(&p)?)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    if let Some(path) = &a.external_csv {
        if reports.len() != 1 {
            return Err(CliError::validation("`external_csv` needs exactly one input report"));
        }
        let path = existing_file(Some(path.clone()), "external_csv")?;
        let registry = registry_with(&a.extra_metrics)?;
        reports[0] = merge_external_metrics(&reports[0], &read_text(&path)?, &registry)?;
    }
    let text = match (format, reports.len()) {
        (ReportFormat::Json, n) if n > 1 => {
            serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"
        }
        (ReportFormat::Csv, _) => {
            let mut out = String::new();
            for (i, r) in reports.iter().enumerate() {
                let csv = render_report(r, format);
                // one header for all datasets
                out.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |x| x.1) });
            }
            out
        }
        _ => reports
            .iter()
            .map(|r| render_report(r, format))
            .collect::<Vec<_>>()
            .join("\n"),
    };
    match a.out {
        Some(path) => {
            write_file(&path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}
