use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use histosr_core::degrade::{apply_recipe, DegradationRecipe, StageTrace};
use histosr_core::iqa_dataset::list_pngs;
use histosr_core::raster::{load_image, save_image};

use super::{create_dir, existing_dir, stem, write_file, Context};
use crate::cli::DegradeArgs;
use crate::config::{require, resolve};
use crate::derive_seed;
use crate::error::{CliError, CliResult};

pub const DEFAULT_SCALE: usize = 4;
pub const DEFAULT_RECIPE: &str = "realesrgan";
pub const PAIRS_FILE: &str = "pairs.csv";

/// Contents of `<stem>.trace.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub hr: String,
    pub lr: String,
    pub recipe: String,
    pub scale: usize,
    pub seed: u64,
    pub hr_width: usize,
    pub hr_height: usize,
    pub lr_width: usize,
    pub lr_height: usize,
    pub stages: Vec<StageTrace>,
}

/// One row of `pairs.csv`; file names are relative to the HR and output directories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub hr: String,
    pub lr: String,
    pub trace: String,
    pub seed: u64,
}

fn load_recipe(spec: &str) -> CliResult<DegradationRecipe> {
    if let Some(r) = DegradationRecipe::builtin(spec) {
        return Ok(r);
    }
    let path = std::path::Path::new(spec);
    if !path.is_file() {
        return Err(CliError::validation(format!(
            "`recipe`: {spec:?} is neither a built-in recipe (realesrgan, codeformer) nor a file"
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| crate::error::io_err(path, e))?;
    Ok(DegradationRecipe::from_json(&text)?)
}

pub fn degrade(args: &DegradeArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "degrade")?;
    let hr_dir = existing_dir(a.hr_dir, "hr_dir")?;
    let out_dir = require(a.out_dir, "out_dir")?;
    let recipe = load_recipe(a.recipe.as_deref().unwrap_or(DEFAULT_RECIPE))?;
    let scale = a.scale.unwrap_or(DEFAULT_SCALE);
    if scale == 0 {
        return Err(CliError::validation("`scale` must be at least 1"));
    }
    let sources = list_pngs(&hr_dir)?;
    if sources.is_empty() {
        return Err(CliError::validation(format!(
            "`hr_dir`: no PNG files in {}",
            hr_dir.display()
        )));
    }
    create_dir(&out_dir)?;
    let rows = sources
        .par_iter()
        .enumerate()
        .map(|(i, src)| -> CliResult<PairRow> {
            let seed = derive_seed(ctx.seed, i as u64);
            let hr = load_image(src)?;
            let pair = apply_recipe(&hr, &recipe, scale, seed)?;
            let name = stem(src);
            let lr_name = format!("{name}.png");
            let trace_name = format!("{name}.trace.json");
            save_image(&pair.lr, out_dir.join(&lr_name))?;
            let hr_name = src.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let trace = TraceFile {
                hr: hr_name.clone(),
                lr: lr_name.clone(),
                recipe: recipe.name.clone(),
                scale,
                seed,
                hr_width: hr.width(),
                hr_height: hr.height(),
                lr_width: pair.lr.width(),
                lr_height: pair.lr.height(),
                stages: pair.trace,
            };
            let json = serde_json::to_string_pretty(&trace).expect("trace serializes") + "\n";
            write_file(&out_dir.join(&trace_name), json)?;
            Ok(PairRow {
                hr: hr_name,
                lr: lr_name,
                trace: trace_name,
                seed,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    write_file(&out_dir.join(PAIRS_FILE), bytes)?;
    Ok(format!(
        "degraded {} image(s) with recipe {} at scale {scale} into {}\n",
        rows.len(),
        recipe.name,
        out_dir.display()
    ))
}
