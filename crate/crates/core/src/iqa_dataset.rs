//! Blur-scored IQA dataset curation.
//!
//! Each high-resolution patch yields a ladder of eleven progressively
//! blurred copies. Level `i` uses a box radius of `i` or a Gaussian sigma of
//! `0.5 * i` and is scored `10 - i`, so level 0 is the untouched patch with
//! the best score of 10.0 and level 10 the blurriest with 0.0.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade::{box_kernel, convolve, isotropic_gaussian};
use crate::error::{Error, Result};
use crate::raster::{load_image, save_image, Raster};

/// Highest ladder level; there are `MAX_LEVEL + 1` levels.
pub const MAX_LEVEL: u32 = 10;
pub const MANIFEST_HEADER: [&str; 6] = [
    "image_path",
    "source_hr_path",
    "blur_type",
    "level",
    "param",
    "score",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlurType {
    Box,
    Gaussian,
}

impl BlurType {
    pub const ALL: [BlurType; 2] = [BlurType::Box, BlurType::Gaussian];

    pub fn as_str(self) -> &'static str {
        match self {
            BlurType::Box => "box",
            BlurType::Gaussian => "gaussian",
        }
    }

    /// Radius (box) or sigma (Gaussian) for a ladder level.
    pub fn level_param(self, level: u32) -> f64 {
        match self {
            BlurType::Box => f64::from(level),
            BlurType::Gaussian => 0.5 * f64::from(level),
        }
    }

    /// Apply the blur of a ladder level; level 0 returns the input unchanged.
    pub fn blur(self, r: &Raster, level: u32) -> Result<Raster> {
        if level == 0 {
            return Ok(r.clone());
        }
        let kernel = match self {
            BlurType::Box => box_kernel(i64::from(level))?,
            BlurType::Gaussian => isotropic_gaussian(self.level_param(level))?,
        };
        Ok(convolve(r, &kernel))
    }
}

impl fmt::Display for BlurType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BlurType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "box" | "boxblur" => Ok(BlurType::Box),
            "gaussian" | "gauss" => Ok(BlurType::Gaussian),
            other => Err(Error::InvalidParameter(format!(
                "unknown blur type {other:?} (expected box or gaussian)"
            ))),
        }
    }
}

/// Quality score of a ladder level.
pub fn level_score(level: u32) -> f64 {
    f64::from(MAX_LEVEL - level.min(MAX_LEVEL))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub image_path: PathBuf,
    pub source_hr_path: PathBuf,
    pub blur_type: BlurType,
    pub level: u32,
    pub param: f64,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub blur_type: BlurType,
    pub level_count: usize,
    pub samples: Vec<ScoredSample>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Distinct source images, sorted.
    pub fn sources(&self) -> Vec<PathBuf> {
        self.samples
            .iter()
            .map(|s| s.source_hr_path.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Ladder parameter per level, e.g. `[(0, 0.0), (1, 0.5), ...]`.
    pub fn parameter_table(&self) -> Vec<(u32, f64)> {
        (0..self.level_count as u32)
            .map(|l| (l, self.blur_type.level_param(l)))
            .collect()
    }

    /// CSV text with the fixed header and LF line endings.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Csv {
            context: "manifest".into(),
            message: e.to_string(),
        };
        w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
        for s in &self.samples {
            w.write_record([
                s.image_path.to_string_lossy().as_ref(),
                s.source_hr_path.to_string_lossy().as_ref(),
                s.blur_type.as_str(),
                &s.level.to_string(),
                &format!("{}", s.param),
                &format!("{:.1}", s.score),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv {
            context: "manifest".into(),
            message: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let csv_err = |message: String| Error::Csv {
            context: "manifest".into(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?;
        if headers.iter().ne(MANIFEST_HEADER.iter().copied()) {
            return Err(csv_err(format!(
                "expected header {}",
                MANIFEST_HEADER.join(",")
            )));
        }
        let mut samples = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(e.to_string()))?;
            let row = i + 2;
            let field = |k: usize| rec.get(k).unwrap_or_default();
            let num = |k: usize| -> Result<f64> {
                field(k)
                    .parse::<f64>()
                    .map_err(|e| csv_err(format!("row {row} column {}: {e}", MANIFEST_HEADER[k])))
            };
            samples.push(ScoredSample {
                image_path: PathBuf::from(field(0)),
                source_hr_path: PathBuf::from(field(1)),
                blur_type: field(2).parse()?,
                level: field(3)
                    .parse()
                    .map_err(|e| csv_err(format!("row {row} column level: {e}")))?,
                param: num(4)?,
                score: num(5)?,
            });
        }
        let first = samples
            .first()
            .ok_or_else(|| Error::Empty("manifest has no rows".into()))?;
        let blur_type = first.blur_type;
        if samples.iter().any(|s| s.blur_type != blur_type) {
            return Err(csv_err("manifest mixes blur types".into()));
        }
        let level_count = samples.iter().map(|s| s.level as usize + 1).max().unwrap_or(0);
        Ok(Self {
            blur_type,
            level_count,
            samples,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Sorted `*.png` files in a directory.
pub fn list_pngs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// File name of a ladder image.
pub fn ladder_file_name(stem: &str, blur: BlurType, level: u32) -> String {
    format!("{stem}_{blur}_L{level:02}.png")
}

/// Blur every PNG in `hr_dir` through the 11-level ladder.
///
/// Images are written to `out_dir` and the manifest to
/// `out_dir/manifest_<blur>.csv`. Sources are processed in parallel; rows
/// are ordered by source file name, then level.
pub fn curate(hr_dir: impl AsRef<Path>, blur: BlurType, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    let sources = list_pngs(hr_dir.as_ref())?;
    if sources.is_empty() {
        return Err(Error::Empty(format!(
            "no PNG files in {}",
            hr_dir.as_ref().display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let per_source: Vec<Vec<ScoredSample>> = sources
        .par_iter()
        .map(|src| -> Result<Vec<ScoredSample>> {
            let hr = load_image(src)?;
            let stem = file_stem(src);
            (0..=MAX_LEVEL)
                .map(|level| {
                    let img = blur.blur(&hr, level)?;
                    let path = out_dir.join(ladder_file_name(&stem, blur, level));
                    save_image(&img, &path)?;
                    Ok(ScoredSample {
                        image_path: path,
                        source_hr_path: src.clone(),
                        blur_type: blur,
                        level,
                        param: blur.level_param(level),
                        score: level_score(level),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let manifest = Manifest {
        blur_type: blur,
        level_count: MAX_LEVEL as usize + 1,
        samples: per_source.into_iter().flatten().collect(),
    };
    manifest.write_csv(out_dir.join(format!("manifest_{blur}.csv")))?;
    Ok(manifest)
}

/// Split by source image so all levels of a source land on the same side.
pub fn split_manifest(m: &Manifest, train_frac: f64, seed: u64) -> Result<(Manifest, Manifest)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must be in (0, 1), got {train_frac}"
        )));
    }
    let mut sources = m.sources();
    let n_train = (train_frac * sources.len() as f64).round() as usize;
    if n_train == 0 || n_train >= sources.len() {
        return Err(Error::Degenerate(format!(
            "{} source image(s) cannot be split at fraction {train_frac}",
            sources.len()
        )));
    }
    sources.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train_set: BTreeSet<PathBuf> = sources[..n_train].iter().cloned().collect();
    let (train, test): (Vec<_>, Vec<_>) = m
        .samples
        .iter()
        .cloned()
        .partition(|s| train_set.contains(&s.source_hr_path));
    let part = |samples| Manifest {
        blur_type: m.blur_type,
        level_count: m.level_count,
        samples,
    };
    Ok((part(train), part(test)))
}
