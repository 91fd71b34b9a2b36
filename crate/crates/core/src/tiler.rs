//! Inference geometry and whole-slide tiling.
//!
//! Control images are upscaled to the target size, padded to a multiple of
//! 64 so the 1/8 latent grid is itself a multiple of 8, and large slides are
//! cut into overlapping tiles that are feather-blended back together.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{load_image, reflect101, save_image, Raster};

pub const PAD_MULTIPLE: usize = 64;
pub const LATENT_FACTOR: usize = 8;
pub const LATENT_CHANNELS: usize = 4;
pub const SUPPORTED_SCALES: [usize; 3] = [2, 4, 8];
pub const DEFAULT_TILE: usize = 512;
pub const DEFAULT_OVERLAP: usize = 64;
pub const GRID_FILE: &str = "grid.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InferenceGeometry {
    pub lr_width: usize,
    pub lr_height: usize,
    pub scale: usize,
    pub target_width: usize,
    pub target_height: usize,
    pub padded_width: usize,
    pub padded_height: usize,
    pub latent_width: usize,
    pub latent_height: usize,
    pub latent_channels: usize,
}

fn round_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

pub fn inference_geometry(lr_width: usize, lr_height: usize, scale: usize) -> Result<InferenceGeometry> {
    if !SUPPORTED_SCALES.contains(&scale) {
        return Err(Error::InvalidParameter(format!(
            "unsupported scale {scale} (expected 2, 4 or 8)"
        )));
    }
    if lr_width == 0 || lr_height == 0 {
        return Err(Error::InvalidParameter("LR dimensions must be at least 1".into()));
    }
    let (tw, th) = (lr_width * scale, lr_height * scale);
    let (pw, ph) = (round_up(tw, PAD_MULTIPLE), round_up(th, PAD_MULTIPLE));
    Ok(InferenceGeometry {
        lr_width,
        lr_height,
        scale,
        target_width: tw,
        target_height: th,
        padded_width: pw,
        padded_height: ph,
        latent_width: pw / LATENT_FACTOR,
        latent_height: ph / LATENT_FACTOR,
        latent_channels: LATENT_CHANNELS,
    })
}

/// Extend right and bottom with reflect-101 borders.
pub fn pad_to(r: &Raster, w: usize, h: usize) -> Result<Raster> {
    if w < r.width() || h < r.height() {
        return Err(Error::InvalidParameter(format!(
            "cannot pad {}x{} to smaller {w}x{h}",
            r.width(),
            r.height()
        )));
    }
    if r.width() == 1 && w > 1 || r.height() == 1 && h > 1 {
        // a single row/column reflects onto itself
        return Raster::from_fn(w, h, r.channels(), |x, y, c| {
            r.get(x.min(r.width() - 1), y.min(r.height() - 1), c)
        });
    }
    Raster::from_fn(w, h, r.channels(), |x, y, c| {
        r.get(
            reflect101(x as isize, r.width()),
            reflect101(y as isize, r.height()),
            c,
        )
    })
}

/// Top-left window of the given size.
pub fn crop_to(r: &Raster, w: usize, h: usize) -> Result<Raster> {
    crop_rect(r, Rect { x: 0, y: 0, width: w, height: h })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    fn fits(&self, w: usize, h: usize) -> bool {
        self.width > 0 && self.height > 0 && self.x + self.width <= w && self.y + self.height <= h
    }
}

pub fn crop_rect(r: &Raster, rect: Rect) -> Result<Raster> {
    if !rect.fits(r.width(), r.height()) {
        return Err(Error::InvalidParameter(format!(
            "rect {rect:?} does not fit in {}x{}",
            r.width(),
            r.height()
        )));
    }
    Raster::from_fn(rect.width, rect.height, r.channels(), |x, y, c| {
        r.get(rect.x + x, rect.y + y, c)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    #[serde(flatten)]
    pub rect: Rect,
}

impl Tile {
    pub fn file_name(&self) -> String {
        format!("r{}_c{}.png", self.row, self.col)
    }
}

/// Tiling of a source image, serialized as `grid.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub source_width: usize,
    pub source_height: usize,
    pub tile: usize,
    pub overlap: usize,
    pub tiles: Vec<Tile>,
}

fn starts(src: usize, tile: usize, stride: usize) -> Vec<usize> {
    let mut out = vec![0];
    while out.last().unwrap() + tile < src {
        out.push((out.last().unwrap() + stride).min(src - tile));
    }
    out
}

/// Row-major tile plan; the last row and column end exactly at the border.
pub fn tile_plan(src_w: usize, src_h: usize, tile: usize, overlap: usize) -> Result<TileGrid> {
    if tile == 0 || overlap >= tile {
        return Err(Error::InvalidParameter(format!(
            "need tile > overlap >= 0, got tile {tile}, overlap {overlap}"
        )));
    }
    if tile > src_w || tile > src_h {
        return Err(Error::InvalidParameter(format!(
            "tile {tile} larger than source {src_w}x{src_h}"
        )));
    }
    let stride = tile - overlap;
    let (xs, ys) = (starts(src_w, tile, stride), starts(src_h, tile, stride));
    let tiles = ys
        .iter()
        .enumerate()
        .flat_map(|(row, &y)| {
            xs.iter().enumerate().map(move |(col, &x)| Tile {
                row,
                col,
                rect: Rect { x, y, width: tile, height: tile },
            })
        })
        .collect();
    Ok(TileGrid {
        source_width: src_w,
        source_height: src_h,
        tile,
        overlap,
        tiles,
    })
}

impl TileGrid {
    pub fn rows(&self) -> usize {
        self.tiles.iter().map(|t| t.row + 1).max().unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.tiles.iter().map(|t| t.col + 1).max().unwrap_or(0)
    }

    /// The same plan with every length multiplied by `s`.
    pub fn scaled(&self, s: usize) -> TileGrid {
        TileGrid {
            source_width: self.source_width * s,
            source_height: self.source_height * s,
            tile: self.tile * s,
            overlap: self.overlap * s,
            tiles: self
                .tiles
                .iter()
                .map(|t| Tile {
                    row: t.row,
                    col: t.col,
                    rect: Rect {
                        x: t.rect.x * s,
                        y: t.rect.y * s,
                        width: t.rect.width * s,
                        height: t.rect.height * s,
                    },
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiles.is_empty() {
            return Err(Error::Invalid("tile grid has no tiles".into()));
        }
        let mut covered = vec![false; self.source_width * self.source_height];
        for t in &self.tiles {
            if !t.rect.fits(self.source_width, self.source_height) {
                return Err(Error::Invalid(format!("tile {} out of bounds", t.file_name())));
            }
            for y in t.rect.y..t.rect.y + t.rect.height {
                covered[y * self.source_width + t.rect.x..y * self.source_width + t.rect.x + t.rect.width]
                    .fill(true);
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::Invalid("tile grid does not cover the source".into()));
        }
        Ok(())
    }

    pub fn cut(&self, r: &Raster) -> Result<Vec<Raster>> {
        if r.width() != self.source_width || r.height() != self.source_height {
            return Err(Error::DimensionMismatch(format!(
                "grid for {}x{} applied to {}x{}",
                self.source_width,
                self.source_height,
                r.width(),
                r.height()
            )));
        }
        self.tiles.iter().map(|t| crop_rect(r, t.rect)).collect()
    }

    /// Unnormalized feather weight of tile `k` at tile-local `(x, y)`.
    fn raw_weight(&self, k: usize, x: usize, y: usize) -> f64 {
        let r = self.tiles[k].rect;
        let ramp = |d: usize| {
            if self.overlap == 0 {
                1.0
            } else {
                ((d as f64 + 0.5) / self.overlap as f64).min(1.0)
            }
        };
        let mut w = 1.0f64;
        if r.x > 0 {
            w = w.min(ramp(x));
        }
        if r.x + r.width < self.source_width {
            w = w.min(ramp(r.width - 1 - x));
        }
        let mut h = 1.0f64;
        if r.y > 0 {
            h = h.min(ramp(y));
        }
        if r.y + r.height < self.source_height {
            h = h.min(ramp(r.height - 1 - y));
        }
        w * h
    }

    fn weight_sums(&self) -> Vec<f64> {
        let sw = self.source_width;
        let mut sums = vec![0.0; sw * self.source_height];
        for (k, t) in self.tiles.iter().enumerate() {
            for y in 0..t.rect.height {
                for x in 0..t.rect.width {
                    sums[(t.rect.y + y) * sw + t.rect.x + x] += self.raw_weight(k, x, y);
                }
            }
        }
        sums
    }

    /// Normalized per-tile weight maps (tile-local, row-major).
    pub fn blend_weights(&self) -> Vec<Vec<f64>> {
        let sums = self.weight_sums();
        let sw = self.source_width;
        self.tiles
            .iter()
            .enumerate()
            .map(|(k, t)| {
                (0..t.rect.height * t.rect.width)
                    .map(|i| {
                        let (x, y) = (i % t.rect.width, i / t.rect.width);
                        self.raw_weight(k, x, y) / sums[(t.rect.y + y) * sw + t.rect.x + x]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Feather-blend tiles (in grid order) into the source canvas.
pub fn stitch(tiles: &[Raster], grid: &TileGrid) -> Result<Raster> {
    grid.validate()?;
    if tiles.len() != grid.tiles.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} tiles for a grid of {}",
            tiles.len(),
            grid.tiles.len()
        )));
    }
    let channels = tiles[0].channels();
    for (img, t) in tiles.iter().zip(&grid.tiles) {
        if img.width() != t.rect.width || img.height() != t.rect.height || img.channels() != channels {
            return Err(Error::DimensionMismatch(format!(
                "tile {} is {}x{}x{}, expected {}x{}x{channels}",
                t.file_name(),
                img.width(),
                img.height(),
                img.channels(),
                t.rect.width,
                t.rect.height
            )));
        }
    }
    let sw = grid.source_width;
    let weights = grid.blend_weights();
    let mut acc = vec![0.0; sw * grid.source_height * channels];
    for ((img, t), w) in tiles.iter().zip(&grid.tiles).zip(&weights) {
        for y in 0..t.rect.height {
            for x in 0..t.rect.width {
                let wt = w[y * t.rect.width + x];
                let base = ((t.rect.y + y) * sw + t.rect.x + x) * channels;
                for c in 0..channels {
                    acc[base + c] += wt * f64::from(img.get(x, y, c));
                }
            }
        }
    }
    Raster::from_f64(sw, grid.source_height, channels, &acc)
}

/// Write `r{row}_c{col}.png` tiles and `grid.json` into `dir`.
pub fn write_tiles(r: &Raster, grid: &TileGrid, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (img, t) in grid.cut(r)?.iter().zip(&grid.tiles) {
        save_image(img, dir.join(t.file_name()))?;
    }
    let path = dir.join(GRID_FILE);
    let json = serde_json::to_string_pretty(grid).expect("grid serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn read_grid(dir: impl AsRef<Path>) -> Result<TileGrid> {
    let path = dir.as_ref().join(GRID_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let grid: TileGrid = serde_json::from_str(&text).map_err(|e| Error::Json {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    grid.validate()?;
    Ok(grid)
}

/// Stitch a tile directory; tiles may be uniformly upscaled by an integer factor.
pub fn stitch_dir(dir: impl AsRef<Path>) -> Result<Raster> {
    let dir = dir.as_ref();
    let grid = read_grid(dir)?;
    let tiles = grid
        .tiles
        .iter()
        .map(|t| load_image(dir.join(t.file_name())))
        .collect::<Result<Vec<_>>>()?;
    let first = &tiles[0];
    let rect = grid.tiles[0].rect;
    let scale = first.width() / rect.width;
    if scale == 0 || first.width() != rect.width * scale || first.height() != rect.height * scale {
        return Err(Error::DimensionMismatch(format!(
            "tile {} is {}x{}, not an integer multiple of {}x{}",
            grid.tiles[0].file_name(),
            first.width(),
            first.height(),
            rect.width,
            rect.height
        )));
    }
    stitch(&tiles, &grid.scaled(scale))
}
