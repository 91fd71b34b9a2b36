use serde::{Deserialize, Serialize};

use crate::degrade::{box_kernel, correlate_plane};
use crate::error::{Error, Result};
use crate::raster::{reflect101, Raster};

pub const FEATURE_COUNT: usize = 7;
pub const MIN_FEATURE_SIDE: usize = 16;
pub const BIAS_INDEX: usize = FEATURE_COUNT - 1;
const EPS: f64 = 1e-8;
const EDGE_THRESHOLD: f64 = 10.0 / 255.0;
const CONTRAST_BLOCK: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "laplacian_var",
    "grad_mean",
    "grad_std",
    "hf_ratio",
    "local_contrast",
    "edge_density",
    "bias",
];

/// Handcrafted sharpness descriptors on the unit intensity scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurFeatureVector(pub [f64; FEATURE_COUNT]);

impl BlurFeatureVector {
    pub fn laplacian_var(&self) -> f64 {
        self.0[0]
    }

    pub fn grad_mean(&self) -> f64 {
        self.0[1]
    }

    pub fn edge_density(&self) -> f64 {
        self.0[5]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Sharpness features of a grayscale image of at least 16x16:
///
/// 0. variance of the 4-neighbour Laplacian
/// 1. mean central-difference gradient magnitude
/// 2. std of that magnitude
/// 3. `var(I - box3(I)) / max(var(I), 1e-8)`
/// 4. std of `I` minus its 8x8 block means
/// 5. fraction of pixels whose forward-difference gradient exceeds 10/255
/// 6. constant 1
///
/// Borders use reflect-101.
pub fn blur_features(gray: &Raster) -> Result<BlurFeatureVector> {
    if !gray.is_gray() {
        return Err(Error::InvalidParameter(
            "blur features need a grayscale raster".into(),
        ));
    }
    let (w, h) = (gray.width(), gray.height());
    if w < MIN_FEATURE_SIDE || h < MIN_FEATURE_SIDE {
        return Err(Error::TooSmall(format!(
            "blur features need at least {MIN_FEATURE_SIDE}x{MIN_FEATURE_SIDE}, got {w}x{h}"
        )));
    }
    let img = gray.to_unit();
    let at = |x: isize, y: isize| img[reflect101(y, h) * w + reflect101(x, w)];

    let n = w * h;
    let mut lap = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut edges = 0usize;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = at(x, y);
            let (l, r, u, d) = (at(x - 1, y), at(x + 1, y), at(x, y - 1), at(x, y + 1));
            lap.push(l + r + u + d - 4.0 * c);
            let (gx, gy) = (0.5 * (r - l), 0.5 * (d - u));
            grad.push((gx * gx + gy * gy).sqrt());
            let (fx, fy) = (r - c, d - c);
            if (fx * fx + fy * fy).sqrt() > EDGE_THRESHOLD {
                edges += 1;
            }
        }
    }
    let (_, lap_var) = mean_var(&lap);
    let (grad_mean, grad_var) = mean_var(&grad);

    let smooth = correlate_plane(&img, w, h, &box_kernel(1)?);
    let residual: Vec<f64> = img.iter().zip(&smooth).map(|(a, b)| a - b).collect();
    let (_, img_var) = mean_var(&img);
    let (_, res_var) = mean_var(&residual);
    let hf_ratio = res_var / img_var.max(EPS);

    let bw = w.div_ceil(CONTRAST_BLOCK);
    let bh = h.div_ceil(CONTRAST_BLOCK);
    let mut sums = vec![0.0; bw * bh];
    let mut counts = vec![0usize; bw * bh];
    for y in 0..h {
        for x in 0..w {
            let b = (y / CONTRAST_BLOCK) * bw + x / CONTRAST_BLOCK;
            sums[b] += img[y * w + x];
            counts[b] += 1;
        }
    }
    let detail: Vec<f64> = (0..n)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let b = (y / CONTRAST_BLOCK) * bw + x / CONTRAST_BLOCK;
            img[i] - sums[b] / counts[b] as f64
        })
        .collect();
    let (_, detail_var) = mean_var(&detail);

    Ok(BlurFeatureVector([
        lap_var,
        grad_mean,
        grad_var.sqrt(),
        hf_ratio,
        detail_var.sqrt(),
        edges as f64 / n as f64,
        1.0,
    ]))
}
