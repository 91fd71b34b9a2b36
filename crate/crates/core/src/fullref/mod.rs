//! Full-reference metrics: MSE, PSNR, SSIM, nucleus-level intensity/texture
//! L1 distances inside an instance mask, and embedding cosine similarity.

mod mask;
mod nuclear;

pub use mask::{load_mask, InstanceMask};
pub use nuclear::{
    glcm, glcm_with_offsets, intensity_features, nuclear_features, texture_features, Glcm,
    IntensityFeatures, NuclearFeatureVector, TextureFeatures, DEFAULT_GLCM_LEVELS, GLCM_OFFSETS,
};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Mean squared error in 8-bit units squared.
pub fn mse(a: &Raster, b: &Raster) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| {
            let d = u64::from(p.abs_diff(q));
            d * d
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &Raster, b: &Raster) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0f64 * 255.0 / e).log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_L: f64 = 255.0;

/// Normalized 1-D Gaussian window used by SSIM.
pub fn ssim_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Gaussian-weighted sums over every fully contained window ("valid" region).
fn filter_valid(plane: &[f64], w: usize, h: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = win.iter().zip(&row[x..]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = win
                .iter()
                .enumerate()
                .map(|(k, wk)| wk * tmp[(y + k) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03).
///
/// RGB inputs are converted to BT.601 luma first.
pub fn ssim(a: &Raster, b: &Raster) -> Result<f64> {
    a.check_same_shape(b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let x = a.gray().to_f64();
    let y = b.gray().to_f64();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let win = ssim_window();
    let mu_x = filter_valid(&x, w, h, &win);
    let mu_y = filter_valid(&y, w, h, &win);
    let e_xx = filter_valid(&xx, w, h, &win);
    let e_yy = filter_valid(&yy, w, h, &win);
    let e_xy = filter_valid(&xy, w, h, &win);
    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| ssim_index(mu_x[i], mu_y[i], e_xx[i], e_yy[i], e_xy[i], c1, c2))
        .sum();
    Ok(total / n as f64)
}

#[inline]
pub(crate) fn ssim_index(mx: f64, my: f64, exx: f64, eyy: f64, exy: f64, c1: f64, c2: f64) -> f64 {
    let vx = exx - mx * mx;
    let vy = eyy - my * my;
    let cov = exy - mx * my;
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

/// Nucleus-level L1 distances between an SR image and its HR reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuclearL1 {
    /// Mean over usable nuclei; `None` when no nucleus was usable.
    pub l1_texture: Option<f64>,
    pub l1_intensity: Option<f64>,
    /// Nuclei that contributed.
    pub nucleus_count: usize,
    /// Nuclei without any in-nucleus co-occurring pair.
    pub skipped: usize,
}

fn l1(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum()
}

/// Mean per-nucleus L1 distance of intensity and texture feature vectors.
///
/// Images are converted to grayscale; nuclei with no valid GLCM are skipped.
pub fn l1_nuclear_metrics(hr: &Raster, sr: &Raster, mask: &InstanceMask) -> Result<NuclearL1> {
    hr.check_same_shape(sr)?;
    let (hr_gray, sr_gray) = (hr.gray(), sr.gray());
    let (mut tex, mut int) = (0.0, 0.0);
    let (mut count, mut skipped) = (0usize, 0usize);
    for id in mask.ids() {
        let hr_glcm = match glcm(&hr_gray, mask, id, DEFAULT_GLCM_LEVELS) {
            Ok(g) => g,
            Err(Error::NoPairs(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let sr_glcm = glcm(&sr_gray, mask, id, DEFAULT_GLCM_LEVELS)?;
        tex += l1(
            texture_features(&hr_glcm).as_array(),
            texture_features(&sr_glcm).as_array(),
        );
        int += l1(
            intensity_features(&hr_gray, mask, id)?.as_array(),
            intensity_features(&sr_gray, mask, id)?.as_array(),
        );
        count += 1;
    }
    let mean = |s: f64| (count > 0).then(|| s / count as f64);
    Ok(NuclearL1 {
        l1_texture: mean(tex),
        l1_intensity: mean(int),
        nucleus_count: count,
        skipped,
    })
}

/// All full-reference metrics for one HR/SR pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullRefResult {
    pub psnr: f64,
    pub ssim: f64,
    pub mse: f64,
    pub nuclear: Option<NuclearL1>,
}

/// PSNR, SSIM and MSE, plus the nuclear L1 metrics when a mask is given.
pub fn evaluate_pair(hr: &Raster, sr: &Raster, mask: Option<&InstanceMask>) -> Result<FullRefResult> {
    let e = mse(hr, sr)?;
    Ok(FullRefResult {
        psnr: psnr(hr, sr)?,
        ssim: ssim(hr, sr)?,
        mse: e,
        nuclear: mask.map(|m| l1_nuclear_metrics(hr, sr, m)).transpose()?,
    })
}

/// `a . b / (|a| |b|)`.
pub fn embedding_cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "embedding lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero-norm embedding".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Read `image,dim0,dim1,...` rows keyed by image stem.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let context = path.display().to_string();
    let csv_err = |message: String| Error::Csv {
        context: context.clone(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    if headers.get(0) != Some("image") || headers.len() < 2 {
        return Err(csv_err("header must be image,dim0,dim1,...".into()));
    }
    let mut out = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let image = record.get(0).unwrap_or_default().to_string();
        let values = record
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| csv_err(format!("row {}: {e}", line + 2)))?;
        if out.insert(image.clone(), values).is_some() {
            return Err(csv_err(format!("duplicate image {image:?}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lcg_raster(w: usize, h: usize, c: usize, seed: u64) -> Raster {
        let mut s = seed;
        Raster::from_fn(w, h, c, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 56) as u8
        })
        .unwrap()
    }

    #[test]
    fn mse_and_psnr_closed_forms() {
        let a = Raster::filled(8, 8, 3, 0).unwrap();
        let b = Raster::filled(8, 8, 3, 16).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 256.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let p = psnr(&a, &b).unwrap();
        assert!((p - 10.0 * (65025.0f64 / 256.0).log10()).abs() < 1e-12);
        assert!((p - 24.05).abs() < 0.005);
        let c = Raster::filled(8, 7, 3, 0).unwrap();
        assert!(matches!(mse(&a, &c), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn ssim_identity_inversion_and_size() {
        let a = lcg_raster(32, 32, 1, 3);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let inv = Raster::new(32, 32, 1, a.data().iter().map(|v| 255 - v).collect()).unwrap();
        assert!(ssim(&a, &inv).unwrap() < 1.0);
        let small = lcg_raster(10, 32, 1, 1);
        assert!(matches!(ssim(&small, &small), Err(Error::TooSmall(_))));
        let rgb = lcg_raster(16, 16, 3, 5);
        assert_eq!(ssim(&rgb, &rgb).unwrap(), 1.0);
    }

    #[test]
    fn nuclear_l1_identity_and_offset() {
        let hr = lcg_raster(16, 16, 3, 8);
        let labels: Vec<u16> = (0..256).map(|i| ((i % 16) / 4 + 1) as u16).collect();
        let m = InstanceMask::new(16, 16, labels).unwrap();
        let r = l1_nuclear_metrics(&hr, &hr, &m).unwrap();
        assert_eq!((r.l1_texture, r.l1_intensity, r.nucleus_count), (Some(0.0), Some(0.0), 4));

        let flat = Raster::filled(8, 8, 1, 100).unwrap();
        let brighter = Raster::filled(8, 8, 1, 110).unwrap();
        let mut labels = vec![0u16; 64];
        for y in 2..6 {
            for x in 2..6 {
                labels[y * 8 + x] = 1;
            }
        }
        let m = InstanceMask::new(8, 8, labels).unwrap();
        let r = l1_nuclear_metrics(&flat, &brighter, &m).unwrap();
        assert_eq!(r.l1_intensity, Some(10.0));
        assert_eq!(r.l1_texture, Some(0.0));
    }

    #[test]
    fn nuclear_l1_empty_result() {
        let img = Raster::filled(4, 4, 1, 10).unwrap();
        let empty = InstanceMask::new(4, 4, vec![0; 16]).unwrap();
        let r = l1_nuclear_metrics(&img, &img, &empty).unwrap();
        assert_eq!(r.l1_texture, None);
        assert_eq!(r.nucleus_count, 0);

        let mut labels = vec![0u16; 16];
        labels[5] = 2;
        let lone = InstanceMask::new(4, 4, labels).unwrap();
        let r = l1_nuclear_metrics(&img, &img, &lone).unwrap();
        assert_eq!((r.l1_intensity, r.nucleus_count, r.skipped), (None, 0, 1));
    }

    #[test]
    fn cosine_cases() {
        assert!((embedding_cosine(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(embedding_cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(embedding_cosine(&[0.0, 0.0], &[0.0, 1.0]).is_err());
        assert!(embedding_cosine(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn embeddings_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, "image,dim0,dim1\na,1.0,2\nb,-3,0.5\n").unwrap();
        let e = load_embeddings(&p).unwrap();
        assert_eq!(e["a"], vec![1.0, 2.0]);
        assert_eq!(e["b"], vec![-3.0, 0.5]);
        std::fs::write(&p, "image,dim0\na,x\n").unwrap();
        assert!(load_embeddings(&p).is_err());
    }

    proptest! {
        #[test]
        fn metrics_are_symmetric(seed in 0u64..1000) {
            let a = lcg_raster(16, 16, 1, seed);
            let b = lcg_raster(16, 16, 1, seed + 7919);
            prop_assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
            prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
            prop_assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
            prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        }
    }
}
