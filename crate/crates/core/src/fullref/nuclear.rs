//! Per-nucleus intensity moments and GLCM texture descriptors.

use serde::{Deserialize, Serialize};

use super::mask::InstanceMask;
use crate::error::{Error, Result};
use crate::raster::Raster;

pub const DEFAULT_GLCM_LEVELS: usize = 32;

/// Distance-1 offsets: right, down, down-right, up-right.
pub const GLCM_OFFSETS: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// Population moments of a nucleus's grayscale values (0..=255 scale).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityFeatures {
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    /// Fisher (excess) kurtosis.
    pub kurtosis: f64,
}

impl IntensityFeatures {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mean, self.std, self.skewness, self.kurtosis]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextureFeatures {
    pub contrast: f64,
    pub dissimilarity: f64,
    pub homogeneity: f64,
    pub energy: f64,
}

impl TextureFeatures {
    pub fn as_array(&self) -> [f64; 4] {
        [self.contrast, self.dissimilarity, self.homogeneity, self.energy]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuclearFeatureVector {
    pub intensity: IntensityFeatures,
    pub texture: TextureFeatures,
}

/// Normalized symmetric gray-level co-occurrence matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Glcm {
    levels: usize,
    p: Vec<f64>,
}

impl Glcm {
    /// Wrap an already-normalized `levels x levels` matrix.
    pub fn from_probabilities(levels: usize, p: Vec<f64>) -> Result<Self> {
        if levels < 2 || p.len() != levels * levels {
            return Err(Error::InvalidParameter(format!(
                "glcm needs levels >= 2 and levels^2 entries, got {levels} and {}",
                p.len()
            )));
        }
        Ok(Self { levels, p })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
}

fn check_gray(gray: &Raster, mask: &InstanceMask) -> Result<()> {
    if !gray.is_gray() {
        return Err(Error::InvalidParameter(
            "nuclear features need a grayscale raster".into(),
        ));
    }
    if !mask.matches(gray.width(), gray.height()) {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} vs image {}x{}",
            mask.width(),
            mask.height(),
            gray.width(),
            gray.height()
        )));
    }
    Ok(())
}

/// Mean, std, skewness and excess kurtosis over one instance's pixels.
///
/// A zero-variance region reports skewness and kurtosis of 0.
pub fn intensity_features(gray: &Raster, mask: &InstanceMask, id: u16) -> Result<IntensityFeatures> {
    check_gray(gray, mask)?;
    let pixels = mask.pixels(id)?;
    let data = gray.data();
    let n = pixels.len() as f64;
    let sum: u64 = pixels.iter().map(|&i| u64::from(data[i])).sum();
    let mean = sum as f64 / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let d = f64::from(data[i]) - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Ok(IntensityFeatures {
            mean,
            std: 0.0,
            skewness: 0.0,
            kurtosis: 0.0,
        });
    }
    Ok(IntensityFeatures {
        mean,
        std: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// GLCM over the default four distance-1 directions.
pub fn glcm(gray: &Raster, mask: &InstanceMask, id: u16, levels: usize) -> Result<Glcm> {
    glcm_with_offsets(gray, mask, id, levels, &GLCM_OFFSETS)
}

/// Symmetric co-occurrence counts of quantized levels `floor(g * levels / 256)`,
/// counting a pair only when both pixels belong to instance `id`.
pub fn glcm_with_offsets(
    gray: &Raster,
    mask: &InstanceMask,
    id: u16,
    levels: usize,
    offsets: &[(isize, isize)],
) -> Result<Glcm> {
    check_gray(gray, mask)?;
    if !(2..=256).contains(&levels) {
        return Err(Error::InvalidParameter(format!(
            "glcm levels must be in 2..=256, got {levels}"
        )));
    }
    let pixels = mask.pixels(id)?;
    let (w, h) = (gray.width() as isize, gray.height() as isize);
    let data = gray.data();
    let bin = |i: usize| usize::from(data[i]) * levels / 256;
    let mut counts = vec![0u64; levels * levels];
    let mut total = 0u64;
    for &i in pixels {
        let (x, y) = ((i as isize) % w, (i as isize) / w);
        for &(dx, dy) in offsets {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w || ny >= h {
                continue;
            }
            let j = (ny * w + nx) as usize;
            if mask.labels()[j] != id {
                continue;
            }
            let (a, b) = (bin(i), bin(j));
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            total += 2;
        }
    }
    if total == 0 {
        return Err(Error::NoPairs(id));
    }
    let norm = total as f64;
    Glcm::from_probabilities(levels, counts.iter().map(|&c| c as f64 / norm).collect())
}

/// Contrast, dissimilarity, homogeneity and energy (root of the angular second moment).
pub fn texture_features(g: &Glcm) -> TextureFeatures {
    let (mut contrast, mut dissimilarity, mut homogeneity, mut asm) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.levels {
        for j in 0..g.levels {
            let p = g.get(i, j);
            if p == 0.0 {
                continue;
            }
            let d = i as f64 - j as f64;
            contrast += p * d * d;
            dissimilarity += p * d.abs();
            homogeneity += p / (1.0 + d * d);
            asm += p * p;
        }
    }
    TextureFeatures {
        contrast,
        dissimilarity,
        homogeneity,
        energy: asm.sqrt(),
    }
}

/// Intensity and texture features for one nucleus.
pub fn nuclear_features(
    gray: &Raster,
    mask: &InstanceMask,
    id: u16,
    levels: usize,
) -> Result<NuclearFeatureVector> {
    Ok(NuclearFeatureVector {
        intensity: intensity_features(gray, mask, id)?,
        texture: texture_features(&glcm(gray, mask, id, levels)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn whole_mask(w: usize, h: usize) -> InstanceMask {
        InstanceMask::new(w, h, vec![1; w * h]).unwrap()
    }

    /// Two-pass textbook moments, independent of the streaming form above.
    fn oracle_moments(values: &[f64]) -> [f64; 4] {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
        let (m2, m3, m4) = (central(2), central(3), central(4));
        if m2 == 0.0 {
            return [mean, 0.0, 0.0, 0.0];
        }
        [mean, m2.sqrt(), m3 / m2.sqrt().powi(3), m4 / m2.powi(2) - 3.0]
    }

    #[test]
    fn constant_region_moments() {
        let g = Raster::filled(5, 4, 1, 100).unwrap();
        let f = intensity_features(&g, &whole_mask(5, 4), 1).unwrap();
        assert_eq!(f.as_array(), [100.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_point_region_moments() {
        let g = Raster::from_fn(4, 4, 1, |x, _, _| if x % 2 == 0 { 0 } else { 255 }).unwrap();
        let f = intensity_features(&g, &whole_mask(4, 4), 1).unwrap();
        for (got, want) in f.as_array().iter().zip([127.5, 127.5, 0.0, -2.0]) {
            assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn unknown_id_and_rgb_rejected() {
        let g = Raster::filled(3, 3, 1, 1).unwrap();
        let m = whole_mask(3, 3);
        assert!(matches!(intensity_features(&g, &m, 2), Err(Error::UnknownInstance(2))));
        let rgb = Raster::filled(3, 3, 3, 1).unwrap();
        assert!(intensity_features(&rgb, &m, 1).is_err());
        assert!(glcm(&g, &m, 1, 1).is_err());
    }

    #[test]
    fn constant_region_glcm() {
        let g = Raster::filled(6, 6, 1, 77).unwrap();
        let m = whole_mask(6, 6);
        let c = glcm(&g, &m, 1, 32).unwrap();
        let bin = 77 * 32 / 256;
        assert_eq!(c.get(bin, bin), 1.0);
        assert!((c.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let t = texture_features(&c);
        assert_eq!(t.as_array(), [0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn single_pixel_nucleus_has_no_pairs() {
        let g = Raster::filled(3, 3, 1, 50).unwrap();
        let mut labels = vec![0; 9];
        labels[4] = 7;
        let m = InstanceMask::new(3, 3, labels).unwrap();
        assert!(matches!(glcm(&g, &m, 7, 32), Err(Error::NoPairs(7))));
    }

    #[test]
    fn checkerboard_pattern_glcm_and_features() {
        // Levels 0 and 1 at 32 bins are gray values 0..8 and 8..16.
        let g = Raster::new(2, 2, 1, vec![0, 8, 8, 0]).unwrap();
        let c = glcm_with_offsets(&g, &whole_mask(2, 2), 1, 32, &[(1, 0)]).unwrap();
        assert_eq!(c.get(0, 1), 0.5);
        assert_eq!(c.get(1, 0), 0.5);
        let t = texture_features(&c);
        let want = [1.0, 1.0, 0.5, 0.5f64.sqrt()];
        for (got, w) in t.as_array().iter().zip(want) {
            assert!((got - w).abs() <= 1e-12);
        }
    }

    #[test]
    fn pairs_require_both_pixels_in_instance() {
        // Row: [1 1 2]; only the (0,1) pair of instance 1 counts.
        let g = Raster::new(3, 1, 1, vec![0, 8, 255]).unwrap();
        let m = InstanceMask::new(3, 1, vec![1, 1, 2]).unwrap();
        let c = glcm(&g, &m, 1, 32).unwrap();
        assert_eq!(c.get(0, 1), 0.5);
        assert_eq!(c.get(1, 0), 0.5);
    }

    #[test]
    fn glcm_matches_enumerated_pairs() {
        let g = Raster::from_fn(9, 7, 1, |x, y, _| ((x * 31 + y * 17) % 256) as u8).unwrap();
        let labels: Vec<u16> = (0..63).map(|i| if (i % 9) > 1 && (i / 9) < 6 { 3 } else { 0 }).collect();
        let m = InstanceMask::new(9, 7, labels).unwrap();
        let c = glcm(&g, &m, 3, 32).unwrap();
        let mut counts = vec![0.0; 32 * 32];
        let mut total = 0.0;
        for y in 0..7isize {
            for x in 0..9isize {
                for (dx, dy) in GLCM_OFFSETS {
                    let (nx, ny) = (x + dx, y + dy);
                    if !(0..9).contains(&nx) || !(0..7).contains(&ny) {
                        continue;
                    }
                    if m.label(x as usize, y as usize) != 3 || m.label(nx as usize, ny as usize) != 3 {
                        continue;
                    }
                    let a = g.get(x as usize, y as usize, 0) as usize / 8;
                    let b = g.get(nx as usize, ny as usize, 0) as usize / 8;
                    counts[a * 32 + b] += 1.0;
                    counts[b * 32 + a] += 1.0;
                    total += 2.0;
                }
            }
        }
        for (p, q) in c.probabilities().iter().zip(&counts) {
            assert!((p - q / total).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn moments_match_oracle(values in proptest::collection::vec(0u8..=255, 2..80)) {
            let w = values.len();
            let g = Raster::new(w, 1, 1, values.clone()).unwrap();
            let f = intensity_features(&g, &whole_mask(w, 1), 1).unwrap();
            let want = oracle_moments(&values.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
            for (got, w) in f.as_array().iter().zip(want) {
                prop_assert!((got - w).abs() <= 1e-9 * w.abs().max(1.0));
            }
        }

        #[test]
        fn texture_matches_double_sum(raw in proptest::collection::vec(0.0f64..1.0, 64)) {
            // Symmetrize and normalize an arbitrary 8x8 matrix.
            let mut p = vec![0.0; 64];
            for i in 0..8 {
                for j in 0..8 {
                    p[i * 8 + j] = raw[i * 8 + j] + raw[j * 8 + i] + 1e-3;
                }
            }
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            let g = Glcm::from_probabilities(8, p.clone()).unwrap();
            let t = texture_features(&g);
            let mut o = [0.0; 4];
            for i in 0..8 {
                for j in 0..8 {
                    let v = p[i * 8 + j];
                    let d = i as f64 - j as f64;
                    o[0] += v * d.powi(2);
                    o[1] += v * d.abs();
                    o[2] += v / (1.0 + d.powi(2));
                    o[3] += v.powi(2);
                }
            }
            o[3] = o[3].sqrt();
            for (got, w) in t.as_array().iter().zip(o) {
                prop_assert!((got - w).abs() <= 1e-12);
            }
            prop_assert!(t.energy > 0.0 && t.energy <= 1.0);
            prop_assert!(t.homogeneity > 0.0 && t.homogeneity <= 1.0);
        }
    }
}
