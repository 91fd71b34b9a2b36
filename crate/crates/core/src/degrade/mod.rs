//! Synthetic degradation: blur kernels, convolution, sensor-style noise,
//! JPEG compression and seeded multi-stage recipes that turn a
//! high-resolution image into its low-resolution counterpart.

mod jpeg;
mod recipe;

pub use jpeg::{
    jpeg_roundtrip, quality_scale, scaled_table, CHROMA_QUANT_TABLE, LUMA_QUANT_TABLE,
};
pub use recipe::{
    apply_recipe, codeformer_recipe, realesrgan_recipe, replay, DegradationRecipe, DegradedPair,
    IntRange, Range, ResizeMode, Stage, StageTrace,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::raster::{quantize, quantize_unit, reflect101, Raster};

/// Square, odd-sized, nonnegative filter whose weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel {
    /// Normalizes `weights` to unit sum.
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if weights.len() != size * size {
            return Err(Error::InvalidParameter(format!(
                "kernel of size {size} needs {} weights, got {}",
                size * size,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParameter(
                "kernel weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("kernel weights sum to zero".into()));
        }
        Ok(Self {
            size,
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn identity() -> Self {
        Self {
            size: 1,
            weights: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset (dx, dy) from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius() as isize;
        self.weights[((dy + r) as usize) * self.size + (dx + r) as usize]
    }

    /// Row/column factors if the kernel is an outer product.
    fn separable_factors(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.size;
        let (pivot_row, pivot_col) = (0..n * n)
            .max_by(|&a, &b| self.weights[a].total_cmp(&self.weights[b]))
            .map(|i| (i / n, i % n))?;
        let pivot = self.weights[pivot_row * n + pivot_col];
        let col: Vec<f64> = (0..n).map(|y| self.weights[y * n + pivot_col]).collect();
        let row: Vec<f64> = (0..n)
            .map(|x| self.weights[pivot_row * n + x] / pivot)
            .collect();
        for y in 0..n {
            for x in 0..n {
                let w = self.weights[y * n + x];
                if (w - col[y] * row[x]).abs() > 1e-15 {
                    return None;
                }
            }
        }
        Some((row, col))
    }
}

/// Rotated anisotropic Gaussian sampled at pixel centers.
pub fn gaussian_kernel(sigma_x: f64, sigma_y: f64, theta: f64, size: usize) -> Result<Kernel> {
    if !(sigma_x > 0.0 && sigma_y > 0.0) || !sigma_x.is_finite() || !sigma_y.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigmas must be positive, got ({sigma_x}, {sigma_y})"
        )));
    }
    if size % 2 == 0 || size < 3 {
        return Err(Error::InvalidParameter(format!(
            "gaussian kernel size must be odd and >= 3, got {size}"
        )));
    }
    // Inverse covariance of R diag(sx^2, sy^2) R^T.
    let (s, c) = theta.sin_cos();
    let (ix, iy) = (1.0 / (sigma_x * sigma_x), 1.0 / (sigma_y * sigma_y));
    let a = c * c * ix + s * s * iy;
    let b = c * s * (ix - iy);
    let d = s * s * ix + c * c * iy;
    let r = (size / 2) as isize;
    let mut weights = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            let (x, y) = (x as f64, y as f64);
            weights.push((-0.5 * (a * x * x + 2.0 * b * x * y + d * y * y)).exp());
        }
    }
    Kernel::new(size, weights)
}

/// Isotropic Gaussian with a support of `2 * ceil(3 sigma) + 1`; `sigma == 0` is the identity.
pub fn isotropic_gaussian(sigma: f64) -> Result<Kernel> {
    if sigma == 0.0 {
        return Ok(Kernel::identity());
    }
    let size = 2 * (3.0 * sigma).ceil().max(1.0) as usize + 1;
    gaussian_kernel(sigma, sigma, 0.0, size)
}

/// Uniform `(2r+1)^2` kernel.
pub fn box_kernel(radius: i64) -> Result<Kernel> {
    if radius < 0 {
        return Err(Error::InvalidParameter(format!(
            "box radius must be >= 0, got {radius}"
        )));
    }
    let size = 2 * radius as usize + 1;
    Kernel::new(size, vec![1.0; size * size])
}

/// Per-channel 2-D correlation on a float plane with reflect-101 borders.
pub(crate) fn correlate_plane(plane: &[f64], w: usize, h: usize, k: &Kernel) -> Vec<f64> {
    let r = k.radius() as isize;
    if let Some((row, col)) = k.separable_factors() {
        let mut tmp = vec![0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, wt) in row.iter().enumerate() {
                    let sx = reflect101(x as isize + i as isize - r, w);
                    acc += wt * plane[y * w + sx];
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0f64; w * h];
        for y in 0..h {
            for (i, wt) in col.iter().enumerate() {
                let sy = reflect101(y as isize + i as isize - r, h);
                let src = &tmp[sy * w..(sy + 1) * w];
                for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src) {
                    *o += wt * s;
                }
            }
        }
        return out;
    }
    let xs: Vec<Vec<usize>> = (0..w)
        .map(|x| (-r..=r).map(|d| reflect101(x as isize + d, w)).collect())
        .collect();
    let mut out = vec![0f64; w * h];
    for y in 0..h {
        for ky in 0..k.size {
            let sy = reflect101(y as isize + ky as isize - r, h);
            let wrow = &k.weights[ky * k.size..(ky + 1) * k.size];
            let src = &plane[sy * w..(sy + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (wt, &sx) in wrow.iter().zip(&xs[x]) {
                    acc += wt * src[sx];
                }
                out[y * w + x] += acc;
            }
        }
    }
    out
}

/// Convolve each channel with `k` (correlation form), reflect-101 borders.
pub fn convolve(r: &Raster, k: &Kernel) -> Raster {
    if k.size == 1 {
        return r.clone();
    }
    let (w, h, c) = (r.width(), r.height(), r.channels());
    let mut out = vec![0u8; w * h * c];
    for ch in 0..c {
        let filtered = correlate_plane(&r.channel_plane(ch), w, h, k);
        for (i, v) in filtered.into_iter().enumerate() {
            out[i * c + ch] = quantize(v);
        }
    }
    Raster::new(w, h, c, out).expect("shape preserved")
}

/// Adds i.i.d. N(0, sigma^2) on the unit scale, clamped and re-quantized.
pub fn add_gaussian_noise(r: &Raster, sigma: f64, seed: u64) -> Result<Raster> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(r.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let data = r
        .data()
        .iter()
        .map(|&v| quantize_unit((f64::from(v) / 255.0 + normal.sample(&mut rng)).clamp(0.0, 1.0)))
        .collect();
    Raster::new(r.width(), r.height(), r.channels(), data)
}

/// Shot noise: each unit-scale sample becomes `Poisson(v * peak) / peak`.
pub fn add_poisson_noise(r: &Raster, peak: f64, seed: u64) -> Result<Raster> {
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "poisson peak must be > 0, got {peak}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = r
        .data()
        .iter()
        .map(|&v| {
            let lambda = f64::from(v) / 255.0 * peak;
            if lambda <= 0.0 {
                return 0;
            }
            let count: f64 = Poisson::new(lambda).expect("positive rate").sample(&mut rng);
            quantize_unit((count / peak).clamp(0.0, 1.0))
        })
        .collect();
    Raster::new(r.width(), r.height(), r.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lcg_raster(w: usize, h: usize, c: usize, seed: u64) -> Raster {
        let mut s = seed;
        Raster::from_fn(w, h, c, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 56) as u8
        })
        .unwrap()
    }

    /// Nested-loop correlation with explicit mirror indexing.
    fn brute_convolve(r: &Raster, k: &Kernel) -> Raster {
        let mirror = |i: i64, n: i64| -> usize {
            let mut i = i;
            while i < 0 || i >= n {
                if i < 0 {
                    i = -i;
                }
                if i >= n {
                    i = 2 * (n - 1) - i;
                }
            }
            i as usize
        };
        let rad = k.radius() as i64;
        Raster::from_fn(r.width(), r.height(), r.channels(), |x, y, c| {
            let mut acc = 0.0;
            for dy in -rad..=rad {
                for dx in -rad..=rad {
                    let sx = mirror(x as i64 + dx, r.width() as i64);
                    let sy = mirror(y as i64 + dy, r.height() as i64);
                    acc += k.at(dx as isize, dy as isize) * f64::from(r.get(sx, sy, c));
                }
            }
            acc.round().clamp(0.0, 255.0) as u8
        })
        .unwrap()
    }

    #[test]
    fn isotropic_kernel_is_symmetric_with_center_peak() {
        let k = gaussian_kernel(1.3, 1.3, 0.0, 7).unwrap();
        let r = 3;
        for dy in -r..=r {
            for dx in -r..=r {
                let w = k.at(dx, dy);
                assert!((w - k.at(-dx, dy)).abs() < 1e-15);
                assert!((w - k.at(dx, -dy)).abs() < 1e-15);
                assert!((w - k.at(dy, dx)).abs() < 1e-15);
                assert!(w <= k.at(0, 0));
            }
        }
    }

    #[test]
    fn anisotropic_kernel_is_pi_periodic() {
        let a = gaussian_kernel(2.0, 0.5, PI / 4.0, 9).unwrap();
        let b = gaussian_kernel(2.0, 0.5, PI / 4.0 + PI, 9).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_errors() {
        assert!(gaussian_kernel(1.0, 1.0, 0.0, 4).is_err());
        assert!(gaussian_kernel(0.0, 1.0, 0.0, 5).is_err());
        assert!(gaussian_kernel(1.0, -1.0, 0.0, 5).is_err());
        assert!(box_kernel(-1).is_err());
    }

    #[test]
    fn box_kernels() {
        let k0 = box_kernel(0).unwrap();
        assert_eq!((k0.size(), k0.weights()), (1, &[1.0][..]));
        let k1 = box_kernel(1).unwrap();
        assert_eq!(k1.size(), 3);
        assert!(k1.weights().iter().all(|&w| (w - 1.0 / 9.0).abs() < 1e-15));
        let flat = Raster::filled(6, 5, 3, 143).unwrap();
        for r in 0..5 {
            assert_eq!(convolve(&flat, &box_kernel(r).unwrap()), flat);
        }
    }

    #[test]
    fn identity_and_constant_convolution() {
        let r = lcg_raster(8, 8, 3, 4);
        assert_eq!(convolve(&r, &Kernel::identity()), r);
        let delta = Kernel::new(3, vec![0., 0., 0., 0., 1., 0., 0., 0., 0.]).unwrap();
        assert_eq!(convolve(&r, &delta), r);
        let flat = Raster::filled(8, 8, 1, 77).unwrap();
        let k = gaussian_kernel(2.0, 0.7, 0.4, 21).unwrap();
        assert_eq!(convolve(&flat, &k), flat);
    }

    #[test]
    fn convolution_matches_brute_force() {
        for seed in 0..8u64 {
            let r = lcg_raster(8, 8, if seed % 2 == 0 { 1 } else { 3 }, seed);
            let kernels = [
                box_kernel(1).unwrap(),
                gaussian_kernel(1.0, 1.0, 0.0, 3).unwrap(),
                gaussian_kernel(2.0, 0.6, 0.9, 5).unwrap(),
                gaussian_kernel(3.0, 3.0, 0.0, 21).unwrap(),
                Kernel::new(3, (1..=9).map(f64::from).collect()).unwrap(),
            ];
            for k in &kernels {
                let fast = convolve(&r, k);
                let slow = brute_convolve(&r, k);
                let worst = fast
                    .data()
                    .iter()
                    .zip(slow.data())
                    .map(|(a, b)| a.abs_diff(*b))
                    .max()
                    .unwrap();
                assert!(worst <= 1, "seed {seed} kernel {} diff {worst}", k.size());
            }
        }
    }

    #[test]
    fn gaussian_noise_properties() {
        let r = lcg_raster(16, 16, 3, 1);
        assert_eq!(add_gaussian_noise(&r, 0.0, 5).unwrap(), r);
        assert_eq!(
            add_gaussian_noise(&r, 0.05, 5).unwrap(),
            add_gaussian_noise(&r, 0.05, 5).unwrap()
        );
        assert!(add_gaussian_noise(&r, -0.1, 5).is_err());

        let gray = Raster::filled(256, 256, 1, 128).unwrap();
        let noisy = add_gaussian_noise(&gray, 0.1, 42).unwrap();
        let diffs: Vec<f64> = noisy
            .data()
            .iter()
            .map(|&v| (f64::from(v) - 128.0) / 255.0)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((std - 0.1).abs() <= 0.005, "std {std}");
    }

    #[test]
    fn poisson_noise_properties() {
        let black = Raster::filled(8, 8, 3, 0).unwrap();
        assert_eq!(add_poisson_noise(&black, 30.0, 3).unwrap(), black);
        let r = lcg_raster(32, 32, 3, 2);
        let hi = add_poisson_noise(&r, 1e6, 11).unwrap();
        let worst = hi
            .data()
            .iter()
            .zip(r.data())
            .map(|(a, b)| a.abs_diff(*b))
            .max()
            .unwrap();
        assert!(worst <= 2, "worst {worst}");
        assert_eq!(
            add_poisson_noise(&r, 50.0, 9).unwrap(),
            add_poisson_noise(&r, 50.0, 9).unwrap()
        );
        assert!(add_poisson_noise(&r, 0.0, 9).is_err());
    }

    proptest! {
        #[test]
        fn gaussian_kernels_are_normalized(
            sx in 0.1f64..6.0,
            sy in 0.1f64..6.0,
            theta in 0.0f64..6.3,
            half in 1usize..12,
        ) {
            let k = gaussian_kernel(sx, sy, theta, 2 * half + 1).unwrap();
            let sum: f64 = k.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn box_kernels_are_normalized(r in 0i64..15) {
            let sum: f64 = box_kernel(r).unwrap().weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
        }
    }
}
