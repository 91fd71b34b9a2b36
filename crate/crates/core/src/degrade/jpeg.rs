//! Baseline JPEG compression loss, simulated in memory.
//!
//! Only the lossy part of the codec is modelled: JFIF color conversion,
//! 4:2:0 chroma subsampling, 8x8 DCT and table quantization. Entropy coding
//! is lossless, so an encode/decode round trip through a real file yields
//! the same samples up to the decoder's IDCT precision.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::raster::{quantize, Raster};

/// ITU T.81 Annex K luminance table, natural (row-major) order.
#[rustfmt::skip]
pub const LUMA_QUANT_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// ITU T.81 Annex K chrominance table, natural (row-major) order.
#[rustfmt::skip]
pub const CHROMA_QUANT_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
];

fn check_quality(quality: u8) -> Result<()> {
    if (1..=100).contains(&quality) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "jpeg quality must be in 1..=100, got {quality}"
        )))
    }
}

/// IJG percentage scale for a quality setting.
pub fn quality_scale(quality: u8) -> Result<u32> {
    check_quality(quality)?;
    let q = u32::from(quality);
    Ok(if q < 50 { 5000 / q } else { 200 - 2 * q })
}

/// Scale a base table with the IJG rule, clamping entries to 1..=255.
pub fn scaled_table(base: &[u16; 64], quality: u8) -> Result<[u16; 64]> {
    let scale = quality_scale(quality)?;
    let mut out = [0u16; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        *o = ((u32::from(b) * scale + 50) / 100).clamp(1, 255) as u16;
    }
    Ok(out)
}

/// `basis[u][x] = C(u)/2 * cos((2x + 1) u pi / 16)`.
fn dct_basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let cu = if u == 0 { 1.0 / 2f64.sqrt() } else { 1.0 };
            for (x, v) in row.iter_mut().enumerate() {
                *v = 0.5 * cu * (((2 * x + 1) as f64 * u as f64 * PI) / 16.0).cos();
            }
        }
        b
    })
}

fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let b = dct_basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Quantize/dequantize every 8x8 block of a plane whose sides are multiples of 8.
fn compress_plane(plane: &mut [f64], w: usize, h: usize, table: &[u16; 64]) {
    debug_assert!(w % 8 == 0 && h % 8 == 0);
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let mut block = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = plane[(by + y) * w + bx + x] - 128.0;
                }
            }
            let mut coef = fdct(&block);
            for (c, &q) in coef.iter_mut().zip(table) {
                let q = f64::from(q);
                *c = (*c / q).round() * q;
            }
            let rec = idct(&coef);
            for y in 0..8 {
                for x in 0..8 {
                    plane[(by + y) * w + bx + x] = (rec[y * 8 + x] + 128.0).clamp(0.0, 255.0);
                }
            }
        }
    }
}

/// Copy a plane into a larger one, replicating the last row/column.
fn pad_edge(plane: &[f64], w: usize, h: usize, pw: usize, ph: usize) -> Vec<f64> {
    let mut out = vec![0.0; pw * ph];
    for y in 0..ph {
        let sy = y.min(h - 1);
        for x in 0..pw {
            out[y * pw + x] = plane[sy * w + x.min(w - 1)];
        }
    }
    out
}

fn round_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

/// Encode-then-decode at the given quality; RGB input uses 4:2:0 chroma.
pub fn jpeg_roundtrip(r: &Raster, quality: u8) -> Result<Raster> {
    let luma_table = scaled_table(&LUMA_QUANT_TABLE, quality)?;
    let chroma_table = scaled_table(&CHROMA_QUANT_TABLE, quality)?;
    let (w, h) = (r.width(), r.height());

    if r.is_gray() {
        let (pw, ph) = (round_up(w, 8), round_up(h, 8));
        let mut y = pad_edge(&r.channel_plane(0), w, h, pw, ph);
        compress_plane(&mut y, pw, ph, &luma_table);
        let out: Vec<u8> = (0..h)
            .flat_map(|row| (0..w).map(move |col| (row, col)))
            .map(|(row, col)| quantize(y[row * pw + col]))
            .collect();
        return Raster::new(w, h, 1, out);
    }

    let (pw, ph) = (round_up(w, 16), round_up(h, 16));
    let src = r.to_f64();
    let mut yp = vec![0.0; w * h];
    let mut cb = vec![0.0; w * h];
    let mut cr = vec![0.0; w * h];
    for (i, px) in src.chunks_exact(3).enumerate() {
        let (rr, gg, bb) = (px[0], px[1], px[2]);
        yp[i] = 0.299 * rr + 0.587 * gg + 0.114 * bb;
        cb[i] = -0.168_736 * rr - 0.331_264 * gg + 0.5 * bb + 128.0;
        cr[i] = 0.5 * rr - 0.418_688 * gg - 0.081_312 * bb + 128.0;
    }
    let mut yp = pad_edge(&yp, w, h, pw, ph);
    let cb = pad_edge(&cb, w, h, pw, ph);
    let cr = pad_edge(&cr, w, h, pw, ph);

    let (cw, chh) = (pw / 2, ph / 2);
    let subsample = |plane: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; cw * chh];
        for y in 0..chh {
            for x in 0..cw {
                let (sx, sy) = (2 * x, 2 * y);
                out[y * cw + x] = 0.25
                    * (plane[sy * pw + sx]
                        + plane[sy * pw + sx + 1]
                        + plane[(sy + 1) * pw + sx]
                        + plane[(sy + 1) * pw + sx + 1]);
            }
        }
        out
    };
    let mut cb = subsample(&cb);
    let mut cr = subsample(&cr);

    compress_plane(&mut yp, pw, ph, &luma_table);
    compress_plane(&mut cb, cw, chh, &chroma_table);
    compress_plane(&mut cr, cw, chh, &chroma_table);

    let mut out = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let l = yp[y * pw + x];
            let b = cb[(y / 2) * cw + x / 2] - 128.0;
            let rr = cr[(y / 2) * cw + x / 2] - 128.0;
            out.push(quantize(l + 1.402 * rr));
            out.push(quantize(l - 0.344_136 * b - 0.714_136 * rr));
            out.push(quantize(l + 1.772 * b));
        }
    }
    Raster::new(w, h, 3, out)
}
