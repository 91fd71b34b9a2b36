use crate::error::{Error, Result};
use crate::raster::Raster;

fn channel_stats(values: &[f64], channels: usize, c: usize) -> (f64, f64) {
    let plane: Vec<f64> = values.iter().skip(c).step_by(channels).copied().collect();
    super::moments(&plane)
}

/// Per-channel affine match of interleaved `sample` to `reference` statistics.
///
/// A constant reference channel maps the whole output channel to its mean,
/// as does a constant sample channel.
pub fn color_fix_values(sample: &[f64], reference: &[f64], channels: usize) -> Result<Vec<f64>> {
    if channels == 0 || sample.len() != reference.len() || sample.len() % channels != 0 {
        return Err(Error::DimensionMismatch(format!(
            "color fix of {} values against {} with {channels} channels",
            sample.len(),
            reference.len()
        )));
    }
    let mut out = sample.to_vec();
    for c in 0..channels {
        let (sm, ss) = channel_stats(sample, channels, c);
        let (rm, rs) = channel_stats(reference, channels, c);
        for v in out.iter_mut().skip(c).step_by(channels) {
            *v = if rs == 0.0 || ss == 0.0 {
                rm
            } else {
                (*v - sm) / ss * rs + rm
            };
        }
    }
    Ok(out)
}

/// Match each RGB channel's mean and std to the reference.
pub fn color_fix(sample: &Raster, reference: &Raster) -> Result<Raster> {
    sample.check_same_shape(reference)?;
    if sample.channels() != 3 {
        return Err(Error::InvalidParameter("color fix expects RGB rasters".into()));
    }
    let fixed = color_fix_values(&sample.to_f64(), &reference.to_f64(), 3)?;
    Raster::from_f64(sample.width(), sample.height(), 3, &fixed)
}
