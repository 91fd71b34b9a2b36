//! Seeded degradation recipes and their replayable traces.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    add_gaussian_noise, add_poisson_noise, box_kernel, convolve, gaussian_kernel, jpeg_roundtrip,
};
use crate::error::{Error, Result};
use crate::raster::{resize_bicubic, resize_nearest, Raster};

/// Closed real interval, serialized as `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{what} range [{}, {}] is empty or non-finite",
                self.min, self.max
            )))
        }
    }

    fn sample(&self, stream: &mut ParamStream) -> f64 {
        self.min + stream.unit() * (self.max - self.min)
    }
}

impl From<[f64; 2]> for Range {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.min, r.max]
    }
}

/// Closed integer interval, serialized as `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
}

impl IntRange {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    fn sample(&self, stream: &mut ParamStream) -> u32 {
        let span = u64::from(self.max - self.min) + 1;
        self.min + ((stream.unit() * span as f64) as u64).min(span - 1) as u32
    }
}

impl From<[u32; 2]> for IntRange {
    fn from(v: [u32; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<IntRange> for [u32; 2] {
    fn from(r: IntRange) -> Self {
        [r.min, r.max]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMode {
    Bicubic,
    Nearest,
}

impl ResizeMode {
    fn apply(self, r: &Raster, w: usize, h: usize) -> Result<Raster> {
        match self {
            ResizeMode::Bicubic => resize_bicubic(r, w, h),
            ResizeMode::Nearest => resize_nearest(r, w, h),
        }
    }
}

fn default_probability() -> f64 {
    1.0
}

/// One step of a recipe, with the ranges its parameters are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    /// Rotated Gaussian blur. A sampled sigma of 0 leaves the image unchanged.
    GaussianBlur {
        sigma: Range,
        anisotropic_prob: f64,
        theta: Range,
        kernel_size: usize,
    },
    BoxBlur { radius: IntRange },
    /// Resize to `hr_dims / factor`, factor drawn from `scale`.
    Resize { scale: Range, modes: Vec<ResizeMode> },
    /// Resize to the exact low-resolution target `hr_dims / s`.
    ResizeToTarget { modes: Vec<ResizeMode> },
    GaussianNoise {
        sigma: Range,
        #[serde(default = "default_probability")]
        probability: f64,
    },
    PoissonNoise {
        peak: Range,
        #[serde(default = "default_probability")]
        probability: f64,
    },
    Jpeg { quality: IntRange },
}

/// Parameters actually used by one applied stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StageTrace {
    GaussianBlur {
        sigma_x: f64,
        sigma_y: f64,
        theta: f64,
        kernel_size: usize,
    },
    BoxBlur { radius: u32 },
    Resize {
        width: usize,
        height: usize,
        mode: ResizeMode,
    },
    GaussianNoise { sigma: f64, seed: u64 },
    PoissonNoise { peak: f64, seed: u64 },
    Jpeg { quality: u8 },
    Skipped { stage: String },
}

impl StageTrace {
    fn apply(&self, r: &Raster) -> Result<Raster> {
        match *self {
            StageTrace::GaussianBlur {
                sigma_x,
                sigma_y,
                theta,
                kernel_size,
            } => {
                if sigma_x <= 0.0 || sigma_y <= 0.0 {
                    Ok(r.clone())
                } else {
                    Ok(convolve(r, &gaussian_kernel(sigma_x, sigma_y, theta, kernel_size)?))
                }
            }
            StageTrace::BoxBlur { radius } => Ok(convolve(r, &box_kernel(i64::from(radius))?)),
            StageTrace::Resize {
                width,
                height,
                mode,
            } => mode.apply(r, width, height),
            StageTrace::GaussianNoise { sigma, seed } => add_gaussian_noise(r, sigma, seed),
            StageTrace::PoissonNoise { peak, seed } => add_poisson_noise(r, peak, seed),
            StageTrace::Jpeg { quality } => jpeg_roundtrip(r, quality),
            StageTrace::Skipped { .. } => Ok(r.clone()),
        }
    }
}

/// Ordered degradation stages, run `repeat_count` times (2 = second order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationRecipe {
    pub name: String,
    pub stages: Vec<Stage>,
    pub repeat_count: u8,
}

/// A high/low resolution pair with everything needed to regenerate `lr`.
#[derive(Clone, Debug)]
pub struct DegradedPair {
    pub hr: Raster,
    pub lr: Raster,
    pub trace: Vec<StageTrace>,
    pub seed: u64,
}

/// Counter-based parameter stream: ChaCha keyed by the seed, one stream per stage.
struct ParamStream(ChaCha8Rng);

impl ParamStream {
    fn new(seed: u64, stage_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stage_index);
        Self(rng)
    }

    /// Uniform in [0, 1) with 53 random bits.
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn pick<T: Copy>(&mut self, options: &[T]) -> T {
        let i = ((self.unit() * options.len() as f64) as usize).min(options.len() - 1);
        options[i]
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} probability must be in [0, 1], got {p}"
        )))
    }
}

fn check_modes(modes: &[ResizeMode]) -> Result<()> {
    if modes.is_empty() {
        Err(Error::InvalidParameter("resize mode set is empty".into()))
    } else {
        Ok(())
    }
}

impl Stage {
    fn validate(&self) -> Result<()> {
        match self {
            Stage::GaussianBlur {
                sigma,
                anisotropic_prob,
                theta,
                kernel_size,
            } => {
                sigma.check("blur sigma")?;
                theta.check("blur theta")?;
                check_probability(*anisotropic_prob, "anisotropic")?;
                if sigma.min < 0.0 {
                    return Err(Error::InvalidParameter("blur sigma must be >= 0".into()));
                }
                if kernel_size % 2 == 0 || *kernel_size < 3 {
                    return Err(Error::InvalidParameter(format!(
                        "blur kernel size must be odd and >= 3, got {kernel_size}"
                    )));
                }
            }
            Stage::BoxBlur { radius } => {
                if radius.min > radius.max {
                    return Err(Error::InvalidParameter("box radius range is empty".into()));
                }
            }
            Stage::Resize { scale, modes } => {
                scale.check("resize scale")?;
                if scale.min < 1.0 {
                    return Err(Error::InvalidParameter(
                        "resize factors must be >= 1 (downscaling)".into(),
                    ));
                }
                check_modes(modes)?;
            }
            Stage::ResizeToTarget { modes } => check_modes(modes)?,
            Stage::GaussianNoise { sigma, probability } => {
                sigma.check("noise sigma")?;
                check_probability(*probability, "gaussian noise")?;
                if sigma.min < 0.0 {
                    return Err(Error::InvalidParameter("noise sigma must be >= 0".into()));
                }
            }
            Stage::PoissonNoise { peak, probability } => {
                peak.check("poisson peak")?;
                check_probability(*probability, "poisson noise")?;
                if peak.min <= 0.0 {
                    return Err(Error::InvalidParameter("poisson peak must be > 0".into()));
                }
            }
            Stage::Jpeg { quality } => {
                if quality.min < 1 || quality.max > 100 || quality.min > quality.max {
                    return Err(Error::InvalidParameter(format!(
                        "jpeg quality range [{}, {}] must lie in 1..=100",
                        quality.min, quality.max
                    )));
                }
            }
        }
        Ok(())
    }

    fn name(&self) -> &'static str {
        match self {
            Stage::GaussianBlur { .. } => "gaussian_blur",
            Stage::BoxBlur { .. } => "box_blur",
            Stage::Resize { .. } => "resize",
            Stage::ResizeToTarget { .. } => "resize_to_target",
            Stage::GaussianNoise { .. } => "gaussian_noise",
            Stage::PoissonNoise { .. } => "poisson_noise",
            Stage::Jpeg { .. } => "jpeg",
        }
    }

    /// Draw concrete parameters. Every branch consumes a fixed number of draws.
    fn sample(
        &self,
        stream: &mut ParamStream,
        hr_dims: (usize, usize),
        target: (usize, usize),
    ) -> StageTrace {
        match self {
            Stage::GaussianBlur {
                sigma,
                anisotropic_prob,
                theta,
                kernel_size,
            } => {
                let aniso = stream.unit() < *anisotropic_prob;
                let sx = sigma.sample(stream);
                let sy = sigma.sample(stream);
                let th = theta.sample(stream);
                if aniso {
                    StageTrace::GaussianBlur {
                        sigma_x: sx,
                        sigma_y: sy,
                        theta: th,
                        kernel_size: *kernel_size,
                    }
                } else {
                    StageTrace::GaussianBlur {
                        sigma_x: sx,
                        sigma_y: sx,
                        theta: 0.0,
                        kernel_size: *kernel_size,
                    }
                }
            }
            Stage::BoxBlur { radius } => StageTrace::BoxBlur {
                radius: radius.sample(stream),
            },
            Stage::Resize { scale, modes } => {
                let factor = scale.sample(stream);
                let mode = stream.pick(modes);
                let dim = |d: usize| ((d as f64 / factor).round() as usize).max(1);
                StageTrace::Resize {
                    width: dim(hr_dims.0),
                    height: dim(hr_dims.1),
                    mode,
                }
            }
            Stage::ResizeToTarget { modes } => StageTrace::Resize {
                width: target.0,
                height: target.1,
                mode: stream.pick(modes),
            },
            Stage::GaussianNoise { sigma, probability } => {
                let apply = stream.unit() < *probability;
                let s = sigma.sample(stream);
                let seed = stream.u64();
                if apply {
                    StageTrace::GaussianNoise { sigma: s, seed }
                } else {
                    StageTrace::Skipped {
                        stage: self.name().into(),
                    }
                }
            }
            Stage::PoissonNoise { peak, probability } => {
                let apply = stream.unit() < *probability;
                let p = peak.sample(stream);
                let seed = stream.u64();
                if apply {
                    StageTrace::PoissonNoise { peak: p, seed }
                } else {
                    StageTrace::Skipped {
                        stage: self.name().into(),
                    }
                }
            }
            Stage::Jpeg { quality } => StageTrace::Jpeg {
                quality: quality.sample(stream) as u8,
            },
        }
    }
}

impl DegradationRecipe {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.repeat_count) {
            return Err(Error::InvalidParameter(format!(
                "repeat_count must be 1 or 2, got {}",
                self.repeat_count
            )));
        }
        if self.stages.is_empty() {
            return Err(Error::InvalidParameter("recipe has no stages".into()));
        }
        self.stages.iter().try_for_each(Stage::validate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let recipe: Self = serde_json::from_str(text).map_err(|e| Error::Json {
            context: "degradation recipe".into(),
            message: e.to_string(),
        })?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("recipe serializes")
    }

    /// Look up a built-in recipe by name.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "realesrgan" => Some(realesrgan_recipe()),
            "codeformer" => Some(codeformer_recipe()),
            _ => None,
        }
    }
}

const DEFAULT_SIGMA: Range = Range::new(0.2, 3.0);
const DEFAULT_NOISE: Range = Range::new(0.0, 25.0 / 255.0);
const DEFAULT_PEAK: Range = Range::new(60.0, 300.0);
const DEFAULT_QUALITY: IntRange = IntRange::new(30, 95);
const DEFAULT_DOWNSCALE: Range = Range::new(1.0, 4.0);
const KERNEL_SIZE: usize = 21;

/// Second-order blur -> resize -> noise -> JPEG, applied twice.
pub fn realesrgan_recipe() -> DegradationRecipe {
    DegradationRecipe {
        name: "realesrgan".into(),
        stages: vec![
            Stage::GaussianBlur {
                sigma: DEFAULT_SIGMA,
                anisotropic_prob: 0.5,
                theta: Range::new(0.0, std::f64::consts::PI),
                kernel_size: KERNEL_SIZE,
            },
            Stage::Resize {
                scale: DEFAULT_DOWNSCALE,
                modes: vec![ResizeMode::Bicubic, ResizeMode::Nearest],
            },
            Stage::GaussianNoise {
                sigma: DEFAULT_NOISE,
                probability: 0.5,
            },
            Stage::PoissonNoise {
                peak: DEFAULT_PEAK,
                probability: 0.5,
            },
            Stage::Jpeg {
                quality: DEFAULT_QUALITY,
            },
        ],
        repeat_count: 2,
    }
}

/// Single-pass blur -> resize -> noise -> JPEG -> resize to the target grid.
pub fn codeformer_recipe() -> DegradationRecipe {
    DegradationRecipe {
        name: "codeformer".into(),
        stages: vec![
            Stage::GaussianBlur {
                sigma: DEFAULT_SIGMA,
                anisotropic_prob: 0.0,
                theta: Range::new(0.0, 0.0),
                kernel_size: KERNEL_SIZE,
            },
            Stage::Resize {
                scale: DEFAULT_DOWNSCALE,
                modes: vec![ResizeMode::Bicubic],
            },
            Stage::GaussianNoise {
                sigma: DEFAULT_NOISE,
                probability: 1.0,
            },
            Stage::Jpeg {
                quality: DEFAULT_QUALITY,
            },
            Stage::ResizeToTarget {
                modes: vec![ResizeMode::Bicubic],
            },
        ],
        repeat_count: 1,
    }
}

/// Run a recipe on `hr`, producing an LR image of exactly `hr / scale`.
///
/// Stage `j` of pass `p` draws its parameters from the ChaCha stream
/// `p * stages.len() + j` under `seed`, so results do not depend on which
/// thread runs them. If the last stage leaves the image at another size, a
/// bicubic resize to the target is appended to the trace.
pub fn apply_recipe(
    hr: &Raster,
    recipe: &DegradationRecipe,
    scale: usize,
    seed: u64,
) -> Result<DegradedPair> {
    recipe.validate()?;
    if scale == 0 || hr.width() % scale != 0 || hr.height() % scale != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not divisible by scale {scale}",
            hr.width(),
            hr.height()
        )));
    }
    let hr_dims = (hr.width(), hr.height());
    let target = (hr.width() / scale, hr.height() / scale);
    let mut trace = Vec::new();
    let mut img = hr.clone();
    for pass in 0..usize::from(recipe.repeat_count) {
        for (j, stage) in recipe.stages.iter().enumerate() {
            let index = (pass * recipe.stages.len() + j) as u64;
            let mut stream = ParamStream::new(seed, index);
            let step = stage.sample(&mut stream, hr_dims, target);
            img = step.apply(&img)?;
            trace.push(step);
        }
    }
    if (img.width(), img.height()) != target {
        let step = StageTrace::Resize {
            width: target.0,
            height: target.1,
            mode: ResizeMode::Bicubic,
        };
        img = step.apply(&img)?;
        trace.push(step);
    }
    Ok(DegradedPair {
        hr: hr.clone(),
        lr: img,
        trace,
        seed,
    })
}

/// Re-apply a recorded trace.
pub fn replay(hr: &Raster, trace: &[StageTrace]) -> Result<Raster> {
    trace.iter().try_fold(hr.clone(), |img, step| step.apply(&img))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> Raster {
        Raster::from_fn(w, h, 3, |x, y, c| {
            (((x * 7 + y * 13 + c * 29) ^ (x * y)) % 256) as u8
        })
        .unwrap()
    }

    #[test]
    fn degenerate_recipe_is_resize_only() {
        let recipe = DegradationRecipe {
            name: "noop".into(),
            stages: vec![
                Stage::GaussianBlur {
                    sigma: Range::new(0.0, 0.0),
                    anisotropic_prob: 0.0,
                    theta: Range::new(0.0, 0.0),
                    kernel_size: 3,
                },
                Stage::Resize {
                    scale: Range::new(4.0, 4.0),
                    modes: vec![ResizeMode::Bicubic],
                },
                Stage::GaussianNoise {
                    sigma: Range::new(0.0, 0.0),
                    probability: 1.0,
                },
            ],
            repeat_count: 1,
        };
        let hr = textured(32, 24);
        let pair = apply_recipe(&hr, &recipe, 4, 7).unwrap();
        assert_eq!(pair.lr, resize_bicubic(&hr, 8, 6).unwrap());
    }

    #[test]
    fn replay_is_bit_identical() {
        let hr = textured(64, 64);
        for recipe in [realesrgan_recipe(), codeformer_recipe()] {
            let pair = apply_recipe(&hr, &recipe, 4, 1234).unwrap();
            assert_eq!(replay(&hr, &pair.trace).unwrap(), pair.lr);
            let again = apply_recipe(&hr, &recipe, 4, 1234).unwrap();
            assert_eq!(again.lr, pair.lr);
            assert_eq!(again.trace, pair.trace);
            let json = serde_json::to_string(&pair.trace).unwrap();
            let parsed: Vec<StageTrace> = serde_json::from_str(&json).unwrap();
            assert_eq!(replay(&hr, &parsed).unwrap(), pair.lr);
        }
    }

    #[test]
    fn preset_structure() {
        let r = realesrgan_recipe();
        assert_eq!(r.repeat_count, 2);
        let names: Vec<_> = r.stages.iter().map(Stage::name).collect();
        assert_eq!(
            names,
            ["gaussian_blur", "resize", "gaussian_noise", "poisson_noise", "jpeg"]
        );
        let c = codeformer_recipe();
        assert_eq!(c.repeat_count, 1);
        let names: Vec<_> = c.stages.iter().map(Stage::name).collect();
        assert_eq!(
            names,
            ["gaussian_blur", "resize", "gaussian_noise", "jpeg", "resize_to_target"]
        );
    }

    #[test]
    fn output_is_exactly_hr_over_scale() {
        let hr = textured(48, 40);
        for seed in 0..5 {
            for recipe in [realesrgan_recipe(), codeformer_recipe()] {
                for s in [2, 4, 8] {
                    let pair = apply_recipe(&hr, &recipe, s, seed).unwrap();
                    assert_eq!((pair.lr.width(), pair.lr.height()), (48 / s, 40 / s));
                }
            }
        }
    }

    #[test]
    fn indivisible_dims_rejected() {
        let hr = textured(30, 32);
        assert!(matches!(
            apply_recipe(&hr, &realesrgan_recipe(), 4, 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn recipe_json_round_trip_and_validation() {
        let r = realesrgan_recipe();
        assert_eq!(DegradationRecipe::from_json(&r.to_json()).unwrap(), r);
        let mut bad = codeformer_recipe();
        bad.repeat_count = 3;
        assert!(DegradationRecipe::from_json(&bad.to_json()).is_err());
        let mut bad = codeformer_recipe();
        bad.stages.push(Stage::Jpeg {
            quality: IntRange::new(50, 20),
        });
        assert!(bad.validate().is_err());
        let json = r#"{"name":"x","repeat_count":1,"stages":[
            {"stage":"gaussian_noise","sigma":[0.0,0.1]},
            {"stage":"box_blur","radius":[1,3]}]}"#;
        let parsed = DegradationRecipe::from_json(json).unwrap();
        assert_eq!(
            parsed.stages[0],
            Stage::GaussianNoise {
                sigma: Range::new(0.0, 0.1),
                probability: 1.0
            }
        );
    }

    #[test]
    fn different_seeds_differ() {
        let hr = textured(64, 64);
        let a = apply_recipe(&hr, &realesrgan_recipe(), 4, 1).unwrap();
        let b = apply_recipe(&hr, &realesrgan_recipe(), 4, 2).unwrap();
        assert_ne!(a.trace, b.trace);
    }
}
