//! Diffusion timestep math: noise schedules, forward noising, spaced DDPM
//! reverse sampling with a pluggable noise predictor, and an analytic
//! Gaussian denoiser used to validate the sampler.

mod color;

pub use color::{color_fix, color_fix_values};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 0.00085;
pub const DEFAULT_BETA_END: f64 = 0.012;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphabars: Vec<f64>,
}

impl NoiseSchedule {
    /// Schedule from explicit betas, each in (0, 1).
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidParameter("schedule needs at least one step".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidParameter(format!("beta {b} outside (0, 1)")));
        }
        let mut acc = 1.0;
        let alphabars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(Self { betas, alphabars })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.betas.iter().map(|b| 1.0 - b).collect()
    }

    pub fn alphabars(&self) -> &[f64] {
        &self.alphabars
    }

    pub fn alphabar(&self, t: usize) -> f64 {
        self.alphabars[t]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        linear_schedule(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

/// Betas linear in `t`, including both endpoints.
pub fn linear_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidParameter("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
        )));
    }
    let betas = (0..steps)
        .map(|t| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * t as f64 / (steps - 1) as f64
            }
        })
        .collect();
    NoiseSchedule::from_betas(betas)
}

/// Reverse-step noise variance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// `beta'_i`; keeps the marginal variance of coarse spaced chains.
    #[default]
    FixedLarge,
    /// Posterior variance `beta'_i (1 - ab'_{i-1}) / (1 - ab'_i)`.
    FixedSmall,
}

/// A subsequence of parent timesteps with recomputed betas.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacedSchedule {
    parent: NoiseSchedule,
    indices: Vec<usize>,
    betas: Vec<f64>,
    variance: VarianceKind,
}

impl SpacedSchedule {
    pub fn with_variance(mut self, variance: VarianceKind) -> Self {
        self.variance = variance;
        self
    }

    pub fn variance(&self) -> VarianceKind {
        self.variance
    }

    pub fn parent(&self) -> &NoiseSchedule {
        &self.parent
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Parent alphabar at spaced step `i`.
    pub fn alphabar(&self, i: usize) -> f64 {
        self.parent.alphabar(self.indices[i])
    }

    /// Alphabar before spaced step `i` (1 for the first step).
    pub fn alphabar_prev(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.alphabar(i - 1)
        }
    }

    /// Running product of `1 - beta'` over the spaced steps.
    pub fn respaced_alphabars(&self) -> Vec<f64> {
        let mut acc = 1.0;
        self.betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect()
    }
}

/// Uniform-stride respacing: indices `floor(i * T / n)`.
pub fn space_schedule(s: &NoiseSchedule, n: usize) -> Result<SpacedSchedule> {
    let t = s.steps();
    if n == 0 || n > t {
        return Err(Error::InvalidParameter(format!(
            "spaced step count {n} outside 1..={t}"
        )));
    }
    let indices: Vec<usize> = (0..n).map(|i| i * t / n).collect();
    let mut prev = 1.0;
    let betas = indices
        .iter()
        .map(|&k| {
            let ab = s.alphabar(k);
            let b = 1.0 - ab / prev;
            prev = ab;
            b
        })
        .collect();
    Ok(SpacedSchedule {
        parent: s.clone(),
        indices,
        betas,
        variance: VarianceKind::default(),
    })
}

fn check_len(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Forward noising `sqrt(ab_t) x0 + sqrt(1 - ab_t) eps`.
pub fn q_sample(x0: &[f64], t: usize, eps: &[f64], s: &NoiseSchedule) -> Result<Vec<f64>> {
    check_len(x0, eps, "q_sample")?;
    if t >= s.steps() {
        return Err(Error::InvalidParameter(format!(
            "timestep {t} outside 0..{}",
            s.steps()
        )));
    }
    let ab = s.alphabar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

/// Reverse-step posterior mean and variance at spaced step `i`.
pub fn posterior(x_t: &[f64], i: usize, eps_hat: &[f64], sp: &SpacedSchedule) -> Result<(Vec<f64>, f64)> {
    check_len(x_t, eps_hat, "ddpm_step")?;
    if i >= sp.len() {
        return Err(Error::InvalidParameter(format!(
            "spaced index {i} outside 0..{}",
            sp.len()
        )));
    }
    let beta = sp.betas[i];
    let (ab, ab_prev) = (sp.alphabar(i), sp.alphabar_prev(i));
    let coef = beta / (1.0 - ab).sqrt();
    let scale = 1.0 / (1.0 - beta).sqrt();
    let mean = x_t
        .iter()
        .zip(eps_hat)
        .map(|(x, e)| scale * (x - coef * e))
        .collect();
    let var = match (i, sp.variance) {
        (0, _) => 0.0,
        (_, VarianceKind::FixedLarge) => beta,
        (_, VarianceKind::FixedSmall) => beta * (1.0 - ab_prev) / (1.0 - ab),
    };
    Ok((mean, var))
}

/// One ancestral DDPM step; the final step (`i == 0`) adds no noise.
pub fn ddpm_step(
    x_t: &[f64],
    i: usize,
    eps_hat: &[f64],
    sp: &SpacedSchedule,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (mut mean, var) = posterior(x_t, i, eps_hat, sp)?;
    if var > 0.0 {
        let sd = var.sqrt();
        for m in &mut mean {
            let z: f64 = StandardNormal.sample(rng);
            *m += sd * z;
        }
    }
    Ok(mean)
}

/// Noise predictor `eps(x_t, t, condition)`.
pub trait Denoiser {
    /// `t` is the parent timestep and `alphabar` its cumulative signal level.
    fn predict_noise(&self, x_t: &[f64], t: usize, alphabar: f64, condition: &[f64]) -> Result<Vec<f64>>;
}

impl<F> Denoiser for F
where
    F: Fn(&[f64], usize, f64, &[f64]) -> Result<Vec<f64>>,
{
    fn predict_noise(&self, x_t: &[f64], t: usize, alphabar: f64, condition: &[f64]) -> Result<Vec<f64>> {
        self(x_t, t, alphabar, condition)
    }
}

/// Run the spaced reverse chain from seeded standard-normal noise.
pub fn sample<D: Denoiser + ?Sized>(
    d: &D,
    condition: &[f64],
    len: usize,
    sp: &SpacedSchedule,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    for i in (0..sp.len()).rev() {
        let eps = d.predict_noise(&x, sp.indices[i], sp.alphabar(i), condition)?;
        if eps.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "denoiser returned {} values for a state of {len}",
                eps.len()
            )));
        }
        x = ddpm_step(&x, i, &eps, sp, &mut rng)?;
    }
    Ok(x)
}

/// Exact noise predictor for an independent Gaussian prior `N(mu0, var0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticGaussianDenoiser {
    mu0: Vec<f64>,
    var0: Vec<f64>,
}

impl AnalyticGaussianDenoiser {
    pub fn new(mu0: Vec<f64>, var0: Vec<f64>) -> Result<Self> {
        check_len(&mu0, &var0, "analytic denoiser prior")?;
        if var0.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("prior variances must be positive".into()));
        }
        Ok(Self { mu0, var0 })
    }

    /// Same prior for every element of a state of length `len`.
    pub fn isotropic(mu0: f64, var0: f64, len: usize) -> Result<Self> {
        Self::new(vec![mu0; len], vec![var0; len])
    }

    /// `E[x0 | x_t]` for one element.
    pub fn posterior_mean(mu0: f64, var0: f64, alphabar: f64, x_t: f64) -> f64 {
        let a = alphabar.sqrt();
        mu0 + a * var0 / (alphabar * var0 + 1.0 - alphabar) * (x_t - a * mu0)
    }

    pub fn noise(mu0: f64, var0: f64, alphabar: f64, x_t: f64) -> f64 {
        let x0 = Self::posterior_mean(mu0, var0, alphabar, x_t);
        (x_t - alphabar.sqrt() * x0) / (1.0 - alphabar).sqrt()
    }
}

impl Denoiser for AnalyticGaussianDenoiser {
    fn predict_noise(&self, x_t: &[f64], _t: usize, alphabar: f64, _condition: &[f64]) -> Result<Vec<f64>> {
        check_len(x_t, &self.mu0, "analytic denoiser state")?;
        Ok(x_t
            .iter()
            .zip(self.mu0.iter().zip(&self.var0))
            .map(|(&x, (&m, &v))| Self::noise(m, v, alphabar, x))
            .collect())
    }
}

/// Serialized schedule for cross-implementation comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDump {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub betas: Vec<f64>,
    pub alphabars: Vec<f64>,
    pub spaced_indices: Vec<usize>,
    pub spaced_betas: Vec<f64>,
}

impl ScheduleDump {
    pub fn new(steps: usize, beta_start: f64, beta_end: f64, spaced: usize) -> Result<Self> {
        let s = linear_schedule(steps, beta_start, beta_end)?;
        let sp = space_schedule(&s, spaced)?;
        Ok(Self {
            steps,
            beta_start,
            beta_end,
            betas: s.betas().to_vec(),
            alphabars: s.alphabars().to_vec(),
            spaced_indices: sp.indices().to_vec(),
            spaced_betas: sp.betas().to_vec(),
        })
    }

    /// Largest absolute deviation from a freshly computed schedule.
    pub fn max_deviation(&self) -> Result<f64> {
        let fresh = Self::new(self.steps, self.beta_start, self.beta_end, self.spaced_indices.len())?;
        if fresh.spaced_indices != self.spaced_indices
            || fresh.betas.len() != self.betas.len()
            || fresh.alphabars.len() != self.alphabars.len()
            || fresh.spaced_betas.len() != self.spaced_betas.len()
        {
            return Err(Error::Invalid("schedule dump layout does not match".into()));
        }
        let pairs = [
            (&fresh.betas, &self.betas),
            (&fresh.alphabars, &self.alphabars),
            (&fresh.spaced_betas, &self.spaced_betas),
        ];
        Ok(pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }
}

/// Mean and population standard deviation.
pub fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
