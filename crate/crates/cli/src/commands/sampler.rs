use std::time::Instant;

use serde::Serialize;

use histosr_core::diffusion::{
    linear_schedule, moments, sample, space_schedule, AnalyticGaussianDenoiser, ScheduleDump,
    VarianceKind, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_STEPS,
};

use super::{write_file, Context};
use crate::cli::SamplerCheckArgs;
use crate::config::resolve;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct Moments {
    steps: usize,
    mean: f64,
    std: f64,
}

#[derive(Debug, Serialize)]
struct SamplerReport {
    target_mean: f64,
    target_std: f64,
    samples: usize,
    variance: VarianceKind,
    tolerance: f64,
    spaced: Moments,
    full: Moments,
    pass: bool,
    seconds: f64,
}

pub fn sampler_check(args: &SamplerCheckArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "sampler-check")?;
    let start = Instant::now();
    let mean = a.target_mean.unwrap_or(3.0);
    let std = a.target_std.unwrap_or(0.5);
    let samples = a.samples.unwrap_or(10_000);
    let steps = a.steps.unwrap_or(DEFAULT_STEPS);
    let spaced_steps = a.spaced.unwrap_or(50);
    let tolerance = a.tolerance.unwrap_or(0.05);
    let variance = match a.variance.as_deref().unwrap_or("fixed_large") {
        "fixed_large" | "large" => VarianceKind::FixedLarge,
        "fixed_small" | "small" => VarianceKind::FixedSmall,
        other => {
            return Err(CliError::validation(format!(
                "`variance`: expected fixed_large or fixed_small, got {other:?}"
            )))
        }
    };
    if samples < 2 || !(std > 0.0) || !mean.is_finite() || !(tolerance > 0.0) {
        return Err(CliError::validation(
            "need samples >= 2, target_std > 0, finite target_mean and tolerance > 0",
        ));
    }
    let (bs, be) = (a.beta_start.unwrap_or(DEFAULT_BETA_START), a.beta_end.unwrap_or(DEFAULT_BETA_END));
    let schedule = linear_schedule(steps, bs, be)?;
    let denoiser = AnalyticGaussianDenoiser::isotropic(mean, std * std, samples)?;
    let run = |n: usize| -> CliResult<Moments> {
        let sp = space_schedule(&schedule, n)?.with_variance(variance);
        let x = sample(&denoiser, &[], samples, &sp, ctx.seed)?;
        let (m, s) = moments(&x);
        Ok(Moments { steps: n, mean: m, std: s })
    };
    let spaced = run(spaced_steps)?;
    let full = run(steps)?;
    let ok = |m: &Moments| (m.mean - mean).abs() <= tolerance && (m.std - std).abs() <= tolerance;
    let pass = ok(&spaced)
        && ok(&full)
        && (spaced.mean - full.mean).abs() <= tolerance
        && (spaced.std - full.std).abs() <= tolerance;
    if let Some(path) = &a.dump_schedule {
        let dump = ScheduleDump::new(steps, bs, be, spaced_steps)?;
        write_file(path, serde_json::to_string_pretty(&dump).expect("dump serializes") + "\n")?;
    }
    let report = SamplerReport {
        target_mean: mean,
        target_std: std,
        samples,
        variance,
        tolerance,
        spaced,
        full,
        pass,
        seconds: start.elapsed().as_secs_f64(),
    };
    let mut out = serde_json::to_string_pretty(&report).expect("report serializes");
    out.push('\n');
    out.push_str(if pass { "PASS\n" } else { "FAIL\n" });
    if !pass {
        print!("{out}");
        return Err(CliError::runtime("sampler moments outside tolerance"));
    }
    Ok(out)
}
