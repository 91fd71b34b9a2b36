//! Shared fixture helpers for the CLI integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use histosr_core::degrade::{add_gaussian_noise, convolve, isotropic_gaussian};
use histosr_core::raster::{resize_bicubic, save_image, Raster};
use histosr_core::synthetic::{tissue_patch, TissueParams};

pub const FIXTURE_SIDE: usize = 96;
pub const FIXTURE_COUNT: u64 = 5;
pub const METHODS: [&str; 3] = ["bicubic", "blurred", "noisy"];

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_name(i: u64) -> String {
    format!("tissue_{i:02}")
}

pub fn method_output(method: &str, hr: &Raster, seed: u64) -> Raster {
    let (w, h) = (hr.width(), hr.height());
    match method {
        "bicubic" => resize_bicubic(&resize_bicubic(hr, w / 4, h / 4).unwrap(), w, h).unwrap(),
        "blurred" => convolve(hr, &isotropic_gaussian(1.5).unwrap()),
        "noisy" => add_gaussian_noise(hr, 0.03, seed).unwrap(),
        other => panic!("unknown fixture method {other}"),
    }
}

/// External LPIPS values for four of the five images.
pub fn external_csv() -> String {
    let mut out = String::from("method,image,metric,value\n");
    for (m, method) in METHODS.iter().enumerate() {
        for i in 0..FIXTURE_COUNT - 1 {
            let v = 0.1 + 0.1 * m as f64 + 0.01 * i as f64;
            out.push_str(&format!("{method},{},LPIPS,{v:.3}\n", fixture_name(i)));
        }
    }
    out
}

/// Write the full fixture tree (hr/, masks/, sr/<method>/, external_metrics.csv).
pub fn generate_fixtures(root: &Path) {
    for i in 0..FIXTURE_COUNT {
        let (hr, mask) = tissue_patch(TissueParams::new(FIXTURE_SIDE, FIXTURE_SIDE), 500 + i);
        let name = format!("{}.png", fixture_name(i));
        for sub in ["hr", "masks"] {
            std::fs::create_dir_all(root.join(sub)).unwrap();
        }
        save_image(&hr, root.join("hr").join(&name)).unwrap();
        mask.save(root.join("masks").join(&name)).unwrap();
        for method in METHODS {
            let dir = root.join("sr").join(method);
            std::fs::create_dir_all(&dir).unwrap();
            save_image(&method_output(method, &hr, 900 + i), dir.join(&name)).unwrap();
        }
    }
    std::fs::write(root.join("external_metrics.csv"), external_csv()).unwrap();
}

/// Every file under `root`, keyed by relative path.
pub fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Run a CLI command line in-process on a pool with `threads` workers.
pub fn run_cli(args: &[&str], threads: usize) -> Result<String, histosr_cli::CliError> {
    use clap::Parser;
    let mut argv = vec!["histosr"];
    argv.extend_from_slice(args);
    let cli = histosr_cli::cli::Cli::try_parse_from(argv).expect("valid command line");
    let ctx = histosr_cli::Context {
        seed: cli.global.seed.unwrap_or(0),
        config: None,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| histosr_cli::commands::dispatch(&cli.command, &ctx))
}

pub fn bless() -> bool {
    std::env::var_os("HISTOSR_BLESS").is_some()
}
