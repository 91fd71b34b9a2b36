use histosr_core::raster::{load_image, save_image};
use histosr_core::tiler::{
    inference_geometry, stitch_dir, tile_plan, write_tiles, DEFAULT_OVERLAP, DEFAULT_TILE,
};

use super::{existing_dir, existing_file, Context};
use crate::cli::{GeometryArgs, StitchArgs, TileArgs};
use crate::config::{require, resolve};
use crate::error::{CliError, CliResult};

pub fn tile(args: &TileArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "tile")?;
    let input = existing_file(a.input, "input")?;
    let out_dir = require(a.out_dir, "out_dir")?;
    let img = load_image(&input)?;
    let grid = tile_plan(
        img.width(),
        img.height(),
        a.tile.unwrap_or(DEFAULT_TILE),
        a.overlap.unwrap_or(DEFAULT_OVERLAP),
    )?;
    write_tiles(&img, &grid, &out_dir)?;
    Ok(format!(
        "{} tile(s) in a {}x{} grid -> {}\n",
        grid.tiles.len(),
        grid.rows(),
        grid.cols(),
        out_dir.display()
    ))
}

pub fn stitch(args: &StitchArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "stitch")?;
    let dir = existing_dir(a.tiles_dir, "tiles_dir")?;
    let out = require(a.out, "out")?;
    let img = stitch_dir(&dir)?;
    save_image(&img, &out)?;
    Ok(format!("stitched {}x{} -> {}\n", img.width(), img.height(), out.display()))
}

pub fn geometry(args: &GeometryArgs, ctx: &Context) -> CliResult<String> {
    let a = resolve(args, ctx.config.as_ref(), "geometry")?;
    let (w, h) = match (a.lr, a.lr_width, a.lr_height) {
        (Some(s), None, None) => (s, s),
        (None, Some(w), Some(h)) => (w, h),
        (None, None, None) => {
            return Err(CliError::validation(
                "missing required field `lr` (flag --lr or --lr-width/--lr-height)",
            ))
        }
        _ => {
            return Err(CliError::validation(
                "give either `lr` or both `lr_width` and `lr_height`",
            ))
        }
    };
    let g = inference_geometry(w, h, require(a.scale, "scale")?)?;
    if a.json.unwrap_or(false) {
        return Ok(serde_json::to_string_pretty(&g).expect("geometry serializes") + "\n");
    }
    Ok(format!(
        "lr {}x{} scale {}\ntarget {}x{}\npadded {}x{}\nlatent {}x{}x{}\n",
        g.lr_width,
        g.lr_height,
        g.scale,
        g.target_width,
        g.target_height,
        g.padded_width,
        g.padded_height,
        g.latent_width,
        g.latent_height,
        g.latent_channels
    ))
}
