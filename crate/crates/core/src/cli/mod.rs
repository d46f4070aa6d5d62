//! Command-line front end.

pub mod config;
pub mod grid;
pub mod report;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::codestream::{self, Codestream};
use crate::raster::{self, TileGrid};
use crate::wavelet::reduced_len;

pub use config::{parse_config, parse_config_str, ConfigError, DetectorSource, ImageSource, ScenarioConfig};
pub use grid::{load_scene, run_grid, CellResult, GridError, GridReport, Scene};
pub use report::write_reports;

#[derive(Debug, Parser)]
#[command(name = "hybrid-annot", version, about = "Scalable tile codec and hybrid annotation simulator")]
pub struct Cli {
    /// Seed for scene generation and detector draws (overrides the config's `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for outputs; relative output paths are resolved against it.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a PGM/PPM image into a codestream.
    Encode(EncodeArgs),
    /// Decode tiles of a codestream into a PGM/PPM mosaic.
    Decode(DecodeArgs),
    /// Copy selected tiles up to a resolution into a new codestream.
    Extract(ExtractArgs),
    /// Print the header and the payload size per resolution level.
    Info(InfoArgs),
    /// Generate a synthetic scene and its ground truth.
    GenScene(GenSceneArgs),
    /// Run both frameworks over a scenario grid.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Tile width, and height unless `--tile-height` is given.
    #[arg(long, default_value_t = 256)]
    pub tile: u32,
    #[arg(long)]
    pub tile_height: Option<u32>,
    #[arg(long, default_value_t = config::DEFAULT_LEVELS)]
    pub levels: u8,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Resolution level (default: highest available).
    #[arg(short, long)]
    pub resolution: Option<u8>,
    /// Comma-separated tile indices (default: all tiles present).
    #[arg(long, value_delimiter = ',')]
    pub tiles: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(short, long)]
    pub resolution: u8,
    #[arg(long, value_delimiter = ',', required = true)]
    pub tiles: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long)]
    pub objects: u32,
    #[arg(long, default_value_t = config::DEFAULT_OBJECT_SIZE.0)]
    pub min_size: u32,
    #[arg(long, default_value_t = config::DEFAULT_OBJECT_SIZE.1)]
    pub max_size: u32,
    #[arg(long, default_value = "scene.pgm")]
    pub image: PathBuf,
    #[arg(long, default_value = "ground_truth.csv")]
    pub ground_truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
}

fn out_path(out_dir: &Path, p: &Path) -> Result<PathBuf> {
    let full = out_dir.join(p);
    if let Some(parent) = full.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(full)
}

fn read_cs(path: &Path) -> Result<Codestream> {
    codestream::read_codestream(path).with_context(|| format!("reading codestream {}", path.display()))
}

/// Mosaic dimensions at resolution `r`: reduced tile widths (heights) summed
/// along a row (column).
fn mosaic_dims(grid: &TileGrid, levels: u8, r: u8) -> (u64, u64) {
    let skip = (levels - r) as usize;
    let full_w = grid.tile_w() as usize;
    let full_h = grid.tile_h() as usize;
    let last_w = grid.image_w() as usize - (grid.tiles_x() as usize - 1) * full_w;
    let last_h = grid.image_h() as usize - (grid.tiles_y() as usize - 1) * full_h;
    let w = (grid.tiles_x() as usize - 1) * reduced_len(full_w, skip) + reduced_len(last_w, skip);
    let h = (grid.tiles_y() as usize - 1) * reduced_len(full_h, skip) + reduced_len(last_h, skip);
    (w as u64, h as u64)
}

fn cmd_encode(cli: &Cli, a: &EncodeArgs) -> Result<()> {
    let img = raster::load_image(&a.input).with_context(|| format!("reading image {}", a.input.display()))?;
    let grid = TileGrid::for_image(&img, a.tile, a.tile_height.unwrap_or(a.tile))?;
    let cs = codestream::encode(&img, &grid, a.levels)?;
    let out = out_path(&cli.out_dir, &a.output)?;
    codestream::write_codestream_file(&cs, &out)?;
    if !cli.quiet {
        println!("encoded {} tiles, {} payload bytes -> {}", cs.tiles().len(), cs.payload().len(), out.display());
    }
    Ok(())
}

fn cmd_decode(cli: &Cli, a: &DecodeArgs) -> Result<()> {
    let cs = read_cs(&a.input)?;
    let r = a.resolution.unwrap_or(cs.max_resolution());
    let tiles: Vec<u32> = if a.tiles.is_empty() { cs.tile_indices().collect() } else { a.tiles.clone() };
    let decoded = codestream::decode(&cs, &tiles, r)?;
    let h = cs.header();
    let img = codestream::mosaic(&cs.grid(), h.levels, r, h.components, &decoded)?;
    let out = out_path(&cli.out_dir, &a.output)?;
    raster::save_image(&img, &out)?;
    if !cli.quiet {
        println!("decoded {} tiles at R={r} ({}x{}) -> {}", decoded.len(), img.width(), img.height(), out.display());
    }
    Ok(())
}

fn cmd_extract(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    let cs = read_cs(&a.input)?;
    let sub = codestream::extract(&cs, &a.tiles, a.resolution)?;
    let out = out_path(&cli.out_dir, &a.output)?;
    codestream::write_codestream_file(&sub, &out)?;
    if !cli.quiet {
        println!(
            "extracted {} tiles at R={}, {} payload bytes -> {}",
            sub.tiles().len(),
            a.resolution,
            sub.payload().len(),
            out.display()
        );
    }
    Ok(())
}

fn cmd_info(a: &InfoArgs) -> Result<()> {
    let cs = read_cs(&a.input)?;
    let h = cs.header();
    println!(
        "image {}x{}, {} component(s), tiles {}x{} ({} present of {}), levels {}, max resolution {}",
        h.width,
        h.height,
        h.components,
        h.tile_w,
        h.tile_h,
        cs.tiles().len(),
        cs.grid().tile_count(),
        h.levels,
        h.max_resolution
    );
    let grid = cs.grid();
    for r in 1..=cs.max_resolution() {
        let (w, hgt) = mosaic_dims(&grid, h.levels, r);
        println!("R={r} bytes={} dims={w}x{hgt}", codestream::size_of_all(&cs, r)?);
    }
    Ok(())
}

fn cmd_gen_scene(cli: &Cli, a: &GenSceneArgs) -> Result<()> {
    let (img, gt) =
        raster::generate_scene(cli.seed.unwrap_or(0), a.width, a.height, a.objects, (a.min_size, a.max_size))?;
    let img_path = out_path(&cli.out_dir, &a.image)?;
    let gt_path = out_path(&cli.out_dir, &a.ground_truth)?;
    raster::save_image(&img, &img_path)?;
    raster::save_ground_truth(&gt_path, &gt)?;
    if !cli.quiet {
        println!(
            "scene {}x{} with {} objects -> {}, {}",
            a.width,
            a.height,
            gt.len(),
            img_path.display(),
            gt_path.display()
        );
    }
    Ok(())
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> Result<()> {
    let mut cfg = parse_config(&a.config)?;
    if let Some(seed) = cli.seed {
        if let ImageSource::Synthetic { seed: s, .. } = &mut cfg.image {
            *s = seed;
        }
        cfg.seed = seed;
    }
    let scene = load_scene(&cfg)?;
    let report = run_grid(&cfg, &scene)?;
    let files = write_reports(&report, &cfg.data_rates_kbps, &cli.out_dir)
        .with_context(|| format!("writing reports to {}", cli.out_dir.display()))?;
    if !cli.quiet {
        println!(
            "{:>10} {:>10} {:>10} {:>10} {:>8} {:>8} {:>8} {:>4} {:>5}",
            "rate_kbps", "limit_s", "t_rs_base", "t_rs_prop", "ratio", "rec_base", "rec_prop", "LR", "|N|"
        );
        let na = |x: Option<f64>, p: usize| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.p$}"));
        for r in report.rows() {
            println!(
                "{:>10} {:>10} {:>10} {:>10} {:>8} {:>8.3} {:>8.3} {:>4} {:>5}",
                r.data_rate_kbps,
                r.t_tr_limit_s,
                na(r.t_rs_base, 1),
                na(r.t_rs_prop, 1),
                na(r.t_rs_ratio, 2),
                r.recall_base,
                r.recall_prop,
                r.lr_level.map_or_else(|| "NA".to_string(), |l| l.to_string()),
                r.human_tiles
            );
        }
        println!("wrote {} files to {}", files.len(), cli.out_dir.display());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
        return pool.install(|| dispatch(cli));
    }
    dispatch(cli)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Encode(a) => cmd_encode(cli, a),
        Command::Decode(a) => cmd_decode(cli, a),
        Command::Extract(a) => cmd_extract(cli, a),
        Command::Info(a) => cmd_info(a),
        Command::GenScene(a) => cmd_gen_scene(cli, a),
        Command::Run(a) => cmd_run(cli, a),
    }
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
