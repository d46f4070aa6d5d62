//! Scenario grid: both frameworks on every (data rate, time limit) cell.

use rayon::prelude::*;
use thiserror::Error;

use super::config::{DetectorSource, ImageSource, ScenarioConfig};
use crate::annotate::{file_detect, AnnotateError, Detector, FileDetector, OracleDetector};
use crate::channel::{ChannelError, ChannelSpec};
use crate::metrics::ComparisonRow;
use crate::pipeline::{run_baseline, run_streamlined, Mission, PipelineError, RunResult};
use crate::raster::{generate_scene, load_ground_truth, load_image, GroundTruthBox, Image, RasterError, TileGrid};

#[derive(Debug, Error)]
pub enum GridError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

pub struct Scene {
    pub image: Image,
    pub ground_truth: Vec<GroundTruthBox>,
}

pub fn load_scene(cfg: &ScenarioConfig) -> Result<Scene, GridError> {
    Ok(match &cfg.image {
        ImageSource::File { image, ground_truth } => {
            Scene { image: load_image(image)?, ground_truth: load_ground_truth(ground_truth)? }
        }
        ImageSource::Synthetic { seed, width, height, objects, object_size } => {
            let (image, ground_truth) = generate_scene(*seed, *width, *height, *objects, *object_size)?;
            Scene { image, ground_truth }
        }
    })
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub data_rate_kbps: f64,
    pub t_tr_limit_s: f64,
    pub baseline: RunResult,
    pub streamlined: RunResult,
    pub row: ComparisonRow,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    /// Rate-major, limit-minor, in configuration order.
    pub cells: Vec<CellResult>,
}

impl GridReport {
    pub fn rows(&self) -> impl Iterator<Item = &ComparisonRow> {
        self.cells.iter().map(|c| &c.row)
    }
}

/// Runs every cell on one scene. Cells run in parallel; the report order is
/// fixed.
pub fn run_grid(cfg: &ScenarioConfig, scene: &Scene) -> Result<GridReport, GridError> {
    let grid = TileGrid::for_image(&scene.image, cfg.tile_w, cfg.tile_h)?;
    let detector: Box<dyn Detector> = match &cfg.detector {
        DetectorSource::Oracle(model) => {
            Box::new(OracleDetector { model: model.clone(), ground_truth: scene.ground_truth.clone() })
        }
        DetectorSource::File(path) => Box::new(FileDetector { detections: file_detect(path, &grid)? }),
    };
    let mission = Mission::new(&scene.image, grid, cfg.levels, detector.as_ref(), &scene.ground_truth, cfg.seed)?;

    let cells: Vec<(f64, f64)> =
        cfg.data_rates_kbps.iter().flat_map(|&r| cfg.t_tr_limits_s.iter().map(move |&l| (r, l))).collect();
    let cells = cells
        .into_par_iter()
        .map(|(rate, limit)| {
            let ch = ChannelSpec::from_kbps(rate, limit)?;
            let baseline = run_baseline(&mission, &ch, cfg.mu_s, cfg.baseline_human_budget, &cfg.options)?;
            let streamlined = run_streamlined(&mission, &ch, cfg.mu_s, cfg.cap_s, &cfg.options)?;
            let row = ComparisonRow::new(
                rate,
                limit,
                &baseline.timeline,
                &streamlined.timeline,
                streamlined.plan.lr,
                streamlined.selected_tiles.len(),
            );
            Ok(CellResult { data_rate_kbps: rate, t_tr_limit_s: limit, baseline, streamlined, row })
        })
        .collect::<Result<Vec<_>, GridError>>()?;
    Ok(GridReport { cells })
}
