//! Detection data model and the annotators that produce it.

mod file;
mod human;
mod oracle;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use file::{file_detect, read_detections, write_detections, write_detections_file, FileDetector};
pub use human::human_annotate;
pub use oracle::{oracle_detect, DetectorModel, OracleDetector};

use crate::raster::{Image, Rect, TileGrid};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("detector table `{table}` has {got} entries, expected one per resolution level ({levels})")]
    TableLength { table: &'static str, got: usize, levels: usize },
    #[error("detector value `{table}[{index}]` = {value} is outside [0, 1]")]
    TableValue { table: &'static str, index: usize, value: f64 },
    #[error("detection probability must be nondecreasing in resolution (level {0})")]
    NotMonotone(usize),
    #[error("detector parameter `{0}` must be a finite value >= 0")]
    Parameter(&'static str),
    #[error("resolution {resolution} outside 1..={levels}")]
    Resolution { resolution: u8, levels: u8 },
    #[error("tile {index} outside a grid of {count} tiles")]
    InvalidTile { index: u32, count: u32 },
    #[error("detections row {row}: tile {index} outside a grid of {count} tiles")]
    RowTile { row: usize, index: u32, count: u32 },
    #[error("detections row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Dl,
    Hum,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Dl => "DL",
            Source::Hum => "HUM",
        })
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "DL" => Ok(Source::Dl),
            "HUM" => Ok(Source::Hum),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// A box in full-resolution pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionBox {
    pub tile_index: u32,
    pub class_id: u32,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub confidence: f64,
    pub source: Source,
}

impl DetectionBox {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationSet {
    pub boxes: Vec<DetectionBox>,
    /// Resolution level the DL boxes were produced at, if any.
    pub resolution: Option<u8>,
}

impl AnnotationSet {
    pub fn new(boxes: Vec<DetectionBox>, resolution: Option<u8>) -> Self {
        Self { boxes, resolution }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// DL boxes followed by `other`'s boxes; keeps this set's resolution.
    pub fn merged(&self, other: &AnnotationSet) -> AnnotationSet {
        let mut boxes = self.boxes.clone();
        boxes.extend_from_slice(&other.boxes);
        AnnotationSet { boxes, resolution: self.resolution.or(other.resolution) }
    }
}

/// Everything a detector is handed for one inference pass.
#[derive(Debug, Clone, Copy)]
pub struct DetectionRequest<'a> {
    /// Decoded tiles at `resolution`, in tile-index order.
    pub tiles: &'a [(u32, Image)],
    pub resolution: u8,
    pub levels: u8,
    pub grid: &'a TileGrid,
    pub seed: u64,
}

impl DetectionRequest<'_> {
    pub fn tile_indices(&self) -> Vec<u32> {
        self.tiles.iter().map(|(i, _)| *i).collect()
    }
}

/// Stand-in for the onboard/ground DL model.
pub trait Detector: Send + Sync {
    fn detect(&self, request: &DetectionRequest<'_>) -> Result<AnnotationSet, AnnotateError>;
}
