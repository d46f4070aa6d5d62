//! Detections CSV: `tile_index,class_id,x,y,w,h,confidence,source`.
//!
//! Used both to replay real model output through the pipeline and to export
//! pipeline annotations.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{AnnotateError, AnnotationSet, DetectionBox, DetectionRequest, Detector, Source};
use crate::raster::TileGrid;

pub const HEADER: [&str; 8] = ["tile_index", "class_id", "x", "y", "w", "h", "confidence", "source"];

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, row: usize) -> Result<T, AnnotateError> {
    let raw = rec.get(i).ok_or_else(|| AnnotateError::Row { row, msg: format!("missing column `{}`", HEADER[i]) })?;
    raw.parse().map_err(|_| AnnotateError::Row { row, msg: format!("bad {} `{raw}`", HEADER[i]) })
}

pub fn read_detections<R: Read>(reader: R, grid: &TileGrid) -> Result<AnnotationSet, AnnotateError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(HEADER) {
        return Err(AnnotateError::Row { row: 1, msg: format!("expected header `{}`", HEADER.join(",")) });
    }
    let mut boxes = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| AnnotateError::Row { row, msg: e.to_string() })?;
        if rec.len() != HEADER.len() {
            return Err(AnnotateError::Row {
                row,
                msg: format!("expected {} columns, got {}", HEADER.len(), rec.len()),
            });
        }
        let b = DetectionBox {
            tile_index: field(&rec, 0, row)?,
            class_id: field(&rec, 1, row)?,
            x: field(&rec, 2, row)?,
            y: field(&rec, 3, row)?,
            w: field(&rec, 4, row)?,
            h: field(&rec, 5, row)?,
            confidence: field(&rec, 6, row)?,
            source: field(&rec, 7, row)?,
        };
        if b.tile_index >= grid.tile_count() {
            return Err(AnnotateError::RowTile { row, index: b.tile_index, count: grid.tile_count() });
        }
        if !(0.0..=1.0).contains(&b.confidence) {
            return Err(AnnotateError::Row { row, msg: format!("confidence {} outside [0, 1]", b.confidence) });
        }
        if b.w == 0 || b.h == 0 {
            return Err(AnnotateError::Row { row, msg: "box must be at least 1x1".into() });
        }
        if b.source == Source::Hum && b.confidence != 1.0 {
            return Err(AnnotateError::Row { row, msg: "HUM boxes must have confidence 1".into() });
        }
        boxes.push(b);
    }
    Ok(AnnotationSet::new(boxes, None))
}

/// Loads and validates a detections file against `grid`.
pub fn file_detect(path: impl AsRef<Path>, grid: &TileGrid) -> Result<AnnotationSet, AnnotateError> {
    read_detections(File::open(path)?, grid)
}

pub fn write_detections<W: Write>(w: W, anns: &AnnotationSet) -> Result<(), AnnotateError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(HEADER)?;
    for b in &anns.boxes {
        wr.write_record([
            b.tile_index.to_string(),
            b.class_id.to_string(),
            b.x.to_string(),
            b.y.to_string(),
            b.w.to_string(),
            b.h.to_string(),
            format!("{:.6}", b.confidence),
            b.source.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_detections_file(path: impl AsRef<Path>, anns: &AnnotationSet) -> Result<(), AnnotateError> {
    write_detections(File::create(path)?, anns)
}

/// Replays a fixed detection list: each request gets the DL boxes that fall on
/// its tiles, whatever the resolution.
#[derive(Debug, Clone)]
pub struct FileDetector {
    pub detections: AnnotationSet,
}

impl Detector for FileDetector {
    fn detect(&self, req: &DetectionRequest<'_>) -> Result<AnnotationSet, AnnotateError> {
        let tiles = req.tile_indices();
        let boxes = self
            .detections
            .boxes
            .iter()
            .filter(|b| b.source == Source::Dl && tiles.contains(&b.tile_index))
            .copied()
            .collect();
        Ok(AnnotationSet::new(boxes, Some(req.resolution)))
    }
}
