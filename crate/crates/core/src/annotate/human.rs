use std::collections::HashSet;

use super::{AnnotationSet, DetectionBox, Source};
use crate::raster::{GroundTruthBox, TileGrid};

/// Perfect annotator: every ground-truth box overlapping any chosen tile,
/// exactly once, with confidence 1.
///
/// A box is attributed to the first tile in `tiles` it overlaps. Output
/// follows ground-truth order.
pub fn human_annotate(tiles: &[u32], gt: &[GroundTruthBox], grid: &TileGrid) -> AnnotationSet {
    let rects: Vec<_> = tiles.iter().filter_map(|&t| grid.tile_bounds(t).ok().map(|r| (t, r))).collect();
    let mut seen = HashSet::new();
    let mut boxes = Vec::new();
    for g in gt {
        let r = g.rect();
        if let Some(&(tile, _)) = rects.iter().find(|(_, tr)| tr.intersects(&r)) {
            if seen.insert(g.object_id) {
                boxes.push(DetectionBox {
                    tile_index: tile,
                    class_id: g.class_id,
                    x: g.x,
                    y: g.y,
                    w: g.w,
                    h: g.h,
                    confidence: 1.0,
                    source: Source::Hum,
                });
            }
        }
    }
    AnnotationSet::new(boxes, None)
}
