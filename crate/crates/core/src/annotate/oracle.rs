//! Seeded detector model driven by ground truth.
//!
//! Each object in a requested tile is found with probability `p(R)`; found
//! objects get a confidence around `c̄(R)` and a localization error that grows
//! by 2x per resolution level below full. Every draw comes from a splitmix64
//! stream keyed on `(seed, object_id, R)` (or `(seed, tile, R)` for false
//! positives), so results do not depend on evaluation order.

use std::collections::HashSet;

use super::{AnnotateError, AnnotationSet, DetectionBox, DetectionRequest, Detector, Source};
use crate::raster::{GroundTruthBox, TileGrid};
use crate::rng::SplitMix64;

const FALSE_POSITIVE_DOMAIN: u64 = 0x6670_6f73;

/// Resolution-dependent fidelity profile. Tables are indexed by `R - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    detect_prob: Vec<f64>,
    confidence_mean: Vec<f64>,
    confidence_spread: f64,
    jitter_scale: f64,
    false_positive_rate: f64,
}

/// Five-level reference profile, coarsest first.
const DEFAULT_DETECT_PROB: [f64; 5] = [0.3, 0.5, 0.7, 0.85, 0.95];
const DEFAULT_CONFIDENCE_MEAN: [f64; 5] = [0.35, 0.45, 0.55, 0.7, 0.85];

impl DetectorModel {
    pub fn new(
        detect_prob: Vec<f64>,
        confidence_mean: Vec<f64>,
        confidence_spread: f64,
        jitter_scale: f64,
        false_positive_rate: f64,
    ) -> Result<Self, AnnotateError> {
        let levels = detect_prob.len();
        if confidence_mean.len() != levels {
            return Err(AnnotateError::TableLength { table: "confidence_mean", got: confidence_mean.len(), levels });
        }
        for (table, values) in [("detect_prob", &detect_prob), ("confidence_mean", &confidence_mean)] {
            for (index, &value) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(AnnotateError::TableValue { table, index, value });
                }
            }
        }
        if let Some(i) = detect_prob.windows(2).position(|w| w[1] < w[0]) {
            return Err(AnnotateError::NotMonotone(i + 2));
        }
        for (name, v) in [
            ("confidence_spread", confidence_spread),
            ("jitter_scale", jitter_scale),
            ("false_positive_rate", false_positive_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(AnnotateError::Parameter(name));
            }
        }
        Ok(Self { detect_prob, confidence_mean, confidence_spread, jitter_scale, false_positive_rate })
    }

    /// Reference profile for `levels` resolution levels: the five-level table
    /// anchored at full resolution, extended below by halving.
    pub fn default_for_levels(levels: u8) -> Self {
        let levels = levels as usize;
        let mut p = Vec::with_capacity(levels);
        let mut c = Vec::with_capacity(levels);
        for k in 0..levels {
            // k counts levels below full resolution
            let from_top = levels - 1 - k;
            let (pk, ck) = if from_top < 5 {
                (DEFAULT_DETECT_PROB[4 - from_top], DEFAULT_CONFIDENCE_MEAN[4 - from_top])
            } else {
                let halvings = (from_top - 4) as i32;
                (DEFAULT_DETECT_PROB[0] * 0.5f64.powi(halvings), DEFAULT_CONFIDENCE_MEAN[0] * 0.5f64.powi(halvings))
            };
            p.push(pk);
            c.push(ck);
        }
        Self::new(p, c, 0.1, 0.5, 0.05).expect("reference profile is valid")
    }

    /// Perfect detector: always finds every object, exact boxes, confidence 1.
    pub fn perfect(levels: u8) -> Self {
        let n = levels as usize;
        Self::new(vec![1.0; n], vec![1.0; n], 0.0, 0.0, 0.0).expect("valid")
    }

    pub fn levels(&self) -> usize {
        self.detect_prob.len()
    }

    pub fn detect_prob(&self, resolution: u8) -> f64 {
        self.detect_prob[resolution as usize - 1]
    }

    pub fn confidence_mean(&self, resolution: u8) -> f64 {
        self.confidence_mean[resolution as usize - 1]
    }

    pub fn confidence_spread(&self) -> f64 {
        self.confidence_spread
    }

    pub fn jitter_scale(&self) -> f64 {
        self.jitter_scale
    }

    pub fn false_positive_rate(&self) -> f64 {
        self.false_positive_rate
    }
}

/// Shift `[start, start+len)` by `delta` and clamp to `[0, limit)`, keeping
/// at least one pixel.
fn clamp_span(start: u32, len: u32, delta_pos: f64, delta_len: f64, limit: u32) -> (u32, u32) {
    let s = (start as f64 + delta_pos).round();
    let l = (len as f64 + delta_len).round().max(1.0);
    let lo = s.clamp(0.0, (limit - 1) as f64);
    let hi = (s + l).clamp(lo + 1.0, limit as f64);
    (lo as u32, (hi - lo) as u32)
}

/// Simulated detections for the listed tiles at resolution `resolution`.
///
/// Objects are assigned to the tile holding their center. Boxes come back in
/// ascending tile order; within a tile, true detections in ground-truth order
/// precede false positives.
pub fn oracle_detect(
    tiles: &[u32],
    gt: &[GroundTruthBox],
    grid: &TileGrid,
    resolution: u8,
    model: &DetectorModel,
    seed: u64,
) -> Result<AnnotationSet, AnnotateError> {
    let levels = model.levels();
    if resolution == 0 || resolution as usize > levels {
        return Err(AnnotateError::Resolution { resolution, levels: levels as u8 });
    }
    let p = model.detect_prob(resolution);
    let cbar = model.confidence_mean(resolution);
    let sigma = model.confidence_spread;
    let jitter = model.jitter_scale * 2f64.powi((levels - resolution as usize) as i32);

    let mut wanted: Vec<u32> = tiles.iter().copied().collect::<HashSet<_>>().into_iter().collect();
    wanted.sort_unstable();

    let mut per_tile: Vec<Vec<&GroundTruthBox>> = vec![Vec::new(); wanted.len()];
    for g in gt {
        let (cx, cy) = g.center();
        if let Some(t) = grid.tile_at(cx, cy) {
            if let Ok(pos) = wanted.binary_search(&t) {
                per_tile[pos].push(g);
            }
        }
    }

    let (iw, ih) = (grid.image_w(), grid.image_h());
    let mut boxes = Vec::new();
    for (&tile, objects) in wanted.iter().zip(&per_tile) {
        for g in objects {
            let mut rng = SplitMix64::keyed(seed, &[g.object_id, resolution as u64]);
            if rng.next_f64() >= p {
                continue;
            }
            let confidence = (cbar + sigma * rng.next_normal()).clamp(0.0, 1.0);
            let (dx, dy, dw, dh) = (
                jitter * rng.next_normal(),
                jitter * rng.next_normal(),
                jitter * rng.next_normal(),
                jitter * rng.next_normal(),
            );
            let (x, w) = clamp_span(g.x, g.w, dx, dw, iw);
            let (y, h) = clamp_span(g.y, g.h, dy, dh, ih);
            boxes.push(DetectionBox {
                tile_index: tile,
                class_id: g.class_id,
                x,
                y,
                w,
                h,
                confidence,
                source: Source::Dl,
            });
        }

        let mut rng = SplitMix64::keyed(seed, &[FALSE_POSITIVE_DOMAIN, tile as u64, resolution as u64]);
        let count = rng.next_poisson(model.false_positive_rate);
        if count == 0 {
            continue;
        }
        let bounds =
            grid.tile_bounds(tile).map_err(|_| AnnotateError::InvalidTile { index: tile, count: grid.tile_count() })?;
        for _ in 0..count {
            let w = rng.range_inclusive(4, 24).min(bounds.w as u64) as u32;
            let h = rng.range_inclusive(4, 24).min(bounds.h as u64) as u32;
            let x = bounds.x + rng.range_inclusive(0, (bounds.w - w) as u64) as u32;
            let y = bounds.y + rng.range_inclusive(0, (bounds.h - h) as u64) as u32;
            let class_id = (rng.next_u64() % 4) as u32;
            let confidence = (cbar / 2.0 + sigma * rng.next_normal()).clamp(0.0, 1.0);
            boxes.push(DetectionBox { tile_index: tile, class_id, x, y, w, h, confidence, source: Source::Dl });
        }
    }
    Ok(AnnotationSet::new(boxes, Some(resolution)))
}

/// [`Detector`] backed by [`oracle_detect`] and a fixed ground truth.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    pub model: DetectorModel,
    pub ground_truth: Vec<GroundTruthBox>,
}

impl Detector for OracleDetector {
    fn detect(&self, req: &DetectionRequest<'_>) -> Result<AnnotationSet, AnnotateError> {
        if self.model.levels() != req.levels as usize {
            return Err(AnnotateError::TableLength {
                table: "detect_prob",
                got: self.model.levels(),
                levels: req.levels as usize,
            });
        }
        oracle_detect(&req.tile_indices(), &self.ground_truth, req.grid, req.resolution, &self.model, req.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::recall;
    use crate::raster::generate_scene;

    fn scene(n: u32) -> (TileGrid, Vec<GroundTruthBox>) {
        let (img, gt) = generate_scene(9, 512, 512, n, (6, 20)).unwrap();
        (TileGrid::for_image(&img, 64, 64).unwrap(), gt)
    }

    fn all_tiles(g: &TileGrid) -> Vec<u32> {
        (0..g.tile_count()).collect()
    }

    #[test]
    fn perfect_model_reproduces_ground_truth() {
        let (grid, gt) = scene(30);
        let anns = oracle_detect(&all_tiles(&grid), &gt, &grid, 3, &DetectorModel::perfect(5), 1).unwrap();
        assert_eq!(anns.len(), gt.len());
        for b in &anns.boxes {
            assert_eq!(b.confidence, 1.0);
            assert!(gt.iter().any(|g| g.rect() == b.rect()));
        }
        assert_eq!(recall(&anns, &gt, 0.1), 1.0);
    }

    #[test]
    fn zero_probability_detects_nothing() {
        let (grid, gt) = scene(30);
        let m = DetectorModel::new(vec![0.0; 5], vec![0.5; 5], 0.1, 1.0, 0.0).unwrap();
        assert!(oracle_detect(&all_tiles(&grid), &gt, &grid, 5, &m, 1).unwrap().is_empty());
    }

    #[test]
    fn only_listed_tiles_are_annotated() {
        let (grid, gt) = scene(40);
        let anns = oracle_detect(&[0, 5, 9], &gt, &grid, 5, &DetectorModel::default_for_levels(5), 4).unwrap();
        assert!(anns.boxes.iter().all(|b| [0, 5, 9].contains(&b.tile_index)));
    }

    #[test]
    fn deterministic_and_in_bounds() {
        let (grid, gt) = scene(60);
        let m = DetectorModel::new(vec![0.5; 5], vec![0.5; 5], 0.3, 3.0, 0.5).unwrap();
        for r in 1..=5 {
            let a = oracle_detect(&all_tiles(&grid), &gt, &grid, r, &m, 42).unwrap();
            let b = oracle_detect(&all_tiles(&grid), &gt, &grid, r, &m, 42).unwrap();
            assert_eq!(a, b);
            for d in &a.boxes {
                assert!((0.0..=1.0).contains(&d.confidence));
                assert!(d.w >= 1 && d.h >= 1);
                assert!(d.rect().right() <= 512 && d.rect().bottom() <= 512);
            }
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(matches!(
            DetectorModel::new(vec![0.5, 0.4], vec![0.5, 0.5], 0.1, 0.0, 0.0),
            Err(AnnotateError::NotMonotone(2))
        ));
        assert!(DetectorModel::new(vec![0.5, 1.4], vec![0.5, 0.5], 0.1, 0.0, 0.0).is_err());
        assert!(DetectorModel::new(vec![0.5], vec![0.5, 0.5], 0.1, 0.0, 0.0).is_err());
        assert!(DetectorModel::new(vec![0.5], vec![0.5], -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn default_profile_shapes() {
        let m = DetectorModel::default_for_levels(5);
        assert_eq!((1..=5).map(|r| m.detect_prob(r)).collect::<Vec<_>>(), DEFAULT_DETECT_PROB.to_vec());
        let m3 = DetectorModel::default_for_levels(3);
        assert_eq!((1..=3).map(|r| m3.detect_prob(r)).collect::<Vec<_>>(), vec![0.7, 0.85, 0.95]);
        let m7 = DetectorModel::default_for_levels(7);
        assert_eq!(m7.detect_prob(1), 0.075);
        assert_eq!(m7.detect_prob(7), 0.95);
    }

    #[test]
    fn detected_fraction_concentrates() {
        let gt: Vec<_> = (0..1000u64)
            .map(|i| GroundTruthBox {
                object_id: i,
                class_id: 0,
                x: (i % 40) as u32 * 25,
                y: (i / 40) as u32 * 25,
                w: 10,
                h: 10,
            })
            .collect();
        let grid = TileGrid::new(1000, 1000, 100, 100).unwrap();
        let m = DetectorModel::new(vec![0.7], vec![0.5], 0.1, 0.0, 0.0).unwrap();
        for seed in 0..20 {
            let n = oracle_detect(&all_tiles(&grid), &gt, &grid, 1, &m, seed).unwrap().len();
            let frac = n as f64 / 1000.0;
            assert!((0.65..=0.75).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn expected_recall_nondecreasing_in_resolution() {
        let grid = TileGrid::new(512, 512, 64, 64).unwrap();
        let m = DetectorModel::default_for_levels(5);
        let mut mean = [0.0f64; 5];
        let seeds = 500;
        for seed in 0..seeds {
            let (_, gt) = generate_scene(seed, 512, 512, 20, (8, 24)).unwrap();
            for r in 1..=5u8 {
                let a = oracle_detect(&all_tiles(&grid), &gt, &grid, r, &m, seed).unwrap();
                mean[r as usize - 1] += recall(&a, &gt, 0.1) / seeds as f64;
            }
        }
        for w in mean.windows(2) {
            assert!(w[1] >= w[0] - 0.02, "{mean:?}");
        }
    }
}
