//! The two annotation frameworks end to end.
//!
//! Baseline: send the whole codestream at full resolution, run the detector on
//! the ground, then have a human review the least confident tiles. Streamlined:
//! pick the largest resolution that fits the transmission budget, send every
//! tile at that resolution, detect, and request only the least confident tiles
//! at full resolution for human review.

use std::collections::HashSet;

use thiserror::Error;

use crate::annotate::{human_annotate, AnnotateError, AnnotationSet, DetectionRequest, Detector};
use crate::channel::{
    bandwidth_budget, transmit, transmit_indices, ChannelSpec, IndexCost, TransferLabel, TransferRecord,
};
use crate::codestream::{self, Codestream, CodestreamError};
use crate::metrics::{self, Phase, TimelineReport, DEFAULT_IOU_THRESHOLD};
use crate::raster::{GroundTruthBox, Image, TileGrid};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Codestream(#[from] CodestreamError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
}

/// How the per-tile full-resolution size is estimated when sizing the human
/// budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TileSizeEstimate {
    /// Largest tile: the budget can never overshoot the time limit.
    #[default]
    Max,
    /// Average tile: total full-resolution size over tile count.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetPlan {
    /// Resolution sent for every tile; `None` when even resolution 1 does not fit.
    pub lr: Option<u8>,
    pub hr: u8,
    pub human_budget: usize,
    pub tile_count: u32,
}

impl BudgetPlan {
    pub fn is_feasible(&self) -> bool {
        self.lr.is_some()
    }
}

/// Budget planning over precomputed sizes.
///
/// `sizes[r - 1]` is the payload for all tiles at resolution `r`;
/// `per_tile_bytes` is the cost charged for each human-reviewed tile.
pub fn plan_budget(sizes: &[u64], bw: u64, per_tile_bytes: u64, mu_s: f64, cap_s: f64, tile_count: u32) -> BudgetPlan {
    let hr = sizes.len() as u8;
    let lr = (1..=hr).rev().find(|&r| sizes[r as usize - 1] <= bw);
    let human_budget = match lr {
        None => 0,
        Some(r) => {
            let spare = bw - sizes[r as usize - 1];
            let by_bandwidth = spare.checked_div(per_tile_bytes).unwrap_or(u64::MAX);
            let by_time = if mu_s > 0.0 { (cap_s / mu_s).floor() as u64 } else { u64::MAX };
            by_bandwidth.min(by_time).min(tile_count as u64) as usize
        }
    };
    BudgetPlan { lr, hr, human_budget, tile_count }
}

/// Plans the streamlined run for `cs` on `ch`.
pub fn compute_budget(
    cs: &Codestream,
    ch: &ChannelSpec,
    mu_s: f64,
    cap_s: f64,
    estimate: TileSizeEstimate,
    index_cost: IndexCost,
) -> Result<BudgetPlan, CodestreamError> {
    let hr = cs.max_resolution();
    let sizes: Vec<u64> = (1..=hr).map(|r| codestream::size_of_all(cs, r)).collect::<Result<_, _>>()?;
    let tile_count = cs.tiles().len() as u32;
    let tile_bytes = match estimate {
        TileSizeEstimate::Max => codestream::tile_sizes(cs, hr)?.into_iter().map(|(_, s)| s).max().unwrap_or(0),
        TileSizeEstimate::Mean => sizes[hr as usize - 1] / tile_count.max(1) as u64,
    };
    let index_bytes = match index_cost {
        IndexCost::Free => 0,
        IndexCost::PerIndex(b) => b as u64,
    };
    Ok(plan_budget(&sizes, bandwidth_budget(ch), tile_bytes + index_bytes, mu_s, cap_s, tile_count))
}

/// Distinct tiles of the least confident boxes, in selection order.
///
/// Boxes are ranked by confidence ascending, then tile index, then position
/// in `anns`.
pub fn select_tiles_for_human(anns: &AnnotationSet, budget: usize) -> Vec<u32> {
    let mut order: Vec<usize> = (0..anns.boxes.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&anns.boxes[a], &anns.boxes[b]);
        x.confidence.total_cmp(&y.confidence).then(x.tile_index.cmp(&y.tile_index)).then(a.cmp(&b))
    });
    let mut seen = HashSet::new();
    let mut tiles = Vec::new();
    for i in order {
        if tiles.len() >= budget {
            break;
        }
        let t = anns.boxes[i].tile_index;
        if seen.insert(t) {
            tiles.push(t);
        }
    }
    tiles
}

/// Transfer and human time for the baseline: `(t_tr, t_hum)`.
pub fn baseline_times(hr_bytes: u64, ch: &ChannelSpec, mu_s: f64, human_tiles: usize) -> (f64, f64) {
    (ch.seconds_for(hr_bytes), metrics::human_time(human_tiles, mu_s))
}

/// Transfer and human time for the streamlined framework: `(t_tr, t_hum)`.
pub fn streamlined_times(
    lr_bytes: u64,
    hr_selected_bytes: u64,
    ch: &ChannelSpec,
    mu_s: f64,
    human_tiles: usize,
) -> (f64, f64) {
    (ch.seconds_for(lr_bytes + hr_selected_bytes), metrics::human_time(human_tiles, mu_s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub tile_size_estimate: TileSizeEstimate,
    pub index_cost: IndexCost,
    /// Fixed delay charged once per run for on-board and ground compute.
    pub compute_delay_s: f64,
    pub iou_threshold: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tile_size_estimate: TileSizeEstimate::Max,
            index_cost: IndexCost::Free,
            compute_delay_s: 0.0,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
        }
    }
}

/// One scene, encoded once and shared by every run on it.
pub struct Mission<'a> {
    codestream: Codestream,
    grid: TileGrid,
    detector: &'a dyn Detector,
    ground_truth: &'a [GroundTruthBox],
    seed: u64,
}

impl<'a> Mission<'a> {
    pub fn new(
        img: &Image,
        grid: TileGrid,
        levels: u8,
        detector: &'a dyn Detector,
        ground_truth: &'a [GroundTruthBox],
        seed: u64,
    ) -> Result<Self, PipelineError> {
        let codestream = codestream::encode(img, &grid, levels)?;
        Ok(Self { codestream, grid, detector, ground_truth, seed })
    }

    pub fn codestream(&self) -> &Codestream {
        &self.codestream
    }

    pub fn grid(&self) -> &TileGrid {
        &self.grid
    }

    pub fn levels(&self) -> u8 {
        self.codestream.levels()
    }

    pub fn ground_truth(&self) -> &[GroundTruthBox] {
        self.ground_truth
    }

    fn all_tiles(&self) -> Vec<u32> {
        (0..self.grid.tile_count()).collect()
    }

    fn detect(&self, tiles: &[(u32, Image)], resolution: u8) -> Result<AnnotationSet, PipelineError> {
        let req = DetectionRequest { tiles, resolution, levels: self.levels(), grid: &self.grid, seed: self.seed };
        Ok(self.detector.detect(&req)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Detector boxes followed by human boxes.
    pub annotations: AnnotationSet,
    pub plan: BudgetPlan,
    pub timeline: TimelineReport,
    pub feasible: bool,
    pub selected_tiles: Vec<u32>,
    pub transfers: Vec<TransferRecord>,
}

impl RunResult {
    fn infeasible(plan: BudgetPlan) -> Self {
        Self {
            annotations: AnnotationSet::default(),
            plan,
            timeline: TimelineReport::infeasible(),
            feasible: false,
            selected_tiles: Vec::new(),
            transfers: Vec::new(),
        }
    }

    pub fn recall(&self) -> f64 {
        self.timeline.final_recall()
    }
}

/// Builds the timeline: the detector sample at `t_dl`, then one sample per
/// human tile after all transfers, and returns it with the merged annotations.
#[allow(clippy::too_many_arguments)]
fn human_phase(
    mission: &Mission<'_>,
    dl: AnnotationSet,
    selected: &[u32],
    t_dl: f64,
    t_tr: f64,
    mu_s: f64,
    opts: &RunOptions,
) -> (AnnotationSet, TimelineReport) {
    let gt = mission.ground_truth;
    let t_c = opts.compute_delay_s;
    let mut timeline = TimelineReport::new(t_tr, metrics::human_time(selected.len(), mu_s), t_c);
    timeline.push(t_dl + t_c, metrics::recall(&dl, gt, opts.iou_threshold), Phase::Dl);
    let mut merged = dl.clone();
    for k in 1..=selected.len() {
        merged = dl.merged(&human_annotate(&selected[..k], gt, &mission.grid));
        let time = t_tr + metrics::human_time(k, mu_s) + t_c;
        timeline.push(time, metrics::recall(&merged, gt, opts.iou_threshold), Phase::HumanTile(k));
    }
    (merged, timeline)
}

/// Full-resolution transfer, ground-side detection and review of the
/// `human_budget` least confident tiles.
pub fn run_baseline(
    mission: &Mission<'_>,
    ch: &ChannelSpec,
    mu_s: f64,
    human_budget: usize,
    opts: &RunOptions,
) -> Result<RunResult, PipelineError> {
    let cs = &mission.codestream;
    let hr = cs.max_resolution();
    let all = mission.all_tiles();

    let sent = transmit(codestream::size_of_all(cs, hr)?, ch, TransferLabel::HighResAll);
    let tiles = codestream::decode(cs, &all, hr)?;
    let dl = mission.detect(&tiles, hr)?;
    drop(tiles);

    let selected = select_tiles_for_human(&dl, human_budget);
    if !selected.is_empty() {
        // ground-side extraction: no link time
        let chosen = codestream::extract(cs, &selected, hr)?;
        codestream::decode(&chosen, &selected, hr)?;
    }
    let (t_tr, _) = baseline_times(sent.bytes, ch, mu_s, selected.len());
    let (annotations, timeline) = human_phase(mission, dl, &selected, t_tr, t_tr, mu_s, opts);
    let plan = BudgetPlan { lr: Some(hr), hr, human_budget, tile_count: cs.tiles().len() as u32 };
    Ok(RunResult { annotations, plan, timeline, feasible: true, selected_tiles: selected, transfers: vec![sent] })
}

/// Budgeted low-resolution transfer, detection on the ground, then
/// full-resolution transfer and review of the least confident tiles.
///
/// When the budget allows full resolution for every tile, the selected tiles
/// are already on the ground and are not sent again.
pub fn run_streamlined(
    mission: &Mission<'_>,
    ch: &ChannelSpec,
    mu_s: f64,
    cap_s: f64,
    opts: &RunOptions,
) -> Result<RunResult, PipelineError> {
    let cs = &mission.codestream;
    let plan = compute_budget(cs, ch, mu_s, cap_s, opts.tile_size_estimate, opts.index_cost)?;
    let Some(lr) = plan.lr else {
        return Ok(RunResult::infeasible(plan));
    };
    let hr = plan.hr;
    let all = mission.all_tiles();

    let low = codestream::extract(cs, &all, lr)?;
    let lr_sent = transmit(codestream::size_of_all(&low, lr)?, ch, TransferLabel::LowResAll);
    let tiles = codestream::decode(&low, &all, lr)?;
    let dl = mission.detect(&tiles, lr)?;
    drop(tiles);
    let t_dl = lr_sent.seconds;

    let selected = select_tiles_for_human(&dl, plan.human_budget);
    let mut transfers = vec![lr_sent];
    let mut hr_bytes = 0;
    if !selected.is_empty() {
        let idx = transmit_indices(selected.len(), ch, opts.index_cost);
        hr_bytes += idx.bytes;
        transfers.push(idx);
        let chosen = if lr == hr { low } else { codestream::extract(cs, &selected, hr)? };
        if lr != hr {
            let sent = transmit(codestream::size_of_all(&chosen, hr)?, ch, TransferLabel::HighResSelected);
            hr_bytes += sent.bytes;
            transfers.push(sent);
        }
        codestream::decode(&chosen, &selected, hr)?;
    }
    let (t_tr, _) = streamlined_times(lr_sent.bytes, hr_bytes, ch, mu_s, selected.len());
    let (annotations, timeline) = human_phase(mission, dl, &selected, t_dl, t_tr, mu_s, opts);
    Ok(RunResult { annotations, plan, timeline, feasible: true, selected_tiles: selected, transfers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{DetectionBox, DetectorModel, OracleDetector, Source};
    use crate::raster::generate_scene;
    use proptest::prelude::*;

    fn rel_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn budget_examples() {
        let sizes = [100_000, 400_000, 1_600_000, 6_400_000, 25_600_000];
        let p = plan_budget(&sizes, 2_000_000, 100_000, 30.0, 300.0, 64);
        assert_eq!((p.lr, p.hr, p.human_budget), (Some(3), 5, 4));
        let p = plan_budget(&sizes, 30_000_000, 100_000, 30.0, 300.0, 64);
        assert_eq!((p.lr, p.human_budget), (Some(5), 10));
        let p = plan_budget(&sizes, 50_000, 100_000, 30.0, 300.0, 64);
        assert_eq!((p.lr, p.human_budget), (None, 0));
        assert!(!p.is_feasible());
        assert_eq!(plan_budget(&sizes, 30_000_000, 100_000, 30.0, 300.0, 3).human_budget, 3);
    }

    #[test]
    fn indexer_examples() {
        let mk = |t: u32, c: f64| DetectionBox {
            tile_index: t,
            class_id: 0,
            x: 0,
            y: 0,
            w: 1,
            h: 1,
            confidence: c,
            source: Source::Dl,
        };
        let anns = AnnotationSet::new(vec![mk(0, 0.9), mk(1, 0.2), mk(2, 0.5), mk(3, 0.2)], None);
        assert_eq!(select_tiles_for_human(&anns, 2), vec![1, 3]);
        assert!(select_tiles_for_human(&anns, 0).is_empty());
        assert_eq!(select_tiles_for_human(&anns, 10), vec![1, 3, 2, 0]);
        let dup = AnnotationSet::new(vec![mk(4, 0.1), mk(4, 0.15), mk(2, 0.3)], None);
        assert_eq!(select_tiles_for_human(&dup, 2), vec![4, 2]);
    }

    #[test]
    fn timing_examples() {
        let ch = ChannelSpec::new(16_000.0, 1000.0).unwrap();
        let (tr, hum) = baseline_times(25_600_000, &ch, 30.0, 10);
        assert!(rel_eq(tr + hum, 13_100.0));
        let (tr, hum) = streamlined_times(1_600_000, 380_000, &ch, 30.0, 4);
        assert!(rel_eq(tr, 990.0));
        assert!(rel_eq(tr + hum, 1_110.0));
    }

    struct Scene {
        img: Image,
        grid: TileGrid,
        gt: Vec<GroundTruthBox>,
    }

    fn scene(seed: u64) -> Scene {
        let (img, gt) = generate_scene(seed, 256, 256, 12, (6, 20)).unwrap();
        let grid = TileGrid::for_image(&img, 64, 64).unwrap();
        Scene { img, grid, gt }
    }

    fn oracle(gt: &[GroundTruthBox]) -> OracleDetector {
        OracleDetector { model: DetectorModel::default_for_levels(4), ground_truth: gt.to_vec() }
    }

    #[test]
    fn perfect_detector_without_budget() {
        let s = scene(3);
        let det = OracleDetector { model: DetectorModel::perfect(4), ground_truth: s.gt.clone() };
        let m = Mission::new(&s.img, s.grid, 4, &det, &s.gt, 1).unwrap();
        let ch = ChannelSpec::from_kbps(88.0, 600.0).unwrap();
        let r = run_baseline(&m, &ch, 30.0, 0, &RunOptions::default()).unwrap();
        assert_eq!(r.timeline.t_rs(), r.timeline.t_tr());
        assert_eq!(r.recall(), 1.0);
    }

    #[test]
    fn empty_detections_select_nothing() {
        let s = scene(4);
        let model = DetectorModel::new(vec![0.0; 4], vec![0.5; 4], 0.1, 0.5, 0.0).unwrap();
        let det = OracleDetector { model, ground_truth: s.gt.clone() };
        let m = Mission::new(&s.img, s.grid, 4, &det, &s.gt, 1).unwrap();
        let ch = ChannelSpec::from_kbps(88.0, 600.0).unwrap();
        let r = run_baseline(&m, &ch, 30.0, 10, &RunOptions::default()).unwrap();
        assert!(r.selected_tiles.is_empty());
        assert_eq!(r.recall(), 0.0);
        assert_eq!(r.timeline.t_hum(), 0.0);
    }

    #[test]
    fn infeasible_streamlined() {
        let s = scene(5);
        let det = oracle(&s.gt);
        let m = Mission::new(&s.img, s.grid, 4, &det, &s.gt, 1).unwrap();
        let ch = ChannelSpec::new(8.0, 1.0).unwrap();
        let r = run_streamlined(&m, &ch, 30.0, 300.0, &RunOptions::default()).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.plan.lr, None);
        assert_eq!(r.recall(), 0.0);
        assert!(r.annotations.is_empty() && r.transfers.is_empty() && r.timeline.events().is_empty());
    }

    #[test]
    fn equivalent_at_unlimited_bandwidth() {
        let s = scene(6);
        let det = oracle(&s.gt);
        let m = Mission::new(&s.img, s.grid, 4, &det, &s.gt, 7).unwrap();
        let ch = ChannelSpec::from_kbps(1e6, 1e6).unwrap();
        let opts = RunOptions::default();
        let prop = run_streamlined(&m, &ch, 30.0, 300.0, &opts).unwrap();
        assert_eq!(prop.plan.lr, Some(4));
        let base = run_baseline(&m, &ch, 30.0, prop.plan.human_budget, &opts).unwrap();
        assert_eq!(base.annotations, prop.annotations);
        assert_eq!(base.selected_tiles, prop.selected_tiles);
        assert_eq!(base.timeline.t_hum(), prop.timeline.t_hum());
        assert!(rel_eq(base.timeline.t_tr(), prop.timeline.t_tr()));
    }

    #[test]
    fn compute_delay_shifts_response() {
        let s = scene(8);
        let det = oracle(&s.gt);
        let m = Mission::new(&s.img, s.grid, 4, &det, &s.gt, 2).unwrap();
        let ch = ChannelSpec::from_kbps(88.0, 600.0).unwrap();
        let plain = run_baseline(&m, &ch, 30.0, 3, &RunOptions::default()).unwrap();
        let slow =
            run_baseline(&m, &ch, 30.0, 3, &RunOptions { compute_delay_s: 5.0, ..RunOptions::default() }).unwrap();
        assert!(rel_eq(slow.timeline.t_rs(), plain.timeline.t_rs() + 5.0));
        assert_eq!(slow.timeline.events().last().unwrap().time_s, slow.timeline.t_rs());
    }

    fn indexer_oracle(anns: &AnnotationSet, budget: usize) -> Vec<u32> {
        // each tile ranks by its best (lowest) box key
        let mut best: Vec<(f64, u32, usize)> = Vec::new();
        for t in anns.boxes.iter().map(|b| b.tile_index).collect::<HashSet<_>>() {
            let key = anns
                .boxes
                .iter()
                .enumerate()
                .filter(|(_, b)| b.tile_index == t)
                .map(|(i, b)| (b.confidence, t, i))
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)))
                .unwrap();
            best.push(key);
        }
        best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        best.into_iter().take(budget).map(|k| k.1).collect()
    }

    proptest! {
        #[test]
        fn plan_matches_brute_force(
            steps in prop::collection::vec(0u64..5_000, 1..7),
            bw in 0u64..40_000,
            tile in 1u64..3_000,
            mu in 1u32..60,
            cap in 0u32..600,
            m in 1u32..40,
        ) {
            let sizes: Vec<u64> = steps.iter().scan(0, |acc, s| { *acc += s + 1; Some(*acc) }).collect();
            let p = plan_budget(&sizes, bw, tile, mu as f64, cap as f64, m);
            let mut lr = None;
            for r in 1..=sizes.len() {
                if sizes[r - 1] <= bw { lr = Some(r as u8); }
            }
            prop_assert_eq!(p.lr, lr);
            if let Some(r) = lr {
                let n = ((bw - sizes[r as usize - 1]) / tile).min((cap / mu) as u64).min(m as u64);
                prop_assert_eq!(p.human_budget as u64, n);
                prop_assert!(sizes[r as usize - 1] + p.human_budget as u64 * tile <= bw);
            } else {
                prop_assert_eq!(p.human_budget, 0);
            }
        }

        #[test]
        fn indexer_matches_oracle(
            boxes in prop::collection::vec((0u32..12, 0u8..6), 0..30),
            budget in 0usize..14,
        ) {
            let anns = AnnotationSet::new(
                boxes.iter().map(|&(t, c)| DetectionBox {
                    tile_index: t, class_id: 0, x: 0, y: 0, w: 1, h: 1,
                    confidence: c as f64 / 5.0, source: Source::Dl,
                }).collect(),
                None,
            );
            prop_assert_eq!(select_tiles_for_human(&anns, budget), indexer_oracle(&anns, budget));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn streamlined_respects_limit_and_human_help_is_monotone(
            seed in 0u64..1000,
            kbps in 1.0f64..60.0,
            limit in 10.0f64..600.0,
        ) {
            let s = scene(seed);
            let det = oracle(&s.gt);
            let m = Mission::new(&s.img, s.grid, 4, &det, &s.gt, seed).unwrap();
            let ch = ChannelSpec::from_kbps(kbps, limit).unwrap();
            let r = run_streamlined(&m, &ch, 30.0, 300.0, &RunOptions::default()).unwrap();
            if r.feasible {
                prop_assert!(r.timeline.t_tr() <= limit);
                let ev = r.timeline.events();
                prop_assert!(ev.windows(2).all(|w| w[0].time_s < w[1].time_s && w[0].recall <= w[1].recall));
                prop_assert_eq!(ev.last().unwrap().time_s, r.timeline.t_rs());
                prop_assert!(r.selected_tiles.len() <= r.plan.human_budget);
            } else {
                prop_assert_eq!(r.recall(), 0.0);
            }
        }
    }
}
