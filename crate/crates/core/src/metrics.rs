//! IoU, thresholded recall, response-time accounting and framework comparison.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::annotate::{AnnotationSet, Source};
use crate::raster::{GroundTruthBox, Rect};

/// Matching threshold used throughout; a pair must score strictly above it.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("response ratio undefined: {0} run is infeasible")]
    Infeasible(&'static str),
    #[error("response ratio undefined: proposed response time is {0} s")]
    ZeroResponse(f64),
}

pub fn iou(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Fraction of ground-truth boxes matched one-to-one by some detection with
/// IoU strictly above `threshold`.
///
/// Detections are visited by descending confidence (HUM before DL on ties,
/// then insertion order); each takes the unmatched ground-truth box of highest
/// IoU, lowest index on ties. Empty ground truth scores 1.
pub fn recall(anns: &AnnotationSet, gt: &[GroundTruthBox], threshold: f64) -> f64 {
    if gt.is_empty() {
        return 1.0;
    }
    matched_count(anns, gt, threshold) as f64 / gt.len() as f64
}

pub fn matched_count(anns: &AnnotationSet, gt: &[GroundTruthBox], threshold: f64) -> usize {
    let gt_rects: Vec<Rect> = gt.iter().map(GroundTruthBox::rect).collect();
    let mut matched = vec![false; gt.len()];
    let mut count = 0;
    for i in match_order(anns) {
        let det = anns.boxes[i].rect();
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt_rects.iter().enumerate() {
            if matched[j] {
                continue;
            }
            let v = iou(&det, g);
            if v > threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        if let Some((j, _)) = best {
            matched[j] = true;
            count += 1;
        }
    }
    count
}

/// Detection indices in matching order.
pub fn match_order(anns: &AnnotationSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..anns.boxes.len()).collect();
    let rank = |s: Source| match s {
        Source::Hum => 0,
        Source::Dl => 1,
    };
    order.sort_by(|&a, &b| {
        let (da, db) = (&anns.boxes[a], &anns.boxes[b]);
        db.confidence.total_cmp(&da.confidence).then_with(|| rank(da.source).cmp(&rank(db.source))).then(a.cmp(&b))
    });
    order
}

pub fn human_time(n_tiles: usize, mu_s: f64) -> f64 {
    n_tiles as f64 * mu_s
}

/// Positive when the baseline found more.
pub fn recall_difference(base_recall: f64, prop_recall: f64) -> f64 {
    base_recall - prop_recall
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Dl,
    /// 1-based count of human-annotated tiles so far.
    HumanTile(usize),
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Dl => f.write_str("DL"),
            Phase::HumanTile(k) => write!(f, "HUM-tile-{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineEvent {
    pub time_s: f64,
    pub recall: f64,
    pub phase: Phase,
}

/// Recall-over-time samples for one framework run.
///
/// The response time is derived, never stored, so `t_rs = t_tr + t_hum +
/// t_compute` holds by construction. `t_compute` is zero unless a fixed
/// compute delay is configured.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineReport {
    events: Vec<TimelineEvent>,
    t_tr: f64,
    t_hum: f64,
    t_compute: f64,
    feasible: bool,
}

impl TimelineReport {
    pub fn new(t_tr: f64, t_hum: f64, t_compute: f64) -> Self {
        Self { events: Vec::new(), t_tr, t_hum, t_compute, feasible: true }
    }

    /// A run that never got data to the ground: no events, zero times.
    pub fn infeasible() -> Self {
        Self { events: Vec::new(), t_tr: 0.0, t_hum: 0.0, t_compute: 0.0, feasible: false }
    }

    /// Appends a sample. A sample at the same instant as the previous one
    /// replaces it, keeping times strictly increasing.
    pub fn push(&mut self, time_s: f64, recall: f64, phase: Phase) {
        if let Some(last) = self.events.last_mut() {
            debug_assert!(time_s >= last.time_s, "timeline must not go backwards");
            if last.time_s.total_cmp(&time_s) == Ordering::Equal {
                *last = TimelineEvent { time_s, recall, phase };
                return;
            }
        }
        self.events.push(TimelineEvent { time_s, recall, phase });
    }

    pub fn events(&self) -> &[TimelineEvent] {
        &self.events
    }

    pub fn t_tr(&self) -> f64 {
        self.t_tr
    }

    pub fn t_hum(&self) -> f64 {
        self.t_hum
    }

    pub fn t_compute(&self) -> f64 {
        self.t_compute
    }

    pub fn t_rs(&self) -> f64 {
        self.t_tr + self.t_hum + self.t_compute
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    /// Recall at the end of the run; 0 for infeasible runs.
    pub fn final_recall(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.recall)
    }
}

pub fn response_ratio(base: &TimelineReport, prop: &TimelineReport) -> Result<f64, MetricsError> {
    if !base.is_feasible() {
        return Err(MetricsError::Infeasible("baseline"));
    }
    if !prop.is_feasible() {
        return Err(MetricsError::Infeasible("proposed"));
    }
    let t = prop.t_rs();
    if t.is_nan() || t <= 0.0 {
        return Err(MetricsError::ZeroResponse(t));
    }
    Ok(base.t_rs() / t)
}

/// One scenario cell of the baseline-versus-streamlined comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub data_rate_kbps: f64,
    pub t_tr_limit_s: f64,
    pub feasible_base: bool,
    pub feasible_prop: bool,
    pub t_rs_base: Option<f64>,
    pub t_rs_prop: Option<f64>,
    pub t_rs_ratio: Option<f64>,
    pub recall_base: f64,
    pub recall_prop: f64,
    pub recall_diff: f64,
    pub lr_level: Option<u8>,
    pub human_tiles: usize,
}

impl ComparisonRow {
    pub fn new(
        data_rate_kbps: f64,
        t_tr_limit_s: f64,
        base: &TimelineReport,
        prop: &TimelineReport,
        lr_level: Option<u8>,
        human_tiles: usize,
    ) -> Self {
        let recall_base = base.final_recall();
        let recall_prop = prop.final_recall();
        Self {
            data_rate_kbps,
            t_tr_limit_s,
            feasible_base: base.is_feasible(),
            feasible_prop: prop.is_feasible(),
            t_rs_base: base.is_feasible().then(|| base.t_rs()),
            t_rs_prop: prop.is_feasible().then(|| prop.t_rs()),
            t_rs_ratio: response_ratio(base, prop).ok(),
            recall_base,
            recall_prop,
            recall_diff: recall_difference(recall_base, recall_prop),
            lr_level,
            human_tiles,
        }
    }
}
