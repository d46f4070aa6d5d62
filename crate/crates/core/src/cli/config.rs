//! Scenario configuration files.
//!
//! Line-based `key = value`; `#` starts a comment; lists are comma-separated.
//! Durations are seconds, or minutes with an `m` suffix. Relative paths are
//! resolved against the config file's directory.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::annotate::DetectorModel;
use crate::channel::IndexCost;
use crate::codestream::MAX_LEVELS;
use crate::metrics::DEFAULT_IOU_THRESHOLD;
use crate::pipeline::{RunOptions, TileSizeEstimate};

pub const DEFAULT_MU_S: f64 = 30.0;
pub const DEFAULT_CAP_S: f64 = 300.0;
pub const DEFAULT_LEVELS: u8 = 5;
pub const DEFAULT_OBJECT_SIZE: (u32, u32) = (8, 40);

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: {msg}")]
    Conflict { line: usize, msg: String },
    #[error("missing required key `{key}` (end of file, line {line})")]
    Missing { line: usize, key: String },
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    File { image: PathBuf, ground_truth: PathBuf },
    Synthetic { seed: u64, width: u32, height: u32, objects: u32, object_size: (u32, u32) },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorSource {
    Oracle(DetectorModel),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub image: ImageSource,
    pub tile_w: u32,
    pub tile_h: u32,
    pub levels: u8,
    pub data_rates_kbps: Vec<f64>,
    pub t_tr_limits_s: Vec<f64>,
    pub mu_s: f64,
    pub cap_s: f64,
    pub detector: DetectorSource,
    pub baseline_human_budget: usize,
    pub seed: u64,
    pub options: RunOptions,
}

impl ScenarioConfig {
    /// Synthetic scenario with every optional value at its default.
    pub fn synthetic(width: u32, height: u32, objects: u32, tile: u32, seed: u64) -> Self {
        Self {
            image: ImageSource::Synthetic { seed, width, height, objects, object_size: DEFAULT_OBJECT_SIZE },
            tile_w: tile,
            tile_h: tile,
            levels: DEFAULT_LEVELS,
            data_rates_kbps: vec![22.0, 88.0, 176.0],
            t_tr_limits_s: vec![180.0, 600.0, 1800.0],
            mu_s: DEFAULT_MU_S,
            cap_s: DEFAULT_CAP_S,
            detector: DetectorSource::Oracle(DetectorModel::default_for_levels(DEFAULT_LEVELS)),
            baseline_human_budget: (DEFAULT_CAP_S / DEFAULT_MU_S) as usize,
            seed,
            options: RunOptions::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "image",
    "ground_truth",
    "synthetic",
    "scene_seed",
    "object_size",
    "tile",
    "levels",
    "data_rates",
    "t_TRlimits",
    "mu_tHUM",
    "t_HUM_cap",
    "detect_prob",
    "confidence_mean",
    "confidence_spread",
    "jitter_scale",
    "false_positive_rate",
    "detections",
    "baseline_human_budget",
    "seed",
    "tile_size_estimate",
    "index_cost_bytes",
    "compute_delay",
    "iou_threshold",
];

struct Entries {
    values: HashMap<&'static str, (usize, String)>,
    last_line: usize,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.values.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<T>(&self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => f(v).map(Some).map_err(|msg| ConfigError::Value { line, key: key.into(), msg }),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(self.last_line, |(l, _)| l)
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<&str> = v.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err("empty list item".into());
    }
    items.into_iter().map(item).collect()
}

fn int<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("`{v}` is not a valid integer"))
}

fn real(v: &str) -> Result<f64, String> {
    match v.trim().parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("`{v}` is not a finite number")),
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be positive"))
    }
}

fn non_negative(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be >= 0"))
    }
}

/// Seconds, or minutes with an `m` suffix.
pub fn duration(v: &str) -> Result<f64, String> {
    let v = v.trim();
    match v.strip_suffix('m') {
        Some(mins) => non_negative(mins.trim_end()).map(|m| m * 60.0),
        None => non_negative(v.strip_suffix('s').unwrap_or(v).trim_end()),
    }
}

fn positive_duration(v: &str) -> Result<f64, String> {
    let d = duration(v)?;
    if d > 0.0 {
        Ok(d)
    } else {
        Err("duration must be positive".into())
    }
}

fn probability(v: &str) -> Result<f64, String> {
    let x = real(v)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is outside [0, 1]"))
    }
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let mut values = HashMap::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (k, v) = (k.trim(), v.trim());
        let key =
            *KEYS.iter().find(|&&known| known == k).ok_or_else(|| ConfigError::UnknownKey { line, key: k.into() })?;
        if v.is_empty() {
            return Err(ConfigError::Value { line, key: k.into(), msg: "empty value".into() });
        }
        if let Some((first, _)) = values.insert(key, (line, v.to_string())) {
            return Err(ConfigError::Duplicate { line, key: k.into(), first });
        }
    }
    let e = Entries { values, last_line };
    let path = |v: &str| -> Result<PathBuf, String> { Ok(base_dir.join(v)) };

    let seed = e.get("seed", int::<u64>)?.unwrap_or(0);

    let object_size = e
        .get("object_size", |v| {
            let s = list(v, int::<u32>)?;
            match s[..] {
                [a, b] if a >= 1 && a <= b => Ok((a, b)),
                _ => Err("expected `min, max` with 1 <= min <= max".into()),
            }
        })?
        .unwrap_or(DEFAULT_OBJECT_SIZE);
    let image = match (e.get("image", path)?, e.get("synthetic", |v| list(v, int::<u32>))?) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Conflict {
                line: e.line_of("synthetic"),
                msg: "set either `image` or `synthetic`, not both".into(),
            })
        }
        (None, None) => return Err(ConfigError::Missing { line: last_line, key: "image` or `synthetic".into() }),
        (Some(image), None) => {
            let ground_truth = e
                .get("ground_truth", path)?
                .ok_or_else(|| ConfigError::Missing { line: last_line, key: "ground_truth".into() })?;
            for k in ["scene_seed", "object_size"] {
                if e.raw(k).is_some() {
                    return Err(ConfigError::Conflict {
                        line: e.line_of(k),
                        msg: format!("`{k}` only applies to synthetic scenes"),
                    });
                }
            }
            ImageSource::File { image, ground_truth }
        }
        (None, Some(dims)) => {
            let line = e.line_of("synthetic");
            let [width, height, objects] = dims[..] else {
                return Err(ConfigError::Value {
                    line,
                    key: "synthetic".into(),
                    msg: "expected `width, height, objects`".into(),
                });
            };
            if width == 0 || height == 0 {
                return Err(ConfigError::Value {
                    line,
                    key: "synthetic".into(),
                    msg: "image must be at least 1x1".into(),
                });
            }
            if e.raw("ground_truth").is_some() {
                return Err(ConfigError::Conflict {
                    line: e.line_of("ground_truth"),
                    msg: "`ground_truth` requires `image`".into(),
                });
            }
            let scene_seed = e.get("scene_seed", int::<u64>)?.unwrap_or(seed);
            ImageSource::Synthetic { seed: scene_seed, width, height, objects, object_size }
        }
    };

    let (tile_w, tile_h) = e
        .get("tile", |v| {
            let t = list(v, int::<u32>)?;
            match t[..] {
                [s] if s > 0 => Ok((s, s)),
                [w, h] if w > 0 && h > 0 => Ok((w, h)),
                _ => Err("expected `size` or `width, height`, positive".into()),
            }
        })?
        .ok_or(ConfigError::Missing { line: last_line, key: "tile".into() })?;

    let levels = e
        .get("levels", |v| {
            let l = int::<u8>(v)?;
            if (1..=MAX_LEVELS).contains(&l) {
                Ok(l)
            } else {
                Err(format!("levels must be in 1..={MAX_LEVELS}"))
            }
        })?
        .unwrap_or(DEFAULT_LEVELS);

    let data_rates_kbps = e
        .get("data_rates", |v| list(v, positive))?
        .ok_or(ConfigError::Missing { line: last_line, key: "data_rates".into() })?;
    let t_tr_limits_s = e
        .get("t_TRlimits", |v| list(v, positive_duration))?
        .ok_or(ConfigError::Missing { line: last_line, key: "t_TRlimits".into() })?;
    let mu_s = e.get("mu_tHUM", duration)?.unwrap_or(DEFAULT_MU_S);
    let cap_s = e.get("t_HUM_cap", duration)?.unwrap_or(DEFAULT_CAP_S);

    let profile_keys = ["detect_prob", "confidence_mean", "confidence_spread", "jitter_scale", "false_positive_rate"];
    let detector = match e.get("detections", path)? {
        Some(p) => {
            if let Some(k) = profile_keys.iter().find(|k| e.raw(k).is_some()) {
                return Err(ConfigError::Conflict {
                    line: e.line_of(k),
                    msg: format!("`{k}` conflicts with `detections`"),
                });
            }
            DetectorSource::File(p)
        }
        None => {
            let reference = DetectorModel::default_for_levels(levels);
            let table = |key: &str, default: Vec<f64>| -> Result<Vec<f64>, ConfigError> {
                let t = e.get(key, |v| list(v, probability))?.unwrap_or(default);
                if t.len() != levels as usize {
                    return Err(ConfigError::Value {
                        line: e.line_of(key),
                        key: key.into(),
                        msg: format!("expected {levels} values (one per resolution level), got {}", t.len()),
                    });
                }
                Ok(t)
            };
            let p = table("detect_prob", (1..=levels).map(|r| reference.detect_prob(r)).collect())?;
            let c = table("confidence_mean", (1..=levels).map(|r| reference.confidence_mean(r)).collect())?;
            let sigma = e.get("confidence_spread", non_negative)?.unwrap_or(reference.confidence_spread());
            let jitter = e.get("jitter_scale", non_negative)?.unwrap_or(reference.jitter_scale());
            let fp = e.get("false_positive_rate", non_negative)?.unwrap_or(reference.false_positive_rate());
            let model = DetectorModel::new(p, c, sigma, jitter, fp).map_err(|err| ConfigError::Value {
                line: e.line_of("detect_prob"),
                key: "detect_prob".into(),
                msg: err.to_string(),
            })?;
            DetectorSource::Oracle(model)
        }
    };

    let default_budget = if mu_s > 0.0 { (cap_s / mu_s).floor() as usize } else { 0 };
    let baseline_human_budget = e.get("baseline_human_budget", int::<usize>)?.unwrap_or(default_budget);

    let tile_size_estimate = e
        .get("tile_size_estimate", |v| match v {
            "max" => Ok(TileSizeEstimate::Max),
            "mean" => Ok(TileSizeEstimate::Mean),
            _ => Err("expected `max` or `mean`".into()),
        })?
        .unwrap_or_default();
    let index_cost = match e.get("index_cost_bytes", int::<u32>)? {
        None | Some(0) => IndexCost::Free,
        Some(b) => IndexCost::PerIndex(b),
    };
    let compute_delay_s = e.get("compute_delay", duration)?.unwrap_or(0.0);
    let iou_threshold = e
        .get("iou_threshold", |v| {
            let t = real(v)?;
            if t > 0.0 && t <= 1.0 {
                Ok(t)
            } else {
                Err("threshold must be in (0, 1]".into())
            }
        })?
        .unwrap_or(DEFAULT_IOU_THRESHOLD);

    Ok(ScenarioConfig {
        image,
        tile_w,
        tile_h,
        levels,
        data_rates_kbps,
        t_tr_limits_s,
        mu_s,
        cap_s,
        detector,
        baseline_human_budget,
        seed,
        options: RunOptions { tile_size_estimate, index_cost, compute_delay_s, iou_threshold },
    })
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        parse_config_str(text, Path::new("/cfg"))
    }

    const MINIMAL: &str =
        "synthetic = 512, 512, 10\ntile = 64\ndata_rates = 22, 88, 176\nt_TRlimits = 180, 600, 1800\n";

    #[test]
    fn defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.data_rates_kbps, vec![22.0, 88.0, 176.0]);
        assert_eq!(c.t_tr_limits_s, vec![180.0, 600.0, 1800.0]);
        assert_eq!((c.mu_s, c.cap_s, c.levels), (30.0, 300.0, 5));
        assert_eq!(c.baseline_human_budget, 10);
        assert_eq!((c.tile_w, c.tile_h), (64, 64));
        assert_eq!(c.options, RunOptions::default());
        assert!(matches!(c.detector, DetectorSource::Oracle(ref m) if *m == DetectorModel::default_for_levels(5)));
        assert_eq!(
            c.image,
            ImageSource::Synthetic { seed: 0, width: 512, height: 512, objects: 10, object_size: DEFAULT_OBJECT_SIZE }
        );
    }

    #[test]
    fn minutes_comments_and_paths() {
        let text = "# scenario\nimage = scene.pgm  # relative\nground_truth = gt.csv\ntile = 64, 32\n\
                    data_rates = 22\nt_TRlimits = 3m, 10m, 30m\nmu_tHUM = 0.5m\nlevels = 3\n\
                    detect_prob = 0.2, 0.5, 0.9\nconfidence_mean = 0.3, 0.5, 0.8\nseed = 9\n\
                    tile_size_estimate = mean\nindex_cost_bytes = 4\ncompute_delay = 2\n";
        let c = parse(text).unwrap();
        assert_eq!(c.t_tr_limits_s, vec![180.0, 600.0, 1800.0]);
        assert_eq!(c.mu_s, 30.0);
        assert_eq!(c.image, ImageSource::File { image: "/cfg/scene.pgm".into(), ground_truth: "/cfg/gt.csv".into() });
        assert_eq!((c.tile_w, c.tile_h, c.levels, c.seed), (64, 32, 3, 9));
        assert_eq!(c.options.tile_size_estimate, TileSizeEstimate::Mean);
        assert_eq!(c.options.index_cost, IndexCost::PerIndex(4));
        assert_eq!(c.options.compute_delay_s, 2.0);
    }

    #[test]
    fn errors_name_the_line() {
        let unknown = format!("{MINIMAL}colour = red\n");
        assert_eq!(parse(&unknown), Err(ConfigError::UnknownKey { line: 5, key: "colour".into() }));
        let bad = "synthetic = 512, 512, 10\ntile = 64\ndata_rates = 22, fast\nt_TRlimits = 180\n";
        assert!(matches!(parse(bad), Err(ConfigError::Value { line: 3, .. })));
        let no_eq = "synthetic = 512, 512, 10\njust words\n";
        assert_eq!(parse(no_eq), Err(ConfigError::Syntax { line: 2 }));
        let dup = format!("{MINIMAL}tile = 32\n");
        assert!(matches!(parse(&dup), Err(ConfigError::Duplicate { line: 5, first: 2, .. })));
        let levels = format!("{MINIMAL}levels = 9\n");
        assert!(matches!(parse(&levels), Err(ConfigError::Value { line: 5, .. })));
        let table = format!("{MINIMAL}detect_prob = 0.5, 0.6\n");
        assert!(matches!(parse(&table), Err(ConfigError::Value { line: 5, .. })));
    }

    #[test]
    fn missing_image_source() {
        let text = "tile = 64\ndata_rates = 22\nt_TRlimits = 180\n";
        let err = parse(text).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { line: 3, .. }));
        assert!(err.to_string().contains("synthetic"));
        let no_rates = "synthetic = 64, 64, 1\ntile = 64\nt_TRlimits = 180\n";
        assert!(matches!(parse(no_rates), Err(ConfigError::Missing { ref key, .. }) if key == "data_rates"));
    }

    #[test]
    fn conflicting_sources() {
        let both = format!("{MINIMAL}image = a.pgm\n");
        assert!(matches!(parse(&both), Err(ConfigError::Conflict { .. })));
        let det = format!("{MINIMAL}detections = d.csv\njitter_scale = 2\n");
        assert!(matches!(parse(&det), Err(ConfigError::Conflict { line: 6, .. })));
    }

    #[test]
    fn durations() {
        assert_eq!(duration("3m"), Ok(180.0));
        assert_eq!(duration("45"), Ok(45.0));
        assert_eq!(duration("45s"), Ok(45.0));
        assert!(duration("-1").is_err());
        assert!(duration("m").is_err());
        assert!(positive_duration("0").is_err());
    }
}
