use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybrid_annot::codestream::read_codestream;
use hybrid_annot::raster::load_image;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybrid-annot"))
}

fn run_ok(args: &[&str], out_dir: &Path) -> Output {
    let out = bin().arg("--out-dir").arg(out_dir).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn scene(dir: &Path) -> PathBuf {
    run_ok(&["--quiet", "--seed", "5", "gen-scene", "--width", "200", "--height", "150", "--objects", "8"], dir);
    dir.join("scene.pgm")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn encode_info_decode_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene(dir.path());
    run_ok(&["encode", path_str(&img), "-o", "s.ssc", "--tile", "64", "--levels", "4"], dir.path());
    let info = run_ok(&["info", path_str(&dir.path().join("s.ssc"))], dir.path());
    let text = String::from_utf8(info.stdout).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("R=")).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[3].ends_with("dims=200x150"), "{text}");
    let sizes: Vec<u64> = lines
        .iter()
        .map(|l| l.split_whitespace().nth(1).unwrap().trim_start_matches("bytes=").parse().unwrap())
        .collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));

    run_ok(&["--quiet", "decode", path_str(&dir.path().join("s.ssc")), "-o", "back.pgm"], dir.path());
    assert_eq!(load_image(dir.path().join("back.pgm")).unwrap(), load_image(&img).unwrap());
}

#[test]
fn extract_then_decode_matches_direct_decode() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene(dir.path());
    let d = dir.path();
    run_ok(
        &["--quiet", "encode", path_str(&img), "-o", "s.ssc", "--tile", "48", "--tile-height", "40", "--levels", "3"],
        d,
    );
    let src = d.join("s.ssc");
    run_ok(&["--quiet", "extract", path_str(&src), "-o", "sub.ssc", "-r", "2", "--tiles", "1,4,7"], d);
    run_ok(&["--quiet", "decode", path_str(&d.join("sub.ssc")), "-o", "a.pgm"], d);
    run_ok(&["--quiet", "decode", path_str(&src), "-o", "b.pgm", "-r", "2", "--tiles", "1,4,7"], d);
    assert_eq!(fs::read(d.join("a.pgm")).unwrap(), fs::read(d.join("b.pgm")).unwrap());
    let sub = read_codestream(d.join("sub.ssc")).unwrap();
    assert_eq!(sub.tile_indices().collect::<Vec<_>>(), vec![1, 4, 7]);
    assert_eq!(sub.max_resolution(), 2);
}

#[test]
fn invalid_levels_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let img = scene(dir.path());
    let out = bin()
        .arg("--out-dir")
        .arg(dir.path())
        .args(["encode", path_str(&img), "-o", "x.ssc", "--levels", "9"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("levels"));
    assert!(!dir.path().join("x.ssc").exists());
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "synthetic = 64, 64, 2\ntile = 32\ndata_rates = 22\nt_TRlimits = 180\nwarp = 9\n").unwrap();
    let out = bin().arg("--out-dir").arg(dir.path()).arg("run").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("warp"), "{err}");
}

struct GridRow {
    fields: HashMap<String, String>,
}

impl GridRow {
    fn get(&self, k: &str) -> &str {
        &self.fields[k]
    }
}

fn read_grid(path: &Path) -> Vec<GridRow> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let headers: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    rd.records()
        .map(|r| GridRow { fields: headers.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect() })
        .collect()
}

#[test]
fn run_writes_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    fs::write(
        &cfg,
        "# small grid\nsynthetic = 768, 768, 25\ntile = 128\nlevels = 5\ndata_rates = 22, 88, 176\n\
         t_TRlimits = 3m, 10m, 30m\nmu_tHUM = 30\nt_HUM_cap = 5m\nseed = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    run_ok(&["--quiet", "run", path_str(&cfg)], &out);

    let header = fs::read_to_string(out.join("grid.csv")).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "data_rate_kbps,t_trlimit_s,framework_feasible_base,framework_feasible_prop,t_rs_base_s,t_rs_prop_s,t_rs_ratio,recall_base,recall_prop,recall_diff,lr_level,human_tiles"
    );
    let rows = read_grid(&out.join("grid.csv"));
    assert_eq!(rows.len(), 9);
    let order: Vec<(&str, &str)> = rows.iter().map(|r| (r.get("data_rate_kbps"), r.get("t_trlimit_s"))).collect();
    assert_eq!(order[..4], [("22", "180"), ("22", "600"), ("22", "1800"), ("88", "180")]);

    for row in &rows {
        let (rate, limit) = (row.get("data_rate_kbps"), row.get("t_trlimit_s"));
        let mut tl = csv::Reader::from_path(out.join(format!("timeline_{rate}_{limit}.csv"))).unwrap();
        assert_eq!(tl.headers().unwrap(), vec!["time_s", "recall", "phase", "framework"]);
        let mut last: HashMap<String, (f64, String, usize)> = HashMap::new();
        for rec in tl.records() {
            let rec = rec.unwrap();
            let t: f64 = rec[0].parse().unwrap();
            let k = rec[2].strip_prefix("HUM-tile-").map_or(0, |k| k.parse().unwrap());
            if rec[2] != *"DL" {
                assert!(k >= 1, "bad phase {}", &rec[2]);
            }
            last.insert(rec[3].to_string(), (t, rec[1].to_string(), k));
        }
        let limit_s: f64 = limit.parse().unwrap();
        for (fw, col_t, col_r) in
            [("baseline", "t_rs_base_s", "recall_base"), ("proposed", "t_rs_prop_s", "recall_prop")]
        {
            match last.get(fw) {
                Some((t, r, k)) => {
                    let t_rs: f64 = row.get(col_t).parse().unwrap();
                    assert!((t - t_rs).abs() < 1e-5, "{fw} {rate}/{limit}: {t} vs {t_rs}");
                    assert_eq!(r, row.get(col_r));
                    // t_TR = t_RS - t_HUM, with t_HUM = k * 30 s
                    let t_tr = t_rs - *k as f64 * 30.0;
                    assert!(t_tr > 0.0);
                    if fw == "proposed" {
                        assert!(t_tr <= limit_s + 1e-6, "{rate}/{limit}: t_TR {t_tr}");
                        assert_eq!(k.to_string(), row.get("human_tiles"));
                    }
                }
                None => {
                    assert_eq!(fw, "proposed");
                    assert_eq!(row.get("framework_feasible_prop"), "false");
                    assert_eq!(row.get(col_t), "NA");
                }
            }
        }
        if row.get("t_rs_ratio") != "NA" {
            let ratio: f64 = row.get("t_rs_ratio").parse().unwrap();
            let b: f64 = row.get("t_rs_base_s").parse().unwrap();
            let p: f64 = row.get("t_rs_prop_s").parse().unwrap();
            assert!((ratio - b / p).abs() < 1e-4 * ratio);
        }
    }

    for rate in ["22", "88", "176"] {
        let text = fs::read_to_string(out.join(format!("recall_vs_time_{rate}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&text).expect("well-formed SVG");
        let panels: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("panel")).collect();
        assert_eq!(panels.len(), 3);
        for p in panels {
            let lines: Vec<_> = p.descendants().filter(|n| n.has_tag_name("polyline")).collect();
            assert_eq!(lines.len(), 2);
            assert_eq!(lines[0].attribute("class"), Some("baseline"));
            assert_eq!(lines[1].attribute("class"), Some("proposed"));
        }
    }
}

#[test]
fn infeasible_cell_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.cfg");
    fs::write(&cfg, "synthetic = 512, 512, 10\ntile = 128\ndata_rates = 0.01\nt_TRlimits = 10\n").unwrap();
    run_ok(&["--quiet", "run", path_str(&cfg)], dir.path());
    let rows = read_grid(&dir.path().join("grid.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].get("framework_feasible_prop"), "false");
    assert_eq!(rows[0].get("recall_prop"), "0.000000");
    assert_eq!(rows[0].get("lr_level"), "NA");
    let svg = fs::read_to_string(dir.path().join("recall_vs_time_0.01.svg")).unwrap();
    assert!(roxmltree::Document::parse(&svg).is_ok());
}

#[test]
fn image_file_scenario_with_replayed_detections() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d);
    fs::write(
        d.join("det.csv"),
        "tile_index,class_id,x,y,w,h,confidence,source\n0,0,5,5,10,10,0.3,DL\n5,1,70,70,12,12,0.8,DL\n",
    )
    .unwrap();
    fs::write(
        d.join("run.cfg"),
        "image = scene.pgm\nground_truth = ground_truth.csv\ntile = 64\nlevels = 3\ndata_rates = 88\nt_TRlimits = 600\ndetections = det.csv\n",
    )
    .unwrap();
    run_ok(&["--quiet", "run", path_str(&d.join("run.cfg"))], &d.join("out"));
    let rows = read_grid(&d.join("out").join("grid.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].get("human_tiles"), "2");
}
