//! Images, tile geometry, binary PNM I/O and synthetic scenes with ground truth.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image must have 1 or 3 components, got {0}")]
    UnsupportedComponents(u8),
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("sample buffer holds {actual} values, expected {expected}")]
    SampleCount { expected: usize, actual: usize },
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PNM maxval {0}, only 255 is accepted")]
    UnsupportedMaxval(u32),
    #[error("truncated PNM payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },
    #[error("tile size must be at least 1x1")]
    EmptyTile,
    #[error("tile index {index} out of range for {count} tiles")]
    TileIndexOutOfRange { index: u32, count: u32 },
    #[error("object size {size} does not fit in a {width}x{height} image")]
    ObjectTooLarge { size: u32, width: u32, height: u32 },
    #[error("invalid object size range {min}..={max}")]
    BadSizeRange { min: u32, max: u32 },
    #[error("ground truth row {row}: {msg}")]
    GroundTruth { row: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit image, row-major with interleaved components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    components: u8,
    samples: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, components: u8, samples: Vec<u8>) -> Result<Self, RasterError> {
        if components != 1 && components != 3 {
            return Err(RasterError::UnsupportedComponents(components));
        }
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize * components as usize;
        if samples.len() != expected {
            return Err(RasterError::SampleCount { expected, actual: samples.len() });
        }
        Ok(Self { width, height, components, samples })
    }

    pub fn filled(width: u32, height: u32, components: u8, value: u8) -> Result<Self, RasterError> {
        let n = width as usize * height as usize * components as usize;
        Self::new(width, height, components, vec![value; n])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn components(&self) -> u8 {
        self.components
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u8) -> u8 {
        self.samples[self.offset(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u8, v: u8) {
        let i = self.offset(x, y, c);
        self.samples[i] = v;
    }

    #[inline]
    fn offset(&self, x: u32, y: u32, c: u8) -> usize {
        (y as usize * self.width as usize + x as usize) * self.components as usize + c as usize
    }

    /// Copy of the rectangle `r`, which must lie inside the image.
    pub fn crop(&self, r: Rect) -> Image {
        let comps = self.components as usize;
        let mut out = Vec::with_capacity(r.w as usize * r.h as usize * comps);
        for y in r.y..r.y + r.h {
            let start = self.offset(r.x, y, 0);
            out.extend_from_slice(&self.samples[start..start + r.w as usize * comps]);
        }
        Image { width: r.w, height: r.h, components: self.components, samples: out }
    }

    /// Paste `src` with its top-left corner at `(x, y)`; `src` must fit.
    pub fn blit(&mut self, src: &Image, x: u32, y: u32) {
        debug_assert_eq!(src.components, self.components);
        let comps = self.components as usize;
        let row_len = src.width as usize * comps;
        for sy in 0..src.height {
            let dst = self.offset(x, y + sy, 0);
            let s = sy as usize * row_len;
            self.samples[dst..dst + row_len].copy_from_slice(&src.samples[s..s + row_len]);
        }
    }
}

/// Axis-aligned pixel rectangle, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.w as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.h as u64
    }

    pub fn intersection_area(&self, other: &Rect) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.intersection_area(other) > 0
    }

    pub fn contains_point(&self, px: u64, py: u64) -> bool {
        px >= self.x as u64 && px < self.right() && py >= self.y as u64 && py < self.bottom()
    }
}

/// Tiling of an image into a row-major grid of `tile_w` x `tile_h` tiles,
/// with the last column and row clipped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileGrid {
    tile_w: u32,
    tile_h: u32,
    tiles_x: u32,
    tiles_y: u32,
    image_w: u32,
    image_h: u32,
}

impl TileGrid {
    pub fn new(image_w: u32, image_h: u32, tile_w: u32, tile_h: u32) -> Result<Self, RasterError> {
        if tile_w == 0 || tile_h == 0 {
            return Err(RasterError::EmptyTile);
        }
        if image_w == 0 || image_h == 0 {
            return Err(RasterError::EmptyImage { width: image_w, height: image_h });
        }
        Ok(Self {
            tile_w,
            tile_h,
            tiles_x: image_w.div_ceil(tile_w),
            tiles_y: image_h.div_ceil(tile_h),
            image_w,
            image_h,
        })
    }

    pub fn for_image(img: &Image, tile_w: u32, tile_h: u32) -> Result<Self, RasterError> {
        Self::new(img.width(), img.height(), tile_w, tile_h)
    }

    pub fn tile_w(&self) -> u32 {
        self.tile_w
    }

    pub fn tile_h(&self) -> u32 {
        self.tile_h
    }

    pub fn tiles_x(&self) -> u32 {
        self.tiles_x
    }

    pub fn tiles_y(&self) -> u32 {
        self.tiles_y
    }

    pub fn image_w(&self) -> u32 {
        self.image_w
    }

    pub fn image_h(&self) -> u32 {
        self.image_h
    }

    /// |M|, the total number of tiles.
    pub fn tile_count(&self) -> u32 {
        self.tiles_x * self.tiles_y
    }

    pub fn tile_bounds(&self, index: u32) -> Result<Rect, RasterError> {
        if index >= self.tile_count() {
            return Err(RasterError::TileIndexOutOfRange { index, count: self.tile_count() });
        }
        let col = index % self.tiles_x;
        let row = index / self.tiles_x;
        let x = col * self.tile_w;
        let y = row * self.tile_h;
        Ok(Rect::new(x, y, self.tile_w.min(self.image_w - x), self.tile_h.min(self.image_h - y)))
    }

    /// Tile containing the pixel `(x, y)`, if it lies inside the image.
    pub fn tile_at(&self, x: u64, y: u64) -> Option<u32> {
        if x >= self.image_w as u64 || y >= self.image_h as u64 {
            return None;
        }
        let col = (x / self.tile_w as u64) as u32;
        let row = (y / self.tile_h as u64) as u32;
        Some(row * self.tiles_x + col)
    }
}

/// Free-function form of [`TileGrid::tile_bounds`].
pub fn tile_bounds(grid: &TileGrid, index: u32) -> Result<Rect, RasterError> {
    grid.tile_bounds(index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub object_id: u64,
    pub class_id: u32,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl GroundTruthBox {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }

    /// Center pixel, rounded down.
    pub fn center(&self) -> (u64, u64) {
        (self.x as u64 + self.w as u64 / 2, self.y as u64 + self.h as u64 / 2)
    }
}

// ---------------------------------------------------------------------------
// PNM I/O

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, RasterError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(RasterError::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| RasterError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Parse a binary P5/P6 image held in memory.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image, RasterError> {
    let components = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(RasterError::MalformedHeader("missing P5/P6 magic".into())),
    };
    let mut r = HeaderReader { bytes, pos: 2 };
    let width = r.number("width")?;
    let height = r.number("height")?;
    let maxval = r.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyImage { width, height });
    }
    if maxval != 255 {
        return Err(RasterError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(r.pos) {
        Some(b) if b.is_ascii_whitespace() => r.pos += 1,
        _ => return Err(RasterError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let expected = width as usize * height as usize * components as usize;
    let payload = &bytes[r.pos..];
    if payload.len() < expected {
        return Err(RasterError::TruncatedPayload { expected, actual: payload.len() });
    }
    Image::new(width, height, components, payload[..expected].to_vec())
}

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.components == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.samples);
    out
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, RasterError> {
    decode_pnm(&fs::read(path)?)
}

pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), RasterError> {
    if img.components != 1 && img.components != 3 {
        return Err(RasterError::UnsupportedComponents(img.components));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pnm(img))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Ground-truth CSV

pub fn write_ground_truth<W: std::io::Write>(w: W, boxes: &[GroundTruthBox]) -> Result<(), RasterError> {
    let mut wr = csv::Writer::from_writer(w);
    for b in boxes {
        wr.serialize(b)?;
    }
    if boxes.is_empty() {
        wr.write_record(["object_id", "class_id", "x", "y", "w", "h"])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn save_ground_truth(path: impl AsRef<Path>, boxes: &[GroundTruthBox]) -> Result<(), RasterError> {
    write_ground_truth(fs::File::create(path)?, boxes)
}

pub fn read_ground_truth<R: std::io::Read>(r: R) -> Result<Vec<GroundTruthBox>, RasterError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["object_id", "class_id", "x", "y", "w", "h"] {
        return Err(RasterError::GroundTruth { row: 1, msg: "unexpected header".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.deserialize::<GroundTruthBox>().enumerate() {
        // header is row 1
        let row = i + 2;
        let b = rec.map_err(|e| RasterError::GroundTruth { row, msg: e.to_string() })?;
        if b.w == 0 || b.h == 0 {
            return Err(RasterError::GroundTruth { row, msg: "box must be at least 1x1".into() });
        }
        out.push(b);
    }
    Ok(out)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthBox>, RasterError> {
    read_ground_truth(fs::File::open(path)?)
}

// ---------------------------------------------------------------------------
// Synthetic scenes

const SCENE_DOMAIN_TEXTURE: u64 = 0x7465_7874;
const SCENE_DOMAIN_OBJECT: u64 = 0x6f62_6a65;
const OBJECT_CLASSES: u64 = 4;

/// Render a deterministic scene: a textured mid-gray background with
/// `object_count` bright filled rectangles, and their ground truth.
///
/// Object `k` is drawn from the stream keyed on `(seed, k)`, so adding objects
/// never moves the earlier ones. Sides are uniform in `size_range` (inclusive).
pub fn generate_scene(
    seed: u64,
    width: u32,
    height: u32,
    object_count: u32,
    size_range: (u32, u32),
) -> Result<(Image, Vec<GroundTruthBox>), RasterError> {
    let (min_size, max_size) = size_range;
    if min_size == 0 || min_size > max_size {
        return Err(RasterError::BadSizeRange { min: min_size, max: max_size });
    }
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyImage { width, height });
    }
    if object_count > 0 && (max_size > width || max_size > height) {
        return Err(RasterError::ObjectTooLarge { size: max_size, width, height });
    }

    let mut img = Image::filled(width, height, 1, 0)?;
    // Texture: coarse 8x8 blocks of varying base level plus per-pixel grain.
    // Stays within [60, 149] so objects (>= 190) are always brighter.
    for y in 0..height {
        for x in 0..width {
            let block = SplitMix64::keyed(seed, &[SCENE_DOMAIN_TEXTURE, (x / 8) as u64, (y / 8) as u64]).next_u64();
            let grain = crate::rng::mix64(seed ^ ((y as u64) << 32 | x as u64) ^ SCENE_DOMAIN_TEXTURE);
            let v = 60 + (block % 60) + (grain % 31);
            img.set(x, y, 0, v as u8);
        }
    }

    let mut boxes = Vec::with_capacity(object_count as usize);
    for k in 0..object_count as u64 {
        let mut rng = SplitMix64::keyed(seed, &[SCENE_DOMAIN_OBJECT, k]);
        let w = rng.range_inclusive(min_size as u64, max_size as u64) as u32;
        let h = rng.range_inclusive(min_size as u64, max_size as u64) as u32;
        let x = rng.range_inclusive(0, (width - w) as u64) as u32;
        let y = rng.range_inclusive(0, (height - h) as u64) as u32;
        let class_id = (rng.next_u64() % OBJECT_CLASSES) as u32;
        let intensity = 190 + (rng.next_u64() % 66) as u8;
        for yy in y..y + h {
            for xx in x..x + w {
                img.set(xx, yy, 0, intensity);
            }
        }
        boxes.push(GroundTruthBox { object_id: k, class_id, x, y, w, h });
    }
    Ok((img, boxes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_bytes_map_directly() {
        let img = decode_pnm(b"P5\n2 2\n255\n\x00\xff\x80\x07").unwrap();
        assert_eq!((img.width(), img.height(), img.components()), (2, 2, 1));
        assert_eq!(img.samples(), &[0, 255, 128, 7]);
    }

    #[test]
    fn p6_single_pixel() {
        let img = decode_pnm(b"P6 1 1 255\n\x01\x02\x03").unwrap();
        assert_eq!((img.width(), img.height(), img.components()), (1, 1, 3));
        assert_eq!(img.samples(), &[1, 2, 3]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_pnm(b"P5\n# made by hand\n1 1\n255\n\x09").unwrap();
        assert_eq!(img.samples(), &[9]);
    }

    #[test]
    fn truncated_payload() {
        let err = decode_pnm(b"P5\n2 2\n255\n\x00\x01\x02").unwrap_err();
        assert!(matches!(err, RasterError::TruncatedPayload { expected: 4, actual: 3 }));
    }

    #[test]
    fn distinct_header_errors() {
        assert!(matches!(decode_pnm(b"P3\n1 1\n255\n0").unwrap_err(), RasterError::MalformedHeader(_)));
        assert!(matches!(decode_pnm(b"P5\n1 1\n65535\n\0\0").unwrap_err(), RasterError::UnsupportedMaxval(65535)));
        assert!(matches!(decode_pnm(b"P5\nx 1\n255\n\0").unwrap_err(), RasterError::MalformedHeader(_)));
        assert!(matches!(decode_pnm(b"P5\n1 1\n255").unwrap_err(), RasterError::MalformedHeader(_)));
    }

    #[test]
    fn two_component_image_rejected() {
        assert!(matches!(Image::new(1, 1, 2, vec![0, 0]), Err(RasterError::UnsupportedComponents(2))));
    }

    #[test]
    fn save_into_missing_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::filled(2, 2, 1, 3).unwrap();
        let err = save_image(&img, dir.path().join("nope").join("x.pgm")).unwrap_err();
        assert!(matches!(err, RasterError::Io(_)));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<u8> = (0..5 * 3 * 3).map(|i| (i * 37 % 256) as u8).collect();
        let img = Image::new(5, 3, 3, samples).unwrap();
        let p = dir.path().join("a.ppm");
        save_image(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn tile_bounds_examples() {
        let g = TileGrid::new(1024, 1024, 512, 512).unwrap();
        assert_eq!(g.tile_bounds(0).unwrap(), Rect::new(0, 0, 512, 512));
        let g = TileGrid::new(1000, 700, 512, 512).unwrap();
        assert_eq!(g.tile_count(), 4);
        assert_eq!(g.tile_bounds(1).unwrap(), Rect::new(512, 0, 488, 512));
        assert_eq!(g.tile_bounds(3).unwrap(), Rect::new(512, 512, 488, 188));
        assert!(matches!(g.tile_bounds(4), Err(RasterError::TileIndexOutOfRange { index: 4, count: 4 })));
    }

    #[test]
    fn scene_is_deterministic_and_in_bounds() {
        let (a, ga) = generate_scene(7, 256, 256, 5, (8, 24)).unwrap();
        let (b, gb) = generate_scene(7, 256, 256, 5, (8, 24)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        assert_eq!(ga.len(), 5);
        for g in &ga {
            assert!(g.w >= 1 && g.h >= 1);
            assert!(g.rect().right() <= 256 && g.rect().bottom() <= 256);
        }
        let (_, other) = generate_scene(8, 256, 256, 5, (8, 24)).unwrap();
        assert_ne!(ga, other);
    }

    #[test]
    fn empty_scene_has_background_only() {
        let (img, gt) = generate_scene(7, 64, 32, 0, (8, 24)).unwrap();
        assert!(gt.is_empty());
        assert!(img.samples().iter().all(|&v| (60..=149).contains(&v)));
    }

    #[test]
    fn oversized_object_rejected() {
        assert!(matches!(generate_scene(1, 16, 16, 1, (4, 20)), Err(RasterError::ObjectTooLarge { .. })));
    }

    #[test]
    fn ground_truth_csv_round_trip() {
        let (_, gt) = generate_scene(3, 128, 128, 4, (4, 16)).unwrap();
        let mut buf = Vec::new();
        write_ground_truth(&mut buf, &gt).unwrap();
        assert!(buf.starts_with(b"object_id,class_id,x,y,w,h\n"));
        assert_eq!(read_ground_truth(&buf[..]).unwrap(), gt);

        let mut empty = Vec::new();
        write_ground_truth(&mut empty, &[]).unwrap();
        assert!(read_ground_truth(&empty[..]).unwrap().is_empty());
    }
}
