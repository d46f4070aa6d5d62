//! Resolution-scalable tile codestream.
//!
//! Every tile is transformed independently and split into one segment per
//! (component, resolution). Segment 1 carries the coarsest LL band; segment
//! `r >= 2` carries the HL, LH and HH bands of depth `levels - r + 1`, coded as
//! a single token stream. A sub-codestream for a tile subset at a lower
//! resolution is therefore a verbatim copy of a prefix of each chosen tile's
//! segments.

mod format;
pub mod varint;

use rayon::prelude::*;
use thiserror::Error;

pub use format::{parse_codestream, read_codestream, write_codestream, write_codestream_file, HEADER_LEN, MAGIC};

use crate::raster::{Image, Rect, TileGrid};
use crate::wavelet::{self, CoeffGrid, CoefficientPyramid, DetailBands};
use varint::SegmentError;

/// Largest resolution count the container can describe.
pub const MAX_LEVELS: u8 = 8;

/// Upper bound on samples in one (clipped) tile component. Keeps decoders from
/// allocating unbounded buffers when handed a hostile header.
pub const MAX_TILE_SAMPLES: u64 = 1 << 26;

#[derive(Debug, Error)]
pub enum CodestreamError {
    #[error("levels must be in 1..={MAX_LEVELS}, got {0}")]
    InvalidLevels(u8),
    #[error("tile size {0}x{1} does not fit the 16-bit header fields")]
    TileTooLarge(u32, u32),
    #[error("tile of {0} samples exceeds the per-tile limit")]
    TileSamplesExceeded(u64),
    #[error("tile grid does not match a {0}x{1} image")]
    GridMismatch(u32, u32),
    #[error("bad magic, expected \"SSC1\"")]
    BadMagic,
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("invalid header field {field}: {value}")]
    InvalidHeader { field: &'static str, value: u64 },
    #[error("tile index {index} at table position {position} is not greater than its predecessor")]
    NonIncreasingTileIndex { index: u32, position: usize },
    #[error("table declares {declared} payload bytes but only {available} are present")]
    LengthsExceedPayload { declared: u64, available: u64 },
    #[error("{0} bytes follow the declared payload")]
    TrailingBytes(u64),
    #[error("tile {0} is not present in the codestream")]
    MissingTile(u32),
    #[error("tile {0} listed more than once")]
    DuplicateTile(u32),
    #[error("no tiles selected")]
    EmptySelection,
    #[error("resolution {requested} outside 1..={available}")]
    ResolutionUnavailable { requested: u8, available: u8 },
    #[error("tile {tile} component {component} resolution {resolution}: {source}")]
    Segment {
        tile: u32,
        component: u8,
        resolution: u8,
        #[source]
        source: SegmentError,
    },
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error(transparent)]
    Wavelet(#[from] wavelet::WaveletError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub tile_w: u16,
    pub tile_h: u16,
    /// HR, the number of resolution levels the tiles were encoded with.
    pub levels: u8,
    pub components: u8,
    /// Highest resolution whose segments are present.
    pub max_resolution: u8,
    pub tile_count: u32,
}

impl Header {
    pub fn grid(&self) -> TileGrid {
        TileGrid::new(self.width, self.height, self.tile_w as u32, self.tile_h as u32)
            .expect("header dimensions are validated on construction")
    }

    fn segments_per_tile(&self) -> usize {
        self.components as usize * self.max_resolution as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileEntry {
    index: u32,
    /// Segment lengths, component-major: `lengths[c * max_resolution + r - 1]`.
    lengths: Vec<u32>,
    /// Payload offset of the tile's first segment.
    offset: usize,
}

impl TileEntry {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codestream {
    header: Header,
    tiles: Vec<TileEntry>,
    payload: Vec<u8>,
}

impl Codestream {
    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn tiles(&self) -> &[TileEntry] {
        &self.tiles
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn levels(&self) -> u8 {
        self.header.levels
    }

    pub fn max_resolution(&self) -> u8 {
        self.header.max_resolution
    }

    pub fn grid(&self) -> TileGrid {
        self.header.grid()
    }

    pub fn tile_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.tiles.iter().map(|t| t.index)
    }

    fn entry(&self, index: u32) -> Result<&TileEntry, CodestreamError> {
        self.tiles
            .binary_search_by_key(&index, |t| t.index)
            .map(|pos| &self.tiles[pos])
            .map_err(|_| CodestreamError::MissingTile(index))
    }

    /// Raw bytes of segment `(component, resolution)` of a tile entry.
    fn segment(&self, entry: &TileEntry, component: u8, resolution: u8) -> &[u8] {
        let k = component as usize * self.header.max_resolution as usize + resolution as usize - 1;
        let start = entry.offset + entry.lengths[..k].iter().map(|&l| l as usize).sum::<usize>();
        &self.payload[start..start + entry.lengths[k] as usize]
    }

    fn check_resolution(&self, resolution: u8) -> Result<(), CodestreamError> {
        if resolution == 0 || resolution > self.header.max_resolution {
            return Err(CodestreamError::ResolutionUnavailable {
                requested: resolution,
                available: self.header.max_resolution,
            });
        }
        Ok(())
    }

    /// Sorted, deduplicated copy of `indices`, every one present in the table.
    fn resolve(&self, indices: &[u32]) -> Result<Vec<&TileEntry>, CodestreamError> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(CodestreamError::DuplicateTile(w[0]));
        }
        sorted.into_iter().map(|i| self.entry(i)).collect()
    }
}

fn component_plane(img: &Image, r: Rect, c: u8) -> CoeffGrid {
    let mut data = Vec::with_capacity(r.area() as usize);
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            data.push(img.get(x, y, c) as i32 - 128);
        }
    }
    CoeffGrid::new(r.w as usize, r.h as usize, data).expect("plane sized from rect")
}

/// Encodes one tile into its per-(component, resolution) segments.
fn encode_tile(img: &Image, r: Rect, levels: u8) -> (Vec<u32>, Vec<u8>) {
    let mut lengths = Vec::with_capacity(img.components() as usize * levels as usize);
    let mut bytes = Vec::new();
    let depth = levels as usize - 1;
    for c in 0..img.components() {
        let pyramid = wavelet::forward_53(&component_plane(img, r, c), depth);
        let before = bytes.len();
        varint::encode_segment(pyramid.ll().data().iter().copied(), &mut bytes);
        lengths.push((bytes.len() - before) as u32);
        for res in 2..=levels as usize {
            let b = pyramid.detail(levels as usize - res + 1);
            let before = bytes.len();
            let coeffs = b.hl.data().iter().chain(b.lh.data()).chain(b.hh.data()).copied();
            varint::encode_segment(coeffs, &mut bytes);
            lengths.push((bytes.len() - before) as u32);
        }
    }
    (lengths, bytes)
}

fn check_tile_samples(grid: &TileGrid) -> Result<(), CodestreamError> {
    let w = grid.tile_w().min(grid.image_w()) as u64;
    let h = grid.tile_h().min(grid.image_h()) as u64;
    if w * h > MAX_TILE_SAMPLES {
        return Err(CodestreamError::TileSamplesExceeded(w * h));
    }
    Ok(())
}

/// Encodes every tile of `img` at `levels` resolution levels.
///
/// Tiles are coded in parallel and assembled in index order, so the bytes do
/// not depend on scheduling.
pub fn encode(img: &Image, grid: &TileGrid, levels: u8) -> Result<Codestream, CodestreamError> {
    if levels == 0 || levels > MAX_LEVELS {
        return Err(CodestreamError::InvalidLevels(levels));
    }
    if grid.image_w() != img.width() || grid.image_h() != img.height() {
        return Err(CodestreamError::GridMismatch(img.width(), img.height()));
    }
    let (tile_w, tile_h) = match (u16::try_from(grid.tile_w()), u16::try_from(grid.tile_h())) {
        (Ok(w), Ok(h)) => (w, h),
        _ => return Err(CodestreamError::TileTooLarge(grid.tile_w(), grid.tile_h())),
    };
    check_tile_samples(grid)?;

    let coded: Vec<(Vec<u32>, Vec<u8>)> = (0..grid.tile_count())
        .into_par_iter()
        .map(|t| encode_tile(img, grid.tile_bounds(t).expect("index below tile count"), levels))
        .collect();

    let mut tiles = Vec::with_capacity(coded.len());
    let mut payload = Vec::with_capacity(coded.iter().map(|c| c.1.len()).sum());
    for (index, (lengths, bytes)) in coded.into_iter().enumerate() {
        tiles.push(TileEntry { index: index as u32, lengths, offset: payload.len() });
        payload.extend_from_slice(&bytes);
    }
    Ok(Codestream {
        header: Header {
            width: img.width(),
            height: img.height(),
            tile_w,
            tile_h,
            levels,
            components: img.components(),
            max_resolution: levels,
            tile_count: tiles.len() as u32,
        },
        tiles,
        payload,
    })
}

fn decode_tile(cs: &Codestream, entry: &TileEntry, resolution: u8) -> Result<Image, CodestreamError> {
    let h = &cs.header;
    let bounds = h.grid().tile_bounds(entry.index)?;
    let (tw, th) = (bounds.w as usize, bounds.h as usize);
    let depth = h.levels as usize - 1;
    let skip = h.levels as usize - resolution as usize;
    let (out_w, out_h) = (wavelet::reduced_len(tw, skip), wavelet::reduced_len(th, skip));
    let comps = h.components as usize;
    let mut samples = vec![0u8; out_w * out_h * comps];

    for c in 0..h.components {
        let seg_err =
            |r: u8| move |source| CodestreamError::Segment { tile: entry.index, component: c, resolution: r, source };
        let (ll_w, ll_h) = (wavelet::reduced_len(tw, depth), wavelet::reduced_len(th, depth));
        let ll = varint::decode_segment(cs.segment(entry, c, 1), ll_w * ll_h).map_err(seg_err(1))?;
        let ll = CoeffGrid::new(ll_w, ll_h, ll)?;

        let mut details = Vec::with_capacity(depth);
        for d in 1..=depth {
            let mut bands =
                DetailBands::zeros_for_parent(wavelet::reduced_len(tw, d - 1), wavelet::reduced_len(th, d - 1));
            let r = (h.levels as usize - d + 1) as u8;
            if r <= resolution {
                let coeffs =
                    varint::decode_segment(cs.segment(entry, c, r), bands.coefficient_count()).map_err(seg_err(r))?;
                let (a, rest) = coeffs.split_at(bands.hl.len());
                let (b, cc) = rest.split_at(bands.lh.len());
                bands.hl.data_mut().copy_from_slice(a);
                bands.lh.data_mut().copy_from_slice(b);
                bands.hh.data_mut().copy_from_slice(cc);
            }
            details.push(bands);
        }

        let pyramid = CoefficientPyramid::from_parts(tw, th, ll, details);
        let plane = wavelet::reconstruct_at(&pyramid, resolution as usize)?;
        for (i, v) in plane.data().iter().enumerate() {
            samples[i * comps + c as usize] = (v + 128).clamp(0, 255) as u8;
        }
    }
    Ok(Image::new(out_w as u32, out_h as u32, h.components, samples)?)
}

/// Decodes the listed tiles at `resolution`, returned in the order requested.
pub fn decode(cs: &Codestream, indices: &[u32], resolution: u8) -> Result<Vec<(u32, Image)>, CodestreamError> {
    cs.check_resolution(resolution)?;
    let entries: Vec<&TileEntry> = indices.iter().map(|&i| cs.entry(i)).collect::<Result<_, _>>()?;
    entries.into_par_iter().map(|e| decode_tile(cs, e, resolution).map(|img| (e.index, img))).collect()
}

/// Sub-codestream holding exactly `indices` (any order, no duplicates) up to
/// `resolution`. Segment bytes are copied without re-encoding.
pub fn extract(cs: &Codestream, indices: &[u32], resolution: u8) -> Result<Codestream, CodestreamError> {
    if indices.is_empty() {
        return Err(CodestreamError::EmptySelection);
    }
    cs.check_resolution(resolution)?;
    let entries = cs.resolve(indices)?;
    let keep = resolution as usize;
    let src_res = cs.header.max_resolution as usize;

    let mut tiles = Vec::with_capacity(entries.len());
    let mut payload = Vec::new();
    for e in entries {
        let offset = payload.len();
        let mut lengths = Vec::with_capacity(cs.header.components as usize * keep);
        for c in 0..cs.header.components {
            for r in 1..=resolution {
                payload.extend_from_slice(cs.segment(e, c, r));
            }
            let base = c as usize * src_res;
            lengths.extend_from_slice(&e.lengths[base..base + keep]);
        }
        tiles.push(TileEntry { index: e.index, lengths, offset });
    }
    Ok(Codestream {
        header: Header { max_resolution: resolution, tile_count: tiles.len() as u32, ..cs.header },
        tiles,
        payload,
    })
}

/// Payload bytes needed for `indices` at `resolution`: the sum of their
/// segments for resolutions `1..=resolution` over all components. Header and
/// table bytes are not counted.
pub fn size_of(cs: &Codestream, indices: &[u32], resolution: u8) -> Result<u64, CodestreamError> {
    cs.check_resolution(resolution)?;
    let entries = cs.resolve(indices)?;
    Ok(entries.into_iter().map(|e| tile_size(cs, e, resolution)).sum())
}

fn tile_size(cs: &Codestream, e: &TileEntry, resolution: u8) -> u64 {
    let src_res = cs.header.max_resolution as usize;
    (0..cs.header.components as usize)
        .map(|c| e.lengths[c * src_res..c * src_res + resolution as usize].iter().map(|&l| l as u64).sum::<u64>())
        .sum()
}

/// `size_of` over every tile in the codestream.
pub fn size_of_all(cs: &Codestream, resolution: u8) -> Result<u64, CodestreamError> {
    cs.check_resolution(resolution)?;
    Ok(cs.tiles.iter().map(|e| tile_size(cs, e, resolution)).sum())
}

/// Per-tile payload sizes at `resolution`, in table order.
pub fn tile_sizes(cs: &Codestream, resolution: u8) -> Result<Vec<(u32, u64)>, CodestreamError> {
    cs.check_resolution(resolution)?;
    Ok(cs.tiles.iter().map(|e| (e.index, tile_size(cs, e, resolution))).collect())
}

/// Reassembles decoded tiles into one image at their reduced resolution.
///
/// Each tile column (row) is placed after the reduced widths (heights) of the
/// columns (rows) before it. Tiles not in `tiles` are left black.
pub fn mosaic(
    grid: &TileGrid,
    levels: u8,
    resolution: u8,
    components: u8,
    tiles: &[(u32, Image)],
) -> Result<Image, CodestreamError> {
    let skip = (levels - resolution) as usize;
    let col_w: Vec<u32> = (0..grid.tiles_x())
        .map(|c| grid.tile_bounds(c).map(|r| wavelet::reduced_len(r.w as usize, skip) as u32))
        .collect::<Result<_, _>>()?;
    let row_h: Vec<u32> = (0..grid.tiles_y())
        .map(|r| grid.tile_bounds(r * grid.tiles_x()).map(|b| wavelet::reduced_len(b.h as usize, skip) as u32))
        .collect::<Result<_, _>>()?;
    let mut out = Image::filled(col_w.iter().sum(), row_h.iter().sum(), components, 0)?;
    for (index, tile) in tiles {
        let col = index % grid.tiles_x();
        let row = index / grid.tiles_x();
        let x: u32 = col_w[..col as usize].iter().sum();
        let y: u32 = row_h[..row as usize].iter().sum();
        out.blit(tile, x, y);
    }
    Ok(out)
}
