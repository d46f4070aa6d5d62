//! Reversible 5/3 integer lifting wavelet, one tile at a time.
//!
//! Each decomposition level splits the current LL band into four subbands
//! (rows first, then columns). Even-indexed samples feed the low-pass half, so
//! for an `n`-sample line the low band holds `ceil(n/2)` values and the high
//! band `floor(n/2)`. Boundaries use whole-sample symmetric extension.
//!
//! Resolution levels are numbered `1..=depth + 1`: level 1 is the coarsest LL
//! band and level `depth + 1` is the full-size tile.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WaveletError {
    #[error("{band} band at depth {depth} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    BandDimensionMismatch { band: &'static str, depth: usize, got_w: usize, got_h: usize, want_w: usize, want_h: usize },
    #[error("resolution {resolution} outside 1..={max}")]
    ResolutionOutOfRange { resolution: usize, max: usize },
    #[error("grid of {width}x{height} needs {expected} samples, got {actual}")]
    SampleCount { width: usize, height: usize, expected: usize, actual: usize },
}

/// Row-major grid of signed coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CoeffGrid {
    width: usize,
    height: usize,
    data: Vec<i32>,
}

impl CoeffGrid {
    pub fn new(width: usize, height: usize, data: Vec<i32>) -> Result<Self, WaveletError> {
        if data.len() != width * height {
            return Err(WaveletError::SampleCount { width, height, expected: width * height, actual: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [i32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<i32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.data[y * self.width + x]
    }

    fn sub(&self, x0: usize, y0: usize, w: usize, h: usize) -> CoeffGrid {
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let s = y * self.width + x0;
            data.extend_from_slice(&self.data[s..s + w]);
        }
        CoeffGrid { width: w, height: h, data }
    }

    fn put(&mut self, src: &CoeffGrid, x0: usize, y0: usize) {
        for y in 0..src.height {
            let d = (y0 + y) * self.width + x0;
            self.data[d..d + src.width].copy_from_slice(&src.data[y * src.width..(y + 1) * src.width]);
        }
    }
}

/// Detail subbands produced by one decomposition step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetailBands {
    /// High-pass horizontally, low-pass vertically.
    pub hl: CoeffGrid,
    /// Low-pass horizontally, high-pass vertically.
    pub lh: CoeffGrid,
    pub hh: CoeffGrid,
}

impl DetailBands {
    /// Empty-content bands sized for a parent of `pw` x `ph` samples.
    pub fn zeros_for_parent(pw: usize, ph: usize) -> Self {
        let (lw, hw) = split_len(pw);
        let (lh, hh) = split_len(ph);
        Self { hl: CoeffGrid::zeros(hw, lh), lh: CoeffGrid::zeros(lw, hh), hh: CoeffGrid::zeros(hw, hh) }
    }

    pub fn coefficient_count(&self) -> usize {
        self.hl.len() + self.lh.len() + self.hh.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientPyramid {
    width: usize,
    height: usize,
    ll: CoeffGrid,
    /// `details[d - 1]` holds the bands of depth `d`; depth 1 is the finest.
    details: Vec<DetailBands>,
}

impl CoefficientPyramid {
    /// Assemble a pyramid for a `width` x `height` source. Band shapes are
    /// checked when the pyramid is synthesized.
    pub fn from_parts(width: usize, height: usize, ll: CoeffGrid, details: Vec<DetailBands>) -> Self {
        Self { width, height, ll, details }
    }

    pub fn depth(&self) -> usize {
        self.details.len()
    }

    /// Number of resolution levels, `depth + 1`.
    pub fn resolution_levels(&self) -> usize {
        self.details.len() + 1
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ll(&self) -> &CoeffGrid {
        &self.ll
    }

    /// Detail bands at depth `d` (1-based, 1 = finest).
    pub fn detail(&self, d: usize) -> &DetailBands {
        &self.details[d - 1]
    }

    pub fn into_parts(self) -> (CoeffGrid, Vec<DetailBands>) {
        (self.ll, self.details)
    }
}

/// `(ceil(n/2), floor(n/2))`.
#[inline]
pub fn split_len(n: usize) -> (usize, usize) {
    (n - n / 2, n / 2)
}

/// Size of a dimension after `d` dyadic reductions: `ceil(n / 2^d)`.
#[inline]
pub fn reduced_len(n: usize, d: usize) -> usize {
    if d >= usize::BITS as usize {
        return usize::from(n > 0);
    }
    n.div_ceil(1 << d)
}

/// Forward 5/3 lifting of one line into `low` (ceil half) and `high` (floor half).
pub fn lift_forward_1d(x: &[i32], low: &mut [i32], high: &mut [i32]) {
    let n = x.len();
    let (nl, nh) = split_len(n);
    debug_assert_eq!(low.len(), nl);
    debug_assert_eq!(high.len(), nh);
    if n == 1 {
        low[0] = x[0];
        return;
    }
    for i in 0..nh {
        let left = x[2 * i];
        let right = if 2 * i + 2 < n { x[2 * i + 2] } else { x[2 * i] };
        high[i] = x[2 * i + 1] - ((left + right) >> 1);
    }
    for i in 0..nl {
        let dl = high[i.saturating_sub(1)];
        let dr = high[i.min(nh - 1)];
        low[i] = x[2 * i] + ((dl + dr + 2) >> 2);
    }
}

/// Exact inverse of [`lift_forward_1d`].
pub fn lift_inverse_1d(low: &[i32], high: &[i32], out: &mut [i32]) {
    let nl = low.len();
    let nh = high.len();
    let n = nl + nh;
    debug_assert_eq!(out.len(), n);
    if n == 1 {
        out[0] = low[0];
        return;
    }
    for i in 0..nl {
        let dl = high[i.saturating_sub(1)];
        let dr = high[i.min(nh - 1)];
        out[2 * i] = low[i] - ((dl + dr + 2) >> 2);
    }
    for i in 0..nh {
        let left = out[2 * i];
        let right = if 2 * i + 2 < n { out[2 * i + 2] } else { out[2 * i] };
        out[2 * i + 1] = high[i] + ((left + right) >> 1);
    }
}

/// One 2-D analysis step on `g`: rows, then columns.
fn analyze(g: &CoeffGrid) -> (CoeffGrid, DetailBands) {
    let (w, h) = g.dims();
    let (lw, hw) = split_len(w);
    let (lh, hh) = split_len(h);
    let mut buf = g.clone();

    let mut low = vec![0; lw];
    let mut high = vec![0; hw];
    for y in 0..h {
        let row = &mut buf.data[y * w..(y + 1) * w];
        lift_forward_1d(row, &mut low, &mut high);
        row[..lw].copy_from_slice(&low);
        row[lw..].copy_from_slice(&high);
    }

    let mut col = vec![0; h];
    let mut low = vec![0; lh];
    let mut high = vec![0; hh];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = buf.data[y * w + x];
        }
        lift_forward_1d(&col, &mut low, &mut high);
        for (y, v) in low.iter().chain(high.iter()).enumerate() {
            buf.data[y * w + x] = *v;
        }
    }

    let ll = buf.sub(0, 0, lw, lh);
    let details = DetailBands { hl: buf.sub(lw, 0, hw, lh), lh: buf.sub(0, lh, lw, hh), hh: buf.sub(lw, lh, hw, hh) };
    (ll, details)
}

/// One 2-D synthesis step producing a `pw` x `ph` grid; columns, then rows.
fn synthesize(ll: &CoeffGrid, d: &DetailBands, pw: usize, ph: usize, depth: usize) -> Result<CoeffGrid, WaveletError> {
    let (lw, hw) = split_len(pw);
    let (lh, hh) = split_len(ph);
    for (band, grid, want) in
        [("LL", ll, (lw, lh)), ("HL", &d.hl, (hw, lh)), ("LH", &d.lh, (lw, hh)), ("HH", &d.hh, (hw, hh))]
    {
        if grid.dims() != want {
            return Err(WaveletError::BandDimensionMismatch {
                band,
                depth,
                got_w: grid.width,
                got_h: grid.height,
                want_w: want.0,
                want_h: want.1,
            });
        }
    }

    let mut buf = CoeffGrid::zeros(pw, ph);
    buf.put(ll, 0, 0);
    buf.put(&d.hl, lw, 0);
    buf.put(&d.lh, 0, lh);
    buf.put(&d.hh, lw, lh);

    let mut col = vec![0; ph];
    let mut out = vec![0; ph];
    for x in 0..pw {
        for (y, c) in col.iter_mut().enumerate() {
            *c = buf.data[y * pw + x];
        }
        lift_inverse_1d(&col[..lh], &col[lh..], &mut out);
        for (y, v) in out.iter().enumerate() {
            buf.data[y * pw + x] = *v;
        }
    }

    let mut out = vec![0; pw];
    for y in 0..ph {
        let row = &mut buf.data[y * pw..(y + 1) * pw];
        lift_inverse_1d(&row[..lw], &row[lw..], &mut out);
        row.copy_from_slice(&out);
    }
    Ok(buf)
}

/// Decompose `samples` into a `depth`-level pyramid. `depth == 0` yields the
/// input as the sole LL band.
pub fn forward_53(samples: &CoeffGrid, depth: usize) -> CoefficientPyramid {
    let mut ll = samples.clone();
    let mut details = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (next, d) = analyze(&ll);
        details.push(d);
        ll = next;
    }
    CoefficientPyramid { width: samples.width, height: samples.height, ll, details }
}

/// Full synthesis; the exact inverse of [`forward_53`].
pub fn inverse_53(pyramid: &CoefficientPyramid) -> Result<CoeffGrid, WaveletError> {
    reconstruct_at(pyramid, pyramid.resolution_levels())
}

/// LL image at resolution `resolution` (1 = coarsest, `depth + 1` = full).
///
/// Only the synthesis steps above `resolution` are skipped; the result is
/// `ceil(w / 2^(levels - resolution))` by `ceil(h / 2^(levels - resolution))`.
pub fn reconstruct_at(pyramid: &CoefficientPyramid, resolution: usize) -> Result<CoeffGrid, WaveletError> {
    let depth = pyramid.depth();
    let levels = depth + 1;
    if resolution == 0 || resolution > levels {
        return Err(WaveletError::ResolutionOutOfRange { resolution, max: levels });
    }
    let want = (reduced_len(pyramid.width, depth), reduced_len(pyramid.height, depth));
    if pyramid.ll.dims() != want {
        return Err(WaveletError::BandDimensionMismatch {
            band: "LL",
            depth,
            got_w: pyramid.ll.width,
            got_h: pyramid.ll.height,
            want_w: want.0,
            want_h: want.1,
        });
    }
    let mut cur = pyramid.ll.clone();
    // synthesis steps: depth D down to D - (resolution - 1) + 1
    for d in ((depth + 2 - resolution)..=depth).rev() {
        let pw = reduced_len(pyramid.width, d - 1);
        let ph = reduced_len(pyramid.height, d - 1);
        cur = synthesize(&cur, &pyramid.details[d - 1], pw, ph, d)?;
    }
    Ok(cur)
}
