//! `.ssc` serialization. All integers are big-endian.
//!
//! ```text
//! magic "SSC1" | width u32 | height u32 | tile_w u16 | tile_h u16
//! | levels u8 | components u8 | max_resolution u8 | tile_count u32
//! table:   tile_count x { tile_index u32, components x max_resolution x length u32 }
//! payload: segments in table order
//! ```

use std::path::Path;

use super::{check_tile_samples, Codestream, CodestreamError, Header, TileEntry, MAX_LEVELS};

pub const MAGIC: &[u8; 4] = b"SSC1";
pub const HEADER_LEN: usize = 23;

pub fn write_codestream(cs: &Codestream) -> Vec<u8> {
    let h = &cs.header;
    let table = cs.tiles.len() * (4 + 4 * h.segments_per_tile());
    let mut out = Vec::with_capacity(HEADER_LEN + table + cs.payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.width.to_be_bytes());
    out.extend_from_slice(&h.height.to_be_bytes());
    out.extend_from_slice(&h.tile_w.to_be_bytes());
    out.extend_from_slice(&h.tile_h.to_be_bytes());
    out.push(h.levels);
    out.push(h.components);
    out.push(h.max_resolution);
    out.extend_from_slice(&h.tile_count.to_be_bytes());
    for t in &cs.tiles {
        out.extend_from_slice(&t.index.to_be_bytes());
        for l in &t.lengths {
            out.extend_from_slice(&l.to_be_bytes());
        }
    }
    out.extend_from_slice(&cs.payload);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], CodestreamError> {
        let end = self.pos.checked_add(N).filter(|&e| e <= self.bytes.len()).ok_or(CodestreamError::Truncated(what))?;
        let out = self.bytes[self.pos..end].try_into().expect("slice of length N");
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, CodestreamError> {
        Ok(self.take::<1>(what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, CodestreamError> {
        Ok(u16::from_be_bytes(self.take(what)?))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, CodestreamError> {
        Ok(u32::from_be_bytes(self.take(what)?))
    }
}

fn invalid(field: &'static str, value: impl Into<u64>) -> CodestreamError {
    CodestreamError::InvalidHeader { field, value: value.into() }
}

/// Parses and fully validates a serialized codestream. Nothing is returned
/// unless the header, the table and the payload length are all consistent.
pub fn parse_codestream(bytes: &[u8]) -> Result<Codestream, CodestreamError> {
    if bytes.len() < MAGIC.len() {
        return Err(CodestreamError::Truncated("magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(CodestreamError::BadMagic);
    }
    let mut cur = Cursor { bytes, pos: 4 };
    let header = Header {
        width: cur.u32("header")?,
        height: cur.u32("header")?,
        tile_w: cur.u16("header")?,
        tile_h: cur.u16("header")?,
        levels: cur.u8("header")?,
        components: cur.u8("header")?,
        max_resolution: cur.u8("header")?,
        tile_count: cur.u32("header")?,
    };
    if header.width == 0 {
        return Err(invalid("width", header.width));
    }
    if header.height == 0 {
        return Err(invalid("height", header.height));
    }
    if header.tile_w == 0 {
        return Err(invalid("tile_w", header.tile_w));
    }
    if header.tile_h == 0 {
        return Err(invalid("tile_h", header.tile_h));
    }
    if header.levels == 0 || header.levels > MAX_LEVELS {
        return Err(invalid("levels", header.levels));
    }
    if header.components != 1 && header.components != 3 {
        return Err(invalid("components", header.components));
    }
    if header.max_resolution == 0 || header.max_resolution > header.levels {
        return Err(invalid("max_resolution", header.max_resolution));
    }
    let grid = header.grid();
    check_tile_samples(&grid)?;
    let total_tiles = grid.tile_count() as u64;
    if header.tile_count as u64 > total_tiles {
        return Err(invalid("tile_count", header.tile_count));
    }

    let per_tile = header.segments_per_tile();
    let mut tiles: Vec<TileEntry> = Vec::new();
    let mut declared = 0u64;
    for position in 0..header.tile_count as usize {
        let index = cur.u32("tile table")?;
        if index as u64 >= total_tiles {
            return Err(invalid("tile_index", index));
        }
        if let Some(prev) = tiles.last() {
            if index <= prev.index {
                return Err(CodestreamError::NonIncreasingTileIndex { index, position });
            }
        }
        let mut lengths = Vec::with_capacity(per_tile);
        let mut tile_bytes = 0u64;
        for _ in 0..per_tile {
            let l = cur.u32("tile table")?;
            tile_bytes += l as u64;
            lengths.push(l);
        }
        tiles.push(TileEntry { index, lengths, offset: declared as usize });
        declared += tile_bytes;
    }

    let available = (bytes.len() - cur.pos) as u64;
    if declared > available {
        return Err(CodestreamError::LengthsExceedPayload { declared, available });
    }
    if declared < available {
        return Err(CodestreamError::TrailingBytes(available - declared));
    }
    Ok(Codestream { header, tiles, payload: bytes[cur.pos..].to_vec() })
}

pub fn read_codestream(path: impl AsRef<Path>) -> Result<Codestream, CodestreamError> {
    parse_codestream(&std::fs::read(path)?)
}

pub fn write_codestream_file(cs: &Codestream, path: impl AsRef<Path>) -> Result<(), CodestreamError> {
    std::fs::write(path, write_codestream(cs))?;
    Ok(())
}
