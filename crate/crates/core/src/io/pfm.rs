use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::image::{is_valid_depth, DepthMap};

/// Serializes as little-endian `Pf`, bottom row first. Invalid samples are written as 0.
pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = depth.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let d = depth.get(x, y);
            let v = if is_valid_depth(d) { d as f32 } else { 0.0 };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self) -> Option<(usize, &'a str)> {
        self.skip_whitespace();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .map(|s| (start, s))
    }
}

/// Parses a grayscale PFM. Both byte orders are accepted.
pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    let err = |offset: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    let mut cur = Cursor { bytes, pos: 0 };
    match cur.token() {
        Some((_, "Pf")) => {}
        Some((at, "PF")) => return Err(err(at, "color PFM is not a depth map".into())),
        Some((at, other)) => return Err(err(at, format!("bad magic {other:?}"))),
        None => return Err(err(0, "empty file".into())),
    }
    let mut dim = |name: &str| -> Result<usize> {
        let (at, tok) = cur
            .token()
            .ok_or_else(|| err(bytes.len(), format!("missing {name}")))?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(err(at, format!("invalid {name} {tok:?}"))),
        }
    };
    let w = dim("width")?;
    let h = dim("height")?;
    let (at, tok) = cur
        .token()
        .ok_or_else(|| err(bytes.len(), "missing scale".into()))?;
    let scale: f64 = tok
        .parse()
        .ok()
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| err(at, format!("invalid scale {tok:?}")))?;
    let little = scale < 0.0;
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(err(cur.pos, "missing raster".into()));
    }
    let start = cur.pos + 1;
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| err(at, "dimensions overflow".into()))?;
    let available = bytes.len() - start;
    if available < need {
        return Err(err(
            bytes.len(),
            format!("raster truncated: need {need} bytes, found {available}"),
        ));
    }
    if available > need {
        return Err(err(start + need, "trailing bytes after raster".into()));
    }
    let mut data = vec![0.0; w * h];
    for (i, chunk) in bytes[start..].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, x) = (i / w, i % w);
        data[(h - 1 - row) * w + x] = v as f64;
    }
    DepthMap::from_values(w, h, data)
}

pub fn save_depth(depth: &DepthMap, path: &Path) -> Result<()> {
    write_file(path, &encode_pfm(depth))
}

pub fn load_depth(path: &Path) -> Result<DepthMap> {
    decode_pfm(&read_file(path)?, path)
}
