//! Geometry-derived feature vectors and pooled appearance features.
//!
//! The spatial representation of a subject/object pair is 14-dimensional:
//! a 5-dim normalized description of each box plus a 4-dim pairwise
//! offset/log-ratio block. Appearance features come from externally
//! produced convolutional feature maps loaded from a small binary format.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Length of [`spatial_feature`]'s output.
pub const SPATIAL_DIM: usize = 14;

/// Axis-aligned box: top-left corner plus extents, in pixels. The x axis
/// points right and the y axis points down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h }
    }

    /// Both extents strictly positive.
    pub fn is_proper(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Checks the box lies inside the image (inclusive-exclusive extents).
    pub fn fits_in(&self, img: &ImageSize) -> bool {
        self.is_proper()
            && self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.w <= img.width
            && self.y + self.h <= img.height
    }
}

/// Image extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSize {
    pub width: f64,
    pub height: f64,
}

impl ImageSize {
    pub fn new(width: f64, height: f64) -> Self {
        ImageSize { width, height }
    }

    pub fn is_proper(&self) -> bool {
        self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Normalized single-box descriptor:
/// `[x/W, y/H, (x+w)/W, (y+h)/H, area(box)/area(image)]`.
pub fn single_box_spatial(b: &BoundingBox, img: &ImageSize) -> Result<[f64; 5]> {
    if !b.is_proper() {
        return Err(Error::InvalidGeometry(format!(
            "degenerate box (x={}, y={}, w={}, h={})",
            b.x, b.y, b.w, b.h
        )));
    }
    if !img.is_proper() {
        return Err(Error::InvalidGeometry(format!(
            "degenerate image ({}x{})",
            img.width, img.height
        )));
    }
    Ok([
        b.x / img.width,
        b.y / img.height,
        (b.x + b.w) / img.width,
        (b.y + b.h) / img.height,
        b.area() / img.area(),
    ])
}

/// Pairwise descriptor of the subject box relative to the object box:
/// `[(x−x′)/w′, (y−y′)/h′, ln(w/w′), ln(h/h′)]` where the primed values
/// belong to the object. Natural logarithm.
pub fn pairwise_spatial(subj: &BoundingBox, obj: &BoundingBox) -> Result<[f64; 4]> {
    if !subj.is_proper() {
        return Err(Error::InvalidGeometry(
            "pairwise feature: degenerate subject box".to_string(),
        ));
    }
    if !obj.is_proper() {
        return Err(Error::InvalidGeometry(
            "pairwise feature: degenerate object box".to_string(),
        ));
    }
    Ok([
        (subj.x - obj.x) / obj.w,
        (subj.y - obj.y) / obj.h,
        (subj.w / obj.w).ln(),
        (subj.h / obj.h).ln(),
    ])
}

/// The full 14-dim spatial feature: subject single-box block, then object
/// single-box block, then the pairwise block. The order is fixed; files
/// and checkpoints rely on it.
pub fn spatial_feature(
    subj: &BoundingBox,
    obj: &BoundingBox,
    img: &ImageSize,
) -> Result<Vec<f64>> {
    let s = single_box_spatial(subj, img)?;
    let o = single_box_spatial(obj, img)?;
    let p = pairwise_spatial(subj, obj)?;
    let mut out = Vec::with_capacity(SPATIAL_DIM);
    out.extend_from_slice(&s);
    out.extend_from_slice(&o);
    out.extend_from_slice(&p);
    Ok(out)
}

/// Dense M×N×c activation grid, stored row-major as (row, column, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    m: usize,
    n: usize,
    c: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(m: usize, n: usize, c: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || c == 0 {
            return Err(Error::InvalidShape(format!(
                "feature map dimensions must be positive, got {m}x{n}x{c}"
            )));
        }
        if values.len() != m * n * c {
            return Err(Error::InvalidShape(format!(
                "feature map {m}x{n}x{c} needs {} values, got {}",
                m * n * c,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map values".to_string()));
        }
        Ok(FeatureMap { m, n, c, values })
    }

    pub fn from_fn(m: usize, n: usize, c: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(m * n * c);
        for i in 0..m {
            for j in 0..n {
                for ch in 0..c {
                    values.push(f(i, j, ch));
                }
            }
        }
        FeatureMap::new(m, n, c, values)
    }

    pub fn height(&self) -> usize {
        self.m
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    /// The c-dim fiber at grid cell (i, j).
    pub fn fiber(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.n + j) * self.c;
        &self.values[start..start + self.c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-channel arithmetic mean over all grid cells.
    pub fn mean_pool(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.c];
        for i in 0..self.m {
            for j in 0..self.n {
                for (o, v) in out.iter_mut().zip(self.fiber(i, j)) {
                    *o += v;
                }
            }
        }
        let cells = (self.m * self.n) as f64;
        for o in out.iter_mut() {
            *o /= cells;
        }
        out
    }

    /// Binary format: magic `FMAP`, then M, N, c as unsigned 32-bit
    /// little-endian integers, then M·N·c IEEE-754 32-bit little-endian
    /// floats in (row, column, channel) order.
    pub fn load(reader: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact_or_truncated(reader, &mut magic, 4)?;
        if &magic != b"FMAP" {
            return Err(Error::BadMagic {
                expected: "FMAP".to_string(),
                found: String::from_utf8_lossy(&magic).into_owned(),
            });
        }
        let m = read_u32(reader)? as usize;
        let n = read_u32(reader)? as usize;
        let c = read_u32(reader)? as usize;
        if m == 0 || n == 0 || c == 0 {
            return Err(Error::InvalidShape(format!(
                "feature map header declares {m}x{n}x{c}"
            )));
        }
        let count = m
            .checked_mul(n)
            .and_then(|x| x.checked_mul(c))
            .ok_or_else(|| Error::InvalidShape(format!("{m}x{n}x{c} overflows")))?;
        let mut payload = vec![0u8; count * 4];
        read_exact_or_truncated(reader, &mut payload, 16 + count * 4)?;
        let mut values = Vec::with_capacity(count);
        for chunk in payload.chunks_exact(4) {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
            if !v.is_finite() {
                return Err(Error::NonFinite("feature map payload".to_string()));
            }
            values.push(v);
        }
        FeatureMap::new(m, n, c, values)
    }

    /// Inverse of [`FeatureMap::load`]; values are narrowed to 32 bits.
    pub fn save(&self, writer: &mut impl Write) -> Result<()> {
        writer.write_all(b"FMAP")?;
        writer.write_all(&(self.m as u32).to_le_bytes())?;
        writer.write_all(&(self.n as u32).to_le_bytes())?;
        writer.write_all(&(self.c as u32).to_le_bytes())?;
        for v in &self.values {
            writer.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

/// Resolves the `fmap` references in annotation files to loaded maps.
/// `None` means the reference has no backing map; callers decide whether
/// that pair is skipped or an error.
pub trait FeatureMapSource {
    fn get(&self, key: &str) -> Result<Option<FeatureMap>>;
}

/// Feature maps stored as individual files under one directory, named by
/// their reference key.
pub struct DirFeatureMaps {
    dir: std::path::PathBuf,
}

impl DirFeatureMaps {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        DirFeatureMaps { dir: dir.into() }
    }
}

impl FeatureMapSource for DirFeatureMaps {
    fn get(&self, key: &str) -> Result<Option<FeatureMap>> {
        let path = self.dir.join(key);
        if !path.exists() {
            return Ok(None);
        }
        let mut file = std::fs::File::open(path)?;
        Ok(Some(FeatureMap::load(&mut file)?))
    }
}

/// In-memory feature maps, used by the synthetic generators and tests.
#[derive(Debug, Clone, Default)]
pub struct MemoryFeatureMaps {
    maps: std::collections::BTreeMap<String, FeatureMap>,
}

impl MemoryFeatureMaps {
    pub fn new(maps: std::collections::BTreeMap<String, FeatureMap>) -> Self {
        MemoryFeatureMaps { maps }
    }
}

impl FeatureMapSource for MemoryFeatureMaps {
    fn get(&self, key: &str) -> Result<Option<FeatureMap>> {
        Ok(self.maps.get(key).cloned())
    }
}

fn read_u32(reader: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact_or_truncated(reader, &mut buf, 4)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact_or_truncated(reader: &mut impl Read, buf: &mut [u8], expected: usize) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = reader.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(Error::Truncated {
                expected,
                found: expected - (buf.len() - filled),
            });
        }
        filled += n;
    }
    Ok(())
}
