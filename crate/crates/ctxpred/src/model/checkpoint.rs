//! Binary checkpoint format for model parameters.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "CKPT"
//! version u32      currently 1
//! kind    u32      tag per ModelKind order (0 = baseline1-app, ...)
//! P       u32      predicates
//! d       u32      feature_dim
//! m       u32      code_dim
//! e       u32      embed_dim
//! K       u32      combos (0 unless a Baseline2 kind)
//! eps     f64      pool_epsilon
//! tensors f64 x N  active tensors flattened row-major, in the fixed
//!                  order w_bar, v[0..P], q, w_att_bar, v_att[0..P],
//!                  w_att, b_att, w_flat
//! ```
//!
//! Only tensors the kind uses are present, so N is fully determined by
//! the header.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelKind, ModelParams};

const MAGIC: &[u8; 4] = b"CKPT";
const VERSION: u32 = 1;

pub fn save(params: &ModelParams, writer: &mut impl Write) -> Result<()> {
    let cfg = &params.config;
    writer.write_all(MAGIC)?;
    for value in [
        VERSION,
        cfg.kind.tag(),
        cfg.predicates as u32,
        cfg.feature_dim as u32,
        cfg.code_dim as u32,
        cfg.embed_dim as u32,
        cfg.combos as u32,
    ] {
        writer.write_all(&value.to_le_bytes())?;
    }
    writer.write_all(&cfg.pool_epsilon.to_le_bytes())?;
    for view in params.tensor_views() {
        for v in view {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load(reader: &mut impl Read) -> Result<ModelParams> {
    let mut magic = [0u8; 4];
    read_exact(reader, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(&magic).into_owned(),
        });
    }
    let version = read_u32(reader)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind = ModelKind::from_tag(read_u32(reader)?)?;
    let predicates = read_u32(reader)? as usize;
    let feature_dim = read_u32(reader)? as usize;
    let code_dim = read_u32(reader)? as usize;
    let embed_dim = read_u32(reader)? as usize;
    let combos = read_u32(reader)? as usize;
    let pool_epsilon = read_f64(reader)?;
    let config = ModelConfig {
        kind,
        predicates,
        feature_dim,
        code_dim,
        embed_dim,
        combos,
        pool_epsilon,
    };
    let mut params = ModelParams::zeros(config)?;
    for view in params.tensor_views_mut() {
        for v in view.iter_mut() {
            let value = read_f64(reader)?;
            if !value.is_finite() {
                return Err(Error::NonFinite("checkpoint tensor value".to_string()));
            }
            *v = value;
        }
    }
    Ok(params)
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = reader.read(&mut buf[filled..])?;
        if n == 0 {
            return Err(Error::Truncated {
                expected: buf.len(),
                found: filled,
            });
        }
        filled += n;
    }
    Ok(())
}

fn read_u32(reader: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(reader, &mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64(reader: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    read_exact(reader, &mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
