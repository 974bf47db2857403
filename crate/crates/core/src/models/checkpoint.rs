//! Binary checkpoints for trained networks.
//!
//! Little-endian layout:
//!
//! ```text
//! b"MILCKPT\0"  u32 version (=1)
//! u8 kind (1 instance, 2 attention)  u8 flag  u16 reserved (=0)
//! u32 dim  u32 hidden  u32 attention_hidden  u32 classes
//! u64 n  then n f64 parameters
//! ```
//!
//! `flag` is the pooling code for instance models and 0/1 (attention
//! disabled/enabled) for attention models. The oracle has no parameters and is
//! rebuilt from its dataset instead.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AttentionModel, InstanceModel, Model, Network, Pooling};
use crate::classifier::BagClassifier;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MILCKPT\0";
const VERSION: u32 = 1;

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

pub fn write_checkpoint<W: Write>(model: &Model, mut w: W) -> Result<()> {
    let (kind, flag, dims, params): (u8, u8, [usize; 4], &[f64]) = match model {
        Model::Oracle(_) => {
            return Err(Error::Config(
                "oracle models are rebuilt from their dataset and have no checkpoint".into(),
            ))
        }
        Model::Instance(m) => (
            1,
            m.pooling().code(),
            [m.dim(), m.hidden(), 0, m.num_classes()],
            m.params(),
        ),
        Model::Attention(m) => (
            2,
            m.attention_enabled() as u8,
            [m.dim(), m.embed(), m.attention_hidden(), m.num_classes()],
            m.params(),
        ),
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind, flag, 0, 0])?;
    for d in dims {
        let d = u32::try_from(d).map_err(|_| Error::contract("dimension exceeds u32"))?;
        w.write_all(&d.to_le_bytes())?;
    }
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for p in params {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Schema("truncated checkpoint".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Model> {
    if &read_array::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Schema("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Schema(format!("unsupported checkpoint version {version}")));
    }
    let [kind, flag, r0, r1] = read_array::<4, _>(&mut r)?;
    if r0 != 0 || r1 != 0 {
        return Err(Error::Schema("reserved header bytes are not zero".into()));
    }
    let dim = read_u32(&mut r)?;
    let hidden = read_u32(&mut r)?;
    let attn_hidden = read_u32(&mut r)?;
    let classes = read_u32(&mut r)?;
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;

    let expected = match kind {
        1 => InstanceModel::param_count(dim, hidden, classes),
        2 => AttentionModel::param_count(dim, hidden, attn_hidden, classes),
        other => return Err(Error::Schema(format!("unknown model kind {other}"))),
    };
    if n != expected {
        return Err(Error::Schema(format!(
            "checkpoint declares {n} parameters, architecture needs {expected}"
        )));
    }
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        params.push(f64::from_le_bytes(read_array(&mut r)?));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Schema("trailing bytes after parameters".into()));
    }

    match kind {
        1 => {
            let pooling = Pooling::from_code(flag)
                .ok_or_else(|| Error::Schema(format!("unknown pooling code {flag}")))?;
            Ok(Model::Instance(InstanceModel::from_params(
                dim, hidden, classes, pooling, params,
            )?))
        }
        _ => {
            if flag > 1 {
                return Err(Error::Schema(format!("bad attention flag {flag}")));
            }
            Ok(Model::Attention(AttentionModel::from_params(
                dim,
                hidden,
                attn_hidden,
                classes,
                flag == 1,
                params,
            )?))
        }
    }
}
