//! Binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic   8 bytes  "CTPCCKPT"
//! version u32      1
//! meta    str      free-form text (network description + seed)
//! count   u32      number of entries
//! entry*  kind u8 (0 = parameter, 1 = buffer), learnable u8, name str,
//!         group str, ndims u32, dims u64*, values f64*
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes. Values are stored as
//! raw IEEE-754 bits, so a save/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::Network;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CTPCCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    Param,
    Buffer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub kind: EntryKind,
    pub name: String,
    pub group: String,
    pub learnable: bool,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub entries: Vec<Entry>,
}

impl Checkpoint {
    pub fn from_network(net: &Network, meta: impl Into<String>) -> Self {
        let mut entries: Vec<Entry> = net
            .params()
            .into_iter()
            .map(|p| Entry {
                kind: EntryKind::Param,
                name: p.name.clone(),
                group: p.weight_decay_group.clone(),
                learnable: p.learnable,
                shape: p.shape.clone(),
                values: p.values.clone(),
            })
            .collect();
        entries.extend(net.buffers().into_iter().map(|b| Entry {
            kind: EntryKind::Buffer,
            name: b.name.clone(),
            group: String::new(),
            learnable: false,
            shape: vec![b.values.len()],
            values: b.values.clone(),
        }));
        Self {
            meta: meta.into(),
            entries,
        }
    }

    /// Copies stored values into `net`; every parameter and buffer must be
    /// present with a matching shape.
    pub fn apply_to(&self, net: &mut Network) -> Result<()> {
        let find = |kind: EntryKind, name: &str| {
            self.entries
                .iter()
                .find(|e| e.kind == kind && e.name == name)
                .ok_or_else(|| Error::Malformed(format!("checkpoint has no entry for {name}")))
        };
        for p in net.params_mut() {
            let e = find(EntryKind::Param, &p.name)?;
            if e.shape != p.shape {
                return Err(Error::Malformed(format!(
                    "{}: shape {:?} vs {:?}",
                    p.name, e.shape, p.shape
                )));
            }
            p.values.copy_from_slice(&e.values);
        }
        for b in net.buffers_mut() {
            let e = find(EntryKind::Buffer, &b.name)?;
            if e.values.len() != b.values.len() {
                return Err(Error::Malformed(format!("{}: length mismatch", b.name)));
            }
            b.values.copy_from_slice(&e.values);
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_str(w, &self.meta)?;
        write_u32(w, self.entries.len())?;
        for e in &self.entries {
            w.write_all(&[
                match e.kind {
                    EntryKind::Param => 0,
                    EntryKind::Buffer => 1,
                },
                e.learnable as u8,
            ])?;
            write_str(w, &e.name)?;
            write_str(w, &e.group)?;
            write_u32(w, e.shape.len())?;
            for &d in &e.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in &e.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Malformed("not a checkpoint (bad magic)".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::Malformed(format!("unsupported checkpoint version {version}")));
        }
        let meta = read_str(r)?;
        let count = read_u32(r)?;
        let mut entries = Vec::with_capacity(count.min(1 << 16) as usize);
        for _ in 0..count {
            let mut head = [0u8; 2];
            read_exact(r, &mut head)?;
            let kind = match head[0] {
                0 => EntryKind::Param,
                1 => EntryKind::Buffer,
                k => return Err(Error::Malformed(format!("unknown entry kind {k}"))),
            };
            let name = read_str(r)?;
            let group = read_str(r)?;
            let ndims = read_u32(r)? as usize;
            if ndims > 8 {
                return Err(Error::Malformed(format!("{name}: {ndims} dimensions")));
            }
            let mut shape = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                let mut b = [0u8; 8];
                read_exact(r, &mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .filter(|&n| n <= 1 << 32)
                .ok_or_else(|| Error::Malformed(format!("{name}: shape {shape:?} too large")))?;
            let mut values = Vec::with_capacity(len);
            let mut b = [0u8; 8];
            for _ in 0..len {
                read_exact(r, &mut b)?;
                values.push(f64::from_le_bytes(b));
            }
            entries.push(Entry {
                kind,
                name,
                group,
                learnable: head[1] != 0,
                shape,
                values,
            });
        }
        Ok(Self { meta, entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn write_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Malformed(format!("length {v} exceeds u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<()> {
    write_u32(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Malformed("truncated checkpoint".into()),
        _ => Error::Io(e),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 24 {
        return Err(Error::Malformed(format!("string of {len} bytes")));
    }
    let mut b = vec![0u8; len];
    read_exact(r, &mut b)?;
    String::from_utf8(b).map_err(|_| Error::Malformed("invalid UTF-8 in checkpoint".into()))
}
