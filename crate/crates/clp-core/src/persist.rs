//! Versioned binary model format.
//!
//! Layout, all little-endian:
//! magic `CLP1`, u32 dimension, u32 capacity, f64 tau, u32 cascade width,
//! f64 alpha_min, i64 pseudo-label counter, u32 allocated count, then per
//! prototype: dimension x f32 center, f64 goodness, i64 label.
//!
//! The capacity policy is runtime configuration and is not part of the
//! format; loaded pools default to `Skip`.
//!
//! Centers are held at f64 precision in memory and round to f32 on disk;
//! deserializing and re-serializing a file reproduces it byte-for-byte.

use std::fs;
use std::path::Path;

use crate::pool::{CapacityPolicy, PoolConfig, PoolError, Prototype, PrototypePool};

pub const MODEL_MAGIC: &[u8; 4] = b"CLP1";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PoolError> {
        if self.pos + n > self.buf.len() {
            return Err(PoolError::Format("truncated payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PoolError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, PoolError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PoolError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, PoolError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

impl PrototypePool {
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = self.config();
        let mut out = Vec::with_capacity(
            44 + self.len() * (c.dimension * 4 + 16),
        );
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(c.dimension as u32).to_le_bytes());
        out.extend_from_slice(&(c.capacity as u32).to_le_bytes());
        out.extend_from_slice(&c.tau.to_le_bytes());
        out.extend_from_slice(&(c.cascade_width as u32).to_le_bytes());
        out.extend_from_slice(&c.alpha_min.to_le_bytes());
        out.extend_from_slice(&self.next_pseudo_label().to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for p in self.prototypes() {
            for &v in &p.center {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
            out.extend_from_slice(&p.goodness.to_le_bytes());
            out.extend_from_slice(&p.label.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PoolError> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MODEL_MAGIC {
            return Err(PoolError::Format(format!(
                "bad magic {:02x?}, expected {:02x?}",
                magic, MODEL_MAGIC
            )));
        }
        let dimension = r.u32()? as usize;
        let capacity = r.u32()? as usize;
        let tau = r.f64()?;
        let cascade_width = r.u32()? as usize;
        let alpha_min = r.f64()?;
        let next_pseudo_label = r.i64()?;
        let count = r.u32()? as usize;
        let mut prototypes = Vec::with_capacity(count);
        for _ in 0..count {
            let mut center = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                center.push(r.f32()? as f64);
            }
            let goodness = r.f64()?;
            let label = r.i64()?;
            prototypes.push(Prototype {
                center,
                goodness,
                label,
            });
        }
        if r.pos != bytes.len() {
            return Err(PoolError::Format("trailing bytes after payload".into()));
        }
        let config = PoolConfig {
            dimension,
            capacity,
            tau,
            cascade_width,
            alpha_min,
            capacity_policy: CapacityPolicy::Skip,
        };
        PrototypePool::from_parts(config, prototypes, next_pseudo_label)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), std::io::Error> {
        fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PoolError> {
        let bytes = fs::read(path)
            .map_err(|e| PoolError::Format(format!("read failed: {e}")))?;
        Self::from_bytes(&bytes)
    }
}
