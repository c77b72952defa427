//! On-disk store layout (all integers little-endian):
//!
//! ```text
//! "CEMB"                      4 bytes
//! version                     u32 (= 1)
//! dim                         u32
//! count                       u64
//! rows                        count * dim f32, sorted by id
//! string table                count * (id_off u64, id_len u64, rep_off u64, rep_len u64)
//! blob_len                    u64
//! blob                        blob_len bytes of UTF-8
//! ```
//!
//! Offsets are relative to the start of the blob. A missing report is
//! written with `rep_len = u64::MAX` and `rep_off = 0`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{row_norm, EmbeddingStore, StoreError};

pub const MAGIC: &[u8; 4] = b"CEMB";
pub const VERSION: u32 = 1;

const ABSENT: u64 = u64::MAX;

impl EmbeddingStore {
    pub fn write_binary(&self, mut w: impl Write) -> Result<(), StoreError> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.ids[a].cmp(&self.ids[b]));

        let dim = u32::try_from(self.dim).map_err(|_| StoreError::Format("dimension exceeds u32".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for &i in &order {
            for v in self.row(i) {
                w.write_all(&v.to_le_bytes())?;
            }
        }

        let mut blob = Vec::new();
        let mut table = Vec::with_capacity(order.len() * 32);
        for &i in &order {
            let id = self.ids[i].as_bytes();
            table.extend_from_slice(&(blob.len() as u64).to_le_bytes());
            table.extend_from_slice(&(id.len() as u64).to_le_bytes());
            blob.extend_from_slice(id);
            match &self.reports[i] {
                Some(r) => {
                    table.extend_from_slice(&(blob.len() as u64).to_le_bytes());
                    table.extend_from_slice(&(r.len() as u64).to_le_bytes());
                    blob.extend_from_slice(r.as_bytes());
                }
                None => {
                    table.extend_from_slice(&0u64.to_le_bytes());
                    table.extend_from_slice(&ABSENT.to_le_bytes());
                }
            }
        }
        w.write_all(&table)?;
        w.write_all(&(blob.len() as u64).to_le_bytes())?;
        w.write_all(&blob)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self, StoreError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(StoreError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(StoreError::Format(format!("unsupported version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        if dim == 0 {
            return Err(StoreError::InvalidDimension);
        }
        let count = usize::try_from(read_u64(&mut r)?).map_err(|_| StoreError::Format("count overflow".into()))?;
        let values = count
            .checked_mul(dim)
            .ok_or_else(|| StoreError::Format("row table overflow".into()))?;

        let mut raw = Vec::new();
        (&mut r).take(values as u64 * 4).read_to_end(&mut raw)?;
        if raw.len() != values * 4 {
            return Err(StoreError::Format("truncated rows".into()));
        }
        let rows: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();

        let mut table = Vec::with_capacity(count);
        for _ in 0..count {
            table.push([
                read_u64(&mut r)?,
                read_u64(&mut r)?,
                read_u64(&mut r)?,
                read_u64(&mut r)?,
            ]);
        }
        let blob_len = read_u64(&mut r)?;
        let mut blob = Vec::new();
        (&mut r).take(blob_len).read_to_end(&mut blob)?;
        if blob.len() as u64 != blob_len {
            return Err(StoreError::Format("truncated string blob".into()));
        }

        let slice = |off: u64, len: u64| -> Result<String, StoreError> {
            let end = off
                .checked_add(len)
                .filter(|&e| e <= blob.len() as u64)
                .ok_or_else(|| StoreError::Format("string offset out of range".into()))?;
            String::from_utf8(blob[off as usize..end as usize].to_vec())
                .map_err(|_| StoreError::Format("invalid UTF-8 in string table".into()))
        };

        let mut ids = Vec::with_capacity(count);
        let mut reports = Vec::with_capacity(count);
        for [id_off, id_len, rep_off, rep_len] in table {
            ids.push(slice(id_off, id_len)?);
            reports.push(if rep_len == ABSENT {
                None
            } else {
                Some(slice(rep_off, rep_len)?)
            });
        }

        let mut seen = std::collections::HashSet::new();
        let mut norms = Vec::with_capacity(count);
        for (i, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(StoreError::DuplicateId(id.clone()));
            }
            let row = &rows[i * dim..(i + 1) * dim];
            if let Some(index) = row.iter().position(|v| !v.is_finite()) {
                return Err(StoreError::NonFinite { id: id.clone(), index });
            }
            let n = row_norm(row);
            if n == 0.0 {
                return Err(StoreError::ZeroNorm(id.clone()));
            }
            norms.push(n);
        }

        Ok(Self {
            dim,
            ids,
            reports,
            rows,
            norms,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        self.write_binary(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::read_binary(BufReader::new(File::open(path)?))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32, StoreError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, StoreError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
