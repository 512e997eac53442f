//! Binary checkpoint format for a [`ParameterStore`].
//!
//! Layout (all integers little-endian u64, all floats little-endian f64):
//!
//! ```text
//! magic "CPLAB01\0"
//! entry_count
//! per entry, in sorted name order:
//!   name_len, name bytes (UTF-8)
//!   rank, dims[rank]
//!   values[numel], adam_m[numel], adam_v[numel]
//!   step
//! ```
//!
//! Saves write to a sibling temp file and rename into place, so a crash
//! mid-write never leaves a truncated checkpoint at the target path.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Result, TensorError};
use crate::ndarray::NdArray;
use crate::optim::{ParamEntry, ParameterStore};

const MAGIC: &[u8; 8] = b"CPLAB01\0";

fn write_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64_slice(w: &mut impl Write, vals: &[f64]) -> std::io::Result<()> {
    for &v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64_vec(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

pub fn save(store: &ParameterStore, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        w.write_all(MAGIC)?;
        write_u64(&mut w, store.len() as u64)?;
        for (name, entry) in store.iter() {
            write_u64(&mut w, name.len() as u64)?;
            w.write_all(name.as_bytes())?;
            write_u64(&mut w, entry.value.rank() as u64)?;
            for &d in entry.value.shape() {
                write_u64(&mut w, d as u64)?;
            }
            write_f64_slice(&mut w, entry.value.data())?;
            write_f64_slice(&mut w, entry.m.data())?;
            write_f64_slice(&mut w, entry.v.data())?;
            write_u64(&mut w, entry.step)?;
        }
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ParameterStore> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(TensorError::Checkpoint(format!(
            "bad magic {:02x?} in {}",
            magic,
            path.display()
        )));
    }
    let count = read_u64(&mut r)?;
    let mut store = ParameterStore::new();
    for _ in 0..count {
        let name_len = read_u64(&mut r)? as usize;
        if name_len > 4096 {
            return Err(TensorError::Checkpoint(format!("name length {name_len} out of range")));
        }
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|e| TensorError::Checkpoint(format!("non-UTF-8 name: {e}")))?;
        let rank = read_u64(&mut r)? as usize;
        if rank > 8 {
            return Err(TensorError::Checkpoint(format!("rank {rank} out of range")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u64(&mut r)? as usize);
        }
        let numel: usize = dims.iter().product();
        if numel == 0 || numel > 100_000_000 {
            return Err(TensorError::Checkpoint(format!("element count {numel} out of range")));
        }
        let value = NdArray::from_vec(&dims, read_f64_vec(&mut r, numel)?)?;
        let m = NdArray::from_vec(&dims, read_f64_vec(&mut r, numel)?)?;
        let v = NdArray::from_vec(&dims, read_f64_vec(&mut r, numel)?)?;
        let step = read_u64(&mut r)?;
        store.restore(&name, ParamEntry { value, m, v, step });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(TensorError::Checkpoint("trailing bytes after last entry".into()));
    }
    Ok(store)
}
