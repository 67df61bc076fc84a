//! Single-file model container: 4-byte magic, `u32` version, a JSON header
//! echoing the configuration, then named tensors as little-endian `f32`
//! with shape headers.
//!
//! ```text
//! magic[4] version:u32 header_len:u32 header[header_len]
//! tensor_count:u32
//! repeat: name_len:u32 name ndim:u32 dims:u64*ndim data:f32*prod(dims)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};
use crate::nn::{cast, Float, Module};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub data: ArrayD<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new(header: serde_json::Value) -> Self {
        Self { header, tensors: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, data: ArrayD<f32>) {
        self.tensors.push(Tensor { name: name.into(), data });
    }

    /// Append every param of `module` under `prefix`.
    pub fn push_module<F: Float>(&mut self, prefix: &str, module: &mut impl Module<F>) {
        module.visit(prefix, &mut |name, p| {
            self.tensors.push(Tensor { name: name.to_string(), data: p.value.mapv(|v| v.to_f32().unwrap_or(f32::NAN)) });
        });
    }

    pub fn get(&self, name: &str) -> Result<&ArrayD<f32>> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.data)
            .ok_or_else(|| Error::format(format!("checkpoint has no tensor {name:?}")))
    }

    /// Fill every param of `module` from the tensors of the same name.
    pub fn load_module<F: Float>(&self, prefix: &str, module: &mut impl Module<F>) -> Result<()> {
        let mut failure = None;
        module.visit(prefix, &mut |name, p| {
            if failure.is_some() {
                return;
            }
            match self.get(name) {
                Ok(t) if t.shape() == p.value.shape() => p.value = t.mapv(|v| cast(f64::from(v))),
                Ok(t) => {
                    failure = Some(Error::Shape(format!(
                        "tensor {name}: checkpoint shape {:?}, model shape {:?}",
                        t.shape(),
                        p.value.shape()
                    )))
                }
                Err(e) => failure = Some(e),
            }
        });
        failure.map_or(Ok(()), Err)
    }

    pub fn write_to(&self, w: &mut impl Write, magic: &[u8; 4]) -> Result<()> {
        w.write_all(magic)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&self.header)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.name.len() as u32).to_le_bytes())?;
            w.write_all(t.name.as_bytes())?;
            w.write_all(&(t.data.ndim() as u32).to_le_bytes())?;
            for &d in t.data.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read, magic: &[u8; 4]) -> Result<Self> {
        let mut m = [0u8; 4];
        r.read_exact(&mut m)?;
        if &m != magic {
            return Err(Error::format(format!(
                "bad checkpoint magic {:?}, expected {:?}",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version}")));
        }
        let header_len = read_u32(r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let header = serde_json::from_slice(&header)?;
        let count = read_u32(r)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = read_u32(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| Error::format("tensor name is not UTF-8"))?;
            let ndim = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                shape.push(u64::from_le_bytes(b) as usize);
            }
            let len: usize = shape.iter().product();
            let mut bytes = vec![0u8; len * 4];
            r.read_exact(&mut bytes)?;
            let values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let data = ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| Error::Shape(e.to_string()))?;
            tensors.push(Tensor { name, data });
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path, magic: &[u8; 4]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w, magic)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path, magic: &[u8; 4]) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?), magic)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
