//! Binary checkpoint: header, config digest, sorted parameter manifest,
//! then a little-endian f32 payload. Round-trips byte-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"EMTODCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub version: u32,
    pub digest: [u8; 32],
    /// (name, tensor) in sorted name order.
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore, digest: [u8; 32]) -> Self {
        let params = store
            .iter()
            .map(|(name, entry)| (name.to_string(), entry.value.clone()))
            .collect();
        Self { version: FORMAT_VERSION, digest, params }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.version.to_le_bytes());
        buf.extend_from_slice(&self.digest);
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());

        let mut offset: u64 = 0;
        for (name, tensor) in &self.params {
            let name_bytes = name.as_bytes();
            buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
            buf.extend_from_slice(name_bytes);
            buf.push(tensor.shape().len() as u8);
            for &d in tensor.shape() {
                buf.extend_from_slice(&(d as u32).to_le_bytes());
            }
            buf.extend_from_slice(&offset.to_le_bytes());
            offset += (tensor.len() * 4) as u64;
        }
        buf.extend_from_slice(&offset.to_le_bytes());
        for (_, tensor) in &self.params {
            for &v in tensor.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }

        let mut file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        file.write_all(&buf).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut r = Reader { bytes: &bytes, pos: 0 };

        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".to_string()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unknown checkpoint version {version} (supported: {FORMAT_VERSION})"
            )));
        }
        let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        let count = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;

        let mut manifest: Vec<(String, Vec<usize>, u64)> = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("manifest name is not utf-8".to_string()))?;
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize);
            }
            let offset = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
            manifest.push((name, shape, offset));
        }
        let payload_len = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
        let payload = r.take(payload_len)?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after payload".to_string()));
        }

        let mut params = Vec::with_capacity(count);
        for (name, shape, offset) in manifest {
            let n: usize = shape.iter().product();
            let start = offset as usize;
            let end = start + n * 4;
            if end > payload.len() {
                return Err(Error::Checkpoint(format!(
                    "manifest entry `{name}` points past payload end"
                )));
            }
            let mut data = Vec::with_capacity(n);
            for i in 0..n {
                let b: [u8; 4] = payload[start + i * 4..start + i * 4 + 4].try_into().unwrap();
                data.push(f32::from_le_bytes(b) as f64);
            }
            params.push((name, Tensor::new(shape, data)?));
        }
        Ok(Self { version, digest, params })
    }

    /// Install parameter values into a store whose registered names and
    /// shapes must match the manifest exactly, in both directions.
    pub fn apply(&self, store: &mut ParamStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::Checkpoint(format!(
                "manifest has {} parameters, model registers {}",
                self.params.len(),
                store.len()
            )));
        }
        for (name, tensor) in &self.params {
            let registered = store
                .value(name)
                .map_err(|_| Error::Checkpoint(format!("manifest parameter `{name}` not registered by model")))?;
            if registered.shape() != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for `{name}`: checkpoint {:?}, model {:?}",
                    tensor.shape(),
                    registered.shape()
                )));
            }
        }
        for (name, tensor) in &self.params {
            store.set_value(name, tensor.clone())?;
        }
        Ok(())
    }

    pub fn expect_digest(&self, digest: &[u8; 32]) -> Result<()> {
        if &self.digest != digest {
            return Err(Error::Checkpoint(
                "config digest mismatch: checkpoint was written under a different configuration".to_string(),
            ));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated file: wanted {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}
