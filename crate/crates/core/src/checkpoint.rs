//! Binary checkpoint container: magic, format version, JSON header, then raw
//! little-endian f64 tensor data in header order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"UNMTCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<H> {
    header: H,
    tensors: Vec<(String, Vec<usize>)>,
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn save<H: Serialize>(path: &Path, header: &H, tensors: &[(String, Tensor)]) -> Result<()> {
    let env = Envelope { header, tensors: tensors.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect() };
    let json = serde_json::to_vec(&env)?;
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for (_, t) in tensors {
            for x in t.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<(String, Tensor)>)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint format version {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let mut json = vec![0u8; u64::from_le_bytes(b8) as usize];
    r.read_exact(&mut json).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let env: Envelope<H> = serde_json::from_slice(&json)?;
    let mut tensors = Vec::with_capacity(env.tensors.len());
    for (name, shape) in env.tensors {
        let n: usize = shape.iter().product();
        let mut raw = vec![0u8; n * 8];
        r.read_exact(&mut raw).map_err(|_| Error::Checkpoint(format!("truncated data for {name}")))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        tensors.push((name, Tensor::new(shape, data)?));
    }
    Ok((env.header, tensors))
}

pub fn index(tensors: &[(String, Tensor)]) -> HashMap<&str, &Tensor> {
    tensors.iter().map(|(n, t)| (n.as_str(), t)).collect()
}
