//! Checkpoint directory: a key=value config manifest plus one binary tensor
//! blob per named parameter.
//!
//! Blob layout (little-endian): magic "TSR1", u32 rank, u32 extents, then
//! the f64 payload. Parameters are stored at full precision so a reloaded
//! model reproduces forward outputs bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DptConfig, DptModel};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const TENSOR_MAGIC: [u8; 4] = *b"TSR1";

fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&TENSOR_MAGIC)?;
    out.write_all(&(t.ndim() as u32).to_le_bytes())?;
    for &d in t.shape() {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in t.data().iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_tensor_into(path: &Path, t: &Tensor) -> Result<()> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Format(format!("truncated tensor blob {}", path.display())))?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Format(format!("bad tensor magic in {}", path.display())));
    }
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let rank = u32::from_le_bytes(u32buf) as usize;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        input.read_exact(&mut u32buf)?;
        shape.push(u32::from_le_bytes(u32buf) as usize);
    }
    if shape != t.shape() {
        return Err(Error::Format(format!(
            "parameter {} has shape {shape:?}, model wants {:?}",
            path.display(),
            t.shape()
        )));
    }
    let mut data = Vec::with_capacity(t.numel());
    let mut f64buf = [0u8; 8];
    for _ in 0..t.numel() {
        input
            .read_exact(&mut f64buf)
            .map_err(|_| Error::Format(format!("truncated tensor blob {}", path.display())))?;
        data.push(f64::from_le_bytes(f64buf));
    }
    t.set_data(data);
    Ok(())
}

/// Write `dir/manifest.txt` and one `dir/params/<name>.tsr` per parameter.
pub fn save_checkpoint(model: &DptModel, dir: &Path) -> Result<()> {
    let params_dir = dir.join("params");
    std::fs::create_dir_all(&params_dir)?;
    std::fs::write(dir.join("manifest.txt"), model.config.to_manifest())?;
    for (name, t) in model.named_params() {
        write_tensor(&params_dir.join(format!("{name}.tsr")), &t)?;
    }
    Ok(())
}

/// Rebuild a model from a checkpoint directory.
pub fn load_checkpoint(dir: &Path) -> Result<DptModel> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))
        .map_err(|e| Error::Format(format!("missing checkpoint manifest: {e}")))?;
    let config = DptConfig::from_manifest(&manifest)?;
    let model = DptModel::new(config, 0)?;
    for (name, t) in model.named_params() {
        read_tensor_into(&dir.join("params").join(format!("{name}.tsr")), &t)?;
    }
    Ok(model)
}

/// Load and insist the stored config matches the expected one.
pub fn load_checkpoint_expecting(dir: &Path, expected: &DptConfig) -> Result<DptModel> {
    let model = load_checkpoint(dir)?;
    if &model.config != expected {
        return Err(Error::Config(format!(
            "checkpoint config does not match: stored\n{}\nexpected\n{}",
            model.config.to_manifest(),
            expected.to_manifest()
        )));
    }
    Ok(model)
}
