use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AsdConfig, AsdModel};
use crate::error::{AsdError, Result};
use crate::tensor::{read_u32, Tensor};

const MAGIC: &[u8; 4] = b"ASDM";
const VERSION: u32 = 1;

/// Layout: `ASDM`, version, JSON config (u32 length + bytes), tensor count, then
/// per tensor a u32-length UTF-8 name followed by a `TNSR` record.
pub fn write_checkpoint<W: Write>(w: &mut W, model: &AsdModel) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let config = serde_json::to_vec(model.config())?;
    w.write_all(&(config.len() as u32).to_le_bytes())?;
    w.write_all(&config)?;
    w.write_all(&(model.params().len() as u32).to_le_bytes())?;
    for (name, t) in model.param_names().iter().zip(model.params()) {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        t.write_to(w)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<AsdModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AsdError::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(AsdError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config: AsdConfig = serde_json::from_slice(&read_block(r)?)?;
    let count = read_u32(r)? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name = String::from_utf8(read_block(r)?)
            .map_err(|e| AsdError::Format(format!("parameter name is not UTF-8: {e}")))?;
        params.push((name, Tensor::read_from(r)?));
    }
    let mut model = AsdModel::build(config, 0)?;
    model.replace_params(params)?;
    Ok(model)
}

fn read_block<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn save_checkpoint(path: &Path, model: &AsdModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AsdModel> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
