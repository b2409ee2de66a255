use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AnnotationSet, DensityMap};
use crate::error::{AsdError, Result};
use crate::tensor::{read_f32, read_u32};

const DMAP_MAGIC: &[u8; 4] = b"DMAP";
const DMAP_VERSION: u32 = 1;

/// Reads `{"width": .., "height": .., "points": [[x, y], ...]}` and validates bounds.
pub fn read_annotations(path: &Path) -> Result<AnnotationSet> {
    let ann: AnnotationSet = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    ann.validate()?;
    Ok(ann)
}

pub fn write_annotations(path: &Path, ann: &AnnotationSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, ann)?;
    w.flush()?;
    Ok(())
}

pub fn write_dmap<W: Write>(w: &mut W, map: &DensityMap) -> Result<()> {
    w.write_all(DMAP_MAGIC)?;
    w.write_all(&DMAP_VERSION.to_le_bytes())?;
    w.write_all(&(map.height() as u32).to_le_bytes())?;
    w.write_all(&(map.width() as u32).to_le_bytes())?;
    for &v in map.values() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dmap<R: Read>(r: &mut R) -> Result<DensityMap> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DMAP_MAGIC {
        return Err(AsdError::Format(format!("bad density map magic {magic:?}")));
    }
    let version = read_u32(r)?;
    if version != DMAP_VERSION {
        return Err(AsdError::Format(format!(
            "unsupported density map version {version}"
        )));
    }
    let height = read_u32(r)? as usize;
    let width = read_u32(r)? as usize;
    let values = (0..height * width)
        .map(|_| read_f32(r).map(f64::from))
        .collect::<Result<Vec<_>>>()?;
    DensityMap::new(height, width, values)
}

/// One CSV row per raster row.
pub fn write_csv<W: Write>(w: W, map: &DensityMap) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in map.values().chunks(map.width()) {
        out.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    out.flush()?;
    Ok(())
}

/// Binary 8-bit PGM, scaled so the largest value maps to 255.
pub fn write_pgm<W: Write>(w: &mut W, map: &DensityMap) -> Result<()> {
    let max = map.values().iter().copied().fold(0.0, f64::max);
    write!(w, "P5\n{} {}\n255\n", map.width(), map.height())?;
    let pixels: Vec<u8> = map
        .values()
        .iter()
        .map(|&v| {
            if max > 0.0 {
                (v / max * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    w.write_all(&pixels)?;
    Ok(())
}
