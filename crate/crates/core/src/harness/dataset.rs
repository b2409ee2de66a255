//! On-disk dataset layout: a directory with `manifest.json`, one TNSR image and
//! one annotation JSON per entry. Paths in the manifest are relative to the directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SynthImage;
use crate::density::{
    read_annotations, render_density, write_annotations, AnnotationSet, KernelSpec,
};
use crate::error::{dim_err, AsdError, Result};
use crate::tensor::Tensor;
use crate::train::Sample;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    pub annotations: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub images: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetItem {
    pub id: String,
    pub image: Tensor,
    pub annotations: AnnotationSet,
    pub regime: Option<usize>,
}

impl From<(usize, SynthImage)> for DatasetItem {
    fn from((i, s): (usize, SynthImage)) -> Self {
        Self {
            id: format!("img_{i:04}"),
            image: s.image,
            annotations: s.annotations,
            regime: Some(s.regime),
        }
    }
}

pub fn write_dataset(dir: &Path, items: &[DatasetItem]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = Manifest::default();
    for item in items {
        let image = format!("{}.tnsr", item.id);
        let annotations = format!("{}.json", item.id);
        let mut w = BufWriter::new(File::create(dir.join(&image))?);
        item.image.write_to(&mut w)?;
        drop(w);
        write_annotations(&dir.join(&annotations), &item.annotations)?;
        manifest.images.push(ManifestEntry {
            id: item.id.clone(),
            image,
            annotations,
            regime: item.regime,
        });
    }
    fs::write(
        dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Vec<DatasetItem>> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|e| AsdError::Argument(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.images.is_empty() {
        return Err(AsdError::Argument(format!(
            "{} lists no images",
            manifest_path.display()
        )));
    }
    manifest
        .images
        .into_iter()
        .map(|e| {
            let image = Tensor::read_from(&mut BufReader::new(File::open(dir.join(&e.image))?))?;
            let annotations = read_annotations(&dir.join(&e.annotations))?;
            let s = image.shape();
            if s.len() != 3 || s[0] != 1 || s[1] != annotations.height || s[2] != annotations.width
            {
                return dim_err(format!(
                    "{}: image shape {s:?} does not match annotated {}x{}",
                    e.id, annotations.height, annotations.width
                ));
            }
            Ok(DatasetItem {
                id: e.id,
                image,
                annotations,
                regime: e.regime,
            })
        })
        .collect()
}

/// Renders ground truth with `kernel` and sum-pools it by `stride` to the model's output grid.
pub fn to_samples(
    items: &[DatasetItem],
    kernel: &KernelSpec,
    stride: usize,
) -> Result<Vec<Sample>> {
    items
        .iter()
        .map(|item| {
            let full = render_density(&item.annotations, kernel)?;
            Ok(Sample {
                image: item.image.clone(),
                target: full.sum_pool_resample(stride)?,
            })
        })
        .collect()
}
