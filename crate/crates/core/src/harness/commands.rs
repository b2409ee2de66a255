//! File-level implementations of the CLI subcommands. Each takes paths and plain
//! values, writes its outputs, and returns what it computed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::gradcheck::{run_gradchecks, GradCheckOutcome};
use super::{
    read_dataset, run_ablation, scenario_report, synth_dataset, to_samples, write_dataset,
    AblationTable, DatasetItem, ExperimentConfig, ScenarioReport, SynthConfig,
};
use crate::density::{
    read_annotations, render_density, write_csv, write_dmap, write_pgm, DensityMap, KernelSpec,
};
use crate::error::{AsdError, Result};
use crate::model::{load_checkpoint, save_checkpoint, AsdModel};
use crate::train::{count_metrics, train_with_hook, CountMetrics, Sample, TrainLog};

#[derive(Clone, Debug)]
pub struct DensifyArgs {
    pub annotations: PathBuf,
    pub kernel: KernelSpec,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
    pub pgm: Option<PathBuf>,
}

pub fn densify(args: &DensifyArgs) -> Result<DensityMap> {
    let ann = read_annotations(&args.annotations)?;
    let map = render_density(&ann, &args.kernel)?;
    let mut w = BufWriter::new(File::create(&args.out)?);
    write_dmap(&mut w, &map)?;
    if let Some(p) = &args.csv {
        write_csv(File::create(p)?, &map)?;
    }
    if let Some(p) = &args.pgm {
        write_pgm(&mut BufWriter::new(File::create(p)?), &map)?;
    }
    Ok(map)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| AsdError::Argument(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Generates a dataset directory; returns the number of images written.
pub fn synth(config: &Path, out_dir: &Path) -> Result<usize> {
    let cfg: SynthConfig = read_json(config)?;
    let items: Vec<DatasetItem> = synth_dataset(&cfg)?
        .into_iter()
        .enumerate()
        .map(Into::into)
        .collect();
    write_dataset(out_dir, &items)?;
    Ok(items.len())
}

/// Kernel used to rebuild ground truth at evaluation time: from the experiment
/// config when one is given, the defaults otherwise.
pub fn kernel_from(config: Option<&Path>) -> Result<KernelSpec> {
    match config {
        Some(p) => Ok(ExperimentConfig::load(p)?.kernel),
        None => Ok(KernelSpec::default()),
    }
}

fn load_samples(
    data: &Path,
    kernel: &KernelSpec,
    model: &AsdModel,
) -> Result<(Vec<DatasetItem>, Vec<Sample>)> {
    let items = read_dataset(data)?;
    let samples = to_samples(&items, kernel, model.config().output_stride())?;
    Ok((items, samples))
}

/// `model.asdm` -> `model.<suffix>`
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains from `seed`, which sets both the initialization and the shuffle order.
/// Writes the checkpoint, `<out>.log.csv`, `<out>.log.json`, and intermediate
/// checkpoints `<out>.epochNNNN.asdm` when the config asks for them.
pub fn train(data: &Path, config: &Path, seed: u64, out: &Path) -> Result<TrainOutcome> {
    let mut cfg = ExperimentConfig::load(config)?;
    cfg.train.seed = seed;
    let mut model = AsdModel::build(cfg.model.clone(), seed)?;
    let (_, samples) = load_samples(data, &cfg.kernel, &model)?;
    let mut checkpoints = Vec::new();
    let every = cfg.train.checkpoint_every;
    let log = train_with_hook(&mut model, &samples, &cfg.train, |record, m| {
        if every.is_some_and(|k| record.epoch % k == 0) {
            let path = sibling(out, &format!("epoch{:04}.asdm", record.epoch));
            save_checkpoint(&path, m)?;
            checkpoints.push(path);
        }
        Ok(())
    })?;
    save_checkpoint(out, &model)?;
    log.write_csv(File::create(sibling(out, "log.csv"))?)?;
    fs::write(sibling(out, "log.json"), log.to_json()? + "\n")?;
    Ok(TrainOutcome { log, checkpoints })
}

#[derive(Clone, Debug)]
pub struct EvalRow {
    pub id: String,
    pub gt_count: f64,
    pub pred_count: f64,
}

/// Writes `id,gt_count,pred_count,abs_error` per image and, optionally, a PGM
/// heatmap of every predicted map into `heatmaps`.
pub fn eval(
    data: &Path,
    model_path: &Path,
    report: &Path,
    kernel: &KernelSpec,
    heatmaps: Option<&Path>,
) -> Result<(CountMetrics, Vec<EvalRow>)> {
    let model = load_checkpoint(model_path)?;
    let (items, samples) = load_samples(data, kernel, &model)?;
    if let Some(dir) = heatmaps {
        fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::with_capacity(items.len());
    for (item, s) in items.iter().zip(&samples) {
        let p = model.predict(&s.image)?;
        if let Some(dir) = heatmaps {
            let sh = p.fused.shape();
            let map = DensityMap::new(
                sh[1],
                sh[2],
                p.fused.data().iter().map(|v| v.max(0.0)).collect(),
            )?;
            write_pgm(
                &mut BufWriter::new(File::create(dir.join(format!("{}.pgm", item.id)))?),
                &map,
            )?;
        }
        rows.push(EvalRow {
            id: item.id.clone(),
            gt_count: s.target.count(),
            pred_count: p.count(),
        });
    }
    let pred: Vec<f64> = rows.iter().map(|r| r.pred_count).collect();
    let truth: Vec<f64> = rows.iter().map(|r| r.gt_count).collect();
    let metrics = count_metrics(&pred, &truth)?;

    let mut w = csv::Writer::from_writer(File::create(report)?);
    w.write_record(["id", "gt_count", "pred_count", "abs_error"])?;
    for r in &rows {
        w.write_record([
            r.id.clone(),
            r.gt_count.to_string(),
            r.pred_count.to_string(),
            (r.pred_count - r.gt_count).abs().to_string(),
        ])?;
    }
    w.flush()?;
    Ok((metrics, rows))
}

pub fn scenarios(
    data: &Path,
    model_path: &Path,
    bins: usize,
    report: &Path,
    kernel: &KernelSpec,
) -> Result<ScenarioReport> {
    let model = load_checkpoint(model_path)?;
    let (items, samples) = load_samples(data, kernel, &model)?;
    let ids: Vec<String> = items.into_iter().map(|i| i.id).collect();
    let r = scenario_report(&model, &ids, &samples, bins)?;
    fs::write(report, r.to_json()? + "\n")?;
    Ok(r)
}

/// Every cell trains from `train.seed` in the config.
pub fn ablate(data: &Path, config: &Path, report: &Path) -> Result<AblationTable> {
    let cfg = ExperimentConfig::load(config)?;
    let probe = AsdModel::build(cfg.model.clone(), cfg.train.seed)?;
    let (_, samples) = load_samples(data, &cfg.kernel, &probe)?;
    let table = run_ablation(
        &samples,
        &cfg.model,
        &cfg.train,
        cfg.train.seed,
        &cfg.ablation.variants,
        &cfg.ablation.bins,
    );
    table.write_csv(File::create(report)?)?;
    Ok(table)
}

pub fn gradcheck(op: Option<&str>, seed: u64) -> Result<Vec<GradCheckOutcome>> {
    run_gradchecks(op, seed)
}
