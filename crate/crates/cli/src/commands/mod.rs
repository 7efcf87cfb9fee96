//! One function per CLI verb. Each reads its inputs from disk, writes its
//! outputs plus a run manifest, and returns what it produced.

mod report;
mod run;

pub use report::{
    cmd_ablate, cmd_analyze, cmd_eval, compression_columns, AblationRow, AnalysisSource,
    AnalysisSummary, CompressionColumns, EvalReport, EvalRow, Stat,
};
pub use run::{cmd_compress, cmd_decompress, cmd_interpolate, read_cloud, write_cloud};

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use squeeze3d::bridge::{
    gen_paired_dataset, train_bridge, Bridge, PairedLatentDataset, TrainingLog,
};
use squeeze3d::codec::{train_autoencoder, CodecPair, TrainReport};
use squeeze3d::fingerprint::Fingerprint;
use squeeze3d::geometry::{
    gen_shape, shape_dataset, write_pcl_file, DatasetSplit, PointCloud, ShapeSpec,
};

use crate::config::{PipelineConfig, Stream};
use crate::error::CliError;
use crate::manifest::{Artifact, RunManifest};

/// Environment variable naming the directory relative paths resolve
/// against.
pub const ROOT_ENV: &str = "SQUEEZE3D_ROOT";
pub const DATASET_INDEX: &str = "dataset.json";

#[derive(Clone, Debug)]
pub struct Context {
    pub root: PathBuf,
    pub config: PipelineConfig,
    /// Downgrades fingerprint and provenance mismatches to warnings.
    pub force: bool,
}

impl Context {
    /// Root taken from `SQUEEZE3D_ROOT`, else the working directory.
    pub fn from_env(config: PipelineConfig, force: bool) -> Self {
        let root = std::env::var_os(ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."));
        Self {
            root,
            config,
            force,
        }
    }

    pub fn with_root(root: impl Into<PathBuf>, config: PipelineConfig) -> Self {
        Self {
            root: root.into(),
            config,
            force: false,
        }
    }

    pub fn path(&self, p: impl AsRef<Path>) -> PathBuf {
        let p = p.as_ref();
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, self.config.hash())
    }

    fn artifact(&self, path: &Path, fp: Option<Fingerprint>) -> Result<Artifact, CliError> {
        Artifact::of_file(&self.root, path, fp)
    }

    fn artifacts(&self, dir: &Path, fp: Option<Fingerprint>) -> Result<Vec<Artifact>, CliError> {
        Artifact::of_dir(&self.root, dir, fp)
    }

    /// A hard error unless `force` is set, in which case it is logged.
    fn provenance(&self, message: String) -> Result<(), CliError> {
        if self.force {
            warn!("{message} (continuing because of --force)");
            Ok(())
        } else {
            Err(CliError::Provenance(message))
        }
    }

    pub fn load_codec(&self, dir: &Path) -> Result<CodecPair, CliError> {
        Ok(CodecPair::load(&self.path(dir))?)
    }

    /// Loads a codec and a bridge and checks the bridge was trained against
    /// that codec.
    pub fn load_bundle(
        &self,
        codec_dir: &Path,
        bridge_dir: &Path,
    ) -> Result<(CodecPair, Bridge), CliError> {
        let codec = self.load_codec(codec_dir)?;
        let bridge = Bridge::load(&self.path(bridge_dir))?;
        if bridge.codec_fingerprint != codec.fingerprint() {
            self.provenance(format!(
                "bridge was trained against codec {}, not {}",
                bridge.codec_fingerprint,
                codec.fingerprint()
            ))?;
        }
        if bridge.d_e() != codec.d_e() || bridge.d_g() != codec.d_g() {
            return Err(CliError::Config(format!(
                "bridge widths {}→{} do not fit codec widths {}→{}",
                bridge.d_e(),
                bridge.d_g(),
                codec.d_e(),
                codec.d_g()
            )));
        }
        Ok((codec, bridge))
    }

    fn bundle_inputs(
        &self,
        codec_dir: &Path,
        bridge_dir: &Path,
        codec: &CodecPair,
        bridge: &Bridge,
    ) -> Result<Vec<Artifact>, CliError> {
        let mut inputs = self.artifacts(&self.path(codec_dir), Some(codec.fingerprint()))?;
        inputs.extend(self.artifacts(&self.path(bridge_dir), Some(bridge.fingerprint()))?);
        Ok(inputs)
    }
}

pub(crate) fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Shape specifications and split written by `gen-data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub n_points: usize,
    pub seed: u64,
    pub split: DatasetSplit,
    pub shapes: Vec<ShapeSpec>,
}

impl DatasetIndex {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(DATASET_INDEX);
        let bytes = std::fs::read(&path)
            .map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn clouds(&self, idx: &[usize]) -> Result<Vec<PointCloud>, CliError> {
        idx.iter()
            .map(|&i| Ok(gen_shape(&self.shapes[i])?))
            .collect()
    }
}

/// Procedural shapes: `dataset.json` plus the held-out clouds as
/// `test/NNNNN.pcl`.
pub fn cmd_gen_data(ctx: &Context, out_dir: &Path) -> Result<RunManifest, CliError> {
    let t = Instant::now();
    let out = ctx.path(out_dir);
    let cfg = &ctx.config.data;
    let seed = ctx.config.seed_for(Stream::Data);
    let index = DatasetIndex {
        n_points: cfg.n_points,
        seed,
        split: DatasetSplit::new(cfg.n_shapes),
        shapes: shape_dataset(cfg.n_shapes, cfg.n_points, seed),
    };
    std::fs::create_dir_all(out.join("test"))?;
    std::fs::write(
        out.join(DATASET_INDEX),
        serde_json::to_string_pretty(&index)? + "\n",
    )?;
    let mut m = ctx.manifest("gen-data");
    m.seeds.insert("data".into(), seed);
    m.outputs
        .push(ctx.artifact(&out.join(DATASET_INDEX), None)?);
    for &i in &index.split.test {
        let path = out.join("test").join(format!("{i:05}.pcl"));
        write_pcl_file(&gen_shape(&index.shapes[i])?, &path)?;
        m.outputs.push(ctx.artifact(&path, None)?);
    }
    m.metrics = json!({
        "n_shapes": cfg.n_shapes,
        "n_points": cfg.n_points,
        "train": index.split.train.len(),
        "val": index.split.val.len(),
        "test": index.split.test.len(),
    });
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    info!("wrote {} shapes to {}", cfg.n_shapes, out.display());
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecTrainingReport {
    pub encoder_side: TrainReport,
    pub generator_side: TrainReport,
    pub whitened: bool,
}

/// Trains two autoencoders and freezes the first one's encoder with the
/// second one's decoder and prior.
pub fn cmd_train_codecs(
    ctx: &Context,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<(CodecPair, RunManifest), CliError> {
    let t = Instant::now();
    let data = ctx.path(data_dir);
    let out = ctx.path(out_dir);
    let cfg = &ctx.config;
    let index = DatasetIndex::load(&data)?;
    if index.n_points != cfg.data.n_points {
        return Err(CliError::Config(format!(
            "dataset has {} points per shape, config says {}",
            index.n_points, cfg.data.n_points
        )));
    }
    let train = index.clouds(&index.split.train)?;
    let val = index.clouds(&index.split.val)?;
    let (seed_a, seed_b) = (
        cfg.seed_for(Stream::CodecEncoder),
        cfg.seed_for(Stream::CodecGenerator),
    );
    info!("training encoder-side autoencoder");
    let a = train_autoencoder(
        &train,
        &val,
        &cfg.encoder_arch(),
        &cfg.autoencoder_config(seed_a),
    )?;
    info!("training generator-side autoencoder");
    let mut b = train_autoencoder(
        &train,
        &val,
        &cfg.generator_arch(),
        &cfg.autoencoder_config(seed_b),
    )?;
    if cfg.codec.whiten_generator {
        b = b.whitened(&train)?;
    }
    let codec = CodecPair::from_autoencoders(&a, &b)?;
    codec.save(&out)?;
    let report = CodecTrainingReport {
        encoder_side: a.report.clone(),
        generator_side: b.report.clone(),
        whitened: cfg.codec.whiten_generator,
    };
    std::fs::write(
        out.join("training.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let mut m = ctx.manifest("train-codecs");
    m.seeds.insert("codec.encoder".into(), seed_a);
    m.seeds.insert("codec.generator".into(), seed_b);
    m.inputs
        .push(ctx.artifact(&data.join(DATASET_INDEX), None)?);
    m.outputs = ctx.artifacts(&out, Some(codec.fingerprint()))?;
    m.metrics = json!({
        "codec_fingerprint": codec.fingerprint(),
        "encoder_side_train_chamfer": a.report.train_chamfer,
        "generator_side_train_chamfer": b.report.train_chamfer,
        "d_e": codec.d_e(),
        "d_g": codec.d_g(),
    });
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    Ok((codec, m))
}

/// Paired latents from the generator's prior, written as one `SQZP` file.
pub fn cmd_gen_pairs(
    ctx: &Context,
    codec_dir: &Path,
    out_file: &Path,
) -> Result<(PairedLatentDataset, RunManifest), CliError> {
    let t = Instant::now();
    let codec = ctx.load_codec(codec_dir)?;
    let out = ctx.path(out_file);
    let dir = out
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.root.clone());
    std::fs::create_dir_all(&dir)?;
    let seed = ctx.config.seed_for(Stream::Pairs);
    let data = gen_paired_dataset(&codec, ctx.config.pairs.n_pairs, seed)?;
    data.save(&out)?;
    let mut m = ctx.manifest("gen-pairs");
    m.seeds.insert("pairs".into(), seed);
    m.inputs = ctx.artifacts(&ctx.path(codec_dir), Some(codec.fingerprint()))?;
    m.outputs
        .push(ctx.artifact(&out, Some(codec.fingerprint()))?);
    m.metrics = json!({
        "requested": data.provenance.requested,
        "skipped": data.provenance.skipped,
        "stored": data.len(),
        "train": data.split.train.len(),
        "val": data.split.val.len(),
        "test": data.split.test.len(),
    });
    m.timings.total_ms = elapsed_ms(t);
    m.write(&dir)?;
    Ok((data, m))
}

/// Trains a bridge with the configured width and gram weight.
pub fn cmd_train_bridge(
    ctx: &Context,
    codec_dir: &Path,
    pairs_file: &Path,
    out_dir: &Path,
) -> Result<(Bridge, TrainingLog, RunManifest), CliError> {
    let cfg = &ctx.config;
    train_bridge_with(
        ctx,
        codec_dir,
        pairs_file,
        out_dir,
        cfg.bridge.d_c,
        cfg.bridge.lambda_gram,
    )
}

pub(crate) fn train_bridge_with(
    ctx: &Context,
    codec_dir: &Path,
    pairs_file: &Path,
    out_dir: &Path,
    d_c: usize,
    lambda_gram: f64,
) -> Result<(Bridge, TrainingLog, RunManifest), CliError> {
    let t = Instant::now();
    let codec = ctx.load_codec(codec_dir)?;
    let pairs = ctx.path(pairs_file);
    let data = PairedLatentDataset::load(&pairs)?;
    let out = ctx.path(out_dir);
    let seed = ctx.config.seed_for(Stream::Bridge);
    let tc = ctx.config.train_config(d_c, lambda_gram, seed);
    let (bridge, log) = train_bridge(
        &codec,
        &data,
        ctx.config.bridge.forward_arch,
        ctx.config.bridge.reverse_arch,
        &tc,
    )?;
    let after = CodecPair::load(&ctx.path(codec_dir))?.recompute_fingerprint()?;
    if after != codec.fingerprint() {
        return Err(CliError::Provenance(format!(
            "codec bundle changed during training ({after})"
        )));
    }
    let manifest = bridge.save(&out)?;
    std::fs::write(out.join("training_log.csv"), log.to_csv())?;
    let mut m = ctx.manifest("train-bridge");
    m.seeds.insert("bridge".into(), seed);
    m.inputs = ctx.artifacts(&ctx.path(codec_dir), Some(codec.fingerprint()))?;
    m.inputs
        .push(ctx.artifact(&pairs, Some(data.provenance.codec_fingerprint))?);
    m.outputs = ctx.artifacts(&out, Some(manifest.fingerprint))?;
    let best = &log.epochs[log.best_epoch];
    m.metrics = json!({
        "d_c": d_c,
        "lambda_gram": lambda_gram,
        "best_epoch": log.best_epoch,
        "val_gram": best.val.gram_term,
        "val_recon": best.val.recon_term,
        "val_total": best.val.total,
        "codec_fingerprint_before": codec.fingerprint(),
        "codec_fingerprint_after": after,
        "bridge_fingerprint": manifest.fingerprint,
    });
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    Ok((bridge, log, m))
}
