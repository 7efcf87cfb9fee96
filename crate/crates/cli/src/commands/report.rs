use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;
use squeeze3d::analysis::{batch_spectra, median, SpectrumReport};
use squeeze3d::bridge::{compress, decompress, Bridge, PairedLatentDataset};
use squeeze3d::codec::CodecPair;
use squeeze3d::geometry::{chamfer, pointsim, PointCloud};
use squeeze3d::nn::Tensor;
use squeeze3d::payload::{code_bytes, compression_ratio, decode_payload, encode_payload};

use super::{elapsed_ms, train_bridge_with, Context, DatasetIndex, DATASET_INDEX};
use crate::config::Stream;
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionColumns {
    pub raw_bytes: usize,
    pub code_bytes: usize,
    pub payload_bytes: usize,
    /// Raw size over the quantized code alone.
    pub cr_code: f64,
    /// Raw size over the whole container file.
    pub cr_file: f64,
}

/// Ratio columns for a cloud of `raw_bytes` stored as the given container.
pub fn compression_columns(
    raw_bytes: usize,
    payload: &[u8],
) -> Result<CompressionColumns, CliError> {
    let (_, header) = decode_payload(payload)?;
    let code = code_bytes(header.d_c as usize, header.bits);
    Ok(CompressionColumns {
        raw_bytes,
        code_bytes: code,
        payload_bytes: payload.len(),
        cr_code: compression_ratio(raw_bytes as u64, code as u64)?,
        cr_file: compression_ratio(raw_bytes as u64, payload.len() as u64)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub index: usize,
    /// Chamfer after decoding the unquantized code.
    pub chamfer_direct: f64,
    /// Chamfer after the payload round trip.
    pub chamfer_payload: f64,
    /// Chamfer of the generator's own autoencoder round trip.
    pub chamfer_reference: Option<f64>,
    pub pointsim: f64,
    pub compression: CompressionColumns,
    #[serde(skip)]
    pub compress_ms: f64,
    #[serde(skip)]
    pub decompress_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_items: usize,
    pub d_c: usize,
    pub bits: u8,
    pub entropy: bool,
    pub chamfer_direct: Stat,
    pub chamfer_payload: Stat,
    pub chamfer_reference: Option<Stat>,
    pub pointsim: Stat,
    pub cr_code: Stat,
    pub cr_file: Stat,
    pub rows: Vec<EvalRow>,
    #[serde(skip)]
    pub compress_ms: Option<Stat>,
    #[serde(skip)]
    pub decompress_ms: Option<Stat>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "index,chamfer_direct,chamfer_payload,chamfer_reference,pointsim,raw_bytes,code_bytes,payload_bytes,cr_code,cr_file\n",
        );
        for r in &self.rows {
            let c = &r.compression;
            let reference = r
                .chamfer_reference
                .map(|v| v.to_string())
                .unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{reference},{},{},{},{},{},{}",
                r.index,
                r.chamfer_direct,
                r.chamfer_payload,
                r.pointsim,
                c.raw_bytes,
                c.code_bytes,
                c.payload_bytes,
                c.cr_code,
                c.cr_file
            )
            .expect("writing to a String");
        }
        s
    }

    pub fn timings_csv(&self) -> String {
        let mut s = String::from("index,compress_ms,decompress_ms\n");
        for r in &self.rows {
            writeln!(s, "{},{},{}", r.index, r.compress_ms, r.decompress_ms)
                .expect("writing to a String");
        }
        s
    }

    /// Mean ± std table in the shape of a results row.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let mut row = |name: &str, st: Stat| {
            writeln!(s, "{name:<18} {:>12.6} ± {:<12.6}", st.mean, st.std)
                .expect("writing to a String");
        };
        row("chamfer_direct", self.chamfer_direct);
        row("chamfer_payload", self.chamfer_payload);
        if let Some(r) = self.chamfer_reference {
            row("chamfer_reference", r);
        }
        row("pointsim", self.pointsim);
        row("cr_code", self.cr_code);
        row("cr_file", self.cr_file);
        if let Some(t) = self.compress_ms {
            row("compress_ms", t);
        }
        if let Some(t) = self.decompress_ms {
            row("decompress_ms", t);
        }
        s
    }
}

fn evaluate(
    ctx: &Context,
    codec: &CodecPair,
    bridge: &Bridge,
    items: &[(usize, PointCloud)],
) -> Result<EvalReport, CliError> {
    let p = &ctx.config.payload;
    let k = ctx.config.eval.pointsim_k;
    let mut rows = Vec::with_capacity(items.len());
    for (index, pc) in items {
        let tc = Instant::now();
        let z = compress(codec, bridge, pc)?;
        let bytes = encode_payload(
            &z,
            p.bits,
            p.entropy,
            codec.fingerprint(),
            bridge.fingerprint(),
        )?;
        let compress_ms = elapsed_ms(tc);
        let td = Instant::now();
        let (zq, _) = decode_payload(&bytes)?;
        let out = decompress(codec, bridge, &zq)?;
        let decompress_ms = elapsed_ms(td);
        let direct = decompress(codec, bridge, &z)?;
        let reference = match codec.paired_encoder() {
            Some(_) => Some(chamfer(&codec.reference_round_trip(pc)?, pc)),
            None => None,
        };
        rows.push(EvalRow {
            index: *index,
            chamfer_direct: chamfer(&direct, pc),
            chamfer_payload: chamfer(&out, pc),
            chamfer_reference: reference,
            pointsim: pointsim(&out, pc, k)?,
            compression: compression_columns(pc.raw_bytes(), &bytes)?,
            compress_ms,
            decompress_ms,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Config("no items to evaluate".into()));
    }
    let col = |f: &dyn Fn(&EvalRow) -> f64| Stat::of(&rows.iter().map(f).collect::<Vec<_>>());
    let reference: Option<Vec<f64>> = rows.iter().map(|r| r.chamfer_reference).collect();
    Ok(EvalReport {
        n_items: rows.len(),
        d_c: bridge.d_c(),
        bits: p.bits,
        entropy: p.entropy,
        chamfer_direct: col(&|r| r.chamfer_direct),
        chamfer_payload: col(&|r| r.chamfer_payload),
        chamfer_reference: reference.map(|v| Stat::of(&v)),
        pointsim: col(&|r| r.pointsim),
        cr_code: col(&|r| r.compression.cr_code),
        cr_file: col(&|r| r.compression.cr_file),
        compress_ms: Some(col(&|r| r.compress_ms)),
        decompress_ms: Some(col(&|r| r.decompress_ms)),
        rows,
    })
}

fn test_items(ctx: &Context, data_dir: &Path) -> Result<Vec<(usize, PointCloud)>, CliError> {
    let index = DatasetIndex::load(&ctx.path(data_dir))?;
    let mut idx = index.split.test.clone();
    if ctx.config.eval.max_items > 0 {
        idx.truncate(ctx.config.eval.max_items);
    }
    Ok(idx.iter().copied().zip(index.clouds(&idx)?).collect())
}

/// Metrics over the dataset's test split: `eval.json`, `eval.csv`, and
/// per-item timings in `eval_timings.csv`.
pub fn cmd_eval(
    ctx: &Context,
    codec_dir: &Path,
    bridge_dir: &Path,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<(EvalReport, RunManifest), CliError> {
    let t = Instant::now();
    let (codec, bridge) = ctx.load_bundle(codec_dir, bridge_dir)?;
    let items = test_items(ctx, data_dir)?;
    let report = evaluate(ctx, &codec, &bridge, &items)?;
    let out = ctx.path(out_dir);
    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("eval.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    std::fs::write(out.join("eval.csv"), report.to_csv())?;
    std::fs::write(out.join("eval_timings.csv"), report.timings_csv())?;
    let mut m = ctx.manifest("eval");
    m.inputs = ctx.bundle_inputs(codec_dir, bridge_dir, &codec, &bridge)?;
    m.inputs
        .push(ctx.artifact(&ctx.path(data_dir).join(DATASET_INDEX), None)?);
    for name in ["eval.json", "eval.csv"] {
        m.outputs.push(ctx.artifact(&out.join(name), None)?);
    }
    m.metrics = json!({
        "n_items": report.n_items,
        "chamfer_direct": report.chamfer_direct,
        "chamfer_payload": report.chamfer_payload,
        "chamfer_reference": report.chamfer_reference,
        "pointsim": report.pointsim,
        "cr_code": report.cr_code,
        "cr_file": report.cr_file,
    });
    m.timings.compress_ms = report.compress_ms.map(|s| s.mean);
    m.timings.decompress_ms = report.decompress_ms.map(|s| s.mean);
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    info!("eval over {} items:\n{}", report.n_items, report.to_table());
    Ok((report, m))
}

/// Where held-out codes for spectral analysis come from.
#[derive(Clone, Debug)]
pub enum AnalysisSource {
    /// Test split of a paired-latent file.
    Pairs(PathBuf),
    /// Test split of a shape dataset directory.
    Data(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub n_codes: usize,
    pub batch: usize,
    pub median_d_eff: f64,
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub median_kappa: f64,
    pub batches: Vec<SpectrumReport>,
}

fn ser_inf<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_inf<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        v => v
            .as_f64()
            .ok_or_else(|| serde::de::Error::custom("expected a number or \"inf\"")),
    }
}

impl AnalysisSummary {
    pub fn sigma_csv(&self) -> String {
        let mut s = String::from("batch,index,sigma\n");
        for (b, r) in self.batches.iter().enumerate() {
            for (i, v) in r.sigma.iter().enumerate() {
                writeln!(s, "{b},{i},{v}").expect("writing to a String");
            }
        }
        s
    }
}

fn held_out_codes(
    ctx: &Context,
    codec: &CodecPair,
    bridge: &Bridge,
    source: &AnalysisSource,
) -> Result<Tensor, CliError> {
    let z_e = match source {
        AnalysisSource::Pairs(path) => {
            let data = PairedLatentDataset::load(&ctx.path(path))?;
            if data.provenance.codec_fingerprint != codec.fingerprint() {
                ctx.provenance(format!(
                    "pairs were generated with codec {}, not {}",
                    data.provenance.codec_fingerprint,
                    codec.fingerprint()
                ))?;
            }
            data.gather(&data.split.test).0
        }
        AnalysisSource::Data(dir) => {
            let items = test_items(ctx, dir)?;
            let refs: Vec<&PointCloud> = items.iter().map(|(_, pc)| pc).collect();
            codec.encoder().encode_batch(&refs)?
        }
    };
    Ok(bridge.forward.net.predict(&z_e)?)
}

pub(crate) fn analyze(
    ctx: &Context,
    codec: &CodecPair,
    bridge: &Bridge,
    source: &AnalysisSource,
) -> Result<AnalysisSummary, CliError> {
    let z = held_out_codes(ctx, codec, bridge, source)?;
    let batch = ctx.config.eval.analysis_batch;
    let batches = batch_spectra(&z, batch)?;
    Ok(AnalysisSummary {
        n_codes: z.rows(),
        batch,
        median_d_eff: median(&batches.iter().map(|r| r.d_eff).collect::<Vec<_>>()),
        median_kappa: median(&batches.iter().map(|r| r.kappa).collect::<Vec<_>>()),
        batches,
    })
}

/// Spectra of held-out compressed codes: `spectrum.json` and `sigma.csv`.
pub fn cmd_analyze(
    ctx: &Context,
    codec_dir: &Path,
    bridge_dir: &Path,
    source: &AnalysisSource,
    out_dir: &Path,
) -> Result<(AnalysisSummary, RunManifest), CliError> {
    let t = Instant::now();
    let (codec, bridge) = ctx.load_bundle(codec_dir, bridge_dir)?;
    let summary = analyze(ctx, &codec, &bridge, source)?;
    let out = ctx.path(out_dir);
    std::fs::create_dir_all(&out)?;
    std::fs::write(
        out.join("spectrum.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    std::fs::write(out.join("sigma.csv"), summary.sigma_csv())?;
    let mut m = ctx.manifest("analyze");
    m.inputs = ctx.bundle_inputs(codec_dir, bridge_dir, &codec, &bridge)?;
    m.inputs.push(match source {
        AnalysisSource::Pairs(p) => ctx.artifact(&ctx.path(p), None)?,
        AnalysisSource::Data(d) => ctx.artifact(&ctx.path(d).join(DATASET_INDEX), None)?,
    });
    for name in ["spectrum.json", "sigma.csv"] {
        m.outputs.push(ctx.artifact(&out.join(name), None)?);
    }
    m.metrics = json!({
        "n_codes": summary.n_codes,
        "batches": summary.batches.len(),
        "median_d_eff": summary.median_d_eff,
        "median_kappa": if summary.median_kappa.is_infinite() { json!("inf") } else { json!(summary.median_kappa) },
    });
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    Ok((summary, m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub d_c: usize,
    pub lambda_gram: f64,
    pub best_epoch: usize,
    pub val_recon: f64,
    pub chamfer: Stat,
    pub pointsim: Stat,
    pub median_d_eff: f64,
    #[serde(serialize_with = "ser_inf", deserialize_with = "de_inf")]
    pub median_kappa: f64,
}

fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from(
        "d_c,lambda_gram,best_epoch,val_recon,chamfer_mean,chamfer_std,pointsim_mean,pointsim_std,median_d_eff,median_kappa\n",
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.d_c,
            r.lambda_gram,
            r.best_epoch,
            r.val_recon,
            r.chamfer.mean,
            r.chamfer.std,
            r.pointsim.mean,
            r.pointsim.std,
            r.median_d_eff,
            r.median_kappa
        )
        .expect("writing to a String");
    }
    s
}

/// Trains one bridge per `(d_c, λ_gram)` cell, evaluates each on the
/// dataset's test split, and merges the cells into `ablation.csv` sorted by
/// key. Each cell keeps its bridge and `cell.json` under `cells/`.
pub fn cmd_ablate(
    ctx: &Context,
    codec_dir: &Path,
    pairs_file: &Path,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<(Vec<AblationRow>, RunManifest), CliError> {
    let t = Instant::now();
    let out = ctx.path(out_dir);
    let codec = ctx.load_codec(codec_dir)?;
    let items = test_items(ctx, data_dir)?;
    let a = &ctx.config.ablation;
    if a.d_c.is_empty() || a.lambda_gram.is_empty() {
        return Err(CliError::Config(
            "ablation needs at least one d_c and one lambda_gram".into(),
        ));
    }
    let mut keys: Vec<(usize, f64)> = a
        .d_c
        .iter()
        .flat_map(|&d| a.lambda_gram.iter().map(move |&l| (d, l)))
        .collect();
    keys.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
    keys.dedup();
    let mut rows = Vec::with_capacity(keys.len());
    for (d_c, lambda_gram) in keys {
        let cell = out.join("cells").join(format!("dc{d_c}_lg{lambda_gram}"));
        info!("ablation cell d_c={d_c} lambda_gram={lambda_gram}");
        let (bridge, log, _) =
            train_bridge_with(ctx, codec_dir, pairs_file, &cell, d_c, lambda_gram)?;
        let report = evaluate(ctx, &codec, &bridge, &items)?;
        let spectrum = analyze(
            ctx,
            &codec,
            &bridge,
            &AnalysisSource::Pairs(ctx.path(pairs_file)),
        )?;
        let row = AblationRow {
            d_c,
            lambda_gram,
            best_epoch: log.best_epoch,
            val_recon: log.epochs[log.best_epoch].val.recon_term,
            chamfer: report.chamfer_direct,
            pointsim: report.pointsim,
            median_d_eff: spectrum.median_d_eff,
            median_kappa: spectrum.median_kappa,
        };
        std::fs::write(
            cell.join("cell.json"),
            serde_json::to_string_pretty(&row)? + "\n",
        )?;
        rows.push(row);
    }
    std::fs::write(out.join("ablation.csv"), ablation_csv(&rows))?;
    let mut m = ctx.manifest("ablate");
    m.seeds
        .insert("bridge".into(), ctx.config.seed_for(Stream::Bridge));
    m.inputs = ctx.artifacts(&ctx.path(codec_dir), Some(codec.fingerprint()))?;
    m.inputs.push(ctx.artifact(&ctx.path(pairs_file), None)?);
    m.inputs
        .push(ctx.artifact(&ctx.path(data_dir).join(DATASET_INDEX), None)?);
    m.outputs
        .push(ctx.artifact(&out.join("ablation.csv"), None)?);
    m.metrics = serde_json::to_value(&rows)?;
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    Ok((rows, m))
}
