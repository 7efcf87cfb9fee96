use std::path::Path;
use std::time::Instant;

use serde_json::json;
use squeeze3d::bridge::{compress, decompress, interpolate, Bridge};
use squeeze3d::codec::CodecPair;
use squeeze3d::geometry::{read_pcl_file, read_xyz, write_pcl_file, write_xyz, PointCloud};
use squeeze3d::payload::{decode_payload, encode_payload, PayloadHeader};

use super::report::compression_columns;
use super::{elapsed_ms, Context};
use crate::error::CliError;
use crate::manifest::RunManifest;

fn is_xyz(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("xyz"))
}

/// Reads `.xyz` text or `PCL1` binary, chosen by extension.
pub fn read_cloud(path: &Path) -> Result<PointCloud, CliError> {
    if is_xyz(path) {
        Ok(read_xyz(&std::fs::read_to_string(path)?)?)
    } else {
        Ok(read_pcl_file(path)?)
    }
}

pub fn write_cloud(pc: &PointCloud, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    if is_xyz(path) {
        std::fs::write(path, write_xyz(pc))?;
    } else {
        write_pcl_file(pc, path)?;
    }
    Ok(())
}

/// Reads a payload and checks it against the loaded codec and bridge.
pub(crate) fn load_payload(
    ctx: &Context,
    codec: &CodecPair,
    bridge: &Bridge,
    path: &Path,
) -> Result<(Vec<f64>, PayloadHeader), CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Artifact(format!("{}: {e}", path.display())))?;
    let (z, header) = decode_payload(&bytes)?;
    if let Some(m) = header.check_fingerprints(codec.fingerprint(), bridge.fingerprint()) {
        ctx.provenance(format!(
            "{} was written for a different {}",
            path.display(),
            match (m.codec, m.bridge) {
                (true, true) => "codec and bridge",
                (true, false) => "codec",
                _ => "bridge",
            }
        ))?;
    }
    if z.len() != bridge.d_c() {
        return Err(CliError::Config(format!(
            "payload holds {} values, bridge expects {}",
            z.len(),
            bridge.d_c()
        )));
    }
    Ok((z, header))
}

/// Cloud → compressed code → payload file.
pub fn cmd_compress(
    ctx: &Context,
    codec_dir: &Path,
    bridge_dir: &Path,
    input: &Path,
    output: &Path,
) -> Result<(Vec<f64>, RunManifest), CliError> {
    let t = Instant::now();
    let (codec, bridge) = ctx.load_bundle(codec_dir, bridge_dir)?;
    let (input, output) = (ctx.path(input), ctx.path(output));
    let pc = read_cloud(&input)?;
    let p = &ctx.config.payload;
    let tc = Instant::now();
    let z = compress(&codec, &bridge, &pc)?;
    let bytes = encode_payload(
        &z,
        p.bits,
        p.entropy,
        codec.fingerprint(),
        bridge.fingerprint(),
    )?;
    let compress_ms = elapsed_ms(tc);
    if let Some(dir) = output.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&output, &bytes)?;
    let cr = compression_columns(pc.raw_bytes(), &bytes)?;
    let mut m = ctx.manifest("compress");
    m.inputs = ctx.bundle_inputs(codec_dir, bridge_dir, &codec, &bridge)?;
    m.inputs.push(ctx.artifact(&input, None)?);
    m.outputs
        .push(ctx.artifact(&output, Some(bridge.fingerprint()))?);
    m.metrics = json!({
        "d_c": z.len(),
        "bits": p.bits,
        "entropy_coded": bytes[11] == 1,
        "n_points": pc.len(),
        "raw_bytes": pc.raw_bytes(),
        "payload_bytes": bytes.len(),
        "code_bytes": cr.code_bytes,
        "cr_code": cr.cr_code,
        "cr_file": cr.cr_file,
    });
    m.timings.compress_ms = Some(compress_ms);
    m.timings.total_ms = elapsed_ms(t);
    m.write_beside(&output)?;
    Ok((z, m))
}

/// Payload file → cloud file.
pub fn cmd_decompress(
    ctx: &Context,
    codec_dir: &Path,
    bridge_dir: &Path,
    payload: &Path,
    output: &Path,
) -> Result<(PointCloud, RunManifest), CliError> {
    let t = Instant::now();
    let (codec, bridge) = ctx.load_bundle(codec_dir, bridge_dir)?;
    let (payload, output) = (ctx.path(payload), ctx.path(output));
    let td = Instant::now();
    let (z, header) = load_payload(ctx, &codec, &bridge, &payload)?;
    let pc = decompress(&codec, &bridge, &z)?;
    let decompress_ms = elapsed_ms(td);
    write_cloud(&pc, &output)?;
    let mut m = ctx.manifest("decompress");
    m.inputs = ctx.bundle_inputs(codec_dir, bridge_dir, &codec, &bridge)?;
    m.inputs
        .push(ctx.artifact(&payload, Some(header.bridge_fingerprint))?);
    m.outputs.push(ctx.artifact(&output, None)?);
    m.metrics = json!({
        "d_c": header.d_c,
        "bits": header.bits,
        "entropy_coded": header.entropy_coded,
        "n_points": pc.len(),
        "finite": pc.points().iter().flatten().all(|v| v.is_finite()),
    });
    m.timings.decompress_ms = Some(decompress_ms);
    m.timings.total_ms = elapsed_ms(t);
    m.write_beside(&output)?;
    Ok((pc, m))
}

/// Decodes `steps` evenly spaced blends of two payloads' codes, endpoints
/// included, as `step_NNN.pcl`.
pub fn cmd_interpolate(
    ctx: &Context,
    codec_dir: &Path,
    bridge_dir: &Path,
    payload_a: &Path,
    payload_b: &Path,
    steps: usize,
    out_dir: &Path,
) -> Result<(Vec<(f64, PointCloud)>, RunManifest), CliError> {
    if steps < 2 {
        return Err(CliError::Config(format!(
            "interpolation needs at least 2 steps, got {steps}"
        )));
    }
    let t = Instant::now();
    let (codec, bridge) = ctx.load_bundle(codec_dir, bridge_dir)?;
    let (pa, pb, out) = (ctx.path(payload_a), ctx.path(payload_b), ctx.path(out_dir));
    let (za, _) = load_payload(ctx, &codec, &bridge, &pa)?;
    let (zb, _) = load_payload(ctx, &codec, &bridge, &pb)?;
    std::fs::create_dir_all(&out)?;
    let mut m = ctx.manifest("interpolate");
    m.inputs = ctx.bundle_inputs(codec_dir, bridge_dir, &codec, &bridge)?;
    m.inputs.push(ctx.artifact(&pa, None)?);
    m.inputs.push(ctx.artifact(&pb, None)?);
    let mut clouds = Vec::with_capacity(steps);
    let mut ts = Vec::with_capacity(steps);
    for k in 0..steps {
        let tk = k as f64 / (steps - 1) as f64;
        let pc = decompress(&codec, &bridge, &interpolate(&za, &zb, tk)?)?;
        let path = out.join(format!("step_{k:03}.pcl"));
        write_cloud(&pc, &path)?;
        m.outputs.push(ctx.artifact(&path, None)?);
        ts.push(tk);
        clouds.push((tk, pc));
    }
    m.metrics = json!({
        "steps": steps,
        "t": ts,
        "all_finite": clouds.iter().all(|(_, pc)| pc.points().iter().flatten().all(|v| v.is_finite())),
    });
    m.timings.total_ms = elapsed_ms(t);
    m.write(&out)?;
    Ok((clouds, m))
}
