//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 4, 5, 6, 8 and 9 share one run of the standard toy pipeline
//! built through the command functions in a temporary artifact root.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::path::{Path, PathBuf};
use std::time::Instant;

use oracles::{gram_columns, jacobi_eigenvalues, max_rel_err, spectrum_from_eigs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squeeze3d::analysis::{median, spectrum};
use squeeze3d::bridge::{
    bridge_loss, bridge_loss_and_grads, decompress, Direction, MappingArch, MappingNetwork,
};
use squeeze3d::codec::CodecPair;
use squeeze3d::fingerprint::{sha256_hex, Fingerprint};
use squeeze3d::geometry::{gen_shape, shape_dataset, PointCloud};
use squeeze3d::nn::{LayerSpec, Mode, Network, Tensor};
use squeeze3d::payload::{dequantize, encode_payload, quantize, range_decode, range_encode};
use squeeze3d_cli::commands::*;
use squeeze3d_cli::manifest::RunManifest;
use squeeze3d_cli::{Context, PipelineConfig};

const CR_TARGET: f64 = 58.5;
const CR_REL_TOL: f64 = 0.005;
const CR_MAX_SECONDS: f64 = 1.0;
const GRAD_CONFIGS: usize = 100;
const GRAD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-3;
const GRAD_TOL: f64 = 1e-4;
const SPECTRUM_MATRICES: usize = 50;
const SPECTRUM_TOL: f64 = 1e-8;
const GRAM_SEEDS: u64 = 5;
const GRAM_LAMBDA: f64 = 0.1;
const D_EFF_FACTOR: f64 = 2.0;
const E2E_FACTOR: f64 = 1.5;
const E2E_ITEMS: usize = 100;
const QUANT_8BIT_SLACK: f64 = 0.005;
const QUANT_VECTORS: usize = 10_000;
const RANGE_STREAMS: usize = 1_000;
const INTERP_PAIRS: usize = 10;
const INTERP_BOUND: f64 = 1.5;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, name: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} [{id}] {name}: {detail} ({:.1} s)",
            started.elapsed().as_secs_f64()
        );
    }
}

fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(
        r,
        c,
        (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn criterion_1(report: &mut Report) {
    let t = Instant::now();
    let spec = &shape_dataset(1, 10_000, 1)[0];
    let pc = gen_shape(spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z: Vec<f64> = (0..1024).map(|_| rng.random_range(-3.0..3.0)).collect();
    let payload = encode_payload(
        &z,
        16,
        false,
        Fingerprint::default(),
        Fingerprint::default(),
    )
    .unwrap();
    let cols = compression_columns(pc.raw_bytes(), &payload).unwrap();
    let rel = (cols.cr_code - CR_TARGET).abs() / CR_TARGET;
    let secs = t.elapsed().as_secs_f64();
    report.line(
        "1",
        "compression-ratio accounting",
        cols.raw_bytes == 120_000 && cols.code_bytes == 2048 && rel <= CR_REL_TOL && secs < CR_MAX_SECONDS,
        format!(
            "{} B raw / {} B code = {:.5} vs {CR_TARGET} (rel {:.3}% ≤ {:.1}%); whole file {} B → {:.3}",
            cols.raw_bytes,
            cols.code_bytes,
            cols.cr_code,
            rel * 100.0,
            CR_REL_TOL * 100.0,
            cols.payload_bytes,
            cols.cr_file
        ),
        t,
    );
}

/// Fourth-order central difference from samples at ±h and ±2h.
fn central(f: &mut dyn FnMut(f64) -> f64) -> f64 {
    let h = GRAD_STEP;
    (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
}

fn numeric_param_grads(
    nets: &mut [&mut Network],
    loss: &dyn Fn(&[&mut Network]) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for n in 0..nets.len() {
        for t in 0..nets[n].params().len() {
            for j in 0..nets[n].params()[t].len() {
                let orig = nets[n].params()[t].data()[j];
                out.push(central(&mut |d| {
                    nets[n].params_mut()[t].data_mut()[j] = orig + d;
                    loss(nets)
                }));
                nets[n].params_mut()[t].data_mut()[j] = orig;
            }
        }
    }
    out
}

fn layer_stack_error(rng: &mut ChaCha8Rng, seed: u64) -> f64 {
    let (d_in, h, d_out) = (
        rng.random_range(2..6),
        rng.random_range(2..7),
        rng.random_range(1..5),
    );
    let specs = vec![
        LayerSpec::linear(d_in, h),
        LayerSpec::layernorm(h),
        LayerSpec::gelu(h),
        LayerSpec::dropout(h, rng.random_range(0.0..0.5)),
        LayerSpec::linear(h, h),
        LayerSpec::residual(h, 1),
        LayerSpec::gelu(h),
        LayerSpec::linear(h, d_out),
    ];
    let mut net = Network::new(specs, rng).unwrap();
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let b = rng.random_range(1..4);
    let x = random_matrix(rng, b, d_in);
    let w = random_matrix(rng, b, d_out);
    let weighted = |net: &Network, x: &Tensor| -> f64 {
        let (y, _) = net.forward(x, Mode::Train, seed).unwrap();
        y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
    };
    let (_, cache) = net.forward(&x, Mode::Train, seed).unwrap();
    let (grads, gx) = net.backward(&cache, &w).unwrap();
    let analytic: Vec<f64> = grads
        .flat()
        .iter()
        .flat_map(|t| t.data().to_vec())
        .collect();
    let numeric = numeric_param_grads(&mut [&mut net], &|n: &[&mut Network]| weighted(n[0], &x));
    let num_x: Vec<f64> = (0..x.len())
        .map(|j| {
            central(&mut |d| {
                let mut xd = x.clone();
                xd.data_mut()[j] += d;
                weighted(&net, &xd)
            })
        })
        .collect();
    max_rel_err(&analytic, &numeric, GRAD_FLOOR).max(max_rel_err(gx.data(), &num_x, GRAD_FLOOR))
}

fn bridge_loss_error(rng: &mut ChaCha8Rng, seed: u64) -> f64 {
    let (d_e, d_c, d_g) = (
        rng.random_range(2..7),
        rng.random_range(3..7),
        rng.random_range(2..6),
    );
    let b = rng.random_range(1..=d_c);
    let dropout = rng.random_range(0.0..0.3);
    let fwd_arch = MappingArch::FeedforwardResidual {
        hidden: rng.random_range(2..6),
    };
    let rev_arch = MappingArch::DeepResidual {
        hidden: rng.random_range(2..6),
        depth: rng.random_range(1..6),
    };
    let mut fwd = MappingNetwork {
        direction: Direction::Forward,
        arch: fwd_arch,
        net: Network::new(fwd_arch.specs(d_e, d_c, dropout), rng).unwrap(),
    };
    let mut rev = MappingNetwork {
        direction: Direction::Reverse,
        arch: rev_arch,
        net: Network::new(rev_arch.specs(d_c, d_g, dropout), rng).unwrap(),
    };
    let z_e = random_matrix(rng, b, d_e);
    let z_g = random_matrix(rng, b, d_g);
    let (lg, lgen) = (rng.random_range(0.0..1.0), rng.random_range(0.1..2.0));
    let (_, grads) = bridge_loss_and_grads(&fwd, &rev, &z_e, &z_g, lg, lgen, seed).unwrap();
    let analytic: Vec<f64> = grads
        .forward
        .flat()
        .iter()
        .chain(grads.reverse.flat().iter())
        .flat_map(|t| t.data().to_vec())
        .collect();
    let (fa, ra) = (fwd.arch, rev.arch);
    let numeric = numeric_param_grads(
        &mut [&mut fwd.net, &mut rev.net],
        &|n: &[&mut Network]| {
            let f = MappingNetwork {
                direction: Direction::Forward,
                arch: fa,
                net: n[0].clone(),
            };
            let r = MappingNetwork {
                direction: Direction::Reverse,
                arch: ra,
                net: n[1].clone(),
            };
            bridge_loss(&f, &r, &z_e, &z_g, lg, lgen, Mode::Train, seed)
                .unwrap()
                .total
        },
    );
    max_rel_err(&analytic, &numeric, GRAD_FLOOR)
}

fn criterion_2(report: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_layers, mut worst_loss) = (0.0f64, 0.0f64);
    for c in 0..GRAD_CONFIGS as u64 {
        worst_layers = worst_layers.max(layer_stack_error(&mut rng, c));
        worst_loss = worst_loss.max(bridge_loss_error(&mut rng, c));
    }
    report.line(
        "2",
        "gradient suite",
        worst_layers < GRAD_TOL && worst_loss < GRAD_TOL,
        format!(
            "{GRAD_CONFIGS} configs; max rel err layers {worst_layers:.2e}, full bridge loss {worst_loss:.2e} (< {GRAD_TOL:.0e})"
        ),
        t,
    );
}

fn criterion_3(report: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..SPECTRUM_MATRICES {
        let (r, c) = (rng.random_range(1..=32), rng.random_range(1..=64));
        let z = random_matrix(&mut rng, r, c);
        let rows: Vec<Vec<f64>> = (0..r).map(|i| z.row(i).to_vec()).collect();
        let cols: Vec<Vec<f64>> = (0..c)
            .map(|j| (0..r).map(|i| z.get(i, j)).collect())
            .collect();
        let k = r.min(c);
        let eig = if r < c {
            jacobi_eigenvalues(&gram_columns(&cols))
        } else {
            jacobi_eigenvalues(&gram_columns(&rows))
        };
        let (d_eff, kappa) = spectrum_from_eigs(&eig, k);
        let s = spectrum(&z).unwrap();
        let scale = eig[0].sqrt().max(1.0);
        for i in 0..k {
            worst = worst.max((s.sigma[i] - eig[i].max(0.0).sqrt()).abs() / scale);
        }
        worst = worst
            .max((s.d_eff - d_eff).abs() / d_eff)
            .max((s.kappa - kappa).abs() / kappa);
    }
    report.line(
        "3",
        "spectrum vs Jacobi oracle",
        worst <= SPECTRUM_TOL,
        format!("{SPECTRUM_MATRICES} matrices up to 32×64; max rel err {worst:.2e} (≤ {SPECTRUM_TOL:.0e})"),
        t,
    );
}

fn criterion_7(report: &mut Report) {
    let t = Instant::now();
    let golden = include_bytes!("../../core/tests/data/golden_64x8.sqz3");
    let z: Vec<f64> = (0..64)
        .map(|i| ((i as f64) * 0.61).sin() * 1.75 - 0.2)
        .collect();
    let bytes = encode_payload(
        &z,
        8,
        false,
        Fingerprint(*b"codec-fp"),
        Fingerprint(*b"bridgefp"),
    )
    .unwrap();
    let golden_ok = bytes.as_slice() == golden.as_slice();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_excess = f64::NEG_INFINITY;
    for v in 0..QUANT_VECTORS {
        let bits = if v % 2 == 0 { 8 } else { 16 };
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let z: Vec<f64> = (0..64)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let q = quantize(&z, bits).unwrap();
        let back = dequantize(&q).unwrap();
        let m = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in z.iter().zip(&back) {
            worst_excess =
                worst_excess.max((a - b).abs() - (q.scale as f64 / 2.0 + 4.0 * f64::EPSILON * m));
        }
    }
    let quant_ok = worst_excess <= 0.0;

    let mut lossless = true;
    let (mut skew_raw, mut skew_coded) = (0usize, 0usize);
    for s in 0..RANGE_STREAMS {
        let bits = if s % 2 == 0 { 8 } else { 16 };
        let max = if bits == 8 { 255 } else { 65535 };
        let n = rng.random_range(1..600);
        let random: Vec<u16> = (0..n).map(|_| rng.random_range(0..=max)).collect();
        let enc = range_encode(&random, bits).unwrap();
        lossless &= range_decode(&enc, n, bits).unwrap() == random;
        let skewed: Vec<u16> = (0..n)
            .map(|_| {
                let mut c = 0u16;
                while c < max && rng.random_bool(0.4) {
                    c += 1;
                }
                c
            })
            .collect();
        let enc = range_encode(&skewed, bits).unwrap();
        lossless &= range_decode(&enc, n, bits).unwrap() == skewed;
        skew_raw += n * bits as usize / 8;
        skew_coded += enc.len();
    }
    report.line(
        "7",
        "payload format",
        golden_ok && quant_ok && lossless,
        format!(
            "golden {} ({} B); {QUANT_VECTORS} vectors worst excess over scale/2 {worst_excess:.2e}; \
             {RANGE_STREAMS}+{RANGE_STREAMS} streams lossless={lossless}, skewed {skew_coded} B vs {skew_raw} B raw",
            if golden_ok { "byte-exact" } else { "MISMATCH" },
            bytes.len()
        ),
        t,
    );
}

fn bundle_hashes(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            p.extension().is_some_and(|e| e == "sqzn" || e == "json")
                && !p.to_string_lossy().contains("manifest")
        })
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.clone(), sha256_hex(&std::fs::read(&p).unwrap())))
        .collect()
}

struct Pipeline {
    root: PathBuf,
    config: PipelineConfig,
}

impl Pipeline {
    fn ctx(&self, overrides: &[String]) -> Context {
        Context::with_root(&self.root, self.config.with_overrides(overrides).unwrap())
    }
}

fn pipeline_criteria(report: &mut Report, root: &Path) {
    let t = Instant::now();
    let p = Pipeline {
        root: root.to_path_buf(),
        config: PipelineConfig::default(),
    };
    let ctx = p.ctx(&[]);
    let (data, codec_dir, pairs) = (
        Path::new("data"),
        Path::new("codec"),
        Path::new("pairs/pairs.sqzp"),
    );
    cmd_gen_data(&ctx, data).unwrap();
    cmd_train_codecs(&ctx, data, codec_dir).unwrap();
    cmd_gen_pairs(&ctx, codec_dir, pairs).unwrap();
    println!(
        "     pipeline setup: codec and {} pairs ready ({:.1} s)",
        ctx.config.pairs.n_pairs,
        t.elapsed().as_secs_f64()
    );
    let codec_files_before = bundle_hashes(&root.join(codec_dir));
    let codec_fp_before = CodecPair::load(&root.join(codec_dir))
        .unwrap()
        .recompute_fingerprint()
        .unwrap();

    // 4 and 8
    let t4 = Instant::now();
    let mut frozen = true;
    let mut per_seed = Vec::new();
    for seed in 0..GRAM_SEEDS {
        let mut row = Vec::new();
        for lg in [GRAM_LAMBDA, 0.0] {
            let c = p.ctx(&[format!("seed={seed}"), format!("bridge.lambda_gram={lg}")]);
            let dir = PathBuf::from(format!("bridges/s{seed}_lg{lg}"));
            let (_, _, m) = cmd_train_bridge(&c, codec_dir, pairs, &dir).unwrap();
            frozen &= m.metrics["codec_fingerprint_before"] == m.metrics["codec_fingerprint_after"];
            let (s, _) = cmd_analyze(
                &c,
                codec_dir,
                &dir,
                &AnalysisSource::Pairs(pairs.to_path_buf()),
                &dir.join("analysis"),
            )
            .unwrap();
            row.push((s.median_d_eff, s.median_kappa));
        }
        println!(
            "     seed {seed}: λ={GRAM_LAMBDA} d_eff {:.3} κ {:.3} | λ=0 d_eff {:.3} κ {:.3}",
            row[0].0, row[0].1, row[1].0, row[1].1
        );
        per_seed.push(row);
    }
    let med = |i: usize, f: fn(&(f64, f64)) -> f64| {
        median(&per_seed.iter().map(|r| f(&r[i])).collect::<Vec<_>>())
    };
    let (deff_g, kappa_g) = (med(0, |x| x.0), med(0, |x| x.1));
    let (deff_0, kappa_0) = (med(1, |x| x.0), med(1, |x| x.1));
    report.line(
        "4",
        "gram-loss effect",
        deff_g >= D_EFF_FACTOR * deff_0 && kappa_g < kappa_0,
        format!(
            "median over {GRAM_SEEDS} seeds: d_eff {deff_g:.3} vs {deff_0:.3} (ratio {:.2} ≥ {D_EFF_FACTOR}), κ {kappa_g:.3} vs {kappa_0:.3}",
            deff_g / deff_0
        ),
        t4,
    );

    // 5
    let t5 = Instant::now();
    let bridge_dir = PathBuf::from(format!("bridges/s0_lg{GRAM_LAMBDA}"));
    let (eval, _) = cmd_eval(
        &ctx,
        codec_dir,
        &bridge_dir,
        data,
        Path::new("reports/eval"),
    )
    .unwrap();
    let reference = eval.chamfer_reference.unwrap().mean;
    let e2e = eval.chamfer_direct.mean;
    report.line(
        "5",
        "end-to-end quality",
        eval.n_items == E2E_ITEMS && e2e <= E2E_FACTOR * reference,
        format!(
            "{} held-out shapes: chamfer {e2e:.5} vs generator round trip {reference:.5} (ratio {:.3} ≤ {E2E_FACTOR})",
            eval.n_items,
            e2e / reference
        ),
        t5,
    );
    let c8 = p.ctx(&["payload.bits=8".to_string()]);
    let (eval8, _) = cmd_eval(
        &c8,
        codec_dir,
        &bridge_dir,
        data,
        Path::new("reports/eval8"),
    )
    .unwrap();
    report.line(
        "5b",
        "8-bit quantization degrades gracefully",
        eval8.chamfer_payload.mean <= eval8.chamfer_direct.mean + QUANT_8BIT_SLACK,
        format!(
            "chamfer through 8-bit payload {:.5} vs unquantized {:.5} (slack {QUANT_8BIT_SLACK})",
            eval8.chamfer_payload.mean, eval8.chamfer_direct.mean
        ),
        t5,
    );

    // 6
    let t6 = Instant::now();
    let (rows, _) = cmd_ablate(&ctx, codec_dir, pairs, data, Path::new("reports/ablate")).unwrap();
    for r in &rows {
        println!(
            "     d_c {:>3} λ {:<4}: pointsim {:.4} ± {:.4}, chamfer {:.5}, d_eff {:.2}, κ {:.2}",
            r.d_c,
            r.lambda_gram,
            r.pointsim.mean,
            r.pointsim.std,
            r.chamfer.mean,
            r.median_d_eff,
            r.median_kappa
        );
    }
    for r in &rows {
        let cell = root.join(format!(
            "reports/ablate/cells/dc{}_lg{}",
            r.d_c, r.lambda_gram
        ));
        let m = RunManifest::read(&cell.join("train-bridge.manifest.json")).unwrap();
        frozen &= m.metrics["codec_fingerprint_before"] == m.metrics["codec_fingerprint_after"];
    }
    let sweep: Vec<_> = rows
        .iter()
        .filter(|r| r.lambda_gram == ctx.config.bridge.lambda_gram)
        .collect();
    let mut inversions = 0;
    let mut beyond_std = false;
    for w in sweep.windows(2) {
        if w[1].pointsim.mean < w[0].pointsim.mean {
            inversions += 1;
            beyond_std |=
                w[0].pointsim.mean - w[1].pointsim.mean > w[0].pointsim.std.max(w[1].pointsim.std);
        }
    }
    let means: Vec<String> = sweep
        .iter()
        .map(|r| format!("{}:{:.4}", r.d_c, r.pointsim.mean))
        .collect();
    report.line(
        "6",
        "ablation direction",
        sweep.len() == 4 && inversions <= 1 && !beyond_std,
        format!(
            "pointsim at λ={}: {} ({inversions} inversion(s), within 1 std: {})",
            ctx.config.bridge.lambda_gram,
            means.join(" "),
            !beyond_std
        ),
        t6,
    );

    // 9
    let t9 = Instant::now();
    let index = DatasetIndex::load(&root.join(data)).unwrap();
    let (codec, bridge) = ctx.load_bundle(codec_dir, &bridge_dir).unwrap();
    let mut ok = true;
    let mut worst = 0.0f64;
    for i in 0..INTERP_PAIRS {
        let (a, b) = (index.split.test[2 * i], index.split.test[2 * i + 1]);
        let payload = |k: usize| PathBuf::from(format!("interp/{k:05}.sqz3"));
        for k in [a, b] {
            cmd_compress(
                &ctx,
                codec_dir,
                &bridge_dir,
                &PathBuf::from(format!("data/test/{k:05}.pcl")),
                &payload(k),
            )
            .unwrap();
        }
        let (clouds, _) = cmd_interpolate(
            &ctx,
            codec_dir,
            &bridge_dir,
            &payload(a),
            &payload(b),
            5,
            &PathBuf::from(format!("interp/{i}")),
        )
        .unwrap();
        let ts: Vec<f64> = clouds.iter().map(|c| c.0).collect();
        ok &= ts == [0.0, 0.25, 0.5, 0.75, 1.0];
        for (_, pc) in &clouds {
            let m = pc
                .points()
                .iter()
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(m);
            ok &=
                pc.points().iter().flatten().all(|v| v.is_finite()) && pc.within_box(INTERP_BOUND);
        }
        let (da, _) = cmd_decompress(
            &ctx,
            codec_dir,
            &bridge_dir,
            &payload(a),
            &PathBuf::from(format!("interp/{a:05}.pcl")),
        )
        .unwrap();
        let (db, _) = cmd_decompress(
            &ctx,
            codec_dir,
            &bridge_dir,
            &payload(b),
            &PathBuf::from(format!("interp/{b:05}.pcl")),
        )
        .unwrap();
        let (za, _) = squeeze3d::payload::read_payload(&root.join(payload(a))).unwrap();
        let direct: PointCloud = decompress(&codec, &bridge, &za).unwrap();
        ok &= clouds[0].1 == da && clouds[4].1 == db && direct == da;
    }
    report.line(
        "9",
        "interpolation",
        ok,
        format!("{INTERP_PAIRS} pairs × 5 steps finite, max |coord| {worst:.3} ≤ {INTERP_BOUND}, endpoints bit-exact: {ok}"),
        t9,
    );

    // 8
    let codec_fp_after = CodecPair::load(&root.join(codec_dir))
        .unwrap()
        .recompute_fingerprint()
        .unwrap();
    let files_same = bundle_hashes(&root.join(codec_dir)) == codec_files_before;
    report.line(
        "8",
        "frozen endpoints",
        frozen && files_same && codec_fp_before == codec_fp_after,
        format!(
            "{} bridge trainings; codec fingerprint {codec_fp_before} → {codec_fp_after}, bundle files unchanged: {files_same}",
            2 * GRAM_SEEDS as usize + rows.len()
        ),
        t,
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_7(&mut report);
    let root = tempfile::tempdir().unwrap();
    pipeline_criteria(&mut report, root.path());
    drop(root);
    println!("acceptance: {} failure(s)", report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
