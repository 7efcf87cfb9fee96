use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use squeeze3d_cli::commands::*;
use squeeze3d_cli::{CliError, Context, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "squeeze3d",
    version,
    about = "Point-cloud compression through a frozen codec pair and a learned bridge"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config; defaults to the standard toy pipeline.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set bridge.d_c=32`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Proceed despite fingerprint or provenance mismatches.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective config as JSON.
    ShowConfig,
    /// Generate the procedural shape dataset.
    GenData {
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Train the two autoencoders and freeze them into a codec pair.
    TrainCodecs {
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = "codec")]
        out: PathBuf,
    },
    /// Generate paired latents from the codec's generator prior.
    GenPairs {
        #[arg(long, default_value = "codec")]
        codec: PathBuf,
        #[arg(long, default_value = "pairs/pairs.sqzp")]
        out: PathBuf,
    },
    /// Train the forward and reverse mapping networks.
    TrainBridge {
        #[arg(long, default_value = "codec")]
        codec: PathBuf,
        #[arg(long, default_value = "pairs/pairs.sqzp")]
        pairs: PathBuf,
        #[arg(long, default_value = "bridge")]
        out: PathBuf,
    },
    /// Compress one cloud (.pcl or .xyz) into a payload.
    Compress {
        #[command(flatten)]
        bundle: Bundle,
        input: PathBuf,
        output: PathBuf,
    },
    /// Decompress a payload into a cloud (.pcl or .xyz).
    Decompress {
        #[command(flatten)]
        bundle: Bundle,
        input: PathBuf,
        output: PathBuf,
    },
    /// Metrics over the dataset's test split.
    Eval {
        #[command(flatten)]
        bundle: Bundle,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = "reports/eval")]
        out: PathBuf,
    },
    /// Spectral analysis of held-out compressed codes.
    Analyze {
        #[command(flatten)]
        bundle: Bundle,
        /// Paired-latent file whose test split is analysed.
        #[arg(long, conflicts_with = "data")]
        pairs: Option<PathBuf>,
        /// Dataset directory whose test clouds are analysed.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "reports/analyze")]
        out: PathBuf,
    },
    /// Sweep code width and gram weight.
    Ablate {
        #[arg(long, default_value = "codec")]
        codec: PathBuf,
        #[arg(long, default_value = "pairs/pairs.sqzp")]
        pairs: PathBuf,
        #[arg(long, default_value = "data")]
        data: PathBuf,
        #[arg(long, default_value = "reports/ablate")]
        out: PathBuf,
    },
    /// Decode evenly spaced blends between two payloads.
    Interpolate {
        #[command(flatten)]
        bundle: Bundle,
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long, default_value = "reports/interpolate")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Bundle {
    #[arg(long, default_value = "codec")]
    codec: PathBuf,
    #[arg(long, default_value = "bridge")]
    bridge: PathBuf,
}

fn config(common: &Common) -> Result<PipelineConfig, CliError> {
    let base = match &common.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.insert(0, format!("seed={s}"));
    }
    base.with_overrides(&overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::from_env(config(&cli.common)?, cli.common.force);
    let print =
        |v: &serde_json::Value| println!("{}", serde_json::to_string_pretty(v).expect("json"));
    match cli.command {
        Command::ShowConfig => println!("{}", ctx.config.to_json()),
        Command::GenData { out } => print(&cmd_gen_data(&ctx, &out)?.metrics),
        Command::TrainCodecs { data, out } => {
            print(&cmd_train_codecs(&ctx, &data, &out)?.1.metrics)
        }
        Command::GenPairs { codec, out } => print(&cmd_gen_pairs(&ctx, &codec, &out)?.1.metrics),
        Command::TrainBridge { codec, pairs, out } => {
            print(&cmd_train_bridge(&ctx, &codec, &pairs, &out)?.2.metrics)
        }
        Command::Compress {
            bundle,
            input,
            output,
        } => print(
            &cmd_compress(&ctx, &bundle.codec, &bundle.bridge, &input, &output)?
                .1
                .metrics,
        ),
        Command::Decompress {
            bundle,
            input,
            output,
        } => print(
            &cmd_decompress(&ctx, &bundle.codec, &bundle.bridge, &input, &output)?
                .1
                .metrics,
        ),
        Command::Eval { bundle, data, out } => {
            let (report, _) = cmd_eval(&ctx, &bundle.codec, &bundle.bridge, &data, &out)?;
            print!("{}", report.to_table());
        }
        Command::Analyze {
            bundle,
            pairs,
            data,
            out,
        } => {
            let source = match (pairs, data) {
                (Some(p), _) => AnalysisSource::Pairs(p),
                (None, Some(d)) => AnalysisSource::Data(d),
                (None, None) => AnalysisSource::Pairs(PathBuf::from("pairs/pairs.sqzp")),
            };
            print(
                &cmd_analyze(&ctx, &bundle.codec, &bundle.bridge, &source, &out)?
                    .1
                    .metrics,
            )
        }
        Command::Ablate {
            codec,
            pairs,
            data,
            out,
        } => print(&cmd_ablate(&ctx, &codec, &pairs, &data, &out)?.1.metrics),
        Command::Interpolate {
            bundle,
            a,
            b,
            steps,
            out,
        } => print(
            &cmd_interpolate(&ctx, &bundle.codec, &bundle.bridge, &a, &b, steps, &out)?
                .1
                .metrics,
        ),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
