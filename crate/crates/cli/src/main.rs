mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::UsageError;

/// Environment variable selecting the compute device.
pub const DEVICE_ENV: &str = "KCALMAP_DEVICE";

#[derive(Debug, Parser)]
#[command(name = "kcalmap", version, about = "Estimate meal energy through per-pixel calorie density maps")]
pub struct Cli {
    /// TOML experiment configuration; command-line flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic meal scenes with exact calorie annotations
    Synth(SynthArgs),
    /// Compute ground-truth density maps (.dmap) for every valid occasion
    Densify(DensifyArgs),
    /// Train the image-to-density encoder
    TrainEncoder(TrainEncoderArgs),
    /// Fit a calorie decoder on maps from a trained encoder
    TrainDecoder(TrainDecoderArgs),
    /// Evaluate an encoder/decoder pipeline on the test split
    Eval(EvalArgs),
    /// Tabulate evaluation reports next to published reference numbers
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of scenes
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    /// Square image side in pixels [default: 256]
    #[arg(long)]
    pub size: Option<u32>,
    /// Root seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for manifest.json, images/ and masks/
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensifyArgs {
    /// Dataset manifest
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Output directory for <id>.dmap files and rejections.json
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Resize every occasion to this square side before densifying [default: keep native size]
    #[arg(long)]
    pub size: Option<u32>,
    /// Exit with status 1 if any occasion is rejected
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args, Default)]
pub struct DatasetFlags {
    /// Dataset manifest
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Square image side used for training and evaluation [default: 256]
    #[arg(long)]
    pub size: Option<u32>,
    /// Root seed for the split and all training randomness [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainEncoderArgs {
    #[command(flatten)]
    pub data: DatasetFlags,
    /// Checkpoint to write (.safetensors)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Training epochs [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 1]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.0002]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the L1 term in the generator loss [default: 100]
    #[arg(long)]
    pub l1_weight: Option<f64>,
    /// kCal per pixel mapped to the generator's full output [default: training maximum]
    #[arg(long)]
    pub density_norm: Option<f64>,
    /// Base channel count of the generator [default: 64]
    #[arg(long)]
    pub generator_width: Option<usize>,
    /// Base channel count of the discriminator [default: 64]
    #[arg(long)]
    pub discriminator_width: Option<usize>,
    /// Also checkpoint every N epochs [default: 0, only at the end]
    #[arg(long)]
    pub save_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainDecoderArgs {
    #[command(flatten)]
    pub data: DatasetFlags,
    /// Trained encoder checkpoint
    #[arg(long, value_name = "FILE")]
    pub encoder: Option<PathBuf>,
    /// Decoder checkpoint to write (.safetensors)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// summation, vgg16, resnet18 or resnet50 [default: vgg16]
    #[arg(long)]
    pub decoder: Option<String>,
    /// Maximum training epochs [default: 50]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs without validation improvement before stopping [default: 20]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Adam learning rate [default: 0.0001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Mini-batch size [default: 16]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Channel count of the first stage [default: 16]
    #[arg(long)]
    pub width: Option<usize>,
    /// Initialize from this decoder checkpoint instead of random weights
    #[arg(long, value_name = "FILE")]
    pub pretrained_weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DatasetFlags,
    /// Encoder checkpoint(s), `ground-truth`, or `train` to train one per run; repeat to give one checkpoint per run
    #[arg(long, value_name = "SPEC")]
    pub encoder: Vec<String>,
    /// summation, grayscale, vgg16, resnet18, resnet50 (trained per run) or a decoder checkpoint [default: summation]
    #[arg(long, value_name = "SPEC")]
    pub decoder: Option<String>,
    /// Number of runs averaged into the aggregate report [default: 5]
    #[arg(long)]
    pub runs: Option<usize>,
    /// kCal per pixel per gray level for the grayscale decoder [default: 1]
    #[arg(long)]
    pub grayscale_scale: Option<f64>,
    /// Qualitative panels to draw for the largest over- and under-estimates each [default: 3]
    #[arg(long)]
    pub panels: Option<usize>,
    /// Skip the error histogram
    #[arg(long)]
    pub no_histogram: bool,
    /// Output directory for reports and figures
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation or aggregate report JSON files
    #[arg(required = true, value_name = "REPORT")]
    pub inputs: Vec<PathBuf>,
    /// Reference table to compare against (1, 2 or 3) [default: 1]
    #[arg(long)]
    pub table: Option<u32>,
    /// Also write the table to this Markdown file
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    fn help(sub: &str) -> String {
        let mut cmd = Cli::command();
        cmd.find_subcommand_mut(sub).unwrap().render_help().to_string()
    }

    #[test]
    fn documented_defaults_match_the_built_in_config() {
        let c = config::PipelineConfig::default();
        let h = help("train-encoder");
        for want in [
            format!("[default: {}]", c.encoder.epochs),
            format!("[default: {}]", c.encoder.batch_size),
            format!("[default: {}]", c.encoder.learning_rate),
            format!("[default: {}]", c.encoder.l1_weight),
            format!("[default: {}]", c.encoder.generator_width),
            format!("[default: {}]", c.dataset.image_size),
        ] {
            assert!(h.contains(&want), "missing {want} in\n{h}");
        }
        let h = help("train-decoder");
        for want in [
            format!("[default: {}]", c.decoder.epochs),
            format!("[default: {}]", c.decoder.patience),
            format!("[default: {}]", c.decoder.learning_rate),
            format!("[default: {}]", c.decoder.batch_size),
            format!("[default: {}]", c.decoder.width),
            format!("[default: {}]", c.decoder.backbone),
        ] {
            assert!(h.contains(&want), "missing {want} in\n{h}");
        }
        let h = help("eval");
        assert!(h.contains(&format!("[default: {}]", c.eval.runs)));
        assert!(h.contains(&format!("[default: {}]", c.eval.panels)));
        assert!(h.contains(&format!("[default: {}]", c.eval.grayscale_scale)));
    }
}
