use kcalmap_core::dataset::{generate_synthetic, save_manifest};

use super::usage;
use crate::config::PipelineConfig;
use crate::SynthArgs;

pub fn run(mut cfg: PipelineConfig, args: SynthArgs) -> anyhow::Result<()> {
    if let Some(s) = args.size {
        cfg.dataset.image_size = s;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.paths.output_dir = Some(o);
    }
    let out = cfg.output_dir().map_err(|e| usage(e.to_string()))?.to_path_buf();
    let mut synth = cfg.synth.clone();
    synth.image_size = cfg.dataset.image_size;
    synth.seed = cfg.seed;
    synth.validate().map_err(|e| usage(e.to_string()))?;

    let scenes = generate_synthetic(&synth, args.n as usize)?;
    let path = save_manifest(&out, &scenes)?;
    let total: f64 = scenes.iter().map(|s| s.total_kcal()).sum();
    println!(
        "wrote {} scenes ({:.1} kCal in total) to {}",
        scenes.len(),
        total,
        path.display()
    );
    Ok(())
}
