use std::fs;

use anyhow::{bail, Context};
use kcalmap_core::dataset::{prune, read_raw_manifest, PrunePolicy};
use kcalmap_core::dmap::save_dmap;
use kcalmap_core::summation_decode;

use super::usage;
use crate::config::PipelineConfig;
use crate::DensifyArgs;

pub const REJECTIONS_FILE: &str = "rejections.json";

pub fn run(mut cfg: PipelineConfig, args: DensifyArgs) -> anyhow::Result<()> {
    if let Some(m) = args.manifest {
        cfg.paths.manifest = Some(m);
    }
    if let Some(o) = args.out {
        cfg.paths.output_dir = Some(o);
    }
    let manifest = cfg.manifest().map_err(|e| usage(e.to_string()))?;
    let out = cfg.output_dir().map_err(|e| usage(e.to_string()))?;

    let raw = read_raw_manifest(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let policy = PrunePolicy {
        target_size: args.size,
    };
    let (kept, rejected) = prune(raw, &policy);
    fs::create_dir_all(out)?;
    for occ in &kept {
        let map = occ.density_map()?;
        let total = summation_decode(&map);
        let truth = occ.total_kcal();
        if (total - truth).abs() > 1e-6 * truth {
            bail!("{}: map sums to {total} kCal, annotations to {truth}", occ.id());
        }
        save_dmap(&out.join(format!("{}.dmap", occ.id())), &map)?;
    }
    fs::write(
        out.join(REJECTIONS_FILE),
        serde_json::to_string_pretty(&rejected)? + "\n",
    )?;
    for r in &rejected {
        match r.item {
            Some(i) => log::warn!("rejected {} (item {i}): {}", r.id, r.reason),
            None => log::warn!("rejected {}: {}", r.id, r.reason),
        }
    }
    println!(
        "wrote {} density maps to {}; {} occasion(s) rejected",
        kept.len(),
        out.display(),
        rejected.len()
    );
    if args.strict && !rejected.is_empty() {
        bail!("{} occasion(s) rejected in strict mode", rejected.len());
    }
    Ok(())
}
