use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use kcalmap_core::eval::{
    aggregate, evaluate, qualitative_panel, CalorieDecoder, DensityEncoder, ErrorHistogram, EvaluationReport,
    GrayscaleDecoder, GroundTruthEncoder, PipelineDescriptor, HISTOGRAM_BINS,
};
use kcalmap_core::seed::derive_seed;
use kcalmap_nn::decoder::DecoderModel;
use kcalmap_nn::EncoderModel;

use super::train::{fit_decoder, fit_encoder, DecoderChoice};
use super::{apply_dataset_flags, usage, Dataset};
use crate::config::PipelineConfig;
use crate::EvalArgs;

enum EncoderSpec {
    GroundTruth,
    Train,
    Checkpoints(Vec<PathBuf>),
}

enum DecoderSpec {
    Fixed(DecoderChoice),
    Grayscale,
    Checkpoint(PathBuf),
}

fn parse_encoders(specs: &[String], runs: usize) -> anyhow::Result<EncoderSpec> {
    match specs {
        [] => Err(usage("no encoder given (use --encoder <checkpoint|ground-truth|train>)")),
        [s] if s == "ground-truth" => Ok(EncoderSpec::GroundTruth),
        [s] if s == "train" => Ok(EncoderSpec::Train),
        paths => {
            if paths.iter().any(|p| p == "ground-truth" || p == "train") {
                return Err(usage("ground-truth and train cannot be mixed with checkpoints"));
            }
            if paths.len() > 1 && paths.len() != runs {
                return Err(usage(format!("{} encoder checkpoints given for {runs} runs", paths.len())));
            }
            Ok(EncoderSpec::Checkpoints(paths.iter().map(PathBuf::from).collect()))
        }
    }
}

fn parse_decoder(spec: &str) -> DecoderSpec {
    if spec.eq_ignore_ascii_case("grayscale") {
        DecoderSpec::Grayscale
    } else if let Ok(choice) = spec.parse::<DecoderChoice>() {
        DecoderSpec::Fixed(choice)
    } else {
        DecoderSpec::Checkpoint(PathBuf::from(spec))
    }
}

enum AnyEncoder {
    GroundTruth(GroundTruthEncoder),
    Model(Box<EncoderModel>),
}

impl AnyEncoder {
    fn as_dyn(&self) -> &dyn DensityEncoder {
        match self {
            Self::GroundTruth(e) => e,
            Self::Model(m) => m.as_ref(),
        }
    }
}

enum AnyDecoder {
    Grayscale(GrayscaleDecoder),
    Model(DecoderModel),
}

impl AnyDecoder {
    fn as_dyn(&self) -> &dyn CalorieDecoder {
        match self {
            Self::Grayscale(d) => d,
            Self::Model(m) => m,
        }
    }
}

fn file_label(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn run(mut cfg: PipelineConfig, args: EvalArgs) -> anyhow::Result<()> {
    apply_dataset_flags(&mut cfg, &args.data);
    if let Some(v) = args.runs {
        cfg.eval.runs = v;
    }
    if let Some(v) = args.grayscale_scale {
        cfg.eval.grayscale_scale = v;
    }
    if let Some(v) = args.panels {
        cfg.eval.panels = v;
    }
    if args.no_histogram {
        cfg.eval.histogram = false;
    }
    if let Some(o) = args.out {
        cfg.paths.output_dir = Some(o);
    }
    if cfg.eval.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    if !(cfg.eval.grayscale_scale.is_finite() && cfg.eval.grayscale_scale > 0.0) {
        return Err(usage("--grayscale-scale must be positive"));
    }
    let runs = cfg.eval.runs;
    let mut encoder_specs = args.encoder.clone();
    if encoder_specs.is_empty() {
        if let Some(p) = &cfg.paths.encoder_checkpoint {
            encoder_specs.push(p.display().to_string());
        }
    }
    let encoders = parse_encoders(&encoder_specs, runs)?;
    let decoder = match (&args.decoder, &cfg.paths.decoder_checkpoint) {
        (Some(s), _) => parse_decoder(s),
        (None, Some(p)) => DecoderSpec::Checkpoint(p.clone()),
        (None, None) => DecoderSpec::Fixed(DecoderChoice::Summation),
    };
    let out = cfg.output_dir().map_err(|e| usage(e.to_string()))?.to_path_buf();

    if let EncoderSpec::Checkpoints(paths) = &encoders {
        for p in paths {
            if !p.is_file() {
                return Err(usage(format!("encoder checkpoint {} does not exist", p.display())));
            }
        }
        // Evaluate at the resolution the encoder was trained for.
        let first = EncoderModel::load(&paths[0]).with_context(|| format!("loading {}", paths[0].display()))?;
        cfg.dataset.image_size = first.config().image_size as u32;
    }
    if let DecoderSpec::Checkpoint(p) = &decoder {
        if !p.is_file() {
            return Err(usage(format!(
                "decoder `{}` is neither a known kind nor an existing checkpoint",
                p.display()
            )));
        }
    }
    let data = Dataset::load(&cfg)?;
    fs::create_dir_all(&out)?;

    let seeds: Vec<u64> = (0..runs).map(|i| derive_seed(cfg.seed, "run", i as u64)).collect();
    let mut first_run: Option<(AnyEncoder, EvaluationReport)> = None;
    let agg = aggregate(&seeds, |run, seed| -> anyhow::Result<EvaluationReport> {
        let (enc, enc_label) = match &encoders {
            EncoderSpec::GroundTruth => (AnyEncoder::GroundTruth(GroundTruthEncoder), "ground-truth".to_string()),
            EncoderSpec::Train => {
                log::info!("run {run}: training encoder (seed {seed})");
                let m = fit_encoder(&cfg, &data, seed, None)?;
                (AnyEncoder::Model(Box::new(m)), format!("trained-seed-{seed}"))
            }
            EncoderSpec::Checkpoints(paths) => {
                let p = &paths[run % paths.len()];
                let m = EncoderModel::load(p).with_context(|| format!("loading {}", p.display()))?;
                (AnyEncoder::Model(Box::new(m)), file_label(p))
            }
        };
        let (dec, dec_label) = match &decoder {
            DecoderSpec::Grayscale => (
                AnyDecoder::Grayscale(GrayscaleDecoder {
                    scale: cfg.eval.grayscale_scale,
                }),
                format!("grayscale(scale={})", cfg.eval.grayscale_scale),
            ),
            DecoderSpec::Fixed(choice) => {
                let m = fit_decoder(&cfg, &data, enc.as_dyn(), *choice, seed)?;
                let label = m.name();
                (AnyDecoder::Model(m), label)
            }
            DecoderSpec::Checkpoint(p) => {
                let m = DecoderModel::load(p).with_context(|| format!("loading {}", p.display()))?;
                let label = format!("{} ({})", m.name(), file_label(p));
                (AnyDecoder::Model(m), label)
            }
        };
        let pipeline = PipelineDescriptor {
            encoder: enc_label,
            decoder: dec_label,
        };
        let report = evaluate(enc.as_dyn(), dec.as_dyn(), &data.test, pipeline, seed)?;
        report.write_json(&out.join(format!("run_{run}.json")))?;
        report.write_csv(&out.join(format!("run_{run}.csv")))?;
        println!("run {run}: MAE {:.2} kCal, MAPE {:.2}%", report.mae, report.mape);
        if run == 0 {
            first_run = Some((enc, report.clone()));
        }
        Ok(report)
    })?;
    agg.write_json(&out.join("aggregate.json"))?;

    if let Some((enc, report)) = &first_run {
        if cfg.eval.histogram {
            let h = ErrorHistogram::from_report(report, HISTOGRAM_BINS)?;
            h.write_png(&out.join("histogram.png"))?;
            h.write_csv(&out.join("histogram.csv"))?;
        }
        if cfg.eval.panels > 0 {
            let dir = out.join("panels");
            fs::create_dir_all(&dir)?;
            let (over, under) = report.extremes(cfg.eval.panels);
            for (tag, recs) in [("over", over), ("under", under)] {
                for (k, rec) in recs.iter().enumerate() {
                    let occ = data.test.iter().find(|o| o.id() == rec.id).expect("record comes from the test split");
                    let map = enc.as_dyn().encode(occ)?;
                    qualitative_panel(occ, &map, rec.est_kcal, &dir.join(format!("{tag}_{k}_{}.png", rec.id)))?;
                }
            }
        }
    }
    println!(
        "{} run(s): mean MAE {:.2} kCal, mean MAPE {:.2}%; reports in {}",
        agg.run_count,
        agg.mean_mae,
        agg.mean_mape,
        out.display()
    );
    Ok(())
}
