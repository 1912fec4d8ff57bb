use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::EatingOccasion;
use crate::density::{summation_decode, DensityMap};
use crate::error::{Error, Result};
use crate::grayscale::{decode_grayscale, encode_grayscale};

/// Produces a density map for an occasion. Learned encoders look only at
/// the image; oracles may read the annotations.
pub trait DensityEncoder {
    fn encode(&self, occasion: &EatingOccasion) -> Result<DensityMap>;
}

/// Reduces a density map to a calorie estimate.
pub trait CalorieDecoder {
    fn decode(&self, map: &DensityMap) -> Result<f64>;
}

/// The identity oracle: returns the ground-truth density map.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthEncoder;

impl DensityEncoder for GroundTruthEncoder {
    fn encode(&self, occasion: &EatingOccasion) -> Result<DensityMap> {
        occasion.density_map()
    }
}

/// Sums every cell of the map.
#[derive(Debug, Clone, Copy, Default)]
pub struct SummationDecoder;

impl CalorieDecoder for SummationDecoder {
    fn decode(&self, map: &DensityMap) -> Result<f64> {
        Ok(summation_decode(map))
    }
}

/// Passes the map through the 8-bit grayscale codec before decoding.
#[derive(Debug, Clone, Copy)]
pub struct GrayscaleDecoder {
    pub scale: f64,
}

impl CalorieDecoder for GrayscaleDecoder {
    fn decode(&self, map: &DensityMap) -> Result<f64> {
        Ok(decode_grayscale(&encode_grayscale(map, self.scale)?))
    }
}

impl<T: DensityEncoder + ?Sized> DensityEncoder for &T {
    fn encode(&self, occasion: &EatingOccasion) -> Result<DensityMap> {
        (**self).encode(occasion)
    }
}

impl<T: CalorieDecoder + ?Sized> CalorieDecoder for &T {
    fn decode(&self, map: &DensityMap) -> Result<f64> {
        (**self).decode(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub true_kcal: f64,
    pub est_kcal: f64,
    /// `est_kcal - true_kcal`.
    pub error: f64,
}

impl InstanceRecord {
    pub fn new(id: impl Into<String>, true_kcal: f64, est_kcal: f64) -> Self {
        Self {
            id: id.into(),
            true_kcal,
            est_kcal,
            error: est_kcal - true_kcal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineDescriptor {
    pub encoder: String,
    pub decoder: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub pipeline: PipelineDescriptor,
    pub seed: u64,
    pub records: Vec<InstanceRecord>,
    pub mae: f64,
    pub mape: f64,
}

/// Mean absolute error in kCal.
pub fn mae(records: &[InstanceRecord]) -> f64 {
    records.iter().map(|r| r.error.abs()).sum::<f64>() / records.len() as f64
}

/// Mean absolute percentage error, in percent.
pub fn mape(records: &[InstanceRecord]) -> f64 {
    records
        .iter()
        .map(|r| r.error.abs() / r.true_kcal * 100.0)
        .sum::<f64>()
        / records.len() as f64
}

impl EvaluationReport {
    pub fn from_records(pipeline: PipelineDescriptor, seed: u64, records: Vec<InstanceRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if let Some(r) = records.iter().find(|r| !(r.true_kcal > 0.0)) {
            return Err(Error::Validation {
                occasion: r.id.clone(),
                item: None,
                reason: format!("true kcal {} must be positive", r.true_kcal),
            });
        }
        Ok(Self {
            mae: mae(&records),
            mape: mape(&records),
            pipeline,
            seed,
            records,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Per-instance CSV: `id,true_kcal,est_kcal,error`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// The `k` largest over-estimates and the `k` largest under-estimates.
    pub fn extremes(&self, k: usize) -> (Vec<&InstanceRecord>, Vec<&InstanceRecord>) {
        let mut sorted: Vec<&InstanceRecord> = self.records.iter().collect();
        sorted.sort_by(|a, b| b.error.total_cmp(&a.error).then_with(|| a.id.cmp(&b.id)));
        let over = sorted.iter().take_while(|r| r.error > 0.0).take(k).copied().collect();
        let under = sorted
            .iter()
            .rev()
            .take_while(|r| r.error < 0.0)
            .take(k)
            .copied()
            .collect();
        (over, under)
    }
}

/// Runs every test occasion through `encoder` then `decoder`.
pub fn evaluate(
    encoder: &dyn DensityEncoder,
    decoder: &dyn CalorieDecoder,
    test: &[EatingOccasion],
    pipeline: PipelineDescriptor,
    seed: u64,
) -> Result<EvaluationReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let records = test
        .iter()
        .map(|occ| {
            let wrap = |e: Error| Error::Estimator {
                occasion: occ.id().to_string(),
                reason: e.to_string(),
            };
            let map = encoder.encode(occ).map_err(wrap)?;
            let est = decoder.decode(&map).map_err(wrap)?;
            Ok(InstanceRecord::new(occ.id(), occ.total_kcal(), est))
        })
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_records(pipeline, seed, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: Vec<EvaluationReport>,
    pub mean_mae: f64,
    pub mean_mape: f64,
    pub run_count: usize,
}

impl AggregateReport {
    pub fn from_runs(runs: Vec<EvaluationReport>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Invalid {
                what: "aggregate",
                reason: "at least one run is required".into(),
            });
        }
        let n = runs.len() as f64;
        Ok(Self {
            mean_mae: runs.iter().map(|r| r.mae).sum::<f64>() / n,
            mean_mape: runs.iter().map(|r| r.mape).sum::<f64>() / n,
            run_count: runs.len(),
            runs,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Runs `run_once` for each seed and averages the per-run metrics.
///
/// Seeds must be distinct. A failing run aborts aggregation and carries its
/// index.
pub fn aggregate<F, E>(seeds: &[u64], mut run_once: F) -> Result<AggregateReport>
where
    F: FnMut(usize, u64) -> std::result::Result<EvaluationReport, E>,
    E: Into<Box<dyn std::error::Error + Send + Sync>>,
{
    let unique: std::collections::HashSet<_> = seeds.iter().collect();
    if unique.len() != seeds.len() {
        return Err(Error::Invalid {
            what: "aggregate",
            reason: "run seeds must be distinct".into(),
        });
    }
    let runs = seeds
        .iter()
        .enumerate()
        .map(|(run, &seed)| {
            run_once(run, seed).map_err(|e| Error::Run {
                run,
                source: e.into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AggregateReport::from_runs(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSceneConfig};
    use proptest::prelude::*;

    fn pipeline() -> PipelineDescriptor {
        PipelineDescriptor {
            encoder: "test".into(),
            decoder: "summation".into(),
        }
    }

    fn report(preds: &[f64], truths: &[f64]) -> EvaluationReport {
        let records = preds
            .iter()
            .zip(truths)
            .enumerate()
            .map(|(i, (&p, &t))| InstanceRecord::new(format!("o{i}"), t, p))
            .collect();
        EvaluationReport::from_records(pipeline(), 0, records).unwrap()
    }

    #[test]
    fn metrics_by_hand() {
        let r = report(&[110.0, 180.0], &[100.0, 200.0]);
        assert_eq!(r.mae, 15.0);
        assert_eq!(r.mape, 10.0);
    }

    #[test]
    fn rejects_empty_and_nonpositive() {
        assert!(matches!(
            EvaluationReport::from_records(pipeline(), 0, vec![]),
            Err(Error::EmptyTestSet)
        ));
        let bad = vec![InstanceRecord::new("z", 0.0, 1.0)];
        assert!(EvaluationReport::from_records(pipeline(), 0, bad).is_err());
        assert!(matches!(
            evaluate(&GroundTruthEncoder, &SummationDecoder, &[], pipeline(), 0),
            Err(Error::EmptyTestSet)
        ));
    }

    struct Scaled(f32);

    impl DensityEncoder for Scaled {
        fn encode(&self, occasion: &EatingOccasion) -> Result<DensityMap> {
            occasion.density_map()?.scaled(self.0)
        }
    }

    #[test]
    fn oracle_pipelines() {
        let test = generate_synthetic(&SyntheticSceneConfig::default(), 25).unwrap();
        let exact = evaluate(&GroundTruthEncoder, &SummationDecoder, &test, pipeline(), 0).unwrap();
        assert!(exact.mae < 1e-6 && exact.mape < 1e-6);
        assert_eq!(exact.records.len(), 25);

        let perturbed = evaluate(&Scaled(1.1), &SummationDecoder, &test, pipeline(), 0).unwrap();
        // Oracle: 10% of each annotated total, averaged directly over the
        // manifest.
        let mean_truth = test.iter().map(|o| o.total_kcal()).sum::<f64>() / test.len() as f64;
        assert!((perturbed.mape - 10.0).abs() < 1e-4, "{}", perturbed.mape);
        assert!((perturbed.mae - 0.1 * mean_truth).abs() < 1e-5 * mean_truth);
    }

    #[test]
    fn grayscale_decoder_is_lossy() {
        let test = generate_synthetic(&SyntheticSceneConfig::default(), 25).unwrap();
        let gray = evaluate(&GroundTruthEncoder, &GrayscaleDecoder { scale: 1.0 }, &test, pipeline(), 0).unwrap();
        assert!(gray.mape > 1.0);
    }

    #[test]
    fn aggregate_means_and_errors() {
        let maes = [10.0, 20.0, 30.0, 40.0, 50.0];
        let agg = aggregate(&[1, 2, 3, 4, 5], |run, seed| -> Result<_> {
            let mut r = report(&[100.0 + maes[run]], &[100.0]);
            r.seed = seed;
            Ok(r)
        })
        .unwrap();
        assert_eq!(agg.mean_mae, 30.0);
        assert_eq!(agg.mean_mape, 30.0);
        assert_eq!(agg.run_count, 5);
        assert_eq!(agg.runs[3].seed, 4);

        let single = report(&[90.0, 120.0], &[100.0, 100.0]);
        let one = aggregate(&[9], |_, _| -> Result<_> { Ok(single.clone()) }).unwrap();
        assert_eq!(one.runs, vec![single.clone()]);
        assert_eq!((one.mean_mae, one.mean_mape), (single.mae, single.mape));

        let err = aggregate(&[1, 2, 3], |run, _| -> Result<EvaluationReport> {
            if run == 2 { Err(Error::EmptyTestSet) } else { Ok(single.clone()) }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Run { run: 2, .. }));
        assert!(aggregate(&[1, 1], |_, _| -> Result<_> { Ok(single.clone()) }).is_err());
    }

    #[test]
    fn extremes_follow_sorted_errors() {
        let r = report(&[105.0, 80.0, 130.0, 100.0, 99.0, 150.0], &[100.0; 6]);
        let (over, under) = r.extremes(2);
        let ids = |v: &[&InstanceRecord]| v.iter().map(|r| r.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&over), ["o5", "o2"]);
        assert_eq!(ids(&under), ["o1", "o4"]);
        let (over, under) = r.extremes(10);
        assert_eq!(over.len(), 3);
        assert_eq!(under.len(), 2);
    }

    #[test]
    fn json_and_csv_exports() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(&[110.0, 180.0], &[100.0, 200.0]);
        r.write_json(&dir.path().join("r.json")).unwrap();
        assert_eq!(EvaluationReport::read_json(&dir.path().join("r.json")).unwrap(), r);
        r.write_csv(&dir.path().join("r.csv")).unwrap();
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(text, "id,true_kcal,est_kcal,error\no0,100.0,110.0,10.0\no1,200.0,180.0,-20.0\n");
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in proptest::collection::vec((1.0f64..1000.0, 0.0f64..2000.0), 1..40)) {
            let truths: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let preds: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a = report(&preds, &truths);
            let b = report(
                &preds.iter().rev().copied().collect::<Vec<_>>(),
                &truths.iter().rev().copied().collect::<Vec<_>>(),
            );
            prop_assert!((a.mae - b.mae).abs() <= 1e-9 * a.mae.max(1.0));
            prop_assert!((a.mape - b.mape).abs() <= 1e-9 * a.mape.max(1.0));
        }

        #[test]
        fn uniform_scaling_gives_mape_of_epsilon(
            truths in proptest::collection::vec(1.0f64..1000.0, 1..40),
            eps in 0.0f64..0.5,
        ) {
            let preds: Vec<f64> = truths.iter().map(|t| t * (1.0 + eps)).collect();
            let r = report(&preds, &truths);
            prop_assert!((r.mape - 100.0 * eps).abs() < 1e-9);
        }
    }
}
