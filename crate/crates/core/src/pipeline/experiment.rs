use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{histogram, trajectory_composition_shift, CompositionShift};
use super::{ingest, Dataset, ExperimentConfig, PipelineError, Split};
use crate::dream::{dream_set, step_records, to_jsonl, DreamConfig, DreamTrajectory, StepRecord, Termination};
use crate::net::{train, Model, TrainHistory};
use crate::oracle::{dataset_stats, LabelFile, PropertyOracle, PropertyTable, Stats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub final_train_mse: Option<f64>,
    pub final_validation_mse: Option<f64>,
    pub model_checksum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    /// Target in raw property units.
    pub target: f64,
    /// Oracle values of the final dreamed molecules.
    pub stats: Stats,
    pub values: Vec<f64>,
    pub above_original_max: usize,
    pub below_original_min: usize,
    /// Runs whose final molecule differs from the starting one.
    pub changed: usize,
    pub gradient_vanished: usize,
    pub max_epochs: usize,
    pub composition: CompositionShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub arm: String,
    pub line: usize,
    pub molecule: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub original: usize,
    pub dreamed_high: usize,
    pub dreamed_low: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub dataset_size: usize,
    pub skipped: usize,
    pub training: TrainingSummary,
    pub split: Split,
    /// Molecules successfully dreamed in both arms; every statistic below
    /// is computed over exactly this set.
    pub molecules: usize,
    pub original: Stats,
    pub original_values: Vec<f64>,
    pub high: ArmReport,
    pub low: ArmReport,
    pub histogram: Vec<HistogramRow>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub dataset: Dataset,
    pub model: Model,
    pub history: TrainHistory,
    pub trajectories: Vec<StepRecord>,
}

pub fn build_oracle(cfg: &ExperimentConfig) -> Result<Box<dyn PropertyOracle>, PipelineError> {
    Ok(match (&cfg.oracle_table, &cfg.oracle_labels) {
        (_, Some(labels)) => Box::new(LabelFile::load(labels)?),
        (Some(table), None) => Box::new(PropertyTable::load(table)?),
        (None, None) => Box::new(PropertyTable::default()),
    })
}

fn count_termination(ts: &[&DreamTrajectory], which: Termination) -> usize {
    ts.iter().filter(|t| t.termination == which).count()
}

/// Dreams the selected molecules toward both targets with a trained model
/// and assembles the report. Dreamed molecules are scored by the oracle.
pub fn dream_phase(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    model: &Model,
    history: &TrainHistory,
    oracle: &dyn PropertyOracle,
) -> Result<(ExperimentReport, Vec<StepRecord>), PipelineError> {
    let all = dataset_stats(&dataset.labels())?;
    let target_high = cfg.target_high.unwrap_or(all.max + 2.0 * all.std);
    let target_low = cfg.target_low.unwrap_or(all.min - 2.0 * all.std);

    let mut selected: Vec<usize> = match cfg.split {
        Split::All => (0..dataset.len()).collect(),
        Split::Train => history.train_indices.clone(),
        Split::Validation => history.validation_indices.clone(),
    };
    selected.sort_unstable();
    if selected.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let graphs: Vec<_> = selected.iter().map(|&i| dataset.entries[i].graph.clone()).collect();

    let arms = [("high", target_high), ("low", target_low)];
    let mut failures = Vec::new();
    // Per arm: for each selected molecule, the trajectory and oracle value.
    let mut outcomes: Vec<Vec<Option<(DreamTrajectory, f64)>>> = Vec::new();
    for (arm, target) in arms {
        let dcfg = DreamConfig {
            target,
            ..cfg.dream.clone()
        };
        let results = dream_set(model, &graphs, &dcfg);
        let mut arm_out = Vec::with_capacity(results.len());
        for (&i, r) in selected.iter().zip(results) {
            let entry = &dataset.entries[i];
            let fail = |message: String| Failure {
                arm: arm.to_string(),
                line: entry.line,
                molecule: entry.key.to_string(),
                message,
            };
            match r {
                Ok(t) => match oracle.evaluate(&t.last().graph) {
                    Ok(v) if v.is_finite() => arm_out.push(Some((t, v))),
                    Ok(v) => {
                        failures.push(fail(format!("non-finite oracle value {v}")));
                        arm_out.push(None);
                    }
                    Err(e) => {
                        failures.push(fail(e.to_string()));
                        arm_out.push(None);
                    }
                },
                Err(e) => {
                    failures.push(fail(e.to_string()));
                    arm_out.push(None);
                }
            }
        }
        outcomes.push(arm_out);
    }

    let kept: Vec<usize> = (0..selected.len())
        .filter(|&k| outcomes.iter().all(|arm| arm[k].is_some()))
        .collect();
    if kept.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let original_values: Vec<f64> = kept.iter().map(|&k| dataset.entries[selected[k]].label).collect();
    let original = dataset_stats(&original_values)?;

    let mut records = Vec::new();
    let mut arm_reports = Vec::new();
    for ((arm, target), arm_out) in arms.iter().zip(&outcomes) {
        let runs: Vec<&(DreamTrajectory, f64)> = kept.iter().map(|&k| arm_out[k].as_ref().expect("kept")).collect();
        let trajectories: Vec<&DreamTrajectory> = runs.iter().map(|(t, _)| t).collect();
        let values: Vec<f64> = runs.iter().map(|(_, v)| *v).collect();
        for (&k, t) in kept.iter().zip(&trajectories) {
            records.extend(step_records(t, selected[k], Some(arm)));
        }
        arm_reports.push(ArmReport {
            target: *target,
            stats: dataset_stats(&values)?,
            above_original_max: values.iter().filter(|&&v| v > original.max).count(),
            below_original_min: values.iter().filter(|&&v| v < original.min).count(),
            changed: trajectories.iter().filter(|t| t.initial().key != t.last().key).count(),
            gradient_vanished: count_termination(&trajectories, Termination::GradientVanished),
            max_epochs: count_termination(&trajectories, Termination::MaxEpochs),
            composition: trajectory_composition_shift(arm, &trajectories)?,
            values,
        });
    }
    let low = arm_reports.pop().expect("two arms");
    let high = arm_reports.pop().expect("two arms");

    let everything = original_values.iter().chain(&high.values).chain(&low.values);
    let lo = everything.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = everything.copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let h_orig = histogram(&original_values, cfg.bins, range)?;
    let h_high = histogram(&high.values, cfg.bins, range)?;
    let h_low = histogram(&low.values, cfg.bins, range)?;
    let histogram_rows = h_orig
        .iter()
        .zip(&h_high)
        .zip(&h_low)
        .map(|((o, h), l)| HistogramRow {
            bin_lo: o.bin_lo,
            bin_hi: o.bin_hi,
            original: o.count,
            dreamed_high: h.count,
            dreamed_low: l.count,
        })
        .collect();

    let last = history.epochs.last();
    let report = ExperimentReport {
        seed: cfg.seed,
        config: cfg.clone(),
        dataset_size: dataset.len(),
        skipped: dataset.skips.len(),
        training: TrainingSummary {
            epochs: history.epochs.len(),
            train_size: history.train_indices.len(),
            validation_size: history.validation_indices.len(),
            final_train_mse: last.map(|e| e.train_mse),
            final_validation_mse: last.and_then(|e| e.validation_mse),
            model_checksum: model.mlp.checksum(),
        },
        split: cfg.split,
        molecules: kept.len(),
        original,
        original_values,
        high,
        low,
        histogram: histogram_rows,
        failures,
    };
    Ok((report, records))
}

/// Ingest, train and dream as configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, PipelineError> {
    cfg.validate()?;
    let path = cfg.dataset.as_deref().ok_or_else(|| PipelineError::Config {
        line: 0,
        message: "no dataset configured".into(),
    })?;
    let oracle = build_oracle(cfg)?;
    let dataset = ingest(path, cfg.n_smallest, cfg.max_len, oracle.as_ref())?;
    let (model, history) = train(&dataset.training_data(), &cfg.train)?;
    let (report, trajectories) = dream_phase(cfg, &dataset, &model, &history, oracle.as_ref())?;
    Ok(ExperimentOutcome {
        report,
        dataset,
        model,
        history,
        trajectories,
    })
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,original,dreamed_high,dreamed_low\n");
        for r in &self.histogram {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.bin_lo, r.bin_hi, r.original, r.dreamed_high, r.dreamed_low
            ));
        }
        out
    }

    pub fn stats_csv(&self) -> String {
        let mut out = String::from("set,count,mean,std,min,max\n");
        for (name, s) in [
            ("original", &self.original),
            ("dreamed_high", &self.high.stats),
            ("dreamed_low", &self.low.stats),
        ] {
            out.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                s.count, s.mean, s.std, s.min, s.max
            ));
        }
        out
    }
}

/// Writes `report.json`, `histograms.csv`, `stats.csv`,
/// `trajectories.jsonl` and `skips.txt` into `dir`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<(), PipelineError> {
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|source| PipelineError::Write {
            path: path.display().to_string(),
            source,
        })
    };
    fs::create_dir_all(dir).map_err(|source| PipelineError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    write("report.json", outcome.report.to_json())?;
    write("histograms.csv", outcome.report.histogram_csv())?;
    write("stats.csv", outcome.report.stats_csv())?;
    write("trajectories.jsonl", to_jsonl(&outcome.trajectories))?;
    write("skips.txt", outcome.dataset.skips_text())?;
    Ok(())
}
