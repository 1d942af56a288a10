//! Experiment configuration from a plain-text `key = value` file.
//!
//! ```text
//! dataset = qm9_like.smi        # relative paths resolve against the file
//! n_smallest = 1000
//! max_len = 20
//! seed = 0                      # default for train.seed and dream.seed
//! split = all                   # all | train | validation
//! bins = 20
//! target_high = 3.5             # optional; default max + 2 std
//! target_low = -4.0             # optional; default min - 2 std
//! oracle_table = logp.conf      # optional; default surrogate table
//! oracle_labels = labels.tsv    # optional; mutually exclusive with the table
//! train.learning_rate = 0.001
//! train.batch_size = 128
//! train.epochs = 200
//! train.train_fraction = 0.8
//! train.hidden = 500,500,500,500
//! train.activation = relu
//! dream.learning_rate = 0.01
//! dream.max_epochs = 500
//! dream.grad_tolerance = 1e-6
//! dream.noise_upper_bound = 0.9
//! dream.renoise_each_epoch = false
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dream::DreamConfig;
use crate::keyvalue;
use crate::net::{Activation, TrainConfig};
use crate::selfies::DEFAULT_MAX_LEN;

/// Which ingested molecules are dreamed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    All,
    Train,
    Validation,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Split::All),
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            other => Err(format!("unknown split {other:?} (all, train, validation)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub n_smallest: usize,
    pub max_len: usize,
    pub seed: u64,
    pub split: Split,
    pub bins: usize,
    pub target_high: Option<f64>,
    pub target_low: Option<f64>,
    pub oracle_table: Option<PathBuf>,
    pub oracle_labels: Option<PathBuf>,
    pub train: TrainConfig,
    /// `target` is ignored here; each arm sets its own.
    pub dream: DreamConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            n_smallest: 10_000,
            max_len: DEFAULT_MAX_LEN,
            seed: 0,
            split: Split::All,
            bins: 20,
            target_high: None,
            target_low: None,
            oracle_table: None,
            oracle_labels: None,
            train: TrainConfig::default(),
            dream: DreamConfig::default(),
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, text: &str) -> Result<T, PipelineError> {
    text.parse().map_err(|_| PipelineError::Config {
        line,
        message: format!("bad value {text:?} for {key}"),
    })
}

fn finite(line: usize, key: &str, text: &str) -> Result<f64, PipelineError> {
    let v: f64 = value(line, key, text)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(PipelineError::Config {
            line,
            message: format!("{key} must be finite"),
        })
    }
}

impl ExperimentConfig {
    /// Parses configuration text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let pairs = keyvalue::parse(text).map_err(|e| PipelineError::Config {
            line: match e {
                keyvalue::KeyValueError::Malformed { line } | keyvalue::KeyValueError::Duplicate { line, .. } => line,
            },
            message: e.to_string(),
        })?;
        let mut cfg = ExperimentConfig::default();
        let mut train_seed = None;
        let mut dream_seed = None;
        let path = |v: &str| base.join(v);
        for (line, key, v) in pairs {
            let v = v.as_str();
            match key.as_str() {
                "dataset" => cfg.dataset = Some(path(v)),
                "n_smallest" => cfg.n_smallest = value(line, &key, v)?,
                "max_len" => cfg.max_len = value(line, &key, v)?,
                "seed" => cfg.seed = value(line, &key, v)?,
                "split" => cfg.split = v.parse().map_err(|message| PipelineError::Config { line, message })?,
                "bins" => cfg.bins = value(line, &key, v)?,
                "target_high" => cfg.target_high = Some(finite(line, &key, v)?),
                "target_low" => cfg.target_low = Some(finite(line, &key, v)?),
                "oracle_table" => cfg.oracle_table = Some(path(v)),
                "oracle_labels" => cfg.oracle_labels = Some(path(v)),
                "train.learning_rate" => cfg.train.learning_rate = value(line, &key, v)?,
                "train.batch_size" => cfg.train.batch_size = value(line, &key, v)?,
                "train.epochs" => cfg.train.epochs = value(line, &key, v)?,
                "train.seed" => train_seed = Some(value(line, &key, v)?),
                "train.train_fraction" => cfg.train.train_fraction = value(line, &key, v)?,
                "train.hidden" => {
                    cfg.train.hidden = if v.is_empty() {
                        Vec::new()
                    } else {
                        v.split(',')
                            .map(|t| value(line, &key, t.trim()))
                            .collect::<Result<_, _>>()?
                    }
                }
                "train.activation" => {
                    cfg.train.activation = Activation::from_name(v).ok_or_else(|| PipelineError::Config {
                        line,
                        message: format!("unknown activation {v:?}"),
                    })?
                }
                "dream.learning_rate" => cfg.dream.learning_rate = value(line, &key, v)?,
                "dream.max_epochs" => cfg.dream.max_epochs = value(line, &key, v)?,
                "dream.grad_tolerance" => cfg.dream.grad_tolerance = value(line, &key, v)?,
                "dream.noise_upper_bound" => cfg.dream.noise_upper_bound = value(line, &key, v)?,
                "dream.seed" => dream_seed = Some(value(line, &key, v)?),
                "dream.renoise_each_epoch" => cfg.dream.renoise_each_epoch = value(line, &key, v)?,
                _ => {
                    return Err(PipelineError::Config {
                        line,
                        message: format!("unknown key {key}"),
                    })
                }
            }
        }
        cfg.train.seed = train_seed.unwrap_or(cfg.seed);
        cfg.dream.seed = dream_seed.unwrap_or(cfg.seed);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::FileUnreadable {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |message: String| Err(PipelineError::Config { line: 0, message });
        if self.n_smallest == 0 {
            return bad("n_smallest must be positive".into());
        }
        if self.max_len == 0 {
            return bad("max_len must be positive".into());
        }
        if self.bins == 0 {
            return bad("bins must be positive".into());
        }
        if self.oracle_table.is_some() && self.oracle_labels.is_some() {
            return bad("oracle_table and oracle_labels are mutually exclusive".into());
        }
        if let (Some(h), Some(l)) = (self.target_high, self.target_low) {
            if h <= l {
                return bad("target_high must exceed target_low".into());
            }
        }
        self.train.validate().map_err(|e| PipelineError::Config {
            line: 0,
            message: e.to_string(),
        })?;
        self.dream.validate().map_err(|e| PipelineError::Config {
            line: 0,
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
dataset = mols.smi
n_smallest = 50
max_len = 12
seed = 7
split = validation
bins = 5
target_high = 4
target_low = -4.5
oracle_table = t.conf
train.learning_rate = 0.01
train.batch_size = 16
train.epochs = 3
train.train_fraction = 0.5
train.hidden = 8, 4
train.activation = identity
dream.learning_rate = 0.2
dream.max_epochs = 9
dream.grad_tolerance = 1e-5
dream.noise_upper_bound = 0.1
dream.seed = 99
dream.renoise_each_epoch = true
";
        let cfg = ExperimentConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.dataset.as_deref(), Some(Path::new("/base/mols.smi")));
        assert_eq!(cfg.n_smallest, 50);
        assert_eq!(cfg.max_len, 12);
        assert_eq!(cfg.split, Split::Validation);
        assert_eq!(cfg.target_high, Some(4.0));
        assert_eq!(cfg.train.hidden, vec![8, 4]);
        assert_eq!(cfg.train.activation, Activation::Identity);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.dream.seed, 99);
        assert!(cfg.dream.renoise_each_epoch);
        assert_eq!(cfg.dream.noise_upper_bound, 0.1);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::parse("# nothing\n", Path::new(".")).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            "bogus = 1",
            "n_smallest = -3",
            "n_smallest = 0",
            "split = some",
            "target_high = nan",
            "target_high = 1\ntarget_low = 2",
            "oracle_table = a\noracle_labels = b",
            "dream.noise_upper_bound = 1.5",
            "train.learning_rate = 0",
            "no equals sign",
            "seed = 1\nseed = 2",
        ] {
            assert!(
                matches!(
                    ExperimentConfig::parse(text, Path::new(".")),
                    Err(PipelineError::Config { .. })
                ),
                "{text}"
            );
        }
    }
}
