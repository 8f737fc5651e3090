use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use exted::model::{AdamHyper, EvalEcMode, Mode, ModelConfig, TrainEcFeed};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KbKind {
    Wiki,
    Nell,
}

/// Experiment description. Every key is optional; command-line flags win
/// over file values. Relative paths resolve against the config file's
/// directory.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub kb: Option<KbKind>,
    pub kb_path: Option<PathBuf>,
    pub ec_file: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub vocab_max_size: Option<usize>,
    pub vocab_min_count: Option<usize>,

    pub embed_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub ec_dim: Option<usize>,
    pub mode: Option<Mode>,
    pub train_ec_feed: Option<TrainEcFeed>,
    pub eval_ec_mode: Option<EvalEcMode>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,

    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub seed: Option<u64>,
    pub max_len: Option<usize>,
    pub scale_ec: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.exists() {
            return Err(CliError::data(format!("config {} does not exist", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| exted::Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| exted::Error::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.corpus,
            &mut cfg.embeddings,
            &mut cfg.stopwords,
            &mut cfg.kb_path,
            &mut cfg.ec_file,
            &mut cfg.checkpoint_dir,
            &mut cfg.vocab,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn ec_dim(&self) -> usize {
        self.ec_dim.unwrap_or(exted::embedding::DEFAULT_EMBEDDING_DIM)
    }

    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(30)
    }

    pub fn adam(&self) -> AdamHyper {
        let d = AdamHyper::default();
        AdamHyper {
            lr: self.lr.unwrap_or(d.lr),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            eps: self.adam_eps.unwrap_or(d.eps),
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim.unwrap_or(d.embed_dim),
            hidden_dim: self.hidden_dim.unwrap_or(d.hidden_dim),
            ec_dim: self.ec_dim(),
            lambda2: self.lambda2.unwrap_or(d.lambda2),
            lambda3: self.lambda3.unwrap_or(d.lambda3),
            mode: self.mode.unwrap_or(d.mode),
            train_ec_feed: self.train_ec_feed.unwrap_or(d.train_ec_feed),
            eval_ec_mode: self.eval_ec_mode.unwrap_or(d.eval_ec_mode),
        }
    }

    /// A path the command needs; it must be configured and exist.
    pub fn input(&self, value: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let p = value
            .clone()
            .ok_or_else(|| CliError::Usage(format!("no {key} given (config key `{key}` or flag)")))?;
        if !p.exists() {
            return Err(CliError::data(format!("{key} {} does not exist", p.display())));
        }
        Ok(p)
    }
}
