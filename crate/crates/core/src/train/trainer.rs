use std::path::PathBuf;

use rand::seq::SliceRandom;

use super::eval::{corpus_bleu4, perplexity};
use super::metrics::{EpochRecord, MetricsLog, StepRecord};
use super::{save_checkpoint, Checkpoint, EncodedPair};
use crate::error::{Error, Result};
use crate::model::{adam_step, backward, forward_losses, AdamHyper, AdamState, ExtEdParams, ModelConfig};
use crate::numeric::RngState;

#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// Total epochs; a resumed run stops at the same count.
    pub epochs: usize,
    pub adam: AdamHyper,
    /// Generation length cap for validation BLEU.
    pub max_gen_len: usize,
    /// Skip per-epoch validation (perplexity and BLEU) when false.
    pub validate: bool,
    /// When set, `epoch_NNN.xed` is written here after every epoch.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            adam: AdamHyper::default(),
            max_gen_len: 30,
            validate: true,
            checkpoint_dir: None,
        }
    }
}

/// FNV-1a over the id bytes.
fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Stable 90/10 split: a pair is held out when its id hash is divisible by 10.
pub fn split_by_id(pairs: &[EncodedPair]) -> (Vec<EncodedPair>, Vec<EncodedPair>) {
    pairs.iter().cloned().partition(|p| id_hash(&p.id) % 10 != 0)
}

/// Owns the mutable training state.
pub struct Trainer {
    pub cfg: ModelConfig,
    pub params: ExtEdParams,
    pub optimizer: AdamState,
    pub rng: RngState,
    pub step: u64,
}

impl Trainer {
    /// Fresh state; parameters are drawn from the same stream later used for shuffling.
    pub fn new(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = RngState::new(seed);
        let params = ExtEdParams::init(cfg, &mut rng);
        let optimizer = AdamState::new(&params);
        Ok(Self {
            cfg: cfg.clone(),
            params,
            optimizer,
            rng,
            step: 0,
        })
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Self {
        Self {
            cfg: ckpt.config,
            params: ckpt.params,
            optimizer: ckpt.optimizer,
            rng: ckpt.rng,
            step: ckpt.step,
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.cfg.clone(),
            params: self.params.clone(),
            optimizer: self.optimizer.clone(),
            step: self.step,
            rng: self.rng.clone(),
        }
    }

    /// One pass over `train` in a freshly shuffled order, one update per pair.
    pub fn train_epoch(&mut self, train: &[EncodedPair], adam: &AdamHyper) -> Result<Vec<StepRecord>> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut records = Vec::with_capacity(train.len());
        for i in order {
            let pair = &train[i];
            let (loss, caches) = forward_losses(&self.params, &pair.example, pair.ec.as_ref(), &self.cfg)?;
            let grads = backward(&self.params, &caches, &self.cfg)?;
            adam_step(&mut self.params, &grads, &mut self.optimizer, adam)?;
            self.step += 1;
            records.push(StepRecord::new(self.step, &loss));
        }
        Ok(records)
    }

    pub fn validate(&self, val: &[EncodedPair], epoch: u64, max_len: usize) -> Result<EpochRecord> {
        if val.is_empty() {
            return Ok(EpochRecord {
                epoch,
                val_ppl: f64::NAN,
                val_bleu4: f64::NAN,
            });
        }
        let mode = self.cfg.eval_ec_mode;
        Ok(EpochRecord {
            epoch,
            val_ppl: perplexity(&self.params, &self.cfg, val, mode)?,
            val_bleu4: corpus_bleu4(&self.params, &self.cfg, val, mode, max_len)?,
        })
    }
}

fn check_ec(pairs: &[EncodedPair], cfg: &ModelConfig) -> Result<()> {
    if !cfg.mode.uses_external_context() {
        return Ok(());
    }
    for p in pairs {
        match &p.ec {
            None => return Err(Error::Input(format!("no ec record for pair {:?}", p.id))),
            Some(ec) if ec.dim() != cfg.ec_dim => {
                return Err(Error::Input(format!(
                    "ec for pair {:?} has dim {}, config expects {}",
                    p.id,
                    ec.dim(),
                    cfg.ec_dim
                )))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn run(mut trainer: Trainer, pairs: &[EncodedPair], opts: &TrainOptions) -> Result<(Checkpoint, MetricsLog)> {
    check_ec(pairs, &trainer.cfg)?;
    super::check_unique_encoded_ids(pairs)?;
    let (train, val) = split_by_id(pairs);
    if train.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    let mut log = MetricsLog::default();
    let done = trainer.step / train.len() as u64;
    for epoch in done + 1..=opts.epochs as u64 {
        for rec in trainer.train_epoch(&train, &opts.adam)? {
            log.push_step(rec);
        }
        if opts.validate {
            let rec = trainer.validate(&val, epoch, opts.max_gen_len)?;
            log::info!("epoch {epoch}: val_ppl {:.4} val_bleu4 {:.4}", rec.val_ppl, rec.val_bleu4);
            log.epochs.push(rec);
        }
        if let Some(dir) = &opts.checkpoint_dir {
            save_checkpoint(&trainer.checkpoint(), &dir.join(format!("epoch_{epoch:03}.xed")))?;
        }
    }
    Ok((trainer.checkpoint(), log))
}

/// Trains from a seeded initialization for `opts.epochs` epochs.
pub fn train(pairs: &[EncodedPair], cfg: &ModelConfig, seed: u64, opts: &TrainOptions) -> Result<(Checkpoint, MetricsLog)> {
    run(Trainer::new(cfg, seed)?, pairs, opts)
}

/// Continues a run from `ckpt` up to `opts.epochs` total epochs. With the
/// same corpus and options this reproduces an uninterrupted run bitwise.
pub fn resume(ckpt: Checkpoint, pairs: &[EncodedPair], opts: &TrainOptions) -> Result<(Checkpoint, MetricsLog)> {
    run(Trainer::from_checkpoint(ckpt), pairs, opts)
}
