use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use exted::embedding::{load_embeddings, EmbeddingTable, StopwordList};
use exted::gradcheck::run_gradcheck;
use exted::knowledge::{
    ec_map, external_context_vector, knowledge_diagnostics, read_ec_file, scale_external_context,
    write_ec_file, EcMap, KnowledgeSource, NellSource, WikiSummarySource,
};
use exted::model::{generate as greedy, EvalEcMode, ModelConfig};
use exted::numeric::RngState;
use exted::train::{
    encode_pairs, evaluate_report, load_checkpoint, load_corpus, precompute_ec, report_csv, resume,
    save_checkpoint, train as run_training, Checkpoint, ReportEntry, TrainOptions,
};
use exted::vocab::{self, tokenize, Vocabulary};

use crate::config::{KbKind, RunConfig};
use crate::CliError;

const DEFAULT_VOCAB_MAX: usize = 5000;

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string(v).expect("json value serializes"));
}

fn out_path(out: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    out.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("no output path for {what}; pass --out")))
}

fn load_vocab_for(cfg: &RunConfig, checkpoint: &Path) -> Result<Vocabulary, CliError> {
    let path = match &cfg.vocab {
        Some(p) => p.clone(),
        None => checkpoint.with_file_name("vocab.txt"),
    };
    if !path.exists() {
        return Err(CliError::data(format!("vocabulary {} does not exist", path.display())));
    }
    Ok(Vocabulary::load(&path)?)
}

fn open_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    if !path.exists() {
        return Err(CliError::data(format!("checkpoint {} does not exist", path.display())));
    }
    load_checkpoint(path).map_err(|e| match e {
        e @ exted::Error::Io { .. } => CliError::Data(e),
        e => CliError::Data(exted::Error::format(path, e.to_string())),
    })
}

fn knowledge_source(cfg: &RunConfig) -> Result<Box<dyn KnowledgeSource>, CliError> {
    let path = cfg.input(&cfg.kb_path, "kb_path")?;
    Ok(match cfg.kb.unwrap_or(KbKind::Wiki) {
        KbKind::Wiki => Box::new(WikiSummarySource::load(&path)?),
        KbKind::Nell => Box::new(NellSource::load(&path)?),
    })
}

fn knowledge_inputs(cfg: &RunConfig) -> Result<(Box<dyn KnowledgeSource>, EmbeddingTable, StopwordList), CliError> {
    let source = knowledge_source(cfg)?;
    let emb = load_embeddings(&cfg.input(&cfg.embeddings, "embeddings")?, cfg.ec_dim())?;
    let stop = match &cfg.stopwords {
        Some(_) => StopwordList::load(&cfg.input(&cfg.stopwords, "stopwords")?)?,
        None => StopwordList::default(),
    };
    Ok((source, emb, stop))
}

fn load_ec_map(cfg: &RunConfig) -> Result<EcMap, CliError> {
    let path = cfg.input(&cfg.ec_file, "ec_file")?;
    Ok(ec_map(&read_ec_file(&path)?)?)
}

pub fn build_vocab(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let corpus = load_corpus(&cfg.input(&cfg.corpus, "corpus")?)?;
    let out = out_path(out, &cfg.vocab, "the vocabulary")?;
    let vocab = vocab::build_vocab(
        &corpus.pairs,
        cfg.vocab_max_size.unwrap_or(DEFAULT_VOCAB_MAX),
        cfg.vocab_min_count.unwrap_or(1),
    )?;
    vocab.save(&out)?;
    print_json(&json!({
        "vocab_size": vocab.len(),
        "pairs": corpus.pairs.len(),
        "dropped": corpus.dropped,
    }));
    Ok(())
}

pub fn build_ec(cfg: &RunConfig, out: Option<PathBuf>) -> Result<(), CliError> {
    let corpus = load_corpus(&cfg.input(&cfg.corpus, "corpus")?)?;
    let out = out_path(out, &cfg.ec_file, "the ec file")?;
    let (source, emb, stop) = knowledge_inputs(cfg)?;
    let scale = cfg.scale_ec.unwrap_or(true);
    let pre = precompute_ec(&corpus.pairs, source.as_ref(), &emb, &stop, scale, cfg.seed())?;
    write_ec_file(&out, &pre.records)?;
    log::info!("{} ec records, {} zero vectors", pre.records.len(), pre.zero_vectors);
    print_json(&json!({
        "pairs": pre.records.len(),
        "zero_vectors": pre.zero_vectors,
        "diagnostics": pre.diagnostics,
    }));
    Ok(())
}

pub fn train(cfg: &RunConfig, out: Option<PathBuf>, resume_from: Option<PathBuf>) -> Result<(), CliError> {
    let corpus = load_corpus(&cfg.input(&cfg.corpus, "corpus")?)?;
    let dir = out_path(out, &cfg.checkpoint_dir, "checkpoints")?;
    fs::create_dir_all(&dir).map_err(|e| exted::Error::io(&dir, e))?;

    let vocab = match &resume_from {
        Some(ckpt) => load_vocab_for(cfg, ckpt)?,
        None => match &cfg.vocab {
            Some(_) => Vocabulary::load(&cfg.input(&cfg.vocab, "vocab")?)?,
            None => vocab::build_vocab(
                &corpus.pairs,
                cfg.vocab_max_size.unwrap_or(DEFAULT_VOCAB_MAX),
                cfg.vocab_min_count.unwrap_or(1),
            )?,
        },
    };
    vocab.save(&dir.join("vocab.txt"))?;

    let start = match &resume_from {
        Some(p) => Some(open_checkpoint(p)?),
        None => None,
    };
    let model_cfg: ModelConfig = match &start {
        Some(c) => c.config.clone(),
        None => cfg.model_config(vocab.len()),
    };
    let ecs = if model_cfg.mode.uses_external_context() {
        Some(load_ec_map(cfg)?)
    } else {
        None
    };
    let pairs = encode_pairs(&corpus.pairs, &vocab, ecs.as_ref());
    let opts = TrainOptions {
        epochs: cfg.epochs.unwrap_or(10),
        adam: cfg.adam(),
        max_gen_len: cfg.max_len(),
        validate: true,
        checkpoint_dir: Some(dir.clone()),
    };
    let (ckpt, log) = match start {
        Some(c) => resume(c, &pairs, &opts)?,
        None => run_training(&pairs, &model_cfg, cfg.seed(), &opts)?,
    };
    let final_path = dir.join("final.xed");
    save_checkpoint(&ckpt, &final_path)?;
    log.write(&dir.join("metrics_steps.csv"), &dir.join("metrics_epochs.csv"))?;
    print_json(&json!({
        "checkpoint": final_path,
        "mode": model_cfg.mode,
        "step": ckpt.step,
        "epochs": log.epochs.last().map(|e| e.epoch),
        "val_ppl": log.epochs.last().map(|e| e.val_ppl),
    }));
    Ok(())
}

pub fn eval(cfg: &RunConfig, checkpoints: &[PathBuf], out: Option<PathBuf>) -> Result<(), CliError> {
    let mut loaded = Vec::with_capacity(checkpoints.len());
    for p in checkpoints {
        let mut c = open_checkpoint(p)?;
        if let Some(m) = cfg.eval_ec_mode {
            c.config.eval_ec_mode = m;
        }
        loaded.push(c);
    }
    let corpus = load_corpus(&cfg.input(&cfg.corpus, "corpus")?)?;
    let vocab = load_vocab_for(cfg, &checkpoints[0])?;
    let ecs = match &cfg.ec_file {
        Some(_) => Some(load_ec_map(cfg)?),
        None => None,
    };
    let pairs = encode_pairs(&corpus.pairs, &vocab, ecs.as_ref());
    let entries: Vec<ReportEntry> = loaded
        .iter()
        .map(|c| ReportEntry {
            label: c.config.mode.as_str().to_string(),
            checkpoint: c,
        })
        .collect();
    let csv = report_csv(&evaluate_report(&entries, &pairs, cfg.max_len())?);
    match out {
        Some(p) => fs::write(&p, csv).map_err(|e| exted::Error::io(&p, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn generate(
    cfg: &RunConfig,
    checkpoint: &Path,
    context: Option<String>,
    ec_mode: Option<EvalEcMode>,
    repl: bool,
) -> Result<(), CliError> {
    if repl == context.is_some() {
        return Err(CliError::Usage("give either a context or --repl".into()));
    }
    let ckpt = open_checkpoint(checkpoint)?;
    let vocab = load_vocab_for(cfg, checkpoint)?;
    let mut model_cfg = ckpt.config.clone();
    if let Some(m) = ec_mode.or(cfg.eval_ec_mode) {
        model_cfg.eval_ec_mode = m;
    }
    let oracle = model_cfg.mode.uses_external_context() && model_cfg.eval_ec_mode == EvalEcMode::Oracle;
    let knowledge = if oracle { Some(knowledge_inputs(cfg)?) } else { None };
    let scale = cfg.scale_ec.unwrap_or(true);
    let mut rng = RngState::new(cfg.seed());

    let mut respond = |text: &str| -> Result<String, CliError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(CliError::data("context is empty after tokenization"));
        }
        let ec = match &knowledge {
            Some((source, emb, stop)) => {
                let ec = external_context_vector(&tokens, source.as_ref(), emb, stop);
                Some(if scale { scale_external_context(&ec, &mut rng)? } else { ec })
            }
            None => None,
        };
        let ids = greedy(&ckpt.params, &vocab.encode(&tokens), cfg.max_len(), &model_cfg, ec.as_ref())?;
        Ok(vocab.detokenize(&ids))
    };

    match context {
        Some(text) => println!("{}", respond(&text)?),
        None => {
            let stdout = io::stdout();
            for line in io::stdin().lock().lines() {
                let line = line.map_err(|e| exted::Error::io("<stdin>", e))?;
                let reply = match respond(&line) {
                    Ok(r) => r,
                    Err(CliError::Data(e)) => {
                        log::warn!("{e}");
                        String::new()
                    }
                    Err(e) => return Err(e),
                };
                let mut lock = stdout.lock();
                writeln!(lock, "{reply}").and_then(|_| lock.flush()).map_err(|e| exted::Error::io("<stdout>", e))?;
            }
        }
    }
    Ok(())
}

pub fn kb_stats(ec_file: &Path) -> Result<(), CliError> {
    if !ec_file.exists() {
        return Err(CliError::data(format!("ec file {} does not exist", ec_file.display())));
    }
    let vectors: Vec<_> = read_ec_file(ec_file)?.iter().map(|r| r.to_vector()).collect();
    let report = knowledge_diagnostics(&vectors)?;
    print_json(&serde_json::to_value(report).expect("report serializes"));
    Ok(())
}

pub fn gradcheck(seed: u64, configs: usize) -> Result<(), CliError> {
    if configs == 0 {
        return Err(CliError::Usage("--configs must be at least 1".into()));
    }
    let reports = run_gradcheck(seed, configs)?;
    for r in &reports {
        print_json(&serde_json::to_value(r).expect("report serializes"));
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::Verify(format!("{failed} of {} configurations exceeded tolerance", reports.len())));
    }
    eprintln!("gradcheck: {} configurations passed", reports.len());
    Ok(())
}
