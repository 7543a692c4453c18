use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ExperimentConfig;
use crate::corpus::{build_vocab, gen_synthetic_pair, Corpus, ParallelSet, Split, SyntheticSpec};
use crate::error::{Error, Result};
use crate::eval::{compare, evaluate, first_step_pca, translate_sentences, translate_test, PcaAnalysis};
use crate::lang::Lang;
use crate::metrics::{write_pca_tsv, MetricsReport};
use crate::schedule::{load_model, sweep, SweepRow, TrainConfig, TrainData, Trainer, BEST_CHECKPOINT, LAST_CHECKPOINT};
use crate::seq2seq::{Seq2Seq, Vocab};

pub const GOLD_FILE: &str = "test.gold.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Corpus file layout inside a data directory.
#[derive(Clone, Debug)]
pub struct DataFiles {
    pub dir: PathBuf,
}

impl DataFiles {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DataFiles { dir: dir.into() }
    }

    pub fn corpus(&self, lang: Lang, split: Split) -> PathBuf {
        self.dir.join(format!("{}.{}", split.as_str(), lang.as_str()))
    }

    pub fn gold(&self) -> PathBuf {
        self.dir.join(GOLD_FILE)
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    /// Every file `gen-data` writes.
    pub fn all(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> =
            crate::corpus::Split::ALL.iter().flat_map(|&s| Lang::BOTH.map(|l| self.corpus(l, s))).collect();
        v.push(self.gold());
        v.push(self.manifest());
        v
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a SyntheticSpec,
    files: Vec<String>,
    generated_at_unix: u64,
}

pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<DataFiles> {
    let files = DataFiles::new(cfg.data_dir());
    std::fs::create_dir_all(&files.dir)?;
    let pair = gen_synthetic_pair(&cfg.corpus)?;
    for lang in Lang::BOTH {
        pair.train(lang).write(&files.corpus(lang, Split::Train))?;
        pair.corpus(lang, Split::Valid).write(&files.corpus(lang, Split::Valid))?;
        pair.corpus(lang, Split::Test).write(&files.corpus(lang, Split::Test))?;
    }
    pair.test.write(&files.gold())?;
    let names = files.all().iter().filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect();
    let manifest = Manifest {
        spec: &cfg.corpus,
        files: names,
        generated_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    std::fs::write(files.manifest(), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(files)
}

fn read_parallel(files: &DataFiles, split: Split) -> Result<ParallelSet> {
    let src = Corpus::read(&files.corpus(Lang::Src, split), Lang::Src, split)?;
    let tgt = Corpus::read(&files.corpus(Lang::Tgt, split), Lang::Tgt, split)?;
    if src.len() != tgt.len() {
        return Err(Error::InvalidArgument(format!(
            "{} split is not parallel: {} vs {} lines",
            split.as_str(),
            src.len(),
            tgt.len()
        )));
    }
    Ok(ParallelSet { src: src.sentences().to_vec(), tgt: tgt.sentences().to_vec() })
}

/// Training data with a joint vocabulary, plus the gold test pairs.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(TrainData, ParallelSet)> {
    let files = DataFiles::new(cfg.data_dir());
    let train_src = Corpus::read(&files.corpus(Lang::Src, Split::Train), Lang::Src, Split::Train)?;
    let train_tgt = Corpus::read(&files.corpus(Lang::Tgt, Split::Train), Lang::Tgt, Split::Train)?;
    let vocab = build_vocab([&train_src, &train_tgt])?;
    let valid = read_parallel(&files, Split::Valid)?;
    let test = ParallelSet::read(&files.gold())?;
    Ok((TrainData::new(vocab, &train_src, &train_tgt, &valid)?, test))
}

/// Settings that may change between an interrupted run and its resumption.
fn resumable(a: &TrainConfig) -> TrainConfig {
    TrainConfig { max_epochs: 0, max_steps: 0, ..a.clone() }
}

pub fn cmd_train(cfg: &ExperimentConfig, resume: bool) -> Result<Trainer> {
    let (data, _) = load_data(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let last = cfg.out_dir.join(LAST_CHECKPOINT);
    let mut trainer = if resume {
        let mut t = Trainer::resume(&last, data)?;
        if resumable(&t.config) != resumable(&cfg.train) || t.model.config() != &cfg.model {
            return Err(Error::Config("resume config differs from the checkpoint's".into()));
        }
        t.config.max_epochs = cfg.train.max_epochs;
        t.config.max_steps = cfg.train.max_steps;
        t
    } else {
        Trainer::new(cfg.train.clone(), cfg.model.clone(), data)?
    };
    std::fs::write(cfg.out_dir.join("config.toml"), cfg.to_toml_string()?)?;
    trainer.fit(Some(&cfg.out_dir))?;
    Ok(trainer)
}

fn open_model(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(Seq2Seq, Vocab)> {
    let path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join(BEST_CHECKPOINT));
    let (model, vocab) = load_model(&path)?;
    if model.config() != &cfg.model {
        return Err(Error::Config(format!("model settings in {} differ from the config", path.display())));
    }
    Ok((model, vocab))
}

fn test_pairs(cfg: &ExperimentConfig) -> Result<ParallelSet> {
    ParallelSet::read(&DataFiles::new(cfg.data_dir()).gold())
}

/// Scores one checkpoint, or compares two with a paired bootstrap. The report
/// is also written to `<out_dir>/eval.json`.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>, other: Option<&Path>) -> Result<MetricsReport> {
    let test = test_pairs(cfg)?;
    let (model, vocab) = open_model(cfg, checkpoint)?;
    let report = match other {
        None => evaluate(&model, &vocab, &test, &cfg.eval)?,
        Some(p) => {
            let (model_b, vocab_b) = open_model(cfg, Some(p))?;
            let a = translate_test(&model, &vocab, &test, &cfg.eval)?;
            let b = translate_test(&model_b, &vocab_b, &test, &cfg.eval)?;
            compare(&a, &b, &test, &cfg.eval)?
        }
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("eval.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(report)
}

pub fn cmd_translate(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    from: Lang,
    input: Option<&Path>,
) -> Result<()> {
    let (model, vocab) = open_model(cfg, checkpoint)?;
    let lines: Vec<String> = match input {
        Some(p) if !p.exists() => return Err(Error::MissingFile(p.to_path_buf())),
        Some(p) => std::fs::read_to_string(p)?.lines().map(str::to_string).collect(),
        None => std::io::stdin().lock().lines().collect::<std::io::Result<_>>()?,
    };
    let sents: Vec<Vec<String>> = lines
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .filter(|s: &Vec<String>| !s.is_empty())
        .collect();
    let out = translate_sentences(&model, &vocab, &sents, from, &cfg.eval)?;
    let mut stdout = std::io::stdout().lock();
    for s in out {
        writeln!(stdout, "{}", s.join(" "))?;
    }
    Ok(())
}

/// Writes `<out_dir>/pca.tsv` and `<out_dir>/pca_clusters.json`.
pub fn cmd_pca(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<PcaAnalysis> {
    let test = test_pairs(cfg)?;
    let (model, vocab) = open_model(cfg, checkpoint)?;
    let analysis = first_step_pca(&model, &vocab, &test, &cfg.eval)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    write_pca_tsv(&cfg.out_dir.join("pca.tsv"), &analysis.points)?;
    std::fs::write(cfg.out_dir.join("pca_clusters.json"), serde_json::to_string_pretty(&analysis.clusters)? + "\n")?;
    Ok(analysis)
}

/// Writes `<out_dir>/sweep.tsv` plus one run directory per λ.
pub fn cmd_sweep(cfg: &ExperimentConfig, lambdas: &[f64]) -> Result<Vec<SweepRow>> {
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::Config(format!("lambda values must be >= 0, got {bad}")));
    }
    let (data, test) = load_data(cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let rows = sweep(&cfg.train, &cfg.model, lambdas, &data, &test, &cfg.eval, Some(&cfg.out_dir))?;
    let mut table = String::from(SweepRow::HEADER);
    table.push('\n');
    for r in &rows {
        table.push_str(&r.to_tsv());
        table.push('\n');
    }
    std::fs::write(cfg.out_dir.join("sweep.tsv"), table)?;
    Ok(rows)
}
