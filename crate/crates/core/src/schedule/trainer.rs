use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_noise, TrainConfig};
use crate::autodiff::{AdamState, Graph, Tensor, Var};
use crate::checkpoint;
use crate::corpus::{batch_iter, Batch, Corpus, ParallelSet};
use crate::discriminator::Discriminator;
use crate::error::{invalid, Error, Result};
use crate::lang::{Direction, Lang};
use crate::metrics::{bleu, copying_ratio};
use crate::seq2seq::vocab::EOS;
use crate::seq2seq::{ModelConfig, ModelVars, Seq2Seq, Vocab};

const STREAM_SHUFFLE: u64 = 0;
const STREAM_NOISE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

/// Independent RNG per (seed, epoch, purpose), so an epoch replays exactly
/// whether or not earlier epochs ran in the same process.
fn stream_rng(seed: u64, epoch: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 8) | stream);
    rng
}

/// Encoded monolingual training and parallel validation data.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub vocab: Vocab,
    /// Indexed by [`Lang::index`].
    pub mono: [Vec<Vec<u32>>; 2],
    /// Parallel gold, indexed by [`Lang::index`].
    pub valid: [Vec<Vec<u32>>; 2],
}

impl TrainData {
    pub fn new(vocab: Vocab, train_src: &Corpus, train_tgt: &Corpus, valid: &ParallelSet) -> Result<Self> {
        if train_src.is_empty() || train_tgt.is_empty() {
            return invalid("training corpora must be non-empty");
        }
        if valid.is_empty() {
            return invalid("validation set must be non-empty");
        }
        let enc = |c: &[Vec<String>]| c.iter().map(|s| vocab.encode(s)).collect::<Vec<_>>();
        Ok(TrainData {
            mono: [train_src.encode(&vocab), train_tgt.encode(&vocab)],
            valid: [enc(valid.side(Lang::Src)), enc(valid.side(Lang::Tgt))],
            vocab,
        })
    }
}

/// Value per translation direction, keyed by source language.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerDirection {
    pub src2tgt: f64,
    pub tgt2src: f64,
}

impl PerDirection {
    pub fn get(&self, from: Lang) -> f64 {
        match from {
            Lang::Src => self.src2tgt,
            Lang::Tgt => self.tgt2src,
        }
    }

    fn set(&mut self, from: Lang, v: f64) {
        match from {
            Lang::Src => self.src2tgt = v,
            Lang::Tgt => self.tgt2src = v,
        }
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.src2tgt + self.tgt2src)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerLang {
    pub src: f64,
    pub tgt: f64,
}

impl PerLang {
    pub fn get(&self, l: Lang) -> f64 {
        match l {
            Lang::Src => self.src,
            Lang::Tgt => self.tgt,
        }
    }
}

/// Greedy translation quality on the validation set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub bleu: PerDirection,
    pub copying_ratio: PerDirection,
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Step counter at the end of the epoch.
    pub step: u64,
    pub warmup: bool,
    pub dae_loss: PerLang,
    /// Discriminator training loss on detached DAE outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ld_loss: Option<PerLang>,
    /// Reconstruction loss, keyed by the direction of the intermediate translation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bt_loss: Option<PerDirection>,
    /// Discriminator constraint on intermediate first-step outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ld_constraint_loss: Option<PerDirection>,
    pub copying_ratio: PerDirection,
    pub valid_bleu: PerDirection,
    pub bt_updates: u64,
    pub empty_intermediates: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    MaxEpochs,
    EarlyStopping,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    /// Completed epochs.
    pub epoch: usize,
    pub best_bleu: Option<f64>,
    pub best_epoch: Option<usize>,
    /// Consecutive epochs without a new best validation BLEU.
    pub stagnant: usize,
    pub log: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopped: Option<StopReason>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DaeLosses {
    pub dae: f64,
    pub ld: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BtLosses {
    /// Absent when every intermediate translation was empty.
    pub bt: Option<f64>,
    /// Constraint value on the intermediate first-step outputs.
    pub ld: Option<f64>,
    /// `bt + λ·ld` as optimized.
    pub total: f64,
    /// Intermediate translations without EOS, one per batch row.
    pub intermediate: Vec<Vec<u32>>,
    pub updated: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    model: ModelConfig,
    vocab: Vocab,
    #[serde(default)]
    train: Option<TrainConfig>,
    #[serde(default)]
    state: Option<TrainState>,
    #[serde(default)]
    model_adam_t: u64,
    #[serde(default)]
    ld_adam_t: Option<u64>,
}

/// Model, discriminator, optimizers and the training loop.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Seq2Seq,
    pub ld: Option<Discriminator>,
    pub model_opt: AdamState,
    pub ld_opt: Option<AdamState>,
    pub state: TrainState,
    pub data: TrainData,
    noise_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
}

fn dropout_of<'a>(model: &Seq2Seq, rng: &'a mut ChaCha8Rng) -> Option<&'a mut ChaCha8Rng> {
    (model.config().dropout > 0.0).then_some(rng)
}

fn strip_eos(seq: &[u32]) -> Vec<u32> {
    seq.iter().take_while(|&&t| t != EOS).copied().collect()
}

impl Trainer {
    pub fn new(config: TrainConfig, model_config: ModelConfig, data: TrainData) -> Result<Self> {
        config.validate()?;
        let model = Seq2Seq::new(model_config, data.vocab.len(), config.seed)?;
        let ld =
            (!config.no_discriminator).then(|| Discriminator::new(model.d_model(), config.seed.wrapping_add(0x5eed)));
        Trainer::from_parts(config, model, ld, data)
    }

    /// Starts from existing weights with fresh optimizer state.
    pub fn from_parts(config: TrainConfig, model: Seq2Seq, ld: Option<Discriminator>, data: TrainData) -> Result<Self> {
        config.validate()?;
        if model.vocab_size() != data.vocab.len() {
            return Err(Error::Shape(format!(
                "model vocabulary {} vs data vocabulary {}",
                model.vocab_size(),
                data.vocab.len()
            )));
        }
        if config.no_discriminator && ld.is_some() {
            return invalid("no_discriminator set but a discriminator was supplied");
        }
        if !config.no_discriminator && ld.is_none() {
            return invalid("a discriminator is required unless no_discriminator is set");
        }
        let model_opt = AdamState::new(config.adam, model.params());
        let ld_opt = ld.as_ref().map(|d| AdamState::new(config.ld_adam, d.params()));
        let mut t = Trainer {
            model_opt,
            ld_opt,
            state: TrainState::default(),
            noise_rng: stream_rng(config.seed, 0, STREAM_NOISE),
            dropout_rng: stream_rng(config.seed, 0, STREAM_DROPOUT),
            config,
            model,
            ld,
            data,
        };
        t.reseed_epoch(1);
        Ok(t)
    }

    fn reseed_epoch(&mut self, epoch: usize) {
        self.noise_rng = stream_rng(self.config.seed, epoch, STREAM_NOISE);
        self.dropout_rng = stream_rng(self.config.seed, epoch, STREAM_DROPOUT);
    }

    fn update_model(&mut self, grads: &crate::autodiff::Gradients) -> Result<()> {
        let params = self.model.params_mut();
        params.zero_grad();
        params.accumulate(grads);
        if self.config.clip_norm > 0.0 {
            params.clip_grad_norm(self.config.clip_norm);
        }
        self.model_opt.step(params)
    }

    /// Denoising reconstruction of `batch`, then one discriminator update on
    /// the detached first-step outputs of that pass.
    pub fn dae_step(&mut self, batch: &Batch) -> Result<DaeLosses> {
        if batch.is_empty() {
            return invalid("dae_step needs a non-empty batch");
        }
        let lang = batch.lang;
        let clean = batch.sentences();
        let noise = self.config.noise;
        let noised: Vec<Vec<u32>> = clean.iter().map(|s| apply_noise(s, &noise, &mut self.noise_rng)).collect();
        let refs: Vec<&[u32]> = noised.iter().map(Vec::as_slice).collect();
        let input = Batch::from_sentences(&refs, lang);

        let mut g = Graph::new();
        let mv = self.model.bind(&mut g, false);
        let rng = dropout_of(&self.model, &mut self.dropout_rng);
        let (loss, first) = self.model.seq_loss(&mut g, &mv, &input, &clean, lang, rng)?;
        let dae = g.scalar(loss);
        if !dae.is_finite() {
            return Err(Error::NonFinite("dae loss"));
        }
        let grads = g.backward(loss)?;
        self.update_model(&grads)?;

        let ld = match (&mut self.ld, &mut self.ld_opt) {
            (Some(ld), Some(opt)) => {
                let mut g = Graph::new();
                let l = ld.loss(&mut g, &first.detach(), lang, false)?;
                let v = g.scalar(l);
                let grads = g.backward(l)?;
                let p = ld.params_mut();
                p.zero_grad();
                p.accumulate(&grads);
                opt.step(p)?;
                Some(v)
            }
            _ => None,
        };
        Ok(DaeLosses { dae, ld })
    }

    /// Online back-translation of `batch` through the other language.
    pub fn bt_step(&mut self, batch: &Batch, via: Lang) -> Result<BtLosses> {
        let mut g = Graph::new();
        let mv = self.model.bind(&mut g, false);
        let rng = dropout_of(&self.model, &mut self.dropout_rng);
        let obj = bt_objective(&self.model, self.ld.as_ref(), &self.config, &mut g, &mv, batch, via, rng)?;
        let Some(total) = obj.total else {
            return Ok(BtLosses { bt: None, ld: obj.ld, total: 0.0, intermediate: obj.intermediate, updated: false });
        };
        let total_value = g.scalar(total);
        if !total_value.is_finite() {
            return Err(Error::NonFinite("back-translation loss"));
        }
        let grads = g.backward(total)?;
        self.update_model(&grads)?;
        Ok(BtLosses { bt: obj.bt, ld: obj.ld, total: total_value, intermediate: obj.intermediate, updated: true })
    }

    /// Greedy validation BLEU and copying ratio in both directions.
    pub fn validate(&self) -> Result<Validation> {
        let mut v = Validation::default();
        for from in Lang::BOTH {
            let src = &self.data.valid[from.index()];
            let gold = &self.data.valid[from.other().index()];
            let hyps = translate_ids(&self.model, src, from, self.config.batch_size, self.config.bt_len_slack, None)?;
            v.bleu.set(from, bleu(&hyps, gold)?);
            v.copying_ratio.set(from, copying_ratio(src, &hyps)?);
        }
        Ok(v)
    }

    /// One pass over both monolingual corpora with alternating language sides.
    /// Returns the partial record; validation fields are filled by the caller.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.state.epoch + 1;
        self.reseed_epoch(epoch);
        let warmup = epoch <= self.config.warmup_epochs;
        let mut shuffle = stream_rng(self.config.seed, epoch, STREAM_SHUFFLE);
        let batches: Vec<Vec<Batch>> = Lang::BOTH
            .iter()
            .map(|&l| {
                let seed = shuffle.next_u64();
                batch_iter(&self.data.mono[l.index()], l, self.config.batch_size, seed).collect()
            })
            .collect();
        let mut dae = [(0.0, 0usize); 2];
        let mut ld = [(0.0, 0usize); 2];
        let mut bt = [(0.0, 0usize); 2];
        let mut ldc = [(0.0, 0usize); 2];
        let mut bt_updates = 0;
        let mut empty = 0;
        let n = batches.iter().map(Vec::len).max().unwrap_or(0);
        'outer: for i in 0..n {
            for l in Lang::BOTH {
                let Some(b) = batches[l.index()].get(i) else { continue };
                if self.state.step >= self.config.max_steps {
                    break 'outer;
                }
                let k = l.index();
                let d = self.dae_step(b)?;
                dae[k].0 += d.dae;
                dae[k].1 += 1;
                if let Some(v) = d.ld {
                    ld[k].0 += v;
                    ld[k].1 += 1;
                }
                if !warmup {
                    let r = self.bt_step(b, l.other())?;
                    if let Some(v) = r.bt {
                        bt[k].0 += v;
                        bt[k].1 += 1;
                    }
                    if let Some(v) = r.ld {
                        ldc[k].0 += v;
                        ldc[k].1 += 1;
                    }
                    bt_updates += r.updated as u64;
                    empty += r.intermediate.iter().filter(|s| s.is_empty()).count() as u64;
                }
                self.state.step += 1;
            }
        }
        let mean = |(s, c): (f64, usize)| if c == 0 { 0.0 } else { s / c as f64 };
        let per_lang = |a: &[(f64, usize); 2]| PerLang { src: mean(a[0]), tgt: mean(a[1]) };
        let per_dir = |a: &[(f64, usize); 2]| PerDirection { src2tgt: mean(a[0]), tgt2src: mean(a[1]) };
        Ok(EpochRecord {
            epoch,
            step: self.state.step,
            warmup,
            dae_loss: per_lang(&dae),
            ld_loss: self.ld.is_some().then(|| per_lang(&ld)),
            bt_loss: (!warmup).then(|| per_dir(&bt)),
            ld_constraint_loss: (!warmup && self.ld.is_some()).then(|| per_dir(&ldc)),
            copying_ratio: PerDirection::default(),
            valid_bleu: PerDirection::default(),
            bt_updates,
            empty_intermediates: empty,
        })
    }

    /// Folds a validation result into the state. Returns true on a new best.
    fn finish_epoch(&mut self, mut rec: EpochRecord, v: Validation) -> bool {
        rec.copying_ratio = v.copying_ratio;
        rec.valid_bleu = v.bleu;
        let score = v.bleu.mean();
        let improved = self.state.best_bleu.is_none_or(|b| score > b);
        if improved {
            self.state.best_bleu = Some(score);
            self.state.best_epoch = Some(rec.epoch);
            self.state.stagnant = 0;
        } else {
            self.state.stagnant += 1;
        }
        self.state.epoch = rec.epoch;
        self.state.log.push(rec);
        improved
    }

    fn stop_reason(&self) -> Option<StopReason> {
        if self.state.stagnant >= self.config.patience {
            Some(StopReason::EarlyStopping)
        } else if self.state.step >= self.config.max_steps {
            Some(StopReason::MaxSteps)
        } else if self.state.epoch >= self.config.max_epochs {
            Some(StopReason::MaxEpochs)
        } else {
            None
        }
    }

    /// Trains until a stop condition, validating with [`Trainer::validate`].
    pub fn fit(&mut self, out: Option<&Path>) -> Result<StopReason> {
        self.fit_with(out, |t| t.validate())
    }

    /// Trains with a custom validation function. With `out`, appends one JSON
    /// line per epoch to `metrics.jsonl`, writes `last.ckpt` every epoch and
    /// `best.ckpt` whenever validation BLEU improves.
    pub fn fit_with<F>(&mut self, out: Option<&Path>, mut validate: F) -> Result<StopReason>
    where
        F: FnMut(&Trainer) -> Result<Validation>,
    {
        if let Some(dir) = out {
            std::fs::create_dir_all(dir)?;
            self.rewrite_log(dir)?;
        }
        loop {
            if let Some(r) = self.stop_reason() {
                self.state.stopped = Some(r);
                if let Some(dir) = out {
                    self.save(&dir.join(LAST_CHECKPOINT))?;
                }
                return Ok(r);
            }
            let rec = self.run_epoch()?;
            let v = validate(self)?;
            let best = self.finish_epoch(rec, v);
            let last = self.state.log.last().expect("record just pushed");
            log::info!(
                "epoch {} step {} bleu {:.2}/{:.2} copy {:.3}/{:.3}",
                last.epoch,
                last.step,
                last.valid_bleu.src2tgt,
                last.valid_bleu.tgt2src,
                last.copying_ratio.src2tgt,
                last.copying_ratio.tgt2src
            );
            if let Some(dir) = out {
                let line = serde_json::to_string(self.state.log.last().expect("record just pushed"))?;
                let mut f = OpenOptions::new().create(true).append(true).open(dir.join(METRICS_LOG))?;
                writeln!(f, "{line}")?;
                if best {
                    self.save(&dir.join(BEST_CHECKPOINT))?;
                }
                self.save(&dir.join(LAST_CHECKPOINT))?;
            }
        }
    }

    fn rewrite_log(&self, dir: &Path) -> Result<()> {
        let mut f = std::fs::File::create(dir.join(METRICS_LOG))?;
        for rec in &self.state.log {
            writeln!(f, "{}", serde_json::to_string(rec)?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader {
            model: self.model.config().clone(),
            vocab: self.data.vocab.clone(),
            train: Some(self.config.clone()),
            state: Some(self.state.clone()),
            model_adam_t: self.model_opt.t,
            ld_adam_t: self.ld_opt.as_ref().map(|o| o.t),
        };
        let mut tensors: Vec<(String, Tensor)> = Vec::new();
        push_set(&mut tensors, "model", self.model.params().iter(), &self.model_opt);
        if let (Some(ld), Some(opt)) = (&self.ld, &self.ld_opt) {
            push_set(&mut tensors, "ld", ld.params().iter(), opt);
        }
        checkpoint::save(path, &header, &tensors)
    }

    /// Restores a trainer written by [`Trainer::save`] over `data`.
    pub fn resume(path: &Path, data: TrainData) -> Result<Self> {
        let (header, tensors): (CheckpointHeader, _) = checkpoint::load(path)?;
        if header.vocab != data.vocab {
            return Err(Error::Checkpoint("checkpoint vocabulary differs from the training data".into()));
        }
        let (Some(train), Some(state)) = (header.train, header.state) else {
            return Err(Error::Checkpoint(format!("{} holds no training state", path.display())));
        };
        let mut t = Trainer::new(train, header.model, data)?;
        let lookup = checkpoint::index(&tensors);
        restore_set(&lookup, "model", t.model.params_mut(), &mut t.model_opt)?;
        t.model_opt.t = header.model_adam_t;
        if let (Some(ld), Some(opt)) = (&mut t.ld, &mut t.ld_opt) {
            restore_set(&lookup, "ld", ld.params_mut(), opt)?;
            opt.t = header.ld_adam_t.ok_or_else(|| Error::Checkpoint("missing discriminator optimizer".into()))?;
        }
        t.state = state;
        t.state.stopped = None;
        Ok(t)
    }

    /// Output paths used by [`Trainer::fit`].
    pub fn paths(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        (dir.join(METRICS_LOG), dir.join(BEST_CHECKPOINT), dir.join(LAST_CHECKPOINT))
    }
}

/// Writes model weights and vocabulary only.
pub fn save_model(path: &Path, model: &Seq2Seq, vocab: &Vocab) -> Result<()> {
    let header = CheckpointHeader {
        model: model.config().clone(),
        vocab: vocab.clone(),
        train: None,
        state: None,
        model_adam_t: 0,
        ld_adam_t: None,
    };
    let tensors: Vec<(String, Tensor)> = model
        .params()
        .iter()
        .map(|(n, t)| (format!("model/{n}"), Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("shape")))
        .collect();
    checkpoint::save(path, &header, &tensors)
}

/// Reads the translation model and vocabulary from any checkpoint.
pub fn load_model(path: &Path) -> Result<(Seq2Seq, Vocab)> {
    let (header, tensors): (CheckpointHeader, _) = checkpoint::load(path)?;
    let mut model = Seq2Seq::new(header.model, header.vocab.len(), 0)?;
    let lookup = checkpoint::index(&tensors);
    let names: Vec<String> = model.params().names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let key = format!("model/{name}");
        let src = lookup.get(key.as_str()).ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))?;
        let dst = model.params_mut().get_mut(i);
        if dst.shape() != src.shape() {
            return Err(Error::Checkpoint(format!("shape mismatch for {name}")));
        }
        dst.data_mut().copy_from_slice(src.data());
    }
    Ok((model, header.vocab))
}

pub const METRICS_LOG: &str = "metrics.jsonl";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";

fn push_set<'a>(
    out: &mut Vec<(String, Tensor)>,
    prefix: &str,
    params: impl Iterator<Item = (&'a str, &'a Tensor)>,
    opt: &AdamState,
) {
    for (i, (name, t)) in params.enumerate() {
        let plain = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("parameter shape");
        let m = Tensor::new(t.shape().to_vec(), opt.m[i].clone()).expect("moment shape");
        let v = Tensor::new(t.shape().to_vec(), opt.v[i].clone()).expect("moment shape");
        out.push((format!("{prefix}/{name}"), plain));
        out.push((format!("{prefix}.adam_m/{name}"), m));
        out.push((format!("{prefix}.adam_v/{name}"), v));
    }
}

fn restore_set(
    lookup: &std::collections::HashMap<&str, &Tensor>,
    prefix: &str,
    params: &mut crate::autodiff::ParamSet,
    opt: &mut AdamState,
) -> Result<()> {
    let names: Vec<String> = params.names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let get =
            |p: String| lookup.get(p.as_str()).copied().ok_or_else(|| Error::Checkpoint(format!("missing tensor {p}")));
        let value = get(format!("{prefix}/{name}"))?;
        let dst = params.get_mut(i);
        if dst.shape() != value.shape() {
            return Err(Error::Checkpoint(format!("shape mismatch for {name}")));
        }
        dst.data_mut().copy_from_slice(value.data());
        opt.m[i] = get(format!("{prefix}.adam_m/{name}"))?.data().to_vec();
        opt.v[i] = get(format!("{prefix}.adam_v/{name}"))?.data().to_vec();
    }
    Ok(())
}

/// The back-translation objective built on `g`, before any update.
pub struct BtObjective {
    /// `L_BT + λ·L_LD`, absent when nothing contributes gradient.
    pub total: Option<Var>,
    pub bt: Option<f64>,
    pub ld: Option<f64>,
    /// Intermediate translations without EOS.
    pub intermediate: Vec<Vec<u32>>,
}

/// Greedy intermediate translation of `batch` into `via`, reconstruction of
/// the original from it, and the weighted constraint on the intermediate
/// first-step outputs. With `λ = 0` or no discriminator no constraint node
/// enters `g`; the constraint value is still reported when a discriminator
/// exists.
#[allow(clippy::too_many_arguments)]
pub fn bt_objective(
    model: &Seq2Seq,
    ld: Option<&Discriminator>,
    config: &TrainConfig,
    g: &mut Graph,
    mv: &ModelVars,
    batch: &Batch,
    via: Lang,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<BtObjective> {
    let lang = batch.lang;
    if via == lang {
        return invalid(format!("back-translation needs two languages, got {} twice", lang.as_str()));
    }
    if batch.is_empty() {
        return invalid("bt_step needs a non-empty batch");
    }
    let lambda = config.lambda_ld;
    let longest = batch.lengths.iter().max().copied().unwrap_or(1) - 1;
    let max_len = (longest + config.bt_len_slack + 1).min(model.config().max_len).max(1);

    let (seqs, first) = model.generate_greedy(g, mv, batch, via, max_len)?;
    let intermediate: Vec<Vec<u32>> = seqs.iter().map(|s| strip_eos(s)).collect();
    let keep: Vec<usize> = (0..intermediate.len()).filter(|&i| !intermediate[i].is_empty()).collect();

    let mut terms = Vec::new();
    let mut bt = None;
    let mut rec_first = None;
    if !keep.is_empty() {
        let inputs: Vec<&[u32]> = keep.iter().map(|&i| intermediate[i].as_slice()).collect();
        let src = Batch::from_sentences(&inputs, via);
        let targets: Vec<Vec<u32>> = keep.iter().map(|&i| batch.tokens(i).to_vec()).collect();
        let (l, f) = model.seq_loss(g, mv, &src, &targets, lang, rng)?;
        bt = Some(g.scalar(l));
        terms.push(l);
        rec_first = Some(f);
    }

    let mut ld_value = None;
    if let Some(ld) = ld {
        if lambda > 0.0 {
            let l = ld.loss(g, &first, via, true)?;
            ld_value = Some(g.scalar(l));
            terms.push(g.scale(l, lambda));
            if config.ld_on_reconstruction {
                if let Some(f) = &rec_first {
                    let l = ld.loss(g, f, lang, true)?;
                    terms.push(g.scale(l, lambda));
                }
            }
        } else {
            let mut g2 = Graph::new();
            let l = ld.loss(&mut g2, &first.detach(), via, true)?;
            ld_value = Some(g2.scalar(l));
        }
    }

    let total = terms.split_first().map(|(&head, rest)| rest.iter().fold(head, |acc, &t| g.add(acc, t)));
    Ok(BtObjective { total, bt, ld: ld_value, intermediate })
}

/// Translates id sequences in batches. `beam = None` decodes greedily.
/// Outputs exclude EOS. Each batch allows its longest source plus `slack` tokens.
pub fn translate_ids(
    model: &Seq2Seq,
    sentences: &[Vec<u32>],
    from: Lang,
    batch_size: usize,
    slack: usize,
    beam: Option<usize>,
) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::with_capacity(sentences.len());
    for chunk in sentences.chunks(batch_size.max(1)) {
        let refs: Vec<&[u32]> = chunk.iter().map(Vec::as_slice).collect();
        let b = Batch::from_sentences(&refs, from);
        let longest = chunk.iter().map(Vec::len).max().unwrap_or(0);
        let max_len = (longest + slack + 1).min(model.config().max_len).max(1);
        let seqs = match beam {
            None => model.translate_greedy(&b, from.other(), max_len)?,
            Some(k) => model.translate_beam(&b, from.other(), max_len, k)?,
        };
        out.extend(seqs.iter().map(|s| strip_eos(s)));
    }
    Ok(out)
}

/// Label of the translation direction starting at `from`.
pub fn direction_from(from: Lang) -> Direction {
    Direction { from, to: from.other() }
}
