#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unmt::autodiff::Graph;
use unmt::corpus::{Batch, ParallelSet};
use unmt::discriminator::Discriminator;
use unmt::schedule::{bt_objective, TrainConfig, TrainData};
use unmt::seq2seq::{ModelConfig, Seq2Seq, Vocab, MODEL_SET};
use unmt::Lang;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig { d_model: 8, enc_layers: 1, dec_layers: 1, heads: 2, ffn: 16, max_len: 10, dropout: 0.0 }
}

/// Ordinary (non-reserved) token ids in `[4, vocab)`.
pub fn random_sentences(r: &mut ChaCha8Rng, n: usize, min: usize, max: usize, vocab: usize) -> Vec<Vec<u32>> {
    (0..n).map(|_| (0..r.random_range(min..=max)).map(|_| r.random_range(4..vocab as u32)).collect()).collect()
}

pub fn batch_of(sents: &[Vec<u32>], lang: Lang) -> Batch {
    let refs: Vec<&[u32]> = sents.iter().map(Vec::as_slice).collect();
    Batch::from_sentences(&refs, lang)
}

/// Small synthetic training data over a vocabulary of `s0..s{k}` and `t0..t{k}`.
pub fn toy_data(k: usize, n: usize, seed: u64) -> TrainData {
    let mut r = rng(seed);
    let src: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
    let tgt: Vec<String> = (0..k).map(|i| format!("t{i}")).collect();
    let vocab = Vocab::from_tokens(src.iter().chain(&tgt));
    let sample = |r: &mut ChaCha8Rng, words: &[String]| -> Vec<String> {
        (0..r.random_range(2..=5)).map(|_| words[r.random_range(0..k)].clone()).collect()
    };
    let mono_src: Vec<Vec<String>> = (0..n).map(|_| sample(&mut r, &src)).collect();
    let mono_tgt: Vec<Vec<String>> = (0..n).map(|_| sample(&mut r, &tgt)).collect();
    let valid_src: Vec<Vec<String>> = (0..4).map(|_| sample(&mut r, &src)).collect();
    let valid_tgt: Vec<Vec<String>> =
        valid_src.iter().map(|s| s.iter().map(|w| w.replacen('s', "t", 1)).collect()).collect();
    let train_src = unmt::corpus::Corpus::new(Lang::Src, unmt::corpus::Split::Train, mono_src).unwrap();
    let train_tgt = unmt::corpus::Corpus::new(Lang::Tgt, unmt::corpus::Split::Train, mono_tgt).unwrap();
    TrainData::new(vocab, &train_src, &train_tgt, &ParallelSet { src: valid_src, tgt: valid_tgt }).unwrap()
}

/// Deterministic settings for exact-replay tests.
pub fn quiet_train_config(lambda: f64) -> TrainConfig {
    TrainConfig {
        lambda_ld: lambda,
        batch_size: 4,
        warmup_epochs: 1,
        max_epochs: 3,
        noise: unmt::schedule::NoiseConfig::NONE,
        ..TrainConfig::default()
    }
}

/// Value of the back-translation objective for `model`, dropout off.
pub fn bt_total(
    model: &Seq2Seq,
    ld: Option<&Discriminator>,
    cfg: &TrainConfig,
    batch: &Batch,
    via: Lang,
) -> (f64, Vec<Vec<u32>>) {
    let mut g = Graph::new();
    let mv = model.bind(&mut g, true);
    let obj = bt_objective(model, ld, cfg, &mut g, &mv, batch, via, None).unwrap();
    (obj.total.map(|t| g.scalar(t)).unwrap_or(0.0), obj.intermediate)
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / f64::max(1e-8, a.abs() + n.abs())
}

/// Worst relative error between reverse-mode and central-difference
/// gradients of the back-translation objective over `trials` random
/// model-parameter coordinates. The intermediate translation must not change
/// under the perturbation; a coordinate where it does is reported as an error
/// of 1.
pub fn bt_gradcheck(
    model: &Seq2Seq,
    ld: Option<&Discriminator>,
    cfg: &TrainConfig,
    batch: &Batch,
    via: Lang,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut g = Graph::new();
    let mv = model.bind(&mut g, false);
    let obj = bt_objective(model, ld, cfg, &mut g, &mv, batch, via, None).unwrap();
    let grads = g.backward(obj.total.expect("objective has a gradient path")).unwrap();
    let mut analytic: Vec<Vec<f64>> = model.params().tensors().iter().map(|t| vec![0.0; t.len()]).collect();
    for (i, gr) in grads.params_of(MODEL_SET) {
        analytic[i].copy_from_slice(gr);
    }
    let mut r = rng(seed);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut work = model.clone();
    for _ in 0..trials {
        let p = r.random_range(0..analytic.len());
        let j = r.random_range(0..analytic[p].len());
        let orig = work.params().get(p).data()[j];
        work.params_mut().get_mut(p).data_mut()[j] = orig + eps;
        let (up, inter_up) = bt_total(&work, ld, cfg, batch, via);
        work.params_mut().get_mut(p).data_mut()[j] = orig - eps;
        let (down, inter_down) = bt_total(&work, ld, cfg, batch, via);
        work.params_mut().get_mut(p).data_mut()[j] = orig;
        if inter_up != obj.intermediate || inter_down != obj.intermediate {
            worst = 1.0;
            continue;
        }
        worst = worst.max(rel_err(analytic[p][j], (up - down) / (2.0 * eps)));
    }
    worst
}
