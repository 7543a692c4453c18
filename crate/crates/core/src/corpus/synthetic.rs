//! Cipher languages: the target language is a token-bijection (plus an
//! optional deterministic reordering) of sentences drawn from the same
//! generator as the source language. Surface vocabularies are disjoint, so a
//! copied token is always detectable, and the inverse transform is an exact
//! translation oracle.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, ParallelSet, Sentence, Split};
use crate::error::{invalid, Result};
use crate::lang::Lang;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "map")]
pub enum Cipher {
    /// `s<i>` ↦ `t<i>`.
    Identity,
    /// A seeded random permutation.
    Shuffled,
    /// `s<i>` ↦ `t<map[i]>`; must be a permutation of `0..vocab_size`.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "size")]
pub enum ReorderMode {
    None,
    /// Full sentence reversal.
    Reverse,
    /// Reverse each consecutive block of `size` tokens.
    Window(usize),
}

impl ReorderMode {
    /// Every supported reordering is an involution.
    fn apply<T: Clone>(&self, s: &[T]) -> Vec<T> {
        match self {
            ReorderMode::None => s.to_vec(),
            ReorderMode::Reverse => s.iter().rev().cloned().collect(),
            ReorderMode::Window(k) => {
                let k = (*k).max(1);
                s.chunks(k).flat_map(|c| c.iter().rev().cloned()).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    /// Surface tokens per language.
    pub vocab_size: usize,
    /// Monolingual training sentences per language.
    pub train_sentences: usize,
    /// Gold parallel pairs in the validation split.
    pub valid_sentences: usize,
    /// Gold parallel pairs in the test split.
    pub test_sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub cipher: Cipher,
    pub reorder: ReorderMode,
    /// Zipf exponent of the unigram distribution.
    pub zipf: f64,
    /// Probability of following one of the previous token's preferred successors.
    pub bigram_bias: f64,
    /// Preferred successors per token.
    pub successors: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec::distant()
    }
}

impl SyntheticSpec {
    /// Sentence reversal on top of the cipher.
    pub fn distant() -> Self {
        SyntheticSpec {
            vocab_size: 200,
            train_sentences: 5000,
            valid_sentences: 200,
            test_sentences: 500,
            min_len: 3,
            max_len: 12,
            cipher: Cipher::Shuffled,
            reorder: ReorderMode::Reverse,
            zipf: 1.0,
            bigram_bias: 0.75,
            successors: 3,
            seed: 1,
        }
    }

    /// Cipher only: word order is shared.
    pub fn similar() -> Self {
        SyntheticSpec { reorder: ReorderMode::None, ..SyntheticSpec::distant() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 10 {
            return invalid("synthetic vocab_size must be at least 10");
        }
        if self.train_sentences == 0 || self.valid_sentences == 0 || self.test_sentences == 0 {
            return invalid("synthetic sentence counts must be at least 1");
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return invalid("synthetic length bounds need 1 <= min_len <= max_len");
        }
        if !(0.0..=1.0).contains(&self.bigram_bias) || self.zipf < 0.0 {
            return invalid("bigram_bias must lie in [0,1] and zipf must be nonnegative");
        }
        if let ReorderMode::Window(0) = self.reorder {
            return invalid("reorder window must be positive");
        }
        Ok(())
    }
}

pub fn src_token(i: usize) -> String {
    format!("s{i}")
}

pub fn tgt_token(i: usize) -> String {
    format!("t{i}")
}

/// Output of [`gen_synthetic_pair`].
#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub spec: SyntheticSpec,
    pub train_src: Corpus,
    pub train_tgt: Corpus,
    pub valid: ParallelSet,
    pub test: ParallelSet,
    /// `cipher[i]` is the target index of source token `i`.
    pub cipher: Vec<usize>,
    inverse: Vec<usize>,
}

impl SyntheticPair {
    pub fn train(&self, lang: Lang) -> &Corpus {
        match lang {
            Lang::Src => &self.train_src,
            Lang::Tgt => &self.train_tgt,
        }
    }

    /// Exact translation of a sentence into the other language; tokens not
    /// belonging to `from` pass through unchanged.
    pub fn translate(&self, sentence: &[String], from: Lang) -> Sentence {
        let (prefix, map, out): (&str, &[usize], fn(usize) -> String) = match from {
            Lang::Src => ("s", &self.cipher, tgt_token),
            Lang::Tgt => ("t", &self.inverse, src_token),
        };
        let mapped: Vec<String> = sentence
            .iter()
            .map(|t| {
                t.strip_prefix(prefix)
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&i| i < map.len())
                    .map_or_else(|| t.clone(), |i| out(map[i]))
            })
            .collect();
        self.spec.reorder.apply(&mapped)
    }

    /// Monolingual view of a split for one language.
    pub fn corpus(&self, lang: Lang, split: Split) -> Corpus {
        let sents = match split {
            Split::Train => return self.train(lang).clone(),
            Split::Valid => self.valid.side(lang).to_vec(),
            Split::Test => self.test.side(lang).to_vec(),
        };
        Corpus::new(lang, split, sents).expect("generator never emits empty sentences")
    }
}

struct Sampler {
    cdf: Vec<f64>,
    successors: Vec<Vec<usize>>,
    bias: f64,
    min_len: usize,
    max_len: usize,
}

impl Sampler {
    fn new(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        // Unigram ranks are shuffled so frequency is not tied to token names.
        let mut rank: Vec<usize> = (0..spec.vocab_size).collect();
        rank.shuffle(rng);
        let weights: Vec<f64> = rank.iter().map(|&r| 1.0 / ((r + 1) as f64).powf(spec.zipf)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        let mut s = Sampler {
            cdf,
            successors: Vec::new(),
            bias: spec.bigram_bias,
            min_len: spec.min_len,
            max_len: spec.max_len,
        };
        s.successors = (0..spec.vocab_size).map(|_| (0..spec.successors).map(|_| s.unigram(rng)).collect()).collect();
        s
    }

    fn unigram(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1)
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let len = rng.random_range(self.min_len..=self.max_len);
        let mut out = Vec::with_capacity(len);
        let mut prev = self.unigram(rng);
        out.push(prev);
        while out.len() < len {
            let succ = &self.successors[prev];
            prev = if !succ.is_empty() && rng.random::<f64>() < self.bias {
                succ[rng.random_range(0..succ.len())]
            } else {
                self.unigram(rng)
            };
            out.push(prev);
        }
        out
    }
}

fn cipher_map(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = spec.vocab_size;
    match &spec.cipher {
        Cipher::Identity => Ok((0..n).collect()),
        Cipher::Shuffled => {
            let mut m: Vec<usize> = (0..n).collect();
            m.shuffle(rng);
            Ok(m)
        }
        Cipher::Explicit(m) => {
            let mut seen = vec![false; n];
            if m.len() != n || m.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
                return invalid("explicit cipher is not a bijection on the vocabulary");
            }
            Ok(m.clone())
        }
    }
}

/// Generates monolingual training halves drawn from disjoint samples plus gold
/// parallel validation and test sets.
pub fn gen_synthetic_pair(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cipher = cipher_map(spec, &mut rng)?;
    let mut inverse = vec![0; cipher.len()];
    for (i, &j) in cipher.iter().enumerate() {
        inverse[j] = i;
    }
    let sampler = Sampler::new(spec, &mut rng);
    let to_src = |s: &[usize]| -> Sentence { s.iter().map(|&i| src_token(i)).collect() };
    let to_tgt = |s: &[usize]| -> Sentence {
        let mapped: Vec<usize> = s.iter().map(|&i| cipher[i]).collect();
        spec.reorder.apply(&mapped).into_iter().map(tgt_token).collect()
    };

    let mut draw = |n: usize| -> Vec<Vec<usize>> { (0..n).map(|_| sampler.sentence(&mut rng)).collect() };
    let pool = draw(2 * spec.train_sentences);
    let (src_half, tgt_half) = pool.split_at(spec.train_sentences);
    let train_src = Corpus::new(Lang::Src, Split::Train, src_half.iter().map(|s| to_src(s)).collect())?;
    let train_tgt = Corpus::new(Lang::Tgt, Split::Train, tgt_half.iter().map(|s| to_tgt(s)).collect())?;
    let parallel = |sents: Vec<Vec<usize>>| ParallelSet {
        src: sents.iter().map(|s| to_src(s)).collect(),
        tgt: sents.iter().map(|s| to_tgt(s)).collect(),
    };
    let valid = parallel(draw(spec.valid_sentences));
    let test = parallel(draw(spec.test_sentences));
    Ok(SyntheticPair { spec: spec.clone(), train_src, train_tgt, valid, test, cipher, inverse })
}
