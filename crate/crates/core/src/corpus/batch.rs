use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lang::Lang;
use crate::seq2seq::vocab::{EOS, PAD};

/// Padded id matrix. Each row is `tokens ++ [EOS]` followed by PAD.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub ids: Vec<Vec<u32>>,
    /// Row lengths including EOS.
    pub lengths: Vec<usize>,
    pub lang: Lang,
    /// Index of each row in the source corpus.
    pub rows: Vec<usize>,
}

impl Batch {
    pub fn from_sentences(sentences: &[&[u32]], lang: Lang) -> Batch {
        let width = sentences.iter().map(|s| s.len() + 1).max().unwrap_or(1);
        let mut ids = Vec::with_capacity(sentences.len());
        let mut lengths = Vec::with_capacity(sentences.len());
        for s in sentences {
            let mut row = s.to_vec();
            row.push(EOS);
            lengths.push(row.len());
            row.resize(width, PAD);
            ids.push(row);
        }
        Batch { ids, lengths, lang, rows: (0..sentences.len()).collect() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn width(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    /// Row `i` without EOS/PAD.
    pub fn tokens(&self, i: usize) -> &[u32] {
        &self.ids[i][..self.lengths[i] - 1]
    }

    pub fn sentences(&self) -> Vec<Vec<u32>> {
        (0..self.len()).map(|i| self.tokens(i).to_vec()).collect()
    }
}

/// Seeded shuffled batches over a whole corpus; the last batch may be short.
pub struct BatchIter<'a> {
    corpus: &'a [Vec<u32>],
    order: Vec<usize>,
    pos: usize,
    batch_size: usize,
    lang: Lang,
}

impl Iterator for BatchIter<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let rows: Vec<usize> = self.order[self.pos..end].to_vec();
        self.pos = end;
        let sents: Vec<&[u32]> = rows.iter().map(|&r| self.corpus[r].as_slice()).collect();
        let mut b = Batch::from_sentences(&sents, self.lang);
        b.rows = rows;
        Some(b)
    }
}

pub fn batch_iter(corpus: &[Vec<u32>], lang: Lang, batch_size: usize, seed: u64) -> BatchIter<'_> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    BatchIter { corpus, order, pos: 0, batch_size, lang }
}
