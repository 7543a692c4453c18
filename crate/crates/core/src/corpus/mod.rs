//! Monolingual corpora: synthetic cipher-language generation, plain-text
//! ingestion, joint vocabulary construction and batching.

mod batch;
mod synthetic;

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use batch::{batch_iter, Batch, BatchIter};
pub use synthetic::{gen_synthetic_pair, Cipher, ReorderMode, SyntheticPair, SyntheticSpec};

use crate::error::{Error, Result};
use crate::lang::Lang;
use crate::seq2seq::Vocab;

pub type Sentence = Vec<String>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Tokenized sentences of one language and split. Never holds empty sentences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub lang: Lang,
    pub split: Split,
    sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(lang: Lang, split: Split, sentences: Vec<Sentence>) -> Result<Self> {
        if let Some(i) = sentences.iter().position(Vec::is_empty) {
            return Err(Error::InvalidArgument(format!("sentence {i} of {lang}/{} is empty", split.as_str())));
        }
        Ok(Corpus { lang, split, sentences })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn encode(&self, vocab: &Vocab) -> Vec<Vec<u32>> {
        self.sentences.iter().map(|s| vocab.encode(s)).collect()
    }

    /// Reads one whitespace-tokenized sentence per line. Blank lines are skipped.
    pub fn read(path: &Path, lang: Lang, split: Split) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let reader = BufReader::new(fs::File::open(path)?);
        let mut sentences = Vec::new();
        for line in reader.lines() {
            let toks: Sentence = line?.split_whitespace().map(str::to_string).collect();
            if !toks.is_empty() {
                sentences.push(toks);
            }
        }
        Corpus::new(lang, split, sentences)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_lines(path, self.sentences.iter().map(|s| s.join(" ")))
    }
}

pub(crate) fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Joint vocabulary over all given corpora: reserved tokens, then tokens by
/// descending frequency with lexicographic tie-breaking.
pub fn build_vocab<'a, I>(corpora: I) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a Corpus>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut any = false;
    for c in corpora {
        any |= !c.is_empty();
        for s in c.sentences() {
            for t in s {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    if !any {
        return Err(Error::InvalidArgument("cannot build a vocabulary from empty corpora".into()));
    }
    let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Vocab::from_tokens(entries.into_iter().map(|(t, _)| t)))
}

/// Line-aligned gold translation pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParallelSet {
    pub src: Vec<Sentence>,
    pub tgt: Vec<Sentence>,
}

impl ParallelSet {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    pub fn side(&self, lang: Lang) -> &[Sentence] {
        match lang {
            Lang::Src => &self.src,
            Lang::Tgt => &self.tgt,
        }
    }

    /// `src<TAB>tgt` per line.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_lines(path, self.src.iter().zip(&self.tgt).map(|(s, t)| format!("{}\t{}", s.join(" "), t.join(" "))))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        for (n, line) in BufReader::new(fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (s, t) = line
                .split_once('\t')
                .ok_or_else(|| Error::InvalidArgument(format!("{}:{}: expected src<TAB>tgt", path.display(), n + 1)))?;
            src.push(s.split_whitespace().map(str::to_string).collect());
            tgt.push(t.split_whitespace().map(str::to_string).collect());
        }
        Ok(ParallelSet { src, tgt })
    }
}
