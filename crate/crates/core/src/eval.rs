//! Test-set evaluation and first-step PCA over trained models.

use serde::{Deserialize, Serialize};

use crate::corpus::{Batch, ParallelSet, Sentence};
use crate::error::{invalid, Result};
use crate::lang::{Direction, Lang};
use crate::metrics::{
    cluster_check, paired_bootstrap, pca_project, ClusterCheck, DirectionBootstrap, DirectionScores, MetricsReport,
    PcaPoint, Projection,
};
use crate::schedule::{direction_from, translate_ids};
use crate::seq2seq::{Seq2Seq, Vocab};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub beam: usize,
    pub batch_size: usize,
    /// Output may exceed the longest source by this many tokens.
    pub len_slack: usize,
    pub bootstrap_samples: usize,
    pub bootstrap_seed: u64,
    /// Sentences per category for the first-step PCA.
    pub pca_sentences: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            beam: 5,
            batch_size: 64,
            len_slack: 3,
            bootstrap_samples: 1000,
            bootstrap_seed: 12345,
            pca_sentences: 512,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.beam == 0 || self.batch_size == 0 {
            return invalid("beam and batch_size must be at least 1");
        }
        if self.bootstrap_samples < crate::metrics::MIN_SAMPLES {
            return invalid(format!("bootstrap_samples must be at least {}", crate::metrics::MIN_SAMPLES));
        }
        Ok(())
    }
}

/// Translates whitespace-token sentences from `from` into the other language.
pub fn translate_sentences(
    model: &Seq2Seq,
    vocab: &Vocab,
    sentences: &[Sentence],
    from: Lang,
    opts: &EvalOptions,
) -> Result<Vec<Sentence>> {
    let ids: Vec<Vec<u32>> = sentences.iter().map(|s| vocab.encode(s)).collect();
    let beam = (opts.beam > 1).then_some(opts.beam);
    let out = translate_ids(model, &ids, from, opts.batch_size, opts.len_slack, beam)?;
    Ok(out.iter().map(|s| vocab.decode(s)).collect())
}

/// Hypotheses for both directions of `test`, indexed by source language.
pub fn translate_test(
    model: &Seq2Seq,
    vocab: &Vocab,
    test: &ParallelSet,
    opts: &EvalOptions,
) -> Result<[Vec<Sentence>; 2]> {
    if test.is_empty() {
        return invalid("test set is empty");
    }
    Ok([
        translate_sentences(model, vocab, test.side(Lang::Src), Lang::Src, opts)?,
        translate_sentences(model, vocab, test.side(Lang::Tgt), Lang::Tgt, opts)?,
    ])
}

fn score(test: &ParallelSet, hyps: &[Vec<Sentence>; 2]) -> Result<Vec<DirectionScores>> {
    Lang::BOTH
        .iter()
        .map(|&from| {
            DirectionScores::compute(
                direction_from(from),
                test.side(from),
                &hyps[from.index()],
                test.side(from.other()),
            )
        })
        .collect()
}

/// BLEU, chrF, copying ratio and gold token accuracy in both directions.
pub fn evaluate(model: &Seq2Seq, vocab: &Vocab, test: &ParallelSet, opts: &EvalOptions) -> Result<MetricsReport> {
    opts.validate()?;
    let hyps = translate_test(model, vocab, test, opts)?;
    let report = MetricsReport { directions: score(test, &hyps)?, ..Default::default() };
    report.validate()?;
    Ok(report)
}

/// Scores system A and adds a paired bootstrap against system B per direction.
pub fn compare(
    hyps_a: &[Vec<Sentence>; 2],
    hyps_b: &[Vec<Sentence>; 2],
    test: &ParallelSet,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    opts.validate()?;
    let mut report = MetricsReport { directions: score(test, hyps_a)?, ..Default::default() };
    for from in Lang::BOTH {
        let refs = test.side(from.other());
        let result = paired_bootstrap(
            &hyps_a[from.index()],
            &hyps_b[from.index()],
            refs,
            opts.bootstrap_samples,
            opts.bootstrap_seed,
        )?;
        report.bootstrap.push(DirectionBootstrap {
            direction: direction_from(from).label(),
            significant: result.a_significantly_better(0.05),
            result,
        });
    }
    report.validate()?;
    Ok(report)
}

/// The four first-step categories in output order.
pub const PCA_CATEGORIES: [Direction; 4] =
    [Direction::SRC2SRC, Direction::SRC2TGT, Direction::TGT2SRC, Direction::TGT2TGT];

#[derive(Clone, Debug, PartialEq)]
pub struct PcaAnalysis {
    pub points: Vec<PcaPoint>,
    pub projection: Projection,
    pub clusters: ClusterCheck,
}

/// First-step outputs of the same parallel test sentences in all four
/// input/output language combinations, projected to 2-D.
pub fn first_step_pca(model: &Seq2Seq, vocab: &Vocab, test: &ParallelSet, opts: &EvalOptions) -> Result<PcaAnalysis> {
    if test.is_empty() {
        return invalid("pca needs gold parallel sentences");
    }
    let n = test.len().min(opts.pca_sentences.max(1));
    let mut rows = Vec::with_capacity(4 * n);
    let mut labels = Vec::with_capacity(4 * n);
    for dir in PCA_CATEGORIES {
        let ids: Vec<Vec<u32>> = test.side(dir.from)[..n].iter().map(|s| vocab.encode(s)).collect();
        for chunk in ids.chunks(opts.batch_size.max(1)) {
            let refs: Vec<&[u32]> = chunk.iter().map(Vec::as_slice).collect();
            let out = model.first_step_outputs(&Batch::from_sentences(&refs, dir.from), dir.to)?;
            for i in 0..out.batch() {
                rows.push(out.values.row(i).to_vec());
                labels.push(dir.label());
            }
        }
    }
    let projection = pca_project(&rows)?;
    let points: Vec<PcaPoint> =
        projection.coords.iter().zip(labels).map(|(c, category)| PcaPoint { category, x: c[0], y: c[1] }).collect();
    let clusters = cluster_check(&points)?;
    Ok(PcaAnalysis { points, projection, clusters })
}
