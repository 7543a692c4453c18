//! Evaluation: copying ratio, BLEU, chrF, paired bootstrap and PCA.

mod bleu;
mod bootstrap;
mod chrf;
mod copying;
mod pca;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu, bleu_from_stats, sentence_stats as bleu_sentence_stats, BleuStats, MAX_ORDER};
pub use bootstrap::{paired_bootstrap, BootstrapResult, Interval, MIN_SAMPLES};
pub use chrf::{chrf, chrf_from_stats, chrf_with, sentence_stats as chrf_sentence_stats, ChrfStats};
pub use copying::{copied_tokens, copying_ratio, copying_ratio_with, token_accuracy, CopyCounting};
pub use pca::{centroid, pca_project, symmetric_eigen, Projection};

use crate::error::{invalid, Result};
use crate::lang::Direction;

/// Scores for one translation direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionScores {
    pub direction: String,
    pub bleu: f64,
    pub chrf: f64,
    pub copying_ratio: f64,
    /// Position-wise token accuracy against gold, when gold exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl DirectionScores {
    /// Scores `hyps` against `refs`, with `sources` for the copying ratio.
    pub fn compute<S: AsRef<str>>(
        direction: Direction,
        sources: &[Vec<S>],
        hyps: &[Vec<S>],
        refs: &[Vec<S>],
    ) -> Result<Self> {
        let words = |c: &[Vec<S>]| -> Vec<Vec<String>> {
            c.iter().map(|s| s.iter().map(|w| w.as_ref().to_string()).collect()).collect()
        };
        let (src, hyp, rf) = (words(sources), words(hyps), words(refs));
        Ok(DirectionScores {
            direction: direction.label(),
            bleu: bleu(&hyp, &rf)?,
            chrf: chrf(&hyp, &rf)?,
            copying_ratio: copying_ratio(&src, &hyp)?,
            accuracy: Some(token_accuracy(&hyp, &rf)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    pub category: String,
    pub x: f64,
    pub y: f64,
}

/// Centroid-clustering summary of a first-step PCA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCheck {
    pub centroids: Vec<(String, [f64; 2])>,
    /// Outputs cluster by output language.
    pub correct: bool,
    /// Outputs cluster by input language (the copying signature).
    pub reversed: bool,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Evaluate the clustering predicates over points labelled by direction.
pub fn cluster_check(points: &[PcaPoint]) -> Result<ClusterCheck> {
    let coords: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    let labels: Vec<&str> = points.iter().map(|p| p.category.as_str()).collect();
    let mut centroids = Vec::new();
    for d in [Direction::SRC2SRC, Direction::SRC2TGT, Direction::TGT2SRC, Direction::TGT2TGT] {
        let label = d.label();
        match centroid(&coords, &labels, &label.as_str()) {
            Some(c) => centroids.push((label, c)),
            None => return invalid(format!("no points for category {label}")),
        }
    }
    let [ss, st, ts, tt] = [centroids[0].1, centroids[1].1, centroids[2].1, centroids[3].1];
    Ok(ClusterCheck {
        correct: dist(st, tt) < dist(st, ss) && dist(ts, ss) < dist(ts, tt),
        reversed: dist(st, ss) < dist(st, tt) && dist(ts, tt) < dist(ts, ss),
        centroids,
    })
}

/// Write points as a tab-separated table with a header row.
pub fn write_pca_tsv(path: &Path, points: &[PcaPoint]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "category\tx\ty")?;
    for p in points {
        writeln!(f, "{}\t{}\t{}", p.category, p.x, p.y)?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionBootstrap {
    pub direction: String,
    pub result: BootstrapResult,
    /// System A beats B at the 95% level.
    pub significant: bool,
}

/// One evaluation record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub directions: Vec<DirectionScores>,
    /// Paired comparison against a second system, per direction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bootstrap: Vec<DirectionBootstrap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<Vec<PcaPoint>>,
}

impl MetricsReport {
    pub fn direction(&self, d: Direction) -> Option<&DirectionScores> {
        let label = d.label();
        self.directions.iter().find(|s| s.direction == label)
    }

    /// Checks the range invariants of every field.
    pub fn validate(&self) -> Result<()> {
        for s in &self.directions {
            if !(0.0..=1.0).contains(&s.copying_ratio) {
                return invalid(format!("copying ratio {} out of range", s.copying_ratio));
            }
            if !(0.0..=100.0).contains(&s.bleu) || !(0.0..=100.0).contains(&s.chrf) {
                return invalid(format!("scores out of range for {}", s.direction));
            }
        }
        for b in &self.bootstrap {
            for iv in [&b.result.a, &b.result.b] {
                if !(iv.lower <= iv.point && iv.point <= iv.upper) {
                    return invalid("bootstrap interval does not contain its point estimate");
                }
            }
        }
        Ok(())
    }
}
