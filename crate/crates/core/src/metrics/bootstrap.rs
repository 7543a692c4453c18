use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bleu::{bleu_from_stats, sentence_stats, BleuStats};
use crate::error::{invalid, Result};

pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub point: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub a: Interval,
    pub b: Interval,
    /// Fraction of resamples where system B scores at least as high as A.
    pub p_value: f64,
    pub samples: usize,
}

impl BootstrapResult {
    /// A beats B at the given level (0.05 for 95%).
    pub fn a_significantly_better(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Paired bootstrap resampling over sentence indices with corpus BLEU.
pub fn paired_bootstrap<T, H, R>(
    hyps_a: &[H],
    hyps_b: &[H],
    refs: &[R],
    samples: usize,
    seed: u64,
) -> Result<BootstrapResult>
where
    T: Eq + Hash,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    if hyps_a.len() != refs.len() || hyps_b.len() != refs.len() {
        return invalid(format!("bootstrap lengths differ: {} / {} / {}", hyps_a.len(), hyps_b.len(), refs.len()));
    }
    if refs.is_empty() {
        return invalid("bootstrap needs at least one sentence");
    }
    if samples < MIN_SAMPLES {
        return invalid(format!("bootstrap needs at least {MIN_SAMPLES} samples, got {samples}"));
    }
    let sa: Vec<BleuStats> = hyps_a.iter().zip(refs).map(|(h, r)| sentence_stats(h.as_ref(), r.as_ref())).collect();
    let sb: Vec<BleuStats> = hyps_b.iter().zip(refs).map(|(h, r)| sentence_stats(h.as_ref(), r.as_ref())).collect();
    let total = |s: &[BleuStats]| {
        let mut acc = BleuStats::default();
        s.iter().for_each(|x| acc += *x);
        bleu_from_stats(&acc)
    };
    let (point_a, point_b) = (total(&sa), total(&sb));

    let n = refs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores_a = Vec::with_capacity(samples);
    let mut scores_b = Vec::with_capacity(samples);
    let mut b_wins = 0usize;
    for _ in 0..samples {
        let mut acc_a = BleuStats::default();
        let mut acc_b = BleuStats::default();
        for _ in 0..n {
            let i = rng.random_range(0..n);
            acc_a += sa[i];
            acc_b += sb[i];
        }
        let (a, b) = (bleu_from_stats(&acc_a), bleu_from_stats(&acc_b));
        if b >= a {
            b_wins += 1;
        }
        scores_a.push(a);
        scores_b.push(b);
    }
    Ok(BootstrapResult {
        a: interval(scores_a, point_a),
        b: interval(scores_b, point_b),
        p_value: b_wins as f64 / samples as f64,
        samples,
    })
}

/// 95% percentile interval, widened if needed so it contains the point estimate.
fn interval(mut scores: Vec<f64>, point: f64) -> Interval {
    scores.sort_by(f64::total_cmp);
    let m = scores.len();
    let lo = scores[((0.025 * m as f64).floor() as usize).min(m - 1)];
    let hi = scores[((0.975 * m as f64).ceil() as usize).min(m) - 1];
    Interval { lower: lo.min(point), point, upper: hi.max(point) }
}
