use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{invalid, Result};

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics for corpus BLEU; sums over sentences.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, o: BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += o.matches[n];
            self.totals[n] += o.totals[n];
        }
        self.hyp_len += o.hyp_len;
        self.ref_len += o.ref_len;
    }
}

fn ngrams<T: Eq + Hash>(s: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if s.len() >= n {
        for w in s.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

pub fn sentence_stats<T: Eq + Hash>(hyp: &[T], reference: &[T]) -> BleuStats {
    let mut st = BleuStats { hyp_len: hyp.len(), ref_len: reference.len(), ..Default::default() };
    for n in 1..=MAX_ORDER {
        let h = ngrams(hyp, n);
        let r = ngrams(reference, n);
        st.totals[n - 1] = hyp.len().saturating_sub(n - 1);
        st.matches[n - 1] = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    }
    st
}

/// BLEU in `[0, 100]` from aggregated statistics.
///
/// Orders 2–4 use add-one smoothing on both matches and totals; unigram
/// precision is unsmoothed, so zero unigram overlap scores 0.
pub fn bleu_from_stats(st: &BleuStats) -> f64 {
    let mut log_sum = 0.0;
    for n in 0..MAX_ORDER {
        let (m, t) = if n == 0 {
            (st.matches[0] as f64, st.totals[0] as f64)
        } else {
            (st.matches[n] as f64 + 1.0, st.totals[n] as f64 + 1.0)
        };
        if m == 0.0 || t == 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
    }
    let bp = if st.hyp_len == 0 {
        0.0
    } else if st.hyp_len < st.ref_len {
        (1.0 - st.ref_len as f64 / st.hyp_len as f64).exp()
    } else {
        1.0
    };
    (100.0 * bp * (log_sum / MAX_ORDER as f64).exp()).clamp(0.0, 100.0)
}

/// Corpus-level BLEU over token sequences.
pub fn bleu<T, H, R>(hyps: &[H], refs: &[R]) -> Result<f64>
where
    T: Eq + Hash,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    if hyps.len() != refs.len() {
        return invalid(format!("{} hypotheses vs {} references", hyps.len(), refs.len()));
    }
    if refs.is_empty() {
        return invalid("bleu needs at least one reference");
    }
    let mut st = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        st += sentence_stats(h.as_ref(), r.as_ref());
    }
    Ok(bleu_from_stats(&st))
}
