use std::collections::HashMap;

use crate::error::{invalid, Result};

pub const CHAR_ORDER: usize = 6;
pub const BETA: f64 = 2.0;

/// Per-order `(hyp n-grams, ref n-grams, matches)`, summed over sentences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChrfStats {
    pub orders: Vec<[usize; 3]>,
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut m = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Statistics for one sentence pair given as plain strings. Whitespace is part
/// of the character stream.
pub fn sentence_stats(hyp: &str, reference: &str, order: usize) -> ChrfStats {
    let h: Vec<char> = hyp.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    let orders = (1..=order)
        .map(|n| {
            let hn = char_ngrams(&h, n);
            let rn = char_ngrams(&r, n);
            let m = hn.iter().map(|(g, &c)| c.min(rn.get(g).copied().unwrap_or(0))).sum();
            let nr: usize = rn.values().sum();
            // Hypothesis n-grams of an order the reference lacks are not counted.
            let nh = if nr == 0 { 0 } else { hn.values().sum() };
            [nh, nr, m]
        })
        .collect();
    ChrfStats { orders }
}

/// chrF from aggregated counts: precision and recall are averaged uniformly
/// over the orders with non-empty hypothesis and reference n-grams, then
/// combined into F_β.
pub fn chrf_from_stats(st: &ChrfStats, beta: f64) -> f64 {
    let mut p = 0.0;
    let mut r = 0.0;
    let mut effective = 0;
    for &[nh, nr, nm] in &st.orders {
        if nh > 0 && nr > 0 {
            p += nm as f64 / nh as f64;
            r += nm as f64 / nr as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    p /= effective as f64;
    r /= effective as f64;
    let b2 = beta * beta;
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + b2) * p * r / (b2 * p + r)
}

/// Corpus chrF over token sequences joined by single spaces.
pub fn chrf<S: AsRef<str>, H: AsRef<[S]>, R: AsRef<[S]>>(hyps: &[H], refs: &[R]) -> Result<f64> {
    chrf_with(hyps, refs, CHAR_ORDER, BETA)
}

pub fn chrf_with<S: AsRef<str>, H: AsRef<[S]>, R: AsRef<[S]>>(
    hyps: &[H],
    refs: &[R],
    order: usize,
    beta: f64,
) -> Result<f64> {
    if hyps.len() != refs.len() {
        return invalid(format!("{} hypotheses vs {} references", hyps.len(), refs.len()));
    }
    let join = |s: &[S]| s.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    let mut total = ChrfStats { orders: vec![[0; 3]; order] };
    for (h, r) in hyps.iter().zip(refs) {
        let st = sentence_stats(&join(h.as_ref()), &join(r.as_ref()), order);
        for (acc, o) in total.orders.iter_mut().zip(&st.orders) {
            for k in 0..3 {
                acc[k] += o[k];
            }
        }
    }
    Ok(chrf_from_stats(&total, beta))
}
