//! Greedy and beam search over any [`StepScorer`].

use super::model::StepScorer;
use super::vocab::{BOS, EOS};
use crate::error::{invalid, Result};

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding of `n` sentences. Each output ends at EOS (included) or
/// stops at `max_len` tokens.
pub fn generate_greedy<S: StepScorer>(scorer: &mut S, n: usize, max_len: usize) -> Result<Vec<Vec<u32>>> {
    if max_len == 0 {
        return invalid("max_len must be at least 1");
    }
    Ok(greedy_from(scorer, n, max_len, None))
}

/// Greedy decoding, optionally with precomputed first-step log-probabilities.
pub(crate) fn greedy_from<S: StepScorer>(
    scorer: &mut S,
    n: usize,
    max_len: usize,
    first: Option<Vec<Vec<f64>>>,
) -> Vec<Vec<u32>> {
    let mut prefixes: Vec<Vec<u32>> = vec![vec![BOS]; n];
    let mut active: Vec<usize> = (0..n).collect();
    let mut first = first;
    for _ in 0..max_len {
        if active.is_empty() {
            break;
        }
        let scores = match first.take() {
            Some(f) => active.iter().map(|&i| f[i].clone()).collect(),
            None => {
                let ps: Vec<Vec<u32>> = active.iter().map(|&i| prefixes[i].clone()).collect();
                scorer.next_log_probs(&active, &ps)
            }
        };
        let mut still = Vec::with_capacity(active.len());
        for (&i, s) in active.iter().zip(&scores) {
            let tok = argmax(s) as u32;
            prefixes[i].push(tok);
            if tok != EOS {
                still.push(i);
            }
        }
        active = still;
    }
    prefixes.into_iter().map(|mut p| p.split_off(1)).collect()
}

/// Length-normalized log-probability: total log-probability divided by the
/// number of generated tokens.
pub fn normalized_score(logp: f64, len: usize) -> f64 {
    logp / len.max(1) as f64
}

/// Total log-probability the scorer assigns to `seq` for source row `row`.
pub fn sequence_logprob<S: StepScorer>(scorer: &mut S, row: usize, seq: &[u32]) -> f64 {
    let mut prefix = vec![BOS];
    let mut total = 0.0;
    for &t in seq {
        let lp = scorer.next_log_probs(&[row], std::slice::from_ref(&prefix));
        total += lp[0][t as usize];
        prefix.push(t);
    }
    total
}

#[derive(Clone, Debug)]
struct Hyp {
    tokens: Vec<u32>,
    logp: f64,
}

/// Beam search returning, per sentence, the finished hypothesis with the best
/// length-normalized score. Candidates are pruned by cumulative
/// log-probability; ties keep the earlier hypothesis and the lower token id,
/// so `beam == 1` is exactly greedy decoding.
pub fn generate_beam<S: StepScorer>(scorer: &mut S, n: usize, max_len: usize, beam: usize) -> Result<Vec<Vec<u32>>> {
    if beam == 0 {
        return invalid("beam size must be at least 1");
    }
    if max_len == 0 {
        return invalid("max_len must be at least 1");
    }
    let mut alive: Vec<Vec<Hyp>> = vec![vec![Hyp { tokens: vec![BOS], logp: 0.0 }]; n];
    let mut finished: Vec<Vec<(Vec<u32>, f64)>> = vec![Vec::new(); n];
    for step in 0..max_len {
        let mut rows = Vec::new();
        let mut prefixes = Vec::new();
        for (s, hyps) in alive.iter().enumerate() {
            for h in hyps {
                rows.push(s);
                prefixes.push(h.tokens.clone());
            }
        }
        if rows.is_empty() {
            break;
        }
        let scores = scorer.next_log_probs(&rows, &prefixes);
        let mut offset = 0;
        for s in 0..n {
            let hyps = std::mem::take(&mut alive[s]);
            let mut cands: Vec<(f64, usize, u32)> = Vec::new();
            for (hi, h) in hyps.iter().enumerate() {
                for (tok, &lp) in scores[offset + hi].iter().enumerate() {
                    if lp > f64::NEG_INFINITY {
                        cands.push((h.logp + lp, hi, tok as u32));
                    }
                }
            }
            offset += hyps.len();
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let last = step + 1 == max_len;
            for &(logp, hi, tok) in cands.iter().take(beam) {
                let mut tokens = hyps[hi].tokens.clone();
                tokens.push(tok);
                if tok == EOS || last {
                    let gen = tokens.split_off(1);
                    let len = gen.len();
                    finished[s].push((gen, normalized_score(logp, len)));
                } else {
                    alive[s].push(Hyp { tokens, logp });
                }
            }
        }
    }
    Ok(finished
        .into_iter()
        .map(|f| {
            let mut best: Option<(Vec<u32>, f64)> = None;
            for (seq, score) in f {
                if best.as_ref().is_none_or(|b| score > b.1) {
                    best = Some((seq, score));
                }
            }
            best.map(|b| b.0).unwrap_or_default()
        })
        .collect())
}
