use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{invalid, Result};

/// How repeated hypothesis tokens are counted as copies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CopyCounting {
    /// `min(count_hyp(w), count_src(w))` per token type.
    #[default]
    Clipped,
    /// Every hypothesis token that appears anywhere in the source.
    Unclipped,
}

/// Corpus copying ratio: copied hypothesis tokens over all hypothesis tokens.
/// Returns 0 when every hypothesis is empty.
pub fn copying_ratio<T, S, H>(sources: &[S], hyps: &[H]) -> Result<f64>
where
    T: Eq + Hash,
    S: AsRef<[T]>,
    H: AsRef<[T]>,
{
    copying_ratio_with(sources, hyps, CopyCounting::Clipped)
}

pub fn copying_ratio_with<T, S, H>(sources: &[S], hyps: &[H], mode: CopyCounting) -> Result<f64>
where
    T: Eq + Hash,
    S: AsRef<[T]>,
    H: AsRef<[T]>,
{
    if sources.len() != hyps.len() {
        return invalid(format!("{} sources vs {} hypotheses", sources.len(), hyps.len()));
    }
    let mut copied = 0usize;
    let mut total = 0usize;
    for (s, h) in sources.iter().zip(hyps) {
        let (s, h) = (s.as_ref(), h.as_ref());
        total += h.len();
        copied += copied_tokens(s, h, mode);
    }
    Ok(if total == 0 { 0.0 } else { copied as f64 / total as f64 })
}

pub fn copied_tokens<T: Eq + Hash>(src: &[T], hyp: &[T], mode: CopyCounting) -> usize {
    let mut src_counts: HashMap<&T, usize> = HashMap::new();
    for t in src {
        *src_counts.entry(t).or_default() += 1;
    }
    match mode {
        CopyCounting::Unclipped => hyp.iter().filter(|t| src_counts.contains_key(t)).count(),
        CopyCounting::Clipped => {
            let mut hyp_counts: HashMap<&T, usize> = HashMap::new();
            for t in hyp {
                *hyp_counts.entry(t).or_default() += 1;
            }
            hyp_counts.iter().map(|(t, &c)| c.min(src_counts.get(t).copied().unwrap_or(0))).sum()
        }
    }
}

/// Position-wise agreement with the reference, over the longer of the two.
pub fn token_accuracy<T: Eq, H: AsRef<[T]>, R: AsRef<[T]>>(hyps: &[H], refs: &[R]) -> Result<f64> {
    if hyps.len() != refs.len() {
        return invalid(format!("{} hypotheses vs {} references", hyps.len(), refs.len()));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for (h, r) in hyps.iter().zip(refs) {
        let (h, r) = (h.as_ref(), r.as_ref());
        total += h.len().max(r.len());
        hits += h.iter().zip(r).filter(|(a, b)| a == b).count();
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Vec<&str> {
        x.split(' ').collect()
    }

    #[test]
    fn pure_copy_and_disjoint() {
        let src = vec![s("a b c"), s("d e")];
        assert_eq!(copying_ratio(&src, &src).unwrap(), 1.0);
        let hyp = vec![s("x y"), s("z")];
        assert_eq!(copying_ratio(&src, &hyp).unwrap(), 0.0);
    }

    #[test]
    fn hand_counted_example() {
        let src = vec![s("ein mann hut")];
        let hyp = vec![s("a mann in hut")];
        assert_eq!(copying_ratio(&src, &hyp).unwrap(), 0.5);
    }

    #[test]
    fn clipping_bounds_repeats() {
        let src = vec![s("a b")];
        let hyp = vec![s("a a a a")];
        assert_eq!(copying_ratio(&src, &hyp).unwrap(), 0.25);
        assert_eq!(copying_ratio_with(&src, &hyp, CopyCounting::Unclipped).unwrap(), 1.0);
    }

    #[test]
    fn empty_hypotheses_and_mismatch() {
        let src = vec![s("a")];
        let hyp: Vec<Vec<&str>> = vec![vec![]];
        assert_eq!(copying_ratio(&src, &hyp).unwrap(), 0.0);
        assert!(copying_ratio(&src, &[s("a"), s("b")]).is_err());
    }

    #[test]
    fn accuracy_counts_length_mismatch() {
        let refs = vec![s("a b c d")];
        assert_eq!(token_accuracy(&[s("a b x")], &refs).unwrap(), 0.5);
        assert_eq!(token_accuracy(&refs, &refs).unwrap(), 1.0);
    }
}
