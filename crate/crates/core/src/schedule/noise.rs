use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seq2seq::vocab::UNK;

/// Corruption applied to DAE inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Maximum displacement of the local shuffle.
    pub shuffle_window: usize,
    pub p_drop: f64,
    pub p_blank: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { shuffle_window: 3, p_drop: 0.1, p_blank: 0.1 }
    }
}

impl NoiseConfig {
    pub const NONE: NoiseConfig = NoiseConfig { shuffle_window: 0, p_drop: 0.0, p_blank: 0.0 };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_drop", self.p_drop), ("p_blank", self.p_blank)] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

/// Local shuffle, then word drop, then blanking to UNK.
///
/// The shuffle sorts positions by `i + U[0, k+1)`, which moves no token more
/// than `k` places. Drop and blank draw one uniform per token each.
pub fn apply_noise<R: Rng + ?Sized>(sentence: &[u32], noise: &NoiseConfig, rng: &mut R) -> Vec<u32> {
    let k = noise.shuffle_window;
    let mut out: Vec<u32> = if k == 0 {
        sentence.to_vec()
    } else {
        let mut keys: Vec<(f64, usize)> =
            (0..sentence.len()).map(|i| (i as f64 + rng.random::<f64>() * (k as f64 + 1.0), i)).collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        keys.into_iter().map(|(_, i)| sentence[i]).collect()
    };
    if noise.p_drop > 0.0 {
        out.retain(|_| rng.random::<f64>() >= noise.p_drop);
    }
    if noise.p_blank > 0.0 {
        for t in &mut out {
            if rng.random::<f64>() < noise.p_blank {
                *t = UNK;
            }
        }
    }
    out
}
