//! Language discriminator over first-step decoder outputs.
//!
//! A two-hidden-layer ReLU network of embedding width with one logit per
//! language. In a DAE step it is trained on detached outputs; in a BT step it
//! is bound frozen and its loss only reaches the translation model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::lang::Lang;
use crate::seq2seq::FirstStepOutput;

/// Parameter-set tag of the discriminator inside a [`Graph`].
pub const LD_SET: u32 = 1;

const LANGS: usize = 2;

#[derive(Clone, Debug)]
pub struct Discriminator {
    width: usize,
    params: ParamSet,
}

impl Discriminator {
    pub fn new(width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new(LD_SET);
        let std = (2.0 / width as f64).sqrt();
        ps.insert("ld.w1", Tensor::randn(&[width, width], std, &mut rng));
        ps.insert("ld.b1", Tensor::zeros(&[width]));
        ps.insert("ld.w2", Tensor::randn(&[width, width], std, &mut rng));
        ps.insert("ld.b2", Tensor::zeros(&[width]));
        ps.insert("ld.w3", Tensor::randn(&[width, LANGS], (1.0 / width as f64).sqrt(), &mut rng));
        ps.insert("ld.b3", Tensor::zeros(&[LANGS]));
        Discriminator { width, params: ps }
    }

    /// Same hidden layers, output layer set to zero.
    pub fn with_zero_output(width: usize, seed: u64) -> Self {
        let mut d = Discriminator::new(width, seed);
        for name in ["ld.w3", "ld.b3"] {
            d.params.by_name_mut(name).unwrap().data_mut().iter_mut().for_each(|x| *x = 0.0);
        }
        d
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check(&self, out: &FirstStepOutput) -> Result<()> {
        if out.width() != self.width {
            return Err(Error::Shape(format!(
                "first-step width {} does not match discriminator width {}",
                out.width(),
                self.width
            )));
        }
        Ok(())
    }

    /// Language logits `batch × 2`. With `frozen`, θ_LD enters as constants.
    pub fn forward(&self, g: &mut Graph, out: &FirstStepOutput, frozen: bool) -> Result<Var> {
        self.check(out)?;
        let p = self.params.bind(g, frozen);
        let x = out.as_var(g);
        let h = g.matmul(x, p[0]);
        let h = g.add_row(h, p[1]);
        let h = g.relu(h);
        let h = g.matmul(h, p[2]);
        let h = g.add_row(h, p[3]);
        let h = g.relu(h);
        let l = g.matmul(h, p[4]);
        Ok(g.add_row(l, p[5]))
    }

    /// Mean over the batch of `-log p(label | LD(out))`.
    pub fn loss(&self, g: &mut Graph, out: &FirstStepOutput, label: Lang, frozen: bool) -> Result<Var> {
        let logits = self.forward(g, out, frozen)?;
        let targets = vec![Some(label.index()); out.batch()];
        Ok(g.cross_entropy(logits, &targets))
    }

    /// Inference-only logits.
    pub fn logits(&self, out: &FirstStepOutput) -> Result<Tensor> {
        let mut g = Graph::new();
        let l = self.forward(&mut g, &out.detach(), true)?;
        Ok(g.detach(l))
    }

    /// Fraction of rows classified as `label`.
    pub fn accuracy(&self, out: &FirstStepOutput, label: Lang) -> Result<f64> {
        let l = self.logits(out)?;
        let hits = (0..l.rows()).filter(|&i| {
            let r = l.row(i);
            (if r[1] > r[0] { Lang::Tgt } else { Lang::Src }) == label
        });
        Ok(hits.count() as f64 / l.rows().max(1) as f64)
    }
}
