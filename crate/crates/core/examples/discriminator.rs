//! Train the language discriminator on detached first-step outputs of a
//! fixed model and watch its loss fall.

use unmt::autodiff::{AdamConfig, AdamState, Graph};
use unmt::corpus::Batch;
use unmt::discriminator::Discriminator;
use unmt::seq2seq::{ModelConfig, Seq2Seq};
use unmt::Lang;

fn main() -> unmt::Result<()> {
    let config =
        ModelConfig { d_model: 16, enc_layers: 1, dec_layers: 1, heads: 2, ffn: 32, max_len: 12, dropout: 0.0 };
    let model = Seq2Seq::new(config, 40, 1)?;
    let src: Vec<Vec<u32>> = (0..16).map(|i| vec![4 + i % 18, 5 + i % 7, 6]).collect();
    let tgt: Vec<Vec<u32>> = (0..16).map(|i| vec![22 + i % 18, 23, 24 + i % 5]).collect();
    let batch = |s: &[Vec<u32>], l| Batch::from_sentences(&s.iter().map(Vec::as_slice).collect::<Vec<_>>(), l);
    let outputs = [
        (model.first_step_outputs(&batch(&src, Lang::Src), Lang::Src)?, Lang::Src),
        (model.first_step_outputs(&batch(&tgt, Lang::Tgt), Lang::Tgt)?, Lang::Tgt),
    ];

    let mut ld = Discriminator::new(model.d_model(), 2);
    let mut opt = AdamState::new(AdamConfig { lr: 1e-3, ..AdamConfig::default() }, ld.params());
    for step in 0..=200 {
        let mut total = 0.0;
        ld.params_mut().zero_grad();
        for (out, lang) in &outputs {
            let mut g = Graph::new();
            let l = ld.loss(&mut g, out, *lang, false)?;
            total += g.scalar(l);
            ld.params_mut().accumulate(&g.backward(l)?);
        }
        opt.step(ld.params_mut())?;
        if step % 50 == 0 {
            let acc = (ld.accuracy(&outputs[0].0, Lang::Src)? + ld.accuracy(&outputs[1].0, Lang::Tgt)?) / 2.0;
            println!("step {step:3}  loss {:.4}  accuracy {acc:.2}", total / 2.0);
        }
    }
    Ok(())
}
