//! Greedy and beam decoding from an untrained model, with sequence scores.

use unmt::corpus::Batch;
use unmt::seq2seq::{normalized_score, sequence_logprob, ModelConfig, Seq2Seq};
use unmt::Lang;

fn main() -> unmt::Result<()> {
    let config =
        ModelConfig { d_model: 16, enc_layers: 1, dec_layers: 1, heads: 2, ffn: 32, max_len: 12, dropout: 0.0 };
    let model = Seq2Seq::new(config, 30, 5)?;
    let sents: [&[u32]; 2] = [&[5, 9, 12, 7], &[20, 21]];
    let src = Batch::from_sentences(&sents, Lang::Src);

    let greedy = model.translate_greedy(&src, Lang::Tgt, 8)?;
    let beam1 = model.translate_beam(&src, Lang::Tgt, 8, 1)?;
    let beam5 = model.translate_beam(&src, Lang::Tgt, 8, 5)?;
    assert_eq!(greedy, beam1);

    let mut scorer = model.scorer(&src, Lang::Tgt)?;
    for i in 0..src.len() {
        let score = |s: &[u32], sc: &mut _| normalized_score(sequence_logprob(sc, i, s), s.len());
        println!("sentence {i}");
        println!("  greedy {:?} score {:.4}", greedy[i], score(&greedy[i], &mut scorer));
        println!("  beam 5 {:?} score {:.4}", beam5[i], score(&beam5[i], &mut scorer));
    }
    Ok(())
}
