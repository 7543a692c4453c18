//! Project the four first-step output categories to 2-D and check how the
//! centroids cluster.

use unmt::corpus::{build_vocab, gen_synthetic_pair, SyntheticSpec};
use unmt::eval::{first_step_pca, EvalOptions};
use unmt::seq2seq::{ModelConfig, Seq2Seq};

fn main() -> unmt::Result<()> {
    let pair = gen_synthetic_pair(&SyntheticSpec {
        vocab_size: 30,
        train_sentences: 50,
        test_sentences: 40,
        ..SyntheticSpec::distant()
    })?;
    let vocab = build_vocab([&pair.train_src, &pair.train_tgt])?;
    let config = ModelConfig { d_model: 16, enc_layers: 1, dec_layers: 1, heads: 2, ffn: 32, ..ModelConfig::default() };
    let model = Seq2Seq::new(config, vocab.len(), 4)?;

    let pca = first_step_pca(&model, &vocab, &pair.test, &EvalOptions::default())?;
    println!("explained variance: {:.4} {:.4}", pca.projection.explained[0], pca.projection.explained[1]);
    for (label, c) in &pca.clusters.centroids {
        println!("{label:8} centroid ({:+.4}, {:+.4})", c[0], c[1]);
    }
    println!("clustered by output language: {}", pca.clusters.correct);
    println!("clustered by input language:  {}", pca.clusters.reversed);
    Ok(())
}
