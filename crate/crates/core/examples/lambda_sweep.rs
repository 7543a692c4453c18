//! A short λ sweep over a tiny distant pair, printed as TSV.

use unmt::corpus::{build_vocab, gen_synthetic_pair, SyntheticSpec};
use unmt::eval::EvalOptions;
use unmt::schedule::{sweep, SweepRow, TrainConfig, TrainData};
use unmt::seq2seq::ModelConfig;

fn main() -> unmt::Result<()> {
    let pair = gen_synthetic_pair(&SyntheticSpec {
        vocab_size: 20,
        train_sentences: 200,
        test_sentences: 30,
        ..SyntheticSpec::distant()
    })?;
    let vocab = build_vocab([&pair.train_src, &pair.train_tgt])?;
    let data = TrainData::new(vocab, &pair.train_src, &pair.train_tgt, &pair.valid)?;
    let model = ModelConfig { d_model: 16, enc_layers: 1, dec_layers: 1, heads: 2, ffn: 32, ..ModelConfig::default() };
    let mut base = TrainConfig { max_epochs: 3, ..TrainConfig::default() };
    base.adam.lr = 1e-3;
    base.ld_adam.lr = 1e-3;
    let eval = EvalOptions { beam: 1, bootstrap_samples: 200, pca_sentences: 30, ..EvalOptions::default() };

    let rows = sweep(&base, &model, &[0.0, 0.1, 1.0], &data, &pair.test, &eval, None)?;
    println!("{}", SweepRow::HEADER);
    for r in rows {
        println!("{}", r.to_tsv());
    }
    Ok(())
}
