//! Stop after two epochs, resume from the checkpoint and compare with an
//! uninterrupted run.

use unmt::corpus::{build_vocab, gen_synthetic_pair, SyntheticSpec};
use unmt::schedule::{TrainConfig, TrainData, Trainer};
use unmt::seq2seq::ModelConfig;

fn main() -> unmt::Result<()> {
    let pair = gen_synthetic_pair(&SyntheticSpec { vocab_size: 20, train_sentences: 100, ..SyntheticSpec::distant() })?;
    let vocab = build_vocab([&pair.train_src, &pair.train_tgt])?;
    let data = TrainData::new(vocab, &pair.train_src, &pair.train_tgt, &pair.valid)?;
    let model = ModelConfig { d_model: 16, enc_layers: 1, dec_layers: 1, heads: 2, ffn: 32, ..ModelConfig::default() };
    let config = TrainConfig { max_epochs: 4, lambda_ld: 1.0, ..TrainConfig::default() };

    let mut straight = Trainer::new(config.clone(), model.clone(), data.clone())?;
    straight.fit(None)?;

    let dir = std::env::temp_dir().join(format!("unmt-resume-{}", std::process::id()));
    let mut first = Trainer::new(TrainConfig { max_epochs: 2, ..config }, model, data.clone())?;
    first.fit(Some(&dir))?;
    let (_, _, last) = Trainer::paths(&dir);
    let mut resumed = Trainer::resume(&last, data)?;
    resumed.config.max_epochs = 4;
    resumed.fit(Some(&dir))?;

    let same = resumed
        .model
        .params()
        .tensors()
        .iter()
        .zip(straight.model.params().tensors())
        .all(|(a, b)| a.data() == b.data());
    println!("resumed at epoch 2, finished at epoch {}", resumed.state.epoch);
    println!("logs identical: {}", resumed.state.log == straight.state.log);
    println!("parameters bitwise identical: {same}");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
