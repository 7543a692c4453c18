//! Train on a small distant pair and print the per-epoch curves.
//!
//! Usage: `cargo run --release --example train -- [lambda] [epochs]`

use unmt::corpus::{build_vocab, gen_synthetic_pair, SyntheticSpec};
use unmt::eval::{evaluate, EvalOptions};
use unmt::schedule::{TrainConfig, TrainData, Trainer};
use unmt::seq2seq::ModelConfig;

fn main() -> unmt::Result<()> {
    let mut args = std::env::args().skip(1);
    let lambda: f64 = args.next().map_or(1.0, |s| s.parse().expect("lambda"));
    let epochs: usize = args.next().map_or(6, |s| s.parse().expect("epochs"));

    let pair = gen_synthetic_pair(&SyntheticSpec {
        vocab_size: 40,
        train_sentences: 800,
        test_sentences: 100,
        ..SyntheticSpec::distant()
    })?;
    let vocab = build_vocab([&pair.train_src, &pair.train_tgt])?;
    let data = TrainData::new(vocab.clone(), &pair.train_src, &pair.train_tgt, &pair.valid)?;
    let model = ModelConfig { d_model: 32, enc_layers: 1, dec_layers: 1, heads: 4, ffn: 64, ..ModelConfig::default() };
    let mut config = TrainConfig { lambda_ld: lambda, max_epochs: epochs, ..TrainConfig::default() };
    config.adam.lr = 1e-3;
    config.ld_adam.lr = 1e-3;

    let mut trainer = Trainer::new(config, model, data)?;
    let stop = trainer.fit(None)?;
    println!("epoch  warmup  dae      bt       copying  bleu");
    for r in &trainer.state.log {
        let bt = r.bt_loss.map_or("-".to_string(), |b| format!("{:.4}", b.mean()));
        println!(
            "{:5}  {:6}  {:.4}  {bt:7}  {:.3}    {:.2}",
            r.epoch,
            r.warmup,
            (r.dae_loss.src + r.dae_loss.tgt) / 2.0,
            r.copying_ratio.mean(),
            r.valid_bleu.mean()
        );
    }
    println!("stopped: {stop:?}");
    let report = evaluate(&trainer.model, &vocab, &pair.test, &EvalOptions { beam: 1, ..EvalOptions::default() })?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
