//! Generate the distant and similar cipher pairs and show the gold mapping.

use unmt::corpus::{build_vocab, gen_synthetic_pair, SyntheticSpec};
use unmt::Lang;

fn main() -> unmt::Result<()> {
    for (name, spec) in [("distant", SyntheticSpec::distant()), ("similar", SyntheticSpec::similar())] {
        let spec = SyntheticSpec { train_sentences: 500, test_sentences: 20, ..spec };
        let pair = gen_synthetic_pair(&spec)?;
        let vocab = build_vocab([&pair.train_src, &pair.train_tgt])?;
        println!("{name}: |V| = {}, {} training sentences per side", vocab.len(), pair.train_src.len());
        let src = &pair.test.src[0];
        println!("  src  {}", src.join(" "));
        println!("  gold {}", pair.test.tgt[0].join(" "));
        println!("  back {}", pair.translate(&pair.test.tgt[0], Lang::Tgt).join(" "));
    }
    Ok(())
}
