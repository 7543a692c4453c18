//! The three denoising corruptions applied to one sentence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unmt::schedule::{apply_noise, NoiseConfig};

fn main() {
    let sentence: Vec<u32> = (10..22).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let settings = [
        ("shuffle k=3", NoiseConfig { shuffle_window: 3, p_drop: 0.0, p_blank: 0.0 }),
        ("drop 0.1", NoiseConfig { shuffle_window: 0, p_drop: 0.1, p_blank: 0.0 }),
        ("blank 0.1", NoiseConfig { shuffle_window: 0, p_drop: 0.0, p_blank: 0.1 }),
        ("all", NoiseConfig::default()),
    ];
    println!("{:>12}  {sentence:?}", "input");
    for (name, noise) in settings {
        println!("{name:>12}  {:?}", apply_noise(&sentence, &noise, &mut rng));
    }
}
