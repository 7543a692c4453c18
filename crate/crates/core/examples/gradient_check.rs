//! Reverse-mode gradients of a small MLP with cross-entropy, checked
//! against central differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unmt::autodiff::{grad_check, Graph, Tensor};

fn main() -> unmt::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::randn(&[4, 5], 1.0, &mut rng);
    let w1 = Tensor::randn(&[5, 6], 0.5, &mut rng);
    let gain = Tensor::randn(&[6], 1.0, &mut rng);
    let bias = Tensor::randn(&[6], 1.0, &mut rng);
    let w2 = Tensor::randn(&[6, 3], 0.5, &mut rng);
    let targets = [Some(0), Some(2), None, Some(1)];

    let loss = |g: &mut Graph, v: &[unmt::autodiff::Var]| {
        let h = g.matmul(v[0], v[1]);
        let h = g.layer_norm(h, v[2], v[3]);
        let h = g.relu(h);
        let logits = g.matmul(h, v[4]);
        g.cross_entropy(logits, &targets)
    };

    let mut g = Graph::new();
    let vars: Vec<_> = [&x, &w1, &gain, &bias, &w2].iter().map(|t| g.constant(t)).collect();
    let l = loss(&mut g, &vars);
    println!("loss = {:.6}", g.scalar(l));

    let err = grad_check(loss, &[x, w1, gain, bias, w2], 1e-5)?;
    println!("max relative error vs finite differences = {err:.2e}");
    Ok(())
}
