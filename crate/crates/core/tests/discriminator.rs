mod common;

use common::{batch_of, random_sentences, rng, tiny_config};
use unmt::autodiff::{grad_check, Graph, Tensor};
use unmt::discriminator::{Discriminator, LD_SET};
use unmt::seq2seq::{FirstStepOutput, Seq2Seq, MODEL_SET};
use unmt::Lang;

const LN2: f64 = std::f64::consts::LN_2;

fn outputs(values: Tensor) -> FirstStepOutput {
    FirstStepOutput { var: None, values, input_lang: Lang::Src, output_lang: Lang::Src }
}

fn random_outputs(n: usize, d: usize, seed: u64) -> FirstStepOutput {
    outputs(Tensor::randn(&[n, d], 1.0, &mut rng(seed)))
}

fn loss_value(ld: &Discriminator, out: &FirstStepOutput, label: Lang) -> f64 {
    let mut g = Graph::new();
    let l = ld.loss(&mut g, out, label, true).unwrap();
    g.scalar(l)
}

/// Identity hidden layers; logit(src) = 100 · x₀, logit(tgt) = 0.
fn hand_set(d: usize) -> Discriminator {
    let mut ld = Discriminator::new(d, 0);
    let p = ld.params_mut();
    for w in ["ld.w1", "ld.w2"] {
        let t = p.by_name_mut(w).unwrap().data_mut();
        t.fill(0.0);
        for i in 0..d {
            t[i * d + i] = 1.0;
        }
    }
    for b in ["ld.b1", "ld.b2", "ld.b3"] {
        p.by_name_mut(b).unwrap().data_mut().fill(0.0);
    }
    let w3 = p.by_name_mut("ld.w3").unwrap().data_mut();
    w3.fill(0.0);
    w3[0] = 100.0;
    ld
}

#[test]
fn shapes_follow_the_embedding_width() {
    let ld = Discriminator::new(6, 1);
    let shape = |n: &str| ld.params().by_name(n).unwrap().shape().to_vec();
    assert_eq!(shape("ld.w1"), [6, 6]);
    assert_eq!(shape("ld.w2"), [6, 6]);
    assert_eq!(shape("ld.w3"), [6, 2]);
    assert_eq!(ld.params().len(), 6);
    assert_eq!(ld.logits(&random_outputs(3, 6, 2)).unwrap().shape(), &[3, 2]);
}

#[test]
fn zero_output_layer_gives_uniform_probabilities() {
    let ld = Discriminator::with_zero_output(8, 3);
    let out = random_outputs(5, 8, 4);
    assert!(ld.logits(&out).unwrap().data().iter().all(|&x| x == 0.0));
    for label in Lang::BOTH {
        assert!((loss_value(&ld, &out, label) - LN2).abs() < 1e-15);
    }
}

#[test]
fn confident_logits_give_near_zero_loss() {
    let mut ld = Discriminator::with_zero_output(4, 5);
    ld.params_mut().by_name_mut("ld.b3").unwrap().data_mut().copy_from_slice(&[60.0, -60.0]);
    let out = random_outputs(3, 4, 6);
    assert!(loss_value(&ld, &out, Lang::Src) <= 1e-12);
    assert!((loss_value(&ld, &out, Lang::Tgt) - 120.0).abs() < 1e-9);
}

#[test]
fn batch_loss_is_the_mean_of_row_losses() {
    let d = 4;
    let ld = hand_set(d);
    let mut v = vec![0.0; 2 * d];
    v[d] = 1.0;
    let out = outputs(Tensor::new(vec![2, d], v).unwrap());
    let logits = ld.logits(&out).unwrap();
    assert_eq!(logits.row(0), &[0.0, 0.0]);
    assert_eq!(logits.row(1), &[100.0, 0.0]);
    assert!((loss_value(&ld, &out, Lang::Src) - 0.346574).abs() < 1e-6);
    assert!((loss_value(&ld, &out, Lang::Src) - LN2 / 2.0).abs() < 1e-15);
}

#[test]
fn row_permutation_permutes_logits_and_keeps_the_loss() {
    let ld = Discriminator::new(8, 7);
    let out = random_outputs(5, 8, 8);
    let perm = [3, 0, 4, 1, 2];
    let rows: Vec<f64> = perm.iter().flat_map(|&i| out.values.row(i).to_vec()).collect();
    let permuted = outputs(Tensor::new(vec![5, 8], rows).unwrap());
    let (a, b) = (ld.logits(&out).unwrap(), ld.logits(&permuted).unwrap());
    for (new, &old) in perm.iter().enumerate() {
        assert_eq!(a.row(old), b.row(new));
    }
    assert!((loss_value(&ld, &out, Lang::Tgt) - loss_value(&ld, &permuted, Lang::Tgt)).abs() < 1e-14);
}

#[test]
fn logits_are_deterministic_and_finite() {
    let ld = Discriminator::new(8, 9);
    let out = random_outputs(4, 8, 10);
    let a = ld.logits(&out).unwrap();
    assert_eq!(a.data(), ld.logits(&out).unwrap().data());
    assert!(a.data().iter().all(|x| x.is_finite()));
    assert_eq!(Discriminator::new(8, 9).logits(&out).unwrap().data(), a.data());
}

#[test]
fn width_mismatch_is_an_error() {
    let ld = Discriminator::new(8, 11);
    let out = random_outputs(2, 6, 12);
    assert!(ld.logits(&out).is_err());
    let mut g = Graph::new();
    assert!(ld.loss(&mut g, &out, Lang::Src, false).is_err());
}

#[test]
fn input_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let ld = Discriminator::new(6, 100 + seed);
        let x = Tensor::randn(&[3, 6], 1.0, &mut rng(200 + seed));
        let err = grad_check(
            |g, v| {
                let out = FirstStepOutput {
                    var: Some(v[0]),
                    values: g.detach(v[0]),
                    input_lang: Lang::Tgt,
                    output_lang: Lang::Tgt,
                };
                ld.loss(g, &out, Lang::Tgt, true).unwrap()
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn accuracy_counts_rows_on_the_label_side() {
    let d = 4;
    let mut ld = hand_set(d);
    ld.params_mut().by_name_mut("ld.w3").unwrap().data_mut()[3] = 100.0;
    let mut v = vec![0.0; 3 * d];
    v[0] = 1.0;
    v[d + 1] = 1.0;
    v[2 * d] = 2.0;
    let out = outputs(Tensor::new(vec![3, d], v).unwrap());
    assert!((ld.accuracy(&out, Lang::Src).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!((ld.accuracy(&out, Lang::Tgt).unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

fn model_first_step(g: &mut Graph, m: &Seq2Seq, frozen: bool) -> FirstStepOutput {
    let mut r = rng(13);
    let sents = random_sentences(&mut r, 4, 2, 5, 20);
    let mv = m.bind(g, frozen);
    let (_, first) = m.seq_loss(g, &mv, &batch_of(&sents, Lang::Src), &sents, Lang::Src, None).unwrap();
    first
}

#[test]
fn detached_outputs_send_gradient_only_to_the_discriminator() {
    let m = Seq2Seq::new(tiny_config(), 20, 14).unwrap();
    let ld = Discriminator::new(m.d_model(), 15);
    let mut g = Graph::new();
    let first = model_first_step(&mut g, &m, false).detach();
    let l = ld.loss(&mut g, &first, Lang::Src, false).unwrap();
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.params_of(MODEL_SET).count(), 0);
    let ld_grads: Vec<_> = grads.params_of(LD_SET).collect();
    assert_eq!(ld_grads.len(), ld.params().len());
    for (i, gr) in ld_grads {
        assert!(gr.iter().any(|&x| x != 0.0), "{} has zero gradient", ld.params().names()[i]);
    }
}

#[test]
fn frozen_discriminator_sends_gradient_only_to_the_model() {
    let m = Seq2Seq::new(tiny_config(), 20, 16).unwrap();
    let ld = Discriminator::new(m.d_model(), 17);
    let mut g = Graph::new();
    let first = model_first_step(&mut g, &m, false);
    assert!(!first.is_detached());
    let l = ld.loss(&mut g, &first, Lang::Tgt, true).unwrap();
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.params_of(LD_SET).count(), 0);
    let touched: Vec<&str> = grads
        .params_of(MODEL_SET)
        .filter(|(_, gr)| gr.iter().any(|&x| x != 0.0))
        .map(|(i, _)| m.params().names()[i].as_str())
        .collect();
    assert!(touched.iter().any(|n| n.starts_with("enc.")), "{touched:?}");
    assert!(touched.iter().any(|n| n.starts_with("dec.")), "{touched:?}");
    assert!(touched.contains(&"embed.tokens"));
}
