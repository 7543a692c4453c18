mod common;

use common::{batch_of, random_sentences, rng, tiny_config};
use rand::Rng;
use unmt::autodiff::{Graph, Tensor};
use unmt::seq2seq::vocab::{BOS, EOS, PAD};
use unmt::seq2seq::{
    generate_beam, generate_greedy, normalized_score, sequence_logprob, ModelConfig, Seq2Seq, StepScorer,
};
use unmt::Lang;

const V: usize = 24;

fn model(seed: u64) -> Seq2Seq {
    Seq2Seq::new(tiny_config(), V, seed).unwrap()
}

fn encode(m: &Seq2Seq, ids: &[Vec<u32>], lang: Lang) -> Tensor {
    let mut g = Graph::new();
    let mv = m.bind(&mut g, true);
    let enc = m.encode(&mut g, &mv, ids, lang, None).unwrap();
    g.detach(enc.states)
}

/// Teacher-forced logits and hidden states for decoder `inputs`.
fn teacher_forced(m: &Seq2Seq, src: &[Vec<u32>], inputs: &[Vec<u32>]) -> (Tensor, Tensor, Tensor) {
    let mut g = Graph::new();
    let mv = m.bind(&mut g, true);
    let enc = m.encode(&mut g, &mv, src, Lang::Src, None).unwrap();
    let mem = m.cross_memory(&mut g, &mv, &enc);
    let dec = m.decode_teacher_forced(&mut g, &mv, &mem, inputs, Lang::Src, Lang::Tgt, None).unwrap();
    (g.detach(dec.logits), g.detach(dec.hidden), dec.first_step.values)
}

#[test]
fn identical_sentences_give_identical_states() {
    let m = model(1);
    let s = vec![5, 9, 11, 7];
    let states = encode(&m, &[s.clone(), s.clone(), s], Lang::Src);
    let len = 4;
    for t in 0..len {
        assert_eq!(states.row(t), states.row(len + t));
        assert_eq!(states.row(t), states.row(2 * len + t));
    }
}

#[test]
fn batch_permutation_permutes_states() {
    let m = model(2);
    let mut r = rng(3);
    let rows: Vec<Vec<u32>> = (0..4).map(|_| (0..5).map(|_| r.random_range(4..V as u32)).collect()).collect();
    let perm = [2, 0, 3, 1];
    let permuted: Vec<Vec<u32>> = perm.iter().map(|&i| rows[i].clone()).collect();
    let a = encode(&m, &rows, Lang::Tgt);
    let b = encode(&m, &permuted, Lang::Tgt);
    for (new, &old) in perm.iter().enumerate() {
        for t in 0..5 {
            let (x, y) = (a.row(old * 5 + t), b.row(new * 5 + t));
            let diff = x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "row {old} position {t} differs by {diff}");
        }
    }
}

#[test]
fn language_embedding_is_live() {
    for seed in 0..5 {
        let m = model(seed);
        let ids = vec![vec![4, 8, 15, 16], vec![23, 10, 6, PAD]];
        let a = encode(&m, &ids, Lang::Src);
        let b = encode(&m, &ids, Lang::Tgt);
        assert!(a.max_abs_diff(&b) > 0.0);
    }
}

#[test]
fn padding_is_masked_out_of_attention() {
    let m = model(4);
    let short = encode(&m, &[vec![6, 7, 8]], Lang::Src);
    let padded = encode(&m, &[vec![6, 7, 8, PAD, PAD]], Lang::Src);
    for t in 0..3 {
        let diff = short.row(t).iter().zip(padded.row(t)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }
}

#[test]
fn out_of_range_ids_and_missing_bos_are_errors() {
    let m = model(5);
    let mut g = Graph::new();
    let mv = m.bind(&mut g, true);
    assert!(m.encode(&mut g, &mv, &[vec![4, V as u32]], Lang::Src, None).is_err());
    let enc = m.encode(&mut g, &mv, &[vec![4, 5]], Lang::Src, None).unwrap();
    let mem = m.cross_memory(&mut g, &mv, &enc);
    assert!(m.decode_teacher_forced(&mut g, &mv, &mem, &[vec![6, 7]], Lang::Src, Lang::Tgt, None).is_err());
    assert!(m.generate_greedy(&mut g, &mv, &batch_of(&[vec![4, 5]], Lang::Src), Lang::Tgt, 0).is_err());
}

#[test]
fn invalid_model_configs_are_rejected() {
    let bad = [
        ModelConfig { heads: 3, ..tiny_config() },
        ModelConfig { d_model: 0, ..tiny_config() },
        ModelConfig { enc_layers: 0, ..tiny_config() },
        ModelConfig { dropout: 1.0, ..tiny_config() },
    ];
    for c in bad {
        assert!(Seq2Seq::new(c, V, 0).is_err());
    }
    assert!(Seq2Seq::new(tiny_config(), 4, 0).is_err());
}

#[test]
fn future_tokens_do_not_change_past_logits() {
    let m = model(6);
    let src = vec![vec![5, 6, 7, 8]];
    let base = vec![BOS, 9, 10, 11, 12, 13];
    let (logits, _, _) = teacher_forced(&m, &src, std::slice::from_ref(&base));
    for t in 1..base.len() {
        let mut edited = base.clone();
        for (k, tok) in edited.iter_mut().enumerate().skip(t + 1) {
            *tok = 4 + (k as u32 * 7) % (V as u32 - 4);
        }
        let (other, _, _) = teacher_forced(&m, &src, &[edited]);
        for p in 0..=t {
            assert_eq!(logits.row(p), other.row(p), "position {p} changed after editing beyond {t}");
        }
    }
}

#[test]
fn logits_are_hidden_times_embedding_transpose() {
    let m = model(7);
    let src = vec![vec![5, 6, 7], vec![8, 9, PAD]];
    let inputs = vec![vec![BOS, 10, 11, 12], vec![BOS, 13, PAD, PAD]];
    let (logits, hidden, _) = teacher_forced(&m, &src, &inputs);
    let e = m.params().by_name("embed.tokens").unwrap();
    let d = m.d_model();
    for r in 0..hidden.rows() {
        for v in 0..V {
            let dot: f64 = (0..d).map(|k| hidden.row(r)[k] * e.row(v)[k]).sum();
            assert!((dot - logits.row(r)[v]).abs() < 1e-10);
        }
    }
}

#[test]
fn first_step_is_position_one_hidden_of_width_d() {
    let m = model(8);
    let mut r = rng(9);
    for n in 1..=4 {
        let src = random_sentences(&mut r, n, 3, 3, V);
        let inputs: Vec<Vec<u32>> = (0..n).map(|_| vec![BOS, 5, 6]).collect();
        let (_, hidden, first) = teacher_forced(&m, &src, &inputs);
        assert_eq!(first.cols(), m.d_model());
        assert_eq!(first.rows(), n);
        for i in 0..n {
            assert_eq!(first.row(i), hidden.row(i * 3));
        }
        let fso = m.first_step_outputs(&batch_of(&src, Lang::Src), Lang::Tgt).unwrap();
        assert!(fso.is_detached());
        assert_eq!(fso.width(), m.d_model());
        assert_eq!(fso.input_lang, Lang::Src);
        assert_eq!(fso.output_lang, Lang::Tgt);
    }
}

#[test]
fn parameter_census_has_one_vocabulary_matrix() {
    let m = model(10);
    let d = m.d_model();
    let vocab_shaped: Vec<&str> = m.params().iter().filter(|(_, t)| t.shape().contains(&V)).map(|(n, _)| n).collect();
    assert_eq!(vocab_shaped, vec!["embed.tokens"]);
    assert_eq!(m.params().by_name("embed.tokens").unwrap().shape(), &[V, d]);
    assert_eq!(m.params().by_name("embed.lang").unwrap().shape(), &[2, d]);
    for (name, _) in m.params().iter() {
        assert!(name.starts_with("embed.") || name.starts_with("enc.") || name.starts_with("dec."), "{name}");
    }
    let enc = m.encoder_param_names();
    let dec = m.decoder_param_names();
    assert!(enc.contains(&"embed.tokens") && dec.contains(&"embed.tokens"));
    assert!(enc.iter().all(|n| !n.starts_with("dec.")));
    assert!(dec.iter().all(|n| !n.starts_with("enc.")));
}

#[test]
fn mutating_the_embedding_moves_inputs_and_outputs() {
    let m = model(11);
    let src = vec![vec![5, 6, 7]];
    let inputs = vec![vec![BOS, 8]];
    let (logits, _, _) = teacher_forced(&m, &src, &inputs);
    let states = encode(&m, &src, Lang::Src);

    let mut out_only = m.clone();
    out_only.params_mut().by_name_mut("embed.tokens").unwrap().data_mut()[20 * m.d_model()] += 0.5;
    let (l2, _, _) = teacher_forced(&out_only, &src, &inputs);
    assert_ne!(logits.row(0)[20], l2.row(0)[20]);
    assert_eq!(states.max_abs_diff(&encode(&out_only, &src, Lang::Src)), 0.0);

    let mut in_row = m.clone();
    in_row.params_mut().by_name_mut("embed.tokens").unwrap().data_mut()[5 * m.d_model()] += 0.5;
    assert!(states.max_abs_diff(&encode(&in_row, &src, Lang::Src)) > 0.0);
    let (l3, _, _) = teacher_forced(&in_row, &src, &inputs);
    assert_ne!(logits.row(0)[5], l3.row(0)[5]);
}

/// Every decoder state collapses to one vector that points at EOS.
fn rig_eos(m: &mut Seq2Seq) {
    let d = m.d_model();
    let dir: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let p = m.params_mut();
    p.by_name_mut("dec.ln.g").unwrap().data_mut().fill(0.0);
    p.by_name_mut("dec.ln.b").unwrap().data_mut().copy_from_slice(&dir);
    let e = p.by_name_mut("embed.tokens").unwrap();
    for (k, x) in e.data_mut()[EOS as usize * d..(EOS as usize + 1) * d].iter_mut().enumerate() {
        *x = 1e3 * dir[k];
    }
}

#[test]
fn rigged_eos_model_emits_only_eos() {
    let mut m = model(12);
    rig_eos(&mut m);
    let mut r = rng(13);
    let src = batch_of(&random_sentences(&mut r, 5, 2, 6, V), Lang::Src);
    let greedy = m.translate_greedy(&src, Lang::Tgt, 8).unwrap();
    let beam = m.translate_beam(&src, Lang::Tgt, 8, 5).unwrap();
    let mut g = Graph::new();
    let mv = m.bind(&mut g, false);
    let (linked, first) = m.generate_greedy(&mut g, &mv, &src, Lang::Tgt, 8).unwrap();
    for out in [greedy, beam, linked] {
        assert!(out.iter().all(|s| s == &[EOS]), "{out:?}");
    }
    assert!(!first.is_detached());
}

#[test]
fn output_length_never_exceeds_max_len() {
    let mut r = rng(14);
    for seed in 0..6 {
        let m = model(100 + seed);
        let src = batch_of(&random_sentences(&mut r, 6, 1, 8, V), Lang::Tgt);
        for max_len in [1, 2, 5, 9] {
            for out in [
                m.translate_greedy(&src, Lang::Src, max_len).unwrap(),
                m.translate_beam(&src, Lang::Src, max_len, 3).unwrap(),
            ] {
                assert!(out.iter().all(|s| !s.is_empty() && s.len() <= max_len));
                assert!(out.iter().all(|s| s.iter().all(|&t| t != PAD && t != BOS)));
            }
        }
    }
}

#[test]
fn beam_one_is_bitwise_greedy() {
    let mut r = rng(15);
    for seed in 0..8 {
        let m = model(200 + seed);
        let src = batch_of(&random_sentences(&mut r, 7, 1, 8, V), Lang::Src);
        let greedy = m.translate_greedy(&src, Lang::Tgt, 10).unwrap();
        assert_eq!(greedy, m.translate_beam(&src, Lang::Tgt, 10, 1).unwrap());
        let mut g = Graph::new();
        let mv = m.bind(&mut g, false);
        let (linked, _) = m.generate_greedy(&mut g, &mv, &src, Lang::Tgt, 10).unwrap();
        assert_eq!(greedy, linked);
    }
}

#[test]
fn beam_score_dominates_greedy() {
    let mut r = rng(16);
    for seed in 0..8 {
        let m = model(300 + seed);
        let src = batch_of(&random_sentences(&mut r, 5, 2, 7, V), Lang::Src);
        let greedy = m.translate_greedy(&src, Lang::Tgt, 10).unwrap();
        let beam = m.translate_beam(&src, Lang::Tgt, 10, 5).unwrap();
        let mut scorer = m.scorer(&src, Lang::Tgt).unwrap();
        for i in 0..src.len() {
            let gs = normalized_score(sequence_logprob(&mut scorer, i, &greedy[i]), greedy[i].len());
            let bs = normalized_score(sequence_logprob(&mut scorer, i, &beam[i]), beam[i].len());
            assert!(bs >= gs - 1e-12, "seed {seed} row {i}: beam {bs} < greedy {gs}");
        }
    }
}

#[test]
fn beam_zero_is_an_error() {
    let m = model(17);
    let src = batch_of(&[vec![5, 6]], Lang::Src);
    assert!(m.translate_beam(&src, Lang::Tgt, 5, 0).is_err());
}

const A: u32 = 4;
const B: u32 = 5;
const TOY_V: usize = 6;

/// Three-step toy distribution: two content tokens, then a forced EOS.
struct Toy;

impl StepScorer for Toy {
    fn vocab_size(&self) -> usize {
        TOY_V
    }

    fn next_log_probs(&mut self, _rows: &[usize], prefixes: &[Vec<u32>]) -> Vec<Vec<f64>> {
        prefixes
            .iter()
            .map(|p| {
                let mut probs = [0.0; TOY_V];
                match &p[1..] {
                    [] => (probs[A as usize], probs[B as usize]) = (0.6, 0.4),
                    [A] => (probs[A as usize], probs[B as usize]) = (0.55, 0.45),
                    [B] => (probs[A as usize], probs[B as usize]) = (0.9, 0.1),
                    _ => probs[EOS as usize] = 1.0,
                }
                probs.iter().map(|x: &f64| x.ln()).collect()
            })
            .collect()
    }
}

/// Best finished path by normalized score, over every token sequence.
fn enumerate_best<S: StepScorer>(s: &mut S, max_len: usize) -> Vec<u32> {
    let mut best: Option<(Vec<u32>, f64)> = None;
    let mut frontier: Vec<Vec<u32>> = vec![vec![]];
    for len in 1..=max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for tok in 0..s.vocab_size() as u32 {
                let mut seq = prefix.clone();
                seq.push(tok);
                let lp = sequence_logprob(s, 0, &seq);
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                if tok == EOS || len == max_len {
                    let score = normalized_score(lp, seq.len());
                    if best.as_ref().is_none_or(|b| score > b.1) {
                        best = Some((seq, score));
                    }
                } else {
                    next.push(seq);
                }
            }
        }
        frontier = next;
    }
    best.unwrap().0
}

#[test]
fn beam_two_finds_the_enumerated_optimum_where_greedy_fails() {
    let oracle = enumerate_best(&mut Toy, 3);
    assert_eq!(oracle, vec![B, A, EOS]);
    let greedy = generate_greedy(&mut Toy, 1, 3).unwrap();
    assert_eq!(greedy, vec![vec![A, A, EOS]]);
    assert_eq!(generate_beam(&mut Toy, 1, 3, 2).unwrap(), vec![oracle]);
    assert_eq!(generate_beam(&mut Toy, 1, 3, 1).unwrap(), greedy);
}

#[test]
fn small_model_seq_loss_gradcheck() {
    let m = model(18);
    let mut r = rng(19);
    let src = batch_of(&random_sentences(&mut r, 2, 2, 4, V), Lang::Src);
    let targets = random_sentences(&mut r, 2, 2, 4, V);
    let loss_of = |m: &Seq2Seq, frozen: bool| {
        let mut g = Graph::new();
        let mv = m.bind(&mut g, frozen);
        let (l, _) = m.seq_loss(&mut g, &mv, &src, &targets, Lang::Tgt, None).unwrap();
        (g.scalar(l), g.backward(l).ok())
    };
    let (_, grads) = loss_of(&m, false);
    let grads = grads.unwrap();
    let analytic: Vec<(usize, Vec<f64>)> =
        grads.params_of(unmt::seq2seq::MODEL_SET).map(|(i, g)| (i, g.to_vec())).collect();
    let mut work = m.clone();
    let eps = 1e-5;
    for _ in 0..60 {
        let (p, ga) = &analytic[r.random_range(0..analytic.len())];
        let j = r.random_range(0..ga.len());
        let orig = work.params().get(*p).data()[j];
        work.params_mut().get_mut(*p).data_mut()[j] = orig + eps;
        let up = loss_of(&work, true).0;
        work.params_mut().get_mut(*p).data_mut()[j] = orig - eps;
        let down = loss_of(&work, true).0;
        work.params_mut().get_mut(*p).data_mut()[j] = orig;
        let num = (up - down) / (2.0 * eps);
        assert!(common::rel_err(ga[j], num) < 1e-4, "{} [{j}]: {} vs {num}", m.params().names()[*p], ga[j]);
    }
}
