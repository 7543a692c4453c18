#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unmt::metrics::{
    bleu, chrf, cluster_check, copying_ratio, paired_bootstrap, pca_project, symmetric_eigen, token_accuracy,
    MetricsReport, PcaPoint,
};

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
    lines.iter().map(|l| words(l)).collect()
}

// Reference values from sacrebleu 2.6.0: BLEU(tokenize="none", add-k smoothing,
// k = 1) and CHRF(char_order=6, beta=2, whitespace=True).
#[rustfmt::skip]
const ORACLE: &[(&[&str], &[&str], f64, f64)] = &[
    (&["the cat sat"], &["the cat sat down"], 71.65313105737896, 67.43033470401954),
    (&["a b c d e"], &["a b c d e"], 100.00000000000004, 100.0),
    (&["x y z"], &["a b c"], 0.0, 8.0),
    (&["ein mann hut"], &["a man hat"], 0.0, 30.95451554799898),
    (&["the the the the"], &["the cat is on the mat"], 23.04318198457308, 24.18001185882009),
    (&["a b", "c d e f"], &["a b c", "c d e f g"], 71.65313105737896, 63.333910933980256),
    (&["one"], &["one two three four five"], 1.8315638888734187, 10.961110684973537),
    (&["s1 s2 s3 s4 s5 s6"], &["s6 s5 s4 s3 s2 s1"], 30.213753973567687, 60.277014652014635),
    (&["t3 t9 t12", "t1 t1 t2", "t7"], &["t3 t9 t12 t4", "t1 t2", "t7 t8"], 71.28052926708362, 66.46555412094372),
    (&["w1 w0 w1", "w1", "w6 w0 w9 w1 w3 w9 w0 w9 w1"], &["w6 w0 w1", "w1", "w6 w0 w9 w1 w3 w9 w0 w9 w9"], 82.42367502646057, 90.10013135013133),
    (&["w1 w6 w7 w9 w0 w9", "w1"], &["w1 w8 w1 w9 w0 w9", "w1 w9 w4 w8"], 28.319415510892387, 40.69583546008115),
    (&["w2 w5 w6 w0 w1 w1", "w7 w1 w0 w0 w5"], &["w2 w7 w6 w0 w1 w8", "w7 w1 w0 w4 w9"], 37.55249907854889, 68.28003015048202),
    (&["w2", "w6 w7 w1 w2 w5 w6", "w3 w0 w7 w9", "w2 w8 w9 w0"], &["w3", "w6 w7 w1 w2 w7 w6 w8", "w3 w0 w7 w9", "w2 w8 w9 w0 w7 w8"], 64.0471609467183, 72.30094751211924),
    (&["w0 w9"], &["w0 w9"], 100.00000000000004, 100.0),
    (&["w3 w5"], &["w3 w9"], 70.71067811865471, 54.333333333333336),
    (&["w7 w7", "w1 w8 w4", "w5 w2 w8 w0 w8 w9", "w5 w0 w5 w5 w4 w3"], &["w1 w7", "w1 w5 w4", "w5 w2 w8 w0 w8 w4 w1 w4 w8", "w0 w0 w4 w7 w4 w3"], 39.14013717843587, 52.15671145488129),
    (&["w7 w1 w1 w3", "w6 w5 w1", "w2 w0 w9"], &["w7 w9 w9 w0", "w6 w5 w1", "w2 w0 w2"], 49.492320038397644, 60.99647266313932),
    (&["w1 w8 w6 w3 w3", "w5 w8 w8 w6 w2 w2 w2", "w8 w0", "w7 w7 w0 w8 w8 w4 w3 w2 w9"], &["w2 w8 w8 w2 w0 w0", "w5 w4 w8 w6 w2 w0 w5 w7 w9 w8", "w8 w0", "w7 w8 w0 w1 w7 w5 w9 w8 w9"], 15.544248798669903, 42.54482863720839),
    (&["w3 w1", "w7 w2 w6", "w6 w2 w6"], &["w3 w6", "w5 w2 w4", "w3 w2 w6"], 48.549177170732335, 51.26984126984128),
    (&["w5", "w6", "w1 w1 w3 w4 w1 w4 w4 w0"], &["w5", "w6", "w1 w1 w3 w1 w1 w4 w4 w0 w2"], 54.182204258059606, 74.06384103638348),
];

#[test]
fn bleu_and_chrf_match_reference_values() {
    assert_eq!(ORACLE.len(), 20);
    for (h, r, b, c) in ORACLE {
        let (h, r) = (corpus(h), corpus(r));
        let got_b = bleu(&h, &r).unwrap();
        let got_c = chrf(&h, &r).unwrap();
        assert!((got_b - b).abs() < 1e-6, "bleu {got_b} vs {b} for {h:?}");
        assert!((got_c - c).abs() < 1e-4, "chrf {got_c} vs {c} for {h:?}");
    }
}

#[test]
fn bleu_edge_cases() {
    let h = corpus(&["a b c d e f"]);
    assert!((bleu(&h, &h).unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(bleu(&corpus(&["x y"]), &corpus(&["a b"])).unwrap(), 0.0);
    assert!(bleu(&corpus(&["a"]), &corpus(&["a", "b"])).is_err());
    let empty: Vec<Vec<String>> = vec![vec![]];
    assert_eq!(bleu(&empty, &corpus(&["a b"])).unwrap(), 0.0);
}

#[test]
fn chrf_edge_cases() {
    let h = corpus(&["abc def", "g"]);
    assert!((chrf(&h, &h).unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(chrf(&corpus(&["abc"]), &corpus(&["xyz"])).unwrap(), 0.0);
    assert!(chrf(&corpus(&["a"]), &corpus(&["a", "b"])).is_err());
}

fn brute_copy(src: &[Vec<u8>], hyp: &[Vec<u8>]) -> f64 {
    let mut copied = 0;
    let mut total = 0;
    for (s, h) in src.iter().zip(hyp) {
        let mut pool = s.clone();
        for t in h {
            total += 1;
            if let Some(p) = pool.iter().position(|x| x == t) {
                pool.swap_remove(p);
                copied += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        copied as f64 / total as f64
    }
}

#[test]
fn copying_ratio_matches_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut src = Vec::new();
    let mut hyp = Vec::new();
    for _ in 0..1000 {
        let s: Vec<u8> = (0..rng.random_range(1..12)).map(|_| rng.random_range(0..15)).collect();
        let h: Vec<u8> = (0..rng.random_range(0..12)).map(|_| rng.random_range(0..15)).collect();
        src.push(s);
        hyp.push(h);
    }
    assert_eq!(copying_ratio(&src, &hyp).unwrap(), brute_copy(&src, &hyp));
    for i in 0..src.len() {
        assert_eq!(copying_ratio(&src[i..=i], &hyp[i..=i]).unwrap(), brute_copy(&src[i..=i], &hyp[i..=i]));
    }
}

#[test]
fn token_accuracy_examples() {
    let r = corpus(&["a b c", "d"]);
    assert_eq!(token_accuracy(&r, &r).unwrap(), 1.0);
    assert_eq!(token_accuracy(&corpus(&["a x c", "e f"]), &r).unwrap(), 0.4);
}

fn sentences() -> impl Strategy<Value = Vec<Vec<u8>>> {
    prop::collection::vec(prop::collection::vec(0u8..8, 0..9), 1..12)
}

proptest! {
    #[test]
    fn copying_ratio_is_bounded_and_permutation_invariant(
        pairs in prop::collection::vec((prop::collection::vec(0u8..8, 1..9), prop::collection::vec(0u8..8, 0..9)), 1..15),
        seed in any::<u64>(),
    ) {
        let (src, hyp): (Vec<_>, Vec<_>) = pairs.iter().cloned().unzip();
        let r = copying_ratio(&src, &hyp).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let mut idx: Vec<usize> = (0..src.len()).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let ps: Vec<_> = idx.iter().map(|&i| src[i].clone()).collect();
        let ph: Vec<_> = idx.iter().map(|&i| hyp[i].clone()).collect();
        prop_assert_eq!(copying_ratio(&ps, &ph).unwrap(), r);
    }

    #[test]
    fn bleu_of_self_is_perfect(h in sentences()) {
        prop_assume!(h.iter().any(|s| !s.is_empty()));
        prop_assert!((bleu(&h, &h).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn bleu_is_order_invariant_and_bounded(h in sentences(), r in sentences(), seed in any::<u64>()) {
        let n = h.len().min(r.len());
        let (h, r) = (&h[..n], &r[..n]);
        let b = bleu(h, r).unwrap();
        prop_assert!((0.0..=100.0).contains(&b));
        let mut idx: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let ph: Vec<_> = idx.iter().map(|&i| h[i].clone()).collect();
        let pr: Vec<_> = idx.iter().map(|&i| r[i].clone()).collect();
        prop_assert!((bleu(&ph, &pr).unwrap() - b).abs() < 1e-9);
    }

    #[test]
    fn chrf_is_bounded(h in prop::collection::vec("[a-d ]{0,12}", 1..6), r in prop::collection::vec("[a-d ]{1,12}", 1..6)) {
        let n = h.len().min(r.len());
        let hw: Vec<Vec<String>> = h[..n].iter().map(|s| words(s)).collect();
        let rw: Vec<Vec<String>> = r[..n].iter().map(|s| words(s)).collect();
        let c = chrf(&hw, &rw).unwrap();
        prop_assert!((0.0..=100.0).contains(&c));
    }
}

fn random_corpus(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<u32>> {
    (0..n).map(|_| (0..rng.random_range(3..10)).map(|_| rng.random_range(0..20)).collect()).collect()
}

#[test]
fn bootstrap_of_identical_systems_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let refs = random_corpus(&mut rng, 60);
    let hyps: Vec<Vec<u32>> =
        refs.iter().map(|r| r.iter().map(|&t| if rng.random::<f64>() < 0.3 { 99 } else { t }).collect()).collect();
    let res = paired_bootstrap(&hyps, &hyps, &refs, 1000, 1).unwrap();
    assert_eq!(res.a, res.b);
    // B >= A holds on every resample when the systems are equal.
    assert_eq!(res.p_value, 1.0);
    assert!(res.a.lower <= res.a.point && res.a.point <= res.a.upper);
    assert_eq!(res, paired_bootstrap(&hyps, &hyps, &refs, 1000, 1).unwrap());
}

#[test]
fn bootstrap_detects_dominance() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let refs = random_corpus(&mut rng, 80);
    let good: Vec<Vec<u32>> = refs.clone();
    let bad: Vec<Vec<u32>> =
        refs.iter().map(|r| r.iter().map(|&t| if t % 2 == 0 { 99 } else { t }).collect()).collect();
    let res = paired_bootstrap(&good, &bad, &refs, 1000, 2).unwrap();
    assert!(res.p_value < 0.05, "p = {}", res.p_value);
    assert!(res.a_significantly_better(0.05));
    let rev = paired_bootstrap(&bad, &good, &refs, 1000, 2).unwrap();
    assert!(rev.p_value > 0.95);
}

#[test]
fn bootstrap_rejects_bad_input() {
    let r = vec![vec![1u32, 2]];
    assert!(paired_bootstrap(&r, &r, &[vec![1u32], vec![2]], 1000, 0).is_err());
    assert!(paired_bootstrap(&r, &r, &r, 99, 0).is_err());
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    DMatrix::from_fn(d, d, |i, j| {
        rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64
    })
}

#[test]
fn pca_matches_independent_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows = random_matrix(&mut rng, 50, 16);
    let p = pca_project(&rows).unwrap();
    let eig = SymmetricEigen::new(covariance(&rows));
    let mut order: Vec<usize> = (0..16).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    assert!(p.explained[0] >= p.explained[1]);
    for k in 0..2 {
        let lam = eig.eigenvalues[order[k]];
        assert!((p.explained[k] - lam).abs() < 1e-8, "eigenvalue {k}: {} vs {lam}", p.explained[k]);
        let v = eig.eigenvectors.column(order[k]);
        let dot: f64 = (0..16).map(|i| v[i] * p.components[k][i]).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "direction {k} differs, |dot| = {}", dot.abs());
        let first = p.components[k].iter().find(|x| x.abs() > 1e-12).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn eigensolver_reconstructs_its_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rows = random_matrix(&mut rng, 12, 7);
    let c = covariance(&rows);
    let flat: Vec<f64> = (0..7).flat_map(|i| (0..7).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect();
    let (vals, vecs) = symmetric_eigen(&flat, 7).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            let r: f64 = (0..7).map(|k| vecs[i * 7 + k] * vals[k] * vecs[j * 7 + k]).sum();
            assert!((r - c[(i, j)]).abs() < 1e-10);
        }
    }
    assert!(vals.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn pca_preserves_distances_within_a_plane() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 10;
    let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: Vec<f64> = u.iter().map(|x| x / nu).collect();
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let proj: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
    let v: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - proj * b).collect();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v: Vec<f64> = v.iter().map(|x| x / nv).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let pts: Vec<(f64, f64)> = (0..30).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0))).collect();
    let rows: Vec<Vec<f64>> =
        pts.iter().map(|&(a, b)| (0..d).map(|i| offset[i] + a * u[i] + b * v[i]).collect()).collect();
    let p = pca_project(&rows).unwrap();
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let orig = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
            let c = (p.coords[i], p.coords[j]);
            let got = ((c.0[0] - c.1[0]).powi(2) + (c.0[1] - c.1[1]).powi(2)).sqrt();
            assert!((orig - got).abs() < 1e-8);
        }
    }
}

#[test]
fn pca_degenerate_inputs() {
    let line: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
    let p = pca_project(&line).unwrap();
    assert!(p.coords.iter().all(|c| c[1] == 0.0));
    assert_eq!(p.explained[1], 0.0);
    let flat = vec![vec![1.0, 2.0, 3.0]; 5];
    let p = pca_project(&flat).unwrap();
    assert!(p.coords.iter().all(|c| *c == [0.0, 0.0]));
    assert_eq!(p.explained, [0.0, 0.0]);
    assert!(pca_project(&[vec![1.0, 2.0]]).is_err());
    assert!(pca_project(&[vec![1.0], vec![2.0]]).is_err());
}

#[test]
fn pca_is_invariant_to_row_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows = random_matrix(&mut rng, 20, 5);
    let p = pca_project(&rows).unwrap();
    let mut idx: Vec<usize> = (0..20).collect();
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
    let shuffled: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
    let q = pca_project(&shuffled).unwrap();
    for (k, &i) in idx.iter().enumerate() {
        for c in 0..2 {
            assert!((q.coords[k][c] - p.coords[i][c]).abs() < 1e-9);
        }
    }
}

fn cluster(category: &str, x: f64, y: f64) -> Vec<PcaPoint> {
    (0..3).map(|i| PcaPoint { category: category.into(), x: x + 0.01 * i as f64, y }).collect()
}

#[test]
fn cluster_predicates() {
    let by_output: Vec<PcaPoint> = [
        cluster("src2src", 0.0, 0.0),
        cluster("tgt2src", 0.2, 0.0),
        cluster("src2tgt", 5.0, 0.0),
        cluster("tgt2tgt", 5.2, 0.0),
    ]
    .concat();
    let c = cluster_check(&by_output).unwrap();
    assert!(c.correct && !c.reversed);
    let by_input: Vec<PcaPoint> = [
        cluster("src2src", 0.0, 0.0),
        cluster("src2tgt", 0.2, 0.0),
        cluster("tgt2src", 5.0, 0.0),
        cluster("tgt2tgt", 5.2, 0.0),
    ]
    .concat();
    let c = cluster_check(&by_input).unwrap();
    assert!(c.reversed && !c.correct);
    assert!(cluster_check(&cluster("src2src", 0.0, 0.0)).is_err());
}

#[test]
fn report_validation_catches_out_of_range() {
    let mut r = MetricsReport::default();
    r.directions.push(unmt::metrics::DirectionScores {
        direction: "src2tgt".into(),
        bleu: 10.0,
        chrf: 20.0,
        copying_ratio: 0.5,
        accuracy: None,
    });
    assert!(r.validate().is_ok());
    r.directions[0].copying_ratio = 1.5;
    assert!(r.validate().is_err());
}
