//! BLEU, chrF, copying ratio, token accuracy and a paired bootstrap on a
//! handful of hand-written hypotheses.

use unmt::metrics::{bleu, chrf, copying_ratio, paired_bootstrap, token_accuracy};

fn split(lines: &[&str]) -> Vec<Vec<String>> {
    lines.iter().map(|l| l.split_whitespace().map(str::to_string).collect()).collect()
}

fn main() -> unmt::Result<()> {
    let sources = split(&["s1 s2 s3", "s4 s5", "s6 s7 s8 s9"]);
    let refs = split(&["t3 t2 t1", "t5 t4", "t9 t8 t7 t6"]);
    let good = split(&["t3 t2 t1", "t5 t4", "t9 t8 t6 t6"]);
    let copy = split(&["s1 s2 s3", "s4 t4", "s6 s7 s8 s9"]);

    for (name, hyps) in [("good", &good), ("copy", &copy)] {
        println!(
            "{name}: BLEU {:.2}  chrF {:.2}  copying {:.2}  accuracy {:.2}",
            bleu(hyps, &refs)?,
            chrf(hyps, &refs)?,
            copying_ratio(&sources, hyps)?,
            token_accuracy(hyps, &refs)?,
        );
    }
    let b = paired_bootstrap(&good, &copy, &refs, 1000, 1)?;
    println!("bootstrap: good {:.2} [{:.2}, {:.2}], p = {:.3}", b.a.point, b.a.lower, b.a.upper, b.p_value);
    Ok(())
}
