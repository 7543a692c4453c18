use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PerDirection, StopReason, TrainConfig, TrainData, Trainer};
use crate::corpus::ParallelSet;
use crate::error::{invalid, Result};
use crate::eval::{evaluate, EvalOptions};
use crate::lang::Lang;
use crate::metrics::MetricsReport;
use crate::seq2seq::ModelConfig;

/// One row of the λ comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_ld: f64,
    pub bleu: PerDirection,
    pub copying_ratio: PerDirection,
    pub epochs: usize,
    pub stop: StopReason,
    pub report: MetricsReport,
}

impl SweepRow {
    pub const HEADER: &'static str = "lambda_ld\tbleu_src2tgt\tbleu_tgt2src\tcopy_src2tgt\tcopy_tgt2src\tepochs";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.2}\t{:.2}\t{:.4}\t{:.4}\t{}",
            self.lambda_ld,
            self.bleu.src2tgt,
            self.bleu.tgt2src,
            self.copying_ratio.src2tgt,
            self.copying_ratio.tgt2src,
            self.epochs
        )
    }
}

/// Trains one model per λ from identical seeds and data, then scores each on
/// `test`. With `out`, each run writes into `out/lambda_<λ>/`.
pub fn sweep(
    base: &TrainConfig,
    model: &ModelConfig,
    lambdas: &[f64],
    data: &TrainData,
    test: &ParallelSet,
    eval: &EvalOptions,
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return invalid(format!("lambda values must be >= 0, got {bad}"));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let config = TrainConfig { lambda_ld: lambda, ..base.clone() };
        let mut trainer = Trainer::new(config, model.clone(), data.clone())?;
        let dir = out.map(|d| d.join(format!("lambda_{lambda}")));
        let stop = trainer.fit(dir.as_deref())?;
        let report = evaluate(&trainer.model, &data.vocab, test, eval)?;
        let mut bleu = PerDirection::default();
        let mut copy = PerDirection::default();
        for from in Lang::BOTH {
            let s = report.direction(super::direction_from(from)).expect("both directions evaluated");
            match from {
                Lang::Src => (bleu.src2tgt, copy.src2tgt) = (s.bleu, s.copying_ratio),
                Lang::Tgt => (bleu.tgt2src, copy.tgt2src) = (s.bleu, s.copying_ratio),
            }
        }
        rows.push(SweepRow { lambda_ld: lambda, bleu, copying_ratio: copy, epochs: trainer.state.epoch, stop, report });
    }
    Ok(rows)
}
