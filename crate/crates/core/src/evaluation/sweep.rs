use serde::{Deserialize, Serialize};

use crate::corpus::DialogueSession;
use crate::model::Model;
use crate::training::{train, TrainConfig, TrainError};

use super::evaluate;

/// The hyper-parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Look-ahead horizon.
    K,
    /// Decoder/look-ahead state size; embedding and goal sizes follow it.
    HiddenDim,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(SweepParam::K),
            "hidden" | "hidden_dim" | "dim" => Ok(SweepParam::HiddenDim),
            _ => Err(format!("unknown sweep parameter `{s}` (expected K or hidden_dim)")),
        }
    }
}

impl SweepParam {
    pub fn apply(self, base: &TrainConfig, value: usize) -> TrainConfig {
        let mut c = base.clone();
        match self {
            SweepParam::K => c.model.lookahead_k = value,
            SweepParam::HiddenDim => {
                c.model.hidden = value;
                c.model.embed_dim = value;
                c.model.goal_hidden = value;
            }
        }
        c
    }
}

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: usize,
    pub achieved_ratio: f64,
    pub avg_turns: f64,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Trains one model per value on `corpus` and evaluates each against
/// `simulator` with the same evaluation seed.
pub fn sweep(
    param: SweepParam,
    values: &[usize],
    base: &TrainConfig,
    corpus: &[DialogueSession],
    simulator: &Model,
    n_sessions: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, TrainError> {
    if values.is_empty() {
        return Err(TrainError::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let config = param.apply(base, value);
        let out = train(corpus, &config)?;
        let report = evaluate(&out.model, simulator, n_sessions, seed)?;
        let best_val_loss = out.metrics[out.best_epoch - 1].val_loss;
        log::info!("{param:?}={value}: achieved {:.3}, turns {:.2}", report.achieved_ratio, report.avg_turns);
        rows.push(SweepRow {
            param,
            value,
            achieved_ratio: report.achieved_ratio,
            avg_turns: report.avg_turns,
            best_epoch: out.best_epoch,
            best_val_loss,
        });
    }
    Ok(rows)
}

/// The table as tab-separated text with a header line.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("param\tvalue\tachieved_ratio\tavg_turns\tbest_epoch\tbest_val_loss\n");
    for r in rows {
        let name = match r.param {
            SweepParam::K => "K",
            SweepParam::HiddenDim => "hidden_dim",
        };
        out.push_str(&format!(
            "{name}\t{}\t{:.4}\t{:.3}\t{}\t{:.4}\n",
            r.value, r.achieved_ratio, r.avg_turns, r.best_epoch, r.best_val_loss
        ));
    }
    out
}
