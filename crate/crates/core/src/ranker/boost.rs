//! AdaBoost.R2 with linear loss over [`RegressionTree`] base learners.
//!
//! Each stage fits a tree to the current row weights, scores rows by
//! `|pred - y| / max |pred - y|`, and stops once the weighted mean loss
//! reaches 0.5. Rows are reweighted by `beta^(1 - loss)` with
//! `beta = L / (1 - L)`; prediction is the weighted median of the stage
//! outputs with stage weights `ln(1 / beta)`, taking the lower median on
//! ties. Reweighting is deterministic: no bootstrap resampling.

use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, SortedColumns, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub weight: f64,
    pub tree: RegressionTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the full stage budget.
    Budget,
    /// A stage fit the data exactly.
    PerfectFit,
    /// Weighted mean loss reached 0.5.
    LossAboveHalf,
    /// All feature rows identical; a single stage was fitted.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostReport {
    pub stop: StopReason,
    /// Weighted mean linear loss of each fitted stage.
    pub stage_losses: Vec<f64>,
}

impl BoostReport {
    pub fn is_warning(&self) -> bool {
        matches!(self.stop, StopReason::Degenerate)
            || (self.stop == StopReason::LossAboveHalf && self.stage_losses.len() == 1)
    }
}

/// Weighted median of `(value, weight)` pairs: the first value in ascending
/// order whose cumulative weight reaches half the total.
pub fn weighted_median(pairs: &mut [(f64, f64)]) -> f64 {
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let half = 0.5 * total;
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= half {
            return v;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}

pub fn predict_stages(stages: &[Stage], x: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = stages.iter().map(|s| (s.tree.predict(x), s.weight)).collect();
    weighted_median(&mut pairs)
}

/// Fit an ensemble. `sample_weights` seed the first stage unchanged; later
/// stages use the updated weights normalized to sum 1.
pub fn fit(
    x: &[Vec<f64>],
    y: &[f64],
    sample_weights: &[f64],
    n_stages: usize,
    tree: TreeParams,
) -> (Vec<Stage>, BoostReport) {
    let n = x.len();
    let sorted = SortedColumns::new(x);
    let mut weights = sample_weights.to_vec();
    let mut stages = Vec::new();
    let mut losses = Vec::new();

    if x.windows(2).all(|p| p[0] == p[1]) {
        let tree = RegressionTree::fit_sorted(x, y, &weights, tree, &sorted);
        return (
            vec![Stage { weight: 1.0, tree }],
            BoostReport {
                stop: StopReason::Degenerate,
                stage_losses: vec![],
            },
        );
    }

    let mut stop = StopReason::Budget;
    for _ in 0..n_stages.max(1) {
        let fitted = RegressionTree::fit_sorted(x, y, &weights, tree, &sorted);
        let abs_err: Vec<f64> = (0..n).map(|i| (fitted.predict(&x[i]) - y[i]).abs()).collect();
        let max_err = abs_err.iter().copied().fold(0.0, f64::max);
        let total_w: f64 = weights.iter().sum();

        if max_err == 0.0 {
            losses.push(0.0);
            stages.push(Stage {
                weight: 1.0,
                tree: fitted,
            });
            stop = StopReason::PerfectFit;
            break;
        }

        let loss: Vec<f64> = abs_err.iter().map(|e| e / max_err).collect();
        let mean_loss = weights.iter().zip(&loss).map(|(w, l)| w * l).sum::<f64>() / total_w;
        losses.push(mean_loss);

        if mean_loss >= 0.5 {
            if stages.is_empty() {
                stages.push(Stage {
                    weight: 1.0,
                    tree: fitted,
                });
            }
            stop = StopReason::LossAboveHalf;
            break;
        }

        let beta = mean_loss / (1.0 - mean_loss);
        stages.push(Stage {
            weight: (1.0 / beta).ln(),
            tree: fitted,
        });

        for (w, l) in weights.iter_mut().zip(&loss) {
            *w *= beta.powf(1.0 - l);
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            break;
        }
        for w in &mut weights {
            *w /= sum;
        }
    }

    (
        stages,
        BoostReport {
            stop,
            stage_losses: losses,
        },
    )
}
