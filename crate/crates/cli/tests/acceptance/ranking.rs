//! Boosted ensemble sanity and class-imbalance weighting.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocrpost_core::ranker::boost::{fit, predict_stages};
use ocrpost_core::ranker::tree::{RegressionTree, TreeParams};
use ocrpost_core::ranker::TrainingSet;

const ROWS: usize = 500;
const STEPS: usize = 16;

fn weighted_mse(pred: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    pred.iter().zip(y).zip(w).map(|((p, t), w)| w * (p - t) * (p - t)).sum::<f64>() / total
}

fn weighted_linear(pred: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    pred.iter().zip(y).zip(w).map(|((p, t), w)| w * (p - t).abs()).sum::<f64>() / total
}

/// 500 evenly spaced points on [0, 1) over 16 equal-width steps with
/// seeded uniform random levels: more plateaus than a depth-3 tree has leaves.
fn step_fixture() -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let levels: Vec<f64> = (0..STEPS).map(|_| rng.random()).collect();
    let x: Vec<Vec<f64>> = (0..ROWS).map(|i| vec![(i as f64 + 0.5) / ROWS as f64]).collect();
    let y = x
        .iter()
        .map(|r| levels[((r[0] * STEPS as f64) as usize).min(STEPS - 1)])
        .collect();
    (x, y)
}

pub fn boosting_sanity() -> Result<String, String> {
    let (x, y) = step_fixture();
    let w = vec![1.0; ROWS];
    let params = TreeParams {
        max_depth: 3,
        min_samples_leaf: 2,
    };

    let tree = RegressionTree::fit(&x, &y, &w, params);
    let tree_pred: Vec<f64> = x.iter().map(|r| tree.predict(r)).collect();
    let tree_mse = weighted_mse(&tree_pred, &y, &w);

    let (one, _) = fit(&x, &y, &w, 1, params);
    let bitwise = x
        .iter()
        .zip(&tree_pred)
        .all(|(r, p)| predict_stages(&one, r).to_bits() == p.to_bits());

    let (stages, report) = fit(&x, &y, &w, 100, params);
    let mut curve = Vec::with_capacity(stages.len());
    for t in 1..=stages.len() {
        let pred: Vec<f64> = x.iter().map(|r| predict_stages(&stages[..t], r)).collect();
        curve.push((weighted_linear(&pred, &y, &w), weighted_mse(&pred, &y, &w)));
    }
    let rises: Vec<usize> = curve
        .windows(2)
        .enumerate()
        .filter(|(_, c)| c[1].0 > c[0].0)
        .map(|(i, _)| i + 2)
        .collect();
    let final_mse = curve.last().map_or(f64::NAN, |c| c.1);
    let ratio = final_mse / tree_mse;

    let detail = format!(
        "{} stages (stop: {:?}); ensemble MSE {final_mse:.5} = {ratio:.3}x single tree {tree_mse:.5}; \
         weighted loss rises at stage(s) {rises:?}; single stage equals tree bit-for-bit: {bitwise}",
        stages.len(),
        report.stop
    );
    if bitwise && rises.is_empty() && ratio <= 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn imbalance_weighting() -> Result<String, String> {
    let mut rows = Vec::with_capacity(1000);
    for e in 0..100 {
        rows.push((e, format!("good{e}"), vec![1.0, e as f64], 1u8));
        for k in 0..9 {
            rows.push((e, format!("bad{e}_{k}"), vec![0.0, k as f64], 0u8));
        }
    }
    let set = TrainingSet::from_rows(vec!["a".into(), "b".into()], rows).map_err(|e| e.to_string())?;
    let pos: Vec<f64> = set.rows.iter().filter(|r| r.label == 1).map(|r| r.weight).collect();
    let neg_ok = set.rows.iter().filter(|r| r.label == 0).all(|r| r.weight == 1.0);
    if set.negatives != 900 || pos.len() != 100 || !pos.iter().all(|&w| w == 9.0) || !neg_ok {
        return Err(format!("positive weights {:?}", &pos[..pos.len().min(3)]));
    }
    Ok("900 negatives / 100 positives: every positive weighs 9.0, every negative 1.0".into())
}
