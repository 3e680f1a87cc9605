//! Supervised contrastive loss with the exact analytic gradient through the
//! projection and its L2 normalization.
//!
//! For anchor i with positives P(i) over unit vectors z:
//!
//! ```text
//! L = sum_i -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p / tau)
//!                                         / sum_{a != i} exp(z_i.z_a / tau) )
//! ```
//!
//! Anchors without a positive are skipped; their rows still appear in the
//! denominators of other anchors.

use crate::error::{Error, Result};
use crate::shaper::{ContrastiveBatch, ProjectionModel};

/// Returns the total loss over active anchors and the gradient with respect
/// to the projection weights (row-major `dim_out x dim_in`).
pub fn supcon_loss(batch: &ContrastiveBatch, model: &ProjectionModel) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    let dim_in = model.dim_in();
    let dim_out = model.dim_out();
    let tau = model.tau();

    // Project and normalize all rows, keeping raw norms for the backward
    // pass.
    let mut z = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for x in batch.base_vectors() {
        if x.len() != dim_in {
            return Err(Error::DimensionMismatch(format!(
                "batch row has dim {}, projection expects {dim_in}",
                x.len()
            )));
        }
        let y = model.project_raw(x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Invalid("zero-norm projection in batch".into()));
        }
        z.push(y.iter().map(|v| v / norm).collect::<Vec<f64>>());
        norms.push(norm);
    }

    // Pairwise similarities.
    let sim = |i: usize, j: usize| -> f64 { z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum() };

    let active: Vec<(usize, Vec<usize>)> = batch
        .anchors()
        .iter()
        .map(|&i| (i, batch.positives_of(i)))
        .filter(|(_, positives)| !positives.is_empty())
        .collect();
    if active.is_empty() {
        return Err(Error::NoPositives);
    }

    let mut loss = 0.0;
    let mut grad_z = vec![vec![0.0f64; dim_out]; n];

    for (i, positives) in &active {
        let i = *i;
        // Log-sum-exp over all other rows, stabilized by the max.
        let sims: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, sim(i, j))).collect();
        let max_sim = sims
            .iter()
            .map(|&(_, s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = sims.iter().map(|&(_, s)| ((s - max_sim) / tau).exp()).sum();
        let lse = max_sim / tau + denom.ln();

        let inv_p = 1.0 / positives.len() as f64;
        for &p in positives {
            loss += -(sim(i, p) / tau - lse) * inv_p;
        }

        for &(j, s) in &sims {
            let softmax = ((s - max_sim) / tau).exp() / denom;
            let is_positive = if positives.contains(&j) { inv_p } else { 0.0 };
            let g = (softmax - is_positive) / tau;
            for d in 0..dim_out {
                grad_z[i][d] += g * z[j][d];
                grad_z[j][d] += g * z[i][d];
            }
        }
    }

    // Back through the normalization and the linear map.
    let mut grad_w = vec![0.0f64; dim_out * dim_in];
    for i in 0..n {
        let dot: f64 = grad_z[i].iter().zip(&z[i]).map(|(g, zi)| g * zi).sum();
        for d in 0..dim_out {
            let grad_y = (grad_z[i][d] - dot * z[i][d]) / norms[i];
            for (k, &x) in batch.base_vectors()[i].iter().enumerate() {
                grad_w[d * dim_in + k] += grad_y * x;
            }
        }
    }

    Ok((loss, grad_w))
}
