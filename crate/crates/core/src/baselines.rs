//! Comparison methods plugged into the shared swarm loop: FedProx changes the local
//! gradient, FedNova changes the aggregation rule, Mixup changes the local data.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Matrix, ParamVector};
use crate::rng::StreamRng;
use crate::swarm::Aggregator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxConfig {
    pub mu: f64,
}

/// Gradient of `F_k(w) + mu/2 ||w - w_global||^2`: `local_grad + mu (w - w_global)`.
pub fn fedprox_gradient(local_grad: &ParamVector, w: &ParamVector, w_global: &ParamVector, mu: f64) -> Result<ParamVector> {
    local_grad.check_same_layout(w)?;
    local_grad.check_same_layout(w_global)?;
    let mut out = local_grad.clone();
    if mu == 0.0 {
        return Ok(out);
    }
    for ((g, a), b) in out.values.iter_mut().zip(&w.values).zip(&w_global.values) {
        *g += mu * (a - b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovaRecord {
    /// `w_k - w_global` after the participant's local steps.
    pub delta: ParamVector,
    pub tau: usize,
    pub weight: f64,
}

/// Normalized averaging: `w_global + tau_eff * sum_k p_k delta_k / tau_k`, with
/// `tau_eff = sum_k p_k tau_k`. Equal taus reduce this to `w_global + sum_k p_k delta_k`.
pub fn fednova_aggregate(records: &[NovaRecord], w_global: &ParamVector) -> Result<ParamVector> {
    if records.is_empty() {
        return Err(Error::invalid("FedNova needs at least one participant record"));
    }
    if let Some(r) = records.iter().find(|r| r.tau == 0) {
        return Err(Error::invalid(format!("local step count must be >= 1 (weight {})", r.weight)));
    }
    for r in records {
        r.delta.check_same_layout(w_global)?;
    }
    let tau_eff: f64 = records.iter().map(|r| r.weight * r.tau as f64).sum();
    let mut out = w_global.clone();
    let mut direction = ParamVector::zeros(w_global.layout.clone());
    for r in records {
        direction.add_scaled(r.weight / r.tau as f64, &r.delta)?;
    }
    out.add_scaled(tau_eff, &direction)?;
    Ok(out)
}

/// FedNova as a swarm aggregation rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct FedNova;

impl Aggregator for FedNova {
    fn aggregate(&self, global: &ParamVector, locals: &[ParamVector], weights: &[f64], taus: &[usize]) -> Result<ParamVector> {
        let records = locals
            .iter()
            .zip(weights)
            .zip(taus)
            .map(|((l, &w), &tau)| Ok(NovaRecord { delta: l.sub(global)?, tau, weight: w }))
            .collect::<Result<Vec<_>>>()?;
        fednova_aggregate(&records, global)
    }
}

/// `(lambda x_i + (1 - lambda) x_j, lambda y_i + (1 - lambda) y_j)`.
pub fn mixup(x_i: &[f64], y_i: &[f64], x_j: &[f64], y_j: &[f64], lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if x_i.len() != x_j.len() || y_i.len() != y_j.len() {
        return Err(Error::invalid("mixup operands differ in dimension"));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("mixup lambda must lie in [0, 1], got {lambda}")));
    }
    let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect();
    Ok((mix(x_i, x_j), mix(y_i, y_j)))
}

/// Distribution of the mixing coefficient: `Beta(alpha, alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaLaw {
    pub alpha: f64,
}

impl Default for LambdaLaw {
    fn default() -> Self {
        LambdaLaw { alpha: 1.0 }
    }
}

/// Features with soft label distributions, and a provenance flag per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftDataset {
    pub features: Matrix,
    /// One row per sample, a distribution over classes.
    pub targets: Matrix,
    pub synthetic: Vec<bool>,
}

impl SoftDataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn from_hard(features: Matrix, labels: &[usize], n_classes: usize, synthetic: Vec<bool>) -> Self {
        SoftDataset { features, targets: Matrix::one_hot(labels, n_classes), synthetic }
    }
}

/// Appends `n_new` interpolations of random same-participant pairs.
pub fn mixup_augment_participant(local: &SoftDataset, n_new: usize, law: LambdaLaw, rng: &mut StreamRng) -> Result<SoftDataset> {
    if local.len() < 2 {
        return Err(Error::invalid("mixup needs at least two local samples"));
    }
    let beta = Beta::new(law.alpha, law.alpha).map_err(|e| Error::invalid(format!("bad mixup alpha: {e}")))?;
    let mut features = local.features.clone().into_values();
    let mut targets = local.targets.clone().into_values();
    let mut synthetic = local.synthetic.clone();
    for _ in 0..n_new {
        let i = rng.random_range(0..local.len());
        let mut j = rng.random_range(0..local.len() - 1);
        if j >= i {
            j += 1;
        }
        let lambda: f64 = beta.sample(rng);
        let (x, mut y) = mixup(local.features.row(i), local.targets.row(i), local.features.row(j), local.targets.row(j), lambda)?;
        // keep each soft label an exact distribution
        let s: f64 = y.iter().sum();
        if s != 1.0 {
            let last = y.len() - 1;
            y[last] = 1.0 - y[..last].iter().sum::<f64>();
        }
        features.extend(x);
        targets.extend(y);
        synthetic.push(true);
    }
    let n = synthetic.len();
    Ok(SoftDataset {
        features: Matrix::from_vec(n, local.features.cols(), features)?,
        targets: Matrix::from_vec(n, local.targets.cols(), targets)?,
        synthetic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerShape, Layout};
    use crate::rng;

    fn pv(v: Vec<f64>) -> ParamVector {
        let layout = Layout(vec![LayerShape { input: v.len() - 1, output: 1, activation: Activation::Identity }]);
        ParamVector::new(v, layout).unwrap()
    }

    #[test]
    fn fedprox_examples() {
        let g = pv(vec![0.3, -0.2]);
        let w = pv(vec![1.0, 2.0]);
        let wg = pv(vec![0.0, 4.0]);
        assert_eq!(fedprox_gradient(&g, &w, &wg, 0.0).unwrap(), g);
        assert_eq!(fedprox_gradient(&g, &w, &w, 0.7).unwrap(), g);
        let out = fedprox_gradient(&pv(vec![0.0, 0.0]), &w, &wg, 0.1).unwrap();
        assert!((out.values[0] - 0.1).abs() < 1e-15 && (out.values[1] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn fednova_examples() {
        let wg = pv(vec![0.0, 0.0]);
        let rec = |d: f64, tau, weight| NovaRecord { delta: pv(vec![d, d]), tau, weight };
        let one = fednova_aggregate(&[rec(3.0, 7, 1.0)], &wg).unwrap();
        assert_eq!(one.values, vec![3.0, 3.0]);
        let het = fednova_aggregate(&[rec(2.0, 1, 0.5), rec(2.0, 2, 0.5)], &wg).unwrap();
        assert!((het.values[0] - 2.25).abs() < 1e-15);
        assert!(fednova_aggregate(&[rec(2.0, 0, 1.0)], &wg).is_err());
        assert!(fednova_aggregate(&[], &wg).is_err());
    }

    #[test]
    fn mixup_examples() {
        let (x, y) = mixup(&[0.0, 0.0], &[1.0, 0.0], &[2.0, 4.0], &[0.0, 1.0], 0.5).unwrap();
        assert_eq!((x, y), (vec![1.0, 2.0], vec![0.5, 0.5]));
        let (x, y) = mixup(&[0.5, 1.5], &[1.0, 0.0], &[2.0, 4.0], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!((x, y), (vec![0.5, 1.5], vec![1.0, 0.0]));
        assert!(mixup(&[0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn mixup_cannot_invent_missing_labels() {
        let f = Matrix::from_vec(3, 2, vec![0.0, 1.0, 2.0, -1.0, 0.5, 0.5]).unwrap();
        let local = SoftDataset::from_hard(f, &[1, 1, 1], 2, vec![false; 3]);
        let out = mixup_augment_participant(&local, 50, LambdaLaw::default(), &mut rng::stream(1, "m", 0)).unwrap();
        assert_eq!(out.len(), 53);
        for r in 0..out.len() {
            assert_eq!(out.targets.row(r), &[0.0, 1.0]);
            let x = out.features.row(r);
            assert!((0.0..=2.0).contains(&x[0]) && (-1.0..=1.0).contains(&x[1]));
        }
        let same = mixup_augment_participant(&local, 0, LambdaLaw::default(), &mut rng::stream(1, "m", 0)).unwrap();
        assert_eq!(same, local);
        let tiny = SoftDataset::from_hard(Matrix::zeros(1, 2), &[0], 2, vec![false]);
        assert!(mixup_augment_participant(&tiny, 1, LambdaLaw::default(), &mut rng::stream(1, "m", 0)).is_err());
    }
}
