use std::fmt::Write as _;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{elbo_parts, LabeledBlock, Mode, Network, NetworkConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub momentum: f64,
    pub lr_init: f64,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the KL term; `None` means one over the number of blocks.
    pub kl_weight: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::bayesian()
    }
}

impl TrainConfig {
    pub fn frequentist() -> Self {
        TrainConfig {
            batch_size: 16,
            momentum: 0.9,
            lr_init: 0.001,
            lr_decay_every: 10,
            lr_decay_factor: 0.7,
            epochs: 30,
            seed: 0,
            kl_weight: None,
        }
    }

    pub fn bayesian() -> Self {
        TrainConfig { lr_init: 0.01, lr_decay_factor: 0.9, ..TrainConfig::frequentist() }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Frequentist => TrainConfig::frequentist(),
            Mode::Bayesian => TrainConfig::bayesian(),
        }
    }

    /// Learning rate during zero-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_init * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.lr_decay_every == 0 || self.epochs == 0 {
            return Err(Error::validation("batch_size, lr_decay_every and epochs must be >= 1"));
        }
        if !(self.lr_init > 0.0) || !self.lr_init.is_finite() {
            return Err(Error::validation(format!("lr_init must be > 0, got {}", self.lr_init)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::validation(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::validation(format!(
                "lr_decay_factor must lie in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        if let Some(w) = self.kl_weight {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::validation(format!("kl_weight must be >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// One-based.
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: Network,
    pub metrics: Vec<EpochMetrics>,
}

struct Velocity {
    mu_w: Vec<Array2<f64>>,
    mu_b: Vec<Array1<f64>>,
    delta_w: Vec<f64>,
    delta_b: Vec<f64>,
}

/// Mini-batch SGD with momentum (`v ← m·v + g`, `p ← p − lr·v`).
///
/// Bayesian mode draws one weight sample per step and minimizes the negative
/// ELBO; frequentist mode uses the mean weights and plain cross-entropy, and
/// leaves the spreads untouched.
pub fn train(cfg: &TrainConfig, net_cfg: &NetworkConfig, blocks: &[LabeledBlock]) -> Result<TrainOutcome> {
    cfg.validate()?;
    net_cfg.validate()?;
    if blocks.is_empty() {
        return Err(Error::validation("no training blocks"));
    }
    let mut net = Network::new(net_cfg.clone(), cfg.seed)?;
    let bayes = net_cfg.mode == Mode::Bayesian;
    let dataset_size: usize = blocks.iter().map(|b| b.labels.len()).sum();
    let kl_weight = if bayes { cfg.kl_weight.unwrap_or(1.0 / blocks.len() as f64) } else { 0.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut vel = Velocity {
        mu_w: net.layers.iter().map(|l| Array2::zeros(l.mu_w.dim())).collect(),
        mu_b: net.layers.iter().map(|l| Array1::zeros(l.mu_b.len())).collect(),
        delta_w: vec![0.0; net.layers.len()],
        delta_b: vec![0.0; net.layers.len()],
    };
    let zero = net.zero_noise();
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        let mut correct = 0;
        let mut seen = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<LabeledBlock> = chunk.iter().map(|&i| blocks[i].clone()).collect();
            let noise = if bayes { net.sample_noise(&mut rng) } else { zero.clone() };
            let (loss, g, c) = elbo_parts(&net, &noise, &batch, kl_weight, dataset_size)?;
            if !loss.is_finite() {
                return Err(Error::Training { epoch: epoch + 1, message: format!("loss became {loss}") });
            }
            loss_sum += loss;
            steps += 1;
            correct += c;
            seen += batch.iter().map(|b| b.labels.len()).sum::<usize>();

            let m = cfg.momentum;
            for (i, layer) in net.layers.iter_mut().enumerate() {
                vel.mu_w[i].zip_mut_with(&g.mu_w[i], |v, &d| *v = m * *v + d);
                layer.mu_w.scaled_add(-lr, &vel.mu_w[i]);
                vel.mu_b[i].zip_mut_with(&g.mu_b[i], |v, &d| *v = m * *v + d);
                layer.mu_b.scaled_add(-lr, &vel.mu_b[i]);
                if bayes {
                    vel.delta_w[i] = m * vel.delta_w[i] + g.delta_w[i];
                    layer.delta_w -= lr * vel.delta_w[i];
                    vel.delta_b[i] = m * vel.delta_b[i] + g.delta_b[i];
                    layer.delta_b -= lr * vel.delta_b[i];
                }
            }
        }
        let params_ok = net.layers.iter().all(|l| {
            l.mu_w.iter().chain(l.mu_b.iter()).all(|v| v.is_finite()) && !l.delta_w.is_nan() && !l.delta_b.is_nan()
        });
        if !params_ok {
            return Err(Error::Training { epoch: epoch + 1, message: "parameters became non-finite".into() });
        }
        metrics.push(EpochMetrics {
            epoch: epoch + 1,
            loss: loss_sum / steps as f64,
            accuracy: correct as f64 / seen as f64,
            lr,
        });
    }
    Ok(TrainOutcome { network: net, metrics })
}

/// `epoch,loss,accuracy,lr` rows.
pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,loss,accuracy,lr\n");
    for m in metrics {
        let _ = writeln!(out, "{},{},{},{}", m.epoch, m.loss, m.accuracy, m.lr);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable_blocks(n_blocks: usize, seed: u64) -> Vec<LabeledBlock> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_blocks)
            .map(|_| {
                let n = 64;
                let mut x = Array2::zeros((n, 2));
                let mut y = Vec::with_capacity(n);
                for i in 0..n {
                    let a: f64 = rng.random_range(-1.0..1.0);
                    let b: f64 = rng.random_range(-1.0..1.0);
                    let label = u32::from(a + 0.5 * b > 0.0);
                    let margin = if label == 1 { 0.2 } else { -0.2 };
                    x[[i, 0]] = a + margin;
                    x[[i, 1]] = b;
                    y.push(label);
                }
                LabeledBlock { features: x, labels: y }
            })
            .collect()
    }

    fn toy_net(mode: Mode) -> NetworkConfig {
        NetworkConfig { mode, classes: 2, features: 2, encoder: vec![8], global: 8, decoder: vec![8], block_size: 64 }
    }

    #[test]
    fn schedule_arithmetic() {
        let c = TrainConfig::bayesian();
        assert!((c.lr_at(25) - 0.0081).abs() < 1e-15);
        assert_eq!(c.lr_at(9), 0.01);
        let f = TrainConfig::frequentist();
        assert!((f.lr_at(10) - 0.0007).abs() < 1e-15);
    }

    #[test]
    fn separable_toy_is_learned() {
        let blocks = separable_blocks(160, 1);
        let cfg = TrainConfig { epochs: 30, lr_init: 0.05, seed: 3, ..TrainConfig::bayesian() };
        let out = train(&cfg, &toy_net(Mode::Bayesian), &blocks).unwrap();
        let last = out.metrics.last().unwrap();
        assert!(last.accuracy >= 0.99, "{:?}", last);
        assert_eq!(out.metrics.len(), 30);
    }

    #[test]
    fn fixed_seed_reproduces_loss_curve() {
        let blocks = separable_blocks(8, 2);
        let cfg = TrainConfig { epochs: 5, seed: 7, ..TrainConfig::bayesian() };
        let a = train(&cfg, &toy_net(Mode::Bayesian), &blocks).unwrap();
        let b = train(&cfg, &toy_net(Mode::Bayesian), &blocks).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn windowed_loss_does_not_increase() {
        let blocks = separable_blocks(16, 4);
        let cfg = TrainConfig { epochs: 40, lr_init: 0.02, seed: 1, ..TrainConfig::bayesian() };
        let out = train(&cfg, &toy_net(Mode::Bayesian), &blocks).unwrap();
        let losses: Vec<f64> = out.metrics.iter().map(|m| m.loss).collect();
        let window = |s: usize| losses[s..s + 10].iter().sum::<f64>() / 10.0;
        for s in 10..=losses.len() - 20 {
            assert!(window(s + 10) <= window(s) * 1.05, "window at {s}: {} -> {}", window(s), window(s + 10));
        }
    }

    #[test]
    fn frequentist_mode_keeps_spreads() {
        let blocks = separable_blocks(4, 5);
        let cfg = TrainConfig { epochs: 2, ..TrainConfig::frequentist() };
        let out = train(&cfg, &toy_net(Mode::Frequentist), &blocks).unwrap();
        assert!(out.network.layers.iter().all(|l| l.delta_w == super::super::DELTA_INIT));
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut blocks = separable_blocks(2, 6);
        blocks[0].features[[0, 0]] = 1e300;
        let cfg = TrainConfig { epochs: 3, lr_init: 10.0, ..TrainConfig::bayesian() };
        match train(&cfg, &toy_net(Mode::Bayesian), &blocks) {
            Err(Error::Training { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let blocks = separable_blocks(1, 0);
        let net = toy_net(Mode::Bayesian);
        assert!(train(&TrainConfig { batch_size: 0, ..TrainConfig::default() }, &net, &blocks).is_err());
        assert!(train(&TrainConfig { lr_decay_factor: 1.5, ..TrainConfig::default() }, &net, &blocks).is_err());
        assert!(train(&TrainConfig::default(), &net, &[]).is_err());
    }

    #[test]
    fn metrics_csv_header() {
        let csv = metrics_csv(&[EpochMetrics { epoch: 1, loss: 0.5, accuracy: 0.75, lr: 0.01 }]);
        assert_eq!(csv, "epoch,loss,accuracy,lr\n1,0.5,0.75,0.01\n");
    }
}
