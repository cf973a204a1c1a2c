use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{kl_component_grad, sigmoid, LayerNoise, VariationalLayer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Frequentist,
    Bayesian,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Frequentist => "frequentist",
            Mode::Bayesian => "bayesian",
        }
    }
}

/// Layer widths of the point network.
///
/// Points pass through the shared `encoder` layers, one more shared layer of
/// width `global` is max-pooled over the block, and the pooled vector is
/// appended to every point's encoder output before the `decoder` layers and
/// the final `classes`-wide classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub mode: Mode,
    pub classes: usize,
    pub features: usize,
    pub encoder: Vec<usize>,
    pub global: usize,
    pub decoder: Vec<usize>,
    pub block_size: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            mode: Mode::Bayesian,
            classes: crate::scene::Class::COUNT,
            features: super::FEATURES,
            encoder: vec![32, 64],
            global: 128,
            decoder: vec![64, 32],
            block_size: 4096,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::validation(format!("need >= 2 classes, got {}", self.classes)));
        }
        let widths = self.encoder.iter().chain(&self.decoder).chain([&self.global, &self.features]);
        if widths.into_iter().any(|&w| w == 0) {
            return Err(Error::validation("layer widths must be >= 1"));
        }
        if self.block_size == 0 {
            return Err(Error::validation("block size must be >= 1"));
        }
        Ok(())
    }

    /// `(inputs, outputs)` of every layer in evaluation order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut width = self.features;
        for &w in &self.encoder {
            shapes.push((width, w));
            width = w;
        }
        shapes.push((width, self.global));
        let mut head_in = width + self.global;
        for &w in &self.decoder {
            shapes.push((head_in, w));
            head_in = w;
        }
        shapes.push((head_in, self.classes));
        shapes
    }

    fn encoder_out(&self) -> usize {
        self.encoder.last().copied().unwrap_or(self.features)
    }
}

/// Concrete weights of one network draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

/// Gradients with respect to concrete weights.
type WeightGrads = Weights;

/// Gradients with respect to the variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub mu_w: Vec<Array2<f64>>,
    pub delta_w: Vec<f64>,
    pub mu_b: Vec<Array1<f64>>,
    pub delta_b: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(net: &Network) -> Self {
        ParamGrads {
            mu_w: net.layers.iter().map(|l| Array2::zeros(l.mu_w.dim())).collect(),
            delta_w: vec![0.0; net.layers.len()],
            mu_b: net.layers.iter().map(|l| Array1::zeros(l.mu_b.len())).collect(),
            delta_b: vec![0.0; net.layers.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layers: Vec<VariationalLayer>,
}

/// Spread parameter at initialization (τ ≈ 0.018).
pub const DELTA_INIT: f64 = -4.0;

impl Network {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| VariationalLayer::init(i, o, DELTA_INIT, &mut rng))
            .collect();
        Ok(Network { config, layers })
    }

    pub fn from_layers(config: NetworkConfig, layers: Vec<VariationalLayer>) -> Result<Self> {
        config.validate()?;
        let shapes: Vec<_> = layers.iter().map(|l| (l.n_in(), l.n_out())).collect();
        if shapes != config.layer_shapes() {
            return Err(Error::validation(format!(
                "layer shapes {shapes:?} do not match config {:?}",
                config.layer_shapes()
            )));
        }
        Ok(Network { config, layers })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(VariationalLayer::n_params).sum()
    }

    pub fn zero_noise(&self) -> Vec<LayerNoise> {
        self.layers.iter().map(|l| LayerNoise::zeros(l.n_in(), l.n_out())).collect()
    }

    pub fn sample_noise(&self, rng: &mut impl Rng) -> Vec<LayerNoise> {
        self.layers.iter().map(|l| LayerNoise::sample(l.n_in(), l.n_out(), rng)).collect()
    }

    /// Weights at the variational means.
    pub fn mean_weights(&self) -> Weights {
        Weights {
            w: self.layers.iter().map(|l| l.mu_w.clone()).collect(),
            b: self.layers.iter().map(|l| l.mu_b.clone()).collect(),
        }
    }

    pub fn realize(&self, noise: &[LayerNoise]) -> Result<Weights> {
        if noise.len() != self.layers.len() {
            return Err(Error::validation(format!(
                "noise for {} layers, network has {}",
                noise.len(),
                self.layers.len()
            )));
        }
        let (w, b) = self.layers.iter().zip(noise).map(|(l, n)| l.realize(n)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Ok(Weights { w, b })
    }

    /// One weight draw with i.i.d. standard-normal noise from `seed`.
    pub fn sample_weights(&self, seed: u64) -> Weights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = self.sample_noise(&mut rng);
        self.realize(&noise).expect("sampled noise matches layer shapes")
    }

    /// Per-point logits for one block under the given noise.
    pub fn variational_forward(&self, x: &Array2<f64>, noise: &[LayerNoise]) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(forward(&self.config, &self.realize(noise)?, x.view()))
    }

    /// Per-point logits at the mean weights.
    pub fn forward_mean(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(forward(&self.config, &self.mean_weights(), x.view()))
    }

    pub(crate) fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.config.features {
            return Err(Error::validation(format!(
                "block has {} features per point, network expects {}",
                x.ncols(),
                self.config.features
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::validation("block has no points"));
        }
        Ok(())
    }

    pub fn kl(&self) -> f64 {
        self.layers.iter().map(VariationalLayer::kl).sum()
    }

    /// Chain rule from weight gradients to (μ, δ) under `noise`.
    pub fn param_grads(&self, wg: &Weights, noise: &[LayerNoise]) -> ParamGrads {
        let mut g = ParamGrads::zeros(self);
        for (i, l) in self.layers.iter().enumerate() {
            let tw = l.tau_w();
            let tb = l.tau_b();
            let mut dtau_w = 0.0;
            ndarray::Zip::from(&mut g.mu_w[i])
                .and(&wg.w[i])
                .and(&l.mu_w)
                .and(&noise[i].eps_w)
                .for_each(|gm, &dw, &m, &e| {
                    *gm = dw * (1.0 + tw * e);
                    dtau_w += dw * m * e;
                });
            let mut dtau_b = 0.0;
            ndarray::Zip::from(&mut g.mu_b[i])
                .and(&wg.b[i])
                .and(&l.mu_b)
                .and(&noise[i].eps_b)
                .for_each(|gm, &db, &m, &e| {
                    *gm = db * (1.0 + tb * e);
                    dtau_b += db * m * e;
                });
            g.delta_w[i] = dtau_w * sigmoid(l.delta_w);
            g.delta_b[i] = dtau_b * sigmoid(l.delta_b);
        }
        g
    }

    /// Adds `scale · ∂KL/∂(μ, δ)` into `g`.
    pub fn add_kl_grads(&self, g: &mut ParamGrads, scale: f64) {
        for (i, l) in self.layers.iter().enumerate() {
            let tw = l.tau_w();
            let tb = l.tau_b();
            let mut dtau = 0.0;
            ndarray::Zip::from(&mut g.mu_w[i]).and(&l.mu_w).for_each(|gm, &m| {
                let (dm, dt) = kl_component_grad(m, tw);
                *gm += scale * dm;
                dtau += dt;
            });
            g.delta_w[i] += scale * dtau * sigmoid(l.delta_w);
            let mut dtau = 0.0;
            ndarray::Zip::from(&mut g.mu_b[i]).and(&l.mu_b).for_each(|gm, &m| {
                let (dm, dt) = kl_component_grad(m, tb);
                *gm += scale * dm;
                dtau += dt;
            });
            g.delta_b[i] += scale * dtau * sigmoid(l.delta_b);
        }
    }
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Forward pass without intermediate storage.
pub(crate) fn forward(cfg: &NetworkConfig, wt: &Weights, x: ArrayView2<f64>) -> Array2<f64> {
    let n_enc = cfg.encoder.len();
    let mut a = x.to_owned();
    for l in 0..n_enc {
        a = relu(&(a.dot(&wt.w[l]) + &wt.b[l]));
    }
    let g = global_feature(&(a.dot(&wt.w[n_enc]) + &wt.b[n_enc])).0;
    let e = cfg.encoder_out();
    let head = n_enc + 1;
    let shift = g.dot(&wt.w[head].slice(s![e.., ..])) + &wt.b[head];
    let mut z = a.dot(&wt.w[head].slice(s![..e, ..])) + &shift;
    for l in head + 1..wt.w.len() {
        z = relu(&z).dot(&wt.w[l]) + &wt.b[l];
    }
    z
}

/// Column-wise max of `relu(z)` and the first row attaining each maximum.
fn global_feature(z: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let mut g = Array1::zeros(z.ncols());
    let mut arg = vec![usize::MAX; z.ncols()];
    for (j, col) in z.axis_iter(Axis(1)).enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v > g[j] {
                g[j] = v;
                arg[j] = i;
            }
        }
    }
    (g, arg)
}

/// Softmax cross-entropy summed over points; returns `(loss_sum, dlogits,
/// correct)` where `dlogits` is the gradient of the summed loss times `scale`.
pub(crate) fn cross_entropy(logits: &Array2<f64>, labels: &[u32], scale: f64) -> (f64, Array2<f64>, usize) {
    let mut d = logits.clone();
    let mut loss = 0.0;
    let mut correct = 0;
    for (mut row, &y) in d.axis_iter_mut(Axis(0)).zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut best = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        if best == y as usize {
            correct += 1;
        }
        let target = row[y as usize];
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        loss += sum.ln() + max - target;
        row.mapv_inplace(|v| v / sum * scale);
        row[y as usize] -= scale;
    }
    (loss, d, correct)
}

/// Summed cross-entropy of one block and its gradient with respect to the
/// concrete weights (accumulated into `grads`, scaled by `scale`).
pub(crate) fn block_loss_grad(
    cfg: &NetworkConfig,
    wt: &Weights,
    x: ArrayView2<f64>,
    labels: &[u32],
    scale: f64,
    grads: &mut WeightGrads,
) -> (f64, usize) {
    let n_enc = cfg.encoder.len();
    let n_layers = wt.w.len();

    // Forward with caches.
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_enc + 1);
    acts.push(x.to_owned());
    for l in 0..n_enc {
        let z = acts[l].dot(&wt.w[l]) + &wt.b[l];
        acts.push(relu(&z));
    }
    let a_enc = &acts[n_enc];
    let zg = a_enc.dot(&wt.w[n_enc]) + &wt.b[n_enc];
    let (g, arg) = global_feature(&zg);
    drop(zg);
    let e = cfg.encoder_out();
    let head = n_enc + 1;
    let shift = g.dot(&wt.w[head].slice(s![e.., ..])) + &wt.b[head];
    let mut head_z: Vec<Array2<f64>> = Vec::with_capacity(n_layers - head);
    head_z.push(a_enc.dot(&wt.w[head].slice(s![..e, ..])) + &shift);
    for l in head + 1..n_layers {
        let z = relu(head_z.last().unwrap()).dot(&wt.w[l]) + &wt.b[l];
        head_z.push(z);
    }
    let logits = head_z.pop().unwrap();
    let (loss, mut dz, correct) = cross_entropy(&logits, labels, scale);

    // Backward through the decoder and classifier.
    for l in (head + 1..n_layers).rev() {
        let z_prev = head_z.pop().unwrap();
        let a_prev = relu(&z_prev);
        grads.w[l] += &a_prev.t().dot(&dz);
        grads.b[l] += &dz.sum_axis(Axis(0));
        let mut da = dz.dot(&wt.w[l].t());
        ndarray::Zip::from(&mut da).and(&z_prev).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        dz = da;
    }

    // Head layer: local rows see per-point features, global rows the pooled vector.
    let col = dz.sum_axis(Axis(0));
    {
        let mut gw = grads.w[head].slice_mut(s![..e, ..]);
        gw += &a_enc.t().dot(&dz);
    }
    {
        let outer = g.view().insert_axis(Axis(1)).dot(&col.view().insert_axis(Axis(0)));
        let mut gw = grads.w[head].slice_mut(s![e.., ..]);
        gw += &outer;
    }
    grads.b[head] += &col;
    let mut da = dz.dot(&wt.w[head].slice(s![..e, ..]).t());
    let dg = wt.w[head].slice(s![e.., ..]).dot(&col);

    // Max-pool routes each pooled gradient to its winning point.
    let wg = &wt.w[n_enc];
    for (j, &i) in arg.iter().enumerate() {
        if i == usize::MAX {
            continue;
        }
        let c = dg[j];
        grads.b[n_enc][j] += c;
        for k in 0..e {
            grads.w[n_enc][[k, j]] += a_enc[[i, k]] * c;
            da[[i, k]] += wg[[k, j]] * c;
        }
    }

    // Encoder.
    for l in (0..n_enc).rev() {
        let a_out = &acts[l + 1];
        ndarray::Zip::from(&mut da).and(a_out).for_each(|d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
        grads.w[l] += &acts[l].t().dot(&da);
        grads.b[l] += &da.sum_axis(Axis(0));
        if l > 0 {
            da = da.dot(&wt.w[l].t());
        }
    }
    (loss, correct)
}

pub(crate) fn zero_weight_grads(wt: &Weights) -> WeightGrads {
    Weights {
        w: wt.w.iter().map(|w| Array2::zeros(w.dim())).collect(),
        b: wt.b.iter().map(|b| Array1::zeros(b.len())).collect(),
    }
}

/// One labeled block of point features.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBlock {
    pub features: Array2<f64>,
    pub labels: Vec<u32>,
}

/// Negative ELBO of a batch under fixed noise: mean point cross-entropy plus
/// `kl_weight · KL / dataset_size`, with its gradient.
pub fn elbo_loss_and_grad(
    net: &Network,
    noise: &[LayerNoise],
    batch: &[LabeledBlock],
    kl_weight: f64,
    dataset_size: usize,
) -> Result<(f64, ParamGrads)> {
    let (loss, grads, _) = elbo_parts(net, noise, batch, kl_weight, dataset_size)?;
    Ok((loss, grads))
}

pub fn elbo_loss(
    net: &Network,
    noise: &[LayerNoise],
    batch: &[LabeledBlock],
    kl_weight: f64,
    dataset_size: usize,
) -> Result<f64> {
    let wt = net.realize(noise)?;
    let n = check_batch(net, batch)?;
    let mut total = 0.0;
    for b in batch {
        let logits = forward(&net.config, &wt, b.features.view());
        total += cross_entropy(&logits, &b.labels, 0.0).0;
    }
    Ok(total / n as f64 + kl_term(net, kl_weight, dataset_size))
}

fn kl_term(net: &Network, kl_weight: f64, dataset_size: usize) -> f64 {
    if kl_weight == 0.0 {
        0.0
    } else {
        kl_weight * net.kl() / dataset_size.max(1) as f64
    }
}

fn check_batch(net: &Network, batch: &[LabeledBlock]) -> Result<usize> {
    let mut n = 0;
    for b in batch {
        net.check_input(&b.features)?;
        if b.labels.len() != b.features.nrows() {
            return Err(Error::validation("labels and points differ in count"));
        }
        if let Some(&bad) = b.labels.iter().find(|&&y| y as usize >= net.config.classes) {
            return Err(Error::validation(format!("label {bad} outside 0..{}", net.config.classes)));
        }
        n += b.labels.len();
    }
    if n == 0 {
        return Err(Error::validation("empty batch"));
    }
    Ok(n)
}

/// Loss, parameter gradients and number of correctly classified points.
pub(crate) fn elbo_parts(
    net: &Network,
    noise: &[LayerNoise],
    batch: &[LabeledBlock],
    kl_weight: f64,
    dataset_size: usize,
) -> Result<(f64, ParamGrads, usize)> {
    let wt = net.realize(noise)?;
    let n = check_batch(net, batch)?;
    let scale = 1.0 / n as f64;
    let mut wg = zero_weight_grads(&wt);
    let mut total = 0.0;
    let mut correct = 0;
    for b in batch {
        let (l, c) = block_loss_grad(&net.config, &wt, b.features.view(), &b.labels, scale, &mut wg);
        total += l;
        correct += c;
    }
    let mut grads = net.param_grads(&wg, noise);
    if kl_weight != 0.0 {
        net.add_kl_grads(&mut grads, kl_weight / dataset_size.max(1) as f64);
    }
    Ok((total * scale + kl_term(net, kl_weight, dataset_size), grads, correct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Uniform};

    fn toy_config() -> NetworkConfig {
        NetworkConfig {
            mode: Mode::Bayesian,
            classes: 3,
            features: 4,
            encoder: vec![],
            global: 5,
            decoder: vec![],
            block_size: 8,
        }
    }

    fn toy_block(rng: &mut ChaCha8Rng, n: usize, f: usize, m: u32) -> LabeledBlock {
        let u = Uniform::new(-1.0, 1.0).unwrap();
        LabeledBlock {
            features: Array2::from_shape_simple_fn((n, f), || u.sample(rng)),
            labels: (0..n).map(|_| rng.random_range(0..m)).collect(),
        }
    }

    #[test]
    fn layer_shapes_follow_widths() {
        let c = NetworkConfig::default();
        assert_eq!(
            c.layer_shapes(),
            vec![(6, 32), (32, 64), (64, 128), (192, 64), (64, 32), (32, 9)]
        );
        assert_eq!(toy_config().layer_shapes(), vec![(4, 5), (9, 3)]);
    }

    #[test]
    fn zero_noise_is_bit_identical_to_mean_forward() {
        let net = Network::new(NetworkConfig { features: 6, ..NetworkConfig::default() }, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = toy_block(&mut rng, 50, 6, 9).features;
        let a = net.variational_forward(&x, &net.zero_noise()).unwrap();
        let b = net.forward_mean(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn vanishing_spread_matches_zero_noise() {
        let mut net = Network::new(toy_config(), 4).unwrap();
        for l in &mut net.layers {
            l.delta_w = f64::NEG_INFINITY;
            l.delta_b = f64::NEG_INFINITY;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = toy_block(&mut rng, 20, 4, 3).features;
        let noise = net.sample_noise(&mut rng);
        assert_eq!(net.variational_forward(&x, &noise).unwrap(), net.forward_mean(&x).unwrap());
    }

    #[test]
    fn cross_entropy_of_confident_predictions_is_near_zero() {
        let logits = ndarray::array![[50.0, 0.0], [0.0, 50.0]];
        let (loss, _, correct) = cross_entropy(&logits, &[0, 1], 1.0);
        assert!(loss < 1e-20);
        assert_eq!(correct, 2);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Network::new(toy_config(), 5).unwrap();
        for l in &mut net.layers {
            l.delta_w = -1.0;
            l.delta_b = -1.5;
        }
        let batch = vec![toy_block(&mut rng, 6, 4, 3), toy_block(&mut rng, 7, 4, 3)];
        let noise = net.sample_noise(&mut rng);
        let (kw, ds) = (0.5, 40);
        let (_, g) = elbo_loss_and_grad(&net, &noise, &batch, kw, ds).unwrap();
        let h = 1e-4;
        let loss = |n: &Network| elbo_loss(n, &noise, &batch, kw, ds).unwrap();
        let check = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(rel <= 1e-3, "analytic {analytic} numeric {numeric}");
        };
        for li in 0..net.layers.len() {
            let (r, c) = net.layers[li].mu_w.dim();
            for i in 0..r {
                for j in 0..c {
                    let mut p = net.clone();
                    p.layers[li].mu_w[[i, j]] += h;
                    let mut m = net.clone();
                    m.layers[li].mu_w[[i, j]] -= h;
                    check(g.mu_w[li][[i, j]], (loss(&p) - loss(&m)) / (2.0 * h));
                }
            }
            for j in 0..c {
                let mut p = net.clone();
                p.layers[li].mu_b[j] += h;
                let mut m = net.clone();
                m.layers[li].mu_b[j] -= h;
                check(g.mu_b[li][j], (loss(&p) - loss(&m)) / (2.0 * h));
            }
            let mut p = net.clone();
            p.layers[li].delta_w += h;
            let mut m = net.clone();
            m.layers[li].delta_w -= h;
            check(g.delta_w[li], (loss(&p) - loss(&m)) / (2.0 * h));
            let mut p = net.clone();
            p.layers[li].delta_b += h;
            let mut m = net.clone();
            m.layers[li].delta_b -= h;
            check(g.delta_b[li], (loss(&p) - loss(&m)) / (2.0 * h));
        }
    }

    #[test]
    fn deep_network_gradient_spot_check() {
        let cfg = NetworkConfig {
            mode: Mode::Bayesian,
            classes: 4,
            features: 3,
            encoder: vec![5, 6],
            global: 7,
            decoder: vec![5],
            block_size: 16,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::new(cfg, 9).unwrap();
        let batch = vec![toy_block(&mut rng, 9, 3, 4)];
        let noise = net.sample_noise(&mut rng);
        let (_, g) = elbo_loss_and_grad(&net, &noise, &batch, 1.0, 10).unwrap();
        let h = 1e-5;
        let loss = |n: &Network| elbo_loss(n, &noise, &batch, 1.0, 10).unwrap();
        for li in 0..net.layers.len() {
            let (r, c) = net.layers[li].mu_w.dim();
            for (i, j) in [(0, 0), (r - 1, c - 1), (r / 2, c / 2)] {
                let mut p = net.clone();
                p.layers[li].mu_w[[i, j]] += h;
                let mut m = net.clone();
                m.layers[li].mu_w[[i, j]] -= h;
                let num = (loss(&p) - loss(&m)) / (2.0 * h);
                let a = g.mu_w[li][[i, j]];
                assert!((a - num).abs() <= 1e-4 * a.abs().max(num.abs()).max(1e-4), "layer {li} ({i},{j}): {a} vs {num}");
            }
        }
    }
}
