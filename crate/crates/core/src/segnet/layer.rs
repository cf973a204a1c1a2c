use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};

/// Lower bound on the variance of a weight's Gaussian, keeping the KL of a
/// zero-mean weight finite.
pub const KL_VAR_FLOOR: f64 = 1e-8;

/// `log(1 + exp(x))` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`]; `0` maps to `-inf`.
pub fn softplus_inv(t: f64) -> f64 {
    if t > 30.0 {
        t
    } else {
        t.exp_m1().ln()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Closed-form `KL(N(μ, τ²μ² + floor) ‖ N(0, 1))` for one component.
pub fn kl_component(mu: f64, tau: f64) -> f64 {
    let s2 = tau * tau * mu * mu + KL_VAR_FLOOR;
    0.5 * (s2 + mu * mu - 1.0 - s2.ln())
}

/// Partial derivatives of [`kl_component`] with respect to μ and τ.
pub fn kl_component_grad(mu: f64, tau: f64) -> (f64, f64) {
    let s2 = tau * tau * mu * mu + KL_VAR_FLOOR;
    let shrink = 1.0 - 1.0 / s2;
    let d_mu = 0.5 * (2.0 * tau * tau * mu * shrink + 2.0 * mu);
    let d_tau = 0.5 * 2.0 * tau * mu * mu * shrink;
    (d_mu, d_tau)
}

/// Dense layer whose weights are `μ ⊙ (1 + τ ε)` with one spread `τ =
/// softplus(δ)` shared by all weights and another shared by all biases.
///
/// Weights are stored `(inputs × outputs)` so a layer maps `X ↦ X·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalLayer {
    pub mu_w: Array2<f64>,
    pub delta_w: f64,
    pub mu_b: Array1<f64>,
    pub delta_b: f64,
}

/// Standard-normal draws for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNoise {
    pub eps_w: Array2<f64>,
    pub eps_b: Array1<f64>,
}

impl LayerNoise {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        LayerNoise { eps_w: Array2::zeros((n_in, n_out)), eps_b: Array1::zeros(n_out) }
    }

    pub fn sample(n_in: usize, n_out: usize, rng: &mut impl Rng) -> Self {
        let eps_w = Array2::from_shape_simple_fn((n_in, n_out), || StandardNormal.sample(rng));
        let eps_b = Array1::from_shape_simple_fn(n_out, || StandardNormal.sample(rng));
        LayerNoise { eps_w, eps_b }
    }
}

impl VariationalLayer {
    /// Fan-in scaled uniform means (variance `2 / n_in` for weights, as suits
    /// rectifiers), `δ = delta_init` for both spreads.
    pub fn init(n_in: usize, n_out: usize, delta_init: f64, rng: &mut impl Rng) -> Self {
        let fan = n_in as f64;
        let uw = Uniform::new(-(6.0 / fan).sqrt(), (6.0 / fan).sqrt()).expect("bound is positive");
        let ub = Uniform::new(-1.0 / fan.sqrt(), 1.0 / fan.sqrt()).expect("bound is positive");
        VariationalLayer {
            mu_w: Array2::from_shape_simple_fn((n_in, n_out), || uw.sample(rng)),
            delta_w: delta_init,
            mu_b: Array1::from_shape_simple_fn(n_out, || ub.sample(rng)),
            delta_b: delta_init,
        }
    }

    pub fn from_means(mu_w: Array2<f64>, mu_b: Array1<f64>, tau: f64) -> Result<Self> {
        if mu_w.ncols() != mu_b.len() {
            return Err(Error::validation(format!(
                "bias length {} does not match {} outputs",
                mu_b.len(),
                mu_w.ncols()
            )));
        }
        let d = softplus_inv(tau);
        Ok(VariationalLayer { mu_w, delta_w: d, mu_b, delta_b: d })
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.delta_w = softplus_inv(tau);
        self.delta_b = softplus_inv(tau);
        self
    }

    pub fn n_in(&self) -> usize {
        self.mu_w.nrows()
    }

    pub fn n_out(&self) -> usize {
        self.mu_w.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.mu_w.len() + self.mu_b.len()
    }

    pub fn tau_w(&self) -> f64 {
        softplus(self.delta_w)
    }

    pub fn tau_b(&self) -> f64 {
        softplus(self.delta_b)
    }

    fn check(&self, noise: &LayerNoise) -> Result<()> {
        if noise.eps_w.dim() != self.mu_w.dim() || noise.eps_b.len() != self.mu_b.len() {
            return Err(Error::validation(format!(
                "noise shape {:?}/{} does not match layer {:?}/{}",
                noise.eps_w.dim(),
                noise.eps_b.len(),
                self.mu_w.dim(),
                self.mu_b.len()
            )));
        }
        Ok(())
    }

    /// Concrete `(W, B)` for the given noise.
    pub fn realize(&self, noise: &LayerNoise) -> Result<(Array2<f64>, Array1<f64>)> {
        self.check(noise)?;
        let tw = self.tau_w();
        let tb = self.tau_b();
        let w = ndarray::Zip::from(&self.mu_w)
            .and(&noise.eps_w)
            .map_collect(|&m, &e| m * (1.0 + tw * e));
        let b = ndarray::Zip::from(&self.mu_b)
            .and(&noise.eps_b)
            .map_collect(|&m, &e| m * (1.0 + tb * e));
        Ok((w, b))
    }

    /// Pre-activations `X·W + B` of this layer alone.
    pub fn forward(&self, x: &Array2<f64>, noise: &LayerNoise) -> Result<Array2<f64>> {
        if x.ncols() != self.n_in() {
            return Err(Error::validation(format!(
                "input width {} does not match layer width {}",
                x.ncols(),
                self.n_in()
            )));
        }
        let (w, b) = self.realize(noise)?;
        Ok(x.dot(&w) + &b)
    }

    /// KL divergence of this layer's weight distribution from the prior.
    pub fn kl(&self) -> f64 {
        let tw = self.tau_w();
        let tb = self.tau_b();
        self.mu_w.iter().map(|&m| kl_component(m, tw)).sum::<f64>()
            + self.mu_b.iter().map(|&m| kl_component(m, tb)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softplus_inverts() {
        for t in [1e-6, 0.018, 0.1, 1.0, 5.0, 40.0] {
            assert!((softplus(softplus_inv(t)) - t).abs() <= 1e-12 * t.max(1.0));
        }
        assert_eq!(softplus(f64::NEG_INFINITY), 0.0);
        assert_eq!(softplus_inv(0.0), f64::NEG_INFINITY);
        assert!(softplus(-4.0) > 0.0);
    }

    #[test]
    fn reparametrized_pre_activation() {
        let layer = VariationalLayer::from_means(array![[2.0]], array![0.0], 1.0).unwrap();
        let noise = LayerNoise { eps_w: array![[0.5]], eps_b: array![0.0] };
        let z = layer.forward(&array![[1.0]], &noise).unwrap();
        assert!((z[[0, 0]] - 3.0).abs() < 1e-12);
        let biased = VariationalLayer::from_means(array![[2.0]], array![0.25], 1.0).unwrap();
        assert!((biased.forward(&array![[1.0]], &noise).unwrap()[[0, 0]] - 3.25).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_ignores_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = VariationalLayer::init(4, 3, -4.0, &mut rng).with_tau(0.0);
        let noise = LayerNoise::sample(4, 3, &mut rng);
        let (w, b) = layer.realize(&noise).unwrap();
        assert_eq!(w, layer.mu_w);
        assert_eq!(b, layer.mu_b);
    }

    #[test]
    fn shape_mismatch_is_validation_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = VariationalLayer::init(4, 3, -4.0, &mut rng);
        assert!(layer.realize(&LayerNoise::zeros(3, 3)).unwrap_err().is_validation());
        assert!(layer.forward(&Array2::zeros((2, 5)), &LayerNoise::zeros(4, 3)).is_err());
    }

    #[test]
    fn weight_samples_have_expected_moments() {
        let layer = VariationalLayer::from_means(array![[1.0]], array![0.0], 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| layer.realize(&LayerNoise::sample(1, 1, &mut rng)).unwrap().0[[0, 0]])
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() <= 0.01, "{mean}");
        assert!((sd - 0.1).abs() <= 0.01, "{sd}");
    }

    #[test]
    fn kl_of_zero_mean_weight_is_finite_closed_form() {
        let kl = kl_component(0.0, 0.5);
        let expect = 0.5 * (KL_VAR_FLOOR - 1.0 - KL_VAR_FLOOR.ln());
        assert!(kl.is_finite());
        assert!((kl - expect).abs() < 1e-12);
        // μ = 1, τ = 1 gives q = N(1, 1 + floor): KL ≈ ½·(1 + 1 − 1 − 0) = ½.
        assert!((kl_component(1.0, 1.0) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn kl_gradient_matches_differences() {
        let h = 1e-6;
        for (m, t) in [(0.3, 0.05), (-1.2, 0.4), (2.0, 1.5)] {
            let (gm, gt) = kl_component_grad(m, t);
            let fm = (kl_component(m + h, t) - kl_component(m - h, t)) / (2.0 * h);
            let ft = (kl_component(m, t + h) - kl_component(m, t - h)) / (2.0 * h);
            assert!((gm - fm).abs() <= 1e-5 * fm.abs().max(1.0), "{gm} {fm}");
            assert!((gt - ft).abs() <= 1e-5 * ft.abs().max(1.0), "{gt} {ft}");
        }
    }
}
