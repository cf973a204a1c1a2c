//! Per-point uncertainty from Monte Carlo predictions and the rules that turn
//! it into certain/uncertain decisions.
//!
//! Entropies are in nats. The entropy-based and variance scores are
//! thresholded at `mean + k·σ` over the scored points; the credible-interval
//! rule marks a point certain when the predicted class's interval is disjoint
//! from every other class's interval.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::segnet::{predict_class, PredictiveSamples};

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Entropy of the Monte Carlo mean distribution.
pub fn predictive_uncertainty(s: &PredictiveSamples) -> Vec<f64> {
    (0..s.points()).map(|i| entropy(&s.mean(i))).collect()
}

/// Mean entropy of the individual sample distributions.
pub fn aleatoric_uncertainty(s: &PredictiveSamples) -> Vec<f64> {
    let k = s.samples() as f64;
    (0..s.points())
        .map(|i| (0..s.samples()).map(|j| entropy(s.row(j, i))).sum::<f64>() / k)
        .collect()
}

/// Predictive minus aleatoric uncertainty, with rounding below zero clamped.
pub fn epistemic_uncertainty(s: &PredictiveSamples) -> Vec<f64> {
    predictive_uncertainty(s)
        .into_iter()
        .zip(aleatoric_uncertainty(s))
        .map(|(p, a)| (p - a).max(0.0))
        .collect()
}

fn require_two(s: &PredictiveSamples) -> Result<()> {
    if s.samples() < 2 {
        return Err(Error::validation(format!("need K >= 2 samples, got {}", s.samples())));
    }
    Ok(())
}

/// Unbiased sample variance of the predicted class's probability.
pub fn predictive_variance(s: &PredictiveSamples) -> Result<Vec<f64>> {
    require_two(s)?;
    let pred = predict_class(s);
    let k = s.samples();
    Ok(pred
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let xs: Vec<f64> = (0..k).map(|j| s.row(j, i)[c as usize]).collect();
            let mean = xs.iter().sum::<f64>() / k as f64;
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64
        })
        .collect())
}

/// Empirical quantile of sorted data, interpolating linearly between order
/// statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Central credible interval `[lo, hi]` of every class probability of every
/// point; `result[i][c]`.
pub fn credible_intervals(s: &PredictiveSamples, level: f64) -> Result<Vec<Vec<[f64; 2]>>> {
    require_two(s)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::validation(format!("credible level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    let mut buf = vec![0.0; s.samples()];
    Ok((0..s.points())
        .map(|i| {
            (0..s.classes())
                .map(|c| {
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = s.row(j, i)[c];
                    }
                    buf.sort_by(f64::total_cmp);
                    [percentile(&buf, tail), percentile(&buf, 1.0 - tail)]
                })
                .collect()
        })
        .collect())
}

/// Whether the predicted class's interval is disjoint from all others.
pub fn interval_certain(intervals: &[[f64; 2]], predicted: usize) -> bool {
    let [lo, hi] = intervals[predicted];
    intervals
        .iter()
        .enumerate()
        .all(|(c, &[olo, ohi])| c == predicted || lo > ohi || hi < olo)
}

/// `true` marks values above `mean + k_sigma·std` (sample standard deviation).
pub fn flag_uncertain(values: &[f64], k_sigma: f64) -> Result<Vec<bool>> {
    if values.len() < 2 {
        return Err(Error::validation(format!("need >= 2 values to threshold, got {}", values.len())));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let threshold = mean + k_sigma * sd;
    Ok(values.iter().map(|&v| v > threshold).collect())
}

/// Points not flagged uncertain, and the share that was dropped.
pub fn filter_certain(cloud: &PointCloud, uncertain: &[bool]) -> Result<(PointCloud, f64)> {
    if uncertain.len() != cloud.len() {
        return Err(Error::validation(format!(
            "{} flags for {} points",
            uncertain.len(),
            cloud.len()
        )));
    }
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| !uncertain[i]).collect();
    let dropped = if cloud.is_empty() { 0.0 } else { 1.0 - keep.len() as f64 / cloud.len() as f64 };
    Ok((cloud.select(&keep), dropped))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Predictive,
    Aleatoric,
    Epistemic,
    Variance,
    CredibleInterval,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Predictive,
        Method::Aleatoric,
        Method::Epistemic,
        Method::Variance,
        Method::CredibleInterval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Predictive => "predictive",
            Method::Aleatoric => "aleatoric",
            Method::Epistemic => "epistemic",
            Method::Variance => "variance",
            Method::CredibleInterval => "credible-interval",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown uncertainty method {s:?}")))
    }
}

/// All five scores and decisions for every point.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyReport {
    pub predicted: Vec<u32>,
    pub u_pred: Vec<f64>,
    pub u_alea: Vec<f64>,
    pub u_ep: Vec<f64>,
    pub variance: Vec<f64>,
    pub intervals: Vec<Vec<[f64; 2]>>,
    pub ci_certain: Vec<bool>,
    pub flag_pred: Vec<bool>,
    pub flag_alea: Vec<bool>,
    pub flag_ep: Vec<bool>,
    pub flag_var: Vec<bool>,
}

impl UncertaintyReport {
    pub fn compute(s: &PredictiveSamples, k_sigma: f64, level: f64) -> Result<Self> {
        let predicted = predict_class(s);
        let u_pred = predictive_uncertainty(s);
        let u_alea = aleatoric_uncertainty(s);
        let u_ep: Vec<f64> = u_pred.iter().zip(&u_alea).map(|(p, a)| (p - a).max(0.0)).collect();
        let variance = predictive_variance(s)?;
        let intervals = credible_intervals(s, level)?;
        let ci_certain = intervals
            .iter()
            .zip(&predicted)
            .map(|(iv, &c)| interval_certain(iv, c as usize))
            .collect();
        Ok(UncertaintyReport {
            flag_pred: flag_uncertain(&u_pred, k_sigma)?,
            flag_alea: flag_uncertain(&u_alea, k_sigma)?,
            flag_ep: flag_uncertain(&u_ep, k_sigma)?,
            flag_var: flag_uncertain(&variance, k_sigma)?,
            predicted,
            u_pred,
            u_alea,
            u_ep,
            variance,
            intervals,
            ci_certain,
        })
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    /// Per-point uncertain flags of one method.
    pub fn uncertain(&self, method: Method) -> Vec<bool> {
        match method {
            Method::Predictive => self.flag_pred.clone(),
            Method::Aleatoric => self.flag_alea.clone(),
            Method::Epistemic => self.flag_ep.clone(),
            Method::Variance => self.flag_var.clone(),
            Method::CredibleInterval => self.ci_certain.iter().map(|c| !c).collect(),
        }
    }

    /// `point_id,u_pred,u_alea,u_ep,var,ci_certain,flag_pred,flag_alea,flag_ep,flag_var`
    /// with booleans as `0`/`1`.
    pub fn to_csv(&self) -> String {
        let b = |x: bool| u8::from(x);
        let mut out = String::from("point_id,u_pred,u_alea,u_ep,var,ci_certain,flag_pred,flag_alea,flag_ep,flag_var\n");
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{},{}",
                self.u_pred[i],
                self.u_alea[i],
                self.u_ep[i],
                self.variance[i],
                b(self.ci_certain[i]),
                b(self.flag_pred[i]),
                b(self.flag_alea[i]),
                b(self.flag_ep[i]),
                b(self.flag_var[i]),
            );
        }
        out
    }
}
