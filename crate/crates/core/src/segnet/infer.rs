use nalgebra::Vector3;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::layer::LayerNoise;
use super::network::{forward, LabeledBlock, Mode, Network};
use crate::error::{Error, Result};
use crate::geometry::{partition_blocks, Block, Point, PointCloud};

/// Axis-aligned extent of the whole room, used to normalize coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomFrame {
    pub lo: Vector3<f64>,
    pub extent: Vector3<f64>,
}

impl RoomFrame {
    pub fn of(cloud: &PointCloud) -> Result<RoomFrame> {
        let (lo, hi) = cloud.bounds().ok_or_else(|| Error::validation("cloud is empty"))?;
        let extent = (hi - lo).map(|e| if e > 1e-9 { e } else { 1.0 });
        Ok(RoomFrame { lo: lo.coords, extent })
    }
}

/// Feature rows for `indices`: coordinates relative to the block's footprint
/// center (height above the room floor), then room-normalized coordinates
/// shifted to `[-0.5, 0.5]`.
pub fn block_features(points: &[Point], indices: &[usize], block: &Block, room: &RoomFrame) -> Array2<f64> {
    let cx = block.origin[0] + block.edge / 2.0;
    let cy = block.origin[1] + block.edge / 2.0;
    let mut x = Array2::zeros((indices.len(), super::FEATURES));
    for (r, &i) in indices.iter().enumerate() {
        let p = &points[i];
        let rel = (p.coords - room.lo).component_div(&room.extent);
        let row = [p.x - cx, p.y - cy, p.z - room.lo.z, rel.x - 0.5, rel.y - 0.5, rel.z - 0.5];
        for (c, v) in row.into_iter().enumerate() {
            x[[r, c]] = v;
        }
    }
    x
}

/// Resampled training blocks of a labeled cloud.
pub fn labeled_blocks(cloud: &PointCloud, block_edge: f64, block_size: usize, seed: u64) -> Result<Vec<LabeledBlock>> {
    let labels = cloud
        .labels()
        .ok_or_else(|| Error::validation("training cloud has no labels"))?;
    let room = RoomFrame::of(cloud)?;
    Ok(partition_blocks(cloud, block_edge, block_size, seed)?
        .iter()
        .map(|b| LabeledBlock {
            features: block_features(cloud.points(), &b.resampled, b, &room),
            labels: b.resampled.iter().map(|&i| labels[i]).collect(),
        })
        .collect())
}

/// Class probabilities of `n` points under `k` weight draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    k: usize,
    n: usize,
    m: usize,
    /// Sample-major `k × n × m`.
    probs: Vec<f64>,
}

impl PredictiveSamples {
    pub fn new(k: usize, n: usize, m: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != k * n * m {
            return Err(Error::validation(format!(
                "{} probabilities for shape {k}×{n}×{m}",
                probs.len()
            )));
        }
        if k == 0 || m == 0 {
            return Err(Error::validation("need at least one sample and one class"));
        }
        for row in probs.chunks(m) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-6 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::validation(format!("probability row {row:?} is not a distribution")));
            }
        }
        Ok(PredictiveSamples { k, n, m, probs })
    }

    pub fn samples(&self) -> usize {
        self.k
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.m
    }

    /// Probabilities of point `i` under sample `s`.
    pub fn row(&self, s: usize, i: usize) -> &[f64] {
        let start = (s * self.n + i) * self.m;
        &self.probs[start..start + self.m]
    }

    /// Monte Carlo mean distribution of point `i`.
    pub fn mean(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for s in 0..self.k {
            for (o, p) in out.iter_mut().zip(self.row(s, i)) {
                *o += p;
            }
        }
        out.iter_mut().for_each(|o| *o /= self.k as f64);
        out
    }

    /// Subset of the points, in the given order.
    pub fn select(&self, indices: &[usize]) -> PredictiveSamples {
        let mut probs = Vec::with_capacity(self.k * indices.len() * self.m);
        for s in 0..self.k {
            for &i in indices {
                probs.extend_from_slice(self.row(s, i));
            }
        }
        PredictiveSamples { k: self.k, n: indices.len(), m: self.m, probs }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

fn softmax_rows(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    z
}

/// Noise of Monte Carlo draw `sample`: an independent stream of `seed`.
pub fn sample_noise_for(net: &Network, seed: u64, sample: usize) -> Vec<LayerNoise> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample as u64);
    net.sample_noise(&mut rng)
}

fn draw_weights(net: &Network, seed: u64, sample: usize) -> super::Weights {
    match net.config.mode {
        Mode::Frequentist => net.mean_weights(),
        Mode::Bayesian => net
            .realize(&sample_noise_for(net, seed, sample))
            .expect("sampled noise matches layer shapes"),
    }
}

/// `k` Monte Carlo softmax predictions for one block. Draws run in parallel;
/// each uses its own seed-derived stream, so results do not depend on
/// scheduling.
pub fn predict_mc(net: &Network, features: &Array2<f64>, k: usize, seed: u64) -> Result<PredictiveSamples> {
    net.check_input(features)?;
    if k == 0 {
        return Err(Error::validation("need K >= 1 Monte Carlo samples"));
    }
    let n = features.nrows();
    let m = net.config.classes;
    let parts: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|s| {
            let wt = draw_weights(net, seed, s);
            softmax_rows(forward(&net.config, &wt, features.view())).into_iter().collect()
        })
        .collect();
    PredictiveSamples::new(k, n, m, parts.concat())
}

/// Argmax of the Monte Carlo mean distribution; ties go to the lowest class.
pub fn predict_class(samples: &PredictiveSamples) -> Vec<u32> {
    (0..samples.points())
        .map(|i| {
            let mean = samples.mean(i);
            let mut best = 0;
            for (c, &p) in mean.iter().enumerate() {
                if p > mean[best] {
                    best = c;
                }
            }
            best as u32
        })
        .collect()
}

/// Monte Carlo predictions for every point of a cloud.
///
/// Each grid block is shuffled and cut into nearly equal chunks of at most
/// `block_size` points; a chunk is evaluated as one network input. Max
/// pooling ignores duplicates, so a chunk smaller than `block_size` behaves
/// like its upsampled-with-replacement version.
pub fn segment_cloud(net: &Network, cloud: &PointCloud, block_edge: f64, k: usize, seed: u64) -> Result<PredictiveSamples> {
    if k == 0 {
        return Err(Error::validation("need K >= 1 Monte Carlo samples"));
    }
    let room = RoomFrame::of(cloud)?;
    let block_size = net.config.block_size;
    let blocks = partition_blocks(cloud, block_edge, 1, seed)?;
    let mut chunks: Vec<(Vec<usize>, Array2<f64>)> = Vec::new();
    for (bi, b) in blocks.iter().enumerate() {
        let mut idx = b.point_indices.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(bi as u64);
        idx.shuffle(&mut rng);
        let n_chunks = idx.len().div_ceil(block_size);
        let base = idx.len() / n_chunks;
        let extra = idx.len() % n_chunks;
        let mut start = 0;
        for c in 0..n_chunks {
            let len = base + usize::from(c < extra);
            let part = idx[start..start + len].to_vec();
            start += len;
            let x = block_features(cloud.points(), &part, b, &room);
            chunks.push((part, x));
        }
    }

    let n = cloud.len();
    let m = net.config.classes;
    let parts: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|s| {
            let wt = draw_weights(net, seed, s);
            let mut out = vec![0.0; n * m];
            for (idx, x) in &chunks {
                let p = softmax_rows(forward(&net.config, &wt, x.view()));
                for (r, &i) in idx.iter().enumerate() {
                    for c in 0..m {
                        out[i * m + c] = p[[r, c]];
                    }
                }
            }
            out
        })
        .collect();
    PredictiveSamples::new(k, n, m, parts.concat())
}
