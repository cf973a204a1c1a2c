use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Point, PointCloud};
use crate::error::{Error, Result};

/// One x–y grid cell of a cloud, resampled to a fixed point count.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Lower (x, y) corner of the cell footprint.
    pub origin: [f64; 2],
    pub edge: f64,
    /// Every cloud index falling inside the cell.
    pub point_indices: Vec<usize>,
    /// Exactly `block_size` cloud indices drawn from `point_indices`.
    pub resampled: Vec<usize>,
}

impl Block {
    /// Footprint test with a rounding allowance of 1e-9 edge lengths.
    pub fn contains_xy(&self, p: &Point) -> bool {
        let slack = 1e-9 * self.edge;
        p.x >= self.origin[0] - slack
            && p.x <= self.origin[0] + self.edge + slack
            && p.y >= self.origin[1] - slack
            && p.y <= self.origin[1] + self.edge + slack
    }
}

/// Cuts the cloud into an axis-aligned x–y grid of `block_edge` cells (full
/// height) and resamples each occupied cell to `block_size` points.
///
/// Cells with more points are subsampled without replacement; cells with fewer
/// keep every point once and top up with draws with replacement. Blocks are
/// ordered by (column, row) and each draws from its own seed-derived stream.
pub fn partition_blocks(
    cloud: &PointCloud,
    block_edge: f64,
    block_size: usize,
    seed: u64,
) -> Result<Vec<Block>> {
    if !(block_edge > 0.0) || !block_edge.is_finite() {
        return Err(Error::validation(format!("block edge must be > 0, got {block_edge}")));
    }
    if block_size == 0 {
        return Err(Error::validation("block size must be >= 1"));
    }
    let Some((lo, _)) = cloud.bounds() else {
        return Ok(Vec::new());
    };

    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let cx = ((p.x - lo.x) / block_edge).floor() as i64;
        let cy = ((p.y - lo.y) / block_edge).floor() as i64;
        cells.entry((cx, cy)).or_default().push(i);
    }

    let blocks = cells
        .into_iter()
        .enumerate()
        .map(|(n, ((cx, cy), point_indices))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n as u64);
            let resampled = resample(&point_indices, block_size, &mut rng);
            Block {
                origin: [lo.x + cx as f64 * block_edge, lo.y + cy as f64 * block_edge],
                edge: block_edge,
                point_indices,
                resampled,
            }
        })
        .collect();
    Ok(blocks)
}

/// Draws exactly `size` entries of `indices` (see [`partition_blocks`]).
pub(crate) fn resample(indices: &[usize], size: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = indices.len();
    if n >= size {
        let mut picked: Vec<usize> = index::sample(rng, n, size).into_iter().map(|k| indices[k]).collect();
        picked.sort_unstable();
        picked
    } else {
        let mut out = indices.to_vec();
        out.extend((n..size).map(|_| indices[rng.random_range(0..n)]));
        out
    }
}

/// Replaces the points of each occupied `voxel`-sized cube by their centroid.
///
/// The representative's label is the majority label of the voxel with ties
/// going to the lowest class index; colors are averaged. Output is ordered by
/// voxel key.
pub fn downsample_voxel(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(Error::validation(format!("voxel size must be > 0, got {voxel}")));
    }
    let mut voxels: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let key = (
            (p.x / voxel).floor() as i64,
            (p.y / voxel).floor() as i64,
            (p.z / voxel).floor() as i64,
        );
        voxels.entry(key).or_default().push(i);
    }

    let mut points = Vec::with_capacity(voxels.len());
    let mut colors = cloud.colors().map(|_| Vec::with_capacity(voxels.len()));
    let mut labels = cloud.labels().map(|_| Vec::with_capacity(voxels.len()));
    for members in voxels.values() {
        let n = members.len() as f64;
        let sum = members
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, &i| acc + cloud.points()[i].coords);
        points.push(Point::from(sum / n));

        if let (Some(out), Some(src)) = (colors.as_mut(), cloud.colors()) {
            let mut acc = [0.0f64; 3];
            for &i in members {
                for k in 0..3 {
                    acc[k] += f64::from(src[i][k]);
                }
            }
            out.push(acc.map(|c| (c / n).round() as u8));
        }
        if let (Some(out), Some(src)) = (labels.as_mut(), cloud.labels()) {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for &i in members {
                *counts.entry(src[i]).or_default() += 1;
            }
            // BTreeMap iterates ascending, and max_by_key keeps the last
            // maximum, so reverse to favor the lowest label on ties.
            let winner = counts
                .iter()
                .rev()
                .max_by_key(|(_, &c)| c)
                .map(|(&l, _)| l)
                .expect("voxel is non-empty");
            out.push(winner);
        }
    }
    PointCloud::new(points, colors, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_cloud(n: usize, extent: [f64; 2], seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| {
                Point::new(
                    rng.random_range(0.0..extent[0]),
                    rng.random_range(0.0..extent[1]),
                    rng.random_range(0.0..3.0),
                )
            })
            .collect();
        PointCloud::from_points(pts).unwrap()
    }

    #[test]
    fn full_cell_subsamples_to_block_size() {
        let c = random_cloud(8192, [0.9, 0.9], 1);
        let blocks = partition_blocks(&c, 1.0, 4096, 7).unwrap();
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert_eq!(b.resampled.len(), 4096);
        let mut uniq = b.resampled.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 4096, "subsampling must not repeat points");
    }

    #[test]
    fn sparse_cell_upsamples_with_replacement() {
        let c = random_cloud(10, [0.5, 0.5], 2);
        let blocks = partition_blocks(&c, 1.0, 4096, 7).unwrap();
        assert_eq!(blocks.len(), 1);
        let mut distinct = blocks[0].resampled.clone();
        distinct.sort_unstable();
        distinct.dedup();
        assert_eq!(blocks[0].resampled.len(), 4096);
        assert_eq!(distinct, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn two_cells_give_two_blocks() {
        let c = PointCloud::from_points(vec![Point::new(0.1, 0.1, 0.0), Point::new(1.5, 0.2, 2.0)])
            .unwrap();
        let blocks = partition_blocks(&c, 1.0, 16, 0).unwrap();
        assert_eq!(blocks.len(), 2);
    }

    #[test]
    fn blocks_partition_the_cloud_and_stay_in_footprint() {
        let c = random_cloud(5000, [7.3, 4.1], 3);
        let blocks = partition_blocks(&c, 1.5, 256, 11).unwrap();
        let mut seen = vec![0usize; c.len()];
        for b in &blocks {
            assert_eq!(b.resampled.len(), 256);
            for &i in &b.point_indices {
                seen[i] += 1;
            }
            for &i in &b.resampled {
                assert!(b.point_indices.binary_search(&i).is_ok());
                assert!(b.contains_xy(&c.points()[i]));
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
        assert_eq!(partition_blocks(&c, 1.5, 256, 11).unwrap(), blocks);
    }

    #[test]
    fn rejects_bad_edge() {
        let c = random_cloud(5, [1.0, 1.0], 0);
        assert!(partition_blocks(&c, 0.0, 16, 0).is_err());
        assert!(partition_blocks(&c, -1.0, 16, 0).is_err());
    }

    #[test]
    fn voxel_centroid() {
        let c = PointCloud::from_points(vec![Point::new(0.0, 0.0, 0.0), Point::new(0.01, 0.0, 0.0)])
            .unwrap();
        let d = downsample_voxel(&c, 1.0).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.points()[0].x - 0.005).abs() < 1e-15);
        assert_eq!(d.points()[0].y, 0.0);
    }

    #[test]
    fn small_voxel_keeps_every_point() {
        let c = random_cloud(200, [1.0, 1.0], 4);
        let mut min_d = f64::INFINITY;
        for (i, a) in c.points().iter().enumerate() {
            for b in &c.points()[i + 1..] {
                min_d = min_d.min((a - b).norm());
            }
        }
        let d = downsample_voxel(&c, min_d / 2.0).unwrap();
        assert_eq!(d.len(), c.len());
    }

    #[test]
    fn voxel_majority_label_with_low_tie_break() {
        let pts = vec![Point::new(0.1, 0.1, 0.1), Point::new(0.2, 0.2, 0.2), Point::new(0.3, 0.3, 0.3)];
        let c = PointCloud::with_labels(pts.clone(), vec![1, 1, 2]).unwrap();
        assert_eq!(downsample_voxel(&c, 1.0).unwrap().labels().unwrap(), &[1]);
        let tie = PointCloud::with_labels(pts[..2].to_vec(), vec![3, 2]).unwrap();
        assert_eq!(downsample_voxel(&tie, 1.0).unwrap().labels().unwrap(), &[2]);
    }
}
