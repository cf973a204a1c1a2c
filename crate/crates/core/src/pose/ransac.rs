use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{KdTree, Point};

use super::transform::{fit_transform, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Hypothesis budget; one iteration tests one target anchor.
    pub n_iter: usize,
    /// Distance (meters) under which a transformed source point is an inlier
    /// and two triangle sides count as congruent.
    pub inlier_tol: f64,
    pub seed: u64,
    /// Below this best inlier fraction the alignment fails.
    pub min_inlier_fraction: f64,
    /// Search ends early once a model reaches this inlier fraction.
    pub stop_fraction: f64,
    /// Triangle sides are kept between these fractions of the source's
    /// bounding-box diagonal.
    pub min_span: f64,
    pub max_span: f64,
    /// Source points used for scoring.
    pub score_points: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            n_iter: 4096,
            inlier_tol: 0.02,
            seed: 0,
            min_inlier_fraction: 0.1,
            stop_fraction: 0.95,
            min_span: 0.2,
            max_span: 0.7,
            score_points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    /// Maps the source onto the target.
    pub transform: RigidTransform,
    /// Share of source points within `inlier_tol` of the target.
    pub inlier_fraction: f64,
}

fn diagonal(points: &[Point]) -> f64 {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Three mutually distant, non-collinear source points. Thin or elongated
/// clouds admit no wide triangle, so the requirements relax in stages.
fn sample_triplet(points: &[Point], lo: f64, hi: f64, rng: &mut impl Rng) -> Option<[usize; 3]> {
    let n = points.len();
    for (shrink, min_sine) in [(1.0, 0.25), (0.5, 0.1), (0.25, 0.05)] {
        let ok = |d: f64| d >= lo * shrink && d <= hi;
        for _ in 0..200 {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let c = rng.random_range(0..n);
            let (pa, pb, pc) = (points[a], points[b], points[c]);
            let (ab, ac, bc) = ((pb - pa).norm(), (pc - pa).norm(), (pc - pb).norm());
            if !(ok(ab) && ok(ac) && ok(bc)) {
                continue;
            }
            // Sine of the smallest-angle corner bounded away from zero.
            let area2 = (pb - pa).cross(&(pc - pa)).norm();
            if area2 >= min_sine * ab.max(ac).max(bc).powi(2) {
                return Some([a, b, c]);
            }
        }
    }
    None
}

fn inlier_count(points: &[Point], idx: &[usize], t: &RigidTransform, tree: &KdTree, tol2: f64) -> usize {
    idx.iter()
        .filter(|&&i| tree.nearest(&t.apply(&points[i])).is_some_and(|(_, d2)| d2 <= tol2))
        .count()
}

/// Coarse alignment without an initial guess.
///
/// Each round samples a wide source triangle and walks target anchors in
/// random order; for an anchor `a'` every target pair `(b', c')` whose
/// distances to `a'` and to each other match the triangle's sides within
/// `inlier_tol` yields a hypothesis, scored by its inlier count.
pub fn ransac_align(source: &[Point], target: &[Point], params: &RansacParams) -> Result<RansacResult> {
    if source.len() < 3 || target.len() < 3 {
        return Err(Error::Estimation(format!(
            "ransac needs >= 3 points per cloud, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tree = KdTree::build(target);
    let tol = params.inlier_tol;
    let tol2 = tol * tol;
    let diag = diagonal(source);

    let mut score_idx: Vec<usize> = (0..source.len()).collect();
    score_idx.shuffle(&mut rng);
    score_idx.truncate(params.score_points.max(3));
    let screen = &score_idx[..score_idx.len().min(32)];

    let mut anchors: Vec<usize> = (0..target.len()).collect();
    let mut best: Option<(usize, RigidTransform)> = None;
    let mut best_screen = 0;
    let mut spent = 0;
    let mut shell_ab = Vec::new();
    let mut shell_ac = Vec::new();
    'rounds: while spent < params.n_iter {
        let Some([a, b, c]) = sample_triplet(source, params.min_span * diag, params.max_span * diag, &mut rng)
        else {
            return Err(Error::Estimation("source has no well-spread non-collinear triplet".into()));
        };
        let (pa, pb, pc) = (source[a], source[b], source[c]);
        let d_ab = (pb - pa).norm();
        let d_ac = (pc - pa).norm();
        let d_bc = (pc - pb).norm();
        let reach = d_ab.max(d_ac) + tol;
        anchors.shuffle(&mut rng);
        for &anchor in &anchors {
            if spent >= params.n_iter {
                break 'rounds;
            }
            spent += 1;
            let qa = target[anchor];
            shell_ab.clear();
            shell_ac.clear();
            tree.for_each_within(&qa, reach, |j, d2| {
                let d = d2.sqrt();
                if (d - d_ab).abs() <= tol {
                    shell_ab.push(j);
                }
                if (d - d_ac).abs() <= tol {
                    shell_ac.push(j);
                }
            });
            // Tree order varies with the anchor's position; sort for determinism.
            shell_ab.sort_unstable();
            shell_ac.sort_unstable();
            for &jb in &shell_ab {
                let qb = target[jb];
                for &jc in &shell_ac {
                    if jc == jb || ((target[jc] - qb).norm() - d_bc).abs() > tol {
                        continue;
                    }
                    let Ok(t) = fit_transform(&[pa, pb, pc], &[qa, qb, target[jc]], false) else { continue };
                    let s = inlier_count(source, screen, &t, &tree, tol2);
                    if s < best_screen / 2 || 2 * s < screen.len() / 2 {
                        continue;
                    }
                    let full = inlier_count(source, &score_idx, &t, &tree, tol2);
                    if best.as_ref().is_none_or(|(n, _)| full > *n) {
                        best_screen = best_screen.max(s);
                        best = Some((full, t));
                        if full as f64 >= params.stop_fraction * score_idx.len() as f64 {
                            break 'rounds;
                        }
                    }
                }
            }
        }
    }
    let Some((_, transform)) = best else {
        return Err(Error::AlignmentFailure { inlier_fraction: 0.0, required: params.min_inlier_fraction });
    };
    let all: Vec<usize> = (0..source.len()).collect();
    let inlier_fraction = inlier_count(source, &all, &transform, &tree, tol2) as f64 / source.len() as f64;
    if inlier_fraction < params.min_inlier_fraction {
        return Err(Error::AlignmentFailure { inlier_fraction, required: params.min_inlier_fraction });
    }
    Ok(RansacResult { transform, inlier_fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{sample_reference, Class};
    use nalgebra::Vector3;

    fn car() -> Vec<Point> {
        sample_reference(Class::Car, 60.0).unwrap().points().to_vec()
    }

    #[test]
    fn exact_copy_under_arbitrary_motion() {
        let src = car();
        let t = RigidTransform::from_euler_zyx(0.4, -1.1, 2.5, Vector3::new(3.0, -7.0, 1.5));
        let dst = t.apply_all(&src);
        let r = ransac_align(&src, &dst, &RansacParams { inlier_tol: 0.005, ..RansacParams::default() }).unwrap();
        assert!(r.inlier_fraction >= 0.99, "{}", r.inlier_fraction);
        assert!(r.transform.inverse().compose(&t).angle() < 1e-6);
    }

    #[test]
    fn unrelated_cloud_fails() {
        let src = car();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise: Vec<Point> = (0..600)
            .map(|_| Point::new(rng.random_range(0.0..5.0), rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)))
            .collect();
        let p = RansacParams { inlier_tol: 0.01, n_iter: 600, ..RansacParams::default() };
        assert!(matches!(ransac_align(&src, &noise, &p), Err(Error::AlignmentFailure { .. })));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let src = car();
        let t = RigidTransform::from_euler_zyx(0.0, 0.0, 1.0, Vector3::new(1.0, 2.0, 0.0));
        let dst = t.apply_all(&src);
        let p = RansacParams { seed: 42, inlier_tol: 0.005, ..RansacParams::default() };
        assert_eq!(ransac_align(&src, &dst, &p).unwrap(), ransac_align(&src, &dst, &p).unwrap());
    }

    #[test]
    fn equivariant_under_target_rotation() {
        let src = car();
        let t = RigidTransform::from_euler_zyx(0.1, 0.2, -0.7, Vector3::new(0.5, 0.0, -1.0));
        let dst = t.apply_all(&src);
        let g = RigidTransform::from_euler_zyx(-0.3, 0.5, 1.9, Vector3::new(-2.0, 4.0, 0.25));
        let dst_g = g.apply_all(&dst);
        let p = RansacParams { inlier_tol: 0.005, ..RansacParams::default() };
        let r = ransac_align(&src, &dst, &p).unwrap().transform;
        let rg = ransac_align(&src, &dst_g, &p).unwrap().transform;
        let diff = g.compose(&r).inverse().compose(&rg);
        assert!(diff.angle() < 1e-6 && diff.translation.norm() < 1e-6, "{diff:?}");
    }
}
