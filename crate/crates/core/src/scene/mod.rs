//! Synthetic factory tacts with exact ground truth.
//!
//! A scene is one assembly-line station: floor, ceiling and two side walls
//! bounding a conveyor band that carries cars, with hangers, columns, lineside
//! racks and loose clutter. Every object is a procedural template placed by a
//! known pose, so segmentation, clustering and pose estimates can be scored
//! exactly. The scene origin is the hall corner at floor level.

mod template;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use template::{clutter_template, template, Aabb, HallDims, Rect, Template};

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud};
use crate::pose::{ObjectPose, RigidTransform};

/// Semantic classes; the discriminant is the label stored in clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Car = 0,
    Hanger = 1,
    Floor = 2,
    Band = 3,
    Lineside = 4,
    Wall = 5,
    Column = 6,
    Ceiling = 7,
    Clutter = 8,
}

impl Class {
    pub const ALL: [Class; 9] = [
        Class::Car,
        Class::Hanger,
        Class::Floor,
        Class::Band,
        Class::Lineside,
        Class::Wall,
        Class::Column,
        Class::Ceiling,
        Class::Clutter,
    ];
    pub const COUNT: usize = 9;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Class::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Car => "car",
            Class::Hanger => "hanger",
            Class::Floor => "floor",
            Class::Band => "band",
            Class::Lineside => "lineside",
            Class::Wall => "wall",
            Class::Column => "column",
            Class::Ceiling => "ceiling",
            Class::Clutter => "clutter",
        }
    }

    /// Building parts that are fitted as planes rather than registered.
    pub fn is_structural(self) -> bool {
        matches!(self, Class::Floor | Class::Wall | Class::Ceiling)
    }

    /// Order of the template's symmetry about its vertical axis: the yaw of
    /// an instance is only defined modulo `360° / order`.
    pub fn yaw_symmetry(self) -> u32 {
        match self {
            Class::Column | Class::Clutter => 4,
            Class::Band | Class::Floor | Class::Ceiling => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Class> {
        Class::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown class {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub tact_length: f64,
    pub tact_width: f64,
    pub tact_height: f64,
    pub classes: Vec<Class>,
    pub noise_sigma_mm: f64,
    pub occlusion_fraction: f64,
    pub points_per_m2: f64,
    pub cars: usize,
    pub hangers: usize,
    pub columns: usize,
    pub lineside: usize,
    pub clutter: usize,
    /// Random scanner stations that each carve one occluded sector.
    pub scanners: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            tact_length: 12.0,
            tact_width: 10.0,
            tact_height: 4.0,
            classes: Class::ALL.to_vec(),
            noise_sigma_mm: 1.0,
            occlusion_fraction: 0.0,
            points_per_m2: 100.0,
            cars: 2,
            hangers: 2,
            columns: 2,
            lineside: 2,
            clutter: 6,
            scanners: 3,
        }
    }
}

impl SceneSpec {
    pub fn hall(&self) -> HallDims {
        HallDims { length: self.tact_length, width: self.tact_width, height: self.tact_height }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tact_length", self.tact_length),
            ("tact_width", self.tact_width),
            ("tact_height", self.tact_height),
            ("points_per_m2", self.points_per_m2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.noise_sigma_mm >= 0.0) || !self.noise_sigma_mm.is_finite() {
            return Err(Error::validation(format!(
                "noise_sigma_mm must be >= 0, got {}",
                self.noise_sigma_mm
            )));
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return Err(Error::validation(format!(
                "occlusion_fraction must lie in [0, 1), got {}",
                self.occlusion_fraction
            )));
        }
        if self.classes.is_empty() {
            return Err(Error::validation("class set is empty"));
        }
        if self.occlusion_fraction > 0.0 && self.scanners == 0 {
            return Err(Error::validation("occlusion requires at least one scanner"));
        }
        // Cars and the band must fit the hall footprint.
        if self.tact_width < 4.0 || self.tact_height < 3.0 {
            return Err(Error::validation("hall must be at least 4 m wide and 3 m high"));
        }
        Ok(())
    }

    fn has(&self, c: Class) -> bool {
        self.classes.contains(&c)
    }
}

/// Placed object with its true pose.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub class: Class,
    pub instance: u32,
    pub transform: RigidTransform,
    pub template: Template,
}

impl SceneObject {
    pub fn pose(&self) -> ObjectPose {
        ObjectPose::from_transform(self.class.name(), self.instance, &self.transform)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub objects: Vec<SceneObject>,
    /// Class index of every point.
    pub labels: Vec<u32>,
    /// Instance id (within its class) of every point.
    pub instances: Vec<u32>,
}

impl GroundTruth {
    pub fn poses(&self) -> Vec<ObjectPose> {
        self.objects.iter().map(SceneObject::pose).collect()
    }

    pub fn poses_of(&self, class: Class) -> Vec<ObjectPose> {
        self.objects.iter().filter(|o| o.class == class).map(SceneObject::pose).collect()
    }

    pub fn object(&self, class: Class, instance: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.class == class && o.instance == instance)
    }

    /// Point indices of one instance.
    pub fn instance_points(&self, class: Class, instance: u32) -> Vec<usize> {
        let label = class.index() as u32;
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == label && self.instances[i] == instance)
            .collect()
    }
}

/// Noise-free template of `class` at default hall size, canonical frame.
pub fn sample_reference(class: Class, points_per_m2: f64) -> Result<PointCloud> {
    if !(points_per_m2 > 0.0) || !points_per_m2.is_finite() {
        return Err(Error::validation(format!("density must be > 0, got {points_per_m2}")));
    }
    let pts = template(class, SceneSpec::default().hall()).sample(points_per_m2);
    PointCloud::from_points(pts)
}

fn yawed(x: f64, y: f64, z: f64, yaw_deg: f64) -> RigidTransform {
    RigidTransform::from_euler_zyx(0.0, 0.0, yaw_deg.to_radians(), Vector3::new(x, y, z))
}

fn footprint(o: &SceneObject) -> (f64, f64, f64, f64) {
    let (lo, hi) = o.template.bounds();
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for cx in [lo.x, hi.x] {
        for cy in [lo.y, hi.y] {
            let p = o.transform.apply(&Point::new(cx, cy, 0.0));
            b = (b.0.min(p.x), b.1.min(p.y), b.2.max(p.x), b.3.max(p.y));
        }
    }
    b
}

fn place_objects(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Vec<SceneObject>> {
    let hall = spec.hall();
    let (l, w, h) = (hall.length, hall.width, hall.height);
    let mut objects = Vec::new();
    let push = |objects: &mut Vec<SceneObject>, class: Class, transform: RigidTransform, template: Template| {
        let instance = objects.iter().filter(|o: &&SceneObject| o.class == class).count() as u32;
        objects.push(SceneObject { class, instance, transform, template });
    };
    let slot = |i: usize, n: usize| l * (i as f64 + 0.5) / n as f64;

    for class in Class::ALL {
        if !spec.has(class) {
            continue;
        }
        let tpl = template(class, hall);
        match class {
            Class::Car => {
                for i in 0..spec.cars {
                    let t = yawed(
                        slot(i, spec.cars) + rng.random_range(-0.3..0.3),
                        w / 2.0 + rng.random_range(-0.05..0.05),
                        if spec.has(Class::Band) { template::BAND_HEIGHT } else { 0.0 },
                        rng.random_range(-3.0..3.0),
                    );
                    push(&mut objects, class, t, tpl.clone());
                }
            }
            Class::Hanger => {
                for i in 0..spec.hangers {
                    let t = yawed(
                        slot(i, spec.hangers) - 0.8 + rng.random_range(-0.3..0.3),
                        1.6 + rng.random_range(-0.1..0.1),
                        0.0,
                        rng.random_range(-5.0..5.0),
                    );
                    push(&mut objects, class, t, tpl.clone());
                }
            }
            Class::Floor => push(&mut objects, class, yawed(l / 2.0, w / 2.0, 0.0, 0.0), tpl),
            Class::Ceiling => push(&mut objects, class, yawed(l / 2.0, w / 2.0, h, 0.0), tpl),
            Class::Wall => {
                push(&mut objects, class, yawed(l / 2.0, 0.0, 0.0, 0.0), tpl.clone());
                push(&mut objects, class, yawed(l / 2.0, w, 0.0, 0.0), tpl);
            }
            Class::Band => push(&mut objects, class, yawed(l / 2.0, w / 2.0, 0.0, 0.0), tpl),
            Class::Column => {
                for i in 0..spec.columns {
                    push(&mut objects, class, yawed(slot(i, spec.columns), w - 0.5, 0.0, 0.0), tpl.clone());
                }
            }
            Class::Lineside => {
                for i in 0..spec.lineside {
                    let t = yawed(
                        slot(i, spec.lineside) + rng.random_range(-0.5..0.5),
                        w - 1.5,
                        0.0,
                        rng.random_range(-2.0..2.0),
                    );
                    push(&mut objects, class, t, tpl.clone());
                }
            }
            Class::Clutter => {}
        }
    }

    if spec.has(Class::Clutter) {
        let taken: Vec<_> = objects
            .iter()
            .filter(|o| !o.class.is_structural())
            .map(footprint)
            .collect();
        let mut placed: Vec<(f64, f64, f64, f64)> = Vec::new();
        for _ in 0..spec.clutter {
            let size = [
                rng.random_range(0.2..0.6),
                rng.random_range(0.2..0.6),
                rng.random_range(0.2..0.6),
            ];
            let tpl = clutter_template(size);
            let mut ok = None;
            for _ in 0..1000 {
                let t = yawed(
                    rng.random_range(0.6..l - 0.6),
                    rng.random_range(0.6..w - 0.6),
                    0.0,
                    rng.random_range(-180.0..180.0),
                );
                let cand = SceneObject { class: Class::Clutter, instance: 0, transform: t, template: tpl.clone() };
                let f = footprint(&cand);
                let clear = taken.iter().chain(&placed).all(|g| {
                    f.2 + 0.3 < g.0 || g.2 + 0.3 < f.0 || f.3 + 0.3 < g.1 || g.3 + 0.3 < f.1
                });
                if clear {
                    ok = Some((t, f));
                    break;
                }
            }
            let Some((t, f)) = ok else {
                return Err(Error::validation("no free floor space left for clutter"));
            };
            placed.push(f);
            push(&mut objects, Class::Clutter, t, tpl);
        }
    }
    Ok(objects)
}

/// Samples a labeled scene. Deterministic in `spec` (including its seed).
pub fn generate_scene(spec: &SceneSpec) -> Result<(PointCloud, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let objects = place_objects(spec, &mut rng)?;
    let inverses: Vec<RigidTransform> = objects.iter().map(|o| o.transform.inverse()).collect();

    let mut points = Vec::new();
    let mut labels = Vec::new();
    let mut instances = Vec::new();
    for (oi, o) in objects.iter().enumerate() {
        for local in o.template.sample(spec.points_per_m2) {
            let p = o.transform.apply(&local);
            // Surfaces buried inside another solid are never seen.
            let hidden = objects.iter().enumerate().any(|(bi, b)| {
                bi != oi && {
                    let q = inverses[bi].apply(&p);
                    b.template.boxes.iter().any(|bx| bx.contains(&q, 1e-3))
                }
            });
            if !hidden {
                points.push(p);
                labels.push(o.class.index() as u32);
                instances.push(o.instance);
            }
        }
    }

    if spec.noise_sigma_mm > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma_mm / 1000.0).expect("sigma is finite and positive");
        for p in &mut points {
            for k in 0..3 {
                p[k] += normal.sample(&mut rng);
            }
        }
    }

    let keep = occlusion_mask(spec, &points, &mut rng);
    let points = retain(points, &keep);
    let labels = retain(labels, &keep);
    let instances = retain(instances, &keep);

    let cloud = PointCloud::with_labels(points, labels.clone())?;
    Ok((cloud, GroundTruth { objects, labels, instances }))
}

fn retain<T>(v: Vec<T>, keep: &[bool]) -> Vec<T> {
    v.into_iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| x).collect()
}

/// Removes `occlusion_fraction` of the points as contiguous azimuth sectors
/// seen from random scanner stations.
fn occlusion_mask(spec: &SceneSpec, points: &[Point], rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut keep = vec![true; points.len()];
    let total = (spec.occlusion_fraction * points.len() as f64).round() as usize;
    if total == 0 {
        return keep;
    }
    let n = spec.scanners;
    for s in 0..n {
        let quota = total / n + usize::from(s < total % n);
        let sx = rng.random_range(0.0..spec.tact_length);
        let sy = rng.random_range(0.0..spec.tact_width);
        let start = rng.random_range(-PI..PI);
        let mut keyed: Vec<(f64, usize)> = (0..points.len())
            .filter(|&i| keep[i])
            .map(|i| {
                let az = (points[i].y - sy).atan2(points[i].x - sx);
                ((az - start).rem_euclid(2.0 * PI), i)
            })
            .collect();
        let quota = quota.min(keyed.len());
        if quota == 0 {
            continue;
        }
        keyed.select_nth_unstable_by(quota - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in &keyed[..quota] {
            keep[i] = false;
        }
    }
    keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::KdTree;

    fn quiet(classes: Vec<Class>) -> SceneSpec {
        SceneSpec { classes, noise_sigma_mm: 0.0, points_per_m2: 50.0, ..SceneSpec::default() }
    }

    #[test]
    fn floor_only_scene_is_flat() {
        let (cloud, gt) = generate_scene(&quiet(vec![Class::Floor])).unwrap();
        assert!(!cloud.is_empty());
        assert!(cloud.labels().unwrap().iter().all(|&l| l == Class::Floor as u32));
        assert!(cloud.points().iter().all(|p| p.z == 0.0));
        assert_eq!(gt.objects.len(), 1);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = SceneSpec { seed: 9, occlusion_fraction: 0.2, points_per_m2: 30.0, ..SceneSpec::default() };
        let (a, ga) = generate_scene(&spec).unwrap();
        let (b, gb) = generate_scene(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        let (c, _) = generate_scene(&SceneSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn car_count_is_preserved() {
        let spec = SceneSpec { points_per_m2: 20.0, ..SceneSpec::default() };
        let (_, gt) = generate_scene(&spec).unwrap();
        assert_eq!(gt.poses_of(Class::Car).len(), 2);
        for o in &gt.objects {
            if !o.class.is_structural() {
                assert!(!gt.instance_points(o.class, o.instance).is_empty(), "{} {}", o.class, o.instance);
            }
        }
    }

    #[test]
    fn occlusion_removes_requested_share() {
        let base = SceneSpec { points_per_m2: 20.0, ..SceneSpec::default() };
        let (full, _) = generate_scene(&base).unwrap();
        let (occ, gt) = generate_scene(&SceneSpec { occlusion_fraction: 0.2, ..base }).unwrap();
        let expect = full.len() - (0.2 * full.len() as f64).round() as usize;
        assert_eq!(occ.len(), expect);
        assert_eq!(gt.labels.len(), occ.len());
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let bad = [
            SceneSpec { tact_length: 0.0, ..SceneSpec::default() },
            SceneSpec { occlusion_fraction: 1.0, ..SceneSpec::default() },
            SceneSpec { points_per_m2: -1.0, ..SceneSpec::default() },
            SceneSpec { classes: vec![], ..SceneSpec::default() },
            SceneSpec { noise_sigma_mm: f64::NAN, ..SceneSpec::default() },
        ];
        for s in bad {
            assert!(generate_scene(&s).unwrap_err().is_validation());
        }
    }

    #[test]
    fn car_reference_bounds_match_template() {
        let c = sample_reference(Class::Car, 200.0).unwrap();
        let (lo, hi) = c.bounds().unwrap();
        assert_eq!([lo.x, lo.y, lo.z], [-2.3, -0.9, 0.2]);
        assert_eq!([hi.x, hi.y, hi.z], [2.3, 0.9, 1.45]);
    }

    #[test]
    fn doubling_density_doubles_points() {
        // Lattice rounding dominates on the 0.4 m clutter cube, so skip it.
        for class in Class::ALL.into_iter().filter(|&c| c != Class::Clutter) {
            let a = sample_reference(class, 200.0).unwrap().len() as f64;
            let b = sample_reference(class, 400.0).unwrap().len() as f64;
            assert!((b / a - 2.0).abs() <= 0.1, "{class}: {}", b / a);
        }
    }

    #[test]
    fn floor_reference_is_centered() {
        let c = sample_reference(Class::Floor, 100.0).unwrap().centroid().unwrap();
        assert!(c.coords.norm() < 1e-9);
    }

    #[test]
    fn unknown_class_is_a_validation_error() {
        assert!("robot".parse::<Class>().unwrap_err().is_validation());
        assert_eq!("lineside".parse::<Class>().unwrap(), Class::Lineside);
        assert!(sample_reference(Class::Car, 0.0).is_err());
    }

    fn rms_one_way(from: &[Point], tree: &KdTree) -> f64 {
        let s: f64 = from.iter().map(|p| tree.nearest(p).unwrap().1).sum();
        (s / from.len() as f64).sqrt()
    }

    #[test]
    fn posed_references_align_with_instances() {
        let density = 60.0;
        let spec = SceneSpec { points_per_m2: density, noise_sigma_mm: 2.0, ..SceneSpec::default() };
        let (cloud, gt) = generate_scene(&spec).unwrap();
        for o in gt.objects.iter().filter(|o| !o.class.is_structural() && o.class != Class::Clutter) {
            let idx = gt.instance_points(o.class, o.instance);
            let inst: Vec<Point> = idx.iter().map(|&i| cloud.points()[i]).collect();
            let reference = sample_reference(o.class, density).unwrap();
            let posed = o.pose().to_transform().apply_all(reference.points());
            let a = rms_one_way(&inst, &KdTree::build(&posed));
            let b = rms_one_way(&posed, &KdTree::build(&inst));
            let rms = ((a * a + b * b) / 2.0).sqrt() * 1000.0;
            assert!(rms <= 3.0 * spec.noise_sigma_mm, "{} {}: {rms} mm", o.class, o.instance);
        }
    }

    #[test]
    fn floor_and_ceiling_dominate() {
        let (cloud, _) = generate_scene(&SceneSpec { points_per_m2: 30.0, ..SceneSpec::default() }).unwrap();
        let l = cloud.labels().unwrap();
        let big = l
            .iter()
            .filter(|&&x| x == Class::Floor as u32 || x == Class::Ceiling as u32)
            .count();
        assert!(big as f64 / l.len() as f64 >= 0.4, "{}", big as f64 / l.len() as f64);
    }
}
