use nalgebra::Vector3;

use super::Class;
use crate::geometry::Point;

/// Axis-aligned box in a template's canonical frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub lo: Vector3<f64>,
    pub hi: Vector3<f64>,
}

impl Aabb {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        Aabb { lo: Vector3::from(lo), hi: Vector3::from(hi) }
    }

    pub fn contains(&self, p: &Point, margin: f64) -> bool {
        (0..3).all(|k| p[k] >= self.lo[k] - margin && p[k] <= self.hi[k] + margin)
    }
}

/// Parallelogram patch `corner + s·a + t·b`, `s, t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub corner: Vector3<f64>,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
}

impl Rect {
    fn area(&self) -> f64 {
        self.a.cross(&self.b).norm()
    }

    /// Regular lattice including the patch boundary, about `density` points
    /// per square meter.
    fn sample(&self, density: f64, out: &mut Vec<Point>) {
        let la = ((self.a.norm() * density.sqrt()).round() as usize).max(2);
        let lb = ((self.area() * density / la as f64).round() as usize).max(2);
        for j in 0..lb {
            let t = j as f64 / (lb - 1) as f64;
            for i in 0..la {
                let s = i as f64 / (la - 1) as f64;
                out.push(Point::from(self.corner + self.a * s + self.b * t));
            }
        }
    }
}

/// Surface model of one object class: solid boxes (bottom faces unseen) and
/// free-standing planar patches.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub boxes: Vec<Aabb>,
    pub planes: Vec<Rect>,
}

impl Template {
    fn solid(boxes: Vec<Aabb>) -> Self {
        Template { boxes, planes: Vec::new() }
    }

    fn plane(rect: Rect) -> Self {
        Template { boxes: Vec::new(), planes: vec![rect] }
    }

    /// Visible surface points in the canonical frame. Box faces hidden inside
    /// another box of the same template are dropped.
    pub fn sample(&self, density: f64) -> Vec<Point> {
        let mut out = Vec::new();
        for rect in &self.planes {
            rect.sample(density, &mut out);
        }
        for (bi, b) in self.boxes.iter().enumerate() {
            let mut pts = Vec::new();
            for face in box_faces(b) {
                face.sample(density, &mut pts);
            }
            out.extend(pts.into_iter().filter(|p| {
                !self
                    .boxes
                    .iter()
                    .enumerate()
                    .any(|(oi, o)| oi != bi && o.contains(p, 1e-9))
            }));
        }
        out
    }

    /// Bounding box of the template geometry.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for b in &self.boxes {
            lo = lo.inf(&b.lo);
            hi = hi.sup(&b.hi);
        }
        for r in &self.planes {
            for c in [r.corner, r.corner + r.a, r.corner + r.b, r.corner + r.a + r.b] {
                lo = lo.inf(&c);
                hi = hi.sup(&c);
            }
        }
        (lo, hi)
    }
}

/// The five faces of a box other than its bottom.
fn box_faces(b: &Aabb) -> [Rect; 5] {
    let d = b.hi - b.lo;
    let (lo, hi) = (b.lo, b.hi);
    let x = Vector3::new(d.x, 0.0, 0.0);
    let y = Vector3::new(0.0, d.y, 0.0);
    let z = Vector3::new(0.0, 0.0, d.z);
    [
        Rect { corner: Vector3::new(lo.x, lo.y, hi.z), a: x, b: y },
        Rect { corner: lo, a: x, b: z },
        Rect { corner: Vector3::new(lo.x, hi.y, lo.z), a: x, b: z },
        Rect { corner: lo, a: y, b: z },
        Rect { corner: Vector3::new(hi.x, lo.y, lo.z), a: y, b: z },
    ]
}

/// Hall dimensions that size the structural templates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HallDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

pub const CLUTTER_EDGE: f64 = 0.4;
pub const BAND_HEIGHT: f64 = 0.25;

/// Canonical template of a class. Objects have their origin at the center of
/// the footprint on the ground; planes are centered on the origin.
pub fn template(class: Class, hall: HallDims) -> Template {
    let HallDims { length: l, width: w, height: h } = hall;
    match class {
        Class::Car => Template::solid(vec![
            Aabb::new([-2.3, -0.9, 0.2], [2.3, 0.9, 0.95]),
            Aabb::new([-1.3, -0.8, 0.95], [0.7, 0.8, 1.45]),
        ]),
        Class::Hanger => Template::solid(vec![
            Aabb::new([-0.15, -0.15, 0.0], [0.15, 0.15, 2.8]),
            Aabb::new([0.15, -0.1, 2.6], [1.8, 0.1, 2.8]),
            Aabb::new([0.15, -0.5, 0.3], [1.4, 0.5, 0.45]),
        ]),
        Class::Band => Template::solid(vec![Aabb::new([-l / 2.0, -0.6, 0.0], [l / 2.0, 0.6, BAND_HEIGHT])]),
        Class::Lineside => Template::solid(vec![
            Aabb::new([-1.0, -0.4, 0.0], [1.0, 0.4, 1.2]),
            Aabb::new([-1.0, 0.1, 1.2], [1.0, 0.4, 1.8]),
        ]),
        Class::Column => Template::solid(vec![Aabb::new([-0.2, -0.2, 0.0], [0.2, 0.2, h])]),
        Class::Clutter => clutter_template([CLUTTER_EDGE; 3]),
        Class::Floor | Class::Ceiling => Template::plane(Rect {
            corner: Vector3::new(-l / 2.0, -w / 2.0, 0.0),
            a: Vector3::new(l, 0.0, 0.0),
            b: Vector3::new(0.0, w, 0.0),
        }),
        Class::Wall => Template::plane(Rect {
            corner: Vector3::new(-l / 2.0, 0.0, 0.0),
            a: Vector3::new(l, 0.0, 0.0),
            b: Vector3::new(0.0, 0.0, h),
        }),
    }
}

pub fn clutter_template(size: [f64; 3]) -> Template {
    let [sx, sy, sz] = size;
    Template::solid(vec![Aabb::new([-sx / 2.0, -sy / 2.0, 0.0], [sx / 2.0, sy / 2.0, sz])])
}
