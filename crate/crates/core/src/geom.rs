//! Planar vectors and the handful of shape routines the simulator and the
//! ego rasterizer need.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A 2-D vector in world coordinates (meters, or m/s for velocities).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[cfg(feature = "schema")]
impl schemars::JsonSchema for Vec2 {
    fn schema_name() -> std::borrow::Cow<'static, str> {
        "Vec2".into()
    }

    fn json_schema(generator: &mut schemars::SchemaGenerator) -> schemars::Schema {
        let mut schema = <[f64; 2]>::json_schema(generator);
        schema.insert("description".into(), "[x, y] in meters (or m/s for velocities)".into());
        schema
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector pointing along `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2 { x: c, y: s }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// A rectangle of the given `length` (along `heading`) and `width`,
/// centered on `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let hl = 0.5 * self.length;
        let hw = 0.5 * self.width;
        [
            Vec2::new(hl, -hw),
            Vec2::new(hl, hw),
            Vec2::new(-hl, hw),
            Vec2::new(-hl, -hw),
        ]
        .map(|c| self.center + c.rotate(self.heading))
    }

    fn to_local(self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.heading)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.length && l.y.abs() <= 0.5 * self.width
    }

    /// Axis-aligned bounding box as (min, max).
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let cs = self.corners();
        let mut lo = cs[0];
        let mut hi = cs[0];
        for c in &cs[1..] {
            lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
            hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
        }
        (lo, hi)
    }

    /// Distance along the ray to the first boundary crossing, if the ray
    /// starts outside the rectangle and hits it.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let o = self.to_local(origin);
        let d = dir.rotate(-self.heading);
        let half = [0.5 * self.length, 0.5 * self.width];
        let (oc, dc) = ([o.x, o.y], [d.x, d.y]);
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        for axis in 0..2 {
            if dc[axis] == 0.0 {
                if oc[axis].abs() > half[axis] {
                    return None;
                }
                continue;
            }
            let t1 = (-half[axis] - oc[axis]) / dc[axis];
            let t2 = (half[axis] - oc[axis]) / dc[axis];
            t_enter = t_enter.max(t1.min(t2));
            t_exit = t_exit.min(t1.max(t2));
        }
        (t_enter <= t_exit && t_enter > 0.0).then_some(t_enter)
    }
}

/// Distance along a unit-direction ray to the first crossing of a circle,
/// if the ray starts outside the circle and hits it.
pub fn ray_circle_hit(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    if c <= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t > 0.0).then_some(t)
}

/// Area of the intersection of a convex polygon with the axis-aligned box
/// `[lo, hi]`, by Sutherland-Hodgman clipping.
pub fn clipped_area(polygon: &[Vec2], lo: Vec2, hi: Vec2) -> f64 {
    let mut poly: Vec<Vec2> = polygon.to_vec();
    // (axis, bound, keep-if-greater)
    let planes = [(0, lo.x, true), (0, hi.x, false), (1, lo.y, true), (1, hi.y, false)];
    for (axis, bound, keep_greater) in planes {
        if poly.is_empty() {
            return 0.0;
        }
        let coord = |p: Vec2| if axis == 0 { p.x } else { p.y };
        let inside = |p: Vec2| {
            if keep_greater {
                coord(p) >= bound
            } else {
                coord(p) <= bound
            }
        };
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let cur = poly[i];
            let prev = poly[(i + poly.len() - 1) % poly.len()];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci != pi {
                let s = (bound - coord(prev)) / (coord(cur) - coord(prev));
                out.push(prev + (cur - prev) * s);
            }
            if ci {
                out.push(cur);
            }
        }
        poly = out;
    }
    polygon_area(&poly)
}

/// Absolute area of a simple polygon (shoelace formula).
pub fn polygon_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..poly.len() {
        twice += poly[i].cross(poly[(i + 1) % poly.len()]);
    }
    0.5 * twice.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn angle_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn rect_hits_and_contains() {
        let r = OrientedRect {
            center: Vec2::new(5.0, 0.0),
            heading: 0.0,
            length: 2.0,
            width: 1.0,
        };
        let t = r.ray_hit(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert!(r.ray_hit(Vec2::ZERO, Vec2::new(-1.0, 0.0)).is_none());
        assert!(r.contains(Vec2::new(5.9, 0.4)));
        assert!(!r.contains(Vec2::new(6.1, 0.0)));
    }

    #[test]
    fn circle_hit_distance() {
        let t = ray_circle_hit(Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::new(5.0, 0.0), 0.5).unwrap();
        assert!((t - 4.5).abs() < 1e-12);
        assert!(ray_circle_hit(Vec2::ZERO, Vec2::new(0.0, 1.0), Vec2::new(5.0, 0.0), 0.5).is_none());
    }

    #[test]
    fn clipping_a_rotated_square() {
        let r = OrientedRect {
            center: Vec2::new(0.0, 0.0),
            heading: FRAC_PI_4,
            length: 2.0,
            width: 2.0,
        };
        let full = clipped_area(&r.corners(), Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        assert!((full - 4.0).abs() < 1e-12);
        // the quadrant x >= 0, y >= 0 holds a quarter of the diamond
        let quarter = clipped_area(&r.corners(), Vec2::new(0.0, 0.0), Vec2::new(5.0, 5.0));
        assert!((quarter - 1.0).abs() < 1e-12);
    }
}
