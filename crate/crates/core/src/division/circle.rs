//! Smallest circle enclosing a planar point set.

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Membership with a small relative slack for rounding on the boundary.
    pub fn contains(&self, p: Vec2) -> bool {
        self.center.distance(p) <= self.radius * (1.0 + 1e-10) + 1e-10
    }

    fn point(p: Vec2) -> Self {
        Circle { center: p, radius: 0.0 }
    }

    fn diameter(a: Vec2, b: Vec2) -> Self {
        Circle { center: (a + b) * 0.5, radius: a.distance(b) * 0.5 }
    }

    /// Circle through three points; `None` when they are collinear.
    pub fn circumscribed(a: Vec2, b: Vec2, c: Vec2) -> Option<Self> {
        let ab = b - a;
        let ac = c - a;
        let d = 2.0 * ab.cross(ac);
        let scale = ab.dot(ab).max(ac.dot(ac));
        if d.abs() <= 1e-12 * scale {
            return None;
        }
        let ux = (ac.y * ab.dot(ab) - ab.y * ac.dot(ac)) / d;
        let uy = (ab.x * ac.dot(ac) - ac.x * ab.dot(ab)) / d;
        let center = a + Vec2::new(ux, uy);
        Some(Circle { center, radius: center.distance(a) })
    }
}

/// Circle with `a` and `b` on its boundary that also covers `c`.
fn with_three(a: Vec2, b: Vec2, c: Vec2) -> Circle {
    match Circle::circumscribed(a, b, c) {
        Some(circ) => circ,
        // collinear: the two extreme points span the answer
        None => [Circle::diameter(a, b), Circle::diameter(a, c), Circle::diameter(b, c)]
            .into_iter()
            .max_by(|x, y| x.radius.total_cmp(&y.radius))
            .expect("three candidates"),
    }
}

/// Minimum enclosing circle by incremental construction.
///
/// Returns a zero circle at the origin for an empty slice.
pub fn min_enclosing_circle(points: &[Vec2]) -> Circle {
    let Some(&first) = points.first() else {
        return Circle::point(Vec2::ZERO);
    };
    let mut c = Circle::point(first);
    for i in 1..points.len() {
        if c.contains(points[i]) {
            continue;
        }
        c = Circle::point(points[i]);
        for j in 0..i {
            if c.contains(points[j]) {
                continue;
            }
            c = Circle::diameter(points[i], points[j]);
            for k in 0..j {
                if !c.contains(points[k]) {
                    c = with_three(points[i], points[j], points[k]);
                }
            }
        }
    }
    c
}
