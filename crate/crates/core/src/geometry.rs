//! Points, convex hulls and distances in the (Rc, R1) plane.

use serde::{Deserialize, Serialize};

/// A rate pair; `rc` is the common-message rate (or R2 for the
/// independent-states model), `r1` the private rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub rc: f64,
    pub r1: f64,
}

impl RatePoint {
    pub const fn new(rc: f64, r1: f64) -> Self {
        RatePoint { rc, r1 }
    }
}

fn cross(o: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    (a.rc - o.rc) * (b.r1 - o.r1) - (a.r1 - o.r1) * (b.rc - o.rc)
}

/// Turns flatter than this (in squared bits) count as collinear, so that
/// vertices repeated up to rounding collapse into one.
const HULL_EPS: f64 = 1e-12;

/// Convex hull (Andrew's monotone chain), counter-clockwise, collinear points
/// dropped. Always contains the origin, so the result is closed under axis
/// projections when the inputs are.
pub fn convex_hull(points: &[RatePoint]) -> Vec<RatePoint> {
    let mut pts: Vec<RatePoint> = points
        .iter()
        .copied()
        .chain(std::iter::once(RatePoint::new(0.0, 0.0)))
        .filter(|p| p.rc.is_finite() && p.r1.is_finite())
        .collect();
    pts.sort_by(|a, b| a.rc.total_cmp(&b.rc).then(a.r1.total_cmp(&b.r1)));
    pts.dedup_by(|a, b| (a.rc - b.rc).abs() <= HULL_EPS && (a.r1 - b.r1).abs() <= HULL_EPS);
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<RatePoint> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= HULL_EPS {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<RatePoint> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= HULL_EPS {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    // Start at the origin for a stable listing.
    if let Some(i) = lower.iter().position(|p| *p == RatePoint::new(0.0, 0.0)) {
        lower.rotate_left(i);
    }
    lower
}

fn seg_dist(p: RatePoint, a: RatePoint, b: RatePoint) -> f64 {
    let (dx, dy) = (b.rc - a.rc, b.r1 - a.r1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.rc - a.rc) * dx + (p.r1 - a.r1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.rc + t * dx - p.rc, a.r1 + t * dy - p.r1);
    (qx * qx + qy * qy).sqrt()
}

/// Euclidean distance from `p` to the convex polygon `hull` (0 inside).
pub fn distance_to_hull(p: RatePoint, hull: &[RatePoint]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => seg_dist(p, hull[0], hull[0]),
        2 => seg_dist(p, hull[0], hull[1]),
        n => {
            let inside = (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= 0.0);
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| seg_dist(p, hull[i], hull[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Largest distance from a vertex of `a` to the polygon `b`; zero iff
/// `a` lies inside `b` (both convex).
pub fn excess(a: &[RatePoint], b: &[RatePoint]) -> f64 {
    a.iter().map(|&p| distance_to_hull(p, b)).fold(0.0, f64::max)
}

/// Support function `max lambda*rc + (1-lambda)*r1` over the hull vertices.
pub fn support(hull: &[RatePoint], lambda: f64) -> f64 {
    hull.iter()
        .map(|p| lambda * p.rc + (1.0 - lambda) * p.r1)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_pentagon_points() {
        let pts = [
            RatePoint::new(1.0, 0.0),
            RatePoint::new(0.5, 0.5),
            RatePoint::new(0.0, 0.5),
            RatePoint::new(0.2, 0.2),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h[0], RatePoint::new(0.0, 0.0));
        assert_eq!(h.len(), 4);
        assert_eq!(distance_to_hull(RatePoint::new(0.2, 0.2), &h), 0.0);
        assert!((distance_to_hull(RatePoint::new(0.0, 1.0), &h) - 0.5).abs() < 1e-15);
        assert_eq!(excess(&[RatePoint::new(0.1, 0.1)], &h), 0.0);
    }

    #[test]
    fn degenerate_hulls() {
        assert_eq!(convex_hull(&[]), vec![RatePoint::new(0.0, 0.0)]);
        let seg = convex_hull(&[RatePoint::new(0.0, 1.0)]);
        assert_eq!(seg.len(), 2);
        assert!((distance_to_hull(RatePoint::new(1.0, 0.5), &seg) - 1.0).abs() < 1e-15);
    }
}
