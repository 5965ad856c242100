//! Planar geometry helpers: points, segments, simple polygons and
//! axis-aligned rectangles (all furniture footprints are axis-aligned since
//! directions are quantized to the four cardinal angles).

use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point2::new(a.x + t * dx, a.y + t * dy))
}

fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// True when the open segments cross at a single interior point.
pub fn segments_cross(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
}

fn segments_touch(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    if segments_cross(a, b, c, d) {
        return true;
    }
    point_segment_distance(a, c, d) < EPS
        || point_segment_distance(b, c, d) < EPS
        || point_segment_distance(c, a, b) < EPS
        || point_segment_distance(d, a, b) < EPS
}

/// Signed area, positive for counterclockwise vertex order.
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (p, q) = (&poly[i], &poly[(i + 1) % n]);
            p.x * q.y - q.x * p.y
        })
        .sum::<f64>()
        * 0.5
}

/// No two non-adjacent edges touch and no adjacent edges overlap.
pub fn is_simple_polygon(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 || poly.iter().any(|p| !p.is_finite()) {
        return false;
    }
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        if a.distance(b) < EPS {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (c, d) = (&poly[j], &poly[(j + 1) % n]);
            if adjacent {
                // Adjacent edges share one vertex; reject only collinear folds.
                let shared_other = if j == i + 1 { d } else { c };
                let far = if j == i + 1 { a } else { b };
                let near = if j == i + 1 { b } else { a };
                if orient(far, near, shared_other).abs() < EPS {
                    let v1 = (far.x - near.x, far.y - near.y);
                    let v2 = (shared_other.x - near.x, shared_other.y - near.y);
                    if v1.0 * v2.0 + v1.1 * v2.1 > 0.0 {
                        return false;
                    }
                }
            } else if segments_touch(a, b, c, d) {
                return false;
            }
        }
    }
    signed_area(poly).abs() > EPS
}

/// Point-in-polygon with boundary points counted as inside.
pub fn point_in_polygon(p: &Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        if point_segment_distance(p, &poly[i], &poly[(i + 1) % n]) < EPS {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (&poly[i], &poly[j]);
        if (pi.y > p.y) != (pj.y > p.y) {
            let x = pj.x + (p.y - pj.y) * (pi.x - pj.x) / (pi.y - pj.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Axis-aligned bounding box as (min, max).
pub fn bounding_box(poly: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Distance from `p` along the unit direction `dir` to the first polygon edge,
/// or infinity when the ray hits nothing.
pub fn ray_exit_distance(p: &Point2, dir: (f64, f64), poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let denom = dir.0 * ey - dir.1 * ex;
        if denom.abs() < 1e-15 {
            continue;
        }
        let (wx, wy) = (a.x - p.x, a.y - p.y);
        let t = (wx * ey - wy * ex) / denom;
        let s = (wx * dir.1 - wy * dir.0) / denom;
        if t >= 0.0 && (-EPS..=1.0 + EPS).contains(&s) {
            best = best.min(t);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn centered(center: Point2, extent_x: f64, extent_y: f64) -> Self {
        Rect {
            min: Point2::new(center.x - extent_x / 2.0, center.y - extent_y / 2.0),
            max: Point2::new(center.x + extent_x / 2.0, center.y + extent_y / 2.0),
        }
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    pub fn center(&self) -> Point2 {
        self.min.lerp(&self.max, 0.5)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.max.x.min(other.max.x) - self.min.x.max(other.min.x);
        let h = self.max.y.min(other.max.y) - self.min.y.max(other.min.y);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }
}

/// The rectangle lies in the closed polygon region: every corner inside and
/// no polygon edge crossing a rectangle edge or poking a vertex into it.
pub fn rect_in_polygon(rect: &Rect, poly: &[Point2]) -> bool {
    let corners = rect.corners();
    if !corners.iter().all(|c| point_in_polygon(c, poly)) {
        return false;
    }
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        for k in 0..4 {
            if segments_cross(a, b, &corners[k], &corners[(k + 1) % 4]) {
                return false;
            }
        }
        let v = &poly[i];
        if v.x > rect.min.x + EPS
            && v.x < rect.max.x - EPS
            && v.y > rect.min.y + EPS
            && v.y < rect.max.y - EPS
        {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_distances() {
        let sq = square();
        let p = Point2::new(0.5, 1.5);
        assert!((ray_exit_distance(&p, (1.0, 0.0), &sq) - 1.5).abs() < 1e-12);
        assert!((ray_exit_distance(&p, (-1.0, 0.0), &sq) - 0.5).abs() < 1e-12);
        assert!((ray_exit_distance(&p, (0.0, 1.0), &sq) - 0.5).abs() < 1e-12);
        let outside = Point2::new(5.0, 5.0);
        assert_eq!(ray_exit_distance(&outside, (1.0, 0.0), &sq), f64::INFINITY);
    }

    fn square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ]
    }

    #[test]
    fn segment_distance_cases() {
        let (a, b) = (Point2::new(0.0, 0.0), Point2::new(2.0, 0.0));
        assert_eq!(point_segment_distance(&Point2::new(1.0, 1.0), &a, &b), 1.0);
        assert_eq!(point_segment_distance(&Point2::new(3.0, 0.0), &a, &b), 1.0);
        assert_eq!(point_segment_distance(&Point2::new(1.0, 0.0), &a, &b), 0.0);
    }

    #[test]
    fn simple_polygon_detection() {
        assert!(is_simple_polygon(&square()));
        let bowtie = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(2.0, 0.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(!is_simple_polygon(&bowtie));
        assert!(!is_simple_polygon(&square()[..2]));
    }

    #[test]
    fn point_in_polygon_boundary_counts() {
        let sq = square();
        assert!(point_in_polygon(&Point2::new(1.0, 1.0), &sq));
        assert!(point_in_polygon(&Point2::new(0.0, 1.0), &sq));
        assert!(!point_in_polygon(&Point2::new(3.0, 1.0), &sq));
    }

    #[test]
    fn rect_containment_in_l_shape() {
        let l = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        assert!(rect_in_polygon(
            &Rect::centered(Point2::new(0.5, 0.5), 1.0, 1.0),
            &l
        ));
        // corners all inside but the notch vertex pokes in
        assert!(!rect_in_polygon(
            &Rect::centered(Point2::new(1.0, 1.0), 1.2, 1.2),
            &l
        ));
        assert!(rect_in_polygon(
            &Rect::centered(Point2::new(1.0, 1.0), 0.0, 0.0),
            &l
        ));
    }

    #[test]
    fn overlap_area() {
        let a = Rect::centered(Point2::new(0.0, 0.0), 2.0, 2.0);
        let b = Rect::centered(Point2::new(1.0, 1.0), 2.0, 2.0);
        assert!((a.intersection_area(&b) - 1.0).abs() < 1e-12);
        let c = Rect::centered(Point2::new(2.0, 0.0), 2.0, 2.0);
        assert_eq!(a.intersection_area(&c), 0.0);
    }
}
