//! Planar geometry primitives shared by all pipeline stages: polyline
//! measures, winding numbers, segment intersection and angle helpers.

use nalgebra::{Point2, Vector2};

pub type Pt = Point2<f64>;
pub type Vec2 = Vector2<f64>;

pub const TAU: f64 = std::f64::consts::TAU;

/// z-component of the cross product of two planar vectors.
#[inline]
pub fn cross2(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counterclockwise angle from `from` to `to`, in `[0, 2*pi)`.
pub fn ccw_angle(from: Vec2, to: Vec2) -> f64 {
    let a = cross2(from, to).atan2(from.dot(&to));
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Total length of the piecewise linear curve through `points`.
pub fn polyline_length(points: &[Pt]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Cumulative chord lengths of `points`, starting at 0.
pub fn cumulative_lengths(points: &[Pt]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut s = 0.0;
    acc.push(0.0);
    for w in points.windows(2) {
        s += (w[1] - w[0]).norm();
        acc.push(s);
    }
    acc
}

/// Chord-length abscissae of `points`, normalised to `[0, 1]`.
pub fn chord_abscissae(points: &[Pt]) -> Vec<f64> {
    let mut acc = cumulative_lengths(points);
    let total = *acc.last().unwrap();
    if total > 0.0 {
        for a in &mut acc {
            *a /= total;
        }
    }
    *acc.last_mut().unwrap() = 1.0;
    acc
}

/// Signed (shoelace) area of the closed polygon `points`; positive for CCW.
pub fn shoelace_area(points: &[Pt]) -> f64 {
    let n = points.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        a += cross2(p.coords, q.coords);
    }
    0.5 * a
}

/// Winding number of the closed polygon `poly` around `p`.
pub fn winding_number(poly: &[Pt], p: Pt) -> i32 {
    let mut wn = 0i32;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a.y <= p.y {
            if b.y > p.y && cross2(b - a, p - a) > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && cross2(b - a, p - a) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Whether `p` lies strictly inside the closed polygon (no boundary tolerance).
pub fn point_strictly_inside(poly: &[Pt], p: Pt, boundary_eps: f64) -> bool {
    if winding_number(poly, p) == 0 {
        return false;
    }
    distance_to_polygon(poly, p) > boundary_eps
}

/// Distance from `p` to the closed polygon boundary.
pub fn distance_to_polygon(poly: &[Pt], p: Pt) -> f64 {
    let n = poly.len();
    let mut d = f64::INFINITY;
    for i in 0..n {
        d = d.min(dist_point_segment(p, poly[i], poly[(i + 1) % n]));
    }
    d
}

/// Distance from point `p` to segment `ab`.
pub fn dist_point_segment(p: Pt, a: Pt, b: Pt) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Classification of how two closed segments intersect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegCross {
    None,
    /// Intersection in the interior of at least one segment.
    Proper,
    /// Segments touch only at shared endpoints.
    Endpoint,
}

/// Intersection test for segments `ab` and `cd` using exact-ish orientation
/// predicates with an absolute epsilon on the cross products.
pub fn segment_intersection(a: Pt, b: Pt, c: Pt, d: Pt, eps: f64) -> SegCross {
    let same = |p: Pt, q: Pt| (p - q).norm() <= eps;
    let d1 = cross2(b - a, c - a);
    let d2 = cross2(b - a, d - a);
    let d3 = cross2(d - c, a - c);
    let d4 = cross2(d - c, b - c);

    let proper = ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps))
        && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps));
    if proper {
        return SegCross::Proper;
    }

    // Collinear / touching configurations.
    let on_seg = |p: Pt, q: Pt, r: Pt| -> bool {
        // r collinear with pq within eps; is r within the bounding box?
        cross2(q - p, r - p).abs() <= eps * (q - p).norm().max(1.0)
            && r.x >= p.x.min(q.x) - eps
            && r.x <= p.x.max(q.x) + eps
            && r.y >= p.y.min(q.y) - eps
            && r.y <= p.y.max(q.y) + eps
    };
    let mut touch = false;
    for (p, other) in [(c, (a, b)), (d, (a, b)), (a, (c, d)), (b, (c, d))] {
        if on_seg(other.0, other.1, p) {
            if same(p, other.0) || same(p, other.1) {
                touch = true;
            } else {
                return SegCross::Proper;
            }
        }
    }
    // Collinear overlap longer than a point is proper.
    if touch {
        let collinear = d1.abs() <= eps && d2.abs() <= eps;
        if collinear {
            let dir = b - a;
            let len2 = dir.norm_squared();
            if len2 > 0.0 {
                let tc = (c - a).dot(&dir) / len2;
                let td = (d - a).dot(&dir) / len2;
                let (lo, hi) = (tc.min(td), tc.max(td));
                let overlap = hi.min(1.0) - lo.max(0.0);
                if overlap * len2.sqrt() > eps {
                    return SegCross::Proper;
                }
            }
        }
        return SegCross::Endpoint;
    }
    SegCross::None
}

/// A segment tagged with the edge it belongs to; used by the ingest check.
#[derive(Debug, Clone, Copy)]
pub struct TaggedSegment {
    pub a: Pt,
    pub b: Pt,
    pub edge: usize,
    /// Index of the segment inside its polyline.
    pub index: usize,
}

/// Finds a pair of properly intersecting segments among `segs`, ignoring
/// pairs that are adjacent within the same polyline. Sweeps over the x-axis
/// with an active list to avoid the quadratic all-pairs test.
pub fn find_proper_intersection(segs: &[TaggedSegment], eps: f64) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..segs.len()).collect();
    let min_x = |s: &TaggedSegment| s.a.x.min(s.b.x);
    let max_x = |s: &TaggedSegment| s.a.x.max(s.b.x);
    order.sort_by(|&i, &j| min_x(&segs[i]).total_cmp(&min_x(&segs[j])));

    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let s = &segs[i];
        active.retain(|&j| max_x(&segs[j]) >= min_x(s) - eps);
        for &j in &active {
            let t = &segs[j];
            if s.edge == t.edge && s.index.abs_diff(t.index) <= 1 {
                continue; // consecutive segments of one polyline share a vertex
            }
            if segment_intersection(s.a, s.b, t.a, t.b, eps) == SegCross::Proper {
                return Some((i, j));
            }
        }
        active.push(i);
    }
    None
}

/// Resamples the closed polyline `points` (open list, first != last) by arc
/// length at `n` parameters uniformly spaced over the total length.
pub fn sample_by_arc_length(points: &[Pt], n: usize) -> Vec<Pt> {
    let acc = cumulative_lengths(points);
    let total = *acc.last().unwrap();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let target = total * (k as f64) / ((n - 1) as f64);
        while seg + 2 < acc.len() && acc[seg + 1] < target {
            seg += 1;
        }
        let span = acc[seg + 1] - acc[seg];
        let t = if span > 0.0 { (target - acc[seg]) / span } else { 0.0 };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * t);
    }
    out
}

/// Cubic Hermite curve with endpoint positions and tangents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteCurve {
    pub p0: Pt,
    pub m0: Vec2,
    pub p1: Pt,
    pub m1: Vec2,
}

impl HermiteCurve {
    pub fn eval(&self, t: f64) -> Pt {
        let h00 = 2.0 * t * t * t - 3.0 * t * t + 1.0;
        let h10 = t * t * t - 2.0 * t * t + t;
        let h01 = -2.0 * t * t * t + 3.0 * t * t;
        let h11 = t * t * t - t * t;
        Pt::from(
            self.p0.coords * h00 + self.m0 * h10 + self.p1.coords * h01 + self.m1 * h11,
        )
    }

    pub fn deriv(&self, t: f64) -> Vec2 {
        let h00 = 6.0 * t * t - 6.0 * t;
        let h10 = 3.0 * t * t - 4.0 * t + 1.0;
        let h01 = -6.0 * t * t + 6.0 * t;
        let h11 = 3.0 * t * t - 2.0 * t;
        self.p0.coords * h00 + self.m0 * h10 + self.p1.coords * h01 + self.m1 * h11
    }

    pub fn second_deriv(&self, t: f64) -> Vec2 {
        let h00 = 12.0 * t - 6.0;
        let h10 = 6.0 * t - 4.0;
        let h01 = -12.0 * t + 6.0;
        let h11 = 6.0 * t - 2.0;
        self.p0.coords * h00 + self.m0 * h10 + self.p1.coords * h01 + self.m1 * h11
    }

    pub fn sample(&self, n: usize) -> Vec<Pt> {
        (0..n).map(|k| self.eval(k as f64 / (n - 1) as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Pt {
        Pt::new(x, y)
    }

    #[test]
    fn shoelace_unit_square() {
        let sq = [p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        assert!((shoelace_area(&sq) - 1.0).abs() < 1e-15);
        let cw: Vec<Pt> = sq.iter().rev().cloned().collect();
        assert!((shoelace_area(&cw) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn winding_inside_outside() {
        let sq = [p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        assert_eq!(winding_number(&sq, p(0.5, 0.5)), 1);
        assert_eq!(winding_number(&sq, p(1.5, 0.5)), 0);
    }

    #[test]
    fn ccw_angle_quadrants() {
        let e1 = Vec2::new(1., 0.);
        let e2 = Vec2::new(0., 1.);
        assert!((ccw_angle(e1, e2) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((ccw_angle(e2, e1) - 3.0 * std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((ccw_angle(e1, -e1) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn segment_crossing() {
        assert_eq!(
            segment_intersection(p(0., 0.), p(1., 1.), p(0., 1.), p(1., 0.), 1e-12),
            SegCross::Proper
        );
        assert_eq!(
            segment_intersection(p(0., 0.), p(1., 0.), p(1., 0.), p(2., 0.5), 1e-12),
            SegCross::Endpoint
        );
        assert_eq!(
            segment_intersection(p(0., 0.), p(1., 0.), p(0., 1.), p(1., 1.), 1e-12),
            SegCross::None
        );
        // collinear overlap
        assert_eq!(
            segment_intersection(p(0., 0.), p(2., 0.), p(1., 0.), p(3., 0.), 1e-12),
            SegCross::Proper
        );
    }

    #[test]
    fn arc_length_resampling_is_uniform() {
        let pts = [p(0., 0.), p(1., 0.), p(1., 1.)];
        let s = sample_by_arc_length(&pts, 5);
        assert_eq!(s.len(), 5);
        assert!((s[0] - p(0., 0.)).norm() < 1e-15);
        assert!((s[2] - p(1., 0.)).norm() < 1e-15);
        assert!((s[4] - p(1., 1.)).norm() < 1e-15);
    }
}
