//! Floater-style surrogate maps: polygon triangulation, approximately
//! harmonic piecewise-linear maps with mean value weights, and the five
//! control-domain layouts (disc, teardrop, half disc, lens, convex polygon).

use nalgebra::{DVector, Matrix2};

use crate::error::{Error, Result};
use crate::geom::{cross2, cumulative_lengths, shoelace_area, HermiteCurve, Pt, Vec2, TAU};
use crate::linalg::{solve, Csr};
use crate::plane_graph::PlaneGraph;
use std::f64::consts::PI;

// ---------------------------------------------------------------------------
// Triangulation
// ---------------------------------------------------------------------------

/// Conforming triangulation of a simple polygon. The first `boundary_count`
/// points are the polygon vertices in their input order.
#[derive(Debug, Clone)]
pub struct Triangulation {
    pub points: Vec<Pt>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_count: usize,
}

impl Triangulation {
    pub fn boundary_loop(&self) -> Vec<usize> {
        (0..self.boundary_count).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| triangle_area(&self.points, t)).sum()
    }

    fn is_boundary_segment(&self, a: usize, b: usize) -> bool {
        let n = self.boundary_count;
        if a >= n || b >= n {
            return false;
        }
        (b == (a + 1) % n) || (a == (b + 1) % n)
    }
}

fn triangle_area(points: &[Pt], t: &[usize; 3]) -> f64 {
    0.5 * cross2(points[t[1]] - points[t[0]], points[t[2]] - points[t[0]])
}

/// Triangulates a simple CCW polygon: ear clipping, Delaunay edge flips,
/// then midpoint refinement of long interior edges until every edge is at
/// most `2 * target_edge_length`. Boundary segments are never split, so the
/// attainable bound is floored at the longest boundary segment (a triangle
/// leaning on a boundary segment of length L always has a side >= L/2).
pub fn triangulate(polygon: &[Pt], target_edge_length: f64) -> Result<Triangulation> {
    let n = polygon.len();
    if n < 3 {
        return Err(Error::DegeneratePolygon(format!("{n} points")));
    }
    let area = shoelace_area(polygon);
    if area <= 0.0 {
        return Err(Error::DegeneratePolygon(format!("not CCW: area {area}")));
    }
    let triangles = ear_clip(polygon)?;
    let mut tri = Triangulation { points: polygon.to_vec(), triangles, boundary_count: n };
    let limit = effective_edge_limit(polygon, target_edge_length);
    delaunay_flip_pass(&mut tri, None);
    refine_to_target(&mut tri, limit);
    delaunay_flip_pass(&mut tri, Some(limit));
    Ok(tri)
}

fn effective_edge_limit(polygon: &[Pt], target: f64) -> f64 {
    let n = polygon.len();
    let max_seg = (0..n)
        .map(|i| (polygon[(i + 1) % n] - polygon[i]).norm())
        .fold(0.0f64, f64::max);
    (2.0 * target).max(max_seg * (1.0 + 1e-12))
}

fn ear_clip(polygon: &[Pt]) -> Result<Vec<[usize; 3]>> {
    let scale = polygon
        .iter()
        .map(|p| p.coords.norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let eps_area = 1e-14 * scale * scale;
    let mut idx: Vec<usize> = (0..polygon.len()).collect();
    let mut triangles = Vec::with_capacity(polygon.len() - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            let a = idx[(k + m - 1) % m];
            let b = idx[k];
            let c = idx[(k + 1) % m];
            let (pa, pb, pc) = (polygon[a], polygon[b], polygon[c]);
            let area2 = cross2(pb - pa, pc - pb);
            if area2 <= eps_area {
                continue;
            }
            let mut blocked = false;
            for &other in &idx {
                if other == a || other == b || other == c {
                    continue;
                }
                if point_in_triangle_closed(polygon[other], pa, pb, pc, 1e-12 * scale) {
                    blocked = true;
                    break;
                }
            }
            if blocked {
                continue;
            }
            let quality = min_angle(pa, pb, pc);
            if best.map(|(_, q)| quality > q).unwrap_or(true) {
                best = Some((k, quality));
            }
        }
        let (k, _) = best.ok_or_else(|| {
            Error::DegeneratePolygon("no ear found; polygon may be non-simple".into())
        })?;
        let m = idx.len();
        triangles.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    triangles.push([idx[0], idx[1], idx[2]]);
    Ok(triangles)
}

fn point_in_triangle_closed(p: Pt, a: Pt, b: Pt, c: Pt, eps: f64) -> bool {
    let d1 = cross2(b - a, p - a);
    let d2 = cross2(c - b, p - b);
    let d3 = cross2(a - c, p - c);
    d1 >= -eps && d2 >= -eps && d3 >= -eps
}

fn min_angle(a: Pt, b: Pt, c: Pt) -> f64 {
    let la = (b - c).norm();
    let lb = (c - a).norm();
    let lc = (a - b).norm();
    let angle = |opp: f64, s1: f64, s2: f64| {
        ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)).clamp(-1.0, 1.0).acos()
    };
    angle(la, lb, lc).min(angle(lb, lc, la)).min(angle(lc, la, lb))
}

/// Lawson flip passes. `max_new_edge` caps the length of edges a flip may
/// create, so flips cannot undo the refinement's size bound.
fn delaunay_flip_pass(tri: &mut Triangulation, max_new_edge: Option<f64>) {
    for _ in 0..100 {
        let mut flipped = false;
        let edge_map = build_edge_map(&tri.triangles);
        for ((a, b), owners) in &edge_map {
            if owners.len() != 2 || tri.is_boundary_segment(*a, *b) {
                continue;
            }
            let (t1, t2) = (owners[0], owners[1]);
            let c = opposite_vertex(&tri.triangles[t1], *a, *b);
            let d = opposite_vertex(&tri.triangles[t2], *a, *b);
            if c == d {
                continue;
            }
            if in_circumcircle(tri.points[*a], tri.points[*b], tri.points[c], tri.points[d]) {
                if let Some(cap) = max_new_edge {
                    let new_len = (tri.points[c] - tri.points[d]).norm();
                    let old_len = (tri.points[*a] - tri.points[*b]).norm();
                    if new_len > cap && new_len > old_len {
                        continue;
                    }
                }
                // flip to (c, d) if both new triangles stay positive
                let n1 = orient_ccw([*a, d, c], &tri.points);
                let n2 = orient_ccw([*b, c, d], &tri.points);
                if let (Some(n1), Some(n2)) = (n1, n2) {
                    tri.triangles[t1] = n1;
                    tri.triangles[t2] = n2;
                    flipped = true;
                    break; // edge map is stale; rebuild
                }
            }
        }
        if !flipped {
            return;
        }
    }
}

fn build_edge_map(
    triangles: &[[usize; 3]],
) -> std::collections::BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (ti, t) in triangles.iter().enumerate() {
        for i in 0..3 {
            let a = t[i];
            let b = t[(i + 1) % 3];
            map.entry((a.min(b), a.max(b))).or_default().push(ti);
        }
    }
    map
}

fn opposite_vertex(t: &[usize; 3], a: usize, b: usize) -> usize {
    *t.iter().find(|&&v| v != a && v != b).unwrap()
}

fn orient_ccw(t: [usize; 3], points: &[Pt]) -> Option<[usize; 3]> {
    if triangle_area(points, &t) > 0.0 {
        Some(t)
    } else {
        None
    }
}

fn in_circumcircle(a: Pt, b: Pt, c: Pt, d: Pt) -> bool {
    // d strictly inside the circumcircle of CCW (a, b, c)
    let m = nalgebra::Matrix3::new(
        a.x - d.x,
        a.y - d.y,
        (a.x - d.x).powi(2) + (a.y - d.y).powi(2),
        b.x - d.x,
        b.y - d.y,
        (b.x - d.x).powi(2) + (b.y - d.y).powi(2),
        c.x - d.x,
        c.y - d.y,
        (c.x - d.x).powi(2) + (c.y - d.y).powi(2),
    );
    m.determinant() > 1e-30
}

fn refine_to_target(tri: &mut Triangulation, limit: f64) {
    let max_points = 20_000;
    let mut since_flip = 0usize;
    while tri.points.len() < max_points {
        // longest splittable (interior) edge above the limit
        let mut best: Option<((usize, usize), f64)> = None;
        for t in &tri.triangles {
            for i in 0..3 {
                let a = t[i];
                let b = t[(i + 1) % 3];
                if tri.is_boundary_segment(a, b) {
                    continue;
                }
                let len = (tri.points[a] - tri.points[b]).norm();
                if len > limit && best.map(|(_, l)| len > l).unwrap_or(true) {
                    best = Some(((a.min(b), a.max(b)), len));
                }
            }
        }
        let Some(((a, b), _)) = best else { break };
        let mid = Pt::from((tri.points[a].coords + tri.points[b].coords) * 0.5);
        let mid_idx = tri.points.len();
        tri.points.push(mid);
        let mut new_triangles = Vec::with_capacity(tri.triangles.len() + 2);
        for t in &tri.triangles {
            let has = (0..3).find(|&i| {
                let u = t[i];
                let v = t[(i + 1) % 3];
                (u.min(v), u.max(v)) == (a, b)
            });
            match has {
                Some(i) => {
                    let u = t[i];
                    let v = t[(i + 1) % 3];
                    let w = t[(i + 2) % 3];
                    new_triangles.push([u, mid_idx, w]);
                    new_triangles.push([mid_idx, v, w]);
                }
                None => new_triangles.push(*t),
            }
        }
        tri.triangles = new_triangles;
        since_flip += 1;
        if since_flip >= 8 {
            delaunay_flip_pass(tri, Some(limit));
            since_flip = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Floater map
// ---------------------------------------------------------------------------

/// Piecewise linear map: a source triangulation plus one image position per
/// source vertex.
#[derive(Debug, Clone)]
pub struct PiecewiseLinearMap {
    pub source: Triangulation,
    pub images: Vec<Pt>,
}

/// Solves the convex-combination system with mean value weights: interior
/// images become convex combinations of their neighbours, boundary images
/// equal `boundary_targets` exactly.
pub fn floater_map(tri: &Triangulation, boundary_targets: &[Pt]) -> Result<PiecewiseLinearMap> {
    let (a, b) = floater_system(tri)?;
    let n = tri.points.len();
    let nb = tri.boundary_count;
    assert_eq!(boundary_targets.len(), nb, "one target per boundary vertex");
    let n_int = n - nb;
    let mut images = vec![Pt::origin(); n];
    images[..nb].copy_from_slice(boundary_targets);
    if n_int > 0 {
        for dim in 0..2 {
            let f = DVector::from_iterator(nb, boundary_targets.iter().map(|p| p[dim]));
            let rhs = b.matvec(&f);
            let sol = solve(&a, &rhs)?;
            for i in 0..n_int {
                images[nb + i][dim] = sol[i];
            }
        }
    }
    Ok(PiecewiseLinearMap { source: tri.clone(), images })
}

/// Assembles the interior system `A` and boundary coupling `B` of the
/// Floater problem `A c = B f`.
pub fn floater_system(tri: &Triangulation) -> Result<(Csr, Csr)> {
    let n = tri.points.len();
    let nb = tri.boundary_count;
    let n_int = n - nb;
    let mut a_trip: Vec<(usize, usize, f64)> = Vec::new();
    let mut b_trip: Vec<(usize, usize, f64)> = Vec::new();
    for v in nb..n {
        let weights = mean_value_weights(tri, v)?;
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::SingularSystem(format!("vertex {v} has no positive weights")));
        }
        let row = v - nb;
        a_trip.push((row, row, 1.0));
        for (j, w) in weights {
            let lambda = w / total;
            if j < nb {
                b_trip.push((row, j, lambda));
            } else {
                a_trip.push((row, j - nb, -lambda));
            }
        }
    }
    Ok((
        Csr::from_triplets(n_int, n_int, &a_trip),
        Csr::from_triplets(n_int, nb, &b_trip),
    ))
}

/// Mean value weights of interior vertex `v`: always positive, so the
/// resulting convex-combination map into a convex region stays injective.
fn mean_value_weights(tri: &Triangulation, v: usize) -> Result<Vec<(usize, f64)>> {
    // CCW successor map around v from the positively oriented triangles.
    let mut succ: std::collections::BTreeMap<usize, usize> = Default::default();
    for t in &tri.triangles {
        if let Some(i) = (0..3).find(|&i| t[i] == v) {
            succ.insert(t[(i + 1) % 3], t[(i + 2) % 3]);
        }
    }
    if succ.is_empty() {
        return Err(Error::SingularSystem(format!("vertex {v} is isolated")));
    }
    let start = *succ.keys().next().unwrap();
    let mut ring = vec![start];
    let mut cur = start;
    loop {
        let nxt = *succ
            .get(&cur)
            .ok_or_else(|| Error::SingularSystem(format!("open ring at interior vertex {v}")))?;
        if nxt == start {
            break;
        }
        ring.push(nxt);
        cur = nxt;
        if ring.len() > succ.len() {
            return Err(Error::SingularSystem(format!("ring overflow at vertex {v}")));
        }
    }
    let p = tri.points[v];
    let m = ring.len();
    let gamma: Vec<f64> = (0..m)
        .map(|k| {
            let u1 = tri.points[ring[k]] - p;
            let u2 = tri.points[ring[(k + 1) % m]] - p;
            cross2(u1, u2).atan2(u1.dot(&u2))
        })
        .collect();
    let tan_half = |g: f64| (g.sin() / (1.0 + g.cos())).abs();
    let mut weights = Vec::with_capacity(m);
    for k in 0..m {
        let r = (tri.points[ring[k]] - p).norm();
        let w = (tan_half(gamma[(k + m - 1) % m]) + tan_half(gamma[k])) / r;
        weights.push((ring[k], w));
    }
    Ok(weights)
}

impl PiecewiseLinearMap {
    /// All image triangles positively oriented (the discrete bijectivity
    /// criterion).
    pub fn is_bijective(&self) -> bool {
        self.source.triangles.iter().all(|t| triangle_area(&self.images, t) > 0.0)
    }

    pub fn min_image_orientation(&self) -> f64 {
        self.source
            .triangles
            .iter()
            .map(|t| triangle_area(&self.images, t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Barycentric evaluation at `p` in the source domain.
    pub fn eval(&self, p: Pt) -> Result<Pt> {
        let (t, bary) = locate(&self.source.points, &self.source.triangles, p)?;
        let tri = &self.source.triangles[t];
        Ok(Pt::from(
            self.images[tri[0]].coords * bary[0]
                + self.images[tri[1]].coords * bary[1]
                + self.images[tri[2]].coords * bary[2],
        ))
    }

    /// Inverse evaluation (image domain -> source); valid when bijective.
    pub fn eval_inverse(&self, q: Pt) -> Result<Pt> {
        let (t, bary) = locate(&self.images, &self.source.triangles, q)?;
        let tri = &self.source.triangles[t];
        Ok(Pt::from(
            self.source.points[tri[0]].coords * bary[0]
                + self.source.points[tri[1]].coords * bary[1]
                + self.source.points[tri[2]].coords * bary[2],
        ))
    }

    /// Value plus the (piecewise constant) Jacobian of the containing
    /// triangle's affine map.
    pub fn eval_with_jacobian(&self, p: Pt) -> Result<(Pt, Matrix2<f64>)> {
        let (t, bary) = locate(&self.source.points, &self.source.triangles, p)?;
        let tri = &self.source.triangles[t];
        let value = Pt::from(
            self.images[tri[0]].coords * bary[0]
                + self.images[tri[1]].coords * bary[1]
                + self.images[tri[2]].coords * bary[2],
        );
        let s0 = self.source.points[tri[0]];
        let e1 = self.source.points[tri[1]] - s0;
        let e2 = self.source.points[tri[2]] - s0;
        let f1 = self.images[tri[1]] - self.images[tri[0]];
        let f2 = self.images[tri[2]] - self.images[tri[0]];
        let src = Matrix2::from_columns(&[e1, e2]);
        let img = Matrix2::from_columns(&[f1, f2]);
        let jac = img
            * src
                .try_inverse()
                .ok_or_else(|| Error::SingularSystem("degenerate source triangle".into()))?;
        Ok((value, jac))
    }
}

fn locate(points: &[Pt], triangles: &[[usize; 3]], p: Pt) -> Result<(usize, [f64; 3])> {
    let mut best: Option<(usize, [f64; 3], f64)> = None;
    for (ti, t) in triangles.iter().enumerate() {
        let a = points[t[0]];
        let b = points[t[1]];
        let c = points[t[2]];
        let denom = cross2(b - a, c - a);
        if denom == 0.0 {
            continue;
        }
        let l1 = cross2(p - a, c - a) / denom;
        let l2 = cross2(b - a, p - a) / denom;
        let l0 = 1.0 - l1 - l2;
        let min = l0.min(l1).min(l2);
        if best.map(|(_, _, m)| min > m).unwrap_or(true) {
            best = Some((ti, [l0, l1, l2], min));
        }
        if min >= 0.0 {
            break;
        }
    }
    match best {
        Some((ti, bary, min)) if min > -1e-9 => Ok((ti, bary)),
        _ => Err(Error::PointOutsideDomain { x: p.x, y: p.y }),
    }
}

// ---------------------------------------------------------------------------
// Control domains
// ---------------------------------------------------------------------------

/// A smooth boundary piece of a control domain, parameterised over [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryArc {
    Segment { a: Pt, b: Pt },
    CircleArc { center: Pt, radius: f64, a0: f64, a1: f64 },
    /// Sub-interval `[t0, t1]` of a cubic Hermite curve.
    Hermite { curve: HermiteCurve, t0: f64, t1: f64 },
}

impl BoundaryArc {
    pub fn segment(a: Pt, b: Pt) -> Self {
        BoundaryArc::Segment { a, b }
    }

    pub fn eval(&self, u: f64) -> Pt {
        match self {
            BoundaryArc::Segment { a, b } => Pt::from(a.coords * (1.0 - u) + b.coords * u),
            BoundaryArc::CircleArc { center, radius, a0, a1 } => {
                let t = a0 + (a1 - a0) * u;
                Pt::new(center.x + radius * t.cos(), center.y + radius * t.sin())
            }
            BoundaryArc::Hermite { curve, t0, t1 } => curve.eval(t0 + (t1 - t0) * u),
        }
    }

    pub fn deriv(&self, u: f64) -> Vec2 {
        match self {
            BoundaryArc::Segment { a, b } => b - a,
            BoundaryArc::CircleArc { center: _, radius, a0, a1 } => {
                let t = a0 + (a1 - a0) * u;
                Vec2::new(-radius * t.sin(), radius * t.cos()) * (a1 - a0)
            }
            BoundaryArc::Hermite { curve, t0, t1 } => curve.deriv(t0 + (t1 - t0) * u) * (t1 - t0),
        }
    }

    pub fn second_deriv(&self, u: f64) -> Vec2 {
        match self {
            BoundaryArc::Segment { .. } => Vec2::zeros(),
            BoundaryArc::CircleArc { center: _, radius, a0, a1 } => {
                let t = a0 + (a1 - a0) * u;
                Vec2::new(-radius * t.cos(), -radius * t.sin()) * (a1 - a0) * (a1 - a0)
            }
            BoundaryArc::Hermite { curve, t0, t1 } => {
                curve.second_deriv(t0 + (t1 - t0) * u) * (t1 - t0) * (t1 - t0)
            }
        }
    }

    pub fn reversed(&self) -> Self {
        match self {
            BoundaryArc::Segment { a, b } => BoundaryArc::Segment { a: *b, b: *a },
            BoundaryArc::CircleArc { center, radius, a0, a1 } => BoundaryArc::CircleArc {
                center: *center,
                radius: *radius,
                a0: *a1,
                a1: *a0,
            },
            BoundaryArc::Hermite { curve, t0, t1 } => {
                // reverse the underlying cubic so u keeps increasing
                let rev = HermiteCurve {
                    p0: curve.p1,
                    m0: -curve.m1,
                    p1: curve.p0,
                    m1: -curve.m0,
                };
                BoundaryArc::Hermite { curve: rev, t0: 1.0 - t1, t1: 1.0 - t0 }
            }
        }
    }

    pub fn length(&self, samples: usize) -> f64 {
        let pts: Vec<Pt> = (0..samples)
            .map(|k| self.eval(k as f64 / (samples - 1) as f64))
            .collect();
        crate::geom::polyline_length(&pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ControlDomainKind {
    Disc,
    Teardrop,
    HalfDisc,
    Lens,
    ConvexPolygon,
}

/// Convex control domain of a face, with one boundary arc per face edge
/// (CCW, `arcs[k].eval(0)` is the break point at face vertex `k`).
#[derive(Debug, Clone)]
pub struct ControlDomain {
    pub kind: ControlDomainKind,
    pub arcs: Vec<BoundaryArc>,
    /// Face-local indices of the vertices modelled as corners.
    pub corner_locals: Vec<usize>,
    /// Opening angles at the modelled corners (radians).
    pub corner_angles: Vec<f64>,
}

impl ControlDomain {
    /// Boundary samples, `per_edge` per arc with shared breaks deduplicated.
    pub fn sample_boundary(&self, per_edge: usize) -> Vec<Pt> {
        let mut out = Vec::with_capacity(self.arcs.len() * (per_edge - 1));
        for arc in &self.arcs {
            for k in 0..(per_edge - 1) {
                out.push(arc.eval(k as f64 / (per_edge - 1) as f64));
            }
        }
        out
    }

    pub fn total_boundary_length(&self) -> f64 {
        self.arcs.iter().map(|a| a.length(257)).sum()
    }
}

/// Chooses and constructs the control domain of `face` from its corner
/// pattern: 0 corners -> disc, 1 -> teardrop, 2 adjacent -> half disc,
/// 2 non-adjacent -> lens, otherwise an inscribed convex polygon. Boundary
/// breaks are placed proportionally to edge lengths.
pub fn control_domain(graph: &PlaneGraph, face: usize, mu_angle: f64) -> ControlDomain {
    let nf = graph.face(face).n_edges();
    let verts = graph.face_vertices(face);
    let angles: Vec<f64> = verts
        .iter()
        .map(|&v| graph.vertex_geometry(face, v).map(|g| g.angle).unwrap_or(PI))
        .collect();
    let corners: Vec<usize> = (0..nf).filter(|&k| angles[k] < PI - mu_angle).collect();
    let lengths: Vec<f64> = graph
        .face(face)
        .edges
        .iter()
        .map(|r| graph.edge_length(r.edge))
        .collect();

    match corners.len() {
        0 => disc_domain(&lengths),
        1 => teardrop_domain(&lengths, corners[0], angles[corners[0]]),
        2 => {
            let (c1, c2) = (corners[0], corners[1]);
            let adjacent = (c2 == c1 + 1) || (c1 == 0 && c2 == nf - 1);
            if adjacent {
                half_disc_domain(&lengths, c1, c2, [angles[c1], angles[c2]])
            } else {
                lens_domain(&lengths, c1, c2, angles[c1], angles[c2])
            }
        }
        _ => polygon_domain(&lengths, &corners, &angles),
    }
}

fn disc_domain(lengths: &[f64]) -> ControlDomain {
    let total: f64 = lengths.iter().sum();
    let mut cum = 0.0;
    let mut arcs = Vec::with_capacity(lengths.len());
    for (k, &l) in lengths.iter().enumerate() {
        let a0 = TAU * cum / total;
        cum += l;
        let a1 = if k + 1 == lengths.len() { TAU } else { TAU * cum / total };
        arcs.push(BoundaryArc::CircleArc { center: Pt::origin(), radius: 1.0, a0, a1 });
    }
    ControlDomain { kind: ControlDomainKind::Disc, arcs, corner_locals: vec![], corner_angles: vec![] }
}

/// Closed convex Hermite loop with a single corner of opening angle `alpha`
/// at the origin, traversed CCW.
pub fn teardrop_loop(alpha: f64, scale: f64) -> HermiteCurve {
    let half = 0.5 * alpha;
    let u = Vec2::new(half.sin(), half.cos());
    let w = Vec2::new(half.sin(), -half.cos());
    HermiteCurve { p0: Pt::origin(), m0: u * scale, p1: Pt::origin(), m1: w * scale }
}

fn teardrop_domain(lengths: &[f64], corner: usize, alpha: f64) -> ControlDomain {
    let nf = lengths.len();
    let total: f64 = lengths.iter().sum();
    // Backoff on the tangent magnitude if the sampled loop fails convexity.
    let mut scale = 3.0;
    let mut curve = teardrop_loop(alpha, scale);
    for _ in 0..4 {
        if loop_is_convex(&curve, 512) {
            break;
        }
        scale *= 0.5;
        curve = teardrop_loop(alpha, scale);
    }
    let lookup = arclength_table(&curve, 4096);
    let mut arcs = vec![BoundaryArc::Segment { a: Pt::origin(), b: Pt::origin() }; nf];
    let mut cum = 0.0;
    for j in 0..nf {
        let k = (corner + j) % nf;
        let f0 = cum / total;
        cum += lengths[k];
        let f1 = if j + 1 == nf { 1.0 } else { cum / total };
        arcs[k] = BoundaryArc::Hermite {
            curve,
            t0: invert_arclength(&lookup, f0),
            t1: invert_arclength(&lookup, f1),
        };
    }
    ControlDomain {
        kind: ControlDomainKind::Teardrop,
        arcs,
        corner_locals: vec![corner],
        corner_angles: vec![alpha],
    }
}

fn loop_is_convex(curve: &HermiteCurve, samples: usize) -> bool {
    let pts = curve.sample(samples);
    let n = pts.len() - 1; // closed loop, drop duplicate
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        if cross2(b - a, c - b) < -1e-12 {
            return false;
        }
    }
    true
}

fn arclength_table(curve: &HermiteCurve, samples: usize) -> Vec<f64> {
    let pts = curve.sample(samples);
    let mut acc = cumulative_lengths(&pts);
    let total = *acc.last().unwrap();
    for a in &mut acc {
        *a /= total;
    }
    acc
}

fn invert_arclength(table: &[f64], fraction: f64) -> f64 {
    let n = table.len();
    let idx = table.partition_point(|&v| v < fraction).min(n - 1).max(1);
    let (f0, f1) = (table[idx - 1], table[idx]);
    let t0 = (idx - 1) as f64 / (n - 1) as f64;
    let t1 = idx as f64 / (n - 1) as f64;
    if f1 > f0 {
        t0 + (t1 - t0) * (fraction - f0) / (f1 - f0)
    } else {
        t0
    }
}

fn half_disc_domain(lengths: &[f64], c1: usize, c2: usize, angles: [f64; 2]) -> ControlDomain {
    let nf = lengths.len();
    // connecting edge: from corner vertex to corner vertex
    let ce = if c2 == c1 + 1 { c1 } else { nf - 1 };
    let mut arcs = vec![BoundaryArc::Segment { a: Pt::origin(), b: Pt::origin() }; nf];
    arcs[ce] = BoundaryArc::Segment { a: Pt::new(-1.0, 0.0), b: Pt::new(1.0, 0.0) };
    let arc_edges: Vec<usize> = (1..nf).map(|j| (ce + j) % nf).collect();
    let arc_total: f64 = arc_edges.iter().map(|&k| lengths[k]).sum();
    let mut cum = 0.0;
    for (j, &k) in arc_edges.iter().enumerate() {
        let a0 = PI * cum / arc_total;
        cum += lengths[k];
        let a1 = if j + 1 == arc_edges.len() { PI } else { PI * cum / arc_total };
        arcs[k] = BoundaryArc::CircleArc { center: Pt::origin(), radius: 1.0, a0, a1 };
    }
    ControlDomain {
        kind: ControlDomainKind::HalfDisc,
        arcs,
        corner_locals: vec![c1, c2],
        corner_angles: angles.to_vec(),
    }
}

fn lens_domain(
    lengths: &[f64],
    c1: usize,
    c2: usize,
    alpha1: f64,
    alpha2: f64,
) -> ControlDomain {
    let nf = lengths.len();
    let a_pt = Pt::new(-1.0, 0.0); // vertex c1
    let b_pt = Pt::new(1.0, 0.0); // vertex c2
    let mut scale = 2.0;
    let (mut lower, mut upper) = lens_arcs(a_pt, b_pt, alpha1, alpha2, scale);
    for _ in 0..4 {
        if lens_is_convex(&lower, &upper, 512) {
            break;
        }
        scale *= 0.5;
        let arcs = lens_arcs(a_pt, b_pt, alpha1, alpha2, scale);
        lower = arcs.0;
        upper = arcs.1;
    }

    let mut arcs = vec![BoundaryArc::Segment { a: Pt::origin(), b: Pt::origin() }; nf];
    // edges c1 .. c2-1 run along the lower arc, the rest along the upper
    let lower_edges: Vec<usize> = (0..(c2 + nf - c1) % nf).map(|j| (c1 + j) % nf).collect();
    let upper_edges: Vec<usize> = (0..(c1 + nf - c2) % nf).map(|j| (c2 + j) % nf).collect();
    for (edges, curve) in [(&lower_edges, &lower), (&upper_edges, &upper)] {
        let table = arclength_table(curve, 4096);
        let total: f64 = edges.iter().map(|&k| lengths[k]).sum();
        let mut cum = 0.0;
        for (j, &k) in edges.iter().enumerate() {
            let f0 = cum / total;
            cum += lengths[k];
            let f1 = if j + 1 == edges.len() { 1.0 } else { cum / total };
            arcs[k] = BoundaryArc::Hermite {
                curve: *curve,
                t0: invert_arclength(&table, f0),
                t1: invert_arclength(&table, f1),
            };
        }
    }
    ControlDomain {
        kind: ControlDomainKind::Lens,
        arcs,
        corner_locals: vec![c1, c2],
        corner_angles: vec![alpha1, alpha2],
    }
}

fn lens_arcs(a: Pt, b: Pt, alpha1: f64, alpha2: f64, scale: f64) -> (HermiteCurve, HermiteCurve) {
    let dir = |angle: f64| Vec2::new(angle.cos(), angle.sin());
    let lower = HermiteCurve {
        p0: a,
        m0: dir(-alpha1 / 2.0) * scale,
        p1: b,
        m1: dir(alpha2 / 2.0) * scale,
    };
    let upper = HermiteCurve {
        p0: b,
        m0: dir(PI - alpha2 / 2.0) * scale,
        p1: a,
        m1: dir(PI + alpha1 / 2.0) * scale,
    };
    (lower, upper)
}

fn lens_is_convex(lower: &HermiteCurve, upper: &HermiteCurve, samples: usize) -> bool {
    let mut pts = lower.sample(samples);
    pts.pop();
    pts.extend(upper.sample(samples));
    pts.pop();
    let n = pts.len();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        if cross2(b - a, c - b) < -1e-10 {
            return false;
        }
    }
    true
}

fn polygon_domain(lengths: &[f64], corners: &[usize], angles: &[f64]) -> ControlDomain {
    let nf = lengths.len();
    let m = corners.len();
    // batch lengths between consecutive corners
    let mut batch_lengths = Vec::with_capacity(m);
    for j in 0..m {
        let from = corners[j];
        let to = corners[(j + 1) % m];
        let count = (to + nf - from) % nf;
        let len: f64 = (0..count).map(|i| lengths[(from + i) % nf]).sum();
        batch_lengths.push(len);
    }
    let fractions = feasible_chord_fractions(&batch_lengths);
    // Solve sum(2 asin(c * l_j / 2)) = 2 pi for the chord scaling c.
    let lmax = fractions.iter().cloned().fold(0.0f64, f64::max);
    let g = |c: f64| -> f64 { fractions.iter().map(|&l| 2.0 * (c * l / 2.0).asin()).sum() };
    let mut lo = 0.0;
    let mut hi = 2.0 / lmax;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < TAU {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    // corner positions on the unit circle
    let mut corner_pts = Vec::with_capacity(m);
    let mut angle = 0.0f64;
    for j in 0..m {
        corner_pts.push(Pt::new(angle.cos(), angle.sin()));
        angle += 2.0 * (c * fractions[j] / 2.0).asin();
    }
    // per-edge breaks along each straight side
    let mut arcs = vec![BoundaryArc::Segment { a: Pt::origin(), b: Pt::origin() }; nf];
    for j in 0..m {
        let from = corners[j];
        let count = (corners[(j + 1) % m] + nf - from) % nf;
        let p0 = corner_pts[j];
        let p1 = corner_pts[(j + 1) % m];
        let total: f64 = (0..count).map(|i| lengths[(from + i) % nf]).sum();
        let mut cum = 0.0;
        for i in 0..count {
            let k = (from + i) % nf;
            let f0 = cum / total;
            cum += lengths[k];
            let f1 = if i + 1 == count { 1.0 } else { cum / total };
            arcs[k] = BoundaryArc::Segment {
                a: Pt::from(p0.coords * (1.0 - f0) + p1.coords * f0),
                b: Pt::from(p0.coords * (1.0 - f1) + p1.coords * f1),
            };
        }
    }
    ControlDomain {
        kind: ControlDomainKind::ConvexPolygon,
        arcs,
        corner_locals: corners.to_vec(),
        corner_angles: corners.iter().map(|&k| angles[k]).collect(),
    }
}

/// Batch fractions, blended toward uniform just enough that an inscribed
/// polygon with proportional chords exists.
fn feasible_chord_fractions(batch_lengths: &[f64]) -> Vec<f64> {
    let total: f64 = batch_lengths.iter().sum();
    let m = batch_lengths.len() as f64;
    let normalise = |v: &[f64]| -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.iter().map(|&x| x / s).collect()
    };
    let feasible = |fr: &[f64]| -> bool {
        let lmax = fr.iter().cloned().fold(0.0f64, f64::max);
        let g_end: f64 = fr.iter().map(|&l| 2.0 * ((l / lmax).min(1.0)).asin()).sum();
        g_end >= TAU + 1e-9
    };
    let base: Vec<f64> = batch_lengths.iter().map(|&l| l / total).collect();
    if feasible(&base) {
        return base;
    }
    let mut lo = 0.0; // blend toward uniform
    let mut hi = 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let blended: Vec<f64> =
            base.iter().map(|&l| (1.0 - mid) * l + mid / m).collect();
        if feasible(&normalise(&blended)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    normalise(&base.iter().map(|&l| (1.0 - hi) * l + hi / m).collect::<Vec<f64>>())
}

// ---------------------------------------------------------------------------

/// Samples the dense polygon of a face with `per_edge` points per edge (by
/// arc length along each edge's point set), matching the control-domain
/// sampling index-for-index.
pub fn sample_face_boundary(graph: &PlaneGraph, face: usize, per_edge: usize) -> Vec<Pt> {
    let mut out = Vec::new();
    for &e in &graph.face(face).edges {
        let w = graph.weight(e);
        let s = crate::geom::sample_by_arc_length(w.points(), per_edge);
        out.extend_from_slice(&s[..per_edge - 1]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::winding_number;

    fn p(x: f64, y: f64) -> Pt {
        Pt::new(x, y)
    }

    fn square_dense(n_per_side: usize) -> Vec<Pt> {
        let corners = [p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        let mut out = Vec::new();
        for i in 0..4 {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            for k in 0..n_per_side {
                let t = k as f64 / n_per_side as f64;
                out.push(Pt::from(a.coords * (1.0 - t) + b.coords * t));
            }
        }
        out
    }

    #[test]
    fn triangulate_convex_quad() {
        let tri = triangulate(&[p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)], 10.0).unwrap();
        assert!(tri.triangles.len() >= 2);
        for t in &tri.triangles {
            assert!(triangle_area(&tri.points, t) > 0.0);
        }
        assert!((tri.total_area() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn triangulate_l_polygon_inside() {
        let lshape = [
            p(0., 0.),
            p(2., 0.),
            p(2., 1.),
            p(1., 1.),
            p(1., 2.),
            p(0., 2.),
        ];
        let tri = triangulate(&lshape, 0.4).unwrap();
        assert!((tri.total_area() - 3.0).abs() < 1e-10 * 3.0);
        for t in &tri.triangles {
            let cen = Pt::new(
                (tri.points[t[0]].x + tri.points[t[1]].x + tri.points[t[2]].x) / 3.0,
                (tri.points[t[0]].y + tri.points[t[1]].y + tri.points[t[2]].y) / 3.0,
            );
            assert!(winding_number(&lshape, cen) != 0, "centroid outside");
        }
    }

    #[test]
    fn refinement_hits_target() {
        let poly = square_dense(8); // boundary spacing 0.125
        let target = 0.125;
        let tri = triangulate(&poly, target).unwrap();
        for t in &tri.triangles {
            for i in 0..3 {
                let a = t[i];
                let b = t[(i + 1) % 3];
                if tri.is_boundary_segment(a, b) {
                    continue;
                }
                let len = (tri.points[a] - tri.points[b]).norm();
                assert!(len <= 2.0 * target + 1e-12, "interior edge {len}");
            }
        }
    }

    #[test]
    fn floater_identity_reproduction() {
        let poly = square_dense(6);
        let tri = triangulate(&poly, 0.2).unwrap();
        let targets: Vec<Pt> = (0..tri.boundary_count).map(|i| tri.points[i]).collect();
        let map = floater_map(&tri, &targets).unwrap();
        for v in tri.boundary_count..tri.points.len() {
            assert!(
                (map.images[v] - tri.points[v]).norm() < 1e-8,
                "interior vertex moved by {}",
                (map.images[v] - tri.points[v]).norm()
            );
        }
        assert!(map.is_bijective());
    }

    #[test]
    fn floater_rowsum_partition_of_unity() {
        let poly = square_dense(6);
        let tri = triangulate(&poly, 0.2).unwrap();
        let (a, b) = floater_system(&tri).unwrap();
        let ad = a.to_dense();
        let bd = b.to_dense();
        for r in 0..ad.nrows() {
            let mut off = 0.0;
            for c in 0..ad.ncols() {
                if c != r {
                    off += ad[(r, c)];
                }
            }
            let bnd: f64 = (0..bd.ncols()).map(|c| bd[(r, c)]).sum();
            assert!((ad[(r, r)] + off - bnd).abs() < 1e-12 * (1.0 + bnd.abs()));
        }
    }

    #[test]
    fn pl_eval_basics() {
        let poly = square_dense(4);
        let tri = triangulate(&poly, 0.5).unwrap();
        let targets: Vec<Pt> = (0..tri.boundary_count).map(|i| tri.points[i]).collect();
        let map = floater_map(&tri, &targets).unwrap();
        // vertex maps to its image
        let q = map.eval(tri.points[3]).unwrap();
        assert!((q - map.images[3]).norm() < 1e-12);
        // identity's interior point maps to itself
        let probe = p(0.37, 0.61);
        assert!((map.eval(probe).unwrap() - probe).norm() < 1e-7);
        assert!(map.eval(p(7.0, 7.0)).is_err());
    }

    #[test]
    fn disc_domain_breaks() {
        // equal lengths -> quarter arcs, total length 2 pi
        let raw = crate::plane_graph::RawGraph {
            vertices: vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)],
            edges: vec![
                (0, 1, vec![p(0., 0.), p(1., 0.)]),
                (1, 2, vec![p(1., 0.), p(1., 1.)]),
                (2, 3, vec![p(1., 1.), p(0., 1.)]),
                (3, 0, vec![p(0., 1.), p(0., 0.)]),
            ],
            faces: vec![vec![1, 2, 3, 4]],
        };
        let g = PlaneGraph::build(&raw).unwrap();
        // huge mu_angle so the right angles do not count as corners
        let cd = control_domain(&g, 0, 2.0);
        assert_eq!(cd.kind, ControlDomainKind::Disc);
        for arc in &cd.arcs {
            assert!((arc.length(4097) - PI / 2.0).abs() < 1e-6);
        }
        assert!((cd.total_boundary_length() - TAU).abs() < 1e-4);
    }

    #[test]
    fn polygon_domain_ratios() {
        // five batches with prescribed relative lengths
        let lengths = [0.1, 0.2, 0.3, 0.2, 0.2];
        let cd = polygon_domain(&lengths, &[0, 1, 2, 3, 4], &[1.0; 5]);
        let side_lengths: Vec<f64> = cd.arcs.iter().map(|a| a.length(3)).collect();
        let total: f64 = side_lengths.iter().sum();
        for (s, l) in side_lengths.iter().zip(lengths.iter()) {
            assert!((s / total - l).abs() < 1e-9, "side ratio {} vs {}", s / total, l);
        }
    }

    #[test]
    fn half_disc_total_length() {
        let lengths = [1.0, 1.0, 1.0];
        let cd = half_disc_domain(&lengths, 0, 1, [1.0, 1.0]);
        assert!((cd.total_boundary_length() - (2.0 + PI)).abs() < 1e-4);
    }

    #[test]
    fn teardrop_convex_and_closed() {
        let lengths = [1.0, 1.5, 0.5];
        let cd = teardrop_domain(&lengths, 1, 1.2);
        // starts and ends at the corner
        assert!((cd.arcs[1].eval(0.0) - Pt::origin()).norm() < 1e-12);
        assert!((cd.arcs[0].eval(1.0) - Pt::origin()).norm() < 1e-9);
        // arc lengths proportional
        let l: Vec<f64> = cd.arcs.iter().map(|a| a.length(2049)).collect();
        let total: f64 = l.iter().sum();
        assert!((l[1] / total - 0.5).abs() < 1e-3, "got {}", l[1] / total);
    }
}
