//! Plane-graph data model: vertices, directed edges carrying dense point
//! sets, CCW faces, and the discrete differential geometry on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    self, ccw_angle, find_proper_intersection, polyline_length, shoelace_area, Pt, TaggedSegment,
    Vec2,
};
use crate::templates::FaceTemplate;

/// Dense ordered point set carried by an edge (the weight function value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<Pt>,
}

impl Polyline {
    /// Builds a polyline, rejecting fewer than two points or coincident
    /// consecutive points. Self-intersection is checked at graph ingest.
    pub fn new(points: Vec<Pt>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPolyline(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, w) in points.windows(2).enumerate() {
            if (w[1] - w[0]).norm() == 0.0 {
                return Err(Error::InvalidPolyline(format!(
                    "consecutive duplicate point at index {i}"
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Pt] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.points)
    }

    pub fn reversed(&self) -> Polyline {
        let mut points = self.points.clone();
        points.reverse();
        Polyline { points }
    }

    /// Largest turning angle between consecutive segments, a smoothness
    /// diagnostic. Returns 0 for a two-point polyline.
    pub fn max_turning_angle(&self) -> f64 {
        let mut worst = 0.0f64;
        for w in self.points.windows(3) {
            let a = (w[1] - w[0]).normalize();
            let b = (w[2] - w[1]).normalize();
            let turn = geom::cross2(a, b).atan2(a.dot(&b)).abs();
            worst = worst.max(turn);
        }
        worst
    }
}

/// Reference to a stored edge together with a traversal orientation.
///
/// A negative reference traverses the stored point set in reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedEdgeRef {
    pub edge: usize,
    pub reversed: bool,
}

impl DirectedEdgeRef {
    pub fn fwd(edge: usize) -> Self {
        Self { edge, reversed: false }
    }

    pub fn rev(edge: usize) -> Self {
        Self { edge, reversed: true }
    }

    pub fn opposite(self) -> Self {
        Self { edge: self.edge, reversed: !self.reversed }
    }
}

/// Stored edge: incident vertices in canonical orientation plus the point set.
#[derive(Debug, Clone)]
pub struct Edge {
    pub vertices: (usize, usize),
    pub polyline: Polyline,
}

/// CCW face: a closed chain of directed edge references and, once the
/// templatisation stage ran, the assigned quad-layout template.
#[derive(Debug, Clone)]
pub struct Face {
    pub edges: Vec<DirectedEdgeRef>,
    pub template: Option<FaceTemplate>,
}

impl Face {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

/// Validated plane graph `G = (V, E, F)`.
#[derive(Debug, Clone)]
pub struct PlaneGraph {
    vertices: Vec<Pt>,
    edges: Vec<Edge>,
    faces: Vec<Face>,
    boundary: Vec<DirectedEdgeRef>,
}

/// Raw ingest data for [`PlaneGraph::build`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawGraph {
    pub vertices: Vec<Pt>,
    /// `(tail vertex, head vertex, points)`; points must start and end at the
    /// declared vertices.
    pub edges: Vec<(usize, usize, Vec<Pt>)>,
    /// Faces as signed 1-based edge ids, CCW; negative means reversed.
    pub faces: Vec<Vec<i64>>,
}

/// Options for graph validation at ingest.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Skips the global segment-intersection sweep for trusted inputs.
    pub check_intersections: bool,
    pub eps: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { check_intersections: true, eps: 1e-12 }
    }
}

impl PlaneGraph {
    pub fn build(raw: &RawGraph) -> Result<Self> {
        Self::build_with(raw, BuildOptions::default())
    }

    pub fn build_with(raw: &RawGraph, opts: BuildOptions) -> Result<Self> {
        let nv = raw.vertices.len();
        let mut edges = Vec::with_capacity(raw.edges.len());
        for (k, (i, j, pts)) in raw.edges.iter().enumerate() {
            if *i >= nv || *j >= nv {
                return Err(Error::InvalidInput(format!(
                    "edge {k} references vertex out of range"
                )));
            }
            let polyline = Polyline::new(pts.clone())?;
            let first = polyline.points()[0];
            let last = *polyline.points().last().unwrap();
            if (first - raw.vertices[*i]).norm() > opts.eps
                || (last - raw.vertices[*j]).norm() > opts.eps
            {
                return Err(Error::InvalidInput(format!(
                    "edge {k} polyline does not start/end at its declared vertices"
                )));
            }
            edges.push(Edge { vertices: (*i, *j), polyline });
        }

        let mut faces = Vec::with_capacity(raw.faces.len());
        for signed in &raw.faces {
            let mut refs = Vec::with_capacity(signed.len());
            for &s in signed {
                if s == 0 || s.unsigned_abs() as usize > edges.len() {
                    return Err(Error::InvalidInput(format!("invalid signed edge id {s}")));
                }
                refs.push(DirectedEdgeRef {
                    edge: s.unsigned_abs() as usize - 1,
                    reversed: s < 0,
                });
            }
            faces.push(Face { edges: refs, template: None });
        }

        let mut graph = PlaneGraph { vertices: raw.vertices.clone(), edges, faces, boundary: vec![] };
        graph.validate(opts)?;
        graph.boundary = graph.compute_boundary();
        Ok(graph)
    }

    fn validate(&self, opts: BuildOptions) -> Result<()> {
        for (fi, face) in self.faces.iter().enumerate() {
            if face.edges.is_empty() {
                return Err(Error::InvalidInput(format!("face {fi} has no edges")));
            }
            // Chain closure.
            let n = face.edges.len();
            for k in 0..n {
                let head = self.head_vertex(face.edges[k]);
                let next_tail = self.tail_vertex(face.edges[(k + 1) % n]);
                if head != next_tail {
                    return Err(Error::OpenLoop { face: fi, position: k });
                }
            }
            // Orientation.
            let poly = self.face_polygon(fi);
            let area = shoelace_area(&poly);
            if area <= 0.0 {
                return Err(Error::OrientationError { face: fi, area });
            }
        }

        if opts.check_intersections {
            let mut segs = Vec::new();
            for (ei, e) in self.edges.iter().enumerate() {
                for (si, w) in e.polyline.points().windows(2).enumerate() {
                    segs.push(TaggedSegment { a: w[0], b: w[1], edge: ei, index: si });
                }
            }
            if let Some((i, j)) = find_proper_intersection(&segs, opts.eps) {
                return Err(Error::SelfIntersection {
                    edge_a: segs[i].edge.min(segs[j].edge),
                    edge_b: segs[i].edge.max(segs[j].edge),
                });
            }
            // Edge-level crossings are ruled out above; nested faces remain
            // possible, so check pairwise containment of face polygons.
            for a in 0..self.faces.len() {
                for b in (a + 1)..self.faces.len() {
                    if self.shares_edge(a, b) {
                        continue;
                    }
                    let pa = self.face_polygon(a);
                    let pb = self.face_polygon(b);
                    let probe_a = interior_probe(&pa);
                    let probe_b = interior_probe(&pb);
                    if geom::winding_number(&pb, probe_a) != 0
                        || geom::winding_number(&pa, probe_b) != 0
                    {
                        return Err(Error::DisjointnessViolation { face_a: a, face_b: b });
                    }
                }
            }
        }
        Ok(())
    }

    fn shares_edge(&self, a: usize, b: usize) -> bool {
        self.faces[a]
            .edges
            .iter()
            .any(|ea| self.faces[b].edges.iter().any(|eb| ea.edge == eb.edge))
    }

    fn compute_boundary(&self) -> Vec<DirectedEdgeRef> {
        // Boundary = directed edges whose opposite is in no face; chained CCW.
        let mut unmatched: Vec<DirectedEdgeRef> = Vec::new();
        for (ei, _) in self.edges.iter().enumerate() {
            let fwd_used = self.faces.iter().any(|f| f.edges.contains(&DirectedEdgeRef::fwd(ei)));
            let rev_used = self.faces.iter().any(|f| f.edges.contains(&DirectedEdgeRef::rev(ei)));
            if fwd_used && !rev_used {
                unmatched.push(DirectedEdgeRef::fwd(ei));
            } else if rev_used && !fwd_used {
                unmatched.push(DirectedEdgeRef::rev(ei));
            }
        }
        // Chain them head to tail starting from the lowest edge id.
        let mut chain = Vec::with_capacity(unmatched.len());
        if unmatched.is_empty() {
            return chain;
        }
        unmatched.sort();
        let mut current = unmatched[0];
        for _ in 0..unmatched.len() {
            chain.push(current);
            let head = self.head_vertex(current);
            match unmatched.iter().find(|e| !chain.contains(e) && self.tail_vertex(**e) == head) {
                Some(&next) => current = next,
                None => break,
            }
        }
        chain
    }

    // -- accessors ------------------------------------------------------

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> Pt {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[Pt] {
        &self.vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face(&self, i: usize) -> &Face {
        &self.faces[i]
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face_mut(&mut self, i: usize) -> &mut Face {
        &mut self.faces[i]
    }

    pub fn boundary(&self) -> &[DirectedEdgeRef] {
        &self.boundary
    }

    pub fn is_boundary_edge(&self, edge: usize) -> bool {
        self.incident_faces(edge).len() == 1
    }

    /// Faces incident to `edge` (one or two).
    pub fn incident_faces(&self, edge: usize) -> Vec<usize> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.edges.iter().any(|e| e.edge == edge))
            .map(|(i, _)| i)
            .collect()
    }

    /// The weight function: point set of a directed edge reference.
    pub fn weight(&self, e: DirectedEdgeRef) -> Polyline {
        let p = &self.edges[e.edge].polyline;
        if e.reversed {
            p.reversed()
        } else {
            p.clone()
        }
    }

    pub fn tail_vertex(&self, e: DirectedEdgeRef) -> usize {
        let (i, j) = self.edges[e.edge].vertices;
        if e.reversed {
            j
        } else {
            i
        }
    }

    pub fn head_vertex(&self, e: DirectedEdgeRef) -> usize {
        let (i, j) = self.edges[e.edge].vertices;
        if e.reversed {
            i
        } else {
            j
        }
    }

    /// Vertices of the face in traversal order (one per edge, the tails).
    pub fn face_vertices(&self, face: usize) -> Vec<usize> {
        self.faces[face].edges.iter().map(|&e| self.tail_vertex(e)).collect()
    }

    /// Dense polygon of a face: concatenated point sets without duplicates.
    pub fn face_polygon(&self, face: usize) -> Vec<Pt> {
        let mut poly = Vec::new();
        for &e in &self.faces[face].edges {
            let w = self.weight(e);
            let pts = w.points();
            poly.extend_from_slice(&pts[..pts.len() - 1]);
        }
        poly
    }

    /// Edge length L(e) of the stored point set.
    pub fn edge_length(&self, edge: usize) -> f64 {
        self.edges[edge].polyline.length()
    }

    // -- discrete differential geometry ---------------------------------

    /// Tangents, outward normal and interior angle at `vertex` on `face`.
    pub fn vertex_geometry(&self, face: usize, vertex: usize) -> Result<VertexGeometry> {
        let f = &self.faces[face];
        let n = f.edges.len();
        let pos = (0..n)
            .find(|&k| self.tail_vertex(f.edges[k]) == vertex)
            .ok_or(Error::VertexNotOnFace { vertex, face })?;
        let incoming = f.edges[(pos + n - 1) % n];
        let outgoing = f.edges[pos];
        let w_in = self.weight(incoming);
        let w_out = self.weight(outgoing);
        let pin = w_in.points();
        let t_minus = (pin[pin.len() - 1] - pin[pin.len() - 2]).normalize();
        let pout = w_out.points();
        let t_plus = (pout[1] - pout[0]).normalize();
        Ok(VertexGeometry::from_tangents(t_minus, t_plus))
    }

    /// Concave vertices of `face` under the threshold `eps_angle`:
    /// interior angle >= pi + eps_angle.
    pub fn concave_vertices(&self, face: usize, eps_angle: f64) -> Vec<usize> {
        self.face_vertices(face)
            .into_iter()
            .filter(|&v| {
                self.vertex_geometry(face, v)
                    .map(|g| g.angle >= std::f64::consts::PI + eps_angle)
                    .unwrap_or(false)
            })
            .collect()
    }

    // -- mutation ---------------------------------------------------------

    /// Splits `edge` at the interior polyline index `split_index`, or at the
    /// index minimising the length discrepancy |L(P-) - L(P+)| when `None`.
    ///
    /// The stored edge keeps its id for the first half; the second half is
    /// appended as a new edge. Returns `(new vertex id, new edge id)`.
    pub fn split_edge(&mut self, edge: usize, split_index: Option<usize>) -> Result<(usize, usize)> {
        let poly = self.edges[edge].polyline.clone();
        let n = poly.len();
        let index = match split_index {
            Some(i) => i,
            None => min_length_discrepancy_index(poly.points()),
        };
        if index == 0 || index >= n - 1 {
            return Err(Error::EndpointSplit { edge, index });
        }
        let p = poly.points()[index];
        let new_vertex = self.vertices.len();
        self.vertices.push(p);

        let (va, vb) = self.edges[edge].vertices;
        let first = Polyline::new(poly.points()[..=index].to_vec())?;
        let second = Polyline::new(poly.points()[index..].to_vec())?;
        self.edges[edge] = Edge { vertices: (va, new_vertex), polyline: first };
        let new_edge = self.edges.len();
        self.edges.push(Edge { vertices: (new_vertex, vb), polyline: second });

        for face in &mut self.faces {
            let mut k = 0;
            while k < face.edges.len() {
                let r = face.edges[k];
                if r.edge == edge {
                    if r.reversed {
                        face.edges.splice(
                            k..=k,
                            [DirectedEdgeRef::rev(new_edge), DirectedEdgeRef::rev(edge)],
                        );
                    } else {
                        face.edges.splice(
                            k..=k,
                            [DirectedEdgeRef::fwd(edge), DirectedEdgeRef::fwd(new_edge)],
                        );
                    }
                    k += 2;
                } else {
                    k += 1;
                }
            }
        }
        for k in 0..self.boundary.len() {
            let r = self.boundary[k];
            if r.edge == edge {
                if r.reversed {
                    self.boundary.splice(
                        k..=k,
                        [DirectedEdgeRef::rev(new_edge), DirectedEdgeRef::rev(edge)],
                    );
                } else {
                    self.boundary.splice(
                        k..=k,
                        [DirectedEdgeRef::fwd(edge), DirectedEdgeRef::fwd(new_edge)],
                    );
                }
                break;
            }
        }
        Ok((new_vertex, new_edge))
    }

    /// Splits `face` along a new edge from `v_alpha` to `v_beta` carrying the
    /// sampled curve `points` (which must run from `v_alpha` to `v_beta`).
    /// Replaces the face by `F+` (keeps the id) and appends `F-`.
    pub fn split_face(
        &mut self,
        face: usize,
        v_alpha: usize,
        v_beta: usize,
        points: Vec<Pt>,
    ) -> Result<(usize, usize)> {
        let polyline = Polyline::new(points)?;
        let new_edge = self.edges.len();
        self.edges.push(Edge { vertices: (v_alpha, v_beta), polyline });

        let f = &self.faces[face];
        let n = f.edges.len();
        let start = (0..n)
            .find(|&k| self.tail_vertex(f.edges[k]) == v_alpha)
            .ok_or(Error::VertexNotOnFace { vertex: v_alpha, face })?;
        let stop = (0..n)
            .find(|&k| self.tail_vertex(f.edges[k]) == v_beta)
            .ok_or(Error::VertexNotOnFace { vertex: v_beta, face })?;

        // Walk from v_beta around to v_alpha for F+, and from v_alpha to
        // v_beta for F-; close each with the new edge.
        let mut plus: Vec<DirectedEdgeRef> = Vec::new();
        let mut k = stop;
        while k != start {
            plus.push(f.edges[k]);
            k = (k + 1) % n;
        }
        let mut minus: Vec<DirectedEdgeRef> = Vec::new();
        let mut k = start;
        while k != stop {
            minus.push(f.edges[k]);
            k = (k + 1) % n;
        }
        // F+ contains the new edge forward (alpha -> beta), F- reversed.
        let mut plus_edges = vec![DirectedEdgeRef::fwd(new_edge)];
        plus_edges.extend(plus);
        let mut minus_edges = minus;
        minus_edges.push(DirectedEdgeRef::rev(new_edge));

        self.faces[face] = Face { edges: plus_edges, template: None };
        let new_face = self.faces.len();
        self.faces.push(Face { edges: minus_edges, template: None });
        Ok((new_edge, new_face))
    }

    /// Round-trip export of the graph in the documented JSON layout.
    pub fn to_raw(&self) -> RawGraph {
        RawGraph {
            vertices: self.vertices.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| (e.vertices.0, e.vertices.1, e.polyline.points().to_vec()))
                .collect(),
            faces: self
                .faces
                .iter()
                .map(|f| {
                    f.edges
                        .iter()
                        .map(|r| {
                            let id = (r.edge + 1) as i64;
                            if r.reversed {
                                -id
                            } else {
                                id
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Interior probe point of a simple CCW polygon: the centroid of the first
/// strictly interior ear.
fn interior_probe(poly: &[Pt]) -> Pt {
    let n = poly.len();
    for i in 0..n {
        let a = poly[(i + n - 1) % n];
        let b = poly[i];
        let c = poly[(i + 1) % n];
        if geom::cross2(b - a, c - b) > 0.0 {
            let centroid = Pt::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
            if geom::winding_number(poly, centroid) != 0 {
                return centroid;
            }
        }
    }
    poly[0]
}

/// Index of the interior point minimising |L(P-) - L(P+)|; ties resolved to
/// the lowest index.
pub fn min_length_discrepancy_index(points: &[Pt]) -> usize {
    let acc = geom::cumulative_lengths(points);
    let total = *acc.last().unwrap();
    let mut best = 1usize;
    let mut best_d = f64::INFINITY;
    for (i, &l) in acc.iter().enumerate().take(points.len() - 1).skip(1) {
        let d = (l - (total - l)).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Discrete tangents, outward normal and interior angle at a face vertex.
#[derive(Debug, Clone, Copy)]
pub struct VertexGeometry {
    pub t_minus: Vec2,
    pub t_plus: Vec2,
    pub t_avg: Vec2,
    pub n_out: Vec2,
    /// CCW interior angle in (0, 2*pi).
    pub angle: f64,
}

impl VertexGeometry {
    pub fn from_tangents(t_minus: Vec2, t_plus: Vec2) -> Self {
        let t_avg = (t_minus + t_plus) * 0.5;
        let n_raw = Vec2::new(t_avg.y, -t_avg.x);
        let n_out = if n_raw.norm() > 0.0 { n_raw.normalize() } else { n_raw };
        let angle = ccw_angle(t_plus, -t_minus);
        Self { t_minus, t_plus, t_avg, n_out, angle }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt(x: f64, y: f64) -> Pt {
        Pt::new(x, y)
    }

    pub(crate) fn unit_square_raw() -> RawGraph {
        RawGraph {
            vertices: vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)],
            edges: vec![
                (0, 1, vec![pt(0., 0.), pt(1., 0.)]),
                (1, 2, vec![pt(1., 0.), pt(1., 1.)]),
                (2, 3, vec![pt(1., 1.), pt(0., 1.)]),
                (3, 0, vec![pt(0., 1.), pt(0., 0.)]),
            ],
            faces: vec![vec![1, 2, 3, 4]],
        }
    }

    #[test]
    fn unit_square_builds() {
        let g = PlaneGraph::build(&unit_square_raw()).unwrap();
        assert_eq!(g.n_faces(), 1);
        assert_eq!(g.boundary().len(), 4);
    }

    #[test]
    fn open_loop_rejected() {
        let mut raw = unit_square_raw();
        raw.faces = vec![vec![1, 3]];
        match PlaneGraph::build(&raw) {
            Err(Error::OpenLoop { .. }) => {}
            other => panic!("expected OpenLoop, got {other:?}"),
        }
    }

    #[test]
    fn cw_face_rejected() {
        let mut raw = unit_square_raw();
        raw.faces = vec![vec![-4, -3, -2, -1]];
        match PlaneGraph::build(&raw) {
            Err(Error::OrientationError { .. }) => {}
            other => panic!("expected OrientationError, got {other:?}"),
        }
    }

    #[test]
    fn reversed_weight() {
        let g = PlaneGraph::build(&unit_square_raw()).unwrap();
        let fwd = g.weight(DirectedEdgeRef::fwd(0));
        let rev = g.weight(DirectedEdgeRef::rev(0));
        let mut back: Vec<Pt> = rev.points().to_vec();
        back.reverse();
        assert_eq!(fwd.points(), &back[..]);
    }

    #[test]
    fn two_triangles_share_edge() {
        // Diagonal edge referenced +e by one face, -e by the other.
        let raw = RawGraph {
            vertices: vec![pt(0., 0.), pt(1., 0.), pt(1., 1.), pt(0., 1.)],
            edges: vec![
                (0, 1, vec![pt(0., 0.), pt(1., 0.)]),
                (1, 2, vec![pt(1., 0.), pt(1., 1.)]),
                (2, 3, vec![pt(1., 1.), pt(0., 1.)]),
                (3, 0, vec![pt(0., 1.), pt(0., 0.)]),
                (0, 2, vec![pt(0., 0.), pt(0.5, 0.5), pt(1., 1.)]),
            ],
            faces: vec![vec![1, 2, -5], vec![5, 3, 4]],
        };
        let g = PlaneGraph::build(&raw).unwrap();
        assert_eq!(g.n_faces(), 2);
        assert_eq!(g.incident_faces(4), vec![0, 1]);
    }

    #[test]
    fn corner_angles() {
        let g = PlaneGraph::build(&unit_square_raw()).unwrap();
        for v in 0..4 {
            let geom = g.vertex_geometry(0, v).unwrap();
            assert!((geom.angle - PI / 2.0).abs() < 1e-14);
        }
        assert!(matches!(
            g.vertex_geometry(0, 99),
            Err(Error::VertexNotOnFace { .. })
        ));
    }

    #[test]
    fn collinear_angle_is_pi() {
        let raw = RawGraph {
            vertices: vec![pt(0., 0.), pt(1., 0.), pt(2., 0.), pt(1., 2.)],
            edges: vec![
                (0, 1, vec![pt(0., 0.), pt(1., 0.)]),
                (1, 2, vec![pt(1., 0.), pt(2., 0.)]),
                (2, 3, vec![pt(2., 0.), pt(1., 2.)]),
                (3, 0, vec![pt(1., 2.), pt(0., 0.)]),
            ],
            faces: vec![vec![1, 2, 3, 4]],
        };
        let g = PlaneGraph::build(&raw).unwrap();
        let geom = g.vertex_geometry(0, 1).unwrap();
        assert!((geom.angle - PI).abs() < 1e-14);
    }

    #[test]
    fn random_polygon_angle_matches_atan2_oracle() {
        // Independent oracle: direction angles of the two incident segments.
        let vertices = vec![pt(0., 0.), pt(2., 0.3), pt(2.5, 1.7), pt(0.9, 2.4), pt(-0.6, 1.2)];
        let n = vertices.len();
        let edges: Vec<(usize, usize, Vec<Pt>)> = (0..n)
            .map(|i| (i, (i + 1) % n, vec![vertices[i], vertices[(i + 1) % n]]))
            .collect();
        let raw = RawGraph {
            vertices: vertices.clone(),
            edges,
            faces: vec![(1..=n as i64).collect()],
        };
        let g = PlaneGraph::build(&raw).unwrap();
        for v in 0..n {
            let geom = g.vertex_geometry(0, v).unwrap();
            let prev = vertices[(v + n - 1) % n];
            let next = vertices[(v + 1) % n];
            let a_in = (vertices[v].y - prev.y).atan2(vertices[v].x - prev.x);
            let a_out = (next.y - vertices[v].y).atan2(next.x - vertices[v].x);
            // interior angle = pi - signed turn
            let mut turn = a_out - a_in;
            while turn > PI {
                turn -= 2.0 * PI;
            }
            while turn < -PI {
                turn += 2.0 * PI;
            }
            let oracle = PI - turn;
            assert!((geom.angle - oracle).abs() < 1e-12, "vertex {v}");
        }
    }

    #[test]
    fn split_symmetric_polyline_at_midpoint() {
        let pts: Vec<Pt> = (0..11).map(|i| pt(i as f64, 0.)).collect();
        assert_eq!(min_length_discrepancy_index(&pts), 5);
    }

    #[test]
    fn split_nonuniform_matches_scan() {
        let pts: Vec<Pt> =
            vec![pt(0., 0.), pt(0.1, 0.), pt(0.2, 0.), pt(1.8, 0.), pt(2.0, 0.), pt(5.0, 0.)];
        let chosen = min_length_discrepancy_index(&pts);
        // brute force
        let acc = geom::cumulative_lengths(&pts);
        let total = acc.last().unwrap();
        let best = (1..pts.len() - 1)
            .min_by(|&a, &b| {
                let da = (2.0 * acc[a] - total).abs();
                let db = (2.0 * acc[b] - total).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        assert_eq!(chosen, best);
    }

    #[test]
    fn split_edge_updates_faces_and_preserves_points() {
        let mut g = PlaneGraph::build(&unit_square_raw()).unwrap();
        let before = g.edge(0).polyline.points().to_vec();
        let mut dense: Vec<Pt> = (0..11).map(|i| pt(i as f64 / 10.0, 0.)).collect();
        dense[0] = before[0];
        *dense.last_mut().unwrap() = before[1];
        g.edges[0].polyline = Polyline::new(dense.clone()).unwrap();
        let (v, e) = g.split_edge(0, None).unwrap();
        assert_eq!(v, 4);
        assert_eq!(g.face(0).n_edges(), 5);
        // union of points preserved
        let mut joined = g.edge(0).polyline.points().to_vec();
        joined.extend_from_slice(&g.edge(e).polyline.points()[1..]);
        assert_eq!(joined, dense);
        // boundary got updated too
        assert_eq!(g.boundary().len(), 5);
    }

    #[test]
    fn rebuild_from_export_is_identical() {
        let g = PlaneGraph::build(&unit_square_raw()).unwrap();
        let raw = g.to_raw();
        let g2 = PlaneGraph::build(&raw).unwrap();
        let raw2 = g2.to_raw();
        assert_eq!(serde_json::to_string(&raw).unwrap(), serde_json::to_string(&raw2).unwrap());
    }

    #[test]
    fn turning_angle_sums_to_tau() {
        let g = PlaneGraph::build(&unit_square_raw()).unwrap();
        let mut sum = 0.0;
        for v in g.face_vertices(0) {
            let geom = g.vertex_geometry(0, v).unwrap();
            sum += PI - geom.angle;
        }
        assert!((sum - 2.0 * PI).abs() < 1e-8);
    }
}
