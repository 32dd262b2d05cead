//! Quad-layout templates over the regular N-gon: enumeration through patch
//! adjacency graphs, the glued-square harmonic embedding, the radial-centric
//! N-leaf fallback, catalogue storage, the pre-filter and template refinement.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::controlmap::{untangle_layout, UntangleOptions};
use crate::error::{Error, Result};
use crate::geom::{cross2, Pt, TAU};
use crate::plane_graph::PlaneGraph;

/// Position of corner `k` of the regular `n`-gon of radius one.
pub fn ngon_vertex(n: usize, k: usize) -> Pt {
    let a = TAU * (k as f64) / (n as f64);
    Pt::new(a.cos(), a.sin())
}

/// Area of the regular `n`-gon of radius one.
pub fn ngon_area(n: usize) -> f64 {
    0.5 * (n as f64) * (TAU / n as f64).sin()
}

/// Quadrangulation of the regular N-gon. The first `n_boundary` vertices are
/// the polygon corners in CCW order; the rest are interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub n_boundary: usize,
    pub vertices: Vec<Pt>,
    pub edges: Vec<(usize, usize)>,
    pub quads: Vec<[usize; 4]>,
}

impl Template {
    pub fn from_quads(n_boundary: usize, vertices: Vec<Pt>, quads: Vec<[usize; 4]>) -> Self {
        let edges = edges_of_quads(&quads);
        Self { n_boundary, vertices, edges, quads }
    }

    pub fn n_interior(&self) -> usize {
        self.vertices.len() - self.n_boundary
    }

    /// Valence of a vertex in the edge graph.
    pub fn valence(&self, v: usize) -> usize {
        self.edges.iter().filter(|(a, b)| *a == v || *b == v).count()
    }

    /// Boundary edge index k corresponds to the template edge (k, k+1 mod N).
    pub fn boundary_edge(&self, k: usize) -> (usize, usize) {
        (k, (k + 1) % self.n_boundary)
    }

    /// Quads containing the undirected edge `(u, v)`.
    pub fn quads_with_edge(&self, u: usize, v: usize) -> Vec<usize> {
        self.quads
            .iter()
            .enumerate()
            .filter(|(_, q)| {
                (0..4).any(|i| {
                    let a = q[i];
                    let b = q[(i + 1) % 4];
                    (a, b) == (u, v) || (a, b) == (v, u)
                })
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn edges_of_quads(quads: &[[usize; 4]]) -> Vec<(usize, usize)> {
    let mut set = BTreeSet::new();
    for q in quads {
        for i in 0..4 {
            let a = q[i];
            let b = q[(i + 1) % 4];
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

/// Corner cross product of quad `q` at local corner `i`: the z-component of
/// the cross product of the two incident edge vectors. Positive everywhere
/// means a valid (fold-free, locally convex) quadrangulation.
pub fn corner_nu(vertices: &[Pt], q: &[usize; 4], i: usize) -> f64 {
    let v = vertices[q[i]];
    let nxt = vertices[q[(i + 1) % 4]];
    let prv = vertices[q[(i + 3) % 4]];
    cross2(nxt - v, prv - v)
}

/// Validates the template invariants: even N >= 4, boundary vertices on the
/// N-gon corners, every edge in one or two quads, quads tile the polygon
/// (area sum), and all corner cross products positive.
pub fn validate_template(t: &Template) -> Result<()> {
    let n = t.n_boundary;
    if n < 4 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!("template boundary count {n} must be even >= 4")));
    }
    for k in 0..n {
        if (t.vertices[k] - ngon_vertex(n, k)).norm() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "boundary vertex {k} is not at its N-gon corner"
            )));
        }
    }
    for &(u, v) in &t.edges {
        let cnt = t.quads_with_edge(u, v).len();
        if !(1..=2).contains(&cnt) {
            return Err(Error::InvalidInput(format!(
                "edge ({u}, {v}) belongs to {cnt} quads"
            )));
        }
    }
    let mut area = 0.0;
    for q in &t.quads {
        for i in 0..4 {
            if corner_nu(&t.vertices, q, i) <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "non-positive corner cross product in quad {q:?}"
                )));
            }
        }
        let poly: Vec<Pt> = q.iter().map(|&i| t.vertices[i]).collect();
        area += crate::geom::shoelace_area(&poly);
    }
    if (area - ngon_area(n)).abs() > 1e-9 * ngon_area(n) {
        return Err(Error::InvalidInput(format!(
            "quads do not tile the N-gon: area {area} vs {}",
            ngon_area(n)
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Patch adjacency graphs
// ---------------------------------------------------------------------------

/// Patch adjacency graph: the combinatorics of a quadrangulation of the
/// N-gon. Boundary nodes have valence 3 (two ring edges plus one patch
/// attachment), patch nodes valence 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pag {
    pub n_boundary: usize,
    pub n_patches: usize,
    /// Undirected adjacency among `n_boundary` boundary nodes followed by
    /// `n_patches` patch nodes.
    pub adjacency: Vec<(usize, usize)>,
    /// The embedded quadrangulation realising this PAG: CCW corner tuples
    /// over vertices `0..n_boundary` (polygon corners) and interior ids.
    quads: Vec<[usize; 4]>,
    n_vertices: usize,
}

impl Pag {
    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    fn from_quads(n_boundary: usize, n_vertices: usize, quads: Vec<[usize; 4]>) -> Self {
        // Boundary node k stands for polygon edge (k, k+1); patch node j for
        // quad j. Ring edges between adjacent boundary nodes are implied.
        let mut adjacency: Vec<(usize, usize)> = Vec::new();
        for k in 0..n_boundary {
            adjacency.push((k, (k + 1) % n_boundary));
        }
        for (j, q) in quads.iter().enumerate() {
            for i in 0..4 {
                let a = q[i];
                let b = q[(i + 1) % 4];
                if a < n_boundary && b < n_boundary && b == (a + 1) % n_boundary {
                    adjacency.push((a, n_boundary + j));
                }
            }
        }
        for j in 0..quads.len() {
            for k in (j + 1)..quads.len() {
                let shared = shared_edges(&quads[j], &quads[k]);
                for _ in 0..shared {
                    adjacency.push((n_boundary + j, n_boundary + k));
                }
            }
        }
        adjacency.sort();
        Pag { n_boundary, n_patches: quads.len(), adjacency, quads, n_vertices }
    }
}

fn shared_edges(a: &[usize; 4], b: &[usize; 4]) -> usize {
    let mut n = 0;
    for i in 0..4 {
        let e = (a[i].min(a[(i + 1) % 4]), a[i].max(a[(i + 1) % 4]));
        for j in 0..4 {
            let f = (b[j].min(b[(j + 1) % 4]), b[j].max(b[(j + 1) % 4]));
            if e == f {
                n += 1;
            }
        }
    }
    n
}

/// Frontier edge instance: the edge id and its tail vertex; the head is the
/// tail of the next instance in the cycle.
#[derive(Debug, Clone, Copy)]
struct FEdge {
    id: usize,
    tail: usize,
}

#[derive(Debug, Clone)]
struct GrowState {
    n_boundary: usize,
    n_vertices: usize,
    quads: Vec<[usize; 4]>,
    edges: BTreeSet<(usize, usize)>,
    cycles: Vec<Vec<FEdge>>,
    next_edge_id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CornerSpec {
    Glue,
    New,
    Chord(usize), // position on the cycle
}

impl GrowState {
    fn initial(n: usize) -> Self {
        let cycle: Vec<FEdge> = (0..n).map(|k| FEdge { id: k, tail: k }).collect();
        let edges: BTreeSet<(usize, usize)> =
            (0..n).map(|k| order(k, (k + 1) % n)).collect();
        GrowState {
            n_boundary: n,
            n_vertices: n,
            quads: vec![],
            edges,
            cycles: vec![cycle],
            next_edge_id: n,
        }
    }

    fn fill_target(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, usize)> = None;
        for (ci, cy) in self.cycles.iter().enumerate() {
            for (pos, fe) in cy.iter().enumerate() {
                if best.map(|(id, _, _)| fe.id < id).unwrap_or(true) {
                    best = Some((fe.id, ci, pos));
                }
            }
        }
        best.map(|(_, ci, pos)| (ci, pos))
    }

    fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&order(u, v))
    }
}

fn order(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

fn segment(cy: &[FEdge], from: usize, to: usize) -> Vec<FEdge> {
    // instances from `from` (inclusive) walking forward to `to` (exclusive)
    let n = cy.len();
    let mut out = Vec::new();
    let mut k = from % n;
    loop {
        if k == to % n {
            break;
        }
        out.push(cy[k]);
        k = (k + 1) % n;
    }
    out
}

/// Enumerates the quadrangulation combinatorics of the N-gon with exactly
/// `n_patches` quads, deduplicated over boundary rotations and reflections.
/// Interior vertices must have valence >= 3 (layouts violating this cannot be
/// realised with all corner cross products positive). Results are truncated
/// at `limit` and ordered deterministically.
pub fn enumerate_pags(n: usize, n_patches: usize, limit: usize) -> Result<Vec<Pag>> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::InfeasibleConfig { n, n_patches });
    }
    // Euler: interior vertex count is fixed by (N, N_p).
    let v_int = n_patches as i64 + 1 - (n as i64) / 2;
    if n_patches == 0 || v_int < 0 {
        return Err(Error::InfeasibleConfig { n, n_patches });
    }
    let mut seen: BTreeSet<Vec<[usize; 4]>> = BTreeSet::new();
    let mut out: Vec<Pag> = Vec::new();
    let mut stack = vec![GrowState::initial(n)];
    while let Some(state) = stack.pop() {
        if out.len() >= limit {
            break;
        }
        if state.cycles.is_empty() {
            if state.quads.len() == n_patches && interior_valences_ok(&state) {
                let key = canonical_encoding(&state.quads, n, state.n_vertices);
                if seen.insert(key) {
                    out.push(Pag::from_quads(n, state.n_vertices, state.quads.clone()));
                }
            }
            continue;
        }
        if state.quads.len() >= n_patches {
            continue;
        }
        // Parity and budget pruning.
        let quads_left = n_patches - state.quads.len();
        let total_len: usize = state.cycles.iter().map(|c| c.len()).sum();
        if state.cycles.iter().any(|c| c.len() % 2 == 1) || total_len > 4 * quads_left {
            continue;
        }
        let (ci, pos) = state.fill_target().unwrap();
        for cand in candidate_fills(&state, ci, pos) {
            stack.push(cand);
        }
    }
    // Deterministic order: sort by canonical encoding.
    out.sort_by_key(|p| canonical_encoding(&p.quads, n, p.n_vertices));
    Ok(out)
}

fn interior_valences_ok(state: &GrowState) -> bool {
    let mut valence = vec![0usize; state.n_vertices];
    for &(u, v) in &state.edges {
        valence[u] += 1;
        valence[v] += 1;
    }
    (state.n_boundary..state.n_vertices).all(|v| valence[v] >= 3)
}

/// All legal quads covering the frontier edge at `(ci, pos)`.
fn candidate_fills(state: &GrowState, ci: usize, pos: usize) -> Vec<GrowState> {
    let cy = &state.cycles[ci];
    let len = cy.len();
    let at = |k: usize| cy[k % len];
    let a = at(pos).tail;
    let b = at(pos + 1).tail;
    let mut result = Vec::new();

    // Closure: the cycle is exactly one quad.
    if len == 4 {
        let c = at(pos + 2).tail;
        let d = at(pos + 3).tail;
        if distinct(&[a, b, c, d]) {
            let mut next = state.clone();
            next.cycles.remove(ci);
            next.quads.push([a, b, c, d]);
            result.push(next);
        }
        if len == 4 {
            // A 4-cycle region admits non-closing fills too (with new interior
            // vertices), so fall through.
        }
    }

    let mut c_specs: Vec<CornerSpec> = vec![CornerSpec::New];
    if len > 4 {
        c_specs.push(CornerSpec::Glue);
    }
    for j in 0..len {
        let steps = (j + len - pos) % len;
        if steps >= 2 {
            c_specs.push(CornerSpec::Chord(j));
        }
    }
    let mut d_specs: Vec<CornerSpec> = vec![CornerSpec::New];
    if len > 4 {
        d_specs.push(CornerSpec::Glue);
    }
    for k in 0..len {
        let steps = (k + len - pos) % len;
        if steps >= 2 {
            d_specs.push(CornerSpec::Chord(k));
        }
    }

    for &cs in &c_specs {
        for &ds in &d_specs {
            if let Some(next) = try_fill(state, ci, pos, cs, ds) {
                result.push(next);
            }
        }
    }
    // Extended glue runs: sides (b,c) and (c,d) both along the cycle.
    if len > 4 {
        if let Some(next) = try_glue_run_right(state, ci, pos) {
            result.push(next);
        }
        if let Some(next) = try_glue_run_left(state, ci, pos) {
            result.push(next);
        }
    }
    result
}

fn distinct(v: &[usize]) -> bool {
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            if v[i] == v[j] {
                return false;
            }
        }
    }
    true
}

fn try_fill(
    state: &GrowState,
    ci: usize,
    pos: usize,
    cs: CornerSpec,
    ds: CornerSpec,
) -> Option<GrowState> {
    let cy = &state.cycles[ci];
    let len = cy.len();
    let at = |k: usize| cy[k % len];
    let steps = |k: usize| (k + len - pos) % len;
    let a = at(pos).tail;
    let b = at(pos + 1).tail;

    let c = match cs {
        CornerSpec::Glue => at(pos + 2).tail,
        CornerSpec::New => state.n_vertices,
        CornerSpec::Chord(j) => at(j).tail,
    };
    let d = match ds {
        CornerSpec::Glue => at(pos + len - 1).tail,
        CornerSpec::New => {
            if cs == CornerSpec::New {
                state.n_vertices + 1
            } else {
                state.n_vertices
            }
        }
        CornerSpec::Chord(k) => at(k).tail,
    };
    if !distinct(&[a, b, c, d]) {
        return None;
    }
    // Chord ordering: walking CCW from b we must meet c strictly before d.
    let c_steps = match cs {
        CornerSpec::Glue => 2,
        CornerSpec::Chord(j) => steps(j),
        CornerSpec::New => 0,
    };
    let d_steps = match ds {
        CornerSpec::Glue => len - 1,
        CornerSpec::Chord(k) => steps(k),
        CornerSpec::New => 0,
    };
    if cs != CornerSpec::New && ds != CornerSpec::New && c_steps >= d_steps {
        return None;
    }
    // Fresh sides must not duplicate existing edges.
    let c_glued = cs == CornerSpec::Glue;
    let d_glued = ds == CornerSpec::Glue;
    if !c_glued && matches!(cs, CornerSpec::Chord(_)) && state.has_edge(b, c) {
        return None;
    }
    if !d_glued && matches!(ds, CornerSpec::Chord(_)) && state.has_edge(d, a) {
        return None;
    }
    let cd_glued = false; // handled by the glue-run constructors
    if !cd_glued && cs != CornerSpec::New && ds != CornerSpec::New && state.has_edge(c, d) {
        return None;
    }

    let mut next = state.clone();
    next.quads.push([a, b, c, d]);
    if c == state.n_vertices || d == state.n_vertices {
        next.n_vertices = state.n_vertices + 1;
    }
    if cs == CornerSpec::New && ds == CornerSpec::New {
        next.n_vertices = state.n_vertices + 2;
    }
    for (u, v) in [(a, b), (b, c), (c, d), (d, a)] {
        next.edges.insert(order(u, v));
    }

    let mut nid = state.next_edge_id;
    let mut new_edge = |tail: usize| {
        let e = FEdge { id: nid, tail };
        nid += 1;
        e
    };

    let mut new_cycles: Vec<Vec<FEdge>> = Vec::new();
    match (cs, ds) {
        (CornerSpec::New, CornerSpec::New) => {
            let mut cyc = segment(cy, pos + 1, pos);
            cyc.extend([new_edge(a), new_edge(d), new_edge(c)]);
            new_cycles.push(cyc);
        }
        (CornerSpec::Glue, CornerSpec::New) => {
            let mut cyc = segment(cy, pos + 2, pos);
            cyc.extend([new_edge(a), new_edge(d)]);
            new_cycles.push(cyc);
        }
        (CornerSpec::New, CornerSpec::Glue) => {
            let mut cyc = segment(cy, pos + 1, pos + len - 1);
            cyc.extend([new_edge(d), new_edge(c)]);
            new_cycles.push(cyc);
        }
        (CornerSpec::Glue, CornerSpec::Glue) => {
            let mut cyc = segment(cy, pos + 2, pos + len - 1);
            cyc.push(new_edge(d));
            new_cycles.push(cyc);
        }
        (CornerSpec::Chord(j), CornerSpec::New) => {
            let mut strip = segment(cy, pos + 1, j);
            strip.push(new_edge(c));
            let mut main = segment(cy, j, pos);
            main.extend([new_edge(a), new_edge(d)]);
            new_cycles.push(strip);
            new_cycles.push(main);
        }
        (CornerSpec::New, CornerSpec::Chord(k)) => {
            let mut strip = segment(cy, pos + 1, k);
            strip.extend([new_edge(d), new_edge(c)]);
            let mut main = segment(cy, k, pos);
            main.push(new_edge(a));
            new_cycles.push(strip);
            new_cycles.push(main);
        }
        (CornerSpec::Glue, CornerSpec::Chord(k)) => {
            let mut strip = segment(cy, pos + 2, k);
            strip.push(new_edge(d));
            let mut main = segment(cy, k, pos);
            main.push(new_edge(a));
            new_cycles.push(strip);
            new_cycles.push(main);
        }
        (CornerSpec::Chord(j), CornerSpec::Glue) => {
            let mut strip = segment(cy, pos + 1, j);
            strip.push(new_edge(c));
            let mut main = segment(cy, j, pos + len - 1);
            main.push(new_edge(d));
            new_cycles.push(strip);
            new_cycles.push(main);
        }
        (CornerSpec::Chord(j), CornerSpec::Chord(k)) => {
            let mut s1 = segment(cy, pos + 1, j);
            s1.push(new_edge(c));
            let mut s2 = segment(cy, j, k);
            s2.push(new_edge(d));
            let mut s3 = segment(cy, k, pos);
            s3.push(new_edge(a));
            new_cycles.push(s1);
            new_cycles.push(s2);
            new_cycles.push(s3);
        }
    }
    next.next_edge_id = nid;
    next.cycles.remove(ci);
    for cyc in new_cycles {
        debug_assert!(cyc.len() >= 3);
        next.cycles.push(cyc);
    }
    Some(next)
}

/// Right glue run: sides (a,b), (b,c), (c,d) all along the cycle, (d,a) fresh.
fn try_glue_run_right(state: &GrowState, ci: usize, pos: usize) -> Option<GrowState> {
    let cy = &state.cycles[ci];
    let len = cy.len();
    if len <= 4 {
        return None;
    }
    let at = |k: usize| cy[k % len];
    let (a, b, c, d) = (at(pos).tail, at(pos + 1).tail, at(pos + 2).tail, at(pos + 3).tail);
    if !distinct(&[a, b, c, d]) || state.has_edge(d, a) {
        return None;
    }
    let mut next = state.clone();
    next.quads.push([a, b, c, d]);
    next.edges.insert(order(d, a));
    let mut cyc = segment(cy, pos + 3, pos);
    cyc.push(FEdge { id: next.next_edge_id, tail: a });
    next.next_edge_id += 1;
    next.cycles.remove(ci);
    next.cycles.push(cyc);
    Some(next)
}

/// Left glue run: sides (c,d), (d,a), (a,b) along the cycle, (b,c) fresh.
fn try_glue_run_left(state: &GrowState, ci: usize, pos: usize) -> Option<GrowState> {
    let cy = &state.cycles[ci];
    let len = cy.len();
    if len <= 4 {
        return None;
    }
    let at = |k: usize| cy[k % len];
    let (a, b) = (at(pos).tail, at(pos + 1).tail);
    let d = at(pos + len - 1).tail;
    let c = at(pos + len - 2).tail;
    if !distinct(&[a, b, c, d]) || state.has_edge(b, c) {
        return None;
    }
    let mut next = state.clone();
    next.quads.push([a, b, c, d]);
    next.edges.insert(order(b, c));
    let mut cyc = segment(cy, pos + 1, pos + len - 2);
    cyc.push(FEdge { id: next.next_edge_id, tail: c });
    next.next_edge_id += 1;
    next.cycles.remove(ci);
    next.cycles.push(cyc);
    Some(next)
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

/// Lexicographically minimal quad encoding over boundary rotations and
/// reflections, with interior ids relabeled canonically.
pub(crate) fn canonical_encoding(
    quads: &[[usize; 4]],
    n_boundary: usize,
    n_vertices: usize,
) -> Vec<[usize; 4]> {
    let mut best: Option<Vec<[usize; 4]>> = None;
    for reflect in [false, true] {
        for rot in 0..n_boundary {
            let mapped: Vec<[usize; 4]> = quads
                .iter()
                .map(|q| {
                    let mut m = [0usize; 4];
                    for i in 0..4 {
                        let v = q[i];
                        m[i] = if v < n_boundary {
                            if reflect {
                                (n_boundary - v + rot) % n_boundary
                            } else {
                                (v + rot) % n_boundary
                            }
                        } else {
                            v // interior; relabeled below
                        };
                    }
                    if reflect {
                        m.reverse();
                    }
                    m
                })
                .collect();
            let enc = relabel_interior(&mapped, n_boundary, n_vertices);
            if best.as_ref().map(|b| enc < *b).unwrap_or(true) {
                best = Some(enc);
            }
        }
    }
    best.unwrap()
}

/// Greedy interior relabeling with branching on ties.
fn relabel_interior(quads: &[[usize; 4]], n_boundary: usize, n_vertices: usize) -> Vec<[usize; 4]> {
    const UNLABELED: usize = usize::MAX;
    fn rec(
        quads: &[[usize; 4]],
        n_boundary: usize,
        label: &mut Vec<usize>,
        next: usize,
        best: &mut Option<Vec<[usize; 4]>>,
    ) {
        let key_of = |q: &[usize; 4], label: &[usize]| -> [usize; 4] {
            let mut m = [0usize; 4];
            for i in 0..4 {
                m[i] = if q[i] < n_boundary { q[i] } else { label[q[i] - n_boundary] };
            }
            min_rotation(&m)
        };
        let pending: Vec<usize> = (0..quads.len())
            .filter(|&qi| quads[qi].iter().any(|&v| v >= n_boundary && label[v - n_boundary] == UNLABELED))
            .collect();
        if pending.is_empty() {
            let mut enc: Vec<[usize; 4]> = quads.iter().map(|q| key_of(q, label)).collect();
            enc.sort();
            if best.as_ref().map(|b| enc < *b).unwrap_or(true) {
                *best = Some(enc);
            }
            return;
        }
        let keys: Vec<[usize; 4]> = pending.iter().map(|&qi| key_of(&quads[qi], label)).collect();
        let min_key = keys.iter().min().unwrap().clone();
        for (idx, _) in keys.iter().enumerate().filter(|(_, k)| **k == min_key) {
            let qi = pending[idx];
            // Assign labels to unlabeled corners in the order of the minimal
            // rotation of the quad.
            let q = &quads[qi];
            let rot = best_rotation_offset(q, n_boundary, label);
            let mut lab = label.clone();
            let mut nx = next;
            for i in 0..4 {
                let v = q[(rot + i) % 4];
                if v >= n_boundary && lab[v - n_boundary] == UNLABELED {
                    lab[v - n_boundary] = n_boundary + nx;
                    nx += 1;
                }
            }
            rec(quads, n_boundary, &mut lab, nx, best);
        }
    }

    fn min_rotation(m: &[usize; 4]) -> [usize; 4] {
        let mut best = *m;
        for r in 1..4 {
            let rot = [m[r], m[(r + 1) % 4], m[(r + 2) % 4], m[(r + 3) % 4]];
            if rot < best {
                best = rot;
            }
        }
        best
    }

    fn best_rotation_offset(q: &[usize; 4], n_boundary: usize, label: &[usize]) -> usize {
        let mapped: Vec<usize> = q
            .iter()
            .map(|&v| if v < n_boundary { v } else { label[v - n_boundary] })
            .collect();
        let mut best_r = 0;
        let mut best: Option<[usize; 4]> = None;
        for r in 0..4 {
            let rot = [
                mapped[r],
                mapped[(r + 1) % 4],
                mapped[(r + 2) % 4],
                mapped[(r + 3) % 4],
            ];
            if best.map(|b| rot < b).unwrap_or(true) {
                best = Some(rot);
                best_r = r;
            }
        }
        best_r
    }

    let mut label = vec![UNLABELED; n_vertices.saturating_sub(n_boundary)];
    let mut best = None;
    rec(quads, n_boundary, &mut label, 0, &mut best);
    best.unwrap_or_default()
}

// ---------------------------------------------------------------------------
// PAG -> template
// ---------------------------------------------------------------------------

/// Embeds a PAG as a concrete template: boundary vertices at the N-gon
/// corners, interior vertices from the corner-network harmonic (graph
/// Laplacian) solve, repaired by the untangler when the solve folds a quad.
pub fn pag_to_template(pag: &Pag) -> Result<Template> {
    let n = pag.n_boundary;
    let nv = pag.n_vertices;
    let quads = pag.quads.clone();
    let edges = edges_of_quads(&quads);

    let mut positions: Vec<Pt> = (0..n).map(|k| ngon_vertex(n, k)).collect();
    positions.extend(std::iter::repeat(Pt::origin()).take(nv - n));

    let n_int = nv - n;
    if n_int > 0 {
        // Graph Laplacian: interior vertex = mean of its neighbours.
        let mut lap = nalgebra::DMatrix::<f64>::zeros(n_int, n_int);
        let mut rhs_x = nalgebra::DVector::<f64>::zeros(n_int);
        let mut rhs_y = nalgebra::DVector::<f64>::zeros(n_int);
        for &(u, v) in &edges {
            for (p, q) in [(u, v), (v, u)] {
                if p >= n {
                    let i = p - n;
                    lap[(i, i)] += 1.0;
                    if q >= n {
                        lap[(i, q - n)] -= 1.0;
                    } else {
                        rhs_x[i] += positions[q].x;
                        rhs_y[i] += positions[q].y;
                    }
                }
            }
        }
        let lu = lap.clone().lu();
        let sol_x = lu.solve(&rhs_x).ok_or(Error::SingularGlueSystem)?;
        let sol_y = lu.solve(&rhs_y).ok_or(Error::SingularGlueSystem)?;
        // A disconnected interior component has a singular block; the LU
        // solve above will produce NaNs or fail in that case.
        if sol_x.iter().chain(sol_y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::SingularGlueSystem);
        }
        for i in 0..n_int {
            positions[n + i] = Pt::new(sol_x[i], sol_y[i]);
        }
    }

    let folded = quads
        .iter()
        .any(|q| (0..4).any(|i| corner_nu(&positions, q, i) <= 0.0));
    if folded {
        positions = untangle_layout(&positions, &quads, n, &UntangleOptions::default())?;
    }
    let t = Template::from_quads(n, positions, quads);
    validate_template(&t)?;
    Ok(t)
}

/// Radial-centric N-leaf fallback template: a ring of N leaf quads between
/// the polygon corners and an inner ring at radius 1/2, plus a central fan
/// joining every second inner-ring vertex to the centre. Every boundary
/// vertex has valence exactly 3.
pub fn rc_n_leaf(n: usize) -> Template {
    assert!(n >= 4 && n % 2 == 0, "RC N-leaf needs even N >= 4");
    let mut vertices: Vec<Pt> = (0..n).map(|k| ngon_vertex(n, k)).collect();
    // inner ring
    for k in 0..n {
        let p = ngon_vertex(n, k);
        vertices.push(Pt::new(p.x * 0.5, p.y * 0.5));
    }
    let w = |k: usize| n + (k % n);
    let mut quads: Vec<[usize; 4]> = (0..n).map(|q| [q, (q + 1) % n, w(q + 1), w(q)]).collect();
    if n == 4 {
        quads.push([w(0), w(1), w(2), w(3)]);
    } else {
        let centre = vertices.len();
        vertices.push(Pt::origin());
        for q in (0..n).step_by(2) {
            quads.push([w(q), w(q + 1), w(q + 2), centre]);
        }
    }
    Template::from_quads(n, vertices, quads)
}

// ---------------------------------------------------------------------------
// Catalogue
// ---------------------------------------------------------------------------

/// Precomputed template catalogue keyed by boundary count. Entries include
/// all cyclic boundary renumberings of each canonical layout.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TemplateCatalogue {
    pub version: u32,
    pub entries: Vec<CatalogueEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub n: usize,
    pub n_patches: usize,
    pub template: Template,
}

#[derive(Debug, Clone, Copy)]
pub struct CatalogueBuildOptions {
    pub n_min: usize,
    pub n_max: usize,
    pub max_patches: usize,
    /// Cap on canonical layouts kept per (N, N_p) cell.
    pub per_cell_cap: usize,
}

impl Default for CatalogueBuildOptions {
    fn default() -> Self {
        Self { n_min: 4, n_max: 16, max_patches: 12, per_cell_cap: 64 }
    }
}

impl TemplateCatalogue {
    /// Builds the catalogue by enumerating PAGs per (N, N_p) cell, embedding
    /// each as a template, and expanding cyclic renumberings.
    pub fn build(opts: &CatalogueBuildOptions) -> Result<Self> {
        let mut entries = Vec::new();
        let mut n = opts.n_min.max(4);
        if n % 2 == 1 {
            n += 1;
        }
        while n <= opts.n_max {
            let np_min = (n / 2).saturating_sub(1).max(1);
            for np in np_min..=opts.max_patches {
                let pags = match enumerate_pags(n, np, opts.per_cell_cap) {
                    Ok(p) => p,
                    Err(Error::InfeasibleConfig { .. }) => continue,
                    Err(e) => return Err(e),
                };
                for pag in &pags {
                    let base = match pag_to_template(pag) {
                        Ok(t) => t,
                        Err(_) => continue, // unrealisable layout; skip
                    };
                    for rot in 0..n {
                        let t = rotate_template(&base, rot);
                        if validate_template(&t).is_ok()
                            && !entries.iter().any(|e: &CatalogueEntry| e.template == t)
                        {
                            entries.push(CatalogueEntry { n, n_patches: np, template: t });
                        }
                    }
                }
            }
            n += 2;
        }
        Ok(Self { version: 1, entries })
    }

    pub fn for_n(&self, n: usize) -> Vec<&CatalogueEntry> {
        self.entries.iter().filter(|e| e.n == n).collect()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Cyclic renumbering of the boundary: new vertex k is the old k + rot. Quad
/// topology is preserved; vertex positions rotate accordingly so boundary
/// vertices stay on their N-gon corners.
pub fn rotate_template(t: &Template, rot: usize) -> Template {
    let n = t.n_boundary;
    let map = |v: usize| if v < n { (v + n - rot) % n } else { v };
    let angle = TAU * (rot as f64) / (n as f64);
    let (s, c) = angle.sin_cos();
    let vertices: Vec<Pt> = {
        let mut out = vec![Pt::origin(); t.vertices.len()];
        for (v, &p) in t.vertices.iter().enumerate() {
            // rotate positions by -rot steps so that old vertex v lands on
            // the corner of its new index
            let q = Pt::new(c * p.x + s * p.y, -s * p.x + c * p.y);
            out[map(v)] = q;
        }
        out
    };
    let quads: Vec<[usize; 4]> = t
        .quads
        .iter()
        .map(|q| {
            let mut m = [0usize; 4];
            for i in 0..4 {
                m[i] = map(q[i]);
            }
            m
        })
        .collect();
    Template::from_quads(n, vertices, quads)
}

// ---------------------------------------------------------------------------
// Pre-filter and assignment
// ---------------------------------------------------------------------------

/// Where a chosen template came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TemplateSource {
    Catalogue { index: usize },
    RcFallback,
}

/// A template together with its provenance, as returned by the pre-filter.
#[derive(Debug, Clone)]
pub struct TemplateChoice {
    pub source: TemplateSource,
    pub template: Template,
}

/// Template assigned to a face. The boundary-edge correspondence pairs
/// template boundary edge `k` with `face.edges[k]` (root at the face's first
/// edge; other roots appear as cyclic renumberings in the catalogue).
#[derive(Debug, Clone)]
pub struct FaceTemplate {
    pub template: Template,
    pub source: TemplateSource,
    /// Control-template vertex positions after inner-vertex optimisation,
    /// if the selection strategy ran one.
    pub optimised_control: Option<Vec<Pt>>,
    /// Selection score C_T of the winning template, when a scoring strategy
    /// was used.
    pub score: Option<f64>,
}

impl FaceTemplate {
    pub fn new(choice: TemplateChoice) -> Self {
        Self {
            template: choice.template,
            source: choice.source,
            optimised_control: None,
            score: None,
        }
    }
}

/// Algorithm "template pre-filter": keep catalogue templates with matching
/// boundary count whose correspondence maps every nearly-flat face vertex
/// (angle >= pi - mu_angle) to a template vertex of valence >= 3. Falls back
/// to the RC N-leaf when the filter leaves nothing.
pub fn prefilter(
    graph: &PlaneGraph,
    face: usize,
    catalogue: &TemplateCatalogue,
    mu_angle: f64,
) -> Vec<TemplateChoice> {
    let nf = graph.face(face).n_edges();
    let verts = graph.face_vertices(face);
    let flat: Vec<usize> = (0..nf)
        .filter(|&k| {
            graph
                .vertex_geometry(face, verts[k])
                .map(|g| g.angle >= std::f64::consts::PI - mu_angle)
                .unwrap_or(false)
        })
        .collect();
    let mut out: Vec<TemplateChoice> = Vec::new();
    for (idx, entry) in catalogue.entries.iter().enumerate() {
        if entry.n != nf {
            continue;
        }
        let ok = flat.iter().all(|&k| entry.template.valence(k) >= 3);
        if ok {
            out.push(TemplateChoice {
                source: TemplateSource::Catalogue { index: idx },
                template: entry.template.clone(),
            });
        }
    }
    if out.is_empty() {
        out.push(TemplateChoice { source: TemplateSource::RcFallback, template: rc_n_leaf(nf) });
    }
    out
}

// ---------------------------------------------------------------------------
// Template refinement
// ---------------------------------------------------------------------------

/// Splits `edge` (at `split_index`, or the min length-discrepancy point) and
/// propagates quad-strip refinements through all templated faces along the
/// opposite-edge chain, per the pairing induced by each face's template.
/// Returns the ids of all graph edges that were split.
pub fn refine_template(
    graph: &mut PlaneGraph,
    edge: usize,
    split_index: Option<usize>,
) -> Result<Vec<usize>> {
    // Collect the chain of (face, boundary-edge-position) refinements first;
    // graph mutation happens afterwards so positions stay valid.
    let mut chain_edges: Vec<usize> = vec![edge];
    let mut strip_refinements: Vec<(usize, usize)> = Vec::new(); // (face, boundary edge index)
    let mut visited: BTreeSet<usize> = BTreeSet::new();
    visited.insert(edge);

    // The chain can extend from both templated sides of the seed edge.
    let mut frontier: Vec<usize> = vec![edge];
    while let Some(e) = frontier.pop() {
        for fi in graph.incident_faces(e) {
            if graph.face(fi).template.is_none() {
                continue;
            }
            // position of +-e in the face edge list
            let k = graph
                .face(fi)
                .edges
                .iter()
                .position(|r| r.edge == e)
                .expect("incident face must reference the edge");
            if strip_refinements.contains(&(fi, k)) {
                continue;
            }
            let ft = graph.face(fi).template.as_ref().unwrap();
            let exit = opposite_boundary_edge(&ft.template, k)?;
            strip_refinements.push((fi, k));
            let exit_edge = graph.face(fi).edges[exit].edge;
            if !visited.insert(exit_edge) {
                if exit_edge != e {
                    return Err(Error::RefinementCycle { edge: exit_edge });
                }
                continue;
            }
            chain_edges.push(exit_edge);
            frontier.push(exit_edge);
        }
    }

    // Split every chain edge. Edge ids of faces' lists change length, so
    // capture face boundary indices per refinement against the old lists;
    // strip refinement below works on template indices which we update in
    // face order after all graph splits.
    let mut split_results: Vec<(usize, usize)> = Vec::new(); // (old edge, new edge)
    for (i, &e) in chain_edges.iter().enumerate() {
        let idx = if i == 0 { split_index } else { None };
        let (_, new_edge) = graph.split_edge(e, idx)?;
        split_results.push((e, new_edge));
    }

    // Refine each affected template: the stored boundary-edge index k still
    // identifies the pre-split position; after the splits, face.edges has
    // grown. Rebuild each template by strip subdivision and re-embedding.
    for (fi, k) in strip_refinements {
        let ft = graph.face(fi).template.clone().unwrap();
        let refined = refine_template_strip(&ft.template, k)?;
        // Keep provenance; the optimised control layout no longer matches.
        graph.face_mut(fi).template = Some(FaceTemplate {
            template: refined,
            source: ft.source,
            optimised_control: None,
            score: ft.score,
        });
    }
    Ok(split_results.iter().map(|&(e, _)| e).collect())
}

/// The boundary edge index paired with boundary edge `k` by the quad strip
/// orthogonal to it.
pub fn opposite_boundary_edge(t: &Template, k: usize) -> Result<usize> {
    let n = t.n_boundary;
    let mut side = t.boundary_edge(k);
    let mut quad = {
        let qs = t.quads_with_edge(side.0, side.1);
        *qs.first().ok_or_else(|| Error::InvalidInput("boundary edge not in any quad".into()))?
    };
    let mut guard = 0;
    loop {
        guard += 1;
        if guard > t.quads.len() + 1 {
            return Err(Error::RefinementCycle { edge: k });
        }
        let q = &t.quads[quad];
        let i = (0..4)
            .find(|&i| {
                let a = q[i];
                let b = q[(i + 1) % 4];
                (a, b) == side || (b, a) == side
            })
            .expect("quad must contain its strip side");
        let opp = (q[(i + 2) % 4], q[(i + 3) % 4]);
        // Opposite side on the boundary?
        if opp.0 < n && opp.1 < n {
            let lo = opp.0.min(opp.1);
            let hi = opp.0.max(opp.1);
            if hi == lo + 1 || (lo == 0 && hi == n - 1) {
                let idx = if hi == lo + 1 { lo } else { hi };
                return Ok(idx);
            }
        }
        let next: Vec<usize> =
            t.quads_with_edge(opp.0, opp.1).into_iter().filter(|&qi| qi != quad).collect();
        match next.first() {
            Some(&qi) => {
                quad = qi;
                side = opp;
            }
            None => {
                return Err(Error::InvalidInput(
                    "quad strip exited through an interior edge".into(),
                ))
            }
        }
    }
}

/// Subdivides the quad strip containing boundary edge `k` orthogonally,
/// splitting `k` and its opposite boundary edge, then re-embeds the template
/// over the grown polygon.
pub fn refine_template_strip(t: &Template, k: usize) -> Result<Template> {
    let n = t.n_boundary;
    let exit = opposite_boundary_edge(t, k)?;

    // Walk the strip collecting the crossed sides in order.
    let mut sides: Vec<(usize, usize)> = vec![t.boundary_edge(k)];
    let mut quads_in_strip: Vec<usize> = Vec::new();
    let mut side = t.boundary_edge(k);
    let mut quad = t.quads_with_edge(side.0, side.1)[0];
    loop {
        quads_in_strip.push(quad);
        let q = &t.quads[quad];
        let i = (0..4)
            .find(|&i| {
                let a = q[i];
                let b = q[(i + 1) % 4];
                (a, b) == side || (b, a) == side
            })
            .unwrap();
        let opp = (q[(i + 2) % 4], q[(i + 3) % 4]);
        sides.push(opp);
        let next: Vec<usize> =
            t.quads_with_edge(opp.0, opp.1).into_iter().filter(|&qi| qi != quad).collect();
        match next.first() {
            Some(&qi) => {
                quad = qi;
                side = opp;
            }
            None => break,
        }
    }

    // New vertex on each crossed side (old ids for now; re-embedding fixes
    // the geometry).
    let mut work_vertices = t.vertices.clone();
    let mut mid_of: std::collections::BTreeMap<(usize, usize), usize> = Default::default();
    for s in &sides {
        let key = (s.0.min(s.1), s.0.max(s.1));
        let m = work_vertices.len();
        let a = work_vertices[s.0];
        let b = work_vertices[s.1];
        work_vertices.push(Pt::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        mid_of.insert(key, m);
    }

    let mut new_quads: Vec<[usize; 4]> = Vec::new();
    for (qi, q) in t.quads.iter().enumerate() {
        if !quads_in_strip.contains(&qi) {
            new_quads.push(*q);
            continue;
        }
        // entry side = the crossed side with the lower strip order
        let entry_i = (0..4)
            .find(|&i| {
                let key = (q[i].min(q[(i + 1) % 4]), q[i].max(q[(i + 1) % 4]));
                mid_of.contains_key(&key)
                    && sides.iter().position(|s| (s.0.min(s.1), s.0.max(s.1)) == key)
                        == Some(quads_in_strip.iter().position(|&x| x == qi).unwrap())
            })
            .expect("strip quad must contain its entry side");
        let c0 = q[entry_i];
        let c1 = q[(entry_i + 1) % 4];
        let c2 = q[(entry_i + 2) % 4];
        let c3 = q[(entry_i + 3) % 4];
        let m_in = mid_of[&(c0.min(c1), c0.max(c1))];
        let m_out = mid_of[&(c2.min(c3), c2.max(c3))];
        new_quads.push([c0, m_in, m_out, c3]);
        new_quads.push([m_in, c1, c2, m_out]);
    }

    // Renumber: boundary grows by 2. New boundary order: walk the old
    // boundary inserting the two midpoints after their edge tails.
    let mut boundary_order: Vec<usize> = Vec::with_capacity(n + 2);
    for v in 0..n {
        boundary_order.push(v);
        if v == k {
            boundary_order.push(mid_of[&order_pair(t.boundary_edge(k))]);
        }
        if v == exit {
            boundary_order.push(mid_of[&order_pair(t.boundary_edge(exit))]);
        }
    }
    let n_new = n + 2;
    let mut remap = vec![usize::MAX; work_vertices.len()];
    for (new_id, &old_id) in boundary_order.iter().enumerate() {
        remap[old_id] = new_id;
    }
    let mut next_id = n_new;
    for old_id in 0..work_vertices.len() {
        if remap[old_id] == usize::MAX {
            remap[old_id] = next_id;
            next_id += 1;
        }
    }
    let mut vertices = vec![Pt::origin(); work_vertices.len()];
    for (old_id, &p) in work_vertices.iter().enumerate() {
        vertices[remap[old_id]] = p;
    }
    let quads: Vec<[usize; 4]> = new_quads
        .iter()
        .map(|q| {
            let mut m = [0usize; 4];
            for i in 0..4 {
                m[i] = remap[q[i]];
            }
            m
        })
        .collect();

    // Re-embed: boundary on the (N+2)-gon corners, interior harmonic.
    for (kk, v) in vertices.iter_mut().enumerate().take(n_new) {
        *v = ngon_vertex(n_new, kk);
    }
    let pag = Pag::from_quads(n_new, vertices.len(), quads);
    let mut t2 = pag_to_template(&pag)?;
    // pag_to_template resolved positions from scratch; keep them.
    t2.n_boundary = n_new;
    Ok(t2)
}

fn order_pair(p: (usize, usize)) -> (usize, usize) {
    (p.0.min(p.1), p.0.max(p.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad_pag() {
        let pags = enumerate_pags(4, 1, 100).unwrap();
        assert_eq!(pags.len(), 1);
        let t = pag_to_template(&pags[0]).unwrap();
        assert_eq!(t.quads.len(), 1);
        assert_eq!(t.n_interior(), 0);
        validate_template(&t).unwrap();
    }

    #[test]
    fn no_two_quad_square() {
        // Two quads in a 4-gon force an interior valence-2 vertex, which can
        // never realise positive corner cross products.
        let pags = enumerate_pags(4, 2, 100).unwrap();
        assert_eq!(pags.len(), 0);
    }

    #[test]
    fn infeasible_configs() {
        assert!(matches!(enumerate_pags(6, 0, 10), Err(Error::InfeasibleConfig { .. })));
        assert!(matches!(enumerate_pags(6, 1, 10), Err(Error::InfeasibleConfig { .. })));
        assert!(matches!(enumerate_pags(5, 2, 10), Err(Error::InfeasibleConfig { .. })));
    }

    #[test]
    fn hexagon_small_counts() {
        // 2 quads in a hexagon: one splitting chord, 3 rotations mod
        // symmetry -> a single canonical layout.
        let pags = enumerate_pags(6, 2, 100).unwrap();
        assert_eq!(pags.len(), 1);
        for pag in &pags {
            let t = pag_to_template(pag).unwrap();
            validate_template(&t).unwrap();
        }
        // 3 quads: the classic brick and fan layouts.
        let pags3 = enumerate_pags(6, 3, 100).unwrap();
        assert!(!pags3.is_empty());
        for pag in &pags3 {
            let t = pag_to_template(pag).unwrap();
            validate_template(&t).unwrap();
        }
    }

    #[test]
    fn enumeration_is_stable() {
        let a = enumerate_pags(6, 3, 100).unwrap();
        let b = enumerate_pags(6, 3, 100).unwrap();
        let ea: Vec<_> = a.iter().map(|p| p.quads().to_vec()).collect();
        let eb: Vec<_> = b.iter().map(|p| p.quads().to_vec()).collect();
        assert_eq!(ea, eb);
    }

    #[test]
    fn rc_leaf_valences_and_tiling() {
        for n in [4usize, 8, 10] {
            let t = rc_n_leaf(n);
            validate_template(&t).unwrap();
            for v in 0..n {
                assert_eq!(t.valence(v), 3, "boundary valence at {v} for N={n}");
            }
            assert_eq!(t.quads.len(), if n == 4 { 5 } else { 3 * n / 2 });
        }
    }

    #[test]
    fn interior_vertices_inside_polygon() {
        let pags = enumerate_pags(6, 3, 100).unwrap();
        for pag in &pags {
            let t = pag_to_template(pag).unwrap();
            let poly: Vec<Pt> = (0..6).map(|k| ngon_vertex(6, k)).collect();
            for v in 6..t.vertices.len() {
                assert!(crate::geom::winding_number(&poly, t.vertices[v]) != 0);
            }
        }
    }

    #[test]
    fn rotation_preserves_validity() {
        let t = rc_n_leaf(6);
        for rot in 0..6 {
            let r = rotate_template(&t, rot);
            validate_template(&r).unwrap();
        }
    }

    #[test]
    fn cyclic_relabel_consistency() {
        // canonical encoding of a layout equals that of its rotation
        let pags = enumerate_pags(6, 3, 100).unwrap();
        for pag in &pags {
            let t = pag_to_template(pag).unwrap();
            let r = rotate_template(&t, 2);
            let e1 = canonical_encoding(&t.quads, 6, t.vertices.len());
            let e2 = canonical_encoding(&r.quads, 6, r.vertices.len());
            assert_eq!(e1, e2);
        }
    }

    #[test]
    fn opposite_edge_single_quad() {
        let pags = enumerate_pags(4, 1, 10).unwrap();
        let t = pag_to_template(&pags[0]).unwrap();
        assert_eq!(opposite_boundary_edge(&t, 0).unwrap(), 2);
        assert_eq!(opposite_boundary_edge(&t, 1).unwrap(), 3);
    }

    #[test]
    fn strip_refinement_keeps_validity() {
        let t = rc_n_leaf(6);
        let r = refine_template_strip(&t, 0).unwrap();
        assert_eq!(r.n_boundary, 8);
        validate_template(&r).unwrap();
    }
}
