//! Controlmap construction: transfer of template vertices onto the control
//! domain, ReLU-cost untangling of quad layouts, and bilinearly blended
//! Coons patches.

use crate::error::{Error, Result};
use crate::geom::{Pt, Vec2};
use crate::surrogate::{BoundaryArc, ControlDomain, PiecewiseLinearMap};
use crate::templates::{corner_nu, Template};

/// A template whose vertices live on the control domain: boundary vertices
/// at the domain's break points, interior vertices free.
#[derive(Debug, Clone)]
pub struct ControlTemplate {
    /// The base template (combinatorics plus N-gon geometry).
    pub base: Template,
    /// Vertex positions on the control domain.
    pub vertices: Vec<Pt>,
}

impl ControlTemplate {
    pub fn quads(&self) -> &[[usize; 4]] {
        &self.base.quads
    }

    pub fn n_boundary(&self) -> usize {
        self.base.n_boundary
    }

    /// All corner cross products, ordered by (quad, corner).
    pub fn nu_values(&self) -> Vec<f64> {
        nu_values(&self.vertices, &self.base.quads)
    }
}

pub fn nu_values(vertices: &[Pt], quads: &[[usize; 4]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(quads.len() * 4);
    for q in quads {
        for i in 0..4 {
            out.push(corner_nu(vertices, q, i));
        }
    }
    out
}

/// Maps the template vertices onto the control domain: interior vertices
/// through the piecewise linear surrogate `r_h`, boundary vertices snapped
/// exactly to the domain's break points.
pub fn transfer_vertices(
    template: &Template,
    domain: &ControlDomain,
    r_h: &PiecewiseLinearMap,
) -> Result<ControlTemplate> {
    if !r_h.is_bijective() {
        return Err(Error::FoldedSurrogate);
    }
    let n = template.n_boundary;
    let mut vertices = Vec::with_capacity(template.vertices.len());
    for (v, &p) in template.vertices.iter().enumerate() {
        if v < n {
            vertices.push(domain.arcs[v].eval(0.0));
        } else {
            vertices.push(r_h.eval(p)?);
        }
    }
    Ok(ControlTemplate { base: template.clone(), vertices })
}

#[derive(Debug, Clone, Copy)]
pub struct UntangleOptions {
    /// Explicit tau increment; derived from the initial positive cross
    /// products when absent.
    pub tau_step: Option<f64>,
    pub max_tau_increments: usize,
    pub max_iterations: usize,
}

impl Default for UntangleOptions {
    fn default() -> Self {
        Self { tau_step: None, max_tau_increments: 20, max_iterations: 150 }
    }
}

/// ReLU cost of a layout at offset `tau`: sum of ReLU(-nu + tau) over all
/// quad corners. Zero exactly when every corner cross product is >= tau.
pub fn relu_cost(vertices: &[Pt], quads: &[[usize; 4]], tau: f64) -> f64 {
    nu_values(vertices, quads).iter().map(|&nu| (tau - nu).max(0.0)).sum()
}

fn relu_cost_gradient(vertices: &[Pt], quads: &[[usize; 4]], n_fixed: usize, tau: f64) -> Vec<Vec2> {
    let mut grad = vec![Vec2::zeros(); vertices.len()];
    for q in quads {
        for i in 0..4 {
            let nu = corner_nu(vertices, q, i);
            if tau - nu <= 0.0 {
                continue; // one-sided subgradient at 0
            }
            let v = vertices[q[i]];
            let nxt = vertices[q[(i + 1) % 4]];
            let prv = vertices[q[(i + 3) % 4]];
            // d nu / d corner positions; cost adds -d nu.
            grad[q[i]] -= Vec2::new(nxt.y - prv.y, prv.x - nxt.x);
            grad[q[(i + 1) % 4]] -= Vec2::new(prv.y - v.y, -(prv.x - v.x));
            grad[q[(i + 3) % 4]] -= Vec2::new(-(nxt.y - v.y), nxt.x - v.x);
        }
    }
    for g in grad.iter_mut().take(n_fixed) {
        *g = Vec2::zeros();
    }
    grad
}

/// Gradient-based minimisation of the ReLU cost over the free (non-fixed)
/// vertices, with an outer loop that raises tau while the optimiser still
/// reaches zero cost. Returns the layout from the last successful tau.
pub fn untangle_layout(
    vertices: &[Pt],
    quads: &[[usize; 4]],
    n_fixed: usize,
    opts: &UntangleOptions,
) -> Result<Vec<Pt>> {
    let nu0 = nu_values(vertices, quads);
    let tau_step = opts.tau_step.unwrap_or_else(|| {
        let mut pos: Vec<f64> = nu0.iter().copied().filter(|&v| v > 0.0).collect();
        if pos.is_empty() {
            let scale: f64 = nu0.iter().map(|v| v.abs()).fold(0.0, f64::max);
            return 0.25 * scale.max(1e-3);
        }
        pos.sort_by(f64::total_cmp);
        0.25 * pos[pos.len() / 4]
    });

    let mut tau = 0.0;
    let mut current = vertices.to_vec();
    let mut best: Option<Vec<Pt>> = None;
    for _ in 0..=opts.max_tau_increments {
        match minimise_relu(&current, quads, n_fixed, tau, opts.max_iterations) {
            Some(solution) => {
                current = solution.clone();
                best = Some(solution);
                tau += tau_step;
            }
            None => break,
        }
    }
    match best {
        Some(v) => Ok(v),
        None => {
            let cost = relu_cost(&current, quads, 0.0);
            Err(Error::UntangleFailed { cost, iterations: opts.max_iterations })
        }
    }
}

/// Runs gradient descent with backtracking until the cost hits zero; returns
/// `None` when it fails to do so within the iteration budget.
fn minimise_relu(
    start: &[Pt],
    quads: &[[usize; 4]],
    n_fixed: usize,
    tau: f64,
    max_iterations: usize,
) -> Option<Vec<Pt>> {
    let mut x = start.to_vec();
    let mut cost = relu_cost(&x, quads, tau);
    if cost == 0.0 {
        return Some(x);
    }
    let mut step = 0.1;
    for _ in 0..max_iterations {
        let grad = relu_cost_gradient(&x, quads, n_fixed, tau);
        let gnorm2: f64 = grad.iter().map(|g| g.norm_squared()).sum();
        if gnorm2 == 0.0 {
            break;
        }
        // Backtracking on the cost value.
        let mut accepted = false;
        let mut s = step;
        for _ in 0..30 {
            let trial: Vec<Pt> =
                x.iter().zip(&grad).map(|(p, g)| Pt::from(p.coords - g * s)).collect();
            let trial_cost = relu_cost(&trial, quads, tau);
            if trial_cost < cost {
                x = trial;
                cost = trial_cost;
                step = s * 1.5;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        if cost == 0.0 {
            return Some(x);
        }
    }
    if cost == 0.0 {
        Some(x)
    } else {
        None
    }
}

/// Untangles a control template in place of its interior vertices.
pub fn untangle_quadrangulation(
    ct: &ControlTemplate,
    opts: &UntangleOptions,
) -> Result<ControlTemplate> {
    let vertices =
        untangle_layout(&ct.vertices, &ct.base.quads, ct.base.n_boundary, opts)?;
    Ok(ControlTemplate { base: ct.base.clone(), vertices })
}

// ---------------------------------------------------------------------------
// Coons patches
// ---------------------------------------------------------------------------

/// Per-quad transfinite patch: four directed boundary curves, blended
/// bilinearly. Side `i` runs from corner `i` to corner `i+1`.
#[derive(Debug, Clone)]
pub struct CoonsPatch {
    pub sides: [BoundaryArc; 4],
    pub corners: [Pt; 4],
}

impl CoonsPatch {
    pub fn from_straight_quad(corners: [Pt; 4]) -> Self {
        let sides = [
            BoundaryArc::segment(corners[0], corners[1]),
            BoundaryArc::segment(corners[1], corners[2]),
            BoundaryArc::segment(corners[2], corners[3]),
            BoundaryArc::segment(corners[3], corners[0]),
        ];
        Self { sides, corners }
    }

    /// Bilinearly blended Coons evaluation at local coordinates `(u, v)`.
    pub fn eval(&self, u: f64, v: f64) -> Pt {
        let b = self.sides[0].eval(u).coords;
        let r = self.sides[1].eval(v).coords;
        let t = self.sides[2].eval(1.0 - u).coords;
        let l = self.sides[3].eval(1.0 - v).coords;
        let p00 = self.corners[0].coords;
        let p10 = self.corners[1].coords;
        let p11 = self.corners[2].coords;
        let p01 = self.corners[3].coords;
        let lofted = b * (1.0 - v) + t * v + l * (1.0 - u) + r * u;
        let bilinear =
            p00 * ((1.0 - u) * (1.0 - v)) + p10 * (u * (1.0 - v)) + p11 * (u * v) + p01 * ((1.0 - u) * v);
        Pt::from(lofted - bilinear)
    }

    /// First derivatives with respect to `(u, v)`.
    pub fn jacobian(&self, u: f64, v: f64) -> (Vec2, Vec2) {
        let b = self.sides[0].eval(u).coords;
        let r = self.sides[1].eval(v).coords;
        let t = self.sides[2].eval(1.0 - u).coords;
        let l = self.sides[3].eval(1.0 - v).coords;
        let db = self.sides[0].deriv(u);
        let dr = self.sides[1].deriv(v);
        let dt = -self.sides[2].deriv(1.0 - u);
        let dl = -self.sides[3].deriv(1.0 - v);
        let p00 = self.corners[0].coords;
        let p10 = self.corners[1].coords;
        let p11 = self.corners[2].coords;
        let p01 = self.corners[3].coords;
        let du = db * (1.0 - v) + dt * v - l + r
            - (-p00 * (1.0 - v) + p10 * (1.0 - v) + p11 * v - p01 * v);
        let dv = -b + t + dl * (1.0 - u) + dr * u
            - (-p00 * (1.0 - u) - p10 * u + p11 * u + p01 * (1.0 - u));
        (du, dv)
    }

    /// Second derivatives `(S_uu, S_uv, S_vv)`.
    pub fn second_derivs(&self, u: f64, v: f64) -> (Vec2, Vec2, Vec2) {
        let ddb = self.sides[0].second_deriv(u);
        let ddr = self.sides[1].second_deriv(v);
        let ddt = self.sides[2].second_deriv(1.0 - u);
        let ddl = self.sides[3].second_deriv(1.0 - v);
        let db = self.sides[0].deriv(u);
        let dr = self.sides[1].deriv(v);
        let dt = -self.sides[2].deriv(1.0 - u);
        let dl = -self.sides[3].deriv(1.0 - v);
        let p00 = self.corners[0].coords;
        let p10 = self.corners[1].coords;
        let p11 = self.corners[2].coords;
        let p01 = self.corners[3].coords;
        let suu = ddb * (1.0 - v) + ddt * v;
        let svv = ddl * (1.0 - u) + ddr * u;
        let suv = -db + dt - dl + dr - (p00 - p10 + p11 - p01);
        (suu, suv, svv)
    }
}

/// Controlmap as a collection of Coons patches over the control template's
/// quads: interior edges straight, boundary edges replaced by the matching
/// control-domain arc.
#[derive(Debug, Clone)]
pub struct CoonsControlMap {
    pub patches: Vec<CoonsPatch>,
}

pub fn coons_map(ct: &ControlTemplate, domain: &ControlDomain) -> Result<CoonsControlMap> {
    let n = ct.base.n_boundary;
    for (qi, q) in ct.base.quads.iter().enumerate() {
        for i in 0..4 {
            if corner_nu(&ct.vertices, q, i) <= 0.0 {
                return Err(Error::NonconvexQuad { quad: qi });
            }
        }
    }
    let mut patches = Vec::with_capacity(ct.base.quads.len());
    for q in &ct.base.quads {
        let corners = [
            ct.vertices[q[0]],
            ct.vertices[q[1]],
            ct.vertices[q[2]],
            ct.vertices[q[3]],
        ];
        let mut sides: Vec<BoundaryArc> = Vec::with_capacity(4);
        for i in 0..4 {
            let a = q[i];
            let b = q[(i + 1) % 4];
            let arc = boundary_arc_index(n, a, b);
            match arc {
                Some((k, reversed)) => {
                    let arc = domain.arcs[k].clone();
                    sides.push(if reversed { arc.reversed() } else { arc });
                }
                None => sides.push(BoundaryArc::segment(ct.vertices[a], ct.vertices[b])),
            }
        }
        patches.push(CoonsPatch {
            sides: [sides[0].clone(), sides[1].clone(), sides[2].clone(), sides[3].clone()],
            corners,
        });
    }
    Ok(CoonsControlMap { patches })
}

/// If `(a, b)` is the template boundary edge `k = (k, k+1 mod n)`, returns
/// `(k, reversed)`.
fn boundary_arc_index(n: usize, a: usize, b: usize) -> Option<(usize, bool)> {
    if a >= n || b >= n {
        return None;
    }
    if b == (a + 1) % n {
        Some((a, false))
    } else if a == (b + 1) % n {
        Some((b, true))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::rc_n_leaf;

    fn p(x: f64, y: f64) -> Pt {
        Pt::new(x, y)
    }

    #[test]
    fn relu_cost_formula() {
        let vertices = vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        let quads = vec![[0usize, 1, 2, 3]];
        let nus = nu_values(&vertices, &quads);
        for &nu in &nus {
            assert!((nu - 1.0).abs() < 1e-14);
        }
        // known nu values vs hand formula
        let tau = 1.5;
        let by_hand: f64 = nus.iter().map(|&nu| (tau - nu).max(0.0)).sum();
        assert!((relu_cost(&vertices, &quads, tau) - by_hand).abs() < 1e-14);
        assert_eq!(relu_cost(&vertices, &quads, 0.5), 0.0);
    }

    #[test]
    fn nu_negates_with_orientation() {
        let vertices = vec![p(0., 0.), p(1., 0.), p(1., 1.), p(0., 1.)];
        let fwd = nu_values(&vertices, &[[0, 1, 2, 3]]);
        let rev = nu_values(&vertices, &[[3, 2, 1, 0]]);
        for (f, r) in fwd.iter().zip(rev.iter().rev()) {
            assert!((f + r).abs() < 1e-14);
        }
    }

    #[test]
    fn valid_layout_untouched() {
        let t = rc_n_leaf(6);
        let out = untangle_layout(&t.vertices, &t.quads, 6, &UntangleOptions::default()).unwrap();
        for (a, b) in t.vertices.iter().zip(&out) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn flipped_corner_repaired() {
        let t = rc_n_leaf(6);
        let mut broken = t.vertices.clone();
        // Push one interior vertex far out of place to fold its quads.
        broken[7] = p(broken[7].x * 3.0, broken[7].y * 3.0);
        assert!(nu_values(&broken, &t.quads).iter().any(|&v| v <= 0.0));
        let fixed = untangle_layout(&broken, &t.quads, 6, &UntangleOptions::default()).unwrap();
        assert!(nu_values(&fixed, &t.quads).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn coons_straight_quad_is_bilinear() {
        let corners = [p(0., 0.), p(2., 0.), p(3., 2.), p(-1., 1.)];
        let patch = CoonsPatch::from_straight_quad(corners);
        let mid = patch.eval(0.5, 0.5);
        let avg = Pt::new(
            corners.iter().map(|c| c.x).sum::<f64>() / 4.0,
            corners.iter().map(|c| c.y).sum::<f64>() / 4.0,
        );
        assert!((mid - avg).norm() < 1e-14);
        // corners reproduced
        assert!((patch.eval(0., 0.) - corners[0]).norm() < 1e-14);
        assert!((patch.eval(1., 0.) - corners[1]).norm() < 1e-14);
        assert!((patch.eval(1., 1.) - corners[2]).norm() < 1e-14);
        assert!((patch.eval(0., 1.) - corners[3]).norm() < 1e-14);
    }

    #[test]
    fn coons_jacobian_matches_fd() {
        let corners = [p(0., 0.), p(2., 0.), p(3., 2.), p(-1., 1.)];
        let patch = CoonsPatch::from_straight_quad(corners);
        let h = 1e-6;
        for &(u, v) in &[(0.3, 0.4), (0.7, 0.2), (0.5, 0.9)] {
            let (du, dv) = patch.jacobian(u, v);
            let fd_u = (patch.eval(u + h, v) - patch.eval(u - h, v)) / (2.0 * h);
            let fd_v = (patch.eval(u, v + h) - patch.eval(u, v - h)) / (2.0 * h);
            assert!((du - fd_u).norm() < 1e-6);
            assert!((dv - fd_v).norm() < 1e-6);
        }
    }
}
