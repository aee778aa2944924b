//! Convex geodesic polygons, their chords, and inscribed refinement.
//!
//! Vertices may be interior or ideal; edges are geodesic segments (complete
//! geodesics between ideal vertices), labelled counter-clockwise so the
//! domain lies on the left of every edge.  Convexity is checked in the Klein
//! model, where geodesics are straight chords.

use alloc::boxed::Box;
use alloc::vec::Vec;

use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;
use rand_core::RngCore;

use crate::geodesics::{
    self, geodesic_through, BoundaryPoint, Geodesic, GeodesicError, Shape,
};
use crate::hplane::{self, cayley, Frame, PlanePoint, PolarCoord};

#[derive(Debug, Clone, PartialEq)]
pub enum PolygonError {
    TooFewVertices,
    DuplicateVertex(usize),
    NotCounterClockwise,
    NotConvex { vertex: usize },
    /// chord_from_edge_points outside its preconditions.
    BadEdgePair(&'static str),
    /// A refinement vertex does not lie on the domain boundary.
    NotOnBoundary { vertex: usize, residual: f64 },
    /// Domain failed the sampled smoothness/convexity check.
    NotSmoothlyConvex,
    Geodesic(GeodesicError),
}

impl From<GeodesicError> for PolygonError {
    fn from(e: GeodesicError) -> Self {
        PolygonError::Geodesic(e)
    }
}

impl core::fmt::Display for PolygonError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PolygonError::TooFewVertices => write!(f, "polygon needs at least 3 vertices"),
            PolygonError::DuplicateVertex(i) => write!(f, "vertices {i} and its successor coincide"),
            PolygonError::NotCounterClockwise => write!(f, "vertices are not in counter-clockwise order"),
            PolygonError::NotConvex { vertex } => write!(f, "interior angle at vertex {vertex} exceeds pi"),
            PolygonError::BadEdgePair(msg) => write!(f, "bad edge pair: {msg}"),
            PolygonError::NotOnBoundary { vertex, residual } => {
                write!(f, "vertex {vertex} off the boundary (residual {residual:e})")
            }
            PolygonError::NotSmoothlyConvex => write!(f, "boundary fails the sampled convexity check"),
            PolygonError::Geodesic(e) => write!(f, "{e}"),
        }
    }
}

/// Polygon vertex: interior point or ideal boundary point.
#[derive(Debug, Clone, Copy)]
pub enum Vertex {
    Interior(PlanePoint),
    Ideal(BoundaryPoint),
}

impl Vertex {
    pub fn is_ideal(&self) -> bool {
        matches!(self, Vertex::Ideal(_))
    }

    /// Klein-model coordinates (ideal vertices land on the unit circle).
    pub(crate) fn klein(&self) -> (f64, f64) {
        match self {
            Vertex::Interior(z) => {
                let w = cayley(*z);
                let s = 2.0 / (1.0 + w.big_r * w.big_r) * w.big_r;
                (s * w.theta.cos(), s * w.theta.sin())
            }
            Vertex::Ideal(b) => {
                let beta = b.disk_angle();
                (beta.cos(), beta.sin())
            }
        }
    }

    fn approx_eq(&self, other: &Vertex) -> bool {
        match (self, other) {
            (Vertex::Interior(a), Vertex::Interior(b)) => hplane::distance(*a, *b) <= 1e-12,
            (Vertex::Ideal(a), Vertex::Ideal(b)) => a.approx_eq(b, 1e-13),
            _ => false,
        }
    }
}

/// One directed edge of a polygon, with its host geodesic and arclength
/// parametrization.
#[derive(Debug, Clone)]
pub(crate) struct Edge {
    pub geodesic: Geodesic,
    /// Ideal endpoint the edge runs toward (defines the CCW tangent).
    pub fwd: BoundaryPoint,
    /// Arclength origin on the host geodesic.
    pub origin: PlanePoint,
    /// Parameter range of the edge segment; infinite on ideal ends.
    pub lo: f64,
    pub hi: f64,
}

impl Edge {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn point_at(&self, l: f64) -> PlanePoint {
        geodesics::shape_point_at(self.geodesic.shape(), self.origin, &self.fwd, l)
    }

    /// Signed arclength of a point on the host geodesic.
    pub fn param_of(&self, z: PlanePoint) -> f64 {
        let d = hplane::distance(self.origin, z);
        if d == 0.0 {
            return 0.0;
        }
        let t = self.tangent_at(self.origin);
        let toward = geodesics::toward_dir(self.geodesic.shape(), self.origin, z);
        if t.0 * toward.0 + t.1 * toward.1 >= 0.0 {
            d
        } else {
            -d
        }
    }

    /// Forward (counter-clockwise) unit tangent at a point of the edge.
    pub fn tangent_at(&self, z: PlanePoint) -> (f64, f64) {
        self.geodesic.tangent_toward(z, &self.fwd)
    }
}

/// Convex geodesic polygon, vertices in counter-clockwise order.
#[derive(Debug, Clone)]
pub struct GeodesicPolygon {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

/// Result of intersecting a geodesic with a polygon.
#[derive(Debug, Clone)]
pub enum ChordOutcome {
    Hit(Chord),
    /// The geodesic misses the interior.
    Miss,
    /// Vertex hit or tangency; a measure-zero stratum integrators skip.
    Degenerate,
}

/// A geodesic's chord with respect to a polygon: crossing data on the two
/// edges it meets, and the chord length between them.
#[derive(Debug, Clone)]
pub struct Chord {
    pub geodesic: Geodesic,
    pub entry: ChordCrossing,
    pub exit: ChordCrossing,
    pub rho: f64,
}

/// One crossing of a chord with a polygon edge.
///
/// `alpha` is the angle in `(0, pi)` between the edge's counter-clockwise
/// tangent and the chord tangent oriented entry -> exit; the product
/// `cos(alpha_entry) cos(alpha_exit)` is independent of that orientation
/// choice and is the one entering the identity integrands.
#[derive(Debug, Clone, Copy)]
pub struct ChordCrossing {
    pub edge: usize,
    pub l: f64,
    pub alpha: f64,
    pub point: PlanePoint,
}

impl Chord {
    /// Liouville density of the chord in the edge-pair chart.
    pub fn pair_density(&self) -> f64 {
        self.entry.alpha.sin() * self.exit.alpha.sin() / (2.0 * self.rho.sinh())
    }

    /// `cos(alpha_entry) * cos(alpha_exit)`, the orientation-free product.
    pub fn cos_product(&self) -> f64 {
        self.entry.alpha.cos() * self.exit.alpha.cos()
    }
}

impl GeodesicPolygon {
    /// Build and validate a polygon from counter-clockwise vertices.
    pub fn new(vertices: Vec<Vertex>) -> Result<GeodesicPolygon, PolygonError> {
        let n = vertices.len();
        if n < 3 {
            return Err(PolygonError::TooFewVertices);
        }
        for i in 0..n {
            if vertices[i].approx_eq(&vertices[(i + 1) % n]) {
                return Err(PolygonError::DuplicateVertex(i));
            }
        }
        // orientation and convexity in the Klein model
        let k: Vec<(f64, f64)> = vertices.iter().map(Vertex::klein).collect();
        let mut area2 = 0.0;
        for i in 0..n {
            let (x0, y0) = k[i];
            let (x1, y1) = k[(i + 1) % n];
            area2 += x0 * y1 - x1 * y0;
        }
        if area2 <= 0.0 {
            return Err(PolygonError::NotCounterClockwise);
        }
        for i in 0..n {
            let (x0, y0) = k[i];
            let (x1, y1) = k[(i + 1) % n];
            let (x2, y2) = k[(i + 2) % n];
            let cross = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1);
            // turning angle >= -1e-9 corresponds to interior angle <= pi + 1e-9
            if cross < -1e-9 {
                return Err(PolygonError::NotConvex { vertex: (i + 1) % n });
            }
        }
        let incenter = if vertices.iter().any(Vertex::is_ideal) {
            Some(chebyshev_center(&vertices, &k))
        } else {
            None
        };
        let mut edges = Vec::with_capacity(n);
        for i in 0..n {
            edges.push(build_edge(&vertices[i], &vertices[(i + 1) % n], incenter)?);
        }
        Ok(GeodesicPolygon { vertices, edges })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_compact(&self) -> bool {
        !self.vertices.iter().any(Vertex::is_ideal)
    }

    pub(crate) fn edge(&self, i: usize) -> &Edge {
        &self.edges[i]
    }

    /// Hyperbolic length of each edge; infinite for ideal-ended edges.
    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges.iter().map(Edge::length).collect()
    }

    /// Total boundary length; infinite for ideal polygons.
    pub fn perimeter(&self) -> f64 {
        self.edges.iter().map(Edge::length).sum()
    }

    /// Gauss-Bonnet area: `(n - 2) pi` minus the interior angles
    /// (ideal vertices contribute angle zero).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut total = (n as f64 - 2.0) * PI;
        for i in 0..n {
            if let Vertex::Interior(v) = self.vertices[i] {
                let prev = &self.edges[(i + n - 1) % n];
                let next = &self.edges[i];
                let t_in = prev.tangent_at(v);
                let t_out = next.tangent_at(v);
                // interior angle between the edge back to the previous vertex
                // and the edge on to the next one
                let back = (-t_in.0, -t_in.1);
                let dot = back.0 * t_out.0 + back.1 * t_out.1;
                let cross = back.0 * t_out.1 - back.1 * t_out.0;
                total -= cross.abs().atan2(dot);
            }
        }
        total
    }

    /// Largest pairwise vertex distance (compact polygons).
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in self.vertices.iter().skip(i + 1) {
                if let (Vertex::Interior(p), Vertex::Interior(q)) = (a, b) {
                    d = d.max(hplane::distance(*p, *q));
                } else {
                    return f64::INFINITY;
                }
            }
        }
        d
    }

    /// Point maximizing the minimum distance to the edge geodesics.
    pub fn incenter(&self) -> PlanePoint {
        let k: Vec<(f64, f64)> = self.vertices.iter().map(Vertex::klein).collect();
        chebyshev_center(&self.vertices, &k)
    }

    /// The unique chord of a geodesic crossing the interior.
    pub fn chord_of(&self, g: &Geodesic) -> ChordOutcome {
        let shape = g.shape();
        let mut hits: Vec<(usize, PlanePoint, f64)> = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            // shared ideal endpoint means an asymptotic, not transversal, hit
            for (p, q) in [(&g.u, &e.geodesic.u), (&g.u, &e.geodesic.v), (&g.v, &e.geodesic.u), (&g.v, &e.geodesic.v)] {
                if p.approx_eq(q, 1e-12) {
                    // endpoint at a vertex of the polygon is a degenerate hit;
                    // endpoint in an open gap merely fails to cross this edge
                    if self.vertices.iter().any(|v| matches!(v, Vertex::Ideal(b) if b.approx_eq(p, 1e-12))) {
                        return ChordOutcome::Degenerate;
                    }
                }
            }
            let Some(z) = geodesics::shape_crossing(shape, e.geodesic.shape()) else {
                continue;
            };
            let l = e.param_of(z);
            if l < e.lo - 1e-12 || l > e.hi + 1e-12 {
                continue;
            }
            if (l - e.lo).abs() <= 1e-9 || (l - e.hi).abs() <= 1e-9 {
                return ChordOutcome::Degenerate;
            }
            hits.push((i, z, l));
        }
        match hits.len() {
            0 => ChordOutcome::Miss,
            2 => match self.assemble_chord(*g, hits[0].clone(), hits[1].clone()) {
                Ok(ch) => ChordOutcome::Hit(ch),
                Err(_) => ChordOutcome::Degenerate,
            },
            _ => ChordOutcome::Degenerate,
        }
    }

    /// Chord through the points at `l_j` on edge `j` and `l_k` on edge `k`
    /// (`j > k`); by convexity those are exactly its boundary crossings.
    pub fn chord_from_edge_points(
        &self,
        j: usize,
        l_j: f64,
        k: usize,
        l_k: f64,
    ) -> Result<Chord, PolygonError> {
        if j <= k || j >= self.edges.len() {
            return Err(PolygonError::BadEdgePair("need j > k within range"));
        }
        let ej = &self.edges[j];
        let ek = &self.edges[k];
        if l_j < ej.lo - 1e-12 || l_j > ej.hi + 1e-12 || l_k < ek.lo - 1e-12 || l_k > ek.hi + 1e-12 {
            return Err(PolygonError::BadEdgePair("parameter outside edge range"));
        }
        let zj = ej.point_at(l_j);
        let zk = ek.point_at(l_k);
        let g = geodesic_through(zj, zk)?;
        self.assemble_chord(g, (j, zj, l_j), (k, zk, l_k)).map_err(PolygonError::from)
    }

    fn assemble_chord(
        &self,
        g: Geodesic,
        h1: (usize, PlanePoint, f64),
        h2: (usize, PlanePoint, f64),
    ) -> Result<Chord, GeodesicError> {
        // entry = first crossing along the geodesic's own u -> v orientation
        let d1 = geodesics::toward_dir(g.shape(), h1.1, h2.1);
        let tv = g.tangent_toward(h1.1, &g.v);
        let (en, ex) = if d1.0 * tv.0 + d1.1 * tv.1 >= 0.0 { (h1, h2) } else { (h2, h1) };
        let rho = hplane::distance(en.1, ex.1);
        if rho <= 1e-9 {
            return Err(GeodesicError::Degenerate("chord shorter than tolerance"));
        }
        let c_en = geodesics::toward_dir(g.shape(), en.1, ex.1);
        let back = geodesics::toward_dir(g.shape(), ex.1, en.1);
        let c_ex = (-back.0, -back.1);
        let alpha = |edge: usize, z: PlanePoint, c: (f64, f64)| -> Result<f64, GeodesicError> {
            let t = self.edges[edge].tangent_at(z);
            let sin = (t.0 * c.1 - t.1 * c.0).abs();
            if sin < 1e-9 {
                return Err(GeodesicError::Degenerate("tangential crossing"));
            }
            Ok(sin.atan2(t.0 * c.0 + t.1 * c.1))
        };
        Ok(Chord {
            geodesic: g,
            entry: ChordCrossing { edge: en.0, l: en.2, alpha: alpha(en.0, en.1, c_en)?, point: en.1 },
            exit: ChordCrossing { edge: ex.0, l: ex.2, alpha: alpha(ex.0, ex.1, c_ex)?, point: ex.1 },
            rho,
        })
    }

    pub fn apply_isometry(&self, g: crate::hplane::Isometry) -> Result<GeodesicPolygon, PolygonError> {
        let verts = self
            .vertices
            .iter()
            .map(|v| match v {
                Vertex::Interior(z) => Vertex::Interior(g.apply(*z)),
                Vertex::Ideal(b) => Vertex::Ideal(g.apply_boundary(*b)),
            })
            .collect();
        GeodesicPolygon::new(verts)
    }
}

fn build_edge(a: &Vertex, b: &Vertex, incenter: Option<PlanePoint>) -> Result<Edge, PolygonError> {
    match (a, b) {
        (Vertex::Interior(p), Vertex::Interior(q)) => {
            let g = geodesic_through(*p, *q)?;
            let t = geodesics::toward_dir(g.shape(), *p, *q);
            let tv = g.tangent_toward(*p, &g.v);
            let fwd = if t.0 * tv.0 + t.1 * tv.1 >= 0.0 { g.v } else { g.u };
            Ok(Edge { geodesic: g, fwd, origin: *p, lo: 0.0, hi: hplane::distance(*p, *q) })
        }
        (Vertex::Interior(p), Vertex::Ideal(m)) => {
            let g = geodesics::geodesic_to_boundary(*p, m);
            let origin = foot_near_incenter(&g, incenter);
            let mut e = Edge { geodesic: g, fwd: *m, origin, lo: f64::NEG_INFINITY, hi: f64::INFINITY };
            e.lo = e.param_of(*p);
            Ok(e)
        }
        (Vertex::Ideal(m), Vertex::Interior(q)) => {
            let g = geodesics::geodesic_to_boundary(*q, m);
            let fwd = if g.u.approx_eq(m, 1e-12) { g.v } else { g.u };
            let origin = foot_near_incenter(&g, incenter);
            let mut e = Edge { geodesic: g, fwd, origin, lo: f64::NEG_INFINITY, hi: f64::INFINITY };
            e.hi = e.param_of(*q);
            Ok(e)
        }
        (Vertex::Ideal(m1), Vertex::Ideal(m2)) => {
            let g = Geodesic::new(*m1, *m2)?;
            let origin = foot_near_incenter(&g, incenter);
            Ok(Edge { geodesic: g, fwd: *m2, origin, lo: f64::NEG_INFINITY, hi: f64::INFINITY })
        }
    }
}

/// Arclength origin for an ideal-adjacent edge: the edge point closest to
/// the polygon's in-center.
fn foot_near_incenter(g: &Geodesic, incenter: Option<PlanePoint>) -> PlanePoint {
    let c = incenter.expect("ideal polygons carry an incenter");
    geodesics::foot_on_shape(g.shape(), c)
}

/// Chebyshev center: maximizes the minimum distance to the edge geodesics.
/// Compass search over the Klein disk; ample for desk-scale polygons.
fn chebyshev_center(vertices: &[Vertex], klein: &[(f64, f64)]) -> PlanePoint {
    let n = vertices.len();
    let edge_shapes: Vec<Shape> = (0..n)
        .map(|i| {
            match (&vertices[i], &vertices[(i + 1) % n]) {
                (Vertex::Interior(p), Vertex::Interior(q)) => {
                    geodesic_through(*p, *q).expect("validated distinct").shape()
                }
                (Vertex::Interior(p), Vertex::Ideal(m)) | (Vertex::Ideal(m), Vertex::Interior(p)) => {
                    geodesics::geodesic_to_boundary(*p, m).shape()
                }
                (Vertex::Ideal(m1), Vertex::Ideal(m2)) => {
                    Geodesic::new(*m1, *m2).expect("validated distinct").shape()
                }
            }
        })
        .collect();
    let score = |kx: f64, ky: f64| -> f64 {
        let r2 = kx * kx + ky * ky;
        if r2 >= 1.0 - 1e-12 {
            return f64::NEG_INFINITY;
        }
        let z = klein_to_half_plane(kx, ky);
        edge_shapes
            .iter()
            .map(|s| geodesics::dist_to_shape(*s, z))
            .fold(f64::INFINITY, f64::min)
    };
    let (mut cx, mut cy) = (0.0, 0.0);
    for (x, y) in klein {
        cx += x / n as f64;
        cy += y / n as f64;
    }
    let mut best = score(cx, cy);
    let mut step = 0.25;
    while step > 1e-13 {
        let mut improved = false;
        for (dx, dy) in [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (0.7071, 0.7071),
            (0.7071, -0.7071),
            (-0.7071, 0.7071),
            (-0.7071, -0.7071),
        ] {
            let s = score(cx + step * dx, cy + step * dy);
            if s > best {
                best = s;
                cx += step * dx;
                cy += step * dy;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    klein_to_half_plane(cx, cy)
}

pub(crate) fn klein_to_half_plane(kx: f64, ky: f64) -> PlanePoint {
    // Klein -> Poincare: w = k / (1 + sqrt(1 - |k|^2)), then inverse Cayley
    let r2 = kx * kx + ky * ky;
    let s = 1.0 + (1.0 - r2).max(0.0).sqrt();
    let (u, v) = (kx / s, ky / s);
    let den = u * u + (v - 1.0) * (v - 1.0);
    PlanePoint { x: 2.0 * u / den, y: (1.0 - u * u - v * v) / den }
}

/// Regular `n`-gon inscribed in the circle of hyperbolic radius `r` about
/// the canonical frame origin.
pub fn inscribe_regular_polygon(r: f64, n: usize) -> Result<GeodesicPolygon, PolygonError> {
    if n < 3 {
        return Err(PolygonError::TooFewVertices);
    }
    let frame = Frame::canonical();
    let verts = (0..n)
        .map(|i| {
            let theta = TAU * i as f64 / n as f64;
            Vertex::Interior(frame.polar_point(PolarCoord { r, theta }))
        })
        .collect();
    GeodesicPolygon::new(verts)
}

/// Convex domain with a `C^1` boundary, given by an arclength
/// parametrization of the boundary curve.
pub struct SmoothDomain {
    length: f64,
    point: Box<dyn Fn(f64) -> PlanePoint>,
}

impl SmoothDomain {
    /// Wraps a closed convex arclength parametrization on `[0, length)`.
    /// Convexity is spot-checked by sampled turning angles.
    pub fn new(
        length: f64,
        point: Box<dyn Fn(f64) -> PlanePoint>,
    ) -> Result<SmoothDomain, PolygonError> {
        let dom = SmoothDomain { length, point };
        // sampled check: consecutive secant directions must keep turning left
        let m = 64;
        let pts: Vec<PlanePoint> = (0..m).map(|i| dom.point(length * i as f64 / m as f64)).collect();
        for i in 0..m {
            let a = pts[i];
            let b = pts[(i + 1) % m];
            let c = pts[(i + 2) % m];
            let (ux, uy) = (b.x - a.x, b.y - a.y);
            let (vx, vy) = (c.x - b.x, c.y - b.y);
            if ux * vy - uy * vx <= 0.0 {
                return Err(PolygonError::NotSmoothlyConvex);
            }
        }
        Ok(dom)
    }

    /// The circle of hyperbolic radius `r` about the canonical origin.
    pub fn disk(r: f64) -> SmoothDomain {
        let frame = Frame::canonical();
        let sinh_r = r.sinh();
        SmoothDomain {
            length: TAU * sinh_r,
            point: Box::new(move |s| frame.polar_point(PolarCoord { r, theta: s / sinh_r })),
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn point(&self, s: f64) -> PlanePoint {
        let mut t = s % self.length;
        if t < 0.0 {
            t += self.length;
        }
        (self.point)(t)
    }

    /// Boundary parameter of a point on (or near) the boundary.
    fn param_of(&self, z: PlanePoint, tol: f64) -> Result<f64, f64> {
        let n = 1024;
        let mut best_s = 0.0;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            let s = self.length * i as f64 / n as f64;
            let d = hplane::distance(self.point(s), z);
            if d < best_d {
                best_d = d;
                best_s = s;
            }
        }
        // golden-section refine around the best sample
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut a = best_s - self.length / n as f64;
        let mut b = best_s + self.length / n as f64;
        let f = |s: f64| hplane::distance(self.point(s), z);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..120 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = f(d);
            }
        }
        let s = 0.5 * (a + b);
        let res = f(s);
        if res <= tol {
            let mut t = s % self.length;
            if t < 0.0 {
                t += self.length;
            }
            Ok(t)
        } else {
            Err(res)
        }
    }
}

/// One refinement step of an inscribed polygon: insert the boundary
/// midpoint of every arc between consecutive vertices.
pub fn refine(poly: &GeodesicPolygon, dom: &SmoothDomain) -> Result<GeodesicPolygon, PolygonError> {
    let n = poly.len();
    let mut params = Vec::with_capacity(n);
    for (i, v) in poly.vertices().iter().enumerate() {
        let Vertex::Interior(z) = v else {
            return Err(PolygonError::NotOnBoundary { vertex: i, residual: f64::INFINITY });
        };
        match dom.param_of(*z, 1e-9) {
            Ok(s) => params.push(s),
            Err(residual) => return Err(PolygonError::NotOnBoundary { vertex: i, residual }),
        }
    }
    // unwrap cyclically so the sequence increases
    for i in 1..n {
        while params[i] < params[i - 1] {
            params[i] += dom.length();
        }
    }
    let mut verts = Vec::with_capacity(2 * n);
    for i in 0..n {
        let s0 = params[i];
        let s1 = if i + 1 < n { params[i + 1] } else { params[0] + dom.length() };
        verts.push(Vertex::Interior(dom.point(s0)));
        verts.push(Vertex::Interior(dom.point(0.5 * (s0 + s1))));
    }
    GeodesicPolygon::new(verts)
}

/// Random compact convex polygon: points sampled in the hyperbolic disk of
/// radius `max_radius`, convex hull taken in the Klein model.  Hulls with
/// fewer than three vertices, short edges, or near-straight corners are
/// resampled.
pub fn sample_convex_polygon<R: RngCore>(
    rng: &mut R,
    n_points: usize,
    max_radius: f64,
) -> GeodesicPolygon {
    let frame = Frame::canonical();
    loop {
        let mut pts: Vec<PlanePoint> = (0..n_points.max(3))
            .map(|_| {
                let r = max_radius * crate::integrate::unit_f64(rng).sqrt();
                let theta = TAU * crate::integrate::unit_f64(rng);
                frame.polar_point(PolarCoord { r, theta })
            })
            .collect();
        // Andrew monotone chain on Klein coordinates
        let mut kl: Vec<((f64, f64), PlanePoint)> =
            pts.drain(..).map(|p| (Vertex::Interior(p).klein(), p)).collect();
        kl.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite Klein coords"));
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
            (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
        };
        let mut hull: Vec<((f64, f64), PlanePoint)> = Vec::new();
        for p in kl.iter() {
            while hull.len() >= 2 && cross(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) <= 1e-14 {
                hull.pop();
            }
            hull.push(p.clone());
        }
        let lower = hull.len() + 1;
        for p in kl.iter().rev() {
            while hull.len() >= lower && cross(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) <= 1e-14 {
                hull.pop();
            }
            hull.push(p.clone());
        }
        hull.pop();
        if hull.len() < 3 {
            continue;
        }
        let verts: Vec<Vertex> = hull.iter().map(|(_, p)| Vertex::Interior(*p)).collect();
        let Ok(poly) = GeodesicPolygon::new(verts) else { continue };
        let lengths = poly.edge_lengths();
        if lengths.iter().any(|l| *l < 0.15) {
            continue;
        }
        // reject near-degenerate corners: they slow the corner-adapted
        // quadrature without exercising anything new
        let n = poly.len();
        let mut ok = true;
        for i in 0..n {
            if let Vertex::Interior(v) = poly.vertices()[i] {
                let t_in = poly.edge((i + n - 1) % n).tangent_at(v);
                let t_out = poly.edge(i).tangent_at(v);
                let back = (-t_in.0, -t_in.1);
                let ang = (back.0 * t_out.1 - back.1 * t_out.0)
                    .abs()
                    .atan2(back.0 * t_out.0 + back.1 * t_out.1);
                if ang < 0.2 || ang > PI - 0.2 {
                    ok = false;
                }
            }
        }
        if ok {
            return poly;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::Geodesic;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn ideal_triangle() -> GeodesicPolygon {
        GeodesicPolygon::new(alloc::vec![
            Vertex::Ideal(BoundaryPoint::from_real(0.0)),
            Vertex::Ideal(BoundaryPoint::from_real(1.0)),
            Vertex::Ideal(BoundaryPoint::infinity()),
        ])
        .unwrap()
    }

    #[test]
    fn ideal_triangle_area_and_perimeter() {
        let t = ideal_triangle();
        assert!(close(t.area(), PI, 1e-12));
        assert!(t.perimeter().is_infinite());
        assert!(!t.is_compact());
    }

    #[test]
    fn ideal_quadrilateral_area() {
        let q = GeodesicPolygon::new(alloc::vec![
            Vertex::Ideal(BoundaryPoint::from_real(-1.0)),
            Vertex::Ideal(BoundaryPoint::from_real(0.0)),
            Vertex::Ideal(BoundaryPoint::from_real(1.0)),
            Vertex::Ideal(BoundaryPoint::infinity()),
        ])
        .unwrap();
        assert!(close(q.area(), TAU, 1e-12));
        // its incenter is i, equidistant (sinh d = 1) from all four edges
        let c = q.incenter();
        assert!(c.euclid_dist(PlanePoint::I) < 1e-6, "incenter {c:?}");
    }

    #[test]
    fn clockwise_rejected() {
        let r = GeodesicPolygon::new(alloc::vec![
            Vertex::Ideal(BoundaryPoint::infinity()),
            Vertex::Ideal(BoundaryPoint::from_real(1.0)),
            Vertex::Ideal(BoundaryPoint::from_real(0.0)),
        ]);
        assert!(matches!(r, Err(PolygonError::NotCounterClockwise)));
    }

    #[test]
    fn nonconvex_rejected() {
        let r = GeodesicPolygon::new(alloc::vec![
            Vertex::Interior(PlanePoint::new(-1.0, 1.0).unwrap()),
            Vertex::Interior(PlanePoint::new(0.0, 1.2).unwrap()),
            Vertex::Interior(PlanePoint::new(1.0, 1.0).unwrap()),
            Vertex::Interior(PlanePoint::new(0.0, 2.0).unwrap()),
            Vertex::Interior(PlanePoint::new(0.0, 1.5).unwrap()),
        ]);
        assert!(matches!(r, Err(PolygonError::NotConvex { .. })));
    }

    #[test]
    fn ideal_triangle_chord() {
        let t = ideal_triangle();
        let g = Geodesic::from_reals(-1.0, 2.0).unwrap();
        let ChordOutcome::Hit(ch) = t.chord_of(&g) else {
            panic!("expected a chord");
        };
        // crossings with x = 0 and x = 1 sit at height sqrt(2); rho = log 2
        assert!(close(ch.rho, 2f64.ln(), 1e-12));
        let mut pts = [ch.entry.point, ch.exit.point];
        pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        assert!(close(pts[0].x, 0.0, 1e-12) && close(pts[0].y, 2f64.sqrt(), 1e-12));
        assert!(close(pts[1].x, 1.0, 1e-12) && close(pts[1].y, 2f64.sqrt(), 1e-12));
    }

    #[test]
    fn chord_miss_and_degenerate() {
        let t = ideal_triangle();
        // both endpoints in the gap (0, 1): misses
        let g = Geodesic::from_reals(0.2, 0.8).unwrap();
        assert!(matches!(t.chord_of(&g), ChordOutcome::Miss));
        // through the vertex 0: degenerate
        let g = Geodesic::from_reals(0.0, 2.0).unwrap();
        assert!(matches!(t.chord_of(&g), ChordOutcome::Degenerate));
    }

    #[test]
    fn compact_polygon_chords_agree_with_edge_points() {
        let poly = inscribe_regular_polygon(1.0, 5).unwrap();
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut tested = 0;
        while tested < 1000 {
            let j = 1 + (next() * 4.0) as usize;
            let k = (next() * j as f64) as usize;
            let lj = next() * poly.edge(j).length();
            let lk = next() * poly.edge(k).length();
            let Ok(ch) = poly.chord_from_edge_points(j, lj, k, lk) else { continue };
            let ChordOutcome::Hit(ch2) = poly.chord_of(&ch.geodesic) else { continue };
            assert!(close(ch.rho, ch2.rho, 1e-10));
            assert_eq!(
                (ch.entry.edge, ch.exit.edge),
                (ch2.entry.edge, ch2.exit.edge)
            );
            assert!(close(ch.entry.l, ch2.entry.l, 1e-9));
            assert!(close(ch.entry.alpha, ch2.entry.alpha, 1e-9));
            assert!(close(ch.exit.alpha, ch2.exit.alpha, 1e-9));
            tested += 1;
        }
    }

    #[test]
    fn chord_isometry_equivariance() {
        let poly = inscribe_regular_polygon(1.2, 4).unwrap();
        let g = Geodesic::from_reals(-0.9, 1.4).unwrap();
        let ChordOutcome::Hit(ch) = poly.chord_of(&g) else { panic!("chord expected") };
        let iso = crate::hplane::Isometry::new(1.3, 0.4, 0.2, 1.0).unwrap();
        let poly2 = poly.apply_isometry(iso).unwrap();
        let ChordOutcome::Hit(ch2) = poly2.chord_of(&g.apply_isometry(iso)) else {
            panic!("image chord expected")
        };
        assert!(close(ch.rho, ch2.rho, 1e-10));
        assert!(close(ch.entry.alpha, ch2.entry.alpha, 1e-10));
        assert!(close(ch.exit.alpha, ch2.exit.alpha, 1e-10));
    }

    /// dp/dl relations: moving the exit point forward changes the chord
    /// length at rate +cos(alpha_exit); the entry point at -cos(alpha_entry).
    #[test]
    fn chord_length_rates() {
        let poly = inscribe_regular_polygon(1.0, 4).unwrap();
        let (j, k) = (2usize, 0usize);
        let (lj, lk) = (0.4, 0.3);
        let ch = poly.chord_from_edge_points(j, lj, k, lk).unwrap();
        let h = 1e-6;
        let rho_at = |lj: f64, lk: f64| poly.chord_from_edge_points(j, lj, k, lk).unwrap().rho;
        let (en, ex) = (&ch.entry, &ch.exit);
        let d_en = if en.edge == j {
            (rho_at(en.l + h, lk) - rho_at(en.l - h, lk)) / (2.0 * h)
        } else {
            (rho_at(lj, en.l + h) - rho_at(lj, en.l - h)) / (2.0 * h)
        };
        let d_ex = if ex.edge == j {
            (rho_at(ex.l + h, lk) - rho_at(ex.l - h, lk)) / (2.0 * h)
        } else {
            (rho_at(lj, ex.l + h) - rho_at(lj, ex.l - h)) / (2.0 * h)
        };
        assert!(close(d_ex, ex.alpha.cos(), 1e-6), "{d_ex} vs {}", ex.alpha.cos());
        assert!(close(d_en, -en.alpha.cos(), 1e-6), "{d_en} vs {}", -en.alpha.cos());
    }

    /// Volume-form oracle: at fixed `x` a convex polygon's section is one
    /// `y` interval with exact inner integral `1/y_lo - 1/y_hi`; the outer
    /// integral runs between consecutive vertex abscissas.
    #[test]
    fn gauss_bonnet_matches_volume_quadrature() {
        let poly = inscribe_regular_polygon(0.9, 3).unwrap();
        let gb = poly.area();
        let n = poly.len();
        let edges: Vec<(f64, f64, f64, f64)> = (0..n)
            .map(|i| {
                let e = poly.edge(i);
                let (c, r) = match e.geodesic.shape() {
                    crate::geodesics::Shape::Arc { c, r } => (c, r),
                    crate::geodesics::Shape::Vertical { .. } => panic!("test avoids vertical edges"),
                };
                let (x0, x1) = match (poly.vertices()[i], poly.vertices()[(i + 1) % n]) {
                    (Vertex::Interior(a), Vertex::Interior(b)) => {
                        (a.x.min(b.x), a.x.max(b.x))
                    }
                    _ => unreachable!("compact polygon"),
                };
                (c, r, x0, x1)
            })
            .collect();
        let section = move |x: f64| {
            let mut ys: Vec<f64> = edges
                .iter()
                .filter(|(_, _, x0, x1)| x > *x0 && x < *x1)
                .map(|(c, r, _, _)| (r * r - (x - c) * (x - c)).sqrt())
                .collect();
            ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
            match ys.len() {
                2 => 1.0 / ys[0] - 1.0 / ys[1],
                _ => 0.0,
            }
        };
        let mut xs: Vec<f64> = poly
            .vertices()
            .iter()
            .map(|v| match v {
                Vertex::Interior(p) => p.x,
                Vertex::Ideal(_) => unreachable!(),
            })
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut quad = 0.0;
        for w in xs.windows(2) {
            quad += crate::quadrature::adaptive_1d(&section, w[0], w[1], 1e-10, 44).value;
        }
        assert!(close(gb, quad, 1e-7), "{gb} vs {quad}");
    }

    #[test]
    fn equilateral_triangle_perimeter() {
        let poly = inscribe_regular_polygon(0.8, 3).unwrap();
        let lengths = poly.edge_lengths();
        let d = lengths[0];
        assert!(close(poly.perimeter(), 3.0 * d, 1e-12));
        assert!(close(lengths[1], d, 1e-12) && close(lengths[2], d, 1e-12));
    }

    #[test]
    fn inscribed_polygon_limits() {
        // edge lengths equal and perimeter/area approach the disk values
        let poly = inscribe_regular_polygon(1.0, 4).unwrap();
        let lengths = poly.edge_lengths();
        for l in &lengths {
            assert!(close(*l, lengths[0], 1e-12));
        }
        let n = 3 * (1 << 6);
        let poly = inscribe_regular_polygon(1.0, n).unwrap();
        let (circ, area) = crate::hplane::disk_geometry(1.0);
        assert!((poly.perimeter() / circ - 1.0).abs() < 1e-3);
        assert!((poly.area() / area - 1.0).abs() < 1e-3);
    }

    #[test]
    fn refinement_on_disk() {
        let dom = SmoothDomain::disk(1.0);
        let mut poly = inscribe_regular_polygon(1.0, 3).unwrap();
        let mut max_edges = alloc::vec![poly.edge_lengths().into_iter().fold(0.0, f64::max)];
        for _ in 0..5 {
            poly = refine(&poly, &dom).unwrap();
            max_edges.push(poly.edge_lengths().into_iter().fold(0.0, f64::max));
        }
        assert_eq!(poly.len(), 96);
        // halving rate of the maximum edge
        for w in max_edges.windows(2).skip(2) {
            let ratio = w[1] / w[0];
            assert!(ratio > 0.4 && ratio < 0.6, "ratio {ratio}");
        }
        // perimeter grows toward the circumference
        let p = poly.perimeter();
        assert!(p < TAU * 1f64.sinh());
        let refined = refine(&poly, &dom).unwrap();
        assert!(refined.perimeter() > p);
    }

    #[test]
    fn refine_rejects_off_boundary_vertices() {
        let dom = SmoothDomain::disk(1.0);
        let poly = inscribe_regular_polygon(0.7, 3).unwrap();
        assert!(matches!(refine(&poly, &dom), Err(PolygonError::NotOnBoundary { .. })));
    }
}
