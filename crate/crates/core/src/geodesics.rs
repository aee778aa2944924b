//! Geodesics and the Liouville measure in its three parametrizations.
//!
//! The measure of a set of geodesics can be written as
//! `du dv / |u - v|^2` over boundary endpoint pairs, as
//! `(1/2) sin(alpha) dl dalpha` over crossing position/angle with a fixed
//! host geodesic, or as `(1/2) cosh(w) dw deta` over foot distance/direction
//! from a fixed origin.  All three are implemented here together with the
//! conversions between them, the four-case sign table for the incidence
//! partials, and quadrature cross-checks of boundary-box measures.

use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;

use crate::hplane::{self, normalize_angle, Frame, Isometry, PlanePoint};
use crate::quadrature;
use crate::GEOM_TOL;

/// Errors from geodesic constructors and measure computations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeodesicError {
    CoincidentPoints,
    CoincidentEndpoints,
    /// The two boundary intervals of a box overlap.
    OverlappingIntervals,
    /// A value left its documented range (angle, length, ...).
    OutOfRange(&'static str),
    /// The requested configuration has no transversal intersection.
    NonTransversal,
    /// Tangency or a vertex hit; measure-zero stratum, rejected.
    Degenerate(&'static str),
    /// A point claimed to lie on a geodesic is too far from it.
    OffGeodesic { residual: f64 },
}

impl core::fmt::Display for GeodesicError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GeodesicError::CoincidentPoints => write!(f, "points coincide"),
            GeodesicError::CoincidentEndpoints => write!(f, "boundary endpoints coincide"),
            GeodesicError::OverlappingIntervals => write!(f, "boundary intervals overlap"),
            GeodesicError::OutOfRange(what) => write!(f, "out of range: {what}"),
            GeodesicError::NonTransversal => write!(f, "no transversal intersection"),
            GeodesicError::Degenerate(what) => write!(f, "degenerate configuration: {what}"),
            GeodesicError::OffGeodesic { residual } => {
                write!(f, "point off geodesic (residual {residual:e})")
            }
        }
    }
}

/// Point of the projective boundary `R u {inf}`, stored as a normalized
/// pair `(a, b)` representing `a/b`, with `inf = (1, 0)`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryPoint {
    pub a: f64,
    pub b: f64,
}

impl BoundaryPoint {
    /// Normalize `(a, b)` to unit length with canonical sign (`b > 0`, or
    /// `a > 0` when `b = 0`).
    pub fn from_projective(a: f64, b: f64) -> BoundaryPoint {
        let n = a.hypot(b);
        let (mut a, mut b) = (a / n, b / n);
        if b < 0.0 || (b == 0.0 && a < 0.0) {
            a = -a;
            b = -b;
        }
        BoundaryPoint { a, b }
    }

    pub fn from_real(x: f64) -> BoundaryPoint {
        BoundaryPoint::from_projective(x, 1.0)
    }

    pub fn infinity() -> BoundaryPoint {
        BoundaryPoint { a: 1.0, b: 0.0 }
    }

    /// Finite coordinate, or `None` for the point at infinity.
    pub fn value(&self) -> Option<f64> {
        if self.b.abs() < 1e-300 {
            None
        } else {
            Some(self.a / self.b)
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value().is_none()
    }

    /// Signed projective "difference" `a1 b2 - b1 a2`; antisymmetric, and
    /// equal to `p - q` after clearing denominators.
    pub(crate) fn det(&self, other: &BoundaryPoint) -> f64 {
        self.a * other.b - self.b * other.a
    }

    pub fn approx_eq(&self, other: &BoundaryPoint, tol: f64) -> bool {
        self.det(other).abs() <= tol
    }

    /// Angle of the corresponding point of the disk boundary under the
    /// Cayley transform.
    pub fn disk_angle(&self) -> f64 {
        // x -> (2x + i(x^2 - 1))/(x^2 + 1); projectively (2ab, a^2 - b^2)
        (self.a * self.a - self.b * self.b).atan2(2.0 * self.a * self.b)
    }

    /// Inverse of [`BoundaryPoint::disk_angle`].
    pub fn from_disk_angle(beta: f64) -> BoundaryPoint {
        BoundaryPoint::from_projective(beta.cos(), 1.0 - beta.sin())
    }
}

/// `true` when `p, q, r` occur in counter-clockwise order around the
/// boundary circle (for `R u {inf}`: increasing order with wrap).
pub fn cyclic_ccw(p: &BoundaryPoint, q: &BoundaryPoint, r: &BoundaryPoint) -> bool {
    p.det(q) * q.det(r) * r.det(p) > 0.0
}

/// Complete geodesic, determined by its unordered pair of ideal endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    pub u: BoundaryPoint,
    pub v: BoundaryPoint,
}

/// Internal Euclidean description of a geodesic in the half-plane chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Shape {
    /// Half-circle with center `c` and radius `r` on the real axis.
    Arc { c: f64, r: f64 },
    /// Vertical ray `x = x0`.
    Vertical { x: f64 },
}

impl Geodesic {
    pub fn new(u: BoundaryPoint, v: BoundaryPoint) -> Result<Geodesic, GeodesicError> {
        if u.approx_eq(&v, 1e-14) {
            return Err(GeodesicError::CoincidentEndpoints);
        }
        Ok(Geodesic { u, v })
    }

    pub fn from_reals(u: f64, v: f64) -> Result<Geodesic, GeodesicError> {
        Geodesic::new(BoundaryPoint::from_real(u), BoundaryPoint::from_real(v))
    }

    /// Same unoriented geodesic, up to endpoint tolerance.
    pub fn same_as(&self, other: &Geodesic, tol: f64) -> bool {
        (self.u.approx_eq(&other.u, tol) && self.v.approx_eq(&other.v, tol))
            || (self.u.approx_eq(&other.v, tol) && self.v.approx_eq(&other.u, tol))
    }

    pub(crate) fn shape(&self) -> Shape {
        match (self.u.value(), self.v.value()) {
            (Some(u), Some(v)) => Shape::Arc { c: 0.5 * (u + v), r: 0.5 * (u - v).abs() },
            (Some(u), None) | (None, Some(u)) => Shape::Vertical { x: u },
            (None, None) => unreachable!("constructor rejects equal endpoints"),
        }
    }

    /// Incidence residual of a point: its hyperbolic distance to the geodesic.
    pub fn residual(&self, z: PlanePoint) -> f64 {
        dist_to_shape(self.shape(), z)
    }

    pub fn contains(&self, z: PlanePoint, tol: f64) -> bool {
        self.residual(z) <= tol
    }

    /// Transversal crossing point with another geodesic, if any.
    pub fn crossing(&self, other: &Geodesic) -> Option<PlanePoint> {
        shape_crossing(self.shape(), other.shape())
    }

    /// Unit tangent at `z` (assumed on the geodesic) pointing toward `end`.
    pub(crate) fn tangent_toward(&self, z: PlanePoint, end: &BoundaryPoint) -> (f64, f64) {
        shape_tangent_toward(self.shape(), z, end)
    }

    pub fn apply_isometry(&self, g: Isometry) -> Geodesic {
        Geodesic { u: g.apply_boundary(self.u), v: g.apply_boundary(self.v) }
    }
}

/// Geodesic through two distinct interior points.
pub fn geodesic_through(p: PlanePoint, q: PlanePoint) -> Result<Geodesic, GeodesicError> {
    if hplane::distance(p, q) <= GEOM_TOL {
        return Err(GeodesicError::CoincidentPoints);
    }
    if (p.x - q.x).abs() <= 1e-14 * (1.0 + p.x.abs().max(q.x.abs())) {
        return Geodesic::new(BoundaryPoint::from_real(0.5 * (p.x + q.x)), BoundaryPoint::infinity());
    }
    let c = (p.x * p.x + p.y * p.y - q.x * q.x - q.y * q.y) / (2.0 * (p.x - q.x));
    let r = (p.x - c).hypot(p.y);
    Geodesic::from_reals(c - r, c + r)
}

/// Geodesic through an interior point and a boundary point.
pub fn geodesic_to_boundary(z: PlanePoint, m: &BoundaryPoint) -> Geodesic {
    match m.value() {
        None => Geodesic { u: BoundaryPoint::from_real(z.x), v: BoundaryPoint::infinity() },
        Some(m) => {
            if (z.x - m).abs() <= 1e-14 * (1.0 + m.abs()) {
                return Geodesic { u: BoundaryPoint::from_real(z.x), v: BoundaryPoint::infinity() };
            }
            let c = (z.x * z.x + z.y * z.y - m * m) / (2.0 * (z.x - m));
            Geodesic {
                u: BoundaryPoint::from_real(m),
                v: BoundaryPoint::from_real(2.0 * c - m),
            }
        }
    }
}

/// Geodesic through `z` with unit tangent `d`; oriented so that `v` is the
/// forward endpoint (the one the ray along `d` converges to).
pub fn geodesic_from_point_dir(z: PlanePoint, d: (f64, f64)) -> Geodesic {
    if d.0.abs() <= 1e-14 {
        let up = d.1 > 0.0;
        let fin = BoundaryPoint::from_real(z.x);
        let inf = BoundaryPoint::infinity();
        if up {
            Geodesic { u: fin, v: inf }
        } else {
            Geodesic { u: inf, v: fin }
        }
    } else {
        let c = z.x + z.y * d.1 / d.0;
        let r = (z.x - c).hypot(z.y);
        // tangent (y, -(x - c))/r points toward the endpoint c + r
        let toward_plus = d.0 * z.y - d.1 * (z.x - c) > 0.0;
        let (u, v) = if toward_plus { (c - r, c + r) } else { (c + r, c - r) };
        Geodesic { u: BoundaryPoint::from_real(u), v: BoundaryPoint::from_real(v) }
    }
}

pub(crate) fn shape_crossing(s1: Shape, s2: Shape) -> Option<PlanePoint> {
    match (s1, s2) {
        (Shape::Vertical { .. }, Shape::Vertical { .. }) => None,
        (Shape::Vertical { x }, Shape::Arc { c, r }) | (Shape::Arc { c, r }, Shape::Vertical { x }) => {
            let y2 = r * r - (x - c) * (x - c);
            (y2 > 0.0).then(|| PlanePoint { x, y: y2.sqrt() })
        }
        (Shape::Arc { c: c1, r: r1 }, Shape::Arc { c: c2, r: r2 }) => {
            if c1 == c2 {
                return None;
            }
            let x = (r2 * r2 - r1 * r1 + c1 * c1 - c2 * c2) / (2.0 * (c1 - c2));
            let y2 = r1 * r1 - (x - c1) * (x - c1);
            (y2 > 0.0).then(|| PlanePoint { x, y: y2.sqrt() })
        }
    }
}

pub(crate) fn dist_to_shape(s: Shape, z: PlanePoint) -> f64 {
    match s {
        Shape::Vertical { x } => ((z.x - x).abs() / z.y).asinh(),
        Shape::Arc { c, r } => {
            let q = ((z.x - c) * (z.x - c) + z.y * z.y - r * r).abs() / (2.0 * r * z.y);
            q.asinh()
        }
    }
}

/// Foot of the perpendicular from `z` onto the geodesic (its closest point).
///
/// On the arc `c + r e^{i theta}`, minimizing
/// `cosh d = 1 + |z - F|^2 / (2 y y_F)` gives the closed form
/// `cos theta* = 2 r (x - c) / ((x - c)^2 + y^2 + r^2)`.
pub(crate) fn foot_on_shape(s: Shape, z: PlanePoint) -> PlanePoint {
    match s {
        Shape::Vertical { x } => PlanePoint { x, y: (z.x - x).hypot(z.y) },
        Shape::Arc { c, r } => {
            let u = z.x - c;
            let a = u * u + z.y * z.y + r * r;
            let cos_t = (2.0 * r * u / a).clamp(-1.0, 1.0);
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            PlanePoint { x: c + r * cos_t, y: r * sin_t }
        }
    }
}

pub(crate) fn shape_tangent_toward(s: Shape, z: PlanePoint, end: &BoundaryPoint) -> (f64, f64) {
    match s {
        Shape::Vertical { .. } => {
            if end.is_infinite() {
                (0.0, 1.0)
            } else {
                (0.0, -1.0)
            }
        }
        Shape::Arc { c, r } => {
            let n = (z.x - c).hypot(z.y);
            let t = (z.y / n, -(z.x - c) / n); // toward endpoint c + r
            let e = end.value().expect("arc endpoints are finite");
            if (e - (c + r)).abs() <= (e - (c - r)).abs() {
                t
            } else {
                (-t.0, -t.1)
            }
        }
    }
}

/// Arclength displacement along a shape from `z0` toward `end`.
pub(crate) fn shape_point_at(s: Shape, z0: PlanePoint, end: &BoundaryPoint, l: f64) -> PlanePoint {
    match s {
        Shape::Vertical { x } => {
            let sgn = if end.is_infinite() { 1.0 } else { -1.0 };
            PlanePoint { x, y: z0.y * (sgn * l).exp() }
        }
        Shape::Arc { c, r } => {
            let th0 = z0.y.atan2(z0.x - c);
            let e = end.value().expect("arc endpoints are finite");
            // moving toward c + r means theta decreasing; l(theta) = ln tan(theta/2)
            let sgn = if (e - (c + r)).abs() <= (e - (c - r)).abs() { 1.0 } else { -1.0 };
            let t = (0.5 * th0).tan() * (-sgn * l).exp();
            let th = 2.0 * t.atan();
            PlanePoint { x: c + r * th.cos(), y: r * th.sin() }
        }
    }
}

/// Geodesic with an orientation (negative end to positive end) and a marked
/// origin; arclength increases toward the positive end.
#[derive(Debug, Clone, Copy)]
pub struct OrientedGeodesic {
    pub neg: BoundaryPoint,
    pub pos: BoundaryPoint,
    pub origin: PlanePoint,
}

impl OrientedGeodesic {
    pub fn new(
        neg: BoundaryPoint,
        pos: BoundaryPoint,
        origin: PlanePoint,
    ) -> Result<OrientedGeodesic, GeodesicError> {
        let g = Geodesic::new(neg, pos)?;
        let residual = g.residual(origin);
        if residual > GEOM_TOL {
            return Err(GeodesicError::OffGeodesic { residual });
        }
        Ok(OrientedGeodesic { neg, pos, origin })
    }

    pub fn geodesic(&self) -> Geodesic {
        Geodesic { u: self.neg, v: self.pos }
    }

    /// Point at signed arclength `l` from the origin.
    pub fn point_at(&self, l: f64) -> PlanePoint {
        shape_point_at(self.geodesic().shape(), self.origin, &self.pos, l)
    }

    /// Signed arclength of a point assumed to lie on the geodesic.
    pub fn param_of(&self, z: PlanePoint) -> f64 {
        let d = hplane::distance(self.origin, z);
        // sign: does the tangent at origin point toward z?
        let t = self.tangent_at(self.origin);
        let toward = toward_dir(self.geodesic().shape(), self.origin, z);
        if t.0 * toward.0 + t.1 * toward.1 >= 0.0 {
            d
        } else {
            -d
        }
    }

    /// Forward unit tangent at a point of the geodesic.
    pub fn tangent_at(&self, z: PlanePoint) -> (f64, f64) {
        shape_tangent_toward(self.geodesic().shape(), z, &self.pos)
    }

    /// Direction angle of the forward tangent at the origin.
    pub fn direction_at_origin(&self) -> f64 {
        let t = self.tangent_at(self.origin);
        normalize_angle(t.1.atan2(t.0))
    }

    pub fn reversed(&self) -> OrientedGeodesic {
        OrientedGeodesic { neg: self.pos, pos: self.neg, origin: self.origin }
    }

    /// The host axis of a frame: through the origin in the frame direction.
    pub fn axis_of(frame: Frame) -> OrientedGeodesic {
        let d = (frame.direction.cos(), frame.direction.sin());
        let g = geodesic_from_point_dir(frame.origin, d);
        OrientedGeodesic { neg: g.u, pos: g.v, origin: frame.origin }
    }
}

/// Unit direction at `z` along the geodesic through `z` and `w`, toward `w`.
pub(crate) fn toward_dir(s: Shape, z: PlanePoint, w: PlanePoint) -> (f64, f64) {
    match s {
        Shape::Vertical { .. } => {
            if w.y > z.y {
                (0.0, 1.0)
            } else {
                (0.0, -1.0)
            }
        }
        Shape::Arc { c, .. } => {
            let n = (z.x - c).hypot(z.y);
            let t = (z.y / n, -(z.x - c) / n);
            let thz = z.y.atan2(z.x - c);
            let thw = w.y.atan2(w.x - c);
            if thw < thz {
                t
            } else {
                (-t.0, -t.1)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// densities

/// Liouville density in the endpoint chart, `1/(u - v)^2`.
pub fn endpoint_density(u: f64, v: f64) -> Result<f64, GeodesicError> {
    if u == v {
        return Err(GeodesicError::CoincidentEndpoints);
    }
    Ok(1.0 / ((u - v) * (u - v)))
}

/// Liouville density in the incidence chart, `(1/2) sin(alpha)`.
///
/// Independent of the position `l` along the host.
pub fn incidence_density(alpha: f64) -> Result<f64, GeodesicError> {
    if !(alpha > 0.0 && alpha < PI) {
        return Err(GeodesicError::OutOfRange("incidence angle must lie in (0, pi)"));
    }
    Ok(0.5 * alpha.sin())
}

/// Liouville density in the two-host chart, `sin(a1) sin(a2) / (2 sinh rho)`.
pub fn pair_density(alpha1: f64, alpha2: f64, rho: f64) -> Result<f64, GeodesicError> {
    if !(alpha1 > 0.0 && alpha1 < PI && alpha2 > 0.0 && alpha2 < PI) {
        return Err(GeodesicError::OutOfRange("crossing angles must lie in (0, pi)"));
    }
    if rho <= 0.0 {
        return Err(GeodesicError::OutOfRange("chord length must be positive"));
    }
    Ok(alpha1.sin() * alpha2.sin() / (2.0 * rho.sinh()))
}

/// Liouville density in the polar chart, `(1/2) cosh(w)`.
pub fn polar_density(w: f64) -> f64 {
    0.5 * w.cosh()
}

/// Liouville measure of the box of geodesics with one endpoint in `[a, b]`
/// and one in `[c, d]` (disjoint counter-clockwise boundary arcs):
/// the absolute log of the cross-ratio `((a-c)(b-d)) / ((a-d)(b-c))`.
pub fn measure_box(
    a: &BoundaryPoint,
    b: &BoundaryPoint,
    c: &BoundaryPoint,
    d: &BoundaryPoint,
) -> Result<f64, GeodesicError> {
    let degenerate_ab = a.approx_eq(b, 1e-15);
    let degenerate_cd = c.approx_eq(d, 1e-15);
    if !degenerate_ab && !degenerate_cd && !arcs_disjoint(a, b, c, d) {
        return Err(GeodesicError::OverlappingIntervals);
    }
    let ratio = (a.det(c) * b.det(d)) / (a.det(d) * b.det(c));
    Ok(ratio.abs().ln().abs())
}

/// True when the closed CCW arcs `[a, b]` and `[c, d]` do not meet.
fn arcs_disjoint(a: &BoundaryPoint, b: &BoundaryPoint, c: &BoundaryPoint, d: &BoundaryPoint) -> bool {
    let in_arc = |p: &BoundaryPoint, s: &BoundaryPoint, e: &BoundaryPoint| {
        p.approx_eq(s, 1e-14) || p.approx_eq(e, 1e-14) || cyclic_ccw(s, p, e)
    };
    !in_arc(c, a, b) && !in_arc(d, a, b) && !in_arc(a, c, d) && !in_arc(b, c, d)
}

// ---------------------------------------------------------------------------
// incidence and polar samples

/// Crossing datum `(l, alpha)` of a geodesic with a host: position along the
/// host and crossing angle in `(0, pi)`.
///
/// The angle is the chart value tied to the polar-chart relations: it is
/// measured from the host's forward tangent to the chord direction on the
/// host's right for `l > 0` and on its left for `l < 0`.
#[derive(Debug, Clone)]
pub struct IncidenceSample {
    pub l: f64,
    pub alpha: f64,
    pub host: OrientedGeodesic,
}

impl IncidenceSample {
    pub fn new(l: f64, alpha: f64, host: OrientedGeodesic) -> Result<Self, GeodesicError> {
        if !(alpha > 0.0 && alpha < PI) {
            return Err(GeodesicError::OutOfRange("incidence angle must lie in (0, pi)"));
        }
        Ok(Self { l, alpha, host })
    }

    /// The geodesic this sample denotes.
    pub fn geodesic(&self) -> Geodesic {
        let z = self.host.point_at(self.l);
        let t = self.host.tangent_at(z);
        let phi = t.1.atan2(t.0);
        let ang = if self.l >= 0.0 { phi - self.alpha } else { phi + self.alpha };
        geodesic_from_point_dir(z, (ang.cos(), ang.sin()))
    }
}

/// Polar datum `(w, eta)` of a geodesic relative to a frame: distance from
/// the frame origin and direction of the perpendicular foot, measured
/// counter-clockwise from the frame direction.
#[derive(Debug, Clone, Copy)]
pub struct PolarSample {
    pub w: f64,
    pub eta: f64,
    pub frame: Frame,
}

impl PolarSample {
    pub fn new(w: f64, eta: f64, frame: Frame) -> Result<Self, GeodesicError> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(GeodesicError::OutOfRange("polar distance w must be >= 0"));
        }
        Ok(Self { w, eta: normalize_angle(eta), frame })
    }

    /// The geodesic this sample denotes: orthogonal to the foot ray at
    /// distance `w` from the frame origin.
    pub fn geodesic(&self) -> Geodesic {
        let iso = self.frame.to_canonical().inverse();
        let psi = FRAC_PI_2 + self.eta;
        let sigma = self.w.tanh().acos();
        let u = iso.apply_boundary(BoundaryPoint::from_disk_angle(psi - sigma));
        let v = iso.apply_boundary(BoundaryPoint::from_disk_angle(psi + sigma));
        Geodesic { u, v }
    }

    /// Polar coordinates of a geodesic in a frame.
    pub fn of_geodesic(frame: Frame, g: &Geodesic) -> PolarSample {
        let iso = frame.to_canonical();
        let gc = g.apply_isometry(iso);
        let b1 = gc.u.disk_angle();
        let b2 = gc.v.disk_angle();
        let delta = normalize_angle(b2 - b1);
        let (sigma, psi) = if delta <= PI {
            (0.5 * delta, b1 + 0.5 * delta)
        } else {
            (PI - 0.5 * delta, b2 + PI - 0.5 * delta)
        };
        let w = sigma.cos().max(0.0).atanh();
        PolarSample { w, eta: normalize_angle(psi - FRAC_PI_2), frame }
    }
}

/// Convert a polar sample to the incidence sample on the frame's axis.
///
/// Relations: `tanh l = tanh w / cos eta`, `cos alpha = cosh w sin eta`;
/// a transversal crossing requires `|cosh w sin eta| < 1`.
pub fn incidence_from_polar(ps: &PolarSample) -> Result<IncidenceSample, GeodesicError> {
    let ce = ps.eta.cos();
    let q = ps.w.cosh() * ps.eta.sin();
    if q.abs() >= 1.0 || ce == 0.0 {
        return Err(GeodesicError::NonTransversal);
    }
    let l = (ps.w.tanh() / ce).atanh();
    let alpha = q.acos();
    IncidenceSample::new(l, alpha, OrientedGeodesic::axis_of(ps.frame))
}

/// Inverse of [`incidence_from_polar`].
pub fn polar_from_incidence(is: &IncidenceSample) -> Result<PolarSample, GeodesicError> {
    let frame = Frame::new(is.host.origin, is.host.direction_at_origin());
    if is.l == 0.0 {
        return PolarSample::new(0.0, FRAC_PI_2 - is.alpha, frame);
    }
    let w = (is.l.sinh().abs() * is.alpha.sin()).asinh();
    let sin_eta = is.alpha.cos() / w.cosh();
    let cos_eta = w.tanh() / is.l.tanh();
    PolarSample::new(w, sin_eta.atan2(cos_eta), frame)
}

// ---------------------------------------------------------------------------
// sigma signs and incidence partials

/// Side of a chord relative to an oriented host geodesic, labelled as in the
/// four-case list for the incidence partials.
///
/// The labels are anchored by the finite-difference checks of
/// [`incidence_partials`]: `Left` means the far crossing point lies on the
/// clockwise side of the host's forward tangent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The pair `(sigma1, sigma2)` entering the incidence partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigmaSigns {
    pub sigma1: i8,
    pub sigma2: i8,
}

/// Four-case sign table, keyed by the side of the chord relative to each
/// oriented host.
pub fn sigma_signs(side1: Side, side2: Side) -> SigmaSigns {
    match (side1, side2) {
        (Side::Left, Side::Left) => SigmaSigns { sigma1: -1, sigma2: 1 },
        (Side::Left, Side::Right) => SigmaSigns { sigma1: 1, sigma2: 1 },
        (Side::Right, Side::Left) => SigmaSigns { sigma1: -1, sigma2: -1 },
        (Side::Right, Side::Right) => SigmaSigns { sigma1: 1, sigma2: -1 },
    }
}

/// Crossing data of a chord against two oriented hosts.
pub(crate) struct PairCrossing {
    pub rho: f64,
    /// Angle at `z1`, measured counter-clockwise from host 1 to the chord.
    pub alpha1: f64,
    /// Angle at `z2`, measured clockwise from host 2 to the chord.
    pub alpha2: f64,
    pub side1: Side,
    pub side2: Side,
}

pub(crate) fn pair_crossing(
    g1: &OrientedGeodesic,
    g2: &OrientedGeodesic,
    chord: &Geodesic,
) -> Result<PairCrossing, GeodesicError> {
    let z1 = chord.crossing(&g1.geodesic()).ok_or(GeodesicError::NonTransversal)?;
    let z2 = chord.crossing(&g2.geodesic()).ok_or(GeodesicError::NonTransversal)?;
    let rho = hplane::distance(z1, z2);
    if rho <= 1e-9 {
        return Err(GeodesicError::Degenerate("hosts cross the chord at one point"));
    }
    let t1 = g1.tangent_at(z1);
    let t2 = g2.tangent_at(z2);
    let c1 = toward_dir(chord.shape(), z1, z2);
    let c2 = toward_dir(chord.shape(), z2, z1);
    let s1 = t1.0 * c1.1 - t1.1 * c1.0;
    let s2 = t2.0 * c2.1 - t2.1 * c2.0;
    if s1.abs() <= 1e-9 || s2.abs() <= 1e-9 {
        return Err(GeodesicError::Degenerate("tangential crossing"));
    }
    // alpha1 ccw in (0, pi): angle from t1 to the chord direction left of t1
    let d1 = if s1 > 0.0 { c1 } else { (-c1.0, -c1.1) };
    let alpha1 = (t1.0 * d1.1 - t1.1 * d1.0).abs().atan2(t1.0 * d1.0 + t1.1 * d1.1);
    // alpha2 cw in (0, pi): angle from t2 to the chord direction right of t2
    let d2 = if s2 < 0.0 { c2 } else { (-c2.0, -c2.1) };
    let alpha2 = (t2.0 * d2.1 - t2.1 * d2.0).abs().atan2(t2.0 * d2.0 + t2.1 * d2.1);
    // paper labels are the mirror of the cross-product side (see module tests)
    let side1 = if s1 > 0.0 { Side::Right } else { Side::Left };
    let side2 = if s2 > 0.0 { Side::Right } else { Side::Left };
    let _ = (z1, z2);
    Ok(PairCrossing { rho, alpha1, alpha2, side1, side2 })
}

/// Sides of a chord with respect to two oriented hosts it crosses.
pub fn chord_sides(
    g1: &OrientedGeodesic,
    g2: &OrientedGeodesic,
    chord: &Geodesic,
) -> Result<(Side, Side), GeodesicError> {
    let pc = pair_crossing(g1, g2, chord)?;
    Ok((pc.side1, pc.side2))
}

/// The partial derivatives `(dalpha1/dl2, dalpha2/dl1)` of the two crossing
/// angles of a chord, as the crossing points slide along their hosts:
/// `sigma1 sin(alpha2)/sinh(rho)` and `sigma2 sin(alpha1)/sinh(rho)`.
pub fn incidence_partials(
    g1: &OrientedGeodesic,
    g2: &OrientedGeodesic,
    chord: &Geodesic,
) -> Result<(f64, f64), GeodesicError> {
    let pc = pair_crossing(g1, g2, chord)?;
    let sh = pc.rho.sinh();
    if sh == 0.0 {
        return Err(GeodesicError::Degenerate("zero chord length"));
    }
    let s = sigma_signs(pc.side1, pc.side2);
    Ok((f64::from(s.sigma1) * pc.alpha2.sin() / sh, f64::from(s.sigma2) * pc.alpha1.sin() / sh))
}

// ---------------------------------------------------------------------------
// boundary-box measures through the three charts

/// Endpoint-chart quadrature of a finite boundary box: the double integral
/// of `1/(u - v)^2` over `[a, b] x [c, d]`.
///
/// Exists as an independent check of [`measure_box`]; for each `u` the inner
/// integral has the exact antiderivative `1/(v - u)`.
pub fn measure_box_endpoint_quad(a: f64, b: f64, c: f64, d: f64, tol: f64) -> f64 {
    quadrature::adaptive_1d(
        &|u| 1.0 / (c - u) - 1.0 / (d - u),
        a,
        b,
        tol,
        quadrature::MAX_DEPTH_1D,
    )
    .value
}

/// Incidence-chart quadrature of a boundary box: geodesics of the box are
/// parametrized by their crossing with `host`, whose ideal endpoints must
/// lie strictly inside the two gaps of the box.
///
/// For each crossing position the admissible angle interval is computed from
/// the four box corners, and `int (1/2) sin = (cos lo - cos hi)/2` is exact.
pub fn measure_box_incidence_quad(
    arcs: &BoxArcs,
    host: &OrientedGeodesic,
    tol: f64,
) -> Result<f64, GeodesicError> {
    let BoxArcs { a, b, c, d } = arcs;
    // host crossing parameters of the four corner geodesics bound the range
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, q) in [(a, c), (a, d), (b, c), (b, d)] {
        let g = Geodesic::new(*p, *q)?;
        let z = g.crossing(&host.geodesic()).ok_or(GeodesicError::NonTransversal)?;
        let l = host.param_of(z);
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let host = *host;
    let arcs = *arcs;
    let inner = move |l: f64| {
        let z = host.point_at(l);
        let t = host.tangent_at(z);
        // angle (in the all-left convention) of the geodesic through z with
        // boundary endpoint m; monotone along each gap-free arc
        let kappa = |m: &BoundaryPoint| {
            let g = geodesic_to_boundary(z, m);
            let toward = shape_tangent_toward(g.shape(), z, m);
            let cross = t.0 * toward.1 - t.1 * toward.0;
            let dir = if cross > 0.0 { toward } else { (-toward.0, -toward.1) };
            (t.0 * dir.1 - t.1 * dir.0).abs().atan2(t.0 * dir.0 + t.1 * dir.1)
        };
        let (mut a1, mut a2) = (kappa(&arcs.a), kappa(&arcs.b));
        if a1 > a2 {
            core::mem::swap(&mut a1, &mut a2);
        }
        let (mut b1, mut b2) = (kappa(&arcs.c), kappa(&arcs.d));
        if b1 > b2 {
            core::mem::swap(&mut b1, &mut b2);
        }
        let lo_a = a1.max(b1);
        let hi_a = a2.min(b2);
        if hi_a <= lo_a {
            0.0
        } else {
            0.5 * (lo_a.cos() - hi_a.cos())
        }
    };
    Ok(quadrature::adaptive_1d(&inner, lo, hi, tol, quadrature::MAX_DEPTH_1D).value)
}

/// A boundary box: geodesics with one endpoint in the CCW arc `[a, b]` and
/// the other in `[c, d]`.
#[derive(Debug, Clone, Copy)]
pub struct BoxArcs {
    pub a: BoundaryPoint,
    pub b: BoundaryPoint,
    pub c: BoundaryPoint,
    pub d: BoundaryPoint,
}

/// Clip `{sigma : (sigma - enter) mod 2pi <= len}` to `(0, pi/2]`; up to two
/// pieces when the raw interval wraps past `2 pi`.
pub(crate) fn sigma_pieces(enter: f64, len: f64) -> ([(f64, f64); 2], usize) {
    let mut out = [(0.0, 0.0); 2];
    let mut n = 0;
    for k in [0.0, 1.0] {
        let lo = (enter - TAU * k).max(1e-15);
        let hi = (enter + len - TAU * k).min(FRAC_PI_2);
        if hi > lo {
            out[n] = (lo, hi);
            n += 1;
        }
    }
    (out, n)
}

/// The `w` intervals at foot direction `psi` (disk angle of the ray) where
/// the geodesic's endpoints `psi -+ sigma` fall one in each arc.
pub(crate) fn polar_w_intervals(
    psi: f64,
    arc1: (f64, f64),
    arc2: (f64, f64),
) -> ([(f64, f64); 4], usize) {
    let mut out = [(0.0, 0.0); 4];
    let mut count = 0;
    for ((s1, e1), (s2, e2)) in [(arc1, arc2), (arc2, arc1)] {
        // endpoint psi - sigma travels clockwise from psi as sigma grows:
        // it enters the ccw arc [s, e] at e; psi + sigma enters at s
        let (p1, n1) = sigma_pieces(normalize_angle(psi - e1), normalize_angle(e1 - s1));
        let (p2, n2) = sigma_pieces(normalize_angle(s2 - psi), normalize_angle(e2 - s2));
        for (lo1, hi1) in &p1[..n1] {
            for (lo2, hi2) in &p2[..n2] {
                let lo = lo1.max(*lo2);
                let hi = hi1.min(*hi2);
                if hi > lo && count < 4 {
                    // sigma decreasing corresponds to w increasing
                    let w_lo = hi.cos().max(0.0).atanh();
                    let w_hi = lo.cos().min(1.0 - 1e-16).atanh();
                    out[count] = (w_lo, w_hi);
                    count += 1;
                }
            }
        }
    }
    (out, count)
}

/// Polar-chart quadrature of a boundary box about a frame: for each foot
/// direction the admissible `w` intervals are exact, and
/// `int (1/2) cosh = (sinh hi - sinh lo)/2`.
pub fn measure_box_polar_quad(arcs: &BoxArcs, frame: Frame, tol: f64) -> f64 {
    let iso = frame.to_canonical();
    let ang = |p: &BoundaryPoint| iso.apply_boundary(*p).disk_angle();
    let (ta, tb, tc, td) = (ang(&arcs.a), ang(&arcs.b), ang(&arcs.c), ang(&arcs.d));
    let integrand = move |eta: f64| {
        let psi = FRAC_PI_2 + eta;
        let (pieces, n) = polar_w_intervals(psi, (ta, tb), (tc, td));
        pieces[..n]
            .iter()
            .map(|(w_lo, w_hi)| 0.5 * (w_hi.sinh() - w_lo.sinh()))
            .sum()
    };
    quadrature::adaptive_1d(&integrand, 0.0, TAU, tol, quadrature::MAX_DEPTH_1D).value
}

// ---------------------------------------------------------------------------
// finite-difference chart checks

fn lcg_unit(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

/// Worst residual of `|d(l,alpha)/d(w,eta)| * (1/2) sin(alpha) = (1/2) cosh(w)`
/// over `n` random valid polar samples, via central finite differences.
pub fn polar_jacobian_residual(n: usize, seed: u64) -> f64 {
    let frame = Frame::canonical();
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < n {
        let w = 0.05 + 1.5 * lcg_unit(&mut state);
        let eta = TAU * lcg_unit(&mut state);
        let probe = |w: f64, eta: f64| -> Option<(f64, f64)> {
            let ps = PolarSample::new(w, eta, frame).ok()?;
            let inc = incidence_from_polar(&ps).ok()?;
            Some((inc.l, inc.alpha))
        };
        let Some((_, alpha)) = probe(w, eta) else { continue };
        if alpha.min(PI - alpha) < 0.05 {
            continue;
        }
        let (Some(pw), Some(mw), Some(pe), Some(me)) =
            (probe(w + h, eta), probe(w - h, eta), probe(w, eta + h), probe(w, eta - h))
        else {
            continue;
        };
        let jac = ((pw.0 - mw.0) * (pe.1 - me.1) - (pe.0 - me.0) * (pw.1 - mw.1)).abs()
            / (4.0 * h * h);
        let res = (jac * 0.5 * alpha.sin() - 0.5 * w.cosh()).abs() / (0.5 * w.cosh());
        worst = worst.max(res);
        checked += 1;
    }
    worst
}

/// Worst residual of
/// `pair_density * |d(l1,l2)/d(u,v)| = endpoint_density` over `n` random
/// transversal chords of two fixed hosts, via central finite differences.
pub fn pair_jacobian_residual(n: usize, seed: u64) -> f64 {
    let g1 = Geodesic::from_reals(-1.0, 1.0).expect("distinct");
    let g2 = Geodesic::from_reals(-4.0, 4.0).expect("distinct");
    let cross_params = |u: f64, v: f64| -> Option<(f64, f64, f64, f64, f64)> {
        let ch = Geodesic::from_reals(u, v).ok()?;
        let z1 = ch.crossing(&g1)?;
        let z2 = ch.crossing(&g2)?;
        // arclength along each host from its topmost point
        let top1 = PlanePoint { x: 0.0, y: 1.0 };
        let top2 = PlanePoint { x: 0.0, y: 4.0 };
        let sgn = |z: PlanePoint| if z.x >= 0.0 { 1.0 } else { -1.0 };
        let l1 = sgn(z1) * hplane::distance(top1, z1);
        let l2 = sgn(z2) * hplane::distance(top2, z2);
        let rho = hplane::distance(z1, z2);
        let t1 = g1.tangent_toward(z1, &g1.v);
        let t2 = g2.tangent_toward(z2, &g2.v);
        let c1 = toward_dir(ch.shape(), z1, z2);
        let c2 = toward_dir(ch.shape(), z2, z1);
        let s1 = (t1.0 * c1.1 - t1.1 * c1.0).abs();
        let s2 = (t2.0 * c2.1 - t2.1 * c2.0).abs();
        Some((l1, l2, rho, s1, s2))
    };
    let mut state = seed.wrapping_add(0x2545f4914f6cdd1d);
    let h = 1e-6;
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < n {
        let u = 1.8 * lcg_unit(&mut state) - 0.9;
        let v = 4.5 + 3.5 * lcg_unit(&mut state);
        let Some((_, _, rho, s1, s2)) = cross_params(u, v) else { continue };
        if rho < 0.2 || s1 < 0.1 || s2 < 0.1 {
            continue;
        }
        let (Some(pu), Some(mu), Some(pv), Some(mv)) = (
            cross_params(u + h, v),
            cross_params(u - h, v),
            cross_params(u, v + h),
            cross_params(u, v - h),
        ) else {
            continue;
        };
        let jac = ((pu.0 - mu.0) * (pv.1 - mv.1) - (pv.0 - mv.0) * (pu.1 - mu.1)).abs()
            / (4.0 * h * h);
        let density = s1 * s2 / (2.0 * rho.sinh());
        let target = 1.0 / ((u - v) * (u - v));
        let res = (density * jac - target).abs() / target;
        worst = worst.max(res);
        checked += 1;
    }
    worst
}

#[cfg(test)]
mod tests {
    use alloc::vec::Vec;

    use super::*;
    use crate::hplane::distance;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn vertical_geodesic_through() {
        let g = geodesic_through(PlanePoint::I, PlanePoint::new(0.0, 2.0).unwrap()).unwrap();
        assert!(g.u.value() == Some(0.0) || g.v.value() == Some(0.0));
        assert!(g.u.is_infinite() || g.v.is_infinite());
    }

    #[test]
    fn geodesic_through_incidence() {
        let p = PlanePoint::I;
        let q = PlanePoint::new(1.0, 1.0).unwrap();
        let g = geodesic_through(p, q).unwrap();
        assert!(g.residual(p) <= 1e-10);
        assert!(g.residual(q) <= 1e-10);
        let g2 = geodesic_through(q, p).unwrap();
        assert!(g.same_as(&g2, 1e-12));
        assert!(geodesic_through(p, p).is_err());
    }

    #[test]
    fn endpoint_density_values() {
        assert_eq!(endpoint_density(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(endpoint_density(0.0, 2.0).unwrap(), 0.25);
        assert!(endpoint_density(1.0, 1.0).is_err());
        for i in 0..100 {
            let u = (i as f64) * 0.37 - 18.0;
            let v = u + 0.5 + (i as f64) * 0.11;
            assert_eq!(endpoint_density(u, v).unwrap(), endpoint_density(v, u).unwrap());
        }
    }

    #[test]
    fn measure_box_log2() {
        // [-1, 0] x [1, inf]
        let m = measure_box(
            &BoundaryPoint::from_real(-1.0),
            &BoundaryPoint::from_real(0.0),
            &BoundaryPoint::from_real(1.0),
            &BoundaryPoint::infinity(),
        )
        .unwrap();
        assert!(close(m, 2f64.ln(), 1e-15));
        // degenerate interval has zero measure
        let z = measure_box(
            &BoundaryPoint::from_real(0.3),
            &BoundaryPoint::from_real(0.3),
            &BoundaryPoint::from_real(1.0),
            &BoundaryPoint::from_real(2.0),
        )
        .unwrap();
        assert!(z.abs() < 1e-12);
        // overlap rejected
        assert!(measure_box(
            &BoundaryPoint::from_real(0.0),
            &BoundaryPoint::from_real(2.0),
            &BoundaryPoint::from_real(1.0),
            &BoundaryPoint::from_real(3.0),
        )
        .is_err());
    }

    #[test]
    fn measure_box_matches_quadrature() {
        let (a, b, c, d) = (0.2, 0.8, 2.0, 5.0);
        let exact = measure_box(
            &BoundaryPoint::from_real(a),
            &BoundaryPoint::from_real(b),
            &BoundaryPoint::from_real(c),
            &BoundaryPoint::from_real(d),
        )
        .unwrap();
        let quad = measure_box_endpoint_quad(a, b, c, d, 1e-12);
        assert!(close(exact, quad, 1e-10), "{exact} vs {quad}");
    }

    #[test]
    fn measure_box_isometry_invariance() {
        let mut state = 1234567u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts = [
            BoundaryPoint::from_real(-0.7),
            BoundaryPoint::from_real(0.4),
            BoundaryPoint::from_real(1.3),
            BoundaryPoint::from_real(2.9),
        ];
        let base = measure_box(&pts[0], &pts[1], &pts[2], &pts[3]).unwrap();
        for _ in 0..50 {
            let g = Isometry::translation(4.0 * next() - 2.0)
                .compose(Isometry::scaling(0.25 + 2.0 * next()))
                .compose(Isometry::rotation_about_i(TAU * next()));
            let im: Vec<BoundaryPoint> = pts.iter().map(|p| g.apply_boundary(*p)).collect();
            let m = measure_box(&im[0], &im[1], &im[2], &im[3]).unwrap();
            assert!(close(m, base, 1e-10), "{m} vs {base}");
        }
    }

    #[test]
    fn incidence_density_values() {
        assert_eq!(incidence_density(FRAC_PI_2).unwrap(), 0.5);
        let a = 0.7;
        assert!(close(
            incidence_density(a).unwrap(),
            incidence_density(PI - a).unwrap(),
            1e-15
        ));
        assert!(incidence_density(0.0).is_err());
        assert!(incidence_density(PI).is_err());
        // total over angles of a unit transversal: int_0^pi (1/2) sin = 1
        let total = quadrature::adaptive_1d(
            &|a| incidence_density(a).unwrap(),
            1e-12,
            PI - 1e-12,
            1e-12,
            40,
        )
        .value;
        assert!(close(total, 1.0, 1e-10));
    }

    #[test]
    fn pair_density_values() {
        let rho = 1.3;
        assert!(close(
            pair_density(FRAC_PI_2, FRAC_PI_2, rho).unwrap(),
            0.5 / rho.sinh(),
            1e-15
        ));
        assert!(pair_density(1.0, 1.0, 0.0).is_err());
        let mut prev = f64::INFINITY;
        for i in 1..40 {
            let v = pair_density(0.8, 1.1, i as f64 * 0.5).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn polar_density_and_crofton_disk() {
        assert_eq!(polar_density(0.0), 0.5);
        // measure of geodesics meeting the disk of radius r: pi sinh r
        for r in [0.5, 1.0, 2.0] {
            let m = TAU * 0.5 * r.sinh(); // int_0^{2pi} int_0^r (1/2) cosh w
            assert!(close(m, PI * r.sinh(), 1e-12));
        }
    }

    #[test]
    fn polar_sample_round_trip() {
        let frame = Frame::canonical();
        for (w, eta) in [(0.4, 0.3), (1.2, 2.0), (0.9, 4.4), (2.1, 5.9)] {
            let ps = PolarSample::new(w, eta, frame).unwrap();
            let g = ps.geodesic();
            // distance from origin equals w
            assert!(close(dist_to_shape(g.shape(), frame.origin), w, 1e-10));
            let back = PolarSample::of_geodesic(frame, &g);
            assert!(close(back.w, w, 1e-10));
            assert!(close(back.eta, eta, 1e-10));
        }
    }

    #[test]
    fn incidence_polar_relations() {
        let frame = Frame::canonical();
        // eta = 0: l = w, alpha = pi/2
        let ps = PolarSample::new(0.8, 0.0, frame).unwrap();
        let inc = incidence_from_polar(&ps).unwrap();
        assert!(close(inc.l, 0.8, 1e-12));
        assert!(close(inc.alpha, FRAC_PI_2, 1e-12));
        // w = 0: l = 0, cos alpha = sin eta
        let ps = PolarSample::new(0.0, 0.7, frame).unwrap();
        let inc = incidence_from_polar(&ps).unwrap();
        assert!(close(inc.l, 0.0, 1e-12));
        assert!(close(inc.alpha.cos(), 0.7f64.sin(), 1e-12));
        // non-transversal rejected
        let ps = PolarSample::new(1.5, FRAC_PI_2, frame).unwrap();
        assert!(incidence_from_polar(&ps).is_err());
    }

    #[test]
    fn incidence_polar_round_trip_and_geodesic_consistency() {
        let frame = Frame::canonical();
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        while checked < 100 {
            let w = 1.5 * next();
            let eta = TAU * next();
            let ps = PolarSample::new(w, eta, frame).unwrap();
            let Ok(inc) = incidence_from_polar(&ps) else { continue };
            // the sample denotes the same geodesic in both charts
            assert!(
                inc.geodesic().same_as(&ps.geodesic(), 1e-8),
                "chart mismatch at w={w} eta={eta}"
            );
            let back = polar_from_incidence(&inc).unwrap();
            assert!(close(back.w, w, 1e-10) && close(back.eta, eta, 1e-10));
            checked += 1;
        }
    }

    #[test]
    fn sigma_table_paper_cases() {
        assert_eq!(sigma_signs(Side::Left, Side::Left), SigmaSigns { sigma1: -1, sigma2: 1 });
        assert_eq!(sigma_signs(Side::Left, Side::Right), SigmaSigns { sigma1: 1, sigma2: 1 });
        assert_eq!(sigma_signs(Side::Right, Side::Left), SigmaSigns { sigma1: -1, sigma2: -1 });
        assert_eq!(sigma_signs(Side::Right, Side::Right), SigmaSigns { sigma1: 1, sigma2: -1 });
    }

    /// Central FD oracle: slide the crossing point along one host, holding
    /// the other crossing fixed, and compare the angle rate against the
    /// table-driven formula.
    #[test]
    fn incidence_partials_match_finite_differences() {
        let mut state = 2024u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        let mut seen = [false; 4];
        while checked < 50 {
            let p1 = PlanePoint::new(4.0 * next() - 2.0, 0.3 + 2.0 * next()).unwrap();
            let q1 = PlanePoint::new(4.0 * next() - 2.0, 0.3 + 2.0 * next()).unwrap();
            let p2 = PlanePoint::new(4.0 * next() - 2.0, 0.3 + 2.0 * next()).unwrap();
            let q2 = PlanePoint::new(4.0 * next() - 2.0, 0.3 + 2.0 * next()).unwrap();
            if distance(p1, q1) < 0.3 || distance(p2, q2) < 0.3 {
                continue;
            }
            let Ok(h1g) = geodesic_through(p1, q1) else { continue };
            let Ok(h2g) = geodesic_through(p2, q2) else { continue };
            let h1 = OrientedGeodesic::new(h1g.u, h1g.v, p1).unwrap();
            let h2 = OrientedGeodesic::new(h2g.u, h2g.v, p2).unwrap();
            let l1 = next() - 0.5;
            let l2 = next() - 0.5;
            let z1 = h1.point_at(l1);
            let z2 = h2.point_at(l2);
            let Ok(chord) = geodesic_through(z1, z2) else { continue };
            let Ok(pc) = pair_crossing(&h1, &h2, &chord) else { continue };
            if pc.rho < 0.25
                || pc.alpha1.min(PI - pc.alpha1) < 0.15
                || pc.alpha2.min(PI - pc.alpha2) < 0.15
            {
                continue;
            }
            let Ok((da1, da2)) = incidence_partials(&h1, &h2, &chord) else { continue };
            let h = 1e-5;
            let alpha1_at = |l2v: f64| {
                let z2v = h2.point_at(l2v);
                let ch = geodesic_through(z1, z2v).unwrap();
                pair_crossing(&h1, &h2, &ch).unwrap().alpha1
            };
            let alpha2_at = |l1v: f64| {
                let z1v = h1.point_at(l1v);
                let ch = geodesic_through(z1v, z2).unwrap();
                pair_crossing(&h1, &h2, &ch).unwrap().alpha2
            };
            let fd1 = (alpha1_at(l2 + h) - alpha1_at(l2 - h)) / (2.0 * h);
            let fd2 = (alpha2_at(l1 + h) - alpha2_at(l1 - h)) / (2.0 * h);
            assert!(close(fd1, da1, 1e-6 * (1.0 + da1.abs())), "{fd1} vs {da1}");
            assert!(close(fd2, da2, 1e-6 * (1.0 + da2.abs())), "{fd2} vs {da2}");
            let idx = match (pc.side1, pc.side2) {
                (Side::Left, Side::Left) => 0,
                (Side::Left, Side::Right) => 1,
                (Side::Right, Side::Left) => 2,
                (Side::Right, Side::Right) => 3,
            };
            seen[idx] = true;
            checked += 1;
        }
        assert!(seen.iter().all(|s| *s), "not all four side cases sampled: {seen:?}");
    }

    #[test]
    fn partials_formula_value() {
        // alpha2 = pi/2, rho = 1, sigma1 = +1 gives 1/sinh 1
        let v = 1.0f64 / 1.0f64.sinh();
        assert!(close(v, 0.8509181282393216, 1e-12));
    }

    #[test]
    fn host_orientation_flip_flips_the_matching_sign() {
        let h1g = geodesic_through(PlanePoint::new(-1.0, 1.0).unwrap(), PlanePoint::new(1.0, 1.2).unwrap()).unwrap();
        let h2g = geodesic_through(PlanePoint::new(-0.5, 0.4).unwrap(), PlanePoint::new(0.8, 0.5).unwrap()).unwrap();
        let h1 = OrientedGeodesic::new(h1g.u, h1g.v, PlanePoint::new(-1.0, 1.0).unwrap()).unwrap();
        let h2 = OrientedGeodesic::new(h2g.u, h2g.v, PlanePoint::new(-0.5, 0.4).unwrap()).unwrap();
        let chord = geodesic_through(h1.point_at(0.2), h2.point_at(0.3)).unwrap();
        let (s1, s2) = chord_sides(&h1, &h2, &chord).unwrap();
        let sig = sigma_signs(s1, s2);
        // reversing host 1 flips side1 (and hence sigma2), leaves sigma1
        let (s1r, s2r) = chord_sides(&h1.reversed(), &h2, &chord).unwrap();
        assert_ne!(s1, s1r);
        assert_eq!(s2, s2r);
        let sigr = sigma_signs(s1r, s2r);
        assert_eq!(sig.sigma1, sigr.sigma1);
        assert_eq!(sig.sigma2, -sigr.sigma2);
    }

    /// The module's central property: one boundary box measured through the
    /// endpoint, incidence, and polar charts agrees pairwise.
    #[test]
    fn chart_consistency_box_measure() {
        let arcs = BoxArcs {
            a: BoundaryPoint::from_real(0.2),
            b: BoundaryPoint::from_real(0.8),
            c: BoundaryPoint::from_real(2.0),
            d: BoundaryPoint::from_real(5.0),
        };
        let exact = measure_box(&arcs.a, &arcs.b, &arcs.c, &arcs.d).unwrap();
        let ep = measure_box_endpoint_quad(0.2, 0.8, 2.0, 5.0, 1e-12);
        // host with endpoints in the two gaps
        let host_g = Geodesic::from_reals(1.4, 7.0).unwrap();
        let origin = shape_crossing(host_g.shape(), Shape::Vertical { x: 2.2 }).unwrap();
        let host = OrientedGeodesic::new(host_g.u, host_g.v, origin).unwrap();
        let inc = measure_box_incidence_quad(&arcs, &host, 1e-11).unwrap();
        let pol = measure_box_polar_quad(&arcs, Frame::canonical(), 1e-11);
        assert!(close(ep, exact, 1e-9), "endpoint {ep} vs {exact}");
        assert!(close(inc, exact, 1e-8), "incidence {inc} vs {exact}");
        assert!(close(pol, exact, 1e-8), "polar {pol} vs {exact}");
    }

    /// Rotating the frame must not change polar-chart box measures.
    #[test]
    fn polar_measure_frame_rotation_invariance() {
        let arcs = BoxArcs {
            a: BoundaryPoint::from_real(0.2),
            b: BoundaryPoint::from_real(0.8),
            c: BoundaryPoint::from_real(2.0),
            d: BoundaryPoint::from_real(5.0),
        };
        let base = measure_box_polar_quad(&arcs, Frame::canonical(), 1e-11);
        for rot in [0.7, 2.9, 4.1] {
            let f = Frame::new(PlanePoint::I, FRAC_PI_2 + rot);
            let m = measure_box_polar_quad(&arcs, f, 1e-11);
            assert!(close(m, base, 1e-9), "{m} vs {base}");
        }
    }

    /// |d(l,alpha)/d(w,eta)| * (1/2) sin(alpha) = (1/2) cosh(w), by central
    /// finite differences of the chart conversion.
    #[test]
    fn polar_incidence_jacobian_identity() {
        let frame = Frame::canonical();
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let h = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let w = 0.05 + 1.5 * next();
            let eta = TAU * next();
            let probe = |w: f64, eta: f64| -> Option<(f64, f64)> {
                let ps = PolarSample::new(w, eta, frame).ok()?;
                let inc = incidence_from_polar(&ps).ok()?;
                Some((inc.l, inc.alpha))
            };
            let Some((_, alpha)) = probe(w, eta) else { continue };
            if alpha.min(PI - alpha) < 0.05 {
                continue;
            }
            let (Some(pw), Some(mw), Some(pe), Some(me)) =
                (probe(w + h, eta), probe(w - h, eta), probe(w, eta + h), probe(w, eta - h))
            else {
                continue;
            };
            let dl_dw = (pw.0 - mw.0) / (2.0 * h);
            let da_dw = (pw.1 - mw.1) / (2.0 * h);
            let dl_de = (pe.0 - me.0) / (2.0 * h);
            let da_de = (pe.1 - me.1) / (2.0 * h);
            let jac = (dl_dw * da_de - dl_de * da_dw).abs();
            let lhs = jac * 0.5 * alpha.sin();
            let rhs = 0.5 * w.cosh();
            assert!(close(lhs, rhs, 1e-6 * rhs), "w={w} eta={eta}: {lhs} vs {rhs}");
            checked += 1;
        }
    }
}
