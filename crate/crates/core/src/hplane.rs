//! The upper half-plane model and its coordinate systems.
//!
//! Three charts are provided: Cartesian `(x, y)` with metric
//! `ds = sqrt(dx^2 + dy^2)/y`, polar `(r, theta)` about a frame origin with
//! `dVol = sinh r dr dtheta`, and rectangular `(p, q)` along a pair of
//! orthogonal axes with `dVol = cosh q dp dq`.  Orientation-preserving
//! isometries are unit-determinant real 2x2 matrices acting by fractional
//! linear maps.

use core::f64::consts::{PI, TAU};

// in test builds std is linked and f64's inherent methods shadow the trait
#[allow(unused_imports)]
use num_traits::Float;

use crate::geodesics::BoundaryPoint;

/// Errors from chart constructors and conversions.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartError {
    /// A point was outside its chart's domain (e.g. `y <= 0`, `R >= 1`).
    OutOfDomain(&'static str),
    /// A matrix was not (projectively) in SL(2, R).
    NotUnimodular { det: f64 },
}

impl core::fmt::Display for ChartError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChartError::OutOfDomain(what) => write!(f, "out of chart domain: {what}"),
            ChartError::NotUnimodular { det } => write!(f, "matrix determinant {det} != 1"),
        }
    }
}

/// Interior point of the upper half-plane, `y > 0` strictly.
///
/// Boundary points live in [`BoundaryPoint`]; every interior formula here
/// divides by `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Result<Self, ChartError> {
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(ChartError::OutOfDomain("PlanePoint requires finite x, y > 0"));
        }
        Ok(Self { x, y })
    }

    /// The point `i`, origin of the canonical frame.
    pub const I: PlanePoint = PlanePoint { x: 0.0, y: 1.0 };

    /// Euclidean distance in the chart; only meaningful for tolerances.
    #[cfg(test)]
    pub(crate) fn euclid_dist(self, other: PlanePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Point of the Poincare disk in Euclidean polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskPoint {
    /// Euclidean radius, `0 <= bigR < 1`.
    pub big_r: f64,
    /// Euclidean angle in radians.
    pub theta: f64,
}

impl DiskPoint {
    pub fn new(big_r: f64, theta: f64) -> Result<Self, ChartError> {
        if !(0.0..1.0).contains(&big_r) {
            return Err(ChartError::OutOfDomain("DiskPoint requires 0 <= bigR < 1"));
        }
        Ok(Self { big_r, theta })
    }
}

/// Hyperbolic polar coordinates `(r, theta)` relative to a [`Frame`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCoord {
    /// Hyperbolic distance from the frame origin, `r >= 0`.
    pub r: f64,
    /// Angle in `[0, 2*pi)`, counter-clockwise from the frame direction.
    pub theta: f64,
}

impl PolarCoord {
    pub fn new(r: f64, theta: f64) -> Result<Self, ChartError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(ChartError::OutOfDomain("PolarCoord requires r >= 0"));
        }
        Ok(Self { r, theta: normalize_angle(theta) })
    }
}

/// Rectangular coordinates `(p, q)` along two orthogonal axis geodesics.
///
/// In the canonical frame the vertical axis is the imaginary axis
/// (parameter `p`) and the horizontal axis is the geodesic from -1 to 1
/// (parameter `q`): `x = e^p tanh q`, `y = e^p / cosh q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectCoord {
    pub p: f64,
    pub q: f64,
}

/// Orientation-preserving isometry of the half-plane: a real matrix with
/// `ad - bc = 1`, acting by `z -> (az + b)/(cz + d)`.
///
/// Stored with determinant one and the first nonzero entry positive, so that
/// the two matrix lifts of a projective element compare equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Isometry {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, ChartError> {
        let det = a * d - b * c;
        if !det.is_finite() || det <= 0.0 {
            return Err(ChartError::NotUnimodular { det });
        }
        let s = det.sqrt();
        Ok(Self::canonical_sign(a / s, b / s, c / s, d / s))
    }

    fn canonical_sign(a: f64, b: f64, c: f64, d: f64) -> Self {
        let lead = [a, b, c, d].into_iter().find(|v| *v != 0.0).unwrap_or(1.0);
        let s = if lead < 0.0 { -1.0 } else { 1.0 };
        Self { a: s * a, b: s * b, c: s * c, d: s * d }
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// Horizontal translation `z -> z + t`.
    pub fn translation(t: f64) -> Self {
        Self::canonical_sign(1.0, t, 0.0, 1.0)
    }

    /// Dilation `z -> s z` for `s > 0`.
    pub fn scaling(s: f64) -> Self {
        let h = s.sqrt();
        Self::canonical_sign(h, 0.0, 0.0, 1.0 / h)
    }

    /// Elliptic rotation about `i`; the tangent plane at `i` turns by `phi`
    /// counter-clockwise.
    pub fn rotation_about_i(phi: f64) -> Self {
        let (s, c) = (0.5 * phi).sin_cos();
        Self::canonical_sign(c, s, -s, c)
    }

    pub fn compose(self, other: Isometry) -> Isometry {
        Self::canonical_sign(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn inverse(self) -> Isometry {
        Self::canonical_sign(self.d, -self.b, -self.c, self.a)
    }

    /// Mobius action on an interior point.
    pub fn apply(self, z: PlanePoint) -> PlanePoint {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let den = (c * z.x + d) * (c * z.x + d) + (c * z.y) * (c * z.y);
        let x = ((a * z.x + b) * (c * z.x + d) + a * c * z.y * z.y) / den;
        let y = z.y / den;
        PlanePoint { x, y }
    }

    /// Action on the projective boundary.
    pub fn apply_boundary(self, p: BoundaryPoint) -> BoundaryPoint {
        BoundaryPoint::from_projective(self.a * p.a + self.b * p.b, self.c * p.a + self.d * p.b)
    }

}

/// Base data for polar and rectangular charts: an origin and a reference
/// direction (Euclidean tangent angle at the origin; the model is conformal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: PlanePoint,
    pub direction: f64,
}

impl Frame {
    pub fn new(origin: PlanePoint, direction: f64) -> Self {
        Self { origin, direction: normalize_angle(direction) }
    }

    /// `(i, +imaginary axis)`: the frame used throughout unless stated.
    pub fn canonical() -> Self {
        Self { origin: PlanePoint::I, direction: 0.5 * PI }
    }

    /// Isometry carrying this frame onto the canonical one.
    pub fn to_canonical(self) -> Isometry {
        let shift = Isometry::translation(-self.origin.x);
        let scale = Isometry::scaling(1.0 / self.origin.y);
        let move_origin = scale.compose(shift);
        // translation+scaling have real positive derivative: direction survives
        Isometry::rotation_about_i(0.5 * PI - self.direction).compose(move_origin)
    }

    /// Interior point with polar coordinates `(r, theta)` in this frame.
    pub fn polar_point(self, pc: PolarCoord) -> PlanePoint {
        let g_inv = self.to_canonical().inverse();
        // canonical: ray at tangent angle pi/2 + theta from i; in the disk this
        // is the Euclidean ray at that angle, at radius tanh(r/2)
        let psi = 0.5 * PI + pc.theta;
        let big_r = (0.5 * pc.r).tanh();
        let w = DiskPoint { big_r, theta: psi };
        g_inv.apply(cayley_inv(w))
    }

    /// Polar coordinates of `z` in this frame.
    pub fn polar_coord_of(self, z: PlanePoint) -> PolarCoord {
        let g = self.to_canonical();
        let w = cayley(g.apply(z));
        let r = 2.0 * w.big_r.atanh();
        let theta = normalize_angle(w.theta - 0.5 * PI);
        PolarCoord { r, theta }
    }
}

/// Normalize an angle into `[0, 2*pi)`.
pub(crate) fn normalize_angle(a: f64) -> f64 {
    let mut t = a % TAU;
    if t < 0.0 {
        t += TAU;
    }
    // -1e-18 % TAU can round to TAU itself
    if t >= TAU {
        t -= TAU;
    }
    t
}

/// Hyperbolic distance between two interior points.
///
/// Uses `d = 2 asinh(|z1 - z2| / (2 sqrt(y1 y2)))`, which stays fully
/// accurate as the points merge (no cancellation in `cosh d - 1`).
pub fn distance(a: PlanePoint, b: PlanePoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let chord = dx.hypot(dy);
    2.0 * (chord / (2.0 * (a.y * b.y).sqrt())).asinh()
}

/// Cayley transform `w = (iz + 1)/(z + i)`, half-plane onto the unit disk.
pub fn cayley(z: PlanePoint) -> DiskPoint {
    let den = z.x * z.x + (z.y + 1.0) * (z.y + 1.0);
    let u = 2.0 * z.x / den;
    let v = (z.x * z.x + z.y * z.y - 1.0) / den;
    DiskPoint { big_r: u.hypot(v), theta: v.atan2(u) }
}

/// Inverse Cayley transform, disk onto the half-plane.
pub fn cayley_inv(w: DiskPoint) -> PlanePoint {
    let (u, v) = (w.big_r * w.theta.cos(), w.big_r * w.theta.sin());
    let den = u * u + (v - 1.0) * (v - 1.0);
    PlanePoint { x: 2.0 * u / den, y: (1.0 - u * u - v * v) / den }
}

/// Euclidean disk radius -> hyperbolic radius, `tanh(r/2) = R`.
pub fn disk_radius_to_hyperbolic(big_r: f64) -> Result<f64, ChartError> {
    if !(0.0..1.0).contains(&big_r) {
        return Err(ChartError::OutOfDomain("radius conversion requires 0 <= R < 1"));
    }
    Ok(2.0 * big_r.atanh())
}

/// Hyperbolic radius -> Euclidean disk radius.
pub fn hyperbolic_radius_to_disk(r: f64) -> Result<f64, ChartError> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(ChartError::OutOfDomain("radius conversion requires r >= 0"));
    }
    Ok((0.5 * r).tanh())
}

/// Rectangular `(p, q)` to Cartesian, canonical axes.
pub fn rect_to_cartesian(rc: RectCoord) -> PlanePoint {
    let ep = rc.p.exp();
    PlanePoint { x: ep * rc.q.tanh(), y: ep / rc.q.cosh() }
}

/// Cartesian to rectangular; rejects non-interior points.
pub fn cartesian_to_rect(z: PlanePoint) -> Result<RectCoord, ChartError> {
    if z.y <= 0.0 {
        return Err(ChartError::OutOfDomain("rectangular chart requires y > 0"));
    }
    let norm = z.x.hypot(z.y);
    Ok(RectCoord { p: norm.ln(), q: (z.x / norm).atanh() })
}

/// Chart selector for [`volume_density`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Cartesian,
    Polar,
    Rect,
}

/// Density of the volume form in the given chart:
/// `1/y^2 dx dy`, `sinh r dr dtheta`, or `cosh q dp dq`.
pub fn volume_density(chart: Chart, u: f64, v: f64) -> f64 {
    match chart {
        Chart::Cartesian => 1.0 / (v * v),
        Chart::Polar => u.sinh(),
        Chart::Rect => v.cosh(),
    }
}

/// Circumference and area of the hyperbolic disk of radius `r`:
/// `(2 pi sinh r, 2 pi (cosh r - 1))`.
///
/// These satisfy the isoperimetric equality `L^2 = 4 pi A + A^2` exactly.
pub fn disk_geometry(r: f64) -> (f64, f64) {
    (TAU * r.sinh(), TAU * (r.cosh() - 1.0))
}
