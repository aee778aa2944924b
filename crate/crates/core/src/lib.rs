//! Integral geometry of the hyperbolic plane.
//!
//! This crate models the upper half-plane, the Liouville measure on its space
//! of geodesics in three parametrizations (boundary endpoints, incidence
//! position/angle, polar foot coordinates), chords of convex geodesic
//! polygons, and numerical integrators over chord space.  On top of those it
//! builds two-sided computable forms of the chord-length identities:
//! Crofton's formula, the Ambartzumian-Pleijel and Pleijel identities, the
//! isoperimetric identity, Santalo's area-squared formula, the unit-tangent
//! bundle volume, chord-length distributions of ideal triangles and
//! quadrilaterals, and the constant-curvature generalizations.
//!
//! The crate is `no_std` (with `alloc`); everything IO-flavoured lives in the
//! companion CLI crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod domains;
pub mod geodesics;
pub mod hplane;
pub mod identities;
pub mod integrate;
pub mod ktrig;
mod quadrature;

pub use domains::{Chord, GeodesicPolygon, SmoothDomain, Vertex};
pub use geodesics::{BoundaryPoint, Geodesic, OrientedGeodesic};
pub use hplane::{Frame, Isometry, PlanePoint};
pub use integrate::{Estimate, IntegratorConfig};

/// One shared positional tolerance: constructors accept residuals up to this.
pub const GEOM_TOL: f64 = 1e-10;
