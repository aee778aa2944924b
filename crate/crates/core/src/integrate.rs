//! Integration over the chords of a convex polygon.
//!
//! Everything is computed in the edge-pair chart: a chord meeting edges
//! `j > k` is the point `(l_j, l_k)` of the parameter rectangle, the
//! Liouville density there is `sin(a_j) sin(a_k) / (2 sinh rho)`, and the
//! identity right-hand sides are bounded in this chart.  Monte Carlo is
//! seeded and stratified per edge pair with per-shard counter-derived
//! streams, so results are a pure function of the configuration.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_core::RngCore;

use crate::domains::{Chord, GeodesicPolygon, PolygonError};
use crate::geodesics::GeodesicError;
use crate::quadrature;

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrateError {
    /// The integrand returned a non-finite value away from the degenerate
    /// strata; carries the offending pair and parameters.
    NonFiniteIntegrand { pair: (usize, usize), l1: f64, l2: f64 },
    /// Adaptive subdivision hit the depth cap with residual above tolerance.
    NotConverged { unresolved: f64, tolerance: f64 },
    /// An unbounded-chart integrand failed to decay at the far end.
    NonDecay,
    /// The domain does not support the requested integral.
    Domain(&'static str),
    Polygon(PolygonError),
}

impl From<PolygonError> for IntegrateError {
    fn from(e: PolygonError) -> Self {
        IntegrateError::Polygon(e)
    }
}

impl core::fmt::Display for IntegrateError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            IntegrateError::NonFiniteIntegrand { pair, l1, l2 } => {
                write!(f, "non-finite integrand on pair {pair:?} at ({l1}, {l2})")
            }
            IntegrateError::NotConverged { unresolved, tolerance } => {
                write!(f, "quadrature left residual {unresolved:e} above tolerance {tolerance:e}")
            }
            IntegrateError::NonDecay => write!(f, "integrand does not decay at the unbounded end"),
            IntegrateError::Domain(msg) => write!(f, "{msg}"),
            IntegrateError::Polygon(e) => write!(f, "{e}"),
        }
    }
}

/// How an [`Estimate`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mc,
    Quad,
}

/// A numerical integral value with its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Monte Carlo standard error, or the accumulated subdivision residual
    /// for quadrature.
    pub std_error: f64,
    /// Samples drawn (MC) or integrand evaluations spent (quad).
    pub n: u64,
    pub method: Method,
}

/// Configuration shared by both integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub seed: u64,
    /// Total Monte Carlo samples across all edge pairs.
    pub samples: u64,
    /// Independent shards used for the standard error.
    pub shards: u32,
    /// Absolute tolerance for adaptive quadrature.
    pub tolerance: f64,
    /// Dyadic subdivision depth cap.
    pub max_depth: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { seed: 0, samples: 1 << 20, shards: 16, tolerance: 1e-9, max_depth: 40 }
    }
}

impl IntegratorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }
}

/// A chord drawn by the sampler, with its importance weight
/// (density times chart volume element).
#[derive(Debug, Clone)]
pub struct WeightedChordSample {
    pub chord: Chord,
    pub weight: f64,
    pub pair: (usize, usize),
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic stream for `(seed, pair, shard)`; independent of the order
/// in which shards are executed.
fn stream(seed: u64, pair: u64, shard: u64) -> ChaCha12Rng {
    let w0 = splitmix(seed);
    let w1 = splitmix(w0 ^ splitmix(pair.wrapping_add(0x517c_c1b7_2722_0a95)));
    let w2 = splitmix(w1 ^ splitmix(shard.wrapping_add(0x2545_f491_4f6c_dd1d)));
    let w3 = splitmix(w0 ^ w1 ^ w2);
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&w0.to_le_bytes());
    key[8..16].copy_from_slice(&w1.to_le_bytes());
    key[16..24].copy_from_slice(&w2.to_le_bytes());
    key[24..32].copy_from_slice(&w3.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

/// Uniform draw in `[0, 1)` from the top 53 bits.
pub(crate) fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Edge pairs `(j, k)`, `j > k`, with the shared-vertex corner for adjacent
/// pairs expressed in each edge's parameter.
struct PairInfo {
    j: usize,
    k: usize,
    /// Corner `(l_j, l_k)` where the chord length vanishes, if adjacent.
    corner: Option<(f64, f64)>,
}

fn edge_pairs(poly: &GeodesicPolygon) -> Vec<PairInfo> {
    let n = poly.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for j in 1..n {
        for k in 0..j {
            let corner = if j == k + 1 {
                // shared vertex: end of edge k = start of edge j
                Some((poly.edge(j).lo, poly.edge(k).hi))
            } else if k == 0 && j == n - 1 {
                // wrap: end of the last edge = start of edge 0
                Some((poly.edge(j).hi, poly.edge(k).lo))
            } else {
                None
            };
            pairs.push(PairInfo { j, k, corner });
        }
    }
    pairs
}

fn require_compact(poly: &GeodesicPolygon) -> Result<(), IntegrateError> {
    if poly.is_compact() {
        Ok(())
    } else {
        Err(IntegrateError::Domain("integration needs a compact polygon"))
    }
}

/// Monte Carlo integral of `f` against the Liouville measure over the
/// chords of a compact convex polygon.
///
/// Adjacent edge pairs are sampled through the corner map
/// `l = L s^2` toward the shared vertex, which keeps the `1/rho` density
/// weight bounded and the estimator variance finite.
pub fn mc_integrate<F: Fn(&Chord) -> f64>(
    poly: &GeodesicPolygon,
    f: F,
    cfg: &IntegratorConfig,
) -> Result<Estimate, IntegrateError> {
    mc_impl(poly, f, cfg, true)
}

/// Monte Carlo integral of `f` against plain `dl_j dl_k` on the edge-pair
/// rectangles (no Liouville density); the chart where the identity
/// right-hand sides are bounded.
pub fn mc_integrate_raw<F: Fn(&Chord) -> f64>(
    poly: &GeodesicPolygon,
    f: F,
    cfg: &IntegratorConfig,
) -> Result<Estimate, IntegrateError> {
    mc_impl(poly, f, cfg, false)
}

fn mc_impl<F: Fn(&Chord) -> f64>(
    poly: &GeodesicPolygon,
    f: F,
    cfg: &IntegratorConfig,
    with_density: bool,
) -> Result<Estimate, IntegrateError> {
    require_compact(poly)?;
    let pairs = edge_pairs(poly);
    let shards = cfg.shards.max(2) as u64;
    let per = (cfg.samples / (pairs.len() as u64 * shards)).max(1);
    let mut shard_totals = alloc::vec![0.0f64; shards as usize];
    let mut n_used = 0u64;
    for (pi, pair) in pairs.iter().enumerate() {
        let ej = poly.edge(pair.j);
        let ek = poly.edge(pair.k);
        let (lj0, lj1) = (ej.lo, ej.hi);
        let (lk0, lk1) = (ek.lo, ek.hi);
        let (len_j, len_k) = (lj1 - lj0, lk1 - lk0);
        for s in 0..shards {
            let mut rng = stream(cfg.seed, pi as u64, s);
            let mut acc = 0.0;
            for _ in 0..per {
                let (u, v) = (unit_f64(&mut rng), unit_f64(&mut rng));
                let (lj, lk, jac) = match (with_density, pair.corner) {
                    (true, Some((cj, ck))) => {
                        // quadratic pull toward the shared corner
                        let sj = if cj == lj0 { lj0 + len_j * u * u } else { lj1 - len_j * u * u };
                        let sk = if ck == lk0 { lk0 + len_k * v * v } else { lk1 - len_k * v * v };
                        (sj, sk, 4.0 * len_j * len_k * u * v)
                    }
                    _ => (lj0 + len_j * u, lk0 + len_k * v, len_j * len_k),
                };
                match poly.chord_from_edge_points(pair.j, lj, pair.k, lk) {
                    Ok(chord) => {
                        let density = if with_density { chord.pair_density() } else { 1.0 };
                        let val = f(&chord) * density * jac;
                        if !val.is_finite() {
                            return Err(IntegrateError::NonFiniteIntegrand {
                                pair: (pair.j, pair.k),
                                l1: lj,
                                l2: lk,
                            });
                        }
                        acc += val;
                    }
                    Err(PolygonError::Geodesic(GeodesicError::Degenerate(_)))
                    | Err(PolygonError::Geodesic(GeodesicError::CoincidentPoints)) => {
                        // measure-zero stratum
                    }
                    Err(e) => return Err(e.into()),
                }
                n_used += 1;
            }
            shard_totals[s as usize] += acc / per as f64;
        }
    }
    let mean = shard_totals.iter().sum::<f64>() / shards as f64;
    let var = shard_totals.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>()
        / (shards as f64 * (shards as f64 - 1.0));
    Ok(Estimate { value: mean, std_error: var.sqrt(), n: n_used, method: Method::Mc })
}

/// Deterministic integral of `f` against the Liouville measure by adaptive
/// tensor-Gauss quadrature per edge pair, refining toward the shared-vertex
/// corners where the density is singular (but integrable).
pub fn quad_integrate<F: Fn(&Chord) -> f64>(
    poly: &GeodesicPolygon,
    f: F,
    cfg: &IntegratorConfig,
) -> Result<Estimate, IntegrateError> {
    quad_impl(poly, f, cfg, true)
}

/// Deterministic integral of `f` against `dl_j dl_k` on the edge-pair
/// rectangles.
pub fn quad_integrate_raw<F: Fn(&Chord) -> f64>(
    poly: &GeodesicPolygon,
    f: F,
    cfg: &IntegratorConfig,
) -> Result<Estimate, IntegrateError> {
    quad_impl(poly, f, cfg, false)
}

fn quad_impl<F: Fn(&Chord) -> f64>(
    poly: &GeodesicPolygon,
    f: F,
    cfg: &IntegratorConfig,
    with_density: bool,
) -> Result<Estimate, IntegrateError> {
    require_compact(poly)?;
    let pairs = edge_pairs(poly);
    let tol_pair = cfg.tolerance / pairs.len() as f64;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut unresolved = 0.0f64;
    let mut evals = 0u64;
    for pair in &pairs {
        let ej = poly.edge(pair.j);
        let ek = poly.edge(pair.k);
        let kernel = |lj: f64, lk: f64| -> f64 {
            match poly.chord_from_edge_points(pair.j, lj, pair.k, lk) {
                Ok(chord) => {
                    let density = if with_density { chord.pair_density() } else { 1.0 };
                    f(&chord) * density
                }
                Err(_) => 0.0,
            }
        };
        let r = quadrature::adaptive_2d(&kernel, ej.lo, ej.hi, ek.lo, ek.hi, tol_pair, cfg.max_depth);
        value += r.value;
        err += r.err;
        unresolved = unresolved.max(r.unresolved);
        evals += r.evals;
    }
    if unresolved > cfg.tolerance {
        return Err(IntegrateError::NotConverged { unresolved, tolerance: cfg.tolerance });
    }
    Ok(Estimate { value, std_error: err, n: evals, method: Method::Quad })
}

/// One end of an integration interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    NegInfinite,
    Infinite,
}

/// Deterministic integral of `g(u, v)` over a product of possibly
/// unbounded intervals, used for endpoint-chart integrals over ideal edges.
///
/// Unbounded ends are mapped by `u = a +- (e^t - 1)`; the substituted
/// integrand must decay, otherwise [`IntegrateError::NonDecay`] is returned.
pub fn integrate_unbounded<G: Fn(f64, f64) -> f64>(
    u: (Bound, Bound),
    v: (Bound, Bound),
    g: G,
    cfg: &IntegratorConfig,
) -> Result<Estimate, IntegrateError> {
    let (ut, u0, u1) = transform(u)?;
    let (vt, v0, v1) = transform(v)?;
    // probe decay on transformed edges that came from unbounded ends
    let h = |s: f64, t: f64| {
        let (uu, ju) = ut(s);
        let (vv, jv) = vt(t);
        g(uu, vv) * ju * jv
    };
    for (unbounded, edge) in [
        (matches!(u.0, Bound::NegInfinite) || matches!(u.1, Bound::Infinite), true),
        (matches!(v.0, Bound::NegInfinite) || matches!(v.1, Bound::Infinite), false),
    ] {
        if unbounded {
            let mut decays = false;
            let probe = if edge { |a: f64, b: f64, h: &dyn Fn(f64, f64) -> f64| h(a, b) } else { |a: f64, b: f64, h: &dyn Fn(f64, f64) -> f64| h(b, a) };
            let (far0, far1) = if edge { (u0, u1) } else { (v0, v1) };
            let far = far1;
            let mids = [0.2, 0.5, 0.8];
            let tailmax = mids
                .iter()
                .map(|m| {
                    let other = if edge { v0 + m * (v1 - v0) } else { u0 + m * (u1 - u0) };
                    probe(far, other, &h).abs().max(probe(far0 + 0.97 * (far - far0), other, &h).abs())
                })
                .fold(0.0f64, f64::max);
            if tailmax <= 1e-2 * cfg.tolerance.max(1e-14) {
                decays = true;
            }
            if !decays {
                return Err(IntegrateError::NonDecay);
            }
        }
    }
    let r = quadrature::adaptive_2d(&h, u0, u1, v0, v1, cfg.tolerance, cfg.max_depth);
    if r.unresolved > cfg.tolerance {
        return Err(IntegrateError::NotConverged { unresolved: r.unresolved, tolerance: cfg.tolerance });
    }
    Ok(Estimate { value: r.value, std_error: r.err, n: r.evals, method: Method::Quad })
}

type Map1 = alloc::boxed::Box<dyn Fn(f64) -> (f64, f64)>;

/// Map an interval onto a bounded one; returns `(map, lo, hi)` where `map`
/// yields the original coordinate and the Jacobian.
fn transform(b: (Bound, Bound)) -> Result<(Map1, f64, f64), IntegrateError> {
    // effective extent for the exponential stretch; decay is verified later
    const T: f64 = 41.0;
    match b {
        (Bound::Finite(a), Bound::Finite(c)) => {
            Ok((alloc::boxed::Box::new(move |s| (s, 1.0)), a, c))
        }
        (Bound::Finite(a), Bound::Infinite) => Ok((
            alloc::boxed::Box::new(move |t: f64| (a + t.exp() - 1.0, t.exp())),
            0.0,
            T,
        )),
        (Bound::NegInfinite, Bound::Finite(c)) => Ok((
            alloc::boxed::Box::new(move |t: f64| (c - (t.exp() - 1.0), t.exp())),
            0.0,
            T,
        )),
        _ => Err(IntegrateError::Domain("interval must have at least one finite end")),
    }
}
