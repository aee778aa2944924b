//! Internal adaptive quadrature: dyadic subdivision with a fixed
//! Gauss-Legendre rule per cell, in one and two dimensions.
//!
//! A cell is accepted when its rule value agrees with the sum over its
//! children; otherwise the children are refined with a split tolerance.
//! Singular corners (integrable, like `1/rho` at a shared polygon vertex)
//! drive a single chain of cells to the depth cap, where the residual is
//! accepted into the error estimate.

#[allow(unused_imports)]
use num_traits::Float;

/// Gauss-Legendre nodes on `[-1, 1]`, order 16.
const GL_NODES: [f64; 16] = [
    -0.9894009349916499,
    -0.9445750230732326,
    -0.8656312023878318,
    -0.755404408355003,
    -0.6178762444026438,
    -0.45801677765722737,
    -0.2816035507792589,
    -0.09501250983763745,
    0.09501250983763745,
    0.2816035507792589,
    0.45801677765722737,
    0.6178762444026438,
    0.755404408355003,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];

const GL_WEIGHTS: [f64; 16] = [
    0.027152459411754037,
    0.062253523938647706,
    0.09515851168249259,
    0.12462897125553403,
    0.14959598881657676,
    0.16915651939500262,
    0.1826034150449236,
    0.18945061045506859,
    0.18945061045506859,
    0.1826034150449236,
    0.16915651939500262,
    0.14959598881657676,
    0.12462897125553403,
    0.09515851168249259,
    0.062253523938647706,
    0.027152459411754037,
];

pub(crate) const MAX_DEPTH_1D: u32 = 48;

#[derive(Debug, Clone, Copy)]
pub(crate) struct QuadResult {
    pub value: f64,
    /// Sum of the accepted parent/child discrepancies.
    pub err: f64,
    /// Worst discrepancy left at the depth cap; zero when fully converged.
    pub unresolved: f64,
    pub evals: u64,
}

pub(crate) fn gauss_1d<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

fn rec_1d<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    out: &mut QuadResult,
) {
    let mid = 0.5 * (a + b);
    let left = gauss_1d(f, a, mid);
    let right = gauss_1d(f, mid, b);
    out.evals += 32;
    let diff = (left + right - whole).abs();
    if diff <= tol || depth == 0 {
        out.value += left + right;
        out.err += diff;
        if depth == 0 && diff > tol {
            out.unresolved = out.unresolved.max(diff);
        }
        return;
    }
    rec_1d(f, a, mid, left, 0.5 * tol, depth - 1, out);
    rec_1d(f, mid, b, right, 0.5 * tol, depth - 1, out);
}

/// Adaptive integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn adaptive_1d<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> QuadResult {
    let mut out = QuadResult { value: 0.0, err: 0.0, unresolved: 0.0, evals: 16 };
    if a == b {
        return out;
    }
    let whole = gauss_1d(f, a, b);
    rec_1d(f, a, b, whole, tol, max_depth, &mut out);
    out
}

/// Adaptive integral over a semi-infinite interval `[a, inf)` via the
/// substitution `x = a + e^t - 1` after locating an effective upper end by
/// decay of the integrand.
pub(crate) fn adaptive_semi_infinite<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    tol: f64,
) -> Result<QuadResult, NonDecay> {
    // find T with |f| * jacobian negligible at the far end
    let g = |t: f64| {
        let e = t.exp();
        f(a + e - 1.0) * e
    };
    let mut hi = 1.0;
    let mut grew = 0;
    while grew < 60 {
        let tail = g(hi).abs() + g(hi + 0.5).abs();
        if tail < 1e-3 * tol {
            break;
        }
        hi += 0.5;
        grew += 1;
    }
    if grew == 60 {
        return Err(NonDecay);
    }
    Ok(adaptive_1d(&g, 0.0, hi + 1.0, tol, MAX_DEPTH_1D))
}

/// Reported when an integrand fails to decay at an unbounded chart end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NonDecay;

pub(crate) fn gauss_2d<F: Fn(f64, f64) -> f64 + ?Sized>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
) -> f64 {
    let xm = 0.5 * (x0 + x1);
    let xh = 0.5 * (x1 - x0);
    let ym = 0.5 * (y0 + y1);
    let yh = 0.5 * (y1 - y0);
    let mut acc = 0.0;
    for (xi, wx) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let x = xm + xh * xi;
        let mut row = 0.0;
        for (yi, wy) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            row += wy * f(x, ym + yh * yi);
        }
        acc += wx * row;
    }
    acc * xh * yh
}

/// Evaluation budget per 2D integral; generous for the identity integrands,
/// and a hard stop for discontinuous ones.
const BUDGET_2D: u64 = 3_000_000;

struct Cell {
    /// Current parent-vs-children discrepancy (the refinement priority).
    diff: f64,
    /// Insertion counter, breaking ties deterministically.
    stamp: u64,
    rect: (f64, f64, f64, f64),
    /// Sum of the four child estimates (the accepted value if not refined).
    value: f64,
    /// The four child estimates, reused as their `whole` when refining.
    child_vals: [f64; 4],
    depth: u32,
}

fn quarters(rect: (f64, f64, f64, f64)) -> [(f64, f64, f64, f64); 4] {
    let (a, b, c, d) = rect;
    let xm = 0.5 * (a + b);
    let ym = 0.5 * (c + d);
    [(a, xm, c, ym), (xm, b, c, ym), (a, xm, ym, d), (xm, b, ym, d)]
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.diff == other.diff && self.stamp == other.stamp
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.diff
            .total_cmp(&other.diff)
            .then_with(|| other.stamp.cmp(&self.stamp))
    }
}

/// Adaptive tensor-Gauss integral over a rectangle to absolute `tol`.
///
/// Globally adaptive: the worst cell (largest parent-vs-children
/// discrepancy) is refined first, so integrable corner singularities and
/// indicator boundaries are handled without exhausting a tolerance split.
pub(crate) fn adaptive_2d<F: Fn(f64, f64) -> f64 + ?Sized>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
    max_depth: u32,
) -> QuadResult {
    use alloc::collections::BinaryHeap;
    let mut out = QuadResult { value: 0.0, err: 0.0, unresolved: 0.0, evals: 0 };
    if x0 == x1 || y0 == y1 {
        return out;
    }
    let mut stamp = 0u64;
    let mut make_cell = |rect: (f64, f64, f64, f64), whole: f64, depth: u32, evals: &mut u64| {
        let sub = quarters(rect);
        let child_vals = [
            gauss_2d(f, sub[0].0, sub[0].1, sub[0].2, sub[0].3),
            gauss_2d(f, sub[1].0, sub[1].1, sub[1].2, sub[1].3),
            gauss_2d(f, sub[2].0, sub[2].1, sub[2].2, sub[2].3),
            gauss_2d(f, sub[3].0, sub[3].1, sub[3].2, sub[3].3),
        ];
        *evals += 4 * 256;
        stamp += 1;
        let value: f64 = child_vals.iter().sum();
        Cell { diff: (value - whole).abs(), stamp, rect, value, child_vals, depth }
    };
    let whole = gauss_2d(f, x0, x1, y0, y1);
    out.evals += 256;
    let mut heap: BinaryHeap<Cell> = BinaryHeap::new();
    let mut settled_value = 0.0;
    let mut settled_err = 0.0;
    let mut capped_err = 0.0;
    let mut pending_diff = 0.0;
    let root = make_cell((x0, x1, y0, y1), whole, 0, &mut out.evals);
    pending_diff += root.diff;
    heap.push(root);
    while pending_diff > tol.max(1e-300) && out.evals < BUDGET_2D {
        let Some(cell) = heap.pop() else { break };
        pending_diff -= cell.diff;
        if cell.depth >= max_depth || cell.diff == 0.0 {
            settled_value += cell.value;
            settled_err += cell.diff;
            capped_err += cell.diff;
            continue;
        }
        for (rect, whole) in quarters(cell.rect).into_iter().zip(cell.child_vals) {
            let child = make_cell(rect, whole, cell.depth + 1, &mut out.evals);
            pending_diff += child.diff;
            heap.push(child);
        }
    }
    let leftover = pending_diff;
    for cell in heap {
        settled_value += cell.value;
        settled_err += cell.diff;
    }
    out.value = settled_value;
    out.err = settled_err;
    // depth-capped residue always counts as unconverged; pending residue
    // only when the budget stopped the refinement early
    out.unresolved = if leftover > tol { capped_err.max(leftover) } else { capped_err };
    out
}
