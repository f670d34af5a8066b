//! Box-constrained convex quadratic minimisation.
//!
//! Minimises `F(y) = c + 2 b^T y + y^T Q y` over `lower <= y <= upper` with
//! `Q` symmetric positive semidefinite. The workhorse is accelerated
//! projected gradient (FISTA with function-value restarts); every few
//! iterations an active-set step solves the reduced linear system on the
//! currently free coordinates, which finishes the job exactly once the
//! active set is identified. Eight deterministic starting points guard
//! against stalling on a boundary face.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Iteration cap per start.
pub const MAX_ITERATIONS: usize = 100_000;

/// Projected-gradient tolerance, relative to `max(1, ||b||)` of the normalized problem.
pub const PG_TOL: f64 = 1e-9;

const POLISH_EVERY: usize = 25;
const START_SEED: u64 = 0x5eed_0b0c;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQuadratic {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub y: DVector<f64>,
    /// `F(y)`, clamped at zero.
    pub value: f64,
    pub converged: bool,
    /// Iterations summed over all starts.
    pub iterations: usize,
}

impl BoxQuadratic {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>, c: f64, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let d = b.len();
        if q.nrows() != d || q.ncols() != d || lower.len() != d || upper.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: q.nrows() });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box bounds must satisfy lower <= upper".into()));
        }
        Ok(Self { q, b, c, lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, y: &DVector<f64>) -> f64 {
        self.c + 2.0 * self.b.dot(y) + y.dot(&(&self.q * y))
    }

    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        (&self.b + &self.q * y) * 2.0
    }

    fn project(&self, y: &mut DVector<f64>) {
        for i in 0..y.len() {
            y[i] = y[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Gradient with components that push against an active bound zeroed.
    pub fn projected_gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut g = self.gradient(y);
        for i in 0..g.len() {
            if (y[i] <= self.lower[i] && g[i] > 0.0) || (y[i] >= self.upper[i] && g[i] < 0.0) {
                g[i] = 0.0;
            }
        }
        g
    }

    fn scaled(&self, s: f64) -> Self {
        Self { q: &self.q / s, b: &self.b / s, c: self.c / s, lower: self.lower.clone(), upper: self.upper.clone() }
    }
}

/// Minimiser of `F` over the box; see the module docs.
pub fn minimize_box(problem: &BoxQuadratic) -> QpSolution {
    let d = problem.dim();
    let scale = problem.q.amax().max(problem.b.amax()).max(problem.c.abs());
    if d == 0 || scale == 0.0 || !scale.is_finite() {
        let mut y = (&problem.lower + &problem.upper) * 0.5;
        problem.project(&mut y);
        let value = problem.value(&y).max(0.0);
        return QpSolution { y, value, converged: scale.is_finite(), iterations: 0 };
    }
    let p = problem.scaled(scale);
    let tol = PG_TOL * p.b.norm().max(1.0);
    let eig = p.q.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lipschitz = 2.0 * lmax;

    let mut best: Option<(DVector<f64>, f64, bool)> = None;
    let mut iterations = 0;
    for start in starting_points(&p, &eig) {
        let (y, its, ok) = if lipschitz > 0.0 {
            fista(&p, start, lipschitz, tol)
        } else {
            // linear objective: the minimiser is a vertex picked by sign(b)
            let y = DVector::from_fn(d, |i, _| if p.b[i] > 0.0 { p.lower[i] } else if p.b[i] < 0.0 { p.upper[i] } else { start[i] });
            (y, 0, true)
        };
        iterations += its;
        let v = p.value(&y);
        if best.as_ref().map_or(true, |(_, bv, _)| v < *bv) {
            best = Some((y, v, ok));
        }
    }
    let (y, v, converged) = best.expect("at least one start");
    QpSolution { y, value: (v * scale).max(0.0), converged, iterations }
}

fn starting_points(p: &BoxQuadratic, eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>) -> Vec<DVector<f64>> {
    let d = p.dim();
    let center = (&p.lower + &p.upper) * 0.5;
    let corner = |pick: &dyn Fn(usize) -> bool| DVector::from_fn(d, |i, _| if pick(i) { p.upper[i] } else { p.lower[i] });
    // unconstrained minimiser by eigen pseudo-inverse, then clipped
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut coords = eig.eigenvectors.transpose() * &p.b;
    for (k, l) in eig.eigenvalues.iter().enumerate() {
        coords[k] = if *l > 1e-14 * lmax { -coords[k] / l } else { 0.0 };
    }
    let mut unconstrained = &eig.eigenvectors * coords;
    p.project(&mut unconstrained);

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut random = || DVector::from_fn(d, |i, _| rng.gen_range(p.lower[i]..=p.upper[i]));
    vec![
        center,
        unconstrained,
        corner(&|_| true),
        corner(&|_| false),
        corner(&|i| p.b[i] < 0.0),
        corner(&|i| i % 2 == 0),
        random(),
        random(),
    ]
}

/// FISTA with restarts and periodic active-set polishing.
fn fista(p: &BoxQuadratic, start: DVector<f64>, lipschitz: f64, tol: f64) -> (DVector<f64>, usize, bool) {
    let mut x = start;
    p.project(&mut x);
    let mut fx = p.value(&x);
    let mut z = x.clone();
    let mut t = 1.0f64;
    for it in 0..MAX_ITERATIONS {
        if p.projected_gradient(&x).norm() <= tol {
            return (x, it, true);
        }
        if it % POLISH_EVERY == 0 {
            if let Some((y, fy)) = polish(p, &x, fx) {
                x = y;
                fx = fy;
                z = x.clone();
                t = 1.0;
                continue;
            }
        }
        let mut next = &z - p.gradient(&z) / lipschitz;
        p.project(&mut next);
        let fnext = p.value(&next);
        if fnext > fx {
            // restart momentum from the last accepted iterate
            z = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        fx = fnext;
        t = t_next;
    }
    let ok = p.projected_gradient(&x).norm() <= tol;
    (x, MAX_ITERATIONS, ok)
}

/// Primal active-set steps. Coordinates held at a bound by the gradient are
/// fixed; on the rest we move towards the minimiser of the reduced quadratic
/// (or along a zero-curvature descent direction when the reduced problem is
/// unbounded below), stopping at the first bound hit. `F` never increases.
fn polish(p: &BoxQuadratic, x: &DVector<f64>, fx: f64) -> Option<(DVector<f64>, f64)> {
    let d = p.dim();
    let mut cur = x.clone();
    let mut fcur = fx;
    let mut improved = false;
    for _ in 0..4 * (d + 1) {
        let g = p.gradient(&cur);
        let free: Vec<usize> = (0..d)
            .filter(|&i| !((cur[i] <= p.lower[i] && g[i] >= 0.0) || (cur[i] >= p.upper[i] && g[i] <= 0.0)))
            .collect();
        if free.is_empty() {
            break;
        }
        let nf = free.len();
        let qff = DMatrix::from_fn(nf, nf, |a, b| p.q[(free[a], free[b])]);
        let half_g = DVector::from_fn(nf, |a, _| 0.5 * g[free[a]]);
        let eig = qff.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let coords = eig.eigenvectors.transpose() * &half_g;
        let null = |l: f64| l <= 1e-12 * lmax.max(1e-300);
        let null_part: f64 = coords.iter().zip(eig.eigenvalues.iter()).filter(|(_, &l)| null(l)).map(|(c, _)| c * c).sum();
        let (dir, full_step) = if null_part.sqrt() > 1e-12 * half_g.norm().max(1e-300) {
            // flat direction with strictly negative slope: go to the boundary
            let c = DVector::from_fn(nf, |k, _| if null(eig.eigenvalues[k]) { -coords[k] } else { 0.0 });
            (&eig.eigenvectors * c, f64::INFINITY)
        } else {
            let c = DVector::from_fn(nf, |k, _| if null(eig.eigenvalues[k]) { 0.0 } else { -coords[k] / eig.eigenvalues[k] });
            (&eig.eigenvectors * c, 1.0)
        };
        let mut t = full_step;
        for (a, &i) in free.iter().enumerate() {
            if dir[a] > 0.0 {
                t = t.min((p.upper[i] - cur[i]) / dir[a]);
            } else if dir[a] < 0.0 {
                t = t.min((p.lower[i] - cur[i]) / dir[a]);
            }
        }
        if !t.is_finite() || t <= 0.0 {
            break;
        }
        let mut cand = cur.clone();
        for (a, &i) in free.iter().enumerate() {
            cand[i] += t * dir[a];
        }
        p.project(&mut cand);
        let fc = p.value(&cand);
        if !(fc <= fcur) || cand == cur {
            break;
        }
        cur = cand;
        fcur = fc;
        improved = true;
    }
    improved.then_some((cur, fcur))
}
