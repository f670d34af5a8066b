//! Local-average measurements and the measurement space `W`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::{DualVector, FemVector, LevelSpace, StructuredMesh};
use crate::ortho::OrthonormalFamily;

/// RNG stream used for box placement.
pub const BOX_STREAM: u64 = 2;

/// Pivot threshold, relative to `||omega_i||`, below which a representer is
/// considered dependent.
pub const DEPENDENCE_TOL: f64 = 1e-12;

/// Singular values of the cross-Gramian below this count as zero.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Square `[x0, x0 + width] x [y0, y0 + width]` inside the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBox {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
}

impl MeasurementBox {
    pub fn new(x0: f64, y0: f64, width: f64) -> Result<Self> {
        let inside = |t: f64| t >= 0.0 && t + width <= 1.0;
        if !(width > 0.0 && width < 1.0) || !inside(x0) || !inside(y0) {
            return Err(Error::InvalidArgument(format!(
                "measurement box ({x0}, {y0}) of width {width} is not inside the unit square"
            )));
        }
        Ok(Self { x0, y0, width })
    }

    pub fn area(&self) -> f64 {
        self.width * self.width
    }

    /// `ell(phi_i) = |B|^-1 int_B phi_i` for every interior hat of `mesh`.
    ///
    /// Each triangle is clipped against the box; P1 functions are linear on
    /// the clipped polygon, so its area times the centroid value is exact.
    pub fn functional(&self, mesh: &StructuredMesh) -> DualVector {
        let n = mesh.cells_per_side();
        let h = mesh.width();
        let (x1, y1) = (self.x0 + self.width, self.y0 + self.width);
        let cell_range = |a: f64, b: f64| {
            let lo = ((a / h).floor() as usize).min(n - 1);
            let hi = ((b / h).ceil() as usize).clamp(lo + 1, n);
            lo..hi
        };
        let mut out = vec![0.0; mesh.interior_count()];
        let inv_area = self.area().recip();
        for j in cell_range(self.y0, y1) {
            for i in cell_range(self.x0, x1) {
                for tri in StructuredMesh::square_triangles(i, j) {
                    let p = tri.map(|v| mesh.coordinates(v));
                    let poly = clip_to_box(&p, [self.x0, self.y0, x1, y1]);
                    let Some((area, centroid)) = polygon_area_centroid(&poly) else { continue };
                    let bary = barycentric(&p, centroid);
                    for (a, &v) in tri.iter().enumerate() {
                        if let Some(k) = mesh.interior_index(v) {
                            out[k] += inv_area * area * bary[a];
                        }
                    }
                }
            }
        }
        DualVector::new(mesh.level(), out).expect("finite clipped integrals")
    }
}

type Point = [f64; 2];

/// Sutherland-Hodgman clipping of a convex polygon against `[xmin, ymin, xmax, ymax]`.
fn clip_to_box(tri: &[Point; 3], rect: [f64; 4]) -> Vec<Point> {
    let mut poly: Vec<Point> = tri.to_vec();
    // (axis, bound, keep >= bound)
    let planes = [(0, rect[0], true), (0, rect[2], false), (1, rect[1], true), (1, rect[3], false)];
    for (axis, bound, keep_above) in planes {
        if poly.is_empty() {
            break;
        }
        let inside = |p: &Point| if keep_above { p[axis] >= bound } else { p[axis] <= bound };
        let mut next = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let cur = poly[k];
            let prev = poly[(k + poly.len() - 1) % poly.len()];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (bound - prev[axis]) / (cur[axis] - prev[axis]);
                let mut x = [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])];
                x[axis] = bound;
                next.push(x);
            }
            if ci {
                next.push(cur);
            }
        }
        poly = next;
    }
    poly
}

fn polygon_area_centroid(poly: &[Point]) -> Option<(f64, Point)> {
    if poly.len() < 3 {
        return None;
    }
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    if a2.abs() <= 1e-300 {
        return None;
    }
    Some((0.5 * a2.abs(), [cx / (3.0 * a2), cy / (3.0 * a2)]))
}

fn barycentric(tri: &[Point; 3], x: Point) -> [f64; 3] {
    let [a, b, c] = *tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Lower-left corners uniform in `[0, 1 - width]^2`.
pub fn random_boxes(m: usize, width: f64, seed: u64) -> Result<Vec<MeasurementBox>> {
    if !(width > 0.0 && width < 1.0) {
        return Err(Error::InvalidArgument(format!("measurement width {width} must lie in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BOX_STREAM);
    (0..m)
        .map(|_| {
            let x0 = rng.gen_range(0.0..=1.0 - width);
            let y0 = rng.gen_range(0.0..=1.0 - width);
            MeasurementBox::new(x0, y0, width)
        })
        .collect()
}

/// `W = span(omega_1..omega_m)` on the fine level, with an orthonormal basis.
#[derive(Debug, Clone)]
pub struct MeasurementSpace {
    level: u32,
    boxes: Vec<MeasurementBox>,
    functionals: Vec<DualVector>,
    representers: Vec<FemVector>,
    basis: OrthonormalFamily,
}

impl MeasurementSpace {
    pub fn from_boxes(fine: &LevelSpace, boxes: Vec<MeasurementBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidArgument("at least one measurement is required".into()));
        }
        let functionals: Vec<DualVector> = boxes.iter().map(|b| b.functional(fine.mesh())).collect();
        let representers = functionals.iter().map(|l| fine.riesz_lift(l)).collect::<Result<Vec<_>>>()?;
        let mut basis = OrthonormalFamily::default();
        for (index, omega) in representers.iter().enumerate() {
            if !basis.try_push(fine, omega.clone(), DEPENDENCE_TOL)? {
                return Err(Error::DependentRepresenters { index });
            }
        }
        Ok(Self { level: fine.level(), boxes, functionals, representers, basis })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn m(&self) -> usize {
        self.boxes.len()
    }

    pub fn boxes(&self) -> &[MeasurementBox] {
        &self.boxes
    }

    /// `ell_1..ell_m` as functionals on the fine level.
    pub fn functionals(&self) -> &[DualVector] {
        &self.functionals
    }

    /// Riesz representers `omega_i`.
    pub fn representers(&self) -> &[FemVector] {
        &self.representers
    }

    /// H^1_0-orthonormal basis `q_1..q_m` of `W`.
    pub fn basis(&self) -> &[FemVector] {
        &self.basis.vectors
    }

    /// Raw local averages `ell_i(u)`.
    pub fn local_averages(&self, u: &FemVector) -> Result<Vec<f64>> {
        self.functionals.iter().map(|l| l.apply(u)).collect()
    }

    /// Coordinates of `P_W u` in the orthonormal basis, `w_i = <q_i, u>`.
    pub fn measure(&self, u: &FemVector) -> Result<Vec<f64>> {
        u.check_level(self.level)?;
        self.basis.coordinates(u)
    }

    /// `sum_i w_i q_i`.
    pub fn reconstruct(&self, w: &[f64]) -> Result<FemVector> {
        if w.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), found: w.len() });
        }
        let mut out = FemVector::zeros(self.level);
        for (&wi, q) in w.iter().zip(self.basis()) {
            out.axpy(wi, q)?;
        }
        Ok(out)
    }

    /// `C_ij = <q_i, phi_j>`, of size `m x n`.
    pub fn cross_gramian(&self, phi: &[FemVector]) -> Result<DMatrix<f64>> {
        let mut c = DMatrix::zeros(self.m(), phi.len());
        for (j, p) in phi.iter().enumerate() {
            p.check_level(self.level)?;
            for (i, gq) in self.basis.duals.iter().enumerate() {
                c[(i, j)] = gq.apply(p)?;
            }
        }
        Ok(c)
    }

    /// `mu(V, W) = 1 / s_min(C)` for an orthonormal basis `phi` of the linear
    /// part of `V`; `+inf` when `s_min` vanishes.
    pub fn inf_sup_of_basis(&self, phi: &[FemVector]) -> Result<f64> {
        if phi.is_empty() {
            return Err(Error::EmptyBasis);
        }
        if phi.len() > self.m() {
            return Ok(f64::INFINITY);
        }
        let s_min = smallest_singular_value(&self.cross_gramian(phi)?);
        Ok(if s_min < SINGULAR_TOL { f64::INFINITY } else { s_min.recip() })
    }
}

pub(crate) fn smallest_singular_value(c: &DMatrix<f64>) -> f64 {
    c.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn make_measurements(fine: &LevelSpace, m: usize, width: f64, seed: u64) -> Result<MeasurementSpace> {
    MeasurementSpace::from_boxes(fine, random_boxes(m, width, seed)?)
}
