use std::sync::Arc;

use super::mesh::{GridVertex, StructuredMesh};
use super::vector::{DualVector, FemVector};
use crate::error::{Error, Result};

/// Compressed row structure shared between operators on the same level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|p| r.start + p)
    }
}

/// Symmetric sparse matrix over the interior unknowns of one level.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    level: u32,
    n: usize,
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseOperator {
    /// Builds an operator from `(row, col, value)` triplets; duplicates are summed.
    ///
    /// Fails unless the assembled matrix is exactly symmetric.
    pub fn from_triplets(level: u32, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let n = StructuredMesh::new(level)?.interior_count();
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        if let Some(&(i, j, _)) = sorted.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside {n}x{n}")));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let op = Self { level, n, pattern: Arc::new(SparsityPattern { row_ptr, col_idx }), values };
        if !op.is_symmetric() {
            return Err(Error::InvalidArgument("operator is not symmetric".into()));
        }
        Ok(op)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Entry `(i, j)`, zero when structurally absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Iterates the stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.pattern.row(i);
        self.pattern.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn matvec_raw(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `A v` as a functional: `(A v)_i = a(v, phi_i)`.
    pub fn apply(&self, v: &FemVector) -> Result<DualVector> {
        v.check_level(self.level)?;
        let mut out = vec![0.0; self.n];
        self.matvec_raw(v.coeffs(), &mut out);
        Ok(DualVector::from_raw(self.level, out))
    }

    /// Bilinear form `u^T A v`.
    pub fn form(&self, u: &FemVector, v: &FemVector) -> Result<f64> {
        u.check_level(self.level)?;
        Ok(self.apply(v)?.apply(u)?)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// `sum_k w_k A_k` for operators sharing one sparsity pattern.
    pub fn linear_combination(terms: &[(f64, &SparseOperator)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let mut out = (*first).clone();
        out.values.iter_mut().for_each(|v| *v = 0.0);
        for &(w, op) in terms {
            if op.level != out.level {
                return Err(Error::LevelMismatch { expected: out.level, found: op.level });
            }
            if !Arc::ptr_eq(&op.pattern, &out.pattern) && op.pattern != out.pattern {
                return Err(Error::InvalidArgument("operators have different sparsity".into()));
            }
            for (a, b) in out.values.iter_mut().zip(&op.values) {
                *a += w * b;
            }
        }
        Ok(out)
    }

    /// Dense copy, row-major. Intended for small levels and test oracles.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

/// Element stiffness `int grad(phi_a) . grad(phi_b)` of a P1 triangle.
///
/// The 2D P1 stiffness is invariant under uniform scaling, so grid
/// coordinates can be used directly.
fn element_stiffness(tri: &[GridVertex; 3]) -> [[f64; 3]; 3] {
    let p: Vec<[f64; 2]> = tri.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let area = 0.5 * det.abs();
    // grad phi_a = (y_b - y_c, x_c - x_b) / det for (a, b, c) cyclic
    let grads: Vec<[f64; 2]> = (0..3)
        .map(|a| {
            let b = (a + 1) % 3;
            let c = (a + 2) % 3;
            [(p[b][1] - p[c][1]) / det, (p[c][0] - p[b][0]) / det]
        })
        .collect();
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
        }
    }
    k
}

/// Sparsity of P1 couplings: self, axis neighbours and the split diagonal.
fn stencil_pattern(mesh: &StructuredMesh) -> SparsityPattern {
    const OFFSETS: [(isize, isize); 7] = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (0, 1), (1, 1)];
    let n = mesh.interior_count();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(7 * n);
    row_ptr.push(0);
    for i in 0..n {
        let (x, y) = mesh.interior_vertex(i);
        for (dx, dy) in OFFSETS {
            let v = ((x as isize + dx) as usize, (y as isize + dy) as usize);
            if let Some(j) = mesh.interior_index(v) {
                col_idx.push(j);
            }
        }
        row_ptr.push(col_idx.len());
    }
    SparsityPattern { row_ptr, col_idx }
}

/// Assembles `int kappa grad(u) . grad(v)` with `kappa` constant per triangle.
pub(crate) fn assemble_with_coefficient(
    mesh: &StructuredMesh,
    pattern: Arc<SparsityPattern>,
    kappa: impl Fn(&[GridVertex; 3]) -> f64,
) -> SparseOperator {
    let mut values = vec![0.0; pattern.nnz()];
    for tri in mesh.triangles() {
        let k = kappa(&tri);
        if k == 0.0 {
            continue;
        }
        let ke = element_stiffness(&tri);
        let idx: Vec<Option<usize>> = tri.iter().map(|&v| mesh.interior_index(v)).collect();
        for a in 0..3 {
            let Some(i) = idx[a] else { continue };
            for b in 0..3 {
                let Some(j) = idx[b] else { continue };
                let p = pattern.position(i, j).expect("element coupling outside stencil");
                values[p] += k * ke[a][b];
            }
        }
    }
    SparseOperator { level: mesh.level(), n: mesh.interior_count(), pattern, values }
}

pub(crate) fn new_pattern(mesh: &StructuredMesh) -> Arc<SparsityPattern> {
    Arc::new(stencil_pattern(mesh))
}

/// Unit-coefficient stiffness, i.e. the Gram matrix of the H^1_0 inner product.
pub fn assemble_h1_gram(mesh: &StructuredMesh) -> SparseOperator {
    assemble_with_coefficient(mesh, new_pattern(mesh), |_| 1.0)
}

/// Number of subdomains per side of the coefficient grid.
pub const SUBDOMAINS_PER_SIDE: usize = 4;

/// Index of the quarter-width subdomain containing a triangle: lexicographic,
/// `x` fastest, bottom row first.
pub fn subdomain_of(mesh: &StructuredMesh, tri: &[GridVertex; 3]) -> usize {
    let n = mesh.cells_per_side();
    // triangle centroid in grid units, times 3 to stay integral
    let cx3: usize = tri.iter().map(|v| v.0).sum();
    let cy3: usize = tri.iter().map(|v| v.1).sum();
    let jx = (cx3 * SUBDOMAINS_PER_SIDE) / (3 * n);
    let jy = (cy3 * SUBDOMAINS_PER_SIDE) / (3 * n);
    jy * SUBDOMAINS_PER_SIDE + jx
}

/// Stiffness for a diffusivity that is constant on each of the 16 subdomains.
pub fn assemble_diffusion_stiffness(mesh: &StructuredMesh, kappa: &[f64; 16]) -> Result<SparseOperator> {
    assemble_diffusion_on(mesh, new_pattern(mesh), kappa)
}

pub(crate) fn assemble_diffusion_on(
    mesh: &StructuredMesh,
    pattern: Arc<SparsityPattern>,
    kappa: &[f64; 16],
) -> Result<SparseOperator> {
    if mesh.level() < 2 {
        return Err(Error::SubdomainMisaligned { level: mesh.level() });
    }
    Ok(assemble_with_coefficient(mesh, pattern, |tri| kappa[subdomain_of(mesh, tri)]))
}

/// Load vector of the constant source `value`: entry `i` is `value * int phi_i`.
pub fn assemble_constant_load(mesh: &StructuredMesh, value: f64) -> DualVector {
    let h = mesh.width();
    let third_area = h * h / 6.0;
    let mut out = vec![0.0; mesh.interior_count()];
    for tri in mesh.triangles() {
        for &v in &tri {
            if let Some(i) = mesh.interior_index(v) {
                out[i] += value * third_area;
            }
        }
    }
    DualVector::from_raw(mesh.level(), out)
}
