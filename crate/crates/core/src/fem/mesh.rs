use crate::error::{Error, Result};

/// Uniform triangulation of the unit square at dyadic level `s`.
///
/// Vertices sit on the `(2^s + 1)^2` grid with spacing `h = 2^-s`. Every grid
/// square is cut along its lower-left to upper-right diagonal. Interior
/// vertices are numbered lexicographically with `x` running fastest, which
/// is also the unknown ordering of every vector living on this level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StructuredMesh {
    level: u32,
}

/// Grid coordinates `(ix, iy)` of a vertex, each in `0..=2^s`.
pub type GridVertex = (usize, usize);

/// Largest supported level; keeps `4^s` comfortably inside `usize`.
pub const MAX_LEVEL: u32 = 14;

impl StructuredMesh {
    pub fn new(level: u32) -> Result<Self> {
        if level < 1 {
            return Err(Error::DegenerateMesh { level });
        }
        if level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "mesh level {level} exceeds the supported maximum {MAX_LEVEL}"
            )));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Number of grid intervals per side, `2^s`.
    pub fn cells_per_side(&self) -> usize {
        1 << self.level
    }

    /// Interior vertices per side, `2^s - 1`.
    pub fn interior_per_side(&self) -> usize {
        self.cells_per_side() - 1
    }

    pub fn width(&self) -> f64 {
        (self.cells_per_side() as f64).recip()
    }

    pub fn vertex_count(&self) -> usize {
        let n = self.cells_per_side() + 1;
        n * n
    }

    pub fn interior_count(&self) -> usize {
        let n = self.interior_per_side();
        n * n
    }

    pub fn triangle_count(&self) -> usize {
        2 * self.cells_per_side() * self.cells_per_side()
    }

    /// Interior unknown index of a grid vertex, `None` on the boundary.
    pub fn interior_index(&self, (ix, iy): GridVertex) -> Option<usize> {
        let n = self.cells_per_side();
        if ix == 0 || iy == 0 || ix >= n || iy >= n {
            return None;
        }
        Some((iy - 1) * (n - 1) + (ix - 1))
    }

    /// Grid vertex of an interior unknown.
    pub fn interior_vertex(&self, index: usize) -> GridVertex {
        let m = self.interior_per_side();
        (index % m + 1, index / m + 1)
    }

    pub fn coordinates(&self, (ix, iy): GridVertex) -> [f64; 2] {
        let h = self.width();
        [ix as f64 * h, iy as f64 * h]
    }

    /// The two triangles of grid square `(i, j)`, counter-clockwise.
    pub fn square_triangles(i: usize, j: usize) -> [[GridVertex; 3]; 2] {
        [
            [(i, j), (i + 1, j), (i + 1, j + 1)],
            [(i, j), (i + 1, j + 1), (i, j + 1)],
        ]
    }

    /// All triangles, square by square in lexicographic order.
    pub fn triangles(&self) -> impl Iterator<Item = [GridVertex; 3]> {
        let n = self.cells_per_side();
        (0..n).flat_map(move |j| (0..n).flat_map(move |i| Self::square_triangles(i, j)))
    }

    /// Whether every vertex of `self` is a vertex of `finer`.
    pub fn is_nested_in(&self, finer: &StructuredMesh) -> bool {
        self.level <= finer.level
    }
}

pub fn build_mesh(level: u32) -> Result<StructuredMesh> {
    StructuredMesh::new(level)
}
