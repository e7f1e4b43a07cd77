//! Triangle meshes: validation, areas, vertex stars, control cells and
//! boundary detection.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::{cross3, norm3, sub3, Real};

/// Faces smaller than this multiple of the squared bounding-box diagonal are
/// rejected as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-12;

/// An immutable, validated triangle mesh with 0-based connectivity.
#[derive(Clone, Debug)]
pub struct TriangleMesh<T> {
    vertices: Vec<[T; 3]>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<T>,
    boundary: Vec<bool>,
    star_offsets: Vec<usize>,
    star_triangles: Vec<usize>,
}

impl<T: Real> TriangleMesh<T> {
    /// Validates the connectivity and geometry and derives areas, stars and
    /// boundary flags.
    pub fn new(vertices: Vec<[T; 3]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &idx in tri {
                if idx >= nv {
                    return Err(Error::IndexOutOfRange {
                        triangle: t,
                        index: idx,
                        vertex_count: nv,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle {
                    triangle: t,
                    reason: format!("repeated vertex index in {tri:?}"),
                });
            }
        }
        if vertices
            .iter()
            .any(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NaNInput);
        }

        let diag = bbox_diagonal(&vertices);
        let min_area = T::lit(DEGENERACY_RATIO) * diag * diag;
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let a = triangle_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]);
            if !(a >= min_area) || a <= T::zero() {
                return Err(Error::DegenerateTriangle {
                    triangle: t,
                    reason: format!("area {a} below threshold {min_area}"),
                });
            }
            areas.push(a);
        }

        // CSR-style vertex -> incident triangles
        let mut counts = vec![0usize; nv + 1];
        for tri in &triangles {
            for &v in tri {
                counts[v + 1] += 1;
            }
        }
        for v in 0..nv {
            if counts[v + 1] == 0 {
                return Err(Error::IsolatedVertex(v));
            }
            counts[v + 1] += counts[v];
        }
        let star_offsets = counts.clone();
        let mut cursor = counts;
        let mut star_triangles = vec![0usize; star_offsets[nv]];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                star_triangles[cursor[v]] = t;
                cursor[v] += 1;
            }
        }

        let boundary = boundary_flags(nv, &triangles);

        Ok(Self {
            vertices,
            triangles,
            areas,
            boundary,
            star_offsets,
            star_triangles,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[T; 3]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Per-triangle areas |τ|, half the cross-product magnitude.
    pub fn triangle_areas(&self) -> &[T] {
        &self.areas
    }

    pub fn total_area(&self) -> T {
        self.areas.iter().copied().sum()
    }

    /// True for vertices on an edge used by exactly one triangle.
    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Triangles sharing vertex `v`.
    pub fn star(&self, v: usize) -> &[usize] {
        &self.star_triangles[self.star_offsets[v]..self.star_offsets[v + 1]]
    }

    /// Barycentric control-cell areas: each vertex collects a third of every
    /// triangle in its star.
    pub fn control_cell_areas(&self) -> ControlCellAreas<T> {
        let third = T::one() / T::lit(3.0);
        let cells = (0..self.vertex_count())
            .map(|v| self.star(v).iter().map(|&t| self.areas[t] * third).sum())
            .collect();
        ControlCellAreas(cells)
    }

    pub fn bounding_box_diagonal(&self) -> T {
        bbox_diagonal(&self.vertices)
    }

    /// Unit normal of triangle `t`, following its vertex winding.
    pub fn triangle_normal(&self, t: usize) -> [T; 3] {
        let [a, b, c] = self.triangles[t];
        let n = cross3(
            &sub3(&self.vertices[b], &self.vertices[a]),
            &sub3(&self.vertices[c], &self.vertices[a]),
        );
        let len = norm3(&n);
        [n[0] / len, n[1] / len, n[2] / len]
    }

    /// Copy of the mesh with every coordinate multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        let vertices = self
            .vertices
            .iter()
            .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
            .collect();
        Self::new(vertices, self.triangles.clone())
    }
}

/// Per-vertex control-cell areas s_i.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlCellAreas<T>(Vec<T>);

impl<T: Real> ControlCellAreas<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn total(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Surface integral of the piecewise-linear interpolant of `values`.
    pub fn integrate(&self, values: &[T]) -> Result<T> {
        crate::error::check_len("control-cell integral", self.0.len(), values.len())?;
        Ok(self.0.iter().zip(values).map(|(&s, &u)| s * u).sum())
    }
}

pub fn triangle_area<T: Real>(a: &[T; 3], b: &[T; 3], c: &[T; 3]) -> T {
    norm3(&cross3(&sub3(b, a), &sub3(c, a))) * T::lit(0.5)
}

fn bbox_diagonal<T: Real>(vertices: &[[T; 3]]) -> T {
    let mut lo = [T::infinity(); 3];
    let mut hi = [T::neg_infinity(); 3];
    for p in vertices {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if vertices.is_empty() {
        return T::zero();
    }
    norm3(&sub3(&hi, &lo))
}

fn boundary_flags(nv: usize, triangles: &[[usize; 3]]) -> Vec<bool> {
    let mut edge_use: HashMap<(usize, usize), u32> = HashMap::with_capacity(triangles.len() * 3 / 2);
    for tri in triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *edge_use.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut flags = vec![false; nv];
    for (&(a, b), &n) in &edge_use {
        if n == 1 {
            flags[a] = true;
            flags[b] = true;
        }
    }
    flags
}
