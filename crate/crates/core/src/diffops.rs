//! Piecewise-linear gradient operator on a triangle mesh.
//!
//! On triangle τ = [v_a, v_b, v_c] the interpolant of vertex values has the
//! constant gradient Σ u_m h_m / |h_m|², where h_m runs from the foot of the
//! altitude on the opposite edge to v_m. Each per-triangle block D_i therefore
//! has three nonzero columns, stored compactly here.

use std::sync::OnceLock;

use sprs::{CsMat, TriMat};

use crate::error::{check_len, Result};
use crate::mesh::TriangleMesh;
use crate::scalar::{dot3, norm3, sub3, Real};

#[derive(Debug)]
pub struct GradientOperator<T> {
    vertex_count: usize,
    tri_vertices: Vec<[usize; 3]>,
    /// `columns[i][m]` is the column of D_i at vertex `tri_vertices[i][m]`.
    columns: Vec<[[T; 3]; 3]>,
    tri_areas: Vec<T>,
    block_norms: Vec<T>,
    gram: OnceLock<GramMatrix<T>>,
}

impl<T: Real> GradientOperator<T> {
    pub fn new(mesh: &TriangleMesh<T>) -> Self {
        let verts = mesh.vertices();
        let columns: Vec<[[T; 3]; 3]> = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut cols = [[T::zero(); 3]; 3];
                for m in 0..3 {
                    let p = &verts[tri[m]];
                    let a = &verts[tri[(m + 1) % 3]];
                    let b = &verts[tri[(m + 2) % 3]];
                    cols[m] = altitude_gradient(p, a, b);
                }
                cols
            })
            .collect();
        let block_norms = columns.iter().map(block_norm).collect();
        Self {
            vertex_count: mesh.vertex_count(),
            tri_vertices: mesh.triangles().to_vec(),
            columns,
            tri_areas: mesh.triangle_areas().to_vec(),
            block_norms,
            gram: OnceLock::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn triangle_count(&self) -> usize {
        self.tri_vertices.len()
    }

    pub fn triangle_areas(&self) -> &[T] {
        &self.tri_areas
    }

    /// Vertex ids and matching columns of block D_i.
    pub fn block(&self, i: usize) -> (&[usize; 3], &[[T; 3]; 3]) {
        (&self.tri_vertices[i], &self.columns[i])
    }

    /// Spectral norms ‖D_i‖.
    pub fn block_spectral_norms(&self) -> &[T] {
        &self.block_norms
    }

    /// Σ |τ_i| ‖D_i‖.
    pub fn weighted_norm_sum(&self) -> T {
        self.tri_areas
            .iter()
            .zip(&self.block_norms)
            .map(|(&a, &n)| a * n)
            .sum()
    }

    #[inline]
    pub(crate) fn apply_block(&self, i: usize, u: &[T]) -> [T; 3] {
        let [a, b, c] = self.tri_vertices[i];
        let cols = &self.columns[i];
        let (ua, ub, uc) = (u[a], u[b], u[c]);
        [
            cols[0][0] * ua + cols[1][0] * ub + cols[2][0] * uc,
            cols[0][1] * ua + cols[1][1] * ub + cols[2][1] * uc,
            cols[0][2] * ua + cols[1][2] * ub + cols[2][2] * uc,
        ]
    }

    pub(crate) fn apply_into(&self, u: &[T], out: &mut [[T; 3]]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.apply_block(i, u);
        }
    }

    /// Accumulates Σ_i weights_i D_iᵀ z_i into `out` (overwritten).
    pub(crate) fn adjoint_into(&self, z: &[[T; 3]], weights: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (i, (tri, cols)) in self.tri_vertices.iter().zip(&self.columns).enumerate() {
            let w = weights[i];
            for m in 0..3 {
                out[tri[m]] += w * dot3(&cols[m], &z[i]);
            }
        }
    }

    /// Per-triangle gradients D_i u.
    pub fn apply(&self, u: &[T]) -> Result<Vec<[T; 3]>> {
        check_len("gradient input", self.vertex_count, u.len())?;
        let mut out = vec![[T::zero(); 3]; self.triangle_count()];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    /// Σ_i weights_i D_iᵀ z_i.
    pub fn apply_adjoint(&self, z: &[[T; 3]], weights: &[T]) -> Result<Vec<T>> {
        check_len("adjoint input", self.triangle_count(), z.len())?;
        check_len("adjoint weights", self.triangle_count(), weights.len())?;
        let mut out = vec![T::zero(); self.vertex_count];
        self.adjoint_into(z, weights, &mut out);
        Ok(out)
    }

    /// Σ_i |τ_i| D_iᵀ D_i, assembled fresh.
    pub fn assemble_gram(&self) -> GramMatrix<T> {
        let n = self.vertex_count;
        let mut tri = TriMat::with_capacity((n, n), 9 * self.triangle_count());
        for ((verts, cols), &area) in self.tri_vertices.iter().zip(&self.columns).zip(&self.tri_areas) {
            for a in 0..3 {
                for b in 0..3 {
                    tri.add_triplet(verts[a], verts[b], area * dot3(&cols[a], &cols[b]));
                }
            }
        }
        GramMatrix { matrix: tri.to_csr() }
    }

    /// Gram matrix cached on first use; independent of all solver parameters.
    pub fn gram(&self) -> &GramMatrix<T> {
        self.gram.get_or_init(|| self.assemble_gram())
    }
}

/// Column h / |h|² for vertex `p` of a triangle whose opposite edge runs
/// from `a` to `b`.
fn altitude_gradient<T: Real>(p: &[T; 3], a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    let edge = sub3(b, a);
    let t = dot3(&sub3(p, a), &edge) / dot3(&edge, &edge);
    let foot = [a[0] + t * edge[0], a[1] + t * edge[1], a[2] + t * edge[2]];
    let h = sub3(p, &foot);
    let h2 = dot3(&h, &h);
    [h[0] / h2, h[1] / h2, h[2] / h2]
}

/// Largest singular value of the 3×3 block, via the largest eigenvalue of
/// its Gram matrix BᵀB.
fn block_norm<T: Real>(cols: &[[T; 3]; 3]) -> T {
    // The columns span the triangle plane; express them in an orthonormal
    // basis of that plane and take the largest eigenvalue of the 2×2 frame
    // operator Σ c cᵀ, which has a cancellation-free closed form.
    let e1 = match cols.iter().find(|c| norm3(c) > T::zero()) {
        Some(c) => {
            let n = norm3(c);
            [c[0] / n, c[1] / n, c[2] / n]
        }
        None => return T::zero(),
    };
    let mut e2 = [T::zero(); 3];
    let mut best = T::zero();
    for c in cols {
        let a = dot3(c, &e1);
        let r = [c[0] - a * e1[0], c[1] - a * e1[1], c[2] - a * e1[2]];
        let n = norm3(&r);
        if n > best {
            best = n;
            e2 = [r[0] / n, r[1] / n, r[2] / n];
        }
    }
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for c in cols {
        let x = dot3(c, &e1);
        let y = dot3(c, &e2);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let half = T::lit(0.5);
    let lmax = (sxx + syy) * half + ((sxx - syy) * half).hypot(sxy);
    lmax.max(T::zero()).sqrt()
}

/// Sparse symmetric N_v × N_v matrix Σ_i |τ_i| D_iᵀ D_i in CSR form.
#[derive(Clone, Debug)]
pub struct GramMatrix<T> {
    matrix: CsMat<T>,
}

impl<T: Real> GramMatrix<T> {
    pub fn matrix(&self) -> &CsMat<T> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.matrix.get(i, j).copied().unwrap_or_else(T::zero)
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len("gram product", self.dim(), x.len())?;
        let mut y = vec![T::zero(); self.dim()];
        csr_mul_into(&self.matrix, x, &mut y);
        Ok(y)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut d = vec![vec![T::zero(); n]; n];
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                d[i][j] = v;
            }
        }
        d
    }
}

pub(crate) fn csr_mul_into<T: Real>(m: &CsMat<T>, x: &[T], y: &mut [T]) {
    for (i, row) in m.outer_iterator().enumerate() {
        y[i] = row.iter().map(|(j, &v)| v * x[j]).sum();
    }
}
