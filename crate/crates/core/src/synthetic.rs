//! Synthetic test meshes and piecewise-constant images.

use std::collections::HashMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::MeshImage;
use crate::mesh::TriangleMesh;
use crate::scalar::{norm3, Real};

const ICOSAHEDRON_FACES: [[usize; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

fn icosahedron_vertices() -> Vec<[f64; 3]> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    raw.iter().map(normalize).collect()
}

fn normalize(p: &[f64; 3]) -> [f64; 3] {
    let n = norm3(p);
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Unit-circumradius icosahedron refined `level` times by 1-to-4 midpoint
/// subdivision with the new vertices pushed onto the sphere.
pub fn icosphere<T: Real>(level: u32) -> Result<TriangleMesh<T>> {
    if level > 9 {
        return Err(Error::InvalidParams(format!("icosphere level {level} is too large")));
    }
    let mut vertices = icosahedron_vertices();
    let mut faces = ICOSAHEDRON_FACES.to_vec();
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalize(&[(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0, (p[2] + q[2]) / 2.0]));
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices.into_iter().map(|p| p.map(T::lit)).collect(), faces)
}

/// Regular `n × n` grid of right triangles on the unit square in z = 0.
pub fn planar_grid<T: Real>(n: usize) -> Result<TriangleMesh<T>> {
    if n == 0 {
        return Err(Error::InvalidParams("grid needs at least one cell".into()));
    }
    let step = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([T::lit(i as f64 * step), T::lit(j as f64 * step), T::zero()]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Image patterns for synthetic experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// 0.25 / 0.75 split by the great circle normal to (1, 2, 3).
    TwoPatch,
    /// Octant pattern with four intensity levels.
    Checker,
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_patch" => Ok(Self::TwoPatch),
            "checker" => Ok(Self::Checker),
            other => Err(Error::InvalidParams(format!("unknown pattern {other:?}"))),
        }
    }
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Self::TwoPatch => "two_patch",
            Self::Checker => "checker",
        }
    }
}

const SPLIT_NORMAL: [f64; 3] = [1.0, 2.0, 3.0];
const CHECKER_LEVELS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
// color variants tint each region differently per channel
const COLOR_TWO_PATCH: [[f64; 3]; 2] = [[0.25, 0.6, 0.9], [0.75, 0.3, 0.1]];

/// Paints a piecewise-constant pattern onto the mesh vertices.
pub fn paint<T: Real>(mesh: &TriangleMesh<T>, pattern: Pattern, channels: usize) -> Result<MeshImage<T>> {
    if channels != 1 && channels != 3 {
        return Err(Error::InvalidChannels(channels));
    }
    let mut values = Vec::with_capacity(mesh.vertex_count() * channels);
    for p in mesh.vertices() {
        let p = p.map(|c| c.to_f64_lossy());
        match pattern {
            Pattern::TwoPatch => {
                let side = usize::from(p[0] * SPLIT_NORMAL[0] + p[1] * SPLIT_NORMAL[1] + p[2] * SPLIT_NORMAL[2] >= 0.0);
                if channels == 1 {
                    values.push(T::lit([0.25, 0.75][side]));
                } else {
                    values.extend(COLOR_TWO_PATCH[side].iter().map(|&v| T::lit(v)));
                }
            }
            Pattern::Checker => {
                let k = p.iter().filter(|&&c| c > 0.0).count();
                let level = CHECKER_LEVELS[k];
                if channels == 1 {
                    values.push(T::lit(level));
                } else {
                    values.extend([level, 1.0 - level, CHECKER_LEVELS[(k + 1) % 4]].map(T::lit));
                }
            }
        }
    }
    MeshImage::new(values, channels)
}

/// Parsed `--synthetic` description, e.g. `icosphere_k=3,pattern=two_patch`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub level: u32,
    pub pattern: Pattern,
    pub channels: usize,
}

impl SyntheticSpec {
    pub fn name(&self) -> String {
        let base = format!("icosphere{}_{}", self.level, self.pattern.name());
        if self.channels == 3 {
            format!("{base}_rgb")
        } else {
            base
        }
    }

    pub fn generate<T: Real>(&self) -> Result<(TriangleMesh<T>, MeshImage<T>)> {
        generate_synthetic(self.level, self.pattern, self.channels)
    }
}

impl FromStr for SyntheticSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = SyntheticSpec {
            level: 3,
            pattern: Pattern::TwoPatch,
            channels: 1,
        };
        for part in s.split(',').filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("expected key=value, got {part:?}")))?;
            let bad = || Error::InvalidParams(format!("bad value {value:?} for {key}"));
            match key.trim() {
                "icosphere_k" | "k" => spec.level = value.trim().parse().map_err(|_| bad())?,
                "pattern" => spec.pattern = value.trim().parse()?,
                "channels" => spec.channels = value.trim().parse().map_err(|_| bad())?,
                other => return Err(Error::InvalidParams(format!("unknown synthetic key {other:?}"))),
            }
        }
        if spec.channels != 1 && spec.channels != 3 {
            return Err(Error::InvalidChannels(spec.channels));
        }
        Ok(spec)
    }
}

pub fn generate_synthetic<T: Real>(
    level: u32,
    pattern: Pattern,
    channels: usize,
) -> Result<(TriangleMesh<T>, MeshImage<T>)> {
    let mesh = icosphere(level)?;
    let image = paint(&mesh, pattern, channels)?;
    Ok((mesh, image))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashSet};

    #[test]
    fn icosphere_counts_follow_subdivision() {
        // V' = V + E, F' = 4F, E' = 2E + 3F
        let (mut v, mut e, mut f) = (12usize, 30usize, 20usize);
        for k in 0..4 {
            let m = icosphere::<f64>(k).unwrap();
            assert_eq!(m.vertex_count(), v);
            assert_eq!(m.triangle_count(), f);
            let (nv, ne, nf) = (v + e, 2 * e + 3 * f, 4 * f);
            v = nv;
            e = ne;
            f = nf;
        }
        assert_eq!(icosphere::<f64>(1).unwrap().vertex_count(), 42);
        assert_eq!(icosphere::<f64>(2).unwrap().triangle_count(), 320);
    }

    #[test]
    fn icosahedron_is_closed_with_analytic_area() {
        let m = icosphere::<f64>(0).unwrap();
        // every edge used exactly twice
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for t in m.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(counts.values().all(|&c| c == 2));
        assert!(m.boundary_flags().iter().all(|&b| !b));

        let a = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        let expected = 5.0 * 3f64.sqrt() * a * a;
        let areas = m.triangle_areas();
        for &ar in areas {
            assert!((ar - areas[0]).abs() < 1e-12);
        }
        assert!((m.total_area() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn control_cells_partition_area() {
        let m = icosphere::<f64>(2).unwrap();
        let s = m.control_cell_areas();
        assert!((s.total() - m.total_area()).abs() <= 1e-12 * m.total_area());
    }

    #[test]
    fn outward_orientation() {
        let m = icosphere::<f64>(1).unwrap();
        for (t, tri) in m.triangles().iter().enumerate() {
            let n = m.triangle_normal(t);
            let c = m.vertices()[tri[0]];
            assert!(n[0] * c[0] + n[1] * c[1] + n[2] * c[2] > 0.0);
        }
    }

    #[test]
    fn two_patch_has_two_values() {
        let (_, im) = generate_synthetic::<f64>(2, Pattern::TwoPatch, 1).unwrap();
        let distinct: HashSet<u64> = im.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn checker_has_multiple_regions() {
        let (_, im) = generate_synthetic::<f64>(2, Pattern::Checker, 1).unwrap();
        let distinct: BTreeSet<u64> = im.values().iter().map(|v| v.to_bits()).collect();
        assert!(distinct.len() >= 3);
    }

    #[test]
    fn planar_grid_boundary() {
        let m = planar_grid::<f64>(4).unwrap();
        assert_eq!(m.vertex_count(), 25);
        assert_eq!(m.boundary_flags().iter().filter(|&&b| b).count(), 16);
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parse_synthetic_spec() {
        let s: SyntheticSpec = "icosphere_k=4,pattern=checker,channels=3".parse().unwrap();
        assert_eq!(s.level, 4);
        assert_eq!(s.pattern, Pattern::Checker);
        assert_eq!(s.channels, 3);
        assert!("icosphere_k=x".parse::<SyntheticSpec>().is_err());
        assert!("pattern=stripes".parse::<SyntheticSpec>().is_err());
        assert!("channels=2".parse::<SyntheticSpec>().is_err());
    }
}
