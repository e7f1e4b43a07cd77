//! ASCII OFF / OBJ / PLY mesh files and per-vertex image files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::imaging::MeshImage;
use crate::mesh::TriangleMesh;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "off" => Some(Self::Off),
            "obj" => Some(Self::Obj),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(Self::Off),
            "obj" => Ok(Self::Obj),
            "ply" => Ok(Self::Ply),
            other => Err(Error::InvalidParams(format!("unknown mesh format {other:?}"))),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Reads and validates a triangle mesh.
pub fn load_mesh<T: Real>(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh<T>> {
    let text = read_to_string(path.as_ref())?;
    parse_mesh(&text, format)
}

pub fn parse_mesh<T: Real>(text: &str, format: MeshFormat) -> Result<TriangleMesh<T>> {
    let (vertices, triangles) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::Obj => parse_obj(text)?,
        MeshFormat::Ply => {
            let ply = PlyData::parse(text)?;
            (ply.positions()?, ply.triangles()?)
        }
    };
    let vertices = vertices
        .into_iter()
        .map(|p| p.map(T::lit))
        .collect();
    TriangleMesh::new(vertices, triangles)
}

fn parse_num<N: FromStr>(tok: &str, line: usize) -> Result<N> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {tok:?} as a number")))
}

type RawMesh = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_off(text: &str) -> Result<RawMesh> {
    // (1-based line number, tokens) with comments and blank lines removed
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(Error::parse(ln, "missing OFF header"));
    }
    let rest: Vec<&str> = header_tokens.collect();
    let (ln, counts): (usize, Vec<&str>) = if rest.is_empty() {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(ln, "missing counts line"))?;
        (ln, l.split_whitespace().collect())
    } else {
        (ln, rest)
    };
    if counts.len() < 2 {
        return Err(Error::parse(ln, "counts line needs vertex and face counts"));
    }
    let nv: usize = parse_num(counts[0], ln)?;
    let nf: usize = parse_num(counts[1], ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of file in vertex list"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(Error::parse(ln, "vertex line needs three coordinates"));
        }
        vertices.push([
            parse_num(toks[0], ln)?,
            parse_num(toks[1], ln)?,
            parse_num(toks[2], ln)?,
        ]);
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(0, "unexpected end of file in face list"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let n: usize = parse_num(toks[0], ln)?;
        if n != 3 {
            return Err(Error::parse(ln, format!("face has {n} vertices; only triangles are supported")));
        }
        if toks.len() < 4 {
            return Err(Error::parse(ln, "face line needs three indices"));
        }
        triangles.push([
            parse_num(toks[1], ln)?,
            parse_num(toks[2], ln)?,
            parse_num(toks[3], ln)?,
        ]);
    }
    Ok((vertices, triangles))
}

fn parse_obj(text: &str) -> Result<RawMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(Error::parse(ln, "vertex needs three coordinates"));
                }
                vertices.push([parse_num(c[0], ln)?, parse_num(c[1], ln)?, parse_num(c[2], ln)?]);
            }
            Some("f") => {
                let refs: Vec<&str> = toks.collect();
                if refs.len() != 3 {
                    return Err(Error::parse(
                        ln,
                        format!("face has {} vertices; only triangles are supported", refs.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (k, r) in refs.iter().enumerate() {
                    // "i", "i/t", "i//n", "i/t/n"
                    let idx: i64 = parse_num(r.split('/').next().unwrap_or(""), ln)?;
                    tri[k] = match idx {
                        0 => return Err(Error::parse(ln, "OBJ indices are 1-based; found 0")),
                        i if i > 0 => (i - 1) as usize,
                        i => {
                            let back = (-i) as usize;
                            if back > vertices.len() {
                                return Err(Error::parse(ln, format!("relative index {i} out of range")));
                            }
                            vertices.len() - back
                        }
                    };
                }
                triangles.push(tri);
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

/// Minimal ASCII PLY container: the vertex property table and face lists.
#[derive(Clone, Debug, Default)]
pub struct PlyData {
    pub vertex_properties: Vec<String>,
    pub vertex_rows: Vec<Vec<f64>>,
    pub faces: Vec<Vec<usize>>,
}

enum PlyProperty {
    Scalar(String),
    List(String),
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

impl PlyData {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "ply")) => {}
            _ => return Err(Error::parse(1, "missing ply magic")),
        }
        let mut elements: Vec<PlyElement> = Vec::new();
        let mut saw_format = false;
        loop {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "header not terminated by end_header"))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            match toks.first().copied() {
                Some("format") => {
                    if toks.get(1) != Some(&"ascii") {
                        return Err(Error::parse(ln, "only ASCII PLY is supported"));
                    }
                    saw_format = true;
                }
                Some("comment") | Some("obj_info") | None => {}
                Some("element") => {
                    if toks.len() != 3 {
                        return Err(Error::parse(ln, "malformed element line"));
                    }
                    elements.push(PlyElement {
                        name: toks[1].to_string(),
                        count: parse_num(toks[2], ln)?,
                        properties: Vec::new(),
                    });
                }
                Some("property") => {
                    let el = elements
                        .last_mut()
                        .ok_or_else(|| Error::parse(ln, "property before any element"))?;
                    let prop = if toks.get(1) == Some(&"list") {
                        if toks.len() != 5 {
                            return Err(Error::parse(ln, "malformed list property"));
                        }
                        PlyProperty::List(toks[4].to_string())
                    } else {
                        if toks.len() != 3 {
                            return Err(Error::parse(ln, "malformed property"));
                        }
                        PlyProperty::Scalar(toks[2].to_string())
                    };
                    el.properties.push(prop);
                }
                Some("end_header") => break,
                Some(other) => return Err(Error::parse(ln, format!("unknown header keyword {other:?}"))),
            }
        }
        if !saw_format {
            return Err(Error::parse(0, "missing format line"));
        }

        let mut data = PlyData::default();
        let mut body = lines.filter(|(_, l)| !l.is_empty());
        for el in &elements {
            let is_vertex = el.name == "vertex";
            let is_face = el.name == "face";
            if is_vertex {
                for p in &el.properties {
                    match p {
                        PlyProperty::Scalar(n) => data.vertex_properties.push(n.clone()),
                        PlyProperty::List(_) => {
                            return Err(Error::parse(0, "list properties on vertices are not supported"))
                        }
                    }
                }
            }
            for _ in 0..el.count {
                let (ln, l) = body
                    .next()
                    .ok_or_else(|| Error::parse(0, format!("unexpected end of {} data", el.name)))?;
                let toks: Vec<&str> = l.split_whitespace().collect();
                let mut pos = 0;
                let mut row = Vec::new();
                for p in &el.properties {
                    match p {
                        PlyProperty::Scalar(_) => {
                            let tok = toks
                                .get(pos)
                                .ok_or_else(|| Error::parse(ln, "too few values"))?;
                            row.push(parse_num::<f64>(tok, ln)?);
                            pos += 1;
                        }
                        PlyProperty::List(name) => {
                            let tok = toks
                                .get(pos)
                                .ok_or_else(|| Error::parse(ln, "missing list length"))?;
                            let n: usize = parse_num(tok, ln)?;
                            pos += 1;
                            let items = toks
                                .get(pos..pos + n)
                                .ok_or_else(|| Error::parse(ln, "list shorter than declared"))?;
                            pos += n;
                            if is_face && (name == "vertex_indices" || name == "vertex_index") {
                                if n != 3 {
                                    return Err(Error::parse(
                                        ln,
                                        format!("face has {n} vertices; only triangles are supported"),
                                    ));
                                }
                                let idx = items
                                    .iter()
                                    .map(|t| parse_num::<usize>(t, ln))
                                    .collect::<Result<Vec<_>>>()?;
                                data.faces.push(idx);
                            }
                        }
                    }
                }
                if is_vertex {
                    data.vertex_rows.push(row);
                }
            }
        }
        Ok(data)
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.vertex_properties.iter().position(|p| p == name)
    }

    pub fn positions(&self) -> Result<Vec<[f64; 3]>> {
        let (x, y, z) = match (self.column("x"), self.column("y"), self.column("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(Error::parse(0, "vertex element lacks x, y, z")),
        };
        Ok(self.vertex_rows.iter().map(|r| [r[x], r[y], r[z]]).collect())
    }

    pub fn triangles(&self) -> Result<Vec<[usize; 3]>> {
        Ok(self.faces.iter().map(|f| [f[0], f[1], f[2]]).collect())
    }

    /// Per-vertex intensities from `quality` (gray) or `red,green,blue`
    /// (color, 0-255), normalized to [0, 1].
    pub fn image<T: Real>(&self) -> Result<MeshImage<T>> {
        if let (Some(r), Some(g), Some(b)) = (self.column("red"), self.column("green"), self.column("blue")) {
            let values = self
                .vertex_rows
                .iter()
                .flat_map(|row| [row[r], row[g], row[b]])
                .map(|v| T::lit(v / 255.0))
                .collect();
            return MeshImage::new(values, 3);
        }
        if let Some(q) = self.column("quality") {
            let values = self.vertex_rows.iter().map(|row| T::lit(row[q])).collect();
            return MeshImage::new(values, 1);
        }
        Err(Error::parse(0, "vertex element carries neither quality nor red/green/blue"))
    }
}

fn fmt_f64<T: Real>(v: T) -> String {
    // shortest representation that round-trips in f64
    format!("{}", v.to_f64_lossy())
}

pub fn write_mesh<T: Real>(path: impl AsRef<Path>, mesh: &TriangleMesh<T>, format: MeshFormat) -> Result<()> {
    write_string(path.as_ref(), &format_mesh(mesh, format, None))
}

/// Renders a mesh, optionally with a per-vertex image (PLY only).
pub fn format_mesh<T: Real>(mesh: &TriangleMesh<T>, format: MeshFormat, image: Option<&MeshImage<T>>) -> String {
    let mut s = String::new();
    match format {
        MeshFormat::Off => {
            let _ = writeln!(s, "OFF\n{} {} 0", mesh.vertex_count(), mesh.triangle_count());
            for p in mesh.vertices() {
                let _ = writeln!(s, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
            }
            for t in mesh.triangles() {
                let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
            }
        }
        MeshFormat::Obj => {
            for p in mesh.vertices() {
                let _ = writeln!(s, "v {} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
            }
            for t in mesh.triangles() {
                let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
            }
        }
        MeshFormat::Ply => {
            let _ = writeln!(s, "ply\nformat ascii 1.0\nelement vertex {}", mesh.vertex_count());
            s.push_str("property double x\nproperty double y\nproperty double z\n");
            match image.map(|im| im.channels()) {
                Some(1) => s.push_str("property double quality\n"),
                Some(_) => s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n"),
                None => {}
            }
            let _ = writeln!(
                s,
                "element face {}\nproperty list uchar int vertex_indices\nend_header",
                mesh.triangle_count()
            );
            for (v, p) in mesh.vertices().iter().enumerate() {
                let _ = write!(s, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
                if let Some(im) = image {
                    if im.channels() == 1 {
                        let _ = write!(s, " {}", fmt_f64(im.values()[v]));
                    } else {
                        for c in 0..3 {
                            let _ = write!(s, " {}", to_byte(im.values()[v * 3 + c]));
                        }
                    }
                }
                s.push('\n');
            }
            for t in mesh.triangles() {
                let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
            }
        }
    }
    s
}

fn to_byte<T: Real>(v: T) -> u8 {
    (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a PLY carrying both geometry and the per-vertex image.
pub fn write_image_ply<T: Real>(path: impl AsRef<Path>, mesh: &TriangleMesh<T>, image: &MeshImage<T>) -> Result<()> {
    crate::error::check_len("image vertex count", mesh.vertex_count(), image.vertex_count())?;
    write_string(path.as_ref(), &format_mesh(mesh, MeshFormat::Ply, Some(image)))
}

/// Loads a per-vertex image: `.ply` files use their vertex properties, any
/// other file is read as text with one line per vertex holding 1 or 3 values
/// in [0, 1].
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<MeshImage<T>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    if MeshFormat::from_path(path) == Some(MeshFormat::Ply) {
        PlyData::parse(&text)?.image()
    } else {
        parse_image_text(&text)
    }
}

pub fn parse_image_text<T: Real>(text: &str) -> Result<MeshImage<T>> {
    let mut values = Vec::new();
    let mut channels = None;
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        match channels {
            None => channels = Some(toks.len()),
            Some(c) if c != toks.len() => {
                return Err(Error::parse(i + 1, format!("expected {c} values, found {}", toks.len())))
            }
            _ => {}
        }
        for t in toks {
            values.push(T::lit(parse_num::<f64>(t, i + 1)?));
        }
    }
    let channels = channels.ok_or_else(|| Error::parse(1, "image file has no values"))?;
    MeshImage::new(values, channels)
}

pub fn format_image_text<T: Real>(image: &MeshImage<T>) -> String {
    let mut s = String::new();
    for row in image.values().chunks(image.channels()) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_image_text<T: Real>(path: impl AsRef<Path>, image: &MeshImage<T>) -> Result<()> {
    write_string(path.as_ref(), &format_image_text(image))
}

pub(crate) fn write_text_file(path: &Path, contents: &str) -> Result<()> {
    write_string(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriangleMesh;

    const TRI_OFF: &str = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn off_single_triangle() {
        let m: TriangleMesh<f64> = parse_mesh(TRI_OFF, MeshFormat::Off).unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.triangle_count(), 1);
        assert_eq!(m.triangle_areas()[0], 0.5);
    }

    #[test]
    fn off_repeated_index_is_degenerate() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 1\n";
        assert!(matches!(
            parse_mesh::<f64>(text, MeshFormat::Off),
            Err(Error::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn off_malformed() {
        assert!(matches!(parse_mesh::<f64>("OFF\n3 1 0\n0 0\n", MeshFormat::Off), Err(Error::Parse { .. })));
        assert!(matches!(parse_mesh::<f64>("NOFF\n", MeshFormat::Off), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_mesh::<f64>("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n4 0 1 3 2\n", MeshFormat::Off),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_mesh::<f64>("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n", MeshFormat::Off),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn obj_is_one_based() {
        let text = "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n";
        let m: TriangleMesh<f64> = parse_mesh(text, MeshFormat::Obj).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert!(matches!(
            parse_mesh::<f64>("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n", MeshFormat::Obj),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn ply_with_quality_and_extra_elements() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty float quality\nelement face 1\nproperty list uchar int vertex_indices\nelement edge 1\nproperty int vertex1\nproperty int vertex2\nend_header\n0 0 0 0.1\n1 0 0 0.5\n0 1 0 1\n3 0 1 2\n0 1\n";
        let m: TriangleMesh<f64> = parse_mesh(text, MeshFormat::Ply).unwrap();
        assert_eq!(m.triangle_count(), 1);
        let im: MeshImage<f64> = PlyData::parse(text).unwrap().image().unwrap();
        assert_eq!(im.values(), &[0.1, 0.5, 1.0]);
    }

    #[test]
    fn ply_rejects_binary() {
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(PlyData::parse(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn color_ply_round_trip() {
        let m: TriangleMesh<f64> = parse_mesh(TRI_OFF, MeshFormat::Off).unwrap();
        let im = MeshImage::new(vec![0.0, 1.0, 0.2, 1.0, 0.0, 0.4, 0.6, 0.8, 1.0], 3).unwrap();
        let text = format_mesh(&m, MeshFormat::Ply, Some(&im));
        let back: MeshImage<f64> = PlyData::parse(&text).unwrap().image().unwrap();
        for (a, b) in im.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn image_text_round_trip_and_errors() {
        let im = MeshImage::new(vec![0.25, 0.5, 0.125], 1).unwrap();
        let back: MeshImage<f64> = parse_image_text(&format_image_text(&im)).unwrap();
        assert_eq!(back.values(), im.values());
        assert!(parse_image_text::<f64>("0.1 0.2 0.3\n0.4\n").is_err());
        assert!(matches!(parse_image_text::<f64>("1.5\n"), Err(Error::ValueOutOfRange { .. })));
    }
}
