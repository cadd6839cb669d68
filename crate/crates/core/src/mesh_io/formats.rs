use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Off => parse_off(&text),
        MeshFormat::Obj => parse_obj(&text),
    }
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    if mesh.num_vertices() == 0 {
        return Err(Error::InvalidMesh("refusing to write an empty mesh".into()));
    }
    let text = match format {
        MeshFormat::Off => write_off(mesh),
        MeshFormat::Obj => write_obj(mesh),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_off(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.num_vertices() + mesh.num_faces()));
    s.push_str("OFF\n");
    let _ = writeln!(s, "{} {} 0", mesh.num_vertices(), mesh.num_faces());
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.num_vertices() + mesh.num_faces()));
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

/// Content lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from {tok:?}")))
}

fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = content_lines(text);
    let (ln, header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    // The counts may share the header line ("OFF 4 4 0").
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| Error::parse(ln, format!("expected \"OFF\" header, found {header:?}")))?
        .trim();
    let (ln, counts) = if rest.is_empty() {
        lines.next().ok_or_else(|| Error::parse(ln, "missing vertex/face counts"))?
    } else {
        (ln, rest)
    };
    let mut tok = counts.split_whitespace();
    let nv: usize = parse_num(tok.next(), ln, "vertex count")?;
    let nf: usize = parse_num(tok.next(), ln, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(ln, format!("expected {nv} vertices, file ended early")))?;
        let mut tok = line.split_whitespace();
        let x = parse_num(tok.next(), ln, "x")?;
        let y = parse_num(tok.next(), ln, "y")?;
        let z = parse_num(tok.next(), ln, "z")?;
        vertices.push(Vector3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| Error::parse(ln, format!("expected {nf} faces, file ended early")))?;
        let mut tok = line.split_whitespace();
        let k: usize = parse_num(tok.next(), ln, "face arity")?;
        if k != 3 {
            return Err(Error::parse(ln, format!("only triangles are supported, found a {k}-gon")));
        }
        let mut f = [0usize; 3];
        for slot in &mut f {
            *slot = parse_num(tok.next(), ln, "face index")?;
        }
        faces.push(f);
    }
    TriangleMesh::new(vertices, faces)
}

fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in content_lines(text) {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x = parse_num(tok.next(), ln, "x")?;
                let y = parse_num(tok.next(), ln, "y")?;
                let z = parse_num(tok.next(), ln, "z")?;
                vertices.push(Vector3::new(x, y, z));
            }
            Some("f") => {
                let refs: Vec<&str> = tok.collect();
                if refs.len() != 3 {
                    return Err(Error::parse(
                        ln,
                        format!("only triangles are supported, found {} indices", refs.len()),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, r) in f.iter_mut().zip(refs) {
                    // "i", "i/t", "i//n" and "i/t/n" all start with the position index
                    let idx: i64 = parse_num(r.split('/').next(), ln, "face index")?;
                    *slot = match idx {
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
                faces.push(f);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA_OFF: &str = "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    #[test]
    fn parses_tetrahedron() {
        let m = parse_off(TETRA_OFF).unwrap();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_faces(), 4);
        assert!(m.is_closed());
        assert_eq!(m.vertices()[3], Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn off_header_and_counts() {
        let m = parse_off(TETRA_OFF).unwrap();
        let text = write_off(&m);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(lines.next(), Some("4 4 0"));
    }

    #[test]
    fn off_counts_on_header_line_and_comments() {
        let m = parse_off("# c\nOFF 3 1 0\n0 0 0\n1 0 0 # x\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.num_faces(), 1);
    }

    #[test]
    fn off_rejects_out_of_range_face() {
        let err = parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n").unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn off_rejects_quads_and_truncation() {
        assert!(parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").is_err());
        assert!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n").is_err());
        assert!(parse_off("PLY\n").is_err());
    }

    #[test]
    fn obj_zero_index_is_parse_error() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn obj_slash_and_relative_indices() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 -1//1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
    }
}
