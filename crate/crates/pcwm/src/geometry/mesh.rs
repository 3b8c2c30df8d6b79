//! Triangle meshes and ASCII OFF / PLY parsers.
//!
//! Only the ASCII variants of both formats are supported; binary PLY is
//! rejected with a typed error. Polygon faces with more than three vertices
//! are fan-triangulated.

use crate::error::{Error, Result};
use crate::geometry::cloud::Point;

/// An indexed triangle mesh in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Area of face `i` (one half the cross-product norm).
    pub fn face_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.faces[i];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cx = u[1] * v[2] - u[2] * v[1];
        let cy = u[2] * v[0] - u[0] * v[2];
        let cz = u[0] * v[1] - u[1] * v[0];
        0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }
}

/// Tokens of an ASCII body, with `#` comments stripped.
struct Tokens<'a> {
    toks: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str, skip_hash_comments: bool) -> Self {
        let mut toks = Vec::new();
        for line in text.lines() {
            let line = if skip_hash_comments {
                line.split('#').next().unwrap_or("")
            } else {
                line
            };
            toks.extend(line.split_whitespace());
        }
        Tokens { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn replace_head(&mut self, tok: &'a str) {
        self.toks[self.pos] = tok;
    }

    fn next(&mut self) -> Option<&'a str> {
        let tok = self.toks.get(self.pos).copied();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn next_usize(&mut self, what: &'static str) -> Result<usize> {
        let tok = self
            .next()
            .ok_or_else(|| Error::MalformedRecord(format!("missing {what}")))?;
        tok.parse::<usize>()
            .map_err(|_| Error::MalformedRecord(format!("bad {what}: {tok:?}")))
    }

    fn next_f64(&mut self, what: &'static str) -> Result<f64> {
        let tok = self
            .next()
            .ok_or_else(|| Error::MalformedRecord(format!("missing {what}")))?;
        tok.parse::<f64>()
            .map_err(|_| Error::MalformedRecord(format!("bad {what}: {tok:?}")))
    }
}

fn push_face(faces: &mut Vec<[usize; 3]>, poly: &[usize], vertex_count: usize) -> Result<()> {
    for &idx in poly {
        if idx >= vertex_count {
            return Err(Error::IndexOutOfRange {
                index: idx,
                vertex_count,
            });
        }
    }
    // Fan triangulation around the first vertex.
    for w in 1..poly.len() - 1 {
        faces.push([poly[0], poly[w], poly[w + 1]]);
    }
    Ok(())
}

fn read_vertices(toks: &mut Tokens, count: usize, declared: usize) -> Result<Vec<Point>> {
    let mut vertices = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let mut p = [0.0; 3];
        for slot in &mut p {
            *slot = match toks.next_f64("vertex coordinate") {
                Ok(v) => v,
                Err(_) => {
                    return Err(Error::CountMismatch {
                        what: "vertices",
                        declared,
                        found: i,
                    })
                }
            };
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate {
                what: "vertex",
                index: i,
            });
        }
        vertices.push(p);
    }
    Ok(vertices)
}

/// Parse an ASCII OFF file.
///
/// The header keyword is optional, and the ModelNet quirk of gluing the
/// counts onto the `OFF` line (`OFF492 1534 0`) is accepted.
pub fn parse_off(raw: &[u8]) -> Result<TriangleMesh> {
    let text = String::from_utf8_lossy(raw);
    let mut toks = Tokens::new(&text, true);

    // Peel an optional OFF keyword, possibly glued to the vertex count.
    match toks.peek() {
        Some("OFF") => {
            toks.next();
        }
        Some(tok) if tok.starts_with("OFF") => {
            toks.replace_head(&tok[3..]);
        }
        Some(tok) if tok.chars().next().is_some_and(|c| c.is_alphabetic()) => {
            return Err(Error::MalformedHeader(format!(
                "expected OFF keyword or counts, got {tok:?}"
            )));
        }
        _ => {}
    }
    let nv = toks
        .next_usize("vertex count")
        .map_err(|_| Error::MalformedHeader("missing or bad vertex count".into()))?;
    let nf = toks
        .next_usize("face count")
        .map_err(|_| Error::MalformedHeader("missing or bad face count".into()))?;
    let _ne = toks
        .next_usize("edge count")
        .map_err(|_| Error::MalformedHeader("missing or bad edge count".into()))?;

    let vertices = read_vertices(&mut toks, nv, nv)?;

    let mut faces = Vec::with_capacity(nf.min(1 << 20));
    for i in 0..nf {
        let arity = match toks.next_usize("face arity") {
            Ok(a) => a,
            Err(_) => {
                return Err(Error::CountMismatch {
                    what: "faces",
                    declared: nf,
                    found: i,
                })
            }
        };
        if arity < 3 {
            return Err(Error::MalformedRecord(format!(
                "face {i} has arity {arity}"
            )));
        }
        let mut poly = Vec::with_capacity(arity);
        for _ in 0..arity {
            poly.push(toks.next_usize("face index").map_err(|_| {
                Error::CountMismatch {
                    what: "faces",
                    declared: nf,
                    found: i,
                }
            })?);
        }
        push_face(&mut faces, &poly, vertices.len())?;
    }

    Ok(TriangleMesh { vertices, faces })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PlyProp {
    X,
    Y,
    Z,
    OtherScalar,
    List,
}

/// Parse an ASCII PLY file with `element vertex` (x, y, z properties) and
/// `element face` (vertex index lists). Binary encodings are rejected.
pub fn parse_ply(raw: &[u8]) -> Result<TriangleMesh> {
    let text = String::from_utf8_lossy(raw);
    let mut lines = text.lines();

    match lines.next().map(str::trim) {
        Some("ply") => {}
        other => {
            return Err(Error::MalformedHeader(format!(
                "expected 'ply' magic, got {other:?}"
            )))
        }
    }

    // Header: format, elements with their property layouts, until end_header.
    struct Element {
        name: String,
        count: usize,
        props: Vec<PlyProp>,
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    let mut header_done = false;
    let mut consumed = 0usize;
    for line in text.lines() {
        consumed += 1;
        let line = line.trim();
        if consumed == 1 || line.is_empty() || line.starts_with("comment") {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("format") => {
                let encoding = parts.next().unwrap_or("");
                if encoding != "ascii" {
                    return Err(Error::UnsupportedEncoding(encoding.to_string()));
                }
                saw_format = true;
            }
            Some("element") => {
                let name = parts
                    .next()
                    .ok_or_else(|| Error::MalformedHeader("element without name".into()))?;
                let count: usize = parts
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::MalformedHeader("element without count".into()))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::MalformedHeader("property before element".into()))?;
                let ty = parts
                    .next()
                    .ok_or_else(|| Error::MalformedHeader("property without type".into()))?;
                if ty == "list" {
                    // list <count type> <item type> <name>
                    element.props.push(PlyProp::List);
                } else {
                    let name = parts
                        .next()
                        .ok_or_else(|| Error::MalformedHeader("property without name".into()))?;
                    element.props.push(match name {
                        "x" => PlyProp::X,
                        "y" => PlyProp::Y,
                        "z" => PlyProp::Z,
                        _ => PlyProp::OtherScalar,
                    });
                }
            }
            Some("end_header") => {
                header_done = true;
                break;
            }
            Some(_) => continue,
            None => continue,
        }
    }
    if !header_done {
        return Err(Error::MalformedHeader("missing end_header".into()));
    }
    if !saw_format {
        return Err(Error::MalformedHeader("missing format line".into()));
    }

    let body: String = text.lines().skip(consumed).collect::<Vec<_>>().join("\n");
    let mut toks = Tokens::new(&body, false);

    let mut vertices: Vec<Point> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for element in &elements {
        if element.name == "vertex" {
            let (xi, yi, zi) = (
                element.props.iter().position(|p| *p == PlyProp::X),
                element.props.iter().position(|p| *p == PlyProp::Y),
                element.props.iter().position(|p| *p == PlyProp::Z),
            );
            let (xi, yi, zi) = match (xi, yi, zi) {
                (Some(x), Some(y), Some(z)) => (x, y, z),
                _ => {
                    return Err(Error::MalformedHeader(
                        "vertex element lacks x/y/z properties".into(),
                    ))
                }
            };
            for i in 0..element.count {
                let mut scalars = Vec::with_capacity(element.props.len());
                for prop in &element.props {
                    if *prop == PlyProp::List {
                        return Err(Error::MalformedHeader(
                            "list property on vertex element".into(),
                        ));
                    }
                    scalars.push(match toks.next_f64("vertex scalar") {
                        Ok(v) => v,
                        Err(_) => {
                            return Err(Error::CountMismatch {
                                what: "vertices",
                                declared: element.count,
                                found: i,
                            })
                        }
                    });
                }
                let p = [scalars[xi], scalars[yi], scalars[zi]];
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteCoordinate {
                        what: "vertex",
                        index: i,
                    });
                }
                vertices.push(p);
            }
        } else if element.name == "face" {
            for i in 0..element.count {
                let arity = match toks.next_usize("face arity") {
                    Ok(a) => a,
                    Err(_) => {
                        return Err(Error::CountMismatch {
                            what: "faces",
                            declared: element.count,
                            found: i,
                        })
                    }
                };
                if arity < 3 {
                    return Err(Error::MalformedRecord(format!(
                        "face {i} has arity {arity}"
                    )));
                }
                let mut poly = Vec::with_capacity(arity);
                for _ in 0..arity {
                    poly.push(toks.next_usize("face index").map_err(|_| {
                        Error::CountMismatch {
                            what: "faces",
                            declared: element.count,
                            found: i,
                        }
                    })?);
                }
                push_face(&mut faces, &poly, vertices.len())?;
            }
        } else {
            // Unknown element: consume one token per scalar property per row;
            // list properties make the row length data-dependent.
            for _ in 0..element.count {
                for prop in &element.props {
                    match prop {
                        PlyProp::List => {
                            let n = toks.next_usize("list count")?;
                            for _ in 0..n {
                                toks.next()
                                    .ok_or_else(|| {
                                        Error::MalformedRecord("truncated list".into())
                                    })?;
                            }
                        }
                        _ => {
                            toks.next().ok_or_else(|| {
                                Error::MalformedRecord("truncated element".into())
                            })?;
                        }
                    }
                }
            }
        }
    }

    Ok(TriangleMesh { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_OFF: &str = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn minimal_off() {
        let mesh = parse_off(MINIMAL_OFF.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn off_count_mismatch() {
        // Declares 3 vertices but contains 2.
        let bad = "OFF\n3 1 0\n0 0 0\n1 0 0\n";
        match parse_off(bad.as_bytes()) {
            Err(Error::CountMismatch { declared: 3, .. }) => {}
            other => panic!("expected CountMismatch, got {other:?}"),
        }
    }

    #[test]
    fn off_without_keyword() {
        let headerless = "3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let mesh = parse_off(headerless.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
    }

    #[test]
    fn off_modelnet_glued_header() {
        let glued = "OFF3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let mesh = parse_off(glued.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.faces.len(), 1);
    }

    #[test]
    fn off_quad_fan_triangulated() {
        let quad = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let mesh = parse_off(quad.as_bytes()).unwrap();
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn off_index_out_of_range() {
        let bad = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        assert!(matches!(
            parse_off(bad.as_bytes()),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
    }

    #[test]
    fn off_non_finite_coordinate() {
        let bad = "OFF\n3 1 0\n0 0 0\nnan 0 0\n0 1 0\n3 0 1 2\n";
        assert!(matches!(
            parse_off(bad.as_bytes()),
            Err(Error::NonFiniteCoordinate { .. })
        ));
    }

    const MINIMAL_PLY: &str = "ply\nformat ascii 1.0\nelement vertex 3\n\
property float x\nproperty float y\nproperty float z\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n\
0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn minimal_ply() {
        let mesh = parse_ply(MINIMAL_PLY.as_bytes()).unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn binary_ply_rejected() {
        let binary = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(
            parse_ply(binary.as_bytes()),
            Err(Error::UnsupportedEncoding(_))
        ));
    }

    #[test]
    fn ply_extra_vertex_properties() {
        let ply = "ply\nformat ascii 1.0\nelement vertex 2\n\
property float nx\nproperty float x\nproperty float y\nproperty float z\n\
element face 0\nproperty list uchar int vertex_indices\nend_header\n\
9 1 2 3\n9 4 5 6\n";
        let mesh = parse_ply(ply.as_bytes()).unwrap();
        assert_eq!(mesh.vertices, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    }

    #[test]
    fn area_of_unit_right_triangle() {
        let mesh = parse_off(MINIMAL_OFF.as_bytes()).unwrap();
        assert!((mesh.total_area() - 0.5).abs() < 1e-15);
    }
}
