//! Triangle meshes and the OBJ / STL loaders.
//!
//! Every mesh, however it was produced, goes through the same cleaning pass:
//! vertices closer than [`WELD_TOLERANCE`] per axis are merged, faces with a
//! squared area at or below [`DEGENERATE_AREA_SQ`] are dropped, and the
//! surviving vertices are renumbered in order of first use by the faces. The
//! content hash is taken over that canonical form, so an OBJ and an STL of the
//! same triangles hash equal.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::vec3::Vec3;

/// Per-axis distance under which two vertices are the same vertex.
pub const WELD_TOLERANCE: f64 = 1e-9;
/// Faces whose squared area is at or below this are dropped on load.
pub const DEGENERATE_AREA_SQ: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("mesh has no faces after cleaning")]
    EmptyMesh,
}

impl MeshError {
    fn parse(offset: usize, message: impl Into<String>) -> Self {
        MeshError::Parse {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeshFormat {
    #[serde(rename = "obj")]
    Obj,
    #[serde(rename = "stl-binary")]
    StlBinary,
    #[serde(rename = "stl-ascii")]
    StlAscii,
}

impl MeshFormat {
    /// Guess the format from a file name and its first bytes.
    pub fn detect(file_name: &str, bytes: &[u8]) -> Option<MeshFormat> {
        let lower = file_name.to_ascii_lowercase();
        if lower.ends_with(".obj") {
            return Some(MeshFormat::Obj);
        }
        if lower.ends_with(".stl") {
            let head = &bytes[..bytes.len().min(512)];
            let ascii = head.starts_with(b"solid") && std::str::from_utf8(head).is_ok_and(|s| s.contains("facet"));
            return Some(if ascii {
                MeshFormat::StlAscii
            } else {
                MeshFormat::StlBinary
            });
        }
        None
    }
}

impl FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl-binary" | "stl" => Ok(MeshFormat::StlBinary),
            "stl-ascii" => Ok(MeshFormat::StlAscii),
            other => Err(format!("unknown mesh format `{other}`")),
        }
    }
}

/// SHA-256 of the canonical geometry encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentHash({})", self.to_hex())
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for ContentHash {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(ContentHash(out))
    }
}

impl Serialize for ContentHash {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An immutable, cleaned triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    content_hash: ContentHash,
}

impl Mesh {
    /// Build a mesh from raw triangles. Indices must be in range.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Mesh, MeshError> {
        let n = vertices.len();
        if let Some(bad) = faces.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(MeshError::parse(
                0,
                format!("face index {bad} out of range ({n} vertices)"),
            ));
        }
        if let Some(p) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(MeshError::parse(0, format!("non-finite vertex {p:?}")));
        }
        canonicalize(&vertices, &faces)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn content_hash(&self) -> ContentHash {
        self.content_hash
    }

    /// Corner positions of face `face`. Panics on an out-of-range index.
    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unit normal by the right-hand rule over the face's winding.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a)
            .cross(c - a)
            .normalized()
            .expect("degenerate faces are removed on load")
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let first = self.vertices[0];
        self.vertices
            .iter()
            .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        hi.distance(lo)
    }

    /// Sphere around the bounding box: center and half-diagonal.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        let (lo, hi) = self.bounding_box();
        ((lo + hi) * 0.5, hi.distance(lo) * 0.5)
    }

    /// Write the mesh as OBJ text. Floats are printed in shortest
    /// round-trip form, so loading the output reproduces the mesh exactly.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z));
        }
        for [a, b, c] in &self.faces {
            out.push_str(&format!("f {} {} {}\n", a + 1, b + 1, c + 1));
        }
        out
    }

    /// Binary STL encoding (single precision, per the format).
    pub fn to_stl_binary(&self) -> Vec<u8> {
        let mut out = vec![0u8; 80];
        out.extend_from_slice(&(self.faces.len() as u32).to_le_bytes());
        for face in 0..self.faces.len() {
            let n = self.face_normal(face);
            for v in std::iter::once(n).chain(self.triangle(face)) {
                for c in v.to_array() {
                    out.extend_from_slice(&(c as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&0u16.to_le_bytes());
        }
        out
    }
}

pub fn load_mesh(bytes: &[u8], format: MeshFormat) -> Result<Mesh, MeshError> {
    let (vertices, faces) = match format {
        MeshFormat::Obj => parse_obj(bytes)?,
        MeshFormat::StlBinary => parse_stl_binary(bytes)?,
        MeshFormat::StlAscii => parse_stl_ascii(bytes)?,
    };
    canonicalize(&vertices, &faces)
}

fn canonicalize(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<Mesh, MeshError> {
    let welded = weld(vertices);

    let mut kept: Vec<[u32; 3]> = Vec::with_capacity(faces.len());
    for face in faces {
        let idx = face.map(|i| welded[i as usize]);
        let [a, b, c] = idx.map(|i| vertices[i as usize]);
        let area_sq = (b - a).cross(c - a).length_squared() / 4.0;
        if area_sq > DEGENERATE_AREA_SQ {
            kept.push(idx);
        }
    }
    if kept.is_empty() {
        return Err(MeshError::EmptyMesh);
    }

    let mut renumber: HashMap<u32, u32> = HashMap::new();
    let mut out_vertices = Vec::new();
    let out_faces: Vec<[u32; 3]> = kept
        .iter()
        .map(|face| {
            face.map(|old| {
                *renumber.entry(old).or_insert_with(|| {
                    out_vertices.push(vertices[old as usize]);
                    (out_vertices.len() - 1) as u32
                })
            })
        })
        .collect();

    let content_hash = hash_geometry(&out_vertices, &out_faces);
    Ok(Mesh {
        vertices: out_vertices,
        faces: out_faces,
        content_hash,
    })
}

/// Map every vertex to the index of the first earlier vertex within
/// tolerance on every axis (or to itself).
fn weld(vertices: &[Vec3]) -> Vec<u32> {
    let cell = |v: f64| (v / WELD_TOLERANCE).floor() as i64;
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let mut map = Vec::with_capacity(vertices.len());

    for (i, v) in vertices.iter().enumerate() {
        let key = (cell(v.x), cell(v.y), cell(v.z));
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(key.0 + dx, key.1 + dy, key.2 + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        let w = vertices[j as usize];
                        if (w.x - v.x).abs() <= WELD_TOLERANCE
                            && (w.y - v.y).abs() <= WELD_TOLERANCE
                            && (w.z - v.z).abs() <= WELD_TOLERANCE
                        {
                            found = Some(j);
                            break 'search;
                        }
                    }
                }
            }
        }
        let rep = match found {
            Some(j) => j,
            None => {
                grid.entry(key).or_default().push(i as u32);
                i as u32
            }
        };
        map.push(rep);
    }
    map
}

fn hash_geometry(vertices: &[Vec3], faces: &[[u32; 3]]) -> ContentHash {
    let mut hasher = Sha256::new();
    hasher.update((vertices.len() as u64).to_le_bytes());
    for v in vertices {
        for c in v.to_array() {
            hasher.update(c.to_le_bytes());
        }
    }
    hasher.update((faces.len() as u64).to_le_bytes());
    for face in faces {
        for i in face {
            hasher.update(i.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    ContentHash(out)
}

type RawMesh = (Vec<Vec3>, Vec<[u32; 3]>);

fn utf8(bytes: &[u8]) -> Result<&str, MeshError> {
    std::str::from_utf8(bytes).map_err(|e| MeshError::parse(e.valid_up_to(), "invalid UTF-8"))
}

/// Lines with the byte offset of their first character.
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').map(move |line| {
        let start = offset;
        offset += line.len();
        (start, line.trim_end_matches(['\n', '\r']))
    })
}

fn parse_f64(token: &str, offset: usize) -> Result<f64, MeshError> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MeshError::parse(offset, format!("invalid number `{token}`")))
}

fn parse_obj(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let text = utf8(bytes)?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    for (offset, line) in lines_with_offsets(text) {
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(MeshError::parse(offset, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(
                    parse_f64(coords[0], offset)?,
                    parse_f64(coords[1], offset)?,
                    parse_f64(coords[2], offset)?,
                ));
            }
            Some("f") => {
                let mut polygon = Vec::new();
                for token in tokens {
                    let index = token.split('/').next().unwrap_or("");
                    let raw: i64 = index
                        .parse()
                        .map_err(|_| MeshError::parse(offset, format!("invalid face index `{token}`")))?;
                    // 1-based; negative values count back from the latest vertex.
                    let resolved = match raw {
                        0 => None,
                        r if r > 0 => Some(r - 1),
                        r => Some(vertices.len() as i64 + r),
                    };
                    match resolved {
                        Some(i) if i >= 0 && (i as usize) < vertices.len() => polygon.push(i as u32),
                        _ => {
                            return Err(MeshError::parse(
                                offset,
                                format!("face index {raw} out of range ({} vertices)", vertices.len()),
                            ))
                        }
                    }
                }
                if polygon.len() < 3 {
                    return Err(MeshError::parse(offset, "face needs at least three vertices"));
                }
                for k in 1..polygon.len() - 1 {
                    faces.push([polygon[0], polygon[k], polygon[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

const STL_HEADER: usize = 80;
const STL_RECORD: usize = 50;

fn parse_stl_binary(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    if bytes.len() < STL_HEADER + 4 {
        return Err(MeshError::parse(bytes.len(), "truncated STL header"));
    }
    let count = u32::from_le_bytes(bytes[STL_HEADER..STL_HEADER + 4].try_into().unwrap()) as usize;
    let needed = STL_HEADER + 4 + count * STL_RECORD;
    if bytes.len() < needed {
        return Err(MeshError::parse(
            bytes.len(),
            format!("STL declares {count} triangles but data ends early"),
        ));
    }
    let mut vertices = Vec::with_capacity(count * 3);
    let mut faces = Vec::with_capacity(count);
    for t in 0..count {
        let record = STL_HEADER + 4 + t * STL_RECORD;
        for corner in 0..3 {
            let base = record + 12 + corner * 12;
            let read = |k: usize| {
                let at = base + 4 * k;
                f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64
            };
            let v = Vec3::new(read(0), read(1), read(2));
            if !v.is_finite() {
                return Err(MeshError::parse(base, "non-finite vertex"));
            }
            vertices.push(v);
        }
        let i = (t * 3) as u32;
        faces.push([i, i + 1, i + 2]);
    }
    Ok((vertices, faces))
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<RawMesh, MeshError> {
    let text = utf8(bytes)?;
    let mut tokens = Tokens::new(text);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();

    tokens.expect("solid")?;
    // Solid name is free text up to the end of the line.
    tokens.skip_line();
    loop {
        let (offset, word) = tokens
            .next()
            .ok_or_else(|| MeshError::parse(text.len(), "missing `endsolid`"))?;
        match word {
            "facet" => {
                tokens.expect("normal")?;
                for _ in 0..3 {
                    tokens.number()?;
                }
                tokens.expect("outer")?;
                tokens.expect("loop")?;
                let base = vertices.len() as u32;
                for _ in 0..3 {
                    tokens.expect("vertex")?;
                    let x = tokens.number()?;
                    let y = tokens.number()?;
                    let z = tokens.number()?;
                    vertices.push(Vec3::new(x, y, z));
                }
                tokens.expect("endloop")?;
                tokens.expect("endfacet")?;
                faces.push([base, base + 1, base + 2]);
            }
            "endsolid" => {
                tokens.skip_line();
                match tokens.next() {
                    None => break,
                    Some((_, "solid")) => tokens.skip_line(),
                    Some((o, other)) => {
                        return Err(MeshError::parse(o, format!("unexpected `{other}` after endsolid")))
                    }
                }
            }
            other => return Err(MeshError::parse(offset, format!("expected `facet`, found `{other}`"))),
        }
    }
    Ok((vertices, faces))
}

struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Tokens { text, pos: 0 }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let rest = &self.text[self.pos..];
        let start = self.pos + (rest.len() - rest.trim_start().len());
        let tail = &self.text[start..];
        if tail.is_empty() {
            self.pos = self.text.len();
            return None;
        }
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        self.pos = start + len;
        Some((start, &tail[..len]))
    }

    fn skip_line(&mut self) {
        match self.text[self.pos..].find('\n') {
            Some(i) => self.pos += i + 1,
            None => self.pos = self.text.len(),
        }
    }

    fn expect(&mut self, word: &str) -> Result<(), MeshError> {
        match self.next() {
            Some((_, w)) if w == word => Ok(()),
            Some((o, w)) => Err(MeshError::parse(o, format!("expected `{word}`, found `{w}`"))),
            None => Err(MeshError::parse(
                self.text.len(),
                format!("expected `{word}`, found end of input"),
            )),
        }
    }

    fn number(&mut self) -> Result<f64, MeshError> {
        match self.next() {
            Some((o, w)) => parse_f64(w, o),
            None => Err(MeshError::parse(
                self.text.len(),
                "expected a number, found end of input",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI_OBJ: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";

    #[test]
    fn obj_quad_is_fan_triangulated() {
        let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let mesh = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_accepts_slash_and_negative_indices() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3/1/1 -2//2 -1/3\n";
        let mesh = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.face_count(), 1);
    }

    #[test]
    fn obj_out_of_range_index_reports_line_offset() {
        let obj = "v 0 0 0\nv 1 0 0\nf 1 2 3\n";
        assert_eq!(
            load_mesh(obj.as_bytes(), MeshFormat::Obj),
            Err(MeshError::Parse {
                offset: 16,
                message: "face index 3 out of range (2 vertices)".into()
            })
        );
    }

    #[test]
    fn obj_bad_number_is_parse_error() {
        let err = load_mesh(b"v 0 zero 0\n", MeshFormat::Obj).unwrap_err();
        assert!(matches!(err, MeshError::Parse { offset: 0, .. }));
    }

    #[test]
    fn all_degenerate_is_empty_mesh() {
        let obj = "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n";
        assert_eq!(load_mesh(obj.as_bytes(), MeshFormat::Obj), Err(MeshError::EmptyMesh));
        assert_eq!(load_mesh(b"", MeshFormat::Obj), Err(MeshError::EmptyMesh));
    }

    #[test]
    fn near_duplicate_vertices_are_welded() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1.0000000000001 0 0\nv 1 1 0\nf 1 2 3\nf 4 5 3\n";
        let mesh = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.vertices().len(), 4);
        assert_eq!(mesh.faces()[1][0], 1);
    }

    #[test]
    fn unused_vertices_do_not_change_the_hash() {
        let a = load_mesh(TRI_OBJ.as_bytes(), MeshFormat::Obj).unwrap();
        let b = load_mesh(
            format!("v 9 9 9\n{TRI_OBJ}").replace("f 1 2 3", "f 2 3 4").as_bytes(),
            MeshFormat::Obj,
        )
        .unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn binary_stl_truncation_reports_length() {
        let mut bytes = vec![0u8; 84];
        bytes[80..84].copy_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 50]);
        assert!(matches!(
            load_mesh(&bytes, MeshFormat::StlBinary),
            Err(MeshError::Parse { offset: 134, .. })
        ));
        assert!(matches!(
            load_mesh(&bytes[..10], MeshFormat::StlBinary),
            Err(MeshError::Parse { offset: 10, .. })
        ));
    }

    #[test]
    fn ascii_stl_single_facet() {
        let stl = "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n  endloop\n endfacet\nendsolid t\n";
        let mesh = load_mesh(stl.as_bytes(), MeshFormat::StlAscii).unwrap();
        let obj = load_mesh(TRI_OBJ.as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.content_hash(), obj.content_hash());
    }

    #[test]
    fn ascii_stl_grammar_error() {
        let stl = "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n  endloop\n";
        let err = load_mesh(stl.as_bytes(), MeshFormat::StlAscii).unwrap_err();
        let at = stl.find("endloop").unwrap();
        assert!(
            matches!(err, MeshError::Parse { offset, .. } if offset == at),
            "{err:?}"
        );
    }

    #[test]
    fn obj_writer_round_trips_exactly() {
        let obj = "v 0.1 0.2 0.3\nv 1e-7 0 0.3333333333333333\nv 0 1 -2.5\nf 1 2 3\n";
        let mesh = load_mesh(obj.as_bytes(), MeshFormat::Obj).unwrap();
        let again = load_mesh(mesh.to_obj().as_bytes(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh, again);
    }

    #[test]
    fn detect_format() {
        assert_eq!(MeshFormat::detect("a.OBJ", b""), Some(MeshFormat::Obj));
        assert_eq!(
            MeshFormat::detect("a.stl", b"solid x\nfacet normal 0 0 1"),
            Some(MeshFormat::StlAscii)
        );
        assert_eq!(MeshFormat::detect("a.stl", &[0u8; 84]), Some(MeshFormat::StlBinary));
        assert_eq!(MeshFormat::detect("a.ply", b""), None);
    }
}
