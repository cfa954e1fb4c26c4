//! Reference meshes and the two worked annotation examples (a problem
//! identification and the solution proposed for it) shared by tests,
//! benchmarks and demos.

use std::collections::HashMap;

use crate::act::{ContentKind, IllocutionaryForce, Polarity, Utterance};
use crate::geometry::{load_mesh, Anchor, Mesh, MeshFormat, Vec3};

pub const CUBE_OBJ: &str = include_str!("../fixtures/cube.obj");
pub const CUBE_DEGENERATE_OBJ: &str = include_str!("../fixtures/cube_degenerate.obj");
pub const CUBE_ASCII_STL: &str = include_str!("../fixtures/cube_ascii.stl");

pub const EXHAUST_TEXT: &str = "interference at the exhaust tubes level";
pub const SUSPENSION_TEXT: &str = "Idem for the tire suspension, move the tubes of 40mm (or more), in order to avoid the interference and to keep a minimum tolerance of 30mm";

/// Cube face 2 lies in the z = +0.5 plane, face 10 in the x = +0.5 plane.
pub const CUBE_TOP_FACE: u32 = 2;
pub const CUBE_RIGHT_FACE: u32 = 10;

/// Unit cube centred on the origin, 8 vertices and 12 outward triangles.
pub fn unit_cube() -> Mesh {
    load_mesh(CUBE_OBJ.as_bytes(), MeshFormat::Obj).expect("cube fixture parses")
}

/// Negative evaluation of a constraint: the interference problem.
pub fn exhaust_act() -> (IllocutionaryForce, Utterance) {
    (
        IllocutionaryForce::evaluation(Some(Polarity::Negative)),
        Utterance::new(EXHAUST_TEXT, ContentKind::Constraint),
    )
}

/// Proposed action answering the interference problem.
pub fn suspension_act() -> (IllocutionaryForce, Utterance) {
    (
        IllocutionaryForce::proposition(),
        Utterance::new(SUSPENSION_TEXT, ContentKind::Action),
    )
}

pub fn exhaust_anchor() -> Anchor {
    Anchor::on_face(CUBE_TOP_FACE, [0.2, 0.3, 0.5])
}

pub fn suspension_anchor() -> Anchor {
    Anchor::on_face(CUBE_RIGHT_FACE, [0.25, 0.25, 0.5])
}

/// Unit-radius icosphere: an icosahedron with each face split into four
/// `subdivisions` times, vertices pushed back onto the sphere.
pub fn icosphere(subdivisions: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized().unwrap())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
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

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = ((vertices[a as usize] + vertices[b as usize]) * 0.5)
                    .normalized()
                    .unwrap();
                vertices.push(m);
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Mesh::new(vertices, faces).expect("icosphere is well formed")
}

/// `mesh` rigidly shifted by `offset`.
pub fn translated(mesh: &Mesh, offset: Vec3) -> Mesh {
    Mesh::new(
        mesh.vertices().iter().map(|&v| v + offset).collect(),
        mesh.faces().to_vec(),
    )
    .expect("translation preserves validity")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_normals_point_outward() {
        let cube = unit_cube();
        for face in 0..cube.face_count() {
            let [a, b, c] = cube.triangle(face);
            let centroid = (a + b + c) / 3.0;
            assert!(cube.face_normal(face).dot(centroid) > 0.0, "face {face}");
        }
        assert_eq!(cube.face_normal(CUBE_TOP_FACE as usize), Vec3::Z);
        assert_eq!(cube.face_normal(CUBE_RIGHT_FACE as usize), Vec3::X);
    }

    #[test]
    fn icosphere_is_closed_and_outward() {
        for n in 0..3 {
            let s = icosphere(n);
            assert_eq!(s.face_count(), 20 * 4usize.pow(n));
            assert_eq!(s.vertices().len(), 10 * 4usize.pow(n) + 2);
            for face in 0..s.face_count() {
                let [a, b, c] = s.triangle(face);
                assert!(s.face_normal(face).dot((a + b + c) / 3.0) > 0.0);
            }
        }
    }
}
