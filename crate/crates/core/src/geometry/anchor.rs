//! Surface anchors: picking, reconstruction, closest-point snapping and
//! remapping across mesh revisions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mesh::Mesh;
use super::vec3::Vec3;

/// Minimum |determinant| for a ray to count as crossing a triangle's plane.
pub const DET_EPSILON: f64 = 1e-12;
/// Slack on barycentric bounds so rays through a shared edge hit both faces.
pub const BARY_EPSILON: f64 = 1e-12;
/// Largest tolerated barycentric sum error in a stored anchor.
pub const BARY_SUM_TOLERANCE: f64 = 1e-9;
/// A remapped point this close to the original counts as unchanged.
pub const EXACT_REMAP_DISTANCE: f64 = 1e-9;
/// Hits closer than this along the ray are ignored (self-intersection guard).
const MIN_HIT_T: f64 = 1e-12;
/// Hits within this (relative) distance of each other are ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid anchor: {0}")]
    InvalidAnchor(String),
    #[error("ray direction must be a unit vector (length {0})")]
    NotNormalized(f64),
    #[error("orphan threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
}

/// A location on a mesh face, with a standoff along the face normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub face: u32,
    pub bary: [f64; 3],
    pub normal_offset: f64,
}

impl Anchor {
    pub fn on_face(face: u32, bary: [f64; 3]) -> Self {
        Anchor {
            face,
            bary,
            normal_offset: 0.0,
        }
    }

    pub fn with_offset(mut self, normal_offset: f64) -> Self {
        self.normal_offset = normal_offset;
        self
    }

    /// Checks the barycentric invariants and that the face exists in `mesh`.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), GeometryError> {
        if self.face as usize >= mesh.face_count() {
            return Err(GeometryError::InvalidAnchor(format!(
                "face {} out of range ({} faces)",
                self.face,
                mesh.face_count()
            )));
        }
        if self.bary.iter().any(|b| !b.is_finite() || *b < -BARY_EPSILON) {
            return Err(GeometryError::InvalidAnchor(format!(
                "barycentric coordinates {:?} out of range",
                self.bary
            )));
        }
        let sum: f64 = self.bary.iter().sum();
        if (sum - 1.0).abs() > BARY_SUM_TOLERANCE {
            return Err(GeometryError::InvalidAnchor(format!(
                "barycentric coordinates sum to {sum}"
            )));
        }
        if !self.normal_offset.is_finite() {
            return Err(GeometryError::InvalidAnchor("non-finite normal offset".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Accepts an already-normalized direction only.
    // Negated comparison so that a NaN length is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let len = direction.length();
        if !origin.is_finite() || !((len - 1.0).abs() <= 1e-9) {
            return Err(GeometryError::NotNormalized(len));
        }
        Ok(Ray { origin, direction })
    }

    /// Normalizes `direction`; fails on a zero vector.
    pub fn towards(origin: Vec3, direction: Vec3) -> Result<Self, GeometryError> {
        let unit = direction
            .normalized()
            .ok_or(GeometryError::NotNormalized(direction.length()))?;
        Ray::new(origin, unit)
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Result of moving an anchor onto a newer mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RemapStatus {
    Exact,
    Moved(f64),
    Orphaned,
}

/// Fraction of the bounding-box diagonal beyond which a remapped anchor is
/// considered lost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OrphanThreshold(f64);

impl OrphanThreshold {
    pub const DEFAULT: OrphanThreshold = OrphanThreshold(0.05);

    pub fn new(fraction: f64) -> Result<Self, GeometryError> {
        if fraction > 0.0 && fraction <= 1.0 {
            Ok(OrphanThreshold(fraction))
        } else {
            Err(GeometryError::InvalidThreshold(fraction))
        }
    }

    pub fn fraction(self) -> f64 {
        self.0
    }
}

impl Default for OrphanThreshold {
    fn default() -> Self {
        OrphanThreshold::DEFAULT
    }
}

impl TryFrom<f64> for OrphanThreshold {
    type Error = GeometryError;
    fn try_from(f: f64) -> Result<Self, Self::Error> {
        OrphanThreshold::new(f)
    }
}

impl From<OrphanThreshold> for f64 {
    fn from(t: OrphanThreshold) -> f64 {
        t.0
    }
}

/// Point on the face surface, ignoring the normal offset.
fn surface_point(mesh: &Mesh, anchor: &Anchor) -> Vec3 {
    let [a, b, c] = mesh.triangle(anchor.face as usize);
    a * anchor.bary[0] + b * anchor.bary[1] + c * anchor.bary[2]
}

pub fn anchor_to_point(mesh: &Mesh, anchor: &Anchor) -> Result<Vec3, GeometryError> {
    anchor.validate(mesh)?;
    let p = surface_point(mesh, anchor);
    if anchor.normal_offset == 0.0 {
        return Ok(p);
    }
    Ok(p + mesh.face_normal(anchor.face as usize) * anchor.normal_offset)
}

/// Clamp tiny negative coordinates produced by edge slack and renormalize.
fn clean_bary(bary: [f64; 3]) -> [f64; 3] {
    let clamped = bary.map(|b| b.max(0.0));
    let sum: f64 = clamped.iter().sum();
    clamped.map(|b| b / sum)
}

/// Möller–Trumbore intersection; returns (t, u, v) for hits in front of the
/// origin, where the hit is `(1-u-v)·a + u·b + v·c`.
fn intersect_triangle(ray: &Ray, [a, b, c]: [Vec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = b - a;
    let e2 = c - a;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < DET_EPSILON {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - a;
    let u = s.dot(p) * inv;
    if !(-BARY_EPSILON..=1.0 + BARY_EPSILON).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < -BARY_EPSILON || u + v > 1.0 + BARY_EPSILON {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > MIN_HIT_T).then_some((t, u, v))
}

/// Closest hit along `ray`, ties going to the lowest face index.
pub fn resolve_anchor(mesh: &Mesh, ray: &Ray) -> Option<Anchor> {
    let mut best: Option<(f64, u32, [f64; 3])> = None;
    for face in 0..mesh.face_count() {
        let Some((t, u, v)) = intersect_triangle(ray, mesh.triangle(face)) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((best_t, _, _)) => t < best_t - TIE_TOLERANCE * best_t.max(1.0),
        };
        if better {
            best = Some((t, face as u32, [1.0 - u - v, u, v]));
        }
    }
    best.map(|(_, face, bary)| Anchor::on_face(face, clean_bary(bary)))
}

/// Closest point on triangle `abc` to `p`, as barycentric weights on (a, b, c).
/// Voronoi-region walk from Ericson, "Real-Time Collision Detection" 5.1.5.
pub(crate) fn closest_point_bary(p: Vec3, [a, b, c]: [Vec3; 3]) -> [f64; 3] {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return [0.0, 1.0, 0.0];
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return [1.0 - v, v, 0.0];
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return [0.0, 0.0, 1.0];
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return [1.0 - w, 0.0, w];
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return [0.0, 1.0 - w, w];
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    [1.0 - v - w, v, w]
}

/// Anchor at the closest surface point to `point`, ties to the lowest face.
pub fn nearest_anchor(mesh: &Mesh, point: Vec3) -> Anchor {
    let mut best: Option<(f64, u32, [f64; 3])> = None;
    for face in 0..mesh.face_count() {
        let tri = mesh.triangle(face);
        let bary = closest_point_bary(point, tri);
        let q = tri[0] * bary[0] + tri[1] * bary[1] + tri[2] * bary[2];
        let d = q.distance(point);
        let better = match best {
            None => true,
            Some((best_d, _, _)) => d < best_d - TIE_TOLERANCE,
        };
        if better {
            best = Some((d, face as u32, bary));
        }
    }
    let (_, face, bary) = best.expect("meshes always have at least one face");
    Anchor::on_face(face, clean_bary(bary))
}

/// Move `anchor` from `old_mesh` onto `new_mesh` by snapping its surface
/// point to the closest point of the new surface. The normal offset is
/// carried over unchanged. Orphaned anchors are returned as they were.
pub fn remap_anchor(
    old_mesh: &Mesh,
    new_mesh: &Mesh,
    anchor: &Anchor,
    threshold: OrphanThreshold,
) -> Result<(Anchor, RemapStatus), GeometryError> {
    anchor.validate(old_mesh)?;
    let p = surface_point(old_mesh, anchor);
    let candidate = nearest_anchor(new_mesh, p).with_offset(anchor.normal_offset);
    let d = surface_point(new_mesh, &candidate).distance(p);
    let limit = threshold.fraction() * new_mesh.bounding_box_diagonal();
    Ok(if d <= EXACT_REMAP_DISTANCE {
        (candidate, RemapStatus::Exact)
    } else if d <= limit {
        (candidate, RemapStatus::Moved(d))
    } else {
        (*anchor, RemapStatus::Orphaned)
    })
}
