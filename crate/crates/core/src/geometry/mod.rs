//! Mesh loading and surface anchoring.

mod anchor;
mod mesh;
mod vec3;

pub use anchor::{
    anchor_to_point, nearest_anchor, remap_anchor, resolve_anchor, Anchor, GeometryError, OrphanThreshold, Ray,
    RemapStatus, BARY_EPSILON, BARY_SUM_TOLERANCE, DET_EPSILON, EXACT_REMAP_DISTANCE,
};
pub use mesh::{load_mesh, ContentHash, Mesh, MeshError, MeshFormat, DEGENERATE_AREA_SQ, WELD_TOLERANCE};
pub use vec3::Vec3;
