//! Phone-stand support geometry imposed on a density field.

use serde::{Deserialize, Serialize};

use crate::mesh::StructuredMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    PhoneStand,
    None,
}

/// Support dimensions in elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportPreset {
    pub kind: SupportKind,
    pub band: usize,
    pub lip_thickness: usize,
    pub lip_height: usize,
    pub base: usize,
}

impl SupportPreset {
    /// Thicknesses scaled with the mesh resolution.
    pub fn phone_stand(mesh: &StructuredMesh) -> Self {
        Self {
            kind: SupportKind::PhoneStand,
            band: mesh.nely.div_ceil(32),
            lip_thickness: mesh.nelx.div_ceil(32),
            lip_height: mesh.nely.div_ceil(16),
            base: mesh.nely.div_ceil(32),
        }
    }

    pub fn none() -> Self {
        Self { kind: SupportKind::None, band: 0, lip_thickness: 0, lip_height: 0, base: 0 }
    }
}

/// Region membership of element `e` for the phone-stand rules.
pub(crate) struct Regions {
    pub above: bool,
    pub band: bool,
    pub lip: bool,
    pub base: bool,
}

pub(crate) fn regions(mesh: &StructuredMesh, preset: &SupportPreset, e: usize) -> Regions {
    let [i, j, _] = mesh.element_ijk(e);
    let c = mesh.element_centroid(e);
    let plane_y = mesh.ly * (1.0 - c[0] / mesh.lx);
    let above = c[1] > plane_y;
    let h = mesh.spacing()[1];
    Regions {
        above,
        band: !above && plane_y - c[1] <= preset.band as f64 * h,
        lip: i < preset.lip_thickness && j < preset.lip_height,
        base: j < preset.base,
    }
}

/// Clears voxels above the diagonal plane `y = ly (1 − x/lx)`, then fills the
/// band below it, the lip and the base layer.
pub fn add_supports(densities: &[f64], mesh: &StructuredMesh, preset: &SupportPreset) -> Vec<f64> {
    assert_eq!(densities.len(), mesh.num_elements(), "one density per element");
    if preset.kind == SupportKind::None {
        return densities.to_vec();
    }
    (0..densities.len())
        .map(|e| {
            let r = regions(mesh, preset, e);
            if r.band || r.lip || r.base {
                1.0
            } else if r.above {
                0.0
            } else {
                densities[e]
            }
        })
        .collect()
}
