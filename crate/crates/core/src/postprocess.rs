//! Enhancing-tumor false-positive pruning: ET voxels that have no edema
//! support in 3D are removed from the segmentation.
//!
//! Two readings of "not neighboring to ED" are available. The component
//! mode (default) removes whole ET connected components with zero voxels
//! adjacent to ED; the voxel mode removes individual ET voxels with no ED
//! neighbor, which hollows out the interior of every blob and is kept only
//! for comparison.

use crate::volume::{BinaryMask, Connectivity, LabelVolume, TumorClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMode {
    Component,
    Voxel,
}

/// True for every mask voxel with at least one set neighbor in `other`
/// under the given connectivity (the voxel itself counting as adjacency is
/// deliberately excluded: ET and ED never overlap in a label volume).
fn has_neighbor_in(
    mask: &BinaryMask,
    other: &BinaryMask,
    connectivity: Connectivity,
) -> Vec<bool> {
    let dims = mask.dims();
    let offsets = connectivity.offsets();
    let mut out = vec![false; dims.len()];
    for (x, y, z) in mask.iter_set() {
        let idx = dims.index(x, y, z);
        out[idx] = offsets.iter().any(|&(ox, oy, oz)| {
            let nx = x as i64 + ox as i64;
            let ny = y as i64 + oy as i64;
            let nz = z as i64 + oz as i64;
            nx >= 0
                && ny >= 0
                && nz >= 0
                && nx < dims.nx as i64
                && ny < dims.ny as i64
                && nz < dims.nz as i64
                && other.get(nx as usize, ny as usize, nz as usize)
        });
    }
    out
}

/// Relabels to background every ET connected component (at the given
/// connectivity) that has zero voxels adjacent to any ED voxel. ED and
/// cavity voxels are never touched.
pub fn prune_unsupported_et(v: &LabelVolume, connectivity: Connectivity) -> LabelVolume {
    let et = v.class_mask(TumorClass::Et);
    let ed = v.class_mask(TumorClass::Ed);
    let labeling = et.connected_components(connectivity);
    let touches_ed = has_neighbor_in(&et, &ed, connectivity);

    let mut supported = vec![false; labeling.component_count as usize + 1];
    for (i, &id) in labeling.ids().iter().enumerate() {
        if id != 0 && touches_ed[i] {
            supported[id as usize] = true;
        }
    }

    let dims = v.dims();
    let mut keep = BinaryMask::empty(dims, v.spacing());
    for (x, y, z) in et.iter_set() {
        let id = labeling.id_at(x, y, z);
        if supported[id as usize] {
            keep.set(x, y, z, true);
        }
    }
    v.retain_class(TumorClass::Et, &keep)
}

/// Literal per-voxel variant: removes every ET voxel without an ED neighbor.
pub fn prune_unsupported_et_voxelwise(v: &LabelVolume, connectivity: Connectivity) -> LabelVolume {
    let et = v.class_mask(TumorClass::Et);
    let ed = v.class_mask(TumorClass::Ed);
    let touches_ed = has_neighbor_in(&et, &ed, connectivity);
    let dims = v.dims();
    let mut keep = BinaryMask::empty(dims, v.spacing());
    for (x, y, z) in et.iter_set() {
        if touches_ed[dims.index(x, y, z)] {
            keep.set(x, y, z, true);
        }
    }
    v.retain_class(TumorClass::Et, &keep)
}

pub fn prune(v: &LabelVolume, mode: PruneMode, connectivity: Connectivity) -> LabelVolume {
    match mode {
        PruneMode::Component => prune_unsupported_et(v, connectivity),
        PruneMode::Voxel => prune_unsupported_et_voxelwise(v, connectivity),
    }
}
