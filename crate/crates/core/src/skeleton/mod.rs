//! Per-cell skeletons and their branch graphs.
//!
//! [`skeletonize`] thins a cell mask to a curve skeleton, [`build_graph`]
//! turns the skeleton into endpoint/junction nodes joined by voxel
//! polylines, and [`branch_metrics`] summarizes the graph.
//!
//! Short spurious branches are not pruned.

mod graph;
mod thinning;

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume_io::{Dims, Spacing};

pub use graph::{branch_metrics, build_graph, Branch, BranchStats, Node, NodeKind, SkeletonGraph};

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("cell {label}: mask is empty")]
    EmptyMask { label: u32 },
    #[error("cell {label}: mask has {components} 26-connected components, expected 1")]
    Disconnected { label: u32, components: usize },
    #[error("cell {label}: voxel index {index} is outside the grid")]
    OutOfBounds { label: u32, index: usize },
}

/// One-voxel-wide skeleton of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub label: u32,
    /// Linear voxel indices in raster order.
    pub voxels: Vec<usize>,
    pub dims: Dims,
    pub spacing: Spacing,
}

/// Bounding box of a voxel set, padded by one voxel, in grid coordinates.
/// `origin` may be -1 on an axis when the set touches the grid border.
pub(crate) struct LocalBox {
    pub origin: [i64; 3],
    pub size: [usize; 3],
}

impl LocalBox {
    pub fn around(voxels: &[usize], dims: Dims) -> Self {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for &v in voxels {
            let (x, y, z) = dims.coords(v);
            for (a, c) in [x, y, z].into_iter().enumerate() {
                lo[a] = lo[a].min(c as i64);
                hi[a] = hi[a].max(c as i64);
            }
        }
        let origin = [lo[0] - 1, lo[1] - 1, lo[2] - 1];
        let size = [
            (hi[0] - lo[0] + 3) as usize,
            (hi[1] - lo[1] + 3) as usize,
            (hi[2] - lo[2] + 3) as usize,
        ];
        LocalBox { origin, size }
    }

    #[inline]
    pub fn local(&self, v: usize, dims: Dims) -> usize {
        let (x, y, z) = dims.coords(v);
        let lx = (x as i64 - self.origin[0]) as usize;
        let ly = (y as i64 - self.origin[1]) as usize;
        let lz = (z as i64 - self.origin[2]) as usize;
        lx + self.size[0] * (ly + self.size[1] * lz)
    }

    #[inline]
    pub fn global(&self, l: usize, dims: Dims) -> usize {
        let lx = l % self.size[0];
        let ly = (l / self.size[0]) % self.size[1];
        let lz = l / (self.size[0] * self.size[1]);
        dims.index(
            (lx as i64 + self.origin[0]) as usize,
            (ly as i64 + self.origin[1]) as usize,
            (lz as i64 + self.origin[2]) as usize,
        )
    }

    pub fn len(&self) -> usize {
        self.size[0] * self.size[1] * self.size[2]
    }
}

/// Count 26-connected components of a voxel set.
pub fn count_components_26(voxels: &[usize], dims: Dims) -> usize {
    if voxels.is_empty() {
        return 0;
    }
    let bx = LocalBox::around(voxels, dims);
    let mut occupied = vec![false; bx.len()];
    for &v in voxels {
        occupied[bx.local(v, dims)] = true;
    }
    let (sx, sy) = (bx.size[0] as isize, (bx.size[0] * bx.size[1]) as isize);
    let mut seen = vec![false; bx.len()];
    let mut queue = VecDeque::new();
    let mut count = 0;
    for &v in voxels {
        let start = bx.local(v, dims);
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for dz in -1..=1isize {
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let n = (c as isize + dx + dy * sx + dz * sy) as usize;
                        if occupied[n] && !seen[n] {
                            seen[n] = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
    }
    count
}

/// Thin a connected cell mask to a curve skeleton.
///
/// Only simple points that are not curve endpoints are removed, so the
/// result keeps the mask's topology and the tips of its branches.
pub fn skeletonize(
    label: u32,
    mask: &[usize],
    dims: Dims,
    spacing: Spacing,
) -> Result<Skeleton, SkeletonError> {
    if mask.is_empty() {
        return Err(SkeletonError::EmptyMask { label });
    }
    if let Some(&index) = mask.iter().find(|&&v| v >= dims.len()) {
        return Err(SkeletonError::OutOfBounds { label, index });
    }
    let components = count_components_26(mask, dims);
    if components != 1 {
        return Err(SkeletonError::Disconnected { label, components });
    }
    let bx = LocalBox::around(mask, dims);
    let mut ws = thinning::Workspace {
        nx: bx.size[0],
        ny: bx.size[1],
        nz: bx.size[2],
        vox: vec![false; bx.len()],
    };
    for &v in mask {
        ws.vox[bx.local(v, dims)] = true;
    }
    ws.thin();
    let mut voxels: Vec<usize> = ws
        .vox
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b)
        .map(|(l, _)| bx.global(l, dims))
        .collect();
    voxels.sort_unstable();
    Ok(Skeleton {
        label,
        voxels,
        dims,
        spacing,
    })
}

/// Write `x,y,z,kind` rows for every skeleton voxel of the given graphs.
pub fn write_skeleton_csv<W: Write>(
    graphs: &[(Skeleton, SkeletonGraph)],
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_id", "x", "y", "z", "kind"])?;
    for (skel, graph) in graphs {
        let kinds = graph.voxel_kinds(skel);
        for (&v, kind) in skel.voxels.iter().zip(kinds) {
            let (x, y, z) = skel.dims.coords(v);
            w.write_record([
                skel.label.to_string(),
                x.to_string(),
                y.to_string(),
                z.to_string(),
                kind.to_string(),
            ])?;
        }
    }
    w.flush()
}
