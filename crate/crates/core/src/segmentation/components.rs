use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BinaryVolume, LabelVolume, SegmentError};

/// Voxel adjacency: faces (6), faces + edges (18), or faces + edges + corners (26).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "6")]
    Six,
    #[serde(rename = "18")]
    Eighteen,
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self, SegmentError> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(SegmentError::Connectivity(other)),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Largest number of non-zero coordinates in a neighbor offset.
    fn max_axes(self) -> u32 {
        match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        }
    }

    /// Neighbor offsets `(dx, dy, dz)` in raster order.
    pub fn offsets(self) -> Vec<(i64, i64, i64)> {
        let mut out = Vec::with_capacity(self.count() as usize);
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let nonzero = (dx != 0) as u32 + (dy != 0) as u32 + (dz != 0) as u32;
                    if nonzero >= 1 && nonzero <= self.max_axes() {
                        out.push((dx, dy, dz));
                    }
                }
            }
        }
        out
    }
}

impl std::str::FromStr for Connectivity {
    type Err = SegmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: u32 = s
            .trim()
            .parse()
            .map_err(|_| SegmentError::InvalidParameter(format!("connectivity '{s}'")))?;
        Connectivity::from_count(n)
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.count())
    }
}

/// Label maximal connected foreground sets.
///
/// Labels are handed out in raster order of each component's first voxel.
pub fn label_components(binary: &BinaryVolume, connectivity: Connectivity) -> LabelVolume {
    let dims = binary.dims();
    let mask = binary.mask();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();

    for start in 0..mask.len() {
        if !mask[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let (x, y, z) = dims.coords(v);
            for &(dx, dy, dz) in &offsets {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                let nz = z as i64 + dz;
                if nx < 0
                    || ny < 0
                    || nz < 0
                    || nx >= dims.nx as i64
                    || ny >= dims.ny as i64
                    || nz >= dims.nz as i64
                {
                    continue;
                }
                let n = dims.index(nx as usize, ny as usize, nz as usize);
                if mask[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    LabelVolume::from_parts_unchecked(dims, binary.spacing(), labels, next)
}
