//! Directional 3D thinning by simple-point deletion.
//!
//! Each pass visits the six face directions in a fixed order. For a given
//! direction, border points (background neighbor on that side) that are
//! simple and are not curve endpoints are collected, then deleted one by
//! one in raster order after re-checking both conditions. Passes repeat
//! until nothing changes.

use std::collections::VecDeque;

/// Index into a 3x3x3 neighborhood; the center is 13.
#[inline]
const fn cube(dx: i32, dy: i32, dz: i32) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

const CENTER: usize = 13;

fn axes(i: usize) -> (i32, i32, i32) {
    let i = i as i32;
    (i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1)
}

fn nonzero_axes(i: usize) -> u32 {
    let (x, y, z) = axes(i);
    (x != 0) as u32 + (y != 0) as u32 + (z != 0) as u32
}

/// Precomputed adjacency inside the 3x3x3 cube.
struct Tables {
    /// 26-adjacency between non-center cells.
    adj26: [Vec<usize>; 27],
    /// 6-adjacency between cells of the 18-neighborhood.
    adj6_in18: [Vec<usize>; 27],
}

fn tables() -> &'static Tables {
    static TABLES: std::sync::OnceLock<Tables> = std::sync::OnceLock::new();
    TABLES.get_or_init(|| {
        let mut adj26: [Vec<usize>; 27] = Default::default();
        let mut adj6_in18: [Vec<usize>; 27] = Default::default();
        for a in 0..27 {
            if a == CENTER {
                continue;
            }
            let (ax, ay, az) = axes(a);
            for b in 0..27 {
                if b == CENTER || b == a {
                    continue;
                }
                let (bx, by, bz) = axes(b);
                let (dx, dy, dz) = ((ax - bx).abs(), (ay - by).abs(), (az - bz).abs());
                if dx.max(dy).max(dz) == 1 {
                    adj26[a].push(b);
                    if dx + dy + dz == 1 && nonzero_axes(a) <= 2 && nonzero_axes(b) <= 2 {
                        adj6_in18[a].push(b);
                    }
                }
            }
        }
        Tables { adj26, adj6_in18 }
    })
}

/// Whether deleting the center preserves topology: exactly one
/// 26-component of foreground among its 26 neighbors, and exactly one
/// 6-component of background in its 18-neighborhood that touches a face
/// neighbor.
pub(crate) fn is_simple(nb: &[bool; 27]) -> bool {
    let t = tables();

    // foreground, 26-connectivity
    let mut seen = [false; 27];
    let mut queue = VecDeque::with_capacity(26);
    let mut fg_components = 0;
    for start in 0..27 {
        if start == CENTER || !nb[start] || seen[start] {
            continue;
        }
        fg_components += 1;
        if fg_components > 1 {
            return false;
        }
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for &n in &t.adj26[c] {
                if nb[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    if fg_components != 1 {
        return false;
    }

    // background, 6-connectivity within the 18-neighborhood, seeded at faces
    let faces = [
        cube(-1, 0, 0),
        cube(1, 0, 0),
        cube(0, -1, 0),
        cube(0, 1, 0),
        cube(0, 0, -1),
        cube(0, 0, 1),
    ];
    let mut seen = [false; 27];
    let mut bg_components = 0;
    for &start in &faces {
        if nb[start] || seen[start] {
            continue;
        }
        bg_components += 1;
        if bg_components > 1 {
            return false;
        }
        seen[start] = true;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for &n in &t.adj6_in18[c] {
                if !nb[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    bg_components == 1
}

/// Dense working copy of one cell, padded by one voxel on every side.
pub(crate) struct Workspace {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub vox: Vec<bool>,
}

impl Workspace {
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    /// Neighborhood of an interior (non-padding) voxel.
    #[inline]
    pub fn neighborhood(&self, i: usize) -> [bool; 27] {
        let mut nb = [false; 27];
        let sx = 1;
        let sy = self.nx;
        let sz = self.nx * self.ny;
        let mut k = 0;
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let j = i as isize + dx * sx as isize + dy * sy as isize + dz * sz as isize;
                    nb[k] = self.vox[j as usize];
                    k += 1;
                }
            }
        }
        nb
    }

    fn neighbor_count(nb: &[bool; 27]) -> usize {
        nb.iter()
            .enumerate()
            .filter(|&(k, &b)| k != CENTER && b)
            .count()
    }

    /// Thin in place until stable.
    pub fn thin(&mut self) {
        let directions = [
            cube(0, -1, 0),
            cube(0, 1, 0),
            cube(1, 0, 0),
            cube(-1, 0, 0),
            cube(0, 0, 1),
            cube(0, 0, -1),
        ];
        let mut candidates = Vec::new();
        loop {
            let mut deleted = 0usize;
            for &dir in &directions {
                candidates.clear();
                for z in 1..self.nz - 1 {
                    for y in 1..self.ny - 1 {
                        for x in 1..self.nx - 1 {
                            let i = self.idx(x, y, z);
                            if !self.vox[i] {
                                continue;
                            }
                            let nb = self.neighborhood(i);
                            if nb[dir] || Self::neighbor_count(&nb) == 1 {
                                continue;
                            }
                            if is_simple(&nb) {
                                candidates.push(i);
                            }
                        }
                    }
                }
                for &i in &candidates {
                    let nb = self.neighborhood(i);
                    if Self::neighbor_count(&nb) != 1 && is_simple(&nb) {
                        self.vox[i] = false;
                        deleted += 1;
                    }
                }
            }
            if deleted == 0 {
                break;
            }
        }
    }
}
