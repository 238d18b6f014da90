use serde::{Deserialize, Serialize};

use super::{LocalBox, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Endpoint,
    Junction,
    /// Single-voxel skeleton with no neighbors.
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Representative voxel: the first raster voxel of the node's cluster.
    pub voxel: usize,
    pub kind: NodeKind,
    /// Every skeleton voxel merged into this node.
    pub members: Vec<usize>,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Voxel polyline from one node voxel to another, inclusive.
    pub voxels: Vec<usize>,
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub length_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonGraph {
    pub label: u32,
    pub nodes: Vec<Node>,
    pub branches: Vec<Branch>,
}

/// Per-voxel classification used by the CSV dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxelKind {
    Endpoint,
    Junction,
    Slab,
    Isolated,
}

impl std::fmt::Display for VoxelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VoxelKind::Endpoint => "endpoint",
            VoxelKind::Junction => "junction",
            VoxelKind::Slab => "slab",
            VoxelKind::Isolated => "isolated",
        })
    }
}

impl SkeletonGraph {
    pub fn endpoint_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Endpoint)
            .count()
    }

    pub fn junction_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Junction)
            .count()
    }

    pub fn total_length_um(&self) -> f64 {
        self.branches.iter().map(|b| b.length_um).sum()
    }

    pub(crate) fn voxel_kinds(&self, skel: &Skeleton) -> Vec<VoxelKind> {
        skel.voxels
            .iter()
            .map(|v| {
                self.nodes
                    .iter()
                    .find(|n| n.members.binary_search(v).is_ok())
                    .map(|n| match n.kind {
                        NodeKind::Endpoint => VoxelKind::Endpoint,
                        NodeKind::Junction => VoxelKind::Junction,
                        NodeKind::Isolated => VoxelKind::Isolated,
                    })
                    .unwrap_or(VoxelKind::Slab)
            })
            .collect()
    }
}

/// Length in microns of one step between 26-adjacent voxels.
fn step_length(a: usize, b: usize, skel: &Skeleton) -> f64 {
    let (ax, ay, az) = skel.dims.coords(a);
    let (bx, by, bz) = skel.dims.coords(b);
    let s = skel.spacing.0;
    let dx = (ax as f64 - bx as f64) * s[0];
    let dy = (ay as f64 - by as f64) * s[1];
    let dz = (az as f64 - bz as f64) * s[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn polyline_length(voxels: &[usize], skel: &Skeleton) -> f64 {
    voxels
        .windows(2)
        .map(|w| step_length(w[0], w[1], skel))
        .sum()
}

/// Build the branch graph of a skeleton.
///
/// Voxels with one skeleton neighbor are endpoints, with three or more are
/// junctions, with two are slabs. 26-adjacent junction voxels collapse into
/// one junction node. Branches follow slab chains between node voxels;
/// slab cycles that touch no node become branches without end nodes.
pub fn build_graph(skel: &Skeleton) -> SkeletonGraph {
    let dims = skel.dims;
    let mut graph = SkeletonGraph {
        label: skel.label,
        nodes: Vec::new(),
        branches: Vec::new(),
    };
    if skel.voxels.is_empty() {
        return graph;
    }
    let bx = LocalBox::around(&skel.voxels, dims);
    // position in `skel.voxels` for every local cell, or usize::MAX
    let mut slot = vec![usize::MAX; bx.len()];
    for (i, &v) in skel.voxels.iter().enumerate() {
        slot[bx.local(v, dims)] = i;
    }
    let (sx, sy) = (bx.size[0] as isize, (bx.size[0] * bx.size[1]) as isize);
    let neighbors: Vec<Vec<usize>> = skel
        .voxels
        .iter()
        .map(|&v| {
            let l = bx.local(v, dims) as isize;
            let mut out = Vec::new();
            for dz in -1..=1isize {
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let s = slot[(l + dx + dy * sx + dz * sy) as usize];
                        if s != usize::MAX {
                            out.push(s);
                        }
                    }
                }
            }
            out
        })
        .collect();

    let n = skel.voxels.len();
    let mut node_of = vec![usize::MAX; n];
    // voxels are in raster order, so nodes come out ordered by representative
    for i in 0..n {
        if node_of[i] != usize::MAX {
            continue;
        }
        let deg = neighbors[i].len();
        let kind = match deg {
            0 => NodeKind::Isolated,
            1 => NodeKind::Endpoint,
            2 => continue,
            _ => NodeKind::Junction,
        };
        let id = graph.nodes.len();
        let mut members = vec![i];
        node_of[i] = id;
        if kind == NodeKind::Junction {
            let mut stack = vec![i];
            while let Some(c) = stack.pop() {
                for &m in &neighbors[c] {
                    if node_of[m] == usize::MAX && neighbors[m].len() >= 3 {
                        node_of[m] = id;
                        members.push(m);
                        stack.push(m);
                    }
                }
            }
        }
        members.sort_unstable();
        graph.nodes.push(Node {
            voxel: skel.voxels[members[0]],
            kind,
            members: members.iter().map(|&m| skel.voxels[m]).collect(),
            degree: 0,
        });
    }

    let mut visited = vec![false; n];
    let mut direct = std::collections::HashSet::new();
    for u in 0..n {
        let nu = node_of[u];
        if nu == usize::MAX {
            continue;
        }
        for &w in &neighbors[u] {
            let nw = node_of[w];
            if nw == nu {
                continue;
            }
            if nw != usize::MAX {
                if direct.insert((u.min(w), u.max(w))) {
                    let path = vec![skel.voxels[u], skel.voxels[w]];
                    graph.branches.push(Branch {
                        length_um: polyline_length(&path, skel),
                        voxels: path,
                        start: Some(nu),
                        end: Some(nw),
                    });
                }
                continue;
            }
            if visited[w] {
                continue;
            }
            let mut path = vec![u, w];
            visited[w] = true;
            let (mut prev, mut cur) = (u, w);
            let end = loop {
                let next = neighbors[cur].iter().copied().find(|&x| x != prev);
                match next {
                    Some(x) if node_of[x] != usize::MAX => {
                        path.push(x);
                        break Some(node_of[x]);
                    }
                    Some(x) if !visited[x] => {
                        visited[x] = true;
                        path.push(x);
                        prev = cur;
                        cur = x;
                    }
                    _ => break None,
                }
            };
            let voxels: Vec<usize> = path.iter().map(|&p| skel.voxels[p]).collect();
            graph.branches.push(Branch {
                length_um: polyline_length(&voxels, skel),
                voxels,
                start: Some(nu),
                end,
            });
        }
    }

    // slab loops with no node on them
    for s in 0..n {
        if node_of[s] != usize::MAX || visited[s] {
            continue;
        }
        visited[s] = true;
        let mut path = vec![s];
        let (mut prev, mut cur) = (usize::MAX, s);
        loop {
            let next = neighbors[cur]
                .iter()
                .copied()
                .find(|&x| x != prev && !visited[x]);
            match next {
                Some(x) => {
                    visited[x] = true;
                    path.push(x);
                    prev = cur;
                    cur = x;
                }
                None => break,
            }
        }
        if neighbors[cur].contains(&s) && path.len() > 2 {
            path.push(s);
        }
        let voxels: Vec<usize> = path.iter().map(|&p| skel.voxels[p]).collect();
        graph.branches.push(Branch {
            length_um: polyline_length(&voxels, skel),
            voxels,
            start: None,
            end: None,
        });
    }

    for b in &graph.branches {
        if let Some(s) = b.start {
            graph.nodes[s].degree += 1;
        }
        if let Some(e) = b.end {
            graph.nodes[e].degree += 1;
        }
    }
    graph
}

/// Endpoint and junction counts plus branch length statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchStats {
    pub n_endpoints: usize,
    pub n_branchpoints: usize,
    pub n_branches: usize,
    pub total_length_um: f64,
    /// Absent when the graph has no branches.
    pub avg_length_um: Option<f64>,
    pub max_length_um: Option<f64>,
    pub min_length_um: Option<f64>,
}

pub fn branch_metrics(graph: &SkeletonGraph) -> BranchStats {
    let lengths: Vec<f64> = graph.branches.iter().map(|b| b.length_um).collect();
    let total: f64 = lengths.iter().sum();
    let (avg, max, min) = if lengths.is_empty() {
        (None, None, None)
    } else {
        (
            Some(total / lengths.len() as f64),
            lengths.iter().copied().reduce(f64::max),
            lengths.iter().copied().reduce(f64::min),
        )
    };
    BranchStats {
        n_endpoints: graph.endpoint_count(),
        n_branchpoints: graph.junction_count(),
        n_branches: lengths.len(),
        total_length_um: total,
        avg_length_um: avg,
        max_length_um: max,
        min_length_um: min,
    }
}
