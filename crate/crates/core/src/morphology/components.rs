//! Connected-component labelling with a two-pass union-find scan.

use serde::{Deserialize, Serialize};

use crate::volume::{BinaryMask, Dims};

/// Voxel adjacency used for foreground connectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours only.
    #[serde(rename = "6")]
    Face6,
    /// Face, edge and corner neighbours.
    #[default]
    #[serde(rename = "26")]
    Full26,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Connectivity::Face6),
            26 => Some(Connectivity::Full26),
            _ => None,
        }
    }

    /// Neighbour offsets that precede the centre in x-fastest scan order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1i64..=0 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let before = dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
                    if !before {
                        continue;
                    }
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    if self == Connectivity::Face6 && manhattan != 1 {
                        continue;
                    }
                    out.push([dx, dy, dz]);
                }
            }
        }
        out
    }
}

/// Component id per voxel (0 = background) plus component sizes.
///
/// Ids run 1..=k in the order of each component's smallest linear index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    dims: Dims,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    /// Size of component `id` (1-based).
    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    /// Sizes indexed by `id - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Id of the largest component; ties go to the smaller id, i.e. the
    /// component whose first voxel comes first in linear order.
    pub fn largest(&self) -> Option<u32> {
        let mut best: Option<(u32, usize)> = None;
        for (i, &s) in self.sizes.iter().enumerate() {
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((i as u32 + 1, s));
            }
        }
        best.map(|(id, _)| id)
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    /// Union keeping the smaller root, so roots are first-seen provisional labels.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra < rb {
            self.parent[rb as usize] = ra;
        } else if rb < ra {
            self.parent[ra as usize] = rb;
        }
    }
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let dims = mask.dims();
    let [nx, ny, _] = dims.as_array();
    let voxels = mask.voxels();
    let offsets = connectivity.backward_offsets();
    let mut provisional = vec![0u32; voxels.len()];
    let mut sets = DisjointSet { parent: vec![0] };

    for idx in mask.foreground_indices() {
        let [x, y, z] = dims.coords(idx);
        let mut label = 0u32;
        for &[dx, dy, dz] in &offsets {
            let (px, py, pz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
            if !dims.contains(px, py, pz) {
                continue;
            }
            let n = px as usize + nx * (py as usize + ny * pz as usize);
            let nl = provisional[n];
            if nl == 0 {
                continue;
            }
            if label == 0 {
                label = nl;
            } else if label != nl {
                sets.union(label, nl);
            }
        }
        if label == 0 {
            label = sets.parent.len() as u32;
            sets.parent.push(label);
        }
        provisional[idx] = label;
    }

    // Provisional labels are created in scan order and unions keep the
    // smaller root, so numbering roots on first sight yields ids ordered by
    // each component's first voxel.
    let mut final_id = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let mut labels = vec![0u32; voxels.len()];
    for idx in mask.foreground_indices() {
        let root = sets.find(provisional[idx]);
        if final_id[root as usize] == 0 {
            sizes.push(0);
            final_id[root as usize] = sizes.len() as u32;
        }
        let id = final_id[root as usize];
        sizes[id as usize - 1] += 1;
        labels[idx] = id;
    }

    ComponentLabeling {
        dims,
        labels,
        sizes,
    }
}

/// Number of components under the given adjacency.
pub fn count_components(mask: &BinaryMask, connectivity: Connectivity) -> usize {
    connected_components(mask, connectivity).num_components()
}
