//! Topology-preserving 3D thinning.
//!
//! Border voxels are peeled in six directional subcycles. A voxel is removed
//! only if it is a simple point (its deletion keeps one 26-connected
//! foreground component and one 6-connected background component in the
//! 3x3x3 neighbourhood) and it is not an endpoint (exactly one 26-neighbour).
//! Candidates of a subcycle are re-checked one by one, in ascending linear
//! index, against the current image before deletion. That sequential re-check
//! makes every single deletion topology-preserving and keeps the result
//! independent of platform and thread count.
//!
//! The grid is treated as unit-spaced; spacing is carried through untouched.

use std::sync::OnceLock;

use crate::volume::{BinaryMask, Dims};

/// Centreline voxels of a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub mask: BinaryMask,
    /// Foreground voxel count of the thinned input.
    pub source_count: usize,
}

impl Skeleton {
    pub fn count(&self) -> usize {
        self.mask.count()
    }
}

/// Position of offset `(dx, dy, dz)` in a 3x3x3 neighbourhood.
const fn nb_pos(dx: i32, dy: i32, dz: i32) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

const CENTER: usize = 13;
const FACES: [usize; 6] = [
    nb_pos(0, 0, -1),
    nb_pos(0, 0, 1),
    nb_pos(0, -1, 0),
    nb_pos(0, 1, 0),
    nb_pos(1, 0, 0),
    nb_pos(-1, 0, 0),
];

fn offset_of(pos: usize) -> [i32; 3] {
    [
        (pos % 3) as i32 - 1,
        ((pos / 3) % 3) as i32 - 1,
        (pos / 9) as i32 - 1,
    ]
}

/// Adjacency inside the 3x3x3 cube, centre excluded, as bitsets over positions.
struct Tables {
    /// 26-adjacent positions of each position.
    adj26: [u32; 27],
    /// 6-adjacent positions restricted to the 18-neighbourhood.
    adj6_n18: [u32; 27],
    /// The 18-neighbourhood without the centre.
    n18: u32,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut adj26 = [0u32; 27];
        let mut adj6_n18 = [0u32; 27];
        let mut n18 = 0u32;
        for p in 0..27 {
            let [x, y, z] = offset_of(p);
            let l1 = x.abs() + y.abs() + z.abs();
            if p != CENTER && l1 <= 2 {
                n18 |= 1 << p;
            }
        }
        for p in 0..27 {
            if p == CENTER {
                continue;
            }
            let a = offset_of(p);
            for q in 0..27 {
                if q == CENTER || q == p {
                    continue;
                }
                let b = offset_of(q);
                let d = [
                    (a[0] - b[0]).abs(),
                    (a[1] - b[1]).abs(),
                    (a[2] - b[2]).abs(),
                ];
                if d.iter().all(|&c| c <= 1) {
                    adj26[p] |= 1 << q;
                    if d.iter().sum::<i32>() == 1 && n18 & (1 << p) != 0 && n18 & (1 << q) != 0 {
                        adj6_n18[p] |= 1 << q;
                    }
                }
            }
        }
        Tables {
            adj26,
            adj6_n18,
            n18,
        }
    })
}

/// Flood fill over a position bitset, returning the component of `seed`.
fn flood(set: u32, seed: usize, adj: &[u32; 27]) -> u32 {
    let mut comp = 1u32 << seed;
    let mut frontier = comp;
    while frontier != 0 {
        let p = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let fresh = adj[p] & set & !comp;
        comp |= fresh;
        frontier |= fresh;
    }
    comp
}

/// Simple-point test on a neighbourhood bitset (bit `p` = foreground at
/// position `p`; the centre bit is ignored).
pub(crate) fn is_simple(nb: u32) -> bool {
    let t = tables();
    let fg = nb & !(1 << CENTER) & ((1 << 27) - 1);
    if fg == 0 {
        return false;
    }
    // Exactly one 26-component of foreground neighbours.
    let first = fg.trailing_zeros() as usize;
    if flood(fg, first, &t.adj26) != fg {
        return false;
    }
    // Exactly one 6-component of background in N18 touching a face neighbour.
    let bg = !nb & t.n18;
    let mut seen = 0u32;
    let mut components = 0;
    for &f in &FACES {
        if bg & (1 << f) != 0 && seen & (1 << f) == 0 {
            components += 1;
            if components > 1 {
                return false;
            }
            seen |= flood(bg, f, &t.adj6_n18);
        }
    }
    components == 1
}

/// Zero-padded copy of the mask so neighbourhood reads never leave the buffer.
struct Padded {
    data: Vec<u8>,
    /// Linear offset of each neighbourhood position.
    offsets: [isize; 27],
    px: usize,
    py: usize,
}

impl Padded {
    fn new(mask: &BinaryMask) -> Self {
        let d = mask.dims();
        let (px, py, pz) = (d.nx + 2, d.ny + 2, d.nz + 2);
        let mut data = vec![0u8; px * py * pz];
        for idx in mask.foreground_indices() {
            let [x, y, z] = d.coords(idx);
            data[(x + 1) + px * ((y + 1) + py * (z + 1))] = 1;
        }
        let mut offsets = [0isize; 27];
        for (p, o) in offsets.iter_mut().enumerate() {
            let [dx, dy, dz] = offset_of(p);
            *o = dx as isize + px as isize * (dy as isize + py as isize * dz as isize);
        }
        Padded {
            data,
            offsets,
            px,
            py,
        }
    }

    #[inline]
    fn neighbourhood(&self, idx: usize) -> u32 {
        let mut nb = 0u32;
        for (p, &o) in self.offsets.iter().enumerate() {
            if self.data[(idx as isize + o) as usize] != 0 {
                nb |= 1 << p;
            }
        }
        nb
    }

    fn unpad(&self, dims: Dims, foreground: &[usize]) -> Vec<bool> {
        let mut out = vec![false; dims.len()];
        for &idx in foreground {
            let x = idx % self.px - 1;
            let y = (idx / self.px) % self.py - 1;
            let z = idx / (self.px * self.py) - 1;
            out[dims.index(x, y, z)] = true;
        }
        out
    }
}

fn neighbour_count(nb: u32) -> u32 {
    (nb & !(1 << CENTER)).count_ones()
}

fn deletable(nb: u32) -> bool {
    neighbour_count(nb) != 1 && is_simple(nb)
}

/// Thins `mask` to a one-voxel-wide, topology-preserving centreline.
pub fn skeletonize(mask: &BinaryMask) -> Skeleton {
    let source_count = mask.count();
    let dims = mask.dims();
    let mut grid = Padded::new(mask);
    let mut foreground: Vec<usize> = grid
        .data
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| (v != 0).then_some(i))
        .collect();
    let mut candidates = Vec::new();

    loop {
        let mut changed = false;
        for face in FACES {
            let step = grid.offsets[face];
            candidates.clear();
            for &idx in &foreground {
                if grid.data[(idx as isize + step) as usize] != 0 {
                    continue;
                }
                if deletable(grid.neighbourhood(idx)) {
                    candidates.push(idx);
                }
            }
            let mut removed = false;
            for &idx in &candidates {
                if deletable(grid.neighbourhood(idx)) {
                    grid.data[idx] = 0;
                    removed = true;
                }
            }
            if removed {
                changed = true;
                foreground.retain(|&i| grid.data[i] != 0);
            }
        }
        if !changed {
            break;
        }
    }

    let voxels = grid.unpad(dims, &foreground);
    Skeleton {
        mask: BinaryMask::from_parts_unchecked(dims, mask.spacing(), voxels),
        source_count,
    }
}
