//! Brute-force oracles and fixture generators shared by the integration suites.
//!
//! Nothing here calls the distance transform, labeling or morphology code of
//! the crate under test; every oracle is a direct loop over voxel centres.

#![allow(dead_code)]

use std::collections::VecDeque;

use vessel_metrics::phantom::{
    degrade, gen_capsule, gen_tree, Axis, DegradeOp, Polyline, SplitMix64, TreeSpec,
};
use vessel_metrics::{BinaryMask, Dims, LabelVolume, Spacing};

pub fn dims(n: usize) -> Dims {
    Dims::new(n, n, n).unwrap()
}

pub fn iid_mask(rng: &mut SplitMix64, d: Dims, spacing: Spacing, density: f64) -> BinaryMask {
    let voxels = (0..d.len()).map(|_| rng.next_f64() < density).collect();
    BinaryMask::new(d.as_array(), spacing, voxels).unwrap()
}

/// Union of a few random solid balls: large connected regions with real surfaces.
pub fn blob_mask(rng: &mut SplitMix64, d: Dims, spacing: Spacing, blobs: usize) -> BinaryMask {
    let centres: Vec<([f64; 3], f64)> = (0..blobs)
        .map(|_| {
            let c = [
                rng.uniform(0.0, d.nx as f64),
                rng.uniform(0.0, d.ny as f64),
                rng.uniform(0.0, d.nz as f64),
            ];
            (c, rng.uniform(1.0, d.nx as f64 / 4.0))
        })
        .collect();
    BinaryMask::from_fn(d, spacing, |x, y, z| {
        centres.iter().any(|(c, r)| {
            let p = [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
            p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= r * r
        })
    })
}

pub fn axis_weights(spacing: Spacing, physical: bool) -> [f64; 3] {
    if physical {
        [
            spacing.dx * spacing.dx,
            spacing.dy * spacing.dy,
            spacing.dz * spacing.dz,
        ]
    } else {
        [1.0; 3]
    }
}

fn sq(w: [f64; 3], a: [usize; 3], b: [usize; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let d = a[k] as f64 - b[k] as f64;
            w[k] * d * d
        })
        .sum()
}

/// Minimum squared weighted distance from every voxel to the foreground.
pub fn brute_sq_distance(mask: &BinaryMask, w: [f64; 3]) -> Vec<f64> {
    let d = mask.dims();
    let fg: Vec<[usize; 3]> = mask.foreground_indices().map(|i| d.coords(i)).collect();
    (0..d.len())
        .map(|i| {
            let p = d.coords(i);
            fg.iter()
                .map(|&q| sq(w, p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Minkowski sum with the closed ball `{o : sum w_k o_k^2 <= r^2}` over integer offsets.
pub fn ball_dilate(mask: &BinaryMask, r: f64, w: [f64; 3]) -> BinaryMask {
    let d = mask.dims();
    let reach = |wk: f64| (r / wk.sqrt()).floor() as i64;
    let (rx, ry, rz) = (reach(w[0]), reach(w[1]), reach(w[2]));
    let mut offsets = Vec::new();
    for oz in -rz..=rz {
        for oy in -ry..=ry {
            for ox in -rx..=rx {
                let d2 =
                    w[0] * (ox * ox) as f64 + w[1] * (oy * oy) as f64 + w[2] * (oz * oz) as f64;
                if d2 <= r * r {
                    offsets.push([ox, oy, oz]);
                }
            }
        }
    }
    let mut out = vec![false; d.len()];
    for i in mask.foreground_indices() {
        let [x, y, z] = d.coords(i);
        for o in &offsets {
            let (px, py, pz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
            if d.contains(px, py, pz) {
                out[d.index(px as usize, py as usize, pz as usize)] = true;
            }
        }
    }
    BinaryMask::new(d.as_array(), mask.spacing(), out).unwrap()
}

/// Foreground voxels with a face neighbour in the background or on the volume border.
pub fn brute_boundary(mask: &BinaryMask) -> BinaryMask {
    let d = mask.dims();
    BinaryMask::from_fn(d, mask.spacing(), |x, y, z| {
        if !mask.get(x, y, z) {
            return false;
        }
        let faces = [
            [-1i64, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ];
        faces.iter().any(|f| {
            let (px, py, pz) = (x as i64 + f[0], y as i64 + f[1], z as i64 + f[2]);
            !d.contains(px, py, pz) || !mask.get(px as usize, py as usize, pz as usize)
        })
    })
}

/// All-pairs surface distance ratio.
pub fn nsd_oracle(a: &BinaryMask, b: &BinaryMask, tau: f64) -> f64 {
    let d = a.dims();
    let w = axis_weights(a.spacing(), true);
    let sa: Vec<[usize; 3]> = brute_boundary(a)
        .foreground_indices()
        .map(|i| d.coords(i))
        .collect();
    let sb: Vec<[usize; 3]> = brute_boundary(b)
        .foreground_indices()
        .map(|i| d.coords(i))
        .collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    if sa.is_empty() || sb.is_empty() {
        return 0.0;
    }
    let within = |from: &[[usize; 3]], to: &[[usize; 3]]| {
        from.iter()
            .filter(|&&p| to.iter().any(|&q| sq(w, p, q) <= tau * tau))
            .count()
    };
    (within(&sb, &sa) + within(&sa, &sb)) as f64 / (sa.len() + sb.len()) as f64
}

fn and_count(a: &BinaryMask, b: &BinaryMask) -> usize {
    a.voxels()
        .iter()
        .zip(b.voxels())
        .filter(|(&x, &y)| x && y)
        .count()
}

/// Area measure through explicit ball dilations and set counts.
pub fn area_oracle(pred: &BinaryMask, reference: &BinaryMask, alpha: f64) -> f64 {
    let w = [1.0; 3];
    let dp = ball_dilate(pred, alpha, w);
    let dr = ball_dilate(reference, alpha, w);
    let mut num = 0;
    let mut den = 0;
    for i in 0..pred.voxels().len() {
        let (p, r) = (pred.voxels()[i], reference.voxels()[i]);
        if p || r {
            den += 1;
            if (dp.voxels()[i] && r) || (p && dr.voxels()[i]) {
                num += 1;
            }
        }
    }
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => num as f64 / den as f64,
    }
}

/// Length measure on given skeletons, through explicit ball dilations.
pub fn length_oracle(
    pred: &BinaryMask,
    reference: &BinaryMask,
    skel_pred: &BinaryMask,
    skel_ref: &BinaryMask,
    beta: f64,
) -> f64 {
    if pred.is_empty() || reference.is_empty() {
        return if pred.is_empty() && reference.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    let w = [1.0; 3];
    let dp = ball_dilate(pred, beta, w);
    let dr = ball_dilate(reference, beta, w);
    let mut num = 0;
    let mut den = 0;
    for i in 0..pred.voxels().len() {
        let (sp, sr) = (skel_pred.voxels()[i], skel_ref.voxels()[i]);
        if sp || sr {
            den += 1;
            if (sp && dr.voxels()[i]) || (sr && dp.voxels()[i]) {
                num += 1;
            }
        }
    }
    num as f64 / den as f64
}

pub fn iou_oracle(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = and_count(a, b);
    let union = a
        .voxels()
        .iter()
        .zip(b.voxels())
        .filter(|(&x, &y)| x || y)
        .count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Breadth-first flood fill; ids in order of each component's first voxel.
pub fn flood_fill(mask: &BinaryMask, full26: bool) -> (Vec<u32>, Vec<usize>) {
    let d = mask.dims();
    let mut offsets = Vec::new();
    for oz in -1i64..=1 {
        for oy in -1i64..=1 {
            for ox in -1i64..=1 {
                let manhattan = ox.abs() + oy.abs() + oz.abs();
                if manhattan != 0 && (full26 || manhattan == 1) {
                    offsets.push([ox, oy, oz]);
                }
            }
        }
    }
    let mut ids = vec![0u32; d.len()];
    let mut sizes = Vec::new();
    for seed in 0..d.len() {
        if !mask.voxels()[seed] || ids[seed] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0;
        let mut queue = VecDeque::from([seed]);
        ids[seed] = id;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let [x, y, z] = d.coords(i);
            for o in &offsets {
                let (px, py, pz) = (x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]);
                if d.contains(px, py, pz) {
                    let j = d.index(px as usize, py as usize, pz as usize);
                    if mask.voxels()[j] && ids[j] == 0 {
                        ids[j] = id;
                        queue.push_back(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    (ids, sizes)
}

pub fn component_count(mask: &BinaryMask) -> usize {
    flood_fill(mask, true).1.len()
}

/// Largest flood-fill component per class; the earliest-seeded wins size ties.
pub fn keep_largest_oracle(v: &LabelVolume, full26: bool) -> Vec<u8> {
    let mut out = v.labels().to_vec();
    for label in [1u8, 2] {
        let (ids, sizes) = flood_fill(&v.class_mask(label), full26);
        let mut best = 0;
        for (k, &s) in sizes.iter().enumerate() {
            if s > sizes[best] {
                best = k;
            }
        }
        for (slot, &id) in out.iter_mut().zip(&ids) {
            if id != 0 && id as usize != best + 1 {
                *slot = 0;
            }
        }
    }
    out
}

/// Label volume with several small random boxes per class.
pub fn multi_component_labels(rng: &mut SplitMix64, n: usize) -> LabelVolume {
    let d = dims(n);
    let mut labels = vec![0u8; d.len()];
    for label in [1u8, 2] {
        let boxes = 1 + (rng.next_u64() % 4) as usize;
        for _ in 0..boxes {
            let lo: Vec<usize> = (0..3)
                .map(|_| (rng.next_u64() % (n as u64 - 2)) as usize)
                .collect();
            let ext: Vec<usize> = (0..3).map(|_| 1 + (rng.next_u64() % 4) as usize).collect();
            for z in lo[2]..(lo[2] + ext[2]).min(n) {
                for y in lo[1]..(lo[1] + ext[1]).min(n) {
                    for x in lo[0]..(lo[0] + ext[0]).min(n) {
                        labels[d.index(x, y, z)] = label;
                    }
                }
            }
        }
    }
    LabelVolume::new(d.as_array(), Spacing::isotropic(), labels).unwrap()
}

/// Seeded tree phantom with randomised shape parameters.
pub fn random_tree(seed: u64, n: usize) -> BinaryMask {
    let mut rng = SplitMix64::new(seed ^ 0x5EED);
    let spec = TreeSpec {
        seed,
        depth: 2 + (rng.next_u64() % 3) as u32,
        root_radius: rng.uniform(1.0, 3.0),
        decay: rng.uniform(0.6, 0.9),
        segment_length: [n as f64 / 6.0, n as f64 / 3.0],
        ..TreeSpec::default()
    };
    gen_tree(&spec, dims(n), Spacing::isotropic()).unwrap().0
}

/// Seeded capsule along a random interior polyline.
pub fn random_tube(seed: u64, n: usize) -> BinaryMask {
    let mut rng = SplitMix64::new(seed);
    let lo = 4.0;
    let hi = n as f64 - 5.0;
    let points = (0..3)
        .map(|_| {
            [
                rng.uniform(lo, hi),
                rng.uniform(lo, hi),
                rng.uniform(lo, hi),
            ]
        })
        .collect();
    let radius = rng.uniform(0.5, 3.0);
    gen_capsule(
        &Polyline::new(points).unwrap(),
        radius,
        dims(n),
        Spacing::isotropic(),
    )
    .unwrap()
}

/// Tubes for even seeds, trees for odd ones.
pub fn random_phantom(seed: u64, n: usize) -> BinaryMask {
    if seed % 2 == 0 {
        random_tube(seed, n)
    } else {
        random_tree(seed, n)
    }
}

/// A prediction derived from `reference` by one or two random degradations.
pub fn degraded_copy(reference: &BinaryMask, seed: u64) -> BinaryMask {
    let mut rng = SplitMix64::new(seed.wrapping_mul(31) + 7);
    let n = reference.dims().nz as u64;
    let pick = |rng: &mut SplitMix64| match rng.next_u64() % 4 {
        0 => DegradeOp::Break {
            axis: [Axis::X, Axis::Y, Axis::Z][(rng.next_u64() % 3) as usize],
            center: (n / 4 + rng.next_u64() % (n / 2)) as usize,
            thickness: 1 + (rng.next_u64() % 4) as usize,
        },
        1 => DegradeOp::Thicken {
            radius: rng.uniform(1.0, 2.5),
        },
        2 => DegradeOp::Thin { radius: 1.0 },
        _ => DegradeOp::Shift {
            offset: [
                (rng.next_u64() % 5) as i64 - 2,
                (rng.next_u64() % 5) as i64 - 2,
                (rng.next_u64() % 3) as i64 - 1,
            ],
        },
    };
    let ops = vec![pick(&mut rng), pick(&mut rng)];
    degrade(reference, &ops).unwrap()
}

/// Any fully set 2x2x2 block.
pub fn has_full_block(mask: &BinaryMask) -> bool {
    let d = mask.dims();
    for z in 0..d.nz.saturating_sub(1) {
        for y in 0..d.ny.saturating_sub(1) {
            for x in 0..d.nx.saturating_sub(1) {
                let full = (0..8).all(|k| mask.get(x + (k & 1), y + ((k >> 1) & 1), z + (k >> 2)));
                if full {
                    return true;
                }
            }
        }
    }
    false
}

/// Lattice points `(i, j)` with `i^2 + j^2 <= r^2`.
pub fn disk_count(r: i64) -> usize {
    let mut n = 0;
    for i in -r..=r {
        for j in -r..=r {
            if i * i + j * j <= r * r {
                n += 1;
            }
        }
    }
    n
}

/// Cylinder of radius `r` along z through `(cx, cy)`, `z0 <= z < z0 + len`.
pub fn cylinder(d: Dims, cx: usize, cy: usize, r: f64, z0: usize, len: usize) -> BinaryMask {
    BinaryMask::from_fn(d, Spacing::isotropic(), |x, y, z| {
        let (dx, dy) = (x as f64 - cx as f64, y as f64 - cy as f64);
        dx * dx + dy * dy <= r * r && (z0..z0 + len).contains(&z)
    })
}

/// Test-side NIfTI-1 encoder, written field by field from the format layout.
pub struct NiftiFixture {
    pub dims: [usize; 3],
    pub pixdim: [f32; 3],
    pub datatype: i16,
    pub bitpix: i16,
    pub slope: f32,
    pub inter: f32,
    pub magic: [u8; 4],
    pub big_endian: bool,
}

impl NiftiFixture {
    pub fn uint8(dims: [usize; 3]) -> Self {
        NiftiFixture {
            dims,
            pixdim: [1.0; 3],
            datatype: 2,
            bitpix: 8,
            slope: 1.0,
            inter: 0.0,
            magic: *b"n+1\0",
            big_endian: false,
        }
    }

    pub fn with_type(mut self, datatype: i16, bitpix: i16) -> Self {
        self.datatype = datatype;
        self.bitpix = bitpix;
        self
    }

    fn put(&self, buf: &mut [u8], at: usize, le: &[u8]) {
        let mut b = le.to_vec();
        if self.big_endian {
            b.reverse();
        }
        buf[at..at + b.len()].copy_from_slice(&b);
    }

    /// Encodes each value in the fixture's datatype and byte order.
    pub fn encode_values(&self, values: &[f64]) -> Vec<u8> {
        let mut out = Vec::new();
        for &v in values {
            let mut le = match self.datatype {
                2 => vec![v as u8],
                4 => (v as i16).to_le_bytes().to_vec(),
                512 => (v as u16).to_le_bytes().to_vec(),
                8 => (v as i32).to_le_bytes().to_vec(),
                16 => (v as f32).to_le_bytes().to_vec(),
                other => panic!("fixture cannot encode datatype {other}"),
            };
            if self.big_endian {
                le.reverse();
            }
            out.extend(le);
        }
        out
    }

    pub fn build(&self, values: &[f64]) -> Vec<u8> {
        let mut buf = vec![0u8; 352];
        self.put(&mut buf, 0, &348i32.to_le_bytes());
        let dim: [i16; 8] = [
            3,
            self.dims[0] as i16,
            self.dims[1] as i16,
            self.dims[2] as i16,
            1,
            1,
            1,
            1,
        ];
        for (k, d) in dim.iter().enumerate() {
            self.put(&mut buf, 40 + 2 * k, &d.to_le_bytes());
        }
        self.put(&mut buf, 70, &self.datatype.to_le_bytes());
        self.put(&mut buf, 72, &self.bitpix.to_le_bytes());
        let pixdim = [
            1.0,
            self.pixdim[0],
            self.pixdim[1],
            self.pixdim[2],
            1.0,
            1.0,
            1.0,
            1.0f32,
        ];
        for (k, p) in pixdim.iter().enumerate() {
            self.put(&mut buf, 76 + 4 * k, &p.to_le_bytes());
        }
        self.put(&mut buf, 108, &352f32.to_le_bytes());
        self.put(&mut buf, 112, &self.slope.to_le_bytes());
        self.put(&mut buf, 116, &self.inter.to_le_bytes());
        buf[344..348].copy_from_slice(&self.magic);
        buf.extend(self.encode_values(values));
        buf
    }
}

pub fn gzip(bytes: &[u8]) -> Vec<u8> {
    use std::io::Write;
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap()
}
