//! Synthetic vessel phantoms and controlled degradations.
//!
//! Random trees draw from [`SplitMix64`], a fully specified 64-bit recurrence,
//! so a seed reproduces the same fixture in any implementation that follows
//! the same generation order.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{dilate, erode, DistanceMetric};
use crate::volume::{BinaryMask, Dims, Spacing};

/// SplitMix64 (Steele, Lea and Flood): `state += 0x9E3779B97F4A7C15`, then a
/// xor-shift-multiply finaliser. Floats take the top 53 bits.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the range is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Ordered centreline points in voxel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<[f64; 3]>,
}

impl Polyline {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::SpecInvalid(
                "a polyline needs at least two points".into(),
            ));
        }
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::SpecInvalid(
                "consecutive polyline points must differ".into(),
            ));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::SpecInvalid("polyline points must be finite".into()));
        }
        Ok(Polyline { points })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn segments(&self) -> impl Iterator<Item = ([f64; 3], [f64; 3])> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Squared distance from `p` to segment `ab`. The perpendicular case uses the
/// cross-product form, which is exact for integer-valued inputs.
pub(crate) fn segment_distance2(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let len2 = dot(ab, ab);
    let t = dot(ap, ab);
    if len2 == 0.0 || t <= 0.0 {
        return dot(ap, ap);
    }
    if t >= len2 {
        let bp = sub(p, b);
        return dot(bp, bp);
    }
    let c = cross(ap, ab);
    dot(c, c) / len2
}

fn stamp_segment(voxels: &mut [bool], dims: Dims, a: [f64; 3], b: [f64; 3], radius: f64) {
    let r2 = radius * radius;
    let n = dims.as_array();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        let min = (a[k].min(b[k]) - radius).ceil().max(0.0);
        let max = (a[k].max(b[k]) + radius).floor().min((n[k] - 1) as f64);
        if min > max {
            return;
        }
        lo[k] = min as usize;
        hi[k] = max as usize;
    }
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let p = [x as f64, y as f64, z as f64];
                if segment_distance2(p, a, b) <= r2 {
                    voxels[dims.index(x, y, z)] = true;
                }
            }
        }
    }
}

fn check_inside(point: [f64; 3], dims: Dims) -> Result<()> {
    let n = dims.as_array();
    let inside = (0..3).all(|k| point[k] >= 0.0 && point[k] <= (n[k] - 1) as f64);
    if inside {
        Ok(())
    } else {
        Err(Error::PathOutOfBounds { point, dims })
    }
}

/// Voxels whose centre lies within `radius` voxels of the polyline.
///
/// Path points must lie inside the grid; the swept ball is clipped to it.
pub fn gen_capsule(
    path: &Polyline,
    radius: f64,
    dims: Dims,
    spacing: Spacing,
) -> Result<BinaryMask> {
    if radius.is_nan() || radius < 0.0 {
        return Err(Error::NegativeRadius(radius));
    }
    for &p in path.points() {
        check_inside(p, dims)?;
    }
    let mut voxels = vec![false; dims.len()];
    for (a, b) in path.segments() {
        stamp_segment(&mut voxels, dims, a, b, radius);
    }
    BinaryMask::new(dims.as_array(), spacing, voxels)
}

/// Straight capsule along z through the grid centre, `margin` voxels from
/// both z faces.
pub fn straight_tube(
    dims: Dims,
    spacing: Spacing,
    radius: f64,
    margin: usize,
) -> Result<BinaryMask> {
    if dims.nz <= 2 * margin + 1 {
        return Err(Error::SpecInvalid("tube margin leaves no length".into()));
    }
    let cx = (dims.nx / 2) as f64;
    let cy = (dims.ny / 2) as f64;
    let z0 = margin as f64;
    let z1 = (dims.nz - 1 - margin) as f64;
    let path = Polyline::new(vec![[cx, cy, z0], [cx, cy, z1]])?;
    gen_capsule(&path, radius, dims, spacing)
}

/// Parameters of a random bifurcating tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub seed: u64,
    /// Generations, 1 = a single trunk.
    pub depth: u32,
    /// Branch deflection from the parent direction, radians `[min, max]`.
    pub branch_angle: [f64; 2],
    pub root_radius: f64,
    /// Radius multiplier per generation, in `(0, 1]`.
    pub decay: f64,
    /// Segment length in voxels `[min, max]`.
    pub segment_length: [f64; 2],
}

impl Default for TreeSpec {
    fn default() -> Self {
        TreeSpec {
            seed: 1,
            depth: 3,
            branch_angle: [0.35, 0.8],
            root_radius: 3.0,
            decay: 0.7,
            segment_length: [12.0, 20.0],
        }
    }
}

impl TreeSpec {
    pub const MAX_DEPTH: u32 = 10;

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SpecInvalid(m.to_string()));
        if self.depth < 1 || self.depth > Self::MAX_DEPTH {
            return bad("depth must be in 1..=10");
        }
        if !(self.root_radius > 0.0 && self.root_radius.is_finite()) {
            return bad("root radius must be > 0");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        let [a0, a1] = self.branch_angle;
        if !(a0.is_finite() && a1.is_finite() && 0.0 <= a0 && a0 <= a1 && a1 <= PI) {
            return bad("branch angle range must satisfy 0 <= min <= max <= pi");
        }
        let [l0, l1] = self.segment_length;
        if !(l0.is_finite() && l1.is_finite() && 0.0 < l0 && l0 <= l1) {
            return bad("segment length range must satisfy 0 < min <= max");
        }
        Ok(())
    }
}

/// Smallest rasterised branch radius; with integer endpoints it keeps every
/// branch 26-connected.
const MIN_BRANCH_RADIUS: f64 = 1.0;

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot(v, v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Rotates unit `dir` by `angle` towards azimuth `phi` around it.
fn deflect(dir: [f64; 3], angle: f64, phi: f64) -> [f64; 3] {
    let helper = if dir[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let u = normalize(cross(dir, helper));
    let v = cross(dir, u);
    let (s, c) = angle.sin_cos();
    let (sp, cp) = phi.sin_cos();
    normalize([
        c * dir[0] + s * (cp * u[0] + sp * v[0]),
        c * dir[1] + s * (cp * u[1] + sp * v[1]),
        c * dir[2] + s * (cp * u[2] + sp * v[2]),
    ])
}

fn snap_inside(p: [f64; 3], dims: Dims) -> [f64; 3] {
    let n = dims.as_array();
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = p[k].round().clamp(0.0, (n[k] - 1) as f64);
    }
    out
}

/// Random bifurcating tree: a trunk from the centre of the low-z face along
/// +z, every branch splitting into two children on opposite sides.
///
/// Returns the mask and one two-point centreline per branch. Endpoints are
/// snapped to voxel centres inside the grid; branches that collapse to a point
/// after snapping are dropped along with their subtree.
pub fn gen_tree(
    spec: &TreeSpec,
    dims: Dims,
    spacing: Spacing,
) -> Result<(BinaryMask, Vec<Polyline>)> {
    spec.validate()?;
    Spacing::new(spacing.dx, spacing.dy, spacing.dz)?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut voxels = vec![false; dims.len()];
    let mut centerlines = Vec::new();

    let margin = spec.root_radius.ceil();
    let start = snap_inside([(dims.nx / 2) as f64, (dims.ny / 2) as f64, margin], dims);
    // (start, direction, generation)
    let mut stack = vec![(start, [0.0, 0.0, 1.0], 0u32)];
    while let Some((from, dir, generation)) = stack.pop() {
        let length = rng.uniform(spec.segment_length[0], spec.segment_length[1]);
        let radius = spec.root_radius * spec.decay.powi(generation as i32);
        let to = snap_inside(
            [
                from[0] + dir[0] * length,
                from[1] + dir[1] * length,
                from[2] + dir[2] * length,
            ],
            dims,
        );
        // Children draw their angles even if this branch is dropped, so the
        // random stream does not depend on the grid size.
        let turns = if generation + 1 < spec.depth {
            let angle_a = rng.uniform(spec.branch_angle[0], spec.branch_angle[1]);
            let angle_b = rng.uniform(spec.branch_angle[0], spec.branch_angle[1]);
            let phi = rng.uniform(0.0, 2.0 * PI);
            vec![(angle_a, phi), (angle_b, phi + PI)]
        } else {
            Vec::new()
        };
        if to == from {
            continue;
        }
        stamp_segment(&mut voxels, dims, from, to, radius.max(MIN_BRANCH_RADIUS));
        centerlines.push(Polyline::new(vec![from, to])?);
        let actual = normalize(sub(to, from));
        // Pushed in reverse so the first child is expanded first.
        for (angle, phi) in turns.into_iter().rev() {
            stack.push((to, deflect(actual, angle, phi), generation + 1));
        }
    }

    Ok((
        BinaryMask::new(dims.as_array(), spacing, voxels)?,
        centerlines,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// A mask-level degradation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum DegradeOp {
    /// Zero `thickness` planes perpendicular to `axis`, starting at
    /// `center - thickness / 2`.
    Break {
        axis: Axis,
        center: usize,
        thickness: usize,
    },
    /// Ball dilation by `radius` voxels.
    Thicken { radius: f64 },
    /// Erosion by `radius` voxels (EDT of the complement thresholded).
    Thin { radius: f64 },
    /// Translation with zero fill.
    Shift { offset: [i64; 3] },
}

impl FromStr for DegradeOp {
    type Err = Error;

    /// `break:<axis>:<center>:<thickness>`, `thicken:<r>`, `thin:<r>` or
    /// `shift:<dx>:<dy>:<dz>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::SpecInvalid(format!("cannot parse degradation {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let int = |t: &str| t.trim().parse::<i64>().map_err(|_| bad());
        match parts.as_slice() {
            ["break", axis, center, thickness] => {
                let axis = match *axis {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    "z" => Axis::Z,
                    _ => return Err(bad()),
                };
                Ok(DegradeOp::Break {
                    axis,
                    center: center.trim().parse().map_err(|_| bad())?,
                    thickness: thickness.trim().parse().map_err(|_| bad())?,
                })
            }
            ["thicken", r] => Ok(DegradeOp::Thicken { radius: num(r)? }),
            ["thin", r] => Ok(DegradeOp::Thin { radius: num(r)? }),
            ["shift", dx, dy, dz] => Ok(DegradeOp::Shift {
                offset: [int(dx)?, int(dy)?, int(dz)?],
            }),
            _ => Err(bad()),
        }
    }
}

fn apply_op(mask: &BinaryMask, op: &DegradeOp) -> Result<BinaryMask> {
    let dims = mask.dims();
    match *op {
        DegradeOp::Break {
            axis,
            center,
            thickness,
        } => {
            let lo = center.saturating_sub(thickness / 2);
            let hi = lo + thickness;
            let k = axis.index();
            let voxels = mask
                .voxels()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let c = dims.coords(i)[k];
                    v && !(lo <= c && c < hi)
                })
                .collect();
            BinaryMask::new(dims.as_array(), mask.spacing(), voxels)
        }
        DegradeOp::Thicken { radius } => dilate(mask, radius, DistanceMetric::VoxelIsotropic),
        DegradeOp::Thin { radius } => erode(mask, radius, DistanceMetric::VoxelIsotropic),
        DegradeOp::Shift { offset } => {
            let mut voxels = vec![false; dims.len()];
            for idx in mask.foreground_indices() {
                let [x, y, z] = dims.coords(idx);
                let (tx, ty, tz) = (
                    x as i64 + offset[0],
                    y as i64 + offset[1],
                    z as i64 + offset[2],
                );
                if dims.contains(tx, ty, tz) {
                    voxels[dims.index(tx as usize, ty as usize, tz as usize)] = true;
                }
            }
            BinaryMask::new(dims.as_array(), mask.spacing(), voxels)
        }
    }
}

/// Applies `ops` left to right.
pub fn degrade(mask: &BinaryMask, ops: &[DegradeOp]) -> Result<BinaryMask> {
    ops.iter().try_fold(mask.clone(), |m, op| apply_op(&m, op))
}
