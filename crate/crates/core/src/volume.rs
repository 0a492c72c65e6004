//! Dense 3D voxel grids.
//!
//! Storage is x-fastest: voxel `(x, y, z)` lives at `x + nx * (y + ny * z)`,
//! the same order NIfTI-1 uses on disk. Grids are immutable once built and
//! every operation returns a new grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extent in voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::BadDims([nx, ny, nz]));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let rest = index / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.nx
            && (y as usize) < self.ny
            && (z as usize) < self.nz
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Physical voxel size in millimetres along x, y, z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
}

impl Spacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(dx) && ok(dy) && ok(dz)) {
            return Err(Error::BadSpacing([dx, dy, dz]));
        }
        Ok(Spacing { dx, dy, dz })
    }

    pub const fn isotropic() -> Self {
        Spacing {
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing::isotropic()
    }
}

impl fmt::Display for Spacing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}) mm", self.dx, self.dy, self.dz)
    }
}

/// Common surface of [`BinaryMask`] and [`LabelVolume`], used by operations
/// that must return the same grid type they were given.
pub trait Grid: Sized {
    type Voxel: Copy + PartialEq + Default + Send + Sync;

    fn dims(&self) -> Dims;
    fn spacing(&self) -> Spacing;
    fn values(&self) -> &[Self::Voxel];
    fn from_values(dims: Dims, spacing: Spacing, values: Vec<Self::Voxel>) -> Result<Self>;
    fn is_foreground(v: Self::Voxel) -> bool;
}

fn check_same_grid(a: (Dims, Spacing), b: (Dims, Spacing)) -> Result<()> {
    if a.0 != b.0 {
        return Err(Error::ShapeMismatch {
            left: a.0,
            right: b.0,
        });
    }
    if a.1 != b.1 {
        return Err(Error::SpacingMismatch {
            left: a.1,
            right: b.1,
        });
    }
    Ok(())
}

/// Fails unless both grids share dims and (exactly) spacing.
pub fn ensure_same_grid<A: Grid, B: Grid>(a: &A, b: &B) -> Result<()> {
    check_same_grid((a.dims(), a.spacing()), (b.dims(), b.spacing()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
    Xor,
    Minus,
}

/// Dense boolean voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    dims: Dims,
    spacing: Spacing,
    voxels: Vec<bool>,
}

impl BinaryMask {
    /// Builds a mask from raw dims, validating everything.
    pub fn new(dims: [usize; 3], spacing: Spacing, voxels: Vec<bool>) -> Result<Self> {
        let dims = Dims::new(dims[0], dims[1], dims[2])?;
        // Spacing may have been built with a struct literal.
        Spacing::new(spacing.dx, spacing.dy, spacing.dz)?;
        if voxels.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: voxels.len(),
            });
        }
        Ok(BinaryMask {
            dims,
            spacing,
            voxels,
        })
    }

    pub fn empty(dims: Dims, spacing: Spacing) -> Self {
        BinaryMask {
            dims,
            spacing,
            voxels: vec![false; dims.len()],
        }
    }

    pub fn full(dims: Dims, spacing: Spacing) -> Self {
        BinaryMask {
            dims,
            spacing,
            voxels: vec![true; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, spacing: Spacing, f: impl Fn(usize, usize, usize) -> bool) -> Self {
        let mut voxels = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    voxels.push(f(x, y, z));
                }
            }
        }
        BinaryMask {
            dims,
            spacing,
            voxels,
        }
    }

    /// Mask with the listed voxels set; out-of-range coordinates are ignored.
    pub fn from_points(dims: Dims, spacing: Spacing, points: &[[usize; 3]]) -> Self {
        let mut voxels = vec![false; dims.len()];
        for &[x, y, z] in points {
            if x < dims.nx && y < dims.ny && z < dims.nz {
                voxels[dims.index(x, y, z)] = true;
            }
        }
        BinaryMask {
            dims,
            spacing,
            voxels,
        }
    }

    pub(crate) fn from_parts_unchecked(dims: Dims, spacing: Spacing, voxels: Vec<bool>) -> Self {
        debug_assert_eq!(voxels.len(), dims.len());
        BinaryMask {
            dims,
            spacing,
            voxels,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn voxels(&self) -> &[bool] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<bool> {
        self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.voxels[self.dims.index(x, y, z)]
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.voxels.iter().any(|&v| v)
    }

    /// Linear indices of foreground voxels in ascending order.
    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.voxels
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
    }

    pub fn with_spacing(&self, spacing: Spacing) -> Result<Self> {
        Spacing::new(spacing.dx, spacing.dy, spacing.dz)?;
        Ok(BinaryMask {
            spacing,
            ..self.clone()
        })
    }

    pub fn not(&self) -> Self {
        BinaryMask {
            dims: self.dims,
            spacing: self.spacing,
            voxels: self.voxels.iter().map(|&v| !v).collect(),
        }
    }

    pub fn combine(&self, other: &BinaryMask, op: BoolOp) -> Result<Self> {
        ensure_same_grid(self, other)?;
        let f: fn(bool, bool) -> bool = match op {
            BoolOp::And => |a, b| a & b,
            BoolOp::Or => |a, b| a | b,
            BoolOp::Xor => |a, b| a ^ b,
            BoolOp::Minus => |a, b| a & !b,
        };
        let voxels = self
            .voxels
            .iter()
            .zip(&other.voxels)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(BinaryMask {
            dims: self.dims,
            spacing: self.spacing,
            voxels,
        })
    }

    pub fn and(&self, other: &BinaryMask) -> Result<Self> {
        self.combine(other, BoolOp::And)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<Self> {
        self.combine(other, BoolOp::Or)
    }

    /// `|self ∩ other|` without materialising the intersection.
    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        ensure_same_grid(self, other)?;
        Ok(self
            .voxels
            .iter()
            .zip(&other.voxels)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    /// True when every foreground voxel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims == other.dims
            && self
                .voxels
                .iter()
                .zip(&other.voxels)
                .all(|(&a, &b)| !a || b)
    }
}

impl Grid for BinaryMask {
    type Voxel = bool;

    fn dims(&self) -> Dims {
        self.dims
    }
    fn spacing(&self) -> Spacing {
        self.spacing
    }
    fn values(&self) -> &[bool] {
        &self.voxels
    }
    fn from_values(dims: Dims, spacing: Spacing, values: Vec<bool>) -> Result<Self> {
        BinaryMask::new(dims.as_array(), spacing, values)
    }
    fn is_foreground(v: bool) -> bool {
        v
    }
}

/// Free-function form of [`BinaryMask::combine`].
pub fn boolean_op(a: &BinaryMask, b: &BinaryMask, op: BoolOp) -> Result<BinaryMask> {
    a.combine(b, op)
}

/// Vessel class stored in a [`LabelVolume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VesselClass {
    Hepatic,
    Portal,
}

impl VesselClass {
    pub const ALL: [VesselClass; 2] = [VesselClass::Hepatic, VesselClass::Portal];

    pub fn label(self) -> u8 {
        match self {
            VesselClass::Hepatic => LabelVolume::HEPATIC,
            VesselClass::Portal => LabelVolume::PORTAL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VesselClass::Hepatic => "hepatic",
            VesselClass::Portal => "portal",
        }
    }
}

/// Dense label grid: 0 background, 1 hepatic, 2 portal.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    dims: Dims,
    spacing: Spacing,
    labels: Vec<u8>,
}

impl LabelVolume {
    pub const BACKGROUND: u8 = 0;
    pub const HEPATIC: u8 = 1;
    pub const PORTAL: u8 = 2;

    pub fn new(dims: [usize; 3], spacing: Spacing, labels: Vec<u8>) -> Result<Self> {
        let dims = Dims::new(dims[0], dims[1], dims[2])?;
        Spacing::new(spacing.dx, spacing.dy, spacing.dz)?;
        if labels.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > Self::PORTAL) {
            return Err(Error::LabelRange { value: bad as f64 });
        }
        Ok(LabelVolume {
            dims,
            spacing,
            labels,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.labels[self.dims.index(x, y, z)]
    }

    /// Voxels carrying `label`.
    pub fn class_mask(&self, label: u8) -> BinaryMask {
        BinaryMask::from_parts_unchecked(
            self.dims,
            self.spacing,
            self.labels.iter().map(|&l| l == label).collect(),
        )
    }

    /// Union of all vessel classes.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask::from_parts_unchecked(
            self.dims,
            self.spacing,
            self.labels.iter().map(|&l| l != Self::BACKGROUND).collect(),
        )
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

impl From<&BinaryMask> for LabelVolume {
    fn from(m: &BinaryMask) -> Self {
        LabelVolume {
            dims: m.dims,
            spacing: m.spacing,
            labels: m.voxels.iter().map(|&v| v as u8).collect(),
        }
    }
}

impl Grid for LabelVolume {
    type Voxel = u8;

    fn dims(&self) -> Dims {
        self.dims
    }
    fn spacing(&self) -> Spacing {
        self.spacing
    }
    fn values(&self) -> &[u8] {
        &self.labels
    }
    fn from_values(dims: Dims, spacing: Spacing, values: Vec<u8>) -> Result<Self> {
        LabelVolume::new(dims.as_array(), spacing, values)
    }
    fn is_foreground(v: u8) -> bool {
        v != 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iso() -> Spacing {
        Spacing::isotropic()
    }

    #[test]
    fn make_mask_examples() {
        let m = BinaryMask::new([1, 1, 1], iso(), vec![true]).unwrap();
        assert_eq!(m.count(), 1);

        let err = BinaryMask::new([2, 2, 2], iso(), vec![false; 7]).unwrap_err();
        assert_eq!(
            err,
            Error::LengthMismatch {
                expected: 8,
                actual: 7
            }
        );

        let m = BinaryMask::new([3, 3, 3], iso(), vec![false; 27]).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn make_mask_rejects_bad_dims_and_spacing() {
        assert!(matches!(
            BinaryMask::new([0, 2, 2], iso(), vec![]),
            Err(Error::BadDims(_))
        ));
        let bad = Spacing {
            dx: 1.0,
            dy: 0.0,
            dz: 1.0,
        };
        assert!(matches!(
            BinaryMask::new([1, 1, 1], bad, vec![true]),
            Err(Error::BadSpacing(_))
        ));
        assert!(Spacing::new(1.0, f64::NAN, 1.0).is_err());
        assert!(Spacing::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn linear_layout_is_x_fastest() {
        let d = Dims::new(3, 4, 5).unwrap();
        assert_eq!(d.index(1, 0, 0), 1);
        assert_eq!(d.index(0, 1, 0), 3);
        assert_eq!(d.index(0, 0, 1), 12);
        assert_eq!(d.index(2, 3, 4), 59);
    }

    #[test]
    fn boolean_op_examples() {
        let d = Dims::new(2, 1, 1).unwrap();
        let a = BinaryMask::from_points(d, iso(), &[[0, 0, 0], [1, 0, 0]]);
        let b = BinaryMask::from_points(d, iso(), &[[1, 0, 0]]);
        assert_eq!(a.and(&a).unwrap(), a);
        assert!(a.combine(&a, BoolOp::Minus).unwrap().is_empty());
        assert_eq!(a.and(&b).unwrap(), b);
        assert_eq!(
            a.combine(&b, BoolOp::Xor).unwrap(),
            BinaryMask::from_points(d, iso(), &[[0, 0, 0]])
        );
    }

    #[test]
    fn boolean_op_checks_grid() {
        let a = BinaryMask::empty(Dims::new(2, 2, 2).unwrap(), iso());
        let b = BinaryMask::empty(Dims::new(2, 2, 3).unwrap(), iso());
        assert!(matches!(a.and(&b), Err(Error::ShapeMismatch { .. })));
        let c = a
            .with_spacing(Spacing::new(1.0, 1.0, 2.0).unwrap())
            .unwrap();
        assert!(matches!(a.or(&c), Err(Error::SpacingMismatch { .. })));
    }

    #[test]
    fn count_examples() {
        let d = Dims::new(4, 4, 4).unwrap();
        assert_eq!(BinaryMask::empty(d, iso()).count(), 0);
        assert_eq!(BinaryMask::full(d, iso()).count(), 64);
        let line = BinaryMask::from_points(d, iso(), &[[0, 0, 0], [1, 0, 0], [2, 0, 0]]);
        assert_eq!(line.count(), 3);
    }

    #[test]
    fn label_volume_validates_labels() {
        assert!(matches!(
            LabelVolume::new([2, 1, 1], iso(), vec![0, 3]),
            Err(Error::LabelRange { .. })
        ));
        let v = LabelVolume::new([3, 1, 1], iso(), vec![0, 1, 2]).unwrap();
        assert_eq!(v.class_mask(1).count(), 1);
        assert_eq!(v.foreground().count(), 2);
    }

    fn mask_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(nx, ny, nz)| {
            let n = nx * ny * nz;
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(a, b)| {
                    (
                        BinaryMask::new([nx, ny, nz], Spacing::isotropic(), a).unwrap(),
                        BinaryMask::new([nx, ny, nz], Spacing::isotropic(), b).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn inclusion_exclusion((a, b) in mask_pair()) {
            let and = a.and(&b).unwrap();
            let or = a.or(&b).unwrap();
            prop_assert_eq!(and.count() + or.count(), a.count() + b.count());
            for op in [BoolOp::And, BoolOp::Or, BoolOp::Xor, BoolOp::Minus] {
                let r = a.combine(&b, op).unwrap();
                prop_assert_eq!(r.dims(), a.dims());
                prop_assert_eq!(r.spacing(), a.spacing());
            }
        }

        #[test]
        fn index_round_trip(nx in 1usize..20, ny in 1usize..20, nz in 1usize..20) {
            let d = Dims::new(nx, ny, nz).unwrap();
            for i in 0..d.len() {
                let [x, y, z] = d.coords(i);
                prop_assert_eq!(d.index(x, y, z), i);
            }
        }
    }
}
