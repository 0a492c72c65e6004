//! Submission post-processing: liver gating, largest-component filtering and
//! nearest-neighbour resampling.

use crate::error::Result;
use crate::morphology::{connected_components, Connectivity};
use crate::volume::{ensure_same_grid, BinaryMask, Dims, Grid, LabelVolume, Spacing};

/// Sets every vessel voxel outside `liver` to background.
pub fn apply_liver_mask<G: Grid>(vessels: &G, liver: &BinaryMask) -> Result<G> {
    ensure_same_grid(vessels, liver)?;
    let values = vessels
        .values()
        .iter()
        .zip(liver.voxels())
        .map(|(&v, &inside)| if inside { v } else { G::Voxel::default() })
        .collect();
    G::from_values(vessels.dims(), vessels.spacing(), values)
}

/// Keeps only the largest connected component of each vessel class.
///
/// Size ties go to the component containing the smaller linear voxel index.
pub fn keep_largest_per_class(volume: &LabelVolume, connectivity: Connectivity) -> LabelVolume {
    let mut labels = volume.labels().to_vec();
    for label in [LabelVolume::HEPATIC, LabelVolume::PORTAL] {
        let class = volume.class_mask(label);
        let cc = connected_components(&class, connectivity);
        let Some(keep) = cc.largest() else { continue };
        for (slot, &id) in labels.iter_mut().zip(cc.labels()) {
            if id != 0 && id != keep {
                *slot = LabelVolume::BACKGROUND;
            }
        }
    }
    LabelVolume::new(volume.dims().as_array(), volume.spacing(), labels)
        .expect("filtering keeps the label alphabet")
}

/// Binary-mask form of [`keep_largest_per_class`].
pub fn keep_largest_component(mask: &BinaryMask, connectivity: Connectivity) -> BinaryMask {
    let cc = connected_components(mask, connectivity);
    let keep = cc.largest();
    let voxels = cc
        .labels()
        .iter()
        .map(|&id| id != 0 && Some(id) == keep)
        .collect();
    BinaryMask::from_parts_unchecked(mask.dims(), mask.spacing(), voxels)
}

/// Source index along one axis for each output index.
///
/// Voxel `i` covers `[i, i+1) * spacing`, so output centre `j` sits at
/// `(j + 0.5) * target`. Exact ties resolve to the lower input index.
fn axis_lookup(n_in: usize, s_in: f64, s_out: f64) -> Vec<usize> {
    let n_out = ((n_in as f64 * s_in / s_out).round() as usize).max(1);
    (0..n_out)
        .map(|j| {
            let pos = (j as f64 + 0.5) * s_out / s_in - 0.5;
            let i = (pos - 0.5).ceil().max(0.0) as usize;
            i.min(n_in - 1)
        })
        .collect()
}

/// Nearest-neighbour resampling onto a grid with spacing `target`.
///
/// Output dims are `round(n * spacing / target)`, at least 1 per axis.
pub fn resample_nearest<G: Grid>(volume: &G, target: Spacing) -> Result<G> {
    let target = Spacing::new(target.dx, target.dy, target.dz)?;
    let dims = volume.dims();
    let src = volume.spacing();
    let lx = axis_lookup(dims.nx, src.dx, target.dx);
    let ly = axis_lookup(dims.ny, src.dy, target.dy);
    let lz = axis_lookup(dims.nz, src.dz, target.dz);
    let out_dims = Dims::new(lx.len(), ly.len(), lz.len())?;
    let values = volume.values();
    let mut out = Vec::with_capacity(out_dims.len());
    for &z in &lz {
        for &y in &ly {
            for &x in &lx {
                out.push(values[dims.index(x, y, z)]);
            }
        }
    }
    G::from_values(out_dims, target, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::BoolOp;

    fn iso() -> Spacing {
        Spacing::isotropic()
    }

    #[test]
    fn liver_gating_examples() {
        let d = Dims::new(3, 3, 3).unwrap();
        let vessels = BinaryMask::from_points(d, iso(), &[[0, 0, 0], [2, 2, 2]]);
        let full = BinaryMask::full(d, iso());
        let empty = BinaryMask::empty(d, iso());
        assert_eq!(apply_liver_mask(&vessels, &full).unwrap(), vessels);
        assert!(apply_liver_mask(&vessels, &empty).unwrap().is_empty());
        let liver = BinaryMask::from_points(d, iso(), &[[2, 2, 2]]);
        assert_eq!(apply_liver_mask(&vessels, &liver).unwrap(), liver);
        assert_eq!(
            apply_liver_mask(&vessels, &liver).unwrap(),
            vessels.combine(&liver, BoolOp::And).unwrap()
        );
    }

    #[test]
    fn liver_gating_on_labels() {
        let v = LabelVolume::new([4, 1, 1], iso(), vec![1, 2, 2, 1]).unwrap();
        let d = Dims::new(4, 1, 1).unwrap();
        let liver = BinaryMask::from_points(d, iso(), &[[1, 0, 0], [3, 0, 0]]);
        let g = apply_liver_mask(&v, &liver).unwrap();
        assert_eq!(g.labels(), &[0, 2, 0, 1]);
        let other = BinaryMask::empty(Dims::new(5, 1, 1).unwrap(), iso());
        assert!(apply_liver_mask(&v, &other).is_err());
    }

    #[test]
    fn largest_component_examples() {
        // class 1: sizes 3 and 10 along x; class 2: untouched single run.
        let mut labels = vec![0u8; 20 * 3];
        labels[0..3].fill(1);
        labels[6..16].fill(1);
        for x in 0..4 {
            labels[40 + x] = 2;
        }
        let v = LabelVolume::new([20, 3, 1], iso(), labels.clone()).unwrap();
        let out = keep_largest_per_class(&v, Connectivity::Full26);
        assert_eq!(out.count(1), 10);
        assert!(out.labels()[..3].iter().all(|&l| l == 0));
        assert_eq!(out.count(2), 4);

        // identity when every class is a single component
        assert_eq!(keep_largest_per_class(&out, Connectivity::Full26), out);
    }

    #[test]
    fn largest_component_tie_rule() {
        let mut labels = vec![0u8; 13];
        labels[..5].fill(2);
        labels[8..].fill(2);
        let v = LabelVolume::new([13, 1, 1], iso(), labels).unwrap();
        let out = keep_largest_per_class(&v, Connectivity::Face6);
        assert!(out.labels()[..5].iter().all(|&l| l == 2));
        assert!(out.labels()[8..].iter().all(|&l| l == 0));
    }

    #[test]
    fn resample_identity_and_uniform() {
        let d = Dims::new(5, 4, 3).unwrap();
        let m = BinaryMask::from_fn(d, Spacing::new(0.7, 0.8, 2.5).unwrap(), |x, y, z| {
            (x + 2 * y + z) % 3 == 0
        });
        assert_eq!(resample_nearest(&m, m.spacing()).unwrap(), m);

        let ones = BinaryMask::full(Dims::new(8, 8, 8).unwrap(), iso());
        let r = resample_nearest(&ones, Spacing::new(2.0, 2.0, 2.0).unwrap()).unwrap();
        assert_eq!(r.dims().as_array(), [4, 4, 4]);
        assert_eq!(r.count(), 64);
        assert_eq!(r.spacing(), Spacing::new(2.0, 2.0, 2.0).unwrap());
    }

    #[test]
    fn resample_checkerboard_takes_even_coordinates() {
        let d = Dims::new(8, 8, 8).unwrap();
        let labels = (0..512)
            .map(|i| {
                let [x, y, z] = d.coords(i);
                ((x + y + z) % 2) as u8
            })
            .collect();
        let v = LabelVolume::new([8, 8, 8], iso(), labels).unwrap();
        let r = resample_nearest(&v, Spacing::new(2.0, 2.0, 2.0).unwrap()).unwrap();
        assert_eq!(r.dims().as_array(), [4, 4, 4]);
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(r.get(x, y, z), v.get(2 * x, 2 * y, 2 * z));
                }
            }
        }
        assert_eq!(r.count(1), 0);
    }

    #[test]
    fn resample_rejects_bad_spacing() {
        let m = BinaryMask::full(Dims::new(2, 2, 2).unwrap(), iso());
        let bad = Spacing {
            dx: 0.0,
            dy: 1.0,
            dz: 1.0,
        };
        assert!(resample_nearest(&m, bad).is_err());
    }

    #[test]
    fn resample_upsamples_by_repetition() {
        let v = LabelVolume::new(
            [3, 1, 1],
            Spacing::new(2.0, 1.0, 1.0).unwrap(),
            vec![0, 1, 2],
        )
        .unwrap();
        let r = resample_nearest(&v, iso()).unwrap();
        assert_eq!(r.labels(), &[0, 0, 1, 1, 2, 2]);
    }
}
