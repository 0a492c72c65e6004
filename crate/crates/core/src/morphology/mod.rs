//! Distance transforms, ball dilation and erosion, boundary extraction and
//! connected components.

mod components;
mod edt;

pub use components::{connected_components, count_components, ComponentLabeling, Connectivity};
pub use edt::{squared_edt, DistanceField, DistanceMetric};

use crate::error::{Error, Result};
use crate::volume::BinaryMask;

fn check_radius(radius: f64) -> Result<()> {
    if radius >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeRadius(radius))
    }
}

/// Minkowski sum with a closed Euclidean ball of `radius` sampled at voxel
/// centres, computed by thresholding the exact EDT.
pub fn dilate(mask: &BinaryMask, radius: f64, metric: DistanceMetric) -> Result<BinaryMask> {
    check_radius(radius)?;
    if radius == 0.0 {
        return Ok(mask.clone());
    }
    Ok(squared_edt(mask, metric).within(radius))
}

/// Keeps voxels farther than `radius` from every background voxel.
///
/// Space outside the volume does not count as background, so masks touching
/// the border are not eroded from that side.
pub fn erode(mask: &BinaryMask, radius: f64, metric: DistanceMetric) -> Result<BinaryMask> {
    check_radius(radius)?;
    if radius == 0.0 {
        return Ok(mask.clone());
    }
    let r2 = radius * radius;
    let background = squared_edt(&mask.not(), metric);
    let voxels = mask
        .voxels()
        .iter()
        .zip(background.values())
        .map(|(&v, &d)| v && d > r2)
        .collect();
    Ok(BinaryMask::from_parts_unchecked(
        mask.dims(),
        mask.spacing(),
        voxels,
    ))
}

/// Foreground voxels with a face-adjacent background neighbour or lying on
/// the volume border.
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let dims = mask.dims();
    let [nx, ny, nz] = dims.as_array();
    let v = mask.voxels();
    let mut out = vec![false; v.len()];
    for idx in mask.foreground_indices() {
        let [x, y, z] = dims.coords(idx);
        let on_border = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
        out[idx] = on_border
            || !v[idx - 1]
            || !v[idx + 1]
            || !v[idx - nx]
            || !v[idx + nx]
            || !v[idx - nx * ny]
            || !v[idx + nx * ny];
    }
    BinaryMask::from_parts_unchecked(dims, mask.spacing(), out)
}
