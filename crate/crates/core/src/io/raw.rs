//! Raw container: a JSON sidecar describing an uncompressed `u8` body.
//!
//! ```json
//! {"dims": [nx, ny, nz], "spacing_mm": [dx, dy, dz], "dtype": "u8", "order": "x-fastest"}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::nifti::ReadOptions;
use crate::volume::{Grid, LabelVolume, Spacing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub dtype: String,
    pub order: String,
}

const DTYPE: &str = "u8";
const ORDER: &str = "x-fastest";

/// Returns `(sidecar JSON, raw body)`.
pub fn write_raw_container<G: Grid>(volume: &G) -> Result<(Vec<u8>, Vec<u8>)>
where
    G::Voxel: Into<u8>,
{
    let sidecar = Sidecar {
        dims: volume.dims().as_array(),
        spacing_mm: volume.spacing().as_array(),
        dtype: DTYPE.into(),
        order: ORDER.into(),
    };
    let mut json =
        serde_json::to_vec_pretty(&sidecar).map_err(|e| Error::SchemaError(e.to_string()))?;
    json.push(b'\n');
    let body = volume.values().iter().map(|&v| v.into()).collect();
    Ok((json, body))
}

pub fn parse_sidecar(json: &[u8]) -> Result<Sidecar> {
    let sidecar: Sidecar =
        serde_json::from_slice(json).map_err(|e| Error::SchemaError(e.to_string()))?;
    if sidecar.dtype != DTYPE {
        return Err(Error::SchemaError(format!(
            "dtype must be {DTYPE:?}, got {:?}",
            sidecar.dtype
        )));
    }
    if sidecar.order != ORDER {
        return Err(Error::SchemaError(format!(
            "order must be {ORDER:?}, got {:?}",
            sidecar.order
        )));
    }
    Ok(sidecar)
}

pub fn read_raw_container(json: &[u8], body: &[u8]) -> Result<LabelVolume> {
    read_raw_container_with(json, body, &ReadOptions::default())
}

pub fn read_raw_container_with(
    json: &[u8],
    body: &[u8],
    opts: &ReadOptions,
) -> Result<LabelVolume> {
    let sidecar = parse_sidecar(json)?;
    let [dx, dy, dz] = sidecar.spacing_mm;
    let spacing = Spacing::new(dx, dy, dz)?;
    let expected: usize = sidecar.dims.iter().product();
    if body.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: body.len(),
        });
    }
    let labels = body
        .iter()
        .map(|&b| opts.map_value(b as f64))
        .collect::<Result<Vec<u8>>>()?;
    LabelVolume::new(sidecar.dims, spacing, labels)
}
