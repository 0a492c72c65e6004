//! File formats: NIfTI-1, the raw+JSON container, and evaluation reports.

pub mod nifti;
pub mod raw;
pub mod report;

use std::path::Path;

pub use nifti::{
    parse_header, read_nifti, read_nifti_with, write_nifti, write_nifti_gz, Datatype, Endianness,
    LabelScheme, NiftiHeader, ReadOptions,
};
pub use raw::{read_raw_container, read_raw_container_with, write_raw_container, Sidecar};
pub use report::{parse_report_json, write_report, CurvePoint, ReportFormat, ReportRecord};

use crate::error::{Error, Result};
use crate::volume::{Grid, LabelVolume};

/// On-disk volume formats, chosen from the file name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti,
    NiftiGz,
    /// `<name>.json` sidecar plus `<name>.raw` body.
    Raw,
}

impl VolumeFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        if name.ends_with(".nii.gz") {
            Ok(VolumeFormat::NiftiGz)
        } else if name.ends_with(".nii") {
            Ok(VolumeFormat::Nifti)
        } else if name.ends_with(".json") || name.ends_with(".raw") {
            Ok(VolumeFormat::Raw)
        } else {
            Err(Error::Io(format!(
                "{}: unrecognised volume extension (expected .nii, .nii.gz, .json or .raw)",
                path.display()
            )))
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Reads a label volume from `.nii`, `.nii.gz` or a raw container (either
/// half of the pair may be named).
pub fn load_volume(path: &Path, opts: &ReadOptions) -> Result<LabelVolume> {
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Nifti | VolumeFormat::NiftiGz => {
            let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
            Ok(read_nifti_with(&bytes, opts)?.0)
        }
        VolumeFormat::Raw => {
            let json_path = path.with_extension("json");
            let raw_path = path.with_extension("raw");
            let json = std::fs::read(&json_path).map_err(|e| io_err(&json_path, e))?;
            let body = std::fs::read(&raw_path).map_err(|e| io_err(&raw_path, e))?;
            read_raw_container_with(&json, &body, opts)
        }
    }
}

/// Writes a grid in the format implied by `path`.
pub fn save_volume<G: Grid>(path: &Path, volume: &G) -> Result<()>
where
    G::Voxel: Into<u8>,
{
    match VolumeFormat::from_path(path)? {
        VolumeFormat::Nifti => {
            std::fs::write(path, write_nifti(volume)?).map_err(|e| io_err(path, e))
        }
        VolumeFormat::NiftiGz => {
            std::fs::write(path, write_nifti_gz(volume)?).map_err(|e| io_err(path, e))
        }
        VolumeFormat::Raw => {
            let (json, body) = write_raw_container(volume)?;
            let json_path = path.with_extension("json");
            let raw_path = path.with_extension("raw");
            std::fs::write(&json_path, json).map_err(|e| io_err(&json_path, e))?;
            std::fs::write(&raw_path, body).map_err(|e| io_err(&raw_path, e))
        }
    }
}
