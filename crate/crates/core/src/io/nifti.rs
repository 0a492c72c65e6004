//! NIfTI-1 single-file (`.nii`, `.nii.gz`) reader and writer.
//!
//! Only what label volumes need: dims, pixdim, datatype, scaling and the
//! magic. Orientation (qform/sform) is ignored; pixdim alone gives spacing.

use std::io::{Read, Write};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::{Grid, LabelVolume, Spacing};

pub const HEADER_SIZE: usize = 348;
/// Header plus the four-byte extension flag.
pub const VOX_OFFSET: usize = 352;

const MAGIC_SINGLE: [u8; 4] = *b"n+1\0";
const MAGIC_PAIR: [u8; 4] = *b"ni1\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

/// Voxel storage types accepted on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Uint16,
}

impl Datatype {
    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            512 => Datatype::Uint16,
            other => return Err(Error::UnsupportedDatatype(other)),
        })
    }

    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Uint16 => 512,
        }
    }

    pub fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 | Datatype::Uint16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
        }
    }
}

/// The header fields this crate consumes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NiftiHeader {
    pub sizeof_hdr: i32,
    pub dim: [i16; 8],
    pub datatype: Datatype,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub magic: [u8; 4],
    pub endianness: Endianness,
}

impl NiftiHeader {
    pub fn dims(&self) -> [usize; 3] {
        [
            self.dim[1] as usize,
            self.dim[2] as usize,
            self.dim[3] as usize,
        ]
    }

    pub fn spacing(&self) -> Result<Spacing> {
        Spacing::new(
            self.pixdim[1].abs() as f64,
            self.pixdim[2].abs() as f64,
            self.pixdim[3].abs() as f64,
        )
    }
}

/// How stored values map onto labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelScheme {
    /// Stored value of hepatic voxels.
    pub hepatic: i64,
    /// Stored value of portal voxels.
    pub portal: i64,
}

impl Default for LabelScheme {
    fn default() -> Self {
        LabelScheme {
            hepatic: 1,
            portal: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadOptions {
    pub labels: LabelScheme,
    /// Map values outside the label alphabet to hepatic (1) instead of failing.
    pub permissive: bool,
}

impl ReadOptions {
    pub(crate) fn map_value(&self, scaled: f64) -> Result<u8> {
        if !scaled.is_finite() {
            return Err(Error::LabelRange { value: scaled });
        }
        // f64::round is half-away-from-zero.
        let v = scaled.round();
        if v == 0.0 {
            Ok(LabelVolume::BACKGROUND)
        } else if v == self.labels.hepatic as f64 {
            Ok(LabelVolume::HEPATIC)
        } else if v == self.labels.portal as f64 {
            Ok(LabelVolume::PORTAL)
        } else if self.permissive {
            Ok(LabelVolume::HEPATIC)
        } else {
            Err(Error::LabelRange { value: scaled })
        }
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B
}

/// Returns the uncompressed stream, inflating it when it carries a gzip prefix.
pub fn maybe_decompress(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>> {
    if is_gzip(bytes) {
        let mut out = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut out)?;
        Ok(std::borrow::Cow::Owned(out))
    } else {
        Ok(std::borrow::Cow::Borrowed(bytes))
    }
}

struct Fields<'a> {
    bytes: &'a [u8],
    endianness: Endianness,
}

impl Fields<'_> {
    fn take<const N: usize>(&self, at: usize) -> [u8; N] {
        self.bytes[at..at + N].try_into().unwrap()
    }

    fn i16(&self, at: usize) -> i16 {
        match self.endianness {
            Endianness::Little => i16::from_le_bytes(self.take(at)),
            Endianness::Big => i16::from_be_bytes(self.take(at)),
        }
    }

    fn i32(&self, at: usize) -> i32 {
        match self.endianness {
            Endianness::Little => i32::from_le_bytes(self.take(at)),
            Endianness::Big => i32::from_be_bytes(self.take(at)),
        }
    }

    fn f32(&self, at: usize) -> f32 {
        match self.endianness {
            Endianness::Little => f32::from_le_bytes(self.take(at)),
            Endianness::Big => f32::from_be_bytes(self.take(at)),
        }
    }
}

/// Parses and validates the 348-byte header of an uncompressed stream.
pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::TruncatedData {
            expected: HEADER_SIZE,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[344..348].try_into().unwrap();
    if magic == MAGIC_PAIR {
        return Err(Error::InvalidHeader(
            "header/image pair (ni1) files are not supported; use single-file n+1".into(),
        ));
    }
    if magic != MAGIC_SINGLE {
        return Err(Error::BadMagic(magic));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let endianness = if le == HEADER_SIZE as i32 {
        Endianness::Little
    } else if i32::from_be_bytes(bytes[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
        Endianness::Big
    } else {
        return Err(Error::InvalidHeader(format!(
            "sizeof_hdr is {le}, expected 348"
        )));
    };
    let f = Fields { bytes, endianness };

    let mut dim = [0i16; 8];
    for (i, d) in dim.iter_mut().enumerate() {
        *d = f.i16(40 + 2 * i);
    }
    let mut pixdim = [0f32; 8];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = f.f32(76 + 4 * i);
    }
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(Error::InvalidHeader(format!("dim[0] = {ndim}")));
    }
    for i in 1..=3 {
        if i as i16 > ndim {
            dim[i] = 1;
            pixdim[i] = 1.0;
        } else if dim[i] < 1 {
            return Err(Error::InvalidHeader(format!("dim[{i}] = {}", dim[i])));
        }
    }
    if (4..=ndim as usize).any(|i| dim[i] > 1) {
        return Err(Error::InvalidHeader(format!(
            "only 3D volumes are supported, got dim = {:?}",
            &dim[..=ndim as usize]
        )));
    }

    let datatype = Datatype::from_code(f.i16(70))?;
    let bitpix = f.i16(72);
    if bitpix as usize != 8 * datatype.bytes() {
        return Err(Error::InvalidHeader(format!(
            "bitpix {bitpix} does not match datatype {datatype:?}"
        )));
    }

    Ok(NiftiHeader {
        sizeof_hdr: HEADER_SIZE as i32,
        dim,
        datatype,
        bitpix,
        pixdim,
        vox_offset: f.f32(108),
        scl_slope: f.f32(112),
        scl_inter: f.f32(116),
        magic,
        endianness,
    })
}

/// Reads a NIfTI-1 label volume with the default label scheme.
pub fn read_nifti(bytes: &[u8]) -> Result<(LabelVolume, NiftiHeader)> {
    read_nifti_with(bytes, &ReadOptions::default())
}

pub fn read_nifti_with(bytes: &[u8], opts: &ReadOptions) -> Result<(LabelVolume, NiftiHeader)> {
    let bytes = maybe_decompress(bytes)?;
    let header = parse_header(&bytes)?;
    let dims = header.dims();
    let spacing = header.spacing()?;
    let n = dims[0] * dims[1] * dims[2];

    let offset = header.vox_offset;
    if !(offset.is_finite() && offset >= VOX_OFFSET as f32) {
        return Err(Error::InvalidHeader(format!("vox_offset {offset}")));
    }
    let start = offset as usize;
    let width = header.datatype.bytes();
    let expected = start + n * width;
    if bytes.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            actual: bytes.len(),
        });
    }

    // A zero slope means "no scaling".
    let (slope, inter) = if header.scl_slope == 0.0 || !header.scl_slope.is_finite() {
        (1.0, 0.0)
    } else {
        (header.scl_slope as f64, header.scl_inter as f64)
    };
    let f = Fields {
        bytes: &bytes,
        endianness: header.endianness,
    };
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let at = start + i * width;
        let raw = match header.datatype {
            Datatype::Uint8 => bytes[at] as f64,
            Datatype::Int16 => f.i16(at) as f64,
            Datatype::Uint16 => f.i16(at) as u16 as f64,
            Datatype::Int32 => f.i32(at) as f64,
            Datatype::Float32 => f.f32(at) as f64,
        };
        labels.push(opts.map_value(raw * slope + inter)?);
    }
    let volume = LabelVolume::new(dims, spacing, labels)?;
    Ok((volume, header))
}

/// Serialises a grid as little-endian, uint8, single-file NIfTI-1.
pub fn write_nifti<G: Grid>(volume: &G) -> Result<Vec<u8>>
where
    G::Voxel: Into<u8>,
{
    let dims = volume.dims();
    if dims.as_array().iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::DimsTooLarge(dims));
    }
    let mut out = vec![0u8; VOX_OFFSET];
    let mut put = |at: usize, bytes: &[u8]| out[at..at + bytes.len()].copy_from_slice(bytes);
    put(0, &(HEADER_SIZE as i32).to_le_bytes());
    let dim: [i16; 8] = [
        3,
        dims.nx as i16,
        dims.ny as i16,
        dims.nz as i16,
        1,
        1,
        1,
        1,
    ];
    for (i, d) in dim.iter().enumerate() {
        put(40 + 2 * i, &d.to_le_bytes());
    }
    put(70, &Datatype::Uint8.code().to_le_bytes());
    put(72, &8i16.to_le_bytes());
    let s = volume.spacing();
    let pixdim: [f32; 8] = [
        1.0,
        s.dx as f32,
        s.dy as f32,
        s.dz as f32,
        1.0,
        1.0,
        1.0,
        1.0,
    ];
    for (i, p) in pixdim.iter().enumerate() {
        put(76 + 4 * i, &p.to_le_bytes());
    }
    put(108, &(VOX_OFFSET as f32).to_le_bytes());
    put(112, &1f32.to_le_bytes());
    put(116, &0f32.to_le_bytes());
    // xyzt_units: millimetres
    put(123, &[2u8]);
    put(344, &MAGIC_SINGLE);
    out.extend(volume.values().iter().map(|&v| v.into()));
    Ok(out)
}

/// [`write_nifti`] followed by gzip compression (`.nii.gz`).
pub fn write_nifti_gz<G: Grid>(volume: &G) -> Result<Vec<u8>>
where
    G::Voxel: Into<u8>,
{
    let raw = write_nifti(volume)?;
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(&raw)?;
    Ok(enc.finish()?)
}
