//! Minimal NIfTI-1 reader/writer.
//!
//! Supported subset: single-file `.nii` (optionally gzip-compressed on
//! read), little-endian, datatypes uint8 / int16 / float32, 3D only.
//! Writing always emits an uncompressed 348-byte header immediately
//! followed by float32 data, with the geometry encoded in the sform.

use std::fs;
use std::io::Read;
use std::path::Path;

use ventriq_core::{Geometry, Mask, Volume};

pub const HEADER_LEN: usize = 348;
pub const MAX_DIM: u16 = 4096;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

#[derive(Debug, thiserror::Error)]
pub enum NiftiError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:?}; only single-file \"n+1\" NIfTI-1 is supported")]
    BadMagic([u8; 4]),
    #[error("unsupported datatype code {0}; supported: 2 (uint8), 4 (int16), 16 (float32)")]
    UnsupportedDatatype(i16),
    #[error("file is shorter than the declared image")]
    TruncatedFile,
    #[error("dimension {0} exceeds the supported maximum {MAX_DIM}")]
    DimOverflow(u16),
    #[error("malformed header: {0}")]
    BadHeader(&'static str),
    #[error("volume is invalid: {0}")]
    Core(#[from] ventriq_core::Error),
}

pub type Result<T> = std::result::Result<T, NiftiError>;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        return Ok(out);
    }
    Ok(raw)
}

fn le_i16(b: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([b[at], b[at + 1]])
}

fn le_i32(b: &[u8], at: usize) -> i32 {
    i32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn le_f32(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn read_nifti(path: &Path) -> Result<Volume> {
    let bytes = read_bytes(path)?;
    if bytes.len() < HEADER_LEN {
        return Err(NiftiError::TruncatedFile);
    }
    if le_i32(&bytes, 0) != HEADER_LEN as i32 {
        return Err(NiftiError::BadHeader("sizeof_hdr is not 348"));
    }
    let magic = [bytes[344], bytes[345], bytes[346], bytes[347]];
    if &magic != b"n+1\0" {
        return Err(NiftiError::BadMagic(magic));
    }

    let ndim = le_i16(&bytes, 40);
    if !(1..=7).contains(&ndim) {
        return Err(NiftiError::BadHeader("dim[0] out of range"));
    }
    let mut dims = [1u16; 7];
    for (k, d) in dims.iter_mut().enumerate() {
        if (k as i16) < ndim {
            let v = le_i16(&bytes, 42 + 2 * k);
            if v < 1 {
                return Err(NiftiError::BadHeader("non-positive dimension"));
            }
            *d = v as u16;
        }
    }
    if dims[3..].iter().any(|&d| d > 1) {
        return Err(NiftiError::BadHeader("4D and higher images are not supported"));
    }
    for &d in &dims[..3] {
        if d > MAX_DIM {
            return Err(NiftiError::DimOverflow(d));
        }
    }
    let dims = [dims[0] as usize, dims[1] as usize, dims[2] as usize];

    let datatype = le_i16(&bytes, 70);
    let elem = match datatype {
        DT_UINT8 => 1usize,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => return Err(NiftiError::UnsupportedDatatype(other)),
    };

    let mut spacing = [0f32; 3];
    for k in 0..3 {
        let pd = le_f32(&bytes, 76 + 4 * (k + 1));
        spacing[k] = if pd > 0.0 && pd.is_finite() { pd } else { 1.0 };
    }

    let vox_offset = le_f32(&bytes, 108) as usize;
    let offset = vox_offset.max(HEADER_LEN);
    let scl_slope = le_f32(&bytes, 112);
    let scl_inter = le_f32(&bytes, 116);

    let mut geom = Geometry::axial(dims, spacing);
    if le_i16(&bytes, 254) >= 1 {
        // sform: rows of the index->world affine.
        let mut srow = [[0f32; 4]; 3];
        for (r, base) in [280usize, 296, 312].iter().enumerate() {
            for c in 0..4 {
                srow[r][c] = le_f32(&bytes, base + 4 * c);
            }
        }
        for c in 0..3 {
            let norm =
                (srow[0][c].powi(2) + srow[1][c].powi(2) + srow[2][c].powi(2)).sqrt();
            if norm <= 0.0 || !norm.is_finite() {
                return Err(NiftiError::BadHeader("degenerate sform column"));
            }
            geom.spacing[c] = norm;
            for r in 0..3 {
                geom.orientation[r][c] = srow[r][c] / norm;
            }
        }
        geom.origin = [srow[0][3], srow[1][3], srow[2][3]];
    }

    let n = dims[0] * dims[1] * dims[2];
    let need = offset + n * elem;
    if bytes.len() < need {
        return Err(NiftiError::TruncatedFile);
    }
    let raw = &bytes[offset..need];
    let mut data = Vec::with_capacity(n);
    match datatype {
        DT_UINT8 => data.extend(raw.iter().map(|&b| b as f32)),
        DT_INT16 => {
            for ch in raw.chunks_exact(2) {
                data.push(i16::from_le_bytes([ch[0], ch[1]]) as f32);
            }
        }
        DT_FLOAT32 => {
            for ch in raw.chunks_exact(4) {
                data.push(f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]));
            }
        }
        _ => unreachable!(),
    }
    if scl_slope != 0.0 && (scl_slope != 1.0 || scl_inter != 0.0) {
        for v in &mut data {
            *v = *v * scl_slope + scl_inter;
        }
    }
    Ok(Volume::new(geom, data)?)
}

/// Write a volume as float32 with sform geometry; the data begins right
/// after the 348-byte header.
pub fn write_nifti(v: &Volume, path: &Path) -> Result<()> {
    let mut h = vec![0u8; HEADER_LEN];
    h[..4].copy_from_slice(&(HEADER_LEN as i32).to_le_bytes());
    let dims = v.dims();
    let dim: [i16; 8] = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    for (k, d) in dim.iter().enumerate() {
        h[40 + 2 * k..42 + 2 * k].copy_from_slice(&d.to_le_bytes());
    }
    h[70..72].copy_from_slice(&DT_FLOAT32.to_le_bytes());
    h[72..74].copy_from_slice(&32i16.to_le_bytes());
    // pixdim[0] is the quaternion handedness; keep it 1.
    let g = v.geom();
    let pixdim: [f32; 8] =
        [1.0, g.spacing[0], g.spacing[1], g.spacing[2], 0.0, 0.0, 0.0, 0.0];
    for (k, p) in pixdim.iter().enumerate() {
        h[76 + 4 * k..80 + 4 * k].copy_from_slice(&p.to_le_bytes());
    }
    h[108..112].copy_from_slice(&(HEADER_LEN as f32).to_le_bytes()); // vox_offset
    h[112..116].copy_from_slice(&0f32.to_le_bytes()); // scl_slope: no rescale
    h[116..120].copy_from_slice(&0f32.to_le_bytes());
    h[123] = 2; // spatial units: mm
    let tag = b"ventriq";
    h[148..148 + tag.len()].copy_from_slice(tag);
    h[254..256].copy_from_slice(&1i16.to_le_bytes()); // sform: scanner anat
    for (r, base) in [280usize, 296, 312].iter().enumerate() {
        for c in 0..3 {
            let val = g.orientation[r][c] * g.spacing[c];
            h[base + 4 * c..base + 4 * c + 4].copy_from_slice(&val.to_le_bytes());
        }
        h[base + 12..base + 16].copy_from_slice(&g.origin[r].to_le_bytes());
    }
    h[344..348].copy_from_slice(b"n+1\0");

    let mut out = h;
    out.reserve(v.data().len() * 4);
    for &x in v.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a mask stored as any supported NIfTI volume; nonzero means
/// foreground.
pub fn read_mask(path: &Path) -> Result<Mask> {
    let v = read_nifti(path)?;
    let data = v.data().iter().map(|&x| (x != 0.0) as u8).collect();
    Ok(Mask::new(v.geom().clone(), data)?)
}

pub fn write_mask(m: &Mask, path: &Path) -> Result<()> {
    write_nifti(&m.to_volume(), path)
}
