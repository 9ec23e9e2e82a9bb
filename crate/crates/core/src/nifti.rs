//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Voxel data is decoded to `f64` with `scl_slope`/`scl_inter` applied. The
//! voxel→world transform follows the usual precedence: sform when
//! `sform_code > 0`, else qform when `qform_code > 0`, else `diag(pixdim)`.
//! Byte order is detected from `dim[0]`; files are written little-endian
//! unless [`WriteOptions::endian`] says otherwise. Extension blocks between
//! the header and `vox_offset` are kept as opaque bytes and written back
//! unchanged.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{self, Affine, Dims, Mask, Spacing, Volume, IDENTITY};

pub const HEADER_SIZE: usize = 348;
pub const DEFAULT_VOX_OFFSET: usize = 352;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

/// Scalar voxel types supported on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::U8 => 2,
            DataType::I16 => 4,
            DataType::I32 => 8,
            DataType::F32 => 16,
            DataType::F64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => DataType::U8,
            4 => DataType::I16,
            8 => DataType::I32,
            16 => DataType::F32,
            64 => DataType::F64,
            other => return Err(Error::UnsupportedType(other)),
        })
    }

    pub fn size(self) -> usize {
        match self {
            DataType::U8 => 1,
            DataType::I16 => 2,
            DataType::I32 | DataType::F32 => 4,
            DataType::F64 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DataType::U8 => "u8",
            DataType::I16 => "i16",
            DataType::I32 => "i32",
            DataType::F32 => "f32",
            DataType::F64 => "f64",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, DataType::U8 | DataType::I16 | DataType::I32)
    }

    fn integer_range(self) -> (f64, f64) {
        match self {
            DataType::U8 => (0.0, u8::MAX as f64),
            DataType::I16 => (i16::MIN as f64, i16::MAX as f64),
            DataType::I32 => (i32::MIN as f64, i32::MAX as f64),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

impl std::str::FromStr for DataType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "u8" | "uint8" => DataType::U8,
            "i16" | "int16" => DataType::I16,
            "i32" | "int32" => DataType::I32,
            "f32" | "float32" => DataType::F32,
            "f64" | "float64" => DataType::F64,
            _ => return Err(Error::InvalidArgument(format!("unknown datatype {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endian {
    #[default]
    Little,
    Big,
}

/// The subset of the NIfTI-1 header this crate interprets, plus opaque
/// extension bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dims: Dims,
    /// Millimetres per voxel along each axis.
    pub pixdim: [f64; 3],
    pub datatype: DataType,
    pub scl_slope: f64,
    pub scl_inter: f64,
    /// Voxel→world transform.
    pub orientation: Affine,
    pub qform_code: i16,
    pub sform_code: i16,
    pub xyzt_units: u8,
    pub descrip: String,
    pub vox_offset: usize,
    /// Raw bytes from offset 348 up to `vox_offset` when the extension flag
    /// is set; empty otherwise.
    pub extension: Vec<u8>,
    /// Byte order the header was read in.
    pub endian: Endian,
}

impl NiftiHeader {
    /// Header for an axis-aligned volume with the origin at voxel (0,0,0).
    pub fn new(dims: Dims, spacing: Spacing) -> Self {
        NiftiHeader {
            dims,
            pixdim: spacing.as_array(),
            datatype: DataType::F32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            orientation: volume::diagonal(spacing),
            qform_code: 1,
            sform_code: 1,
            // millimetres
            xyzt_units: 2,
            descrip: String::new(),
            vox_offset: DEFAULT_VOX_OFFSET,
            extension: Vec::new(),
            endian: Endian::Little,
        }
    }

    pub fn spacing(&self) -> Spacing {
        Spacing::try_from(self.pixdim).expect("header pixdim validated on construction")
    }

    fn scaling(&self) -> Option<(f64, f64)> {
        if self.scl_slope != 0.0 && self.scl_slope.is_finite() && self.scl_inter.is_finite() {
            if self.scl_slope == 1.0 && self.scl_inter == 0.0 {
                None
            } else {
                Some((self.scl_slope, self.scl_inter))
            }
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    pub endian: Endian,
    /// `None` picks gzip from a `.gz` suffix.
    pub gzip: Option<bool>,
}

/// Read a `.nii` or `.nii.gz` file into a volume in physical units.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let bytes = read_maybe_gz(path.as_ref())?;
    decode_volume(&bytes)
}

/// Read a mask file, binarizing at > 0.5 after intensity scaling. Avoids
/// materialising an `f64` copy of the voxel data.
pub fn read_nifti_mask(path: impl AsRef<Path>) -> Result<(NiftiHeader, Mask)> {
    let bytes = read_maybe_gz(path.as_ref())?;
    let header = parse_header(&bytes)?;
    let raw = data_section(&bytes, &header)?;
    let scaling = header.scaling();
    let mut out = Vec::with_capacity(volume::voxel_count(header.dims));
    decode_each(raw, &header, |v| {
        let v = match scaling {
            Some((s, i)) => v * s + i,
            None => v,
        };
        out.push(u8::from(v > 0.5));
    });
    let mask = Mask::from_vec(header.dims, out)?;
    Ok((header, mask))
}

pub fn read_header(path: impl AsRef<Path>) -> Result<NiftiHeader> {
    let bytes = read_maybe_gz(path.as_ref())?;
    parse_header(&bytes)
}

/// Write `vol` storing voxels as `datatype`. Values are converted back to raw
/// storage through the header's slope/intercept.
pub fn write_nifti(vol: &Volume, path: impl AsRef<Path>, datatype: DataType) -> Result<()> {
    write_nifti_with(vol, path, datatype, WriteOptions::default())
}

pub fn write_nifti_with(
    vol: &Volume,
    path: impl AsRef<Path>,
    datatype: DataType,
    options: WriteOptions,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(vol, datatype, options.endian)?;
    let gzip = options
        .gzip
        .unwrap_or_else(|| path.extension().is_some_and(|e| e == "gz"));
    let file = File::create(path)?;
    if gzip {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::fast());
        enc.write_all(&bytes)?;
        enc.finish()?.flush()?;
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(&bytes)?;
        w.flush()?;
    }
    Ok(())
}

/// Convenience for masks: stored as u8 with identity scaling.
pub fn write_mask(mask: &Mask, header: &NiftiHeader, path: impl AsRef<Path>) -> Result<()> {
    let vol = Volume::from_mask(mask, header)?;
    write_nifti(&vol, path, DataType::U8)
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::with_capacity(raw.len() * 4);
        MultiGzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    let header = parse_header(bytes)?;
    let raw = data_section(bytes, &header)?;
    let mut data = Vec::with_capacity(volume::voxel_count(header.dims));
    decode_each(raw, &header, |v| data.push(v));
    if let Some((slope, inter)) = header.scaling() {
        // skipping a zero intercept keeps the sign of -0.0
        if inter == 0.0 {
            data.iter_mut().for_each(|v| *v *= slope);
        } else {
            data.iter_mut().for_each(|v| *v = *v * slope + inter);
        }
    }
    Volume::new(header, data)
}

fn data_section<'a>(bytes: &'a [u8], header: &NiftiHeader) -> Result<&'a [u8]> {
    let len = volume::voxel_count(header.dims) * header.datatype.size();
    let end = header.vox_offset + len;
    if bytes.len() < end {
        return Err(Error::TruncatedFile {
            expected: end,
            found: bytes.len(),
        });
    }
    Ok(&bytes[header.vox_offset..end])
}

fn decode_each(raw: &[u8], header: &NiftiHeader, sink: impl FnMut(f64)) {
    match header.endian {
        Endian::Little => decode_each_with::<LittleEndian>(raw, header.datatype, sink),
        Endian::Big => decode_each_with::<BigEndian>(raw, header.datatype, sink),
    }
}

fn decode_each_with<B: ByteOrder>(raw: &[u8], datatype: DataType, mut sink: impl FnMut(f64)) {
    let size = datatype.size();
    match datatype {
        DataType::U8 => raw.iter().for_each(|&b| sink(f64::from(b))),
        DataType::I16 => raw.chunks_exact(size).for_each(|c| sink(f64::from(B::read_i16(c)))),
        DataType::I32 => raw.chunks_exact(size).for_each(|c| sink(f64::from(B::read_i32(c)))),
        DataType::F32 => raw.chunks_exact(size).for_each(|c| sink(f64::from(B::read_f32(c)))),
        DataType::F64 => raw.chunks_exact(size).for_each(|c| sink(B::read_f64(c))),
    }
}

pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::TruncatedFile {
            expected: HEADER_SIZE,
            found: bytes.len(),
        });
    }
    let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
    if magic == b"ni1\0" {
        return Err(Error::Format(
            "two-file NIfTI (.hdr/.img) is not supported; convert to single-file .nii".into(),
        ));
    }
    if magic != b"n+1\0" {
        if &bytes[4..8] == b"n+2\0" || &bytes[4..8] == b"ni2\0" {
            return Err(Error::Format("NIfTI-2 is not supported".into()));
        }
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let dim0 = LittleEndian::read_i16(&bytes[offsets::DIM..]);
    if (1..=7).contains(&dim0) {
        parse_header_with::<LittleEndian>(bytes, Endian::Little)
    } else {
        let swapped = BigEndian::read_i16(&bytes[offsets::DIM..]);
        if !(1..=7).contains(&swapped) {
            return Err(Error::Format(format!("dim[0] = {dim0} is out of range")));
        }
        parse_header_with::<BigEndian>(bytes, Endian::Big)
    }
}

fn parse_header_with<B: ByteOrder>(bytes: &[u8], endian: Endian) -> Result<NiftiHeader> {
    let i16_at = |off: usize| B::read_i16(&bytes[off..off + 2]);
    let f32_at = |off: usize| f64::from(B::read_f32(&bytes[off..off + 4]));

    let sizeof_hdr = B::read_i32(&bytes[offsets::SIZEOF_HDR..]);
    if sizeof_hdr != HEADER_SIZE as i32 {
        return Err(Error::Format(format!("sizeof_hdr is {sizeof_hdr}, expected 348")));
    }

    let ndim = i16_at(offsets::DIM) as usize;
    let mut dims = [1usize; 3];
    for axis in 1..=ndim {
        let d = i16_at(offsets::DIM + 2 * axis);
        if d < 1 {
            return Err(Error::Format(format!("dim[{axis}] = {d} is not positive")));
        }
        if axis <= 3 {
            dims[axis - 1] = d as usize;
        } else if d != 1 {
            return Err(Error::Format(format!(
                "only 3D volumes are supported (dim[{axis}] = {d})"
            )));
        }
    }

    let datatype = DataType::from_code(i16_at(offsets::DATATYPE))?;

    let qfac = if f32_at(offsets::PIXDIM) < 0.0 { -1.0 } else { 1.0 };
    let mut pixdim = [0.0; 3];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = f32_at(offsets::PIXDIM + 4 * (i + 1));
        if !(p.is_finite() && *p > 0.0) {
            return Err(Error::Format(format!("pixdim[{}] = {p} is not positive", i + 1)));
        }
    }

    let vox_offset_f = f32_at(offsets::VOX_OFFSET);
    if !(vox_offset_f >= DEFAULT_VOX_OFFSET as f64) || vox_offset_f.fract() != 0.0 {
        return Err(Error::Format(format!("vox_offset {vox_offset_f} is invalid")));
    }
    let vox_offset = vox_offset_f as usize;

    let qform_code = i16_at(offsets::QFORM_CODE);
    let sform_code = i16_at(offsets::SFORM_CODE);

    let mut srow = IDENTITY;
    for (r, row) in srow.iter_mut().take(3).enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = f32_at(offsets::SROW_X + 16 * r + 4 * c);
        }
    }
    let quatern = [
        f32_at(offsets::QUATERN_B),
        f32_at(offsets::QUATERN_B + 4),
        f32_at(offsets::QUATERN_B + 8),
    ];
    let qoffset = [
        f32_at(offsets::QOFFSET_X),
        f32_at(offsets::QOFFSET_X + 4),
        f32_at(offsets::QOFFSET_X + 8),
    ];
    let qform = quaternion_to_affine(quatern, qoffset, pixdim, qfac);

    let orientation = if sform_code > 0 && volume::invert(&srow).is_some() {
        srow
    } else if qform_code > 0 && volume::invert(&qform).is_some() {
        qform
    } else {
        volume::diagonal(Spacing::try_from(pixdim)?)
    };

    let descrip_raw = &bytes[offsets::DESCRIP..offsets::DESCRIP + 80];
    let end = descrip_raw.iter().position(|&b| b == 0).unwrap_or(80);
    let descrip = String::from_utf8_lossy(&descrip_raw[..end]).into_owned();

    let extension = if bytes.len() >= DEFAULT_VOX_OFFSET
        && bytes[HEADER_SIZE] != 0
        && vox_offset > HEADER_SIZE
        && bytes.len() >= vox_offset
    {
        bytes[HEADER_SIZE..vox_offset].to_vec()
    } else {
        Vec::new()
    };

    Ok(NiftiHeader {
        dims,
        pixdim,
        datatype,
        scl_slope: f32_at(offsets::SCL_SLOPE),
        scl_inter: f32_at(offsets::SCL_INTER),
        orientation,
        qform_code,
        sform_code,
        xyzt_units: bytes[offsets::XYZT_UNITS],
        descrip,
        vox_offset,
        extension,
        endian,
    })
}

/// The qform transform built from quaternion parameters.
pub fn quaternion_to_affine(bcd: [f64; 3], offset: [f64; 3], pixdim: [f64; 3], qfac: f64) -> Affine {
    let [b, c, d] = bcd;
    let mut a2 = 1.0 - (b * b + c * c + d * d);
    let (b, c, d) = if a2 < 1e-7 {
        let n = (b * b + c * c + d * d).sqrt();
        a2 = 0.0;
        (b / n, c / n, d / n)
    } else {
        (b, c, d)
    };
    let a = a2.sqrt();
    let r = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ];
    let scale = [pixdim[0], pixdim[1], pixdim[2] * qfac];
    let mut out = IDENTITY;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = r[i][j] * scale[j];
        }
        out[i][3] = offset[i];
    }
    out
}

/// Quaternion parameters `(b, c, d)`, offset and `qfac` for an affine whose
/// linear part is a rotation (possibly with reflection) times positive
/// per-axis scaling. `None` when the columns are not orthogonal.
pub fn affine_to_quaternion(a: &Affine) -> Option<([f64; 3], [f64; 3], f64)> {
    let mut r = [[0.0; 3]; 3];
    for j in 0..3 {
        let norm = (0..3).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        for i in 0..3 {
            r[i][j] = a[i][j] / norm;
        }
    }
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let dot: f64 = (0..3).map(|i| r[i][p] * r[i][q]).sum();
        if dot.abs() > 1e-4 {
            return None;
        }
    }
    let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
    let qfac = if det < 0.0 {
        for row in &mut r {
            row[2] = -row[2];
        }
        -1.0
    } else {
        1.0
    };
    let trace = r[0][0] + r[1][1] + r[2][2] + 1.0;
    let (qa, qb, qc, qd);
    if trace > 0.5 {
        qa = 0.5 * trace.sqrt();
        qb = 0.25 * (r[2][1] - r[1][2]) / qa;
        qc = 0.25 * (r[0][2] - r[2][0]) / qa;
        qd = 0.25 * (r[1][0] - r[0][1]) / qa;
    } else {
        let xd = 1.0 + r[0][0] - (r[1][1] + r[2][2]);
        let yd = 1.0 + r[1][1] - (r[0][0] + r[2][2]);
        let zd = 1.0 + r[2][2] - (r[0][0] + r[1][1]);
        if xd > 1.0 {
            qb = 0.5 * xd.sqrt();
            qc = 0.25 * (r[0][1] + r[1][0]) / qb;
            qd = 0.25 * (r[0][2] + r[2][0]) / qb;
            qa = 0.25 * (r[2][1] - r[1][2]) / qb;
        } else if yd > 1.0 {
            qc = 0.5 * yd.sqrt();
            qb = 0.25 * (r[0][1] + r[1][0]) / qc;
            qd = 0.25 * (r[1][2] + r[2][1]) / qc;
            qa = 0.25 * (r[0][2] - r[2][0]) / qc;
        } else {
            qd = 0.5 * zd.sqrt();
            qb = 0.25 * (r[0][2] + r[2][0]) / qd;
            qc = 0.25 * (r[1][2] + r[2][1]) / qd;
            qa = 0.25 * (r[1][0] - r[0][1]) / qd;
        }
    }
    let sign = if qa < 0.0 { -1.0 } else { 1.0 };
    Some((
        [qb * sign, qc * sign, qd * sign],
        [a[0][3], a[1][3], a[2][3]],
        qfac,
    ))
}

pub fn encode_volume(vol: &Volume, datatype: DataType, endian: Endian) -> Result<Vec<u8>> {
    match endian {
        Endian::Little => encode_with::<LittleEndian>(vol, datatype),
        Endian::Big => encode_with::<BigEndian>(vol, datatype),
    }
}

fn encode_with<B: ByteOrder>(vol: &Volume, datatype: DataType) -> Result<Vec<u8>> {
    let h = vol.header();
    let (extension, vox_offset) = if h.extension.is_empty() {
        (vec![0u8; 4], DEFAULT_VOX_OFFSET)
    } else {
        (h.extension.clone(), HEADER_SIZE + h.extension.len())
    };
    let n = vol.data().len();
    let mut out = vec![0u8; vox_offset + n * datatype.size()];

    {
        let hdr = &mut out[..HEADER_SIZE];
        B::write_i32(&mut hdr[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
        // dim_info / regular are left zero apart from the historical 'r'
        hdr[38] = b'r';
        let dim: [i16; 8] = [
            3,
            dim_i16(h.dims[0])?,
            dim_i16(h.dims[1])?,
            dim_i16(h.dims[2])?,
            1,
            1,
            1,
            1,
        ];
        for (i, d) in dim.iter().enumerate() {
            B::write_i16(&mut hdr[offsets::DIM + 2 * i..], *d);
        }
        B::write_i16(&mut hdr[offsets::DATATYPE..], datatype.code());
        B::write_i16(&mut hdr[offsets::BITPIX..], (datatype.size() * 8) as i16);

        let quat = if h.qform_code > 0 {
            affine_to_quaternion(&h.orientation)
        } else {
            None
        };
        let qfac = quat.map_or(1.0, |q| q.2);
        let pixdim = [qfac, h.pixdim[0], h.pixdim[1], h.pixdim[2], 1.0, 1.0, 1.0, 1.0];
        for (i, p) in pixdim.iter().enumerate() {
            B::write_f32(&mut hdr[offsets::PIXDIM + 4 * i..], *p as f32);
        }
        B::write_f32(&mut hdr[offsets::VOX_OFFSET..], vox_offset as f32);
        B::write_f32(&mut hdr[offsets::SCL_SLOPE..], h.scl_slope as f32);
        B::write_f32(&mut hdr[offsets::SCL_INTER..], h.scl_inter as f32);
        hdr[offsets::XYZT_UNITS] = h.xyzt_units;

        let descrip = h.descrip.as_bytes();
        let len = descrip.len().min(79);
        hdr[offsets::DESCRIP..offsets::DESCRIP + len].copy_from_slice(&descrip[..len]);

        let sform_code = if h.sform_code == 0 && h.qform_code == 0 { 1 } else { h.sform_code };
        let qform_code = if quat.is_some() { h.qform_code } else { 0 };
        B::write_i16(&mut hdr[offsets::QFORM_CODE..], qform_code);
        B::write_i16(&mut hdr[offsets::SFORM_CODE..], sform_code);
        if let Some((bcd, offset, _)) = quat {
            for i in 0..3 {
                B::write_f32(&mut hdr[offsets::QUATERN_B + 4 * i..], bcd[i] as f32);
                B::write_f32(&mut hdr[offsets::QOFFSET_X + 4 * i..], offset[i] as f32);
            }
        }
        // srow is meaningless without an sform code, so it stays zero
        if sform_code > 0 {
            for r in 0..3 {
                for c in 0..4 {
                    B::write_f32(
                        &mut hdr[offsets::SROW_X + 16 * r + 4 * c..],
                        h.orientation[r][c] as f32,
                    );
                }
            }
        }
        hdr[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(b"n+1\0");
    }
    out[HEADER_SIZE..vox_offset].copy_from_slice(&extension);

    // Stored scaling is what the header will claim on disk (f32 precision).
    let slope = f64::from(h.scl_slope as f32);
    let inter = f64::from(h.scl_inter as f32);
    let scaled = slope != 0.0 && slope.is_finite() && !(slope == 1.0 && inter == 0.0);
    let data = &mut out[vox_offset..];
    let size = datatype.size();
    for (i, &v) in vol.data().iter().enumerate() {
        let raw = if scaled { (v - inter) / slope } else { v };
        let slot = &mut data[i * size..(i + 1) * size];
        if datatype.is_integer() {
            let (lo, hi) = datatype.integer_range();
            let r = raw.round();
            if !r.is_finite() || r < lo || r > hi {
                return Err(Error::Range {
                    value: v,
                    datatype: datatype.name(),
                });
            }
            match datatype {
                DataType::U8 => slot[0] = r as u8,
                DataType::I16 => B::write_i16(slot, r as i16),
                DataType::I32 => B::write_i32(slot, r as i32),
                _ => unreachable!(),
            }
        } else if datatype == DataType::F32 {
            if raw.is_finite() && raw.abs() > f32::MAX as f64 {
                return Err(Error::Range {
                    value: v,
                    datatype: datatype.name(),
                });
            }
            B::write_f32(slot, raw as f32);
        } else {
            B::write_f64(slot, raw);
        }
    }
    Ok(out)
}

fn dim_i16(d: usize) -> Result<i16> {
    i16::try_from(d)
        .ok()
        .filter(|&v| v >= 1)
        .ok_or_else(|| Error::Format(format!("dimension {d} does not fit the NIfTI-1 header")))
}

/// Extension code for free-text comments.
pub const ECODE_COMMENT: i32 = 6;

/// Extension bytes (flag plus one comment record) carrying `text`, laid out
/// for a file written in `endian` order.
pub fn comment_extension(text: &str, endian: Endian) -> Vec<u8> {
    let mut data = text.as_bytes().to_vec();
    data.push(0);
    // esize counts its own 8-byte prefix and must be a multiple of 16
    data.resize((data.len() + 8).div_ceil(16) * 16 - 8, 0);
    let mut out = vec![1u8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
    let esize = (8 + data.len()) as i32;
    match endian {
        Endian::Little => {
            LittleEndian::write_i32(&mut out[4..8], esize);
            LittleEndian::write_i32(&mut out[8..12], ECODE_COMMENT);
        }
        Endian::Big => {
            BigEndian::write_i32(&mut out[4..8], esize);
            BigEndian::write_i32(&mut out[8..12], ECODE_COMMENT);
        }
    }
    out.extend(data);
    out
}

impl NiftiHeader {
    /// Text of every comment extension, in file order.
    pub fn comments(&self) -> Vec<String> {
        let read = |b: &[u8]| match self.endian {
            Endian::Little => LittleEndian::read_i32(b),
            Endian::Big => BigEndian::read_i32(b),
        };
        let mut out = Vec::new();
        let mut at = 4;
        while at + 8 <= self.extension.len() {
            let esize = read(&self.extension[at..at + 4]);
            let ecode = read(&self.extension[at + 4..at + 8]);
            if esize < 8 || at + esize as usize > self.extension.len() {
                break;
            }
            if ecode == ECODE_COMMENT {
                let body = &self.extension[at + 8..at + esize as usize];
                let end = body.iter().position(|&b| b == 0).unwrap_or(body.len());
                out.push(String::from_utf8_lossy(&body[..end]).into_owned());
            }
            at += esize as usize;
        }
        out
    }
}
