//! In-memory volumes, binary masks and the small amount of affine algebra
//! needed to move between voxel and world coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nifti::NiftiHeader;

/// Voxel grid extent, x fastest.
pub type Dims = [usize; 3];

/// Row-major 4×4 voxel→world transform. The last row is always `[0, 0, 0, 1]`.
pub type Affine = [[f64; 4]; 4];

pub const IDENTITY: Affine = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

#[inline]
pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline]
pub fn linear_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

#[inline]
pub fn coords(dims: Dims, idx: usize) -> [usize; 3] {
    let x = idx % dims[0];
    let rest = idx / dims[0];
    [x, rest % dims[1], rest / dims[1]]
}

/// Voxel size in millimetres along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Spacing([f64; 3]);

impl Spacing {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        Self::try_from([sx, sy, sz])
    }

    pub fn isotropic(s: f64) -> Result<Self> {
        Self::new(s, s, s)
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn voxel_volume(&self) -> f64 {
        self.0[0] * self.0[1] * self.0[2]
    }
}

impl Default for Spacing {
    /// 0.8 mm isotropic.
    fn default() -> Self {
        Spacing([0.8; 3])
    }
}

impl std::ops::Index<usize> for Spacing {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<[f64; 3]> for Spacing {
    type Error = Error;
    fn try_from(s: [f64; 3]) -> Result<Self> {
        if s.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(Spacing(s))
        } else {
            Err(Error::InvalidSpacing(s))
        }
    }
}

impl From<Spacing> for [f64; 3] {
    fn from(s: Spacing) -> Self {
        s.0
    }
}

impl std::fmt::Display for Spacing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.0[0], self.0[1], self.0[2])
    }
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    /// Accepts `0.8` (isotropic) or `0.9x0.9x1.2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X', ',']).map(str::trim).collect();
        let parse = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad spacing component {p:?}")))
        };
        match parts.as_slice() {
            [one] => Spacing::isotropic(parse(one)?),
            [a, b, c] => Spacing::new(parse(a)?, parse(b)?, parse(c)?),
            _ => Err(Error::InvalidArgument(format!("bad spacing {s:?}"))),
        }
    }
}

/// A 3D scalar image in physical units (scaling already applied).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    header: NiftiHeader,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(header: NiftiHeader, data: Vec<f64>) -> Result<Self> {
        let expected = voxel_count(header.dims);
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match dims {:?} ({} voxels)",
                data.len(),
                header.dims,
                expected
            )));
        }
        Ok(Volume { header, data })
    }

    /// A zero-filled volume with an axis-aligned orientation.
    pub fn zeros(dims: Dims, spacing: Spacing) -> Self {
        let header = NiftiHeader::new(dims, spacing);
        Volume {
            data: vec![0.0; voxel_count(dims)],
            header,
        }
    }

    pub fn from_fn(dims: Dims, spacing: Spacing, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(voxel_count(dims));
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume {
            header: NiftiHeader::new(dims, spacing),
            data,
        }
    }

    pub fn header(&self) -> &NiftiHeader {
        &self.header
    }

    pub fn header_mut(&mut self) -> &mut NiftiHeader {
        &mut self.header
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_parts(self) -> (NiftiHeader, Vec<f64>) {
        (self.header, self.data)
    }

    pub fn dims(&self) -> Dims {
        self.header.dims
    }

    pub fn spacing(&self) -> Spacing {
        Spacing(self.header.pixdim)
    }

    pub fn orientation(&self) -> &Affine {
        &self.header.orientation
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[linear_index(self.dims(), x, y, z)]
    }

    /// Same geometry, new voxel values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Volume::new(self.header.clone(), data)
    }

    /// Threshold at > 0.5, the binarization used for masks that were stored
    /// with intensity scaling.
    pub fn binarize(&self) -> Mask {
        Mask {
            dims: self.dims(),
            data: self.data.iter().map(|&v| u8::from(v > 0.5)).collect(),
        }
    }

    /// Strict conversion: every voxel must be exactly 0 or 1.
    pub fn to_mask(&self) -> Result<Mask> {
        let mut data = Vec::with_capacity(self.data.len());
        for &v in &self.data {
            if v == 0.0 {
                data.push(0);
            } else if v == 1.0 {
                data.push(1);
            } else {
                return Err(Error::NotBinary(v));
            }
        }
        Ok(Mask {
            dims: self.dims(),
            data,
        })
    }

    /// Wrap a mask in the geometry of `header` (dims must agree).
    pub fn from_mask(mask: &Mask, header: &NiftiHeader) -> Result<Self> {
        if mask.dims != header.dims {
            return Err(Error::ShapeMismatch {
                left: mask.dims,
                right: header.dims,
            });
        }
        let mut header = header.clone();
        header.scl_slope = 1.0;
        header.scl_inter = 0.0;
        Volume::new(header, mask.data.iter().map(|&v| f64::from(v)).collect())
    }
}

/// A binary voxel mask. Values are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    dims: Dims,
    data: Vec<u8>,
}

impl Mask {
    pub fn empty(dims: Dims) -> Self {
        Mask {
            dims,
            data: vec![0; voxel_count(dims)],
        }
    }

    /// Anything nonzero in `data` counts as foreground.
    pub fn from_vec(dims: Dims, data: Vec<u8>) -> Result<Self> {
        if data.len() != voxel_count(dims) {
            return Err(Error::InvalidArgument(format!(
                "mask length {} does not match dims {:?}",
                data.len(),
                dims
            )));
        }
        let data = data.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Mask { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(voxel_count(dims));
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(u8::from(f(x, y, z)));
                }
            }
        }
        Mask { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[linear_index(self.dims, x, y, z)] != 0
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.data[idx] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = linear_index(self.dims, x, y, z);
        self.data[i] = u8::from(value);
    }

    #[inline]
    pub fn set_index(&mut self, idx: usize, value: bool) {
        self.data[idx] = u8::from(value);
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        self.check_dims(other)?;
        Ok(Mask {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a & b)
                .collect(),
        })
    }

    pub fn union(&self, other: &Mask) -> Result<Mask> {
        self.check_dims(other)?;
        Ok(Mask {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    pub(crate) fn check_dims(&self, other: &Mask) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch {
                left: self.dims,
                right: other.dims,
            });
        }
        Ok(())
    }
}

pub fn mat_mul(a: &Affine, b: &Affine) -> Affine {
    let mut out = [[0.0; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn apply(a: &Affine, p: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i][0] * p[0] + a[i][1] * p[1] + a[i][2] * p[2] + a[i][3];
    }
    out
}

pub fn det3(a: &Affine) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Inverse of an affine transform; `None` when the linear part is singular.
pub fn invert(a: &Affine) -> Option<Affine> {
    let det = det3(a);
    let scale = a
        .iter()
        .take(3)
        .flat_map(|r| r.iter().take(3))
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if !det.is_finite() || scale == 0.0 || det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let m = |i: usize, j: usize| a[i][j];
    let mut inv = [[0.0; 4]; 4];
    inv[0][0] = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / det;
    inv[0][1] = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / det;
    inv[0][2] = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / det;
    inv[1][0] = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / det;
    inv[1][1] = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det;
    inv[1][2] = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / det;
    inv[2][0] = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / det;
    inv[2][1] = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / det;
    inv[2][2] = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det;
    for i in 0..3 {
        inv[i][3] = -(0..3).map(|k| inv[i][k] * a[k][3]).sum::<f64>();
    }
    inv[3][3] = 1.0;
    Some(inv)
}

pub fn diagonal(spacing: Spacing) -> Affine {
    let mut a = IDENTITY;
    for i in 0..3 {
        a[i][i] = spacing[i];
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_rejects_non_positive() {
        assert!(matches!(Spacing::new(1.0, 0.0, 1.0), Err(Error::InvalidSpacing(_))));
        assert!(matches!(Spacing::new(1.0, -1.0, 1.0), Err(Error::InvalidSpacing(_))));
        assert!(matches!(Spacing::new(f64::NAN, 1.0, 1.0), Err(Error::InvalidSpacing(_))));
    }

    #[test]
    fn spacing_parses_both_forms() {
        assert_eq!("0.8".parse::<Spacing>().unwrap(), Spacing::isotropic(0.8).unwrap());
        assert_eq!(
            "0.9x0.9x1.2".parse::<Spacing>().unwrap(),
            Spacing::new(0.9, 0.9, 1.2).unwrap()
        );
        assert!("1x2".parse::<Spacing>().is_err());
    }

    #[test]
    fn index_roundtrip() {
        let dims = [3, 4, 5];
        for i in 0..voxel_count(dims) {
            let [x, y, z] = coords(dims, i);
            assert_eq!(linear_index(dims, x, y, z), i);
        }
    }

    #[test]
    fn affine_inverse() {
        let a: Affine = [
            [0.0, -2.0, 0.0, 10.0],
            [1.5, 0.0, 0.0, -4.0],
            [0.0, 0.0, 0.8, 7.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let inv = invert(&a).unwrap();
        let id = mat_mul(&a, &inv);
        for i in 0..4 {
            for j in 0..4 {
                assert!((id[i][j] - IDENTITY[i][j]).abs() < 1e-12);
            }
        }
        let mut singular = a;
        singular[2][2] = 0.0;
        assert!(invert(&singular).is_none());
    }

    #[test]
    fn strict_mask_conversion() {
        let v = Volume::from_fn([2, 2, 2], Spacing::isotropic(1.0).unwrap(), |x, _, _| x as f64);
        assert_eq!(v.to_mask().unwrap().count(), 4);
        let bad = v.with_data(vec![0.5; 8]).unwrap();
        assert!(matches!(bad.to_mask(), Err(Error::NotBinary(_))));
        assert_eq!(bad.binarize().count(), 0);
    }
}
