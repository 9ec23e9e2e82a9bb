//! Geometric and intensity preprocessing.
//!
//! Two composed pipelines are provided:
//!
//! * [`nnunet_preprocess`]: resample to the target spacing (0.8 mm by
//!   default), then z-score the intensities.
//! * [`shiva_preprocess`]: reorient to the closest RAS+ axis order, resample
//!   to 1 mm, crop a 160×214×176 box centred on the mid-range of the brain
//!   extent, then divide by the 99th percentile and clip to [0, 1].
//!
//! Brain extent is estimated as the bounding box of the largest 26-connected
//! component above an Otsu threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{label_mask, Connectivity};
use crate::error::{Error, Result};
use crate::nifti::NiftiHeader;
use crate::volume::{self, Affine, Dims, Mask, Spacing, Volume};

/// Output box used by the SHIVA-style pipeline.
pub const SHIVA_CROP_DIMS: Dims = [160, 214, 176];
pub const SHIVA_PERCENTILE: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Trilinear,
}

/// Inclusive voxel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    /// Integer mid-range along each axis.
    pub fn center(&self) -> [i64; 3] {
        let mut c = [0i64; 3];
        for i in 0..3 {
            c[i] = ((self.min[i] + self.max[i]) / 2) as i64;
        }
        c
    }

    pub fn extent(&self) -> [usize; 3] {
        let mut e = [0; 3];
        for i in 0..3 {
            e[i] = self.max[i] - self.min[i] + 1;
        }
        e
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    /// Bounding box of the foreground, `None` when the mask is empty.
    pub fn of_mask(mask: &Mask) -> Option<BoundingBox> {
        let dims = mask.dims();
        let mut min = [usize::MAX; 3];
        let mut max = [0usize; 3];
        let mut any = false;
        for (i, &v) in mask.as_slice().iter().enumerate() {
            if v != 0 {
                any = true;
                let c = volume::coords(dims, i);
                for k in 0..3 {
                    min[k] = min[k].min(c[k]);
                    max[k] = max[k].max(c[k]);
                }
            }
        }
        any.then_some(BoundingBox { min, max })
    }
}

fn output_len(n: usize, input_spacing: f64, target: f64) -> usize {
    // guard against 10·1.2/1.2 = 10.000000000000002
    let extent = n as f64 * input_spacing / target;
    ((extent - 1e-9).ceil() as usize).max(1)
}

/// Resample onto a grid with `target` spacing. The first output voxel
/// centre coincides with the first input voxel centre; output dims are
/// `ceil(n · s_in / s_out)`; samples past the last input voxel centre are
/// clamped to the edge.
pub fn resample(vol: &Volume, target: Spacing, interp: Interpolation) -> Result<Volume> {
    let in_dims = vol.dims();
    let in_spacing = vol.spacing();
    let mut out_dims = [0usize; 3];
    let mut step = [0.0; 3];
    for i in 0..3 {
        out_dims[i] = output_len(in_dims[i], in_spacing[i], target[i]);
        step[i] = target[i] / in_spacing[i];
    }

    let axis_samples = |axis: usize| -> Vec<(usize, usize, f64)> {
        let n = in_dims[axis];
        (0..out_dims[axis])
            .map(|j| {
                let pos = j as f64 * step[axis];
                match interp {
                    Interpolation::Nearest => {
                        let i = (pos.round() as usize).min(n - 1);
                        (i, i, 0.0)
                    }
                    Interpolation::Trilinear => {
                        if pos >= (n - 1) as f64 {
                            (n - 1, n - 1, 0.0)
                        } else {
                            let i0 = pos.floor() as usize;
                            (i0, i0 + 1, pos - i0 as f64)
                        }
                    }
                }
            })
            .collect()
    };
    let sx = axis_samples(0);
    let sy = axis_samples(1);
    let sz = axis_samples(2);

    let src = vol.data();
    let plane = out_dims[0] * out_dims[1];
    let mut data = vec![0.0; volume::voxel_count(out_dims)];
    data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        let (z0, z1, wz) = sz[z];
        for (y, &(y0, y1, wy)) in sy.iter().enumerate() {
            for (x, &(x0, x1, wx)) in sx.iter().enumerate() {
                let at = |xi, yi, zi| src[volume::linear_index(in_dims, xi, yi, zi)];
                let v = match interp {
                    Interpolation::Nearest => at(x0, y0, z0),
                    Interpolation::Trilinear => {
                        let lerp = |a: f64, b: f64, w: f64| if w == 0.0 { a } else { a + (b - a) * w };
                        let c00 = lerp(at(x0, y0, z0), at(x1, y0, z0), wx);
                        let c10 = lerp(at(x0, y1, z0), at(x1, y1, z0), wx);
                        let c01 = lerp(at(x0, y0, z1), at(x1, y0, z1), wx);
                        let c11 = lerp(at(x0, y1, z1), at(x1, y1, z1), wx);
                        lerp(lerp(c00, c10, wy), lerp(c01, c11, wy), wz)
                    }
                };
                slab[x + out_dims[0] * y] = v;
            }
        }
    });

    let mut header = vol.header().clone();
    header.dims = out_dims;
    header.pixdim = target.as_array();
    for col in 0..3 {
        for row in 0..3 {
            header.orientation[row][col] *= step[col];
        }
    }
    Volume::new(header, data)
}

/// Resample `vol` onto the voxel grid described by `reference` using the
/// world coordinates of both orientation matrices. Voxels that fall more than
/// half a voxel outside the source are set to 0.
pub fn resample_to_reference(vol: &Volume, reference: &NiftiHeader, interp: Interpolation) -> Result<Volume> {
    let inv = volume::invert(vol.orientation()).ok_or(Error::InvalidOrientation)?;
    let map = volume::mat_mul(&inv, &reference.orientation);
    let in_dims = vol.dims();
    let out_dims = reference.dims;
    let src = vol.data();
    let plane = out_dims[0] * out_dims[1];
    let mut data = vec![0.0; volume::voxel_count(out_dims)];
    data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..out_dims[1] {
            for x in 0..out_dims[0] {
                let q = volume::apply(&map, [x as f64, y as f64, z as f64]);
                let inside = (0..3).all(|k| q[k] >= -0.5 && q[k] < in_dims[k] as f64 - 0.5);
                if !inside {
                    continue;
                }
                let v = match interp {
                    Interpolation::Nearest => {
                        let p: Vec<usize> = (0..3)
                            .map(|k| (q[k].round().max(0.0) as usize).min(in_dims[k] - 1))
                            .collect();
                        src[volume::linear_index(in_dims, p[0], p[1], p[2])]
                    }
                    Interpolation::Trilinear => {
                        let mut lo = [0usize; 3];
                        let mut hi = [0usize; 3];
                        let mut w = [0.0; 3];
                        for k in 0..3 {
                            let c = q[k].clamp(0.0, (in_dims[k] - 1) as f64);
                            lo[k] = c.floor() as usize;
                            hi[k] = (lo[k] + 1).min(in_dims[k] - 1);
                            w[k] = c - lo[k] as f64;
                        }
                        let mut acc = 0.0;
                        for corner in 0..8 {
                            let pick = |k: usize| corner >> k & 1 == 1;
                            let mut weight = 1.0;
                            let mut p = [0usize; 3];
                            for k in 0..3 {
                                if pick(k) {
                                    weight *= w[k];
                                    p[k] = hi[k];
                                } else {
                                    weight *= 1.0 - w[k];
                                    p[k] = lo[k];
                                }
                            }
                            if weight != 0.0 {
                                acc += weight * src[volume::linear_index(in_dims, p[0], p[1], p[2])];
                            }
                        }
                        acc
                    }
                };
                slab[x + out_dims[0] * y] = v;
            }
        }
    });
    let mut header = reference.clone();
    header.datatype = vol.header().datatype;
    header.scl_slope = 1.0;
    header.scl_inter = 0.0;
    Volume::new(header, data)
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64, usize) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = sum / n as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / n as f64).sqrt(), n)
}

/// `(v − mean) / sd` with population statistics over all voxels.
pub fn zscore_normalize(vol: &Volume) -> Result<Volume> {
    let (mean, sd, _) = mean_sd(vol.data().iter().copied());
    apply_zscore(vol, mean, sd)
}

/// Z-score using statistics from the voxels inside `mask` only; every voxel
/// is transformed.
pub fn zscore_normalize_masked(vol: &Volume, mask: &Mask) -> Result<Volume> {
    if mask.dims() != vol.dims() {
        return Err(Error::ShapeMismatch {
            left: vol.dims(),
            right: mask.dims(),
        });
    }
    let values = vol
        .data()
        .iter()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v);
    let (mean, sd, n) = mean_sd(values);
    if n == 0 {
        return Err(Error::DegenerateIntensity("normalization mask is empty".into()));
    }
    apply_zscore(vol, mean, sd)
}

fn apply_zscore(vol: &Volume, mean: f64, sd: f64) -> Result<Volume> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::DegenerateIntensity(format!(
            "standard deviation is {sd}; cannot z-score"
        )));
    }
    let data = vol.data().iter().map(|&v| (v - mean) / sd).collect();
    let mut out = vol.with_data(data)?;
    out.header_mut().scl_slope = 1.0;
    out.header_mut().scl_inter = 0.0;
    Ok(out)
}

/// The `p`-th percentile (0 < p ≤ 100) with linear interpolation between
/// order statistics at rank `p/100 · (n − 1)`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidArgument(format!("percentile {p} outside (0, 100]")));
    }
    if values.is_empty() {
        return Err(Error::DegenerateIntensity("no values".into()));
    }
    let mut buf: Vec<f64> = values.to_vec();
    let pos = p / 100.0 * (buf.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let (_, &mut lo_val, upper) = buf.select_nth_unstable_by(lo, f64::total_cmp);
    if frac == 0.0 || upper.is_empty() {
        return Ok(lo_val);
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(lo_val + frac * (hi_val - lo_val))
}

/// How intensities below the percentile are mapped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampScaling {
    /// `v / P`
    #[default]
    Ratio,
    /// `(v − min) / (P − min)`
    MinMax,
}

/// Scale by the `p`-th percentile and clip to [0, 1]. Voxels at or above the
/// percentile become exactly 1; negative inputs clip to 0.
pub fn percentile_clamp_normalize(vol: &Volume, p: f64, scaling: ClampScaling) -> Result<Volume> {
    let pv = percentile(vol.data(), p)?;
    let (offset, denom) = match scaling {
        ClampScaling::Ratio => (0.0, pv),
        ClampScaling::MinMax => {
            let min = vol.data().iter().copied().fold(f64::INFINITY, f64::min);
            (min, pv - min)
        }
    };
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::DegenerateIntensity(format!(
            "{p}th percentile is {pv}; cannot scale to [0, 1]"
        )));
    }
    let data = vol
        .data()
        .iter()
        .map(|&v| if v >= pv { 1.0 } else { ((v - offset) / denom).clamp(0.0, 1.0) })
        .collect();
    let mut out = vol.with_data(data)?;
    out.header_mut().scl_slope = 1.0;
    out.header_mut().scl_inter = 0.0;
    Ok(out)
}

/// Otsu threshold over a 256-bin histogram; foreground is `v > threshold`.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    const BINS: usize = 256;
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(max > min) {
        return None;
    }
    let width = (max - min) / BINS as f64;
    let mut hist = [0u64; BINS];
    for &v in values {
        let b = (((v - min) / width) as usize).min(BINS - 1);
        hist[b] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, &c) in hist.iter().enumerate().take(BINS - 1) {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best.0 {
            best = (between, k);
        }
    }
    Some(min + (best.1 + 1) as f64 * width)
}

/// Mask of the largest 26-connected component above the Otsu threshold.
pub fn brain_mask(vol: &Volume) -> Result<Mask> {
    let threshold = otsu_threshold(vol.data()).ok_or(Error::EmptyForeground)?;
    let fg = Mask::from_vec(
        vol.dims(),
        vol.data().iter().map(|&v| u8::from(v > threshold)).collect(),
    )?;
    let labels = label_mask(&fg, Connectivity::TwentySix);
    if labels.n_clusters() == 0 {
        return Err(Error::EmptyForeground);
    }
    let sizes = labels.sizes();
    // first maximum wins on ties
    let largest = sizes
        .iter()
        .enumerate()
        .fold((0usize, 0u64), |best, (i, &s)| if s > best.1 { (i, s) } else { best })
        .0 as u32
        + 1;
    Mask::from_vec(
        vol.dims(),
        labels.labels().iter().map(|&l| u8::from(l == largest)).collect(),
    )
}

pub fn brain_extent(vol: &Volume) -> Result<BoundingBox> {
    BoundingBox::of_mask(&brain_mask(vol)?).ok_or(Error::EmptyForeground)
}

/// Where a crop sits in its source grid: output voxel `o` reads source voxel
/// `o + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropTransform {
    pub source_dims: Dims,
    pub out_dims: Dims,
    pub offset: [i64; 3],
}

impl CropTransform {
    pub fn to_source(&self, o: [usize; 3]) -> Option<[usize; 3]> {
        let mut p = [0usize; 3];
        for k in 0..3 {
            let v = o[k] as i64 + self.offset[k];
            if v < 0 || v >= self.source_dims[k] as i64 {
                return None;
            }
            p[k] = v as usize;
        }
        Some(p)
    }

    /// Place a cropped volume back into a zero-filled grid with the source
    /// geometry given by `source_header`.
    pub fn restore(&self, cropped: &Volume, source_header: &NiftiHeader) -> Result<Volume> {
        if cropped.dims() != self.out_dims {
            return Err(Error::ShapeMismatch {
                left: cropped.dims(),
                right: self.out_dims,
            });
        }
        if source_header.dims != self.source_dims {
            return Err(Error::ShapeMismatch {
                left: source_header.dims,
                right: self.source_dims,
            });
        }
        let mut data = vec![0.0; volume::voxel_count(self.source_dims)];
        for (i, &v) in cropped.data().iter().enumerate() {
            if let Some(p) = self.to_source(volume::coords(self.out_dims, i)) {
                data[volume::linear_index(self.source_dims, p[0], p[1], p[2])] = v;
            }
        }
        let mut header = source_header.clone();
        header.datatype = cropped.header().datatype;
        header.scl_slope = 1.0;
        header.scl_inter = 0.0;
        Volume::new(header, data)
    }
}

/// Extract an `out_dims` box centred on `center` (output voxel
/// `out_dims / 2` lands on `center`), zero-padding past the input edges.
pub fn crop_centered(vol: &Volume, center: [i64; 3], out_dims: Dims) -> Result<(Volume, CropTransform)> {
    if out_dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("crop dims {out_dims:?} must be positive")));
    }
    let in_dims = vol.dims();
    let mut offset = [0i64; 3];
    for k in 0..3 {
        offset[k] = center[k] - (out_dims[k] / 2) as i64;
    }
    let transform = CropTransform {
        source_dims: in_dims,
        out_dims,
        offset,
    };
    let src = vol.data();
    let plane = out_dims[0] * out_dims[1];
    let mut data = vec![0.0; volume::voxel_count(out_dims)];
    data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        let sz = z as i64 + offset[2];
        if sz < 0 || sz >= in_dims[2] as i64 {
            return;
        }
        for y in 0..out_dims[1] {
            let sy = y as i64 + offset[1];
            if sy < 0 || sy >= in_dims[1] as i64 {
                continue;
            }
            for x in 0..out_dims[0] {
                let sx = x as i64 + offset[0];
                if sx < 0 || sx >= in_dims[0] as i64 {
                    continue;
                }
                slab[x + out_dims[0] * y] =
                    src[volume::linear_index(in_dims, sx as usize, sy as usize, sz as usize)];
            }
        }
    });

    let mut header = vol.header().clone();
    header.dims = out_dims;
    let origin = volume::apply(
        vol.orientation(),
        [offset[0] as f64, offset[1] as f64, offset[2] as f64],
    );
    for k in 0..3 {
        header.orientation[k][3] = origin[k];
    }
    Ok((Volume::new(header, data)?, transform))
}

/// Axis permutation and flips that bring a volume closest to RAS+.
/// Output axis `j` reads input axis `perm[j]`, reversed when `flip[j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisMap {
    pub perm: [usize; 3],
    pub flip: [bool; 3],
}

impl AxisMap {
    pub fn is_identity(&self) -> bool {
        self.perm == [0, 1, 2] && self.flip == [false; 3]
    }
}

/// Greedy assignment of voxel axes to world axes by largest absolute
/// direction cosine.
pub fn canonical_axes(orientation: &Affine) -> Result<AxisMap> {
    volume::invert(orientation).ok_or(Error::InvalidOrientation)?;
    let mut perm = [usize::MAX; 3];
    let mut flip = [false; 3];
    let mut row_used = [false; 3];
    let mut col_used = [false; 3];
    for _ in 0..3 {
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for (r, &ru) in row_used.iter().enumerate() {
            if ru {
                continue;
            }
            for (c, &cu) in col_used.iter().enumerate() {
                if cu {
                    continue;
                }
                let v = orientation[r][c].abs();
                if v > best.0 {
                    best = (v, r, c);
                }
            }
        }
        let (_, r, c) = best;
        row_used[r] = true;
        col_used[c] = true;
        perm[r] = c;
        flip[r] = orientation[r][c] < 0.0;
    }
    Ok(AxisMap { perm, flip })
}

pub fn reorient_canonical(vol: &Volume) -> Result<Volume> {
    let map = canonical_axes(vol.orientation())?;
    if map.is_identity() {
        return Ok(vol.clone());
    }
    apply_axis_map(vol, &map)
}

pub fn apply_axis_map(vol: &Volume, map: &AxisMap) -> Result<Volume> {
    let in_dims = vol.dims();
    let mut out_dims = [0usize; 3];
    for j in 0..3 {
        out_dims[j] = in_dims[map.perm[j]];
    }

    // out voxel coords → in voxel coords
    let mut to_input = [[0.0; 4]; 4];
    to_input[3][3] = 1.0;
    for j in 0..3 {
        let i = map.perm[j];
        if map.flip[j] {
            to_input[i][j] = -1.0;
            to_input[i][3] = (in_dims[i] - 1) as f64;
        } else {
            to_input[i][j] = 1.0;
        }
    }

    let src = vol.data();
    let mut data = vec![0.0; src.len()];
    for (o, slot) in data.iter_mut().enumerate() {
        let oc = volume::coords(out_dims, o);
        let mut p = [0usize; 3];
        for j in 0..3 {
            let i = map.perm[j];
            p[i] = if map.flip[j] { in_dims[i] - 1 - oc[j] } else { oc[j] };
        }
        *slot = src[volume::linear_index(in_dims, p[0], p[1], p[2])];
    }

    let mut header = vol.header().clone();
    header.dims = out_dims;
    for j in 0..3 {
        header.pixdim[j] = vol.header().pixdim[map.perm[j]];
    }
    header.orientation = volume::mat_mul(vol.orientation(), &to_input);
    Volume::new(header, data)
}

/// z-normalized volume at `target` spacing.
pub fn nnunet_preprocess(vol: &Volume, target: Spacing) -> Result<Volume> {
    let resampled = resample(vol, target, Interpolation::Trilinear)?;
    zscore_normalize(&resampled)
}

/// Everything needed to bring a segmentation made on the SHIVA-style crop
/// back onto the native image grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShivaTransform {
    pub crop: CropTransform,
    pub brain_extent: BoundingBox,
    /// Grid of the reoriented 1 mm image the crop was taken from.
    pub resampled_dims: Dims,
    pub resampled_orientation: Affine,
    pub native_dims: Dims,
    pub native_pixdim: [f64; 3],
    pub native_orientation: Affine,
}

impl ShivaTransform {
    /// Map a volume in crop space (e.g. a predicted mask) to the native grid
    /// with nearest-neighbour interpolation.
    pub fn to_native(&self, cropped: &Volume) -> Result<Volume> {
        let mut resampled_header = cropped.header().clone();
        resampled_header.dims = self.resampled_dims;
        resampled_header.orientation = self.resampled_orientation;
        resampled_header.pixdim = [1.0; 3];
        let uncropped = self.crop.restore(cropped, &resampled_header)?;
        let mut native = cropped.header().clone();
        native.dims = self.native_dims;
        native.pixdim = self.native_pixdim;
        native.orientation = self.native_orientation;
        resample_to_reference(&uncropped, &native, Interpolation::Nearest)
    }
}

pub fn shiva_preprocess(vol: &Volume, scaling: ClampScaling) -> Result<(Volume, ShivaTransform)> {
    let reoriented = reorient_canonical(vol)?;
    let resampled = resample(&reoriented, Spacing::isotropic(1.0)?, Interpolation::Trilinear)?;
    let extent = brain_extent(&resampled)?;
    let (cropped, crop) = crop_centered(&resampled, extent.center(), SHIVA_CROP_DIMS)?;
    let normalized = percentile_clamp_normalize(&cropped, SHIVA_PERCENTILE, scaling)?;
    let transform = ShivaTransform {
        crop,
        brain_extent: extent,
        resampled_dims: resampled.dims(),
        resampled_orientation: *resampled.orientation(),
        native_dims: vol.dims(),
        native_pixdim: vol.header().pixdim,
        native_orientation: *vol.orientation(),
    };
    Ok((normalized, transform))
}
