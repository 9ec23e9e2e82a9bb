//! Deterministic synthetic phantoms and mask perturbations with known
//! metric signatures.
//!
//! A phantom is a set of straight capsules ("tubes") rasterized into a
//! binary truth mask, plus an intensity image where tube voxels are brighter
//! than the surrounding tissue. Tubes keep at least two empty voxels between
//! each other, so the truth mask has exactly `n_tubes` 26-connected clusters.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::clustering::{label_mask, Connectivity};
use crate::error::{Error, Result};
use crate::nifti::NiftiHeader;
use crate::volume::{self, Dims, Mask, Spacing, Volume};

const MAX_ATTEMPTS: usize = 2000;
/// Minimum Chebyshev distance between voxels of different tubes.
const TUBE_GAP: i64 = 3;

/// Ellipsoidal head: air outside, a bright scalp shell, tissue inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadModel {
    /// Scalp intensity.
    pub scalp: f64,
    /// Scalp thickness in voxels.
    pub scalp_thickness: f64,
    /// Empty voxels between the head and the volume edge.
    pub margin: f64,
}

impl Default for HeadModel {
    fn default() -> Self {
        HeadModel {
            scalp: 1000.0,
            scalp_thickness: 4.0,
            margin: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub spacing: Spacing,
    pub n_tubes: usize,
    /// Tube radius range in voxels; the lower bound must be at least 0.9 so
    /// every tube is a single 26-connected cluster.
    pub radius: (f64, f64),
    /// Length of the tube axis in voxels (caps excluded).
    pub length: (f64, f64),
    pub background: f64,
    pub foreground: f64,
    pub noise_sd: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadModel>,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [48, 48, 48],
            spacing: Spacing::default(),
            n_tubes: 10,
            radius: (0.9, 1.5),
            length: (3.0, 10.0),
            background: 300.0,
            foreground: 600.0,
            noise_sd: 0.0,
            seed: 0,
            head: None,
        }
    }
}

impl PhantomSpec {
    fn validate(&self) -> Result<()> {
        let (rmin, rmax) = self.radius;
        let (lmin, lmax) = self.length;
        if !(rmin >= 0.9 && rmax >= rmin && rmax.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tube radius range {:?} must satisfy 0.9 <= min <= max",
                self.radius
            )));
        }
        if !(lmin >= 0.0 && lmax >= lmin && lmax.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tube length range {:?} must satisfy 0 <= min <= max",
                self.length
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise SD {} must be >= 0", self.noise_sd)));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("dims {:?} must be positive", self.dims)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub image: Volume,
    pub truth: Mask,
    /// Tissue inside the scalp, when a head model was used.
    pub brain: Option<Mask>,
}

impl Phantom {
    pub fn truth_volume(&self) -> Volume {
        Volume::from_mask(&self.truth, self.image.header()).expect("dims consistent")
    }
}

struct Ellipsoid {
    center: [f64; 3],
    semi: [f64; 3],
}

impl Ellipsoid {
    fn inscribed(dims: Dims, margin: f64) -> Self {
        let mut center = [0.0; 3];
        let mut semi = [0.0; 3];
        for k in 0..3 {
            center[k] = (dims[k] as f64 - 1.0) / 2.0;
            semi[k] = (dims[k] as f64 / 2.0 - margin).max(1.0);
        }
        Ellipsoid { center, semi }
    }

    fn shrunk(&self, by: f64) -> Self {
        Ellipsoid {
            center: self.center,
            semi: self.semi.map(|s| (s - by).max(0.5)),
        }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|k| ((p[k] - self.center[k]) / self.semi[k]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

fn dist_to_segment(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1], ap[2] - t * ab[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Voxel indices of a capsule, or `None` if any part falls outside the grid.
fn rasterize_capsule(dims: Dims, a: [f64; 3], b: [f64; 3], r: f64) -> Option<Vec<usize>> {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..3 {
        let min = a[k].min(b[k]) - r;
        let max = a[k].max(b[k]) + r;
        if min < 0.0 || max > (dims[k] - 1) as f64 {
            return None;
        }
        lo[k] = min.ceil() as usize;
        hi[k] = max.floor() as usize;
    }
    let mut voxels = Vec::new();
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                if dist_to_segment([x as f64, y as f64, z as f64], a, b) <= r {
                    voxels.push(volume::linear_index(dims, x, y, z));
                }
            }
        }
    }
    Some(voxels)
}

/// Mark every voxel within Chebyshev distance `TUBE_GAP - 1` of `voxels`.
fn forbid_around(dims: Dims, forbidden: &mut [u8], voxels: &[usize]) {
    let g = TUBE_GAP - 1;
    for &i in voxels {
        let c = volume::coords(dims, i);
        for dz in -g..=g {
            for dy in -g..=g {
                for dx in -g..=g {
                    let p = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                    if (0..3).all(|k| p[k] >= 0 && p[k] < dims[k] as i64) {
                        forbidden[volume::linear_index(dims, p[0] as usize, p[1] as usize, p[2] as usize)] = 1;
                    }
                }
            }
        }
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let dims = spec.dims;
    let n = volume::voxel_count(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let head = spec.head.as_ref().map(|h| {
        let outer = Ellipsoid::inscribed(dims, h.margin);
        let inner = outer.shrunk(h.scalp_thickness);
        (h, outer, inner)
    });
    let brain = head.as_ref().map(|(_, _, inner)| {
        Mask::from_fn(dims, |x, y, z| inner.contains([x as f64, y as f64, z as f64]))
    });
    // tubes stay one voxel clear of the scalp
    let allowed = head.as_ref().map(|(_, _, inner)| {
        let core = inner.shrunk(1.0);
        Mask::from_fn(dims, |x, y, z| core.contains([x as f64, y as f64, z as f64]))
    });

    let mut truth = vec![0u8; n];
    let mut forbidden = vec![0u8; n];
    for tube in 0..spec.n_tubes {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let r = rng.gen_range(spec.radius.0..=spec.radius.1);
            let len = rng.gen_range(spec.length.0..=spec.length.1);
            let dir: [f64; 3] = UnitSphere.sample(&mut rng);
            let mut center = [0.0; 3];
            for k in 0..3 {
                center[k] = rng.gen_range(0.0..=(dims[k] - 1) as f64);
            }
            let half = len / 2.0;
            let a = [0, 1, 2].map(|k| center[k] - dir[k] * half);
            let b = [0, 1, 2].map(|k| center[k] + dir[k] * half);
            let Some(voxels) = rasterize_capsule(dims, a, b, r) else {
                continue;
            };
            if voxels.is_empty() || voxels.iter().any(|&i| forbidden[i] != 0) {
                continue;
            }
            if let Some(allowed) = &allowed {
                if voxels.iter().any(|&i| !allowed.get_index(i)) {
                    continue;
                }
            }
            for &i in &voxels {
                truth[i] = 1;
            }
            forbid_around(dims, &mut forbidden, &voxels);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PlacementFailure {
                what: format!("tube {} of {}", tube + 1, spec.n_tubes),
                attempts: MAX_ATTEMPTS,
            });
        }
    }
    let truth = Mask::from_vec(dims, truth)?;
    let found = label_mask(&truth, Connectivity::TwentySix).n_clusters();
    if found != spec.n_tubes {
        return Err(Error::PlacementFailure {
            what: format!("{} tubes rasterized into {found} clusters", spec.n_tubes),
            attempts: 1,
        });
    }

    let mut data = vec![0.0; n];
    for (i, v) in data.iter_mut().enumerate() {
        *v = if truth.get_index(i) {
            spec.foreground
        } else if let Some((h, outer, inner)) = &head {
            let c = volume::coords(dims, i);
            let p = [c[0] as f64, c[1] as f64, c[2] as f64];
            if inner.contains(p) {
                spec.background
            } else if outer.contains(p) {
                h.scalp
            } else {
                0.0
            }
        } else {
            spec.background
        };
    }
    if spec.noise_sd > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sd).expect("validated noise SD");
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    let header = NiftiHeader::new(dims, spec.spacing);
    Ok(Phantom {
        image: Volume::new(header, data)?,
        truth,
        brain,
    })
}

/// A controlled change to a mask whose effect on cluster metrics is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Remove `floor(f · n)` whole clusters chosen uniformly at random.
    DropClusters(f64),
    /// Remove every voxel with a 6-neighbour outside its cluster. A cluster
    /// that would vanish keeps the voxel closest to its centroid.
    ErodeShell,
    /// Add `k` 2×2×2 cubes that do not touch any existing voxel.
    AddFalseClusters(usize),
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::DropClusters(frac) => write!(f, "drop:{frac}"),
            Perturbation::ErodeShell => write!(f, "erode"),
            Perturbation::AddFalseClusters(k) => write!(f, "add:{k}"),
        }
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    /// `drop:<f>`, `erode` or `add:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown perturbation '{s}'; expected drop:<f>, erode or add:<k>"));
        match s.split_once(':') {
            None if s == "erode" => Ok(Perturbation::ErodeShell),
            Some(("drop", f)) => {
                let f: f64 = f.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::InvalidArgument(format!("drop fraction {f} outside [0, 1]")));
                }
                Ok(Perturbation::DropClusters(f))
            }
            Some(("add", k)) => Ok(Perturbation::AddFalseClusters(k.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

pub fn perturb_mask(mask: &Mask, perturbation: Perturbation, seed: u64) -> Result<Mask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match perturbation {
        Perturbation::DropClusters(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!("drop fraction {f} outside [0, 1]")));
            }
            let labels = label_mask(mask, Connectivity::TwentySix);
            let n = labels.n_clusters();
            let n_drop = (f * n as f64).floor() as usize;
            let mut ids: Vec<u32> = (1..=n as u32).collect();
            ids.shuffle(&mut rng);
            let mut dropped = vec![false; n + 1];
            for &id in &ids[..n_drop] {
                dropped[id as usize] = true;
            }
            Mask::from_vec(
                mask.dims(),
                labels
                    .labels()
                    .iter()
                    .map(|&l| u8::from(l != 0 && !dropped[l as usize]))
                    .collect(),
            )
        }
        Perturbation::ErodeShell => Ok(erode_shell(mask)),
        Perturbation::AddFalseClusters(k) => add_false_clusters(mask, k, &mut rng),
    }
}

fn erode_shell(mask: &Mask) -> Mask {
    let dims = mask.dims();
    let labels = label_mask(mask, Connectivity::TwentySix);
    let mut out = mask.clone();
    let mut survivors = vec![0u64; labels.n_clusters() + 1];
    let neighbours = Connectivity::Six.offsets();
    for (i, &l) in labels.labels().iter().enumerate() {
        if l == 0 {
            continue;
        }
        let c = volume::coords(dims, i);
        let on_shell = neighbours.iter().any(|d| {
            let p = [c[0] as i64 + d[0], c[1] as i64 + d[1], c[2] as i64 + d[2]];
            if (0..3).any(|k| p[k] < 0 || p[k] >= dims[k] as i64) {
                return true;
            }
            labels.labels()[volume::linear_index(dims, p[0] as usize, p[1] as usize, p[2] as usize)] != l
        });
        if on_shell {
            out.set_index(i, false);
        } else {
            survivors[l as usize] += 1;
        }
    }

    // clusters with no interior keep the voxel nearest their centroid
    let n = labels.n_clusters();
    let mut sum = vec![[0.0f64; 3]; n + 1];
    let mut count = vec![0u64; n + 1];
    for (i, &l) in labels.labels().iter().enumerate() {
        if l != 0 && survivors[l as usize] == 0 {
            let c = volume::coords(dims, i);
            for k in 0..3 {
                sum[l as usize][k] += c[k] as f64;
            }
            count[l as usize] += 1;
        }
    }
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n + 1];
    for (i, &l) in labels.labels().iter().enumerate() {
        let l = l as usize;
        if l != 0 && survivors[l] == 0 {
            let c = volume::coords(dims, i);
            let d2: f64 = (0..3)
                .map(|k| (c[k] as f64 - sum[l][k] / count[l] as f64).powi(2))
                .sum();
            if best[l].is_none_or(|(bd, _)| d2 < bd) {
                best[l] = Some((d2, i));
            }
        }
    }
    for (_, i) in best.into_iter().flatten() {
        out.set_index(i, true);
    }
    out
}

fn add_false_clusters(mask: &Mask, k: usize, rng: &mut ChaCha8Rng) -> Result<Mask> {
    const SIDE: usize = 2;
    let dims = mask.dims();
    if dims.iter().any(|&d| d < SIDE) {
        return Err(Error::PlacementFailure {
            what: format!("{k} false clusters in a {dims:?} volume"),
            attempts: 0,
        });
    }
    let mut out = mask.clone();
    let mut forbidden = vec![0u8; mask.len()];
    let occupied: Vec<usize> = (0..mask.len()).filter(|&i| mask.get_index(i)).collect();
    // one voxel of clearance rules out 26-adjacency
    let mark = |forbidden: &mut [u8], voxels: &[usize]| {
        for &i in voxels {
            let c = volume::coords(dims, i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let p = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                        if (0..3).all(|a| p[a] >= 0 && p[a] < dims[a] as i64) {
                            forbidden[volume::linear_index(dims, p[0] as usize, p[1] as usize, p[2] as usize)] = 1;
                        }
                    }
                }
            }
        }
    };
    mark(&mut forbidden, &occupied);
    for added in 0..k {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let o = [0, 1, 2].map(|a| rng.gen_range(0..=dims[a] - SIDE));
            let mut cube = Vec::with_capacity(SIDE * SIDE * SIDE);
            for z in 0..SIDE {
                for y in 0..SIDE {
                    for x in 0..SIDE {
                        cube.push(volume::linear_index(dims, o[0] + x, o[1] + y, o[2] + z));
                    }
                }
            }
            if cube.iter().any(|&i| forbidden[i] != 0) {
                continue;
            }
            for &i in &cube {
                out.set_index(i, true);
            }
            mark(&mut forbidden, &cube);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PlacementFailure {
                what: format!("false cluster {} of {k}", added + 1),
                attempts: MAX_ATTEMPTS,
            });
        }
    }
    Ok(out)
}

/// Region masks shaped like a deep-grey "BG" core inside a "WM" shell,
/// both centred in the grid.
pub fn region_masks(dims: Dims) -> (Mask, Mask) {
    let outer = Ellipsoid {
        center: dims.map(|d| (d as f64 - 1.0) / 2.0),
        semi: dims.map(|d| d as f64 / 2.5),
    };
    let core = Ellipsoid {
        center: outer.center,
        semi: dims.map(|d| d as f64 / 6.0),
    };
    let bg = Mask::from_fn(dims, |x, y, z| core.contains([x as f64, y as f64, z as f64]));
    let wm = Mask::from_fn(dims, |x, y, z| {
        let p = [x as f64, y as f64, z as f64];
        outer.contains(p) && !core.contains(p)
    });
    (wm, bg)
}

/// Stable per-item seed derived from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{cluster_metrics, voxel_metrics, DscNumMode};

    fn spec(n_tubes: usize, seed: u64) -> PhantomSpec {
        PhantomSpec {
            n_tubes,
            seed,
            ..PhantomSpec::default()
        }
    }

    fn cluster(a: &Mask, b: &Mask) -> crate::metrics::ClusterMetrics {
        let la = label_mask(a, Connectivity::TwentySix);
        let lb = label_mask(b, Connectivity::TwentySix);
        cluster_metrics(&la, &lb, DscNumMode::Symmetric).unwrap()
    }

    #[test]
    fn tube_count_is_exact() {
        for seed in 0..5 {
            let p = generate_phantom(&spec(10, seed)).unwrap();
            assert_eq!(label_mask(&p.truth, Connectivity::TwentySix).n_clusters(), 10);
        }
    }

    #[test]
    fn deterministic() {
        let s = PhantomSpec {
            noise_sd: 5.0,
            ..spec(8, 42)
        };
        let a = generate_phantom(&s).unwrap();
        let b = generate_phantom(&s).unwrap();
        assert_eq!(a, b);
        let c = generate_phantom(&PhantomSpec { seed: 43, ..s }).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn noiseless_image_has_two_levels() {
        let p = generate_phantom(&spec(6, 1)).unwrap();
        let mut levels: Vec<f64> = p.image.data().to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![300.0, 600.0]);
    }

    #[test]
    fn overfull_spec_fails() {
        let s = PhantomSpec {
            dims: [8, 8, 8],
            n_tubes: 50,
            ..PhantomSpec::default()
        };
        assert!(matches!(generate_phantom(&s), Err(Error::PlacementFailure { .. })));
    }

    #[test]
    fn head_model_places_tubes_inside_brain() {
        let s = PhantomSpec {
            dims: [40, 44, 40],
            head: Some(HeadModel::default()),
            ..spec(8, 3)
        };
        let p = generate_phantom(&s).unwrap();
        let brain = p.brain.as_ref().unwrap();
        assert_eq!(p.truth.intersect(brain).unwrap().count(), p.truth.count());
        assert_eq!(p.image.get(0, 0, 0), 0.0);
    }

    #[test]
    fn drop_half_of_ten() {
        let truth = generate_phantom(&spec(10, 9)).unwrap().truth;
        let pred = perturb_mask(&truth, Perturbation::DropClusters(0.5), 1).unwrap();
        let m = cluster(&truth, &pred);
        assert_eq!(m.sen, Some(0.5));
        assert_eq!(m.ppv, Some(1.0));
    }

    #[test]
    fn add_five_to_five() {
        let truth = generate_phantom(&spec(5, 2)).unwrap().truth;
        let pred = perturb_mask(&truth, Perturbation::AddFalseClusters(5), 1).unwrap();
        let m = cluster(&truth, &pred);
        assert_eq!(m.ppv, Some(0.5));
        assert_eq!(m.sen, Some(1.0));
    }

    #[test]
    fn erode_keeps_every_cluster() {
        let truth = generate_phantom(&spec(10, 4)).unwrap().truth;
        let pred = perturb_mask(&truth, Perturbation::ErodeShell, 0).unwrap();
        assert_eq!(cluster(&truth, &pred).dsc, Some(1.0));
        assert!(voxel_metrics(&truth, &pred, Spacing::default()).unwrap().dsc.unwrap() < 1.0);
        assert_eq!(pred.intersect(&truth).unwrap().count(), pred.count());
    }

    #[test]
    fn erode_leaves_single_voxels() {
        let m = Mask::from_fn([5, 5, 5], |x, y, z| (x, y, z) == (1, 1, 1) || (x, y, z) == (3, 3, 3));
        assert_eq!(perturb_mask(&m, Perturbation::ErodeShell, 0).unwrap(), m);
    }

    #[test]
    fn erode_solid_cube_keeps_interior() {
        let m = Mask::from_fn([7, 7, 7], |x, y, z| (1..6).contains(&x) && (1..6).contains(&y) && (1..6).contains(&z));
        let e = perturb_mask(&m, Perturbation::ErodeShell, 0).unwrap();
        assert_eq!(e.count(), 27);
    }

    #[test]
    fn perturbation_parsing() {
        assert_eq!("drop:0.5".parse::<Perturbation>().unwrap(), Perturbation::DropClusters(0.5));
        assert_eq!("erode".parse::<Perturbation>().unwrap(), Perturbation::ErodeShell);
        assert_eq!("add:3".parse::<Perturbation>().unwrap(), Perturbation::AddFalseClusters(3));
        assert!("drop:2".parse::<Perturbation>().is_err());
        assert!("shrink".parse::<Perturbation>().is_err());
        let p = Perturbation::AddFalseClusters(4);
        assert_eq!(p.to_string().parse::<Perturbation>().unwrap(), p);
    }

    #[test]
    fn spec_json_roundtrip() {
        let s = PhantomSpec {
            head: Some(HeadModel::default()),
            ..spec(3, 5)
        };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<PhantomSpec>(&json).unwrap(), s);
    }

    #[test]
    fn regions_are_disjoint() {
        let (wm, bg) = region_masks([30, 30, 30]);
        assert!(wm.count() > 0 && bg.count() > 0);
        assert_eq!(wm.intersect(&bg).unwrap().count(), 0);
    }
}
