//! Connected-component labeling of binary masks and the cluster overlap
//! structure between two labelings.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nifti::{DataType, NiftiHeader};
use crate::volume::{self, Dims, Mask, Spacing, Volume};

/// Voxel adjacency used to decide which foreground voxels belong together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Shared faces.
    Six,
    /// Shared faces or edges.
    Eighteen,
    /// Shared faces, edges or corners.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix];

    pub fn as_u8(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Whether the offset `(dx, dy, dz)` (each in -1..=1, not all zero) is a
    /// neighbour under this connectivity.
    pub fn admits(self, d: [i64; 3]) -> bool {
        let l1: i64 = d.iter().map(|v| v.abs()).sum();
        match self {
            Connectivity::Six => l1 == 1,
            Connectivity::Eighteen => (1..=2).contains(&l1),
            Connectivity::TwentySix => l1 >= 1,
        }
    }

    /// All neighbour offsets.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if self.admits([dx, dy, dz]) {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets of neighbours that precede a voxel in raster order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0))))
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.as_u8()
    }
}

impl std::fmt::Display for Connectivity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Cluster IDs per voxel: 0 is background, `1..=n_clusters` are clusters
/// numbered in order of their first voxel in raster (x-fastest) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: Dims,
    labels: Vec<u32>,
    n_clusters: usize,
}

impl LabelMap {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Builds a label map from arbitrary labels, renumbering them in raster
    /// discovery order. Connectivity is not checked.
    pub fn from_labels(dims: Dims, labels: &[u32]) -> Result<Self> {
        if labels.len() != volume::voxel_count(dims) {
            return Err(Error::InvalidArgument("label length does not match dims".into()));
        }
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut next = 0u32;
        let labels = labels
            .iter()
            .map(|&l| {
                if l == 0 {
                    0
                } else {
                    *remap.entry(l).or_insert_with(|| {
                        next += 1;
                        next
                    })
                }
            })
            .collect();
        Ok(LabelMap {
            dims,
            labels,
            n_clusters: next as usize,
        })
    }

    /// Voxel count per cluster, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<u64> {
        let mut sizes = vec![0u64; self.n_clusters];
        for &l in &self.labels {
            if l > 0 {
                sizes[(l - 1) as usize] += 1;
            }
        }
        sizes
    }

    pub fn foreground(&self) -> Mask {
        Mask::from_vec(self.dims, self.labels.iter().map(|&l| u8::from(l > 0)).collect())
            .expect("dims consistent")
    }

    /// Keep only the clusters for which `keep(label)` holds, renumbering the
    /// survivors in discovery order.
    pub fn retain(&self, mut keep: impl FnMut(u32) -> bool) -> LabelMap {
        let mut flags = vec![false; self.n_clusters + 1];
        for (l, f) in flags.iter_mut().enumerate().skip(1) {
            *f = keep(l as u32);
        }
        let filtered: Vec<u32> = self
            .labels
            .iter()
            .map(|&l| if flags[l as usize] { l } else { 0 })
            .collect();
        LabelMap::from_labels(self.dims, &filtered).expect("dims consistent")
    }

    /// Labels as an i32 volume for inspection in a viewer.
    pub fn to_volume(&self, header: &NiftiHeader) -> Result<Volume> {
        if header.dims != self.dims {
            return Err(Error::ShapeMismatch {
                left: self.dims,
                right: header.dims,
            });
        }
        let mut header = header.clone();
        header.datatype = DataType::I32;
        header.scl_slope = 1.0;
        header.scl_inter = 0.0;
        Volume::new(header, self.labels.iter().map(|&l| f64::from(l)).collect())
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // slot 0 unused so provisional labels start at 1
        DisjointSet { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Label the connected components of a binary volume. Fails with
/// [`Error::NotBinary`] if any voxel is not exactly 0 or 1.
pub fn label_components(mask: &Volume, connectivity: Connectivity) -> Result<LabelMap> {
    Ok(label_mask(&mask.to_mask()?, connectivity))
}

/// Two-pass union-find labeling over a raster scan.
pub fn label_mask(mask: &Mask, connectivity: Connectivity) -> LabelMap {
    let dims = mask.dims();
    let [nx, ny, nz] = dims;
    let fg = mask.as_slice();
    let mut labels = vec![0u32; fg.len()];
    let mut sets = DisjointSet::new();

    let backward = connectivity.backward_offsets();
    let stride_y = nx as i64;
    let stride_z = (nx * ny) as i64;
    let deltas: Vec<(i64, [i64; 3])> = backward
        .iter()
        .map(|&[dx, dy, dz]| (dx + dy * stride_y + dz * stride_z, [dx, dy, dz]))
        .collect();

    let mut idx = 0usize;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if fg[idx] != 0 {
                    let interior = x > 0 && x + 1 < nx && y > 0 && y + 1 < ny && z > 0;
                    let mut current = 0u32;
                    for &(delta, [dx, dy, dz]) in &deltas {
                        if !interior {
                            let xx = x as i64 + dx;
                            let yy = y as i64 + dy;
                            let zz = z as i64 + dz;
                            if xx < 0 || yy < 0 || zz < 0 || xx >= nx as i64 || yy >= ny as i64 {
                                continue;
                            }
                        }
                        let n = labels[(idx as i64 + delta) as usize];
                        if n != 0 {
                            if current == 0 {
                                current = n;
                            } else if n != current {
                                sets.union(current, n);
                            }
                        }
                    }
                    labels[idx] = if current == 0 { sets.make() } else { current };
                }
                idx += 1;
            }
        }
    }

    let mut final_of_root = vec![0u32; sets.parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l != 0 {
            let root = sets.find(*l) as usize;
            if final_of_root[root] == 0 {
                next += 1;
                final_of_root[root] = next;
            }
            *l = final_of_root[root];
        }
    }

    LabelMap {
        dims,
        labels,
        n_clusters: next as usize,
    }
}

/// Shared voxel counts between manual and algorithm clusters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OverlapTable {
    /// `(manual_label, algo_label) → shared voxels`, both labels ≥ 1.
    pub pairs: BTreeMap<(u32, u32), u64>,
    /// Cluster sizes of the manual labeling, indexed by `label - 1`.
    pub manual_sizes: Vec<u64>,
    /// Cluster sizes of the algorithm labeling, indexed by `label - 1`.
    pub algo_sizes: Vec<u64>,
}

impl OverlapTable {
    pub fn n_manual(&self) -> usize {
        self.manual_sizes.len()
    }

    pub fn n_algo(&self) -> usize {
        self.algo_sizes.len()
    }

    /// Manual clusters touched by at least one algorithm voxel.
    pub fn manual_hits(&self) -> usize {
        let mut hit = vec![false; self.n_manual()];
        for &(m, _) in self.pairs.keys() {
            hit[(m - 1) as usize] = true;
        }
        hit.iter().filter(|&&h| h).count()
    }

    /// Algorithm clusters touching at least one manual voxel.
    pub fn algo_hits(&self) -> usize {
        let mut hit = vec![false; self.n_algo()];
        for &(_, a) in self.pairs.keys() {
            hit[(a - 1) as usize] = true;
        }
        hit.iter().filter(|&&h| h).count()
    }

    /// Voxels of manual cluster `m` not covered by any algorithm cluster.
    pub fn unmatched_manual_voxels(&self, m: u32) -> u64 {
        let shared: u64 = self.pairs.range((m, 0)..=(m, u32::MAX)).map(|(_, c)| c).sum();
        self.manual_sizes[(m - 1) as usize] - shared
    }

    pub fn transpose(&self) -> OverlapTable {
        OverlapTable {
            pairs: self.pairs.iter().map(|(&(m, a), &c)| ((a, m), c)).collect(),
            manual_sizes: self.algo_sizes.clone(),
            algo_sizes: self.manual_sizes.clone(),
        }
    }
}

pub fn overlap_table(manual: &LabelMap, algo: &LabelMap) -> Result<OverlapTable> {
    if manual.dims != algo.dims {
        return Err(Error::ShapeMismatch {
            left: manual.dims,
            right: algo.dims,
        });
    }
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut manual_sizes = vec![0u64; manual.n_clusters];
    let mut algo_sizes = vec![0u64; algo.n_clusters];
    for (&m, &a) in manual.labels.iter().zip(&algo.labels) {
        if m != 0 {
            manual_sizes[(m - 1) as usize] += 1;
        }
        if a != 0 {
            algo_sizes[(a - 1) as usize] += 1;
            if m != 0 {
                *counts.entry((m, a)).or_insert(0) += 1;
            }
        }
    }
    Ok(OverlapTable {
        pairs: counts.into_iter().collect(),
        manual_sizes,
        algo_sizes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSize {
    pub voxels: u64,
    pub volume_mm3: f64,
}

pub fn cluster_sizes(labels: &LabelMap, spacing: Spacing) -> BTreeMap<u32, ClusterSize> {
    let voxel_volume = spacing.voxel_volume();
    labels
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(i, voxels)| {
            (
                i as u32 + 1,
                ClusterSize {
                    voxels,
                    volume_mm3: voxels as f64 * voxel_volume,
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Breadth-first flood fill; returns (count, component id per voxel).
    fn bfs_components(mask: &Mask, conn: Connectivity) -> (usize, Vec<u32>) {
        let dims = mask.dims();
        let offsets = conn.offsets();
        let mut comp = vec![0u32; mask.len()];
        let mut n = 0;
        for start in 0..mask.len() {
            if !mask.get_index(start) || comp[start] != 0 {
                continue;
            }
            n += 1;
            comp[start] = n;
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                let c = volume::coords(dims, i);
                for d in &offsets {
                    let p: Vec<i64> = (0..3).map(|k| c[k] as i64 + d[k]).collect();
                    if (0..3).any(|k| p[k] < 0 || p[k] >= dims[k] as i64) {
                        continue;
                    }
                    let j = volume::linear_index(dims, p[0] as usize, p[1] as usize, p[2] as usize);
                    if mask.get_index(j) && comp[j] == 0 {
                        comp[j] = n;
                        queue.push_back(j);
                    }
                }
            }
        }
        (n as usize, comp)
    }

    fn random_mask(dims: Dims, p: f64, seed: u64) -> Mask {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mask::from_fn(dims, |_, _, _| rng.gen_bool(p))
    }

    #[test]
    fn neighbour_counts() {
        assert_eq!(Connectivity::Six.offsets().len(), 6);
        assert_eq!(Connectivity::Eighteen.offsets().len(), 18);
        assert_eq!(Connectivity::TwentySix.offsets().len(), 26);
        assert_eq!(Connectivity::TwentySix.backward_offsets().len(), 13);
    }

    #[test]
    fn single_voxel() {
        let mut m = Mask::empty([3, 3, 3]);
        m.set(1, 1, 1, true);
        let lm = label_mask(&m, Connectivity::TwentySix);
        assert_eq!(lm.n_clusters(), 1);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let mut m = Mask::empty([2, 2, 2]);
        m.set(0, 0, 0, true);
        m.set(1, 1, 1, true);
        assert_eq!(bfs_components(&m, Connectivity::TwentySix).0, 1);
        assert_eq!(bfs_components(&m, Connectivity::Six).0, 2);
        assert_eq!(label_mask(&m, Connectivity::TwentySix).n_clusters(), 1);
        assert_eq!(label_mask(&m, Connectivity::Eighteen).n_clusters(), 2);
        assert_eq!(label_mask(&m, Connectivity::Six).n_clusters(), 2);
    }

    #[test]
    fn non_binary_rejected() {
        let v = Volume::from_fn([2, 2, 2], Spacing::isotropic(1.0).unwrap(), |x, _, _| 2.0 * x as f64);
        assert!(matches!(
            label_components(&v, Connectivity::TwentySix),
            Err(Error::NotBinary(_))
        ));
    }

    #[test]
    fn random_masks_match_bfs() {
        for trial in 0..100 {
            let m = random_mask([32, 32, 32], 0.1, trial);
            let conn = Connectivity::ALL[trial as usize % 3];
            let (n, comp) = bfs_components(&m, conn);
            let lm = label_mask(&m, conn);
            assert_eq!(lm.n_clusters(), n, "trial {trial}");
            // BFS also discovers in raster order, so the partitions coincide label for label.
            assert_eq!(lm.labels(), comp.as_slice(), "trial {trial}");
        }
    }

    #[test]
    fn labels_are_in_discovery_order() {
        let m = random_mask([10, 9, 8], 0.3, 7);
        let lm = label_mask(&m, Connectivity::Six);
        let mut max_seen = 0;
        for &l in lm.labels() {
            if l > max_seen {
                assert_eq!(l, max_seen + 1);
                max_seen = l;
            }
        }
        assert_eq!(max_seen as usize, lm.n_clusters());
    }

    #[test]
    fn identity_overlap_is_diagonal() {
        let m = random_mask([12, 12, 12], 0.15, 3);
        let lm = label_mask(&m, Connectivity::TwentySix);
        let t = overlap_table(&lm, &lm).unwrap();
        assert_eq!(t.pairs.len(), lm.n_clusters());
        for (&(a, b), &c) in &t.pairs {
            assert_eq!(a, b);
            assert_eq!(c, lm.sizes()[(a - 1) as usize]);
        }
    }

    #[test]
    fn disjoint_masks_have_empty_table() {
        let a = Mask::from_fn([6, 6, 6], |x, _, _| x < 2);
        let b = Mask::from_fn([6, 6, 6], |x, _, _| x > 3);
        let t = overlap_table(
            &label_mask(&a, Connectivity::TwentySix),
            &label_mask(&b, Connectivity::TwentySix),
        )
        .unwrap();
        assert!(t.pairs.is_empty());
    }

    #[test]
    fn straddling_line() {
        // manual: voxels 0-1 and 4-5 (two clusters); algo: voxels 1-4 (one cluster)
        let manual = Mask::from_fn([1, 1, 7], |_, _, z| matches!(z, 0 | 1 | 4 | 5));
        let algo = Mask::from_fn([1, 1, 7], |_, _, z| (1..=4).contains(&z));
        let lm = label_mask(&manual, Connectivity::TwentySix);
        let la = label_mask(&algo, Connectivity::TwentySix);
        assert_eq!(lm.n_clusters(), 2);
        let t = overlap_table(&lm, &la).unwrap();
        assert_eq!(t.pairs, BTreeMap::from([((1, 1), 1), ((2, 1), 1)]));
        assert_eq!(t.unmatched_manual_voxels(1), 1);
        assert_eq!(t.unmatched_manual_voxels(2), 1);
    }

    #[test]
    fn shape_mismatch() {
        let a = label_mask(&Mask::empty([2, 2, 2]), Connectivity::Six);
        let b = label_mask(&Mask::empty([2, 2, 3]), Connectivity::Six);
        assert!(matches!(overlap_table(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn cube_volume_at_point_eight_mm() {
        let m = Mask::from_fn([4, 4, 4], |x, y, z| x < 2 && y < 2 && z < 2);
        let sizes = cluster_sizes(&label_mask(&m, Connectivity::TwentySix), Spacing::default());
        assert_eq!(sizes.len(), 1);
        assert_eq!(sizes[&1].voxels, 8);
        assert!((sizes[&1].volume_mm3 - 4.096).abs() < 1e-12);
        let empty = cluster_sizes(&label_mask(&Mask::empty([3, 3, 3]), Connectivity::Six), Spacing::default());
        assert!(empty.is_empty());
    }

    #[test]
    fn retain_renumbers() {
        let m = Mask::from_fn([7, 1, 1], |x, _, _| x % 2 == 0);
        let lm = label_mask(&m, Connectivity::Six);
        assert_eq!(lm.n_clusters(), 4);
        let kept = lm.retain(|l| l % 2 == 0);
        assert_eq!(kept.n_clusters(), 2);
        assert_eq!(kept.labels(), &[0, 0, 1, 0, 0, 0, 2]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn connectivity_monotone(seed in any::<u64>(), p in 0.05f64..0.5) {
                let m = random_mask([10, 11, 9], p, seed);
                let n6 = label_mask(&m, Connectivity::Six).n_clusters();
                let n18 = label_mask(&m, Connectivity::Eighteen).n_clusters();
                let n26 = label_mask(&m, Connectivity::TwentySix).n_clusters();
                prop_assert!(n6 >= n18 && n18 >= n26);
            }

            #[test]
            fn sizes_sum_to_popcount(seed in any::<u64>(), p in 0.0f64..0.6) {
                let m = random_mask([9, 9, 9], p, seed);
                let lm = label_mask(&m, Connectivity::Eighteen);
                let total: u64 = cluster_sizes(&lm, Spacing::default()).values().map(|s| s.voxels).sum();
                prop_assert_eq!(total as usize, m.count());
            }

            #[test]
            fn overlap_totals_consistent(seed in any::<u64>()) {
                let a = random_mask([8, 8, 8], 0.2, seed);
                let b = random_mask([8, 8, 8], 0.2, seed.wrapping_add(1));
                let la = label_mask(&a, Connectivity::TwentySix);
                let lb = label_mask(&b, Connectivity::TwentySix);
                let t = overlap_table(&la, &lb).unwrap();
                let t2 = overlap_table(&lb, &la).unwrap();
                prop_assert_eq!(&t.transpose(), &t2);
                let sizes = la.sizes();
                for m in 1..=la.n_clusters() as u32 {
                    let shared: u64 = t.pairs.iter().filter(|((mm, _), _)| *mm == m).map(|(_, c)| c).sum();
                    prop_assert_eq!(shared + t.unmatched_manual_voxels(m), sizes[(m - 1) as usize]);
                }
            }
        }
    }
}
