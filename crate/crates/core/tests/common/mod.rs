//! Brute-force reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;

use pvs_eval::clustering::Connectivity;
use pvs_eval::metrics::{DscNumMode, RegionClusterMode};
use pvs_eval::Mask;

/// Neighbour offsets enumerated from the number of non-zero components.
pub fn neighbour_offsets(c: Connectivity) -> Vec<[i64; 3]> {
    let max_nonzero = match c {
        Connectivity::Six => 1,
        Connectivity::Eighteen => 2,
        Connectivity::TwentySix => 3,
    };
    let mut out = Vec::new();
    for dx in -1i64..=1 {
        for dy in -1i64..=1 {
            for dz in -1i64..=1 {
                let nonzero = [dx, dy, dz].iter().filter(|v| **v != 0).count();
                if (1..=max_nonzero).contains(&nonzero) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Breadth-first labeling. Labels are numbered 1.. in raster order of each
/// component's first voxel.
pub fn bfs_labels(mask: &Mask, c: Connectivity) -> (Vec<u32>, usize) {
    let [nx, ny, nz] = mask.dims();
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let offsets = neighbour_offsets(c);
    let mut labels = vec![0u32; mask.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !mask.get(x, y, z) || labels[idx(x, y, z)] != 0 {
                    continue;
                }
                next += 1;
                labels[idx(x, y, z)] = next;
                queue.push_back([x, y, z]);
                while let Some([px, py, pz]) = queue.pop_front() {
                    for d in &offsets {
                        let q = [px as i64 + d[0], py as i64 + d[1], pz as i64 + d[2]];
                        if q[0] < 0 || q[1] < 0 || q[2] < 0 {
                            continue;
                        }
                        let (qx, qy, qz) = (q[0] as usize, q[1] as usize, q[2] as usize);
                        if qx >= nx || qy >= ny || qz >= nz {
                            continue;
                        }
                        if mask.get(qx, qy, qz) && labels[idx(qx, qy, qz)] == 0 {
                            labels[idx(qx, qy, qz)] = next;
                            queue.push_back([qx, qy, qz]);
                        }
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

fn and(a: &Mask, b: &Mask) -> Mask {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x & y).collect();
    Mask::from_vec(a.dims(), data).unwrap()
}

/// Clusters of `mask` considered inside `region`, as voxel index lists.
fn region_clusters(mask: &Mask, region: Option<&Mask>, c: Connectivity, mode: RegionClusterMode) -> Vec<Vec<usize>> {
    let (source, keep_majority) = match (region, mode) {
        (Some(r), RegionClusterMode::SplitAfterMasking) => (and(mask, r), false),
        (Some(_), RegionClusterMode::AssignByMajority) => (mask.clone(), true),
        (None, _) => (mask.clone(), false),
    };
    let (labels, n) = bfs_labels(&source, c);
    let mut clusters = vec![Vec::new(); n];
    for (i, &l) in labels.iter().enumerate() {
        if l > 0 {
            clusters[l as usize - 1].push(i);
        }
    }
    if keep_majority {
        let r = region.unwrap();
        clusters.retain(|voxels| {
            let inside = voxels.iter().filter(|&&i| r.get_index(i)).count();
            2 * inside >= voxels.len()
        });
    }
    clusters
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn dice(overlap: usize, m: usize, a: usize) -> f64 {
    match (m, a) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => overlap as f64 / (m + a) as f64,
    }
}

/// The six measures in report order (dsc_vox, dsc_num, sen_vox, sen_num,
/// ppv_vox, ppv_num), counted voxel by voxel and cluster by cluster.
pub fn naive_metrics(
    manual: &Mask,
    algo: &Mask,
    region: Option<&Mask>,
    c: Connectivity,
    dsc_mode: DscNumMode,
    region_mode: RegionClusterMode,
) -> [Option<f64>; 6] {
    let inside = |i: usize| region.is_none_or(|r| r.get_index(i));
    let (mut nm, mut na, mut no) = (0, 0, 0);
    for i in 0..manual.len() {
        if !inside(i) {
            continue;
        }
        let (m, a) = (manual.get_index(i), algo.get_index(i));
        nm += m as usize;
        na += a as usize;
        no += (m && a) as usize;
    }

    let mc = region_clusters(manual, region, c, region_mode);
    let ac = region_clusters(algo, region, c, region_mode);
    let mut manual_vox = vec![false; manual.len()];
    for &i in mc.iter().flatten() {
        manual_vox[i] = true;
    }
    let mut algo_vox = vec![false; algo.len()];
    for &i in ac.iter().flatten() {
        algo_vox[i] = true;
    }
    let hit_manual = mc.iter().filter(|v| v.iter().any(|&i| algo_vox[i])).count();
    let tp_algo = ac.iter().filter(|v| v.iter().any(|&i| manual_vox[i])).count();
    let overlap_term = match dsc_mode {
        DscNumMode::Symmetric => hit_manual + tp_algo,
        DscNumMode::AlgoSide => 2 * tp_algo,
    };

    [
        Some(dice(2 * no, nm, na)),
        Some(dice(overlap_term, mc.len(), ac.len())),
        ratio(no, nm),
        ratio(hit_manual, mc.len()),
        ratio(no, na),
        ratio(tp_algo, ac.len()),
    ]
}
