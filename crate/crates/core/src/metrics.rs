//! Voxel- and cluster-level agreement measures between a manual and an
//! algorithm segmentation, plus Pearson correlation.
//!
//! | measure | voxel level                     | cluster level                 |
//! |---------|---------------------------------|-------------------------------|
//! | Dice    | 2·vol(overlap) / (vol(m)+vol(a)) | see [`DscNumMode`]            |
//! | Sen     | vol(overlap) / vol(m)            | manual clusters hit / n(m)    |
//! | PPV     | vol(overlap) / vol(a)            | algo clusters that hit / n(a) |
//!
//! An algorithm cluster is a true positive when any of its voxels lies in the
//! manual segmentation; a manual cluster is hit when any of its voxels lies in
//! the algorithm segmentation.
//!
//! Zero denominators follow [`ZeroPolicy`]: when both masks are empty Dice is
//! `both_empty_dsc` and Sen/PPV are undefined (`None`); when exactly one is
//! empty Dice is `one_empty_dsc`, the ratio with the empty denominator is
//! `None` and the other ratio is 0.

use serde::{Deserialize, Serialize};

use crate::clustering::{label_mask, overlap_table, Connectivity, LabelMap};
use crate::error::{Error, Result};
use crate::volume::{Mask, Spacing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "WM")]
    WhiteMatter,
    #[serde(rename = "BG")]
    BasalGanglia,
    #[serde(rename = "whole")]
    Whole,
}

impl Region {
    pub fn code(self) -> &'static str {
        match self {
            Region::WhiteMatter => "WM",
            Region::BasalGanglia => "BG",
            Region::Whole => "whole",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Region::WhiteMatter => "White Matter",
            Region::BasalGanglia => "Basal Ganglia",
            Region::Whole => "Whole Volume",
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wm" | "white_matter" => Ok(Region::WhiteMatter),
            "bg" | "basal_ganglia" => Ok(Region::BasalGanglia),
            "whole" => Ok(Region::Whole),
            _ => Err(Error::InvalidArgument(format!("unknown region {s:?}"))),
        }
    }
}

/// How the cluster-level Dice counts overlapping clusters when matches are
/// not one-to-one. Both modes agree on one-to-one overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DscNumMode {
    /// `(n_tp_algo + n_hit_manual) / (n_manual + n_algo)`
    #[default]
    Symmetric,
    /// `2 · n_tp_algo / (n_manual + n_algo)`
    AlgoSide,
}

impl std::str::FromStr for DscNumMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(DscNumMode::Symmetric),
            "algo-side" => Ok(DscNumMode::AlgoSide),
            _ => Err(Error::InvalidArgument(format!("unknown dsc_num mode {s:?}"))),
        }
    }
}

/// How clusters interact with region masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionClusterMode {
    /// Intersect both segmentations with the region, then label. A cluster
    /// crossing the region boundary contributes only its inside part.
    #[default]
    SplitAfterMasking,
    /// Label the full segmentations and keep whole clusters with at least half
    /// of their voxels inside the region.
    AssignByMajority,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroPolicy {
    pub both_empty_dsc: f64,
    pub one_empty_dsc: f64,
}

impl Default for ZeroPolicy {
    fn default() -> Self {
        ZeroPolicy {
            both_empty_dsc: 1.0,
            one_empty_dsc: 0.0,
        }
    }
}

impl ZeroPolicy {
    fn dice(&self, overlap_term: f64, manual: f64, algo: f64) -> f64 {
        match (manual == 0.0, algo == 0.0) {
            (true, true) => self.both_empty_dsc,
            (true, false) | (false, true) => self.one_empty_dsc,
            (false, false) => overlap_term / (manual + algo),
        }
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

/// Settings shared by every metric computation in a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub connectivity: Connectivity,
    pub dsc_num_mode: DscNumMode,
    pub region_cluster_mode: RegionClusterMode,
    pub zero_policy: ZeroPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelMetrics {
    pub dsc: Option<f64>,
    pub sen: Option<f64>,
    pub ppv: Option<f64>,
    pub n_manual: u64,
    pub n_algo: u64,
    pub n_overlap: u64,
    pub vol_manual: f64,
    pub vol_algo: f64,
    pub vol_overlap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterMetrics {
    pub dsc: Option<f64>,
    pub sen: Option<f64>,
    pub ppv: Option<f64>,
    pub n_manual: u64,
    pub n_algo: u64,
    pub n_tp_algo: u64,
    pub n_hit_manual: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMetrics {
    pub voxel: VoxelMetrics,
    pub cluster: ClusterMetrics,
}

pub fn voxel_metrics(manual: &Mask, algo: &Mask, spacing: Spacing) -> Result<VoxelMetrics> {
    voxel_metrics_with(manual, algo, spacing, &ZeroPolicy::default())
}

pub fn voxel_metrics_with(
    manual: &Mask,
    algo: &Mask,
    spacing: Spacing,
    policy: &ZeroPolicy,
) -> Result<VoxelMetrics> {
    manual.check_dims(algo)?;
    let (mut nm, mut na, mut no) = (0u64, 0u64, 0u64);
    for (&m, &a) in manual.as_slice().iter().zip(algo.as_slice()) {
        nm += u64::from(m);
        na += u64::from(a);
        no += u64::from(m & a);
    }
    let (m, a, o) = (nm as f64, na as f64, no as f64);
    let vv = spacing.voxel_volume();
    Ok(VoxelMetrics {
        dsc: Some(policy.dice(2.0 * o, m, a)),
        sen: ratio(o, m),
        ppv: ratio(o, a),
        n_manual: nm,
        n_algo: na,
        n_overlap: no,
        vol_manual: m * vv,
        vol_algo: a * vv,
        vol_overlap: o * vv,
    })
}

pub fn cluster_metrics(manual: &LabelMap, algo: &LabelMap, mode: DscNumMode) -> Result<ClusterMetrics> {
    cluster_metrics_with(manual, algo, mode, &ZeroPolicy::default())
}

pub fn cluster_metrics_with(
    manual: &LabelMap,
    algo: &LabelMap,
    mode: DscNumMode,
    policy: &ZeroPolicy,
) -> Result<ClusterMetrics> {
    let table = overlap_table(manual, algo)?;
    let n_manual = table.n_manual() as u64;
    let n_algo = table.n_algo() as u64;
    let n_tp_algo = table.algo_hits() as u64;
    let n_hit_manual = table.manual_hits() as u64;
    let (m, a) = (n_manual as f64, n_algo as f64);
    let overlap_term = match mode {
        DscNumMode::Symmetric => (n_tp_algo + n_hit_manual) as f64,
        DscNumMode::AlgoSide => 2.0 * n_tp_algo as f64,
    };
    Ok(ClusterMetrics {
        dsc: Some(policy.dice(overlap_term, m, a)),
        sen: ratio(n_hit_manual as f64, m),
        ppv: ratio(n_tp_algo as f64, a),
        n_manual,
        n_algo,
        n_tp_algo,
        n_hit_manual,
    })
}

/// All metrics for one subject restricted to `region` (`None` = whole volume).
pub fn region_metrics(
    manual: &Mask,
    algo: &Mask,
    region: Option<&Mask>,
    spacing: Spacing,
    config: &MetricsConfig,
) -> Result<RegionMetrics> {
    manual.check_dims(algo)?;
    let (manual_in, algo_in) = match region {
        Some(r) => (manual.intersect(r)?, algo.intersect(r)?),
        None => (manual.clone(), algo.clone()),
    };
    let voxel = voxel_metrics_with(&manual_in, &algo_in, spacing, &config.zero_policy)?;

    let (manual_lm, algo_lm) = match (region, config.region_cluster_mode) {
        (Some(r), RegionClusterMode::AssignByMajority) => (
            majority_inside(&label_mask(manual, config.connectivity), r)?,
            majority_inside(&label_mask(algo, config.connectivity), r)?,
        ),
        _ => (
            label_mask(&manual_in, config.connectivity),
            label_mask(&algo_in, config.connectivity),
        ),
    };
    let cluster = cluster_metrics_with(&manual_lm, &algo_lm, config.dsc_num_mode, &config.zero_policy)?;
    Ok(RegionMetrics { voxel, cluster })
}

fn majority_inside(labels: &LabelMap, region: &Mask) -> Result<LabelMap> {
    if labels.dims() != region.dims() {
        return Err(Error::ShapeMismatch {
            left: labels.dims(),
            right: region.dims(),
        });
    }
    let sizes = labels.sizes();
    let mut inside = vec![0u64; sizes.len()];
    for (&l, &r) in labels.labels().iter().zip(region.as_slice()) {
        if l > 0 && r != 0 {
            inside[(l - 1) as usize] += 1;
        }
    }
    Ok(labels.retain(|l| 2 * inside[(l - 1) as usize] >= sizes[(l - 1) as usize]))
}

/// Sample Pearson correlation. `None` when fewer than two pairs or either
/// side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 2 {
        return Ok(None);
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// One CSV row: a subject's metrics in one region for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub subject_id: String,
    pub dataset_id: String,
    pub algorithm: String,
    pub training_set: String,
    pub region: Region,
    pub dsc_vox: Option<f64>,
    pub sen_vox: Option<f64>,
    pub ppv_vox: Option<f64>,
    pub dsc_num: Option<f64>,
    pub sen_num: Option<f64>,
    pub ppv_num: Option<f64>,
    pub vol_manual: f64,
    pub vol_algo: f64,
    pub vol_overlap: f64,
    pub n_manual: u64,
    pub n_algo: u64,
    pub n_tp_algo: u64,
    pub n_hit_manual: u64,
}

/// The six overlap measures, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    DscVox,
    DscNum,
    SenVox,
    SenNum,
    PpvVox,
    PpvNum,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::DscVox,
        Measure::DscNum,
        Measure::SenVox,
        Measure::SenNum,
        Measure::PpvVox,
        Measure::PpvNum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::DscVox => "dsc_vox",
            Measure::DscNum => "dsc_num",
            Measure::SenVox => "sen_vox",
            Measure::SenNum => "sen_num",
            Measure::PpvVox => "ppv_vox",
            Measure::PpvNum => "ppv_num",
        }
    }
}

impl MetricsRecord {
    pub fn new(
        subject_id: impl Into<String>,
        dataset_id: impl Into<String>,
        algorithm: impl Into<String>,
        training_set: impl Into<String>,
        region: Region,
        m: &RegionMetrics,
    ) -> Self {
        MetricsRecord {
            subject_id: subject_id.into(),
            dataset_id: dataset_id.into(),
            algorithm: algorithm.into(),
            training_set: training_set.into(),
            region,
            dsc_vox: m.voxel.dsc,
            sen_vox: m.voxel.sen,
            ppv_vox: m.voxel.ppv,
            dsc_num: m.cluster.dsc,
            sen_num: m.cluster.sen,
            ppv_num: m.cluster.ppv,
            vol_manual: m.voxel.vol_manual,
            vol_algo: m.voxel.vol_algo,
            vol_overlap: m.voxel.vol_overlap,
            n_manual: m.cluster.n_manual,
            n_algo: m.cluster.n_algo,
            n_tp_algo: m.cluster.n_tp_algo,
            n_hit_manual: m.cluster.n_hit_manual,
        }
    }

    pub fn measure(&self, measure: Measure) -> Option<f64> {
        match measure {
            Measure::DscVox => self.dsc_vox,
            Measure::DscNum => self.dsc_num,
            Measure::SenVox => self.sen_vox,
            Measure::SenNum => self.sen_num,
            Measure::PpvVox => self.ppv_vox,
            Measure::PpvNum => self.ppv_num,
        }
    }
}
