//! Training/evaluation schedules and aggregation of per-subject metrics into
//! summary rows.
//!
//! Three schedules are supported: five-fold cross-validation (stratified by
//! dataset unless disabled), leave-one-site-out, and single-site training
//! with evaluation on every other site.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{pearson, Measure, MetricsRecord, Region};

pub const N_FOLDS: usize = 5;
/// Smallest dataset that can be split into five folds.
pub const MIN_SUBJECTS_PER_SITE: usize = 5;
pub const ALL_SITES: &str = "All sites";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubjectKey {
    pub dataset_id: String,
    pub subject_id: String,
}

impl SubjectKey {
    pub fn new(dataset_id: impl Into<String>, subject_id: impl Into<String>) -> Self {
        SubjectKey {
            dataset_id: dataset_id.into(),
            subject_id: subject_id.into(),
        }
    }
}

impl fmt::Display for SubjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.dataset_id, self.subject_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    FiveFoldCv,
    Loso,
    SingleSite(String),
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::FiveFoldCv => write!(f, "5fcv"),
            Schedule::Loso => write!(f, "loso"),
            Schedule::SingleSite(d) => write!(f, "single:{d}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `5fcv`, `loso` or `single:<dataset>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "5fcv" | "five-fold" => return Ok(Schedule::FiveFoldCv),
            "loso" | "losocv" => return Ok(Schedule::Loso),
            _ => {}
        }
        match s.split_once(':') {
            Some((kind, d)) if (kind == "single" || kind == "single-site") && !d.is_empty() => {
                Ok(Schedule::SingleSite(d.to_string()))
            }
            _ => Err(Error::InvalidArgument(format!(
                "unknown schedule '{s}'; expected 5fcv, loso or single:<dataset>"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<SubjectKey>,
    pub eval: Vec<SubjectKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub schedule: Schedule,
    pub seed: u64,
    pub stratified: bool,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    pub fn eval_subjects(&self) -> BTreeSet<&SubjectKey> {
        self.folds.iter().flat_map(|f| f.eval.iter()).collect()
    }

    /// Which fold evaluates each subject (the first, if several do).
    pub fn eval_fold_of(&self) -> BTreeMap<&SubjectKey, usize> {
        let mut map = BTreeMap::new();
        for (i, fold) in self.folds.iter().enumerate() {
            for key in &fold.eval {
                map.entry(key).or_insert(i);
            }
        }
        map
    }
}

fn by_dataset(subjects: &BTreeSet<SubjectKey>) -> BTreeMap<&str, Vec<&SubjectKey>> {
    let mut map: BTreeMap<&str, Vec<&SubjectKey>> = BTreeMap::new();
    for s in subjects {
        map.entry(s.dataset_id.as_str()).or_default().push(s);
    }
    map
}

fn complement(all: &BTreeSet<SubjectKey>, eval: &BTreeSet<SubjectKey>) -> Vec<SubjectKey> {
    all.difference(eval).cloned().collect()
}

/// Assign subjects to folds. Duplicate keys are collapsed; the result only
/// depends on the set of subjects, the schedule and the seed.
pub fn assign_folds(subjects: &[SubjectKey], schedule: &Schedule, seed: u64, stratify: bool) -> Result<FoldPlan> {
    let all: BTreeSet<SubjectKey> = subjects.iter().cloned().collect();
    let sites = by_dataset(&all);
    let folds = match schedule {
        Schedule::FiveFoldCv => {
            if all.len() < N_FOLDS {
                return Err(Error::TooFewSubjects {
                    dataset: ALL_SITES.to_string(),
                    found: all.len(),
                    required: N_FOLDS,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let order: Vec<&SubjectKey> = if stratify {
                // shuffle within each site, then deal the sites one after the other
                sites
                    .values()
                    .flat_map(|members| {
                        let mut m = members.clone();
                        m.shuffle(&mut rng);
                        m
                    })
                    .collect()
            } else {
                let mut m: Vec<&SubjectKey> = all.iter().collect();
                m.shuffle(&mut rng);
                m
            };
            let mut evals = vec![BTreeSet::new(); N_FOLDS];
            for (i, key) in order.into_iter().enumerate() {
                evals[i % N_FOLDS].insert(key.clone());
            }
            evals
                .into_iter()
                .enumerate()
                .map(|(i, eval)| Fold {
                    name: format!("fold {}", i + 1),
                    train: complement(&all, &eval),
                    eval: eval.into_iter().collect(),
                })
                .collect()
        }
        Schedule::Loso => {
            if sites.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "leave-one-site-out needs at least 2 datasets, found {}",
                    sites.len()
                )));
            }
            sites
                .iter()
                .map(|(site, members)| {
                    let eval: BTreeSet<SubjectKey> = members.iter().map(|&k| k.clone()).collect();
                    Fold {
                        name: format!("all except {site}"),
                        train: complement(&all, &eval),
                        eval: eval.into_iter().collect(),
                    }
                })
                .collect()
        }
        Schedule::SingleSite(site) => {
            let members = sites
                .get(site.as_str())
                .ok_or_else(|| Error::UnknownDataset(site.clone()))?;
            if members.len() < MIN_SUBJECTS_PER_SITE {
                return Err(Error::TooFewSubjects {
                    dataset: site.clone(),
                    found: members.len(),
                    required: MIN_SUBJECTS_PER_SITE,
                });
            }
            let train: BTreeSet<SubjectKey> = members.iter().map(|&k| k.clone()).collect();
            vec![Fold {
                name: site.clone(),
                eval: complement(&all, &train),
                train: train.into_iter().collect(),
            }]
        }
    };
    Ok(FoldPlan {
        schedule: schedule.clone(),
        seed,
        stratified: stratify && *schedule == Schedule::FiveFoldCv,
        folds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdConvention {
    /// n − 1 denominator
    #[default]
    Sample,
    /// n denominator
    Population,
}

impl FromStr for SdConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(SdConvention::Sample),
            "population" => Ok(SdConvention::Population),
            _ => Err(Error::InvalidArgument(format!(
                "unknown SD convention '{s}'; expected sample or population"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub min_n_for_corr: usize,
    pub sd: SdConvention,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            min_n_for_corr: 7,
            sd: SdConvention::Sample,
        }
    }
}

/// Mean and spread of one measure. `sd` is `None` when it is undefined
/// (no values, or a single value under the sample convention).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64], convention: SdConvention) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = match convention {
            SdConvention::Sample if n < 2 => None,
            SdConvention::Sample => Some((ss / (n - 1) as f64).sqrt()),
            SdConvention::Population => Some((ss / n as f64).sqrt()),
        };
        Stat { mean: Some(mean), sd, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub training_set: String,
    pub region: Region,
    /// A dataset ID or [`ALL_SITES`].
    pub eval_dataset: String,
    pub n_subjects: usize,
    /// Null measure values left out of the means, summed over measures.
    pub n_excluded_null: usize,
    /// Indexed like [`Measure::ALL`].
    pub measures: [Stat; 6],
    pub r_vox: Stat,
    pub r_num: Stat,
}

impl SummaryRow {
    pub fn stat(&self, measure: Measure) -> &Stat {
        &self.measures[Measure::ALL.iter().position(|&m| m == measure).expect("listed")]
    }
}

/// Pearson correlations between manual and algorithm totals within one
/// dataset. Only produced for datasets with at least `min_n_for_corr`
/// subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub algorithm: String,
    pub training_set: String,
    pub region: Region,
    pub dataset_id: String,
    pub n: usize,
    /// Manual vs. algorithm segmented volume.
    pub r_vox: Option<f64>,
    /// Manual vs. algorithm cluster count.
    pub r_num: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub correlations: Vec<CorrelationRecord>,
}

type GroupKey = (String, String, Region);

fn summarize(
    group: &GroupKey,
    eval_dataset: &str,
    records: &[&MetricsRecord],
    correlations: &[&CorrelationRecord],
    config: &AggregateConfig,
) -> SummaryRow {
    let mut n_excluded_null = 0;
    let measures = Measure::ALL.map(|m| {
        let values: Vec<f64> = records.iter().filter_map(|r| r.measure(m)).collect();
        n_excluded_null += records.len() - values.len();
        Stat::of(&values, config.sd)
    });
    let r_vox: Vec<f64> = correlations.iter().filter_map(|c| c.r_vox).collect();
    let r_num: Vec<f64> = correlations.iter().filter_map(|c| c.r_num).collect();
    SummaryRow {
        algorithm: group.0.clone(),
        training_set: group.1.clone(),
        region: group.2,
        eval_dataset: eval_dataset.to_string(),
        n_subjects: records.len(),
        n_excluded_null,
        measures,
        r_vox: Stat::of(&r_vox, config.sd),
        r_num: Stat::of(&r_num, config.sd),
    }
}

/// Summarize records per (algorithm, training set, region, evaluation
/// dataset), plus one "All sites" row per group pooling every subject.
/// Correlations are computed within each dataset that has at least
/// `min_n_for_corr` subjects and averaged across those datasets.
///
/// With a plan, every record must belong to one of its evaluation sets.
pub fn aggregate(records: &[MetricsRecord], plan: Option<&FoldPlan>, config: &AggregateConfig) -> Result<Summary> {
    if let Some(plan) = plan {
        let eval = plan.eval_subjects();
        for r in records {
            let key = SubjectKey::new(r.dataset_id.clone(), r.subject_id.clone());
            if !eval.contains(&key) {
                return Err(Error::OrphanRecord {
                    subject: r.subject_id.clone(),
                    dataset: r.dataset_id.clone(),
                });
            }
        }
    }

    let mut groups: BTreeMap<GroupKey, BTreeMap<&str, Vec<&MetricsRecord>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.algorithm.clone(), r.training_set.clone(), r.region))
            .or_default()
            .entry(r.dataset_id.as_str())
            .or_default()
            .push(r);
    }

    let mut summary = Summary::default();
    for (key, datasets) in &groups {
        let mut group_corr = Vec::new();
        for (&dataset, members) in datasets {
            if members.len() < config.min_n_for_corr {
                continue;
            }
            let column = |f: fn(&MetricsRecord) -> f64| members.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let r_vox = pearson(&column(|r| r.vol_manual), &column(|r| r.vol_algo))?;
            let r_num = pearson(&column(|r| r.n_manual as f64), &column(|r| r.n_algo as f64))?;
            group_corr.push(CorrelationRecord {
                algorithm: key.0.clone(),
                training_set: key.1.clone(),
                region: key.2,
                dataset_id: dataset.to_string(),
                n: members.len(),
                r_vox,
                r_num,
            });
        }
        for (&dataset, members) in datasets {
            let corr: Vec<&CorrelationRecord> = group_corr.iter().filter(|c| c.dataset_id == dataset).collect();
            summary.rows.push(summarize(key, dataset, members, &corr, config));
        }
        let pooled: Vec<&MetricsRecord> = datasets.values().flatten().copied().collect();
        let all_corr: Vec<&CorrelationRecord> = group_corr.iter().collect();
        summary.rows.push(summarize(key, ALL_SITES, &pooled, &all_corr, config));
        summary.correlations.extend(group_corr);
    }
    Ok(summary)
}
