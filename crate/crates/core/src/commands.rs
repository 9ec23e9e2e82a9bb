//! The work behind each command-line subcommand, callable from code.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{provenance_header, RunConfig, TOOL_NAME, VERSION};
use crate::error::{Error, Result, ResultExt};
use crate::manifest::{load_manifest, read_manifest, save_manifest, subject_keys, SubjectRecord};
use crate::metrics::{region_metrics, MetricsRecord, Region};
use crate::nifti::{self, comment_extension, DataType, Endian, NiftiHeader, WriteOptions};
use crate::report;
use crate::schedules::{aggregate, assign_folds, FoldPlan, Schedule, SubjectKey, Summary};
use crate::synth::{self, derive_seed, generate_phantom, perturb_mask, HeadModel, Perturbation, PhantomSpec};
use crate::volume::{Dims, Mask, Spacing, Volume};
use crate::volume_ops::{self, resample_to_reference, Interpolation};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// At least one subject could not be evaluated.
    pub const PARTIAL: i32 = 1;
    /// Bad configuration, manifest or arguments.
    pub const CONFIG: i32 = 2;
}

/// Exit code for an error that stopped a command.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_setup() {
        return exit::CONFIG;
    }
    match err.root() {
        Error::Schema(_)
        | Error::DuplicateSubject { .. }
        | Error::MissingFile(_)
        | Error::Toml(_)
        | Error::InvalidArgument(_)
        | Error::InvalidSpacing(_)
        | Error::ConfigMismatch(..)
        | Error::UnknownDataset(_)
        | Error::TooFewSubjects { .. }
        | Error::OrphanRecord { .. } => exit::CONFIG,
        _ => exit::PARTIAL,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).context(|| format!("writing {}", path.display()))
}

fn thread_pool(config: &RunConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.resolved_threads()?)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

fn same_grid(a: &NiftiHeader, b: &NiftiHeader) -> bool {
    const TOL: f64 = 1e-4;
    a.dims == b.dims
        && a.orientation
            .iter()
            .flatten()
            .zip(b.orientation.iter().flatten())
            .all(|(x, y)| (x - y).abs() <= TOL)
}

/// Metrics for one manifest row in every region it has a mask for.
/// Returns the records and any warnings (e.g. about resampling).
pub fn evaluate_subject(record: &SubjectRecord, config: &RunConfig) -> Result<(Vec<MetricsRecord>, Vec<String>)> {
    let mut warnings = Vec::new();
    let (manual_header, manual) = nifti::read_nifti_mask(&record.manual)?;
    let (algo_header, mut algo) = nifti::read_nifti_mask(&record.prediction)?;
    if !same_grid(&manual_header, &algo_header) {
        if !config.allow_resample {
            return Err(Error::GridMismatch {
                manual: manual_header.dims,
                algo: algo_header.dims,
            });
        }
        let vol = Volume::from_mask(&algo, &algo_header)?;
        algo = resample_to_reference(&vol, &manual_header, Interpolation::Nearest)?.binarize();
        warnings.push(format!(
            "{}: prediction resampled from {:?} onto the manual grid {:?}",
            record.key(),
            algo_header.dims,
            manual_header.dims
        ));
    }
    let spacing = record.spacing.unwrap_or_else(|| manual_header.spacing());
    let metrics_config = config.metrics();
    let mut out = Vec::new();
    for region in record.regions() {
        let region_mask = match record.region_mask(region) {
            Some(path) => {
                let (h, m) = nifti::read_nifti_mask(path)?;
                if h.dims != manual_header.dims {
                    return Err(Error::ShapeMismatch {
                        left: manual_header.dims,
                        right: h.dims,
                    }
                    .context(format!("{} mask {}", region.code(), path.display())));
                }
                Some(m)
            }
            None => None,
        };
        let m = region_metrics(&manual, &algo, region_mask.as_ref(), spacing, &metrics_config)?;
        out.push(MetricsRecord::new(
            record.subject_id.clone(),
            record.dataset_id.clone(),
            record.algorithm.clone(),
            record.training_set.clone(),
            region,
            &m,
        ));
    }
    Ok((out, warnings))
}

#[derive(Debug)]
pub struct SubjectFailure {
    pub subject: SubjectKey,
    pub algorithm: String,
    pub error: Error,
}

impl fmt::Display for SubjectFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "subject {} ({}): {}", self.subject, self.algorithm, self.error)
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Fold plan to check records against.
    pub plan: Option<PathBuf>,
    /// Write results for the subjects that succeeded even if others failed.
    pub keep_going: bool,
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
    pub failures: Vec<SubjectFailure>,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

impl EvalOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            exit::OK
        } else {
            exit::PARTIAL
        }
    }
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_MD_FILE: &str = "summary.md";
pub const CORRELATIONS_FILE: &str = "correlations.csv";

/// Evaluate every manifest row and write metrics, summary and correlation
/// files to `out_dir`. Output is identical for any thread count.
pub fn run_eval(options: &EvalOptions, config: &RunConfig) -> Result<EvalOutcome> {
    config.validate().map_err(Error::setup)?;
    let subjects = load_manifest(&options.manifest).map_err(Error::setup)?;
    let plan = options.plan.as_deref().map(read_plan).transpose().map_err(Error::setup)?;
    let pool = thread_pool(config)?;
    let results: Vec<Result<(Vec<MetricsRecord>, Vec<String>)>> =
        pool.install(|| subjects.par_iter().map(|s| evaluate_subject(s, config)).collect());

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    for (subject, result) in subjects.iter().zip(results) {
        match result {
            Ok((r, w)) => {
                records.extend(r);
                warnings.extend(w);
            }
            Err(error) => failures.push(SubjectFailure {
                subject: subject.key(),
                algorithm: subject.algorithm.clone(),
                error,
            }),
        }
    }
    if !options.keep_going && !failures.is_empty() {
        let first = failures.swap_remove(0);
        let context = format!("subject {} ({})", first.subject, first.algorithm);
        return Err(first.error.context(context));
    }

    let summary = aggregate(&records, plan.as_ref(), &config.aggregate())?;
    let dir = &options.out_dir;
    let outputs = vec![
        dir.join(METRICS_FILE),
        dir.join(SUMMARY_FILE),
        dir.join(SUMMARY_MD_FILE),
        dir.join(CORRELATIONS_FILE),
    ];
    write_text(&outputs[0], &report::metrics_csv(&records, config)?)?;
    write_text(&outputs[1], &report::summary_csv(&summary, config)?)?;
    write_text(&outputs[2], &report::summary_markdown(&summary, config))?;
    write_text(&outputs[3], &report::correlations_csv(&summary.correlations, config)?)?;
    Ok(EvalOutcome {
        records,
        summary,
        failures,
        warnings,
        outputs,
    })
}

/// A fold plan as written to disk, with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlanFile {
    pub generator: String,
    pub config: serde_json::Value,
    pub plan: FoldPlan,
}

pub fn run_folds(manifest: &Path, schedule: &Schedule, config: &RunConfig) -> Result<FoldPlanFile> {
    config.validate().map_err(Error::setup)?;
    let records = read_manifest(manifest).map_err(Error::setup)?;
    let plan = assign_folds(&subject_keys(&records), schedule, config.seed, config.stratify)?;
    Ok(FoldPlanFile {
        generator: format!("{TOOL_NAME} {VERSION}"),
        config: serde_json::from_str(&config.provenance_json())?,
        plan,
    })
}

pub fn write_plan(file: &FoldPlanFile, path: &Path) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(file)? + "\n"))
}

/// Read a plan written by [`write_plan`] (a bare plan object also works).
pub fn read_plan(path: &Path) -> Result<FoldPlan> {
    let text = fs::read_to_string(path).context(|| format!("reading plan {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let plan = match value.get("plan") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    /// Resample to the target spacing, then z-score.
    Nnunet,
    /// Reorient, resample to 1 mm, crop around the brain, clamp at P99.
    Shiva,
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nnunet" => Ok(Pipeline::Nnunet),
            "shiva" => Ok(Pipeline::Shiva),
            _ => Err(Error::InvalidArgument(format!("unknown pipeline '{s}'; expected nnunet or shiva"))),
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pipeline::Nnunet => "nnunet",
            Pipeline::Shiva => "shiva",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepOutcome {
    pub output: PathBuf,
    pub transform: Option<PathBuf>,
    pub volume: Volume,
}

/// `scan.nii.gz` → `scan.transform.json`
pub fn transform_path(output: &Path) -> PathBuf {
    let name = output.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name
        .strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
        .unwrap_or(&name);
    output.with_file_name(format!("{stem}.transform.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformFile {
    pub generator: String,
    pub config: serde_json::Value,
    pub source: PathBuf,
    pub transform: volume_ops::ShivaTransform,
}

pub fn preprocess(vol: &Volume, pipeline: Pipeline, config: &RunConfig) -> Result<(Volume, Option<volume_ops::ShivaTransform>)> {
    match pipeline {
        Pipeline::Nnunet => Ok((volume_ops::nnunet_preprocess(vol, config.target_spacing)?, None)),
        Pipeline::Shiva => {
            let (v, t) = volume_ops::shiva_preprocess(vol, config.clamp_scaling)?;
            Ok((v, Some(t)))
        }
    }
}

/// Preprocess one image. The output is float32 and carries the provenance
/// header as a NIfTI comment extension; the SHIVA-style pipeline also
/// writes `<output>.transform.json`.
pub fn run_prep(input: &Path, output: &Path, pipeline: Pipeline, config: &RunConfig) -> Result<PrepOutcome> {
    config.validate().map_err(Error::setup)?;
    let context = || format!("preprocessing {}", input.display());
    let vol = nifti::read_nifti(input).context(context)?;
    let (mut out, transform) = preprocess(&vol, pipeline, config).context(context)?;
    let header = out.header_mut();
    header.datatype = DataType::F32;
    header.endian = Endian::Little;
    header.descrip = format!("{TOOL_NAME} {VERSION} prep {pipeline}");
    header.extension = comment_extension(&provenance_header(&format!("prep-{pipeline}/1"), config), Endian::Little);
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).context(|| format!("creating {}", dir.display()))?;
    }
    nifti::write_nifti_with(
        &out,
        output,
        DataType::F32,
        WriteOptions {
            endian: Endian::Little,
            gzip: None,
        },
    )?;
    let transform_out = match transform {
        Some(t) => {
            let path = transform_path(output);
            let file = TransformFile {
                generator: format!("{TOOL_NAME} {VERSION}"),
                config: serde_json::from_str(&config.provenance_json())?,
                source: input.to_path_buf(),
                transform: t,
            };
            write_text(&path, &(serde_json::to_string_pretty(&file)? + "\n"))?;
            Some(path)
        }
        None => None,
    };
    Ok(PrepOutcome {
        output: output.to_path_buf(),
        transform: transform_out,
        volume: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub config: RunConfig,
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
    pub outputs: Vec<PathBuf>,
}

pub const COMPARISON_FILE: &str = "comparison.md";
pub const PLOT_FILE: &str = "plot_long.csv";

/// Merge metrics files from `eval` runs and write a cross-algorithm
/// comparison, the merged summary and long-format plot data.
pub fn run_report(inputs: &[PathBuf], out_dir: &Path) -> Result<ReportOutcome> {
    let (config, records) = report::merge_metrics_files(inputs).map_err(Error::setup)?;
    let summary = aggregate(&records, None, &config.aggregate())?;
    let outputs = vec![
        out_dir.join(COMPARISON_FILE),
        out_dir.join(SUMMARY_FILE),
        out_dir.join(PLOT_FILE),
    ];
    write_text(&outputs[0], &report::comparison_markdown(&summary, &config))?;
    write_text(&outputs[1], &report::summary_csv(&summary, &config)?)?;
    write_text(&outputs[2], &report::plot_long_csv(&records, &config)?)?;
    Ok(ReportOutcome {
        config,
        records,
        summary,
        outputs,
    })
}

/// One predicted-mask variant in a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPrediction {
    pub algorithm: String,
    /// `None` copies the truth.
    pub perturbation: Option<Perturbation>,
}

impl FromStr for SynthPrediction {
    type Err = Error;

    /// `identity`, a perturbation (`drop:0.5`, `erode`, `add:3`), either
    /// optionally prefixed by `name=`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, spec) = match s.split_once('=') {
            Some((n, p)) => (Some(n.to_string()), p),
            None => (None, s),
        };
        let perturbation = if spec == "identity" { None } else { Some(spec.parse()?) };
        Ok(SynthPrediction {
            algorithm: name.unwrap_or_else(|| spec.to_string()),
            perturbation,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    pub out_dir: PathBuf,
    /// (dataset ID, subject count)
    pub sites: Vec<(String, usize)>,
    pub dims: Dims,
    pub spacing: Spacing,
    /// Inclusive range of tube counts per subject.
    pub tubes: (usize, usize),
    pub predictions: Vec<SynthPrediction>,
    pub training_set: String,
    /// Also write WM/BG-style region masks.
    pub regions: bool,
    /// Also write the intensity image (with a head model and noise).
    pub images: bool,
    pub gzip: bool,
    pub seed: u64,
}

/// Site sizes of the six-site, 40-subject cohort used throughout the docs.
pub fn default_sites() -> Vec<(String, usize)> {
    [("ADNI", 10), ("AF", 10), ("ASC", 4), ("HBA", 5), ("FTD", 4), ("MCIS", 7)]
        .iter()
        .map(|&(s, n)| (s.to_string(), n))
        .collect()
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            out_dir: PathBuf::from("cohort"),
            sites: default_sites(),
            dims: [48, 48, 48],
            spacing: Spacing::default(),
            tubes: (8, 20),
            predictions: vec![SynthPrediction {
                algorithm: "identity".into(),
                perturbation: None,
            }],
            training_set: "synthetic".into(),
            regions: true,
            images: false,
            gzip: false,
            seed: 0,
        }
    }
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect()
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Write a synthetic cohort (truth masks, perturbed predictions, optional
/// region masks and images) plus `manifest.csv`, and return the manifest
/// rows with absolute paths.
pub fn run_synth(options: &SynthOptions, config: &RunConfig) -> Result<Vec<SubjectRecord>> {
    if options.tubes.0 > options.tubes.1 {
        return Err(Error::InvalidArgument(format!(
            "tube range {}..{} is empty",
            options.tubes.0, options.tubes.1
        )));
    }
    if options.predictions.is_empty() {
        return Err(Error::InvalidArgument("at least one prediction variant is required".into()));
    }
    let ext = if options.gzip { "nii.gz" } else { "nii" };
    let out_dir = &options.out_dir;
    fs::create_dir_all(out_dir).context(|| format!("creating {}", out_dir.display()))?;
    let subjects: Vec<(usize, String, String)> = options
        .sites
        .iter()
        .flat_map(|(site, n)| (0..*n).map(move |i| (site.clone(), format!("{site}-{:03}", i + 1))))
        .enumerate()
        .map(|(i, (site, subject))| (i, site, subject))
        .collect();
    let regions = options.regions.then(|| synth::region_masks(options.dims));

    let pool = thread_pool(config)?;
    let rows: Vec<Result<Vec<SubjectRecord>>> = pool.install(|| {
        subjects
            .par_iter()
            .map(|(i, site, subject)| {
                let seed = derive_seed(options.seed, *i as u64);
                let span = (options.tubes.1 - options.tubes.0 + 1) as u64;
                let spec = PhantomSpec {
                    dims: options.dims,
                    spacing: options.spacing,
                    n_tubes: options.tubes.0 + (seed % span) as usize,
                    noise_sd: if options.images { 20.0 } else { 0.0 },
                    head: options.images.then(HeadModel::default),
                    seed,
                    ..PhantomSpec::default()
                };
                let phantom = generate_phantom(&spec).context(|| format!("subject {site}/{subject}"))?;
                let header = phantom.image.header().clone();
                let rel = |kind: &str| PathBuf::from(site).join(format!("{subject}_{kind}.{ext}"));
                let write_mask = |mask: &Mask, rel: &Path| nifti::write_mask(mask, &header, out_dir.join(rel));
                fs::create_dir_all(out_dir.join(site)).context(|| format!("creating {}", out_dir.join(site).display()))?;
                let manual = rel("manual");
                write_mask(&phantom.truth, &manual)?;
                if options.images {
                    nifti::write_nifti(&phantom.image, out_dir.join(rel("t1")), DataType::F32)?;
                }
                let (wm, bg) = match &regions {
                    Some((wm_mask, bg_mask)) => {
                        let (wm, bg) = (rel("wm"), rel("bg"));
                        write_mask(wm_mask, &wm)?;
                        write_mask(bg_mask, &bg)?;
                        (Some(wm), Some(bg))
                    }
                    None => (None, None),
                };
                let mut rows = Vec::new();
                for (k, p) in options.predictions.iter().enumerate() {
                    let pred = match p.perturbation {
                        Some(perturbation) => perturb_mask(&phantom.truth, perturbation, derive_seed(seed, k as u64))?,
                        None => phantom.truth.clone(),
                    };
                    let path = rel(&format!("pred-{}", slug(&p.algorithm)));
                    write_mask(&pred, &path)?;
                    rows.push(SubjectRecord {
                        subject_id: subject.clone(),
                        dataset_id: site.clone(),
                        manual: manual.clone(),
                        prediction: path,
                        wm_mask: wm.clone(),
                        bg_mask: bg.clone(),
                        algorithm: p.algorithm.clone(),
                        training_set: options.training_set.clone(),
                        spacing: None,
                    });
                }
                Ok(rows)
            })
            .collect()
    });
    let mut records = Vec::new();
    for r in rows {
        records.extend(r?);
    }
    // one row per (algorithm, subject), grouped by algorithm
    let mut by_algo: BTreeMap<usize, Vec<SubjectRecord>> = BTreeMap::new();
    for r in records {
        let k = options.predictions.iter().position(|p| p.algorithm == r.algorithm).unwrap_or(0);
        by_algo.entry(k).or_default().push(r);
    }
    let records: Vec<SubjectRecord> = by_algo.into_values().flatten().collect();
    let manifest = out_dir.join(MANIFEST_FILE);
    save_manifest(&records, &manifest)?;
    write_text(&out_dir.join("cohort.json"), &(serde_json::to_string_pretty(options)? + "\n"))?;
    read_manifest(&manifest)
}

/// Regions reported for a cohort made by [`run_synth`].
pub fn synth_regions(options: &SynthOptions) -> Vec<Region> {
    if options.regions {
        vec![Region::WhiteMatter, Region::BasalGanglia, Region::Whole]
    } else {
        vec![Region::Whole]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path, predictions: &[&str]) -> SynthOptions {
        SynthOptions {
            out_dir: dir.to_path_buf(),
            sites: vec![("A".into(), 7), ("B".into(), 3)],
            dims: [24, 24, 24],
            tubes: (3, 6),
            predictions: predictions.iter().map(|p| p.parse().unwrap()).collect(),
            ..SynthOptions::default()
        }
    }

    fn single_thread() -> RunConfig {
        RunConfig {
            threads: Some(1),
            ..RunConfig::default()
        }
    }

    #[test]
    fn identity_cohort_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let options = small(dir.path(), &["identity"]);
        let records = run_synth(&options, &single_thread()).unwrap();
        assert_eq!(records.len(), 10);
        let out = run_eval(
            &EvalOptions {
                manifest: dir.path().join(MANIFEST_FILE),
                out_dir: dir.path().join("out"),
                plan: None,
                keep_going: false,
            },
            &single_thread(),
        )
        .unwrap();
        assert_eq!(out.exit_code(), exit::OK);
        assert_eq!(out.records.len(), 30);
        for r in &out.records {
            if r.region == Region::Whole {
                for m in crate::metrics::Measure::ALL {
                    assert_eq!(r.measure(m), Some(1.0), "{m:?} {r:?}");
                }
            }
        }
        let whole_a: Vec<_> = out
            .summary
            .correlations
            .iter()
            .filter(|c| c.region == Region::Whole)
            .collect();
        assert_eq!(whole_a.len(), 1);
        assert!((whole_a[0].r_vox.unwrap() - 1.0).abs() < 1e-12);
        assert!(out.outputs.iter().all(|p| p.is_file()));
    }

    #[test]
    fn missing_prediction_names_subject() {
        let dir = tempfile::tempdir().unwrap();
        let records = run_synth(&small(dir.path(), &["identity"]), &single_thread()).unwrap();
        fs::remove_file(&records[3].prediction).unwrap();
        let err = run_eval(
            &EvalOptions {
                manifest: dir.path().join(MANIFEST_FILE),
                out_dir: dir.path().join("out"),
                plan: None,
                keep_going: false,
            },
            &single_thread(),
        )
        .unwrap_err();
        assert_eq!(exit_code(&err), exit::CONFIG);
        assert!(err.to_string().contains(&records[3].subject_id), "{err}");
    }

    #[test]
    fn keep_going_reports_partial_failure() {
        let dir = tempfile::tempdir().unwrap();
        let records = run_synth(&small(dir.path(), &["identity"]), &single_thread()).unwrap();
        // corrupt one prediction after the manifest check would pass
        fs::write(&records[2].prediction, b"not a nifti").unwrap();
        let options = EvalOptions {
            manifest: dir.path().join(MANIFEST_FILE),
            out_dir: dir.path().join("out"),
            plan: None,
            keep_going: true,
        };
        let out = run_eval(&options, &single_thread()).unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.exit_code(), exit::PARTIAL);
        assert_eq!(out.records.len(), 27);
        let strict = EvalOptions {
            keep_going: false,
            ..options
        };
        let err = run_eval(&strict, &single_thread()).unwrap_err();
        assert_eq!(exit_code(&err), exit::PARTIAL);
        assert!(err.to_string().contains(&records[2].subject_id));
    }

    #[test]
    fn grid_mismatch_and_resample() {
        let dir = tempfile::tempdir().unwrap();
        let records = run_synth(&small(dir.path(), &["identity"]), &single_thread()).unwrap();
        // replace one prediction with the same mask on a 2x finer grid
        let (h, m) = nifti::read_nifti_mask(&records[0].prediction).unwrap();
        let vol = Volume::from_mask(&m, &h).unwrap();
        let fine = volume_ops::resample(&vol, Spacing::isotropic(0.4).unwrap(), Interpolation::Nearest).unwrap();
        nifti::write_mask(&fine.binarize(), fine.header(), &records[0].prediction).unwrap();
        let options = EvalOptions {
            manifest: dir.path().join(MANIFEST_FILE),
            out_dir: dir.path().join("out"),
            plan: None,
            keep_going: false,
        };
        let err = run_eval(&options, &single_thread()).unwrap_err();
        assert!(matches!(err.root(), Error::GridMismatch { .. }), "{err}");
        let config = RunConfig {
            allow_resample: true,
            ..single_thread()
        };
        let out = run_eval(&options, &config).unwrap();
        assert_eq!(out.warnings.len(), 1);
        let first = out.records.iter().find(|r| r.region == Region::Whole).unwrap();
        assert_eq!(first.dsc_vox, Some(1.0));
    }

    #[test]
    fn folds_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        run_synth(&small(dir.path(), &["identity"]), &single_thread()).unwrap();
        let file = run_folds(&dir.path().join(MANIFEST_FILE), &Schedule::Loso, &RunConfig::default()).unwrap();
        assert_eq!(file.plan.folds.len(), 2);
        let path = dir.path().join("plan.json");
        write_plan(&file, &path).unwrap();
        assert_eq!(read_plan(&path).unwrap(), file.plan);
    }

    #[test]
    fn transform_path_naming() {
        assert_eq!(transform_path(Path::new("/x/a.nii.gz")), PathBuf::from("/x/a.transform.json"));
        assert_eq!(transform_path(Path::new("b.nii")), PathBuf::from("b.transform.json"));
    }

    #[test]
    fn prediction_spec_parsing() {
        let p: SynthPrediction = "weak=drop:0.5".parse().unwrap();
        assert_eq!(p.algorithm, "weak");
        assert_eq!(p.perturbation, Some(Perturbation::DropClusters(0.5)));
        let p: SynthPrediction = "identity".parse().unwrap();
        assert_eq!(p.perturbation, None);
        assert!("x=bogus".parse::<SynthPrediction>().is_err());
    }
}
