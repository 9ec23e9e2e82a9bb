//! Text outputs: per-subject metrics CSV, summary CSV and Markdown tables,
//! correlation CSV, cross-algorithm comparison and long-format plot data.
//!
//! Every file starts with the provenance header from [`crate::config`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{parse_provenance, provenance_header, RunConfig};
use crate::error::{Error, Result, ResultExt};
use crate::metrics::{Measure, MetricsRecord, Region};
use crate::schedules::{CorrelationRecord, Stat, Summary, SummaryRow, ALL_SITES};

pub const METRICS_SCHEMA: &str = "metrics/1";
pub const SUMMARY_SCHEMA: &str = "summary/1";
pub const CORRELATIONS_SCHEMA: &str = "correlations/1";
pub const COMPARISON_SCHEMA: &str = "comparison/1";
pub const PLOT_SCHEMA: &str = "plot-long/1";

/// Column titles in table order: six overlap measures then two correlations.
pub const TABLE_COLUMNS: [&str; 8] = [
    "Dice voxel",
    "Dice number",
    "Sensitivity voxel",
    "Sensitivity number",
    "Precision voxel",
    "Precision number",
    "Correlation voxel",
    "Correlation number",
];

fn csv_to_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    write(&mut writer)?;
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(records: &[MetricsRecord], config: &RunConfig) -> Result<String> {
    let body = csv_to_string(|w| {
        for r in records {
            w.serialize(r)?;
        }
        if records.is_empty() {
            w.write_record(METRICS_COLUMNS)?;
        }
        Ok(())
    })?;
    Ok(provenance_header(METRICS_SCHEMA, config) + &body)
}

const METRICS_COLUMNS: [&str; 18] = [
    "subject_id",
    "dataset_id",
    "algorithm",
    "training_set",
    "region",
    "dsc_vox",
    "sen_vox",
    "ppv_vox",
    "dsc_num",
    "sen_num",
    "ppv_num",
    "vol_manual",
    "vol_algo",
    "vol_overlap",
    "n_manual",
    "n_algo",
    "n_tp_algo",
    "n_hit_manual",
];

/// Parsed metrics file: the config it was produced with and its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsFile {
    pub path: PathBuf,
    pub config_json: String,
    pub config: RunConfig,
    pub records: Vec<MetricsRecord>,
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<MetricsFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).context(|| format!("reading {}", path.display()))?;
    let inner = || -> Result<MetricsFile> {
        let prov = parse_provenance(&text)?;
        if prov.schema != METRICS_SCHEMA {
            return Err(Error::Schema(format!(
                "expected schema {METRICS_SCHEMA}, found {}",
                prov.schema
            )));
        }
        let config = RunConfig::from_provenance_json(&prov.config)?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let records = reader.deserialize().collect::<std::result::Result<Vec<MetricsRecord>, _>>()?;
        Ok(MetricsFile {
            path: path.to_path_buf(),
            config_json: prov.config,
            config,
            records,
        })
    };
    inner().context(|| format!("in {}", path.display()))
}

fn stat_fields(s: &Stat) -> [String; 2] {
    [opt(s.mean), opt(s.sd)]
}

pub fn summary_csv(summary: &Summary, config: &RunConfig) -> Result<String> {
    let body = csv_to_string(|w| {
        let mut header: Vec<String> = ["algorithm", "training_set", "region", "eval_dataset", "n_subjects", "n_excluded_null"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for m in Measure::ALL {
            header.push(format!("{}_mean", m.name()));
            header.push(format!("{}_sd", m.name()));
        }
        for r in ["r_vox", "r_num"] {
            header.extend([format!("{r}_mean"), format!("{r}_sd"), format!("{r}_n_datasets")]);
        }
        w.write_record(&header)?;
        for row in &summary.rows {
            let mut rec = vec![
                row.algorithm.clone(),
                row.training_set.clone(),
                row.region.code().to_string(),
                row.eval_dataset.clone(),
                row.n_subjects.to_string(),
                row.n_excluded_null.to_string(),
            ];
            for s in &row.measures {
                rec.extend(stat_fields(s));
            }
            for s in [&row.r_vox, &row.r_num] {
                rec.extend(stat_fields(s));
                rec.push(s.n.to_string());
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    Ok(provenance_header(SUMMARY_SCHEMA, config) + &body)
}

pub fn correlations_csv(correlations: &[CorrelationRecord], config: &RunConfig) -> Result<String> {
    let body = csv_to_string(|w| {
        w.write_record(["algorithm", "training_set", "region", "dataset_id", "n", "r_vox", "r_num"])?;
        for c in correlations {
            w.write_record([
                c.algorithm.clone(),
                c.training_set.clone(),
                c.region.code().to_string(),
                c.dataset_id.clone(),
                c.n.to_string(),
                opt(c.r_vox),
                opt(c.r_num),
            ])?;
        }
        Ok(())
    })?;
    Ok(provenance_header(CORRELATIONS_SCHEMA, config) + &body)
}

/// "0.47 (0.13)", "0.47" when the SD is undefined, "-" when empty.
pub fn format_stat(s: &Stat) -> String {
    match (s.mean, s.sd) {
        (Some(m), Some(sd)) => format!("{m:.2} ({sd:.2})"),
        (Some(m), None) => format!("{m:.2}"),
        _ => "-".to_string(),
    }
}

fn row_stats(row: &SummaryRow) -> [&Stat; 8] {
    let [a, b, c, d, e, f] = &row.measures;
    [a, b, c, d, e, f, &row.r_vox, &row.r_num]
}

fn markdown_comment(config: &RunConfig, schema: &str) -> String {
    provenance_header(schema, config)
        .lines()
        .map(|l| format!("<!-- {} -->\n", l.trim_start_matches("# ")))
        .collect()
}

fn table_header(out: &mut String) {
    out.push_str("| Region | Algorithm | Training Dataset | Evaluation Dataset | n |");
    for c in TABLE_COLUMNS {
        let _ = write!(out, " {c} |");
    }
    out.push_str("\n|---|---|---|---|---:|");
    for _ in TABLE_COLUMNS {
        out.push_str("---|");
    }
    out.push('\n');
}

fn table_row(out: &mut String, row: &SummaryRow, cells: &[String]) {
    let _ = write!(
        out,
        "| {} | {} | {} | {} | {} |",
        row.region.code(),
        row.algorithm,
        if row.training_set.is_empty() { "-" } else { &row.training_set },
        row.eval_dataset,
        row.n_subjects
    );
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out.push('\n');
}

/// Markdown table mirroring the usual results layout: one row per
/// (region, algorithm, training set, evaluation dataset), mean (SD) cells.
pub fn summary_markdown(summary: &Summary, config: &RunConfig) -> String {
    let mut out = markdown_comment(config, SUMMARY_SCHEMA);
    out.push('\n');
    table_header(&mut out);
    let mut rows: Vec<&SummaryRow> = summary.rows.iter().collect();
    rows.sort_by(|a, b| (a.region, &a.algorithm, &a.training_set).cmp(&(b.region, &b.algorithm, &b.training_set)));
    for row in rows {
        let cells: Vec<String> = row_stats(row).iter().map(|s| format_stat(s)).collect();
        table_row(&mut out, row, &cells);
    }
    out
}

/// Index of the single largest value, if it is unique at display precision
/// and there is more than one candidate.
fn unique_best(values: &[Option<f64>]) -> Option<usize> {
    if values.len() < 2 {
        return None;
    }
    let shown: Vec<Option<i64>> = values.iter().map(|v| v.map(|x| (x * 100.0).round() as i64)).collect();
    let best = shown.iter().flatten().max()?;
    let winners: Vec<usize> = shown
        .iter()
        .enumerate()
        .filter(|(_, v)| v.as_ref() == Some(best))
        .map(|(i, _)| i)
        .collect();
    (winners.len() == 1).then(|| winners[0])
}

/// Comparison across algorithms: within each (region, evaluation dataset)
/// block, the best mean in each column is bold when it is unique.
pub fn comparison_markdown(summary: &Summary, config: &RunConfig) -> String {
    let mut blocks: BTreeMap<(Region, bool, &str), Vec<&SummaryRow>> = BTreeMap::new();
    for row in &summary.rows {
        // per-dataset blocks first, pooled block last
        let pooled = row.eval_dataset == ALL_SITES;
        blocks.entry((row.region, pooled, row.eval_dataset.as_str())).or_default().push(row);
    }
    let mut out = markdown_comment(config, COMPARISON_SCHEMA);
    let mut current_region = None;
    for ((region, _, _), rows) in &blocks {
        if current_region != Some(*region) {
            let _ = write!(out, "\n## {}\n\n", region.title());
            table_header(&mut out);
            current_region = Some(*region);
        }
        let mut cells: Vec<Vec<String>> = rows
            .iter()
            .map(|r| row_stats(r).iter().map(|s| format_stat(s)).collect())
            .collect();
        for col in 0..TABLE_COLUMNS.len() {
            let means: Vec<Option<f64>> = rows.iter().map(|r| row_stats(r)[col].mean).collect();
            if let Some(best) = unique_best(&means) {
                cells[best][col] = format!("**{}**", cells[best][col]);
            }
        }
        for (row, c) in rows.iter().zip(&cells) {
            table_row(&mut out, row, c);
        }
    }
    out
}

/// One row per (subject, region, measure) for boxplots.
pub fn plot_long_csv(records: &[MetricsRecord], config: &RunConfig) -> Result<String> {
    let body = csv_to_string(|w| {
        w.write_record(["algorithm", "training_set", "region", "dataset_id", "subject_id", "measure", "value"])?;
        for r in records {
            for m in Measure::ALL {
                if let Some(v) = r.measure(m) {
                    w.write_record([
                        r.algorithm.as_str(),
                        r.training_set.as_str(),
                        r.region.code(),
                        r.dataset_id.as_str(),
                        r.subject_id.as_str(),
                        m.name(),
                        &v.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })?;
    Ok(provenance_header(PLOT_SCHEMA, config) + &body)
}

/// Load several metrics files that were produced with the same settings.
/// Returns the shared config and all records, in input order.
pub fn merge_metrics_files(paths: &[PathBuf]) -> Result<(RunConfig, Vec<MetricsRecord>)> {
    let Some(first_path) = paths.first() else {
        return Err(Error::InvalidArgument("no metrics files given".into()));
    };
    let first = read_metrics_csv(first_path)?;
    let mut records = first.records.clone();
    for path in &paths[1..] {
        let file = read_metrics_csv(path)?;
        if file.config_json != first.config_json {
            return Err(Error::ConfigMismatch(first_path.clone(), path.clone()));
        }
        records.extend(file.records);
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in &records {
        if !seen.insert((&r.algorithm, &r.training_set, &r.dataset_id, &r.subject_id, r.region)) {
            return Err(Error::DuplicateSubject {
                subject: r.subject_id.clone(),
                dataset: r.dataset_id.clone(),
                algorithm: r.algorithm.clone(),
            });
        }
    }
    Ok((first.config, records))
}
