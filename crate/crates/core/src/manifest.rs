//! Cohort manifests: which files belong to which subject and dataset.
//!
//! A manifest is a CSV file with a header row (lines starting with `#` are
//! ignored) or a JSON array of objects with the same field names:
//!
//! | column         | required | meaning                                      |
//! |----------------|----------|----------------------------------------------|
//! | `subject_id`   | yes      | subject identifier                           |
//! | `dataset_id`   | yes      | site or study the subject belongs to         |
//! | `manual`       | yes      | manual (reference) mask                      |
//! | `prediction`   | yes      | algorithm mask                               |
//! | `wm_mask`      | no       | white-matter region mask                     |
//! | `bg_mask`      | no       | basal-ganglia region mask                    |
//! | `algorithm`    | no       | algorithm label, default `algo`              |
//! | `training_set` | no       | what the algorithm was trained on            |
//! | `spacing`      | no       | voxel size override, `0.8` or `0.9x0.9x1.2`  |
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, MissingEntry, Result, ResultExt};
use crate::metrics::Region;
use crate::schedules::SubjectKey;
use crate::volume::Spacing;

pub const REQUIRED_COLUMNS: [&str; 4] = ["subject_id", "dataset_id", "manual", "prediction"];
pub const DEFAULT_ALGORITHM: &str = "algo";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub dataset_id: String,
    pub manual: PathBuf,
    pub prediction: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wm_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bg_mask: Option<PathBuf>,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default)]
    pub training_set: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

fn default_algorithm() -> String {
    DEFAULT_ALGORITHM.to_string()
}

impl SubjectRecord {
    pub fn key(&self) -> SubjectKey {
        SubjectKey::new(self.dataset_id.clone(), self.subject_id.clone())
    }

    pub fn region_mask(&self, region: Region) -> Option<&Path> {
        match region {
            Region::WhiteMatter => self.wm_mask.as_deref(),
            Region::BasalGanglia => self.bg_mask.as_deref(),
            Region::Whole => None,
        }
    }

    /// Regions this record can be evaluated in: always the whole volume,
    /// plus every region with a mask.
    pub fn regions(&self) -> Vec<Region> {
        let mut regions: Vec<Region> = [Region::WhiteMatter, Region::BasalGanglia]
            .into_iter()
            .filter(|&r| self.region_mask(r).is_some())
            .collect();
        regions.push(Region::Whole);
        regions
    }

    fn files(&self) -> Vec<(&'static str, &Path)> {
        let mut files = vec![("manual", self.manual.as_path()), ("prediction", self.prediction.as_path())];
        if let Some(p) = &self.wm_mask {
            files.push(("wm_mask", p));
        }
        if let Some(p) = &self.bg_mask {
            files.push(("bg_mask", p));
        }
        files
    }
}

/// One CSV row before validation. Every field is text so that empty cells
/// and missing optional columns can be told apart from bad values.
#[derive(Debug, Deserialize)]
struct RawRow {
    subject_id: Option<String>,
    dataset_id: Option<String>,
    manual: Option<String>,
    prediction: Option<String>,
    wm_mask: Option<String>,
    bg_mask: Option<String>,
    algorithm: Option<String>,
    training_set: Option<String>,
    #[serde(default, deserialize_with = "spacing_text")]
    spacing: Option<String>,
}

/// Spacing is text in CSV; JSON may also use a three-number array.
fn spacing_text<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Form {
        Text(String),
        Number(f64),
        Axes([f64; 3]),
    }
    Ok(Option::<Form>::deserialize(d)?.map(|f| match f {
        Form::Text(s) => s,
        Form::Number(v) => v.to_string(),
        Form::Axes([x, y, z]) => format!("{x}x{y}x{z}"),
    }))
}

fn non_empty(v: Option<String>) -> Option<String> {
    v.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

impl RawRow {
    fn into_record(self, line: usize, base: &Path) -> Result<SubjectRecord> {
        let required = |v: Option<String>, column: &str| {
            non_empty(v).ok_or_else(|| Error::Schema(format!("row {line}: empty {column}")))
        };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let spacing = non_empty(self.spacing)
            .map(|s| s.parse::<Spacing>())
            .transpose()
            .map_err(|e| Error::Schema(format!("row {line}: {e}")))?;
        Ok(SubjectRecord {
            subject_id: required(self.subject_id, "subject_id")?,
            dataset_id: required(self.dataset_id, "dataset_id")?,
            manual: resolve(required(self.manual, "manual")?),
            prediction: resolve(required(self.prediction, "prediction")?),
            wm_mask: non_empty(self.wm_mask).map(resolve),
            bg_mask: non_empty(self.bg_mask).map(resolve),
            algorithm: non_empty(self.algorithm).unwrap_or_else(default_algorithm),
            training_set: non_empty(self.training_set).unwrap_or_default(),
            spacing,
        })
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn base_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Parse and validate a manifest without touching the referenced files.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SubjectRecord>> {
    let path = path.as_ref();
    let base = base_dir(path);
    let text = fs::read_to_string(path).context(|| format!("reading manifest {}", path.display()))?;
    let rows: Vec<RawRow> = if is_json(path) {
        let values: Vec<serde_json::Value> = serde_json::from_str(&text)?;
        for (i, v) in values.iter().enumerate() {
            let obj = v
                .as_object()
                .ok_or_else(|| Error::Schema(format!("entry {} is not an object", i + 1)))?;
            if let Some(col) = REQUIRED_COLUMNS.iter().find(|c| !obj.contains_key(**c)) {
                return Err(Error::Schema(format!("entry {} has no '{col}' field", i + 1)));
            }
        }
        values
            .into_iter()
            .map(serde_json::from_value)
            .collect::<std::result::Result<_, _>>()?
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let missing: Vec<&str> = REQUIRED_COLUMNS
            .iter()
            .copied()
            .filter(|c| !headers.iter().any(|h| h == *c))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing column(s): {}", missing.join(", "))));
        }
        reader.deserialize().collect::<std::result::Result<_, _>>()?
    };

    let mut records = Vec::with_capacity(rows.len());
    let mut seen = BTreeSet::new();
    for (i, row) in rows.into_iter().enumerate() {
        let record = row.into_record(i + 1, &base)?;
        let key = (record.subject_id.clone(), record.dataset_id.clone(), record.algorithm.clone());
        if !seen.insert(key) {
            return Err(Error::DuplicateSubject {
                subject: record.subject_id,
                dataset: record.dataset_id,
                algorithm: record.algorithm,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Every referenced file that does not exist, in manifest order.
pub fn missing_files(records: &[SubjectRecord]) -> Vec<MissingEntry> {
    records
        .iter()
        .flat_map(|r| {
            r.files().into_iter().filter(|(_, p)| !p.is_file()).map(|(column, p)| MissingEntry {
                subject_id: r.subject_id.clone(),
                dataset_id: r.dataset_id.clone(),
                column: column.to_string(),
                path: p.to_path_buf(),
            })
        })
        .collect()
}

/// Parse, validate and check that every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<SubjectRecord>> {
    let records = read_manifest(path)?;
    let missing = missing_files(&records);
    if !missing.is_empty() {
        return Err(Error::MissingFile(missing));
    }
    Ok(records)
}

/// Write records as CSV, or JSON when the path ends in `.json`.
pub fn save_manifest(records: &[SubjectRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_json(path) {
        let text = serde_json::to_string_pretty(records)?;
        fs::write(path, text + "\n").context(|| format!("writing manifest {}", path.display()))?;
        return Ok(());
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "subject_id",
        "dataset_id",
        "manual",
        "prediction",
        "wm_mask",
        "bg_mask",
        "algorithm",
        "training_set",
        "spacing",
    ])?;
    let text = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
    for r in records {
        writer.write_record([
            r.subject_id.clone(),
            r.dataset_id.clone(),
            r.manual.display().to_string(),
            r.prediction.display().to_string(),
            text(&r.wm_mask),
            text(&r.bg_mask),
            r.algorithm.clone(),
            r.training_set.clone(),
            r.spacing.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Distinct subjects in first-seen order.
pub fn subject_keys(records: &[SubjectRecord]) -> Vec<SubjectKey> {
    let mut seen = BTreeSet::new();
    records
        .iter()
        .map(SubjectRecord::key)
        .filter(|k| seen.insert(k.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn touch(dir: &Path, name: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(b"x").unwrap();
        p
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn forty_rows_over_six_sites() {
        let dir = tempfile::tempdir().unwrap();
        let sizes = [("ADNI", 10), ("AF", 10), ("ASC", 4), ("HBA", 5), ("FTD", 4), ("MCIS", 7)];
        let mut text = String::from("# cohort\nsubject_id,dataset_id,manual,prediction\n");
        for (site, n) in sizes {
            for i in 0..n {
                let m = format!("{site}{i}_m.nii");
                let p = format!("{site}{i}_p.nii");
                touch(dir.path(), &m);
                touch(dir.path(), &p);
                text += &format!("{site}-{i},{site},{m},{p}\n");
            }
        }
        let path = write(dir.path(), "manifest.csv", &text);
        let records = load_manifest(&path).unwrap();
        assert_eq!(records.len(), 40);
        let sites: BTreeSet<_> = records.iter().map(|r| r.dataset_id.as_str()).collect();
        assert_eq!(sites.len(), 6);
        assert_eq!(records[0].manual, dir.path().join("ADNI0_m.nii"));
        assert_eq!(records[0].algorithm, DEFAULT_ALGORITHM);
        assert_eq!(records[0].regions(), vec![Region::Whole]);
    }

    #[test]
    fn empty_subject_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "m.csv", "subject_id,dataset_id,manual,prediction\n,A,m.nii,p.nii\n");
        assert!(matches!(read_manifest(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "m.csv", "subject_id,dataset_id,manual\ns,A,m.nii\n");
        let err = read_manifest(&path).unwrap_err();
        assert!(matches!(&err, Error::Schema(msg) if msg.contains("prediction")), "{err}");
        let path = write(dir.path(), "m.json", r#"[{"subject_id": "s", "dataset_id": "A", "manual": "m.nii"}]"#);
        assert!(matches!(read_manifest(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn duplicate_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "m.csv",
            "subject_id,dataset_id,manual,prediction\ns1,A,m.nii,p.nii\ns1,A,m.nii,q.nii\n",
        );
        assert!(matches!(read_manifest(&path), Err(Error::DuplicateSubject { .. })));
        // the same subject under two algorithms is fine
        let path = write(
            dir.path(),
            "m2.csv",
            "subject_id,dataset_id,manual,prediction,algorithm\ns1,A,m.nii,p.nii,x\ns1,A,m.nii,q.nii,y\n",
        );
        assert_eq!(read_manifest(&path).unwrap().len(), 2);
    }

    #[test]
    fn all_missing_files_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "m1.nii");
        let path = write(
            dir.path(),
            "m.csv",
            "subject_id,dataset_id,manual,prediction\ns1,A,m1.nii,p1.nii\ns2,A,m2.nii,p2.nii\n",
        );
        match load_manifest(&path) {
            Err(Error::MissingFile(entries)) => {
                assert_eq!(entries.len(), 3);
                assert_eq!(entries[0].subject_id, "s1");
                assert_eq!(entries[0].column, "prediction");
                let msg = Error::MissingFile(entries).to_string();
                assert!(msg.contains("s2"));
            }
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn quoted_fields_and_optional_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "m.csv",
            "subject_id,dataset_id,manual,prediction,wm_mask,spacing\n\"s,1\",A,\"a b.nii\",p.nii,wm.nii,0.9x0.9x1.2\ns2,A,m.nii,p.nii,,\n",
        );
        let records = read_manifest(&path).unwrap();
        assert_eq!(records[0].subject_id, "s,1");
        assert_eq!(records[0].manual, dir.path().join("a b.nii"));
        assert_eq!(records[0].spacing, Some(Spacing::new(0.9, 0.9, 1.2).unwrap()));
        assert_eq!(records[0].regions(), vec![Region::WhiteMatter, Region::Whole]);
        assert_eq!(records[1].wm_mask, None);
        assert_eq!(records[1].spacing, None);
    }

    #[test]
    fn roundtrip_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            SubjectRecord {
                subject_id: "s,1".into(),
                dataset_id: "ADNI".into(),
                manual: dir.path().join("m.nii"),
                prediction: dir.path().join("p.nii.gz"),
                wm_mask: Some(dir.path().join("wm.nii")),
                bg_mask: None,
                algorithm: "nnunet".into(),
                training_set: "5fcv".into(),
                spacing: Some(Spacing::new(0.9, 0.9, 1.2).unwrap()),
            },
            SubjectRecord {
                subject_id: "s2".into(),
                dataset_id: "AF".into(),
                manual: dir.path().join("m2.nii"),
                prediction: dir.path().join("p2.nii"),
                wm_mask: None,
                bg_mask: Some(dir.path().join("bg.nii")),
                algorithm: DEFAULT_ALGORITHM.into(),
                training_set: String::new(),
                spacing: None,
            },
        ];
        for name in ["out.csv", "out.json"] {
            let path = dir.path().join(name);
            save_manifest(&records, &path).unwrap();
            assert_eq!(read_manifest(&path).unwrap(), records, "{name}");
        }
    }
}
