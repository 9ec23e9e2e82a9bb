//! End-to-end runs of the `pvs-eval` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pvs_eval::config::parse_provenance;
use pvs_eval::nifti;
use pvs_eval::synth::{generate_phantom, PhantomSpec};
use pvs_eval::{Spacing, Volume};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pvs-eval"));
    cmd.env_remove("PVS_EVAL_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small cohort: two sites of 7 and 3 subjects, two prediction variants.
fn synth_cohort(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("cohort");
    let res = run(&[
        "synth",
        "--out",
        p(&out),
        "--sites",
        "ONE=7,TWO=3",
        "--dims",
        "32",
        "--tubes",
        "3..9",
        "--predict",
        "identity",
        "--predict",
        "half=drop:0.5",
        "--seed",
        "11",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    out.join("manifest.csv")
}

#[test]
fn eval_writes_tables_with_provenance() {
    let dir = TempDir::new().unwrap();
    let manifest = synth_cohort(dir.path());
    let out = dir.path().join("eval");
    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let prov = parse_provenance(&metrics).unwrap();
    assert_eq!(prov.schema, "metrics/1");
    // 10 subjects x 2 algorithms x 3 regions, plus header lines
    let rows = metrics.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 60);

    let summary = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(summary.contains("| Region | Algorithm | Training Dataset | Evaluation Dataset |"));
    assert!(summary.contains("All sites"));

    let corr = fs::read_to_string(out.join("correlations.csv")).unwrap();
    let datasets: Vec<&str> = corr
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    assert!(!datasets.is_empty());
    assert!(datasets.iter().all(|d| *d == "ONE"), "{datasets:?}");
}

#[test]
fn config_file_and_flags_reach_provenance() {
    let dir = TempDir::new().unwrap();
    let manifest = synth_cohort(dir.path());
    let config = dir.path().join("run.toml");
    fs::write(&config, "connectivity = 6\nsd = \"population\"\n").unwrap();
    let out = dir.path().join("eval");
    let res = run(&[
        "--config",
        p(&config),
        "eval",
        "--manifest",
        p(&manifest),
        "--out",
        p(&out),
        "--min-n-for-corr",
        "3",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    let prov = parse_provenance(&text).unwrap();
    assert!(prov.config.contains("\"connectivity\":6"), "{}", prov.config);
    assert!(prov.config.contains("\"sd\":\"population\""));
    assert!(prov.config.contains("\"min_n_for_corr\":3"));
    // with the lower threshold both sites get correlations
    let corr = fs::read_to_string(out.join("correlations.csv")).unwrap();
    assert!(corr.contains(",TWO,"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let manifest = synth_cohort(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("eval-{threads}"));
        let res = bin()
            .env("PVS_EVAL_THREADS", threads)
            .args(["eval", "--manifest", p(&manifest), "--out", p(&out)])
            .output()
            .unwrap();
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        let files: Vec<Vec<u8>> = ["metrics.csv", "summary.csv", "summary.md", "correlations.csv"]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn setup_errors_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("eval");
    let missing = dir.path().join("nope.csv");
    let res = run(&["eval", "--manifest", p(&missing), "--out", p(&out)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));

    let bad_config = dir.path().join("bad.toml");
    fs::write(&bad_config, "connectivity = 7\n").unwrap();
    let res = run(&["--config", p(&bad_config), "eval", "--manifest", p(&missing), "--out", p(&out)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));

    let manifest = synth_cohort(dir.path());
    let res = run(&["folds", "--manifest", p(&manifest), "--schedule", "single:TWO"]);
    assert_eq!(code(&res), 2);
    assert!(stderr(&res).contains("at least 5"), "{}", stderr(&res));

    // a file referenced by the manifest is gone
    fs::remove_file(dir.path().join("cohort/ONE/ONE-001_manual.nii")).unwrap();
    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
    assert!(stderr(&res).contains("ONE-001_manual.nii"));
}

#[test]
fn grid_mismatch_fails_the_subject_unless_resampling_is_allowed() {
    let dir = TempDir::new().unwrap();
    let manifest = synth_cohort(dir.path());
    let pred = dir.path().join("cohort/TWO/TWO-002_pred-identity.nii");
    let manual = nifti::read_nifti(dir.path().join("cohort/TWO/TWO-002_manual.nii")).unwrap();
    // same field of view at half the resolution
    let coarse = pvs_eval::volume_ops::resample(
        &manual,
        Spacing::isotropic(1.6).unwrap(),
        pvs_eval::volume_ops::Interpolation::Nearest,
    )
    .unwrap();
    nifti::write_nifti(&coarse, &pred, nifti::DataType::U8).unwrap();

    let out = dir.path().join("eval");
    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out)]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("TWO-002"), "{}", stderr(&res));
    assert!(!out.join("metrics.csv").exists());

    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out), "--keep-going"]);
    assert_eq!(code(&res), 1);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(!metrics.contains("TWO-002,TWO,identity"));
    assert!(metrics.contains("TWO-002,TWO,half"));

    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out), "--allow-resample"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(stderr(&res).contains("warning"), "{}", stderr(&res));
}

#[test]
fn folds_plan_restricts_eval() {
    let dir = TempDir::new().unwrap();
    let manifest = synth_cohort(dir.path());
    let plan = dir.path().join("plan.json");
    let res = run(&["folds", "--manifest", p(&manifest), "--schedule", "5fcv", "--out", p(&plan)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(&plan).unwrap();
    assert!(text.contains("\"generator\""));

    let out = dir.path().join("eval");
    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out), "--plan", p(&plan)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    // a plan holding out only site ONE leaves TWO's records orphaned
    let loso = dir.path().join("single.json");
    let res = run(&["folds", "--manifest", p(&manifest), "--schedule", "single:ONE", "--out", p(&loso)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let res = run(&["eval", "--manifest", p(&manifest), "--out", p(&out), "--plan", p(&loso)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
}

#[test]
fn report_merges_runs_and_rejects_mixed_configs() {
    let dir = TempDir::new().unwrap();
    let manifest = synth_cohort(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run(&["eval", "--manifest", p(&manifest), "--out", p(&a)])), 0);
    assert_eq!(
        code(&run(&["eval", "--manifest", p(&manifest), "--out", p(&b), "--connectivity", "6"])),
        0
    );

    let out = dir.path().join("report");
    let res = run(&["report", "--out", p(&out), p(&a.join("metrics.csv"))]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let md = fs::read_to_string(out.join("comparison.md")).unwrap();
    assert!(md.contains("**"), "best values are bolded");
    assert!(out.join("plot_long.csv").exists());

    let res = run(&["report", "--out", p(&out), p(&a.join("metrics.csv")), p(&b.join("metrics.csv"))]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));
}

#[test]
fn prep_writes_normalized_images_and_transform() {
    let dir = TempDir::new().unwrap();
    let spec = PhantomSpec {
        dims: [96, 112, 96],
        spacing: Spacing::isotropic(1.5).unwrap(),
        n_tubes: 10,
        noise_sd: 15.0,
        head: Some(Default::default()),
        ..PhantomSpec::default()
    };
    let image = generate_phantom(&spec).unwrap().image;
    let input = dir.path().join("t1.nii.gz");
    nifti::write_nifti(&image, &input, nifti::DataType::F32).unwrap();

    let nn = dir.path().join("nn.nii.gz");
    let res = run(&["prep", "--input", p(&input), "--output", p(&nn), "--pipeline", "nnunet"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let out = nifti::read_nifti(&nn).unwrap();
    // pixdim is stored as f32
    assert_eq!(out.spacing().as_array(), [f64::from(0.8f32); 3]);
    let header = nifti::read_header(&nn).unwrap();
    assert!(header.comments().iter().any(|c| c.contains("nnunet")), "{:?}", header.comments());

    let sh = dir.path().join("shiva.nii.gz");
    let res = run(&["prep", "--input", p(&input), "--output", p(&sh), "--pipeline", "shiva"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let out: Volume = nifti::read_nifti(&sh).unwrap();
    assert_eq!(out.dims(), [160, 214, 176]);
    assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(dir.path().join("shiva.transform.json").exists());
}
