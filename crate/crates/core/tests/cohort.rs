//! Cohort-level results that follow from how the synthetic predictions are
//! built.

use pvs_eval::commands::{run_eval, run_synth, EvalOptions, SynthOptions, MANIFEST_FILE};
use pvs_eval::config::RunConfig;
use pvs_eval::metrics::{Measure, Region};
use pvs_eval::schedules::ALL_SITES;
use tempfile::TempDir;

fn evaluate(predictions: &[&str], tubes: (usize, usize)) -> pvs_eval::commands::EvalOutcome {
    let dir = TempDir::new().unwrap();
    let config = RunConfig::default();
    let options = SynthOptions {
        out_dir: dir.path().join("cohort"),
        dims: [40, 40, 40],
        tubes,
        predictions: predictions.iter().map(|p| p.parse().unwrap()).collect(),
        ..SynthOptions::default()
    };
    run_synth(&options, &config).unwrap();
    run_eval(
        &EvalOptions {
            manifest: options.out_dir.join(MANIFEST_FILE),
            out_dir: dir.path().join("eval"),
            plan: None,
            keep_going: false,
        },
        &config,
    )
    .unwrap()
}

#[test]
fn halving_even_cluster_counts_gives_exact_half_sensitivity() {
    let outcome = evaluate(&["drop:0.5"], (12, 12));
    let row = outcome
        .summary
        .rows
        .iter()
        .find(|r| r.region == Region::Whole && r.eval_dataset == ALL_SITES)
        .unwrap();
    assert_eq!(row.n_subjects, 40);
    assert_eq!(row.stat(Measure::SenNum).mean, Some(0.5));
    assert_eq!(row.stat(Measure::PpvNum).mean, Some(1.0));
}

#[test]
fn identity_cohort_has_unit_correlations() {
    let outcome = evaluate(&["identity"], (6, 18));
    assert!(!outcome.summary.correlations.is_empty());
    for c in &outcome.summary.correlations {
        if c.region == Region::Whole {
            assert_eq!(c.r_num, Some(1.0), "{c:?}");
            assert_eq!(c.r_vox, Some(1.0), "{c:?}");
        }
    }
    for row in &outcome.summary.rows {
        for m in Measure::ALL {
            assert_eq!(row.stat(m).mean, Some(1.0), "{} {:?}", row.eval_dataset, m);
        }
    }
}

#[test]
fn adding_clusters_leaves_sensitivity_whole() {
    let outcome = evaluate(&["add:4"], (8, 16));
    for r in outcome.records.iter().filter(|r| r.region == Region::Whole) {
        assert_eq!(r.sen_num, Some(1.0));
        assert_eq!(r.sen_vox, Some(1.0));
        assert_eq!(r.n_algo, r.n_manual + 4);
        assert_eq!(r.ppv_num, Some(r.n_manual as f64 / (r.n_manual + 4) as f64));
    }
}
