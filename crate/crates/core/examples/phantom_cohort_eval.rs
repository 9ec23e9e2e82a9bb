//! Write a synthetic cohort to disk, evaluate it and print the summary table.
//!
//! ```text
//! cargo run --release --example phantom_cohort_eval
//! ```

use pvs_eval::commands::{run_eval, run_synth, EvalOptions, SynthOptions, SUMMARY_MD_FILE};
use pvs_eval::config::RunConfig;

pub fn main() -> pvs_eval::Result<()> {
    let dir = std::env::temp_dir().join("pvs-eval-cohort");
    let config = RunConfig::default();
    let options = SynthOptions {
        out_dir: dir.join("cohort"),
        predictions: vec!["identity".parse()?, "weak=drop:0.5".parse()?, "noisy=add:4".parse()?],
        ..SynthOptions::default()
    };
    let records = run_synth(&options, &config)?;
    println!("{} manifest rows", records.len());

    let outcome = run_eval(
        &EvalOptions {
            manifest: options.out_dir.join("manifest.csv"),
            out_dir: dir.join("eval"),
            plan: None,
            keep_going: false,
        },
        &config,
    )?;
    println!("{} metric rows, {} correlation records", outcome.records.len(), outcome.summary.correlations.len());
    print!("{}", std::fs::read_to_string(dir.join("eval").join(SUMMARY_MD_FILE))?);
    Ok(())
}
