//! Evaluate two algorithms separately, then merge the metrics files into
//! one comparison table, as `pvs-eval report` does.
//!
//! ```text
//! cargo run --release --example compare_algorithms
//! ```

use pvs_eval::commands::{run_eval, run_report, run_synth, EvalOptions, SynthOptions, COMPARISON_FILE, METRICS_FILE};
use pvs_eval::config::RunConfig;

pub fn main() -> pvs_eval::Result<()> {
    let dir = std::env::temp_dir().join("pvs-eval-compare");
    let config = RunConfig::default();
    let sites = vec![("A".to_string(), 8), ("B".to_string(), 7)];

    let mut metrics = Vec::new();
    for variant in ["strict=drop:0.3", "loose=add:3"] {
        let name = variant.split('=').next().unwrap();
        let options = SynthOptions {
            out_dir: dir.join(name),
            sites: sites.clone(),
            predictions: vec![variant.parse()?],
            ..SynthOptions::default()
        };
        run_synth(&options, &config)?;
        run_eval(
            &EvalOptions {
                manifest: options.out_dir.join("manifest.csv"),
                out_dir: dir.join(name).join("eval"),
                plan: None,
                keep_going: false,
            },
            &config,
        )?;
        metrics.push(dir.join(name).join("eval").join(METRICS_FILE));
    }

    let report = run_report(&metrics, &dir.join("report"))?;
    println!("{} summary rows", report.summary.rows.len());
    print!("{}", std::fs::read_to_string(dir.join("report").join(COMPARISON_FILE))?);
    Ok(())
}
