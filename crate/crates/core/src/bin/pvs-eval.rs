use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pvs_eval::clustering::Connectivity;
use pvs_eval::commands::{self, exit, EvalOptions, Pipeline, SynthOptions, SynthPrediction};
use pvs_eval::config::{RunConfig, THREADS_ENV};
use pvs_eval::metrics::{DscNumMode, RegionClusterMode};
use pvs_eval::schedules::{Schedule, SdConvention};
use pvs_eval::volume::{Dims, Spacing};
use pvs_eval::volume_ops::ClampScaling;
use pvs_eval::Error;

/// Evaluate 3D binary segmentations against manual masks.
#[derive(Parser)]
#[command(name = "pvs-eval", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    /// Neighbourhood for clusters: 6, 18 or 26.
    #[arg(long, value_parser = parse_connectivity)]
    connectivity: Option<Connectivity>,
    /// symmetric or algo-side.
    #[arg(long)]
    dsc_num_mode: Option<DscNumMode>,
    /// split-after-masking or assign-by-majority.
    #[arg(long, value_parser = parse_region_mode)]
    region_cluster_mode: Option<RegionClusterMode>,
    #[arg(long)]
    min_n_for_corr: Option<usize>,
    /// sample or population.
    #[arg(long)]
    sd: Option<SdConvention>,
    /// `0.8` or `0.9x0.9x1.2`.
    #[arg(long)]
    target_spacing: Option<Spacing>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Score every manifest row and write metrics and summary tables.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fold plan from `folds`; records outside its evaluation sets are rejected.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Write results for the subjects that worked even if some failed.
        #[arg(long)]
        keep_going: bool,
        /// Resample predictions onto the manual grid instead of failing.
        #[arg(long)]
        allow_resample: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Preprocess one image with the nnunet or shiva pipeline.
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        pipeline: Pipeline,
        /// Scale by v/P (ratio) or (v-min)/(P-min) (min-max).
        #[arg(long, value_parser = parse_clamp)]
        clamp_scaling: Option<ClampScaling>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Assign subjects to training/evaluation folds.
    Folds {
        #[arg(long)]
        manifest: PathBuf,
        /// 5fcv, loso or single:<dataset>.
        #[arg(long)]
        schedule: Schedule,
        /// Shuffle all subjects together instead of within each dataset.
        #[arg(long)]
        no_stratify: bool,
        /// Output file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare metrics files from several eval runs.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
    /// Write a synthetic cohort with perturbed predictions and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated SITE=N list.
        #[arg(long, value_parser = parse_sites)]
        sites: Option<Sites>,
        /// Grid size, e.g. 64 or 64x64x48.
        #[arg(long, value_parser = parse_dims, default_value = "48")]
        dims: Dims,
        #[arg(long, default_value = "0.8")]
        spacing: Spacing,
        /// Tube count range per subject, e.g. 8..20.
        #[arg(long, value_parser = parse_range, default_value = "8..20")]
        tubes: (usize, usize),
        /// Prediction variant: identity, drop:<f>, erode or add:<k>,
        /// optionally NAME=... Repeatable.
        #[arg(long = "predict", default_value = "identity")]
        predictions: Vec<SynthPrediction>,
        #[arg(long, default_value = "synthetic")]
        training_set: String,
        /// Skip the WM/BG region masks.
        #[arg(long)]
        no_regions: bool,
        /// Also write intensity images.
        #[arg(long)]
        images: bool,
        #[arg(long)]
        gzip: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    match s {
        "6" => Ok(Connectivity::Six),
        "18" => Ok(Connectivity::Eighteen),
        "26" => Ok(Connectivity::TwentySix),
        _ => Err(format!("'{s}' is not 6, 18 or 26")),
    }
}

fn parse_region_mode(s: &str) -> Result<RegionClusterMode, String> {
    match s {
        "split-after-masking" => Ok(RegionClusterMode::SplitAfterMasking),
        "assign-by-majority" => Ok(RegionClusterMode::AssignByMajority),
        _ => Err(format!("'{s}' is not split-after-masking or assign-by-majority")),
    }
}

fn parse_clamp(s: &str) -> Result<ClampScaling, String> {
    match s {
        "ratio" => Ok(ClampScaling::Ratio),
        "min-max" => Ok(ClampScaling::MinMax),
        _ => Err(format!("'{s}' is not ratio or min-max")),
    }
}

/// `SITE=N,...` as one argument value.
#[derive(Clone)]
struct Sites(Vec<(String, usize)>);

fn parse_sites(s: &str) -> Result<Sites, String> {
    s.split(',')
        .map(|part| {
            let (site, n) = part.split_once('=').ok_or_else(|| format!("'{part}' is not SITE=N"))?;
            let n = n.parse().map_err(|_| format!("'{n}' is not a count"))?;
            Ok((site.trim().to_string(), n))
        })
        .collect::<Result<_, _>>()
        .map(Sites)
}

fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse().map_err(|_| format!("'{s}' is not N or NxNxN")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [n] => Ok([n; 3]),
        [x, y, z] => Ok([x, y, z]),
        _ => Err(format!("'{s}' is not N or NxNxN")),
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("'{s}' is not N or A..B");
    match s.split_once("..") {
        Some((a, b)) => Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

impl Overrides {
    fn apply(self, config: &mut RunConfig) {
        if let Some(v) = self.connectivity {
            config.connectivity = v;
        }
        if let Some(v) = self.dsc_num_mode {
            config.dsc_num_mode = v;
        }
        if let Some(v) = self.region_cluster_mode {
            config.region_cluster_mode = v;
        }
        if let Some(v) = self.min_n_for_corr {
            config.min_n_for_corr = v;
        }
        if let Some(v) = self.sd {
            config.sd = v;
        }
        if let Some(v) = self.target_spacing {
            config.target_spacing = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Error::setup)?,
        None => RunConfig::default(),
    };
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    match cli.command {
        Command::Eval {
            manifest,
            out,
            plan,
            keep_going,
            allow_resample,
            overrides,
        } => {
            overrides.apply(&mut config);
            config.allow_resample |= allow_resample;
            let outcome = commands::run_eval(
                &EvalOptions {
                    manifest,
                    out_dir: out,
                    plan,
                    keep_going,
                },
                &config,
            )?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.failures {
                eprintln!("error: {f}");
            }
            for p in &outcome.outputs {
                println!("{}", p.display());
            }
            Ok(outcome.exit_code())
        }
        Command::Prep {
            input,
            output,
            pipeline,
            clamp_scaling,
            overrides,
        } => {
            overrides.apply(&mut config);
            if let Some(c) = clamp_scaling {
                config.clamp_scaling = c;
            }
            let outcome = commands::run_prep(&input, &output, pipeline, &config)?;
            println!("{}", outcome.output.display());
            if let Some(t) = outcome.transform {
                println!("{}", t.display());
            }
            Ok(exit::OK)
        }
        Command::Folds {
            manifest,
            schedule,
            no_stratify,
            out,
            overrides,
        } => {
            overrides.apply(&mut config);
            config.stratify &= !no_stratify;
            let file = commands::run_folds(&manifest, &schedule, &config)?;
            match out {
                Some(path) => commands::write_plan(&file, &path)?,
                None => println!("{}", serde_json::to_string_pretty(&file)?),
            }
            Ok(exit::OK)
        }
        Command::Report { out, metrics } => {
            let outcome = commands::run_report(&metrics, &out)?;
            for p in &outcome.outputs {
                println!("{}", p.display());
            }
            Ok(exit::OK)
        }
        Command::Synth {
            out,
            sites,
            dims,
            spacing,
            tubes,
            predictions,
            training_set,
            no_regions,
            images,
            gzip,
            seed,
        } => {
            let options = SynthOptions {
                out_dir: out.clone(),
                sites: sites.map_or_else(commands::default_sites, |s| s.0),
                dims,
                spacing,
                tubes,
                predictions,
                training_set,
                regions: !no_regions,
                images,
                gzip,
                seed,
            };
            let records = commands::run_synth(&options, &config)?;
            println!("{} ({} rows)", out.join(commands::MANIFEST_FILE).display(), records.len());
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
