use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coughscreen::models::Family;
use coughscreen::pipeline::{self, Experiment, PipelineConfig, SyntheticCorpusSpec};
use coughscreen::Error;

#[derive(Parser, Debug)]
#[command(name = "coughscreen", version, about = "TB cough screening: features, models and grouped cross-validation")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated model families (lr, mlp, rf, ab).
    #[arg(long, global = true, value_delimiter = ',')]
    families: Option<Vec<String>>,
    /// cough-only or cough-metadata.
    #[arg(long, global = true)]
    experiment: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Manifest CSV, overriding the configuration.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract per-clip features into features.csv.
    Extract,
    /// Nested grouped cross-validation for every selected family.
    Crossvalidate,
    /// Tune and fit one family on all data and save the model bundle.
    TrainFinal {
        /// Family to train; defaults to the first configured one.
        #[arg(long)]
        family: Option<String>,
    },
    /// Score a manifest with a saved model bundle.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        audio_root: Option<PathBuf>,
    },
    /// Generate a seeded synthetic corpus.
    Synth(SynthArgs),
    /// Print the summary table of the reports in the output directory.
    Report {
        /// Directory holding report_*.json (defaults to --out).
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 40)]
    participants: usize,
    #[arg(long, default_value_t = 5)]
    clips_min: usize,
    #[arg(long, default_value_t = 5)]
    clips_max: usize,
    #[arg(long, default_value_t = 0.5)]
    positive_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    audio_strength: f64,
    #[arg(long, default_value_t = 0.0)]
    metadata_strength: f64,
    #[arg(long, default_value_t = 0.0)]
    missing_fraction: f64,
    /// Shuffle participant labels after generation.
    #[arg(long)]
    permute_labels: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Schema(_) | Error::Json(_) | Error::Csv(_) => 3,
        Error::Extraction { .. } => 5,
        Error::Fold { source, .. } => exit_code(source),
        Error::State(_) | Error::Leakage(_) => 1,
        _ => 4,
    }
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig, Error> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(f) = &g.families {
        cfg.families = f.iter().map(|s| s.parse()).collect::<Result<Vec<Family>, _>>()?;
    }
    if let Some(e) = &g.experiment {
        cfg.experiment = e.parse::<Experiment>()?;
    }
    if let Some(o) = &g.out {
        cfg.paths.output_dir = o.clone();
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(m) = &g.manifest {
        cfg.paths.manifest = m.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let g = &cli.global;
    match cli.command {
        Command::Synth(a) => {
            let spec = SyntheticCorpusSpec {
                n_participants: a.participants,
                clips_min: a.clips_min,
                clips_max: a.clips_max,
                positive_fraction: a.positive_fraction,
                audio_strength: a.audio_strength,
                metadata_strength: a.metadata_strength,
                missing_fraction: a.missing_fraction,
                permute_labels: a.permute_labels,
                seed: g.seed.unwrap_or(0),
                ..Default::default()
            };
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
            let s = pipeline::cmd_synth(&spec, &out)?;
            println!(
                "wrote {} clips for {} participants ({} TB+) to {}",
                s.n_clips,
                s.n_participants,
                s.n_positive,
                out.display()
            );
            return Ok(());
        }
        Command::Report { dir } => {
            let dir = dir
                .or_else(|| g.out.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            print!("{}", pipeline::cmd_report(&dir)?);
            return Ok(());
        }
        _ => {}
    }

    let cfg = load_config(g)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Extract => {
            let o = pipeline::cmd_extract(&cfg)?;
            println!(
                "{} clips -> {} ({} cached, {} computed)",
                o.n_clips,
                o.features_csv.display(),
                o.cache_hits,
                o.computed
            );
            Ok(())
        }
        Command::Crossvalidate => {
            let reports = pipeline::cmd_crossvalidate(&cfg)?;
            print!("{}", coughscreen::eval::render_summary(&reports));
            Ok(())
        }
        Command::TrainFinal { family } => {
            let family = match family {
                Some(f) => f.parse()?,
                None => cfg.families[0],
            };
            let path = pipeline::cmd_train_final(&cfg, family)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Predict { model, audio_root } => {
            let scores = pipeline::cmd_predict(
                &model,
                &cfg.paths.manifest,
                audio_root.as_deref(),
                &cfg.paths.output_dir,
                Some(&cfg.cache_dir()),
            )?;
            println!(
                "scored {} clips -> {}",
                scores.len(),
                cfg.paths.output_dir.join("scores.csv").display()
            );
            Ok(())
        }
        Command::Synth(_) | Command::Report { .. } => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
