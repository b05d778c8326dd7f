use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enoch::{Error, Result};
use enoch_cli::commands::{self, print};
use enoch_cli::config::{Config, KEYS};
use enoch_cli::exit_code;

/// Style-based date prediction for manuscripts.
#[derive(Parser)]
#[command(name = "enoch", version, after_help = config_help())]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Output directory; overrides ENOCH_OUTPUT_DIR.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the dated manuscripts of a manifest.
    Train,
    /// Predict date curves for images.
    Predict {
        /// Image files or directories of images.
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Also write reweighted curves for every balance threshold.
        #[arg(long)]
        balance: bool,
    },
    /// Leave-one-out validation over a manifest.
    Validate,
    /// Show the accumulated training mass and a duplication plan.
    Balance,
    /// Generate a synthetic corpus with known dates.
    Synth,
    /// Describe a model file.
    Inspect,
}

fn config_help() -> String {
    let mut s = String::from("Config keys (config file lines or --set):\n");
    for (k, d) in KEYS {
        s.push_str(&format!("  {k:<22} {d}\n"));
    }
    s
}

fn build_config(c: &Common) -> Result<Config> {
    let mut cfg = Config::default();
    if let Some(p) = &c.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_env();
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
    }
    if let Some(p) = &c.manifest {
        cfg.manifest = Some(p.clone());
    }
    if let Some(p) = &c.model {
        cfg.model = Some(p.clone());
    }
    if let Some(p) = &c.output {
        cfg.output = p.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    for pair in &c.set {
        cfg.set_pair(pair)?;
    }
    cfg.finish()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = build_config(&cli.common)?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    }
    match cli.command {
        Command::Train => {
            let t = commands::train(&cfg)?;
            print(&format!(
                "{}\nmodel {}\nsha256 {}\n",
                t.summary,
                t.path.display(),
                t.hash
            ));
        }
        Command::Predict { images, balance } => {
            let results = commands::predict(&cfg, &images, balance)?;
            let failed = results.iter().filter(|r| r.error.is_some()).count();
            for r in &results {
                match (&r.peak, &r.scalar, &r.error) {
                    (_, _, Some(e)) => print(&format!("{}: failed: {e}\n", r.image.display())),
                    (peak, Some((y, s)), None) => {
                        let peak = peak
                            .map(|(p, sp)| format!("peak {p:.0} ± {sp:.0}"))
                            .unwrap_or_else(|| "no peak".into());
                        print(&format!(
                            "{}: {peak}, scalar {y:.0} ± {s:.0}\n",
                            r.image.display()
                        ))
                    }
                    _ => {}
                }
            }
            print(&format!(
                "{} of {} images predicted; index {}\n",
                results.len() - failed,
                results.len(),
                cfg.output.join("predictions.json").display()
            ));
            if failed > 0 {
                return Ok(3);
            }
        }
        Command::Validate => {
            let v = commands::validate(&cfg)?;
            print(&v.text);
            if v.report.failures() > 0 {
                return Ok(3);
            }
        }
        Command::Balance => {
            let b = commands::balance(&cfg)?;
            print(&b.csv);
            eprintln!(
                "flatness (max/min) {:.2} before, {:.2} after; plan written to {}",
                b.before,
                b.after,
                cfg.output.join("augmentation_plan.json").display()
            );
        }
        Command::Synth => {
            let path = commands::synth(&cfg)?;
            print(&format!("manifest {}\n", path.display()));
        }
        Command::Inspect => print(&commands::inspect(&cfg)?),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
