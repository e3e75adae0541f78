//! `harmonidiff` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use harmonidiff::baselines::PoissonConfig;
use harmonidiff::harmonize::{compose_with, CompositionTask};
use harmonidiff::harness::{
    contact_sheet, gen_negatives, gen_synthetic, load_labeled_dir, load_manifest, obtain_scorer, parse_methods,
    run_benchmark, synthetic::SyntheticConfig, AppConfig, Method,
};
use harmonidiff::imagecore::{load_image, load_mask, save_image};
use harmonidiff::metrics::{bgd_abs, train_scorer, DEFAULT_BGD_WIDTH};
use harmonidiff::par::Execution;
use harmonidiff::scheduler::Conditioning;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_TOTAL_FAILURE: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "harmonidiff", version, about = "Training-free satellite image composition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArg {
    /// JSON config document; every field is optional.
    #[arg(long, env = "HARMONIDIFF_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compose one source into one target and keep every candidate.
    Compose {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        paste_x: usize,
        #[arg(long)]
        paste_y: usize,
        #[arg(long)]
        src_gsd: f64,
        #[arg(long)]
        tar_gsd: f64,
        /// Conditioning text passed to the noise predictor.
        #[arg(long)]
        prompt: Option<String>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write a contact sheet of all candidates.
        #[arg(long)]
        sheet: bool,
    },
    /// Run methods over a manifest and write reports.
    Bench {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated subset of copy_paste,poisson,harmonidiff.
        #[arg(long, default_value = "copy_paste,poisson,harmonidiff")]
        methods: String,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Process tasks on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Print the boundary gradient difference of an image around a mask.
    Metrics {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BGD_WIDTH)]
        w: usize,
    },
    /// Train the harmony scorer from two image directories.
    TrainScorer {
        #[arg(long)]
        positives: PathBuf,
        #[arg(long)]
        negatives: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Write copy-paste and Poisson composites of a manifest as scorer negatives.
    GenNegatives {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Write a seeded synthetic task suite and its manifest.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Errors that map to a dedicated exit code.
#[derive(Debug)]
enum Failure {
    Config(anyhow::Error),
    Total(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<harmonidiff::Error>() {
            Some(harmonidiff::Error::Config(_)) => Failure::Config(e),
            _ => Failure::Other(e),
        }
    }
}

impl From<harmonidiff::Error> for Failure {
    fn from(e: harmonidiff::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn load_config(arg: &ConfigArg) -> Result<AppConfig, Failure> {
    match &arg.config {
        None => Ok(AppConfig::default()),
        Some(p) => AppConfig::load(p)
            .with_context(|| format!("loading config {}", p.display()))
            .map_err(Failure::Config),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

#[derive(serde::Serialize)]
struct CandidateSummary {
    depth: usize,
    score: f64,
    selected: bool,
    path: String,
}

#[allow(clippy::too_many_arguments)]
fn compose(
    source: &Path,
    target: &Path,
    mask: Option<&Path>,
    origin: (usize, usize),
    gsd: (f64, f64),
    prompt: Option<&str>,
    cfg: &AppConfig,
    out: &Path,
    sheet: bool,
) -> Result<(), Failure> {
    let mut task = CompositionTask::new(load_image(source)?, load_image(target)?, origin, gsd.0, gsd.1);
    if let Some(m) = mask {
        task = task.with_mask(load_mask(m)?);
    }
    if let Some(p) = prompt {
        task = task.with_conditioning(Conditioning::from_text(p));
    }
    let scorer = obtain_scorer(cfg)?;
    let set = compose_with(&task, &cfg.harmonize_config(), &scorer, Execution::Parallel)?;
    let best = set.select_best()?;
    let cand_dir = out.join("candidates");
    std::fs::create_dir_all(&cand_dir).with_context(|| format!("creating {}", cand_dir.display()))?;
    let mut summary = Vec::new();
    for c in &set.candidates {
        let name = format!("candidates/depth_{:02}.png", c.depth);
        save_image(&c.image, out.join(&name))?;
        summary.push(CandidateSummary {
            depth: c.depth,
            score: c.score,
            selected: c.depth == best.depth,
            path: name,
        });
    }
    save_image(&best.image, out.join("composite.png"))?;
    write_json(&out.join("candidates.json"), &summary)?;
    if sheet {
        contact_sheet(&set, out.join("sheet.png"))?;
    }
    println!("selected depth {} (score {:.6})", best.depth, best.score);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Compose {
            source,
            target,
            mask,
            paste_x,
            paste_y,
            src_gsd,
            tar_gsd,
            prompt,
            config,
            out,
            sheet,
        } => {
            let cfg = load_config(&config)?;
            compose(
                &source,
                &target,
                mask.as_deref(),
                (paste_x, paste_y),
                (src_gsd, tar_gsd),
                prompt.as_deref(),
                &cfg,
                &out,
                sheet,
            )
        }
        Command::Bench {
            manifest,
            methods,
            config,
            out,
            sequential,
        } => {
            let cfg = load_config(&config)?;
            let methods: Vec<Method> = parse_methods(&methods)?;
            let manifest = load_manifest(&manifest).context("loading manifest")?;
            let scorer = obtain_scorer(&cfg)?;
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let report = run_benchmark(&manifest, &methods, &cfg, &scorer, &out, exec)?;
            for a in &report.aggregates {
                println!(
                    "{:<12} ok={} failed={} mean_bgd={} mean_hs={}",
                    a.method.to_string(),
                    a.tasks_ok,
                    a.tasks_failed,
                    a.mean_bgd.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
                    a.mean_harmony_score.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into()),
                );
            }
            if report.all_failed() {
                return Err(Failure::Total(format!("all {} rows failed", report.rows.len())));
            }
            Ok(())
        }
        Command::Metrics { image, mask, w } => {
            let v = bgd_abs(&load_image(&image)?, &load_mask(&mask)?, w)?;
            println!("{v}");
            Ok(())
        }
        Command::TrainScorer {
            positives,
            negatives,
            out,
            seed,
            config,
        } => {
            let cfg = load_config(&config)?;
            let mut opts = cfg.training_options();
            if let Some(s) = seed {
                opts.seed = s;
            }
            let pos = load_labeled_dir(&positives, opts.seed)?;
            let neg = load_labeled_dir(&negatives, opts.seed.wrapping_add(1))?;
            if pos.is_empty() || neg.is_empty() {
                return Err(anyhow!(
                    "need images in both directories (found {} positives, {} negatives)",
                    pos.len(),
                    neg.len()
                )
                .into());
            }
            let (scorer, report) = train_scorer(&pos, &neg, &opts)?;
            scorer.save(&out)?;
            println!(
                "trained on {} samples, training accuracy {:.4}",
                report.samples, report.accuracy
            );
            Ok(())
        }
        Command::GenNegatives { manifest, out, config } => {
            let cfg = load_config(&config)?;
            let manifest = load_manifest(&manifest).context("loading manifest")?;
            let poisson: PoissonConfig = cfg.harmonize.poisson;
            let n = gen_negatives(&manifest, &out, &poisson)?;
            println!("wrote {n} negatives to {}", out.display());
            Ok(())
        }
        Command::GenSynthetic { out, tasks, seed } => {
            let m = gen_synthetic(&out, tasks, seed, &SyntheticConfig::default())?;
            println!("wrote {} tasks and manifest.json to {}", m.entries.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Total(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_TOTAL_FAILURE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
