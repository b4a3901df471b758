use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use perimit::harness::{run_experiment, tidy_csv, validate_suite, ExperimentConfig, Method, OUTPUT_ENV};
use perimit::sim::{collect_play, scripted_demo, Task};
use perimit::{Error, Result};

#[derive(Parser)]
#[command(
    name = "perimit",
    version,
    about = "Learn periodic manipulation skills from one demonstration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment over seeds and write its run directory.
    Run {
        /// TOML configuration; flags below override it.
        config: Option<PathBuf>,
        #[arg(long)]
        task: Option<Task>,
        #[arg(long)]
        method: Option<Method>,
        /// Comma-separated, e.g. `0,1,2`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        budget: Option<usize>,
        /// Output root (default: $PERIMIT_OUT, then the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record a scripted demonstration and its exemplar trajectory.
    Demo {
        #[arg(long)]
        task: Task,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "demo")]
        out: PathBuf,
    },
    /// Record robot and human play data.
    Play {
        #[arg(long)]
        task: Task,
        /// Seconds.
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "play")]
        out: PathBuf,
    },
    /// Emit one tidy CSV over the given run directories.
    PlotData {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the core invariants.
    Validate,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            config,
            task,
            method,
            seeds,
            budget,
            out,
        } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::new(
                    task.ok_or(Error::Parse {
                        what: "arguments",
                        reason: "--task is required without a config file".into(),
                    })?,
                    method.unwrap_or(Method::Viptl),
                    vec![0, 1, 2],
                ),
            };
            if let Some(t) = task {
                cfg.experiment.task = t;
            }
            if let Some(m) = method {
                cfg.experiment.method = m;
            }
            if let Some(s) = seeds {
                cfg.experiment.seeds = s;
            }
            if let Some(b) = budget {
                cfg.experiment.budget = b;
            }
            if let Some(dir) = out.or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from)) {
                cfg.experiment.output_dir = dir;
            }
            let output = run_experiment(&cfg)?;
            for log in &output.logs {
                if let Some(b) = log.best() {
                    println!(
                        "seed {}: best trial {} objective {:.4} performance {:.4} ({:.1} s)",
                        log.seed, b.trial, b.objective, b.performance, log.seconds
                    );
                }
            }
            if let Some((mean, std)) = output.aggregate.last() {
                println!("final performance {mean:.4} ± {std:.4}");
            }
            println!("wrote {}", output.dir.display());
            Ok(true)
        }
        Command::Demo { task, reps, seed, out } => {
            let (video, exemplar) = scripted_demo(task, reps, seed)?;
            mkdir(&out)?;
            video.write_csv(create(&out.join("demo_keypoints.csv"))?)?;
            exemplar.write_csv(create(&out.join("exemplar.csv"))?)?;
            println!("wrote {} frames to {}", video.len(), out.display());
            Ok(true)
        }
        Command::Play {
            task,
            duration,
            seed,
            out,
        } => {
            let play = collect_play(task, seed, duration, seed)?;
            play.write_dir(&out)?;
            println!("wrote {} frames to {}", play.len(), out.display());
            Ok(true)
        }
        Command::PlotData { runs, out } => {
            let mut text = String::new();
            for (i, dir) in runs.iter().enumerate() {
                let t = tidy_csv(dir)?;
                text.push_str(if i == 0 {
                    &t
                } else {
                    t.split_once('\n').map_or("", |(_, rest)| rest)
                });
            }
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| Error::Io { path, source: e })?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Validate => {
            let checks = validate_suite();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
