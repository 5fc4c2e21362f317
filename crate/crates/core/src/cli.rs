//! Command-line front end: `run`, `eval`, `synth`, `bench`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{Augmentation, EngineConfig};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{evaluate_sequence, format_sequence, leaderboard, LeaderboardRow};
use crate::pipeline::segment;
use crate::synth::{synth_generate, Scenario, SynthSpec};
use crate::weights::WeightSet;

#[derive(Debug, Parser)]
#[command(name = "memvos", version, about = "Memory-based video object segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate first-frame annotations through every sequence under a dataset root.
    Run {
        /// Dataset root containing `<seq>/frames` and `<seq>/masks/00000.pgm`.
        #[arg(long)]
        input: PathBuf,
        /// Where predicted masks are written, one directory per sequence.
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Score predicted masks against ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Write a synthetic dataset with exact ground truth.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        scene: SceneArgs,
        /// Comma-separated seeds, one sequence each.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
    },
    /// Sweep memory policies over synthetic sequences and print a CSV.
    Bench {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long = "r-grid", value_delimiter = ',', default_value = "3")]
        r_grid: Vec<usize>,
        #[arg(long = "t-max-grid", value_delimiter = ',', default_value = "15")]
        t_max_grid: Vec<usize>,
        /// Top-k values; `all` disables filtering.
        #[arg(long = "k-grid", value_delimiter = ',', default_value = "60,all")]
        k_grid: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
        seeds: Vec<u64>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Debug, Args)]
struct SceneArgs {
    #[arg(long, default_value = "translate")]
    scenario: String,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = 24)]
    frames: usize,
    #[arg(long, default_value_t = 2)]
    step: i64,
}

impl SceneArgs {
    fn spec(&self) -> Result<SynthSpec> {
        let kind: Scenario = self.scenario.parse()?;
        Ok(SynthSpec::scenario(kind, self.size, self.frames, self.step))
    }
}

#[derive(Debug, Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 3)]
    mem_interval: usize,
    #[arg(long, default_value_t = 15)]
    max_mem_frames: usize,
    #[arg(long, default_value_t = 60)]
    topk: usize,
    /// Short side after rescaling; 0 keeps native resolution.
    #[arg(long, default_value_t = 720)]
    short_side: usize,
    #[arg(long, default_value_t = 32)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    blocks: usize,
    #[arg(long, default_value_t = 16)]
    queries: usize,
    /// Comma-separated augmentation branches (identity, hflip, scale0.75, scale1.25).
    #[arg(long, value_delimiter = ',')]
    tta: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl EngineArgs {
    fn config(&self) -> Result<EngineConfig> {
        let tta = self
            .tta
            .iter()
            .map(|s| s.parse::<Augmentation>())
            .collect::<Result<Vec<_>>>()?;
        let c = EngineConfig {
            mem_interval: self.mem_interval,
            max_mem_frames: self.max_mem_frames,
            topk: self.topk,
            target_short_side: (self.short_side > 0).then_some(self.short_side),
            channels: self.channels,
            blocks: self.blocks,
            tta,
            seed: self.seed,
            weights_path: self.weights.clone(),
            ..EngineConfig::default()
        }
        .with_queries(self.queries);
        c.validate()?;
        Ok(c)
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on input errors, 2 on internal
/// contract violations.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match with_pool(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn with_pool<R: Send>(f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let threads = match std::env::var("MEMVOS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(Error::Config(format!("MEMVOS_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { input, output, engine } => run(&input, &output, &engine.config()?),
        Command::Eval { pred, gt } => {
            print!("{}", eval(&pred, &gt)?);
            Ok(())
        }
        Command::Synth { output, scene, seeds } => {
            let spec = scene.spec()?;
            for seed in seeds {
                io::write_sequence(&output, &synth_generate(&spec, seed)?)?;
            }
            Ok(())
        }
        Command::Bench {
            scene,
            r_grid,
            t_max_grid,
            k_grid,
            seeds,
            output,
            engine,
        } => {
            let ks = k_grid.iter().map(|k| parse_k(k)).collect::<Result<Vec<_>>>()?;
            let csv = bench(&scene.spec()?, &engine.config()?, &r_grid, &t_max_grid, &ks, &seeds)?;
            match output {
                Some(p) => fs::write(&p, csv).map_err(|e| Error::io(&p, e)),
                None => std::io::stdout()
                    .write_all(csv.as_bytes())
                    .map_err(|e| Error::io("<stdout>", e)),
            }
        }
    }
}

fn parse_k(s: &str) -> Result<Option<usize>> {
    if s == "all" {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(k) if k > 0 => Ok(Some(k)),
        _ => Err(Error::Config(format!("top-k must be a positive integer or `all`, got {s:?}"))),
    }
}

/// Segments every sequence under `input`, writing `<output>/<seq>/masks`.
/// When ground truth is available, `<output>/report.txt` lists the scores.
pub fn run(input: &Path, output: &Path, config: &EngineConfig) -> Result<()> {
    let weights = WeightSet::for_config(config)?;
    let dirs = io::list_sequences(input)?;
    let reports = dirs
        .par_iter()
        .map(|dir| -> Result<Option<String>> {
            let seq = io::load_sequence(dir)?;
            let pred = segment(&seq, config, &weights)?;
            io::write_masks(&output.join(&seq.name), &pred)?;
            match &seq.gt {
                Some(gt) => {
                    let ids = seq.first_annotation.object_ids();
                    if ids.is_empty() {
                        return Ok(None);
                    }
                    Ok(Some(format_sequence(&seq.name, &evaluate_sequence(&pred, gt, &ids)?)))
                }
                None => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let report: String = reports.into_iter().flatten().collect();
    if !report.is_empty() {
        let p = output.join("report.txt");
        fs::write(&p, report).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Per-sequence score lines followed by a leaderboard table with one row per
/// sequence.
pub fn eval(pred_root: &Path, gt_root: &Path) -> Result<String> {
    let mut out = String::new();
    let mut rows = Vec::new();
    for dir in io::list_sequences(gt_root)? {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let gt = io::load_masks(&dir)?;
        let pred = io::load_masks(&pred_root.join(&name))?;
        let ids = gt[0].object_ids();
        let report = evaluate_sequence(&pred, &gt, &ids)?;
        out.push_str(&format_sequence(&name, &report));
        rows.push(LeaderboardRow {
            name,
            j: report.overall.j,
            f: report.overall.f,
            jf: report.overall.jf_mean,
        });
    }
    let _ = writeln!(out);
    out.push_str(&leaderboard(&rows));
    Ok(out)
}

/// CSV of J, F and J&F for every `(r, T_max, k, seed)` combination. `None`
/// in `ks` means no top-k filtering.
pub fn bench(
    spec: &SynthSpec,
    base: &EngineConfig,
    rs: &[usize],
    t_maxes: &[usize],
    ks: &[Option<usize>],
    seeds: &[u64],
) -> Result<String> {
    let weights = WeightSet::for_config(base)?;
    let seqs = seeds
        .par_iter()
        .map(|&s| synth_generate(spec, s))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for &r in rs {
        for &t in t_maxes {
            for &k in ks {
                for i in 0..seqs.len() {
                    jobs.push((r, t, k, i));
                }
            }
        }
    }
    let lines = jobs
        .par_iter()
        .map(|&(r, t_max, k, i)| -> Result<String> {
            let config = EngineConfig {
                mem_interval: r,
                max_mem_frames: t_max,
                topk: k.unwrap_or(usize::MAX),
                ..base.clone()
            };
            config.validate()?;
            let seq = &seqs[i];
            let gt = seq.gt.as_ref().expect("synthetic sequences carry ground truth");
            let pred = segment(seq, &config, &weights)?;
            let m = evaluate_sequence(&pred, gt, &seq.first_annotation.object_ids())?.overall;
            let k = k.map_or_else(|| "all".to_string(), |k| k.to_string());
            Ok(format!("{r},{t_max},{k},{},{:.6},{:.6},{:.6}\n", seeds[i], m.j, m.f, m.jf_mean))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("r,t_max,topk,seed,J,F,JF\n");
    csv.extend(lines);
    Ok(csv)
}
