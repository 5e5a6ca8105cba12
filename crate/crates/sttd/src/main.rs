//! Command-line surface: detection runs, synthetic data generation,
//! metric evaluation, ROC sweeps, and unfolding rank analysis.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sttd::config::{parse_scene_spec, RunConfig};
use sttd::error::Error;
use sttd::imgio;
use sttd::metrics;
use sttd::pipeline::{self, Frame};
use sttd::synth;
use sttd::tensor::{unfold, Tensor3};

#[derive(Parser)]
#[command(name = "sttd", version, about = "Small-target detection in image sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand; flags override the config file.
#[derive(Args, Clone)]
struct CommonOpts {
    /// Config file (flat key=value, '#' comments)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Thread cap (default: all cores; env STTD_THREADS as fallback)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frames per decomposition group
    #[arg(long = "L", global = true)]
    group_len: Option<usize>,
    /// Sparsity tuning constant
    #[arg(long = "H", global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    lambda_tv: Option<f64>,
    #[arg(long, global = true)]
    lambda3: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Segmentation threshold slope
    #[arg(long, global = true)]
    k: Option<f64>,
    /// Segmentation threshold floor
    #[arg(long, global = true)]
    vmin: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(long, global = true)]
    zeta: Option<f64>,
    /// laplace | plain_tnn
    #[arg(long, global = true)]
    surrogate: Option<String>,
    /// asttv | sttv | none
    #[arg(long, global = true)]
    tv_mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a frame directory and write detections
    Detect {
        input_dir: PathBuf,
        output_dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Generate a synthetic sequence from a scene spec file
    Synth {
        spec_file: PathBuf,
        output_dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Score detection outputs against ground truth
    Eval {
        results_dir: PathBuf,
        truth_file: PathBuf,
        /// Directory with the original input frames (for gain metrics)
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Threshold-swept ROC curve from detection outputs
    Roc {
        results_dir: PathBuf,
        truth_file: PathBuf,
        /// Number of thresholds to sweep
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Singular-value spectra of the three unfoldings of a frame stack
    Rank {
        input_dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn build_config(common: &CommonOpts) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_text(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($field:expr, $key:literal) => {
            if let Some(v) = &$field {
                cfg.set($key, &v.to_string())?;
            }
        };
    }
    apply!(common.group_len, "L");
    apply!(common.h, "H");
    apply!(common.lambda_tv, "lambda_tv");
    apply!(common.lambda3, "lambda3");
    apply!(common.delta, "delta");
    apply!(common.eps, "eps");
    apply!(common.k, "k");
    apply!(common.vmin, "vmin");
    apply!(common.max_iter, "max_iter");
    apply!(common.zeta, "zeta");
    apply!(common.surrogate, "surrogate");
    apply!(common.tv_mode, "tv_mode");
    apply!(common.seed, "seed");
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    } else if cfg.threads.is_none() {
        if let Ok(env) = std::env::var("STTD_THREADS") {
            cfg.threads = Some(
                env.parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad STTD_THREADS '{env}'")))?,
            );
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(cfg: &RunConfig) -> Result<(), Error> {
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunReport<'a> {
    config: &'a RunConfig,
    n_frames: usize,
    frame_rows: usize,
    frame_cols: usize,
    groups: &'a [pipeline::GroupDiagnostics],
}

fn cmd_detect(input_dir: &Path, output_dir: &Path, cfg: &RunConfig) -> Result<(), Error> {
    let seq = imgio::load_dir(input_dir)?;
    let started = Instant::now();
    let result = pipeline::detect(&seq, &cfg.solver, cfg.k, cfg.vmin)?;
    // timing goes to stderr only; the written outputs stay byte-identical
    // across reruns
    eprintln!(
        "decomposed {} frames in {} groups in {:.2}s",
        seq.len(),
        result.groups.len(),
        started.elapsed().as_secs_f64()
    );
    fs::create_dir_all(output_dir)?;
    for (f, ((target, background), mask)) in result
        .target
        .iter()
        .zip(&result.background)
        .zip(&result.masks)
        .enumerate()
    {
        imgio::write_pgm(&output_dir.join(format!("target_{f:06}.pgm")), target, 16)?;
        imgio::write_pgm(&output_dir.join(format!("background_{f:06}.pgm")), background, 16)?;
        imgio::write_mask_pgm(&output_dir.join(format!("mask_{f:06}.pgm")), mask)?;
    }
    let mut rows = Vec::new();
    for (f, comps) in result.components.iter().enumerate() {
        for c in comps {
            rows.push(format!(
                "{f},{},{},{},{}",
                imgio::fmt(c.centroid_row),
                imgio::fmt(c.centroid_col),
                c.pixels,
                imgio::fmt(c.peak)
            ));
        }
    }
    imgio::write_csv(&output_dir.join("components.csv"), "frame,row,col,pixels,peak", &rows)?;
    let (rows_px, cols_px) = seq.frame_dims();
    let report = RunReport {
        config: cfg,
        n_frames: seq.len(),
        frame_rows: rows_px,
        frame_cols: cols_px,
        groups: &result.groups,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    json.push('\n');
    fs::write(output_dir.join("run.json"), json)?;
    Ok(())
}

fn cmd_synth(spec_file: &Path, output_dir: &Path, cfg: &RunConfig) -> Result<(), Error> {
    let mut spec = parse_scene_spec(&fs::read_to_string(spec_file)?)?;
    if cfg.seed != 0 {
        spec.seed = cfg.seed;
    }
    let (seq, truth) = synth::generate(&spec)?;
    fs::create_dir_all(output_dir)?;
    for (f, frame) in seq.frames().iter().enumerate() {
        imgio::write_pgm(&output_dir.join(format!("frame_{f:06}.pgm")), frame, 16)?;
    }
    imgio::write_truth(&output_dir.join("truth.csv"), &truth)?;
    Ok(())
}

/// Detection outputs (`target_*.pgm`) from a results directory, in frame
/// order.
fn load_targets(results_dir: &Path) -> Result<Vec<Frame>, Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(results_dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("target_") && n.ends_with(".pgm"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Format {
            path: results_dir.display().to_string(),
            message: "no target_*.pgm files found".into(),
        });
    }
    paths.iter().map(|p| imgio::read_pgm(p).map(|(f, _)| f)).collect()
}

fn roc_rows(points: &[metrics::RocPoint]) -> Vec<String> {
    points
        .iter()
        .map(|p| format!("{},{},{}", imgio::fmt(p.threshold), imgio::fmt(p.fa), imgio::fmt(p.pd)))
        .collect()
}

fn cmd_eval(
    results_dir: &Path,
    truth_file: &Path,
    input_dir: &Path,
    cfg: &RunConfig,
) -> Result<(), Error> {
    let outputs = load_targets(results_dir)?;
    let inputs = imgio::load_dir(input_dir)?;
    if inputs.len() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} frames", outputs.len()),
            got: format!("{} input frames", inputs.len()),
        });
    }
    let truth = imgio::read_truth(truth_file, outputs.len())?;
    let report = metrics::evaluate(
        inputs.frames(),
        &outputs,
        &truth,
        cfg.geometry(),
        101,
        cfg.match_radius,
    );
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    json.push('\n');
    fs::write(results_dir.join("metrics.json"), json)?;
    let rows: Vec<String> = report
        .per_target
        .iter()
        .map(|m| {
            format!(
                "{},{},{},{},{},{},{}",
                m.frame,
                m.target,
                imgio::fmt(m.lsnrg),
                imgio::fmt(m.bsf),
                imgio::fmt(m.scrg),
                imgio::fmt(m.cg),
                m.clipped
            )
        })
        .collect();
    imgio::write_csv(
        &results_dir.join("metrics.csv"),
        "frame,target,lsnrg,bsf,scrg,cg,clipped",
        &rows,
    )?;
    imgio::write_csv(&results_dir.join("roc.csv"), "threshold,fa,pd", &roc_rows(&report.roc))?;
    Ok(())
}

fn cmd_roc(
    results_dir: &Path,
    truth_file: &Path,
    points: usize,
    cfg: &RunConfig,
) -> Result<(), Error> {
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 ROC points".into()));
    }
    let outputs = load_targets(results_dir)?;
    let truth = imgio::read_truth(truth_file, outputs.len())?;
    let curve = metrics::roc(&outputs, &truth, points, cfg.match_radius);
    imgio::write_csv(&results_dir.join("roc.csv"), "threshold,fa,pd", &roc_rows(&curve))?;
    Ok(())
}

fn cmd_rank(input_dir: &Path, cfg: &RunConfig) -> Result<(), Error> {
    let seq = imgio::load_dir(input_dir)?;
    let l = cfg.solver.group_len;
    if seq.len() < l {
        return Err(Error::SequenceTooShort { needed: l, got: seq.len() });
    }
    let (rows, cols) = seq.frame_dims();
    let mut stack = Tensor3::zeros(rows, cols, l);
    for k in 0..l {
        stack.slice_mut(k).copy_from_slice(seq.frame(k).data());
    }
    for mode in 1..=3 {
        let m = unfold(&stack, mode);
        let sv = m.svd(false, false).singular_values;
        let rows: Vec<String> =
            sv.iter().enumerate().map(|(i, s)| format!("{i},{}", imgio::fmt(*s))).collect();
        imgio::write_csv(&input_dir.join(format!("rank_mode{mode}.csv")), "index,sigma", &rows)?;
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Detect { input_dir, output_dir, common } => {
            let cfg = build_config(common)?;
            init_threads(&cfg)?;
            cmd_detect(input_dir, output_dir, &cfg)
        }
        Command::Synth { spec_file, output_dir, common } => {
            let cfg = build_config(common)?;
            cmd_synth(spec_file, output_dir, &cfg)
        }
        Command::Eval { results_dir, truth_file, input, common } => {
            let cfg = build_config(common)?;
            cmd_eval(results_dir, truth_file, input, &cfg)
        }
        Command::Roc { results_dir, truth_file, points, common } => {
            let cfg = build_config(common)?;
            cmd_roc(results_dir, truth_file, *points, &cfg)
        }
        Command::Rank { input_dir, common } => {
            let cfg = build_config(common)?;
            cmd_rank(input_dir, &cfg)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Format { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
