//! `courtsort` command line: track, eval, simulate, sweep, plot.
//!
//! Exit codes: 0 success, 1 usage (bad arguments or parameter values),
//! 2 malformed input files, 3 runtime failures. Errors go to stderr as one
//! line, `courtsort: <kind> error: <reason>`. `COURTSORT_LOG` sets log
//! verbosity with `env_logger` filter syntax (default `warn`).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use courtsort::io::{
    format_correspondences, format_detection_rows, format_embeddings, format_events, format_gt_rows, format_tracks,
    parse_correspondences, parse_homography, read_embeddings, read_mot, read_text, read_tracks, write_text, IoError,
};
use courtsort::metrics::{format_report, format_tsv};
use courtsort::pipeline::{
    build_frames, calibrate, evaluate_rows, format_summary, preset, run_sweep, run_track, EvalOptions, PipelineError,
    PreparedSequence, PRESETS,
};
use courtsort::plot::render_court;
use courtsort::simgen::{format_event_annotations, simulate, ScenarioSpec, SimError};
use courtsort::tracker::{CorrectionMode, TrackerConfig};
use log::info;

use config::{apply_sets, InputPaths, RunConfig};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Parse(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn report(&self) -> String {
        let (kind, msg) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Parse(m) => ("parse", m),
            Failure::Runtime(m) => ("runtime", m),
        };
        let line: Vec<&str> = msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        format!("courtsort: {kind} error: {}", line.join(" | "))
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse { .. } => Failure::Parse(e.to_string()),
            IoError::Io { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSpec(_) => Failure::Usage(e.to_string()),
            SimError::Infeasible { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(e) => e.into(),
            PipelineError::Sim(e) => e.into(),
            PipelineError::Config(m) => Failure::Usage(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "courtsort", version, about = "Court-plane multi-object tracking for basketball video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track sequences and write tracks, occlusion events and a summary.
    Track(TrackArgs),
    /// Score a tracking file against ground truth (HOTA and CLEAR).
    Eval(EvalArgs),
    /// Generate a synthetic sequence directory.
    Simulate(SimulateArgs),
    /// Mean HOTA over a grid of association gate and re-acquisition distance.
    Sweep(SweepArgs),
    /// Draw trajectories on a top-view court as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TunerArgs {
    /// TOML run configuration with `[input]` and `[tracker]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Stage preset (`paper` resets every threshold to its default).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    no_bgr: bool,
    #[arg(long)]
    no_rlli: bool,
    #[arg(long)]
    no_sto: bool,
    #[arg(long)]
    no_dto: bool,
    /// Apply swap corrections going forward only.
    #[arg(long)]
    streaming: bool,
    /// Association gate, cm.
    #[arg(long)]
    gate: Option<f64>,
    /// Re-acquisition distance gate, cm.
    #[arg(long)]
    rlli_dist: Option<f64>,
    /// Any tracker parameter, e.g. `--set kalman.measurement_sigma=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EvalFilter {
    /// Score against every ground-truth class instead of players only.
    #[arg(long)]
    all_classes: bool,
    /// Drop predictions on referees and spectators instead of counting them
    /// as false positives.
    #[arg(long)]
    ignore_distractors: bool,
}

impl EvalFilter {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            player_class: if self.all_classes { None } else { Some(1) },
            ignore_distractors: self.ignore_distractors,
        }
    }
}

#[derive(Args)]
struct TrackArgs {
    /// Sequence directories (det.txt, embeddings.txt, correspondences.txt
    /// or homography.txt, gt.txt). Each gets its own output subdirectory.
    dirs: Vec<PathBuf>,
    #[arg(long)]
    detections: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    correspondences: Option<PathBuf>,
    #[arg(long)]
    homography: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write court.svg.
    #[arg(long)]
    plot: bool,
    #[command(flatten)]
    tuner: TunerArgs,
    #[command(flatten)]
    filter: EvalFilter,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long, default_value = "sequence")]
    name: String,
    /// Tab-separated output.
    #[arg(long)]
    tsv: bool,
    #[command(flatten)]
    filter: EvalFilter,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Scenario TOML; without it the benchmark scenario is used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<u32>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sequence directories with ground truth.
    dirs: Vec<PathBuf>,
    /// Without directories, sweep over this many benchmark simulations.
    #[arg(long, default_value_t = 1)]
    simulate: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [200.0, 220.0, 240.0, 260.0, 280.0, 300.0])]
    gates: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [150.0, 170.0, 190.0, 210.0, 230.0, 250.0])]
    rlli_dists: Vec<f64>,
    /// Also write the table here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tuner: TunerArgs,
    #[command(flatten)]
    filter: EvalFilter,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    first: Option<u32>,
    #[arg(long)]
    last: Option<u32>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COURTSORT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let f = Failure::Usage(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", f.report());
            return ExitCode::from(f.code());
        }
    };
    let result = match cli.command {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.report());
            ExitCode::from(f.code())
        }
    }
}

/// Config file, then preset, then flags, then `--set`.
fn resolve_tracker(t: &TunerArgs, file: &RunConfig) -> Result<TrackerConfig<f64>, Failure> {
    let mut cfg = file.tracker()?;
    match t.preset.as_deref() {
        None => {}
        Some("paper") => cfg = TrackerConfig::default(),
        Some(name) => {
            cfg.features = preset(name).ok_or_else(|| {
                Failure::Usage(format!("unknown preset {name:?}; known: paper, {}", PRESETS.join(", ")))
            })?
        }
    }
    cfg.features.bgr &= !t.no_bgr;
    cfg.features.rlli &= !t.no_rlli;
    cfg.features.sto &= !t.no_sto;
    cfg.features.dto &= !t.no_dto;
    if t.streaming {
        cfg.mode = CorrectionMode::Streaming;
    }
    if let Some(g) = t.gate {
        cfg.gate = g;
    }
    if let Some(d) = t.rlli_dist {
        cfg.rlli_dist = d;
    }
    let cfg = apply_sets(cfg, &t.set)?;
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn load_config(t: &TunerArgs) -> Result<RunConfig, Failure> {
    t.config.as_deref().map_or(Ok(RunConfig::default()), RunConfig::load)
}

fn load_sequence(p: &InputPaths) -> Result<PreparedSequence, Failure> {
    let det = p
        .detections
        .as_ref()
        .ok_or_else(|| Failure::Usage("no detections given (--detections or a sequence directory)".into()))?;
    let rows = read_mot(det)?;
    let embeddings = p.embeddings.as_deref().map(read_embeddings).transpose()?;
    let homography = match (&p.homography, &p.correspondences) {
        (Some(h), _) => parse_homography(&read_text(h)?, &h.display().to_string())?,
        (None, Some(c)) => calibrate(&parse_correspondences(&read_text(c)?, &c.display().to_string())?)?,
        (None, None) => return Err(Failure::Usage(format!("{}: need correspondences or a homography", det.display()))),
    };
    let gt = p.gt.as_deref().map(read_mot).transpose()?;
    let last = gt.as_ref().and_then(|g| g.iter().map(|r| r.frame).max());
    let name = p.name.clone().unwrap_or_else(|| "sequence".into());
    Ok(PreparedSequence {
        frames: build_frames(&rows, embeddings.as_ref(), &homography, last),
        name,
        gt,
    })
}

fn track_one(
    seq: &PreparedSequence,
    cfg: &TrackerConfig<f64>,
    opts: &EvalOptions,
    out: &Path,
    plot: bool,
) -> Result<String, Failure> {
    let result = run_track(seq, cfg)?;
    write_text(&out.join("tracks.txt"), &format_tracks(&result.rows))?;
    write_text(&out.join("events.txt"), &format_events(&result.events))?;
    let mut summary = format_summary(&seq.name, &result);
    if let Some(gt) = &seq.gt {
        summary += &format_report(&[evaluate_rows(&seq.name, gt, &result.rows, opts)?]);
    }
    write_text(&out.join("summary.txt"), &summary)?;
    if plot {
        let last = result.rows.iter().map(|r| r.frame).max().unwrap_or(0);
        write_text(&out.join("court.svg"), &render_court(&result.rows, 0, last))?;
    }
    info!("{}: {} rows written to {}", seq.name, result.rows.len(), out.display());
    Ok(summary)
}

fn track(a: TrackArgs) -> Result<(), Failure> {
    let file = load_config(&a.tuner)?;
    let cfg = resolve_tracker(&a.tuner, &file)?;
    let out = a
        .out
        .clone()
        .or(file.output.clone())
        .ok_or_else(|| Failure::Usage("no output directory (--out or `output` in the config)".into()))?;
    let plot = a.plot || file.plot;
    let opts = a.filter.options();
    let flags = InputPaths {
        detections: a.detections,
        embeddings: a.embeddings,
        correspondences: a.correspondences,
        homography: a.homography,
        gt: a.gt,
        name: a.name,
    };

    if a.dirs.is_empty() {
        let seq = load_sequence(&file.input.clone().overlay(flags))?;
        print!("{}", track_one(&seq, &cfg, &opts, &out, plot)?);
        return Ok(());
    }
    // One thread per sequence; each writes only its own directory.
    let results: Vec<Result<String, Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = a
            .dirs
            .iter()
            .map(|dir| {
                let (cfg, opts, out) = (&cfg, &opts, &out);
                s.spawn(move || {
                    let seq = load_sequence(&InputPaths::from_dir(dir))?;
                    track_one(&seq, cfg, opts, &out.join(&seq.name), plot)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Failure::Runtime("worker panicked".into()))))
            .collect()
    });
    for r in results {
        print!("{}", r?);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let gt = read_mot(&a.gt)?;
    let pred = read_tracks(&a.tracks)?;
    let result = evaluate_rows(&a.name, &gt, &pred, &a.filter.options())?;
    print!("{}", if a.tsv { format_tsv(&[result]) } else { format_report(&[result]) });
    Ok(())
}

fn simulate_cmd(a: SimulateArgs) -> Result<(), Failure> {
    let mut spec = match &a.scenario {
        Some(path) => {
            let text = read_text(path)?;
            toml::from_str::<ScenarioSpec>(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?
        }
        None => ScenarioSpec::benchmark(a.seed.unwrap_or(0)),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(frames) = a.frames {
        spec.frames = frames;
    }
    let (gt, out) = simulate(&spec)?;
    let emb: Vec<_> = out.embeddings.iter().map(|(f, k, e)| (*f, *k, e)).collect();
    let dir = &a.out;
    write_text(&dir.join("det.txt"), &format_detection_rows(&out.detections))?;
    write_text(&dir.join("embeddings.txt"), &format_embeddings(&emb))?;
    write_text(&dir.join("gt.txt"), &format_gt_rows(&out.gt))?;
    write_text(&dir.join("correspondences.txt"), &format_correspondences(&out.correspondences))?;
    write_text(&dir.join("events.txt"), &format_event_annotations(&gt.events))?;
    write_text(&dir.join("scenario.toml"), &spec.to_toml())?;
    println!(
        "{}: {} frames, {} detections, {} events",
        spec.name,
        spec.frames,
        out.detections.len(),
        gt.events.len()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    if a.gates.is_empty() || a.rlli_dists.is_empty() {
        return Err(Failure::Usage("empty sweep grid".into()));
    }
    let file = load_config(&a.tuner)?;
    let base = resolve_tracker(&a.tuner, &file)?;
    let seqs: Vec<PreparedSequence> = if a.dirs.is_empty() {
        (0..a.simulate)
            .map(|seed| {
                let (_, out) = simulate(&ScenarioSpec::benchmark(seed))?;
                Ok(courtsort::pipeline::prepare_simulated(&format!("sim{seed:03}"), &out)?)
            })
            .collect::<Result<_, Failure>>()?
    } else {
        a.dirs.iter().map(|d| load_sequence(&InputPaths::from_dir(d))).collect::<Result<_, _>>()?
    };
    if let Some(s) = seqs.iter().find(|s| s.gt.is_none()) {
        return Err(Failure::Usage(format!("{}: sweep needs gt.txt", s.name)));
    }
    let table = run_sweep(&seqs, &base, &a.gates, &a.rlli_dists, &a.filter.options())?;
    let text = format!("{}spread {:.2}\n", table.format(), table.spread());
    if let Some(path) = &a.out {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn plot(a: PlotArgs) -> Result<(), Failure> {
    let rows = read_tracks(&a.tracks)?;
    let first = a.first.unwrap_or_else(|| rows.iter().map(|r| r.frame).min().unwrap_or(0));
    let last = a.last.unwrap_or_else(|| rows.iter().map(|r| r.frame).max().unwrap_or(0));
    if first > last {
        return Err(Failure::Usage(format!("empty frame range {first}..{last}")));
    }
    write_text(&a.out, &render_court(&rows, first, last))?;
    Ok(())
}
