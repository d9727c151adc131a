//! Command-line front end: `track`, `eval`, `synth` and `render`.
//!
//! Exit status is 0 on success, 1 for usage and configuration errors and 2
//! for bad or missing data.

pub mod config;
pub mod frames;
pub mod overlay;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use image::RgbImage;
use serde_json::json;
use thiserror::Error;

use crate::features::ColorNamesTable;
use crate::foreground::{BackgroundModel, Mask};
use crate::metrics::{EvalReport, Record, TrajectorySet, DEFAULT_MATCH_THRESHOLD};
use crate::synth::{self, Scenario, SynthError, BUILTIN_NAMES};
use crate::tracking::{Manager, RunOutput};
use config::RunConfig;
use frames::FramePattern;
use overlay::TrackRow;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// A data error prefixed with the path it concerns.
fn data_at(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "kcf-mot", version, about = "Multi-object tracking with correlation filters and foreground blobs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track objects through a frame sequence and write trajectories.
    Track(TrackArgs),
    /// Score trajectories against ground truth with CLEAR MOT.
    Eval(EvalArgs),
    /// Generate a synthetic scenario: frames/, masks/ and gt.csv.
    Synth(SynthArgs),
    /// Draw trajectories onto their frames.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Frame images: a pattern such as `seq/%06d.png`, or a directory of `%06d.png`.
    #[arg(long)]
    pub frames: String,
    /// Foreground masks, same numbering as the frames. Without masks a
    /// running-average background subtractor is used.
    #[arg(long)]
    pub masks: Option<String>,
    /// Trajectory CSV to write.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Named blob-threshold preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// `key = value` parameter file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write annotated frames to this directory.
    #[arg(long)]
    pub render: Option<PathBuf>,
    /// Ground truth to score the run against.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Write a JSON summary (configuration, counts, timings, scores).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Color-name lookup table (CSV); the built-in table is used otherwise.
    #[arg(long)]
    pub color_names: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
}

/// Per-parameter overrides, named as in the config file.
#[derive(Debug, Default, Args)]
pub struct ParamFlags {
    /// Minimum region area (pixels).
    #[arg(long = "T_r", visible_alias = "t-r")]
    pub t_r: Option<u64>,
    /// Centroid distance for merging regions (pixels).
    #[arg(long = "T_c", visible_alias = "t-c")]
    pub t_c: Option<f64>,
    #[arg(long = "ratio_min", visible_alias = "ratio-min")]
    pub ratio_min: Option<f64>,
    #[arg(long = "ratio_max", visible_alias = "ratio-max")]
    pub ratio_max: Option<f64>,
    #[arg(long = "median_radius", visible_alias = "median-radius")]
    pub median_radius: Option<u32>,
    #[arg(long = "close_radius", visible_alias = "close-radius")]
    pub close_radius: Option<u32>,
    /// Lower area-ratio bound for trusting the filter box.
    #[arg(long = "T_ol", visible_alias = "t-ol")]
    pub t_ol: Option<f64>,
    /// Upper area-ratio bound for trusting the filter box.
    #[arg(long = "T_oh", visible_alias = "t-oh")]
    pub t_oh: Option<f64>,
    #[arg(long = "invisible_max", visible_alias = "invisible-max")]
    pub invisible_max: Option<u32>,
    #[arg(long = "min_lifetime", visible_alias = "min-lifetime")]
    pub min_lifetime: Option<u32>,
    #[arg(long = "redundancy_frames", visible_alias = "redundancy-frames")]
    pub redundancy_frames: Option<u32>,
    #[arg(long = "sigma_kernel", visible_alias = "sigma-kernel")]
    pub sigma_kernel: Option<f64>,
    #[arg(long = "lambda")]
    pub lambda: Option<f64>,
    #[arg(long = "learning_rate", visible_alias = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "output_sigma_factor", visible_alias = "output-sigma-factor")]
    pub output_sigma_factor: Option<f64>,
    #[arg(long = "padding")]
    pub padding: Option<f64>,
    #[arg(long = "cell")]
    pub cell: Option<u32>,
    /// Centroid distance below which a hypothesis can match ground truth.
    #[arg(long = "match_threshold", visible_alias = "match-threshold")]
    pub match_threshold: Option<f64>,
}

impl ParamFlags {
    /// The flags that were given, as `(key, value)` pairs.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        fn s<T: ToString>(key: &'static str, v: Option<T>) -> Option<(&'static str, String)> {
            v.map(|v| (key, v.to_string()))
        }
        [
            s("T_r", self.t_r),
            s("T_c", self.t_c),
            s("ratio_min", self.ratio_min),
            s("ratio_max", self.ratio_max),
            s("median_radius", self.median_radius),
            s("close_radius", self.close_radius),
            s("T_ol", self.t_ol),
            s("T_oh", self.t_oh),
            s("invisible_max", self.invisible_max),
            s("min_lifetime", self.min_lifetime),
            s("redundancy_frames", self.redundancy_frames),
            s("sigma_kernel", self.sigma_kernel),
            s("lambda", self.lambda),
            s("learning_rate", self.learning_rate),
            s("output_sigma_factor", self.output_sigma_factor),
            s("padding", self.padding),
            s("cell", self.cell),
            s("match_threshold", self.match_threshold),
        ]
        .into_iter()
        .flatten()
        .collect()
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth CSV (`frame,id,x,y,w,h[,class]`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Hypothesis CSV, e.g. the output of `track`.
    #[arg(long)]
    pub hyp: PathBuf,
    #[arg(long = "match_threshold", visible_alias = "match-threshold", default_value_t = DEFAULT_MATCH_THRESHOLD)]
    pub match_threshold: f64,
    /// JSON report path; defaults to the hypothesis path with `.eval.json`.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Built-in scenario name.
    #[arg(required_unless_present_any = ["list", "scenario"])]
    pub name: Option<String>,
    /// Scenario description in JSON instead of a built-in.
    #[arg(long, conflicts_with = "name")]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, required_unless_present = "list")]
    pub out: Option<PathBuf>,
    /// Print the built-in scenarios and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Frame images, as for `track`.
    #[arg(long)]
    pub frames: String,
    /// Trajectory CSV (`frame,id,x,y,w,h[,state]`).
    #[arg(long)]
    pub tracks: PathBuf,
    /// Output directory for annotated `NNNNNN.png` frames.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `args` (program name first), run the command and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Render(a) => render(a),
    }
}

/// Resolve flags, preset and config file into a [`RunConfig`].
pub fn track_config(a: &TrackArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(a.frames.clone(), a.output.clone());
    cfg.masks = a.masks.clone();
    cfg.render = a.render.clone();
    cfg.gt = a.gt.clone();
    let text = match &a.config {
        Some(p) => Some(
            fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    cfg.layer(a.preset.as_deref(), text.as_deref(), &a.params.pairs())?;
    Ok(cfg)
}

fn list_frames(pattern: &str) -> Result<(FramePattern, Vec<(u64, PathBuf)>), CliError> {
    let pat = FramePattern::parse(pattern).map_err(CliError::Usage)?;
    let found = pat.list().map_err(|e| CliError::Data(format!("{pattern}: {e}")))?;
    if found.is_empty() {
        return Err(CliError::Data(format!("no frames match {pattern}")));
    }
    Ok((pat, found))
}

fn load_rgb(path: &Path) -> Result<RgbImage, String> {
    image::open(path)
        .map(|i| i.to_rgb8())
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn ms_per_frame(d: Duration, frames: u64) -> f64 {
    d.as_secs_f64() * 1e3 / frames.max(1) as f64
}

fn track(a: TrackArgs) -> Result<(), CliError> {
    let cfg = track_config(&a)?;
    let table = match &a.color_names {
        Some(p) => ColorNamesTable::load(p).map_err(|e| data_at(p, e))?,
        None => ColorNamesTable::fallback(),
    };
    let (_, frame_files) = list_frames(&cfg.frames)?;
    let mask_files: Option<Vec<PathBuf>> = match &cfg.masks {
        Some(m) => {
            let pat = FramePattern::parse(m).map_err(CliError::Usage)?;
            let paths: Vec<PathBuf> = frame_files.iter().map(|(n, _)| pat.path(*n)).collect();
            if let Some(((n, _), p)) = frame_files.iter().zip(&paths).find(|(_, p)| !p.is_file()) {
                return Err(CliError::Data(format!("missing mask for frame {n}: {}", p.display())));
            }
            Some(paths)
        }
        None => None,
    };

    let mut manager = Manager::new(cfg.params, table).map_err(|e| CliError::Usage(e.to_string()))?;
    let jobs: Vec<(u64, PathBuf, Option<PathBuf>)> = frame_files
        .iter()
        .enumerate()
        .map(|(i, (n, p))| (*n, p.clone(), mask_files.as_ref().map(|m| m[i].clone())))
        .collect();
    let loaded = frames::prefetch(jobs, 2, |(n, frame, mask)| {
        let img = load_rgb(&frame)?;
        let mask = mask
            .map(|m| Mask::load(&m).map_err(|e| format!("{}: {e}", m.display())))
            .transpose()?;
        Ok::<_, String>((n, img, mask))
    });

    let start = Instant::now();
    let mut subtractor: Option<BackgroundModel> = None;
    let mut subtract_time = Duration::ZERO;
    let mut dims = None;
    for item in loaded {
        let (n, img, mask) = item.map_err(CliError::Data)?;
        let expected = *dims.get_or_insert(img.dimensions());
        if img.dimensions() != expected {
            return Err(CliError::Data(format!(
                "frame {n} is {}x{}, expected {}x{}",
                img.width(),
                img.height(),
                expected.0,
                expected.1
            )));
        }
        let mask = match mask {
            Some(m) => m,
            None => {
                let t = Instant::now();
                let m = subtractor.get_or_insert_with(|| BackgroundModel::new(&img)).subtract(&img);
                subtract_time += t.elapsed();
                m
            }
        };
        manager
            .process_frame(n, &img, &mask)
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    let out = manager.finish();
    let wall = start.elapsed();

    write_tracks(&cfg.output, &out).map_err(|e| data_at(&cfg.output, e))?;

    let frames = out.stats.frames;
    let fps = frames as f64 / wall.as_secs_f64().max(1e-9);
    let foreground = out.timings.foreground + subtract_time;
    let mut stdout = io::stdout().lock();
    let s = &out.stats;
    let _ = writeln!(
        stdout,
        "frames processed   {frames}\n\
         tracks created     {}\n\
         tracks finalized   {}\n\
         tracks discarded   {}\n\
         redundant deleted  {}\n\
         reassigned         {}\n\
         wall time          {:.2} s\n\
         throughput         {fps:.1} FPS\n\
         foreground         {:.2} ms/frame\n\
         kcf                {:.2} ms/frame\n\
         association        {:.2} ms/frame",
        s.created,
        s.finalized,
        s.discarded,
        s.redundant_deleted,
        s.reassigned,
        wall.as_secs_f64(),
        ms_per_frame(foreground, frames),
        ms_per_frame(out.timings.kcf, frames),
        ms_per_frame(out.timings.association, frames),
    );

    let eval = match &cfg.gt {
        Some(gt_path) => {
            let gt = TrajectorySet::read_csv(gt_path).map_err(|e| data_at(gt_path, e))?;
            let report = EvalReport::new(&gt, &hypotheses(&out), cfg.match_threshold);
            let _ = write!(stdout, "\n{}", report.to_table());
            Some(report)
        }
        None => None,
    };

    if let Some(p) = &cfg.render {
        let rows: Vec<TrackRow> = out
            .rows()
            .into_iter()
            .map(|(frame, id, pt)| TrackRow {
                frame,
                id,
                bbox: pt.bbox,
                state: Some(pt.state),
            })
            .collect();
        render_rows(&frame_files, &rows, p)?;
    }

    if let Some(p) = &a.report {
        let summary = json!({
            "config": cfg,
            "stats": out.stats,
            "wall_seconds": wall.as_secs_f64(),
            "fps": fps,
            "ms_per_frame": {
                "foreground": ms_per_frame(foreground, frames),
                "kcf": ms_per_frame(out.timings.kcf, frames),
                "association": ms_per_frame(out.timings.association, frames),
            },
            "eval": eval,
        });
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        fs::write(p, text + "\n").map_err(|e| data_at(p, e))?;
    }
    Ok(())
}

fn hypotheses(out: &RunOutput) -> TrajectorySet {
    TrajectorySet::from_records(out.rows().into_iter().map(|(f, id, p)| Record::new(f, id, p.bbox)))
        .expect("tracker output has one box per id and frame")
}

/// Write `frame,id,x,y,w,h,state` rows ordered by frame then id.
pub fn write_tracks(path: &Path, out: &RunOutput) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| e.to_string())?;
    w.write_record(["frame", "id", "x", "y", "w", "h", "state"])
        .map_err(|e| e.to_string())?;
    for (frame, id, p) in out.rows() {
        let b = p.bbox;
        w.serialize((frame, id, b.x(), b.y(), b.w(), b.h(), p.state.as_str()))
            .map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    if !(a.match_threshold > 0.0) {
        return Err(CliError::Usage("match_threshold must be > 0".into()));
    }
    let read = |p: &Path| TrajectorySet::read_csv(p).map_err(|e| data_at(p, e));
    let gt = read(&a.gt)?;
    let hyp = read(&a.hyp)?;
    let report = EvalReport::new(&gt, &hyp, a.match_threshold);
    print!("{}", report.to_table());
    let json_path = a.json.unwrap_or_else(|| a.hyp.with_extension("eval.json"));
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&json_path, text + "\n").map_err(|e| data_at(&json_path, e))?;
    Ok(())
}

/// One line per built-in scenario.
pub fn catalog() -> String {
    BUILTIN_NAMES
        .iter()
        .map(|name| {
            let s = synth::builtin(name, 0).expect("built-in scenario exists");
            format!(
                "  {:<14} {}x{}, {} frames, {} actors\n",
                name,
                s.width,
                s.height,
                s.frames,
                s.actors.len()
            )
        })
        .collect()
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    if a.list {
        print!("{}", catalog());
        return Ok(());
    }
    let scenario: Scenario = match (&a.scenario, &a.name) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| data_at(p, e))?;
            let s: Scenario =
                serde_json::from_str(&text).map_err(|e| data_at(p, e))?;
            s.with_seed(a.seed)
        }
        (None, Some(name)) => match synth::builtin(name, a.seed) {
            Ok(s) => s,
            Err(SynthError::Unknown { name, .. }) => {
                eprint!("unknown scenario {name:?}; available scenarios:\n{}", catalog());
                return Err(CliError::Usage(format!("unknown scenario {name:?}")));
            }
            Err(e) => return Err(CliError::Data(e.to_string())),
        },
        (None, None) => unreachable!("clap requires a name or a scenario file"),
    };
    let out = a.out.expect("clap requires --out");
    scenario.write_to_dir(&out).map_err(|e| match e {
        SynthError::Invalid(_) => CliError::Usage(e.to_string()),
        e => data_at(&out, e),
    })?;
    println!(
        "wrote {} frames of {:?} (seed {}) to {}",
        scenario.frames,
        scenario.name,
        scenario.seed,
        out.display()
    );
    Ok(())
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let (_, frame_files) = list_frames(&a.frames)?;
    let rows = overlay::read_rows(&a.tracks).map_err(CliError::Data)?;
    render_rows(&frame_files, &rows, &a.out)
}

/// Annotate each frame with its rows and save it as `out/NNNNNN.png`.
fn render_rows(frame_files: &[(u64, PathBuf)], rows: &[TrackRow], out: &Path) -> Result<(), CliError> {
    let grouped = overlay::by_frame(rows);
    if let Some(f) = grouped.keys().find(|f| frame_files.binary_search_by_key(*f, |x| x.0).is_err()) {
        return Err(CliError::Data(format!("trajectories refer to frame {f}, which has no image")));
    }
    fs::create_dir_all(out).map_err(|e| data_at(out, e))?;
    for (n, path) in frame_files {
        let mut img = load_rgb(path).map_err(CliError::Data)?;
        if let Some(rs) = grouped.get(n) {
            overlay::annotate(&mut img, rs);
        }
        let dest = out.join(format!("{n:06}.png"));
        img.save(&dest)
            .map_err(|e| data_at(&dest, e))?;
    }
    Ok(())
}
