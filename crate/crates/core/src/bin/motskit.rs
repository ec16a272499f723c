use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Parser, Subcommand, ValueEnum};

use motskit::adapter::{AdapterProcess, SharedAdapter};
use motskit::association::Detection;
use motskit::config::TrackerConfig;
use motskit::error::Error;
use motskit::experiments::{ablate, sweep_window};
use motskit::io;
use motskit::metrics::{evaluate, EvalInput, EvalMode};
use motskit::pipeline::{run_sequence, RunOutput};
use motskit::segmenter::Detector;
use motskit::synth::{self, generate_scene, SceneSpec, SynthDetector, SynthSegmenter};

#[derive(Parser)]
#[command(name = "motskit", version, about = "Mask-based multi-object tracking and evaluation")]
struct Cli {
    /// Tracker configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of every scene.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SegmenterKind {
    Synth,
    Adapter,
}

#[derive(Subcommand)]
enum Cmd {
    /// Track one sequence and write MOTS, MOT and run statistics.
    Track {
        /// Scene JSON file or the name of a built-in scene.
        #[arg(long)]
        scene: Option<String>,
        /// Detection file; defaults to the adapter or the synthetic detector.
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Command line of an adapter process.
        #[arg(long)]
        adapter: Option<String>,
        #[arg(long, value_enum, default_value = "synth")]
        segmenter: SegmenterKind,
        /// Frame size and length when no scene is given.
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Score a MOTS (mask) or MOT (box) result file against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value = "mask")]
        mode: ModeArg,
        /// Classes to report; defaults to every class present.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<u32>,
    },
    /// Write scene specs, ground truth and synthetic detections.
    Synth {
        /// Built-in scene names; all standard scenes when empty.
        #[arg(long, value_delimiter = ',')]
        scenes: Vec<String>,
        /// Use the noise-free, occlusion-free corpus.
        #[arg(long)]
        perfect: bool,
    },
    /// HOTA per class with quality gating and reinforcement toggled.
    Ablate {
        /// Directory of scene JSON files; the standard corpus when absent.
        #[arg(long)]
        scene_corpus: Option<PathBuf>,
    },
    /// HOTA and retained memory per memory window size (0 = unbounded).
    SweepWindow {
        #[arg(long)]
        scene_corpus: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "3,6,9,16,30,0")]
        windows: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mask,
    Bbox,
}

enum Fail {
    Usage(String),
    Data(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            Fail::Data(e)
        } else {
            Fail::Usage(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail::Usage(msg.into())
}

fn write_file(path: &Path, text: &str) -> CliResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Fail::Data(Error::Io {
            path: dir.into(),
            source: e,
        }))?;
    }
    fs::write(path, text).map_err(|e| {
        Fail::Data(Error::Io {
            path: path.into(),
            source: e,
        })
    })?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load_config(path: Option<&Path>) -> CliResult<TrackerConfig> {
    match path {
        None => Ok(TrackerConfig::default()),
        Some(p) => TrackerConfig::load(p).map_err(|e| usage(format!("config {}: {e}", p.display()))),
    }
}

fn builtin_scene(name: &str) -> Option<SceneSpec> {
    synth::standard_corpus()
        .into_iter()
        .chain(synth::perfect_world_corpus())
        .find(|s| s.name == name)
}

fn load_scene(arg: &str, seed: Option<u64>) -> CliResult<SceneSpec> {
    let mut spec = if Path::new(arg).is_file() {
        SceneSpec::load(arg)?
    } else {
        builtin_scene(arg).ok_or_else(|| usage(format!("no scene file or built-in scene named {arg:?}")))?
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn load_scenes(dir: Option<&Path>, seed: Option<u64>) -> CliResult<Vec<SceneSpec>> {
    let mut scenes = match dir {
        Some(d) => synth::corpus::load_corpus(d)?,
        None => synth::standard_corpus(),
    };
    if let Some(s) = seed {
        for spec in &mut scenes {
            spec.seed = s;
        }
    }
    Ok(scenes)
}

fn write_run(out_dir: &Path, out: &RunOutput) -> CliResult {
    write_file(&out_dir.join("results_mots.txt"), &io::write_mots_results(&out.trajectories)?)?;
    write_file(&out_dir.join("results_mot.txt"), &io::write_mot_results(&out.trajectories)?)?;
    let stats = serde_json::to_string_pretty(&out.stats).map_err(Error::from)?;
    write_file(&out_dir.join("run_stats.json"), &stats)?;
    println!(
        "{} frames, {} trajectories, {} tracks created, peak memory {} entries",
        out.stats.frames,
        out.trajectories.len(),
        out.stats.tracks_created,
        out.stats.peak_memory_entries
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn track(
    cli: &Cli,
    scene: Option<&str>,
    detections: Option<&Path>,
    adapter: Option<&str>,
    segmenter: SegmenterKind,
    dims: (Option<usize>, Option<usize>, Option<usize>),
) -> CliResult {
    if segmenter == SegmenterKind::Adapter && adapter.is_none() {
        return Err(usage("--segmenter adapter needs --adapter"));
    }
    if segmenter == SegmenterKind::Synth && scene.is_none() {
        return Err(usage("the synthetic segmenter needs --scene"));
    }
    let cfg = load_config(cli.config.as_deref())?;
    let spec = scene.map(|s| load_scene(s, cli.seed)).transpose()?;
    let gt = spec.as_ref().map(generate_scene).transpose()?;
    let (width, height, n_frames) = match &gt {
        Some(g) => (g.width, g.height, g.frames.len()),
        None => match dims {
            (Some(w), Some(h), Some(n)) => (w, h, n),
            _ => return Err(usage("without --scene, give --width, --height and --frames")),
        },
    };
    let mut file_dets = detections.map(io::read_detections).transpose()?;

    let out = match (segmenter, adapter) {
        (SegmenterKind::Synth, _) => {
            let (spec, gt) = (spec.as_ref().unwrap(), gt.as_ref().unwrap());
            let mut seg = SynthSegmenter::new(gt);
            let mut synth_det;
            let mut proc;
            let det: &mut dyn Detector = if let Some(d) = file_dets.as_mut() {
                d
            } else if let Some(cmd) = adapter {
                proc = spawn_adapter(cmd, width, height, n_frames)?;
                &mut proc
            } else {
                synth_det = SynthDetector::new(gt, spec.noise.clone(), spec.seed);
                &mut synth_det
            };
            run_sequence(width, height, n_frames, det, &mut seg, &cfg)?
        }
        (SegmenterKind::Adapter, Some(cmd)) => {
            let proc = spawn_adapter(cmd, width, height, n_frames)?;
            run_with_adapter(proc, file_dets.as_mut(), width, height, n_frames, &cfg)?
        }
        (SegmenterKind::Adapter, None) => unreachable!(),
    };
    if let Some(e) = out.aborted {
        return Err(Fail::Data(e));
    }
    write_run(&cli.out_dir, &out)
}

fn spawn_adapter(cmd: &str, width: usize, height: usize, n_frames: usize) -> CliResult<AdapterProcess> {
    let mut parts = cmd.split_whitespace();
    let prog = parts.next().ok_or_else(|| usage("--adapter is empty"))?;
    let mut command = Command::new(prog);
    command.args(parts);
    Ok(AdapterProcess::spawn(command, width, height, n_frames)?)
}

fn run_with_adapter(
    proc: AdapterProcess,
    file_dets: Option<&mut BTreeMap<usize, Vec<Detection>>>,
    width: usize,
    height: usize,
    n_frames: usize,
    cfg: &TrackerConfig,
) -> CliResult<RunOutput> {
    let shared = SharedAdapter::new(proc);
    let mut seg = shared.clone();
    let out = match file_dets {
        Some(d) => run_sequence(width, height, n_frames, d, &mut seg, cfg)?,
        None => {
            let mut det = shared.clone();
            run_sequence(width, height, n_frames, &mut det, &mut seg, cfg)?
        }
    };
    drop(seg);
    if let Ok(proc) = shared.try_unwrap() {
        let status = proc.finish()?;
        if !status.success() {
            log::warn!("adapter exited with {status}");
        }
    }
    Ok(out)
}

fn eval(cli: &Cli, gt: &Path, results: &Path, mode: ModeArg, classes: &[u32]) -> CliResult {
    let input = match mode {
        ModeArg::Mask => {
            let g = io::read_mots(gt)?;
            let r = io::read_mots(results)?;
            let n = g.iter().chain(&r).map(|x| x.frame + 1).max().unwrap_or(0);
            EvalInput {
                mode: EvalMode::Mask,
                gt: io::mots_eval_objects(&g, n)?,
                pred: io::mots_eval_objects(&r, n)?,
            }
        }
        ModeArg::Bbox => {
            let g = io::read_mot(gt)?;
            let r = io::read_mot(results)?;
            let n = g.iter().chain(&r).map(|x| x.frame + 1).max().unwrap_or(0);
            EvalInput {
                mode: EvalMode::Bbox,
                gt: io::mot_eval_objects(&g, n),
                pred: io::mot_eval_objects(&r, n),
            }
        }
    };
    let report = evaluate(&input, (!classes.is_empty()).then_some(classes));
    print!("{report}");
    write_file(&cli.out_dir.join("metrics.json"), &report.to_json())
}

fn synth_cmd(cli: &Cli, names: &[String], perfect: bool) -> CliResult {
    let pool = if perfect {
        synth::perfect_world_corpus()
    } else {
        synth::standard_corpus()
    };
    let mut scenes = Vec::new();
    if names.is_empty() {
        scenes = pool;
    } else {
        for n in names {
            scenes.push(builtin_scene(n).ok_or_else(|| usage(format!("unknown scene {n:?}")))?);
        }
    }
    for spec in &mut scenes {
        if let Some(s) = cli.seed {
            spec.seed = s;
        }
        let gt = generate_scene(spec)?;
        let mut det = SynthDetector::new(&gt, spec.noise.clone(), spec.seed);
        let mut dets = BTreeMap::new();
        for f in 0..gt.frames.len() {
            let d = det.detect(f)?;
            if !d.is_empty() {
                dets.insert(f, d);
            }
        }
        let dir = &cli.out_dir;
        write_file(&dir.join(format!("{}.json", spec.name)), &spec.to_json())?;
        write_file(&dir.join(format!("{}.gt.txt", spec.name)), &io::write_gt_mots(&gt)?)?;
        write_file(&dir.join(format!("{}.det.txt", spec.name)), &io::write_detections(&dets))?;
    }
    println!("wrote {} scenes to {}", scenes.len(), cli.out_dir.display());
    Ok(())
}

fn ablate_cmd(cli: &Cli, corpus: Option<&Path>) -> CliResult {
    let cfg = load_config(cli.config.as_deref())?;
    let scenes = load_scenes(corpus, cli.seed)?;
    let report = ablate(&scenes, &cfg)?;
    print!("{}", report.table());
    write_file(&cli.out_dir.join("ablation.json"), &report.to_json())?;
    write_file(&cli.out_dir.join("ablation.csv"), &report.to_csv())
}

fn sweep_cmd(cli: &Cli, corpus: Option<&Path>, windows: &[usize]) -> CliResult {
    let cfg = load_config(cli.config.as_deref())?;
    let scenes = load_scenes(corpus, cli.seed)?;
    let report = sweep_window(&scenes, &cfg, windows)?;
    print!("{}", report.table());
    write_file(&cli.out_dir.join("sweep.json"), &report.to_json())?;
    write_file(&cli.out_dir.join("sweep.csv"), &report.to_csv())
}

fn run(cli: &Cli) -> CliResult {
    match &cli.cmd {
        Cmd::Track {
            scene,
            detections,
            adapter,
            segmenter,
            width,
            height,
            frames,
        } => track(
            cli,
            scene.as_deref(),
            detections.as_deref(),
            adapter.as_deref(),
            *segmenter,
            (*width, *height, *frames),
        ),
        Cmd::Eval {
            gt,
            results,
            mode,
            classes,
        } => eval(cli, gt, results, *mode, classes),
        Cmd::Synth { scenes, perfect } => synth_cmd(cli, scenes, *perfect),
        Cmd::Ablate { scene_corpus } => ablate_cmd(cli, scene_corpus.as_deref()),
        Cmd::SweepWindow { scene_corpus, windows } => sweep_cmd(cli, scene_corpus.as_deref(), windows),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
