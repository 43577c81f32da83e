use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn, LevelFilter};

use hiertrack::eval::{evaluate, format_gap_table, reid_gap_analysis};
use hiertrack::features::EdgeLayout;
use hiertrack::hierarchy::{run_hierarchy_with, training_graphs, EdgeSolver, RunOptions};
use hiertrack::ingest::{
    read_config, read_text, read_trackset, write_text, write_trackset, SequenceBundle,
    SequencePaths,
};
use hiertrack::model::{validate_trackset, EngineConfig, RoundingKind, ScorerKind, SpatialMode};
use hiertrack::scorer::{
    edge_accuracy, load_weights, save_weights, train_scorer, ScorerWeights, TrainParams,
    DEFAULT_HIDDEN,
};
use hiertrack::synth::{
    feature_ablation_scenario, generate, long_occlusion_scenario, parse_scenario, sequence_paths,
    ScenarioSpec,
};
use hiertrack::{Error, Result};

#[derive(Parser)]
#[command(name = "hiertrack", version, about = "Hierarchical graph tracker for team sports")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track a sequence and write MOT-format tracks.
    Track(TrackArgs),
    /// Score predicted tracks against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic sequence.
    Synth(SynthArgs),
    /// Train scorer weights on sequences with ground truth.
    Train(TrainArgs),
    /// Nearest-neighbour re-identification accuracy versus frame gap.
    Gap(GapArgs),
}

/// Input sequence: a directory with the standard file names, or explicit paths.
#[derive(Args, Clone)]
struct SeqArgs {
    /// Directory holding det.txt, features.tsv and optionally homography.csv, gt.txt, seqinfo.ini.
    #[arg(long)]
    seq: Option<PathBuf>,
    #[arg(long)]
    det: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    homography: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    seqinfo: Option<PathBuf>,
}

impl SeqArgs {
    fn paths(&self) -> Result<SequencePaths> {
        let mut p = match &self.seq {
            Some(dir) => {
                let mut p = sequence_paths(dir);
                p.homographies = p.homographies.filter(|h| h.exists());
                p.gt = p.gt.filter(|g| g.exists());
                p.seqinfo = p.seqinfo.filter(|s| s.exists());
                p
            }
            None => SequencePaths {
                detections: self
                    .det
                    .clone()
                    .ok_or_else(|| Error::Config("pass --seq DIR or --det FILE".into()))?,
                features: self
                    .features
                    .clone()
                    .ok_or_else(|| Error::Config("pass --seq DIR or --features FILE".into()))?,
                homographies: None,
                gt: None,
                config: None,
                seqinfo: None,
            },
        };
        if let Some(d) = &self.det {
            p.detections = d.clone();
        }
        if let Some(f) = &self.features {
            p.features = f.clone();
        }
        if self.homography.is_some() {
            p.homographies = self.homography.clone();
        }
        if self.gt.is_some() {
            p.gt = self.gt.clone();
        }
        if self.seqinfo.is_some() {
            p.seqinfo = self.seqinfo.clone();
        }
        Ok(p)
    }
}

/// Engine settings; flags override the config file, which overrides defaults.
#[derive(Args, Clone)]
struct EngineArgs {
    /// TOML engine configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    levels: Option<u32>,
    /// Pruning degree K.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_from_str::<SpatialMode>)]
    spatial_mode: Option<SpatialMode>,
    #[arg(long, value_parser = parse_from_str::<ScorerKind>)]
    scorer: Option<ScorerKind>,
    #[arg(long, value_parser = parse_from_str::<RoundingKind>)]
    rounding: Option<RoundingKind>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_from_str<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

impl EngineArgs {
    fn resolve(&self) -> Result<EngineConfig> {
        let mut c = match &self.config {
            Some(p) => read_config(p)?,
            None => EngineConfig::default(),
        };
        if let Some(v) = self.levels {
            c.levels = v;
        }
        if let Some(v) = self.k {
            c.prune_k = v;
        }
        if let Some(v) = self.spatial_mode {
            c.spatial_mode = v;
        }
        if let Some(v) = self.scorer {
            c.scorer = v;
        }
        if let Some(v) = self.rounding {
            c.rounding = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TrackArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Trained scorer weights (JSON).
    #[arg(long)]
    weights: PathBuf,
    /// Output MOT file.
    #[arg(long, short)]
    out: PathBuf,
    /// Write every level graph as an edge list into this directory.
    #[arg(long)]
    debug_graphs: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted tracks (MOT format).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth tracks (MOT format).
    #[arg(long)]
    gt: PathBuf,
    /// Print key=value lines instead of a table.
    #[arg(long)]
    kv: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario file (TOML); overrides --preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// soccer, hockey, feature-ablation or long-occlusion.
    #[arg(long, default_value = "soccer")]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    frames: Option<u32>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training sequence directories (with gt.txt).
    #[arg(long, required = true, num_args = 1..)]
    seq: Vec<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
    /// Output weights (JSON).
    #[arg(long, short)]
    out: PathBuf,
    /// Training log (tab-separated iteration, stage, loss).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    stage_iters: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_edges_per_level: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// Comma-separated frame gaps.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u32, 50, 100, 300])]
    steps: Vec<u32>,
}

fn load_sequence(seq: &SeqArgs, config: EngineConfig) -> Result<SequenceBundle> {
    SequenceBundle::load_with_config(&seq.paths()?, config)
}

fn cmd_track(a: &TrackArgs) -> Result<()> {
    let config = a.engine.resolve()?;
    let weights = load_weights(&a.weights)?;
    let seq = load_sequence(&a.seq, config)?;
    let opts = RunOptions {
        debug_dir: a.debug_graphs.clone(),
        collect_training: false,
    };
    let out = run_hierarchy_with(&seq, EdgeSolver::Learned(&weights), &opts)?;
    let violations = validate_trackset(&out.tracks);
    if let Some(v) = violations.first() {
        return Err(Error::Invariant(format!("tracker produced an invalid track set: {v}")));
    }
    write_trackset(&a.out, &out.tracks)?;
    println!("tracks={}", out.tracks.tracks.len());
    println!("detections={}", out.tracks.num_points());
    println!("mean_length={:.2}", out.tracks.mean_length());
    println!("windows={}", out.windows.len());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let pred = read_trackset(&a.pred)?;
    let gt = read_trackset(&a.gt)?;
    if let (Some(p), Some(g)) = (pred.frame_range(), gt.frame_range()) {
        if p != g {
            warn!(
                "frame ranges differ (pred {}..={}, gt {}..={}); scoring over their union",
                p.0 + 1,
                p.1 + 1,
                g.0 + 1,
                g.1 + 1
            );
        }
    }
    let r = evaluate(&pred, &gt)?;
    if a.kv {
        print!("{}", r.to_key_values());
    } else {
        print!("{}", r.to_table());
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => parse_scenario(&read_text(p)?, p)?,
        None => match a.preset.as_str() {
            "soccer" => ScenarioSpec::default(),
            "hockey" => ScenarioSpec::hockey(),
            "feature-ablation" => feature_ablation_scenario(),
            "long-occlusion" => long_occlusion_scenario(),
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        },
    };
    if let Some(f) = a.frames {
        spec.frames = f;
    }
    let paths = generate(&spec, a.seed, &a.out)?;
    println!("detections={}", paths.detections.display());
    println!("features={}", paths.features.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = a.engine.resolve()?;
    let mut graphs = Vec::new();
    for dir in &a.seq {
        let seq = load_sequence(
            &SeqArgs {
                seq: Some(dir.clone()),
                det: None,
                features: None,
                homography: None,
                gt: None,
                seqinfo: None,
            },
            config.clone(),
        )?;
        let g = training_graphs(&seq)?;
        info!("{}: {} training graphs", dir.display(), g.len());
        graphs.extend(g);
    }
    let mut hp = TrainParams::default();
    if let Some(v) = a.lr {
        hp.learning_rate = v;
    }
    if let Some(v) = a.stage_iters {
        hp.stage_iters = v;
    }
    if let Some(v) = a.epochs {
        hp.epochs = v;
    }
    if let Some(v) = a.max_edges_per_level {
        hp.max_edges_per_level = v;
    }
    let layout = EdgeLayout::new(config.spatial_mode, &config.features);
    let init = ScorerWeights::init(
        config.scorer,
        config.levels,
        &layout,
        a.hidden,
        config.mp_rounds,
        config.seed,
    );
    let report = train_scorer(&graphs, init, &hp, config.seed)?;
    save_weights(&a.out, &report.weights)?;
    if let Some(log) = &a.log {
        write_text(log, &report.log_text())?;
    }
    println!("final_loss={:.6}", report.final_loss);
    println!(
        "edge_accuracy={:.6}",
        edge_accuracy(&report.weights, &graphs, config.edge_threshold)?
    );
    Ok(())
}

fn cmd_gap(a: &GapArgs) -> Result<()> {
    // Gap analysis only reads appearance; frame mode avoids needing homographies.
    let config = EngineConfig {
        spatial_mode: SpatialMode::Frame,
        ..EngineConfig::default()
    };
    let seq = load_sequence(&a.seq, config)?;
    print!("{}", format_gap_table(&reid_gap_analysis(&seq, &a.steps)?));
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Gap(a) => cmd_gap(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}
