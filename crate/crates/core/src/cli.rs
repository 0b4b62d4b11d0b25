//! Command-line pipeline.
//!
//! Stages talk only through files: raw media → `ingest` → manifest →
//! `filter` → `aggregate` → labeled manifest → `windows` / `train` / `eval` /
//! `sweep`. Settings come from flags, then `XNEC_*` environment variables,
//! then `--config FILE`, then built-in defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_all, apply_labels, read_annotations_csv};
use crate::cluster::{agglomerate, medoids, vectorize, write_centers_csv};
use crate::corpus::{
    filter_corpus, ingest_clip, load_manifest, read_flags_csv, read_telemetry_csv, save_manifest, Corpus, IngestRequest,
};
use crate::fixture::{generate, FixtureSpec};
use crate::model::checkpoint;
use crate::service::ServiceConfig;
use crate::studystats::{analyze, StudyResponseTable, DEFAULT_ALPHA};
use crate::trainer::{
    evaluate, run, split_windows, threshold_sweep, write_eval_csv, EvalResult, Selection, Split, TrainConfig, WindowSet,
};
use crate::windows::{build_windows, write_index_csv};

pub const DEFAULT_K: usize = 38;
pub const DEFAULT_P0S: [f64; 3] = [0.5, 0.6, 0.7];

/// Checkpoint directory contents.
pub const MODEL_FILE: &str = "model.xnck";
pub const META_FILE: &str = "train.json";
pub const SPLIT_FILE: &str = "split.json";
pub const LOSS_FILE: &str = "loss_curve.csv";
pub const EVAL_FILE: &str = "eval.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub responses: Option<PathBuf>,
    pub participants: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub p0: Vec<f64>,
    pub k: usize,
    pub alpha: f64,
    pub train: TrainConfig,
    pub service: ServiceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            manifest: None,
            responses: None,
            participants: None,
            checkpoints: None,
            p0: DEFAULT_P0S.to_vec(),
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            train: TrainConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.manifest, &mut cfg.responses, &mut cfg.participants, &mut cfg.checkpoints].into_iter().flatten() {
            fix(p);
        }
        fix(&mut cfg.service.corpus);
        fix(&mut cfg.service.log);
        Ok(cfg)
    }

    /// `XNEC_MANIFEST`, `XNEC_RESPONSES`, `XNEC_PARTICIPANTS`,
    /// `XNEC_CHECKPOINTS` and `XNEC_SEED`, plus the service variables.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        for (name, slot) in [
            ("XNEC_MANIFEST", &mut self.manifest),
            ("XNEC_RESPONSES", &mut self.responses),
            ("XNEC_PARTICIPANTS", &mut self.participants),
            ("XNEC_CHECKPOINTS", &mut self.checkpoints),
        ] {
            if let Some(v) = lookup(name) {
                *slot = Some(v.into());
            }
        }
        if let Some(v) = lookup("XNEC_SEED") {
            self.seed = v.parse().with_context(|| format!("XNEC_SEED={v:?} is not an integer"))?;
        }
        self.service.apply_env(&lookup)?;
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "xnec", version, about = "Explanation-necessity pipeline")]
pub struct Cli {
    /// Seed for every stochastic stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML pipeline configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample raw clips to 10 Hz and write an unlabeled manifest.
    Ingest(IngestArgs),
    /// Drop clips flagged by human review.
    Filter(FilterArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Aggregate annotation events into clip labels.
    Aggregate(AggregateArgs),
    /// Cluster clip messages and emit one representative per cluster.
    Cluster(ClusterArgs),
    /// Analyze user-study responses.
    Stats(StatsArgs),
    /// Write the training-window index for one threshold.
    Windows(WindowsArgs),
    /// Train and evaluate one model.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split.
    Eval(EvalArgs),
    /// Train and evaluate one model per threshold.
    Sweep(SweepArgs),
    /// Generate the synthetic fixture.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of `<vid>.xnv`, `<vid>.gaze.xnv` and `<vid>.telemetry.csv`.
    #[arg(long)]
    pub raw: PathBuf,
    /// Output directory for resampled media and `manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `vid,violation` review file.
    #[arg(long)]
    pub flags: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-clip assumption reports as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Event log path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Comma-separated registered annotator ids.
    #[arg(long, value_delimiter = ',')]
    pub annotators: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Annotation CSV, as written by the service export.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Labeled manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregated labels as JSON.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Full `vid,cluster` assignment.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub participants: Option<PathBuf>,
    /// Markdown report.
    #[arg(long)]
    pub out: PathBuf,
    /// `metric,value` table. Defaults to the report path with `.csv`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args)]
pub struct WindowsArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint directory or model file.
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Overrides the manifest recorded at training time.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = ["train", "val", "test"])]
    pub split: String,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    pub p0: Option<Vec<f64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Reviewed clips (12 for the small fixture).
    #[arg(long, default_value_t = 12)]
    pub clips: usize,
    /// Flagged extra clips.
    #[arg(long)]
    pub flagged: Option<usize>,
}

/// Written next to the model by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub manifest: PathBuf,
    pub config: TrainConfig,
    pub best_epoch: Option<usize>,
    pub selection: Selection,
    pub train_auc: f64,
    pub eval: EvalResult,
}

/// Parses `argv` and runs one subcommand. Returns the process exit code:
/// 0 on success, 2 for usage errors, 1 for anything else.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    let name = subcommand_name(&cli.command);
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => match e.downcast::<clap::Error>() {
            Ok(usage) => {
                let _ = usage.print();
                usage.exit_code()
            }
            Err(e) => {
                eprintln!("error[{name}]: {e}");
                for cause in e.chain().skip(1) {
                    eprintln!("  caused by: {cause}");
                }
                1
            }
        },
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Filter(_) => "filter",
        Command::Serve(_) => "serve",
        Command::Aggregate(_) => "aggregate",
        Command::Cluster(_) => "cluster",
        Command::Stats(_) => "stats",
        Command::Windows(_) => "windows",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Sweep(_) => "sweep",
        Command::Fixture(_) => "fixture",
    }
}

/// A value no flag, variable or config supplied: a usage error.
fn require<T>(value: Option<T>, sub: &str, flag: &str) -> Result<T> {
    value.ok_or_else(|| {
        let mut cmd = Cli::command();
        cmd.build();
        let msg = format!("the following required argument was not provided: --{flag}");
        let err = match cmd.find_subcommand_mut(sub) {
            Some(sc) => sc.error(ErrorKind::MissingRequiredArgument, msg),
            None => cmd.error(ErrorKind::MissingRequiredArgument, msg),
        };
        anyhow::Error::new(err)
    })
}

fn must_exist(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} {} does not exist", path.display());
    }
    Ok(())
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.train.seed = cfg.seed;
    cfg.service.seed = cfg.seed;
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Filter(a) => filter(&cfg, a),
        Command::Serve(a) => serve(cfg, a),
        Command::Aggregate(a) => aggregate(&cfg, a),
        Command::Cluster(a) => cluster(&cfg, a),
        Command::Stats(a) => stats(&cfg, a),
        Command::Windows(a) => windows(&cfg, a),
        Command::Train(a) => train(&cfg, a),
        Command::Eval(a) => eval(&cfg, a),
        Command::Sweep(a) => sweep(&cfg, a),
        Command::Fixture(a) => fixture(&cfg, a),
    }
}

fn manifest_arg(cfg: &PipelineConfig, flag: Option<PathBuf>, sub: &str) -> Result<PathBuf> {
    let p = require(flag.or_else(|| cfg.manifest.clone()), sub, "manifest")?;
    must_exist(&p, "manifest")?;
    Ok(p)
}

/// `target` expressed relative to `base`. Both are made absolute first.
fn relative_to(target: &Path, base: &Path) -> Result<PathBuf> {
    let abs = |p: &Path| -> Result<PathBuf> {
        let p = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir()?.join(p) };
        Ok(p.components().fold(PathBuf::new(), |mut acc, c| {
            match c {
                Component::ParentDir => {
                    acc.pop();
                }
                Component::CurDir => {}
                other => acc.push(other),
            }
            acc
        }))
    };
    let (t, b) = (abs(target)?, abs(base)?);
    let tc: Vec<_> = t.components().collect();
    let bc: Vec<_> = b.components().collect();
    let common = tc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..bc.len() {
        out.push("..");
    }
    for c in &tc[common..] {
        out.push(c);
    }
    Ok(out)
}

/// Saves `corpus` at `path`, rewriting media paths so they stay valid from
/// the new manifest's directory.
fn save_relocated(corpus: &Corpus, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = corpus.clone();
    for clip in &mut out.clips {
        clip.video_path = relative_to(&corpus.resolve(&clip.video_path), dir)?;
        if let Some(g) = &clip.gazemap_path {
            clip.gazemap_path = Some(relative_to(&corpus.resolve(g), dir)?);
        }
    }
    save_manifest(&out, path)?;
    wrote(path);
    Ok(())
}

fn ingest(a: &IngestArgs) -> Result<()> {
    must_exist(&a.raw, "raw directory")?;
    let mut vids = Vec::new();
    for entry in fs::read_dir(&a.raw).with_context(|| format!("listing {}", a.raw.display()))? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(vid) = name.strip_suffix(".xnv").filter(|v| !v.ends_with(".gaze")) {
            vids.push(vid.to_string());
        }
    }
    vids.sort();
    if vids.is_empty() {
        bail!("no .xnv clips in {}", a.raw.display());
    }
    let clips = vids
        .par_iter()
        .map(|vid| -> Result<_> {
            let video = a.raw.join(format!("{vid}.xnv"));
            let gaze = a.raw.join(format!("{vid}.gaze.xnv"));
            let telemetry = read_telemetry_csv(a.raw.join(format!("{vid}.telemetry.csv")))?;
            let gaze = gaze.exists().then_some(gaze);
            let clip = ingest_clip(&IngestRequest {
                vid,
                video: &video,
                gaze: gaze.as_deref(),
                telemetry: &telemetry,
                out_dir: &a.out,
            })
            .with_context(|| format!("ingesting {vid}"))?;
            Ok(clip)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = a.out.join("manifest.json");
    save_manifest(&Corpus::new(clips, &a.out), &path)?;
    println!("ingested {} clips", vids.len());
    wrote(&path);
    Ok(())
}

fn filter(cfg: &PipelineConfig, a: FilterArgs) -> Result<()> {
    let manifest = manifest_arg(cfg, a.manifest, "filter")?;
    must_exist(&a.flags, "flags file")?;
    let mut corpus = load_manifest(&manifest)?;
    let flags = read_flags_csv(&a.flags)?;
    let (kept, reports) = filter_corpus(&corpus.clips, &flags)?;
    println!("kept {} of {} clips", kept.len(), corpus.clips.len());
    corpus.clips = kept;
    save_relocated(&corpus, &a.out)?;
    if let Some(r) = a.report {
        fs::write(&r, serde_json::to_string_pretty(&reports)? + "\n")?;
        wrote(&r);
    }
    Ok(())
}

fn serve(cfg: PipelineConfig, a: ServeArgs) -> Result<()> {
    let mut svc = cfg.service.clone();
    if let Some(m) = a.manifest.or(cfg.manifest) {
        svc.corpus = m;
    }
    if let Some(p) = a.port {
        svc.port = p;
    }
    if let Some(b) = a.bind {
        svc.bind = b;
    }
    if let Some(l) = a.log {
        svc.log = l;
    }
    if let Some(ids) = a.annotators {
        svc.annotators = ids;
    }
    must_exist(&svc.corpus, "manifest")?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(crate::service::serve(svc))
}

fn aggregate(cfg: &PipelineConfig, a: AggregateArgs) -> Result<()> {
    let manifest = manifest_arg(cfg, a.manifest, "aggregate")?;
    must_exist(&a.annotations, "annotations file")?;
    let mut corpus = load_manifest(&manifest)?;
    let events = read_annotations_csv(&a.annotations)?;
    let summary = aggregate_all(&events)?;
    if !summary.incomplete.is_empty() {
        log::warn!("{} clips have too few annotations: {}", summary.incomplete.len(), summary.incomplete.join(", "));
    }
    apply_labels(&mut corpus, &summary.labels);
    let labeled = corpus.clips.iter().filter(|c| c.is_labeled()).count();
    println!("labeled {labeled} of {} clips", corpus.clips.len());
    save_relocated(&corpus, &a.out)?;
    if let Some(p) = a.labels {
        fs::write(&p, serde_json::to_string_pretty(&summary.labels)? + "\n")?;
        wrote(&p);
    }
    Ok(())
}

fn cluster(cfg: &PipelineConfig, a: ClusterArgs) -> Result<()> {
    let manifest = manifest_arg(cfg, a.manifest, "cluster")?;
    let corpus = load_manifest(&manifest)?;
    let messages: BTreeMap<String, String> =
        corpus.clips.iter().filter_map(|c| c.message.clone().map(|m| (c.vid.clone(), m))).collect();
    let k = a.k.unwrap_or(cfg.k);
    let vectors = vectorize(&messages)?;
    let (_, assignment) = agglomerate(&vectors, k)?;
    let centers = medoids(&assignment, &vectors)?;
    write_centers_csv(fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?, &centers)?;
    println!("{} clusters over {} messages", centers.len(), messages.len());
    wrote(&a.out);
    if let Some(p) = a.assignment {
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["vid", "cluster"])?;
        for (vid, c) in &assignment {
            w.write_record([vid.clone(), c.to_string()])?;
        }
        w.flush()?;
        wrote(&p);
    }
    Ok(())
}

fn stats(cfg: &PipelineConfig, a: StatsArgs) -> Result<()> {
    let responses = require(a.responses.or_else(|| cfg.responses.clone()), "stats", "responses")?;
    let participants = require(a.participants.or_else(|| cfg.participants.clone()), "stats", "participants")?;
    must_exist(&responses, "responses file")?;
    must_exist(&participants, "participants file")?;
    let table = StudyResponseTable::read_csv(&responses, &participants)?;
    let report = analyze(&table, a.alpha.unwrap_or(cfg.alpha))?;
    fs::write(&a.out, report.to_markdown()).with_context(|| format!("writing {}", a.out.display()))?;
    wrote(&a.out);
    let table_path = a.table.unwrap_or_else(|| a.out.with_extension("csv"));
    report.write_results_csv(fs::File::create(&table_path)?)?;
    wrote(&table_path);
    Ok(())
}

fn windows(cfg: &PipelineConfig, a: WindowsArgs) -> Result<()> {
    let manifest = manifest_arg(cfg, a.manifest, "windows")?;
    let corpus = load_manifest(&manifest)?;
    let policy = TrainConfig { p0: a.p0.unwrap_or(cfg.train.p0), ..cfg.train.clone() }.policy();
    let wins = build_windows(&corpus.clips, &policy)?;
    let positives = wins.iter().filter(|w| w.label == 1).count();
    println!("{} windows at p0 {}: {positives} positive, {} negative", wins.len(), policy.p0, wins.len() - positives);
    write_index_csv(&wins, &a.out)?;
    wrote(&a.out);
    Ok(())
}

fn train_config(cfg: &PipelineConfig, p0: Option<f64>, epochs: Option<usize>) -> TrainConfig {
    let mut t = cfg.train.clone();
    if let Some(p) = p0 {
        t.p0 = p;
    }
    if let Some(e) = epochs {
        t.epochs = e;
    }
    t
}

fn train(cfg: &PipelineConfig, a: TrainArgs) -> Result<()> {
    let manifest = manifest_arg(cfg, a.manifest, "train")?;
    let out = require(a.out.or_else(|| cfg.checkpoints.clone()), "train", "out")?;
    let tc = train_config(cfg, a.p0, a.epochs);
    let corpus = load_manifest(&manifest)?;
    let result = run(&corpus, &tc)?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let model_path = out.join(MODEL_FILE);
    checkpoint::save(&result.outcome.model, &model_path)?;
    wrote(&model_path);

    let split_path = out.join(SPLIT_FILE);
    fs::write(&split_path, serde_json::to_string_pretty(&result.split)? + "\n")?;
    wrote(&split_path);

    let loss_path = out.join(LOSS_FILE);
    let mut w = csv::Writer::from_path(&loss_path)?;
    w.write_record(["epoch", "train_loss", "val_metric"])?;
    for (i, (l, v)) in result.outcome.loss_curve.iter().zip(&result.outcome.val_curve).enumerate() {
        w.write_record([i.to_string(), l.to_string(), v.to_string()])?;
    }
    w.flush()?;
    wrote(&loss_path);

    let eval_path = out.join(EVAL_FILE);
    write_eval_csv(std::slice::from_ref(&result.eval), &eval_path)?;
    wrote(&eval_path);

    let meta = TrainMeta {
        manifest: fs::canonicalize(&manifest)?,
        config: tc,
        best_epoch: result.outcome.best_epoch,
        selection: result.outcome.selection,
        train_auc: result.train_auc,
        eval: result.eval.clone(),
    };
    let meta_path = out.join(META_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    wrote(&meta_path);
    println!(
        "p0 {}: train AUC {:.4}, test AUC {:.4}, baseline {:.4}, best epoch {:?}",
        meta.eval.p0, meta.train_auc, meta.eval.auc_model, meta.eval.auc_baseline, meta.best_epoch
    );
    Ok(())
}

fn eval(cfg: &PipelineConfig, a: EvalArgs) -> Result<()> {
    let ckpt = require(a.ckpt.or_else(|| cfg.checkpoints.clone()), "eval", "ckpt")?;
    must_exist(&ckpt, "checkpoint")?;
    let (dir, model_path) = if ckpt.is_dir() {
        (ckpt.clone(), ckpt.join(MODEL_FILE))
    } else {
        (ckpt.parent().unwrap_or(Path::new(".")).to_path_buf(), ckpt.clone())
    };
    let meta: TrainMeta = serde_json::from_str(
        &fs::read_to_string(dir.join(META_FILE)).with_context(|| format!("reading {}", dir.join(META_FILE).display()))?,
    )?;
    let split: Split = serde_json::from_str(&fs::read_to_string(dir.join(SPLIT_FILE))?)?;
    let manifest = a.manifest.unwrap_or(meta.manifest);
    must_exist(&manifest, "manifest")?;
    let model = checkpoint::load(&model_path)?;
    let corpus = load_manifest(&manifest)?;
    let vids = split.part(&a.split).expect("clap restricts split names");
    let set = WindowSet::load(&model, &corpus, split_windows(&corpus, vids, &meta.config.policy())?)?;
    let result = evaluate(&model, &set, meta.config.p0, meta.config.seed)?;
    write_eval_csv(std::slice::from_ref(&result), &a.report)?;
    println!("{} split: AUC {:.4}, baseline {:.4} over {} windows", a.split, result.auc_model, result.auc_baseline, result.n_test);
    wrote(&a.report);
    Ok(())
}

fn sweep(cfg: &PipelineConfig, a: SweepArgs) -> Result<()> {
    let manifest = manifest_arg(cfg, a.manifest, "sweep")?;
    let p0s = a.p0.unwrap_or_else(|| cfg.p0.clone());
    let tc = train_config(cfg, None, a.epochs);
    let corpus = load_manifest(&manifest)?;
    let results = threshold_sweep(&corpus, &p0s, &tc)?;
    for r in &results {
        println!("p0 {}: AUC {:.4}, baseline {:.4}, {} test windows", r.p0, r.auc_model, r.auc_baseline, r.n_test);
    }
    write_eval_csv(&results, &a.report)?;
    wrote(&a.report);
    Ok(())
}

fn fixture(cfg: &PipelineConfig, a: FixtureArgs) -> Result<()> {
    let mut spec = if a.clips > FixtureSpec::small(cfg.seed).clips {
        FixtureSpec { clips: a.clips, ..FixtureSpec::large(cfg.seed) }
    } else {
        FixtureSpec { clips: a.clips, ..FixtureSpec::small(cfg.seed) }
    };
    if let Some(f) = a.flagged {
        spec.flagged = f;
    }
    let paths = generate(&spec, &a.out)?;
    println!("generated {} clips ({} flagged)", spec.clips + spec.flagged, spec.flagged);
    for p in [&paths.raw, &paths.manifest, &paths.flags, &paths.annotations, &paths.participants, &paths.responses] {
        wrote(p);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_walk_up_and_down() {
        assert_eq!(relative_to(Path::new("/a/b/c.xnv"), Path::new("/a/d")).unwrap(), PathBuf::from("../b/c.xnv"));
        assert_eq!(relative_to(Path::new("/a/b/c.xnv"), Path::new("/a/b")).unwrap(), PathBuf::from("c.xnv"));
        assert_eq!(relative_to(Path::new("/a/./b/../c"), Path::new("/a")).unwrap(), PathBuf::from("c"));
    }

    #[test]
    fn config_env_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("xnec.toml");
        fs::write(&p, "seed = 3\nmanifest = \"m.json\"\nk = 5\n[train]\nepochs = 7\n[service]\nport = 9001\n").unwrap();
        let mut cfg = PipelineConfig::from_file(&p).unwrap();
        assert_eq!(cfg.manifest, Some(dir.path().join("m.json")));
        assert_eq!((cfg.seed, cfg.k, cfg.train.epochs, cfg.service.port), (3, 5, 7, 9001));
        assert_eq!(cfg.p0, DEFAULT_P0S.to_vec());
        cfg.apply_env(|k| (k == "XNEC_SEED").then(|| "9".to_string())).unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["xnec", "eval", "--report", "x.csv"]), 2);
        assert_eq!(main_with_args(["xnec", "train", "--no-such-flag"]), 2);
        assert_eq!(main_with_args(["xnec", "bogus"]), 2);
    }
}
