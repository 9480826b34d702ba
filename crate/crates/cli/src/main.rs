//! `vanity`: dataset preparation, training, recommendation, synthesis and serving.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 validation failure.

mod config;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use vanity_core::dataset::{build_db, filter_manifest, load_db, load_manifest, manifest_text, save_db, FilterOutcome};
use vanity_core::geometry::LandmarkSet;
use vanity_core::imageops::{read_rgb8, write_rgb8};
use vanity_core::io::{read_text, write_atomic};
use vanity_core::recommender::{
    recommend, train, LabelSpace, LatentSpace, LatentSvmModel, MakeupLabel, TrainingExample,
};
use vanity_core::synthesis::{synthesize, Intensities, Stage};
use vanity_core::synthetic::{planted_manifest, separable_fixture, write_look_set};
use vanity_service::AppState;

use crate::config::CliConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad input, config or data; exit code 2.
    Validation(String),
    /// Anything else; exit code 1.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<vanity_core::Error> for CliError {
    fn from(e: vanity_core::Error) -> Self {
        use vanity_core::Error as E;
        let msg = e.to_string();
        match e {
            E::DegenerateLandmarks
            | E::InvalidLandmarks(_)
            | E::DimensionMismatch { .. }
            | E::InvalidParameter(_)
            | E::TooFewSamples { .. }
            | E::BuildFailed { .. }
            | E::SchemaMismatch(_)
            | E::VersionMismatch { .. }
            | E::Format { .. } => CliError::Validation(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "vanity", version, about = "Makeup recommendation and synthesis")]
struct Cli {
    /// TOML config file (`version = 1`); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter manifests and build the makeup DB.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train the recommender from the DB annotations.
    Train(TrainArgs),
    /// Rank makeup labels for a face; one JSON card per line.
    Recommend(RecommendArgs),
    /// Render makeup onto a face and write before/after PNGs.
    Synth(SynthArgs),
    /// Serve the HTTP API until interrupted.
    Serve(ServeArgs),
    /// Write synthetic fixtures.
    #[command(subcommand)]
    Synthetic(SyntheticCommand),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Apply the acceptance rules and write a line-delimited report.
    Filter(FilterArgs),
    /// Filter, then analyse accepted images into a makeup DB.
    Build(BuildArgs),
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// JSONL manifest; relative paths resolve against its directory.
    #[arg(long)]
    manifest: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the accepted entries as a manifest.
    #[arg(long)]
    accepted: Option<PathBuf>,
    #[arg(long)]
    min_detector_confidence: Option<f64>,
    #[arg(long)]
    min_landmark_confidence: Option<f64>,
    /// Minimum longest side of the landmark bounding box, in pixels.
    #[arg(long)]
    min_face_box: Option<f64>,
    #[arg(long)]
    min_interocular: Option<f64>,
    #[arg(long)]
    min_frontality: Option<f64>,
    /// File with one accepted image id per line.
    #[arg(long)]
    allowlist: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[command(flatten)]
    filter: FilterArgs,
    /// Output DB directory.
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    max_templates: Option<usize>,
    #[arg(long)]
    foundation_colors: Option<usize>,
    #[arg(long)]
    eyeshadow_colors: Option<usize>,
    #[arg(long)]
    lip_colors: Option<usize>,
    /// Matting components per eye crop.
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Analysis threads; 0 uses the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Train on the DB annotations.
    #[arg(long, required_unless_present = "examples", conflicts_with = "examples")]
    db: Option<PathBuf>,
    /// Train on a JSONL file of `{features, label}` records instead of a DB.
    #[arg(long)]
    examples: Option<PathBuf>,
    /// Label-space sizes `templates,eyeshadow,lip,foundation` for `--examples`;
    /// defaults to the largest index seen plus one.
    #[arg(long, requires = "examples")]
    labels: Option<String>,
    /// Latent attribute factors, comma-separated.
    #[arg(long, default_value = "5,3,3")]
    latent: String,
    /// Output model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    inner_epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FaceArgs {
    #[arg(long)]
    image: PathBuf,
    /// Landmark file for the image.
    #[arg(long)]
    landmarks: PathBuf,
    #[arg(long)]
    db: PathBuf,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[command(flatten)]
    face: FaceArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(short, long, default_value_t = 5)]
    k: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    face: FaceArgs,
    /// Label as `template,eyeshadow,lip,foundation` indices.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    label: Option<String>,
    /// Use the top recommendation of this model instead of `--label`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// `foundation,eyeshadow,lip` in [0, 1].
    #[arg(long, default_value = "0.6,0.8,0.8")]
    intensity: String,
    #[arg(long)]
    before: PathBuf,
    #[arg(long)]
    after: PathBuf,
    /// Also write the image after each stage into this directory.
    #[arg(long)]
    stages_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    db: Option<PathBuf>,
    /// Landmark provider endpoint for `landmarks:auto`.
    #[arg(long)]
    provider_url: Option<String>,
    /// Concurrent synthesis jobs.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_upload_bytes: Option<usize>,
    /// Persist uploads and landmarks in this directory.
    #[arg(long)]
    persist_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SyntheticCommand {
    /// Faces wearing preset looks, with landmarks and a manifest.
    Looks {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
    /// A manifest with planted rule violations; `expected.jsonl` lists the verdicts.
    Planted {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        total: usize,
        /// Violations per rule, in rule order.
        #[arg(long, value_delimiter = ',', default_value = "7,6,6,6,6,6")]
        plants: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The 8-example separable training set as JSONL, for `train --examples`.
    Separable {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_list<T: std::str::FromStr>(s: &str, n: usize, what: &str) -> CliResult<Vec<T>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(CliError::Validation(format!("{what}: expected {n} comma-separated values, got {s:?}")));
    }
    parts
        .iter()
        .map(|p| p.parse().map_err(|_| CliError::Validation(format!("{what}: bad value {p:?} in {s:?}"))))
        .collect()
}

fn parse_intensities(s: &str) -> CliResult<Intensities> {
    let v: Vec<f64> = parse_list(s, 3, "--intensity")?;
    let it = Intensities { foundation: v[0], eyeshadow: v[1], lip: v[2] };
    it.validate()?;
    Ok(it)
}

fn parse_label(s: &str) -> CliResult<MakeupLabel> {
    let v: Vec<usize> = parse_list(s, 4, "--label")?;
    Ok(MakeupLabel::new(v[0], v[1], v[2], v[3]))
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn apply_filter_flags(cfg: &mut CliConfig, a: &FilterArgs) -> CliResult {
    let t = &mut cfg.filter;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut t.min_detector_confidence, a.min_detector_confidence);
    set(&mut t.min_landmark_confidence, a.min_landmark_confidence);
    set(&mut t.min_face_box, a.min_face_box);
    set(&mut t.min_interocular, a.min_interocular);
    set(&mut t.min_frontality, a.min_frontality);
    if let Some(p) = &a.allowlist {
        let ids: HashSet<String> = read_text(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        t.allowlist = Some(ids);
    }
    Ok(())
}

fn filter_report(out: &FilterOutcome) -> String {
    let r = out.report();
    let mut s =
        json!({"kind": "summary", "total": r.total, "accepted": r.accepted, "rejected": r.rejected}).to_string();
    s.push('\n');
    for (id, reason) in &r.rejections {
        writeln!(s, "{}", json!({"kind": "rejection", "id": id, "reason": reason.as_str()})).unwrap();
    }
    s
}

fn run_filter(cfg: &mut CliConfig, a: &FilterArgs) -> CliResult<(FilterOutcome, String)> {
    apply_filter_flags(cfg, a)?;
    let entries = load_manifest(&a.manifest)?;
    if entries.is_empty() {
        return Err(CliError::Validation(format!("{}: manifest is empty", a.manifest.display())));
    }
    let out = filter_manifest(&entries, &cfg.filter);
    if let Some(p) = &a.accepted {
        write_atomic(p, manifest_text(&out.accepted).as_bytes())?;
    }
    let report = filter_report(&out);
    Ok((out, report))
}

fn cmd_filter(mut cfg: CliConfig, a: &FilterArgs) -> CliResult {
    let (_, report) = run_filter(&mut cfg, a)?;
    write_out(a.report.as_deref(), &report)
}

fn cmd_build(mut cfg: CliConfig, a: &BuildArgs) -> CliResult {
    let b = &mut cfg.build;
    if let Some(v) = a.max_templates {
        b.max_templates = v;
    }
    if let Some(v) = a.foundation_colors {
        b.palette_sizes.foundation = v;
    }
    if let Some(v) = a.eyeshadow_colors {
        b.palette_sizes.eyeshadow = v;
    }
    if let Some(v) = a.lip_colors {
        b.palette_sizes.lip = v;
    }
    if let Some(v) = a.components {
        b.matting.components = v;
    }
    if let Some(v) = a.seed {
        b.seed = v;
    }
    if let Some(v) = a.workers {
        b.workers = v;
    }
    cfg.validate()?;
    let (out, mut report) = run_filter(&mut cfg, &a.filter)?;
    if out.accepted.is_empty() {
        write_out(a.filter.report.as_deref(), &report)?;
        return Err(CliError::Validation("no manifest entry passed the filter".into()));
    }
    let (db, build) = build_db(&out.accepted, &cfg.build)?;
    save_db(&db, &a.db)?;
    let line = json!({
        "kind": "build",
        "analysed": build.analysed,
        "succeeded": build.succeeded,
        "templates": build.templates,
        "palettes": {"foundation": db.foundation.len(), "eyeshadow": db.eyeshadow.len(), "lip": db.lip.len()},
    });
    writeln!(report, "{line}").unwrap();
    for f in &build.failures {
        writeln!(report, "{}", json!({"kind": "failure", "id": f.image_id, "error": f.error})).unwrap();
    }
    write_out(a.filter.report.as_deref(), &report)
}

fn cmd_train(mut cfg: CliConfig, a: &TrainArgs) -> CliResult {
    let t = &mut cfg.train;
    if let Some(v) = a.c {
        t.c = v;
    }
    if let Some(v) = a.outer_iters {
        t.outer_iters = v;
    }
    if let Some(v) = a.inner_epochs {
        t.inner_epochs = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    let factors: Vec<usize> = a
        .latent
        .split(',')
        .map(|p| p.trim().parse().map_err(|_| CliError::Validation(format!("--latent: bad value {p:?}"))))
        .collect::<CliResult<_>>()?;
    let latent = LatentSpace::new(factors)?;
    let (examples, labels) = match (&a.db, &a.examples) {
        (Some(db), _) => {
            let db = load_db(db)?;
            let labels = db.label_space()?;
            (db.training_examples(), labels)
        }
        (None, Some(path)) => {
            let examples = load_examples(path)?;
            let labels = match &a.labels {
                Some(l) => {
                    let v: Vec<usize> = parse_list(l, 4, "--labels")?;
                    LabelSpace::new(v[0], v[1], v[2], v[3])?
                }
                None => {
                    let max =
                        |f: fn(&MakeupLabel) -> usize| examples.iter().map(|e| f(&e.label) + 1).max().unwrap_or(0);
                    LabelSpace::new(
                        max(|l| l.eyeshadow_template),
                        max(|l| l.eyeshadow_color),
                        max(|l| l.lip_color),
                        max(|l| l.foundation_color),
                    )?
                }
            };
            (examples, labels)
        }
        (None, None) => return Err(CliError::Validation("give --db or --examples".into())),
    };
    let (model, report) = train(&examples, latent, labels, &cfg.train)?;
    model.save(&a.model)?;
    println!(
        "trained examples={} labels={} outer_iterations={} objective={:.6} training_accuracy={:.4}",
        examples.len(),
        model.labels,
        report.outer_iterations,
        report.objective_history.last().copied().unwrap_or(f64::NAN),
        report.training_accuracy
    );
    Ok(())
}

fn load_examples(path: &Path) -> CliResult<Vec<TrainingExample>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: TrainingExample = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("{}: line {}: {e}", path.display(), no + 1)))?;
        out.push(ex);
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("{}: no examples", path.display())));
    }
    Ok(out)
}

fn load_face(a: &FaceArgs) -> CliResult<(image::RgbImage, LandmarkSet)> {
    let img = read_rgb8(&a.image)?;
    let lm = LandmarkSet::load(&a.landmarks)?;
    if (lm.width(), lm.height()) != (img.width() as usize, img.height() as usize) {
        return Err(CliError::Validation(format!(
            "{}: landmarks are for {}x{} but the image is {}x{}",
            a.landmarks.display(),
            lm.width(),
            lm.height(),
            img.width(),
            img.height()
        )));
    }
    Ok((img, lm))
}

fn cmd_recommend(a: &RecommendArgs) -> CliResult {
    let (img, lm) = load_face(&a.face)?;
    let model = LatentSvmModel::load(&a.model)?;
    let db = load_db(&a.face.db)?;
    for card in recommend(&model, &db, &img, &lm, a.k)? {
        println!("{}", serde_json::to_string(&card).expect("card serializes"));
    }
    Ok(())
}

fn cmd_synth(cfg: CliConfig, a: &SynthArgs) -> CliResult {
    let intensities = parse_intensities(&a.intensity)?;
    let (img, lm) = load_face(&a.face)?;
    let db = load_db(&a.face.db)?;
    let label = match (&a.label, &a.model) {
        (Some(l), _) => parse_label(l)?,
        (None, Some(m)) => {
            let model = LatentSvmModel::load(m)?;
            recommend(&model, &db, &img, &lm, 1)?.remove(0).label
        }
        (None, None) => return Err(CliError::Validation("give --label or --model".into())),
    };
    let spec = db.spec_for(&label, intensities)?;
    let mut synthesis = cfg.synthesis;
    synthesis.keep_stages = a.stages_dir.is_some();
    synthesis.validate()?;
    let out = synthesize(&img, &lm, &spec, &synthesis)?;
    write_rgb8(&a.before, &img)?;
    write_rgb8(&a.after, &out.after)?;
    if let Some(dir) = &a.stages_dir {
        std::fs::create_dir_all(dir).map_err(|e| vanity_core::Error::io(dir, e))?;
        for (stage, im) in &out.stages {
            let name = match stage {
                Stage::Foundation => "1_foundation.png",
                Stage::Eyeshadow => "2_eyeshadow.png",
                Stage::Lipstick => "3_lipstick.png",
            };
            write_rgb8(&dir.join(name), im)?;
        }
    }
    println!("{}", json!({"label": label, "intensities": intensities, "before": a.before, "after": a.after}));
    Ok(())
}

fn cmd_serve(mut cfg: CliConfig, a: &ServeArgs) -> CliResult {
    let s = &mut cfg.service;
    if let Some(v) = &a.listen {
        s.listen = v.clone();
    }
    if let Some(v) = &a.model {
        s.model = v.clone();
    }
    if let Some(v) = &a.db {
        s.db = v.clone();
    }
    if a.provider_url.is_some() {
        s.provider_url = a.provider_url.clone();
    }
    if let Some(v) = a.workers {
        s.workers = v;
    }
    if let Some(v) = a.max_upload_bytes {
        s.max_upload_bytes = v;
    }
    if a.persist_dir.is_some() {
        s.persist_dir = a.persist_dir.clone();
    }
    s.synthesis = cfg.synthesis;
    let service = cfg.service;
    service.validate()?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(format!("tokio runtime: {e}")))?;
    rt.block_on(async move {
        let state = tokio::task::spawn_blocking(move || AppState::load(&service).map(|s| (s, service)))
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let (state, service) = state?;
        let listener = vanity_service::bind(&service.listen)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {}: {e}", service.listen)))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?);
        vanity_service::serve(listener, state).await.map_err(|e| CliError::Runtime(format!("server error: {e}")))
    })
}

fn cmd_synthetic(c: &SyntheticCommand) -> CliResult {
    match c {
        SyntheticCommand::Looks { out, count, seed } => {
            let manifest = write_look_set(out, *count, *seed)?;
            println!("{}", manifest.display());
        }
        SyntheticCommand::Planted { out, total, plants, seed } => {
            let p = planted_manifest(out, *total, plants, *seed)?;
            let manifest = out.join("manifest.jsonl");
            let relative: Vec<_> = p
                .entries
                .iter()
                .map(|e| {
                    let mut e = e.clone();
                    e.image = PathBuf::from(e.image.file_name().expect("planted paths name a file"));
                    e.landmarks = PathBuf::from(e.landmarks.file_name().expect("planted paths name a file"));
                    e
                })
                .collect();
            write_atomic(&manifest, manifest_text(&relative).as_bytes())?;
            let mut expected = String::new();
            for (e, r) in p.entries.iter().zip(&p.expected) {
                writeln!(expected, "{}", json!({"id": e.id, "reason": r.map(|r| r.as_str())})).unwrap();
            }
            write_atomic(&out.join("expected.jsonl"), expected.as_bytes())?;
            if let Some(allow) = &p.thresholds.allowlist {
                let mut ids: Vec<&String> = allow.iter().collect();
                ids.sort();
                let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
                write_atomic(&out.join("allowlist.txt"), text.as_bytes())?;
            }
            println!("{}", manifest.display());
        }
        SyntheticCommand::Separable { out } => {
            let mut text = String::new();
            for ex in separable_fixture() {
                writeln!(text, "{}", serde_json::to_string(&ex).expect("example serializes")).unwrap();
            }
            write_atomic(out, text.as_bytes())?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let cfg = CliConfig::load(cli.config.as_deref())?;
    cfg.validate()?;
    match &cli.command {
        Command::Dataset(DatasetCommand::Filter(a)) => cmd_filter(cfg, a),
        Command::Dataset(DatasetCommand::Build(a)) => cmd_build(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Recommend(a) => cmd_recommend(a),
        Command::Synth(a) => cmd_synth(cfg, a),
        Command::Serve(a) => cmd_serve(cfg, a),
        Command::Synthetic(c) => cmd_synthetic(c),
        Command::Config => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| level.into());
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                CliError::Validation(_) => 2,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
