//! Subcommand implementations. Each returns a JSON result (printed with
//! `--json`) and a one-line human summary.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand};
use kinetext::actions::{ActionCatalog, ActionType};
use kinetext::classifier::{train_classifier, ClassifierModel, ClsArch, LabeledInstance};
use kinetext::features::{apply_z, FeatureExtractor, FeatureMatrix, FEATURE_DIM};
use kinetext::language::{
    assemble_feedback_prompt, export_finetune_dataset, DescriptionLabel, FinetuneInstance, InstructionTemplate,
    KnowledgeBase, LlmClient, UserProfile,
};
use kinetext::metrics::score_corpus;
use kinetext::motion::io::{load_sequence, save_sequence, PoseFormat};
use kinetext::motion::{convert_17_to_24, preprocess, segment_instances, Annotation, ExtremityLengths, MotionSequence, Vec3};
use kinetext::skeleton::CanonicalSkeleton;
use kinetext::synth::{synthesize_corpus, synthetic_descriptions, CorpusConfig};
use kinetext::vq::{train_vqvae, TokenSequence, VqModel};
use kinetext::{jsonl, Error, Result};
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::manifest::{self, DescriptionRecord, FeatureRecord, MotionRecord, TextRecord};
use crate::plot::{confusion_svg, curve_svg, ConfusionTable, CurveTable};

/// Reference timings from the original system, reported next to ours.
pub const REFERENCE_PREPROCESS_MS_PER_FRAME: f64 = 1.06;
pub const REFERENCE_TOKENIZE_MS_PER_FRAME: f64 = 1.28;
pub const REFERENCE_FEEDBACK_SECONDS: f64 = 4.91;

/// Points drawn per training-curve series.
const CURVE_POINTS: usize = 400;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Import one recorded sequence and cut it into annotated instances.
    Ingest(IngestArgs),
    /// Generate a synthetic labelled corpus.
    Synth(SynthArgs),
    /// Preprocess motion and compute the 315 per-frame features.
    Extract(ExtractArgs),
    /// Train the motion tokenizer.
    TrainVqvae(TrainVqArgs),
    /// Turn motion into discrete tokens.
    Tokenize(TokenizeArgs),
    /// Train the action classifier on participant-disjoint splits.
    TrainClassifier(TrainClsArgs),
    /// Predict the action type of motion.
    Classify(ClassifyArgs),
    /// Write instruction-tuning pairs as JSON lines.
    ExportFinetune(ExportArgs),
    /// Build a feedback prompt and query the language model.
    Feedback(FeedbackArgs),
    /// Score candidate texts against references.
    Evaluate(EvaluateArgs),
    /// Render a confusion matrix or training log as SVG.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Synth(_) => "synth",
            Command::Extract(_) => "extract",
            Command::TrainVqvae(_) => "train-vqvae",
            Command::Tokenize(_) => "tokenize",
            Command::TrainClassifier(_) => "train-classifier",
            Command::Classify(_) => "classify",
            Command::ExportFinetune(_) => "export-finetune",
            Command::Feedback(_) => "feedback",
            Command::Evaluate(_) => "evaluate",
            Command::Plot(_) => "plot",
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Pose file (.csv or binary).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// JSON-lines annotations for this sequence.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Joints in the input: 24, or 17 (CSV `t,j0x,...,j16z`).
    #[arg(long, default_value_t = 24)]
    pub joints: usize,
    #[arg(long, default_value_t = 0)]
    pub participant: u32,
    /// Id prefix for the produced instances (defaults to the file stem).
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// `all` or a comma-separated list of action slugs.
    #[arg(long, default_value = "all")]
    pub actions: String,
    /// Instances per action; each comes from a different participant.
    #[arg(long, default_value_t = 40)]
    pub per_class: u32,
    /// Overrides the config's root seed for the corpus.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3.0)]
    pub min_seconds: f64,
    #[arg(long, default_value_t = 5.0)]
    pub max_seconds: f64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Motion manifest (default: <run>/motion/manifest.jsonl).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainVqArgs {
    /// Feature manifest (default: <run>/features/manifest.jsonl).
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Tokenizer checkpoint (default: <run>/vqvae/model.ubvq).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// A single pose file; without it the whole motion manifest is tokenized.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainClsArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Classifier checkpoint (default: <run>/classifier/model.ubcl).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Pose file to classify.
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Token sequences (default: <run>/tokens.jsonl).
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    /// Descriptions `{"id","text","action_type","patterns"}` (default: <run>/descriptions.jsonl).
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    /// Leave the action type out of the instruction.
    #[arg(long)]
    pub tokens_only: bool,
    /// JSON array of 25 action labels replacing the built-in table.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output file (default: <run>/finetune/finetune.jsonl, or finetune_tokens_only.jsonl).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeedbackArgs {
    /// User profile JSON `{"age","pain","tug","role"}`.
    #[arg(long)]
    pub profile: PathBuf,
    /// File with the action description.
    #[arg(long)]
    pub desc: PathBuf,
    /// Action type as a number (1-25) or slug.
    #[arg(long)]
    pub action: String,
    /// Knowledge base JSON lines (default: the bundled illustrative base).
    #[arg(long)]
    pub kb: Option<PathBuf>,
    /// Leave expert knowledge out of the prompt.
    #[arg(long)]
    pub no_knowledge: bool,
    /// Answer offline with a deterministic reply.
    #[arg(long)]
    pub mock: bool,
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Candidates `{"id","text"}`, one per id.
    #[arg(long)]
    pub candidates: PathBuf,
    /// References `{"id","text"}`; several lines may share an id.
    #[arg(long)]
    pub references: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Confusion matrix CSV.
    #[arg(long, conflicts_with = "curve", required_unless_present = "curve")]
    pub confusion: Option<PathBuf>,
    /// Training log CSV (first column is the x axis).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Output SVG (default: next to the input).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub json: Value,
    pub summary: String,
}

pub struct Context {
    pub run_dir: PathBuf,
    pub config: PipelineConfig,
    /// The command line, echoed for provenance.
    pub argv: Vec<String>,
}

impl Context {
    fn path(&self, rel: &str) -> PathBuf {
        self.run_dir.join(rel)
    }

    fn echo_config(&self, command: &str) -> Result<()> {
        fs::create_dir_all(&self.run_dir)?;
        let text = format!("# {}\n{}", self.argv.join(" "), self.config.to_text());
        fs::write(self.run_dir.join(format!("{command}.config.txt")), text)?;
        Ok(())
    }
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<Outcome> {
    ctx.config.validate()?;
    ctx.echo_config(cmd.name())?;
    match cmd {
        Command::Ingest(a) => ingest(a, ctx),
        Command::Synth(a) => synth(a, ctx),
        Command::Extract(a) => extract(a, ctx),
        Command::TrainVqvae(a) => train_vq(a, ctx),
        Command::Tokenize(a) => tokenize(a, ctx),
        Command::TrainClassifier(a) => train_cls(a, ctx),
        Command::Classify(a) => classify(a, ctx),
        Command::ExportFinetune(a) => export(a, ctx),
        Command::Feedback(a) => feedback(a, ctx),
        Command::Evaluate(a) => evaluate(a, ctx),
        Command::Plot(a) => plot(a, ctx),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn parse_action(s: &str) -> Result<ActionType> {
    match s.parse::<u8>() {
        Ok(n) => ActionType::new(n),
        Err(_) => ActionType::from_slug(s).ok_or_else(|| Error::Validation(format!("unknown action '{s}'"))),
    }
}

/// 17-joint CSV: header `t,j0x,...,j16z`, joints in the documented order.
fn read_csv17(path: &Path) -> Result<MotionSequence> {
    let r = BufReader::new(fs::File::open(path)?);
    let parse_err = |frame: usize, message: String| Error::Parse { path: path.to_owned(), frame, message };
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(0, "empty file".into()))??;
    if header.split(',').count() != 1 + 17 * 3 {
        return Err(parse_err(0, "header must have t plus 51 joint columns".into()));
    }
    let mut frames = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(frames.len(), format!("bad number: {e}")))?;
        if v.len() != 52 || v.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(frames.len(), "expected 52 finite values".into()));
        }
        if times.last().is_some_and(|&p| v[0] <= p) {
            return Err(parse_err(frames.len(), "timestamps must increase".into()));
        }
        times.push(v[0]);
        let mut f = [Vec3::zeros(); 17];
        for (j, p) in f.iter_mut().enumerate() {
            *p = Vec3::new(v[1 + 3 * j], v[2 + 3 * j], v[3 + 3 * j]);
        }
        frames.push(f);
    }
    if frames.len() < 2 {
        return Err(parse_err(0, "need at least two frames".into()));
    }
    let rate = (frames.len() - 1) as f64 / (times[times.len() - 1] - times[0]);
    convert_17_to_24(&frames, rate, &ExtremityLengths::default())
}

fn ingest(a: &IngestArgs, ctx: &Context) -> Result<Outcome> {
    let seq = match a.joints {
        24 => load_sequence(&a.input, PoseFormat::from_path(&a.input))?,
        17 => read_csv17(&a.input)?,
        n => return Err(Error::Validation(format!("--joints must be 24 or 17, got {n}"))),
    };
    let anns: Vec<Annotation> = manifest::read(&a.annotations)?;
    let catalog = ActionCatalog::default();
    for ann in &anns {
        ann.validate(&catalog, seq.len())?;
    }
    let name = a.name.clone().unwrap_or_else(|| {
        a.input.file_stem().map_or("seq".into(), |s| s.to_string_lossy().into_owned())
    });
    let dir = ctx.path("motion");
    fs::create_dir_all(&dir)?;
    let manifest_path = dir.join("manifest.jsonl");
    let mut records: Vec<MotionRecord> =
        if manifest_path.exists() { manifest::read(&manifest_path)? } else { Vec::new() };
    let mut added = Vec::new();
    for (k, (part, ann)) in segment_instances(&seq, &anns)?.into_iter().enumerate() {
        let id = format!("{name}_{k:03}");
        let file = format!("{id}.ubpm");
        save_sequence(&part, &dir.join(&file), PoseFormat::Bin)?;
        added.push(id.clone());
        records.push(MotionRecord {
            id,
            participant: a.participant,
            action_type: ann.action_type,
            patterns: ann.pattern_indices.iter().map(|p| p.get()).collect(),
            frames: part.len(),
            sample_rate: part.sample_rate(),
            path: file,
        });
    }
    manifest::check_unique_ids(records.iter().map(|r| r.id.as_str()))?;
    jsonl::write(&manifest_path, &records)?;
    Ok(Outcome {
        summary: format!("ingested {} instances from {}", added.len(), a.input.display()),
        json: json!({ "instances": added, "manifest": manifest_path }),
    })
}

fn synth(a: &SynthArgs, ctx: &Context) -> Result<Outcome> {
    let actions: Vec<ActionType> = if a.actions == "all" {
        ActionType::all().collect()
    } else {
        a.actions.split(',').map(|s| parse_action(s.trim())).collect::<Result<_>>()?
    };
    let cfg = CorpusConfig {
        actions,
        participants: a.per_class,
        min_duration_s: a.min_seconds,
        max_duration_s: a.max_seconds,
        seed: a.seed.unwrap_or(ctx.config.seed),
        ..CorpusConfig::default()
    };
    let catalog = ActionCatalog::default();
    let dir = ctx.path("motion");
    fs::create_dir_all(&dir)?;
    let corpus = synthesize_corpus(&cfg, &catalog)?;
    let mut records = Vec::with_capacity(corpus.len());
    let mut descriptions = Vec::with_capacity(corpus.len() * 3);
    let mut frames = 0;
    for inst in &corpus {
        let file = format!("{}.ubpm", inst.id);
        save_sequence(&inst.sequence, &dir.join(&file), PoseFormat::Bin)?;
        frames += inst.sequence.len();
        let patterns: Vec<u8> = inst.annotation.pattern_indices.iter().map(|p| p.get()).collect();
        for text in synthetic_descriptions(inst.annotation.action_type, &inst.annotation.pattern_indices) {
            descriptions.push(DescriptionRecord {
                id: inst.id.clone(),
                text,
                action_type: inst.annotation.action_type,
                patterns: patterns.clone(),
            });
        }
        records.push(MotionRecord {
            id: inst.id.clone(),
            participant: inst.participant,
            action_type: inst.annotation.action_type,
            patterns,
            frames: inst.sequence.len(),
            sample_rate: inst.sequence.sample_rate(),
            path: file,
        });
    }
    let manifest_path = dir.join("manifest.jsonl");
    jsonl::write(&manifest_path, &records)?;
    jsonl::write(&ctx.path("descriptions.jsonl"), &descriptions)?;
    Ok(Outcome {
        summary: format!("synthesized {} instances ({frames} frames) into {}", records.len(), dir.display()),
        json: json!({ "instances": records.len(), "frames": frames, "manifest": manifest_path }),
    })
}

fn extract(a: &ExtractArgs, ctx: &Context) -> Result<Outcome> {
    let manifest_path = a.manifest.clone().unwrap_or_else(|| ctx.path("motion/manifest.jsonl"));
    let motion: Vec<MotionRecord> = manifest::read(&manifest_path)?;
    let out_dir = ctx.path("features");
    fs::create_dir_all(&out_dir)?;
    let canon = CanonicalSkeleton::standard();
    let extractor = FeatureExtractor::default();
    let (mut t_pre, mut t_feat, mut frames) = (0.0, 0.0, 0usize);
    let mut records = Vec::with_capacity(motion.len());
    for m in &motion {
        let seq = load_sequence(&manifest::resolve(&manifest_path, &m.path), PoseFormat::Bin)?;
        let t0 = Instant::now();
        let pre = preprocess(&seq, &canon)?;
        let t1 = Instant::now();
        let feats = extractor.extract(&pre)?;
        t_pre += (t1 - t0).as_secs_f64();
        t_feat += t1.elapsed().as_secs_f64();
        frames += seq.len();
        if !feats.degenerate_frames().is_empty() {
            log::warn!("{}: {} degenerate frames", m.id, feats.degenerate_frames().len());
        }
        let file = format!("{}.ubpf", m.id);
        feats.save(&out_dir.join(&file))?;
        records.push(FeatureRecord {
            id: m.id.clone(),
            participant: m.participant,
            action_type: m.action_type,
            frames: feats.rows(),
            path: file,
        });
    }
    let out = out_dir.join("manifest.jsonl");
    jsonl::write(&out, &records)?;
    let per_frame = |t: f64| if frames == 0 { 0.0 } else { 1000.0 * t / frames as f64 };
    let timing = json!({
        "frames": frames,
        "preprocess_ms_per_frame": per_frame(t_pre),
        "features_ms_per_frame": per_frame(t_feat),
        "reference_preprocess_ms_per_frame": REFERENCE_PREPROCESS_MS_PER_FRAME,
    });
    write_json(&out_dir.join("timing.json"), &timing)?;
    Ok(Outcome {
        summary: format!(
            "extracted {} feature matrices ({frames} frames, {:.3} ms/frame preprocessing + features)",
            records.len(),
            per_frame(t_pre + t_feat)
        ),
        json: json!({ "instances": records.len(), "manifest": out, "timing": timing }),
    })
}

fn load_features(path: &Path) -> Result<Vec<(FeatureRecord, FeatureMatrix)>> {
    let records: Vec<FeatureRecord> = manifest::read(path)?;
    manifest::check_unique_ids(records.iter().map(|r| r.id.as_str()))?;
    records
        .into_iter()
        .map(|r| {
            let m = FeatureMatrix::load(&manifest::resolve(path, &r.path))?;
            Ok((r, m))
        })
        .collect()
}

fn train_vq(a: &TrainVqArgs, ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.resolved();
    let path = a.features.clone().unwrap_or_else(|| ctx.path("features/manifest.jsonl"));
    let mut data = load_features(&path)?;
    if cfg.vq_sequences > 0 {
        data.truncate(cfg.vq_sequences);
    }
    let feats: Vec<FeatureMatrix> = data.into_iter().map(|(_, m)| m).collect();
    let dir = ctx.path("vqvae");
    fs::create_dir_all(&dir)?;
    let t0 = Instant::now();
    let (mut model, log) = train_vqvae(&feats, cfg.vq_arch, &cfg.vq)?;
    let seconds = t0.elapsed().as_secs_f64();
    model.save(&dir.join("model.ubvq"), json!({ "train": cfg.vq, "sequences": feats.len() }))?;
    fs::write(dir.join("training_curve.csv"), log.to_csv())?;
    let initial = log.initial_recon().unwrap_or(f64::NAN);
    let last = log.final_recon(100).unwrap_or(f64::NAN);
    let summary = json!({
        "sequences": feats.len(),
        "steps": cfg.vq.steps,
        "initial_recon": initial,
        "final_recon": last,
        "recon_drop": 1.0 - last / initial,
        "final_utilization": log.final_utilization(),
        "seconds": seconds,
        "model": dir.join("model.ubvq"),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome {
        summary: format!(
            "tokenizer trained on {} sequences in {seconds:.0} s: recon {initial:.4} -> {last:.4}, utilization {:.3}",
            feats.len(),
            log.final_utilization().unwrap_or(f64::NAN)
        ),
        json: summary,
    })
}

fn tokenize(a: &TokenizeArgs, ctx: &Context) -> Result<Outcome> {
    let model_path = a.model.clone().unwrap_or_else(|| ctx.path("vqvae/model.ubvq"));
    let mut model = VqModel::<f32>::load(&model_path)?;
    let canon = CanonicalSkeleton::standard();
    if let Some(input) = &a.input {
        let seq = load_sequence(input, PoseFormat::from_path(input))?;
        let tokens = model.tokenize(&seq, &canon)?;
        return Ok(Outcome { summary: format!("{} frames -> {} tokens", seq.len(), tokens.len()), json: json!({ "tokens": tokens }) });
    }
    let manifest_path = a.manifest.clone().unwrap_or_else(|| ctx.path("motion/manifest.jsonl"));
    let motion: Vec<MotionRecord> = manifest::read(&manifest_path)?;
    let stats = model.stats().cloned().ok_or_else(|| Error::Validation("tokenizer has no feature statistics".into()))?;
    let extractor = FeatureExtractor::default();
    let (mut t_pre, mut t_tok, mut frames) = (0.0, 0.0, 0usize);
    let mut out = Vec::with_capacity(motion.len());
    for m in &motion {
        let seq = load_sequence(&manifest::resolve(&manifest_path, &m.path), PoseFormat::Bin)?;
        let t0 = Instant::now();
        let feats = extractor.extract(&preprocess(&seq, &canon)?)?;
        let z = apply_z(&feats, &stats)?;
        let t1 = Instant::now();
        let tokens = model.tokenize_normalized(z.view())?;
        t_pre += (t1 - t0).as_secs_f64();
        t_tok += t1.elapsed().as_secs_f64();
        frames += seq.len();
        out.push(TokenSequence { id: m.id.clone(), tokens });
    }
    let path = ctx.path("tokens.jsonl");
    jsonl::write(&path, &out)?;
    let per_frame = |t: f64| if frames == 0 { 0.0 } else { 1000.0 * t / frames as f64 };
    let timing = json!({
        "frames": frames,
        "preprocess_ms_per_frame": per_frame(t_pre),
        "tokenize_ms_per_frame": per_frame(t_tok),
        "reference_preprocess_ms_per_frame": REFERENCE_PREPROCESS_MS_PER_FRAME,
        "reference_tokenize_ms_per_frame": REFERENCE_TOKENIZE_MS_PER_FRAME,
    });
    write_json(&ctx.path("tokenize_timing.json"), &timing)?;
    Ok(Outcome {
        summary: format!(
            "tokenized {} sequences: {:.3} ms/frame preprocessing, {:.3} ms/frame tokenization (reference {} + {})",
            out.len(),
            per_frame(t_pre),
            per_frame(t_tok),
            REFERENCE_PREPROCESS_MS_PER_FRAME,
            REFERENCE_TOKENIZE_MS_PER_FRAME
        ),
        json: json!({ "sequences": out.len(), "tokens": path, "timing": timing }),
    })
}

fn train_cls(a: &TrainClsArgs, ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.config.resolved();
    let path = a.features.clone().unwrap_or_else(|| ctx.path("features/manifest.jsonl"));
    let data: Vec<LabeledInstance> = load_features(&path)?
        .into_iter()
        .map(|(r, features)| LabeledInstance { id: r.id, participant: r.participant, action: r.action_type, features })
        .collect();
    let dir = ctx.path("classifier");
    fs::create_dir_all(&dir)?;
    let t0 = Instant::now();
    let arch = ClsArch { input_dim: FEATURE_DIM, ..ClsArch::default() };
    let (mut model, report) = train_classifier(&data, arch, &cfg.cls)?;
    let seconds = t0.elapsed().as_secs_f64();
    report.split.verify_disjoint()?;
    model.save(&dir.join("model.ubcl"), json!({ "train": cfg.cls }))?;
    fs::write(dir.join("training_curve.csv"), report.to_csv())?;
    let split = json!({
        "train_participants": report.split.train_participants,
        "val_participants": report.split.val_participants,
        "test_participants": report.split.test_participants,
    });
    write_json(&dir.join("split.json"), &split)?;
    let labels: Vec<String> = ActionType::all().map(|y| y.slug().to_string()).collect();
    let test = report.test.as_ref();
    if let Some(t) = test {
        fs::write(dir.join("confusion.csv"), t.confusion_csv(&labels))?;
        write_json(&dir.join("evaluation.json"), t)?;
    }
    let macro_f1 = test.map(|t| t.macro_f1);
    let summary = json!({
        "instances": data.len(),
        "best_epoch": report.best_epoch,
        "epochs": report.epochs.len(),
        "test_macro_f1": macro_f1,
        "test_accuracy": test.map(|t| t.accuracy),
        "masked_classes": report.masked_classes,
        "split": split,
        "seconds": seconds,
        "model": dir.join("model.ubcl"),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(Outcome {
        summary: format!(
            "classifier trained on {} instances in {seconds:.0} s: test macro F1 {}",
            data.len(),
            macro_f1.map_or("n/a".to_string(), |f| format!("{f:.4}"))
        ),
        json: summary,
    })
}

fn classify(a: &ClassifyArgs, ctx: &Context) -> Result<Outcome> {
    let model_path = a.model.clone().unwrap_or_else(|| ctx.path("classifier/model.ubcl"));
    let mut model = ClassifierModel::<f32>::load(&model_path)?;
    let seq = load_sequence(&a.input, PoseFormat::from_path(&a.input))?;
    let feats = FeatureExtractor::default().extract(&preprocess(&seq, &CanonicalSkeleton::standard())?)?;
    let p = model.predict(&feats)?;
    Ok(Outcome {
        summary: format!("{}: {} ({})", a.input.display(), p.action.name(), p.action.get()),
        json: json!({ "action_type": p.action.get(), "action": p.action.name(), "slug": p.action.slug(), "logits": p.logits }),
    })
}

fn export(a: &ExportArgs, ctx: &Context) -> Result<Outcome> {
    let tokens_path = a.tokens.clone().unwrap_or_else(|| ctx.path("tokens.jsonl"));
    let desc_path = a.descriptions.clone().unwrap_or_else(|| ctx.path("descriptions.jsonl"));
    let tokens: Vec<TokenSequence> = manifest::read(&tokens_path)?;
    let descs: Vec<DescriptionRecord> = manifest::read(&desc_path)?;
    let mut template = InstructionTemplate::default();
    if let Some(labels) = &a.labels {
        template = template.with_labels_json(&fs::read_to_string(labels)?)?;
    }
    let mut by_id: BTreeMap<&str, Vec<&DescriptionRecord>> = BTreeMap::new();
    for d in &descs {
        by_id.entry(d.id.as_str()).or_default().push(d);
    }
    let mut instances = Vec::new();
    for t in &tokens {
        let Some(ds) = by_id.get(t.id.as_str()) else {
            log::warn!("{}: no descriptions, not exported", t.id);
            continue;
        };
        let descriptions: Vec<DescriptionLabel> = ds
            .iter()
            .map(|d| DescriptionLabel { text: d.text.clone(), action: d.action_type, patterns: d.patterns.clone() })
            .collect();
        instances.push(FinetuneInstance {
            id: t.id.clone(),
            action: if a.tokens_only { None } else { Some(ds[0].action_type) },
            tokens: t.tokens.clone(),
            descriptions,
        });
    }
    let out = a.out.clone().unwrap_or_else(|| {
        ctx.path(if a.tokens_only { "finetune/finetune_tokens_only.jsonl" } else { "finetune/finetune.jsonl" })
    });
    if let Some(dir) = out.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = std::io::BufWriter::new(fs::File::create(&out)?);
    let summary = export_finetune_dataset(&instances, &template, &mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(Outcome {
        summary: format!("exported {} records for {} instances to {}", summary.records, instances.len(), out.display()),
        json: json!({ "instances": instances.len(), "records": summary.records, "skipped_empty": summary.skipped_empty,
                      "over_length": summary.over_length, "out": out }),
    })
}

fn feedback(a: &FeedbackArgs, ctx: &Context) -> Result<Outcome> {
    let t0 = Instant::now();
    let profile: UserProfile = serde_json::from_str(&fs::read_to_string(&a.profile)?)?;
    let description = fs::read_to_string(&a.desc)?;
    let action = parse_action(&a.action)?;
    let kb = match &a.kb {
        Some(p) => KnowledgeBase::load(p)?,
        None => KnowledgeBase::seed(),
    };
    let knowledge = if a.no_knowledge { None } else { Some(kb.retrieve(action)?) };
    let prompt = assemble_feedback_prompt(&profile, knowledge, &description)?;
    let mut llm = ctx.config.llm.clone();
    llm.mock |= a.mock;
    if let Some(u) = &a.base_url {
        llm.base_url = u.clone();
    }
    if let Some(m) = &a.model {
        llm.model = m.clone();
    }
    let client = LlmClient::new(llm.clone())?;
    let t_llm = Instant::now();
    let response = client.generate(&prompt)?;
    let llm_seconds = t_llm.elapsed().as_secs_f64();
    let dir = ctx.path("feedback");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("prompt.txt"), &prompt)?;
    fs::write(dir.join("response.txt"), &response)?;
    let seconds = t0.elapsed().as_secs_f64();
    log::info!("feedback took {seconds:.3} s end to end (reference {REFERENCE_FEEDBACK_SECONDS} s)");
    let result = json!({
        "action_type": action.get(),
        "knowledge": knowledge.is_some(),
        "mock": llm.mock,
        "response": response,
        "seconds": seconds,
        "llm_seconds": llm_seconds,
        "reference_seconds": REFERENCE_FEEDBACK_SECONDS,
        "prompt": dir.join("prompt.txt"),
    });
    write_json(&dir.join("feedback.json"), &result)?;
    Ok(Outcome { summary: response, json: result })
}

fn evaluate(a: &EvaluateArgs, ctx: &Context) -> Result<Outcome> {
    let cands: Vec<TextRecord> = manifest::read(&a.candidates)?;
    manifest::check_unique_ids(cands.iter().map(|c| c.id.as_str()))?;
    let refs: Vec<TextRecord> = manifest::read(&a.references)?;
    let mut by_id: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in &refs {
        by_id.entry(r.id.as_str()).or_default().push(r.text.clone());
    }
    let mut ref_sets = Vec::with_capacity(cands.len());
    for c in &cands {
        let set = by_id
            .get(c.id.as_str())
            .ok_or_else(|| Error::Validation(format!("no reference for candidate '{}'", c.id)))?;
        ref_sets.push(set.clone());
    }
    let texts: Vec<&str> = cands.iter().map(|c| c.text.as_str()).collect();
    let report = score_corpus(&texts, &ref_sets, ctx.config.bleu_mode)?;
    write_json(&ctx.path("scores.json"), &report)?;
    fs::write(ctx.path("scores.csv"), report.to_csv())?;
    Ok(Outcome {
        summary: format!(
            "BLEU-1 {:.2} BLEU-4 {:.2} ROUGE-1 {:.2} ROUGE-2 {:.2} ROUGE-L {:.2} CIDEr {:.3}",
            report.bleu1, report.bleu4, report.rouge1, report.rouge2, report.rouge_l, report.cider
        ),
        json: serde_json::to_value(&report)?,
    })
}

fn plot(a: &PlotArgs, ctx: &Context) -> Result<Outcome> {
    let _ = ctx;
    let (input, svg) = match (&a.confusion, &a.curve) {
        (Some(p), None) => (p, confusion_svg(&ConfusionTable::parse(&read_artifact(p)?)?)),
        (None, Some(p)) => (p, curve_svg(&CurveTable::parse(&read_artifact(p)?)?, CURVE_POINTS)),
        _ => return Err(Error::Validation("give exactly one of --confusion or --curve".into())),
    };
    let out = a.out.clone().unwrap_or_else(|| input.with_extension("svg"));
    fs::write(&out, svg)?;
    Ok(Outcome { summary: format!("wrote {}", out.display()), json: json!({ "svg": out, "csv": input }) })
}

fn read_artifact(p: &Path) -> Result<String> {
    if !p.exists() {
        return Err(Error::Validation(format!("artifact {} does not exist", p.display())));
    }
    Ok(fs::read_to_string(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_by_number_or_slug() {
        assert_eq!(parse_action("17").unwrap(), parse_action("side_bend").unwrap());
        assert!(parse_action("0").is_err());
        assert!(parse_action("moonwalk").is_err());
    }

    #[test]
    fn seventeen_joint_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let mut text = String::from("t");
        for j in 0..17 {
            text.push_str(&format!(",j{j}x,j{j}y,j{j}z"));
        }
        text.push('\n');
        for f in 0..3 {
            text.push_str(&format!("{}", f as f64 / 30.0));
            for j in 0..17 {
                text.push_str(&format!(",{},{},{}", j as f64 * 0.1, 1.0 + j as f64 * 0.05, 0.0));
            }
            text.push('\n');
        }
        fs::write(&p, &text).unwrap();
        let seq = read_csv17(&p).unwrap();
        assert_eq!(seq.len(), 3);
        assert!((seq.sample_rate() - 30.0).abs() < 1e-9);
        fs::write(&p, "t,a\n0,1\n").unwrap();
        assert!(read_csv17(&p).is_err());
    }
}
