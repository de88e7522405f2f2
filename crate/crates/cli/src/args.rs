use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

const CONFIG_HELP: &str = "\
Settings resolve as: command-line flag, then the --config file, then the built-in default.
A config file holds flat `key = value` lines; keys are flag names with dashes replaced by
underscores (e.g. `batch_size = 16`). Unknown keys are reported and ignored.
Input paths default to the bundled synthetic mini-FrameNet.
Set AGED_LOG to error, warn, info or debug to control logging on standard error.";

#[derive(Debug, Parser)]
#[command(
    name = "aged",
    version,
    about = "Frame-semantic role labeling with definitions as queries"
)]
#[command(after_help = CONFIG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an ontology and an instance file and print counts.
    #[command(after_help = CONFIG_HELP)]
    Ingest(IngestArgs),
    /// Render definition templates.
    #[command(after_help = CONFIG_HELP)]
    Template(TemplateArgs),
    /// Train a model and write a checkpoint.
    #[command(after_help = CONFIG_HELP)]
    Train(TrainArgs),
    /// Predict arguments for every instance with a trained checkpoint.
    #[command(after_help = CONFIG_HELP)]
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    #[command(after_help = CONFIG_HELP)]
    Eval(EvalArgs),
    /// Train with some frames held out (zero- or few-shot) and evaluate.
    #[command(after_help = CONFIG_HELP)]
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Frame ontology (JSONL) [default: bundled frames.jsonl]
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Annotated instances (JSONL) [default: bundled train.jsonl]
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Also write the counts as JSON here, with a run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    /// Frame ontology (JSONL) [default: bundled frames.jsonl]
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Frame to render [default: every frame]
    #[arg(long)]
    pub frame: Option<String>,
    /// Frame element for fe-def and question layouts [default: every element]
    #[arg(long)]
    pub fe: Option<String>,
    /// Layout: frame-def, fe-def or question [default: frame-def]
    #[arg(long)]
    pub mode: Option<String>,
    /// Drop the <f> and <r> label markers.
    #[arg(long)]
    pub no_label_markers: bool,
    /// Also write the rendered lines here, with a run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TrainingArgs {
    /// Layout: frame-def, fe-def or question [default: frame-def]
    #[arg(long)]
    pub mode: Option<String>,
    /// Add one element-definition example per gold argument (frame-def only).
    #[arg(long)]
    pub augment_fe_defs: bool,
    /// Do not wrap the target word in <t> </t>.
    #[arg(long)]
    pub no_target_markers: bool,
    /// Drop the <f> and <r> label markers.
    #[arg(long)]
    pub no_label_markers: bool,
    /// Training epochs [default: 200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Examples per update [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seed for initialization and shuffling [default: 7]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden size [default: 32]
    #[arg(long)]
    pub d_model: Option<usize>,
    /// Transformer layers [default: 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// Attention heads [default: 4]
    #[arg(long)]
    pub heads: Option<usize>,
    /// Feed-forward width [default: 4 × d-model]
    #[arg(long)]
    pub d_ff: Option<usize>,
    /// Longest accepted pair in tokens [default: 256]
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Dropout rate during training [default: 0]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Parameter precision: f32 or f64 [default: f32]
    #[arg(long)]
    pub dtype: Option<String>,
    /// Worker threads [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Frame ontology (JSONL) [default: bundled frames.jsonl]
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Training instances (JSONL) [default: bundled train.jsonl]
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Dev instances for periodic evaluation and best-checkpoint selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Evaluate on --dev every N epochs [default: 5]
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Checkpoint path; the report, best checkpoint and manifest go beside it [default: model.json]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Frame ontology (JSONL) [default: bundled frames.jsonl]
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Instances to label (JSONL) [default: bundled test.jsonl]
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Trained checkpoint [default: model.json]
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Predictions (JSONL) [default: predictions.jsonl]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold instances (JSONL) [default: bundled test.jsonl]
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Predictions written by `predict` [default: predictions.jsonl]
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Also write the metrics here, with a run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include a per-frame breakdown.
    #[arg(long)]
    pub by_frame: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Frame ontology (JSONL) [default: bundled frames.jsonl]
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Training instances (JSONL) [default: bundled train.jsonl]
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test instances (JSONL) [default: bundled test.jsonl]
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Comma-separated frames to hold out [default: the first frame of the ontology]
    #[arg(long)]
    pub held_out: Option<String>,
    /// Training instances kept per held-out frame: an integer or `full` [default: 0]
    #[arg(long)]
    pub k: Option<String>,
    /// Report path [default: experiment.json]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[command(flatten)]
    pub common: Common,
}
