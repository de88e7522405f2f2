use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use aged_core::framenet::{parse_instances, LoadStats};
use aged_core::template::{build_template, render_surface};
use aged_core::trainer::sibling_path;
use aged_core::{
    build_training_stream, build_vocabulary, evaluate, evaluate_by_frame, fresh_model, predict_all,
    run_holdout_experiment, train, AnnotatedInstance, AnyModel, DType, DevSet, FrameStore,
    InstancePrediction, KShot, MarkerOptions, Model, ModelSettings, Scalar, TemplateMode,
    TrainConfig, TrainingReport,
};
use serde_json::json;

use crate::args::{
    Command, EvalArgs, ExperimentArgs, IngestArgs, PredictArgs, TemplateArgs, TrainArgs,
    TrainingArgs,
};
use crate::config::Resolver;
use crate::error::CliError;
use crate::manifest::{ensure_parent, guard_outputs, RunManifest, Source};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Template(a) => template(a),
        Command::Train(a) => train_command(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn parse_mode(text: &str) -> Result<TemplateMode, String> {
    match text {
        "frame-def" => Ok(TemplateMode::FrameDef),
        "fe-def" => Ok(TemplateMode::FeDef),
        "question" => Ok(TemplateMode::Question),
        other => Err(format!(
            "unknown mode '{other}' (expected frame-def, fe-def or question)"
        )),
    }
}

fn parse_dtype(text: &str) -> Result<DType, String> {
    match text {
        "f32" => Ok(DType::F32),
        "f64" => Ok(DType::F64),
        other => Err(format!("unknown dtype '{other}' (expected f32 or f64)")),
    }
}

fn positive(key: &str, value: usize) -> Result<usize, CliError> {
    if value == 0 {
        return Err(CliError::Validation(format!("{key} must be at least 1")));
    }
    Ok(value)
}

/// Reads an input, recording its digest in the manifest.
fn read(source: &Source, manifest: &mut RunManifest) -> Result<Vec<u8>, CliError> {
    let bytes = source.read()?;
    manifest.add_input(source.label(), &bytes);
    Ok(bytes)
}

fn parse_store(source: &Source, manifest: &mut RunManifest) -> Result<FrameStore, CliError> {
    let bytes = read(source, manifest)?;
    FrameStore::from_reader(&bytes[..]).map_err(|e| CliError::from(e).context(source.label()))
}

fn parse_dataset(
    source: &Source,
    store: Option<&FrameStore>,
    manifest: &mut RunManifest,
) -> Result<(Vec<AnnotatedInstance>, LoadStats), CliError> {
    let bytes = read(source, manifest)?;
    parse_instances(&bytes[..], store).map_err(|e| CliError::from(e).context(source.label()))
}

fn parse_predictions(
    path: &Path,
    manifest: &mut RunManifest,
) -> Result<Vec<InstancePrediction>, CliError> {
    let source = Source::File(path.to_path_buf());
    let bytes = read(&source, manifest)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Validation(format!("{}: not valid UTF-8", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| {
                CliError::Validation(format!("{}: line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    ensure_parent(path)?;
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Input sources shared by several commands.
fn source(
    r: &mut Resolver,
    key: &str,
    flag: Option<PathBuf>,
    bundled: &'static str,
) -> Result<Source, CliError> {
    let path = r.optional(key, flag)?;
    let src = Source::or_bundled(path, bundled);
    r.set(key, src.label());
    Ok(src)
}

fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(a.common.config.as_deref())?;
    let frames = source(&mut r, "frames", a.frames, "frames.jsonl")?;
    let instances = source(&mut r, "instances", a.instances, "train.jsonl")?;
    let out = r.optional("out", a.out)?;
    let manifest_path = out.as_deref().map(|p| sibling_path(p, "manifest.json"));
    if let (Some(out), Some(m)) = (&out, &manifest_path) {
        guard_outputs(&[out, m], a.common.force)?;
    }

    let mut manifest = RunManifest::new("ingest");
    let store = parse_store(&frames, &mut manifest)?;
    let (data, stats) = parse_dataset(&instances, Some(&store), &mut manifest)?;
    let mut per_frame: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in &data {
        *per_frame.entry(inst.frame.as_str()).or_default() += 1;
    }
    let counts = json!({
        "frames": store.len(),
        "frame_elements": store.fe_count(),
        "instances": stats.instances,
        "arguments": data.iter().map(|i| i.arguments.len()).sum::<usize>(),
        "duplicate_fe_spans": stats.duplicate_fe_spans,
        "instances_per_frame": per_frame,
    });
    print_json(&counts)?;
    if let (Some(out), Some(m)) = (out, manifest_path) {
        manifest.config = r.resolved().clone();
        manifest.outputs = vec![out.display().to_string()];
        write_file(
            &out,
            (serde_json::to_string_pretty(&counts)? + "\n").as_bytes(),
        )?;
        manifest.finish(&m)?;
    }
    Ok(())
}

fn template(a: TemplateArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(a.common.config.as_deref())?;
    let frames = source(&mut r, "frames", a.frames, "frames.jsonl")?;
    let frame_name = r.optional("frame", a.frame)?;
    let fe = r.optional("fe", a.fe)?;
    let mode = r.parsed("mode", a.mode, "frame-def", parse_mode)?;
    let markers = if r.switch("no_label_markers", a.no_label_markers)? {
        MarkerOptions::default().without_label_markers()
    } else {
        MarkerOptions::default()
    };
    let out = r.optional("out", a.out)?;
    let manifest_path = out.as_deref().map(|p| sibling_path(p, "manifest.json"));
    if let (Some(out), Some(m)) = (&out, &manifest_path) {
        guard_outputs(&[out, m], a.common.force)?;
    }
    if mode == TemplateMode::FrameDef && fe.is_some() {
        return Err(CliError::Validation(
            "--fe applies only to the fe-def and question layouts".into(),
        ));
    }

    let mut manifest = RunManifest::new("template");
    let store = parse_store(&frames, &mut manifest)?;
    let selected = match &frame_name {
        Some(name) => vec![store.get(name)?],
        None => store.frames().iter().collect(),
    };
    let mut rendered = Vec::new();
    for frame in selected {
        let fes: Vec<Option<&str>> = match (mode, &fe) {
            (TemplateMode::FrameDef, _) => vec![None],
            (_, Some(fe)) => vec![Some(fe.as_str())],
            (_, None) => frame.fe_order.iter().map(|f| Some(f.as_str())).collect(),
        };
        for fe in fes {
            let t = build_template(frame, mode, fe, markers)?;
            let label = fe.map_or(frame.name.clone(), |fe| format!("{}.{fe}", frame.name));
            rendered.push((label, render_surface(&t)));
        }
    }
    let lines: Vec<String> = if rendered.len() == 1 {
        vec![rendered.remove(0).1]
    } else {
        rendered
            .into_iter()
            .map(|(label, text)| format!("{label}\t{text}"))
            .collect()
    };
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let (Some(out), Some(m)) = (out, manifest_path) {
        manifest.config = r.resolved().clone();
        manifest.outputs = vec![out.display().to_string()];
        write_file(&out, text.as_bytes())?;
        manifest.finish(&m)?;
    }
    Ok(())
}

struct Training {
    config: TrainConfig,
    settings: ModelSettings,
    dtype: DType,
}

fn resolve_training(r: &mut Resolver, a: TrainingArgs) -> Result<Training, CliError> {
    let defaults = TrainConfig::default();
    let model = ModelSettings::default();
    let mode = r.parsed("mode", a.mode, "frame-def", parse_mode)?;
    let augment = r.switch("augment_fe_defs", a.augment_fe_defs)?;
    if augment && mode != TemplateMode::FrameDef {
        return Err(CliError::Validation(
            "--augment-fe-defs requires --mode frame-def".into(),
        ));
    }
    let mut markers = MarkerOptions::default();
    if r.switch("no_target_markers", a.no_target_markers)? {
        markers = markers.without_target_markers();
    }
    if r.switch("no_label_markers", a.no_label_markers)? {
        markers = markers.without_label_markers();
    }
    let epochs = r.value("epochs", a.epochs, defaults.epochs)?;
    let batch_size = r.value("batch_size", a.batch_size, defaults.batch_size)?;
    let learning_rate = r.value("lr", a.lr, defaults.learning_rate)?;
    let seed = r.value("seed", a.seed, defaults.seed)?;
    let d_model = r.value("d_model", a.d_model, model.d_model)?;
    let n_layers = r.value("layers", a.layers, model.n_layers)?;
    let n_heads = r.value("heads", a.heads, model.n_heads)?;
    let d_ff = r.value("d_ff", a.d_ff, 4 * d_model)?;
    let max_len = r.value("max_len", a.max_len, model.max_len)?;
    let dropout = r.value("dropout", a.dropout, model.dropout)?;
    let dtype = r.parsed("dtype", a.dtype, "f32", parse_dtype)?;
    let workers = positive("workers", r.value("workers", a.workers, 1)?)?;
    if !(0.0..1.0).contains(&dropout) {
        return Err(CliError::Validation(format!(
            "dropout {dropout} must be in [0, 1)"
        )));
    }
    let config = TrainConfig {
        epochs,
        batch_size,
        learning_rate,
        seed,
        augment_fe_defs: augment,
        markers,
        template_mode: mode,
        workers,
        ..defaults
    };
    config.validate()?;
    Ok(Training {
        config,
        settings: ModelSettings {
            d_model,
            n_layers,
            n_heads,
            d_ff,
            max_len,
            dropout,
        },
        dtype,
    })
}

fn fit<T: Scalar>(
    train_set: &[AnnotatedInstance],
    store: &FrameStore,
    training: &Training,
    dev: Option<DevSet<'_>>,
) -> Result<TrainingReport, CliError> {
    let vocab = build_vocabulary(train_set, store);
    let stream = build_training_stream(train_set, store, &vocab, &training.config)?;
    log::info!(
        "training on {} examples, vocabulary {}",
        stream.len(),
        vocab.len()
    );
    let model: Model<T> = fresh_model(vocab, &training.settings, &training.config)?;
    let (_, report) = train(&stream, model, &training.config, dev)?;
    Ok(report)
}

fn train_command(a: TrainArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(a.common.config.as_deref())?;
    let frames = source(&mut r, "frames", a.frames, "frames.jsonl")?;
    let train_src = source(&mut r, "train", a.train, "train.jsonl")?;
    let dev_path = r.optional("dev", a.dev)?;
    let eval_every = r.value("eval_every", a.eval_every, 5)?;
    let checkpoint = r.value("checkpoint", a.checkpoint, PathBuf::from("model.json"))?;
    let mut training = resolve_training(&mut r, a.training)?;
    training.config.checkpoint_path = Some(checkpoint.clone());
    training.config.eval_every = if dev_path.is_some() { eval_every } else { 0 };

    let report_path = sibling_path(&checkpoint, "report.json");
    let best_path = sibling_path(&checkpoint, "best.json");
    let manifest_path = sibling_path(&checkpoint, "manifest.json");
    guard_outputs(
        &[&checkpoint, &report_path, &best_path, &manifest_path],
        a.common.force,
    )?;

    let mut manifest = RunManifest::new("train");
    let store = parse_store(&frames, &mut manifest)?;
    let (train_set, _) = parse_dataset(&train_src, Some(&store), &mut manifest)?;
    let dev_set = match &dev_path {
        Some(p) => Some(parse_dataset(&Source::File(p.clone()), Some(&store), &mut manifest)?.0),
        None => None,
    };
    manifest.seed = Some(training.config.seed);
    manifest.config = r.resolved().clone();
    manifest.outputs = [&checkpoint, &report_path]
        .iter()
        .map(|p| p.display().to_string())
        .chain(dev_set.as_ref().map(|_| best_path.display().to_string()))
        .collect();
    ensure_parent(&manifest_path)?;
    manifest.write(&manifest_path)?;

    let dev = dev_set.as_deref().map(|instances| DevSet {
        instances,
        store: &store,
    });
    let report = match training.dtype {
        DType::F32 => fit::<f32>(&train_set, &store, &training, dev)?,
        DType::F64 => fit::<f64>(&train_set, &store, &training, dev)?,
    };
    manifest.finish(&manifest_path)?;
    print_json(&json!({
        "examples": report.examples,
        "steps": report.steps,
        "final_loss": report.epochs.last().map(|e| e.mean_loss),
        "best_dev_f1": report.best_dev_f1,
        "best_epoch": report.best_epoch,
        "checkpoint": checkpoint,
        "report": report_path,
    }))
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(a.common.config.as_deref())?;
    let frames = source(&mut r, "frames", a.frames, "frames.jsonl")?;
    let instances = source(&mut r, "instances", a.instances, "test.jsonl")?;
    let checkpoint = r.value("checkpoint", a.checkpoint, PathBuf::from("model.json"))?;
    let out = r.value("out", a.out, PathBuf::from("predictions.jsonl"))?;
    let workers = positive("workers", r.value("workers", a.workers, 1)?)?;
    let manifest_path = sibling_path(&out, "manifest.json");
    guard_outputs(&[&out, &manifest_path], a.common.force)?;

    let mut manifest = RunManifest::new("predict");
    let store = parse_store(&frames, &mut manifest)?;
    let (data, _) = parse_dataset(&instances, Some(&store), &mut manifest)?;
    let bytes = read(&Source::File(checkpoint.clone()), &mut manifest)?;
    let model = AnyModel::from_slice(&bytes)
        .map_err(|e| CliError::from(e).context(checkpoint.display()))?;
    manifest.seed = Some(model.config().encoder.seed);
    manifest.config = r.resolved().clone();
    manifest.outputs = vec![out.display().to_string()];
    ensure_parent(&manifest_path)?;
    manifest.write(&manifest_path)?;

    let predictions = match &model {
        AnyModel::F32(m) => predict_all(&data, &store, m, workers)?,
        AnyModel::F64(m) => predict_all(&data, &store, m, workers)?,
    };
    let mut text = String::new();
    for p in &predictions {
        text.push_str(&serde_json::to_string(p)?);
        text.push('\n');
    }
    write_file(&out, text.as_bytes())?;
    manifest.finish(&manifest_path)?;
    let spans: usize = predictions
        .iter()
        .map(|p| p.predictions.iter().filter(|s| s.span.is_some()).count())
        .sum();
    print_json(&json!({"instances": predictions.len(), "spans": spans, "out": out}))
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(a.common.config.as_deref())?;
    let gold = source(&mut r, "gold", a.gold, "test.jsonl")?;
    let pred = r.value("pred", a.pred, PathBuf::from("predictions.jsonl"))?;
    let out = r.optional("out", a.out)?;
    let manifest_path = out.as_deref().map(|p| sibling_path(p, "manifest.json"));
    if let (Some(out), Some(m)) = (&out, &manifest_path) {
        guard_outputs(&[out, m], a.common.force)?;
    }

    let mut manifest = RunManifest::new("eval");
    let (gold_set, _) = parse_dataset(&gold, None, &mut manifest)?;
    let predictions = parse_predictions(&pred, &mut manifest)?;
    let metrics = evaluate(&predictions, &gold_set)?;
    let mut value = serde_json::to_value(metrics)?;
    if a.by_frame {
        value["per_frame"] = serde_json::to_value(evaluate_by_frame(&predictions, &gold_set)?)?;
    }
    print_json(&value)?;
    if let (Some(out), Some(m)) = (out, manifest_path) {
        manifest.config = r.resolved().clone();
        manifest.outputs = vec![out.display().to_string()];
        write_file(
            &out,
            (serde_json::to_string_pretty(&value)? + "\n").as_bytes(),
        )?;
        manifest.finish(&m)?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let mut r = Resolver::from_file(a.common.config.as_deref())?;
    let frames = source(&mut r, "frames", a.frames, "frames.jsonl")?;
    let train_src = source(&mut r, "train", a.train, "train.jsonl")?;
    let test_src = source(&mut r, "test", a.test, "test.jsonl")?;
    let held_out = r.optional("held_out", a.held_out)?;
    let k = r.parsed("k", a.k, "0", |s| s.parse::<KShot>())?;
    let out = r.value("out", a.out, PathBuf::from("experiment.json"))?;
    let training = resolve_training(&mut r, a.training)?;
    let manifest_path = sibling_path(&out, "manifest.json");
    guard_outputs(&[&out, &manifest_path], a.common.force)?;

    let mut manifest = RunManifest::new("experiment");
    let store = parse_store(&frames, &mut manifest)?;
    let (train_set, _) = parse_dataset(&train_src, Some(&store), &mut manifest)?;
    let (test_set, _) = parse_dataset(&test_src, Some(&store), &mut manifest)?;
    let held: BTreeSet<String> = match &held_out {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect(),
        None => store
            .frames()
            .first()
            .map(|f| f.name.clone())
            .into_iter()
            .collect(),
    };
    if held.is_empty() {
        return Err(CliError::Validation("no frames to hold out".into()));
    }
    for frame in &held {
        store.get(frame)?;
    }
    r.set(
        "held_out",
        held.iter().cloned().collect::<Vec<_>>().join(","),
    );
    manifest.seed = Some(training.config.seed);
    manifest.config = r.resolved().clone();
    manifest.outputs = vec![out.display().to_string()];
    ensure_parent(&manifest_path)?;
    manifest.write(&manifest_path)?;

    let report = match training.dtype {
        DType::F32 => run_holdout_experiment::<f32>(
            &train_set,
            &test_set,
            &store,
            &held,
            k,
            &training.settings,
            &training.config,
        )?,
        DType::F64 => run_holdout_experiment::<f64>(
            &train_set,
            &test_set,
            &store,
            &held,
            k,
            &training.settings,
            &training.config,
        )?,
    };
    write_file(
        &out,
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    manifest.finish(&manifest_path)?;
    print_json(&json!({
        "k": k.to_string(),
        "held_out_frames": report.held_out_frames,
        "train_occurrences": report.train_occurrences,
        "held_out": report.held_out,
        "overall": report.overall,
        "out": out,
    }))
}
