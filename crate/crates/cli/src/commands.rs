use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use elephant_core::ae::{classify_by_threshold, fit_ae_detector, reconstruction_losses, DEFAULT_PERCENTILES};
use elephant_core::eval::{
    batch_sweep, compare_models, cross_validate, epoch_sweep, CompareMode, ConfusionMatrix, SweepAxis, SweepTable,
    BATCH_SWEEP_EPOCHS, EPOCH_SWEEP_BATCH,
};
use elephant_core::ingest::{load_matrix, parse_csv, read_header, BadRowPolicy};
use elephant_core::models::{predict, train as train_model};
use elephant_core::synth::{separable_fixture, write_csv, FixtureConfig};
use elephant_core::{
    label_dataset, DatasetSchema, Family, FeatureMatrix, FlowLabel, LabelingPolicy, ModelConfig, TrainedModel,
};
use serde_json::json;

use crate::args::{CompareArgs, CvArgs, DataArgs, LabelArgs, ModelArgs, PredictArgs, SweepArgs, SynthArgs, TrainArgs};
use crate::manifest::{sha256_hex, DatasetRef, Outputs, RunManifest};

/// Bad flags or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Dataset {
    matrix: FeatureMatrix,
    reference: DatasetRef,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// `None` and `generic` infer the layout from the header; an existing file
/// is a TOML schema; anything else names a preset.
fn resolve_schema(arg: Option<&str>, bytes: &[u8]) -> Result<DatasetSchema> {
    Ok(match arg {
        None | Some("generic") => {
            let header = read_header(bytes)?;
            DatasetSchema::infer(&header.iter().map(String::as_str).collect::<Vec<_>>())?
        }
        Some(s) if Path::new(s).is_file() => DatasetSchema::load(Path::new(s))?,
        Some(s) => DatasetSchema::preset(s)?,
    })
}

/// Loads a table; an input lacking the schema's class column is accepted
/// unlabeled unless `labeled` is set.
fn load_dataset(path: &Path, data: &DataArgs, labeled: bool) -> Result<Dataset> {
    let bytes = read_input(path)?;
    let schema = resolve_schema(data.schema.as_deref(), &bytes)?;
    let policy = if data.drop_bad_rows { BadRowPolicy::DropRow } else { BadRowPolicy::FailFast };
    let matrix = match load_matrix(&bytes, &schema, policy) {
        Ok(m) => m,
        Err(first) if !labeled && schema.class_index().is_some() => {
            load_matrix(&bytes, &schema.without_class(), policy).map_err(|_| first)?
        }
        Err(e) => return Err(e).with_context(|| format!("loading {}", path.display())),
    };
    if labeled {
        matrix.require_labels().with_context(|| format!("{} has no class column", path.display()))?;
    }
    let reference = DatasetRef { path: path.display().to_string(), sha256: sha256_hex(&bytes), rows: matrix.n_rows() };
    Ok(Dataset { matrix, reference })
}

/// Configuration file (if any), then flag overrides. `family` and
/// `input_dim` are left for the caller.
fn base_config(m: &ModelArgs) -> Result<ModelConfig> {
    let mut cfg = match &m.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<ModelConfig>(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => ModelConfig::default(),
    };
    if let Some(e) = m.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = m.batch {
        cfg.batch_size = b;
    }
    if let Some(lr) = m.lr {
        cfg.learning_rate = lr;
    }
    if let Some(s) = m.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn model_config(m: &ModelArgs, family: Family, input_dim: usize) -> Result<ModelConfig> {
    let cfg = ModelConfig { family, input_dim, ..base_config(m)? };
    cfg.validate()?;
    Ok(cfg)
}

fn configs(m: &ModelArgs, input_dim: usize) -> Result<Vec<ModelConfig>> {
    m.family.families().into_iter().map(|f| model_config(m, f, input_dim)).collect()
}

/// Runs `f` for every family, keeping the others going when one fails; the
/// first failure is returned once all have run.
fn each_family(configs: &[ModelConfig], mut f: impl FnMut(&ModelConfig) -> Result<()>) -> Result<()> {
    let mut first = None;
    for cfg in configs {
        if let Err(e) = f(cfg).with_context(|| format!("{}", cfg.family)) {
            if configs.len() > 1 {
                eprintln!("error: {e:#}");
            }
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> elephant_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Columns: epoch, train_loss, train_acc, val_loss, val_acc, seconds.
fn history_csv(model: &TrainedModel) -> String {
    let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n");
    for e in &model.history.epochs {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.3}",
            e.epoch,
            e.train_loss,
            opt_cell(e.train_accuracy),
            e.val_loss,
            opt_cell(e.val_accuracy),
            e.seconds
        );
    }
    s
}

fn default_output(out_dir: &Path, input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map_or("flows".into(), |s| s.to_string_lossy());
    out_dir.join(format!("{stem}{suffix}"))
}

fn same_file(a: &Path, b: &Path) -> bool {
    matches!((a.canonicalize(), b.canonicalize()), (Ok(x), Ok(y)) if x == y)
}

pub fn label(a: &LabelArgs) -> Result<()> {
    let bytes = read_input(&a.input)?;
    let schema = resolve_schema(a.schema.as_deref(), &bytes)?;
    let table = match parse_csv(&bytes[..], &schema) {
        Ok(t) => t,
        Err(first) if schema.class_index().is_some() => {
            parse_csv(&bytes[..], &schema.without_class()).map_err(|_| first)?
        }
        Err(e) => return Err(e.into()),
    };
    let policy = match &a.policy {
        Some(p) => LabelingPolicy::load(p).with_context(|| format!("policy {}", p.display()))?,
        None => LabelingPolicy::default(),
    };
    let records = table.flow_records()?;
    let labels = label_dataset(&records, &policy);
    let output = a.output.clone().unwrap_or_else(|| default_output(&a.out.out_dir, &a.input, "_labeled.csv"));
    if same_file(&output, &a.input) {
        bail!(usage(format!("refusing to overwrite the input {}", a.input.display())));
    }
    let labeled = csv_bytes(|buf| table.write_labeled(&labels, buf).map(drop))?;

    let config = json!({ "schema": schema.name, "schema_sha256": schema.hash(), "policy": policy });
    let dataset = DatasetRef { path: a.input.display().to_string(), sha256: sha256_hex(&bytes), rows: labels.len() };
    let mut out = Outputs::new(&a.out.out_dir, RunManifest::begin("label", config, vec![dataset], None))?;
    out.write_path(&output, labeled)?;
    out.finish("label")?;

    let elephants = labels.iter().filter(|l| l.is_elephant()).count();
    let share = |n: usize| if labels.is_empty() { 0.0 } else { 100.0 * n as f64 / labels.len() as f64 };
    println!(
        "{} flows: {elephants} elephants ({:.2}%), {} mice ({:.2}%) -> {}",
        labels.len(),
        share(elephants),
        labels.len() - elephants,
        share(labels.len() - elephants),
        output.display()
    );
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.input, &a.data, true)?;
    let configs = configs(&a.model, ds.matrix.n_features())?;
    let manifest = RunManifest::begin("train", json!(configs), vec![ds.reference.clone()], Some(configs[0].seed));
    let mut out = Outputs::new(&a.out.out_dir, manifest)?;
    let result = each_family(&configs, |cfg| {
        let fam = cfg.family;
        let (mut model, sweep) = match fam {
            Family::Autoencoder => {
                let (m, s) = fit_ae_detector(&ds.matrix, cfg, &DEFAULT_PERCENTILES)?;
                (m, Some(s))
            }
            _ => (train_model(cfg, &ds.matrix)?, None),
        };
        model.manifest_id = Some(out.id());
        let path = out.write(&format!("model_{fam}.json"), model.to_json()?)?;
        out.write(&format!("history_{fam}.csv"), history_csv(&model))?;
        let last = model.history.last().map_or(f64::NAN, |e| e.train_loss);
        println!(
            "{fam}: {} epochs, final loss {last:.6}, {} parameters, {:.1}s -> {}",
            model.history.epochs.len(),
            model.parameter_count,
            model.total_seconds,
            path.display()
        );
        if let Some(s) = sweep {
            out.write(&format!("threshold_sweep_{fam}.csv"), csv_bytes(|b| s.write_csv(b))?)?;
            println!(
                "{fam}: threshold {:.6e} at percentile {}, validation accuracy {:.4}",
                s.best_threshold, s.best_percentile, s.best_accuracy
            );
        }
        Ok(())
    });
    out.finish(&format!("train_{}", a.model.family.as_str()))?;
    result
}

pub fn cv(a: &CvArgs) -> Result<()> {
    let ds = load_dataset(&a.input, &a.data, true)?;
    let configs = configs(&a.model, ds.matrix.n_features())?;
    let config = json!({ "folds": a.folds, "models": configs });
    let mut out = Outputs::new(
        &a.out.out_dir,
        RunManifest::begin("cv", config, vec![ds.reference.clone()], Some(configs[0].seed)),
    )?;
    let result = each_family(&configs, |cfg| {
        let fam = cfg.family;
        let mut report = cross_validate(&ds.matrix, cfg, a.folds)?;
        report.manifest_id = Some(out.id());
        out.write(&format!("cv_{fam}.json"), report.to_json()?)?;
        out.write(&format!("cv_{fam}.txt"), report.to_text())?;
        out.write(&format!("confusion_{fam}.csv"), csv_bytes(|b| report.write_confusion_csv(b))?)?;
        out.write(&format!("cv_timing_{fam}.csv"), csv_bytes(|b| report.write_timing_csv(b))?)?;
        print!("{}", report.to_text());
        Ok(())
    });
    out.finish(&format!("cv_{}", a.model.family.as_str()))?;
    result
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let axis = SweepAxis::from(a.axis);
    let values = a.values.clone().unwrap_or_else(|| axis.default_values());
    if values.is_empty() || values.contains(&0) {
        bail!(usage(format!("--values must be positive integers, got {values:?}")));
    }
    let fixed = match axis {
        SweepAxis::Epochs => a.model.batch.unwrap_or(EPOCH_SWEEP_BATCH),
        SweepAxis::Batch => a.model.epochs.unwrap_or(BATCH_SWEEP_EPOCHS),
    };
    let ds = load_dataset(&a.input, &a.data, true)?;
    let configs = configs(&a.model, ds.matrix.n_features())?;
    let config = json!({ "axis": axis, "values": values, "fixed": fixed, "models": configs });
    let mut out = Outputs::new(
        &a.out.out_dir,
        RunManifest::begin("sweep", config, vec![ds.reference.clone()], Some(configs[0].seed)),
    )?;
    let result = each_family(&configs, |cfg| {
        let mut table: SweepTable = match axis {
            SweepAxis::Epochs => epoch_sweep(&ds.matrix, cfg, &values, fixed)?,
            SweepAxis::Batch => batch_sweep(&ds.matrix, cfg, &values, fixed)?,
        };
        table.manifest_id = Some(out.id());
        let stem = format!("sweep_{axis}_{}", cfg.family);
        let csv = csv_bytes(|b| table.write_csv(b))?;
        out.write(&format!("{stem}.csv"), &csv)?;
        out.write(&format!("{stem}.json"), table.to_json()?)?;
        out.write(&format!("{stem}_timing.csv"), csv_bytes(|b| table.write_timing_csv(b))?)?;
        println!("{} ({} held at {fixed})", cfg.family, if axis == SweepAxis::Epochs { "batch" } else { "epochs" });
        print!("{}", String::from_utf8_lossy(&csv));
        Ok(())
    });
    out.finish(&format!("sweep_{axis}_{}", a.model.family.as_str()))?;
    result
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let mode = match a.folds {
        None => CompareMode::Holdout,
        Some(k) if k >= 2 => CompareMode::CrossValidate(k),
        Some(k) => bail!(usage(format!("--folds must be at least 2, got {k}"))),
    };
    let datasets = a.inputs.iter().map(|p| load_dataset(p, &a.data, true)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = a
        .inputs
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    let base = base_config(&a.model)?;
    let families = a.model.family.families();
    let config = json!({ "mode": mode, "families": families, "base": base });
    let refs = datasets.iter().map(|d| d.reference.clone()).collect();
    let mut out = Outputs::new(&a.out.out_dir, RunManifest::begin("compare", config, refs, Some(base.seed)))?;
    let pairs: Vec<(&str, &FeatureMatrix)> =
        names.iter().map(String::as_str).zip(datasets.iter().map(|d| &d.matrix)).collect();
    let mut report = compare_models(&pairs, &families, &base, mode)?;
    report.manifest_id = Some(out.id());
    out.write("compare.json", report.to_json()?)?;
    out.write("compare.txt", report.to_text())?;
    out.finish("compare")?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let ds = load_dataset(&a.input, &a.data, false)?;
    if ds.matrix.feature_names() != model.feature_names.as_slice() {
        return Err(elephant_core::Error::Schema(format!(
            "{} has features {:?}, the model expects {:?}",
            a.input.display(),
            ds.matrix.feature_names(),
            model.feature_names
        ))
        .into());
    }
    let (scores, labels): (Vec<f64>, Vec<FlowLabel>) = match model.family() {
        Family::Autoencoder => {
            let threshold = model.threshold.context("autoencoder model file carries no threshold")?;
            let profile = reconstruction_losses(&model, &ds.matrix)?;
            profile.losses.iter().map(|&l| (l, classify_by_threshold(l, threshold))).unzip()
        }
        _ => predict(&model, &ds.matrix)?.into_iter().map(|p| (p.probability, p.label)).unzip(),
    };
    let mut text = String::from("row,score,label\n");
    for (i, (s, l)) in scores.iter().zip(&labels).enumerate() {
        let _ = writeln!(text, "{i},{s},{l}");
    }
    let fam = model.family();
    let output = a.output.clone().unwrap_or_else(|| a.out.out_dir.join(format!("predictions_{fam}.csv")));
    let config =
        json!({ "model": a.model.display().to_string(), "model_sha256": sha256_hex(model.to_json()?.as_bytes()) });
    let mut out = Outputs::new(
        &a.out.out_dir,
        RunManifest::begin("predict", config, vec![ds.reference.clone()], Some(model.seed())),
    )?;
    out.write_path(&output, text)?;
    out.finish(&format!("predict_{fam}"))?;

    let elephants = labels.iter().filter(|l| l.is_elephant()).count();
    print!("{}: {} rows, {elephants} predicted elephants", fam, labels.len());
    if let Some(actual) = ds.matrix.labels() {
        let cm = ConfusionMatrix::from_labels(actual, &labels)?;
        print!(", accuracy {:.6} (tp {} tn {} fp {} fn {})", cm.accuracy()?, cm.tp, cm.tn, cm.fp, cm.fn_);
    }
    println!(" -> {}", output.display());
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = FixtureConfig {
        rows: a.rows,
        features: a.features,
        elephant_share: a.elephant_share,
        seed: a.seed.unwrap_or(elephant_core::DEFAULT_SEED),
    };
    let data = separable_fixture(&cfg)?;
    let bytes = csv_bytes(|b| write_csv(&data, b))?;
    let output = a.output.clone().unwrap_or_else(|| a.out.out_dir.join("fixture.csv"));
    let config = json!({ "rows": cfg.rows, "features": cfg.features, "elephant_share": cfg.elephant_share });
    let mut out = Outputs::new(&a.out.out_dir, RunManifest::begin("synth", config, vec![], Some(cfg.seed)))?;
    out.write_path(&output, bytes)?;
    out.finish("synth")?;
    let (mice, elephants) = data.class_counts().unwrap_or_default();
    println!(
        "{} rows x {} features, {elephants} elephants, {mice} mice -> {}",
        data.n_rows(),
        data.n_features(),
        output.display()
    );
    Ok(())
}
