use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::CliConfig;
use super::Command;
use crate::corpus::{
    embed_corpus, generate_synthetic_corpus, load_embedded_corpus, load_user_corpus, persist_embedded_corpus,
    split_dataset, write_user_corpus, EmbeddedFormat, EmbeddedUser, Label, Split, TweetRecord, UserRecord,
};
use crate::error::{Error, Result};
use crate::evaluation::{ablate_corpus, emit_report, evaluate, loss_rows, write_loss_curve, LossRow};
use crate::lstm::{pretrain_autoencoder, AutoencoderConfig, PretrainOutput};
use crate::training::{
    predict_corpus, run_gradient_suite, train_with_autoencoder, AutoencoderCheckpoint, GradSuiteConfig,
    ModelCheckpoint, TrainHistory,
};

pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

/// One line of `predict` output; `eval --predictions` reads it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub user_id: String,
    pub probability: f64,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Label>,
    pub weights: Vec<f64>,
    pub top_ordinals: Vec<usize>,
}

pub(super) fn dispatch(command: &Command, config: CliConfig) -> Result<()> {
    let out = config.out.clone().expect("resolved config has an output directory");
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_file(&out.join(EFFECTIVE_CONFIG), config.to_toml()?.as_bytes())?;

    match command {
        Command::Synth { output } => synth(&config, &target(&out, output, "corpus.lmil")),
        Command::Preprocess { input, output } => {
            preprocess(&config, input, &target(&out, output, "normalized.jsonl"))
        }
        Command::Embed { input, output, import } => {
            embed(&config, input, &target(&out, output, "embedded.lmil"), *import)
        }
        Command::PretrainAe { corpus, no_split } => pretrain(&config, corpus, *no_split, &out),
        Command::Train { corpus, autoencoder } => train(&config, corpus, autoencoder.as_deref(), &out),
        Command::Eval {
            checkpoint,
            corpus,
            predictions,
            history,
        } => eval(
            &config,
            checkpoint.as_deref().zip(corpus.as_deref()),
            predictions.as_deref(),
            history.as_deref(),
            &out,
        ),
        Command::Predict {
            checkpoint,
            corpus,
            output,
        } => predict(&config, checkpoint, corpus, &target(&out, output, "predictions.jsonl")),
        Command::Ablate { corpus, autoencoder } => ablate(&config, corpus, autoencoder.as_deref(), &out),
        Command::Gradcheck { inject_fault } => gradcheck(&config, *inject_fault, &out),
    }
}

fn target(out: &Path, explicit: &Option<PathBuf>, default: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out.join(default))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_file(path, (text + "\n").as_bytes())
}

fn save_corpus(users: &[EmbeddedUser], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    persist_embedded_corpus(users, path, EmbeddedFormat::from_path(path))
}

fn synth(config: &CliConfig, output: &Path) -> Result<()> {
    let corpus = generate_synthetic_corpus(&config.synth)?;
    save_corpus(&corpus.users, output)?;
    #[derive(Serialize)]
    struct Bookkeeping<'a> {
        shift: &'a [f64],
        signal_rows: Vec<(&'a str, &'a [usize])>,
    }
    let book = Bookkeeping {
        shift: &corpus.shift,
        signal_rows: corpus
            .users
            .iter()
            .zip(&corpus.signal_rows)
            .map(|(u, r)| (u.user_id.as_str(), r.as_slice()))
            .collect(),
    };
    let book_path = output.with_file_name("signal_rows.json");
    write_json(&book_path, &book)?;
    println!("wrote {} users to {}", corpus.users.len(), output.display());
    Ok(())
}

fn preprocess(config: &CliConfig, input: &Path, output: &Path) -> Result<()> {
    let normalizer = config.text.normalizer()?;
    let users: Vec<UserRecord> = load_user_corpus(input)?
        .into_iter()
        .map(|u| UserRecord {
            tweets: u
                .tweets
                .into_iter()
                .map(|t| TweetRecord {
                    text: normalizer.normalize(&t.text),
                    ..t
                })
                .collect(),
            ..u
        })
        .collect();
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_user_corpus(&users, output)?;
    println!("normalized {} users into {}", users.len(), output.display());
    Ok(())
}

fn embed(config: &CliConfig, input: &Path, output: &Path, import: bool) -> Result<()> {
    let users = if import {
        load_embedded_corpus(input)?
    } else {
        embed_corpus(&load_user_corpus(input)?, config.embed.dim, config.embed.hash_seed)?
    };
    save_corpus(&users, output)?;
    println!("wrote {} embedded users to {}", users.len(), output.display());
    Ok(())
}

fn load_split(config: &CliConfig, corpus: &Path) -> Result<Split<EmbeddedUser>> {
    let users = load_embedded_corpus(corpus)?;
    if users.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no users", corpus.display())));
    }
    split_dataset(&users, &config.split)
}

fn print_losses(name: &str, rows: &[LossRow]) {
    for r in rows {
        match r.val_loss {
            Some(v) => println!("{name} epoch {:>4}  train {:.6}  val {:.6}", r.epoch, r.train_loss, v),
            None => println!("{name} epoch {:>4}  loss {:.6}", r.epoch, r.train_loss),
        }
    }
}

fn run_pretrain(config: &AutoencoderConfig, users: &[EmbeddedUser], out: &Path) -> Result<PretrainOutput> {
    let pretrained = pretrain_autoencoder(users, config)?;
    let rows = loss_rows(&pretrained.loss_history, None);
    print_losses("autoencoder", &rows);
    write_loss_curve(&out.join("ae_loss_curve.csv"), &rows)?;
    AutoencoderCheckpoint {
        config: config.clone(),
        params: pretrained.params.clone(),
        loss_history: pretrained.loss_history.clone(),
    }
    .save(&out.join("autoencoder.lmck"))?;
    Ok(pretrained)
}

fn pretrain(config: &CliConfig, corpus: &Path, no_split: bool, out: &Path) -> Result<()> {
    let users = if no_split {
        load_embedded_corpus(corpus)?
    } else {
        load_split(config, corpus)?.train
    };
    run_pretrain(&config.train.autoencoder_config(), &users, out)?;
    println!("wrote {}", out.join("autoencoder.lmck").display());
    Ok(())
}

/// Loads a pretrained autoencoder, or trains one on `train` and saves it.
fn stage_one(
    config: &mut CliConfig,
    autoencoder: Option<&Path>,
    train: &[EmbeddedUser],
    out: &Path,
) -> Result<PretrainOutput> {
    match autoencoder {
        Some(path) => {
            let ck = AutoencoderCheckpoint::load(path)?;
            // Keep the snapshot truthful about the encoder actually used.
            config.train.autoencoder = AutoencoderConfig {
                seed: config.seed,
                ..ck.config
            };
            Ok(PretrainOutput {
                params: ck.params,
                loss_history: ck.loss_history,
            })
        }
        None => run_pretrain(&config.train.autoencoder_config(), train, out),
    }
}

fn train(config: &CliConfig, corpus: &Path, autoencoder: Option<&Path>, out: &Path) -> Result<()> {
    let mut config = config.clone();
    let split = load_split(&config, corpus)?;
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        save_corpus(part, &out.join(format!("{name}.lmil")))?;
    }
    let pretrained = stage_one(&mut config, autoencoder, &split.train, out)?;
    let result = train_with_autoencoder(pretrained, &split.train, &split.val, &config.train)?;
    let h = &result.history;
    let rows = loss_rows(&h.train_loss, Some(&h.val_loss));
    print_losses("head", &rows);
    write_loss_curve(&out.join("loss_curve.csv"), &rows)?;
    write_json(&out.join("history.json"), h)?;
    result.checkpoint.save(&out.join("model.lmck"))?;
    println!(
        "best epoch {} of {} (validation loss {:.6}); wrote {}",
        h.best_epoch,
        h.val_loss.len(),
        result.checkpoint.metadata.best_val_loss,
        out.join("model.lmck").display()
    );
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

fn eval(
    config: &CliConfig,
    model_input: Option<(&Path, &Path)>,
    predictions: Option<&Path>,
    history: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let (probs, truth, threshold): (Vec<f64>, _, _) = match (model_input, predictions) {
        (Some((checkpoint, corpus)), _) => {
            let model = ModelCheckpoint::load(checkpoint)?;
            let users = load_embedded_corpus(corpus)?;
            let truth = crate::corpus::require_labels(&users)?;
            let probs = predict_corpus(&model, &users)?.into_iter().map(|p| p.probability).collect();
            (probs, truth, model.threshold())
        }
        (None, Some(path)) => {
            let records = read_predictions(path)?;
            let truth = records
                .iter()
                .map(|r| r.truth.ok_or_else(|| Error::MissingLabel(r.user_id.clone())))
                .collect::<Result<Vec<_>>>()?;
            let probs = records.iter().map(|r| r.probability).collect();
            (probs, truth, config.train.threshold)
        }
        (None, None) => return Err(Error::Config("eval needs --checkpoint with --corpus, or --predictions".into())),
    };
    let report = evaluate(&probs, &truth, threshold)?;
    let rows = match history {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let h: TrainHistory =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            Some(loss_rows(&h.train_loss, Some(&h.val_loss)))
        }
        None => None,
    };
    emit_report(&report, rows.as_deref(), out)?;
    for w in &report.metrics.warnings {
        eprintln!("lmilatt: warning: {w}");
    }
    let m = &report.metrics;
    println!(
        "users {}  accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  auc {}",
        report.users,
        m.accuracy,
        m.precision,
        m.recall,
        m.f1,
        report.auc().map_or("n/a".to_string(), |a| format!("{a:.4}"))
    );
    Ok(())
}

fn predict(config: &CliConfig, checkpoint: &Path, corpus: &Path, output: &Path) -> Result<()> {
    let model = ModelCheckpoint::load(checkpoint)?;
    let users = load_embedded_corpus(corpus)?;
    let predictions = predict_corpus(&model, &users)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = BufWriter::new(file);
    for (p, u) in predictions.into_iter().zip(&users) {
        let top_ordinals = p.top_ordinals(config.predict.top_k);
        let record = PredictionRecord {
            user_id: p.user_id,
            probability: p.probability,
            label: p.label,
            truth: u.label,
            weights: p.weights,
            top_ordinals,
        };
        let line = serde_json::to_string(&record).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(output, e))?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    println!("wrote {} predictions to {}", users.len(), output.display());
    Ok(())
}

fn ablate(config: &CliConfig, corpus: &Path, autoencoder: Option<&Path>, out: &Path) -> Result<()> {
    let mut config = config.clone();
    let split = load_split(&config, corpus)?;
    let pretrained = stage_one(&mut config, autoencoder, &split.train, out)?;
    let report = ablate_corpus(&pretrained.params, &split, &config.train)?;
    write_json(&out.join("ablation.json"), &report)?;

    let table = out.join("ablation.csv");
    let mut w = csv::Writer::from_path(&table).map_err(|e| Error::Format(format!("{}: {e}", table.display())))?;
    #[derive(Serialize)]
    struct Row {
        pooling: String,
        accuracy: f64,
        precision: f64,
        recall: f64,
        f1: f64,
        auc: Option<f64>,
        best_epoch: usize,
    }
    for arm in &report.arms {
        let m = &arm.test.metrics;
        let row = Row {
            pooling: arm.pooling.to_string(),
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            auc: arm.test.auc(),
            best_epoch: arm.best_epoch,
        };
        w.serialize(row).map_err(|e| Error::Format(format!("{}: {e}", table.display())))?;
        emit_report(&arm.test, None, &out.join("ablation").join(arm.pooling.to_string()))?;
        println!("{:<10} accuracy {:.4}  f1 {:.4}", arm.pooling.to_string(), m.accuracy, m.f1);
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    Ok(())
}

fn gradcheck(config: &CliConfig, inject_fault: bool, out: &Path) -> Result<()> {
    let suite = GradSuiteConfig {
        seed: config.seed,
        ..GradSuiteConfig::default()
    };
    let report = run_gradient_suite(&suite, inject_fault)?;
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        max_rel_error: f64,
        worst: &'a str,
        coordinates: usize,
        passed: bool,
    }
    let rows: Vec<Row> = report
        .checks
        .iter()
        .map(|c| Row {
            name: &c.name,
            max_rel_error: c.report.max_rel_error,
            worst: &c.worst_block,
            coordinates: c.report.coordinates,
            passed: c.report.passes(report.tolerance),
        })
        .collect();
    for r in &rows {
        println!(
            "{:<16} {:>6} params  max rel error {:.3e}  {}",
            r.name,
            r.coordinates,
            r.max_rel_error,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    write_json(&out.join("gradcheck.json"), &rows)?;
    report.into_result().map(|_| ())
}
