//! The five commands. Each takes a resolved [`RunConfig`] or explicit paths,
//! writes its report to `out` and returns what it computed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use udparse_core::conllu::{validate_tree, Treebank};
use udparse_core::eval::{self, ScoreReport};
use udparse_core::gradsuite::{self, CheckOutcome};
use udparse_core::model::JointModel;
use udparse_core::trainer::{self, Checkpoint, EpochLog};

use crate::config::{Profile, RunConfig};
use crate::error::{CliError, Result};
use crate::{io, model_file};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub cycle_k: Option<usize>,
    pub no_cycle_loss: bool,
    pub model: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub silver: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub epochs: Option<usize>,
}

/// Profile defaults, then the JSON file, then flags.
pub fn resolve_config(file: Option<&Path>, o: &Overrides) -> Result<RunConfig> {
    let fallback = o.profile.unwrap_or(Profile::Paper);
    let mut c = match file {
        Some(p) => {
            let text = io::read_text(p)?;
            let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            if let (Some(flag), Some(obj)) = (o.profile, doc.as_object_mut()) {
                obj.insert("profile".into(), serde_json::to_value(flag).expect("profile serializes"));
            }
            RunConfig::from_json(&doc.to_string(), fallback)?
        }
        None => RunConfig::for_profile(fallback),
    };
    let t = &mut c.training;
    if let Some(s) = o.seed {
        t.seed = s;
    }
    if let Some(k) = o.cycle_k {
        t.cycle_k = k;
    }
    if o.no_cycle_loss {
        t.cycle_loss = false;
    }
    if let Some(e) = o.epochs {
        t.max_epochs = e;
    }
    let p = &mut c.paths;
    for (slot, v) in [
        (&mut p.model, &o.model),
        (&mut p.train, &o.train),
        (&mut p.dev, &o.dev),
        (&mut p.raw, &o.raw),
        (&mut p.embeddings, &o.embeddings),
        (&mut p.silver, &o.silver),
        (&mut p.log, &o.log),
    ] {
        if v.is_some() {
            slot.clone_from(v);
        }
    }
    Ok(c)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("no {} path given", what)))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn save_model(path: &Path, m: &JointModel<f32>) -> Result<()> {
    model_file::save(path, m).map_err(|source| CliError::ModelFile {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<JointModel<f32>> {
    model_file::load(path).map_err(|source| CliError::ModelFile {
        path: path.to_path_buf(),
        source,
    })
}

/// Appends epoch records to the JSON-lines log and the process log.
struct EpochSink {
    file: Option<(PathBuf, BufWriter<File>)>,
    records: Vec<EpochLog>,
    error: Option<CliError>,
}

impl EpochSink {
    fn new(path: Option<&Path>) -> Result<Self> {
        let file = path.map(|p| create(p).map(|w| (p.to_path_buf(), w))).transpose()?;
        Ok(EpochSink {
            file,
            records: Vec::new(),
            error: None,
        })
    }

    fn record(&mut self, e: &EpochLog) {
        log::info!(
            "{} epoch {}: loss {:.4} lr {:.2e}{}{}{}",
            e.phase,
            e.epoch,
            e.loss,
            e.lr,
            e.dev_las.map(|l| format!(" dev LAS {:.2}", 100.0 * l)).unwrap_or_default(),
            if e.lr_reduced { " (lr reduced)" } else { "" },
            if e.stopped { " (stopping)" } else { "" },
        );
        if let (Some((path, w)), None) = (&mut self.file, &self.error) {
            let line = serde_json::to_string(e).expect("log serializes");
            if let Err(source) = writeln!(w, "{}", line) {
                self.error = Some(CliError::Io { path: path.clone(), source });
            }
        }
        self.records.push(e.clone());
    }

    fn finish(self) -> Result<Vec<EpochLog>> {
        if let Some(e) = self.error {
            return Err(e);
        }
        if let Some((path, mut w)) = self.file {
            w.flush().map_err(|source| CliError::Io { path, source })?;
        }
        Ok(self.records)
    }
}

struct Inputs {
    train: Treebank,
    dev: Option<Treebank>,
    model: JointModel<f32>,
}

fn prepare(c: &RunConfig) -> Result<Inputs> {
    let train = io::read_treebank(required(&c.paths.train, "training treebank")?)?;
    if train.is_empty() {
        return Err(CliError::Config("training treebank is empty".into()));
    }
    let dev = c.paths.dev.as_deref().map(io::read_treebank).transpose()?;
    let seed = c.training.seed;
    let emb = c.paths.embeddings.as_deref().map(|p| io::read_embeddings(p, seed)).transpose()?;
    let model = JointModel::for_treebank(c.model.clone(), &train, emb, seed)?;
    Ok(Inputs { train, dev, model })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint<f32>,
    pub log: Vec<EpochLog>,
}

/// Trains on `paths.train` (selecting on `paths.dev` when given) and writes
/// the model to `paths.model`. With `self_train` set this runs
/// [`cmd_selftrain`] instead.
pub fn cmd_train(c: &RunConfig, out: &mut dyn Write) -> Result<TrainOutcome> {
    if c.self_train {
        let s = cmd_selftrain(c, out)?;
        return Ok(TrainOutcome {
            checkpoint: s.checkpoint,
            log: s.log,
        });
    }
    let model_path = required(&c.paths.model, "model")?;
    let inp = prepare(c)?;
    let mut sink = EpochSink::new(c.paths.log.as_deref())?;
    let checkpoint = trainer::fit(inp.model, &inp.train, inp.dev.as_ref(), &c.training, &mut |e| sink.record(e))?;
    let log = sink.finish()?;
    save_model(model_path, &checkpoint.model)?;
    let _ = writeln!(
        out,
        "trained {} epochs; model written to {}{}",
        log.len(),
        model_path.display(),
        checkpoint.best_dev_las.map(|l| format!("; best dev LAS {:.2}", 100.0 * l)).unwrap_or_default()
    );
    Ok(TrainOutcome { checkpoint, log })
}

/// Annotates CoNLL-U or raw text. Output goes to `output`, or to `out`.
pub fn cmd_predict(model: &Path, input: &Path, output: Option<&Path>, out: &mut dyn Write) -> Result<Treebank> {
    let m = load_model(model)?;
    let tb = io::read_any(input)?;
    let pred = m.predict(&tb)?;
    for (i, s) in pred.sentences.iter().enumerate() {
        if m.spec.tasks.parse && !validate_tree(s)?.is_valid() {
            return Err(CliError::Core(udparse_core::Error::InvalidInput(format!("sentence {} decoded to an invalid tree", i + 1))));
        }
    }
    match output {
        Some(p) => io::write_treebank(p, &pred)?,
        None => {
            let text = udparse_core::conllu::write_conllu(&pred);
            out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?;
        }
    }
    Ok(pred)
}

/// Scores `pred` against `gold`. The greedy cycle rate needs a model and is
/// 0 otherwise. Prints the table followed by one line of JSON.
pub fn cmd_evaluate(gold: &Path, pred: &Path, model: Option<&Path>, out: &mut dyn Write) -> Result<ScoreReport> {
    let g = io::read_treebank(gold)?;
    let p = io::read_treebank(pred)?;
    let mut report = eval::score(&g, &p)?;
    if let Some(m) = model {
        report.cycle_rate = load_model(m)?.cycle_rate(&p)?;
    }
    let _ = write!(out, "{}", report.to_text());
    let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(report)
}

/// Standard versus self-trained dev scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub std_uas: f64,
    pub std_las: f64,
    pub self_uas: f64,
    pub self_las: f64,
}

impl Comparison {
    pub fn to_text(&self) -> String {
        format!(
            "{:<8}{:>8}{:>8}\n{:<8}{:>8.2}{:>8.2}\n{:<8}{:>8.2}{:>8.2}\n",
            "",
            "std",
            "self",
            "UAS",
            100.0 * self.std_uas,
            100.0 * self.self_uas,
            "LAS",
            100.0 * self.std_las,
            100.0 * self.self_las
        )
    }
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutcome {
    pub standard: Checkpoint<f32>,
    pub checkpoint: Checkpoint<f32>,
    pub silver: Treebank,
    pub silver_path: PathBuf,
    pub comparison: Option<Comparison>,
    pub log: Vec<EpochLog>,
}

/// Default silver path: the model path with `.silver.conllu` appended.
pub fn silver_path(c: &RunConfig, model: &Path) -> PathBuf {
    c.paths.silver.clone().unwrap_or_else(|| {
        let mut s = model.as_os_str().to_owned();
        s.push(".silver.conllu");
        PathBuf::from(s)
    })
}

/// Trains a standard model, annotates `paths.raw` with it, then trains on
/// the silver data and fine-tunes on gold. Writes the silver treebank and
/// the final model.
pub fn cmd_selftrain(c: &RunConfig, out: &mut dyn Write) -> Result<SelfTrainOutcome> {
    let model_path = required(&c.paths.model, "model")?;
    let raw_path = required(&c.paths.raw, "raw corpus")?;
    let raw = io::read_any(raw_path)?;
    if raw.is_empty() {
        return Err(CliError::Config(format!("{}: raw corpus is empty", raw_path.display())));
    }
    let inp = prepare(c)?;
    let mut sink = EpochSink::new(c.paths.log.as_deref())?;
    let dev = inp.dev.as_ref();
    let standard = trainer::fit(inp.model, &inp.train, dev, &c.training, &mut |e| sink.record(e))?;
    let st = trainer::self_train(&standard.model, &inp.train, &raw, dev, &c.training, &mut |e| sink.record(e))?;
    let log = sink.finish()?;
    let silver_path = silver_path(c, model_path);
    io::write_treebank(&silver_path, &st.silver)?;
    save_model(model_path, &st.checkpoint.model)?;
    let comparison = match dev {
        Some(d) => {
            let (std_uas, std_las) = eval::attachment_scores(d, &standard.model.predict(d)?)?;
            let (self_uas, self_las) = eval::attachment_scores(d, &st.checkpoint.model.predict(d)?)?;
            Some(Comparison {
                std_uas,
                std_las,
                self_uas,
                self_las,
            })
        }
        None => None,
    };
    let _ = writeln!(
        out,
        "silver treebank ({} sentences) written to {}; model written to {}",
        st.silver.len(),
        silver_path.display(),
        model_path.display()
    );
    if let Some(cmp) = &comparison {
        let _ = write!(out, "{}", cmp.to_text());
    }
    Ok(SelfTrainOutcome {
        standard,
        checkpoint: st.checkpoint,
        silver: st.silver,
        silver_path,
        comparison,
        log,
    })
}

/// Runs the finite-difference suite and prints each check's maximum
/// relative error. Fails when any check exceeds the tolerance.
pub fn cmd_gradcheck(instances: usize, fault: Option<&'static str>, out: &mut dyn Write) -> Result<Vec<CheckOutcome>> {
    let outcomes = gradsuite::run_suite(instances, fault)?;
    let _ = writeln!(out, "{:<20}{:>10}{:>10}{:>14}  status", "check", "instances", "coords", "max rel err");
    for o in &outcomes {
        let _ = writeln!(
            out,
            "{:<20}{:>10}{:>10}{:>14.3e}  {}",
            o.name,
            o.instances,
            o.coords,
            o.max_rel_error,
            if o.passed() { "ok" } else { "FAIL" }
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed()).count();
    let _ = writeln!(out, "tolerance {:.0e}; {} of {} checks failed", gradsuite::TOLERANCE, failed, outcomes.len());
    if failed > 0 {
        return Err(CliError::GradCheck(failed));
    }
    Ok(outcomes)
}
