use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use syrenets::autodiff::FdScheme;
use syrenets::baselines::{Mlp, MlpConfig, SysId};
use syrenets::batch::Batch;
use syrenets::checkpoint::Checkpoint;
use syrenets::error::ModelError;
use syrenets::mechanics::{load_dataset, sample_dataset, save_dataset, Dataset, DatasetSpec, CSV_HEADER};
use syrenets::model::{ArchConfig, ExtractMode, SymbolicModel, SyreNet};
use syrenets::objective::{LossConfig, Mode};
use syrenets::training::{
    evaluate, gradcheck_model, run_sweep, summarize, train, write_metrics, write_summary, AnyModel, Control, Method,
    ModelCheck, SeedResult, TrainConfig,
};

use crate::config::{Settings, DEFAULT_STEPS};

/// Command failure with its exit code class.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable or unwritable files, corrupt inputs.
    Usage(anyhow::Error),
    /// Non-finite training, evaluation outside tolerance, failed checks.
    Numeric(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Numeric(e) => e,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Configuration problems are usage errors; everything else the model
/// reports is numeric.
fn model_failure(e: ModelError, what: &str) -> Failure {
    let err = anyhow::Error::new(e).context(what.to_string());
    match err.downcast_ref::<ModelError>() {
        Some(ModelError::Config(_)) | Some(ModelError::Shape(_)) => Failure::Usage(err),
        _ => Failure::Numeric(err),
    }
}

const EVAL_BATCH: usize = 32;
pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const SOFT_EQUATION_FILE: &str = "equation_soft.txt";
pub const ARGMAX_EQUATION_FILE: &str = "equation_argmax.txt";
pub const SUMMARY_FILE: &str = "summary.csv";

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_manifest(dir: &Path, command: &str, body: &str) -> anyhow::Result<()> {
    let text = format!(
        "command={command}\nversion={}\n{body}",
        env!("CARGO_PKG_VERSION")
    );
    write_file(&dir.join(MANIFEST_FILE), &text)
}

fn load(path: &Path) -> anyhow::Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

// ---------------------------------------------------------------- gen-data

pub struct GenData {
    pub count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn column_stats(ds: &Dataset) -> String {
    let mut out = format!("{:>10} {:>12} {:>12} {:>12}\n", "column", "min", "max", "mean");
    for (k, name) in CSV_HEADER.iter().enumerate() {
        let col: Vec<f64> = ds.samples.iter().map(|s| s.row()[k]).collect();
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = col.iter().sum::<f64>() / col.len().max(1) as f64;
        let _ = writeln!(out, "{name:>10} {min:>12.5} {max:>12.5} {mean:>12.5}");
    }
    out
}

/// Train split on random stream 0, test split on stream 1 of the same seed.
pub fn gen_data(args: &GenData) -> CmdResult {
    create_dir(&args.out)?;
    let train_spec = DatasetSpec::new(args.count, args.seed);
    let test_spec = DatasetSpec::new(args.test_count, args.seed).stream(1);
    let train = sample_dataset(&train_spec).context("sampling training set")?;
    let test = sample_dataset(&test_spec).context("sampling test set")?;
    save_dataset(&train, &args.out.join(TRAIN_FILE)).context("writing training set")?;
    save_dataset(&test, &args.out.join(TEST_FILE)).context("writing test set")?;
    let p = train_spec.params;
    write_manifest(
        &args.out,
        "gen-data",
        &format!(
            "count={}\ntest_count={}\nseed={}\nrange={},{}\nm1={}\nm2={}\nl1={}\nl2={}\ng={}\n",
            args.count, args.test_count, args.seed, train_spec.range.0, train_spec.range.1, p.m1, p.m2, p.l1, p.l2, p.g
        ),
    )?;
    println!(
        "wrote {} training and {} test samples to {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    if !train.is_empty() {
        print!("{}", column_stats(&train));
    }
    Ok(())
}

// ------------------------------------------------------------------ models

/// Fills keys whose defaults depend on the method and validates the
/// enumerated ones.
pub fn finalize(s: &mut Settings) -> anyhow::Result<(Method, Mode)> {
    let method: Method = s.get("method")?;
    let mode: Mode = s.get("mode")?;
    let base = TrainConfig::for_method(method);
    s.default_to("patience", base.patience);
    s.default_to("constant_lr", base.constant_lr);
    if s.raw("steps").is_empty() && s.raw("seconds").is_empty() {
        s.set("steps", DEFAULT_STEPS.to_string())?;
    }
    s.default_to("tol", if method == Method::SyreNets { 1e-4 } else { 1e-5 });
    Ok((method, mode))
}

pub fn arch_config(s: &Settings) -> anyhow::Result<ArchConfig> {
    Ok(ArchConfig {
        joints: 2,
        layers: s.get("layers")?,
        heads: s.get("heads")?,
        latent: s.get("latent")?,
        sel_hidden: s.get("sel_hidden")?,
        ae_hidden: [s.get("ae_hidden1")?, s.get("ae_hidden2")?],
    })
}

pub fn mlp_config(s: &Settings) -> anyhow::Result<MlpConfig> {
    Ok(MlpConfig {
        joints: 2,
        hidden_layers: s.get("nn_hidden_layers")?,
        width: s.get("nn_width")?,
        stencil_step: s.get("stencil_step")?,
    })
}

pub fn build_model(s: &Settings, method: Method, seed: u64) -> anyhow::Result<AnyModel<f64>> {
    Ok(match method {
        Method::SyreNets => AnyModel::SyreNets(SyreNet::new(arch_config(s)?, seed)?),
        Method::Nn => AnyModel::Nn(Mlp::new(mlp_config(s)?, seed)?),
        Method::SysId => AnyModel::SysId(SysId::new(seed, s.get("g")?)),
    })
}

pub fn train_config(s: &Settings, method: Method, seed: u64) -> anyhow::Result<TrainConfig> {
    let mut c = TrainConfig::for_method(method);
    c.batch_size = s.get("batch_size")?;
    c.lr = s.get("lr")?;
    c.decay_factor = s.get("decay_factor")?;
    c.patience = s.get("patience")?;
    c.lr_floor = s.get("lr_floor")?;
    c.constant_lr = s.get("constant_lr")?;
    c.record_time = s.get("record_time")?;
    c.max_steps = s.opt("steps")?;
    c.max_seconds = s.opt("seconds")?;
    c.seed = seed;
    if !(c.lr > 0.0 && c.decay_factor > 1.0 && c.lr_floor > 0.0) {
        bail!("lr and lr_floor must be positive and decay_factor above 1");
    }
    Ok(c)
}

pub fn loss_config(s: &Settings, mode: Mode) -> anyhow::Result<LossConfig> {
    let mut c = LossConfig::with_mode(mode);
    c.lambda1 = s.get("lambda1")?;
    c.lambda2 = s.get("lambda2")?;
    c.lambda3 = s.get("lambda3")?;
    Ok(c)
}

fn limit(ds: &Dataset, rows: Option<usize>) -> Dataset {
    match rows {
        Some(n) => ds.head(n),
        None => ds.clone(),
    }
}

// ------------------------------------------------------------------- train

pub struct Loaded {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

/// `train.csv` is required; `test.csv` is optional.
pub fn load_data(dir: &Path, s: &Settings) -> CmdResult<Loaded> {
    let train_path = dir.join(TRAIN_FILE);
    if !train_path.is_file() {
        return Err(Failure::Usage(anyhow!(
            "training data {} not found (run gen-data first)",
            train_path.display()
        )));
    }
    let train = limit(&load(&train_path)?, s.opt("train_rows")?);
    let test_path = dir.join(TEST_FILE);
    let test = if test_path.is_file() { Some(load(&test_path)?) } else { None };
    Ok(Loaded { train, test })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub train_mse: f64,
    pub test_mse: f64,
    pub diverged: bool,
}

/// Writes the equation files for a trained SyReNets model and returns the
/// argmax form.
pub fn write_equations(net: &SyreNet<f64>, reference: &Batch<f64>, out: &Path) -> CmdResult<(String, String)> {
    let sym = SymbolicModel::build(&net.config);
    let (soft_store, soft) = net
        .extract(&sym, reference, ExtractMode::Soft)
        .map_err(|e| model_failure(e, "soft extraction"))?;
    let (hard_store, hard) = net
        .extract(&sym, reference, ExtractMode::Argmax)
        .map_err(|e| model_failure(e, "argmax extraction"))?;
    let soft = soft_store.pretty_shared(soft);
    let hard = hard_store.pretty(hard);
    write_file(&out.join(SOFT_EQUATION_FILE), &format!("{soft}\n"))?;
    write_file(&out.join(ARGMAX_EQUATION_FILE), &format!("{hard}\n"))?;
    Ok((soft, hard))
}

/// Trains one model described by `s` (with `seed`) and writes its metrics,
/// checkpoint, report and, for SyReNets, extracted equations into `out`.
pub fn run_training(s: &Settings, seed: u64, data: &Loaded, out: &Path) -> CmdResult<RunOutcome> {
    let method: Method = s.get("method")?;
    let mode: Mode = s.get("mode")?;
    create_dir(out)?;
    let mut model = build_model(s, method, seed).map_err(Failure::Usage)?;
    let tc = train_config(s, method, seed)?;
    let lc = loss_config(s, mode)?;
    let report = train(&mut model, &data.train, &tc, &lc, |_| Control::Continue)
        .map_err(|e| model_failure(e, "training"))?;
    write_metrics(&out.join(METRICS_FILE), &report.log)
        .with_context(|| format!("writing {}", out.join(METRICS_FILE).display()))?;
    let steps = report.log.len() as u64;
    let mut ckpt = Checkpoint::from_model(&model, seed, steps, report.best_total);
    ckpt.config.insert("mode".into(), mode.to_string());
    ckpt.write(&out.join(CHECKPOINT_FILE)).context("writing checkpoint")?;

    let eval_rows: Option<usize> = s.opt("eval_rows")?;
    let train_mse = evaluate(&model, &limit(&data.train, eval_rows), mode, EVAL_BATCH)
        .map_err(|e| model_failure(e, "evaluating on the training set"))?;
    let test_mse = match &data.test {
        Some(t) => evaluate(&model, &limit(t, eval_rows), mode, EVAL_BATCH)
            .map_err(|e| model_failure(e, "evaluating on the test set"))?,
        None => f64::NAN,
    };
    let equation = match &model {
        AnyModel::SyreNets(net) => {
            let n = tc.batch_size.min(data.train.len());
            let reference = Batch::from_samples(&data.train.samples[..n]);
            Some(write_equations(net, &reference, out)?.1)
        }
        AnyModel::SysId(m) => {
            let e = m.estimates();
            Some(format!("m1={} l1={} m2={} l2={}", e[0], e[1], e[2], e[3]))
        }
        AnyModel::Nn(_) => None,
    };

    let mut text = String::new();
    let _ = writeln!(text, "method={method}\nmode={mode}\nseed={seed}\nsteps={steps}");
    let _ = writeln!(text, "initial_total={:e}\ninitial_basic={:e}", report.initial.total, report.initial.basic);
    let _ = writeln!(text, "best_total={:e}", report.best_total);
    let _ = writeln!(text, "best_step={}", report.best_step.map_or("none".into(), |v| v.to_string()));
    let _ = writeln!(text, "train_mse={train_mse:e}\ntest_mse={test_mse:e}");
    let _ = writeln!(text, "diverged={}", report.diverged);
    if let Some(e) = &equation {
        let _ = writeln!(text, "equation={e}");
    }
    for ev in &report.events {
        let _ = writeln!(text, "event={ev}");
    }
    write_file(&out.join(REPORT_FILE), &text)?;

    let outcome = RunOutcome {
        train_mse,
        test_mse,
        diverged: report.diverged,
    };
    if report.diverged {
        return Err(Failure::Numeric(anyhow!(
            "training diverged after {steps} steps; best checkpoint kept in {}",
            out.display()
        )));
    }
    if !train_mse.is_finite() {
        return Err(Failure::Numeric(anyhow!("training MSE is not finite")));
    }
    Ok(outcome)
}

pub fn cmd_train(mut s: Settings, data: &Path, out: &Path) -> CmdResult {
    finalize(&mut s)?;
    let loaded = load_data(data, &s)?;
    create_dir(out)?;
    write_manifest(out, "train", &format!("data={}\n{}", data.display(), s.render()))?;
    let seed: u64 = s.get("seed")?;
    let o = run_training(&s, seed, &loaded, out)?;
    println!("train_mse={:e}", o.train_mse);
    println!("test_mse={:e}", o.test_mse);
    println!("outputs in {}", out.display());
    Ok(())
}

// -------------------------------------------------------------------- eval

fn read_checkpoint(path: &Path) -> CmdResult<(Checkpoint, AnyModel<f64>)> {
    let ckpt = Checkpoint::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let model = ckpt
        .to_model()
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    Ok((ckpt, model))
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub data: PathBuf,
    pub split: String,
    pub mode: Option<String>,
    pub rows: Option<usize>,
}

pub fn cmd_eval(args: &EvalArgs) -> CmdResult<f64> {
    let (ckpt, model) = read_checkpoint(&args.checkpoint)?;
    let mode: Mode = match args.mode.as_deref().or(ckpt.config.get("mode").map(String::as_str)) {
        Some(m) => m.parse().map_err(|e: String| anyhow!(e))?,
        None => Mode::default(),
    };
    let file = match args.split.as_str() {
        "train" => TRAIN_FILE,
        "test" => TEST_FILE,
        other => return Err(Failure::Usage(anyhow!("unknown split {other:?} (expected train or test)"))),
    };
    let ds = limit(&load(&args.data.join(file))?, args.rows);
    let mse = evaluate(&model, &ds, mode, EVAL_BATCH).map_err(|e| model_failure(e, "evaluation"))?;
    println!("method={} mode={mode} split={} rows={} mse={mse:e}", ckpt.kind, args.split, ds.len());
    if !mse.is_finite() {
        return Err(Failure::Numeric(anyhow!("MSE is not finite")));
    }
    Ok(mse)
}

// ----------------------------------------------------------------- extract

/// Reference batch for batch-dependent selections: the first 32 training
/// rows if data is given, otherwise a fixed sample.
fn reference_batch(data: Option<&Path>, seed: u64) -> CmdResult<Batch<f64>> {
    let ds = match data {
        Some(dir) => load(&dir.join(TRAIN_FILE))?.head(EVAL_BATCH),
        None => sample_dataset(&DatasetSpec::new(EVAL_BATCH, seed).stream(2)).context("sampling reference batch")?,
    };
    if ds.len() < 2 {
        return Err(Failure::Usage(anyhow!("reference data needs at least 2 rows")));
    }
    Ok(Batch::from_samples(&ds.samples))
}

pub fn cmd_extract(checkpoint: &Path, data: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let (ckpt, model) = read_checkpoint(checkpoint)?;
    let AnyModel::SyreNets(net) = model else {
        return Err(Failure::Usage(anyhow!(
            "extract needs a syrenets checkpoint, {} holds a {} model",
            checkpoint.display(),
            ckpt.kind
        )));
    };
    let reference = reference_batch(data, ckpt.seed)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => checkpoint.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    create_dir(&dir)?;
    let (soft, hard) = write_equations(&net, &reference, &dir)?;
    println!("soft:\n{soft}");
    println!("argmax: {hard}");
    Ok(())
}

// --------------------------------------------------------------- gradcheck

pub fn cmd_gradcheck(mut s: Settings, data: Option<&Path>) -> CmdResult {
    let (method, mode) = finalize(&mut s)?;
    let seed: u64 = s.get("seed")?;
    let model = build_model(&s, method, seed).map_err(Failure::Usage)?;
    let bs: usize = s.get("batch_size")?;
    let ds = match data {
        Some(dir) => load(&dir.join(TRAIN_FILE))?.head(bs),
        None => sample_dataset(&DatasetSpec::new(bs, seed).stream(3)).context("sampling batch")?,
    };
    let batch = Batch::from_samples(&ds.samples);
    let check = ModelCheck {
        coords: s.get("coords")?,
        h: s.get("fd_step")?,
        tol: s.get("tol")?,
        scheme: FdScheme::Ridders,
        seed,
    };
    let r = gradcheck_model(&model, &batch, &loss_config(&s, mode)?, &check)
        .map_err(|e| model_failure(e, "gradient check"))?;
    for f in &r.failures {
        println!(
            "coordinate {}: analytic {:e} numeric {:e} rel_err {:e}",
            f.index, f.analytic, f.numeric, f.rel_err
        );
    }
    let verdict = if r.passed() { "PASS" } else { "FAIL" };
    println!(
        "gradcheck {method} {mode}: {} coordinates ({} above the rounding floor {:.1e}), max rel err {:.3e}, tol {:e}: {verdict}",
        r.checked, r.resolved, r.atol, r.max_rel_err, r.tol
    );
    if r.passed() {
        Ok(())
    } else {
        Err(Failure::Numeric(anyhow!("{} coordinates outside tolerance", r.failures.len())))
    }
}

// ------------------------------------------------------------------- sweep

/// Worker threads for a sweep: `SYRENETS_THREADS` if set, otherwise the
/// available parallelism.
pub fn sweep_threads() -> anyhow::Result<usize> {
    match std::env::var("SYRENETS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("SYRENETS_THREADS must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn cmd_sweep(mut s: Settings, data: &Path, out: &Path) -> CmdResult {
    finalize(&mut s)?;
    let loaded = load_data(data, &s)?;
    let first: u64 = s.get("seed")?;
    let count: u64 = s.get("seeds")?;
    if count == 0 {
        return Err(Failure::Usage(anyhow!("seeds must be positive")));
    }
    let threads = sweep_threads()?;
    create_dir(out)?;
    write_manifest(out, "sweep", &format!("data={}\nthreads={threads}\n{}", data.display(), s.render()))?;
    let seeds: Vec<u64> = (first..first + count).collect();
    let results = run_sweep(&seeds, threads, |seed| {
        let dir = out.join(format!("seed-{seed}"));
        match run_training(&s, seed, &loaded, &dir) {
            Ok(o) => SeedResult {
                seed,
                train_mse: o.train_mse,
                test_mse: o.test_mse,
                failure: None,
            },
            Err(f) => SeedResult {
                seed,
                train_mse: f64::NAN,
                test_mse: f64::NAN,
                failure: Some(format!("{:#}", f.error())),
            },
        }
    });
    let stats = summarize(&results);
    write_summary(&out.join(SUMMARY_FILE), &stats, &results)
        .with_context(|| format!("writing {}", out.join(SUMMARY_FILE).display()))?;
    println!("{:>7} {:>3} {:>24} {:>24}", "group", "n", "train mse", "test mse");
    for g in &stats {
        println!(
            "{:>7} {:>3} {:>11.3e} ± {:<10.3e} {:>11.3e} ± {:<10.3e}",
            g.group, g.n, g.train_mean, g.train_std, g.test_mean, g.test_std
        );
    }
    let failed: Vec<&SeedResult> = results.iter().filter(|r| r.failure.is_some()).collect();
    for r in &failed {
        println!("seed {} failed: {}", r.seed, r.failure.as_deref().unwrap_or(""));
    }
    if stats.is_empty() {
        return Err(Failure::Numeric(anyhow!("every seed failed")));
    }
    Ok(())
}
