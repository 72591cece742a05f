//! `qrelu`: data generation, training, prediction, evaluation, benchmark sweeps and
//! gradient self-checks for quantile ReLU networks.
//!
//! Exit status: 0 on success, 2 on usage errors (bad flags, unreadable inputs), 1 when
//! the work itself fails.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qrelu_core::harness::{self, format_sig, OutputFormat};
use qrelu_core::metrics::{coverage, crossing_count, delta_n2, multivariate_mse};
use qrelu_core::nn::{self, Architecture};
use qrelu_core::optim::train_with_backoff;
use qrelu_core::scenarios;
use qrelu_core::{
    Dataset, DirectionU, ExperimentPlan, LossKind, Matrix, QuantileLevels, Scenario, TrainConfig,
    PAPER_TAUS,
};

#[derive(Parser, Debug)]
#[command(name = "qrelu", version, about = "Quantile regression with ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic dataset and write it as CSV.
    GenData(GenDataArgs),
    /// Train a network on a CSV dataset and save it as JSON.
    Train(TrainArgs),
    /// Write predictions of a saved network for the covariates of a CSV file.
    Predict(PredictArgs),
    /// Score a saved network against the true quantiles of a scenario.
    Eval(EvalArgs),
    /// Run an experiment plan and write results as CSV, markdown and JSON.
    Bench(BenchArgs),
    /// Compare backpropagation with central finite differences on random networks.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Scenario id (1-7).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    scenario: u8,
    /// Number of observations.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Random seed [default: $QRELU_SEED, else 0].
    #[arg(long, env = "QRELU_SEED")]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Pinball,
    Composite,
    Sqerr,
    Geometric,
    Marginal,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training CSV (header x1..xd,y1..yp).
    #[arg(long)]
    data: PathBuf,
    /// Training objective.
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Comma-separated quantile levels. Composite uses all of them (default
    /// 0.05,0.25,0.5,0.75,0.95); pinball and marginal take exactly one (default 0.5).
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Comma-separated direction u with |u| <= 1 for the geometric loss (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Option<Vec<f64>>,
    /// Passes over the data.
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Starting learning rate; halved after a diverged run.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Nesterov momentum.
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    /// Learning-rate factor applied every --decay-every epochs.
    #[arg(long, default_value_t = 0.5)]
    decay_factor: f64,
    /// Epochs between learning-rate decays.
    #[arg(long, default_value_t = 50)]
    decay_every: usize,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "200,200")]
    hidden: Vec<usize>,
    /// Dropout rate after each hidden layer.
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
    /// Leave out batch normalization.
    #[arg(long)]
    no_batch_norm: bool,
    /// Random seed for initialization, shuffling and dropout [default: $QRELU_SEED, else 0].
    #[arg(long, env = "QRELU_SEED")]
    seed: Option<u64>,
    /// Output model path (JSON).
    #[arg(long)]
    model_out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with columns x1..xd (response columns are ignored).
    #[arg(long)]
    data: PathBuf,
    /// Output CSV: the covariates followed by one column per predicted quantity.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Scenario id (1-7) supplying test data and true quantiles.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
    scenario: u8,
    /// Comma-separated levels to report [default: every level the model estimates].
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Number of fresh test points.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    n_test: u64,
    /// Seed of the test sample [default: $QRELU_SEED, else 0].
    #[arg(long, env = "QRELU_SEED")]
    seed: Option<u64>,
    /// Output CSV with one row per level.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// TOML plan (keys: scenarios, methods, n_grid, taus, trials, n_test, base_seed, epochs,
    /// batch_size, lr0, decay_every, momentum, decay_factor, hidden, dropout, batch_norm).
    #[arg(long)]
    plan: PathBuf,
    /// Directory for results.csv, results.md and results.json (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    /// Use 25 trials, n in {100, 1000, 10000} and 10000 test points.
    #[arg(long)]
    paper_scale: bool,
    /// Worker threads for trials; 1 runs serially.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Base seed, overriding the plan's base_seed [env: QRELU_SEED].
    #[arg(long, env = "QRELU_SEED")]
    seed: Option<u64>,
    /// Record wall-clock runtime_ms (otherwise 0, keeping output byte-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct GradCheckArgs {
    /// Number of random networks to check.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Seed of the first network [default: $QRELU_SEED, else 0].
    #[arg(long, env = "QRELU_SEED")]
    seed: Option<u64>,
}

/// Maximum relative error accepted by `grad-check`.
const GRAD_CHECK_TOLERANCE: f64 = 1e-4;

/// Problems with the invocation rather than the computation; exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<ExitCode> {
    match cmd {
        Command::GenData(a) => gen_data(a)?,
        Command::Train(a) => train(a)?,
        Command::Predict(a) => predict(a)?,
        Command::Eval(a) => eval(a)?,
        Command::Bench(a) => bench(a)?,
        Command::GradCheck(a) => return grad_check(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist or is not a file", path.display())));
    }
    Ok(())
}

fn require_parent(path: &Path) -> anyhow::Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(usage(format!(
            "output directory {} does not exist",
            dir.display()
        ))),
        _ => Ok(()),
    }
}

fn gen_data(a: GenDataArgs) -> anyhow::Result<()> {
    require_parent(&a.out)?;
    let data = scenarios::generate(a.scenario, a.n as usize, a.seed.unwrap_or(0))?;
    data.save(&a.out)?;
    Ok(())
}

fn single_tau(taus: &Option<Vec<f64>>, loss: &str) -> anyhow::Result<f64> {
    match taus.as_deref() {
        None => Ok(0.5),
        Some([t]) => Ok(*t),
        Some(_) => Err(usage(format!("--taus takes a single level for the {loss} loss"))),
    }
}

fn loss_from_args(a: &TrainArgs, response_dim: usize) -> anyhow::Result<LossKind> {
    let wrap = |e: qrelu_core::Error| usage(e.to_string());
    Ok(match a.loss {
        LossArg::Pinball => {
            let tau = single_tau(&a.taus, "pinball")?;
            if !(tau > 0.0 && tau < 1.0) {
                return Err(usage(format!("quantile level must lie in (0, 1), got {tau}")));
            }
            LossKind::Pinball { tau }
        }
        LossArg::Composite => {
            let taus = a.taus.clone().unwrap_or_else(|| PAPER_TAUS.to_vec());
            LossKind::Composite(QuantileLevels::new(taus).map_err(wrap)?)
        }
        LossArg::Sqerr => LossKind::Squared,
        LossArg::Geometric => {
            let u = a.direction.clone().unwrap_or_else(|| vec![0.0; response_dim]);
            LossKind::Geometric(DirectionU::new(u).map_err(wrap)?)
        }
        LossArg::Marginal => {
            let tau = single_tau(&a.taus, "marginal")?;
            if !(tau > 0.0 && tau < 1.0) {
                return Err(usage(format!("quantile level must lie in (0, 1), got {tau}")));
            }
            LossKind::Marginal { tau }
        }
    })
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    require_file(&a.data, "data file")?;
    require_parent(&a.model_out)?;
    let data = Dataset::load(&a.data).map_err(|e| usage(format!("{}: {e}", a.data.display())))?;
    if data.output_dim() == 0 {
        return Err(usage(format!("{} has no response columns", a.data.display())));
    }
    let loss = loss_from_args(&a, data.output_dim())?;
    let out_dim = loss.output_dim(data.output_dim()).map_err(|e| usage(e.to_string()))?;
    let seed = a.seed.unwrap_or(0);
    let arch = Architecture {
        hidden: a.hidden.clone(),
        batch_norm: !a.no_batch_norm,
        dropout: a.dropout,
        ..Architecture::default()
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr0: a.lr,
        momentum: a.momentum,
        decay_factor: a.decay_factor,
        decay_every: a.decay_every,
        seed,
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let spec = nn::mlp_spec(data.input_dim(), out_dim, &arch);
    let mut model = nn::init_model(&spec, seed).map_err(|e| usage(e.to_string()))?;
    let outcome = train_with_backoff(&mut model, &data.x, &data.y, &loss, &cfg)?;
    nn::save_model_with_loss(&model, &loss, &a.model_out)?;
    if outcome.lr0 != cfg.lr0 {
        eprintln!("note: training diverged at lr {}; used lr {}", cfg.lr0, outcome.lr0);
    }
    if let Some(last) = outcome.history.last() {
        eprintln!("final epoch loss {}", format_sig(*last, 6));
    }
    Ok(())
}

fn load_model(path: &Path) -> anyhow::Result<(qrelu_core::MlpModel, LossKind)> {
    require_file(path, "model file")?;
    let (model, loss) =
        nn::load_model_with_loss(path).with_context(|| format!("reading {}", path.display()))?;
    let loss = match loss {
        Some(l) => l,
        None if model.output_dim() == 1 => LossKind::Pinball { tau: 0.5 },
        None => LossKind::Marginal { tau: 0.5 },
    };
    Ok((model, loss))
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    require_file(&a.data, "data file")?;
    require_parent(&a.out)?;
    let (model, loss) = load_model(&a.model)?;
    let data = Dataset::load(&a.data).map_err(|e| usage(format!("{}: {e}", a.data.display())))?;
    if data.input_dim() != model.input_dim() {
        return Err(usage(format!(
            "{} has {} covariates but the model expects {}",
            a.data.display(),
            data.input_dim(),
            model.input_dim()
        )));
    }
    let pred = loss.predict(&model.predict(&data.x)?);
    let labels: Vec<String> = loss
        .levels(pred.cols())
        .iter()
        .map(|l| l.map(|t| format_sig(t, 6)).unwrap_or_else(|| "mean".into()))
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "# loss={} levels={}", loss.name(), labels.join(","));
    let header: Vec<String> = (1..=data.input_dim())
        .map(|j| format!("x{j}"))
        .chain((1..=pred.cols()).map(|j| format!("pred{j}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..pred.rows() {
        let row: Vec<String> = data.x.row(i).iter().chain(pred.row(i)).map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    require_parent(&a.out)?;
    let (model, loss) = load_model(&a.model)?;
    let scenario = Scenario::new(a.scenario)?;
    if model.input_dim() != scenario.input_dim {
        return Err(usage(format!(
            "model expects {} covariates; scenario {} has {}",
            model.input_dim(),
            a.scenario,
            scenario.input_dim
        )));
    }
    let test = scenario.generate(a.n_test as usize, a.seed.unwrap_or(0))?;
    let pred = loss.predict(&model.predict(&test.x)?);
    let levels = loss.levels(pred.cols());
    let crossings = if matches!(loss, LossKind::Composite(_)) { crossing_count(&pred) } else { 0 };

    // Columns scored together: one per level for univariate responses, all p at once otherwise.
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    if scenario.is_multivariate() {
        if pred.cols() != scenario.output_dim {
            return Err(usage(format!(
                "model predicts {} columns; scenario {} has {} responses",
                pred.cols(),
                a.scenario,
                scenario.output_dim
            )));
        }
        groups.push((levels[0].unwrap_or(0.5), (0..pred.cols()).collect()));
    } else {
        if matches!(loss, LossKind::Geometric(_) | LossKind::Marginal { .. }) || pred.cols() != levels.len() {
            return Err(usage(format!("a {} model does not fit univariate scenario {}", loss.name(), a.scenario)));
        }
        for (j, l) in levels.iter().enumerate() {
            groups.push((l.unwrap_or(0.5), vec![j]));
        }
    }
    if let Some(wanted) = &a.taus {
        for t in wanted {
            if !groups.iter().any(|(g, _)| g == t) {
                return Err(usage(format!("the model does not estimate level {t}")));
            }
        }
        groups.retain(|(g, _)| wanted.contains(g));
    }

    let mut out = String::from("tau,mse,delta_n2,coverage,crossings,n_test\n");
    for (tau, cols) in groups {
        let p = pick_cols(&pred, &cols);
        let truth = scenario.true_quantile_matrix(&test.x, tau)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig(tau, 6),
            format_sig(multivariate_mse(&p, &truth)?, 6),
            format_sig(delta_n2(p.data(), truth.data())?, 6),
            format_sig(coverage(test.y.data(), p.data())?, 6),
            crossings,
            test.len()
        );
    }
    fs::write(&a.out, out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn pick_cols(m: &Matrix, cols: &[usize]) -> Matrix {
    Matrix::from_fn(m.rows(), cols.len(), |i, j| m.get(i, cols[j]))
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    require_file(&a.plan, "plan file")?;
    let mut plan = ExperimentPlan::from_toml_file(&a.plan)
        .map_err(|e| usage(format!("{}: {e}", a.plan.display())))?;
    if a.paper_scale {
        plan = plan.paper_scale();
    }
    if let Some(seed) = a.seed {
        plan.base_seed = seed;
    }
    if a.out_dir.exists() && !a.out_dir.is_dir() {
        return Err(usage(format!("{} is not a directory", a.out_dir.display())));
    }
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let mut results = harness::run_plan(&plan, a.jobs as usize)?;
    if !a.timings {
        results.iter_mut().for_each(|r| r.runtime_ms = 0);
    }
    for format in [OutputFormat::Csv, OutputFormat::Markdown, OutputFormat::Json] {
        let path = a.out_dir.join(format!("results.{}", format.extension()));
        harness::write_results(&results, &path, format)?;
    }
    print!("{}", harness::summary_to_markdown(&harness::aggregate(&results)));
    Ok(())
}

fn grad_check(a: GradCheckArgs) -> anyhow::Result<ExitCode> {
    let base = a.seed.unwrap_or(0);
    let mut worst = 0.0f64;
    for k in 0..a.trials {
        let c = nn::random_grad_check(base.wrapping_add(k))?;
        println!("trial {k}: {} max_rel_error={:e}", c.description, c.max_rel_error);
        worst = worst.max(c.max_rel_error);
    }
    println!("max relative error: {worst:e}");
    if worst < GRAD_CHECK_TOLERANCE {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("gradient check failed: {worst:e} >= {GRAD_CHECK_TOLERANCE:e}");
        Ok(ExitCode::from(1))
    }
}
