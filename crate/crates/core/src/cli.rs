//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on usage errors, 2 on runtime errors.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::data::{generate_synthetic, load_dataset, load_image, pnm, write_dataset, GenConfig};
use crate::logic::{exact, Env};
use crate::netcore::{nnw, Network, OptimizerConfig, OptimizerKind, CANONICAL_SIDE};
use crate::rng::derive_seed;
use crate::speclang::{instantiate, parse_property};
use crate::train::{
    evaluate, pgd_attack, train_epochs, write_metrics, Constraint, GradNormConfig, PgdConfig,
    Target, TrainConfig, DEFAULT_DELTA, DEFAULT_TRAIN_EPSILON,
};
use crate::verify::{
    check_problem, denormalize_bounds, propagate_bounds, render_report, IntervalTensor, Verdict,
    Verification, VerifyConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "trackverify",
    version,
    about = "Train and verify a track-centre regression network"
)]
pub struct Cli {
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// File of `key=value` lines supplying flag defaults; flags on the
    /// command line take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (PGM images and labels.csv)
    GenData(GenDataArgs),
    /// Train a network on a dataset directory
    Train(TrainArgs),
    /// Prediction loss and constraint accuracy of a model on a dataset
    Eval(EvalArgs),
    /// Search for a robustness counterexample around one image
    Attack(AttackArgs),
    /// Check a property file against a model
    Verify(VerifyArgs),
    /// Pixel-space output bounds of models over input balls
    Bounds(BoundsArgs),
    /// Dump model weights as JSON
    ExportWeights(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 385)]
    pub count: usize,
    /// Image side in pixels
    #[arg(long, default_value_t = CANONICAL_SIDE)]
    pub side: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Resize images to this side [default: stored size]
    #[arg(long)]
    pub side: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Add the robustness constraint loss
    #[arg(long)]
    pub constrained: bool,
    /// Ball radius for training and evaluation attacks
    #[arg(long, default_value_t = DEFAULT_TRAIN_EPSILON)]
    pub epsilon: f64,
    /// Robustness threshold
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 10)]
    pub pgd_steps: usize,
    /// PGD step size [default: epsilon / 4]
    #[arg(long)]
    pub pgd_step_size: Option<f64>,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// GradNorm asymmetry
    #[arg(long, default_value_t = 1.5)]
    pub alpha: f64,
    /// GradNorm weight learning rate
    #[arg(long, default_value_t = 0.025)]
    pub gradnorm_lr: f64,
    /// Fraction of the data held out for testing
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Weight file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV to write
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Suppress per-epoch progress on stderr
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRAIN_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 10)]
    pub pgd_steps: usize,
    /// PGD step size [default: epsilon / 4]
    #[arg(long)]
    pub pgd_step_size: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// PGM or PPM image
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRAIN_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// PGD step size [default: epsilon / 4]
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Start from a uniform point in the ball
    #[arg(long)]
    pub random_start: bool,
    /// Write the attack point as a PGM
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Property file
    #[arg(long)]
    pub spec: PathBuf,
    /// Maximum number of input boxes; 0 disables splitting
    #[arg(long, default_value_t = 0)]
    pub split_budget: usize,
    #[arg(long, default_value_t = 10)]
    pub pgd_steps: usize,
    /// PGD step size [default: radius / 4]
    #[arg(long)]
    pub pgd_step_size: Option<f64>,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Weight file; repeat for several models
    #[arg(long, required = true, action = ArgAction::Append)]
    pub model: Vec<PathBuf>,
    /// Centre image
    #[arg(long)]
    pub image: PathBuf,
    /// Ball radius; repeat for several
    #[arg(long, action = ArgAction::Append, default_values_t = [0.001, 0.01])]
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON file to write [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A runtime failure, tagged with the component that raised it.
#[derive(Debug)]
pub struct CliError {
    pub component: &'static str,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.component, self.message)
    }
}

impl std::error::Error for CliError {}

fn fail(component: &'static str) -> impl Fn(&dyn fmt::Display) -> CliError {
    move |e| CliError {
        component,
        message: e.to_string(),
    }
}

enum Failure {
    /// Help or version text requested.
    Info(String),
    Usage(String),
    Runtime(CliError),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli = match parse(&args) {
        Ok(cli) => cli,
        Err(Failure::Info(msg)) => {
            let _ = write!(out, "{msg}");
            return 0;
        }
        Err(Failure::Usage(msg)) => {
            let _ = write!(err, "{msg}");
            return 1;
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

fn parse(args: &[String]) -> Result<Cli, Failure> {
    let cli = Cli::try_parse_from(args).map_err(clap_failure)?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| fail("config")(&format!("{}: {e}", path.display())))?;
    let extra = config_args(&text, subcommand_name(&cli.command), args)?;
    if extra.is_empty() {
        return Ok(cli);
    }
    let mut merged = args.to_vec();
    merged.extend(extra);
    Cli::try_parse_from(&merged).map_err(clap_failure)
}

fn clap_failure(e: clap::Error) -> Failure {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Failure::Info(e.render().to_string()),
        _ => Failure::Usage(e.render().to_string()),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::GenData(_) => "gen-data",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Attack(_) => "attack",
        Command::Verify(_) => "verify",
        Command::Bounds(_) => "bounds",
        Command::ExportWeights(_) => "export-weights",
    }
}

/// Turns config lines into extra arguments for `sub`, skipping keys whose
/// flag already appears in `given`. Repeatable flags take comma-separated
/// values; switches take `true` or `false`.
fn config_args(text: &str, sub: &str, given: &[String]) -> Result<Vec<String>, Failure> {
    let cmd = Cli::command();
    let sub_cmd = cmd.find_subcommand(sub).expect("known subcommand");
    let present: HashSet<&str> = given
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut extra = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let usage = |m: String| Failure::Usage(format!("error: config line {}: {m}\n", n + 1));
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| usage(format!("expected key=value, found `{line}`")))?;
        if matches!(key, "config" | "help" | "version") {
            return Err(usage(format!("`{key}` cannot be set from a config file")));
        }
        let arg = sub_cmd
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key))
            .ok_or_else(|| usage(format!("unknown key `{key}` for {sub}")))?;
        if present.contains(key) {
            continue;
        }
        let flag = format!("--{key}");
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" => extra.push(flag),
                "false" => {}
                _ => return Err(usage(format!("`{key}` takes true or false"))),
            },
            ArgAction::Append => {
                for v in value.split(',') {
                    extra.push(flag.clone());
                    extra.push(v.trim().to_string());
                }
            }
            _ => {
                extra.push(flag);
                extra.push(value.to_string());
            }
        }
    }
    Ok(extra)
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::GenData(a) => gen_data(a, seed, out),
        Command::Train(a) => train(a, seed, out, err),
        Command::Eval(a) => eval(a, seed, out),
        Command::Attack(a) => attack(a, seed, out),
        Command::Verify(a) => verify(a, seed, out),
        Command::Bounds(a) => bounds(a, out),
        Command::ExportWeights(a) => export_weights(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| fail("cli")(&e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| fail("cli")(&format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<Network, CliError> {
    nnw::load(path).map_err(|e| fail("netcore")(&e))
}

fn model_side(net: &Network) -> Result<usize, CliError> {
    match net.input_shape().as_slice() {
        [h, w] if h == w => Ok(*h),
        s => Err(fail("netcore")(&format!(
            "network input shape {s:?} is not a square image"
        ))),
    }
}

fn pgd(epsilon: f64, steps: usize, step_size: Option<f64>, random_start: bool) -> PgdConfig {
    PgdConfig {
        epsilon,
        steps,
        step_size,
        random_start,
    }
}

fn gen_data(a: &GenDataArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = generate_synthetic(&GenConfig::for_side(a.side, a.count, seed))
        .map_err(|e| fail("data")(&e))?;
    write_dataset(&ds, &a.out).map_err(|e| fail("data")(&e))?;
    emit(
        out,
        &format!("wrote {} images to {}\n", ds.len(), a.out.display()),
    )
}

fn train(
    a: &TrainArgs,
    seed: u64,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(fail("train")(
            &"test fraction must lie strictly between 0 and 1",
        ));
    }
    let ds = load_dataset(&a.data, a.side).map_err(|e| fail("data")(&e))?;
    if ds.len() < 2 {
        return Err(fail("data")(&"training needs at least two samples"));
    }
    let (train_set, test_set) = ds
        .split(a.test_fraction, seed)
        .map_err(|e| fail("data")(&e))?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        constrained: a.constrained,
        pgd: pgd(a.epsilon, a.pgd_steps, a.pgd_step_size, true),
        eval_pgd: pgd(a.epsilon, a.pgd_steps, a.pgd_step_size, false),
        gradnorm: GradNormConfig {
            alpha: a.alpha,
            learning_rate: a.gradnorm_lr,
        },
        optimizer: OptimizerConfig {
            kind: match a.optimizer {
                OptimizerArg::Adam => OptimizerKind::Adam,
                OptimizerArg::Sgd => OptimizerKind::Sgd,
            },
            learning_rate: a.learning_rate,
            ..OptimizerConfig::default()
        },
        seed,
    };
    if !(a.delta >= 0.0 && a.delta.is_finite()) {
        return Err(fail("train")(&"delta must be finite and non-negative"));
    }
    let constraint = Constraint::robustness(a.delta);
    let quiet = a.quiet;
    let outcome = train_epochs(&cfg, &train_set, &test_set, &constraint, |m| {
        if !quiet {
            let _ = writeln!(
                err,
                "epoch {:>3}  train-p {:.6}  train-c {:.6}  test-p {:.6}  test-c-acc {:.4}  lambda {:.4}",
                m.epoch, m.train_p_loss, m.train_c_loss, m.test_p_loss, m.test_c_acc, m.lambda
            );
        }
    })
    .map_err(|e| fail("train")(&e))?;
    nnw::save(&outcome.network, &a.out).map_err(|e| fail("netcore")(&e))?;
    if let Some(path) = &a.metrics {
        write_metrics(path, &outcome.metrics).map_err(|e| fail("train")(&e))?;
    }
    let last = outcome.metrics.last().expect("at least one epoch");
    emit(
        out,
        &format!(
            "mode: {}\nepochs: {}\ntrain samples: {}\ntest samples: {}\nTest-P-Loss: {}\nTest-C-Acc: {}\nmodel: {}\n",
            if a.constrained { "constrained" } else { "vanilla" },
            outcome.metrics.len(),
            train_set.len(),
            test_set.len(),
            last.test_p_loss,
            last.test_c_acc,
            a.out.display()
        ),
    )
}

fn eval(a: &EvalArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_model(&a.model)?;
    let ds = load_dataset(&a.data, Some(model_side(&net)?)).map_err(|e| fail("data")(&e))?;
    let cfg = pgd(a.epsilon, a.pgd_steps, a.pgd_step_size, false);
    let r = evaluate(
        &net,
        &ds,
        &Constraint::robustness(a.delta),
        &cfg,
        derive_seed(seed, &[2]),
    )
    .map_err(|e| fail("train")(&e))?;
    emit(
        out,
        &format!(
            "samples: {}\nTest-P-Loss: {}\nTest-C-Acc: {}\nsatisfied: {}/{}\n",
            r.count, r.p_loss, r.c_acc, r.satisfied, r.count
        ),
    )
}

fn attack(a: &AttackArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_model(&a.model)?;
    let x0 = load_image(&a.image, model_side(&net)?).map_err(|e| fail("data")(&e))?;
    let c = Constraint::robustness(a.delta);
    let mut env = Env::default();
    env.inputs.insert(c.anchor.clone(), x0.clone());
    let target = Target {
        net: &net,
        body: &c.body,
        env: &env,
        var: &c.var,
        sharpness: c.sharpness,
    };
    let cfg = pgd(a.epsilon, a.steps, a.step_size, a.random_start);
    let found = pgd_attack(&target, &x0, &cfg, seed).map_err(|e| fail("train")(&e))?;
    let y0 = net.forward(&x0).map_err(|e| fail("netcore")(&e))?;
    let y = net.forward(&found.point).map_err(|e| fail("netcore")(&e))?;
    let mut b = target.fixed_bindings().map_err(|e| fail("logic")(&e))?;
    b.outputs
        .insert(c.var.clone(), y.data().iter().map(|&v| v as f64).collect());
    let holds = exact(&c.body, &b).map_err(|e| fail("logic")(&e))?;
    if let Some(path) = &a.out {
        pnm::write(path, &pnm::PnmImage::from_unit_tensor(&found.point))
            .map_err(|e| fail("data")(&e))?;
    }
    let distance = found
        .point
        .data()
        .iter()
        .zip(x0.data())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0f32, f32::max);
    emit(
        out,
        &format!(
            "property: {}\nviolation: {}\nloss: {}\ndistance: {}\noutput: {} {}\ncentre output: {} {}\n",
            if holds { "holds" } else { "violated" },
            y.max_abs_diff(&y0),
            found.loss,
            distance,
            y.data()[0],
            y.data()[1],
            y0.data()[0],
            y0.data()[1]
        ),
    )
}

/// Path for a falsifying input: beside the report, or beside the property
/// file when the report goes to stdout.
fn counterexample_path(a: &VerifyArgs) -> PathBuf {
    let base = a.report.as_ref().unwrap_or(&a.spec);
    base.with_extension("counterexample.pgm")
}

fn verify(a: &VerifyArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let start = Instant::now();
    let text = match verify_inner(a, seed) {
        Ok((v, cex, side)) => {
            render_report(&v, start.elapsed().as_secs_f64(), cex.as_deref(), side)
        }
        // tool errors keep the report layout with the error named
        Err(e) => {
            let seconds = start.elapsed().as_secs_f64();
            let text = format!(
                "result: {}Error({})\ntime: {seconds:.6}\n",
                title(e.component),
                e.message
            );
            write_report(a, out, &text)?;
            return Err(e);
        }
    };
    write_report(a, out, &text)
}

fn title(component: &str) -> String {
    let mut c = component.chars();
    c.next()
        .map(|f| f.to_ascii_uppercase().to_string() + c.as_str())
        .unwrap_or_default()
}

fn write_report(a: &VerifyArgs, out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match &a.report {
        Some(path) => write_file(path, text.as_bytes()),
        None => emit(out, text),
    }
}

fn verify_inner(
    a: &VerifyArgs,
    seed: u64,
) -> Result<(Verification, Option<String>, usize), CliError> {
    let net = load_model(&a.model)?;
    let side = model_side(&net)?;
    let src = fs::read_to_string(&a.spec)
        .map_err(|e| fail("speclang")(&format!("{}: {e}", a.spec.display())))?;
    let spec =
        parse_property(&src).map_err(|e| fail("speclang")(&format!("{}:{e}", a.spec.display())))?;
    let base = a.spec.parent().unwrap_or(Path::new("."));
    let problem = instantiate(&spec, &net, base).map_err(|e| fail("speclang")(&e))?;
    let cfg = VerifyConfig {
        pgd_steps: a.pgd_steps,
        pgd_step_size: a.pgd_step_size,
        split_budget: a.split_budget,
        seed,
    };
    let v = check_problem(&net, &problem, &cfg).map_err(|e| fail("verify")(&e))?;
    let mut cex = None;
    if let Verdict::Falsified { counterexample, .. } = &v.verdict {
        let path = counterexample_path(a);
        pnm::write(&path, &pnm::PnmImage::from_unit_tensor(counterexample))
            .map_err(|e| fail("data")(&e))?;
        cex = Some(path.display().to_string());
    }
    Ok((v, cex, side))
}

fn bounds(a: &BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::from("model\tepsilon\tx\ty\n");
    for model in &a.model {
        let net = load_model(model)?;
        let side = model_side(&net)?;
        let x0 = load_image(&a.image, side).map_err(|e| fail("data")(&e))?;
        for &eps in &a.epsilon {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(fail("verify")(&format!(
                    "radius {eps} must be finite and non-negative"
                )));
            }
            let b = propagate_bounds(&net, &IntervalTensor::ball(&x0, eps))
                .map_err(|e| fail("verify")(&e))?;
            let px: Vec<String> = denormalize_bounds(&b, side)
                .iter()
                .map(|r| r.to_string())
                .collect();
            text.push_str(&format!("{}\t{eps}\t{}\n", model.display(), px.join("\t")));
        }
    }
    emit(out, &text)
}

fn export_weights(a: &ExportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let net = load_model(&a.model)?;
    let layers: Vec<_> = net
        .layers()
        .iter()
        .map(|l| {
            let params: Vec<_> = l
                .params()
                .iter()
                .map(|t| json!({ "shape": t.shape(), "data": t.data() }))
                .collect();
            json!({
                "kind": l.kind().name(),
                "input_shape": l.input_shape(),
                "output_shape": l.output_shape(),
                "params": params,
            })
        })
        .collect();
    let doc = json!({ "input_shape": net.input_shape(), "layers": layers });
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| fail("cli")(&e))?;
    text.push('\n');
    match &a.out {
        Some(path) => write_file(path, text.as_bytes()),
        None => emit(out, &text),
    }
}
