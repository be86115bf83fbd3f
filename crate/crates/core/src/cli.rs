//! Command-line front end: `index`, `simulate`, `oracle`, `converge` and
//! `selfcheck`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::bandit::{ArmSpec, EpisodeConfig, StrategyName};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_sweep, mc_gittins_oracle, run_experiment, summarize, write_convergence_csv, write_results_csv,
    ExperimentConfig, OracleOptions, ResultRow, Setting, PARTIAL_LAMBDAS, Z95,
};
use crate::index_diffusion::{gittins_diffusion, DiffusionSpec};
use crate::index_levy::{gittins_continuous, mu_transform_sn, mu_transform_sp, LevyIndexModel};
use crate::pathsim::ArmModel;
use crate::quad::{integrate, Tolerance};
use crate::reward::RewardSpec;
use crate::scale::{laplace_exponent, ScaleModel, SnlpParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gittins", version, about = "Gittins indices and bandit simulations for Lévy and diffusion arms")]
pub struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid step for reflected arms.
    #[arg(long = "grid-step", global = true)]
    pub grid_step: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print Γ^λ(x) and, where defined, Γ^∞(x).
    Index(IndexArgs),
    /// Run a bandit experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Compare the closed-form index with a simulation estimate.
    Oracle(OracleArgs),
    /// Distance of Γ^λ to Γ^∞ over a list of λ.
    Converge(ConvergeArgs),
    /// Run quick internal consistency checks.
    Selfcheck,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// One of bm, rbm, ou, snlp, rsnlp.
    #[arg(long)]
    pub model: String,
    /// Comma-separated parameters: bm sigma; rbm alpha,sigma; ou gamma;
    /// snlp mu,sigma,ell,r; rsnlp alpha,mu,sigma,ell,r.
    #[arg(long, allow_hyphen_values = true)]
    pub params: String,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value = "identity")]
    pub reward: String,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Comma-separated evaluation points.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON experiment config.
    pub config: PathBuf,
    /// Results CSV path.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', required = true)]
    pub x: Vec<f64>,
    /// Epoch cap per path.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_epochs: u64,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100,1000")]
    pub lambdas: Vec<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -3.0)]
    pub x_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 3.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 61)]
    pub x_points: usize,
    /// Curve CSV path; printed to standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Formats with 6 significant digits, `%g` style.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..6).contains(&exp) {
        let s = format!("{:.*}", (5 - exp) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (m, e) = sci.split_at(sci.find('e').unwrap());
        let m = if m.contains('.') { m.trim_end_matches('0').trim_end_matches('.') } else { m };
        format!("{m}{e}")
    }
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::config(format!("cannot parse number '{s}'"));
    match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            Ok(a / b)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

/// Parameter names per model, in positional order.
pub fn param_names(model: &str) -> Result<&'static [&'static str]> {
    match model {
        "bm" => Ok(&["sigma"]),
        "rbm" => Ok(&["alpha", "sigma"]),
        "ou" => Ok(&["gamma"]),
        "snlp" => Ok(&["mu", "sigma", "ell", "r"]),
        "rsnlp" => Ok(&["alpha", "mu", "sigma", "ell", "r"]),
        other => Err(Error::config(format!(
            "unknown model '{other}' (expected bm, rbm, ou, snlp or rsnlp)"
        ))),
    }
}

/// Builds an arm model from parameters given in positional order.
pub fn model_from_values(model: &str, values: &[f64]) -> Result<ArmModel> {
    let names = param_names(model)?;
    if values.len() != names.len() {
        return Err(Error::config(format!(
            "{model} takes {} parameters ({}), got {}",
            names.len(),
            names.join(","),
            values.len()
        )));
    }
    let v = values;
    let snlp = |o: usize| SnlpParams::new(v[o], v[o + 1], v[o + 2], v[o + 3]).map_err(as_config);
    let arm = match model {
        "bm" => ArmModel::Bm { sigma: v[0] },
        "rbm" => ArmModel::Rbm { alpha: v[0], sigma: v[1] },
        "ou" => ArmModel::Ou { gamma: v[0] },
        "snlp" => ArmModel::Snlp(snlp(0)?),
        _ => ArmModel::Rsnlp {
            alpha: v[0],
            params: snlp(1)?,
        },
    };
    arm.validate()?;
    Ok(arm)
}

/// Builds an arm model from named parameters; every name must be present and
/// no other name is accepted.
pub fn model_from_named(model: &str, params: &BTreeMap<String, f64>) -> Result<ArmModel> {
    let names = param_names(model)?;
    if let Some(k) = params.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(Error::config(format!("unknown parameter '{k}' for {model}")));
    }
    let values = names
        .iter()
        .map(|n| {
            params
                .get(*n)
                .copied()
                .ok_or_else(|| Error::config(format!("missing parameter '{n}' for {model}")))
        })
        .collect::<Result<Vec<_>>>()?;
    model_from_values(model, &values)
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

impl ModelArgs {
    fn arm(&self) -> Result<ArmModel> {
        let values = self
            .params
            .split(',')
            .map(parse_number)
            .collect::<Result<Vec<_>>>()?;
        model_from_values(&self.model, &values)
    }

    fn reward(&self) -> Result<RewardSpec> {
        self.reward.parse()
    }
}

/// Γ^λ(x) from the closed form (Lévy arms) or the diffusion functional.
pub fn index_value(model: &ArmModel, q: f64, lambda: f64, reward: RewardSpec, x: f64) -> Result<f64> {
    match levy_model(model, q, lambda, reward)? {
        Some(m) => m.gittins(x),
        None => {
            let spec: DiffusionSpec = model.diffusion_spec().expect("diffusion arm");
            gittins_diffusion(&spec, q, lambda, reward, x)
        }
    }
}

/// Γ^∞(x) for Lévy-driven arms.
pub fn continuous_index_value(model: &ArmModel, q: f64, lambda: f64, reward: RewardSpec, x: f64) -> Result<Option<f64>> {
    match model {
        ArmModel::Bm { .. } | ArmModel::Snlp(_) | ArmModel::Rsnlp { .. } => levy_model(model, q, lambda, reward)?
            .map(|m| gittins_continuous(&m, x))
            .transpose(),
        _ => Ok(None),
    }
}

fn levy_model(model: &ArmModel, q: f64, lambda: f64, reward: RewardSpec) -> Result<Option<LevyIndexModel>> {
    match *model {
        ArmModel::Bm { .. } | ArmModel::Snlp(_) => {
            let p = model.levy_params().expect("Lévy arm");
            LevyIndexModel::new(p, q, lambda, reward).map(Some)
        }
        ArmModel::Rsnlp { alpha, params } => LevyIndexModel::reflected(params, alpha, q, lambda, reward).map(Some),
        _ => Ok(None),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileArm {
    model: String,
    params: BTreeMap<String, f64>,
    lambda: f64,
    reward: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    setting: Option<Setting>,
    q: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
    arms: Vec<FileArm>,
    strategies: Vec<String>,
    #[serde(default)]
    grid_step: Option<f64>,
    #[serde(default)]
    shared_streams: bool,
}

/// Parses and validates a JSON experiment config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: FileConfig = serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
    let arms = raw
        .arms
        .iter()
        .map(|a| {
            Ok(ArmSpec {
                model: model_from_named(&a.model, &a.params)?,
                lambda: a.lambda,
                reward: a.reward.parse()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let strategies = raw
        .strategies
        .iter()
        .map(|s| s.parse::<StrategyName>())
        .collect::<Result<Vec<_>>>()?;
    let setting = raw.setting.unwrap_or_else(|| infer_setting(&arms));
    let config = ExperimentConfig {
        setting,
        episode: EpisodeConfig {
            arms,
            q: raw.q,
            horizon: raw.horizon,
            grid_step: raw.grid_step,
        },
        paths: raw.paths,
        seed: raw.seed,
        strategies,
        shared_streams: raw.shared_streams,
    };
    config.validate()?;
    Ok(config)
}

fn infer_setting(arms: &[ArmSpec]) -> Setting {
    let lambdas: Vec<f64> = arms.iter().map(|a| a.lambda).collect();
    if arms.iter().all(|a| a.lambda == arms[0].lambda) {
        Setting::Homogeneous
    } else if lambdas == PARTIAL_LAMBDAS
        && arms
            .iter()
            .all(|a| a.reward == arms[0].reward && a.model.name() == arms[0].model.name())
    {
        Setting::Partial
    } else {
        Setting::Inhomogeneous
    }
}

/// Reads a config file; unreadable files count as configuration errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn print_results(out: &mut dyn Write, rows: &[ResultRow]) -> Result<()> {
    writeln!(
        out,
        "{:<14} {:<6} {:<9} {:<7} {:>10} {:>10} {:>10} {:>10} {:>7}",
        "setting", "model", "reward", "strategy", "mean", "sd", "ci_lo", "ci_hi", "n"
    )?;
    for r in rows {
        let s = &r.stats;
        writeln!(
            out,
            "{:<14} {:<6} {:<9} {:<7} {:>10} {:>10} {:>10} {:>10} {:>7}",
            r.setting.name(),
            r.model,
            r.reward,
            r.strategy.label(),
            sig6(s.mean),
            sig6(s.sd),
            sig6(s.ci_lo),
            sig6(s.ci_hi),
            s.n
        )?;
    }
    Ok(())
}

fn cmd_index(args: &IndexArgs, out: &mut dyn Write) -> Result<i32> {
    let arm = args.model.arm()?;
    let reward = args.model.reward()?;
    let (q, lambda) = (args.model.q, args.lambda);
    // build once up front so bad q/λ fail before any row is printed
    levy_model(&arm, q, lambda, reward)?;
    if let Some(spec) = arm.diffusion_spec() {
        crate::index_diffusion::DiffusionIndexModel::new(spec, q, lambda, reward)?;
    }
    let mut rows = Vec::new();
    for &x in &args.x {
        let g = index_value(&arm, q, lambda, reward, x)?;
        let gi = continuous_index_value(&arm, q, lambda, reward, x)?;
        rows.push((x, g, gi));
    }
    writeln!(out, "{:>12} {:>12} {:>12}", "x", "gamma", "gamma_inf")?;
    for (x, g, gi) in rows {
        let gi = gi.map(sig6).unwrap_or_else(|| "-".to_string());
        writeln!(out, "{:>12} {:>12} {:>12}", sig6(x), sig6(g), gi)?;
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs, out: &mut dyn Write) -> Result<i32> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(paths) = cli.paths {
        config.paths = paths;
    }
    if cli.grid_step.is_some() {
        config.episode.grid_step = cli.grid_step;
    }
    config.validate()?;
    let result = run_experiment(&config, cli.threads)?;
    if let Some(path) = &args.output {
        let file = fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        write_results_csv(&mut w, &result.rows)?;
        w.flush()?;
    }
    print_results(out, &result.rows)?;
    Ok(EXIT_OK)
}

fn cmd_oracle(cli: &Cli, args: &OracleArgs, out: &mut dyn Write) -> Result<i32> {
    let arm = args.model.arm()?;
    let reward = args.model.reward()?;
    let (q, lambda) = (args.model.q, args.lambda);
    let mut opts = OracleOptions::new(cli.paths.unwrap_or(200_000), cli.seed.unwrap_or(1));
    opts.grid_step = cli.grid_step;
    opts.threads = cli.threads;
    opts.max_epochs = args.max_epochs;
    if opts.paths < 2 {
        return Err(Error::config("oracle needs at least 2 paths"));
    }
    let allowance = if arm.barrier().is_some() {
        0.05 * cli.grid_step.unwrap_or(1e-3).sqrt()
    } else {
        0.0
    };
    writeln!(
        out,
        "{:>10} {:>12} {:>12} {:>12} {:>8} {:>6}",
        "x", "closed_form", "estimate", "se", "capped", "result"
    )?;
    let mut all_pass = true;
    for &x in &args.x {
        let exact = index_value(&arm, q, lambda, reward, x)?;
        let est = mc_gittins_oracle(&arm, lambda, q, &move |y| reward.eval(y), x, &opts)?;
        let pass = (est.estimate - exact).abs() <= 3.0 * est.se + allowance;
        all_pass &= pass;
        writeln!(
            out,
            "{:>10} {:>12} {:>12} {:>12} {:>8} {:>6}",
            sig6(x),
            sig6(exact),
            sig6(est.estimate),
            sig6(est.se),
            est.capped,
            if pass { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_converge(args: &ConvergeArgs, out: &mut dyn Write) -> Result<i32> {
    let arm = args.model.arm()?;
    let reward = args.model.reward()?;
    let params = match arm {
        ArmModel::Ou { .. } | ArmModel::Rbm { .. } => {
            return Err(Error::config("converge needs a bm, snlp or rsnlp model"));
        }
        _ => arm.levy_params().expect("Lévy arm"),
    };
    if args.x_points < 2 || !(args.x_max > args.x_min) {
        return Err(Error::config("need x_max > x_min and at least 2 points"));
    }
    let step = (args.x_max - args.x_min) / (args.x_points - 1) as f64;
    let xs: Vec<f64> = (0..args.x_points).map(|i| args.x_min + step * i as f64).collect();
    let mut sweep = convergence_sweep(&params, arm.barrier(), args.model.q, reward, &args.lambdas, &xs)
        .map_err(as_config)?;
    sweep.model = arm.name().to_string();
    match &args.output {
        Some(path) => {
            let mut w = io::BufWriter::new(fs::File::create(path)?);
            write_convergence_csv(&mut w, &sweep)?;
            w.flush()?;
            writeln!(out, "{:>12} {:>14}", "lambda", "sup_distance")?;
            for (l, d) in &sweep.distances {
                writeln!(out, "{:>12} {:>14}", sig6(*l), sig6(*d))?;
            }
        }
        None => write_convergence_csv(&mut *out, &sweep)?,
    }
    Ok(EXIT_OK)
}

/// One named consistency check.
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// Fast deterministic checks of the library's core identities.
pub fn selfcheck() -> Vec<Check> {
    let snlp = || SnlpParams::new(1.0, 1.0, 6.0, 2.0);
    vec![
        check("ci half-width convention", || {
            let half = Z95 * 3.9322 / 100.0;
            let s = summarize(&[0.0, 2.0])?;
            let ok = (half * 1e4).round() == 771.0 && (s.ci_lo + 0.96).abs() < 1e-12;
            Ok((ok, format!("half-width {}", sig6(half))))
        }),
        check("bm diffusion vs closed form", || {
            let levy = LevyIndexModel::new(SnlpParams::brownian(1.0)?, 0.5, 0.1, RewardSpec::Sigmoid)?;
            let mut worst = 0.0f64;
            for x in [-1.0, 0.0, 1.0] {
                let a = gittins_diffusion(&DiffusionSpec::bm(1.0)?, 0.5, 0.1, RewardSpec::Sigmoid, x)?;
                let b = levy.gittins(x)?;
                worst = worst.max(((a - b) / b).abs());
            }
            Ok((worst < 1e-5, format!("max relative error {}", sig6(worst))))
        }),
        check("barrier flatness", || {
            let m = LevyIndexModel::reflected(SnlpParams::new(0.5, 1.0, 6.0, 2.0)?, -10.0, 0.5, 0.1, RewardSpec::Identity)?;
            let gb = m.gittins(-10.0)?;
            let flat = m.gittins(-12.0)? == gb;
            let jump = (m.gittins(-10.0 + 1e-6)? - gb).abs();
            Ok((flat && jump < 1e-4, format!("jump at barrier {}", sig6(jump))))
        }),
        check("small lambda limit", || {
            let m = LevyIndexModel::new(snlp()?, 0.5, 1e-9, RewardSpec::Identity)?;
            let d = m.gittins(0.5)? - 0.5;
            Ok((d.abs() < 1e-6, format!("|Γ − R| = {}", sig6(d.abs()))))
        }),
        check("convergence in lambda", || {
            let p = snlp()?;
            let xs: Vec<f64> = (0..21).map(|i| -2.0 + 0.2 * i as f64).collect();
            let sw = convergence_sweep(&p, None, 0.5, RewardSpec::Identity, &[1.0, 10.0, 100.0, 1000.0], &xs)?;
            let decreasing = sw.distances.windows(2).all(|w| w[1].1 < w[0].1);
            let m = LevyIndexModel::new(p, 0.5, 1000.0, RewardSpec::Identity)?;
            let gap = (sw.distances[3].1 - m.atom_p0() / m.phi_q()).abs();
            Ok((decreasing && gap < 1e-10, format!("p0 identity gap {}", sig6(gap))))
        }),
        check("scale function transform", || {
            let p = snlp()?;
            let sm = ScaleModel::new(p, 0.5)?;
            let s = sm.phi_q + 1.0;
            // tail beyond 40 is below e^{-40} relative
            let lhs = integrate(|x| (-s * x).exp() * sm.w(x), 0.0, 40.0, Tolerance::new(1e-13, 1e-12))?.value;
            let rhs = 1.0 / (laplace_exponent(&p, s)? - 0.5);
            let rel = ((lhs - rhs) / rhs).abs();
            Ok((rel < 1e-6, format!("relative error {}", sig6(rel))))
        }),
        check("transform total mass", || {
            let p = snlp()?;
            let m = LevyIndexModel::new(p, 0.5, 0.1, RewardSpec::Identity)?;
            let a = mu_transform_sn(&m, 0.0)?;
            let b = mu_transform_sp(&p, 0.5, 0.1, 0.0)?;
            let e = (a - 1.0).abs().max((b - 1.0).abs());
            Ok((e < 1e-10, format!("max deviation {}", sig6(e))))
        }),
        check("thread-count determinism", || {
            let text = r#"{"q":0.5,"horizon":10,"paths":64,"seed":5,
                "arms":[{"model":"rsnlp","params":{"alpha":-2,"mu":0.5,"sigma":1,"ell":6,"r":2},"lambda":0.5,"reward":"identity"},
                        {"model":"ou","params":{"gamma":1},"lambda":0.5,"reward":"identity"}],
                "strategies":["gi","myopic"],"setting":"inhomogeneous"}"#;
            let cfg = parse_config(text)?;
            let (mut a, mut b) = (Vec::new(), Vec::new());
            write_results_csv(&mut a, &run_experiment(&cfg, Some(1))?.rows)?;
            write_results_csv(&mut b, &run_experiment(&cfg, Some(3))?.rows)?;
            Ok((a == b, "1 vs 3 threads".to_string()))
        }),
    ]
}

fn cmd_selfcheck(out: &mut dyn Write) -> Result<i32> {
    let checks = selfcheck();
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_FAILURE })
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Index(a) => cmd_index(a, out),
        Command::Simulate(a) => cmd_simulate(cli, a, out),
        Command::Oracle(a) => cmd_oracle(cli, a, out),
        Command::Converge(a) => cmd_converge(a, out),
        Command::Selfcheck => cmd_selfcheck(out),
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_FAILURE
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if cli.threads == Some(0) {
        let _ = writeln!(err, "error: --threads must be at least 1");
        return EXIT_VALIDATION;
    }
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
