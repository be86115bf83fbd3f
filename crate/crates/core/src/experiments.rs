//! Monte Carlo experiments, the simulation-based Gittins oracle and
//! convergence sweeps.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{run_episode, EpisodeConfig, StrategyKind, StrategyName};
use crate::error::{Error, Result};
use crate::index_levy::{gittins_continuous, LevyIndexModel};
use crate::pathsim::{sample_holding, snlp_increment, transition, ArmModel, RngStream};
use crate::reward::RewardSpec;
use crate::scale::SnlpParams;

/// z-value of a two-sided 95% interval.
pub const Z95: f64 = 1.96;

/// Per-arm holding rates of the partially homogeneous setting.
pub const PARTIAL_LAMBDAS: [f64; 3] = [0.1, 0.2, 0.3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
}

/// Mean, sample standard deviation and `mean ∓ 1.96 sd/√N`. Needs `N ≥ 2`.
pub fn summarize(samples: &[f64]) -> Result<SummaryStats> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss: f64 = samples.iter().map(|x| (x - mean).powi(2)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    let half = Z95 * sd / (n as f64).sqrt();
    Ok(SummaryStats {
        mean,
        sd,
        ci_lo: mean - half,
        ci_hi: mean + half,
        n,
    })
}

/// Like [`summarize`], but a single sample gives NaN spread instead of an error.
fn summarize_any(samples: &[f64]) -> Result<SummaryStats> {
    match samples {
        [] => Err(Error::domain("no samples")),
        [x] => Ok(SummaryStats {
            mean: *x,
            sd: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            n: 1,
        }),
        _ => summarize(samples),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Homogeneous,
    Partial,
    Inhomogeneous,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Homogeneous => "homogeneous",
            Setting::Partial => "partial",
            Setting::Inhomogeneous => "inhomogeneous",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Setting::Homogeneous),
            "partial" => Ok(Setting::Partial),
            "inhomogeneous" => Ok(Setting::Inhomogeneous),
            other => Err(Error::config(format!("unknown setting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub episode: EpisodeConfig,
    pub paths: usize,
    pub seed: u64,
    pub strategies: Vec<StrategyName>,
    /// Use the same per-arm streams for every strategy (common random numbers).
    pub shared_streams: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        if self.paths == 0 {
            return Err(Error::config("paths must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("at least one strategy is required"));
        }
        let arms = &self.episode.arms;
        match self.setting {
            Setting::Homogeneous => {
                if arms.iter().any(|a| a.lambda != arms[0].lambda) {
                    return Err(Error::config("homogeneous setting needs one shared lambda"));
                }
            }
            Setting::Partial => {
                if arms.iter().any(|a| a.reward != arms[0].reward)
                    || arms.iter().any(|a| a.model.name() != arms[0].model.name())
                {
                    return Err(Error::config("partial setting needs one model family and one reward"));
                }
                let lambdas: Vec<f64> = arms.iter().map(|a| a.lambda).collect();
                if lambdas != PARTIAL_LAMBDAS {
                    return Err(Error::config(format!("partial setting uses lambda = {PARTIAL_LAMBDAS:?}")));
                }
            }
            Setting::Inhomogeneous => {}
        }
        Ok(())
    }

    /// Model column: the common model family, or "mixed".
    pub fn model_label(&self) -> String {
        let arms = &self.episode.arms;
        let first = arms[0].model.name();
        if arms.iter().all(|a| a.model.name() == first) {
            first.to_uppercase()
        } else {
            "mixed".to_string()
        }
    }

    pub fn reward_label(&self) -> String {
        let arms = &self.episode.arms;
        if arms.iter().all(|a| a.reward == arms[0].reward) {
            arms[0].reward.name().to_string()
        } else {
            "mixed".to_string()
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the streams used by one strategy.
pub fn strategy_seed(seed: u64, strategy: StrategyName, shared: bool) -> u64 {
    if shared {
        return seed;
    }
    let tag = match strategy {
        StrategyName::Gittins => 1,
        StrategyName::Myopic => 2,
        StrategyName::ContinuousGittins => 3,
    };
    splitmix64(seed ^ splitmix64(tag))
}

/// Streams for one path.
pub fn path_streams(seed: u64, path: u64, arms: usize) -> Vec<RngStream> {
    (0..arms).map(|j| RngStream::new(seed, path, j)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub setting: Setting,
    pub model: String,
    pub reward: String,
    pub strategy: StrategyName,
    pub stats: SummaryStats,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    /// Per-strategy path rewards, in path order.
    pub samples: Vec<Vec<f64>>,
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every strategy over `paths` independent episodes. Results do not
/// depend on `threads`.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    config.validate()?;
    let ep = &config.episode;
    let j = ep.arms.len();
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    for &name in &config.strategies {
        let strategy = StrategyKind::build(name, ep)?;
        let seed = strategy_seed(config.seed, name, config.shared_streams);
        let rewards = with_pool(threads, || {
            (0..config.paths as u64)
                .into_par_iter()
                .map(|p| run_episode(ep, &strategy, &mut path_streams(seed, p, j)))
                .collect::<Result<Vec<f64>>>()
        })??;
        rows.push(ResultRow {
            setting: config.setting,
            model: config.model_label(),
            reward: config.reward_label(),
            strategy: name,
            stats: summarize_any(&rewards)?,
            seed: config.seed,
        });
        samples.push(rewards);
    }
    Ok(ExperimentResult { rows, samples })
}

pub const RESULTS_HEADER: &str = "setting,model,reward,strategy,mean,sd,ci_lo,ci_hi,n_paths,seed";

pub fn write_results_csv<W: Write>(mut out: W, rows: &[ResultRow]) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in rows {
        let s = &r.stats;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.setting, r.model, r.reward, r.strategy, s.mean, s.sd, s.ci_lo, s.ci_hi, s.n, r.seed
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub paths: usize,
    pub seed: u64,
    pub grid_step: Option<f64>,
    pub max_epochs: u64,
    pub threads: Option<usize>,
}

impl OracleOptions {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            grid_step: None,
            max_epochs: 1_000_000,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub estimate: f64,
    pub se: f64,
    pub paths: usize,
    pub capped: usize,
}

/// Beyond this discount factor the remaining terms are negligible.
const DISCOUNT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Default)]
struct PathSums {
    num: f64,
    den: f64,
    capped: bool,
}

fn ratio_estimate(sums: &[(f64, f64)]) -> (f64, f64) {
    let n = sums.len() as f64;
    let num = sums.iter().map(|s| s.0).sum::<f64>() / n;
    let den = sums.iter().map(|s| s.1).sum::<f64>() / n;
    let r = num / den;
    // delta method: Var(N̄/D̄) ≈ Var(N − rD) / (n D̄²)
    let v = sums.iter().map(|s| (s.0 - r * s.1).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (r, (v / n).sqrt() / den)
}

fn check_capped(capped: usize, paths: usize) -> Result<()> {
    if capped as f64 > 1e-3 * paths as f64 {
        Err(Error::Reliability(format!(
            "{capped} of {paths} oracle paths hit the epoch cap"
        )))
    } else {
        Ok(())
    }
}

fn oracle_path(
    model: &ArmModel,
    lambda: f64,
    q: f64,
    reward: &(dyn Fn(f64) -> f64 + Sync),
    x: f64,
    opts: &OracleOptions,
    path: u64,
) -> Result<PathSums> {
    let mut rng = RngStream::new(opts.seed, path, 0);
    let mut y = match model.barrier() {
        Some(b) => x.max(b),
        None => x,
    };
    let mut t = 0.0;
    let mut sums = PathSums {
        num: reward(x),
        den: 1.0,
        capped: false,
    };
    // at or below a reflecting barrier the exact chain never returns to x
    let can_stop = !matches!(model.barrier(), Some(b) if x <= b);
    let mut epochs = 0u64;
    loop {
        let w = sample_holding(lambda, &mut rng)?;
        y = transition(model, y, w, opts.grid_step, &mut rng)?;
        t += w;
        if can_stop && y <= x {
            return Ok(sums);
        }
        let d = (-q * t).exp();
        sums.num += d * reward(y);
        sums.den += d;
        if d < DISCOUNT_FLOOR {
            return Ok(sums);
        }
        epochs += 1;
        if epochs >= opts.max_epochs {
            sums.capped = true;
            return Ok(sums);
        }
    }
}

/// Simulation estimate of `Γ(x)` as the ratio of expected discounted reward to
/// expected discounted time, summed over epochs before the first epoch at or
/// below `x`.
pub fn mc_gittins_oracle(
    model: &ArmModel,
    lambda: f64,
    q: f64,
    reward: &(dyn Fn(f64) -> f64 + Sync),
    x: f64,
    opts: &OracleOptions,
) -> Result<OracleEstimate> {
    model.validate()?;
    if !(q > 0.0 && lambda > 0.0) {
        return Err(Error::domain("q and lambda must be positive"));
    }
    if opts.paths < 2 {
        return Err(Error::domain("oracle needs at least 2 paths"));
    }
    let sums = with_pool(opts.threads, || {
        (0..opts.paths as u64)
            .into_par_iter()
            .map(|p| oracle_path(model, lambda, q, reward, x, opts, p))
            .collect::<Result<Vec<PathSums>>>()
    })??;
    let capped = sums.iter().filter(|s| s.capped).count();
    check_capped(capped, opts.paths)?;
    let pairs: Vec<(f64, f64)> = sums.iter().map(|s| (s.num, s.den)).collect();
    let (estimate, se) = ratio_estimate(&pairs);
    Ok(OracleEstimate {
        estimate,
        se,
        paths: opts.paths,
        capped,
    })
}

/// The sum-over-epochs estimator and the time-integral estimator
/// `(R(x) + λ∫e^{−qs}R(Y)1{Y>x}ds) / (1 + λ∫e^{−qs}1{Y>x}ds)` on shared paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedEstimate {
    pub discrete: OracleEstimate,
    pub integral: OracleEstimate,
    /// Standard error of `discrete − integral` from the paired samples.
    pub diff_se: f64,
}

/// Paired estimators for a free SNLP arm; the path between epochs is walked
/// on a grid of step `h` and integrated with the trapezoid rule.
pub fn mc_gittins_oracle_paired(
    params: &SnlpParams,
    lambda: f64,
    q: f64,
    reward: &(dyn Fn(f64) -> f64 + Sync),
    x: f64,
    h: f64,
    opts: &OracleOptions,
) -> Result<PairedEstimate> {
    if !(h > 0.0) {
        return Err(Error::domain("grid step must be positive"));
    }
    if opts.paths < 2 {
        return Err(Error::domain("oracle needs at least 2 paths"));
    }
    let one_path = |path: u64| -> Result<([f64; 4], bool)> {
        let mut rng = RngStream::new(opts.seed, path, 0);
        let (mut y, mut t) = (x, 0.0);
        let r0 = reward(x);
        let mut s = [r0, 1.0, 0.0, 0.0];
        let g = |t: f64, y: f64| if y > x { (-q * t).exp() } else { 0.0 };
        let mut epochs = 0u64;
        loop {
            let w = sample_holding(lambda, &mut rng)?;
            let n = (w / h).ceil().max(1.0) as u64;
            let hh = w / n as f64;
            for i in 0..n {
                let t0 = t + i as f64 * hh;
                let y1 = y + snlp_increment(params, hh, &mut rng);
                let (g0, g1) = (g(t0, y), g(t0 + hh, y1));
                s[2] += 0.5 * hh * (g0 * reward(y) + g1 * reward(y1));
                s[3] += 0.5 * hh * (g0 + g1);
                y = y1;
            }
            t += w;
            if y <= x {
                break;
            }
            let d = (-q * t).exp();
            s[0] += d * reward(y);
            s[1] += d;
            if d < DISCOUNT_FLOOR {
                break;
            }
            epochs += 1;
            if epochs >= opts.max_epochs {
                return Ok((s, true));
            }
        }
        Ok((s, false))
    };
    let out = with_pool(opts.threads, || {
        (0..opts.paths as u64)
            .into_par_iter()
            .map(one_path)
            .collect::<Result<Vec<_>>>()
    })??;
    let capped = out.iter().filter(|o| o.1).count();
    check_capped(capped, opts.paths)?;
    let disc: Vec<(f64, f64)> = out.iter().map(|(s, _)| (s[0], s[1])).collect();
    let r0 = reward(x);
    let int: Vec<(f64, f64)> = out
        .iter()
        .map(|(s, _)| (r0 + lambda * s[2], 1.0 + lambda * s[3]))
        .collect();
    let (ed, sd) = ratio_estimate(&disc);
    let (ei, si) = ratio_estimate(&int);
    let n = out.len() as f64;
    let dbar = disc.iter().map(|p| p.1).sum::<f64>() / n;
    let ibar = int.iter().map(|p| p.1).sum::<f64>() / n;
    let infl: Vec<f64> = disc
        .iter()
        .zip(&int)
        .map(|(a, b)| (a.0 - ed * a.1) / dbar - (b.0 - ei * b.1) / ibar)
        .collect();
    let var = infl.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
    let est = |estimate, se| OracleEstimate {
        estimate,
        se,
        paths: opts.paths,
        capped,
    };
    Ok(PairedEstimate {
        discrete: est(ed, sd),
        integral: est(ei, si),
        diff_se: (var / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub lambda: f64,
    pub x: f64,
    pub gamma_lambda: f64,
    pub gamma_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSweep {
    pub model: String,
    /// `(λ, max_x |Γ^λ(x) − Γ^∞(x)|)`.
    pub distances: Vec<(f64, f64)>,
    pub curves: Vec<CurvePoint>,
}

/// Distance of `Γ^λ` to `Γ^∞` over `x_grid` for each `λ`.
pub fn convergence_sweep(
    params: &SnlpParams,
    barrier: Option<f64>,
    q: f64,
    reward: RewardSpec,
    lambdas: &[f64],
    x_grid: &[f64],
) -> Result<ConvergenceSweep> {
    if lambdas.is_empty() || x_grid.is_empty() {
        return Err(Error::domain("need at least one lambda and one x"));
    }
    let build = |lambda: f64| match barrier {
        Some(b) => LevyIndexModel::reflected(*params, b, q, lambda, reward),
        None => LevyIndexModel::new(*params, q, lambda, reward),
    };
    let limit = build(lambdas[0])?;
    let gamma_inf = x_grid
        .iter()
        .map(|&x| gittins_continuous(&limit, x))
        .collect::<Result<Vec<_>>>()?;
    let mut distances = Vec::new();
    let mut curves = Vec::new();
    for &lambda in lambdas {
        let m = build(lambda)?;
        let mut sup = 0.0f64;
        for (&x, &gi) in x_grid.iter().zip(&gamma_inf) {
            let g = m.gittins(x)?;
            sup = sup.max((g - gi).abs());
            curves.push(CurvePoint {
                lambda,
                x,
                gamma_lambda: g,
                gamma_inf: gi,
            });
        }
        distances.push((lambda, sup));
    }
    let model = match barrier {
        Some(_) => "rsnlp",
        None => "snlp",
    };
    Ok(ConvergenceSweep {
        model: model.to_string(),
        distances,
        curves,
    })
}

pub const CONVERGENCE_HEADER: &str = "model,lambda,x,gamma_lambda,gamma_inf";

pub fn write_convergence_csv<W: Write>(mut out: W, sweep: &ConvergenceSweep) -> Result<()> {
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for c in &sweep.curves {
        writeln!(out, "{},{},{},{},{}", sweep.model, c.lambda, c.x, c.gamma_lambda, c.gamma_inf)?;
    }
    Ok(())
}
