//! Path-wise evaluation of a strategy over one episode (lazy version of the
//! per-arm pre-sampling loop: an arm's next holding time and value are drawn
//! only when it is selected).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::index_diffusion::{DiffusionIndexModel, IndexTable};
use crate::index_levy::{gittins_continuous, LevyIndexModel};
use crate::pathsim::{advance_arm, ArmModel, ArmState, RngStream};
use crate::reward::RewardSpec;

/// Points in a diffusion index table.
pub const TABLE_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmSpec {
    pub model: ArmModel,
    pub lambda: f64,
    pub reward: RewardSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub arms: Vec<ArmSpec>,
    pub q: f64,
    pub horizon: f64,
    /// Reflection grid step; `None` uses `min(1e-3, dt/1000)`.
    pub grid_step: Option<f64>,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms.is_empty() {
            return Err(Error::config("at least one arm is required"));
        }
        if self.arms.len() > 256 {
            return Err(Error::config("at most 256 arms are supported"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::config(format!("q must be positive, got {}", self.q)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if let Some(h) = self.grid_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("grid step must be positive, got {h}")));
            }
        }
        for arm in &self.arms {
            arm.model.validate()?;
            if !(arm.lambda > 0.0 && arm.lambda.is_finite()) {
                return Err(Error::config(format!("lambda must be positive, got {}", arm.lambda)));
            }
        }
        Ok(())
    }
}

/// Per-arm score used by a strategy.
#[derive(Debug, Clone)]
pub enum IndexFunction {
    /// Closed-form index of a (reflected) SNLP arm; Brownian arms included.
    Levy(Arc<LevyIndexModel>),
    /// Continuous-observation index `Γ^∞`.
    LevyContinuous(Arc<LevyIndexModel>),
    /// Tabulated diffusion index.
    Diffusion(Arc<IndexTable>),
    /// Current reward `R(x)`.
    Reward(RewardSpec),
}

impl IndexFunction {
    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            IndexFunction::Levy(m) => m.gittins(x),
            IndexFunction::LevyContinuous(m) => gittins_continuous(m, x),
            IndexFunction::Diffusion(t) => t.eval(x),
            IndexFunction::Reward(r) => Ok(r.eval(x)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyName {
    Gittins,
    Myopic,
    ContinuousGittins,
}

impl StrategyName {
    pub fn label(self) -> &'static str {
        match self {
            StrategyName::Gittins => "GI",
            StrategyName::Myopic => "Myopic",
            StrategyName::ContinuousGittins => "GI-cts",
        }
    }
}

impl fmt::Display for StrategyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gi" | "gittins" => Ok(StrategyName::Gittins),
            "myopic" => Ok(StrategyName::Myopic),
            "gi-cts" | "gi_cts" | "continuous" => Ok(StrategyName::ContinuousGittins),
            other => Err(Error::config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// A strategy together with its per-arm score functions.
#[derive(Debug, Clone)]
pub enum StrategyKind {
    GittinsIndex(Vec<IndexFunction>),
    Myopic(Vec<RewardSpec>),
    ContinuousGittins(Vec<IndexFunction>),
}

/// Table range for a diffusion arm started at 0 and run up to `horizon`.
fn table_range(model: &ArmModel, horizon: f64) -> (f64, f64) {
    match *model {
        ArmModel::Ou { gamma } => {
            let s = 5.0 / (2.0 * gamma).sqrt();
            (-s, s)
        }
        ArmModel::Rbm { alpha, sigma } => (alpha, 5.0 * sigma * horizon.sqrt()),
        ArmModel::Bm { sigma } => (-5.0 * sigma * horizon.sqrt(), 5.0 * sigma * horizon.sqrt()),
        _ => (0.0, 0.0),
    }
}

/// Gittins index function for one arm.
pub fn gittins_index_function(arm: &ArmSpec, q: f64, horizon: f64) -> Result<IndexFunction> {
    match arm.model {
        ArmModel::Bm { .. } | ArmModel::Snlp(_) => {
            let p = arm.model.levy_params().expect("Lévy arm");
            Ok(IndexFunction::Levy(Arc::new(LevyIndexModel::new(p, q, arm.lambda, arm.reward)?)))
        }
        ArmModel::Rsnlp { alpha, params } => Ok(IndexFunction::Levy(Arc::new(LevyIndexModel::reflected(
            params, alpha, q, arm.lambda, arm.reward,
        )?))),
        ArmModel::Rbm { .. } | ArmModel::Ou { .. } => {
            let spec = arm.model.diffusion_spec().expect("diffusion arm");
            let model = DiffusionIndexModel::new(spec, q, arm.lambda, arm.reward)?;
            let (lo, hi) = table_range(&arm.model, horizon);
            Ok(IndexFunction::Diffusion(Arc::new(IndexTable::build(model, lo, hi, TABLE_POINTS)?)))
        }
    }
}

/// Continuous-observation index for one arm; only Lévy-driven arms have one.
pub fn continuous_index_function(arm: &ArmSpec, q: f64) -> Result<IndexFunction> {
    let model = match arm.model {
        ArmModel::Bm { .. } | ArmModel::Snlp(_) => {
            LevyIndexModel::new(arm.model.levy_params().expect("Lévy arm"), q, arm.lambda, arm.reward)?
        }
        ArmModel::Rsnlp { alpha, params } => LevyIndexModel::reflected(params, alpha, q, arm.lambda, arm.reward)?,
        _ => {
            return Err(Error::config(format!(
                "no continuous-time index for {} arms",
                arm.model.name()
            )))
        }
    };
    Ok(IndexFunction::LevyContinuous(Arc::new(model)))
}

impl StrategyKind {
    pub fn build(name: StrategyName, config: &EpisodeConfig) -> Result<Self> {
        config.validate()?;
        Ok(match name {
            StrategyName::Gittins => StrategyKind::GittinsIndex(
                config
                    .arms
                    .iter()
                    .map(|a| gittins_index_function(a, config.q, config.horizon))
                    .collect::<Result<_>>()?,
            ),
            StrategyName::Myopic => StrategyKind::Myopic(config.arms.iter().map(|a| a.reward).collect()),
            StrategyName::ContinuousGittins => StrategyKind::ContinuousGittins(
                config
                    .arms
                    .iter()
                    .map(|a| continuous_index_function(a, config.q))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    pub fn name(&self) -> StrategyName {
        match self {
            StrategyKind::GittinsIndex(_) => StrategyName::Gittins,
            StrategyKind::Myopic(_) => StrategyName::Myopic,
            StrategyKind::ContinuousGittins(_) => StrategyName::ContinuousGittins,
        }
    }

    pub fn arm_count(&self) -> usize {
        match self {
            StrategyKind::GittinsIndex(v) | StrategyKind::ContinuousGittins(v) => v.len(),
            StrategyKind::Myopic(v) => v.len(),
        }
    }

    /// Score of arm `j` at state `x`.
    pub fn score(&self, j: usize, x: f64) -> Result<f64> {
        match self {
            StrategyKind::GittinsIndex(v) | StrategyKind::ContinuousGittins(v) => v[j].eval(x),
            StrategyKind::Myopic(v) => Ok(v[j].eval(x)),
        }
    }
}

/// `∫_S^{S+dT} e^{−qu} du`.
pub fn discount_segment(q: f64, s: f64, dt: f64) -> f64 {
    (-q * s).exp() * -(-q * dt).exp_m1() / q
}

/// Argmax with ties going to the lowest index. Panics on an empty slice.
pub fn select_arm(scores: &[f64]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = j;
        }
    }
    best
}

/// One period of an episode, for tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Period {
    pub arm: usize,
    pub start: f64,
    pub length: f64,
    pub value: f64,
    pub reward: f64,
}

/// Discounted reward of one episode. `streams[j]` drives arm `j`.
pub fn run_episode(config: &EpisodeConfig, strategy: &StrategyKind, streams: &mut [RngStream]) -> Result<f64> {
    episode(config, strategy, streams, None)
}

/// [`run_episode`] that also records every period.
pub fn run_episode_traced(
    config: &EpisodeConfig,
    strategy: &StrategyKind,
    streams: &mut [RngStream],
) -> Result<(f64, Vec<Period>, Vec<ArmState>)> {
    let mut trace = Vec::new();
    let mut states = Vec::new();
    let total = episode(config, strategy, streams, Some((&mut trace, &mut states)))?;
    Ok((total, trace, states))
}

fn episode(
    config: &EpisodeConfig,
    strategy: &StrategyKind,
    streams: &mut [RngStream],
    mut trace: Option<(&mut Vec<Period>, &mut Vec<ArmState>)>,
) -> Result<f64> {
    let j_count = config.arms.len();
    if j_count == 0 {
        return Err(Error::config("at least one arm is required"));
    }
    if strategy.arm_count() != j_count || streams.len() != j_count {
        return Err(Error::config("strategy, streams and arms must have the same length"));
    }
    let mut states = vec![ArmState::start(0.0); j_count];
    let mut scores = (0..j_count)
        .map(|j| strategy.score(j, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let (q, horizon) = (config.q, config.horizon);
    let mut s = 0.0;
    let mut total = 0.0;
    while s < horizon {
        let j = select_arm(&scores);
        let arm = &config.arms[j];
        let value = states[j].value;
        let reward = arm.reward.eval(value);
        let (next, w) = {
            let rng = &mut streams[j];
            let w = crate::pathsim::sample_holding(arm.lambda, rng)?;
            if s + w > horizon {
                let dt = horizon - s;
                let r = discount_segment(q, s, dt) * reward;
                total += r;
                if let Some((t, _)) = trace.as_mut() {
                    t.push(Period {
                        arm: j,
                        start: s,
                        length: dt,
                        value,
                        reward: r,
                    });
                }
                break;
            }
            let v = crate::pathsim::transition(&arm.model, value, w, config.grid_step, rng)?;
            (
                ArmState {
                    value: v,
                    epochs: states[j].epochs + 1,
                    local_clock: states[j].local_clock + w,
                },
                w,
            )
        };
        let r = discount_segment(q, s, w) * reward;
        total += r;
        if let Some((t, _)) = trace.as_mut() {
            t.push(Period {
                arm: j,
                start: s,
                length: w,
                value,
                reward: r,
            });
        }
        s += w;
        states[j] = next;
        scores[j] = strategy.score(j, next.value)?;
    }
    if let Some((_, st)) = trace {
        *st = states;
    }
    Ok(total)
}

/// Advances one arm in isolation; same draws as an episode that selects it.
pub fn advance(arm: &ArmSpec, state: &ArmState, grid_step: Option<f64>, rng: &mut RngStream) -> Result<(ArmState, f64)> {
    advance_arm(&arm.model, arm.lambda, state, grid_step, rng)
}
