//! Sampling of holding times and arm transitions at decision epochs.
//!
//! Every (path, arm) pair owns a ChaCha8 stream selected with `set_stream`, so
//! adding paths or arms never shifts the draws of another pair.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::index_diffusion::DiffusionSpec;
use crate::scale::SnlpParams;

/// Deterministic random stream for one (path, arm) pair.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    path: u64,
    arm: u8,
}

impl RngStream {
    pub fn new(seed: u64, path: u64, arm: usize) -> Self {
        assert!(arm < 256, "at most 256 arms per path");
        assert!(path < 1 << 56, "path index out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path << 8 | arm as u64);
        Self {
            rng,
            seed,
            path,
            arm: arm as u8,
        }
    }

    pub fn id(&self) -> (u64, u64, usize) {
        (self.seed, self.path, self.arm as usize)
    }

    /// Uniform on the open interval (0, 1).
    pub fn open_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn check_rate(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rate must be positive, got {lambda}")))
    }
}

/// Inverse-CDF exponential draw from a given uniform.
pub fn holding_from_uniform(lambda: f64, u: f64) -> f64 {
    -u.ln() / lambda
}

/// Holding time `W ~ Exp(λ)`.
pub fn sample_holding(lambda: f64, rng: &mut RngStream) -> Result<f64> {
    check_rate(lambda)?;
    Ok(holding_from_uniform(lambda, rng.open_uniform()))
}

/// Exact increment of the SNLP over a period of length `dt`.
pub fn snlp_increment(params: &SnlpParams, dt: f64, rng: &mut RngStream) -> f64 {
    let mut y = params.mu * dt + params.sigma * dt.sqrt() * rng.normal();
    if params.ell > 0.0 {
        let jump = Exp::new(params.r).expect("validated jump rate");
        // jump count via arrival times, which is Poisson(ℓ dt)
        let mut t = holding_from_uniform(params.ell, rng.open_uniform());
        while t <= dt {
            y -= jump.sample(rng);
            t += holding_from_uniform(params.ell, rng.open_uniform());
        }
    }
    y
}

/// Default grid step for reflected paths: `min(1e-3, dt/1000)`.
pub fn default_grid_step(dt: f64) -> f64 {
    (1e-3f64).min(dt / 1000.0)
}

/// Reflected value after `dt`: the free path is walked on `⌈dt/h⌉` equal steps
/// and pushed back to the barrier after each step. The discrete monitoring
/// misses excursions inside a step, a bias of order `√h`.
pub fn reflected_value(
    params: &SnlpParams,
    barrier: f64,
    x0: f64,
    dt: f64,
    grid_step: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::domain(format!("grid step must be positive, got {grid_step}")));
    }
    if x0 < barrier {
        return Err(Error::domain(format!("start {x0} below barrier {barrier}")));
    }
    let n = (dt / grid_step).ceil().max(1.0) as u64;
    let h = dt / n as f64;
    let drift = params.mu * h;
    let vol = params.sigma * h.sqrt();
    let jump = (params.ell > 0.0).then(|| Exp::new(params.r).expect("validated jump rate"));
    let mut next_jump = match jump {
        Some(_) => holding_from_uniform(params.ell, rng.open_uniform()),
        None => f64::INFINITY,
    };
    let mut y = x0;
    for i in 1..=n {
        let mut step = drift + vol * rng.normal();
        let t_end = if i == n { dt } else { i as f64 * h };
        if let Some(jump) = &jump {
            while next_jump <= t_end {
                step -= jump.sample(rng);
                next_jump += holding_from_uniform(params.ell, rng.open_uniform());
            }
        }
        y = (y + step).max(barrier);
    }
    Ok(y)
}

/// Exact OU transition over `dt`.
pub fn ou_transition(gamma: f64, x0: f64, dt: f64, rng: &mut RngStream) -> f64 {
    let mean = x0 * (-gamma * dt).exp();
    let var = -(-2.0 * gamma * dt).exp_m1() / (2.0 * gamma);
    mean + var.sqrt() * rng.normal()
}

/// The five arm dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmModel {
    Bm { sigma: f64 },
    Rbm { alpha: f64, sigma: f64 },
    Ou { gamma: f64 },
    Snlp(SnlpParams),
    Rsnlp { alpha: f64, params: SnlpParams },
}

impl ArmModel {
    pub fn name(&self) -> &'static str {
        match self {
            ArmModel::Bm { .. } => "bm",
            ArmModel::Rbm { .. } => "rbm",
            ArmModel::Ou { .. } => "ou",
            ArmModel::Snlp(_) => "snlp",
            ArmModel::Rsnlp { .. } => "rsnlp",
        }
    }

    pub fn barrier(&self) -> Option<f64> {
        match *self {
            ArmModel::Rbm { alpha, .. } | ArmModel::Rsnlp { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// Lévy exponent parameters when the arm is (a reflection of) an SNLP.
    /// Brownian arms are jump-free SNLPs.
    pub fn levy_params(&self) -> Option<SnlpParams> {
        match *self {
            ArmModel::Bm { sigma } | ArmModel::Rbm { sigma, .. } => SnlpParams::brownian(sigma).ok(),
            ArmModel::Snlp(p) | ArmModel::Rsnlp { params: p, .. } => Some(p),
            ArmModel::Ou { .. } => None,
        }
    }

    pub fn diffusion_spec(&self) -> Option<DiffusionSpec> {
        match *self {
            ArmModel::Bm { sigma } => DiffusionSpec::bm(sigma).ok(),
            ArmModel::Rbm { alpha, sigma } => DiffusionSpec::rbm(alpha, sigma).ok(),
            ArmModel::Ou { gamma } => DiffusionSpec::ou(gamma).ok(),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            ArmModel::Bm { sigma } => positive("sigma", sigma),
            ArmModel::Rbm { alpha, sigma } => {
                positive("sigma", sigma)?;
                if alpha.is_finite() && alpha <= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("barrier must not exceed the start value 0, got {alpha}")))
                }
            }
            ArmModel::Ou { gamma } => positive("gamma", gamma),
            ArmModel::Snlp(p) => SnlpParams::new(p.mu, p.sigma, p.ell, p.r).map(|_| ()),
            ArmModel::Rsnlp { alpha, params: p } => {
                SnlpParams::new(p.mu, p.sigma, p.ell, p.r)?;
                if alpha.is_finite() && alpha <= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("barrier must not exceed the start value 0, got {alpha}")))
                }
            }
        }
    }
}

/// State of an arm at its last decision epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmState {
    pub value: f64,
    pub epochs: u64,
    pub local_clock: f64,
}

impl ArmState {
    pub fn start(value: f64) -> Self {
        Self {
            value,
            epochs: 0,
            local_clock: 0.0,
        }
    }
}

/// Value after operating the arm for `dt` from `x0`.
pub fn transition(model: &ArmModel, x0: f64, dt: f64, grid_step: Option<f64>, rng: &mut RngStream) -> Result<f64> {
    let h = grid_step.unwrap_or_else(|| default_grid_step(dt));
    Ok(match *model {
        ArmModel::Bm { sigma } => x0 + sigma * dt.sqrt() * rng.normal(),
        ArmModel::Snlp(p) => x0 + snlp_increment(&p, dt, rng),
        ArmModel::Ou { gamma } => ou_transition(gamma, x0, dt, rng),
        ArmModel::Rbm { alpha, sigma } => {
            let p = SnlpParams::brownian(sigma)?;
            reflected_value(&p, alpha, x0.max(alpha), dt, h, rng)?
        }
        ArmModel::Rsnlp { alpha, params } => reflected_value(&params, alpha, x0.max(alpha), dt, h, rng)?,
    })
}

/// Draws a holding time, then the arm value at the end of it.
pub fn advance_arm(
    model: &ArmModel,
    lambda: f64,
    state: &ArmState,
    grid_step: Option<f64>,
    rng: &mut RngStream,
) -> Result<(ArmState, f64)> {
    let w = sample_holding(lambda, rng)?;
    let value = transition(model, state.value, w, grid_step, rng)?;
    Ok((
        ArmState {
            value,
            epochs: state.epochs + 1,
            local_clock: state.local_clock + w,
        },
        w,
    ))
}
