//! Closed-form Gittins indices for (reflected) spectrally negative Lévy arms
//! observed at the arrivals of an independent Poisson clock of rate `λ`.
//!
//! Without reflection the index is `Γ(x) = ∫ R(x + y) μ^λ(dy)` where `μ^λ` has
//! an atom `Φ(q)/Φ(q+λ)` at zero and an exponential tail of rate `Φ(q)`.
//! The continuous-observation limit `λ → ∞` keeps only the tail.

use crate::error::{Error, Result};
use crate::reward::{exp_tail_average, RewardSpec};
use crate::scale::{build_scale_model, laplace_exponent, right_inverse, ScaleModel, SnlpParams};

/// Everything needed to evaluate `Γ`, `Γ^∞` and `μ^λ` for one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyIndexModel {
    /// Scale model at the discount rate `q`.
    pub scale: ScaleModel,
    /// Scale model at `q + λ`.
    pub upper: ScaleModel,
    pub lambda: f64,
    pub barrier: Option<f64>,
    pub reward: RewardSpec,
}

/// `μ^λ` split into its atom at zero and its exponential density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuLambdaSN {
    pub atom_at_zero: f64,
    pub tail_rate: f64,
    pub tail_mass: f64,
}

impl MuLambdaSN {
    /// Density of the absolutely continuous part at `y > 0`.
    pub fn density(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            self.tail_mass * self.tail_rate * (-self.tail_rate * y).exp()
        }
    }

    /// `∫ e^{−θy} μ^λ(dy)` of the decomposition.
    pub fn laplace(&self, theta: f64) -> f64 {
        self.atom_at_zero + self.tail_mass * self.tail_rate / (self.tail_rate + theta)
    }
}

impl LevyIndexModel {
    pub fn new(params: SnlpParams, q: f64, lambda: f64, reward: RewardSpec) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        let scale = build_scale_model(params, q)?;
        let upper = build_scale_model(params, q + lambda)?;
        Ok(Self {
            scale,
            upper,
            lambda,
            barrier: None,
            reward,
        })
    }

    /// Same arm reflected from below at `barrier`.
    pub fn reflected(params: SnlpParams, barrier: f64, q: f64, lambda: f64, reward: RewardSpec) -> Result<Self> {
        if !barrier.is_finite() {
            return Err(Error::domain("barrier must be finite"));
        }
        let mut m = Self::new(params, q, lambda, reward)?;
        m.barrier = Some(barrier);
        Ok(m)
    }

    pub fn q(&self) -> f64 {
        self.scale.q
    }

    pub fn params(&self) -> &SnlpParams {
        &self.scale.params
    }

    /// `Φ(q)`.
    pub fn phi_q(&self) -> f64 {
        self.scale.phi_q
    }

    /// Atom of `μ^λ` at zero, `Φ(q)/Φ(q+λ)`.
    pub fn atom_p0(&self) -> f64 {
        self.scale.phi_q / self.upper.phi_q
    }

    /// `Γ(x)` for whichever variant this model is.
    pub fn gittins(&self, x: f64) -> Result<f64> {
        match self.barrier {
            None => gittins_snlp(self, x),
            Some(_) => gittins_rsnlp(self, x),
        }
    }
}

/// `∫ e^{−θy} μ^λ(dy) = (Φ(q+λ) + θ)/(θ + Φ(q)) · Φ(q)/Φ(q+λ)`.
pub fn mu_transform_sn(model: &LevyIndexModel, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(Error::domain(format!("theta must be nonnegative, got {theta}")));
    }
    if theta.is_infinite() {
        return Ok(model.atom_p0());
    }
    let (lo, hi) = (model.scale.phi_q, model.upper.phi_q);
    Ok((hi + theta) / (theta + lo) * lo / hi)
}

/// Partial-fraction inversion of [`mu_transform_sn`].
pub fn mu_decompose_sn(model: &LevyIndexModel) -> MuLambdaSN {
    let atom = model.atom_p0();
    MuLambdaSN {
        atom_at_zero: atom,
        tail_rate: model.scale.phi_q,
        tail_mass: 1.0 - atom,
    }
}

/// `Γ(x) = p0 R(x) + (1 − p0) E[R(x + Exp(Φ(q)))]`.
pub fn gittins_snlp(model: &LevyIndexModel, x: f64) -> Result<f64> {
    if model.barrier.is_some() {
        return Err(Error::domain("gittins_snlp called on a reflected model"));
    }
    let p0 = model.atom_p0();
    let tail = exp_tail_average(model.reward, x, model.scale.phi_q)?;
    Ok(p0 * model.reward.eval(x) + (1.0 - p0) * tail)
}

/// Density in `y > 0` of the discounted occupation measure, before the first
/// down-crossing of zero at an observation epoch, of the process started at
/// zero and reflected from below at `a ≤ 0`.
pub fn reflected_resolvent_density(model: &LevyIndexModel, a: f64, y: f64) -> Result<f64> {
    if a > 0.0 {
        return Err(Error::domain(format!("reflection level must be <= 0, got {a}")));
    }
    if !(y > 0.0) {
        return Err(Error::domain(format!("y must be positive, got {y}")));
    }
    let phi = model.scale.phi_q;
    Ok(phi * (-phi * y).exp() / resolvent_denominator(model, -a))
}

// (q+λ) Z^(q+λ)(d, Φ(q)) / Z^(q+λ)(d) − λ for d = x − b ≥ 0
fn resolvent_denominator(model: &LevyIndexModel, distance: f64) -> f64 {
    let ratio = model.scale.z_ratio_with(&model.upper, distance);
    (model.q() + model.lambda) / ratio - model.lambda
}

/// `c_x^{(b)} = (λ/(q+λ)) Z^(q+λ)(x−b) / Z^(q+λ)(x−b, Φ(q))`.
pub fn continuation_weight(model: &LevyIndexModel, distance: f64) -> f64 {
    let lambda = model.lambda;
    lambda / (model.q() + lambda) * model.scale.z_ratio_with(&model.upper, distance.max(0.0))
}

/// Index of the arm reflected from below at its barrier `b`:
///
/// * `x > b`: `(1 − c_x) R(x) + c_x E[R(x + Exp(Φ(q)))]`
/// * `x ≤ b`: `q/(λ+q) R(b) + λ/(λ+q) E[R(b + Exp(Φ(q)))]`
pub fn gittins_rsnlp(model: &LevyIndexModel, x: f64) -> Result<f64> {
    let b = model
        .barrier
        .ok_or_else(|| Error::domain("gittins_rsnlp needs a barrier"))?;
    let rate = model.scale.phi_q;
    let reward = model.reward;
    if x <= b {
        let q = model.q();
        let lambda = model.lambda;
        let tail = exp_tail_average(reward, b, rate)?;
        return Ok(q / (lambda + q) * reward.eval(b) + lambda / (lambda + q) * tail);
    }
    let c = continuation_weight(model, x - b);
    let tail = exp_tail_average(reward, x, rate)?;
    Ok((1.0 - c) * reward.eval(x) + c * tail)
}

/// Continuous-observation limit `Γ^∞(x) = E[R(x + Exp(Φ(q)))]`, flat below a
/// barrier when one is present.
pub fn gittins_continuous(model: &LevyIndexModel, x: f64) -> Result<f64> {
    let x = match model.barrier {
        Some(b) => x.max(b),
        None => x,
    };
    exp_tail_average(model.reward, x, model.scale.phi_q)
}

/// Laplace transform of `μ^λ` for a spectrally positive arm whose dual
/// `−Y` has parameters `dual_params`.
///
/// The removable singularities at `θ = Φ(q)` and `θ = Φ(q+λ)` are replaced by
/// their limits (second-order expansions in a 1e-6 neighbourhood).
pub fn mu_transform_sp(dual_params: &SnlpParams, q: f64, lambda: f64, theta: f64) -> Result<f64> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta must be finite and nonnegative, got {theta}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
    }
    let p = dual_params;
    let lo = right_inverse(p, q)?;
    let hi = right_inverse(p, q + lambda)?;
    let psi = laplace_exponent(p, theta)?;

    let near = |root: f64| (theta - root).abs() <= 1e-6 * root.max(1.0);

    // (θ − Φ(q)) / (ψ(θ) − q)
    let first = if near(lo) {
        let d = theta - lo;
        1.0 / (p.psi_prime(lo) + 0.5 * p.psi_second(lo) * d)
    } else {
        (theta - lo) / (psi - q)
    };
    // (λ + q − ψ(θ)) / (Φ(q+λ) − θ)
    let second = if near(hi) {
        let d = theta - hi;
        p.psi_prime(hi) + 0.5 * p.psi_second(hi) * d
    } else {
        (lambda + q - psi) / (hi - theta)
    };
    Ok(first * second * (q / lo) * (hi / (lambda + q)))
}

/// Convenience: `Φ(q)` for raw parameters.
pub fn phi(params: &SnlpParams, q: f64) -> Result<f64> {
    right_inverse(params, q)
}
