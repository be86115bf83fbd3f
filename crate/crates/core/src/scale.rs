//! Laplace exponent, its roots and the scale functions of a spectrally
//! negative Lévy process `μt + σB(t) − Σ_{n ≤ N(t)} Z_n` with `N` Poisson of
//! rate `ℓ` and `Z_n ~ Exp(r)`.
//!
//! For this family `1/(ψ(s) − q)` is a rational function with simple poles at
//! `Φ(q)` and at the negative roots `−ξ_{i,q}`, so
//!
//! ```text
//! W^(q)(x) = e^{Φ(q)x}/ψ'(Φ(q)) − Σ_i B_{i,q} e^{−ξ_{i,q} x},   B_{i,q} = −1/ψ'(−ξ_{i,q})
//! ```
//!
//! and every integral of `W^(q)` against an exponential has a closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROOT_TOL: f64 = 1e-13;

/// Parameters of `SNLP(μ, σ, ℓ, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnlpParams {
    pub mu: f64,
    pub sigma: f64,
    pub ell: f64,
    pub r: f64,
}

impl SnlpParams {
    pub fn new(mu: f64, sigma: f64, ell: f64, r: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("drift must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("volatility must be positive, got {sigma}")));
        }
        if !(ell >= 0.0 && ell.is_finite()) {
            return Err(Error::domain(format!("jump rate must be nonnegative, got {ell}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain(format!("jump size rate must be positive, got {r}")));
        }
        Ok(Self { mu, sigma, ell, r })
    }

    /// Brownian motion `σB(t)` seen as a jump-free SNLP.
    pub fn brownian(sigma: f64) -> Result<Self> {
        Self::new(0.0, sigma, 0.0, 1.0)
    }

    pub fn has_jumps(&self) -> bool {
        self.ell > 0.0
    }

    /// Mean drift `E[Y(1)] = μ − ℓ/r`.
    pub fn mean_drift(&self) -> f64 {
        self.mu - self.ell / self.r
    }

    // ψ without domain checks; callers guarantee θ ≠ −r when ℓ > 0.
    pub(crate) fn psi(&self, theta: f64) -> f64 {
        let mut v = self.mu * theta + 0.5 * self.sigma * self.sigma * theta * theta;
        if self.ell > 0.0 {
            v -= self.ell * theta / (self.r + theta);
        }
        v
    }

    pub(crate) fn psi_prime(&self, theta: f64) -> f64 {
        let mut v = self.mu + self.sigma * self.sigma * theta;
        if self.ell > 0.0 {
            let d = self.r + theta;
            v -= self.ell * self.r / (d * d);
        }
        v
    }

    pub(crate) fn psi_second(&self, theta: f64) -> f64 {
        let mut v = self.sigma * self.sigma;
        if self.ell > 0.0 {
            let d = self.r + theta;
            v += 2.0 * self.ell * self.r / (d * d * d);
        }
        v
    }
}

/// `ψ(θ) = log E[e^{θY(1)}] = μθ + σ²θ²/2 − ℓθ/(r + θ)`.
pub fn laplace_exponent(params: &SnlpParams, theta: f64) -> Result<f64> {
    if params.has_jumps() && !(theta > -params.r) {
        return Err(Error::domain(format!(
            "Laplace exponent needs theta > -r = {}, got {theta}",
            -params.r
        )));
    }
    if theta.is_nan() {
        return Err(Error::domain("theta is NaN"));
    }
    Ok(params.psi(theta))
}

/// Root `(ξ, B)` of the negative half-line and its residue coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeRoot {
    pub xi: f64,
    pub coeff: f64,
}

/// Negative roots of `ψ(θ) = q`.
///
/// With exponential jumps there are exactly two, `0 < ξ₁ < r < ξ₂`; without
/// jumps the cubic collapses to a quadratic and only one remains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegativeRoots {
    JumpFree([NegativeRoot; 1]),
    ExponentialJumps([NegativeRoot; 2]),
}

impl NegativeRoots {
    pub fn as_slice(&self) -> &[NegativeRoot] {
        match self {
            NegativeRoots::JumpFree(r) => r,
            NegativeRoots::ExponentialJumps(r) => r,
        }
    }
}

/// Cached root data for the closed-form `W^(q)`, `Z^(q)` and `Z^(q)(·, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleModel {
    pub params: SnlpParams,
    pub q: f64,
    pub phi_q: f64,
    pub roots: NegativeRoots,
    pub psi_prime_at_phi: f64,
}

/// Newton iteration safeguarded by bisection on a sign-changing bracket.
///
/// `f(lo) < 0 < f(hi)` is required on entry.
pub(crate) fn newton_bisect<F, D>(f: F, df: D, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(Error::numerical(format!(
            "root not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - x).abs();
        x = next;
        if step <= ROOT_TOL * (1.0 + x.abs()) || hi - lo <= ROOT_TOL * (1.0 + x.abs()) {
            // one last Newton polish keeps the residual at rounding level
            let fx = f(x);
            let d = df(x);
            if d != 0.0 {
                let polished = x - fx / d;
                if polished >= lo && polished <= hi && f(polished).abs() <= fx.abs() {
                    return Ok(polished);
                }
            }
            return Ok(x);
        }
    }
    Err(Error::numerical(format!(
        "root finder did not converge in [{lo}, {hi}]"
    )))
}

/// `Φ(q)`, the unique positive root of `ψ(θ) = q`.
pub fn right_inverse(params: &SnlpParams, q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::domain(format!("discount rate must be positive, got {q}")));
    }
    if !params.has_jumps() {
        let s2 = params.sigma * params.sigma;
        let disc = (params.mu * params.mu + 2.0 * q * s2).sqrt();
        // Φ = (−μ + √(μ² + 2qσ²))/σ², written without cancellation
        return Ok(if params.mu <= 0.0 {
            (-params.mu + disc) / s2
        } else {
            2.0 * q / (params.mu + disc)
        });
    }
    let mut hi = 1.0;
    let mut guard = 0;
    while params.psi(hi) <= q {
        hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return Err(Error::numerical(format!(
                "could not bracket Phi({q}) for {params:?}"
            )));
        }
    }
    newton_bisect(|t| params.psi(t) - q, |t| params.psi_prime(t), 0.0, hi)
}

fn negative_roots(params: &SnlpParams, q: f64) -> Result<NegativeRoots> {
    if !params.has_jumps() {
        let s2 = params.sigma * params.sigma;
        let disc = (params.mu * params.mu + 2.0 * q * s2).sqrt();
        let xi = if params.mu >= 0.0 {
            (params.mu + disc) / s2
        } else {
            2.0 * q / (disc - params.mu)
        };
        let coeff = -1.0 / params.psi_prime(-xi);
        return Ok(NegativeRoots::JumpFree([NegativeRoot { xi, coeff }]));
    }
    let r = params.r;
    // g(ξ) = ψ(−ξ) − q: g(0) = −q, g → +∞ as ξ ↑ r, g → −∞ as ξ ↓ r, g → +∞ as ξ → ∞
    let g = |xi: f64| params.psi(-xi) - q;
    let dg = |xi: f64| -params.psi_prime(-xi);

    let mut inner_hi = 0.5 * r;
    let mut guard = 0;
    while g(inner_hi) <= 0.0 {
        inner_hi = 0.5 * (inner_hi + r);
        guard += 1;
        if guard > 200 || inner_hi >= r {
            return Err(Error::numerical(format!("could not bracket xi_1 for {params:?}, q={q}")));
        }
    }
    let xi1 = newton_bisect(g, dg, 0.0, inner_hi)?;

    let mut outer_lo = r + 0.5 * r;
    guard = 0;
    while g(outer_lo) >= 0.0 {
        outer_lo = 0.5 * (outer_lo + r);
        guard += 1;
        if guard > 200 || outer_lo <= r {
            return Err(Error::numerical(format!("could not bracket xi_2 for {params:?}, q={q}")));
        }
    }
    let mut outer_hi = 2.0 * r + 1.0;
    guard = 0;
    while g(outer_hi) <= 0.0 {
        outer_hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return Err(Error::numerical(format!("could not bracket xi_2 for {params:?}, q={q}")));
        }
    }
    let xi2 = newton_bisect(g, dg, outer_lo, outer_hi)?;

    let root = |xi: f64| NegativeRoot {
        xi,
        coeff: -1.0 / params.psi_prime(-xi),
    };
    Ok(NegativeRoots::ExponentialJumps([root(xi1), root(xi2)]))
}

/// Builds the cached root data for discount rate `q`.
pub fn build_scale_model(params: SnlpParams, q: f64) -> Result<ScaleModel> {
    let phi_q = right_inverse(&params, q)?;
    let roots = negative_roots(&params, q)?;
    let psi_prime_at_phi = params.psi_prime(phi_q);
    if !(psi_prime_at_phi > 0.0) {
        return Err(Error::numerical(format!(
            "psi'(Phi(q)) = {psi_prime_at_phi} is not positive"
        )));
    }
    Ok(ScaleModel {
        params,
        q,
        phi_q,
        roots,
        psi_prime_at_phi,
    })
}

impl ScaleModel {
    pub fn new(params: SnlpParams, q: f64) -> Result<Self> {
        build_scale_model(params, q)
    }

    pub fn terms(&self) -> &[NegativeRoot] {
        self.roots.as_slice()
    }

    /// `1/ψ'(Φ(q)) − Σ B_{i,q}`; zero up to rounding since `W^(q)(0) = 0`.
    pub fn coefficient_residual(&self) -> f64 {
        1.0 / self.psi_prime_at_phi - self.terms().iter().map(|t| t.coeff).sum::<f64>()
    }

    /// `W^(q)(x)`.
    pub fn w(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let mut v = (self.phi_q * x).exp() / self.psi_prime_at_phi;
        for t in self.terms() {
            v -= t.coeff * (-t.xi * x).exp();
        }
        v.max(0.0)
    }

    /// `Z^(q)(x) = 1 + q ∫_0^x W^(q)(y) dy`.
    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let mut integral = (self.phi_q * x).exp_m1() / (self.phi_q * self.psi_prime_at_phi);
        for t in self.terms() {
            integral += t.coeff * (-t.xi * x).exp_m1() / t.xi;
        }
        1.0 + self.q * integral.max(0.0)
    }

    /// `e^{−Φ(q)x} Z^(q)(x)` for `x ≥ 0`; finite where `Z^(q)` overflows.
    pub(crate) fn z_scaled(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return (-self.phi_q * x).exp();
        }
        let phi = self.phi_q;
        let decay = (-phi * x).exp();
        let mut integral = -(-phi * x).exp_m1() / (phi * self.psi_prime_at_phi);
        for t in self.terms() {
            integral -= t.coeff * (decay - (-(phi + t.xi) * x).exp()) / t.xi;
        }
        decay + self.q * integral
    }

    /// `Z^(q+λ)(x, Φ(q)) = e^{Φ(q)x}(1 + λ ∫_0^x e^{−Φ(q)z} W^(q+λ)(z) dz)`, with
    /// `self` the model at `q` and `upper` the model at `q + λ`.
    pub fn z_phi_with(&self, upper: &ScaleModel, x: f64) -> f64 {
        let phi = self.phi_q;
        if x <= 0.0 {
            return (phi * x).exp();
        }
        let lambda = upper.q - self.q;
        let gap = upper.phi_q - phi;
        let mut integral = (gap * x).exp_m1() / (gap * upper.psi_prime_at_phi);
        for t in upper.terms() {
            integral += t.coeff * (-(t.xi + phi) * x).exp_m1() / (t.xi + phi);
        }
        (phi * x).exp() * (1.0 + lambda * integral.max(0.0))
    }

    /// `Z^(q+λ)(x, Φ(q))` building the `q + λ` model on the fly.
    pub fn z_phi(&self, lambda: f64, x: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        let upper = build_scale_model(self.params, self.q + lambda)?;
        Ok(self.z_phi_with(&upper, x))
    }

    /// `e^{−Φ(q+λ)x} Z^(q+λ)(x, Φ(q))` for `x ≥ 0`.
    pub(crate) fn z_phi_scaled_with(&self, upper: &ScaleModel, x: f64) -> f64 {
        let phi = self.phi_q;
        let top = upper.phi_q;
        let lambda = upper.q - self.q;
        let gap = top - phi;
        let x = x.max(0.0);
        let lead = (-gap * x).exp();
        let mut integral = -(-gap * x).exp_m1() / (gap * upper.psi_prime_at_phi);
        for t in upper.terms() {
            integral -= t.coeff * (lead - (-(top + t.xi) * x).exp()) / (t.xi + phi);
        }
        lead + lambda * integral
    }

    /// `Z^(q+λ)(x) / Z^(q+λ)(x, Φ(q))` evaluated without overflow, `self` at `q`.
    pub fn z_ratio_with(&self, upper: &ScaleModel, x: f64) -> f64 {
        if x <= 0.0 {
            return (-self.phi_q * x).exp();
        }
        upper.z_scaled(x) / self.z_phi_scaled_with(upper, x)
    }
}

/// Free-function form of [`ScaleModel::w`].
pub fn w_scale(model: &ScaleModel, x: f64) -> f64 {
    model.w(x)
}

/// Free-function form of [`ScaleModel::z`].
pub fn z_scale(model: &ScaleModel, x: f64) -> f64 {
    model.z(x)
}

/// Free-function form of [`ScaleModel::z_phi`].
pub fn z_phi(model: &ScaleModel, lambda: f64, x: f64) -> Result<f64> {
    model.z_phi(lambda, x)
}
