//! Gittins indices for Brownian, reflected Brownian and Ornstein–Uhlenbeck arms.
//!
//! Everything is built from the Green function `G_α(x, y)` with respect to the
//! speed measure, written as `C ψ_α(min) φ_α(max)` and evaluated in log space.

use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::pcf::{log_pcf, PcfTable};
use crate::quad::{integrate, integrate_from_neg_infinity, integrate_to_infinity, Tolerance};
use crate::reward::RewardSpec;

pub use crate::pcf::pcf;

/// OU integrands are cut where the Gaussian speed density falls below 1e-18.
const OU_CUTOFF: f64 = 41.45;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionSpec {
    /// Driftless Brownian motion `σB`.
    Bm { sigma: f64 },
    /// `σB` reflected from below at `alpha`.
    Rbm { alpha: f64, sigma: f64 },
    /// `dY = −γY dt + dB`.
    Ou { gamma: f64 },
}

impl DiffusionSpec {
    pub fn bm(sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        Ok(Self::Bm { sigma })
    }

    pub fn rbm(alpha: f64, sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        if !alpha.is_finite() {
            return Err(Error::domain("barrier must be finite"));
        }
        Ok(Self::Rbm { alpha, sigma })
    }

    pub fn ou(gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Ok(Self::Ou { gamma })
    }

    /// Left end of the state interval.
    pub fn lower(&self) -> f64 {
        match *self {
            Self::Rbm { alpha, .. } => alpha,
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        y.is_finite() && y >= self.lower()
    }

    fn check(&self, y: f64) -> Result<()> {
        if self.contains(y) {
            Ok(())
        } else {
            Err(Error::domain(format!("state {y} outside the interval of {self:?}")))
        }
    }

    /// Natural length scale used to size index tables.
    pub fn scale(&self) -> f64 {
        match *self {
            Self::Bm { sigma } | Self::Rbm { sigma, .. } => sigma,
            Self::Ou { gamma } => 1.0 / (2.0 * gamma).sqrt(),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {v}")))
    }
}

/// Density of the speed measure with respect to Lebesgue measure.
pub fn speed_density(spec: &DiffusionSpec, y: f64) -> Result<f64> {
    spec.check(y)?;
    Ok(speed(spec, y))
}

fn speed(spec: &DiffusionSpec, y: f64) -> f64 {
    match *spec {
        DiffusionSpec::Bm { sigma } | DiffusionSpec::Rbm { sigma, .. } => 2.0 / (sigma * sigma),
        DiffusionSpec::Ou { gamma } => 2.0 * (-gamma * y * y).exp(),
    }
}

/// Green function of one diffusion at one resolvent rate.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    spec: DiffusionSpec,
    rate: f64,
    log_const: f64,
    // √(2α)/σ for the Brownian kinds
    k: f64,
    table: Option<Arc<PcfTable>>,
}

impl GreenKernel {
    /// Kernel evaluating parabolic cylinder values by direct quadrature.
    pub fn new(spec: DiffusionSpec, rate: f64) -> Result<Self> {
        check_positive("resolvent rate", rate)?;
        Ok(match spec {
            DiffusionSpec::Bm { sigma } | DiffusionSpec::Rbm { sigma, .. } => {
                let s = (2.0 * rate).sqrt();
                Self {
                    spec,
                    rate,
                    log_const: (sigma / (2.0 * s)).ln(),
                    k: s / sigma,
                    table: None,
                }
            }
            DiffusionSpec::Ou { gamma } => Self {
                spec,
                rate,
                log_const: ln_gamma(rate / gamma) - (2.0 * (gamma * std::f64::consts::PI).sqrt()).ln(),
                k: 0.0,
                table: None,
            },
        })
    }

    /// Same kernel backed by an interpolation table of `ln D_{−α/γ}` (OU only).
    pub fn tabulated(spec: DiffusionSpec, rate: f64) -> Result<Self> {
        let mut kernel = Self::new(spec, rate)?;
        if let DiffusionSpec::Ou { gamma } = spec {
            kernel.table = Some(Arc::new(PcfTable::new(rate / gamma)?));
        }
        Ok(kernel)
    }

    pub fn spec(&self) -> &DiffusionSpec {
        &self.spec
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn log_d(&self, nu: f64, s: f64) -> f64 {
        let v = match &self.table {
            Some(t) => t.log_eval(s),
            None => log_pcf(nu, s),
        };
        v.unwrap_or(f64::NAN)
    }

    /// `ln φ_α(x)` for the decreasing solution, up to a constant.
    fn log_phi(&self, x: f64) -> f64 {
        match self.spec {
            DiffusionSpec::Bm { .. } | DiffusionSpec::Rbm { .. } => -self.k * x,
            DiffusionSpec::Ou { gamma } => {
                0.5 * gamma * x * x + self.log_d(self.rate / gamma, x * (2.0 * gamma).sqrt())
            }
        }
    }

    /// `ln ψ_α(x)` for the increasing solution, normalised to match `log_const`.
    fn log_psi(&self, x: f64) -> f64 {
        match self.spec {
            DiffusionSpec::Bm { .. } => self.k * x,
            DiffusionSpec::Rbm { alpha, .. } => self.k * x + (-2.0 * self.k * (x - alpha)).exp().ln_1p(),
            DiffusionSpec::Ou { gamma } => {
                0.5 * gamma * x * x + self.log_d(self.rate / gamma, -x * (2.0 * gamma).sqrt())
            }
        }
    }

    fn g(&self, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        (self.log_const + self.log_psi(lo) + self.log_phi(hi)).exp()
    }

    /// `G_α(x, y)`.
    pub fn green(&self, x: f64, y: f64) -> Result<f64> {
        self.spec.check(x)?;
        self.spec.check(y)?;
        finite(self.g(x, y), "green function")
    }

    /// `φ_α(x)/φ_α(y) = E_x[e^{−α κ_y}]` for `x ≥ y`.
    pub fn phi_ratio(&self, x: f64, y: f64) -> Result<f64> {
        self.spec.check(x)?;
        self.spec.check(y)?;
        if x < y {
            return Err(Error::domain(format!("phi ratio needs x >= y, got x={x}, y={y}")));
        }
        if x == y {
            return Ok(1.0);
        }
        finite((self.log_phi(x) - self.log_phi(y)).exp(), "phi ratio")
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numerical(format!("{what} is not finite")))
    }
}

/// `E_x[e^{−q κ_y}]` for `x ≥ y`.
pub fn phi_ratio(spec: &DiffusionSpec, q: f64, x: f64, y: f64) -> Result<f64> {
    GreenKernel::new(*spec, q)?.phi_ratio(x, y)
}

/// `G_α(x, y)` with respect to the speed measure.
pub fn green(spec: &DiffusionSpec, alpha_rate: f64, x: f64, y: f64) -> Result<f64> {
    GreenKernel::new(*spec, alpha_rate)?.green(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionTolerances {
    pub outer: Tolerance,
    pub inner: Tolerance,
}

impl Default for DiffusionTolerances {
    fn default() -> Self {
        Self {
            outer: Tolerance::new(1e-9, 1e-10),
            inner: Tolerance::new(1e-10, 1e-11),
        }
    }
}

impl DiffusionTolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            outer: self.outer.scaled(factor),
            inner: self.inner.scaled(factor),
        }
    }
}

/// Index model for one diffusion arm: kernels at rates `q` and `q + λ`.
#[derive(Debug, Clone)]
pub struct DiffusionIndexModel {
    pub spec: DiffusionSpec,
    pub q: f64,
    pub lambda: f64,
    pub reward: RewardSpec,
    pub tolerances: DiffusionTolerances,
    gq: GreenKernel,
    gl: GreenKernel,
}

/// The three pieces of `H(x; f) = f(x) Θ + λ A + λ² B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HParts {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
}

impl DiffusionIndexModel {
    pub fn new(spec: DiffusionSpec, q: f64, lambda: f64, reward: RewardSpec) -> Result<Self> {
        check_positive("q", q)?;
        check_positive("lambda", lambda)?;
        Ok(Self {
            spec,
            q,
            lambda,
            reward,
            tolerances: DiffusionTolerances::default(),
            gq: GreenKernel::tabulated(spec, q)?,
            gl: GreenKernel::tabulated(spec, q + lambda)?,
        })
    }

    pub fn with_tolerances(mut self, tolerances: DiffusionTolerances) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn kernel_q(&self) -> &GreenKernel {
        &self.gq
    }

    pub fn kernel_q_lambda(&self) -> &GreenKernel {
        &self.gl
    }

    fn upper_end(&self, from: f64) -> f64 {
        match self.spec {
            DiffusionSpec::Ou { gamma } => (from.max(0.0).powi(2) + OU_CUTOFF / gamma).sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// `∫_from^∞ f`, with `decay` the length scale of the integrand's tail.
    fn upper_integral<F: FnMut(f64) -> f64>(&self, f: F, from: f64, end: f64, decay: f64, tol: Tolerance) -> Result<f64> {
        let est = if end.is_finite() {
            integrate(f, from, end, tol)?
        } else {
            integrate_to_infinity(f, from, decay, tol)?
        };
        Ok(est.value)
    }

    /// `∫_{I ∩ (−∞, to]} f`.
    fn lower_integral<F: FnMut(f64) -> f64>(&self, f: F, to: f64, decay: f64, tol: Tolerance) -> Result<f64> {
        let est = match self.spec {
            DiffusionSpec::Bm { .. } => integrate_from_neg_infinity(f, to, decay, tol)?,
            DiffusionSpec::Rbm { alpha, .. } => integrate(f, alpha, to, tol)?,
            DiffusionSpec::Ou { gamma } => {
                let start = -(to.min(0.0).powi(2) + OU_CUTOFF / gamma).sqrt();
                integrate(f, start, to, tol)?
            }
        };
        Ok(est.value)
    }

    fn decay_q(&self) -> f64 {
        if self.gq.k > 0.0 { 1.0 / self.gq.k } else { 1.0 }
    }

    fn decay_l(&self) -> f64 {
        if self.gl.k > 0.0 { 1.0 / self.gl.k } else { 1.0 }
    }

    /// `∫_{u > x} f(u) [G_q(z,u) − ρ(z) G_q(x,u)] m(du)`, the `q`-potential of the
    /// process started at `z` and killed on hitting `x`.
    fn killed_potential(&self, x: f64, z: f64, log_phi_x: f64, f: &dyn Fn(f64) -> f64, end: f64) -> Result<f64> {
        let rho = (self.gq.log_phi(z) - log_phi_x).exp();
        let kernel = |u: f64| f(u) * (self.gq.g(z, u) - rho * self.gq.g(x, u)) * speed(&self.spec, u);
        let tol = self.tolerances.inner;
        let left = integrate(kernel, x, z, tol)?.value;
        let right = self.upper_integral(kernel, z, end, self.decay_q(), tol)?;
        Ok(left + right)
    }

    /// `Θ(x) = 1 − λ ∫_{z > x} ρ(z) G_{q+λ}(x, z) m(dz)`.
    pub fn theta(&self, x: f64) -> Result<f64> {
        self.spec.check(x)?;
        let log_phi_x = self.gq.log_phi(x);
        let end = self.upper_end(x);
        let integral = self.upper_integral(
            |z| (self.gq.log_phi(z) - log_phi_x).exp() * self.gl.g(x, z) * speed(&self.spec, z),
            x,
            end,
            self.decay_l(),
            self.tolerances.outer,
        )?;
        let theta = 1.0 - self.lambda * integral;
        if theta > 0.0 && theta < 1.0 {
            Ok(theta)
        } else {
            Err(Error::numerical(format!("Θ({x}) = {theta} outside (0, 1)")))
        }
    }

    /// `A = ∫_{z>x} f G_{q+λ}(x,·) m` and `B = ∫_{z>x} G_{q+λ}(x,z) K_f(z) m(dz)`.
    fn a_b(&self, x: f64, f: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
        let end = self.upper_end(x);
        let log_phi_x = self.gq.log_phi(x);
        let a = self.upper_integral(
            |z| f(z) * self.gl.g(x, z) * speed(&self.spec, z),
            x,
            end,
            self.decay_l(),
            self.tolerances.outer,
        )?;
        let b = self.upper_integral(
            |z| {
                let k = self.killed_potential(x, z, log_phi_x, f, end).unwrap_or(f64::NAN);
                self.gl.g(x, z) * k * speed(&self.spec, z)
            },
            x,
            end,
            self.decay_l(),
            self.tolerances.outer,
        )?;
        Ok((a, b))
    }

    pub fn h_parts(&self, x: f64, f: &dyn Fn(f64) -> f64) -> Result<HParts> {
        let theta = self.theta(x)?;
        let (a, b) = self.a_b(x, f)?;
        Ok(HParts { theta, a, b })
    }

    /// `H(x; f) = f(x) Θ(x) + λ A + λ² B`.
    pub fn h_functional(&self, x: f64, f: &dyn Fn(f64) -> f64) -> Result<f64> {
        let p = self.h_parts(x, f)?;
        Ok(f(x) * p.theta + self.lambda * p.a + self.lambda * self.lambda * p.b)
    }

    /// Gittins index `H(x; R) / H(x; 1)`. Below an RBM barrier the index is flat.
    pub fn gittins(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::domain("state must be finite"));
        }
        let x = x.max(self.spec.lower());
        let theta = self.theta(x)?;
        let reward = self.reward;
        let r = move |z: f64| reward.eval(z);
        let one = |_: f64| 1.0;
        let (ar, br) = self.a_b(x, &r)?;
        let (a1, b1) = self.a_b(x, &one)?;
        let l = self.lambda;
        let num = r(x) * theta + l * ar + l * l * br;
        let den = theta + l * a1 + l * l * b1;
        if !(den > 0.0) {
            return Err(Error::numerical(format!("H({x}; 1) = {den} is not positive")));
        }
        finite(num / den, "gittins index")
    }

    /// `E_y[∫_0^{T_y^-} e^{−qs} h(Y(s)) ds]`, with `T_y^-` the first renewal
    /// time at which the arm is at or below `y`.
    pub fn resolvent_until_down(&self, y: f64, h: &dyn Fn(f64) -> f64) -> Result<f64> {
        self.spec.check(y)?;
        let theta = self.theta(y)?;
        let tol = self.tolerances.outer;
        let weight = |z: f64| h(z) * self.gl.g(y, z) * speed(&self.spec, z);
        let below = self.lower_integral(weight, y, self.decay_l(), tol)?;
        let (above, b) = self.a_b(y, h)?;
        Ok((below + above + self.lambda * b) / theta)
    }
}

/// Free-function form of [`DiffusionIndexModel::gittins`].
pub fn gittins_diffusion(spec: &DiffusionSpec, q: f64, lambda: f64, reward: RewardSpec, x: f64) -> Result<f64> {
    DiffusionIndexModel::new(*spec, q, lambda, reward)?.gittins(x)
}

/// Free-function form of [`DiffusionIndexModel::resolvent_until_down`].
pub fn resolvent_until_down(model: &DiffusionIndexModel, y: f64, h: &dyn Fn(f64) -> f64) -> Result<f64> {
    model.resolvent_until_down(y, h)
}

/// Index values on a grid, interpolated linearly; exact evaluation off the grid.
#[derive(Debug, Clone)]
pub struct IndexTable {
    model: DiffusionIndexModel,
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl IndexTable {
    /// Tabulates `n ≥ 2` equally spaced points on `[lo, hi]`.
    pub fn build(model: DiffusionIndexModel, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let lo = lo.max(model.spec.lower());
        if !(hi > lo) || n < 2 {
            return Err(Error::domain(format!("bad index table range [{lo}, {hi}] with {n} points")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let v = model.gittins(lo + step * i as f64)?;
            // interpolation must stay monotone even if quadrature noise is not
            let prev = values.last().copied().unwrap_or(f64::NEG_INFINITY);
            values.push(v.max(prev));
        }
        Ok(Self { model, lo, step, values })
    }

    /// Default range: `[state_min − 5·scale, state_max + 5·scale]`.
    pub fn around(model: DiffusionIndexModel, state_min: f64, state_max: f64, n: usize) -> Result<Self> {
        let s = model.spec.scale();
        Self::build(model, state_min - 5.0 * s, state_max + 5.0 * s, n)
    }

    pub fn model(&self) -> &DiffusionIndexModel {
        &self.model
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (self.values.len() - 1) as f64)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if x < lo {
            // RBM is flat below its barrier, which is where the table starts
            if x <= self.model.spec.lower() {
                return Ok(self.values[0]);
            }
            return self.model.gittins(x);
        }
        if x > hi {
            return self.model.gittins(x);
        }
        let pos = (x - lo) / self.step;
        let i = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - i as f64;
        Ok(self.values[i] + t * (self.values[i + 1] - self.values[i]))
    }
}
