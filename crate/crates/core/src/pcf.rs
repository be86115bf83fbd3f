//! Parabolic cylinder function `D_{−ν}(x)` for `ν > 0`.
//!
//! Values come from the integral representation
//! `D_{−ν}(x) = e^{−x²/4} / Γ(ν) ∫_0^∞ t^{ν−1} e^{−xt−t²/2} dt`,
//! evaluated in log space so that large `ν` and `|x|` do not overflow.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_to_infinity, Tolerance};

const REL_TOL: f64 = 1e-12;

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("pcf order must be positive, got {nu}")))
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln ∫_0^∞ t^{ν−1} e^{−xt−t²/2} dt`.
fn log_integral(nu: f64, x: f64, tol: Tolerance) -> Result<f64> {
    let g = |t: f64| -x * t - 0.5 * t * t;
    let h = |t: f64| (nu - 1.0) * t.ln() + g(t);

    // interior maximum of h, if any
    let disc = x * x + 4.0 * (nu - 1.0);
    let peak = if disc >= 0.0 {
        let t = 0.5 * (-x + disc.sqrt());
        (t > 0.0).then_some(t)
    } else {
        None
    };
    let mut c = 1.0 / (1.0 + x.abs());
    if let Some(p) = peak {
        c = c.min(0.5 * p);
    }

    // head: t = c s^{1/ν} turns t^{ν−1} dt into (c^ν/ν) ds
    let head = integrate(|s: f64| g(c * s.powf(1.0 / nu)).exp(), 0.0, 1.0, tol)?;
    let mut total = nu * c.ln() - nu.ln() + head.value.ln();

    match peak {
        Some(p) if p > c => {
            let hp = h(p);
            let width = 1.0 / (1.0 + (nu - 1.0) / (p * p)).sqrt();
            let body = integrate(|t| (h(t) - hp).exp(), c, p, tol)?;
            let tail = integrate_to_infinity(|t| (h(t) - hp).exp(), p, width, tol)?;
            total = log_add(total, hp + (body.value + tail.value).ln());
        }
        _ => {
            let hc = h(c);
            let scale = 1.0 / (1.0 + x.max(0.0));
            let tail = integrate_to_infinity(|t| (h(t) - hc).exp(), c, scale, tol)?;
            total = log_add(total, hc + tail.value.ln());
        }
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::numerical(format!("pcf integral failed at nu={nu}, x={x}")))
    }
}

fn log_pcf_with(nu: f64, x: f64, tol: Tolerance) -> Result<f64> {
    check_nu(nu)?;
    if !x.is_finite() {
        return Err(Error::domain("pcf argument must be finite"));
    }
    Ok(-0.25 * x * x - ln_gamma(nu) + log_integral(nu, x, tol)?)
}

/// `ln D_{−ν}(x)`.
pub fn log_pcf(nu: f64, x: f64) -> Result<f64> {
    log_pcf_with(nu, x, Tolerance::relative(REL_TOL))
}

/// `D_{−ν}(x)`. Underflows to 0 for very large `x`; use [`log_pcf`] there.
pub fn pcf(nu: f64, x: f64) -> Result<f64> {
    Ok(log_pcf(nu, x)?.exp())
}

const TABLE_HALF_WIDTH: f64 = 20.0;
const PIECE: f64 = 1.0;
const NODES: usize = 24;

/// Piecewise Chebyshev interpolant of `ln D_{−ν}` on `[−20, 20]` for one order.
/// Arguments outside the table fall back to direct quadrature.
#[derive(Debug, Clone)]
pub struct PcfTable {
    nu: f64,
    coeffs: Vec<[f64; NODES]>,
}

impl PcfTable {
    pub fn new(nu: f64) -> Result<Self> {
        check_nu(nu)?;
        let pieces = (2.0 * TABLE_HALF_WIDTH / PIECE).round() as usize;
        let nodes: Vec<f64> = (0..NODES)
            .map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / NODES as f64).cos())
            .collect();
        let mut coeffs = Vec::with_capacity(pieces);
        for i in 0..pieces {
            let lo = -TABLE_HALF_WIDTH + i as f64 * PIECE;
            let mid = lo + 0.5 * PIECE;
            let vals = nodes
                .iter()
                .map(|&u| log_pcf(nu, mid + 0.5 * PIECE * u))
                .collect::<Result<Vec<_>>>()?;
            let mut c = [0.0; NODES];
            for (j, cj) in c.iter_mut().enumerate() {
                let s: f64 = (0..NODES)
                    .map(|k| {
                        vals[k]
                            * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / NODES as f64).cos()
                    })
                    .sum();
                *cj = 2.0 * s / NODES as f64;
            }
            c[0] *= 0.5;
            coeffs.push(c);
        }
        Ok(Self { nu, coeffs })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `ln D_{−ν}(x)`.
    pub fn log_eval(&self, x: f64) -> Result<f64> {
        if !(x.abs() < TABLE_HALF_WIDTH) {
            return log_pcf(self.nu, x);
        }
        let pos = (x + TABLE_HALF_WIDTH) / PIECE;
        let i = (pos.floor() as usize).min(self.coeffs.len() - 1);
        let u = 2.0 * (pos - i as f64) - 1.0;
        // Clenshaw
        let c = &self.coeffs[i];
        let (mut b1, mut b2) = (0.0, 0.0);
        for &ck in c.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + ck;
            b2 = b1;
            b1 = b0;
        }
        Ok(u * b1 - b2 + c[0])
    }
}
