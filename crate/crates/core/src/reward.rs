use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, Tolerance};

/// Strictly increasing reward maps used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardSpec {
    Identity,
    Sigmoid,
    Softplus,
}

impl RewardSpec {
    pub const ALL: [RewardSpec; 3] = [RewardSpec::Identity, RewardSpec::Sigmoid, RewardSpec::Softplus];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            RewardSpec::Identity => x,
            RewardSpec::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            RewardSpec::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RewardSpec::Identity => "identity",
            RewardSpec::Sigmoid => "sigmoid",
            RewardSpec::Softplus => "softplus",
        }
    }
}

impl fmt::Display for RewardSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(RewardSpec::Identity),
            "sigmoid" => Ok(RewardSpec::Sigmoid),
            "softplus" => Ok(RewardSpec::Softplus),
            other => Err(Error::config(format!("unknown reward '{other}'"))),
        }
    }
}

/// Exponential weight `e^{−t}` drops below 1e-16 at this point.
const TAIL_CUTOFF: f64 = 37.0;

/// `E[R(x + E)]` for `E ~ Exp(rate)`.
pub fn exp_tail_average(reward: RewardSpec, x: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain(format!("rate must be positive, got {rate}")));
    }
    match reward {
        RewardSpec::Identity => Ok(x + 1.0 / rate),
        _ => {
            // substitute t = rate·y so the weight is e^{−t} on [0, 37]
            let est = integrate(
                |t| (-t).exp() * reward.eval(x + t / rate),
                0.0,
                TAIL_CUTOFF,
                Tolerance::absolute(1e-10),
            )?;
            Ok(est.value)
        }
    }
}
