//! Influence-function mean estimation under window-budget contamination.
//!
//! The estimator is the soft-truncated mean `(alpha / n) * sum(psi(x_i / alpha))`
//! with the narrowest Catoni influence function `psi`, bounded by `ln 2`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Largest contamination rate returned by [`huber_to_eta`].
pub const ETA_CEILING: f64 = 1.0 - 1e-9;

/// The Catoni influence function.
///
/// `-ln(1 - x + x^2/2)` on `[0, 1)`, saturating at `ln 2` for `x >= 1`, and
/// extended to negative arguments as an odd function. NaN propagates; use
/// [`psi_eval`] for a checked version.
#[inline]
pub fn psi(x: f64) -> f64 {
    let ax = x.abs();
    if ax >= 1.0 {
        LN_2.copysign(x)
    } else {
        // ln_1p keeps full relative precision near zero.
        let y = -(-ax + ax * ax / 2.0).ln_1p();
        if x < 0.0 {
            -y
        } else {
            y
        }
    }
}

/// Checked [`psi`]: rejects NaN and infinities.
pub fn psi_eval(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("psi is undefined for non-finite input {x}"));
    }
    Ok(psi(x))
}

/// Theory constants of the deviation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Bound `A` on `|psi|`. The implemented `psi` has `A = ln 2`; other values
    /// only rescale the bounds.
    pub influence_bound: f64,
    /// Bound `M` on the conditional second moment of the inliers.
    pub moment_bound: f64,
    /// Bound `V` on the conditional variance, needed by the shifting device.
    pub variance_bound: Option<f64>,
    /// Contamination rate.
    pub eta: f64,
    /// Failure probability of the deviation bounds.
    pub delta: f64,
    /// Constant `B > 1` trading sample size against the bias constant `c0`.
    pub tail_constant: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            influence_bound: LN_2,
            moment_bound: 5.0,
            variance_bound: None,
            eta: 0.1,
            delta: 0.01,
            tail_constant: 2.0,
        }
    }
}

impl EstimatorConfig {
    pub fn new(moment_bound: f64, eta: f64, delta: f64) -> Result<Self> {
        let cfg = Self {
            moment_bound,
            eta,
            delta,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_variance_bound(mut self, v: f64) -> Result<Self> {
        self.variance_bound = Some(v);
        self.validate()?;
        Ok(self)
    }

    pub fn with_influence_bound(mut self, a: f64) -> Result<Self> {
        self.influence_bound = a;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tail_constant(mut self, b: f64) -> Result<Self> {
        self.tail_constant = b;
        self.validate()?;
        Ok(self)
    }

    /// Checks every invariant. `eta = 0` (no contamination) is accepted.
    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.influence_bound) {
            return config(format!("A must be positive, got {}", self.influence_bound));
        }
        if !finite_pos(self.moment_bound) {
            return config(format!("M must be positive, got {}", self.moment_bound));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return config(format!("eta must lie in [0, 1), got {}", self.eta));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return config(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.tail_constant.is_finite() && self.tail_constant > 1.0) {
            return config(format!("B must exceed 1, got {}", self.tail_constant));
        }
        if let Some(v) = self.variance_bound {
            if !finite_pos(v) {
                return config(format!("V must be positive, got {v}"));
            }
            // Only holds when the mean is bounded: Var = E[X^2] - mu^2 <= M.
            if v > self.moment_bound {
                return config(format!("V = {v} exceeds M = {}", self.moment_bound));
            }
        }
        Ok(())
    }

    /// `log(c / delta) / n + 2 A eta`, the rate term shared by every bound.
    fn rate(&self, log_numerator: f64, n: usize) -> f64 {
        (log_numerator / self.delta).ln() / n as f64 + 2.0 * self.influence_bound * self.eta
    }
}

/// Deviation radius together with the scale that achieves it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    pub radius: f64,
    pub confidence: f64,
    pub alpha_used: f64,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return domain("sample size must be at least 1");
    }
    Ok(())
}

/// Scale `alpha = sqrt(M / (2 (log(2/delta)/n + 2 A eta)))` minimising the
/// deviation bound at sample size `n`.
pub fn select_alpha(cfg: &EstimatorConfig, n: usize) -> Result<f64> {
    cfg.validate()?;
    check_n(n)?;
    Ok((cfg.moment_bound / (2.0 * cfg.rate(2.0, n))).sqrt())
}

/// Radius `sqrt(2 M (log(2/delta)/n + 2 A eta))` holding with probability `1 - delta`.
pub fn deviation_radius(cfg: &EstimatorConfig, n: usize) -> Result<DeviationBound> {
    let alpha = select_alpha(cfg, n)?;
    Ok(DeviationBound {
        radius: (2.0 * cfg.moment_bound * cfg.rate(2.0, n)).sqrt(),
        confidence: 1.0 - cfg.delta,
        alpha_used: alpha,
    })
}

/// The soft-truncated mean `(alpha / n) * sum(psi(x_i / alpha))`.
pub fn catoni_estimate(data: &[f64], alpha: f64) -> Result<f64> {
    if data.is_empty() {
        return domain("cannot estimate the mean of an empty sample");
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return domain(format!("alpha must be positive, got {alpha}"));
    }
    let sum: f64 = data.iter().map(|&x| psi(x / alpha)).sum();
    Ok(alpha * sum / data.len() as f64)
}

/// `c0 = sqrt(2 A (1/B + 2))`.
pub fn bias_constant(cfg: &EstimatorConfig) -> f64 {
    (2.0 * cfg.influence_bound * (1.0 / cfg.tail_constant + 2.0)).sqrt()
}

/// Contamination-driven deviation level `c0 * sqrt(M eta)`.
///
/// Holds with probability at least `1 - 2 exp(-(A eta / B) n)` once `n`
/// reaches [`bias_bound_min_samples`].
pub fn asymptotic_bias(cfg: &EstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(bias_constant(cfg) * (cfg.moment_bound * cfg.eta).sqrt())
}

/// Sample size `(B / (A eta)) log(2/delta)` beyond which [`asymptotic_bias`]
/// applies. Infinite when `eta = 0`.
pub fn bias_bound_min_samples(cfg: &EstimatorConfig) -> f64 {
    if cfg.eta == 0.0 {
        return f64::INFINITY;
    }
    cfg.tail_constant / (cfg.influence_bound * cfg.eta) * (2.0 / cfg.delta).ln()
}

/// Probability with which the bias level holds at sample size `n`.
pub fn bias_bound_confidence(cfg: &EstimatorConfig, n: usize) -> f64 {
    1.0 - 2.0 * (-(cfg.influence_bound * cfg.eta / cfg.tail_constant) * n as f64).exp()
}

/// Accuracy of the first (location-finding) stage of the shifting device,
/// `sqrt(2 M (log(4/delta)/k + 2 A eta))`.
pub fn shift_accuracy(cfg: &EstimatorConfig, k: usize) -> Result<f64> {
    cfg.validate()?;
    check_n(k)?;
    Ok((2.0 * cfg.moment_bound * cfg.rate(4.0, k)).sqrt())
}

/// Scales and radius of a shifting-device estimate on `n` points with a
/// `k`-point location stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedBound {
    /// Scale of the location stage.
    pub location_alpha: f64,
    /// Scale of the recentred stage.
    pub centered_alpha: f64,
    /// Accuracy of the location stage.
    pub shift_accuracy: f64,
    pub radius: f64,
    pub confidence: f64,
}

/// Both stages run at confidence `delta / 2`, hence `log(4/delta)` throughout.
pub fn shifted_bound(cfg: &EstimatorConfig, n: usize, k: usize) -> Result<ShiftedBound> {
    cfg.validate()?;
    let Some(variance) = cfg.variance_bound else {
        return config("the shifting device needs a variance bound V");
    };
    if k == 0 || k >= n {
        return domain(format!("location stage size k = {k} must satisfy 0 < k < n = {n}"));
    }
    let theta = shift_accuracy(cfg, k)?;
    let shifted_moment = variance + theta * theta;
    let rest_rate = cfg.rate(4.0, n - k);
    Ok(ShiftedBound {
        location_alpha: (cfg.moment_bound / (2.0 * cfg.rate(4.0, k))).sqrt(),
        centered_alpha: (shifted_moment / (2.0 * rest_rate)).sqrt(),
        shift_accuracy: theta,
        radius: (2.0 * shifted_moment * rest_rate).sqrt(),
        confidence: 1.0 - cfg.delta,
    })
}

/// Two-stage centred estimate.
///
/// The first `k` points (default `n / 2`) give a coarse location; the rest
/// are recentred on it and estimated with a scale driven by `V` instead of
/// the raw second moment `M`.
pub fn shifting_device_estimate(data: &[f64], cfg: &EstimatorConfig, k: Option<usize>) -> Result<f64> {
    let n = data.len();
    let k = k.unwrap_or(n / 2);
    let bound = shifted_bound(cfg, n, k)?;
    let (head, tail) = data.split_at(k);
    let location = catoni_estimate(head, bound.location_alpha)?;
    let alpha = bound.centered_alpha;
    let sum: f64 = tail.iter().map(|&x| psi((x - location) / alpha)).sum();
    Ok(alpha * sum / tail.len() as f64 + location)
}

/// Result of converting a Huber rate into a window-budget rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaConversion {
    pub eta: f64,
    /// Set when `eps + f` exceeded 1 and `eta` was clamped to [`ETA_CEILING`].
    pub clamped: bool,
}

/// Converts a Huber mixture rate `eps` into a window-budget rate
/// `eta = eps + 1.7 sqrt(eps (1 - eps)) sqrt((log log 2n + 0.72 log(10.4 n / beta)) / k0)`,
/// valid for every window of length `k >= k0` with probability `1 - beta`.
pub fn huber_to_eta(epsilon: f64, beta: f64, n: usize, k0: usize) -> Result<EtaConversion> {
    if !(0.0..=1.0).contains(&epsilon) {
        return domain(format!("epsilon must lie in [0, 1], got {epsilon}"));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("beta must lie in (0, 1), got {beta}"));
    }
    if n == 0 || k0 == 0 {
        return domain("n and k0 must be positive");
    }
    let n = n as f64;
    let log_term = (2.0 * n).ln().ln() + 0.72 * (10.4 * n / beta).ln();
    if log_term < 0.0 {
        return domain(format!("log term is negative ({log_term}) for n = {n}"));
    }
    let spread = 1.7 * (epsilon * (1.0 - epsilon)).sqrt() * (log_term / k0 as f64).sqrt();
    let eta = epsilon + spread;
    if eta > ETA_CEILING {
        return Ok(EtaConversion {
            eta: ETA_CEILING,
            clamped: true,
        });
    }
    Ok(EtaConversion { eta, clamped: false })
}

/// Robust mean of a sample with its scale and deviation radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustMean {
    pub estimate: f64,
    pub alpha: f64,
    pub radius: f64,
    pub confidence: f64,
}

/// Catoni estimate at the scale chosen for `data.len()` points.
pub fn robust_mean(data: &[f64], cfg: &EstimatorConfig) -> Result<RobustMean> {
    let bound = deviation_radius(cfg, data.len().max(1))?;
    Ok(RobustMean {
        estimate: catoni_estimate(data, bound.alpha_used)?,
        alpha: bound.alpha_used,
        radius: bound.radius,
        confidence: bound.confidence,
    })
}

/// Shifting-device estimate with its radius.
pub fn robust_mean_shifted(data: &[f64], cfg: &EstimatorConfig, k: Option<usize>) -> Result<RobustMean> {
    let k_used = k.unwrap_or(data.len() / 2);
    let bound = shifted_bound(cfg, data.len(), k_used)?;
    Ok(RobustMean {
        estimate: shifting_device_estimate(data, cfg, Some(k_used))?,
        alpha: bound.centered_alpha,
        radius: bound.radius,
        confidence: bound.confidence,
    })
}
