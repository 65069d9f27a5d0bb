//! Weibull lifetimes and their log-scale extreme-value (EV) counterpart.
//!
//! A Weibull lifetime `X` with shape `α` and scale `λ` (inverse time units)
//! has `F(x) = 1 − exp(−(λx)^α)`. Its logarithm `T = ln X` follows the
//! smallest-extreme-value law with location `μ = −ln λ` and scale `σ = 1/α`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_indexed, stream_rng, Execution};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// π²/6, the variance of the standard extreme-value distribution.
pub const PI_SQUARED_OVER_SIX: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    shape: f64,
    scale: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::Domain(format!("Weibull shape must be positive, got {shape}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("Weibull scale must be positive, got {scale}")));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Location-scale parameters of the log-lifetime distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvParams {
    location: f64,
    scale: f64,
}

impl EvParams {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::Domain(format!("EV location must be finite, got {location}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("EV scale must be positive, got {scale}")));
        }
        Ok(Self { location, scale })
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Standardized value `(t − μ)/σ`.
    pub fn standardize(&self, t: f64) -> f64 {
        (t - self.location) / self.scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeibullMeasures {
    pub pdf: f64,
    pub cdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvMeasures {
    pub pdf: f64,
    pub cdf: f64,
    pub hazard: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLifetimeMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Weibull density and distribution function at `x ≥ 0`.
pub fn weibull_measures(x: f64, p: &WeibullParams) -> Result<WeibullMeasures> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("Weibull support is x ≥ 0, got {x}")));
    }
    let (a, l) = (p.shape, p.scale);
    let u = (l * x).powf(a);
    let cdf = -(-u).exp_m1();
    let pdf = if x == 0.0 {
        match a.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => l,
            _ => 0.0,
        }
    } else {
        a * l.powf(a) * x.powf(a - 1.0) * (-u).exp()
    };
    Ok(WeibullMeasures { pdf, cdf })
}

/// Standard EV cdf `1 − exp(−eᶻ)`.
pub fn sev_cdf(z: f64) -> f64 {
    -(-z.exp()).exp_m1()
}

/// Standard EV survival function `exp(−eᶻ)`.
pub fn sev_sf(z: f64) -> f64 {
    (-z.exp()).exp()
}

/// Standard EV density `exp(z − eᶻ)`.
pub fn sev_pdf(z: f64) -> f64 {
    let w = z.exp();
    if w.is_infinite() {
        return 0.0;
    }
    (z - w).exp()
}

pub fn ev_measures(t: f64, p: &EvParams) -> EvMeasures {
    let z = p.standardize(t);
    EvMeasures {
        pdf: sev_pdf(z) / p.scale,
        cdf: sev_cdf(z),
        hazard: z.exp() / p.scale,
    }
}

pub fn weibull_to_ev(p: &WeibullParams) -> EvParams {
    EvParams {
        location: -p.scale.ln(),
        scale: 1.0 / p.shape,
    }
}

pub fn ev_to_weibull(p: &EvParams) -> WeibullParams {
    WeibullParams {
        shape: 1.0 / p.scale,
        scale: (-p.location).exp(),
    }
}

/// `u_p = ln(−ln(1 − p))`, the p-quantile of the standard EV distribution.
pub fn sev_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
    }
    Ok((-(-p).ln_1p()).ln())
}

/// Mean `μ − σγ` and variance `σ²π²/6` of the log-lifetime.
pub fn log_lifetime_moments(p: &EvParams) -> LogLifetimeMoments {
    LogLifetimeMoments {
        mean: p.location - p.scale * EULER_GAMMA,
        variance: p.scale * p.scale * PI_SQUARED_OVER_SIX,
    }
}

/// Whether a unit failed before the censoring time or survived it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Failed,
    Censored,
}

/// A log-lifetime or, for a survivor, the log censoring time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub log_time: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressGroup {
    pub stress: f64,
    pub observations: Vec<CensoredObservation>,
}

impl StressGroup {
    pub fn failures(&self) -> usize {
        self.observations.iter().filter(|o| o.status == Status::Failed).count()
    }

    pub fn censored(&self) -> usize {
        self.observations.len() - self.failures()
    }
}

/// Type-I censored data grouped by standardized stress.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    groups: Vec<StressGroup>,
    censor_time: f64,
}

impl CensoredSample {
    /// Validates stresses, censoring time and observation statuses.
    ///
    /// `censor_time` may be `+∞` (no censoring).
    pub fn new(groups: Vec<StressGroup>, censor_time: f64) -> Result<Self> {
        if !(censor_time > 0.0) {
            return Err(Error::Input(format!("censoring time must be positive, got {censor_time}")));
        }
        let log_tau = censor_time.ln();
        for (i, g) in groups.iter().enumerate() {
            if !(0.0..=1.0).contains(&g.stress) {
                return Err(Error::Input(format!("group {i}: stress {} outside [0, 1]", g.stress)));
            }
            for o in &g.observations {
                match o.status {
                    Status::Failed if !(o.log_time <= log_tau) || o.log_time.is_nan() => {
                        return Err(Error::Input(format!(
                            "group {i}: failure at log-time {} exceeds ln τ₀ = {log_tau}",
                            o.log_time
                        )));
                    }
                    Status::Censored if (o.log_time - log_tau).abs() > 1e-9 * log_tau.abs().max(1.0) => {
                        return Err(Error::Input(format!(
                            "group {i}: censored record at {} differs from ln τ₀ = {log_tau}",
                            o.log_time
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(Self { groups, censor_time })
    }

    pub fn groups(&self) -> &[StressGroup] {
        &self.groups
    }

    pub fn censor_time(&self) -> f64 {
        self.censor_time
    }

    pub fn log_censor_time(&self) -> f64 {
        self.censor_time.ln()
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.observations.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn failures(&self) -> usize {
        self.groups.iter().map(StressGroup::failures).sum()
    }

    pub fn censored_fraction(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        (n - self.failures()) as f64 / n as f64
    }

    /// Stable fingerprint of the data, used to check that fits refer to the
    /// same sample.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over the raw bits.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.censor_time.to_bits());
        for g in &self.groups {
            feed(g.stress.to_bits());
            feed(g.observations.len() as u64);
            for o in &g.observations {
                feed(o.log_time.to_bits());
                feed(o.status as u64);
            }
        }
        h
    }
}

/// One stress level of a simulation: stress, lifetime law and unit count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSpec {
    pub stress: f64,
    pub params: WeibullParams,
    pub units: usize,
}

/// Draws Type-I censored Weibull lifetimes, one RNG stream per level.
pub fn simulate_censored(levels: &[LevelSpec], censor_time: f64, seed: u64) -> Result<CensoredSample> {
    simulate_censored_with(Execution::Sequential, levels, censor_time, seed)
}

pub fn simulate_censored_with(
    exec: Execution,
    levels: &[LevelSpec],
    censor_time: f64,
    seed: u64,
) -> Result<CensoredSample> {
    if levels.is_empty() {
        return Err(Error::Input("at least one stress level is required".into()));
    }
    if !(censor_time > 0.0) {
        return Err(Error::Input(format!("censoring time must be positive, got {censor_time}")));
    }
    if let Some(l) = levels.iter().find(|l| l.units == 0) {
        return Err(Error::Input(format!("stress level {} has no units", l.stress)));
    }
    let log_tau = censor_time.ln();
    let groups = map_indexed(exec, levels.len(), |i| {
        let level = &levels[i];
        let ev = weibull_to_ev(&level.params);
        let mut rng = stream_rng(seed, i as u64);
        let observations = (0..level.units)
            .map(|_| {
                // Inverse cdf: X = (−ln U)^{1/α} / λ, taken on the log scale.
                let u = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                let t = ev.location + ev.scale * (-u.ln()).ln();
                if t > log_tau {
                    CensoredObservation { log_time: log_tau, status: Status::Censored }
                } else {
                    CensoredObservation { log_time: t, status: Status::Failed }
                }
            })
            .collect();
        StressGroup { stress: level.stress, observations }
    });
    CensoredSample::new(groups, censor_time)
}
