//! Plan objectives: expected total cost under a general rebate warranty and
//! the variance of the aggregate log-lifetime quantile at use conditions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acceptance::WMoments;
use crate::dist::{ev_measures, EULER_GAMMA, PI_SQUARED_OVER_SIX};
use crate::error::{Error, Result};
use crate::fisher::DesignPoint;
use crate::link::LinkModel;
use crate::numeric::{integrate_scalar, normal_cdf, QuadratureOptions};
use crate::par::{map_indexed, stream_rng, Execution};

/// Decision variables of a plan: stresses, proportions, relaxed `n`, `τ₀`.
pub type PlanDecision = DesignPoint;

/// `γ² + π²/6`, the second moment of `ln(−ln B)` for `B ~ U(0, 1)`.
pub const QUANTILE_SECOND_MOMENT: f64 = EULER_GAMMA * EULER_GAMMA + PI_SQUARED_OVER_SIX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub lot_size: u32,
    /// Free-replacement cost per unit.
    pub c_a: f64,
    /// Rejection cost per unit.
    pub c_r: f64,
    /// Cost per unit of test time.
    pub c_t: f64,
    /// Inspection cost per tested unit.
    pub c_star: f64,
    /// End of the free-replacement period.
    pub w1: f64,
    /// End of the pro-rata period.
    pub w2: f64,
    /// Nonconforming fraction at which the reject probability is evaluated.
    pub p_nc: f64,
}

impl CostSpec {
    /// Standard fixed quantities with a lot of 1000 units.
    pub fn standard(p_nc: f64) -> Self {
        Self { lot_size: 1000, c_a: 0.15, c_r: 0.80, c_t: 0.08, c_star: 0.05, w1: 0.50, w2: 0.75, p_nc }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lot_size == 0 {
            return Err(Error::Domain("lot size must be positive".into()));
        }
        for (name, v) in [("c_a", self.c_a), ("c_r", self.c_r), ("c_t", self.c_t), ("c_star", self.c_star)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        if !(self.w1 > 0.0 && self.w2 > self.w1 && self.w2.is_finite()) {
            return Err(Error::Domain(format!("need 0 < w1 < w2, got w1 = {}, w2 = {}", self.w1, self.w2)));
        }
        if !(self.p_nc > 0.0 && self.p_nc < 1.0) {
            return Err(Error::Domain(format!("p_nc must lie in (0, 1), got {}", self.p_nc)));
        }
        Ok(())
    }
}

/// Expected rebate per unit made at stress `ξ`:
/// `c_a{[ω₂G(ln ω₂) − ω₁G(ln ω₁)] − ∫_{ln ω₁}^{ln ω₂} eᵗ g(t) dt}/(ω₂ − ω₁)`.
pub fn warranty_cost(xi: f64, model: &LinkModel, cost: &CostSpec) -> Result<f64> {
    cost.validate()?;
    let ev = model.eval(xi)?;
    let (l1, l2) = (cost.w1.ln(), cost.w2.ln());
    let g1 = ev_measures(l1, &ev).cdf;
    let g2 = ev_measures(l2, &ev).cdf;
    let integral = integrate_scalar(
        |t| t.exp() * ev_measures(t, &ev).pdf,
        l1,
        l2,
        QuadratureOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_subintervals: 400 },
    )?;
    let v = cost.c_a * ((cost.w2 * g2 - cost.w1 * g1) - integral) / (cost.w2 - cost.w1);
    // Only rounding can push the value outside the payout range.
    Ok(v.clamp(0.0, cost.c_a))
}

/// Rebate paid for a unit failing at time `x`.
pub fn rebate(x: f64, cost: &CostSpec) -> f64 {
    if x < cost.w1 {
        cost.c_a
    } else if x < cost.w2 {
        cost.c_a * (cost.w2 - x) / (cost.w2 - cost.w1)
    } else {
        0.0
    }
}

/// Monte-Carlo estimate `(mean, standard error)` of `E[rebate(X)]` with `X`
/// the lifetime at stress `ξ`.
pub fn mc_rebate_oracle(
    exec: Execution,
    xi: f64,
    model: &LinkModel,
    cost: &CostSpec,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let ev = model.eval(xi)?;
    const BATCH: usize = 1 << 16;
    let parts = map_indexed(exec, draws.div_ceil(BATCH), |b| {
        let mut rng = stream_rng(seed, b as u64);
        let mut s = [0.0f64; 2];
        for _ in 0..BATCH.min(draws - b * BATCH) {
            let u: f64 = rng.random();
            let x = (ev.location() + ev.scale() * (-(-u).ln_1p()).ln()).exp();
            let r = rebate(x, cost);
            s[0] += r;
            s[1] += r * r;
        }
        s
    });
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, p| (a.0 + p[0], a.1 + p[1]));
    let n = draws as f64;
    let mean = s / n;
    Ok((mean, ((s2 / n - mean * mean).max(0.0) / (n - 1.0)).sqrt()))
}

/// `C_T = (N − n){Σω_i + Φ((u_{p_nc} + k)σ₀/√V(W))(c_r − Σω_i)} + c_t τ₀ + n c*`.
pub fn total_cost(plan: &PlanDecision, model: &LinkModel, cost: &CostSpec, k: f64, w: &WMoments) -> Result<f64> {
    cost.validate()?;
    if !(w.variance > 0.0) {
        return Err(Error::Numerical("total cost needs a positive variance of W".into()));
    }
    let sigma0 = model.eval(0.0)?.scale();
    let mut omega = 0.0;
    for &xi in &plan.stresses {
        omega += warranty_cost(xi, model, cost)?;
    }
    let u = (-(-cost.p_nc).ln_1p()).ln();
    let reject = normal_cdf((u + k) * sigma0 / w.variance.sqrt());
    let n_lot = cost.lot_size as f64;
    Ok((n_lot - plan.n) * (omega + reject * (cost.c_r - omega)) + cost.c_t * plan.censor_time + plan.n * cost.c_star)
}

/// `V_Q = σ²_{μ₀} + σ²_{σ₀}(γ² + π²/6) − 2γσ_{μ₀,σ₀}`.
pub fn quantile_variance(w: &WMoments) -> Result<f64> {
    let v = w.var_mu0 + w.var_sigma0 * QUANTILE_SECOND_MOMENT - 2.0 * EULER_GAMMA * w.cov_mu0_sigma0;
    if v < -1e-10 || !v.is_finite() {
        return Err(Error::Numerical(format!("aggregate quantile variance is negative ({v:e})")));
    }
    Ok(v.max(0.0))
}

/// `T_{0,b} = μ₀ + σ₀ ln(−ln b)`.
pub fn quantile_point(b: f64, model: &LinkModel) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain(format!("b must lie in (0, 1), got {b}")));
    }
    let ev = model.eval(0.0)?;
    Ok(ev.location() + ev.scale() * (-b.ln()).ln())
}
