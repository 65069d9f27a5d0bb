//! Lot sentencing on `W = μ̂₀ − k σ̂₀`: the acceptability constant, the
//! asymptotic moments of `W`, the OC function and the risk constraint.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dist::{sev_cdf, sev_quantile};
use crate::error::{Error, Result};
use crate::fisher::CovarianceBlocks;
use crate::link::LinkModel;
use crate::numeric::{normal_cdf, normal_quantile};
use crate::par::{map_indexed, stream_rng, Execution};

/// Producer's and consumer's risk points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSpec {
    pub alpha: f64,
    pub beta: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
}

/// The six risk cases used throughout the numerical study.
pub const PRESETS: [(&str, RiskSpec); 6] = [
    ("case1", RiskSpec { alpha: 0.05, beta: 0.10, p_alpha: 0.021, p_beta: 0.074 }),
    ("case2", RiskSpec { alpha: 0.05, beta: 0.10, p_alpha: 0.032, p_beta: 0.094 }),
    ("case3", RiskSpec { alpha: 0.05, beta: 0.10, p_alpha: 0.019, p_beta: 0.054 }),
    ("case4", RiskSpec { alpha: 0.10, beta: 0.10, p_alpha: 0.021, p_beta: 0.074 }),
    ("case5", RiskSpec { alpha: 0.10, beta: 0.10, p_alpha: 0.032, p_beta: 0.094 }),
    ("case6", RiskSpec { alpha: 0.10, beta: 0.10, p_alpha: 0.019, p_beta: 0.054 }),
];

/// Normal and SEV quantiles derived from a [`RiskSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskQuantiles {
    /// `Φ⁻¹(α)`
    pub z_alpha: f64,
    /// `Φ⁻¹(1 − β)`
    pub z_one_minus_beta: f64,
    /// `u_{p_α} = ln(−ln(1 − p_α))`
    pub u_alpha: f64,
    pub u_beta: f64,
}

impl RiskSpec {
    pub fn new(alpha: f64, beta: f64, p_alpha: f64, p_beta: f64) -> Result<Self> {
        let r = Self { alpha, beta, p_alpha, p_beta };
        r.validate()?;
        Ok(r)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, r)| *r)
            .ok_or_else(|| Error::Config(format!("unknown risk preset '{name}'; expected one of {}", preset_names())))
    }

    /// Range checks plus `p_α < p_β`.
    pub fn validate(&self) -> Result<()> {
        self.check_ranges()?;
        if !(self.p_alpha < self.p_beta) {
            return Err(Error::Domain(format!(
                "p_alpha ({}) must be below p_beta ({})",
                self.p_alpha, self.p_beta
            )));
        }
        Ok(())
    }

    fn check_ranges(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("p_alpha", self.p_alpha), ("p_beta", self.p_beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn quantiles(&self) -> Result<RiskQuantiles> {
        self.check_ranges()?;
        Ok(RiskQuantiles {
            z_alpha: normal_quantile(self.alpha),
            z_one_minus_beta: normal_quantile(1.0 - self.beta),
            u_alpha: sev_quantile(self.p_alpha)?,
            u_beta: sev_quantile(self.p_beta)?,
        })
    }
}

pub fn preset_names() -> String {
    PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}

/// `k = (u_{p_α} z_{1−β} − u_{p_β} z_α) / (z_α − z_{1−β})`.
///
/// Only the ranges of the four inputs are checked, so the symmetric
/// `α = β`, `p_α = p_β` case (where `k = −u_p`) is allowed.
pub fn acceptability_constant(risks: &RiskSpec) -> Result<f64> {
    let q = risks.quantiles()?;
    let denom = q.z_alpha - q.z_one_minus_beta;
    if denom.abs() < 1e-12 {
        return Err(Error::DegenerateRisk(format!(
            "z_alpha equals z_(1-beta) (alpha = {}, beta = {})",
            risks.alpha, risks.beta
        )));
    }
    Ok((q.u_alpha * q.z_one_minus_beta - q.u_beta * q.z_alpha) / denom)
}

/// Asymptotic moments of `W = μ̂₀ − k σ̂₀` at the use condition `ξ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WMoments {
    pub mean: f64,
    pub variance: f64,
    pub var_mu0: f64,
    pub var_sigma0: f64,
    pub cov_mu0_sigma0: f64,
}

/// Linear forms `L = aᵀγ̂_μ` and `M = bᵀγ̂_σ` giving `μ̂₀` and `ln σ̂₀`.
#[derive(Debug, Clone)]
pub struct UseLevelForms {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub mu0: f64,
    pub sigma0: f64,
    /// `aᵀH₁₁a`
    pub v_l: f64,
    /// `bᵀH₂₂b`
    pub v_m: f64,
    /// `aᵀH₁₂b`
    pub c_lm: f64,
}

pub fn use_level_forms(model: &LinkModel, blocks: &CovarianceBlocks) -> Result<UseLevelForms> {
    let (bm, bs) = model.bases(0.0)?;
    if blocks.h11.nrows() != bm.len() || blocks.h22.nrows() != bs.len() {
        return Err(Error::Input(format!(
            "covariance blocks of size {}+{} do not match a model with {}+{} coefficients",
            blocks.h11.nrows(),
            blocks.h22.nrows(),
            bm.len(),
            bs.len()
        )));
    }
    let ev = model.eval(0.0)?;
    let a = DVector::from_vec(bm);
    let b = DVector::from_vec(bs);
    let v_l = a.dot(&(&blocks.h11 * &a));
    let v_m = b.dot(&(&blocks.h22 * &b));
    let c_lm = a.dot(&(&blocks.h12 * &b));
    Ok(UseLevelForms { mu0: ev.location(), sigma0: ev.scale(), a, b, v_l, v_m, c_lm })
}

const NEG_TOL: f64 = -1e-10;

/// Moments of `W` with `σ²_{σ₀}` from the delta method and `σ_{μ₀,σ₀}`
/// from `E[L e^M] = e^{m_M + v_M/2}(m_L + c_LM)` minus `μ₀σ₀`.
pub fn w_moments(model: &LinkModel, blocks: &CovarianceBlocks, k: f64) -> Result<WMoments> {
    let w = w_moments_unchecked(model, blocks, k)?;
    if w.var_mu0 < NEG_TOL || w.var_sigma0 < NEG_TOL {
        return Err(Error::Numerical("covariance blocks are not positive semidefinite".into()));
    }
    if w.variance < NEG_TOL || !w.variance.is_finite() {
        return Err(Error::Numerical(format!("variance of W is negative ({:e})", w.variance)));
    }
    Ok(WMoments {
        variance: w.variance.max(0.0),
        var_mu0: w.var_mu0.max(0.0),
        var_sigma0: w.var_sigma0.max(0.0),
        ..w
    })
}

/// Same formulas as [`w_moments`] without the sign checks, for audits.
pub fn w_moments_unchecked(model: &LinkModel, blocks: &CovarianceBlocks, k: f64) -> Result<WMoments> {
    let f = use_level_forms(model, blocks)?;
    let var_mu0 = f.v_l;
    let var_sigma0 = f.sigma0 * f.sigma0 * f.v_m;
    let cov = (f.sigma0.ln() + 0.5 * f.v_m).exp() * (f.mu0 + f.c_lm) - f.mu0 * f.sigma0;
    Ok(WMoments {
        mean: f.mu0 - k * f.sigma0,
        variance: var_mu0 + k * k * var_sigma0 - 2.0 * k * cov,
        var_mu0,
        var_sigma0,
        cov_mu0_sigma0: cov,
    })
}

/// Lot acceptance probability `L(p) = 1 − Φ((u_p + k)σ₀/√V(W))`.
pub fn oc_probability(p_nc: f64, k: f64, w: &WMoments, sigma0: f64) -> f64 {
    let u = (-(-p_nc).ln_1p()).ln();
    1.0 - normal_cdf((u + k) * sigma0 / w.variance.sqrt())
}

/// `V(W)` at which both OC fixed points hold exactly.
pub fn required_variance(sigma0: f64, risks: &RiskSpec) -> Result<f64> {
    let q = risks.quantiles()?;
    let r = (q.u_alpha - q.u_beta) / (q.z_alpha - q.z_one_minus_beta);
    Ok(sigma0 * sigma0 * r * r)
}

/// `(V(W)/σ₀²)·((z_α − z_{1−β})/(u_{p_α} − u_{p_β}))² − 1`.
pub fn risk_constraint_residual(w: &WMoments, sigma0: f64, risks: &RiskSpec) -> Result<f64> {
    let q = risks.quantiles()?;
    let ratio = (q.z_alpha - q.z_one_minus_beta) / (q.u_alpha - q.u_beta);
    Ok(w.variance / (sigma0 * sigma0) * ratio * ratio - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disposition {
    Accept,
    Reject,
}

/// Accept iff `μ̂₀ − kσ̂₀ > ln l_s`.
pub fn lot_disposition(mu0_hat: f64, sigma0_hat: f64, k: f64, l_s: f64) -> Result<Disposition> {
    if !(sigma0_hat > 0.0) || !(l_s > 0.0) {
        return Err(Error::Domain(format!("need σ̂₀ > 0 and l_s > 0, got {sigma0_hat} and {l_s}")));
    }
    Ok(if mu0_hat - k * sigma0_hat > l_s.ln() { Disposition::Accept } else { Disposition::Reject })
}

/// Nonconforming fraction `G_SEV((ln l_s − μ₀)/σ₀)` implied by a lower
/// specification limit.
pub fn p_nc_from_limit(l_s: f64, model: &LinkModel) -> Result<f64> {
    if !(l_s > 0.0) {
        return Err(Error::Domain(format!("specification limit must be positive, got {l_s}")));
    }
    let ev = model.eval(0.0)?;
    Ok(sev_cdf(ev.standardize(l_s.ln())))
}

/// Monte-Carlo estimate of `E[L e^M] − μ₀σ₀` and of `Var(L)`, drawing the
/// four link coefficients of the first μ- and σ-segments jointly.
#[derive(Debug, Clone, Copy)]
pub struct McCovariance {
    pub cov: f64,
    pub cov_se: f64,
    pub var_mu0: f64,
    pub var_mu0_se: f64,
}

pub fn mc_cov_oracle(
    exec: Execution,
    model: &LinkModel,
    blocks: &CovarianceBlocks,
    draws: usize,
    seed: u64,
) -> Result<McCovariance> {
    let (bm, bs) = model.bases(0.0)?;
    let theta = model.theta();
    let p1 = bm.len();
    // Coefficients whose basis weight can be nonzero at ξ = 0.
    let idx_u = [0, 1, p1, p1 + 1];
    let full = blocks.assemble();
    let d = idx_u.len();
    let sub = DMatrix::from_fn(d, d, |i, j| full[(idx_u[i], idx_u[j])]);
    let eig = SymmetricEigen::new(sub);
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let mean: Vec<f64> = idx_u.iter().map(|&i| theta[i]).collect();
    let weight: Vec<f64> = idx_u.iter().map(|&i| if i < p1 { bm[i] } else { bs[i - p1] }).collect();
    let is_mu: Vec<bool> = idx_u.iter().map(|&i| i < p1).collect();

    let ev = model.eval(0.0)?;
    let (mu0, sigma0) = (ev.location(), ev.scale());
    const BATCH: usize = 1 << 16;
    let batches = draws.div_ceil(BATCH);
    let parts = map_indexed(exec, batches, |bi| {
        let count = BATCH.min(draws - bi * BATCH);
        let mut rng = stream_rng(seed, bi as u64);
        let mut acc = [0.0f64; 4];
        let mut e = vec![0.0; d];
        for _ in 0..count {
            for v in e.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let (mut l, mut m) = (0.0, 0.0);
            for i in 0..d {
                let mut x = mean[i];
                for j in 0..d {
                    x += root[(i, j)] * e[j];
                }
                if is_mu[i] {
                    l += weight[i] * x;
                } else {
                    m += weight[i] * x;
                }
            }
            let y = l * m.exp();
            let dl = (l - mu0) * (l - mu0);
            acc[0] += y;
            acc[1] += y * y;
            acc[2] += dl;
            acc[3] += dl * dl;
        }
        acc
    });
    let mut acc = [0.0f64; 4];
    for p in parts {
        for k in 0..4 {
            acc[k] += p[k];
        }
    }
    let n = draws as f64;
    let se = |s: f64, s2: f64| ((s2 / n - (s / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
    Ok(McCovariance {
        cov: acc[0] / n - mu0 * sigma0,
        cov_se: se(acc[0], acc[1]),
        var_mu0: acc[2] / n,
        var_mu0_se: se(acc[2], acc[3]),
    })
}
