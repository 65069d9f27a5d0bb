//! Piecewise-linear links from standardized stress to the EV location and
//! log-scale.
//!
//! A [`PiecewiseLinear`] function is continuous, linear between consecutive
//! knots, and takes the value `γ_q` at knot `q`. It is therefore linear in its
//! coefficients: `f(ξ) = Σ_q γ_q · b_q(ξ)` where `b_q` is the tent ("hat")
//! function of knot `q`.

use serde::{Deserialize, Serialize};

use crate::dist::EvParams;
use crate::error::{Error, Result};

/// Strictly increasing cut-points on `[0, 1]` with fixed endpoints 0 and 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct KnotSet {
    cuts: Vec<f64>,
}

impl TryFrom<Vec<f64>> for KnotSet {
    type Error = Error;

    fn try_from(cuts: Vec<f64>) -> Result<Self> {
        KnotSet::new(cuts)
    }
}

impl From<KnotSet> for Vec<f64> {
    fn from(k: KnotSet) -> Self {
        k.cuts
    }
}

impl KnotSet {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::Domain(format!("a knot set needs at least two cut-points, got {}", cuts.len())));
        }
        if cuts[0] != 0.0 || *cuts.last().unwrap() != 1.0 {
            return Err(Error::Domain(format!("knot sets must start at 0 and end at 1, got {cuts:?}")));
        }
        if let Some(w) = cuts.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!("knots must be strictly increasing; segment [{}, {}] is degenerate", w[0], w[1])));
        }
        Ok(Self { cuts })
    }

    /// `Q + 1` cut-points at `j/Q`.
    pub fn equispaced(segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Domain("at least one segment is required".into()));
        }
        let q = segments as f64;
        Self::new((0..=segments).map(|j| if j == segments { 1.0 } else { j as f64 / q }).collect())
    }

    /// Interior cut-points at the given type-7 empirical quantiles of `stresses`.
    pub fn from_quantiles(stresses: &[f64], probs: &[f64]) -> Result<Self> {
        let mut cuts = vec![0.0];
        for &p in probs {
            cuts.push(empirical_quantile(stresses, p)?);
        }
        cuts.push(1.0);
        Self::new(cuts)
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Number of linear segments `Q`.
    pub fn segments(&self) -> usize {
        self.cuts.len() - 1
    }

    /// Number of coefficients `Q + 1`.
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Segment index `q ∈ 1..=Q` with `ξ ∈ [c_{q−1}, c_q]`; a point on an
    /// interior knot belongs to the segment on its left.
    pub fn segment_of(&self, xi: f64) -> Result<usize> {
        check_stress(xi)?;
        let q = self.cuts[1..].partition_point(|&c| c < xi) + 1;
        Ok(q.min(self.segments()))
    }

    /// Hat-basis weights `∂f(ξ)/∂γ_q`, length `Q + 1`.
    pub fn hat_basis(&self, xi: f64) -> Result<Vec<f64>> {
        let q = self.segment_of(xi)?;
        let (lo, hi) = (self.cuts[q - 1], self.cuts[q]);
        let w = (xi - lo) / (hi - lo);
        let mut basis = vec![0.0; self.len()];
        basis[q - 1] = 1.0 - w;
        basis[q] = w;
        Ok(basis)
    }
}

fn check_stress(xi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::Domain(format!("standardized stress must lie in [0, 1], got {xi}")));
    }
    Ok(())
}

/// Type-7 (linear interpolation) empirical quantile.
pub fn empirical_quantile(data: &[f64], p: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("empirical quantile of an empty set".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile probability must lie in [0, 1], got {p}")));
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Hat-basis gradient of a piecewise-linear function at `ξ`.
pub fn hat_gradients(xi: f64, knots: &KnotSet) -> Result<Vec<f64>> {
    knots.hat_basis(xi)
}

/// Knot placement for `Q` segments with `m + 1` stress levels.
///
/// Without observed stresses the interior knots are `j/(m+1)`; with observed
/// stresses they are the empirical quantiles at `j/Q`.
pub fn default_knots(levels_m: usize, segments: usize, stresses: Option<&[f64]>) -> Result<KnotSet> {
    if segments == 0 {
        return Err(Error::Config("at least one segment is required".into()));
    }
    if segments > levels_m + 1 {
        return Err(Error::Config(format!(
            "{segments} segments exceed m + 1 = {} stress levels",
            levels_m + 1
        )));
    }
    match stresses {
        None => {
            let denom = (levels_m + 1) as f64;
            let mut cuts = vec![0.0];
            cuts.extend((1..segments).map(|j| j as f64 / denom));
            cuts.push(1.0);
            KnotSet::new(cuts)
        }
        Some(s) => {
            let probs: Vec<f64> = (1..segments).map(|j| j as f64 / segments as f64).collect();
            KnotSet::from_quantiles(s, &probs)
        }
    }
}

/// Continuous piecewise-linear function `ξ ↦ Σ γ_q b_q(ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: KnotSet,
    gamma: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: KnotSet, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != knots.len() {
            return Err(Error::Input(format!(
                "{} coefficients supplied for {} knots",
                gamma.len(),
                knots.len()
            )));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("link coefficients must be finite".into()));
        }
        Ok(Self { knots, gamma })
    }

    pub fn knots(&self) -> &KnotSet {
        &self.knots
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn eval(&self, xi: f64) -> Result<f64> {
        let q = self.knots.segment_of(xi)?;
        let c = self.knots.cuts();
        let slope = (self.gamma[q] - self.gamma[q - 1]) / (c[q] - c[q - 1]);
        // γ_q + slope·(ξ − ξ_q) on segment q.
        Ok(self.gamma[q] + slope * (xi - c[q]))
    }
}

/// Location and log-scale links together with their coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    mu: PiecewiseLinear,
    log_sigma: PiecewiseLinear,
}

impl LinkModel {
    pub fn new(mu_knots: KnotSet, mu_gamma: Vec<f64>, sigma_knots: KnotSet, sigma_gamma: Vec<f64>) -> Result<Self> {
        Ok(Self {
            mu: PiecewiseLinear::new(mu_knots, mu_gamma)?,
            log_sigma: PiecewiseLinear::new(sigma_knots, sigma_gamma)?,
        })
    }

    /// Linear location and log-linear scale (one segment each).
    pub fn single_segment(mu: [f64; 2], log_sigma: [f64; 2]) -> Result<Self> {
        let k = KnotSet::equispaced(1)?;
        Self::new(k.clone(), mu.to_vec(), k, log_sigma.to_vec())
    }

    pub fn mu(&self) -> &PiecewiseLinear {
        &self.mu
    }

    pub fn log_sigma(&self) -> &PiecewiseLinear {
        &self.log_sigma
    }

    pub fn mu_len(&self) -> usize {
        self.mu.gamma.len()
    }

    pub fn sigma_len(&self) -> usize {
        self.log_sigma.gamma.len()
    }

    /// Dimension of θ = (γ_μ, γ_σ).
    pub fn n_params(&self) -> usize {
        self.mu_len() + self.sigma_len()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.mu.gamma.iter().chain(&self.log_sigma.gamma).copied().collect()
    }

    /// Same knots, new θ.
    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.n_params() {
            return Err(Error::Input(format!("θ has length {}, expected {}", theta.len(), self.n_params())));
        }
        let (m, s) = theta.split_at(self.mu_len());
        Self::new(self.mu.knots.clone(), m.to_vec(), self.log_sigma.knots.clone(), s.to_vec())
    }

    /// Names of the θ components, e.g. `gamma_mu[0]`.
    pub fn param_names(&self) -> Vec<String> {
        (0..self.mu_len())
            .map(|q| format!("gamma_mu[{q}]"))
            .chain((0..self.sigma_len()).map(|q| format!("gamma_sigma[{q}]")))
            .collect()
    }

    /// EV parameters `(μ(ξ), exp(ln σ(ξ)))`.
    pub fn eval(&self, xi: f64) -> Result<EvParams> {
        let mu = self.mu.eval(xi)?;
        let sigma = self.log_sigma.eval(xi)?.exp();
        EvParams::new(mu, sigma)
    }

    /// Hat bases of the two links at `ξ`.
    pub fn bases(&self, xi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.mu.knots.hat_basis(xi)?, self.log_sigma.knots.hat_basis(xi)?))
    }
}

pub fn eval_link(xi: f64, model: &LinkModel) -> Result<EvParams> {
    model.eval(xi)
}
