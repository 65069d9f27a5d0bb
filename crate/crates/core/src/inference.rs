//! Censored-data likelihood, maximum-likelihood fits and AIC comparison.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dist::{CensoredSample, Status, EULER_GAMMA};
use crate::error::{Error, Result};
use crate::link::{KnotSet, LinkModel, PiecewiseLinear};
use crate::numeric::{minimize, NelderMeadOptions};
use crate::optimizer::OptimizerSettings;
use crate::par::{map_indexed, stream_rng};

/// Link family fitted to data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LinkSpec {
    /// Piecewise-linear `μ(ξ)` and `ln σ(ξ)`.
    Pla { mu_knots: KnotSet, sigma_knots: KnotSet },
    /// `μ = γ_{μ0} + γ_{μ1}ξ` and `σ = γ_{σ0} + γ_{σ1}ξ` (σ itself linear).
    Linear,
}

impl LinkSpec {
    pub fn n_params(&self) -> usize {
        match self {
            LinkSpec::Pla { mu_knots, sigma_knots } => mu_knots.len() + sigma_knots.len(),
            LinkSpec::Linear => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LinkSpec::Pla { .. } => "pla",
            LinkSpec::Linear => "linear",
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            LinkSpec::Pla { mu_knots, sigma_knots } => (0..mu_knots.len())
                .map(|q| format!("gamma_mu[{q}]"))
                .chain((0..sigma_knots.len()).map(|q| format!("gamma_sigma[{q}]")))
                .collect(),
            LinkSpec::Linear => ["gamma_mu0", "gamma_mu1", "gamma_sigma0", "gamma_sigma1"].map(String::from).to_vec(),
        }
    }

    /// `(μ, σ)` at stress `ξ`; `σ ≤ 0` is returned as is for the caller to reject.
    fn location_scale(&self, theta: &[f64], xi: f64) -> Result<(f64, f64)> {
        match self {
            LinkSpec::Pla { mu_knots, sigma_knots } => {
                let p1 = mu_knots.len();
                let mu = PiecewiseLinear::new(mu_knots.clone(), theta[..p1].to_vec())?.eval(xi)?;
                let ls = PiecewiseLinear::new(sigma_knots.clone(), theta[p1..].to_vec())?.eval(xi)?;
                Ok((mu, ls.exp()))
            }
            LinkSpec::Linear => Ok((theta[0] + theta[1] * xi, theta[2] + theta[3] * xi)),
        }
    }

    /// The fitted link as a [`LinkModel`] (PLA specs only).
    pub fn link_model(&self, theta: &[f64]) -> Result<LinkModel> {
        match self {
            LinkSpec::Pla { mu_knots, sigma_knots } => {
                let p1 = mu_knots.len();
                LinkModel::new(mu_knots.clone(), theta[..p1].to_vec(), sigma_knots.clone(), theta[p1..].to_vec())
            }
            LinkSpec::Linear => Err(Error::Input("the linear-σ spec has no piecewise-linear representation".into())),
        }
    }
}

/// Maps PLA coefficients onto a finer PLA spec by evaluating the coarse links
/// at the fine knots. Exact when the coarse knots are a subset of the fine ones.
pub fn refine_theta(coarse: &LinkSpec, theta: &[f64], fine: &LinkSpec) -> Result<Vec<f64>> {
    let model = coarse.link_model(theta)?;
    match fine {
        LinkSpec::Pla { mu_knots, sigma_knots } => {
            let mut out = Vec::with_capacity(fine.n_params());
            for &c in mu_knots.cuts() {
                out.push(model.mu().eval(c)?);
            }
            for &c in sigma_knots.cuts() {
                out.push(model.log_sigma().eval(c)?);
            }
            Ok(out)
        }
        LinkSpec::Linear => Err(Error::Input("target spec must be piecewise linear".into())),
    }
}

/// Type-I censored log-likelihood; `−∞` when some group has `σ ≤ 0`.
pub fn log_likelihood(theta: &[f64], sample: &CensoredSample, spec: &LinkSpec) -> Result<f64> {
    if theta.len() != spec.n_params() {
        return Err(Error::Input(format!(
            "{} parameters supplied for a {}-parameter {} spec",
            theta.len(),
            spec.n_params(),
            spec.name()
        )));
    }
    let mut total = 0.0;
    for g in sample.groups() {
        let (mu, sigma) = spec.location_scale(theta, g.stress)?;
        if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let ln_sigma = sigma.ln();
        for o in &g.observations {
            let z = (o.log_time - mu) / sigma;
            total += match o.status {
                Status::Failed => -ln_sigma + z - z.exp(),
                Status::Censored => -z.exp(),
            };
        }
    }
    Ok(if total.is_nan() { f64::NEG_INFINITY } else { total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: LinkSpec,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub sample_fingerprint: u64,
}

impl FitResult {
    pub fn n_params(&self) -> usize {
        self.theta_hat.len()
    }

    /// `(μ̂₀, σ̂₀)` at the use condition.
    pub fn use_level(&self) -> Result<(f64, f64)> {
        self.spec.location_scale(&self.theta_hat, 0.0)
    }
}

pub fn aic(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}

/// Per-group moment estimates from the failures, regressed onto the link.
pub fn initial_estimate(sample: &CensoredSample, spec: &LinkSpec) -> Result<Vec<f64>> {
    let mut rows = Vec::new();
    for g in sample.groups() {
        let t: Vec<f64> = g.observations.iter().filter(|o| o.status == Status::Failed).map(|o| o.log_time).collect();
        if t.len() < 2 {
            continue;
        }
        let n = t.len() as f64;
        let mean = t.iter().sum::<f64>() / n;
        let var = t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma = (var.sqrt() * 6f64.sqrt() / std::f64::consts::PI).max(1e-3);
        rows.push((g.stress, mean + EULER_GAMMA * sigma, sigma));
    }
    if rows.is_empty() {
        return Err(Error::Input("need at least two failures in some stress group".into()));
    }
    let lstsq = |design: DMatrix<f64>, y: DVector<f64>| -> Result<Vec<f64>> {
        // Small ridge keeps underdetermined fits (few groups, many knots) well posed.
        let p = design.ncols();
        let a = design.transpose() * &design + DMatrix::identity(p, p) * 1e-8;
        let b = design.transpose() * y;
        a.cholesky()
            .map(|c| c.solve(&b).iter().copied().collect())
            .ok_or_else(|| Error::Numerical("initial least squares failed".into()))
    };
    let r = rows.len();
    match spec {
        LinkSpec::Pla { mu_knots, sigma_knots } => {
            let mut xm = DMatrix::zeros(r, mu_knots.len());
            let mut xs = DMatrix::zeros(r, sigma_knots.len());
            for (i, (xi, _, _)) in rows.iter().enumerate() {
                for (j, v) in mu_knots.hat_basis(*xi)?.into_iter().enumerate() {
                    xm[(i, j)] = v;
                }
                for (j, v) in sigma_knots.hat_basis(*xi)?.into_iter().enumerate() {
                    xs[(i, j)] = v;
                }
            }
            let mut theta = lstsq(xm, DVector::from_iterator(r, rows.iter().map(|x| x.1)))?;
            theta.extend(lstsq(xs, DVector::from_iterator(r, rows.iter().map(|x| x.2.ln())))?);
            Ok(theta)
        }
        LinkSpec::Linear => {
            let x = DMatrix::from_fn(r, 2, |i, j| if j == 0 { 1.0 } else { rows[i].0 });
            let mut theta = lstsq(x.clone(), DVector::from_iterator(r, rows.iter().map(|x| x.1)))?;
            let mut s = lstsq(x, DVector::from_iterator(r, rows.iter().map(|x| x.2)))?;
            // Keep the starting σ positive on [0, 1].
            let (s0, s1) = (s[0], s[1]);
            if s0.min(s0 + s1) <= 0.0 {
                let floor = rows.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
                s = vec![floor, 0.0];
            }
            theta.extend(s);
            Ok(theta)
        }
    }
}

const FIT_MAX_EVALS: usize = 100_000;

fn fit_from(sample: &CensoredSample, spec: &LinkSpec, start: &[f64], xtol: f64) -> (Vec<f64>, f64, bool, usize) {
    let f = |th: &[f64]| -log_likelihood(th, sample, spec).unwrap_or(f64::NEG_INFINITY);
    let mut x = start.to_vec();
    let mut value = f(&x);
    let mut evals = 1;
    let mut converged = false;
    // Restart the simplex from the incumbent until it stops improving.
    for _ in 0..8 {
        let step: Vec<f64> = x.iter().map(|v| 0.1 * v.abs().max(0.5)).collect();
        let opts = NelderMeadOptions {
            initial_step: step,
            max_evals: FIT_MAX_EVALS.saturating_sub(evals).max(1),
            xtol_rel: xtol,
            ftol_abs: f64::INFINITY,
        };
        let r = minimize(f, &x, &opts);
        evals += r.evals;
        let improved = value - r.value;
        converged = r.converged;
        if r.value <= value {
            x = r.x;
            value = r.value;
        }
        if !(improved > 1e-10 * value.abs().max(1.0)) || evals >= FIT_MAX_EVALS {
            break;
        }
    }
    (x, -value, converged, evals)
}

/// Multi-start maximum-likelihood fit.
pub fn fit_mle(sample: &CensoredSample, spec: &LinkSpec, settings: &OptimizerSettings) -> Result<FitResult> {
    let init = initial_estimate(sample, spec)?;
    fit_mle_from(sample, spec, settings, &init)
}

/// Like [`fit_mle`] with an explicit first starting point.
pub fn fit_mle_from(
    sample: &CensoredSample,
    spec: &LinkSpec,
    settings: &OptimizerSettings,
    start: &[f64],
) -> Result<FitResult> {
    if sample.failures() == 0 {
        return Err(Error::Input("the sample contains no failures".into()));
    }
    if start.len() != spec.n_params() {
        return Err(Error::Input("starting point has the wrong length".into()));
    }
    let restarts = settings.restarts.max(1);
    let runs = map_indexed(settings.execution, restarts, |r| {
        let mut x0 = start.to_vec();
        if r > 0 {
            let mut rng = stream_rng(settings.seed, r as u64);
            for v in x0.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *v += 0.1 * v.abs().max(0.5) * e;
            }
        }
        fit_from(sample, spec, &x0, settings.inner_tol)
    });
    let evaluations = runs.iter().map(|r| r.3).sum();
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for (x, l, c, _) in runs {
        if l.is_finite() && best.as_ref().is_none_or(|b| l > b.1) {
            best = Some((x, l, c));
        }
    }
    let (theta_hat, loglik, converged) = best.ok_or_else(|| {
        Error::NonConvergence(format!("all {restarts} starts of the {} fit stayed at -inf", spec.name()))
    })?;
    Ok(FitResult {
        aic: aic(loglik, spec.n_params()),
        spec: spec.clone(),
        theta_hat,
        loglik,
        converged,
        evaluations,
        sample_fingerprint: sample.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Position of the fit in the input.
    pub index: usize,
    pub model: String,
    pub aic: f64,
    pub delta_aic: f64,
}

/// Ranks fits by AIC (ties keep input order) with differences to the best.
pub fn model_comparison(fits: &[FitResult]) -> Result<Vec<ComparisonRow>> {
    if fits.len() < 2 {
        return Err(Error::Comparison("at least two fits are required".into()));
    }
    if fits.iter().any(|f| f.sample_fingerprint != fits[0].sample_fingerprint) {
        return Err(Error::Comparison("fits refer to different samples".into()));
    }
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&a, &b| fits[a].aic.total_cmp(&fits[b].aic));
    let best = fits[order[0]].aic;
    Ok(order
        .into_iter()
        .map(|i| ComparisonRow { index: i, model: fits[i].spec.name().to_string(), aic: fits[i].aic, delta_aic: fits[i].aic - best })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{simulate_censored, CensoredObservation, LevelSpec, StressGroup, WeibullParams};
    use crate::link::KnotSet;
    use approx::assert_abs_diff_eq;

    fn obs(t: f64, status: Status) -> CensoredObservation {
        CensoredObservation { log_time: t, status }
    }

    fn linear_sample() -> CensoredSample {
        let g0 = StressGroup { stress: 0.0, observations: vec![obs(0.0, Status::Failed)] };
        let g1 = StressGroup { stress: 1.0, observations: vec![obs(0.0, Status::Failed)] };
        CensoredSample::new(vec![g0, g1], std::f64::consts::E).unwrap()
    }

    #[test]
    fn two_group_hand_sum() {
        // μ = (0, 1), σ = 1, failures at t = 0.
        let l = log_likelihood(&[0.0, 1.0, 1.0, 0.0], &linear_sample(), &LinkSpec::Linear).unwrap();
        let g = |z: f64| z - z.exp();
        assert_abs_diff_eq!(l, g(0.0) + g(-1.0), epsilon = 1e-15);
    }

    #[test]
    fn censored_term() {
        let g = StressGroup { stress: 0.5, observations: vec![obs(1.0, Status::Censored)] };
        let s = CensoredSample::new(vec![g], std::f64::consts::E).unwrap();
        let l = log_likelihood(&[0.2, 0.2, 0.5, 0.0], &s, &LinkSpec::Linear).unwrap();
        assert_abs_diff_eq!(l, -((1.0f64 - 0.3) / 0.5).exp(), epsilon = 1e-15);
    }

    #[test]
    fn nonpositive_sigma_is_rejected() {
        let l = log_likelihood(&[0.0, 1.0, 0.5, -1.0], &linear_sample(), &LinkSpec::Linear).unwrap();
        assert_eq!(l, f64::NEG_INFINITY);
        assert!(log_likelihood(&[0.0, 1.0], &linear_sample(), &LinkSpec::Linear).is_err());
    }

    #[test]
    fn aic_values() {
        assert_abs_diff_eq!(aic(-2390.911, 7), 4795.822, epsilon = 1e-9);
        assert_abs_diff_eq!(aic(-7796.093, 4), 15600.186, epsilon = 1e-9);
    }

    fn pla2() -> LinkSpec {
        LinkSpec::Pla { mu_knots: KnotSet::equispaced(1).unwrap(), sigma_knots: KnotSet::equispaced(1).unwrap() }
    }

    fn simulated(units: usize, seed: u64) -> CensoredSample {
        let levels: Vec<LevelSpec> = (0..5)
            .map(|i| {
                let xi = i as f64 / 4.0;
                let mu = 4.0 - 2.0 * xi;
                let sigma = (-1.0 - 0.3 * xi).exp();
                LevelSpec { stress: xi, params: WeibullParams::new(1.0 / sigma, (-mu).exp()).unwrap(), units }
            })
            .collect();
        simulate_censored(&levels, 4.5f64.exp(), seed).unwrap()
    }

    #[test]
    fn recovers_generating_parameters() {
        let s = simulated(400, 1);
        let fit = fit_mle(&s, &pla2(), &OptimizerSettings { restarts: 2, ..Default::default() }).unwrap();
        let truth = [4.0, 2.0, -1.0, -1.3];
        for (a, b) in fit.theta_hat.iter().zip(truth) {
            assert!((a - b).abs() < 0.1 * b.abs(), "{:?}", fit.theta_hat);
        }
        let l_truth = log_likelihood(&truth, &s, &pla2()).unwrap();
        assert!(fit.loglik >= l_truth);
    }

    #[test]
    fn refined_fit_dominates_nested_fit() {
        let s = simulated(200, 2);
        let settings = OptimizerSettings { restarts: 1, ..Default::default() };
        let coarse = fit_mle(&s, &pla2(), &settings).unwrap();
        let fine = LinkSpec::Pla {
            mu_knots: KnotSet::new(vec![0.0, 0.4, 1.0]).unwrap(),
            sigma_knots: KnotSet::new(vec![0.0, 0.5, 1.0]).unwrap(),
        };
        let start = refine_theta(&pla2(), &coarse.theta_hat, &fine).unwrap();
        assert_abs_diff_eq!(log_likelihood(&start, &s, &fine).unwrap(), coarse.loglik, epsilon = 1e-9);
        let f = fit_mle_from(&s, &fine, &settings, &start).unwrap();
        assert!(f.loglik >= coarse.loglik - 1e-6);
    }

    #[test]
    fn comparison_ranks_and_checks_samples() {
        let s = simulated(50, 3);
        let mk = |aic: f64, fp: u64| FitResult {
            spec: LinkSpec::Linear,
            theta_hat: vec![0.0; 4],
            loglik: 0.0,
            aic,
            converged: true,
            evaluations: 0,
            sample_fingerprint: fp,
        };
        let fp = s.fingerprint();
        let rows = model_comparison(&[mk(10.0, fp), mk(5.0, fp), mk(10.0, fp)]).unwrap();
        assert_eq!(rows.iter().map(|r| r.index).collect::<Vec<_>>(), vec![1, 0, 2]);
        assert_eq!(rows[1].delta_aic, 5.0);
        assert!(model_comparison(&[mk(1.0, fp), mk(2.0, fp + 1)]).is_err());
        assert!(model_comparison(&[mk(1.0, fp)]).is_err());
    }

    #[test]
    fn permutation_and_censoring_invariants() {
        let s = simulated(30, 4);
        let theta = [3.9, 2.1, -0.9, -1.2];
        let base = log_likelihood(&theta, &s, &pla2()).unwrap();
        let mut groups = s.groups().to_vec();
        groups.reverse();
        for g in groups.iter_mut() {
            g.observations.reverse();
        }
        let permuted = CensoredSample::new(groups.clone(), s.censor_time()).unwrap();
        assert_abs_diff_eq!(log_likelihood(&theta, &permuted, &pla2()).unwrap(), base, epsilon = 1e-9);

        groups[0].observations.push(obs(s.log_censor_time(), Status::Censored));
        let extra = CensoredSample::new(groups.clone(), s.censor_time()).unwrap();
        let m = pla2().link_model(&theta).unwrap().eval(groups[0].stress).unwrap();
        let term = -m.standardize(s.log_censor_time()).exp();
        assert_abs_diff_eq!(log_likelihood(&theta, &extra, &pla2()).unwrap() - base, term, epsilon = 1e-9);
    }

    #[test]
    fn gradient_consistency() {
        let s = simulated(40, 5);
        let theta = [3.8, 2.2, -0.95, -1.25];
        let f = |t: &[f64]| log_likelihood(t, &s, &pla2()).unwrap();
        for i in 0..4 {
            let d = |h: f64| {
                let (mut a, mut b) = (theta, theta);
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            };
            let (g1, g2) = (d(1e-4), d(5e-5));
            assert!((g1 / g2 - 1.0).abs() < 0.05, "component {i}: {g1} vs {g2}");
        }
    }
}
