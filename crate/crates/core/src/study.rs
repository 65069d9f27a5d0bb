//! Reproducible studies: the Arrhenius-type simulation comparing PLA and
//! linear links, and the least-squares benchmark of candidate link shapes.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dist::{sev_sf, simulate_censored, EvParams, LevelSpec, WeibullParams};
use crate::error::{Error, Result};
use crate::inference::{fit_mle, LinkSpec};
use crate::link::KnotSet;
use crate::numeric::{minimize, NelderMeadOptions};
use crate::optimizer::OptimizerSettings;
use crate::par::{map_indexed, stream_rng, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseConstants {
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub delta0: f64,
    /// Activation energy, J/mol.
    pub ea: f64,
    /// Gas constant, J/(mol·K).
    pub k1: f64,
    pub k2: f64,
    pub z: f64,
}

impl Default for CaseConstants {
    fn default() -> Self {
        Self { gamma0: 1e-4, gamma1: 1.0, gamma2: 2.0, gamma3: 1000.0, delta0: 1.0, ea: 10_000.0, k1: 8.314, k2: 0.1, z: 1.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseStudyConfig {
    /// Test temperatures in kelvin.
    pub temps: Vec<f64>,
    /// Voltage.
    pub volt: f64,
    pub constants: CaseConstants,
    pub n_per_level: usize,
    /// Censoring time in hours.
    pub censor_time: f64,
    pub reps: usize,
    pub seed: u64,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            temps: vec![320.0, 340.0, 355.0, 370.0, 385.0, 400.0, 415.0],
            volt: 170.0,
            constants: CaseConstants::default(),
            n_per_level: 100,
            censor_time: 350.0,
            reps: 100,
            seed: 0,
        }
    }
}

impl CaseStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temps.len() < 2 || !self.temps.windows(2).all(|w| w[1] > w[0]) || !(self.temps[0] > 0.0) {
            return Err(Error::Config("temps must be positive and strictly increasing (at least two)".into()));
        }
        let c = &self.constants;
        if [c.gamma0, c.gamma1, c.gamma2, c.gamma3, c.delta0, c.ea, c.k1, c.k2, c.z, self.volt].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("case-study constants and voltage must be positive".into()));
        }
        if self.n_per_level == 0 || self.reps == 0 || !(self.censor_time > 0.0) {
            return Err(Error::Config("n_per_level, reps and censor_time must be positive".into()));
        }
        Ok(())
    }

    /// Temperatures rescaled to `[0, 1]`.
    pub fn standardized_stresses(&self) -> Vec<f64> {
        let (lo, hi) = (self.temps[0], *self.temps.last().unwrap());
        self.temps.iter().map(|s| (s - lo) / (hi - lo)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    pub rate: f64,
    pub mu_star: f64,
    pub sigma_star: f64,
    pub weibull: WeibullParams,
}

/// `R = γ₀ exp{−E_a/(k₁s) + γ₂ ln v + γ₃ ln v/(k₁s)}`, `μ* = (v/δ₀)^{γ₁}/R`,
/// `σ* = k₂ μ*^z`, Weibull shape `1/σ*` and scale `e^{−μ*}`.
pub fn case_study_params(s: f64, cfg: &CaseStudyConfig) -> Result<CaseParams> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {s}")));
    }
    let c = &cfg.constants;
    let lv = cfg.volt.ln();
    let rate = c.gamma0 * (-c.ea / (c.k1 * s) + c.gamma2 * lv + c.gamma3 * lv / (c.k1 * s)).exp();
    let mu_star = (cfg.volt / c.delta0).powf(c.gamma1) / rate;
    let sigma_star = c.k2 * mu_star.powf(c.z);
    let weibull = WeibullParams::new(1.0 / sigma_star, (-mu_star).exp())?;
    Ok(CaseParams { rate, mu_star, sigma_star, weibull })
}

pub fn case_study_grid(cfg: &CaseStudyConfig) -> Result<Vec<CaseParams>> {
    cfg.temps.iter().map(|&s| case_study_params(s, cfg)).collect()
}

/// Expected censored fraction of an equal-allocation test over `levels`.
pub fn expected_censored_fraction(levels: &[EvParams], censor_time: f64) -> f64 {
    let lt = censor_time.ln();
    levels.iter().map(|p| sev_sf(p.standardize(lt))).sum::<f64>() / levels.len() as f64
}

/// Censoring time at which the expected censored fraction equals `target`.
pub fn censor_time_for_fraction(levels: &[EvParams], target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) || levels.is_empty() {
        return Err(Error::Input(format!("target censored fraction must lie in (0, 1), got {target}")));
    }
    let lo0 = levels.iter().map(|p| p.location() - 40.0 * p.scale()).fold(f64::INFINITY, f64::min);
    let hi0 = levels.iter().map(|p| p.location() + 5.0 * p.scale()).fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo0, hi0);
    let frac = |lt: f64| levels.iter().map(|p| sev_sf(p.standardize(lt))).sum::<f64>() / levels.len() as f64;
    if frac(hi) > target || frac(lo) < target {
        return Err(Error::Numerical("censored fraction not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Censoring time giving `target` expected censoring in the case study.
pub fn calibrate_case_censor_time(cfg: &CaseStudyConfig, target: f64) -> Result<f64> {
    let ev: Vec<EvParams> = case_study_grid(cfg)?
        .iter()
        .map(|p| EvParams::new(p.mu_star, p.sigma_star))
        .collect::<Result<_>>()?;
    censor_time_for_fraction(&ev, target)
}

/// PLA spec of the case study: μ knots at the 0/33/67/100th and σ knots at
/// the 0/50/100th percentiles of the standardized stresses.
pub fn case_pla_spec(stresses: &[f64]) -> Result<LinkSpec> {
    Ok(LinkSpec::Pla {
        mu_knots: KnotSet::from_quantiles(stresses, &[0.33, 0.67])?,
        sigma_knots: KnotSet::from_quantiles(stresses, &[0.5])?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub rep: usize,
    pub model: String,
    pub loglik: f64,
    pub aic: f64,
    pub censored_fraction: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub mean_loglik: f64,
    pub sd_loglik: f64,
    pub mean_aic: f64,
    pub sd_aic: f64,
    pub included: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub rows: Vec<ReplicationRow>,
    pub summaries: Vec<ModelSummary>,
    /// Replications where both fits succeeded and PLA had the smaller AIC.
    pub pla_wins: usize,
    /// Replications where both fits succeeded.
    pub paired: usize,
    /// Mean of `AIC_linear − AIC_pla` over paired replications.
    pub mean_delta_aic: f64,
    pub mean_censored_fraction: f64,
    /// Expected censored fraction at the configured censoring time.
    pub expected_censored_fraction: f64,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = x.iter().sum::<f64>() / n;
    let sd = if x.len() > 1 { (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd)
}

/// Mean and SD per model recomputed from replication rows.
pub fn summarize(rows: &[ReplicationRow], models: &[&str]) -> Vec<ModelSummary> {
    models
        .iter()
        .map(|&name| {
            let ok: Vec<&ReplicationRow> = rows.iter().filter(|r| r.model == name && r.converged).collect();
            let total = rows.iter().filter(|r| r.model == name).count();
            let (mean_loglik, sd_loglik) = mean_sd(&ok.iter().map(|r| r.loglik).collect::<Vec<_>>());
            let (mean_aic, sd_aic) = mean_sd(&ok.iter().map(|r| r.aic).collect::<Vec<_>>());
            ModelSummary {
                model: name.to_string(),
                mean_loglik,
                sd_loglik,
                mean_aic,
                sd_aic,
                included: ok.len(),
                excluded: total - ok.len(),
            }
        })
        .collect()
}

/// Simulates `cfg.reps` data sets and fits the PLA and linear links to each.
pub fn run_case_replications(cfg: &CaseStudyConfig, exec: Execution) -> Result<CaseStudyReport> {
    cfg.validate()?;
    let params = case_study_grid(cfg)?;
    let stresses = cfg.standardized_stresses();
    let pla = case_pla_spec(&stresses)?;
    let levels: Vec<LevelSpec> = stresses
        .iter()
        .zip(&params)
        .map(|(&xi, p)| LevelSpec { stress: xi, params: p.weibull, units: cfg.n_per_level })
        .collect();

    let per_rep = map_indexed(exec, cfg.reps, |rep| {
        let rep_seed = stream_rng(cfg.seed, rep as u64).next_u64();
        let sample = simulate_censored(&levels, cfg.censor_time, rep_seed);
        let settings = OptimizerSettings { restarts: 2, seed: rep_seed, execution: Execution::Sequential, ..Default::default() };
        let mut rows = Vec::with_capacity(2);
        for spec in [&pla, &LinkSpec::Linear] {
            let row = match &sample {
                Ok(s) => match fit_mle(s, spec, &settings) {
                    Ok(f) => ReplicationRow {
                        rep,
                        model: spec.name().into(),
                        loglik: f.loglik,
                        aic: f.aic,
                        censored_fraction: s.censored_fraction(),
                        converged: true,
                    },
                    Err(_) => ReplicationRow {
                        rep,
                        model: spec.name().into(),
                        loglik: f64::NAN,
                        aic: f64::NAN,
                        censored_fraction: s.censored_fraction(),
                        converged: false,
                    },
                },
                Err(_) => ReplicationRow {
                    rep,
                    model: spec.name().into(),
                    loglik: f64::NAN,
                    aic: f64::NAN,
                    censored_fraction: f64::NAN,
                    converged: false,
                },
            };
            rows.push(row);
        }
        rows
    });

    let mut rows = Vec::with_capacity(2 * cfg.reps);
    let (mut wins, mut paired, mut delta) = (0, 0, 0.0);
    for pair in per_rep {
        if pair[0].converged && pair[1].converged {
            paired += 1;
            let d = pair[1].aic - pair[0].aic;
            delta += d;
            if d > 0.0 {
                wins += 1;
            }
        }
        rows.extend(pair);
    }
    let cens: Vec<f64> = rows.iter().filter(|r| r.model == "pla").map(|r| r.censored_fraction).filter(|c| c.is_finite()).collect();
    let ev: Vec<EvParams> = params.iter().map(|p| EvParams::new(p.mu_star, p.sigma_star)).collect::<Result<_>>()?;
    Ok(CaseStudyReport {
        summaries: summarize(&rows, &["pla", "linear"]),
        rows,
        pla_wins: wins,
        paired,
        mean_delta_aic: if paired > 0 { delta / paired as f64 } else { f64::NAN },
        mean_censored_fraction: mean_sd(&cens).0,
        expected_censored_fraction: expected_censored_fraction(&ev, cfg.censor_time),
    })
}

/// The non-monotone target used for the link-shape benchmark.
pub fn benchmark_target(xi: f64) -> f64 {
    let d = (xi - 0.5) / 0.2;
    d / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * d * d).exp()
}

/// Grid shift applied to shapes involving `ln ξ`.
pub const LOG_SHIFT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseRow {
    pub model: String,
    pub sse: f64,
    pub coefficients: Vec<f64>,
    /// Whether the grid was shifted to `[ε, 1]` for this model.
    pub shifted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseReport {
    pub grid_points: usize,
    pub shift: f64,
    pub rows: Vec<SseRow>,
}

impl SseReport {
    pub fn sse(&self, model: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.model == model).map(|r| r.sse)
    }
}

pub const DEFAULT_GRID_POINTS: usize = 101;

/// Knot sets of the three piecewise-linear candidates.
pub fn benchmark_knots() -> [(&'static str, Vec<f64>); 3] {
    [
        ("pla1", vec![0.0, 0.3, 0.7, 1.0]),
        ("pla2", vec![0.0, 0.25, 0.5, 0.75, 1.0]),
        ("pla3", vec![0.0, 0.3, 0.5, 0.7, 1.0]),
    ]
}

/// Linear least squares; returns coefficients and SSE.
pub fn least_squares(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<(Vec<f64>, f64)> {
    let svd = design.clone().svd(true, true);
    let beta = svd.solve(y, 1e-13).map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let resid = y - design * &beta;
    Ok((beta.iter().copied().collect(), resid.norm_squared()))
}

/// Nonlinear fit of `1/θ = γ₀ + γ₁h(ξ)` on the θ scale: coarse grid over
/// `(γ₀, γ₁)` followed by Nelder–Mead from the best few cells.
fn reciprocal_fit(h: &[f64], y: &[f64]) -> (Vec<f64>, f64) {
    let sse = |g: &[f64]| -> f64 {
        let mut s = 0.0;
        for (hi, yi) in h.iter().zip(y) {
            let d = g[0] + g[1] * hi;
            if d == 0.0 {
                return f64::INFINITY;
            }
            s += (yi - 1.0 / d).powi(2);
        }
        s
    };
    let mut cells: Vec<(f64, [f64; 2])> = Vec::new();
    let axis = |i: usize, n: usize, span: f64| -span + 2.0 * span * i as f64 / (n - 1) as f64;
    for i in 0..161 {
        for j in 0..161 {
            let g = [axis(i, 161, 40.0), axis(j, 161, 80.0)];
            cells.push((sse(&g), g));
        }
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let opts = NelderMeadOptions { initial_step: vec![0.5], xtol_rel: 1e-12, ..Default::default() };
    let mut best = (cells[0].1.to_vec(), cells[0].0);
    for (_, g) in cells.iter().take(8) {
        let mut r = minimize(sse, g, &opts);
        r = minimize(sse, &r.x, &opts);
        if r.value < best.1 {
            best = (r.x, r.value);
        }
    }
    best
}

/// SSEs of the eight candidate link shapes on an equispaced grid over `[0, 1]`.
pub fn sse_benchmark(grid_points: usize) -> Result<SseReport> {
    if grid_points < 21 {
        return Err(Error::Input(format!("grid needs at least 21 points, got {grid_points}")));
    }
    let xs: Vec<f64> = (0..grid_points).map(|i| i as f64 / (grid_points - 1) as f64).collect();
    let shifted: Vec<f64> = xs.iter().map(|&x| x.max(LOG_SHIFT)).collect();
    let y = DVector::from_iterator(grid_points, xs.iter().map(|&x| benchmark_target(x)));
    let ys: Vec<f64> = shifted.iter().map(|&x| benchmark_target(x)).collect();
    let ys_v = DVector::from_vec(ys.clone());
    let poly = |deg: usize| DMatrix::from_fn(grid_points, deg + 1, |i, j| xs[i].powi(j as i32));
    let mut rows = Vec::new();
    let mut push = |model: &str, (coefficients, sse): (Vec<f64>, f64), shifted: bool| {
        rows.push(SseRow { model: model.into(), sse, coefficients, shifted });
    };

    push("linear", least_squares(&poly(1), &y)?, false);
    let logs: Vec<f64> = shifted.iter().map(|x| x.ln()).collect();
    let log_design = DMatrix::from_fn(grid_points, 2, |i, j| if j == 0 { 1.0 } else { logs[i] });
    push("logarithmic", least_squares(&log_design, &ys_v)?, true);
    let yt: Vec<f64> = y.iter().copied().collect();
    push("inverse", reciprocal_fit(&xs, &yt), false);
    push("combination", reciprocal_fit(&logs, &ys), true);
    push("cubic", least_squares(&poly(3), &y)?, false);
    for (name, cuts) in benchmark_knots() {
        let k = KnotSet::new(cuts)?;
        let mut d = DMatrix::zeros(grid_points, k.len());
        for (i, &x) in xs.iter().enumerate() {
            for (j, v) in k.hat_basis(x)?.into_iter().enumerate() {
                d[(i, j)] = v;
            }
        }
        push(name, least_squares(&d, &y)?, false);
    }
    Ok(SseReport { grid_points, shift: LOG_SHIFT, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn arrhenius_values() {
        let cfg = CaseStudyConfig::default();
        let p = case_study_params(320.0, &cfg).unwrap();
        // printed to five significant figures
        assert_abs_diff_eq!(p.rate, 0.46439, epsilon = 5e-5);
        assert_abs_diff_eq!(p.mu_star, 366.07, epsilon = 0.02);
        assert_abs_diff_eq!(p.sigma_star, 119.25, epsilon = 0.05);
        let grid = case_study_grid(&cfg).unwrap();
        assert!(grid.windows(2).all(|w| w[1].mu_star < w[0].mu_star));
        for (s, g) in cfg.temps.iter().zip(&grid) {
            assert_eq!(*g, case_study_params(*s, &cfg).unwrap());
        }
    }

    #[test]
    fn calibration_hits_target() {
        let cfg = CaseStudyConfig::default();
        let tau = calibrate_case_censor_time(&cfg, 0.15).unwrap();
        let ev: Vec<EvParams> =
            case_study_grid(&cfg).unwrap().iter().map(|p| EvParams::new(p.mu_star, p.sigma_star).unwrap()).collect();
        assert_abs_diff_eq!(expected_censored_fraction(&ev, tau), 0.15, epsilon = 1e-9);
    }

    #[test]
    fn case_knots_follow_percentiles() {
        let cfg = CaseStudyConfig::default();
        let LinkSpec::Pla { mu_knots, sigma_knots } = case_pla_spec(&cfg.standardized_stresses()).unwrap() else {
            panic!()
        };
        assert_eq!(mu_knots.len(), 4);
        assert_eq!(sigma_knots.len(), 3);
        assert_abs_diff_eq!(sigma_knots.cuts()[1], (370.0 - 320.0) / 95.0, epsilon = 1e-12);
    }

    #[test]
    fn replications_are_deterministic_and_summaries_recompute() {
        let cfg = CaseStudyConfig { reps: 3, n_per_level: 30, censor_time: 300f64.exp(), seed: 4, ..Default::default() };
        let a = run_case_replications(&cfg, Execution::Parallel).unwrap();
        let b = run_case_replications(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 6);
        assert_eq!(summarize(&a.rows, &["pla", "linear"]), a.summaries);
    }

    #[test]
    fn piecewise_target_is_interpolated_exactly() {
        let k = KnotSet::new((0..=20).map(|i| i as f64 / 20.0).collect()).unwrap();
        let xs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let d = DMatrix::from_fn(21, 21, |i, j| k.hat_basis(xs[i]).unwrap()[j]);
        let y = DVector::from_iterator(21, xs.iter().map(|x| (x - 0.4).abs()));
        let (_, sse) = least_squares(&d, &y).unwrap();
        assert!(sse < 1e-25);
    }

    #[test]
    fn pla_sse_matches_generic_minimizer() {
        let r = sse_benchmark(101).unwrap();
        let xs: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let k = KnotSet::new(vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        let f = |g: &[f64]| {
            xs.iter()
                .map(|&x| {
                    let b = k.hat_basis(x).unwrap();
                    let v: f64 = b.iter().zip(g).map(|(a, c)| a * c).sum();
                    (v - benchmark_target(x)).powi(2)
                })
                .sum::<f64>()
        };
        let opts = NelderMeadOptions { initial_step: vec![0.3], xtol_rel: 1e-12, ..Default::default() };
        let mut res = minimize(f, &[0.0; 5], &opts);
        res = minimize(f, &res.x, &opts);
        assert!((res.value - r.sse("pla2").unwrap()).abs() < 1e-10);
    }

    #[test]
    fn benchmark_rows() {
        let r = sse_benchmark(101).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows.iter().all(|x| x.sse.is_finite() && x.sse >= 0.0));
        assert!(sse_benchmark(10).is_err());
    }
}
