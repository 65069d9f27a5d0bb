//! Expected Fisher information of the link parameters under Type-I censoring.
//!
//! For one unit at stress `ξ` the information is
//! `∫_{−∞}^{ln τ₀} (∂A/∂θ)(∂A/∂θ)ᵀ g(t) dt` with `A = ln h(t)` the log
//! hazard. With `z = (t − μ)/σ`, `∂A/∂γ_μ = −b_μ/σ` and
//! `∂A/∂γ_σ = −(z + 1) b_σ`, where `b_μ`, `b_σ` are the hat bases at `ξ`, so
//! every entry is a multiple of one of three standardized integrals
//! `I_k = ∫_{−∞}^{z₀} (z + 1)^k e^{z − e^z} dz`, `k = 0, 1, 2`.
//!
//! The integrals are evaluated after substituting `w = e^z`, which turns them
//! into `∫_0^{e^{z₀}} (1 + ln w)^k e^{−w} dw`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkModel;
use crate::numeric::{integrate, QuadratureOptions};
use crate::par::{map_indexed, stream_rng, Execution};

/// Beyond this `w` the factor `e^{−w}` is negligible at double precision.
const W_CUTOFF: f64 = 200.0;

/// Condition number above which the information matrix is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

fn quad_opts() -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_subintervals: 600,
    }
}

/// `[I₀, I₁, I₂]` at standardized censoring point `z₀`.
pub fn standardized_integrals(z0: f64) -> Result<[f64; 3]> {
    if z0 == f64::NEG_INFINITY {
        return Ok([0.0; 3]);
    }
    if z0.is_nan() {
        return Err(Error::Numerical("standardized censoring point is NaN".into()));
    }
    let w0 = z0.exp().min(W_CUTOFF);
    if w0 == 0.0 {
        return Ok([0.0; 3]);
    }
    let f = |w: f64| {
        let a = 1.0 + w.ln();
        let e = (-w).exp();
        [e, a * e, a * a * e]
    };
    // The log singularity sits at w = 0; keep the smooth bulk in its own piece.
    let split = w0.min(1.0);
    let lower = integrate(f, 0.0, split, quad_opts())?;
    let mut out = lower.value;
    if w0 > split {
        let upper = integrate(f, split, w0, quad_opts())?;
        for (o, u) in out.iter_mut().zip(upper.value) {
            *o += u;
        }
    }
    Ok(out)
}

fn check_censor_time(censor_time: f64) -> Result<f64> {
    if !(censor_time >= 0.0) {
        return Err(Error::Domain(format!("censoring time must be nonnegative, got {censor_time}")));
    }
    Ok(censor_time.ln())
}

/// Information contributed by one unit tested at stress `ξ` until `τ₀`.
///
/// The matrix is ordered `(γ_μ, γ_σ)` and has size `Q₁ + Q₂ + 2`.
pub fn unit_fisher(xi: f64, model: &LinkModel, censor_time: f64) -> Result<DMatrix<f64>> {
    let log_tau = check_censor_time(censor_time)?;
    let ev = model.eval(xi)?;
    let (bm, bs) = model.bases(xi)?;
    let sigma = ev.scale();
    let z0 = if log_tau == f64::NEG_INFINITY { f64::NEG_INFINITY } else { ev.standardize(log_tau) };
    let [i0, i1, i2] = standardized_integrals(z0)?;

    let p1 = bm.len();
    let p = p1 + bs.len();
    let mut m = DMatrix::zeros(p, p);
    for (a, &ba) in bm.iter().enumerate() {
        for (b, &bb) in bm.iter().enumerate() {
            m[(a, b)] = ba * bb * i0 / (sigma * sigma);
        }
        for (b, &bb) in bs.iter().enumerate() {
            let v = ba * bb * i1 / sigma;
            m[(a, p1 + b)] = v;
            m[(p1 + b, a)] = v;
        }
    }
    for (a, &ba) in bs.iter().enumerate() {
        for (b, &bb) in bs.iter().enumerate() {
            m[(p1 + a, p1 + b)] = ba * bb * i2;
        }
    }
    Ok(m)
}

/// Gradient of the log-hazard with respect to θ at standardized time `z`.
pub fn log_hazard_gradient(z: f64, sigma: f64, bm: &[f64], bs: &[f64]) -> Vec<f64> {
    bm.iter()
        .map(|b| -b / sigma)
        .chain(bs.iter().map(|b| -(z + 1.0) * b))
        .collect()
}

/// Monte-Carlo estimate of a matrix with per-entry standard errors.
#[derive(Debug, Clone)]
pub struct McMatrixEstimate {
    pub mean: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    pub draws: usize,
}

const MC_BATCH: usize = 8192;

/// Monte-Carlo counterpart of [`unit_fisher`]: averages `G(z₀)·∇A ∇Aᵀ` over
/// draws of the log-lifetime truncated to `t ≤ ln τ₀`.
pub fn mc_fisher_oracle(xi: f64, model: &LinkModel, censor_time: f64, reps: usize, seed: u64) -> Result<McMatrixEstimate> {
    mc_fisher_oracle_with(Execution::default(), xi, model, censor_time, reps, seed)
}

pub fn mc_fisher_oracle_with(
    exec: Execution,
    xi: f64,
    model: &LinkModel,
    censor_time: f64,
    reps: usize,
    seed: u64,
) -> Result<McMatrixEstimate> {
    if reps < 10_000 {
        return Err(Error::Input(format!("Monte-Carlo oracle needs at least 10⁴ draws, got {reps}")));
    }
    let log_tau = check_censor_time(censor_time)?;
    let ev = model.eval(xi)?;
    let (bm, bs) = model.bases(xi)?;
    let p = bm.len() + bs.len();
    let z0 = if log_tau == f64::NEG_INFINITY { f64::NEG_INFINITY } else { ev.standardize(log_tau) };
    let mass = crate::dist::sev_cdf(z0);

    let batches = reps.div_ceil(MC_BATCH);
    let partials = map_indexed(exec, batches, |b| {
        let count = MC_BATCH.min(reps - b * MC_BATCH);
        let mut rng = stream_rng(seed, b as u64);
        let mut sum = vec![0.0; p * p];
        let mut sum_sq = vec![0.0; p * p];
        for _ in 0..count {
            if mass == 0.0 {
                continue;
            }
            let u: f64 = rng.random();
            let prob = u * mass;
            let z = (-(-prob).ln_1p()).ln();
            let g = log_hazard_gradient(z, ev.scale(), &bm, &bs);
            for i in 0..p {
                for j in 0..p {
                    let v = mass * g[i] * g[j];
                    sum[i * p + j] += v;
                    sum_sq[i * p + j] += v * v;
                }
            }
        }
        (sum, sum_sq)
    });

    let mut sum = vec![0.0; p * p];
    let mut sum_sq = vec![0.0; p * p];
    for (s, s2) in partials {
        for k in 0..p * p {
            sum[k] += s[k];
            sum_sq[k] += s2[k];
        }
    }
    let n = reps as f64;
    let mean = DMatrix::from_fn(p, p, |i, j| sum[i * p + j] / n);
    let std_err = DMatrix::from_fn(p, p, |i, j| {
        let m = sum[i * p + j] / n;
        let var = (sum_sq[i * p + j] / n - m * m).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(McMatrixEstimate { mean, std_err, draws: reps })
}

/// Stress levels, allocation proportions, (relaxed) sample size and
/// censoring time of a test plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub stresses: Vec<f64>,
    pub proportions: Vec<f64>,
    pub n: f64,
    pub censor_time: f64,
}

impl DesignPoint {
    pub fn new(stresses: Vec<f64>, proportions: Vec<f64>, n: f64, censor_time: f64) -> Result<Self> {
        let d = Self { stresses, proportions, n, censor_time };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.stresses;
        if s.len() < 2 {
            return Err(Error::Input("a design needs at least two stress levels".into()));
        }
        if s[0] != 0.0 || *s.last().unwrap() != 1.0 {
            return Err(Error::Input(format!("stresses must start at 0 and end at 1, got {s:?}")));
        }
        if !self.stresses_ordered() {
            return Err(Error::Input(format!("stresses must be strictly increasing, got {s:?}")));
        }
        if self.proportions.len() != s.len() {
            return Err(Error::Input(format!(
                "{} proportions for {} stress levels",
                self.proportions.len(),
                s.len()
            )));
        }
        if self.proportions.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Input("allocation proportions must be nonnegative".into()));
        }
        if self.simplex_residual().abs() > 1e-10 {
            return Err(Error::Input(format!(
                "allocation proportions sum to {}, not 1",
                self.proportions.iter().sum::<f64>()
            )));
        }
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(Error::Input(format!("sample size must be positive, got {}", self.n)));
        }
        if !(self.censor_time > 0.0) {
            return Err(Error::Input(format!("censoring time must be positive, got {}", self.censor_time)));
        }
        Ok(())
    }

    pub fn stresses_ordered(&self) -> bool {
        self.stresses.windows(2).all(|w| w[1] > w[0])
    }

    /// `Σπ − 1`.
    pub fn simplex_residual(&self) -> f64 {
        self.proportions.iter().sum::<f64>() - 1.0
    }

    /// Number of accelerated levels `m` (levels are indexed `0..=m`).
    pub fn m(&self) -> usize {
        self.stresses.len() - 1
    }
}

/// Symmetric positive semidefinite information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix(pub DMatrix<f64>);

impl FisherMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `F⁻¹` partitioned by the `(γ_μ, γ_σ)` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceBlocks {
    pub h11: DMatrix<f64>,
    pub h12: DMatrix<f64>,
    pub h22: DMatrix<f64>,
}

impl CovarianceBlocks {
    pub fn from_full(cov: &DMatrix<f64>, mu_len: usize) -> Self {
        let p = cov.nrows();
        let s = p - mu_len;
        Self {
            h11: cov.view((0, 0), (mu_len, mu_len)).into_owned(),
            h12: cov.view((0, mu_len), (mu_len, s)).into_owned(),
            h22: cov.view((mu_len, mu_len), (s, s)).into_owned(),
        }
    }

    pub fn zeros(mu_len: usize, sigma_len: usize) -> Self {
        Self {
            h11: DMatrix::zeros(mu_len, mu_len),
            h12: DMatrix::zeros(mu_len, sigma_len),
            h22: DMatrix::zeros(sigma_len, sigma_len),
        }
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let (a, b) = (self.h11.nrows(), self.h22.nrows());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.h11);
        m.view_mut((0, a), (a, b)).copy_from(&self.h12);
        m.view_mut((a, 0), (b, a)).copy_from(&self.h12.transpose());
        m.view_mut((a, a), (b, b)).copy_from(&self.h22);
        m
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            h11: &self.h11 * c,
            h12: &self.h12 * c,
            h22: &self.h22 * c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FisherSummary {
    pub fisher: FisherMatrix,
    pub blocks: CovarianceBlocks,
    pub condition: f64,
}

/// Per-unit information `Σ π_i l_i(θ)` (the design information at `n = 1`).
pub fn design_information(design: &DesignPoint, model: &LinkModel) -> Result<DMatrix<f64>> {
    let p = model.n_params();
    let mut f = DMatrix::zeros(p, p);
    for (&xi, &pi) in design.stresses.iter().zip(&design.proportions) {
        // Index-ordered accumulation keeps the sum deterministic.
        f += unit_fisher(xi, model, design.censor_time)? * pi;
    }
    Ok(f)
}

/// Inverts a symmetric PSD information matrix, rejecting ill-conditioned ones.
pub fn invert_information(f: &DMatrix<f64>, names: &[String]) -> Result<(DMatrix<f64>, f64)> {
    let sym = (f + f.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lmax == 0.0 || !lmax.is_finite() {
        return Err(Error::Singular { condition: f64::INFINITY, directions: "all".into() });
    }
    let clamp_tol = 1e-10 * lmax.max(1.0);
    let mut values = eig.eigenvalues.clone();
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -clamp_tol {
                return Err(Error::Numerical(format!("information matrix has eigenvalue {v:e} < 0")));
            }
            *v = 0.0;
        }
    }
    let lmin = values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        let mut dirs = Vec::new();
        for (k, &v) in values.iter().enumerate() {
            if v * MAX_CONDITION <= lmax {
                let vec = eig.eigenvectors.column(k);
                let mut loads: Vec<(usize, f64)> = vec.iter().map(|x| x.abs()).enumerate().collect();
                loads.sort_by(|a, b| b.1.total_cmp(&a.1));
                let named: Vec<String> = loads
                    .iter()
                    .take_while(|(_, w)| *w >= 0.1)
                    .map(|(i, w)| format!("{}({:.2})", names.get(*i).map(String::as_str).unwrap_or("?"), w))
                    .collect();
                dirs.push(format!("[{}]", named.join(" ")));
            }
        }
        return Err(Error::Singular { condition, directions: dirs.join(", ") });
    }
    let inv_diag = DMatrix::from_diagonal(&values.map(|v| 1.0 / v));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok((inv, condition))
}

/// `F = n Σ π_i l_i(θ)` and its inverse split into covariance blocks.
pub fn fisher_and_covariance(design: &DesignPoint, model: &LinkModel) -> Result<FisherSummary> {
    design.validate()?;
    let f = design_information(design, model)? * design.n;
    let (inv, condition) = invert_information(&f, &model.param_names())?;
    Ok(FisherSummary {
        blocks: CovarianceBlocks::from_full(&inv, model.mu_len()),
        fisher: FisherMatrix(f),
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{sev_cdf, EULER_GAMMA, PI_SQUARED_OVER_SIX};
    use crate::link::KnotSet;
    use crate::numeric::integrate_scalar;
    use approx::assert_relative_eq;

    fn two_knot_model() -> LinkModel {
        let km = KnotSet::new(vec![0.0, 0.4, 1.0]).unwrap();
        let ks = KnotSet::new(vec![0.0, 1.0]).unwrap();
        LinkModel::new(km, vec![2.0, 1.2, 0.1], ks, vec![-0.4, -0.9]).unwrap()
    }

    #[test]
    fn uncensored_integrals_match_ev_moments() {
        let [i0, i1, i2] = standardized_integrals(40.0).unwrap();
        assert_relative_eq!(i0, 1.0, max_relative = 1e-12);
        assert_relative_eq!(i1, 1.0 - EULER_GAMMA, max_relative = 1e-10);
        assert_relative_eq!(i2, PI_SQUARED_OVER_SIX + (1.0 - EULER_GAMMA).powi(2), max_relative = 1e-10);
    }

    #[test]
    fn i0_is_censoring_mass() {
        for z in [-20.0, -3.0, -0.5, 0.0, 0.7, 2.0] {
            let [i0, _, _] = standardized_integrals(z).unwrap();
            assert_relative_eq!(i0, sev_cdf(z), max_relative = 1e-10);
        }
    }

    #[test]
    fn integrals_match_direct_quadrature_in_z() {
        for z0 in [-4.0, -1.0, 0.3, 1.5] {
            let got = standardized_integrals(z0).unwrap();
            for k in 0..3 {
                let direct = integrate_scalar(
                    |z: f64| (z + 1.0).powi(k) * (z - z.exp()).exp(),
                    -60.0,
                    z0,
                    QuadratureOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_subintervals: 800 },
                )
                .unwrap();
                assert_relative_eq!(got[k as usize], direct, max_relative = 1e-8, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_censoring_time_gives_zero_matrix() {
        let m = unit_fisher(0.3, &two_knot_model(), 0.0).unwrap();
        assert!(m.iter().all(|&v| v == 0.0));
        let m = unit_fisher(0.3, &two_knot_model(), 1e-300).unwrap();
        assert!(m.iter().all(|&v| v.abs() < 1e-100));
    }

    #[test]
    fn symmetric_and_psd() {
        let model = two_knot_model();
        for (xi, tau) in [(0.0, 1.0), (0.25, 3.0), (0.4, 0.5), (0.9, 20.0), (1.0, 2.0)] {
            let m = unit_fisher(xi, &model, tau).unwrap();
            assert!((&m - m.transpose()).amax() < 1e-14);
            let eig = SymmetricEigen::new(m.clone());
            assert!(eig.eigenvalues.iter().all(|&v| v > -1e-10), "{:?}", eig.eigenvalues);
        }
    }

    #[test]
    fn diagonal_nondecreasing_in_censoring_time() {
        let model = two_knot_model();
        let mut prev = unit_fisher(0.6, &model, 0.05).unwrap();
        for tau in [0.1, 0.5, 1.0, 2.0, 5.0, 50.0] {
            let cur = unit_fisher(0.6, &model, tau).unwrap();
            for i in 0..cur.nrows() {
                assert!(cur[(i, i)] >= prev[(i, i)] - 1e-15);
            }
            prev = cur;
        }
    }

    #[test]
    fn refinement_of_collinear_knots_preserves_information() {
        // Both models describe μ(ξ) = 2 − 1.5ξ and ln σ(ξ) = −0.3 − 0.5ξ.
        let coarse = LinkModel::single_segment([2.0, 0.5], [-0.3, -0.8]).unwrap();
        let fine_mu = KnotSet::new(vec![0.0, 0.4, 1.0]).unwrap();
        let fine_sigma = KnotSet::new(vec![0.0, 0.25, 0.7, 1.0]).unwrap();
        let line = |a: f64, b: f64, x: f64| a + (b - a) * x;
        let fine = LinkModel::new(
            fine_mu.clone(),
            fine_mu.cuts().iter().map(|&x| line(2.0, 0.5, x)).collect(),
            fine_sigma.clone(),
            fine_sigma.cuts().iter().map(|&x| line(-0.3, -0.8, x)).collect(),
        )
        .unwrap();
        // A perturbation direction of the two linear functions.
        let d = [0.3, -0.7, 0.5, 0.2];
        let mut big_d: Vec<f64> = fine_mu.cuts().iter().map(|&x| line(d[0], d[1], x)).collect();
        big_d.extend(fine_sigma.cuts().iter().map(|&x| line(d[2], d[3], x)));
        for (xi, tau) in [(0.1, 2.0), (0.55, 1.0), (0.9, 10.0)] {
            let lc = unit_fisher(xi, &coarse, tau).unwrap();
            let lf = unit_fisher(xi, &fine, tau).unwrap();
            let dc = nalgebra::DVector::from_column_slice(&d);
            let df = nalgebra::DVector::from_vec(big_d.clone());
            let qc = (dc.transpose() * lc * &dc)[(0, 0)];
            let qf = (df.transpose() * lf * &df)[(0, 0)];
            assert_relative_eq!(qc, qf, max_relative = 1e-10);
        }
    }

    /// Expected log-likelihood of one unit at stress ξ under the truth, as a
    /// function of θ, by quadrature over the standardized truth.
    fn expected_loglik(model_truth: &LinkModel, theta: &[f64], xi: f64, tau: f64) -> f64 {
        let truth = model_truth.eval(xi).unwrap();
        let m = model_truth.with_theta(theta).unwrap().eval(xi).unwrap();
        let (mu, s) = (m.location(), m.scale());
        let c = tau.ln();
        let zc = truth.standardize(c);
        let opts = QuadratureOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_subintervals: 800 };
        let body = integrate_scalar(
            |z: f64| {
                let t = truth.location() + truth.scale() * z;
                let u = (t - mu) / s;
                (-s.ln() + u - u.exp()) * (z - z.exp()).exp()
            },
            -45.0,
            zc.min(4.0),
            opts,
        )
        .unwrap();
        let tail = (1.0 - sev_cdf(zc)) * (-((c - mu) / s).exp());
        body + tail
    }

    #[test]
    fn matches_finite_difference_hessian_of_expected_loglik() {
        let model = LinkModel::single_segment([1.5, 0.2], [-0.2, -0.6]).unwrap();
        let theta = model.theta();
        let h = 1e-4;
        for (xi, tau) in [(0.3, (1.5f64 + 40.0).exp()), (0.7, 1.0f64.exp())] {
            let fisher = unit_fisher(xi, &model, tau).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let f = |di: f64, dj: f64| {
                        let mut t = theta.clone();
                        t[i] += di;
                        t[j] += dj;
                        expected_loglik(&model, &t, xi, tau)
                    };
                    let hess = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                    let expected = fisher[(i, j)];
                    assert!(
                        (-hess - expected).abs() <= 5e-3 * expected.abs() + 1e-6,
                        "entry ({i},{j}) at ξ={xi}: hessian {} vs fisher {expected}",
                        -hess
                    );
                }
            }
        }
    }

    #[test]
    fn monte_carlo_oracle_agrees() {
        let model = two_knot_model();
        let q = unit_fisher(0.25, &model, 2.0).unwrap();
        let mc = mc_fisher_oracle(0.25, &model, 2.0, 200_000, 3).unwrap();
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                let tol = 4.0 * mc.std_err[(i, j)] + 1e-12;
                assert!((q[(i, j)] - mc.mean[(i, j)]).abs() <= tol, "({i},{j})");
            }
        }
    }

    #[test]
    fn monte_carlo_oracle_contracts() {
        let model = two_knot_model();
        assert!(mc_fisher_oracle(0.2, &model, 1.0, 100, 0).is_err());
        let a = mc_fisher_oracle_with(Execution::Sequential, 0.2, &model, 1.0, 20_000, 9).unwrap();
        let b = mc_fisher_oracle_with(Execution::Parallel, 0.2, &model, 1.0, 20_000, 9).unwrap();
        assert_eq!(a.mean, b.mean);
        let z = mc_fisher_oracle(0.2, &model, 0.0, 10_000, 1).unwrap();
        assert!(z.mean.iter().all(|&v| v == 0.0));
    }

    fn design() -> DesignPoint {
        DesignPoint::new(vec![0.0, 0.3, 0.6, 1.0], vec![0.25, 0.25, 0.25, 0.25], 100.0, 5.0).unwrap()
    }

    #[test]
    fn covariance_blocks_shape_and_inverse() {
        let model = two_knot_model();
        let s = fisher_and_covariance(&design(), &model).unwrap();
        assert_eq!(s.blocks.h11.shape(), (3, 3));
        assert_eq!(s.blocks.h12.shape(), (3, 2));
        assert_eq!(s.blocks.h22.shape(), (2, 2));
        let prod = s.fisher.matrix() * s.blocks.assemble();
        assert!((prod - DMatrix::identity(5, 5)).amax() < 1e-8);
    }

    #[test]
    fn doubling_n_halves_covariance() {
        let model = two_knot_model();
        let a = fisher_and_covariance(&design(), &model).unwrap();
        let mut d = design();
        d.n *= 2.0;
        let b = fisher_and_covariance(&d, &model).unwrap();
        let diff = b.blocks.assemble() * 2.0 - a.blocks.assemble();
        assert!(diff.amax() < 1e-9 * a.blocks.assemble().amax());
    }

    #[test]
    fn empty_segment_is_singular() {
        // No stress level falls strictly inside (0.4, 1) except the endpoint,
        // and levels only at ξ ∈ {0, 1}: three μ-coefficients cannot be identified.
        let model = two_knot_model();
        let d = DesignPoint::new(vec![0.0, 1.0], vec![0.5, 0.5], 50.0, 3.0).unwrap();
        match fisher_and_covariance(&d, &model) {
            Err(Error::Singular { directions, .. }) => assert!(directions.contains("gamma_mu[1]"), "{directions}"),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn design_validation() {
        assert!(DesignPoint::new(vec![0.0, 0.5, 1.0], vec![0.5, 0.3, 0.3], 10.0, 1.0).is_err());
        assert!(DesignPoint::new(vec![0.1, 0.5, 1.0], vec![0.4, 0.3, 0.3], 10.0, 1.0).is_err());
        assert!(DesignPoint::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.25; 4], 10.0, 1.0).is_err());
        assert!(DesignPoint::new(vec![0.0, 1.0], vec![0.5, 0.5], 0.0, 1.0).is_err());
    }
}
