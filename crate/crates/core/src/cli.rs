//! Command-line front end: TOML run configuration, CSV ingestion and
//! emission, and provenance records.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acceptance::{acceptability_constant, oc_probability, preset_names, RiskSpec};
use crate::dist::{CensoredObservation, CensoredSample, Status, StressGroup};
use crate::error::{Error, Result};
use crate::fisher::{fisher_and_covariance, DesignPoint};
use crate::inference::{fit_mle, model_comparison, FitResult, LinkSpec};
use crate::link::{KnotSet, LinkModel};
use crate::objectives::CostSpec;
use crate::optimizer::{feasibility_report, optimize_plan, FixedQuantities, Objective, OptimizerSettings};
use crate::acceptance::w_moments;
use crate::study::{run_case_replications, sse_benchmark, CaseStudyConfig, DEFAULT_GRID_POINTS};

/// Risk section; every field must be supplied unless a preset is named.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_beta: Option<f64>,
}

/// Cost section; omitted fields take the standard fixed quantities, an
/// empty section means "no cost model".
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2: Option<f64>,
    /// Defaults to `p_alpha`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_nc: Option<f64>,
}

impl CostSection {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn resolve(&self, lot_size: u32, p_alpha: f64) -> Result<CostSpec> {
        let d = CostSpec::standard(p_alpha);
        let c = CostSpec {
            lot_size,
            c_a: self.c_a.unwrap_or(d.c_a),
            c_r: self.c_r.unwrap_or(d.c_r),
            c_t: self.c_t.unwrap_or(d.c_t),
            c_star: self.c_star.unwrap_or(d.c_star),
            w1: self.w1.unwrap_or(d.w1),
            w2: self.w2.unwrap_or(d.w2),
            p_nc: self.p_nc.unwrap_or(p_alpha),
        };
        c.validate().map_err(|e| Error::Config(format!("[cost]: {e}")))?;
        Ok(c)
    }
}

/// Assumed link model `μ(ξ)`, `ln σ(ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mu_knots: Vec<f64>,
    pub mu_gamma: Vec<f64>,
    pub sigma_knots: Vec<f64>,
    pub sigma_gamma: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            mu_knots: vec![0.0, 0.5, 1.0],
            mu_gamma: vec![-0.9, -1.5, -2.2],
            sigma_knots: vec![0.0, 1.0],
            sigma_gamma: vec![-0.7, -0.9],
        }
    }
}

impl ModelSection {
    pub fn build(&self) -> Result<LinkModel> {
        LinkModel::new(
            KnotSet::new(self.mu_knots.clone())?,
            self.mu_gamma.clone(),
            KnotSet::new(self.sigma_knots.clone())?,
            self.sigma_gamma.clone(),
        )
        .map_err(|e| Error::Config(format!("[model]: {e}")))
    }
}

/// An explicit plan for `oc-curve` and `feasibility`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub stresses: Vec<f64>,
    pub proportions: Vec<f64>,
    pub n: f64,
    pub censor_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcSection {
    pub points: usize,
    /// Upper end of the `p_nc` grid.
    pub p_max: f64,
}

impl Default for OcSection {
    fn default() -> Self {
        Self { points: 101, p_max: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub grid_points: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { grid_points: DEFAULT_GRID_POINTS }
    }
}

fn default_fit_links() -> Vec<LinkSpec> {
    let k = KnotSet::equispaced(1).expect("valid knots");
    vec![LinkSpec::Pla { mu_knots: k.clone(), sigma_knots: k }, LinkSpec::Linear]
}

/// Full run configuration. Every section is optional; commands check for the
/// pieces they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub risks: RiskSection,
    pub cost: CostSection,
    pub fixed: FixedQuantities,
    pub model: ModelSection,
    pub optimizer: OptimizerSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSection>,
    pub oc: OcSection,
    pub links: Vec<LinkSpec>,
    pub case: CaseStudyConfig,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            objective: None,
            preset: None,
            data: None,
            risks: RiskSection::default(),
            cost: CostSection::default(),
            fixed: FixedQuantities::default(),
            model: ModelSection::default(),
            optimizer: OptimizerSettings::default(),
            plan: None,
            oc: OcSection::default(),
            links: default_fit_links(),
            case: CaseStudyConfig::default(),
            bench: BenchSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every section that carries values, independent of the command.
    pub fn validate(&self) -> Result<()> {
        self.fixed.validate().map_err(|e| Error::Config(format!("[fixed]: {e}")))?;
        self.optimizer.validate().map_err(|e| Error::Config(format!("[optimizer]: {e}")))?;
        self.model.build()?;
        self.case.validate().map_err(|e| Error::Config(format!("[case]: {e}")))?;
        if let Some(p) = &self.preset {
            RiskSpec::preset(p)?;
        }
        if self.risks != RiskSection::default() {
            self.resolve_risks(None)?;
        }
        if let Some(p) = &self.plan {
            DesignPoint::new(p.stresses.clone(), p.proportions.clone(), p.n, p.censor_time)
                .map_err(|e| Error::Config(format!("[plan]: {e}")))?;
        }
        if self.oc.points < 2 || !(self.oc.p_max > 0.0 && self.oc.p_max < 1.0) {
            return Err(Error::Config("[oc]: points must be at least 2 and p_max in (0, 1)".into()));
        }
        if self.links.is_empty() {
            return Err(Error::Config("links: at least one link specification is required".into()));
        }
        Ok(())
    }

    /// `--preset` beats the config preset, which beats `[risks]`.
    pub fn resolve_risks(&self, preset_flag: Option<&str>) -> Result<RiskSpec> {
        if let Some(p) = preset_flag.or(self.preset.as_deref()) {
            return RiskSpec::preset(p);
        }
        let r = &self.risks;
        let missing: Vec<&str> = [("alpha", r.alpha), ("beta", r.beta), ("p_alpha", r.p_alpha), ("p_beta", r.p_beta)]
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "[risks]: missing {}; supply them or use a preset ({})",
                missing.join(", "),
                preset_names()
            )));
        }
        RiskSpec::new(r.alpha.unwrap(), r.beta.unwrap(), r.p_alpha.unwrap(), r.p_beta.unwrap())
            .map_err(|e| Error::Config(format!("[risks]: {e}")))
    }

    /// The cost model, or an error if the objective needs one and none is given.
    pub fn resolve_cost(&self, objective: Objective, risks: &RiskSpec) -> Result<Option<CostSpec>> {
        if self.cost.is_empty() {
            return match objective {
                Objective::Cost => Err(Error::Config("cost spec required".into())),
                Objective::Variance => Ok(None),
            };
        }
        self.cost.resolve(self.fixed.lot_size, risks.p_alpha).map(Some)
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    RunConfig::from_toml(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Formats with 17 significant digits so values re-parse exactly.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Input(format!("CSV: {other:?}")),
    }
}

#[derive(Debug, Deserialize)]
struct DataRecord {
    stress: f64,
    log_time: f64,
    status: String,
}

/// Reads `stress,log_time,status` records; the censoring time is taken from
/// the censored records (infinite if there are none).
pub fn read_sample(path: &Path) -> Result<CensoredSample> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let mut groups: BTreeMap<u64, Vec<CensoredObservation>> = BTreeMap::new();
    let mut log_tau: Option<f64> = None;
    for (i, rec) in r.deserialize::<DataRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("{} row {}: {e}", path.display(), i + 1)))?;
        let status = match rec.status.as_str() {
            "failed" => Status::Failed,
            "censored" => {
                if log_tau.is_some_and(|t| (t - rec.log_time).abs() > 1e-9 * t.abs().max(1.0)) {
                    return Err(Error::Input(format!("row {}: censored records must share one censoring time", i + 1)));
                }
                log_tau.get_or_insert(rec.log_time);
                Status::Censored
            }
            s => return Err(Error::Input(format!("row {}: status must be 'failed' or 'censored', got '{s}'", i + 1))),
        };
        if !rec.stress.is_finite() {
            return Err(Error::Input(format!("row {}: stress must be finite", i + 1)));
        }
        // Non-negative floats order like their bit patterns.
        groups
            .entry((rec.stress + 0.0).to_bits())
            .or_default()
            .push(CensoredObservation { log_time: rec.log_time, status });
    }
    if groups.is_empty() {
        return Err(Error::Input(format!("{}: no observations", path.display())));
    }
    let groups = groups
        .into_iter()
        .map(|(b, observations)| StressGroup { stress: f64::from_bits(b), observations })
        .collect();
    CensoredSample::new(groups, log_tau.map_or(f64::INFINITY, f64::exp))
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    command: &'a str,
    config_sha256: String,
    seed: u64,
    version: &'static str,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Parser, Debug)]
#[command(name = "altsp", version, about = "Accelerated life test sampling plans for Weibull lifetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Risk preset case1..case6.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal plan minimizing cost or quantile variance.
    Design {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        objective: Option<Objective>,
    },
    /// Acceptability constant and the quantiles behind it.
    KFactor {
        #[command(flatten)]
        common: Common,
    },
    /// Operating characteristic curve of a plan.
    OcCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        objective: Option<Objective>,
    },
    /// Maximum-likelihood fits of the configured links to a data file.
    Fit {
        #[command(flatten)]
        common: Common,
        /// CSV with columns stress,log_time,status.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Replicated case-study simulation comparing PLA and linear links.
    SimulateCase {
        #[command(flatten)]
        common: Common,
    },
    /// Least-squares benchmark of candidate link shapes.
    BenchLinks {
        #[command(flatten)]
        common: Common,
    },
    /// Constraint residuals of a configured plan.
    Feasibility {
        #[command(flatten)]
        common: Common,
    },
}

impl clap::ValueEnum for Objective {
    fn value_variants<'a>() -> &'a [Self] {
        &[Objective::Cost, Objective::Variance]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Objective::Cost => "cost",
            Objective::Variance => "variance",
        }))
    }
}

struct Ctx {
    name: &'static str,
    cfg: RunConfig,
    config_bytes: Vec<u8>,
    preset: Option<String>,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn new(name: &'static str, c: &Common) -> Result<Self> {
        let (mut cfg, config_bytes) = match &c.config {
            Some(p) => {
                let bytes = fs::read(p)?;
                (parse_config(p)?, bytes)
            }
            None => (RunConfig::default(), Vec::new()),
        };
        if let Some(p) = &c.preset {
            RiskSpec::preset(p)?;
        }
        let seed = c.seed.or(cfg.seed).unwrap_or(cfg.optimizer.seed);
        cfg.optimizer.seed = seed;
        cfg.case.seed = seed;
        let out = c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("altsp-out"));
        Ok(Self { name, cfg, config_bytes, preset: c.preset.clone(), seed, out })
    }

    fn risks(&self) -> Result<RiskSpec> {
        self.cfg.resolve_risks(self.preset.as_deref())
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        let prov = Provenance {
            command: self.name,
            config_sha256: sha256_hex(&self.config_bytes),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
        };
        fs::write(self.out.join("provenance.json"), serde_json::to_string_pretty(&prov).expect("serializable") + "\n")?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("serializing {file}: {e}")))?;
        fs::write(self.out.join(file), text + "\n")?;
        Ok(())
    }
}

fn param_rows(rows: &[(String, f64)]) -> Vec<Vec<String>> {
    rows.iter().map(|(k, v)| vec![k.clone(), fmt_num(*v)]).collect()
}

fn cmd_design(ctx: &Ctx, objective: Option<Objective>) -> Result<()> {
    let objective = objective.or(ctx.cfg.objective).unwrap_or(Objective::Cost);
    let risks = ctx.risks()?;
    let cost = ctx.cfg.resolve_cost(objective, &risks)?;
    let model = ctx.cfg.model.build()?;
    ctx.prepare_out()?;
    let r = optimize_plan(objective, &model, &risks, cost.as_ref(), ctx.cfg.fixed, &ctx.cfg.optimizer)?;
    let rows = r.rows();
    write_csv(&ctx.out.join("plan.csv"), &["param", "value"], &param_rows(&rows))?;
    ctx.write_json("plan.json", &r)?;
    for (k, v) in &rows {
        println!("{k:>20} = {v:.6}");
    }
    Ok(())
}

fn cmd_k_factor(ctx: &Ctx) -> Result<()> {
    let risks = ctx.risks()?;
    let q = risks.quantiles()?;
    let k = acceptability_constant(&risks)?;
    ctx.prepare_out()?;
    let rows = vec![
        ("k".to_string(), k),
        ("z_alpha".into(), q.z_alpha),
        ("z_one_minus_beta".into(), q.z_one_minus_beta),
        ("u_alpha".into(), q.u_alpha),
        ("u_beta".into(), q.u_beta),
    ];
    write_csv(&ctx.out.join("k.csv"), &["param", "value"], &param_rows(&rows))?;
    println!("k = {k:.4}");
    for (name, v) in &rows[1..] {
        println!("{name} = {v:.6}");
    }
    Ok(())
}

/// The configured plan, or an optimized one if none is configured.
fn plan_for(ctx: &Ctx, objective: Option<Objective>, model: &LinkModel, risks: &RiskSpec) -> Result<DesignPoint> {
    match &ctx.cfg.plan {
        Some(p) => DesignPoint::new(p.stresses.clone(), p.proportions.clone(), p.n, p.censor_time),
        None => {
            let objective = objective.or(ctx.cfg.objective).unwrap_or(Objective::Variance);
            let cost = ctx.cfg.resolve_cost(objective, risks)?;
            Ok(optimize_plan(objective, model, risks, cost.as_ref(), ctx.cfg.fixed, &ctx.cfg.optimizer)?.plan)
        }
    }
}

fn cmd_oc_curve(ctx: &Ctx, objective: Option<Objective>) -> Result<()> {
    let risks = ctx.risks()?;
    let model = ctx.cfg.model.build()?;
    ctx.prepare_out()?;
    let plan = plan_for(ctx, objective, &model, &risks)?;
    let k = acceptability_constant(&risks)?;
    let s = fisher_and_covariance(&plan, &model)?;
    let w = w_moments(&model, &s.blocks, k)?;
    let sigma0 = model.eval(0.0)?.scale();
    let oc = ctx.cfg.oc;
    let mut ps: Vec<f64> = (1..=oc.points).map(|i| oc.p_max * i as f64 / oc.points as f64).collect();
    ps.push(risks.p_alpha);
    ps.push(risks.p_beta);
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let rows: Vec<Vec<String>> =
        ps.iter().map(|&p| vec![fmt_num(p), fmt_num(oc_probability(p, k, &w, sigma0))]).collect();
    write_csv(&ctx.out.join("oc.csv"), &["p_nc", "L"], &rows)?;
    println!(
        "L(p_alpha = {}) = {:.6}, L(p_beta = {}) = {:.6}",
        risks.p_alpha,
        oc_probability(risks.p_alpha, k, &w, sigma0),
        risks.p_beta,
        oc_probability(risks.p_beta, k, &w, sigma0)
    );
    Ok(())
}

fn fit_rows(fits: &[FitResult]) -> Vec<(String, f64)> {
    let mut rows = Vec::new();
    for (i, f) in fits.iter().enumerate() {
        let tag = format!("{}{i}", f.spec.name());
        for (name, v) in f.spec.param_names().iter().zip(&f.theta_hat) {
            rows.push((format!("{tag}.{name}"), *v));
        }
        rows.push((format!("{tag}.loglik"), f.loglik));
        rows.push((format!("{tag}.aic"), f.aic));
    }
    rows
}

fn cmd_fit(ctx: &Ctx, data: Option<&Path>) -> Result<()> {
    let path = data
        .or(ctx.cfg.data.as_deref())
        .ok_or_else(|| Error::Config("fit needs a data file (--data PATH or `data` in the config)".into()))?;
    let sample = read_sample(path)?;
    ctx.prepare_out()?;
    let fits: Vec<FitResult> = ctx.cfg.links.iter().map(|s| fit_mle(&sample, s, &ctx.cfg.optimizer)).collect::<Result<_>>()?;
    write_csv(&ctx.out.join("fit.csv"), &["parameter", "estimate"], &param_rows(&fit_rows(&fits)))?;
    ctx.write_json("fit.json", &fits)?;
    if fits.len() > 1 {
        let cmp = model_comparison(&fits)?;
        for c in &cmp {
            println!("{}{}: AIC = {:.3} (Δ = {:.3})", c.model, c.index, c.aic, c.delta_aic);
        }
        ctx.write_json("comparison.json", &cmp)?;
    } else {
        println!("{}: AIC = {:.3}", fits[0].spec.name(), fits[0].aic);
    }
    Ok(())
}

fn cmd_simulate_case(ctx: &Ctx) -> Result<()> {
    ctx.prepare_out()?;
    let r = run_case_replications(&ctx.cfg.case, ctx.cfg.optimizer.execution)?;
    let rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|x| vec![x.rep.to_string(), x.model.clone(), fmt_num(x.loglik), fmt_num(x.aic), fmt_num(x.censored_fraction)])
        .collect();
    write_csv(&ctx.out.join("replications.csv"), &["rep", "model", "loglik", "aic", "censored_fraction"], &rows)?;
    ctx.write_json(
        "summary.json",
        &serde_json::json!({
            "summaries": r.summaries,
            "pla_wins": r.pla_wins,
            "paired": r.paired,
            "mean_delta_aic": r.mean_delta_aic,
            "mean_censored_fraction": r.mean_censored_fraction,
            "expected_censored_fraction": r.expected_censored_fraction,
        }),
    )?;
    for s in &r.summaries {
        println!(
            "{:>7}: loglik {:.3} ± {:.3}, AIC {:.3} ± {:.3} ({} fits, {} excluded)",
            s.model, s.mean_loglik, s.sd_loglik, s.mean_aic, s.sd_aic, s.included, s.excluded
        );
    }
    println!("PLA preferred in {}/{} replications; mean ΔAIC {:.3}", r.pla_wins, r.paired, r.mean_delta_aic);
    Ok(())
}

fn cmd_bench_links(ctx: &Ctx) -> Result<()> {
    ctx.prepare_out()?;
    let r = sse_benchmark(ctx.cfg.bench.grid_points)?;
    let rows: Vec<Vec<String>> = r.rows.iter().map(|x| vec![x.model.clone(), fmt_num(x.sse)]).collect();
    write_csv(&ctx.out.join("sse.csv"), &["model", "sse"], &rows)?;
    for x in &r.rows {
        println!("{:>12} {:.4}", x.model, x.sse);
    }
    Ok(())
}

fn cmd_feasibility(ctx: &Ctx) -> Result<()> {
    let risks = ctx.risks()?;
    let model = ctx.cfg.model.build()?;
    let p = ctx.cfg.plan.as_ref().ok_or_else(|| Error::Config("feasibility needs a [plan] section".into()))?;
    // Deliberately not validated: the report describes whatever was supplied.
    let plan = DesignPoint { stresses: p.stresses.clone(), proportions: p.proportions.clone(), n: p.n, censor_time: p.censor_time };
    let k = acceptability_constant(&risks)?;
    ctx.prepare_out()?;
    let f = feasibility_report(&plan, &model, &risks, k);
    let rows = vec![
        ("eq_residual".to_string(), f.eq_residual),
        ("ordering_ok".into(), if f.ordering_ok { 1.0 } else { 0.0 }),
        ("simplex_residual".into(), f.simplex_residual),
        ("w_variance".into(), f.w_variance),
    ];
    write_csv(&ctx.out.join("feasibility.csv"), &["param", "value"], &param_rows(&rows))?;
    for (k, v) in &rows {
        println!("{k} = {v:e}");
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Design { common, objective } => cmd_design(&Ctx::new("design", &common)?, objective),
        Command::KFactor { common } => cmd_k_factor(&Ctx::new("k-factor", &common)?),
        Command::OcCurve { common, objective } => cmd_oc_curve(&Ctx::new("oc-curve", &common)?, objective),
        Command::Fit { common, data } => cmd_fit(&Ctx::new("fit", &common)?, data.as_deref()),
        Command::SimulateCase { common } => cmd_simulate_case(&Ctx::new("simulate-case", &common)?),
        Command::BenchLinks { common } => cmd_bench_links(&Ctx::new("bench-links", &common)?),
        Command::Feasibility { common } => cmd_feasibility(&Ctx::new("feasibility", &common)?),
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code: 0 success, 2 usage or configuration error, 3 numerical failure.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
