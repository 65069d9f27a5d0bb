use std::fs;
use std::path::Path;

use altsp::cli::{parse_config, read_sample, run_command, RunConfig};
use altsp::dist::{simulate_censored, LevelSpec, Status, WeibullParams};
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    run_command(std::iter::once("altsp").chain(args.iter().copied()))
}

fn read_rows(path: &Path) -> Vec<(String, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| {
        let rec = rec.unwrap();
        (rec[0].to_string(), rec[1].parse().unwrap())
    }).collect()
}

const FAST: &str = "[optimizer]\nrestarts = 1\nscreen_points = 40\ninner_max_evals = 600\n";

#[test]
fn k_factor_preset() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("k");
    assert_eq!(run(&["k-factor", "--preset", "case1", "--out", out.to_str().unwrap()]), 0);
    let rows = read_rows(&out.join("k.csv"));
    assert_eq!(rows[0].0, "k");
    assert!((rows[0].1 - 3.1293).abs() < 1e-3);
    let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(names, ["k", "z_alpha", "z_one_minus_beta", "u_alpha", "u_beta"]);
    let prov: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 0);
    assert_eq!(prov["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("x");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["k-factor", "--preset", "case9", "--out", o]), 2);
    assert_eq!(run(&["k-factor", "--out", o]), 2, "risks are required");
    let cfg = d.path().join("bad.toml");
    fs::write(&cfg, "preset = \"case1\"\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["k-factor", "--config", cfg.to_str().unwrap(), "--out", o]), 2);
    fs::write(&cfg, "preset = \"case1\"\n[cost]\n").unwrap();
    assert_eq!(run(&["design", "--objective", "cost", "--config", cfg.to_str().unwrap(), "--out", o]), 2);
    assert_eq!(run(&["fit", "--out", o]), 2, "fit needs data");
}

#[test]
fn singular_plan_exits_3() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.toml");
    // Two levels cannot identify a three-knot location link.
    fs::write(
        &cfg,
        "preset = \"case1\"\n[plan]\nstresses = [0.0, 1.0]\nproportions = [0.5, 0.5]\nn = 50.0\ncensor_time = 1.0\n",
    )
    .unwrap();
    let out = d.path().join("o");
    assert_eq!(run(&["oc-curve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 3);
}

#[test]
fn design_variance_writes_plan_rows() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, FAST).unwrap();
    let out = d.path().join("design");
    let args = ["design", "--objective", "variance", "--preset", "case5", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(run(&args), 0);
    let rows = read_rows(&out.join("plan.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    for want in ["n", "xi0", "xi4", "n0", "n4", "ln_tau0", "tau0", "V_min"] {
        assert!(names.contains(&want), "missing {want} in {names:?}");
    }
    let get = |k: &str| rows.iter().find(|r| r.0 == k).unwrap().1;
    let alloc: f64 = (0..5).map(|i| get(&format!("n{i}"))).sum();
    assert_eq!(alloc, get("n").round());
    assert!((get("tau0").ln() - get("ln_tau0")).abs() < 1e-12);
    assert!(get("constraint_residual").abs() <= 1e-4);

    // Same seed, same bytes.
    let again = d.path().join("again");
    let mut args2 = args;
    args2[8] = again.to_str().unwrap();
    assert_eq!(run(&args2), 0);
    assert_eq!(fs::read(out.join("plan.csv")).unwrap(), fs::read(again.join("plan.csv")).unwrap());
}

#[test]
fn oc_curve_hits_risk_points() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, FAST).unwrap();
    let out = d.path().join("oc");
    assert_eq!(run(&["oc-curve", "--preset", "case2", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let rows: Vec<(f64, f64)> = read_rows(&out.join("oc.csv")).into_iter().map(|(p, l)| (p.parse().unwrap(), l)).collect();
    let at = |p: f64| rows.iter().find(|r| r.0 == p).unwrap().1;
    assert!((at(0.032) - 0.95).abs() < 5e-3);
    assert!((at(0.094) - 0.10).abs() < 5e-3);
    assert!(rows.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 <= w[0].1));
}

#[test]
fn feasibility_reports_residuals() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(
        &cfg,
        "preset = \"case1\"\n[plan]\nstresses = [0.0, 0.5, 0.4, 1.0]\nproportions = [0.2, 0.3, 0.3, 0.3]\nn = 80.0\ncensor_time = 1.0\n",
    )
    .unwrap();
    let out = d.path().join("f");
    // Unordered stresses fail validation at parse time.
    assert_eq!(run(&["feasibility", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    fs::write(
        &cfg,
        "preset = \"case1\"\n[plan]\nstresses = [0.0, 0.4, 0.7, 1.0]\nproportions = [0.2, 0.3, 0.2, 0.3]\nn = 80.0\ncensor_time = 1.0\n",
    )
    .unwrap();
    assert_eq!(run(&["feasibility", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let rows = read_rows(&out.join("feasibility.csv"));
    assert_eq!(rows[1], ("ordering_ok".to_string(), 1.0));
    assert!(rows[2].1.abs() < 1e-15);
    assert!(rows[0].1.is_finite() && rows[3].1 > 0.0);
}

fn write_data(path: &Path) {
    let levels: Vec<LevelSpec> = [0.0, 0.5, 1.0]
        .iter()
        .map(|&x| LevelSpec { stress: x, params: WeibullParams::new(2.0 + x, (-(3.0 - 2.0 * x)).exp()).unwrap(), units: 150 })
        .collect();
    let s = simulate_censored(&levels, 25.0, 11).unwrap();
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["stress", "log_time", "status"]).unwrap();
    for g in s.groups() {
        for o in &g.observations {
            let st = if o.status == Status::Failed { "failed" } else { "censored" };
            w.write_record([format!("{:.16e}", g.stress), format!("{:.16e}", o.log_time), st.to_string()]).unwrap();
        }
    }
    w.flush().unwrap();
}

#[test]
fn fit_reads_data_and_reports() {
    let d = TempDir::new().unwrap();
    let data = d.path().join("data.csv");
    write_data(&data);
    let sample = read_sample(&data).unwrap();
    assert_eq!(sample.groups().len(), 3);
    assert_eq!(sample.len(), 450);
    assert!((sample.censor_time() - 25.0).abs() < 1e-12);

    let out = d.path().join("fit");
    assert_eq!(run(&["fit", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let rows = read_rows(&out.join("fit.csv"));
    let get = |k: &str| rows.iter().find(|r| r.0 == k).unwrap_or_else(|| panic!("{k}")).1;
    // One-segment PLA truth: μ = 3 − 2ξ, ln σ = −ln(2 + ξ).
    assert!((get("pla0.gamma_mu[0]") - 3.0).abs() < 0.3);
    assert!((get("pla0.gamma_mu[1]") - 1.0).abs() < 0.3);
    assert!((get("pla0.gamma_sigma[0]") + 2f64.ln()).abs() < 0.2);
    let ll = get("pla0.loglik");
    assert!((get("pla0.aic") - (-2.0 * ll + 8.0)).abs() < 1e-9);
    assert!(out.join("comparison.json").exists());

    fs::write(d.path().join("bad.csv"), "stress,log_time,status\n0.0,1.0,broken\n").unwrap();
    assert_eq!(run(&["fit", "--data", d.path().join("bad.csv").to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn bench_links_and_case_outputs() {
    let d = TempDir::new().unwrap();
    let out = d.path().join("b");
    assert_eq!(run(&["bench-links", "--out", out.to_str().unwrap()]), 0);
    let rows = read_rows(&out.join("sse.csv"));
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0].0, "linear");

    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "[case]\nreps = 3\nn_per_level = 20\n").unwrap();
    let run_case = |dir: &str| {
        let o = d.path().join(dir);
        assert_eq!(run(&["simulate-case", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", o.to_str().unwrap()]), 0);
        fs::read_to_string(o.join("replications.csv")).unwrap()
    };
    let a = run_case("c1");
    assert_eq!(a.lines().next().unwrap(), "rep,model,loglik,aic,censored_fraction");
    assert_eq!(a.lines().count(), 7);
    assert_eq!(a, run_case("c2"));
}

#[test]
fn config_file_round_trip_and_hash() {
    let d = TempDir::new().unwrap();
    let p = d.path().join("c.toml");
    let text = "seed = 3\npreset = \"case4\"\n[fixed]\nm = 3\n[cost]\nc_t = 0.09\n";
    fs::write(&p, text).unwrap();
    let cfg = parse_config(&p).unwrap();
    assert_eq!(cfg.fixed.pi0, 0.20);
    assert_eq!(cfg.fixed.m, 3);
    fs::write(&p, cfg.to_toml().unwrap()).unwrap();
    assert_eq!(parse_config(&p).unwrap(), cfg);
    assert_eq!(RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);

    let hash = |body: &str, dir: &str| {
        fs::write(&p, body).unwrap();
        let o = d.path().join(dir);
        assert_eq!(run(&["k-factor", "--config", p.to_str().unwrap(), "--out", o.to_str().unwrap()]), 0);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join("provenance.json")).unwrap()).unwrap();
        (v["config_sha256"].as_str().unwrap().to_string(), v["seed"].as_u64().unwrap())
    };
    let (h1, s1) = hash(text, "h1");
    let (h2, _) = hash(text, "h2");
    let (h3, _) = hash(&format!("{text}\n"), "h3");
    assert_eq!(h1, h2);
    assert_ne!(h1, h3);
    assert_eq!(s1, 3);
}
