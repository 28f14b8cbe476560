//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `LGROWTH_ACCEPTANCE_ONLY=4,10` runs a subset. The replicate-heavy
//! criteria (6, 8, 10) use shortened chains unless
//! `LGROWTH_ACCEPTANCE_FULL=1` asks for the default MCMC settings.

use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lgrowth::config::{McmcSettings, ModelConfig, PriorConfig};
use lgrowth::data::{Dataset, COVARIATE_NAMES};
use lgrowth::diagnostics::{
    covariate_table, coverage_rate, effective_sample_size, score_recovery, summarize, Draws, PosteriorSummary,
};
use lgrowth::engine::{chain_rng, run_chain_from, run_chains, ChainOutput, PreparedData, SamplerOptions};
use lgrowth::oracle::{geweke, geweke_model, least_squares_effects, truncated_normal_moments, TinyModel};
use lgrowth::priors::HierIwState;
use lgrowth::simulator::{default_truth, simulate, SimulationTruth};
use lgrowth::spline::{basis_vector, eval_trajectory, KnotVector};
use lgrowth::stats;
use lgrowth::truncnorm::{round_count, sample_truncated_normal};
use nalgebra::DMatrix;
use rand::Rng;

type Outcome = Result<String, String>;

fn full_settings() -> bool {
    std::env::var("LGROWTH_ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

/// Shortened chains for the criteria that need many fits.
fn replicate_settings(seed: u64) -> McmcSettings {
    if full_settings() {
        return McmcSettings {
            seed,
            ..McmcSettings::default()
        };
    }
    McmcSettings {
        iterations: 4000,
        burn_in: 2000,
        thin: 2,
        chains: 2,
        seed,
        ..McmcSettings::default()
    }
}

fn fit(dataset: &Dataset, config: &ModelConfig, mcmc: &McmcSettings) -> (Vec<ChainOutput>, Vec<PosteriorSummary>) {
    let chains = run_chains(dataset, config, mcmc, &SamplerOptions::default()).expect("fit runs");
    let summary = summarize(&Draws::from_chains(&chains).unwrap()).unwrap();
    (chains, summary)
}

fn find<'a>(summary: &'a [PosteriorSummary], name: &str) -> &'a PosteriorSummary {
    summary.iter().find(|s| s.parameter == name).unwrap_or_else(|| panic!("no {name}"))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(start: Instant, limit: f64, detail: String, ok: bool) -> Outcome {
    let t = start.elapsed().as_secs_f64();
    let timed = t < limit;
    check(ok && timed, format!("{detail}; {t:.1} s (limit {limit} s)"))
}

// 1
fn spline_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = chain_rng(2024, 0);
    let tol = 1e-9;
    let (mut worst_sum, mut worst_cont, mut worst_slope) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let k = rng.random_range(1..=6);
        let mut acc = rng.random_range(5.0..12.0);
        let mut xi = Vec::with_capacity(k);
        for _ in 0..k {
            xi.push(acc);
            acc += rng.random_range(0.1..5.0);
        }
        let knots = KnotVector::new(xi.clone()).unwrap();
        let beta: Vec<f64> = (0..=k).map(|_| rng.random_range(-30.0..30.0)).collect();
        let scale = beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));

        // telescoping
        let age = rng.random_range(0.5..xi[k - 1] + 5.0);
        let b = basis_vector(age, &knots).unwrap();
        worst_sum = worst_sum.max((b.iter().sum::<f64>() - age).abs() / age);

        // continuity at every knot
        for &x in &xi {
            let h = 1e-7 * x;
            let z = eval_trajectory(&beta, &knots, &[x - h, x, x + h]).unwrap();
            let jump = (z[2] - z[1]).abs().max((z[1] - z[0]).abs());
            worst_cont = worst_cont.max((jump - scale * h).max(0.0) / (scale * x));
        }

        // slope inside each segment equals its coefficient
        let seg = rng.random_range(0..=k);
        let lo = if seg == 0 { 0.0 } else { xi[seg - 1] };
        let hi = if seg == k { xi[k - 1] + 5.0 } else { xi[seg] };
        let (a1, a2) = (lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo));
        let z = eval_trajectory(&beta, &knots, &[a1, a2]).unwrap();
        let slope = (z[1] - z[0]) / (a2 - a1);
        worst_slope = worst_slope.max((slope - beta[seg]).abs() / scale);
    }
    let ok = worst_sum <= tol && worst_cont <= tol && worst_slope <= tol;
    within_time(
        start,
        5.0,
        format!(
            "10000 random (age, knots) pairs; max relative error: sum {worst_sum:.1e}, continuity {worst_cont:.1e}, slope {worst_slope:.1e}"
        ),
        ok,
    )
}

// 2
fn tiny_model_oracle() -> Outcome {
    let start = Instant::now();
    let tiny = TinyModel::example();
    let grid = tiny.grid_posterior(4000);
    let data = tiny.dataset().unwrap();
    let cfg = tiny.config();
    let prep = PreparedData::new(&data, &cfg).unwrap();
    let mcmc = McmcSettings {
        iterations: 6000,
        burn_in: 1000,
        thin: 1,
        chains: 4,
        seed: 2,
        ..Default::default()
    };
    let opts = TinyModel::sampler_options(true);
    let chains: Vec<ChainOutput> = (0..mcmc.chains)
        .map(|c| run_chain_from(&prep, &cfg, &mcmc, &opts, c, tiny.initial_state(&prep)).unwrap())
        .collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, target) in [("mu_beta.f1s0", grid.mean_mu0), ("alpha.y", grid.mean_alpha)] {
        let p = chains[0].layout.index_of(name).unwrap();
        let per: Vec<Vec<f64>> = chains.iter().map(|c| c.column(p)).collect();
        let pooled = per.concat();
        let mcse = stats::sd(&pooled) / effective_sample_size(&per).sqrt();
        let m = stats::mean(&pooled);
        let z = (m - target).abs() / mcse;
        ok &= z < 3.0;
        parts.push(format!("{name} {m:.4} vs grid {target:.4} ({z:.2} MCSE)"));
    }
    within_time(start, 60.0, format!("4 x 5000 draws; {}", parts.join(", ")), ok)
}

// 3
fn geweke_test() -> Outcome {
    let start = Instant::now();
    let (cfg, ds) = geweke_model(PriorConfig::default()).unwrap();
    let prep = PreparedData::new(&ds, &cfg).unwrap();
    let n = 4000;
    let g = geweke(&prep, &cfg, &SamplerOptions::default(), n, n, 400, 3).map_err(|e| e.to_string())?;
    let mut worst = (1.0, String::new());
    let mut tested = 0;
    for (p, name) in g.names.iter().enumerate() {
        let compared = ["mu_beta.", "alpha.", "sigma_beta.", "sigma_eps."].iter().any(|s| name.starts_with(s))
            || name == "loading.y2";
        if !compared {
            continue;
        }
        let a: Vec<f64> = g.forward.iter().map(|d| d[p]).collect();
        let b: Vec<f64> = g.successive.iter().map(|d| d[p]).collect();
        // the chain sample counts with its effective size
        let ess = effective_sample_size(std::slice::from_ref(&b)).min(n as f64);
        let ks = stats::ks_two_sample(&a, &b);
        let n_eff = ess * n as f64 / (ess + n as f64);
        let pv = stats::kolmogorov_p_value(ks.statistic, n_eff);
        tested += 1;
        if pv < worst.0 {
            worst = (pv, name.clone());
        }
    }
    within_time(
        start,
        300.0,
        format!(
            "{tested} marginals, 4000 prior draws vs 4000 thinned chain draws; smallest KS p {:.4} ({})",
            worst.0, worst.1
        ),
        worst.0 >= 0.01,
    )
}

// 4 and 5 share one fit
struct RecoveryFit {
    truth: SimulationTruth,
    dataset: Dataset,
    chains: Vec<ChainOutput>,
    summary: Vec<PosteriorSummary>,
    seconds: f64,
}

fn recovery_fit() -> RecoveryFit {
    let start = Instant::now();
    let truth = default_truth();
    let (dataset, _) = simulate(&truth).unwrap();
    let mcmc = McmcSettings {
        store_latent: true,
        seed: 4,
        ..McmcSettings::default()
    };
    let (chains, summary) = fit(&dataset, &truth.model, &mcmc);
    RecoveryFit {
        truth,
        dataset,
        chains,
        summary,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn recovery(f: &RecoveryFit) -> Outcome {
    let rows = score_recovery(&f.summary, &f.truth.named_values()).map_err(|e| e.to_string())?;
    let mu: Vec<_> = rows.iter().filter(|r| r.parameter.starts_with("mu_beta.")).collect();
    let max_z = mu.iter().map(|r| r.z).fold(0.0, f64::max);
    let cov = coverage_rate(&rows);
    let ok = max_z <= 3.0 && cov >= 0.80 && f.seconds <= 1800.0;
    check(
        ok,
        format!(
            "304 subjects, 4 x 20000 iterations; max |mean - truth|/sd over mu_beta {max_z:.2}; 95% HPD coverage {cov:.3} over {} parameters; {:.0} s (limit 1800 s)",
            rows.len(),
            f.seconds
        ),
    )
}

fn augmentation(f: &RecoveryFit) -> Outcome {
    let prep = PreparedData::new(&f.dataset, &f.truth.model).unwrap();
    let cells = prep.count_cells();
    let (mut total, mut bad) = (0usize, 0usize);
    for c in &f.chains {
        for draw in &c.latent {
            for (v, &(o, k)) in draw.iter().zip(&cells) {
                total += 1;
                if round_count(*v).ok().map(|h| h as f64) != prep.value(o, k) {
                    bad += 1;
                }
            }
        }
    }
    let mut rng = chain_rng(5, 0);
    let n = 100_000;
    let mut worst: f64 = 0.0;
    let cases = [
        (0.0, 1.0, f64::NEG_INFINITY, 0.0),
        (3.0, 1.0, 0.0, 1.0),
        (141.3, 25.0, 141.0, 142.0),
        (0.0, 1.0, 7.0, 8.0),
        (-2.0, 4.0, 5.0, f64::INFINITY),
    ];
    for &(m, v, lo, hi) in &cases {
        let x: Vec<f64> = (0..n)
            .map(|_| sample_truncated_normal(m, v, lo, hi, &mut rng).unwrap())
            .collect();
        let (em, ev) = truncated_normal_moments(m, v, lo, hi);
        let sm = stats::mean(&x);
        let sv = stats::variance(&x);
        let m4 = x.iter().map(|y| (y - sm).powi(4)).sum::<f64>() / n as f64;
        let se_m = (sv / n as f64).sqrt();
        let se_v = ((m4 - sv * sv) / n as f64).sqrt();
        worst = worst.max((sm - em).abs() / se_m).max((sv - ev).abs() / se_v);
    }
    check(
        total > 0 && bad == 0 && worst < 3.0,
        format!(
            "{total} stored latent count values, {bad} round to a different count; truncated-normal moments on 5 intervals x 1e5 draws within {worst:.2} se"
        ),
    )
}

// 6
fn missing_data() -> Outcome {
    let mut truth = default_truth();
    truth.seed = 6;
    truth.missingness = vec![0.0; truth.model.outcomes.len()];
    let (full, _) = simulate(&truth).unwrap();
    let mut rng = chain_rng(66, 0);
    let masked = full.masked(|_, _, _| rng.random::<f64>() < 0.3).unwrap();
    let mcmc = replicate_settings(6);
    let (_, a) = fit(&full, &truth.model, &mcmc);
    let (_, b) = fit(&masked, &truth.model, &mcmc);
    let mut worst = (0.0, String::new());
    for s in a.iter().filter(|s| s.parameter.starts_with("mu_beta.")) {
        let other = find(&b, &s.parameter);
        let r = (s.mean - other.mean).abs() / s.sd;
        if r > worst.0 {
            worst = (r, s.parameter.clone());
        }
    }
    let observed = |d: &Dataset| d.occasions().map(|(_, o)| o.values.iter().flatten().count()).sum::<usize>();
    check(
        worst.0 < 1.0,
        format!(
            "{} vs {} observed cells; largest mu_beta shift {:.2} posterior sd ({})",
            observed(&full),
            observed(&masked),
            worst.0,
            worst.1
        ),
    )
}

// 7
fn prior_reproduction() -> Outcome {
    let pr = PriorConfig::default();
    let q = ModelConfig::default().beta_dim();
    let n = 100_000;
    let cdf = |x: f64| stats::half_t_cdf(x, pr.iw_df, pr.iw_scale);
    let mut rng = chain_rng(7, 0);
    let forward: Vec<f64> = (0..n)
        .map(|_| HierIwState::sample_prior(q, pr.iw_df, pr.iw_scale, &mut rng).unwrap().1[(0, 0)].sqrt())
        .collect();
    let ks_f = stats::ks_one_sample(&forward, cdf);

    // prior draws pushed through the sampler's own no-data updates must stay put
    let mut rng = chain_rng(7, 1);
    let zero = DMatrix::zeros(q, q);
    let kernel: Vec<f64> = (0..n)
        .map(|_| {
            let (mut iw, mut sigma) = HierIwState::sample_prior(q, pr.iw_df, pr.iw_scale, &mut rng).unwrap();
            for _ in 0..5 {
                sigma = iw.update(&zero, 0, &mut rng).unwrap();
            }
            sigma[(0, 0)].sqrt()
        })
        .collect();
    let ks_k = stats::ks_one_sample(&kernel, cdf);
    check(
        ks_f.p_value >= 0.01 && ks_k.p_value >= 0.01,
        format!(
            "sqrt(Sigma_beta[0,0]) vs half-t(2, 25), 1e5 draws: forward KS p {:.3}; after 5 no-data Gibbs updates KS p {:.3}",
            ks_f.p_value, ks_k.p_value
        ),
    )
}

// 8
fn horseshoe_shrinkage() -> Outcome {
    let mut truth = default_truth();
    truth.seed = 8;
    for g in &mut truth.parameters.gamma {
        *g = [0.0; 4];
    }
    let (ds, _) = simulate(&truth).unwrap();
    let ols = least_squares_effects(&ds, &truth.model).map_err(|e| e.to_string())?;
    let (_, summary) = fit(&ds, &truth.model, &replicate_settings(8));
    let mut smaller = 0;
    let mut total = 0;
    for (o, row) in truth.model.outcomes.iter().zip(&ols) {
        for (c, ls) in COVARIATE_NAMES.iter().zip(row) {
            let post = find(&summary, &format!("gamma.{}.{c}", o.label)).mean;
            total += 1;
            if post.abs() < ls.abs() {
                smaller += 1;
            }
        }
    }
    let share = smaller as f64 / total as f64;
    check(
        share >= 0.9,
        format!("{smaller} of {total} covariate effects shrink below least squares ({share:.3})"),
    )
}

// 9
fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let exe = env!("CARGO_BIN_EXE_lgrowth");
    let run = |args: &[&str]| {
        let o = Command::new(exe)
            .args(args)
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let p = |name: &str| tmp.path().join(name).to_str().unwrap().to_string();
    for d in ["sim_a", "sim_b"] {
        run(&["simulate", "--seed", "9", "--out", &p(d)]);
    }
    for (d, threads) in [("fit_a", "1"), ("fit_b", "2")] {
        run(&[
            "fit",
            &format!("{}/data.csv", p("sim_a")),
            "--seed",
            "9",
            "--chains",
            "2",
            "--iterations",
            "600",
            "--burnin",
            "200",
            "--thin",
            "2",
            "--threads",
            threads,
            "--out",
            &p(d),
        ]);
    }
    let artifacts = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        m["artifacts"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| {
                let f = a["path"].as_str().unwrap().to_string();
                let bytes = std::fs::read(dir.join(&f)).unwrap();
                (f, bytes)
            })
            .collect()
    };
    let mut compared = 0;
    let mut differing = Vec::new();
    for (a, b) in [("sim_a", "sim_b"), ("fit_a", "fit_b")] {
        let (x, y) = (artifacts(&tmp.path().join(a)), artifacts(&tmp.path().join(b)));
        if x.len() != y.len() {
            differing.push(format!("{a} vs {b}: file lists differ"));
        }
        for ((fx, bx), (_, by)) in x.iter().zip(&y) {
            compared += 1;
            if bx != by {
                differing.push(format!("{a}/{fx}"));
            }
        }
    }
    check(
        differing.is_empty(),
        format!(
            "{compared} artifact pairs from two simulate and two fit runs (1 vs 2 threads); differing: {}",
            if differing.is_empty() { "none".to_string() } else { differing.join(", ") }
        ),
    )
}

// 10
fn report_fidelity() -> Outcome {
    let labels: Vec<String> = ModelConfig::default().outcomes.iter().map(|o| o.label.clone()).collect();
    let mut hits = 0;
    let mut marks = Vec::new();
    for r in 0..10u64 {
        let mut truth = default_truth();
        truth.seed = 1000 + r;
        let (ds, _) = simulate(&truth).unwrap();
        let (_, summary) = fit(&ds, &truth.model, &replicate_settings(2000 + r));
        let cells = covariate_table(&summary, &labels).map_err(|e| e.to_string())?;
        let flagged = cells
            .iter()
            .filter(|c| c.outcome == "y10" && ["forward", "midfielder", "defender"].contains(&c.term.as_str()))
            .filter(|c| c.hpd_excludes_zero)
            .count();
        marks.push(flagged.to_string());
        if flagged == 3 {
            hits += 1;
        }
    }
    check(
        hits >= 8,
        format!(
            "all three y10 position cells flagged in {hits} of 10 replicates (flags per replicate: {})",
            marks.join(" ")
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> = std::env::var("LGROWTH_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |i: usize| only.as_ref().is_none_or(|o| o.contains(&i));
    let mode = if full_settings() { "default" } else { "shortened" };
    let mut err = std::io::stderr();
    let _ = writeln!(err, "acceptance suite ({mode} chains for criteria 6, 8, 10)");

    let mut failed = 0;
    let mut report = |i: usize, title: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(i) {
            return;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let _ = writeln!(std::io::stderr(), "criterion {i:>2} {tag}  {title}: {detail}");
    };

    report(1, "spline invariants", &mut spline_invariants);
    report(2, "tiny model vs grid", &mut tiny_model_oracle);
    report(3, "Geweke conditional correctness", &mut geweke_test);
    if wanted(4) || wanted(5) {
        let f = catch_unwind(recovery_fit);
        let with_fit = |g: fn(&RecoveryFit) -> Outcome| match &f {
            Ok(f) => g(f),
            Err(_) => Err("recovery fit panicked".to_string()),
        };
        report(4, "parameter recovery", &mut || with_fit(recovery));
        report(5, "count augmentation", &mut || with_fit(augmentation));
    }
    report(6, "missing-data robustness", &mut missing_data);
    report(7, "prior reproduction", &mut prior_reproduction);
    report(8, "horseshoe shrinkage", &mut horseshoe_shrinkage);
    report(9, "determinism", &mut determinism);
    report(10, "report fidelity", &mut report_fidelity);

    if failed > 0 {
        let _ = writeln!(std::io::stderr(), "{failed} criteria failed");
        std::process::exit(1);
    }
}
