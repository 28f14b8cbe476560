use std::path::Path;

use lgrowth::data::{self, Dataset};
use lgrowth::diagnostics::{self, Draws, PosteriorSummary, RecoveryRow};
use lgrowth::engine::{run_chains, slope_label, ChainOutput, SamplerOptions};
use lgrowth::simulator::simulate as simulate_cohort;
use lgrowth::{parallel, report, RunConfig, SimulationTruth};

use crate::error::CliError;
use crate::manifest::{self, digest_file, FileDigest, OutputDir, RunManifest};
use crate::{McmcArgs, RunArgs};

pub const CONFIG_FILE: &str = "config.json";
pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.json";

/// Configuration after layering file, `LGROWTH_*` variables and flags.
struct Resolved {
    config: RunConfig,
    threads: usize,
    inputs: Vec<FileDigest>,
}

fn resolve(run: &RunArgs, mcmc: &McmcArgs) -> Result<Resolved, CliError> {
    let mut inputs = Vec::new();
    let mut config = match &run.config {
        Some(p) => {
            inputs.push(digest_file(p)?);
            RunConfig::from_file(p)?
        }
        None => RunConfig::default(),
    };
    let m = &mut config.mcmc;
    if let Some(s) = run.seed {
        m.seed = s;
    }
    if let Some(c) = mcmc.chains {
        m.chains = c;
    }
    if let Some(i) = mcmc.iterations {
        m.iterations = i;
    }
    if let Some(b) = mcmc.burn_in {
        m.burn_in = b;
    }
    if let Some(t) = mcmc.thin {
        m.thin = t;
    }
    config.validate()?;
    let threads = mcmc.threads.unwrap_or(config.mcmc.chains);
    if threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    Ok(Resolved {
        config,
        threads,
        inputs,
    })
}

fn config_json(config: &RunConfig) -> String {
    let mut s = config.to_json();
    s.push('\n');
    s
}

fn start_manifest(command: &str, r: &Resolved) -> RunManifest {
    let json = config_json(&r.config);
    RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: manifest::sha256_hex(json.as_bytes()),
        config: serde_json::from_str(&json).expect("config is valid JSON"),
        seed: r.config.mcmc.seed,
        threads: r.threads,
        parallel: parallel::is_parallel(),
        inputs: r.inputs.clone(),
        output_dir: String::new(),
        started: manifest::now(),
        finished: 0,
        artifacts: Vec::new(),
    }
}

pub fn simulate(run: &RunArgs) -> Result<(), CliError> {
    let r = Resolved {
        threads: 1,
        ..resolve(run, &McmcArgs::default())?
    };
    let m = start_manifest("simulate", &r);
    let config = &r.config;
    let truth = SimulationTruth::from_spec(&config.model, &config.simulation, config.mcmc.seed)?;
    let (dataset, _) = simulate_cohort(&truth)?;
    let mut out = OutputDir::create(&run.out, run.force)?;
    out.put(CONFIG_FILE, config_json(config).as_bytes())?;
    out.put_with(DATA_FILE, |w| dataset.write_csv(w))?;
    out.put(TRUTH_FILE, format!("{}\n", truth.to_json()).as_bytes())?;
    out.finish(m)?;
    eprintln!(
        "simulated {} subjects, {} occasions into {}",
        dataset.subjects().len(),
        dataset.n_occasions(),
        run.out.display()
    );
    Ok(())
}

fn fit_chains(dataset: &Dataset, r: &Resolved) -> Result<Vec<ChainOutput>, CliError> {
    let c = &r.config;
    let chains = parallel::with_threads(r.threads, || {
        run_chains(dataset, &c.model, &c.mcmc, &SamplerOptions::default())
    })??;
    Ok(chains)
}

fn draws_file(chain: usize) -> String {
    format!("draws_chain{}.csv", chain + 1)
}

/// Writes one draws file per chain and, when there are enough draws for
/// HPD intervals, the posterior summary. Returns the summary.
fn write_fit(out: &mut OutputDir, chains: &[ChainOutput]) -> Result<Vec<PosteriorSummary>, CliError> {
    for c in chains {
        out.put_with(&draws_file(c.chain), |w| report::write_draws_csv(c, w))?;
    }
    let total: usize = chains.iter().map(|c| c.draws.len()).sum();
    if total < diagnostics::MIN_HPD_DRAWS {
        eprintln!(
            "warning: {total} stored draws, fewer than {}; summary skipped",
            diagnostics::MIN_HPD_DRAWS
        );
        return Ok(Vec::new());
    }
    let summary = diagnostics::summarize(&Draws::from_chains(chains)?)?;
    out.put_with("summary.csv", |w| report::write_summary_csv(&summary, w))?;
    Ok(summary)
}

pub fn fit(data: &Path, run: &RunArgs, mcmc: &McmcArgs) -> Result<(), CliError> {
    let mut r = resolve(run, mcmc)?;
    let bytes = std::fs::read(data).map_err(|e| CliError::io(data, e))?;
    r.inputs.push(digest_file(data)?);
    let dataset = Dataset::parse_csv(&bytes[..], &r.config.model.outcomes)?;
    let m = start_manifest("fit", &r);
    let chains = fit_chains(&dataset, &r)?;
    let mut out = OutputDir::create(&run.out, run.force)?;
    out.put(CONFIG_FILE, config_json(&r.config).as_bytes())?;
    out.put(DATA_FILE, &bytes)?;
    write_fit(&mut out, &chains)?;
    out.finish(m)?;
    eprintln!(
        "fitted {} chains, {} draws each, into {}",
        chains.len(),
        r.config.mcmc.n_draws(),
        run.out.display()
    );
    Ok(())
}

fn write_scorecard(rows: &[RecoveryRow]) -> Vec<u8> {
    let mut s = String::from("parameter,truth,mean,sd,z,covered\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.parameter, r.truth, r.mean, r.sd, r.z, r.covered
        ));
    }
    s.into_bytes()
}

pub fn recover(run: &RunArgs, mcmc: &McmcArgs) -> Result<(), CliError> {
    let r = resolve(run, mcmc)?;
    let c = &r.config;
    let truth = SimulationTruth::from_spec(&c.model, &c.simulation, c.mcmc.seed)?;
    let (dataset, _) = simulate_cohort(&truth)?;
    let m = start_manifest("recover", &r);
    let chains = fit_chains(&dataset, &r)?;
    let mut out = OutputDir::create(&run.out, run.force)?;
    out.put(CONFIG_FILE, config_json(c).as_bytes())?;
    out.put_with(DATA_FILE, |w| dataset.write_csv(w))?;
    out.put(TRUTH_FILE, format!("{}\n", truth.to_json()).as_bytes())?;
    let summary = write_fit(&mut out, &chains)?;
    if summary.is_empty() {
        return Err(CliError::Validation("recovery needs stored draws".into()));
    }
    let rows = diagnostics::score_recovery(&summary, &truth.named_values())?;
    out.put("scorecard.csv", &write_scorecard(&rows))?;
    out.finish(m)?;
    let mu: Vec<&RecoveryRow> = rows.iter().filter(|r| r.parameter.starts_with("mu_beta.")).collect();
    let max_z = mu.iter().map(|r| r.z).fold(0.0, f64::max);
    println!(
        "coverage {:.3} over {} parameters; mu_beta coverage {:.3}, max |mean - truth|/sd {:.2}",
        diagnostics::coverage_rate(&rows),
        rows.len(),
        mu.iter().filter(|r| r.covered).count() as f64 / mu.len().max(1) as f64,
        max_z
    );
    Ok(())
}

pub fn report(fit_dir: &Path, out_dir: &Path, force: bool) -> Result<(), CliError> {
    let fm = manifest::verify(fit_dir)?;
    if fm.command != "fit" && fm.command != "recover" {
        return Err(CliError::Validation(format!(
            "{} holds a `{}` run, not a fit",
            fit_dir.display(),
            fm.command
        )));
    }
    let read = |name: &str| {
        let p = fit_dir.join(name);
        std::fs::read(&p).map_err(|e| CliError::io(&p, e))
    };
    let config = RunConfig::from_json(&String::from_utf8_lossy(&read(CONFIG_FILE)?))?;
    let dataset = Dataset::parse_csv(&read(DATA_FILE)?[..], &config.model.outcomes)?;
    let draw_files: Vec<Vec<u8>> = fm
        .artifacts
        .iter()
        .filter(|a| a.path.starts_with("draws_chain"))
        .map(|a| read(&a.path))
        .collect::<Result<_, _>>()?;
    if draw_files.is_empty() {
        return Err(CliError::Corrupt(format!("{} lists no draws files", fit_dir.display())));
    }
    let draws = report::read_draws_csv(draw_files.iter().map(|b| &b[..]).collect())?;
    if draws.total_draws() == 0 {
        return Err(CliError::Validation("fit stored no draws".into()));
    }

    let inputs = vec![digest_file(&fit_dir.join(manifest::MANIFEST))?];
    let r = Resolved {
        config: config.clone(),
        threads: 1,
        inputs,
    };
    let m = start_manifest("report", &r);
    let mut out = OutputDir::create(out_dir, force)?;

    let summary = diagnostics::summarize(&draws)?;
    out.put_with("summary.csv", |w| report::write_summary_csv(&summary, w))?;
    let labels: Vec<String> = config.model.outcomes.iter().map(|o| o.label.clone()).collect();
    let cells = diagnostics::covariate_table(&summary, &labels)?;
    out.put_with("covariates.csv", |w| report::write_covariates_csv(&cells, w))?;

    let b = config.model.n_segments();
    let q = config.model.beta_dim();
    let f = config.model.n_facets();
    let ages = diagnostics::default_age_grid();
    let mut curves = vec![("".to_string(), "population".to_string(), "mu_beta".to_string())];
    curves.extend(
        config
            .mcmc
            .tracked_subjects
            .iter()
            .map(|id| (format!("_{id}"), format!("subject {id}"), format!("beta.{id}"))),
    );
    for (suffix, title, prefix) in curves {
        let idx: Vec<usize> = (0..q)
            .map(|j| {
                let name = format!("{prefix}.{}", slope_label(j, b));
                draws
                    .index_of(&name)
                    .ok_or_else(|| CliError::Corrupt(format!("draws lack {name}")))
            })
            .collect::<Result<_, _>>()?;
        let rows: Vec<Vec<f64>> = draws
            .chains
            .iter()
            .flatten()
            .map(|d| idx.iter().map(|&p| d[p]).collect())
            .collect();
        for band in diagnostics::trajectory_band(&rows, &config.model.knots, f, &ages)? {
            let stem = format!("trajectory{suffix}_{}", band.facet);
            out.put_with(&format!("{stem}.csv"), |w| report::write_trajectory_csv(&band, w))?;
            let svg = report::trajectory_svg(&band, &format!("Facet {} {title} trajectory", band.facet));
            out.put(&format!("{stem}.svg"), svg.as_bytes())?;
        }
    }

    let rho = diagnostics::spearman_matrix(&dataset, |_| true);
    out.put_with("spearman.csv", |w| report::write_spearman_csv(&rho, w))?;
    let flagged = cells.iter().filter(|c| c.hpd_excludes_zero).count();
    out.finish(m)?;
    eprintln!(
        "report for {} draws written to {}; {flagged} of {} covariate cells exclude zero",
        draws.total_draws(),
        out_dir.display(),
        cells.len()
    );
    Ok(())
}

pub fn summarize(data: &Path, run: &RunArgs) -> Result<(), CliError> {
    let mut r = resolve(run, &McmcArgs::default())?;
    r.threads = 1;
    r.inputs.push(digest_file(data)?);
    let dataset = Dataset::read_csv(data, &r.config.model.outcomes)?;
    let m = start_manifest("summarize", &r);
    let rows = data::summarize(&dataset)?;
    let rho = diagnostics::spearman_matrix(&dataset, |_| true);
    let mut out = OutputDir::create(&run.out, run.force)?;
    out.put_with("outcomes.csv", |w| data::write_summary_csv(&rows, w))?;
    out.put_with("spearman.csv", |w| report::write_spearman_csv(&rho, w))?;
    out.finish(m)?;
    Ok(())
}
