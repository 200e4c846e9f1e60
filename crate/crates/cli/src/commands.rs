//! Subcommand implementations. Each returns the process exit status.

use crate::run_config::RunConfig;
use enkf_lab_core::csv;
use enkf_lab_core::kalman::{self, CovarianceForm, KalmanTrajectory};
use enkf_lab_core::linalg::Vector;
use enkf_lab_core::model::{simulate_path, PathSample};
use enkf_lab_core::rng::{self, SeedTree, GAUSSIAN_TAG, GENERATOR_TAG};
use enkf_lab_core::{FilterRun, ModelParams, RiccatiContext};
use enkf_lab_harness::report::{TOOL_NAME, TOOL_VERSION};
use enkf_lab_harness::{run_study, HarnessError, Result, Runner};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct Invocation {
    pub command: &'static str,
    pub config: RunConfig,
    pub overrides: Vec<String>,
    pub out: PathBuf,
    pub jobs: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    generator: &'a str,
    gaussian_transform: &'a str,
    master_seed: u64,
    config_sha256: String,
    overrides: &'a [String],
    jobs: usize,
    wall_clock_seconds: f64,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    #[serde(flatten)]
    config: &'a RunConfig,
    overrides: &'a [String],
    generator: &'a str,
    gaussian_transform: &'a str,
    version: &'a str,
}

fn write_file(dir: &Path, name: &str, body: &str, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), body)?;
    outputs.push(name.to_string());
    Ok(())
}

fn finish(inv: &Invocation, started: Instant, mut outputs: Vec<String>, echo_config: bool) -> Result<()> {
    if echo_config {
        let echo = ConfigEcho {
            config: &inv.config,
            overrides: &inv.overrides,
            generator: GENERATOR_TAG,
            gaussian_transform: GAUSSIAN_TAG,
            version: TOOL_VERSION,
        };
        write_file(&inv.out, "config.json", &serde_json::to_string_pretty(&echo)?, &mut outputs)?;
    }
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        command: inv.command,
        generator: GENERATOR_TAG,
        gaussian_transform: GAUSSIAN_TAG,
        master_seed: inv.config.seed(),
        config_sha256: rng::sha256_hex(serde_json::to_string(&inv.config)?.as_bytes()),
        overrides: &inv.overrides,
        jobs: inv.jobs,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outputs,
    };
    std::fs::write(inv.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn params(inv: &Invocation) -> Result<ModelParams> {
    Ok(inv.config.model.clone().into_params()?)
}

fn path_csv(label: &str, rows: &[Vector]) -> String {
    let len = rows.first().map_or(0, |v| v.len());
    let mut out = String::from("step");
    csv::vector_header(&mut out, label, len);
    out.push('\n');
    for (k, v) in rows.iter().enumerate() {
        let _ = write!(out, "{k}");
        csv::push_entries(&mut out, v.iter().copied());
        out.push('\n');
    }
    out
}

fn sample_path(inv: &Invocation, params: &ModelParams) -> PathSample {
    simulate_path(params, inv.config.steps(), inv.config.seed())
}

pub fn simulate(inv: &Invocation) -> Result<i32> {
    let started = Instant::now();
    let params = params(inv)?;
    std::fs::create_dir_all(&inv.out)?;
    let path = sample_path(inv, &params);
    let mut outputs = Vec::new();
    write_file(&inv.out, "states.csv", &path_csv("x", &path.states), &mut outputs)?;
    write_file(&inv.out, "observations.csv", &path_csv("y", &path.observations), &mut outputs)?;
    finish(inv, started, outputs, true)?;
    println!("wrote {} steps to {}", path.states.len(), inv.out.display());
    Ok(0)
}

fn exact_filter(inv: &Invocation, params: &ModelParams, path: &PathSample) -> Result<KalmanTrajectory> {
    let steps = inv.config.steps();
    Ok(kalman::kf_run(params, &path.observations[..steps], CovarianceForm::Standard)?)
}

pub fn kalman(inv: &Invocation) -> Result<i32> {
    let started = Instant::now();
    let params = params(inv)?;
    std::fs::create_dir_all(&inv.out)?;
    let path = sample_path(inv, &params);
    let traj = exact_filter(inv, &params, &path)?;
    let mut outputs = Vec::new();
    write_file(&inv.out, "observations.csv", &path_csv("y", &path.observations), &mut outputs)?;
    write_file(&inv.out, "kalman.csv", &traj.to_csv(), &mut outputs)?;
    finish(inv, started, outputs, true)?;
    println!("wrote {} filter steps to {}", traj.states.len(), inv.out.display());
    Ok(0)
}

fn push_optional(out: &mut String, values: Option<impl Iterator<Item = f64>>, len: usize) {
    match values {
        Some(v) => csv::push_entries(out, v),
        None => csv::push_blanks(out, len),
    }
}

pub fn enkf(inv: &Invocation) -> Result<i32> {
    let started = Instant::now();
    let params = params(inv)?;
    let d = params.state_dim();
    let backend = inv.config.backend();
    let n_ens = inv.config.ensemble_size();
    let mut rng = SeedTree::new(inv.config.seed()).stream("enkf-run", &[]);
    let mut run = FilterRun::init(backend, &params, n_ens, &mut rng)?;
    std::fs::create_dir_all(&inv.out)?;
    let path = sample_path(inv, &params);
    let traj = exact_filter(inv, &params, &path)?;

    let mut out = String::from("step,backend");
    csv::vector_header(&mut out, "mean", d);
    csv::matrix_header(&mut out, "cov", d, d);
    csv::vector_header(&mut out, "upd_mean", d);
    csv::matrix_header(&mut out, "upd_cov", d, d);
    csv::vector_header(&mut out, "kf_mean", d);
    csv::matrix_header(&mut out, "kf_cov", d, d);
    csv::vector_header(&mut out, "kf_upd_mean", d);
    csv::matrix_header(&mut out, "kf_upd_cov", d, d);
    out.push('\n');
    for (k, exact) in traj.states.iter().enumerate() {
        let mean = run.mean().cloned();
        let cov = run.cov().matrix().clone();
        let update = if k < inv.config.steps() {
            run.step(&params, &path.observations[k], &mut rng)?;
            Some((run.upd_mean().cloned(), run.upd_cov().map(|p| p.matrix().clone())))
        } else {
            None
        };
        let _ = write!(out, "{k},{}", backend.tag());
        push_optional(&mut out, mean.as_ref().map(|m| m.iter().copied()), d);
        csv::push_entries(&mut out, csv::row_major(&cov));
        let (upd_mean, upd_cov) = update.unwrap_or((None, None));
        push_optional(&mut out, upd_mean.as_ref().map(|m| m.iter().copied()), d);
        push_optional(&mut out, upd_cov.as_ref().map(csv::row_major), d * d);
        csv::push_entries(&mut out, exact.pred_mean.iter().copied());
        csv::push_entries(&mut out, csv::row_major(exact.pred_cov.matrix()));
        push_optional(&mut out, exact.upd_mean.as_ref().map(|m| m.iter().copied()), d);
        push_optional(&mut out, exact.upd_cov.as_ref().map(|p| csv::row_major(p.matrix())), d * d);
        out.push('\n');
    }
    let mut outputs = Vec::new();
    write_file(&inv.out, "observations.csv", &path_csv("y", &path.observations), &mut outputs)?;
    write_file(&inv.out, "enkf.csv", &out, &mut outputs)?;
    finish(inv, started, outputs, true)?;
    println!("wrote {} {} steps (N={n_ens}) to {}", traj.states.len(), backend.tag(), inv.out.display());
    Ok(0)
}

pub fn riccati(inv: &Invocation) -> Result<i32> {
    let started = Instant::now();
    let params = params(inv)?;
    let ctx = RiccatiContext::new(&params)?;
    std::fs::create_dir_all(&inv.out)?;
    let mut outputs = Vec::new();
    write_file(&inv.out, "riccati.json", &ctx.to_json()?, &mut outputs)?;
    finish(inv, started, outputs, true)?;
    println!("fixed point reached in {} iterations, closed-loop spectral radius {:.12}", ctx.iterations(), ctx.rho());
    Ok(0)
}

pub fn study(inv: &Invocation) -> Result<i32> {
    let started = Instant::now();
    let cfg = inv.config.to_study()?;
    let report = run_study(&cfg, Runner::new(inv.jobs))?;
    let written = report.write(&inv.out, &cfg)?;
    let outputs = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    finish(inv, started, outputs, false)?;
    for v in &report.verdicts {
        println!("{} {} observed={:.6e} ({})", if v.passed { "PASS" } else { "FAIL" }, v.name, v.observed, v.criterion);
    }
    if report.passed {
        println!("study {} passed; report in {}", cfg.study, inv.out.display());
        Ok(0)
    } else {
        println!("study {} FAILED; report in {}", cfg.study, inv.out.display());
        Ok(1)
    }
}

pub fn missing_config() -> HarnessError {
    HarnessError::Config("--config <path> is required".into())
}
