//! Scenario runner: reads JSON scenario files, runs the named pipeline and
//! writes CSV artifacts plus a `report.json` of pass/fail checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipelines;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::Scenario;
pub use report::{Check, Report};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] lagrangeflow_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn code(&self) -> &'static str {
        match self {
            RunError::Config(_) => "cli.config",
            RunError::Solver(e) => e.code(),
            RunError::Io { .. } => "cli.io",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

/// Built-in fluxes, pressure laws and initial profiles.
pub fn catalog() -> String {
    let entries: [(&str, &[(&str, &str)]); 3] = [
        (
            "fluxes",
            &[
                ("burgers", "f(rho) = rho^2/2"),
                ("cubic", "f(rho) = rho^3"),
                ("lwr", "f(rho) = v_max rho (1 - rho/rho_max)   params: v_max, rho_max"),
                ("polynomial", "f(rho) = sum_k c_k rho^k   params: coeffs (increasing degree)"),
            ],
        ),
        ("pressure laws", &[("power", "p(rho) = kappa rho^alpha   params: kappa, alpha")]),
        (
            "initial profiles",
            &[
                ("constant", "value"),
                ("riemann", "left for x < at, right otherwise   params: left, right, at = 0"),
                ("sine", "mean + amplitude sin(2 pi periods (x - a)/(b - a))   params: mean, amplitude, periods = 1, cosine = false"),
                ("bump", "base + height cos^2(pi (x - center)/(2 width)) on |x - center| < width   params: base, height, center, width"),
            ],
        ),
    ];
    let mut out = String::new();
    for (section, items) in entries {
        out.push_str(section);
        out.push_str(":\n");
        for (name, what) in items {
            out.push_str(&format!("  {name:<12} {what}\n"));
        }
    }
    out.push_str("pipelines:\n  eulerian temple correspondence variational gas nlwe metric-roundtrip\n");
    out
}

/// Runs one scenario and writes its artifacts into `dir`.
pub fn run_scenario(scenario: &Scenario, dir: &Path, timing: bool) -> Result<Report, RunError> {
    let start = Instant::now();
    let outcome = pipelines::execute(scenario)?;
    let wall_time_s = if timing { start.elapsed().as_secs_f64() } else { 0.0 };
    let report = Report {
        scenario: scenario.name.clone(),
        checks: outcome.checks,
        wall_time_s,
    };
    let io = |path: PathBuf| move |source| RunError::Io { path, source };
    std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    for (name, bytes) in &outcome.artifacts {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(io(path.clone()))?;
    }
    let mut text = serde_json::to_vec_pretty(&report).expect("report serialises");
    text.push(b'\n');
    let path = dir.join("report.json");
    std::fs::write(&path, text).map_err(io(path.clone()))?;
    Ok(report)
}

/// Output directory: `out/<name>` under `--out`, else the config's
/// `output_dir`, else `out/<name>`.
pub fn output_dir(scenario: &Scenario, out: Option<&Path>) -> PathBuf {
    match (out, &scenario.output_dir) {
        (Some(root), _) => root.join(&scenario.name),
        (None, Some(dir)) => dir.clone(),
        (None, None) => Path::new("out").join(&scenario.name),
    }
}

pub struct RunOptions {
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub timing: bool,
}

/// Runs every config file and returns the process exit code. One summary
/// line per scenario goes to stdout, errors to stderr, in input order.
pub fn run_files(paths: &[PathBuf], opts: &RunOptions) -> i32 {
    let job = |path: &PathBuf| -> Result<Report, RunError> {
        let scenario = Scenario::load(path)?;
        run_scenario(&scenario, &output_dir(&scenario, opts.out.as_deref()), opts.timing)
    };
    let mut names: Vec<String> = Vec::new();
    for path in paths {
        if let Ok(s) = Scenario::load(path) {
            if names.contains(&s.name) {
                eprintln!("error[cli.config]: scenario name {:?} appears twice", s.name);
                return EXIT_ERROR;
            }
            names.push(s.name);
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error[cli.config]: {e}");
            return EXIT_ERROR;
        }
    };
    let results: Vec<Result<Report, RunError>> = pool.install(|| paths.par_iter().map(job).collect());
    let mut code = EXIT_OK;
    for (path, result) in paths.iter().zip(results) {
        match result {
            Ok(report) => {
                let total = report.checks.len();
                let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                if failed.is_empty() {
                    println!("PASS {} ({total}/{total} checks)", report.scenario);
                } else {
                    println!("FAIL {} ({}/{total} checks): {}", report.scenario, total - failed.len(), failed.join(", "));
                    if code == EXIT_OK {
                        code = EXIT_CHECK_FAILED;
                    }
                }
            }
            Err(e) => {
                eprintln!("error[{}]: {}: {e}", e.code(), path.display());
                code = EXIT_ERROR;
            }
        }
    }
    code
}
