//! Batch front end behind the `pdv` binary.
//!
//! Each command reads one JSON config and writes its outputs into the
//! configured directory. Outputs depend only on the config, never on the
//! worker count or on timing.
//!
//! Exit codes: 0 ok, 2 config error, 3 runtime failure, 4 a check failed,
//! 5 a check was inconclusive.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

pub use config::{CheckSpec, Format, Resolved, ResolvedModel, RunConfig};

use crate::engine::{noise_for_path, simulate_path, PathRecord};
use crate::mc::{
    self, check_martingale, check_moment_bound, check_nonexplosion, check_positivity,
    check_positivity_failure_4f, check_tilted_drift_bound, convergence_study, summarize_record,
    CheckReport, ConvergenceOptions, EnsembleSummary, MartingaleOptions, McError, MomentBound,
    MomentOptions, PositivityFailureOptions, TiltedDriftOptions, Verdict,
};
use crate::model::{FactorModel, SimConfig, VolFunctional};
use crate::theory::{
    self, counterexample_4f, gronwall_constants_2f, gronwall_constants_4f, growth_constants,
    growth_constants_2f, positivity_condition_2f, positivity_condition_4f, tilted_bound_constants,
    CounterexampleOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_FAILED: i32 = 4;
pub const EXIT_INCONCLUSIVE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Files written by a command and its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Verify,
    Constants,
}

/// Runs `command` on the config at `path`, reporting errors on stderr; returns the exit code.
pub fn execute(command: Command, path: &Path) -> i32 {
    let result = match command {
        Command::Simulate => cmd_simulate(path),
        Command::Verify => cmd_verify(path),
        Command::Constants => cmd_constants(path),
    };
    match result {
        Ok(o) => o.exit_code,
        Err(e) => {
            eprintln!("pdv: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path) -> Result<Resolved, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text)?.resolve()
}

fn output_dir(r: &Resolved) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&r.config.output.directory);
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("output.directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn workers() -> Option<usize> {
    mc::workers_from_env()
}

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub const CSV_HEADER: &str = "t,r1_0,r1_1,r2_0,r2_1,sigma,y,x";

/// One row per grid point; absent components and `y` are left empty.
pub fn trajectory_csv<M: FactorModel<f64>>(
    model: &M,
    record: &PathRecord<f64, M::State>,
) -> String {
    let mut out = String::with_capacity(record.len() * 200);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let cell = |xs: &[f64], j: usize| xs.get(j).map_or(String::new(), |&v| num(v));
    for i in 0..record.len() {
        let s = &record.states[i];
        let (r1, r2) = (model.r1(s), model.r2(s));
        let y = record.y.as_ref().map_or(String::new(), |ys| num(ys[i]));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(record.times[i]),
            cell(r1, 0),
            cell(r1, 1),
            cell(r2, 0),
            cell(r2, 1),
            num(record.sigma[i]),
            y,
            num(record.x[i]),
        );
    }
    out
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    t: &'a [f64],
    r1: Vec<Vec<f64>>,
    r2: Vec<Vec<f64>>,
    sigma: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<&'a [f64]>,
    x: &'a [f64],
    nu: &'a [f64],
    ladder: &'a [f64],
    monitors: &'a crate::engine::Monitors<f64>,
}

fn trajectory_json<M: FactorModel<f64>>(
    model: &M,
    record: &PathRecord<f64, M::State>,
) -> Result<String, CliError> {
    let per_component = |pick: &dyn Fn(&M::State) -> Vec<f64>| -> Vec<Vec<f64>> {
        let width = record.states.first().map_or(0, |s| pick(s).len());
        (0..width)
            .map(|j| record.states.iter().map(|s| pick(s)[j]).collect())
            .collect()
    };
    let doc = TrajectoryJson {
        t: &record.times,
        r1: per_component(&|s| model.r1(s).to_vec()),
        r2: per_component(&|s| model.r2(s).to_vec()),
        sigma: &record.sigma,
        y: record.y.as_deref(),
        x: &record.x,
        nu: &record.nu,
        ladder: &record.ladder,
        monitors: &record.monitors,
    };
    to_json(&doc)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    config: &'a RunConfig,
    summary: EnsembleSummary,
    files: Vec<String>,
}

const SIMULATE_CHUNK: usize = 64;

fn simulate_model<M: FactorModel<f64>>(
    model: &M,
    initial: M::State,
    functional: &VolFunctional<f64>,
    r: &Resolved,
    dir: &Path,
) -> Result<Outcome, CliError> {
    let sim = &r.sim;
    let formats = &r.config.output.formats;
    let mut files = Vec::new();
    let mut names = Vec::new();
    let mut summary = EnsembleSummary::new(
        (model.r1_rates().len(), model.r2_rates().len()),
        &sim.explosion_ladder,
    );
    let mut start = 0;
    while start < sim.paths {
        let len = SIMULATE_CHUNK.min(sim.paths - start);
        let records = mc::map_paths(len, |k| {
            Ok(simulate_path(
                model,
                functional,
                sim,
                Some(initial),
                noise_for_path(sim, start + k),
            )?)
        })?;
        for (k, rec) in records.iter().enumerate() {
            let i = start + k;
            summary.merge(&summarize_record(model, rec));
            if formats.contains(&Format::Csv) {
                let name = format!("path_{i:05}.csv");
                write_file(dir.join(&name), &trajectory_csv(model, rec), &mut files)?;
                names.push(name);
            }
            if formats.contains(&Format::Json) {
                let name = format!("path_{i:05}.json");
                write_file(dir.join(&name), &trajectory_json(model, rec)?, &mut files)?;
                names.push(name);
            }
        }
        start += len;
    }
    let doc = SimulateSummary {
        config: &r.config,
        summary,
        files: names,
    };
    write_file(dir.join("summary.json"), &to_json(&doc)?, &mut files)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        files,
    })
}

/// Writes one trajectory file per path and `summary.json`.
pub fn cmd_simulate(path: &Path) -> Result<Outcome, CliError> {
    let r = load(path)?;
    let dir = output_dir(&r)?;
    mc::with_workers(workers(), || match r.model {
        ResolvedModel::TwoFactor(p, s) => simulate_model(&p, s, &r.functional, &r, &dir),
        ResolvedModel::FourFactor(p, s) => simulate_model(&p, s, &r.functional, &r, &dir),
    })?
}

fn overridden(
    base: &SimConfig<f64>,
    paths: Option<usize>,
    dt: Option<f64>,
    horizon: Option<f64>,
) -> SimConfig<f64> {
    let mut c = base.clone();
    if let Some(p) = paths {
        c.paths = p;
    }
    if let Some(d) = dt {
        c.dt = d;
    }
    if let Some(h) = horizon {
        c.horizon = h;
    }
    c
}

fn generic_check<M: MomentBound>(
    model: &M,
    initial: M::State,
    f: &VolFunctional<f64>,
    sim: &SimConfig<f64>,
    spec: &CheckSpec,
) -> Result<Option<CheckReport>, McError> {
    Ok(Some(match spec {
        CheckSpec::Nonexplosion { paths, dt, horizon } => check_nonexplosion(
            model,
            f,
            &overridden(sim, *paths, *dt, *horizon),
            Some(initial),
        )?,
        CheckSpec::MomentBound { paths, dt, t } => {
            let c = overridden(sim, *paths, *dt, None);
            let opts = MomentOptions {
                t: t.unwrap_or(MomentOptions::default().t),
            };
            check_moment_bound(model, f, &c, Some(initial), opts)?
        }
        CheckSpec::Convergence {
            paths,
            horizon,
            dt_ladder,
            reference_dt,
        } => {
            let c = overridden(sim, *paths, None, *horizon);
            let d = ConvergenceOptions::default();
            let opts = ConvergenceOptions {
                dt_ladder: dt_ladder.clone().unwrap_or(d.dt_ladder),
                reference_dt: reference_dt.unwrap_or(d.reference_dt),
                order_range: d.order_range,
            };
            convergence_study(model, f, &c, Some(initial), &opts)?
        }
        _ => return Ok(None),
    }))
}

fn run_check(r: &Resolved, spec: &CheckSpec) -> Result<CheckReport, McError> {
    let f = &r.functional;
    let sim = &r.sim;
    let name = spec.name();
    match r.model {
        ResolvedModel::TwoFactor(p, s) => {
            if let Some(report) = generic_check(&p, s, f, sim, spec)? {
                return Ok(report);
            }
            match spec {
                CheckSpec::Positivity { paths, dt, horizon } => {
                    check_positivity(&p, f, &overridden(sim, *paths, *dt, *horizon), Some(s))
                }
                CheckSpec::Martingale {
                    paths,
                    dt,
                    horizon,
                    antithetic,
                    ladder_horizon,
                    ladder_paths,
                } => {
                    let mut c = overridden(sim, *paths, *dt, *horizon);
                    if let Some(a) = antithetic {
                        c.antithetic = *a;
                    }
                    let d = MartingaleOptions::default();
                    let opts = MartingaleOptions {
                        ladder_horizon: ladder_horizon.unwrap_or(d.ladder_horizon),
                        ladder_paths: ladder_paths.unwrap_or(d.ladder_paths),
                    };
                    check_martingale(&p, f, &c, Some(s), opts)
                }
                CheckSpec::TiltedDriftBound {
                    paths,
                    dt,
                    level,
                    times,
                } => {
                    let c = overridden(sim, *paths, *dt, None);
                    let d = TiltedDriftOptions::default();
                    let opts = TiltedDriftOptions {
                        level: level.unwrap_or(d.level),
                        times: times.clone().unwrap_or(d.times),
                    };
                    check_tilted_drift_bound(&p, f, &c, Some(s), &opts)
                }
                _ => Ok(CheckReport::refused(name, "requires a 4-factor model")),
            }
        }
        ResolvedModel::FourFactor(p, s) => {
            if let Some(report) = generic_check(&p, s, f, sim, spec)? {
                return Ok(report);
            }
            match spec {
                CheckSpec::PositivityFailure4f {
                    paths,
                    dt,
                    times,
                    beta0,
                    beta1,
                    negative_component,
                    target_r1,
                } => {
                    let d = CounterexampleOptions::default();
                    let opts = CounterexampleOptions {
                        beta0: beta0.unwrap_or(d.beta0),
                        beta1: beta1.unwrap_or(d.beta1),
                        negative_component: negative_component.unwrap_or(d.negative_component),
                        target_r1: target_r1.unwrap_or(d.target_r1),
                    };
                    let ce = match counterexample_4f(&p, opts) {
                        Ok(ce) => ce,
                        Err(e) => return Ok(CheckReport::refused(name, e.to_string())),
                    };
                    let c = overridden(sim, *paths, *dt, None);
                    let opts = PositivityFailureOptions {
                        times: times
                            .clone()
                            .unwrap_or_else(|| PositivityFailureOptions::default().times),
                    };
                    check_positivity_failure_4f(&ce, f, &c, &opts)
                }
                _ => Ok(CheckReport::refused(name, "requires a 2-factor model")),
            }
        }
    }
}

/// Overall verdict: any failure gives 4, otherwise any inconclusive check gives 5.
pub fn exit_code_for(reports: &[CheckReport]) -> i32 {
    if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        EXIT_FAILED
    } else if reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    }
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config: &'a RunConfig,
    verdict: Verdict,
    exit_code: i32,
    checks: &'a [CheckReport],
}

/// Runs the configured checks and writes `report.json`.
pub fn cmd_verify(path: &Path) -> Result<Outcome, CliError> {
    let r = load(path)?;
    let dir = output_dir(&r)?;
    let reports = mc::with_workers(workers(), || {
        r.checks
            .iter()
            .map(|spec| run_check(&r, spec))
            .collect::<Result<Vec<_>, McError>>()
    })??;
    let exit_code = exit_code_for(&reports);
    let verdict = match exit_code {
        EXIT_OK => Verdict::Pass,
        EXIT_FAILED => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    let doc = VerifyReport {
        config: &r.config,
        verdict,
        exit_code,
        checks: &reports,
    };
    let mut files = Vec::new();
    write_file(dir.join("report.json"), &to_json(&doc)?, &mut files)?;
    Ok(Outcome { exit_code, files })
}

#[derive(Serialize)]
#[serde(untagged)]
enum Either<T> {
    Ok(T),
    Inapplicable { inapplicable: String },
}

#[derive(Serialize)]
struct Anchored<T> {
    formulas: &'static [&'static str],
    #[serde(flatten)]
    values: T,
}

const GRONWALL_2F: &[&str] = &[
    "c1_1 = R1_0^2, c1_2 = 3 lambda1^2 beta0^2, c1_3 = max(3 lambda1^2 beta2^2, 3 lambda1^2 beta1^2 - 2 lambda1)",
    "c2_1 = R2_0, c2_2 = 3 lambda2 beta0^2, c2_3 = lambda2 max(3 beta1^2, 3 beta2^2 - 1)",
    "c1 = c1_1 + c2_1, c2 = c1_2 + c2_2, c3 = c1_3 + c2_3",
    "E(R1_t^2 + R2_t) <= (c1 + c2 t) exp(c3 t)",
];

const GRONWALL_4F: &[&str] = &[
    "U = (R1_0^2, R1_1^2, R2_0, R2_1)",
    "kernel j: lambda1j^2 sigma^2 - 2 lambda1j R1j^2 <= 3 lambda1j^2 (beta0^2 + beta1^2 R1^2 + beta2^2 R2) - 2 lambda1j R1j^2",
    "kernel j: sigma^2 - R2j <= 3 (beta0^2 + beta1^2 R1^2 + beta2^2 R2) - R2j",
    "R1^2 <= (1 - theta1) R1_0^2 + theta1 R1_1^2, R2 = (1 - theta2) R2_0 + theta2 R2_1",
    "r1_side[k], r2_side[k]: coefficient of U[k] summed over j",
    "c0(t) = sum U(0) + 3 beta0^2 sum_j (lambda1j^2 + lambda2j) t, c1 = max r1_side + max r2_side",
    "E(sum U_t) <= c0(t) exp(max(c1, 0) t)",
];

const TILTED: &[&str] = &[
    "beta2_hat = -beta1 lambda1 / (2 lambda2), beta2_bar = beta2^2 / (4 beta2_hat)",
    "alpha = beta1 lambda1 + beta2_hat lambda2, A = alpha beta2^2 - lambda2 beta2_hat",
    "C' = (alpha + alpha^2 beta2^2 / (-A)) beta0^2",
    "B' = 2 (alpha + alpha^2 beta2^2 / (-A)) beta0 beta1 - lambda1 beta1",
    "A' = (alpha + alpha^2 beta2^2 / (-A)) beta1^2",
    "L = C' - B'^2 / (4 A'), K0 = beta0 + beta2_bar + beta1 R1_0 + beta2_hat R2_0, K1 = |L|",
    "E(sigma_(t ^ S_M)) <= K0 + K1 t under the tilted dynamics",
];

const POSITIVITY_2F: &[&str] = &["sigma_t > 0 for all t when lambda2 < 2 lambda1 and sigma_0 > 0"];

const POSITIVITY_4F: &[&str] = &[
    "lambda_bar_i = (1 - theta_i) lambda_i0 + theta_i lambda_i1",
    "lambda_bar2 < 2 lambda_bar1 does not imply positivity of sigma",
];

const COUNTEREXAMPLE: &[&str] = &[
    "R1 mix = (1 - theta1) R1_0 + theta1 R1_1 > 0 while R1_bar = ((1 - theta1) lambda1_0 R1_0 + theta1 lambda1_1 R1_1) / lambda_bar1 < 0",
    "beta2 sqrt(R2) = -beta1 R1 mix, so sigma_0 = beta0",
    "sigma drift = -beta1 lambda_bar1 R1_bar + (lambda_bar2 beta2 / 2) (sigma^2 - R2_bar) / sqrt(R2) < 0 at sigma = 0",
];

const GROWTH: &[&str] = &[
    "f(x, y)^2 <= K1 (x^2 + y) + K2",
    "affine square root: K1 = 3 max(beta1^2, beta2^2), K2 = 3 beta0^2",
];

#[derive(Serialize)]
struct Constants2<'a> {
    config: &'a RunConfig,
    model: &'static str,
    gronwall: Anchored<theory::Gronwall2<f64>>,
    positivity: Anchored<theory::PositivityCondition<f64>>,
    tilted: Either<Anchored<theory::TiltedConstants<f64>>>,
    growth: Either<Anchored<theory::FunctionalConstants<f64>>>,
}

#[derive(Serialize)]
struct Constants4<'a> {
    config: &'a RunConfig,
    model: &'static str,
    gronwall: Anchored<theory::Gronwall4<f64>>,
    positivity: Anchored<theory::PositivityCondition<f64>>,
    counterexample: Either<Anchored<theory::CounterexampleSpec<f64>>>,
    growth: Either<Anchored<theory::FunctionalConstants<f64>>>,
}

fn anchored<T>(formulas: &'static [&'static str], values: T) -> Anchored<T> {
    Anchored { formulas, values }
}

fn growth_block(
    c: Option<theory::FunctionalConstants<f64>>,
) -> Either<Anchored<theory::FunctionalConstants<f64>>> {
    match c {
        Some(c) => Either::Ok(anchored(GROWTH, c)),
        None => Either::Inapplicable {
            inapplicable: "no growth constants declared".into(),
        },
    }
}

/// Writes every closed-form constant to `constants.json`; no simulation.
pub fn cmd_constants(path: &Path) -> Result<Outcome, CliError> {
    let r = load(path)?;
    let dir = output_dir(&r)?;
    let f = &r.functional;
    let text = match r.model {
        ResolvedModel::TwoFactor(p, s) => {
            let tilted = match tilted_bound_constants(&p, &s) {
                Ok(c) => Either::Ok(anchored(TILTED, c)),
                Err(e) => Either::Inapplicable {
                    inapplicable: e.to_string(),
                },
            };
            to_json(&Constants2 {
                config: &r.config,
                model: "two_factor",
                gronwall: anchored(GRONWALL_2F, gronwall_constants_2f(&p, &s)),
                positivity: anchored(POSITIVITY_2F, positivity_condition_2f(&p, Some((&s, f)))),
                tilted,
                growth: growth_block(growth_constants_2f(f, &p, &s)),
            })?
        }
        ResolvedModel::FourFactor(p, s) => {
            let counterexample = match counterexample_4f(&p, CounterexampleOptions::default()) {
                Ok(c) => Either::Ok(anchored(COUNTEREXAMPLE, c)),
                Err(e) => Either::Inapplicable {
                    inapplicable: e.to_string(),
                },
            };
            to_json(&Constants4 {
                config: &r.config,
                model: "four_factor",
                gronwall: anchored(GRONWALL_4F, gronwall_constants_4f(&p, &s)),
                positivity: anchored(POSITIVITY_4F, positivity_condition_4f(&p)),
                counterexample,
                growth: growth_block(growth_constants(f, &p, None)),
            })?
        }
    };
    let mut files = Vec::new();
    write_file(dir.join("constants.json"), &text, &mut files)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        files,
    })
}
