//! Ensembles and the statistical verification checks.
//!
//! Paths fan out over the current rayon pool and are collected in path order,
//! so every estimate is identical for any number of workers.

mod checks;
mod convergence;
pub mod report;
pub mod stats;

pub use checks::{
    check_martingale, check_moment_bound, check_nonexplosion, check_positivity,
    check_positivity_failure_4f, check_tilted_drift_bound, comparison_tolerance, MartingaleOptions,
    MomentBound, MomentOptions, PositivityFailureOptions, TiltedDriftOptions, CHECK_NAMES,
};
pub use convergence::{convergence_study, ConvergenceOptions};
pub use report::{CheckRecord, CheckReport, Role, Rule, Verdict};
pub use stats::{mean_se, proportion, Estimate};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{
    noise_for_path, simulate_path, EngineError, Monitors, NoiseStream, PathRecord, PathSimulator,
};
use crate::model::{Driver, FactorModel, ModelError, SimConfig, VolFunctional};
use crate::theory::TheoryError;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "PDV_WORKERS";

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Worker count from [`WORKERS_ENV`]; `None` when unset or unparsable.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a pool of `workers` threads, or on the global pool for `None`.
pub fn with_workers<R: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> R + Send,
) -> Result<R, McError> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| McError::Pool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluates `f(0..n)` in parallel and returns the results in index order.
pub fn map_paths<R, F>(n: usize, f: F) -> Result<Vec<R>, McError>
where
    R: Send,
    F: Fn(usize) -> Result<R, McError> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Steps one path to the horizon, calling `visit` at `t = 0` and after every finite step.
pub fn drive<M, V>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: M::State,
    noise: NoiseStream,
    mut visit: V,
) -> Result<Monitors<f64>, McError>
where
    M: FactorModel<f64>,
    V: FnMut(&PathSimulator<'_, f64, M>),
{
    let mut sim = PathSimulator::new(model, functional, config, initial, noise)?;
    visit(&sim);
    while !sim.finished() {
        sim.advance()?;
        if sim.monitors().exploded {
            break;
        }
        visit(&sim);
    }
    Ok(sim.monitors().clone())
}

/// Noise of ensemble member `path_index` whose increments each sum `substeps`
/// increments of the `fine_dt` stream that [`noise_for_path`] would give at `fine_dt`.
pub fn refined_noise_for_path(
    config: &SimConfig<f64>,
    path_index: usize,
    fine_dt: f64,
    substeps: u32,
) -> NoiseStream {
    match config.driver {
        Driver::Zero => NoiseStream::zero(fine_dt * f64::from(substeps)),
        Driver::Gaussian { seed } => {
            if config.antithetic {
                let s = NoiseStream::refined(seed, (path_index / 2) as u64, fine_dt, substeps);
                if path_index % 2 == 1 {
                    s.negated()
                } else {
                    s
                }
            } else {
                NoiseStream::refined(seed, path_index as u64, fine_dt, substeps)
            }
        }
    }
}

pub(crate) fn resolve_initial<M: FactorModel<f64>>(
    model: &M,
    initial: Option<M::State>,
) -> Result<M::State, McError> {
    match initial {
        Some(s) => Ok(s),
        None => Ok(model.default_state()?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn empty() -> Self {
        Self {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn include(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn merge(&mut self, o: &Range) {
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }
}

/// Extremes, sign violations and ladder hits of one path or a whole ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub paths: usize,
    pub exploded: usize,
    pub r1: Vec<Range>,
    pub r2: Vec<Range>,
    pub sigma: Range,
    pub x: Range,
    pub ladder: Vec<f64>,
    /// Paths with a factor hit `T_M <= horizon`, per threshold.
    pub hit_counts: Vec<usize>,
    /// Paths with `|nu| >= M` before the horizon, per threshold.
    pub vol_hit_counts: Vec<usize>,
    /// Recorded grid values with some `R2_j <= 0`.
    pub nonpositive_r2: usize,
    /// Recorded grid values with `sigma <= 0`.
    pub nonpositive_sigma: usize,
}

impl EnsembleSummary {
    pub fn new(components: (usize, usize), ladder: &[f64]) -> Self {
        Self {
            paths: 0,
            exploded: 0,
            r1: vec![Range::empty(); components.0],
            r2: vec![Range::empty(); components.1],
            sigma: Range::empty(),
            x: Range::empty(),
            ladder: ladder.to_vec(),
            hit_counts: vec![0; ladder.len()],
            vol_hit_counts: vec![0; ladder.len()],
            nonpositive_r2: 0,
            nonpositive_sigma: 0,
        }
    }

    /// Adds one grid value.
    pub fn observe<M: FactorModel<f64>>(
        &mut self,
        model: &M,
        state: &M::State,
        sigma: f64,
        x: f64,
    ) {
        for (r, &v) in self.r1.iter_mut().zip(model.r1(state)) {
            r.include(v);
        }
        let mut bad_r2 = false;
        for (r, &v) in self.r2.iter_mut().zip(model.r2(state)) {
            r.include(v);
            bad_r2 |= v <= 0.0;
        }
        self.nonpositive_r2 += usize::from(bad_r2);
        self.nonpositive_sigma += usize::from(sigma <= 0.0);
        self.sigma.include(sigma);
        self.x.include(x);
    }

    /// Closes a path, counting its explosion flag and ladder hits.
    pub fn finish_path(&mut self, monitors: &Monitors<f64>) {
        self.paths += 1;
        self.exploded += usize::from(monitors.exploded);
        for (c, h) in self.hit_counts.iter_mut().zip(&monitors.first_hit) {
            *c += usize::from(h.is_finite());
        }
        for (c, h) in self.vol_hit_counts.iter_mut().zip(&monitors.vol_first_hit) {
            *c += usize::from(h.is_finite());
        }
    }

    pub fn merge(&mut self, o: &EnsembleSummary) {
        self.paths += o.paths;
        self.exploded += o.exploded;
        for (a, b) in self.r1.iter_mut().zip(&o.r1) {
            a.merge(b);
        }
        for (a, b) in self.r2.iter_mut().zip(&o.r2) {
            a.merge(b);
        }
        self.sigma.merge(&o.sigma);
        self.x.merge(&o.x);
        for (a, b) in self.hit_counts.iter_mut().zip(&o.hit_counts) {
            *a += b;
        }
        for (a, b) in self.vol_hit_counts.iter_mut().zip(&o.vol_hit_counts) {
            *a += b;
        }
        self.nonpositive_r2 += o.nonpositive_r2;
        self.nonpositive_sigma += o.nonpositive_sigma;
    }
}

fn components<M: FactorModel<f64>>(model: &M) -> (usize, usize) {
    (model.r1_rates().len(), model.r2_rates().len())
}

/// Summarises a recorded path.
pub fn summarize_record<M: FactorModel<f64>>(
    model: &M,
    record: &PathRecord<f64, M::State>,
) -> EnsembleSummary {
    let mut s = EnsembleSummary::new(components(model), &record.ladder);
    for i in 0..record.len() {
        s.observe(model, &record.states[i], record.sigma[i], record.x[i]);
    }
    s.finish_path(&record.monitors);
    s
}

fn merge_all(
    model_components: (usize, usize),
    ladder: &[f64],
    parts: &[EnsembleSummary],
) -> EnsembleSummary {
    let mut total = EnsembleSummary::new(model_components, ladder);
    for p in parts {
        total.merge(p);
    }
    total
}

/// Recorded paths of an ensemble with their aggregate summary.
#[derive(Debug, Clone)]
pub struct Ensemble<S> {
    pub records: Vec<PathRecord<f64, S>>,
    pub summary: EnsembleSummary,
}

/// Simulates and records `config.paths` paths.
///
/// Keeps every trajectory in memory; use [`summarize_ensemble`] for large runs.
pub fn run_ensemble<M: FactorModel<f64>>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<M::State>,
) -> Result<Ensemble<M::State>, McError> {
    config.validate().map_err(EngineError::from)?;
    let initial = resolve_initial(model, initial)?;
    let records = map_paths(config.paths, |i| {
        Ok(simulate_path(
            model,
            functional,
            config,
            Some(initial),
            noise_for_path(config, i),
        )?)
    })?;
    let parts: Vec<EnsembleSummary> = records.iter().map(|r| summarize_record(model, r)).collect();
    let summary = merge_all(components(model), &config.explosion_ladder, &parts);
    Ok(Ensemble { records, summary })
}

/// Aggregate summary of `config.paths` paths without storing trajectories.
pub fn summarize_ensemble<M: FactorModel<f64>>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<M::State>,
) -> Result<EnsembleSummary, McError> {
    config.validate().map_err(EngineError::from)?;
    let initial = resolve_initial(model, initial)?;
    let parts = map_paths(config.paths, |i| {
        let mut s = EnsembleSummary::new(components(model), &config.explosion_ladder);
        let monitors = drive(
            model,
            functional,
            config,
            initial,
            noise_for_path(config, i),
            |sim| {
                let snap = sim.snapshot();
                s.observe(model, &snap.state, snap.sigma, snap.x);
            },
        )?;
        s.finish_path(&monitors);
        Ok(s)
    })?;
    Ok(merge_all(
        components(model),
        &config.explosion_ladder,
        &parts,
    ))
}
