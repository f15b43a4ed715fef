//! Verification checks. Each returns a [`CheckReport`] whose verdict follows
//! the 3-standard-error policy in [`Rule`].

use super::report::{CheckRecord, CheckReport, Rule};
use super::stats::{mean_se, proportion, Estimate};
use super::{
    drive, map_paths, refined_noise_for_path, resolve_initial, summarize_ensemble, McError,
};
use crate::engine::{noise_for_path, EngineError};
use crate::model::{
    Driver, FactorModel, Pdv2Params, Pdv4Params, SimConfig, State2, State4, System, VolFunctional,
};
use crate::theory::{
    finite_horizon, gronwall_constants_2f, gronwall_constants_4f, tilted_bound_constants,
    CounterexampleSpec,
};

pub const CHECK_NAMES: [&str; 7] = [
    "nonexplosion",
    "moment_bound",
    "positivity",
    "positivity_failure_4f",
    "martingale",
    "tilted_drift_bound",
    "convergence",
];

const K: f64 = 3.0;
/// Widest `3 / sqrt(n)` accepted as evidence for a zero probability.
const ZERO_WIDTH: f64 = 0.1;
/// Widest `3 SE` accepted for the martingale test, relative to `x0`.
const MARTINGALE_WIDTH: f64 = 0.05;

fn zero_rule(config: &SimConfig<f64>) -> Rule {
    let max_width = match config.driver {
        Driver::Zero => f64::INFINITY,
        Driver::Gaussian { .. } => ZERO_WIDTH,
    };
    Rule::ConsistentWithZero { k: K, max_width }
}

fn exact_zero(name: &str, count: usize, n: usize) -> CheckRecord {
    CheckRecord::new(
        name,
        Estimate::exact(count as f64, n),
        Some(0.0),
        Rule::AtMost { k: 0.0 },
    )
}

fn largest_increase(p: &[f64]) -> f64 {
    p.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

/// Per-threshold hit probabilities, their monotonicity and the largest-threshold zero test.
fn ladder_records(
    label: &str,
    ladder: &[f64],
    counts: &[usize],
    n: usize,
    config: &SimConfig<f64>,
) -> Vec<CheckRecord> {
    let mut records = Vec::new();
    let probs: Vec<Estimate> = counts.iter().map(|&c| proportion(c, n)).collect();
    for (m, e) in ladder.iter().zip(&probs) {
        records.push(CheckRecord::new(
            format!("{label} M={m}"),
            *e,
            None,
            Rule::Informational,
        ));
    }
    let p: Vec<f64> = probs.iter().map(|e| e.estimate).collect();
    records.push(CheckRecord::new(
        format!("{label} nonincreasing in M"),
        Estimate::exact(largest_increase(&p), n),
        Some(0.0),
        Rule::AtMost { k: 0.0 },
    ));
    if let (Some(m), Some(e)) = (ladder.last(), probs.last()) {
        records.push(CheckRecord::new(
            format!("{label} M={m} consistent with 0"),
            *e,
            Some(0.0),
            zero_rule(config),
        ));
    }
    records
}

/// Non-explosion: factor hit probabilities `P(T_M <= T)` along the ladder,
/// explosion count and positivity of every recorded `R2` component.
pub fn check_nonexplosion<M: FactorModel<f64>>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<M::State>,
) -> Result<CheckReport, McError> {
    const NAME: &str = "nonexplosion";
    if config.explosion_ladder.len() < 3 {
        return Ok(CheckReport::refused(
            NAME,
            "ladder needs at least 3 thresholds",
        ));
    }
    let s = summarize_ensemble(model, functional, config, initial)?;
    let n = s.paths;
    let observations = n * (config.steps() + 1);
    let mut records = vec![CheckRecord::new(
        "exploded paths",
        proportion(s.exploded, n),
        Some(0.0),
        Rule::AtMost { k: 0.0 },
    )];
    records.extend(ladder_records(
        "P(T_M <= T)",
        &s.ladder,
        &s.hit_counts,
        n,
        config,
    ));
    records.push(exact_zero(
        "nonpositive R2 observations",
        s.nonpositive_r2,
        observations,
    ));
    let min_r2 = s.r2.iter().fold(f64::INFINITY, |m, r| m.min(r.min));
    records.push(CheckRecord::new(
        "min R2",
        Estimate::exact(min_r2, observations),
        None,
        Rule::Informational,
    ));
    Ok(CheckReport::from_records(NAME, records, None))
}

/// Models with a closed-form bound on `E(sum R1_j^2 + sum R2_j)`.
pub trait MomentBound: FactorModel<f64> {
    fn moment_bound(&self, initial: &Self::State) -> Box<dyn Fn(f64) -> f64>;
    fn bound_formula(&self) -> &'static str;
}

impl MomentBound for Pdv2Params<f64> {
    fn moment_bound(&self, initial: &State2<f64>) -> Box<dyn Fn(f64) -> f64> {
        let g = gronwall_constants_2f(self, initial);
        Box::new(move |t| g.bound(t))
    }

    fn bound_formula(&self) -> &'static str {
        "(c1 + c2 t) exp(c3 t)"
    }
}

impl MomentBound for Pdv4Params<f64> {
    fn moment_bound(&self, initial: &State4<f64>) -> Box<dyn Fn(f64) -> f64> {
        let g = gronwall_constants_4f(self, initial);
        Box::new(move |t| g.bound(t))
    }

    fn bound_formula(&self) -> &'static str {
        "c0(t) exp(c1 t)"
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOptions {
    /// Time at which the moment is estimated; capped where the bound overflows.
    pub t: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self { t: 1e-3 }
    }
}

/// Moment bound: the estimate of `E(sum R1_j^2 + sum R2_j)` at `t` plus 3 SE
/// must not exceed the Gronwall bound.
pub fn check_moment_bound<M: MomentBound>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<M::State>,
    opts: MomentOptions,
) -> Result<CheckReport, McError> {
    const NAME: &str = "moment_bound";
    let initial = resolve_initial(model, initial)?;
    let bound = model.moment_bound(&initial);
    let finite_t = finite_horizon(&bound, opts.t);
    let steps = (finite_t / config.dt * (1.0 + 1e-9)).floor();
    if steps < 1.0 {
        return Ok(CheckReport::refused(
            NAME,
            format!("bound is not finite beyond t = {finite_t:e} < dt"),
        ));
    }
    let t = steps * config.dt;
    let mut c = config.clone();
    c.horizon = t;
    c.validate().map_err(EngineError::from)?;
    let values = map_paths(c.paths, |i| {
        let mut last = f64::NAN;
        let mon = drive(
            model,
            functional,
            &c,
            initial,
            noise_for_path(&c, i),
            |sim| {
                last = model.moment_functional(&sim.snapshot().state);
            },
        )?;
        Ok(if mon.exploded { f64::INFINITY } else { last })
    })?;
    let e = mean_se(&values, c.antithetic);
    let reference = bound(t);
    let mut note = format!("bound {} evaluated at t = {t}", model.bound_formula());
    if (t - opts.t).abs() > 1e-9 * opts.t {
        note.push_str(&format!(
            "; requested t = {} capped to the largest grid time with a finite bound",
            opts.t
        ));
    }
    let records = vec![CheckRecord::new(
        format!("E(sum R1^2 + sum R2) at t={t}"),
        e,
        Some(reference),
        Rule::AtMost { k: K },
    )];
    Ok(CheckReport::from_records(NAME, records, Some(note)))
}

/// Discretisation allowance `10 sqrt(dt) lambda1 max(|beta1|, 1)` for `sigma >= Y`.
pub fn comparison_tolerance(p: &Pdv2Params<f64>, dt: f64) -> f64 {
    10.0 * dt.sqrt() * p.lambda1 * p.beta1.abs().max(1.0)
}

#[derive(Debug, Default, Clone, Copy)]
struct ComparisonCounts {
    observations: usize,
    nonpositive_sigma: usize,
    violations: usize,
    raw_violations: usize,
}

impl ComparisonCounts {
    fn add(&mut self, o: &ComparisonCounts) {
        self.observations += o.observations;
        self.nonpositive_sigma += o.nonpositive_sigma;
        self.violations += o.violations;
        self.raw_violations += o.raw_violations;
    }
}

fn comparison_run(
    p: &Pdv2Params<f64>,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: State2<f64>,
    fine_dt: f64,
    substeps: u32,
) -> Result<ComparisonCounts, McError> {
    let tol = comparison_tolerance(p, config.dt);
    let parts = map_paths(config.paths, |i| {
        let mut k = ComparisonCounts::default();
        let noise = refined_noise_for_path(config, i, fine_dt, substeps);
        drive(p, functional, config, initial, noise, |sim| {
            let snap = sim.snapshot();
            let y = snap.y.unwrap_or(f64::NAN);
            k.observations += 1;
            k.nonpositive_sigma += usize::from(snap.sigma <= 0.0);
            k.violations += usize::from(!(snap.sigma >= y * (1.0 - tol)));
            k.raw_violations += usize::from(!(snap.sigma >= y));
        })?;
        Ok(k)
    })?;
    let mut total = ComparisonCounts::default();
    for k in &parts {
        total.add(k);
    }
    Ok(total)
}

/// Positivity and the comparison `sigma >= Y`, at `dt` and `dt / 2` on a shared Brownian path.
pub fn check_positivity(
    p: &Pdv2Params<f64>,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<State2<f64>>,
) -> Result<CheckReport, McError> {
    const NAME: &str = "positivity";
    let initial = resolve_initial(p, initial)?;
    if !(p.lambda2 < 2.0 * p.lambda1) {
        return Ok(CheckReport::refused(
            NAME,
            format!(
                "lambda2 < 2 lambda1 fails ({} >= {})",
                p.lambda2,
                2.0 * p.lambda1
            ),
        ));
    }
    let sigma0 = p.sigma(&initial, functional)?;
    if !(sigma0 > 0.0) {
        return Ok(CheckReport::refused(
            NAME,
            format!("sigma0 > 0 fails (sigma0 = {sigma0})"),
        ));
    }
    let half = 0.5 * config.dt;
    let coarse = comparison_run(p, functional, config, initial, half, 2)?;
    let mut fine_cfg = config.clone();
    fine_cfg.dt = half;
    let fine = comparison_run(p, functional, &fine_cfg, initial, half, 1)?;

    let frac = |k: &ComparisonCounts, v: usize| v as f64 / k.observations as f64;
    let (dt, dt2) = (config.dt, half);
    let records = vec![
        exact_zero(
            &format!("sigma <= 0 observations dt={dt}"),
            coarse.nonpositive_sigma,
            coarse.observations,
        ),
        exact_zero(
            &format!("sigma <= 0 observations dt={dt2}"),
            fine.nonpositive_sigma,
            fine.observations,
        ),
        CheckRecord::new(
            format!("comparison violation fraction dt={dt}"),
            Estimate::exact(frac(&coarse, coarse.violations), coarse.observations),
            None,
            Rule::Informational,
        ),
        CheckRecord::new(
            format!("comparison violation fraction dt={dt2}"),
            Estimate::exact(frac(&fine, fine.violations), fine.observations),
            None,
            Rule::Informational,
        ),
        CheckRecord::new(
            "comparison violation fraction change under dt halving",
            Estimate::exact(
                frac(&fine, fine.violations) - frac(&coarse, coarse.violations),
                fine.observations,
            ),
            Some(0.0),
            Rule::AtMost { k: 0.0 },
        ),
        CheckRecord::new(
            format!("sigma < Y fraction without allowance dt={dt}"),
            Estimate::exact(frac(&coarse, coarse.raw_violations), coarse.observations),
            None,
            Rule::Informational,
        ),
        CheckRecord::new(
            format!("sigma < Y fraction without allowance dt={dt2}"),
            Estimate::exact(frac(&fine, fine.raw_violations), fine.observations),
            None,
            Rule::Informational,
        ),
    ];
    let note = format!(
        "comparison allowance tol = {} at dt={dt}, {} at dt={dt2}",
        comparison_tolerance(p, dt),
        comparison_tolerance(p, dt2)
    );
    Ok(CheckReport::from_records(NAME, records, Some(note)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityFailureOptions {
    /// Times `t` at which `P(min_{s <= t} sigma_s < 0)` is estimated.
    pub times: Vec<f64>,
}

impl Default for PositivityFailureOptions {
    fn default() -> Self {
        Self {
            times: vec![0.0025, 0.005, 0.01],
        }
    }
}

fn grid_steps(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

/// Positivity failure of the 4-factor model: some small `t` must show
/// `P(min_{s <= t} sigma_s < 0)` significantly above 0, and the zero-driver
/// path must go negative.
pub fn check_positivity_failure_4f(
    spec: &CounterexampleSpec<f64>,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    opts: &PositivityFailureOptions,
) -> Result<CheckReport, McError> {
    const NAME: &str = "positivity_failure_4f";
    let t_max = opts.times.iter().fold(0.0f64, |m, &t| m.max(t));
    if opts.times.is_empty() || !(t_max > 0.0) {
        return Ok(CheckReport::refused(NAME, "no positive evaluation times"));
    }
    let mut c = config.clone();
    c.horizon = t_max;
    c.validate().map_err(EngineError::from)?;
    let p = &spec.params;

    // first step index with sigma < 0, per path
    let first_negative = |cfg: &SimConfig<f64>, i: usize| -> Result<Option<usize>, McError> {
        let mut first = None;
        drive(
            p,
            functional,
            cfg,
            spec.initial,
            noise_for_path(cfg, i),
            |sim| {
                if first.is_none() && sim.snapshot().sigma < 0.0 {
                    first = Some(sim.step_index());
                }
            },
        )?;
        Ok(first)
    };
    let firsts = map_paths(c.paths, |i| first_negative(&c, i))?;

    let mut records = vec![
        CheckRecord::new(
            "sigma0",
            Estimate::exact(spec.sigma0, 1),
            None,
            Rule::Informational,
        ),
        CheckRecord::new(
            "initial sigma drift",
            Estimate::exact(spec.initial_drift, 1),
            Some(0.0),
            Rule::Below { k: 0.0 },
        ),
    ];
    for &t in &opts.times {
        let k = grid_steps(t, c.dt);
        let hits = firsts.iter().filter(|f| f.is_some_and(|s| s <= k)).count();
        records.push(
            CheckRecord::new(
                format!("P(min sigma < 0 on [0, {t}])"),
                proportion(hits, firsts.len()),
                Some(0.0),
                Rule::Significant { k: K },
            )
            .any_of(),
        );
    }

    let mut zero = c.clone();
    zero.driver = Driver::Zero;
    zero.paths = 1;
    zero.antithetic = false;
    let mut min_sigma = f64::INFINITY;
    drive(
        p,
        functional,
        &zero,
        spec.initial,
        noise_for_path(&zero, 0),
        |sim| {
            min_sigma = min_sigma.min(sim.snapshot().sigma);
        },
    )?;
    records.push(CheckRecord::new(
        format!("zero-driver min sigma on [0, {t_max}]"),
        Estimate::exact(min_sigma, 1),
        Some(0.0),
        Rule::Below { k: 0.0 },
    ));
    Ok(CheckReport::from_records(NAME, records, None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleOptions {
    /// Horizon of the tilted-system ladder run.
    pub ladder_horizon: f64,
    pub ladder_paths: usize,
}

impl Default for MartingaleOptions {
    fn default() -> Self {
        Self {
            ladder_horizon: 0.1,
            ladder_paths: 10_000,
        }
    }
}

/// Martingale property of the price: `E[X_T] = x0` directly, and the tilted
/// system's volatility ladder `P(T_M <= t)` vanishing at the largest threshold.
pub fn check_martingale(
    p: &Pdv2Params<f64>,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<State2<f64>>,
    opts: MartingaleOptions,
) -> Result<CheckReport, McError> {
    const NAME: &str = "martingale";
    config.validate().map_err(EngineError::from)?;
    let initial = resolve_initial(p, initial)?;
    let mut direct = config.clone();
    direct.system = System::Original;
    let finals = map_paths(direct.paths, |i| {
        let mut x = f64::NAN;
        drive(
            p,
            functional,
            &direct,
            initial,
            noise_for_path(&direct, i),
            |sim| {
                x = sim.snapshot().x;
            },
        )?;
        Ok(x)
    })?;
    let e = mean_se(&finals, direct.antithetic);
    let mut records = vec![CheckRecord::new(
        format!("E[X_T] at T={}", direct.horizon),
        e,
        Some(direct.x0),
        Rule::WithinSe {
            k: K,
            max_half_width: MARTINGALE_WIDTH * direct.x0,
        },
    )];

    let mut ladder = config.clone();
    ladder.system = System::Tilted;
    ladder.horizon = opts.ladder_horizon;
    ladder.paths = opts.ladder_paths;
    ladder.validate().map_err(EngineError::from)?;
    let s = summarize_ensemble(p, functional, &ladder, Some(initial))?;
    records.extend(ladder_records(
        "tilted P(T_M <= t)",
        &s.ladder,
        &s.vol_hit_counts,
        s.paths,
        &ladder,
    ));
    records.push(exact_zero("tilted exploded paths", s.exploded, s.paths));
    let note = format!(
        "tilted ladder over |nu| on [0, {}] with {} paths",
        ladder.horizon, ladder.paths
    );
    Ok(CheckReport::from_records(NAME, records, Some(note)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltedDriftOptions {
    /// Level `M` of `S_M = inf{t : |sigma_t| >= M}`.
    pub level: f64,
    pub times: Vec<f64>,
}

impl Default for TiltedDriftOptions {
    fn default() -> Self {
        Self {
            level: 20.0,
            times: vec![0.05, 0.1, 0.25],
        }
    }
}

/// Tilted drift bound: `E[sigma_{t ^ S_M}] + 3 SE <= K0 + K1 t` on a time grid, under the tilted system.
pub fn check_tilted_drift_bound(
    p: &Pdv2Params<f64>,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<State2<f64>>,
    opts: &TiltedDriftOptions,
) -> Result<CheckReport, McError> {
    const NAME: &str = "tilted_drift_bound";
    if !functional.is_affine_sqrt() {
        return Ok(CheckReport::refused(
            NAME,
            "the affine bound is derived for the affine square-root functional only",
        ));
    }
    let initial = resolve_initial(p, initial)?;
    let constants = match tilted_bound_constants(p, &initial) {
        Ok(c) => c,
        Err(e) => return Ok(CheckReport::refused(NAME, e.to_string())),
    };
    let mut times = opts.times.clone();
    times.retain(|&t| t >= 0.0);
    let t_max = times.iter().fold(0.0f64, |m, &t| m.max(t));
    let mut c = config.clone();
    c.system = System::Tilted;
    if t_max > 0.0 {
        c.horizon = t_max;
    }
    c.validate().map_err(EngineError::from)?;
    let grid: Vec<usize> = times.iter().map(|&t| grid_steps(t, c.dt)).collect();

    let samples = map_paths(c.paths, |i| {
        let mut out = vec![f64::NAN; grid.len()];
        let mut stopped: Option<f64> = None;
        let mut last = f64::NAN;
        drive(p, functional, &c, initial, noise_for_path(&c, i), |sim| {
            let sigma = sim.snapshot().sigma;
            let value = match stopped {
                Some(v) => v,
                None => {
                    if sigma.abs() >= opts.level {
                        stopped = Some(sigma);
                    }
                    sigma
                }
            };
            last = value;
            let k = sim.step_index();
            for (slot, &g) in out.iter_mut().zip(&grid) {
                if g == k {
                    *slot = value;
                }
            }
        })?;
        // an exploded path is stopped at its last finite value
        for slot in out.iter_mut().filter(|v| v.is_nan()) {
            *slot = last;
        }
        Ok(out)
    })?;

    let mut records = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        let column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
        records.push(CheckRecord::new(
            format!("E[sigma_(t ^ S_M)] at t={t}"),
            mean_se(&column, c.antithetic),
            Some(constants.affine_bound(t)),
            Rule::AtMost { k: K },
        ));
    }
    let note = format!(
        "K0 = {}, K1 = {}, M = {}",
        constants.k0, constants.k1, opts.level
    );
    Ok(CheckReport::from_records(NAME, records, Some(note)))
}
