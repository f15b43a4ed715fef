//! Self-refinement study: strong errors of coarse runs against a fine
//! reference driven by the same Brownian path.

use super::report::{CheckRecord, CheckReport, Rule};
use super::stats::{fitted_order, mean_se, Estimate};
use super::{drive, map_paths, refined_noise_for_path, resolve_initial, McError};
use crate::engine::EngineError;
use crate::model::{FactorModel, SimConfig, VolFunctional};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    /// Coarse step sizes, geometric and each a multiple of `reference_dt`.
    pub dt_ladder: Vec<f64>,
    pub reference_dt: f64,
    /// Accepted range of the fitted strong order.
    pub order_range: (f64, f64),
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            dt_ladder: vec![4e-4, 2e-4, 1e-4],
            reference_dt: 2.5e-5,
            order_range: (0.3, 1.2),
        }
    }
}

fn substeps(dt: f64, fine: f64) -> Option<u32> {
    let r = dt / fine;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r && k >= 1.0).then_some(k as u32)
}

fn is_geometric(ladder: &[f64]) -> bool {
    if ladder.len() < 2 {
        return false;
    }
    let q = ladder[1] / ladder[0];
    q.is_finite()
        && q > 0.0
        && q != 1.0
        && ladder
            .windows(2)
            .all(|w| ((w[1] / w[0]) - q).abs() <= 1e-9 * q)
}

fn final_state<M: FactorModel<f64>>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: M::State,
    path: usize,
    fine_dt: f64,
    k: u32,
) -> Result<Option<M::State>, McError> {
    let mut last = initial;
    let mon = drive(
        model,
        functional,
        config,
        initial,
        refined_noise_for_path(config, path, fine_dt, k),
        |sim| last = sim.snapshot().state,
    )?;
    Ok((!mon.exploded).then_some(last))
}

fn distance<M: FactorModel<f64>>(model: &M, a: &M::State, b: &M::State) -> f64 {
    let d1 = model
        .r1(a)
        .iter()
        .zip(model.r1(b))
        .map(|(x, y)| (x - y) * (x - y));
    let d2 = model
        .r2(a)
        .iter()
        .zip(model.r2(b))
        .map(|(x, y)| (x - y) * (x - y));
    d1.chain(d2).sum::<f64>().sqrt()
}

/// Strong error `E|R_T^(dt) - R_T^(ref)|` (Euclidean over all factor
/// components) per rung, its monotone decrease along the ladder and the fitted order.
pub fn convergence_study<M: FactorModel<f64>>(
    model: &M,
    functional: &VolFunctional<f64>,
    config: &SimConfig<f64>,
    initial: Option<M::State>,
    opts: &ConvergenceOptions,
) -> Result<CheckReport, McError> {
    const NAME: &str = "convergence";
    if !is_geometric(&opts.dt_ladder) {
        return Ok(CheckReport::refused(
            NAME,
            "dt ladder must be a geometric sequence of at least 2 rungs",
        ));
    }
    let mut ratios = Vec::with_capacity(opts.dt_ladder.len());
    for &dt in &opts.dt_ladder {
        match substeps(dt, opts.reference_dt) {
            Some(k) if k > 1 => ratios.push(k),
            _ => {
                return Ok(CheckReport::refused(
                    NAME,
                    format!(
                        "dt {dt} is not a multiple > 1 of the reference {}",
                        opts.reference_dt
                    ),
                ))
            }
        }
    }
    let initial = resolve_initial(model, initial)?;
    let mut reference = config.clone();
    reference.dt = opts.reference_dt;
    reference.validate().map_err(EngineError::from)?;
    let rungs: Vec<SimConfig<f64>> = opts
        .dt_ladder
        .iter()
        .map(|&dt| {
            let mut c = config.clone();
            c.dt = dt;
            c.validate().map(|_| c)
        })
        .collect::<Result<_, _>>()
        .map_err(EngineError::from)?;

    let fine = opts.reference_dt;
    let errors = map_paths(config.paths, |i| {
        let Some(r) = final_state(model, functional, &reference, initial, i, fine, 1)? else {
            return Ok(vec![f64::INFINITY; rungs.len()]);
        };
        rungs
            .iter()
            .zip(&ratios)
            .map(|(c, &k)| {
                Ok(final_state(model, functional, c, initial, i, fine, k)?
                    .map_or(f64::INFINITY, |s| distance(model, &s, &r)))
            })
            .collect()
    })?;

    let mut records = Vec::new();
    let mut means = Vec::new();
    for (j, &dt) in opts.dt_ladder.iter().enumerate() {
        let column: Vec<f64> = errors.iter().map(|e| e[j]).collect();
        let e = mean_se(&column, config.antithetic);
        means.push(e.estimate);
        records.push(CheckRecord::new(
            format!("strong error dt={dt}"),
            e,
            None,
            Rule::Informational,
        ));
    }
    let n = config.paths;
    let largest_step = means
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    records.push(CheckRecord::new(
        "largest error change along the ladder",
        Estimate::exact(largest_step, n),
        Some(0.0),
        Rule::Below { k: 0.0 },
    ));
    let (lo, hi) = opts.order_range;
    records.push(CheckRecord::new(
        "fitted strong order",
        Estimate::exact(fitted_order(&opts.dt_ladder, &means), n),
        None,
        Rule::Interval { lo, hi },
    ));
    let note = format!(
        "reference dt = {} on the same Brownian path, horizon {}",
        opts.reference_dt, config.horizon
    );
    Ok(CheckReport::from_records(NAME, records, Some(note)))
}
