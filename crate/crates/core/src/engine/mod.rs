//! Single-path time stepping.
//!
//! All factor components, the comparison process `Y` and the price `X`
//! consume the same Brownian increment at every step, and sigma is frozen at
//! the left endpoint of each step.

mod noise;

pub use noise::NoiseStream;

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    ConfigError, Driver, FactorModel, ModelError, Pdv2Params, Scheme, SimConfig, System,
    VolFunctional,
};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("noise stream step {noise} does not match config dt {config}")]
    NoiseMismatch { noise: f64, config: f64 },
}

#[inline]
fn one_minus_exp<T: Real>(rate: T, dt: T) -> (T, T) {
    let x = -(rate * dt);
    (x.exp(), -x.exp_m1())
}

/// Moves `r` towards `target` by the fraction `c` of the gap, exactly `r` when `r == target`.
#[inline]
fn relax<T: Real>(r: T, target: T, decay: T, c: T) -> T {
    if target >= r {
        r + (target - r) * c
    } else {
        r * decay + target * c
    }
}

fn r1_update<T: Real>(r: T, rate: T, sigma: T, dw: T, dt: T, scheme: Scheme, system: System) -> T {
    let shock = rate * sigma * dw;
    match (scheme, system) {
        (Scheme::Euler, System::Original) => r + shock - rate * r * dt,
        (Scheme::Euler, System::Tilted) => r + shock + rate * (sigma * sigma - r) * dt,
        (Scheme::Exponential, System::Original) => {
            let (decay, _) = one_minus_exp(rate, dt);
            r * decay + shock
        }
        (Scheme::Exponential, System::Tilted) => {
            let (decay, c) = one_minus_exp(rate, dt);
            r * decay + sigma * sigma * c + shock
        }
    }
}

fn r2_update<T: Real>(r: T, rate: T, sigma: T, dt: T, scheme: Scheme) -> T {
    let target = sigma * sigma;
    match scheme {
        Scheme::Euler => r + rate * (target - r) * dt,
        Scheme::Exponential => {
            let (decay, c) = one_minus_exp(rate, dt);
            relax(r, target, decay, c)
        }
    }
}

/// One step of either scheme with sigma frozen at its left-endpoint value.
pub fn step<T: Real, M: FactorModel<T>>(
    model: &M,
    s: &M::State,
    sigma: T,
    dw: T,
    dt: T,
    scheme: Scheme,
    system: System,
) -> M::State {
    let r1_rates = model.r1_rates();
    let r2_rates = model.r2_rates();
    model.map_state(
        s,
        |j, r| r1_update(r, r1_rates[j], sigma, dw, dt, scheme, system),
        |j, r| r2_update(r, r2_rates[j], sigma, dt, scheme),
    )
}

/// Euler-Maruyama step of the original or tilted system.
pub fn step_euler<T: Real, M: FactorModel<T>>(
    model: &M,
    s: &M::State,
    sigma: T,
    dw: T,
    dt: T,
    system: System,
) -> M::State {
    step(model, s, sigma, dw, dt, Scheme::Euler, system)
}

/// Exponential-integrator step: exact decay of `R2` towards `sigma^2`, drift-exact `R1`.
pub fn step_exponential<T: Real, M: FactorModel<T>>(
    model: &M,
    s: &M::State,
    sigma: T,
    dw: T,
    dt: T,
    system: System,
) -> M::State {
    step(model, s, sigma, dw, dt, Scheme::Exponential, system)
}

#[inline]
fn y_update<T: Real>(beta1: T, lambda1: T, y: T, dw: T, dt: T) -> T {
    let bl = beta1 * lambda1;
    y * (bl * dw - lambda1 * dt - T::half() * bl * bl * dt).exp()
}

/// Exact update of the comparison process `dY = -lambda1 Y dt + beta1 lambda1 Y dW`.
pub fn y_step<T: Real>(p: &Pdv2Params<T>, y: T, dw: T, dt: T) -> T {
    y_update(p.beta1, p.lambda1, y, dw, dt)
}

/// Log-Euler update of the price `dX = nu X dW`.
pub fn x_step<T: Real>(nu: T, x: T, dw: T, dt: T) -> T {
    x * (nu * dw - T::half() * nu * nu * dt).exp()
}

/// Builds the noise stream of ensemble member `path_index` under `config`.
///
/// With antithetic pairing, paths `2k` and `2k + 1` share stream `k`, the odd one negated.
pub fn noise_for_path<T: Real>(config: &SimConfig<T>, path_index: usize) -> NoiseStream {
    let dt = config.dt.as_f64();
    match config.driver {
        Driver::Zero => NoiseStream::zero(dt),
        Driver::Gaussian { seed } => {
            if config.antithetic {
                let s = NoiseStream::gaussian(seed, (path_index / 2) as u64, dt);
                if path_index % 2 == 1 {
                    s.negated()
                } else {
                    s
                }
            } else {
                NoiseStream::gaussian(seed, path_index as u64, dt)
            }
        }
    }
}

/// Values at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot<T, S> {
    pub t: T,
    pub state: S,
    pub sigma: T,
    /// Comparison process, 2-factor only.
    pub y: Option<T>,
    pub x: T,
    /// Volatility driving `X`: sigma stopped at `tau_C` (frozen at `-C`).
    pub nu: T,
}

/// First-hit times and explosion status of a path so far.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monitors<T> {
    /// Per ladder threshold `M`: first time some `|R1_j| >= M` or `R2_j >= M^2`, else +inf.
    pub first_hit: Vec<T>,
    /// Per ladder threshold `M`: first time `|nu| >= M`, else +inf.
    pub vol_first_hit: Vec<T>,
    /// First time sigma < -C, else +inf.
    pub tau_c: T,
    pub exploded: bool,
    pub last_finite_time: T,
}

impl<T: Real> Monitors<T> {
    fn new(levels: usize) -> Self {
        Self {
            first_hit: vec![T::infinity(); levels],
            vol_first_hit: vec![T::infinity(); levels],
            tau_c: T::infinity(),
            exploded: false,
            last_finite_time: T::zero(),
        }
    }
}

/// Incremental path simulation. Drive it with [`PathSimulator::advance`] and
/// read [`PathSimulator::snapshot`] after each step.
#[derive(Debug)]
pub struct PathSimulator<'a, T: Real, M: FactorModel<T>> {
    model: &'a M,
    functional: &'a VolFunctional<T>,
    config: &'a SimConfig<T>,
    noise: NoiseStream,
    comparison: Option<(T, T)>,
    steps: usize,
    step_index: usize,
    current: Snapshot<T, M::State>,
    monitors: Monitors<T>,
    last_increment: T,
}

impl<'a, T: Real, M: FactorModel<T>> PathSimulator<'a, T, M> {
    pub fn new(
        model: &'a M,
        functional: &'a VolFunctional<T>,
        config: &'a SimConfig<T>,
        initial: M::State,
        noise: NoiseStream,
    ) -> Result<Self, EngineError> {
        model.validate().into_result()?;
        config.validate()?;
        model.check_initial_state(&initial)?;
        let dt = config.dt.as_f64();
        if (noise.dt() - dt).abs() > 1e-9 * dt {
            return Err(EngineError::NoiseMismatch {
                noise: noise.dt(),
                config: dt,
            });
        }
        let sigma = model.sigma(&initial, functional)?;
        let comparison = model.comparison_coefficients();
        let current = Snapshot {
            t: T::zero(),
            state: initial,
            sigma,
            y: comparison.map(|_| sigma),
            x: config.x0,
            nu: sigma,
        };
        let mut sim = Self {
            model,
            functional,
            config,
            noise,
            comparison,
            steps: config.steps(),
            step_index: 0,
            current,
            monitors: Monitors::new(config.explosion_ladder.len()),
            last_increment: T::zero(),
        };
        sim.apply_stopping();
        sim.record_hits();
        Ok(sim)
    }

    pub fn snapshot(&self) -> &Snapshot<T, M::State> {
        &self.current
    }

    pub fn monitors(&self) -> &Monitors<T> {
        &self.monitors
    }

    pub fn model(&self) -> &M {
        self.model
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// The Brownian increment consumed by the most recent step.
    pub fn last_increment(&self) -> T {
        self.last_increment
    }

    pub fn finished(&self) -> bool {
        self.monitors.exploded || self.step_index >= self.steps
    }

    /// Advances one step. Returns `Ok(false)` once the horizon is reached or the path exploded.
    pub fn advance(&mut self) -> Result<bool, EngineError> {
        if self.finished() {
            return Ok(false);
        }
        let dt = self.config.dt;
        let dw = T::lit(self.noise.next_increment());
        self.last_increment = dw;
        let prev = self.current;
        let state = step(
            self.model,
            &prev.state,
            prev.sigma,
            dw,
            dt,
            self.config.scheme,
            self.config.system,
        );
        let t = T::from_count(self.step_index + 1) * dt;
        self.step_index += 1;

        if !self.model.is_finite(&state) {
            self.mark_exploded(t);
            return Ok(false);
        }
        let sigma = self.model.sigma(&state, self.functional)?;
        if !sigma.is_finite() {
            self.mark_exploded(t);
            return Ok(false);
        }
        let y = match (self.comparison, prev.y) {
            (Some((beta1, lambda1)), Some(y)) => Some(y_update(beta1, lambda1, y, dw, dt)),
            _ => None,
        };
        let x = x_step(prev.nu, prev.x, dw, dt);
        self.current = Snapshot {
            t,
            state,
            sigma,
            y,
            x,
            nu: sigma,
        };
        self.apply_stopping();
        self.monitors.last_finite_time = t;
        self.record_hits();
        Ok(!self.finished())
    }

    fn apply_stopping(&mut self) {
        let c = self.config.stop_floor_c;
        if self.monitors.tau_c.is_infinite() && self.current.sigma < -c {
            self.monitors.tau_c = self.current.t;
        }
        if self.monitors.tau_c.is_finite() {
            self.current.nu = -c;
        }
    }

    fn record_hits(&mut self) {
        let s = &self.current.state;
        let max_r1 = self
            .model
            .r1(s)
            .iter()
            .fold(T::zero(), |m, &x| m.max(x.abs()));
        let max_r2 = self.model.r2(s).iter().fold(T::zero(), |m, &x| m.max(x));
        let nu = self.current.nu.abs();
        let t = self.current.t;
        for (k, &level) in self.config.explosion_ladder.iter().enumerate() {
            if self.monitors.first_hit[k].is_infinite()
                && (max_r1 >= level || max_r2 >= level * level)
            {
                self.monitors.first_hit[k] = t;
            }
            if self.monitors.vol_first_hit[k].is_infinite() && nu >= level {
                self.monitors.vol_first_hit[k] = t;
            }
        }
    }

    fn mark_exploded(&mut self, t: T) {
        self.monitors.exploded = true;
        for h in self
            .monitors
            .first_hit
            .iter_mut()
            .chain(self.monitors.vol_first_hit.iter_mut())
        {
            if h.is_infinite() {
                *h = t;
            }
        }
    }
}

/// A recorded trajectory on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord<T, S> {
    pub times: Vec<T>,
    pub states: Vec<S>,
    pub sigma: Vec<T>,
    /// Comparison process; absent for 4-factor paths.
    pub y: Option<Vec<T>>,
    pub x: Vec<T>,
    pub nu: Vec<T>,
    pub ladder: Vec<T>,
    pub monitors: Monitors<T>,
}

impl<T: Real, S> PathRecord<T, S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, snap: &Snapshot<T, S>)
    where
        S: Copy,
    {
        self.times.push(snap.t);
        self.states.push(snap.state);
        self.sigma.push(snap.sigma);
        if let (Some(ys), Some(y)) = (self.y.as_mut(), snap.y) {
            ys.push(y);
        }
        self.x.push(snap.x);
        self.nu.push(snap.nu);
    }
}

/// Simulates one path to the horizon, or until it stops being finite.
///
/// `initial` defaults to the model's zero-noise fixed point.
pub fn simulate_path<T: Real, M: FactorModel<T>>(
    model: &M,
    functional: &VolFunctional<T>,
    config: &SimConfig<T>,
    initial: Option<M::State>,
    noise: NoiseStream,
) -> Result<PathRecord<T, M::State>, EngineError> {
    let initial = match initial {
        Some(s) => s,
        None => model.default_state()?,
    };
    let mut sim = PathSimulator::new(model, functional, config, initial, noise)?;
    let capacity = sim.steps() + 1;
    let mut record = PathRecord {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        sigma: Vec::with_capacity(capacity),
        y: model
            .comparison_coefficients()
            .map(|_| Vec::with_capacity(capacity)),
        x: Vec::with_capacity(capacity),
        nu: Vec::with_capacity(capacity),
        ladder: config.explosion_ladder.clone(),
        monitors: sim.monitors().clone(),
    };
    record.push(sim.snapshot());
    while !sim.finished() {
        let before = sim.step_index();
        sim.advance()?;
        if sim.monitors().exploded {
            break;
        }
        debug_assert_eq!(sim.step_index(), before + 1);
        record.push(sim.snapshot());
    }
    record.monitors = sim.monitors().clone();
    Ok(record)
}
