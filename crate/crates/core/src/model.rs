//! Parameters, states and the volatility functional of the 2- and 4-factor PDV models.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// `R2` values below this are treated as a scheme failure rather than clamped to zero.
pub const NEGATIVE_VARIANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variance factor {field} = {value:e} is negative beyond the clamp tolerance")]
    NegativeVariance { field: &'static str, value: f64 },
    #[error("effective rate {field} is zero with a nonzero weighted numerator")]
    DegenerateRate { field: &'static str },
    #[error("no default initial state for beta2 = {beta2} >= 1; supply an explicit state")]
    NoDefaultState { beta2: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(Validation),
    #[error("invalid initial state: {0}")]
    InvalidState(String),
}

/// One failed sign or range constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

/// Outcome of parameter validation. Never an error by itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ModelError::InvalidParams(self))
        }
    }

    fn require(&mut self, ok: bool, field: &'static str, message: impl Into<String>) {
        if !ok {
            self.violations.push(Violation {
                field,
                message: message.into(),
            });
        }
    }

    fn nonneg<T: Real>(&mut self, value: T, field: &'static str) {
        self.require(value.is_finite(), field, "must be finite");
        if value.is_finite() {
            self.require(
                value >= T::zero(),
                field,
                format!("must be >= 0, got {value}"),
            );
        }
    }

    fn nonpos<T: Real>(&mut self, value: T, field: &'static str) {
        self.require(value.is_finite(), field, "must be finite");
        if value.is_finite() {
            self.require(
                value <= T::zero(),
                field,
                format!("must be <= 0, got {value}"),
            );
        }
    }

    fn unit<T: Real>(&mut self, value: T, field: &'static str) {
        self.require(
            value.is_finite() && value >= T::zero() && value <= T::one(),
            field,
            format!("must lie in [0, 1], got {value}"),
        );
    }
}

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.message))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Coefficients and rates of the 2-factor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pdv2Params<T> {
    pub beta0: T,
    pub beta1: T,
    pub beta2: T,
    pub lambda1: T,
    pub lambda2: T,
}

/// Coefficients, paired rates and mixing weights of the 4-factor model.
///
/// `lambda1[j]` is the rate of `R1,j`, `lambda2[j]` the rate of `R2,j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pdv4Params<T> {
    pub beta0: T,
    pub beta1: T,
    pub beta2: T,
    pub lambda1: [T; 2],
    pub lambda2: [T; 2],
    pub theta1: T,
    pub theta2: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State2<T> {
    /// Exponentially weighted past returns.
    pub r1: T,
    /// Exponentially weighted past squared volatility.
    pub r2: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State4<T> {
    pub r1: [T; 2],
    pub r2: [T; 2],
}

impl<T: Real> Pdv2Params<T> {
    pub fn new(beta0: T, beta1: T, beta2: T, lambda1: T, lambda2: T) -> Self {
        Self {
            beta0,
            beta1,
            beta2,
            lambda1,
            lambda2,
        }
    }

    /// Example 2-factor parameters from the model's original calibration.
    pub fn calibrated() -> Self {
        Self::new(
            T::lit(0.08),
            T::lit(-0.08),
            T::lit(0.5),
            T::lit(62.0),
            T::lit(40.0),
        )
    }

    pub fn validate(&self) -> Validation {
        let mut v = Validation::default();
        v.nonneg(self.beta0, "beta0");
        v.nonpos(self.beta1, "beta1");
        v.nonneg(self.beta2, "beta2");
        v.nonneg(self.lambda1, "lambda1");
        v.nonneg(self.lambda2, "lambda2");
        v
    }
}

impl<T: Real> Pdv4Params<T> {
    /// Example 4-factor parameters from the model's original calibration.
    pub fn calibrated() -> Self {
        Self {
            beta0: T::lit(0.04),
            beta1: T::lit(-0.13),
            beta2: T::lit(0.65),
            lambda1: [T::lit(55.0), T::lit(10.0)],
            lambda2: [T::lit(20.0), T::lit(3.0)],
            theta1: T::lit(0.25),
            theta2: T::lit(0.5),
        }
    }

    pub fn validate(&self) -> Validation {
        let mut v = Validation::default();
        v.nonneg(self.beta0, "beta0");
        v.nonpos(self.beta1, "beta1");
        v.nonneg(self.beta2, "beta2");
        v.nonneg(self.lambda1[0], "lambda1[0]");
        v.nonneg(self.lambda1[1], "lambda1[1]");
        v.nonneg(self.lambda2[0], "lambda2[0]");
        v.nonneg(self.lambda2[1], "lambda2[1]");
        v.unit(self.theta1, "theta1");
        v.unit(self.theta2, "theta2");
        v
    }

    /// The 2-factor model obtained by keeping only kernel `j1` for `R1` and `j2` for `R2`.
    pub fn reduced(&self, j1: usize, j2: usize) -> Pdv2Params<T> {
        Pdv2Params::new(
            self.beta0,
            self.beta1,
            self.beta2,
            self.lambda1[j1],
            self.lambda2[j2],
        )
    }
}

/// Convex mix `(1 - theta) a + theta b`, returning an endpoint exactly at `theta` in {0, 1}.
#[inline]
pub fn mix<T: Real>(theta: T, a: T, b: T) -> T {
    if theta == T::zero() {
        a
    } else if theta == T::one() {
        b
    } else {
        (T::one() - theta) * a + theta * b
    }
}

/// Rate-weighted mixes of the 4-factor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveRates<T> {
    pub lambda1_bar: T,
    pub lambda2_bar: T,
    pub r1_bar: T,
    pub r2_bar: T,
}

fn rate_weighted<T: Real>(
    theta: T,
    rates: [T; 2],
    values: [T; 2],
    field: &'static str,
) -> Result<(T, T), ModelError> {
    let lambda_bar = mix(theta, rates[0], rates[1]);
    let numerator = if theta == T::zero() {
        rates[0] * values[0]
    } else if theta == T::one() {
        rates[1] * values[1]
    } else {
        (T::one() - theta) * rates[0] * values[0] + theta * rates[1] * values[1]
    };
    if lambda_bar == T::zero() {
        if numerator != T::zero() {
            return Err(ModelError::DegenerateRate { field });
        }
        // Both weighted rates vanish; fall back to the plain mix.
        return Ok((lambda_bar, mix(theta, values[0], values[1])));
    }
    let value_bar = if theta == T::zero() {
        values[0]
    } else if theta == T::one() {
        values[1]
    } else {
        numerator / lambda_bar
    };
    Ok((lambda_bar, value_bar))
}

/// Effective rates `lambda_i_bar` and factors `R_i_bar` entering the 4-factor sigma dynamics.
pub fn effective_rates<T: Real>(
    p: &Pdv4Params<T>,
    s: &State4<T>,
) -> Result<EffectiveRates<T>, ModelError> {
    let (lambda1_bar, r1_bar) = rate_weighted(p.theta1, p.lambda1, s.r1, "lambda1_bar")?;
    let (lambda2_bar, r2_bar) = rate_weighted(p.theta2, p.lambda2, s.r2, "lambda2_bar")?;
    Ok(EffectiveRates {
        lambda1_bar,
        lambda2_bar,
        r1_bar,
        r2_bar,
    })
}

/// Quadratic growth constants: `f(x, y)^2 <= k1 (x^2 + y) + k2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants<T> {
    pub k1: T,
    pub k2: T,
}

/// Linear majorant `f(x, y) <= l0 + l1 x + l2 y` and the tilted drift cap `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBound<T> {
    pub l0: T,
    pub l1: T,
    pub l2: T,
    pub l: T,
}

/// A user-supplied volatility map `(R1, R2) -> sigma`; `R2` arrives clamped at zero.
pub type UserFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Clone)]
pub enum FunctionalKind<T> {
    /// `beta0 + beta1 x + beta2 sqrt(y)` with the model's coefficients.
    GlAffineSqrt,
    User {
        name: String,
        f: UserFn<T>,
    },
}

impl<T> fmt::Debug for FunctionalKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalKind::GlAffineSqrt => write!(f, "GlAffineSqrt"),
            FunctionalKind::User { name, .. } => write!(f, "User({name})"),
        }
    }
}

/// The volatility functional `sigma = f(R1, R2)` together with its declared growth constants.
///
/// For the affine square-root kind the constants are derived from the model
/// (see [`crate::theory::growth_constants`]); user functionals must declare them.
#[derive(Debug, Clone)]
pub struct VolFunctional<T> {
    pub kind: FunctionalKind<T>,
    pub growth: Option<GrowthConstants<T>>,
    pub linear: Option<LinearBound<T>>,
}

impl<T: Real> VolFunctional<T> {
    pub fn gl_affine_sqrt() -> Self {
        Self {
            kind: FunctionalKind::GlAffineSqrt,
            growth: None,
            linear: None,
        }
    }

    pub fn user(
        name: impl Into<String>,
        f: impl Fn(T, T) -> T + Send + Sync + 'static,
        k1: T,
        k2: T,
    ) -> Self {
        Self {
            kind: FunctionalKind::User {
                name: name.into(),
                f: Arc::new(f),
            },
            growth: Some(GrowthConstants { k1, k2 }),
            linear: None,
        }
    }

    pub fn with_growth(mut self, k1: T, k2: T) -> Self {
        self.growth = Some(GrowthConstants { k1, k2 });
        self
    }

    pub fn with_linear_bound(mut self, bound: LinearBound<T>) -> Self {
        self.linear = Some(bound);
        self
    }

    pub fn is_affine_sqrt(&self) -> bool {
        matches!(self.kind, FunctionalKind::GlAffineSqrt)
    }

    /// Evaluates `f` at already-mixed factor values.
    pub fn eval(&self, betas: Betas<T>, r1: T, r2: T) -> Result<T, ModelError> {
        let y = clamp_variance(r2, "r2")?;
        Ok(match &self.kind {
            FunctionalKind::GlAffineSqrt => betas.beta0 + betas.beta1 * r1 + betas.beta2 * y.sqrt(),
            FunctionalKind::User { f, .. } => f(r1, y),
        })
    }
}

impl<T: Real> Default for VolFunctional<T> {
    fn default() -> Self {
        Self::gl_affine_sqrt()
    }
}

/// `max(r2, 0)`, or an error when `r2` is negative beyond [`NEGATIVE_VARIANCE_TOLERANCE`].
pub fn clamp_variance<T: Real>(r2: T, field: &'static str) -> Result<T, ModelError> {
    if r2 >= T::zero() {
        Ok(r2)
    } else if r2 >= -T::lit(NEGATIVE_VARIANCE_TOLERANCE) {
        Ok(T::zero())
    } else {
        Err(ModelError::NegativeVariance {
            field,
            value: r2.as_f64(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Betas<T> {
    pub beta0: T,
    pub beta1: T,
    pub beta2: T,
}

/// Structure shared by the 2- and 4-factor models, used by the engine and the checks.
pub trait FactorModel<T: Real>: Clone + fmt::Debug + Send + Sync {
    type State: Copy + fmt::Debug + PartialEq + Send + Sync;

    fn validate(&self) -> Validation;
    fn betas(&self) -> Betas<T>;
    fn r1_rates(&self) -> &[T];
    fn r2_rates(&self) -> &[T];
    fn r1<'a>(&self, s: &'a Self::State) -> &'a [T];
    fn r2<'a>(&self, s: &'a Self::State) -> &'a [T];
    /// Mixed `(R1, R2)` fed to the volatility functional.
    fn mixed(&self, s: &Self::State) -> (T, T);
    /// Builds a new state component-wise: `f1(j, R1_j)`, `f2(j, R2_j)`.
    fn map_state(
        &self,
        s: &Self::State,
        f1: impl Fn(usize, T) -> T,
        f2: impl Fn(usize, T) -> T,
    ) -> Self::State;
    /// Comparison-process coefficients `(beta1, lambda1)`; 2-factor only.
    fn comparison_coefficients(&self) -> Option<(T, T)>;
    /// The zero-noise fixed point, when `beta2 < 1`.
    fn default_state(&self) -> Result<Self::State, ModelError>;

    fn sigma(&self, s: &Self::State, f: &VolFunctional<T>) -> Result<T, ModelError> {
        for &r2 in self.r2(s) {
            clamp_variance(r2, "r2")?;
        }
        let (r1, r2) = self.mixed(s);
        f.eval(self.betas(), r1, r2)
    }

    /// `sum_j R1_j^2 + sum_j R2_j`, the functional controlled by the Gronwall bounds.
    fn moment_functional(&self, s: &Self::State) -> T {
        let a = self.r1(s).iter().fold(T::zero(), |acc, &x| acc + x * x);
        self.r2(s).iter().fold(a, |acc, &x| acc + x)
    }

    fn is_finite(&self, s: &Self::State) -> bool {
        self.r1(s).iter().chain(self.r2(s)).all(|x| x.is_finite())
    }

    fn check_initial_state(&self, s: &Self::State) -> Result<(), ModelError> {
        if !self.is_finite(s) {
            return Err(ModelError::InvalidState("components must be finite".into()));
        }
        if self.r2(s).iter().any(|&x| x <= T::zero()) {
            return Err(ModelError::InvalidState(
                "variance components must be > 0".into(),
            ));
        }
        Ok(())
    }
}

fn fixed_point_variance<T: Real>(b: Betas<T>) -> Result<T, ModelError> {
    if b.beta2 >= T::one() {
        return Err(ModelError::NoDefaultState {
            beta2: b.beta2.as_f64(),
        });
    }
    let level = b.beta0 / (T::one() - b.beta2);
    Ok(level * level)
}

impl<T: Real> FactorModel<T> for Pdv2Params<T> {
    type State = State2<T>;

    fn validate(&self) -> Validation {
        Pdv2Params::validate(self)
    }

    fn betas(&self) -> Betas<T> {
        Betas {
            beta0: self.beta0,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }

    fn r1_rates(&self) -> &[T] {
        std::slice::from_ref(&self.lambda1)
    }

    fn r2_rates(&self) -> &[T] {
        std::slice::from_ref(&self.lambda2)
    }

    fn r1<'a>(&self, s: &'a State2<T>) -> &'a [T] {
        std::slice::from_ref(&s.r1)
    }

    fn r2<'a>(&self, s: &'a State2<T>) -> &'a [T] {
        std::slice::from_ref(&s.r2)
    }

    fn mixed(&self, s: &State2<T>) -> (T, T) {
        (s.r1, s.r2)
    }

    fn map_state(
        &self,
        s: &State2<T>,
        f1: impl Fn(usize, T) -> T,
        f2: impl Fn(usize, T) -> T,
    ) -> State2<T> {
        State2 {
            r1: f1(0, s.r1),
            r2: f2(0, s.r2),
        }
    }

    fn comparison_coefficients(&self) -> Option<(T, T)> {
        Some((self.beta1, self.lambda1))
    }

    fn default_state(&self) -> Result<State2<T>, ModelError> {
        Ok(State2 {
            r1: T::zero(),
            r2: fixed_point_variance(self.betas())?,
        })
    }
}

impl<T: Real> FactorModel<T> for Pdv4Params<T> {
    type State = State4<T>;

    fn validate(&self) -> Validation {
        Pdv4Params::validate(self)
    }

    fn betas(&self) -> Betas<T> {
        Betas {
            beta0: self.beta0,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }

    fn r1_rates(&self) -> &[T] {
        &self.lambda1
    }

    fn r2_rates(&self) -> &[T] {
        &self.lambda2
    }

    fn r1<'a>(&self, s: &'a State4<T>) -> &'a [T] {
        &s.r1
    }

    fn r2<'a>(&self, s: &'a State4<T>) -> &'a [T] {
        &s.r2
    }

    fn mixed(&self, s: &State4<T>) -> (T, T) {
        (
            mix(self.theta1, s.r1[0], s.r1[1]),
            mix(self.theta2, s.r2[0], s.r2[1]),
        )
    }

    fn map_state(
        &self,
        s: &State4<T>,
        f1: impl Fn(usize, T) -> T,
        f2: impl Fn(usize, T) -> T,
    ) -> State4<T> {
        State4 {
            r1: [f1(0, s.r1[0]), f1(1, s.r1[1])],
            r2: [f2(0, s.r2[0]), f2(1, s.r2[1])],
        }
    }

    fn comparison_coefficients(&self) -> Option<(T, T)> {
        None
    }

    fn default_state(&self) -> Result<State4<T>, ModelError> {
        let r2 = fixed_point_variance(self.betas())?;
        Ok(State4 {
            r1: [T::zero(); 2],
            r2: [r2; 2],
        })
    }
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    /// Exact decay of the mean-reverting parts with sigma frozen over the step.
    #[default]
    Exponential,
}

/// Which dynamics to integrate: the model itself or its measure-changed version.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    #[default]
    Original,
    /// `R1` drift `lambda1 (sigma^2 - R1)` instead of `-lambda1 R1`.
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    Gaussian { seed: u64 },
    Zero,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{key}: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

/// Simulation settings for one path or an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig<T> {
    pub dt: T,
    pub horizon: T,
    pub scheme: Scheme,
    pub system: System,
    pub driver: Driver,
    /// Level `C >= 0` of the stopping time `tau = inf{t : sigma_t < -C}`.
    pub stop_floor_c: T,
    /// Thresholds `M` of the explosion monitors, strictly increasing.
    pub explosion_ladder: Vec<T>,
    pub paths: usize,
    /// Pair paths `(2k, 2k+1)` on negated increments.
    pub antithetic: bool,
    /// Initial price `x0 > 0`.
    pub x0: T,
}

impl<T: Real> SimConfig<T> {
    pub fn new(dt: T, horizon: T) -> Self {
        Self {
            dt,
            horizon,
            scheme: Scheme::Exponential,
            system: System::Original,
            driver: Driver::Gaussian { seed: 0 },
            stop_floor_c: T::zero(),
            explosion_ladder: vec![T::lit(5.0), T::lit(10.0), T::lit(20.0)],
            paths: 1,
            antithetic: false,
            x0: T::one(),
        }
    }

    /// `min(1e-3, 0.1 / max lambda)`.
    pub fn default_dt(rates: &[T]) -> T {
        let max_rate = rates.iter().fold(T::zero(), |m, &r| m.max(r));
        let cap = T::lit(1e-3);
        if max_rate > T::zero() {
            cap.min(T::lit(0.1) / max_rate)
        } else {
            cap
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(invalid(
                "dt",
                format!("must be finite and > 0, got {}", self.dt),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > T::zero()) {
            return Err(invalid(
                "horizon",
                format!("must be finite and > 0, got {}", self.horizon),
            ));
        }
        if self.paths == 0 {
            return Err(invalid("paths", "must be >= 1"));
        }
        if !(self.stop_floor_c.is_finite() && self.stop_floor_c >= T::zero()) {
            return Err(invalid("stop_floor_c", "must be finite and >= 0"));
        }
        if !(self.x0.is_finite() && self.x0 > T::zero()) {
            return Err(invalid("x0", "must be finite and > 0"));
        }
        if self
            .explosion_ladder
            .iter()
            .any(|m| !m.is_finite() || *m <= T::zero())
        {
            return Err(invalid("ladder", "thresholds must be finite and > 0"));
        }
        if self.explosion_ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("ladder", "thresholds must be strictly increasing"));
        }
        let steps = (self.horizon / self.dt).round();
        let mismatch = ((steps * self.dt - self.horizon) / self.horizon).abs();
        if steps < T::one() || mismatch > T::lit(1e-6) {
            return Err(invalid(
                "dt",
                format!(
                    "horizon {} is not a multiple of dt {}",
                    self.horizon, self.dt
                ),
            ));
        }
        Ok(())
    }

    /// Number of steps to the horizon. Assumes [`SimConfig::validate`] passed.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt)
            .round()
            .to_usize()
            .unwrap_or(0)
            .max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn calibrated_parameters_validate() {
        assert!(Pdv2Params::<f64>::calibrated().validate().is_ok());
        assert!(Pdv4Params::<f64>::calibrated().validate().is_ok());
    }

    #[test]
    fn positive_beta1_names_the_field() {
        let p = Pdv2Params {
            beta1: 0.1,
            ..Pdv2Params::<f64>::calibrated()
        };
        let v = p.validate();
        assert_eq!(v.violations.len(), 1);
        assert_eq!(v.violations[0].field, "beta1");
        // idempotent
        assert_eq!(p.validate(), v);
    }

    #[test]
    fn validation_is_total_on_garbage() {
        let p = Pdv4Params {
            beta0: f64::NAN,
            beta1: 1.0,
            beta2: -1.0,
            lambda1: [-1.0, f64::INFINITY],
            lambda2: [0.0, -0.0],
            theta1: 2.0,
            theta2: -0.5,
        };
        let fields: Vec<_> = p.validate().violations.iter().map(|v| v.field).collect();
        assert_eq!(
            fields,
            [
                "beta0",
                "beta1",
                "beta2",
                "lambda1[0]",
                "lambda1[1]",
                "theta1",
                "theta2"
            ]
        );
    }

    #[test]
    fn sigma_at_calibrated_point() {
        let p = Pdv2Params::<f64>::calibrated();
        let s = State2 {
            r1: 0.0,
            r2: 0.0256,
        };
        let sigma = p.sigma(&s, &VolFunctional::default()).unwrap();
        assert_relative_eq!(sigma, 0.16, max_relative = 1e-15);
    }

    #[test]
    fn constant_volatility_when_feedback_off() {
        let p = Pdv2Params::new(0.3, 0.0, 0.0, 5.0, 7.0);
        for (r1, r2) in [(-3.0, 0.1), (100.0, 4.0), (0.0, 1e-9)] {
            let s = State2 { r1, r2 };
            assert_eq!(p.sigma(&s, &VolFunctional::default()).unwrap(), 0.3);
        }
    }

    #[test]
    fn mixing_formula_for_r1() {
        let p = Pdv4Params::<f64>::calibrated();
        let s = State4 {
            r1: [-1.0, 4.0],
            r2: [0.01, 0.01],
        };
        let (r1, r2) = p.mixed(&s);
        assert_eq!(r1, 0.25);
        assert_eq!(r2, 0.01);
        let sigma = p.sigma(&s, &VolFunctional::default()).unwrap();
        assert_relative_eq!(sigma, 0.04 - 0.13 * 0.25 + 0.65 * 0.1, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_mixing_matches_two_factor_sigma() {
        let base = Pdv4Params::<f64>::calibrated();
        let s4 = State4 {
            r1: [0.3, -0.7],
            r2: [0.02, 0.05],
        };
        let f = VolFunctional::default();
        for (t1, t2) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let p = Pdv4Params {
                theta1: t1,
                theta2: t2,
                ..base
            };
            let j1 = t1 as usize;
            let j2 = t2 as usize;
            let s2 = State2 {
                r1: s4.r1[j1],
                r2: s4.r2[j2],
            };
            let a = p.sigma(&s4, &f).unwrap();
            let b = p.reduced(j1, j2).sigma(&s2, &f).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn effective_rates_calibrated() {
        let p = Pdv4Params::<f64>::calibrated();
        let s = State4 {
            r1: [-1.0, 4.0],
            r2: [0.01, 0.02],
        };
        let e = effective_rates(&p, &s).unwrap();
        assert_relative_eq!(e.lambda1_bar, 43.75, max_relative = 1e-15);
        assert_relative_eq!(e.lambda2_bar, 11.5, max_relative = 1e-15);
        assert_relative_eq!(e.r1_bar, -31.25 / 43.75, max_relative = 1e-14);
        assert_relative_eq!(
            e.r2_bar,
            (10.0 * 0.01 + 1.5 * 0.02) / 11.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn effective_rates_at_degenerate_mixing_are_exact() {
        let s = State4 {
            r1: [0.37, -2.1],
            r2: [0.013, 0.9],
        };
        for (t, j) in [(0.0, 0usize), (1.0, 1usize)] {
            let p = Pdv4Params {
                theta1: t,
                theta2: t,
                ..Pdv4Params::<f64>::calibrated()
            };
            let e = effective_rates(&p, &s).unwrap();
            assert_eq!(e.lambda1_bar, p.lambda1[j]);
            assert_eq!(e.lambda2_bar, p.lambda2[j]);
            assert_eq!(e.r1_bar, s.r1[j]);
            assert_eq!(e.r2_bar, s.r2[j]);
        }
    }

    #[test]
    fn zero_effective_rate_with_nonzero_numerator_is_an_error() {
        // lambda_bar = 0.5 * 1 + 0.5 * (-1) = 0, numerator 0.5 * 1 * 2 + 0.5 * (-1) * 1 != 0
        let p = Pdv4Params {
            lambda1: [1.0, -1.0],
            theta1: 0.5,
            ..Pdv4Params::<f64>::calibrated()
        };
        let s = State4 {
            r1: [2.0, 1.0],
            r2: [0.1, 0.1],
        };
        assert_eq!(
            effective_rates(&p, &s),
            Err(ModelError::DegenerateRate {
                field: "lambda1_bar"
            })
        );
    }

    #[test]
    fn default_state_is_fixed_point() {
        let p = Pdv2Params::<f64>::calibrated();
        let s = p.default_state().unwrap();
        assert_eq!(s.r1, 0.0);
        assert_relative_eq!(s.r2, 0.0256, max_relative = 1e-15);
        let sigma = p.sigma(&s, &VolFunctional::default()).unwrap();
        assert_relative_eq!(sigma, 0.16, max_relative = 1e-15);

        let p0 = Pdv2Params::new(0.2, -0.1, 0.0, 1.0, 1.0);
        assert_relative_eq!(p0.default_state().unwrap().r2, 0.04, max_relative = 1e-15);

        let p4 = Pdv4Params::<f64>::calibrated();
        let s4 = p4.default_state().unwrap();
        let expected = (0.04f64 / 0.35).powi(2);
        assert_relative_eq!(s4.r2[0], expected, max_relative = 1e-15);
        assert_relative_eq!(s4.r2[1], expected, max_relative = 1e-15);
        assert_eq!(s4.r1, [0.0, 0.0]);
    }

    #[test]
    fn no_default_state_for_large_beta2() {
        let p = Pdv2Params::new(0.1, -0.1, 1.0, 1.0, 1.0);
        assert!(matches!(
            p.default_state(),
            Err(ModelError::NoDefaultState { .. })
        ));
    }

    #[test]
    fn variance_clamp_and_domain_error() {
        let p = Pdv2Params::<f64>::calibrated();
        let f = VolFunctional::default();
        let tiny = State2 {
            r1: 0.0,
            r2: -1e-13,
        };
        assert_eq!(p.sigma(&tiny, &f).unwrap(), 0.08);
        let bad = State2 { r1: 0.0, r2: -1e-6 };
        assert!(matches!(
            p.sigma(&bad, &f),
            Err(ModelError::NegativeVariance { .. })
        ));
    }

    #[test]
    fn user_functional_is_used() {
        let p = Pdv2Params::<f64>::calibrated();
        let f = VolFunctional::user("sqrt_y", |_x, y: f64| y.sqrt(), 1.0, 0.0);
        let s = State2 { r1: 5.0, r2: 0.09 };
        assert_relative_eq!(p.sigma(&s, &f).unwrap(), 0.3, max_relative = 1e-15);
    }

    #[test]
    fn config_validation_names_keys() {
        let mut c = SimConfig::<f64>::new(1e-3, 1.0);
        assert!(c.validate().is_ok());
        assert_eq!(c.steps(), 1000);
        c.explosion_ladder = vec![10.0, 5.0];
        assert!(c.validate().unwrap_err().to_string().starts_with("ladder"));
        c.explosion_ladder = vec![5.0];
        c.dt = 0.0;
        assert!(c.validate().unwrap_err().to_string().starts_with("dt"));
        c.dt = 0.3;
        assert!(c.validate().unwrap_err().to_string().contains("multiple"));
    }

    #[test]
    fn default_dt_respects_fastest_rate() {
        assert_eq!(SimConfig::<f64>::default_dt(&[62.0, 40.0]), 1e-3);
        assert_relative_eq!(SimConfig::<f64>::default_dt(&[200.0, 3.0]), 5e-4);
        assert_eq!(SimConfig::<f64>::default_dt(&[0.0]), 1e-3);
    }
}
