//! On-disk run configuration.
//!
//! Unknown keys are rejected everywhere. [`RunConfig::resolve`] fills every
//! default in, and the resolved form is what reports embed.

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::mc::{
    ConvergenceOptions, MartingaleOptions, MomentOptions, PositivityFailureOptions,
    TiltedDriftOptions,
};
use crate::model::{
    Driver, FactorModel, Pdv2Params, Pdv4Params, Scheme, SimConfig, State2, State4, System,
    VolFunctional,
};
use crate::theory::CounterexampleOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub functional: FunctionalBlock,
    pub sim: SimBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckSpec>>,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Exactly one of `two_factor` or `four_factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelBlock {
    TwoFactor(TwoFactorBlock),
    FourFactor(FourFactorBlock),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keyword {
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState<S> {
    Keyword(Keyword),
    Values(S),
}

impl<S> Default for InitialState<S> {
    fn default() -> Self {
        Self::Keyword(Keyword::Default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoFactorState {
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourFactorState {
    pub r1: [f64; 2],
    pub r2: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoFactorBlock {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(default)]
    pub initial_state: InitialState<TwoFactorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourFactorBlock {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda1: [f64; 2],
    pub lambda2: [f64; 2],
    pub theta1: f64,
    pub theta2: f64,
    #[serde(default)]
    pub initial_state: InitialState<FourFactorState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalName {
    #[default]
    GlAffineSqrt,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalBlock {
    #[serde(default)]
    pub kind: FunctionalName,
    /// Declared growth constants; derived from the betas when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverName {
    #[default]
    Gaussian,
    Zero,
}

fn default_ladder() -> Vec<f64> {
    vec![5.0, 10.0, 20.0]
}

fn one() -> f64 {
    1.0
}

fn one_path() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    /// Defaults to `min(1e-3, 0.1 / max lambda)`.
    #[serde(default)]
    pub dt: Option<f64>,
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub system: System,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_path")]
    pub paths: usize,
    #[serde(default)]
    pub driver: DriverName,
    #[serde(default)]
    pub stop_floor_c: f64,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<f64>,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "one")]
    pub x0: f64,
}

/// A requested check with its overrides. Absent fields fall back to the sim
/// block or the check's own defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Nonexplosion {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        horizon: Option<f64>,
    },
    MomentBound {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        t: Option<f64>,
    },
    Positivity {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        horizon: Option<f64>,
    },
    #[serde(rename = "positivity_failure_4f")]
    PositivityFailure4f {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        times: Option<Vec<f64>>,
        #[serde(default)]
        beta0: Option<f64>,
        #[serde(default)]
        beta1: Option<f64>,
        #[serde(default)]
        negative_component: Option<f64>,
        #[serde(default)]
        target_r1: Option<f64>,
    },
    Martingale {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        horizon: Option<f64>,
        #[serde(default)]
        antithetic: Option<bool>,
        #[serde(default)]
        ladder_horizon: Option<f64>,
        #[serde(default)]
        ladder_paths: Option<usize>,
    },
    TiltedDriftBound {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        level: Option<f64>,
        #[serde(default)]
        times: Option<Vec<f64>>,
    },
    Convergence {
        #[serde(default)]
        paths: Option<usize>,
        #[serde(default)]
        horizon: Option<f64>,
        #[serde(default)]
        dt_ladder: Option<Vec<f64>>,
        #[serde(default)]
        reference_dt: Option<f64>,
    },
}

impl CheckSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CheckSpec::Nonexplosion { .. } => "nonexplosion",
            CheckSpec::MomentBound { .. } => "moment_bound",
            CheckSpec::Positivity { .. } => "positivity",
            CheckSpec::PositivityFailure4f { .. } => "positivity_failure_4f",
            CheckSpec::Martingale { .. } => "martingale",
            CheckSpec::TiltedDriftBound { .. } => "tilted_drift_bound",
            CheckSpec::Convergence { .. } => "convergence",
        }
    }

    fn bare(name: &str) -> Option<Self> {
        Some(match name {
            "nonexplosion" => CheckSpec::Nonexplosion {
                paths: None,
                dt: None,
                horizon: None,
            },
            "moment_bound" => CheckSpec::MomentBound {
                paths: None,
                dt: None,
                t: None,
            },
            "positivity" => CheckSpec::Positivity {
                paths: None,
                dt: None,
                horizon: None,
            },
            "positivity_failure_4f" => CheckSpec::PositivityFailure4f {
                paths: None,
                dt: None,
                times: None,
                beta0: None,
                beta1: None,
                negative_component: None,
                target_r1: None,
            },
            "martingale" => CheckSpec::Martingale {
                paths: None,
                dt: None,
                horizon: None,
                antithetic: None,
                ladder_horizon: None,
                ladder_paths: None,
            },
            "tilted_drift_bound" => CheckSpec::TiltedDriftBound {
                paths: None,
                dt: None,
                level: None,
                times: None,
            },
            "convergence" => CheckSpec::Convergence {
                paths: None,
                horizon: None,
                dt_ladder: None,
                reference_dt: None,
            },
            _ => return None,
        })
    }

    /// Every option made explicit, given the resolved sim block.
    fn resolved(&self, sim: &SimConfig<f64>) -> Self {
        let paths = |p: &Option<usize>| Some(p.unwrap_or(sim.paths));
        let dt = |d: &Option<f64>| Some(d.unwrap_or(sim.dt));
        let horizon = |h: &Option<f64>| Some(h.unwrap_or(sim.horizon));
        match self {
            CheckSpec::Nonexplosion {
                paths: p,
                dt: d,
                horizon: h,
            } => CheckSpec::Nonexplosion {
                paths: paths(p),
                dt: dt(d),
                horizon: horizon(h),
            },
            CheckSpec::MomentBound { paths: p, dt: d, t } => CheckSpec::MomentBound {
                paths: paths(p),
                dt: dt(d),
                t: Some(t.unwrap_or(MomentOptions::default().t)),
            },
            CheckSpec::Positivity {
                paths: p,
                dt: d,
                horizon: h,
            } => CheckSpec::Positivity {
                paths: paths(p),
                dt: dt(d),
                horizon: horizon(h),
            },
            CheckSpec::PositivityFailure4f {
                paths: p,
                dt: d,
                times,
                beta0,
                beta1,
                negative_component,
                target_r1,
            } => {
                let o = CounterexampleOptions::<f64>::default();
                CheckSpec::PositivityFailure4f {
                    paths: paths(p),
                    dt: dt(d),
                    times: Some(
                        times
                            .clone()
                            .unwrap_or_else(|| PositivityFailureOptions::default().times),
                    ),
                    beta0: Some(beta0.unwrap_or(o.beta0)),
                    beta1: Some(beta1.unwrap_or(o.beta1)),
                    negative_component: Some(negative_component.unwrap_or(o.negative_component)),
                    target_r1: Some(target_r1.unwrap_or(o.target_r1)),
                }
            }
            CheckSpec::Martingale {
                paths: p,
                dt: d,
                horizon: h,
                antithetic,
                ladder_horizon,
                ladder_paths,
            } => {
                let o = MartingaleOptions::default();
                CheckSpec::Martingale {
                    paths: paths(p),
                    dt: dt(d),
                    horizon: horizon(h),
                    antithetic: Some(antithetic.unwrap_or(sim.antithetic)),
                    ladder_horizon: Some(ladder_horizon.unwrap_or(o.ladder_horizon)),
                    ladder_paths: Some(ladder_paths.unwrap_or(o.ladder_paths)),
                }
            }
            CheckSpec::TiltedDriftBound {
                paths: p,
                dt: d,
                level,
                times,
            } => {
                let o = TiltedDriftOptions::default();
                CheckSpec::TiltedDriftBound {
                    paths: paths(p),
                    dt: dt(d),
                    level: Some(level.unwrap_or(o.level)),
                    times: Some(times.clone().unwrap_or(o.times)),
                }
            }
            CheckSpec::Convergence {
                paths: p,
                horizon: h,
                dt_ladder,
                reference_dt,
            } => {
                let o = ConvergenceOptions::default();
                CheckSpec::Convergence {
                    paths: paths(p),
                    horizon: horizon(h),
                    dt_ladder: Some(dt_ladder.clone().unwrap_or(o.dt_ladder)),
                    reference_dt: Some(reference_dt.unwrap_or(o.reference_dt)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

fn default_directory() -> String {
    "pdv-output".to_string()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: String,
    /// Trajectory file formats written by `simulate`.
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

/// A validated model with its initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedModel {
    TwoFactor(Pdv2Params<f64>, State2<f64>),
    FourFactor(Pdv4Params<f64>, State4<f64>),
}

/// Everything a command needs, with defaults applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// The configuration as it will be echoed into outputs.
    pub config: RunConfig,
    pub model: ResolvedModel,
    pub functional: VolFunctional<f64>,
    pub sim: SimConfig<f64>,
    pub checks: Vec<CheckSpec>,
}

fn config_error(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {message}"))
}

fn initial_or_default<M: FactorModel<f64>>(
    model: &M,
    explicit: Option<M::State>,
    key: &str,
) -> Result<M::State, CliError> {
    let s = match explicit {
        Some(s) => s,
        None => model
            .default_state()
            .map_err(|e| config_error(&format!("{key}.initial_state"), e))?,
    };
    model
        .check_initial_state(&s)
        .map_err(|e| config_error(&format!("{key}.initial_state"), e))?;
    Ok(s)
}

fn validated<M: FactorModel<f64>>(model: &M, key: &str) -> Result<(), CliError> {
    let v = model.validate();
    if v.is_ok() {
        return Ok(());
    }
    let all: Vec<String> = v
        .violations
        .iter()
        .map(|x| format!("{key}.{}: {}", x.field, x.message))
        .collect();
    Err(CliError::Config(all.join("; ")))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let mut config = self.clone();
        let (model, rates) = match &self.model {
            ModelBlock::TwoFactor(b) => {
                let p = Pdv2Params::new(b.beta0, b.beta1, b.beta2, b.lambda1, b.lambda2);
                validated(&p, "model.two_factor")?;
                let explicit = match b.initial_state {
                    InitialState::Values(s) => Some(State2 { r1: s.r1, r2: s.r2 }),
                    InitialState::Keyword(_) => None,
                };
                let s = initial_or_default(&p, explicit, "model.two_factor")?;
                if let ModelBlock::TwoFactor(out) = &mut config.model {
                    out.initial_state = InitialState::Values(TwoFactorState { r1: s.r1, r2: s.r2 });
                }
                (ResolvedModel::TwoFactor(p, s), vec![p.lambda1, p.lambda2])
            }
            ModelBlock::FourFactor(b) => {
                let p = Pdv4Params {
                    beta0: b.beta0,
                    beta1: b.beta1,
                    beta2: b.beta2,
                    lambda1: b.lambda1,
                    lambda2: b.lambda2,
                    theta1: b.theta1,
                    theta2: b.theta2,
                };
                validated(&p, "model.four_factor")?;
                let explicit = match b.initial_state {
                    InitialState::Values(s) => Some(State4 { r1: s.r1, r2: s.r2 }),
                    InitialState::Keyword(_) => None,
                };
                let s = initial_or_default(&p, explicit, "model.four_factor")?;
                if let ModelBlock::FourFactor(out) = &mut config.model {
                    out.initial_state =
                        InitialState::Values(FourFactorState { r1: s.r1, r2: s.r2 });
                }
                let mut rates = p.lambda1.to_vec();
                rates.extend(p.lambda2);
                (ResolvedModel::FourFactor(p, s), rates)
            }
        };

        let mut functional = VolFunctional::gl_affine_sqrt();
        match (self.functional.k1, self.functional.k2) {
            (Some(k1), Some(k2)) => {
                if !(k1.is_finite() && k1 >= 0.0) {
                    return Err(config_error("functional.k1", "must be finite and >= 0"));
                }
                if !(k2.is_finite() && k2 >= 0.0) {
                    return Err(config_error("functional.k2", "must be finite and >= 0"));
                }
                functional = functional.with_growth(k1, k2);
            }
            (None, None) => {}
            (Some(_), None) => return Err(config_error("functional.k2", "required with k1")),
            (None, Some(_)) => return Err(config_error("functional.k1", "required with k2")),
        }

        let b = &self.sim;
        let dt = b.dt.unwrap_or_else(|| SimConfig::default_dt(&rates));
        let sim = SimConfig {
            dt,
            horizon: b.horizon,
            scheme: b.scheme,
            system: b.system,
            driver: match b.driver {
                DriverName::Gaussian => Driver::Gaussian { seed: b.seed },
                DriverName::Zero => Driver::Zero,
            },
            stop_floor_c: b.stop_floor_c,
            explosion_ladder: b.ladder.clone(),
            paths: b.paths,
            antithetic: b.antithetic,
            x0: b.x0,
        };
        sim.validate()
            .map_err(|e| CliError::Config(format!("sim.{e}")))?;
        config.sim.dt = Some(dt);

        let requested = match &self.checks {
            Some(list) => list.clone(),
            None => default_checks(&model),
        };
        let checks: Vec<CheckSpec> = requested.iter().map(|c| c.resolved(&sim)).collect();
        for (i, c) in checks.iter().enumerate() {
            validate_check(c).map_err(|e| CliError::Config(format!("checks[{i}].{e}")))?;
        }
        config.checks = Some(checks.clone());

        Ok(Resolved {
            config,
            model,
            functional,
            sim,
            checks,
        })
    }
}

/// The checks that apply to the configured model.
fn default_checks(model: &ResolvedModel) -> Vec<CheckSpec> {
    let names: &[&str] = match model {
        ResolvedModel::TwoFactor(..) => &[
            "nonexplosion",
            "moment_bound",
            "positivity",
            "martingale",
            "tilted_drift_bound",
            "convergence",
        ],
        ResolvedModel::FourFactor(..) => &[
            "nonexplosion",
            "moment_bound",
            "positivity_failure_4f",
            "convergence",
        ],
    };
    names.iter().filter_map(|n| CheckSpec::bare(n)).collect()
}

fn positive(key: &str, v: Option<f64>) -> Result<(), String> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => {
            Err(format!("{key}: must be finite and > 0, got {x}"))
        }
        _ => Ok(()),
    }
}

fn validate_check(c: &CheckSpec) -> Result<(), String> {
    let paths_ok = |p: &Option<usize>| match p {
        Some(0) => Err("paths: must be >= 1".to_string()),
        _ => Ok(()),
    };
    match c {
        CheckSpec::Nonexplosion { paths, dt, horizon }
        | CheckSpec::Positivity { paths, dt, horizon } => {
            paths_ok(paths)?;
            positive("dt", *dt)?;
            positive("horizon", *horizon)
        }
        CheckSpec::MomentBound { paths, dt, t } => {
            paths_ok(paths)?;
            positive("dt", *dt)?;
            positive("t", *t)
        }
        CheckSpec::PositivityFailure4f {
            paths,
            dt,
            times,
            beta0,
            ..
        } => {
            paths_ok(paths)?;
            positive("dt", *dt)?;
            positive("beta0", *beta0)?;
            for t in times.iter().flatten() {
                positive("times", Some(*t))?;
            }
            Ok(())
        }
        CheckSpec::Martingale {
            paths,
            dt,
            horizon,
            ladder_horizon,
            ladder_paths,
            ..
        } => {
            paths_ok(paths)?;
            paths_ok(ladder_paths).map_err(|e| format!("ladder_{e}"))?;
            positive("dt", *dt)?;
            positive("horizon", *horizon)?;
            positive("ladder_horizon", *ladder_horizon)
        }
        CheckSpec::TiltedDriftBound {
            paths,
            dt,
            level,
            times,
        } => {
            paths_ok(paths)?;
            positive("dt", *dt)?;
            positive("level", *level)?;
            for t in times.iter().flatten() {
                positive("times", Some(*t))?;
            }
            Ok(())
        }
        CheckSpec::Convergence {
            paths,
            horizon,
            dt_ladder,
            reference_dt,
        } => {
            paths_ok(paths)?;
            positive("horizon", *horizon)?;
            positive("reference_dt", *reference_dt)?;
            for d in dt_ladder.iter().flatten() {
                positive("dt_ladder", Some(*d))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_FACTOR: &str = r#"{
        "model": {"two_factor": {"beta0": 0.08, "beta1": -0.08, "beta2": 0.5,
                                 "lambda1": 62, "lambda2": 40, "initial_state": "default"}},
        "sim": {"dt": 1e-4, "horizon": 0.01, "seed": 42}
    }"#;

    #[test]
    fn parses_and_resolves_defaults() {
        let r = RunConfig::from_json(TWO_FACTOR).unwrap().resolve().unwrap();
        match r.model {
            ResolvedModel::TwoFactor(p, s) => {
                assert_eq!(p, Pdv2Params::calibrated());
                assert_eq!(s.r1, 0.0);
                assert!((s.r2 - 0.0256).abs() < 1e-15);
            }
            _ => panic!("expected 2-factor"),
        }
        assert_eq!(r.sim.driver, Driver::Gaussian { seed: 42 });
        assert_eq!(r.checks.len(), 6);
        assert!(matches!(
            r.config.model,
            ModelBlock::TwoFactor(TwoFactorBlock {
                initial_state: InitialState::Values(_),
                ..
            })
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = TWO_FACTOR.replace("\"seed\": 42", "\"seed\": 42, \"sede\": 1");
        let e = RunConfig::from_json(&bad).unwrap_err();
        assert!(e.to_string().contains("sede"), "{e}");
        let bad = TWO_FACTOR.replace("\"lambda2\": 40", "\"lambda2\": 40, \"gamma\": 1");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn positive_beta1_names_the_key() {
        let bad = TWO_FACTOR.replace("-0.08", "0.08");
        let e = RunConfig::from_json(&bad).unwrap().resolve().unwrap_err();
        assert!(matches!(e, CliError::Config(_)));
        assert!(e.to_string().contains("beta1"), "{e}");
    }

    #[test]
    fn sim_errors_name_the_key() {
        let bad = TWO_FACTOR.replace("\"horizon\": 0.01", "\"horizon\": 0.01, \"paths\": 0");
        let e = RunConfig::from_json(&bad).unwrap().resolve().unwrap_err();
        assert!(e.to_string().contains("sim.paths"), "{e}");
    }

    #[test]
    fn check_overrides() {
        let with_checks = TWO_FACTOR.replace(
            "\"seed\": 42}",
            "\"seed\": 42}, \"checks\": [{\"name\": \"martingale\", \"paths\": 10}, {\"name\": \"positivity_failure_4f\"}]",
        );
        let r = RunConfig::from_json(&with_checks)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.checks.len(), 2);
        match &r.checks[0] {
            CheckSpec::Martingale {
                paths,
                ladder_paths,
                ..
            } => {
                assert_eq!(*paths, Some(10));
                assert_eq!(*ladder_paths, Some(10_000));
            }
            other => panic!("{other:?}"),
        }
        let bad = TWO_FACTOR.replace(
            "\"seed\": 42}",
            "\"seed\": 42}, \"checks\": [{\"name\": \"martingale\", \"pathz\": 10}]",
        );
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn four_factor_block() {
        let cfg = r#"{
            "model": {"four_factor": {"beta0": 0.04, "beta1": -0.13, "beta2": 0.65,
                "lambda1": [55, 10], "lambda2": [20, 3], "theta1": 0.25, "theta2": 0.5,
                "initial_state": {"r1": [0.0, 0.0], "r2": [0.01, 0.01]}}},
            "sim": {"horizon": 0.01}
        }"#;
        let r = RunConfig::from_json(cfg).unwrap().resolve().unwrap();
        assert!(matches!(r.model, ResolvedModel::FourFactor(..)));
        assert_eq!(r.sim.dt, 1e-3);
        assert_eq!(r.checks.len(), 4);
    }

    #[test]
    fn two_model_blocks_are_rejected() {
        let cfg = r#"{
            "model": {"two_factor": {"beta0": 0.08, "beta1": -0.08, "beta2": 0.5, "lambda1": 62, "lambda2": 40},
                      "four_factor": {"beta0": 0.04, "beta1": -0.13, "beta2": 0.65,
                "lambda1": [55, 10], "lambda2": [20, 3], "theta1": 0.25, "theta2": 0.5}},
            "sim": {"horizon": 0.01}
        }"#;
        assert!(RunConfig::from_json(cfg).is_err());
    }
}
