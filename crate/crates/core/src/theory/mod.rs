//! Closed-form constants: moment bounds, positivity conditions, tilted drift bounds and growth constants.

pub mod gronwall;
pub mod growth;
pub mod positivity;
pub mod tilted;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ModelError, Pdv2Params, Pdv4Params, State2, State4, VolFunctional};
use crate::scalar::Real;

pub use gronwall::{
    finite_horizon, gronwall_constants_2f, gronwall_constants_4f, Gronwall2, Gronwall4,
};
pub use growth::{
    affine_growth, check_growth, growth_constants, growth_constants_2f, FunctionalConstants,
    GrowthReport, GrowthViolation, SampleBox,
};
pub use positivity::{
    counterexample_4f, positivity_condition_2f, positivity_condition_4f, sigma_drift_4f,
    CounterexampleOptions, CounterexampleSpec, PositivityCondition,
};
pub use tilted::{
    canonical_beta2_hat, tilted_bound_constants, tilted_bound_constants_with, TiltedConstants,
};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSet2<T> {
    pub gronwall: Gronwall2<T>,
    pub positivity: PositivityCondition<T>,
    pub tilted: Option<TiltedConstants<T>>,
    pub tilted_inapplicable: Option<String>,
    pub growth: Option<FunctionalConstants<T>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSet4<T> {
    pub gronwall: Gronwall4<T>,
    pub positivity: PositivityCondition<T>,
    pub growth: Option<FunctionalConstants<T>>,
}

pub fn bounds_2f<T: Real>(p: &Pdv2Params<T>, s: &State2<T>, f: &VolFunctional<T>) -> BoundSet2<T> {
    let (tilted, tilted_inapplicable) = match tilted_bound_constants(p, s) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    BoundSet2 {
        gronwall: gronwall_constants_2f(p, s),
        positivity: positivity_condition_2f(p, Some((s, f))),
        tilted,
        tilted_inapplicable,
        growth: growth_constants_2f(f, p, s),
    }
}

pub fn bounds_4f<T: Real>(p: &Pdv4Params<T>, s: &State4<T>, f: &VolFunctional<T>) -> BoundSet4<T> {
    BoundSet4 {
        gronwall: gronwall_constants_4f(p, s),
        positivity: positivity_condition_4f(p),
        growth: growth_constants(f, p, None),
    }
}
