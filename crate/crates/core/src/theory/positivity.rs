//! The rate condition for sigma > 0 and the 4-factor counterexample to its analogue.

use serde::Serialize;

use super::TheoryError;
use crate::model::{
    effective_rates, FactorModel, Pdv2Params, Pdv4Params, State2, State4, VolFunctional,
};
use crate::scalar::Real;

/// Verdict on `lambda2 < 2 lambda1` (or its effective-rate analogue).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityCondition<T> {
    pub lambda2: T,
    pub two_lambda1: T,
    /// Strict inequality `lambda2 < 2 lambda1`.
    pub rate_condition: bool,
    /// `sigma0 > 0`, when an initial state was supplied.
    pub sigma0_positive: Option<bool>,
    /// False for the 4-factor comparison, which does not imply positivity.
    pub sufficient: bool,
    pub holds: bool,
    pub summary: String,
}

fn rate_summary<T: Real>(holds: bool, lhs: T, rhs: T) -> String {
    let (word, op) = if holds {
        ("holds", "<")
    } else {
        ("fails", ">=")
    };
    format!("{word} ({lhs} {op} {rhs})")
}

/// 2-factor: sigma stays positive when `lambda2 < 2 lambda1` and `sigma0 > 0`.
pub fn positivity_condition_2f<T: Real>(
    p: &Pdv2Params<T>,
    initial: Option<(&State2<T>, &VolFunctional<T>)>,
) -> PositivityCondition<T> {
    let two_lambda1 = T::two() * p.lambda1;
    let rate_condition = p.lambda2 < two_lambda1;
    let sigma0_positive =
        initial.map(|(s, f)| p.sigma(s, f).map(|v| v > T::zero()).unwrap_or(false));
    let holds = rate_condition && sigma0_positive.unwrap_or(true);
    let mut summary = rate_summary(rate_condition, p.lambda2, two_lambda1);
    if sigma0_positive == Some(false) {
        summary.push_str("; sigma0 <= 0");
    }
    PositivityCondition {
        lambda2: p.lambda2,
        two_lambda1,
        rate_condition,
        sigma0_positive,
        sufficient: true,
        holds,
        summary,
    }
}

/// 4-factor: the effective-rate comparison, always flagged as not sufficient.
pub fn positivity_condition_4f<T: Real>(p: &Pdv4Params<T>) -> PositivityCondition<T> {
    let lambda1_bar = mix_rates(p.theta1, p.lambda1);
    let lambda2_bar = mix_rates(p.theta2, p.lambda2);
    let two_lambda1 = T::two() * lambda1_bar;
    let rate_condition = lambda2_bar < two_lambda1;
    let summary = format!(
        "effective rates: {}; not sufficient for sigma > 0",
        rate_summary(rate_condition, lambda2_bar, two_lambda1)
    );
    PositivityCondition {
        lambda2: lambda2_bar,
        two_lambda1,
        rate_condition,
        sigma0_positive: None,
        sufficient: false,
        holds: false,
        summary,
    }
}

fn mix_rates<T: Real>(theta: T, rates: [T; 2]) -> T {
    crate::model::mix(theta, rates[0], rates[1])
}

/// Knobs of the counterexample construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleOptions<T> {
    pub beta0: T,
    pub beta1: T,
    /// Value of the faster-decaying return factor, negative.
    pub negative_component: T,
    /// Target mixed `R1 > 0`; shrunk when the rates cannot support it.
    pub target_r1: T,
}

impl<T: Real> Default for CounterexampleOptions<T> {
    fn default() -> Self {
        Self {
            beta0: T::lit(0.001),
            beta1: -T::one(),
            negative_component: -T::one(),
            target_r1: T::lit(0.25),
        }
    }
}

/// A 4-factor instance with `sigma0 = beta0 > 0` whose sigma drifts down at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleSpec<T> {
    pub params: Pdv4Params<T>,
    pub initial: State4<T>,
    /// Mixed `R1` at time 0, positive.
    pub r1_mixed: T,
    /// Rate-weighted `R1_bar` at time 0, negative.
    pub r1_bar: T,
    pub r2_mixed: T,
    pub r2_bar: T,
    pub sigma0: T,
    /// Drift of sigma at time 0 evaluated with sigma = 0.
    pub drift_at_zero_level: T,
    /// Drift of sigma at time 0 with sigma = sigma0.
    pub initial_drift: T,
}

/// Drift of sigma in the 4-factor model:
/// `-beta1 l1_bar R1_bar + (l2_bar beta2 / 2) (sigma^2 - R2_bar) / sqrt(R2)`.
pub fn sigma_drift_4f<T: Real>(
    p: &Pdv4Params<T>,
    s: &State4<T>,
    sigma: T,
) -> Result<T, TheoryError> {
    let e = effective_rates(p, s)?;
    let (_, r2) = p.mixed(s);
    Ok(-p.beta1 * e.lambda1_bar * e.r1_bar
        + e.lambda2_bar * p.beta2 * T::half() * (sigma * sigma - e.r2_bar) / r2.sqrt())
}

/// Builds the positivity counterexample from a template's rates and weights.
///
/// The faster `R1` kernel starts at `negative_component < 0` and the slower one
/// is solved so the plain mix equals `target_r1 > 0`, which makes the
/// rate-weighted mix negative. `beta1` is overridden and `R2` chosen so that
/// `beta1 R1 + beta2 sqrt(R2) = 0`, leaving `sigma0 = beta0`.
pub fn counterexample_4f<T: Real>(
    template: &Pdv4Params<T>,
    opts: CounterexampleOptions<T>,
) -> Result<CounterexampleSpec<T>, TheoryError> {
    let infeasible = |reason: &str| Err(TheoryError::Infeasible(reason.to_string()));
    let theta = template.theta1;
    if !(theta > T::zero() && theta < T::one()) {
        return infeasible("theta1 must lie strictly inside (0, 1) for the mixes to split in sign");
    }
    if template.lambda1[0] == template.lambda1[1] {
        return infeasible("equal R1 rates make the rate-weighted and plain mixes coincide");
    }
    if !(template.beta2 > T::zero()) {
        return infeasible("beta2 must be > 0 to cancel the return term");
    }
    if !(opts.beta0 > T::zero()) || !(opts.beta1 < T::zero()) {
        return infeasible("beta0 must be > 0 and beta1 < 0");
    }
    if !(opts.negative_component < T::zero()) {
        return infeasible("negative_component must be < 0");
    }
    let weights = [T::one() - theta, theta];
    let fast = if template.lambda1[0] > template.lambda1[1] {
        0
    } else {
        1
    };
    let slow = 1 - fast;
    let (w_n, w_p) = (weights[fast], weights[slow]);
    let (l_n, l_p) = (template.lambda1[fast], template.lambda1[slow]);
    let a = opts.negative_component;

    // lambda1_bar * R1_bar = w_n a (l_n - l_p) + l_p target, negative iff target < w_n |a| (l_n - l_p) / l_p
    let threshold = if l_p > T::zero() {
        w_n * (-a) * (l_n - l_p) / l_p
    } else {
        T::infinity()
    };
    let target = if opts.target_r1 > T::zero() && opts.target_r1 < threshold {
        opts.target_r1
    } else {
        T::half() * threshold
    };
    let b = (target - w_n * a) / w_p;
    let mut r1 = [T::zero(); 2];
    r1[fast] = a;
    r1[slow] = b;

    let r2_level = (-opts.beta1 * target / template.beta2).powi(2);
    let params = Pdv4Params {
        beta0: opts.beta0,
        beta1: opts.beta1,
        ..*template
    };
    let initial = State4 {
        r1,
        r2: [r2_level; 2],
    };
    let e = effective_rates(&params, &initial)?;
    let (r1_mixed, r2_mixed) = params.mixed(&initial);
    if !(r1_mixed > T::zero() && e.r1_bar < T::zero()) {
        return infeasible("no sign split between the plain and rate-weighted R1 mixes");
    }
    let sigma0 = params.sigma(&initial, &VolFunctional::default())?;
    let drift_at_zero_level = sigma_drift_4f(&params, &initial, T::zero())?;
    let initial_drift = sigma_drift_4f(&params, &initial, sigma0)?;
    if !(initial_drift < T::zero()) {
        return infeasible("initial drift of sigma is not negative; lower beta0");
    }
    Ok(CounterexampleSpec {
        params,
        initial,
        r1_mixed,
        r1_bar: e.r1_bar,
        r2_mixed,
        r2_bar: e.r2_bar,
        sigma0,
        drift_at_zero_level,
        initial_drift,
    })
}
