//! Growth constants of the volatility functional and a randomized sampler that checks them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tilted::tilted_bound_constants;
use crate::model::{
    Betas, FactorModel, FunctionalKind, GrowthConstants, LinearBound, Pdv2Params, State2,
    VolFunctional,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalConstants<T> {
    pub growth: GrowthConstants<T>,
    pub linear: Option<LinearBound<T>>,
}

/// Affine square-root constants: `K1 = 3 max(beta1^2, beta2^2)`, `K2 = 3 beta0^2`.
pub fn affine_growth<T: Real>(b: Betas<T>) -> GrowthConstants<T> {
    let three = T::three();
    GrowthConstants {
        k1: three * (b.beta1 * b.beta1).max(b.beta2 * b.beta2),
        k2: three * b.beta0 * b.beta0,
    }
}

/// Growth constants of `f` under model `p`.
///
/// For the affine square-root functional these are derived, and on the
/// 2-factor model the linear majorant `L0 + L1 x + L2 y` is taken from the
/// tilted construction. User functionals echo what they declared; a
/// functional without declared constants yields `None`.
pub fn growth_constants<T: Real, M: FactorModel<T>>(
    f: &VolFunctional<T>,
    p: &M,
    tilted_linear: Option<LinearBound<T>>,
) -> Option<FunctionalConstants<T>> {
    match f.kind {
        FunctionalKind::GlAffineSqrt => Some(FunctionalConstants {
            growth: f.growth.unwrap_or_else(|| affine_growth(p.betas())),
            linear: f.linear.or(tilted_linear),
        }),
        FunctionalKind::User { .. } => f.growth.map(|growth| FunctionalConstants {
            growth,
            linear: f.linear,
        }),
    }
}

/// [`growth_constants`] on the 2-factor model, deriving the linear majorant from the tilted constants.
pub fn growth_constants_2f<T: Real>(
    f: &VolFunctional<T>,
    p: &Pdv2Params<T>,
    s: &State2<T>,
) -> Option<FunctionalConstants<T>> {
    let linear = match f.kind {
        FunctionalKind::GlAffineSqrt => tilted_bound_constants(p, s).ok().map(|c| LinearBound {
            l0: p.beta0 + c.beta2_bar,
            l1: p.beta1,
            l2: c.beta2_hat,
            l: c.l,
        }),
        FunctionalKind::User { .. } => None,
    };
    growth_constants(f, p, linear)
}

/// A sample point where a declared inequality failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthViolation {
    pub inequality: &'static str,
    pub x: f64,
    pub y: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub samples: usize,
    pub violations: Vec<GrowthViolation>,
}

impl GrowthReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sampling box for [`check_growth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub x_max: f64,
    pub y_max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            x_max: 1e3,
            y_max: 1e6,
            samples: 20_000,
            seed: 0x5eed,
        }
    }
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * rhs.abs().max(lhs.abs()) + 1e-12
}

/// Checks `f^2 <= K1 (x^2 + y) + K2` and, when present, the linear majorant and
/// `(L1 l1 + L2 l2) f^2 - l1 L1 x - l2 L2 y <= L` at the box corners, along the
/// axes and at random points of `[-x_max, x_max] x [0, y_max]`.
///
/// `rates` are `(lambda1, lambda2)` of the model the linear constants belong to.
pub fn check_growth<T: Real>(
    f: &VolFunctional<T>,
    betas: Betas<T>,
    constants: &FunctionalConstants<T>,
    rates: (T, T),
    sample_box: SampleBox,
) -> GrowthReport {
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(sample_box.samples + 64);
    let (xm, ym) = (sample_box.x_max, sample_box.y_max);
    for &x in &[-xm, -1.0, 0.0, 1.0, xm] {
        for &y in &[0.0, 1e-6, 1.0, ym] {
            points.push((x, y));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sample_box.seed);
    for _ in 0..sample_box.samples {
        let x = rng.random_range(-xm..=xm);
        // log-uniform in y so small variances are well covered
        let y = if rng.random_bool(0.5) {
            rng.random_range(0.0..=ym)
        } else {
            ym * 10f64.powf(-12.0 * rng.random::<f64>())
        };
        points.push((x, y));
    }

    let k1 = constants.growth.k1.as_f64();
    let k2 = constants.growth.k2.as_f64();
    let (l1, l2) = (rates.0.as_f64(), rates.1.as_f64());
    let mut violations = Vec::new();
    for &(x, y) in &points {
        let Ok(v) = f.eval(betas, T::lit(x), T::lit(y)) else {
            continue;
        };
        let v = v.as_f64();
        let lhs = v * v;
        let rhs = k1 * (x * x + y) + k2;
        if !holds(lhs, rhs) {
            violations.push(GrowthViolation {
                inequality: "f^2 <= K1 (x^2 + y) + K2",
                x,
                y,
                lhs,
                rhs,
            });
        }
        if let Some(lin) = constants.linear {
            let (c0, c1, c2, cl) = (
                lin.l0.as_f64(),
                lin.l1.as_f64(),
                lin.l2.as_f64(),
                lin.l.as_f64(),
            );
            let rhs = c0 + c1 * x + c2 * y;
            if !holds(v, rhs) {
                violations.push(GrowthViolation {
                    inequality: "f <= L0 + L1 x + L2 y",
                    x,
                    y,
                    lhs: v,
                    rhs,
                });
            }
            let drift = (c1 * l1 + c2 * l2) * v * v - l1 * c1 * x - l2 * c2 * y;
            if !holds(drift, cl) {
                violations.push(GrowthViolation {
                    inequality: "(L1 l1 + L2 l2) f^2 - l1 L1 x - l2 L2 y <= L",
                    x,
                    y,
                    lhs: drift,
                    rhs: cl,
                });
            }
        }
    }
    GrowthReport {
        samples: points.len(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FactorModel;
    use approx::assert_relative_eq;

    #[test]
    fn calibrated_growth_constants() {
        let p = Pdv2Params::<f64>::calibrated();
        let s = p.default_state().unwrap();
        let f = VolFunctional::default();
        let c = growth_constants_2f(&f, &p, &s).unwrap();
        assert_relative_eq!(c.growth.k1, 0.75, max_relative = 1e-12);
        assert_relative_eq!(c.growth.k2, 0.0192, max_relative = 1e-12);
        let lin = c.linear.unwrap();
        assert_relative_eq!(lin.l0, 0.08 + 0.25 / 0.248, max_relative = 1e-12);
        assert_eq!(lin.l1, -0.08);
        assert_relative_eq!(lin.l2, 0.062, max_relative = 1e-12);
        let report = check_growth(
            &f,
            p.betas(),
            &c,
            (p.lambda1, p.lambda2),
            SampleBox::default(),
        );
        assert!(
            report.passed(),
            "{:?}",
            &report.violations[..report.violations.len().min(3)]
        );
    }

    #[test]
    fn zero_functional() {
        let p = Pdv2Params::new(0.0, 0.0, 0.0, 1.0, 1.0);
        let c = growth_constants(&VolFunctional::default(), &p, None).unwrap();
        assert_eq!(c.growth.k1, 0.0);
        assert_eq!(c.growth.k2, 0.0);
    }

    #[test]
    fn user_sqrt_passes_sampler() {
        let p = Pdv2Params::<f64>::calibrated();
        let f = VolFunctional::user("sqrt_y", |_x, y: f64| y.sqrt(), 1.0, 0.0);
        let c = growth_constants(&f, &p, None).unwrap();
        assert_eq!((c.growth.k1, c.growth.k2), (1.0, 0.0));
        let r = check_growth(
            &f,
            p.betas(),
            &c,
            (p.lambda1, p.lambda2),
            SampleBox::default(),
        );
        assert!(r.passed());
    }

    #[test]
    fn understated_constants_are_reported() {
        let p = Pdv2Params::<f64>::calibrated();
        let f = VolFunctional::user("linear", |x: f64, _y| 2.0 * x, 1.0, 0.0);
        let c = growth_constants(&f, &p, None).unwrap();
        let r = check_growth(
            &f,
            p.betas(),
            &c,
            (p.lambda1, p.lambda2),
            SampleBox::default(),
        );
        assert!(!r.passed());
        assert!(r.violations.iter().all(|v| v.lhs > v.rhs));
    }

    #[test]
    fn user_without_constants_has_none() {
        let p = Pdv2Params::<f64>::calibrated();
        let mut f = VolFunctional::user("sqrt_y", |_x, y: f64| y.sqrt(), 1.0, 0.0);
        f.growth = None;
        assert!(growth_constants(&f, &p, None).is_none());
    }
}
