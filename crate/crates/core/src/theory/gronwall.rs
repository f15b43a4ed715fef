//! Gronwall moment bounds for `E(sum R1_j^2 + sum R2_j)`.

use serde::Serialize;

use crate::model::{Pdv2Params, Pdv4Params, State2, State4};
use crate::scalar::Real;

/// Constants of the 2-factor bound `E(R1_t^2 + R2_t) <= (c1 + c2 t) exp(c3 t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gronwall2<T> {
    pub c1_1: T,
    pub c1_2: T,
    pub c1_3: T,
    pub c2_1: T,
    pub c2_2: T,
    pub c2_3: T,
    pub c1: T,
    pub c2: T,
    /// Unclamped rate; [`Gronwall2::bound`] uses `max(c3, 0)`.
    pub c3: T,
}

impl<T: Real> Gronwall2<T> {
    pub fn rate(&self) -> T {
        self.c3.max(T::zero())
    }

    pub fn bound(&self, t: T) -> T {
        (self.c1 + self.c2 * t) * (self.rate() * t).exp()
    }
}

/// The 2-factor constants, term by term:
///
/// ```text
/// c1,1 = R1_0^2      c1,2 = 3 l1^2 b0^2   c1,3 = max{3 l1^2 b2^2, 3 l1^2 b1^2 - 2 l1}
/// c2,1 = R2_0        c2,2 = 3 l2 b0^2     c2,3 = l2 max{3 b1^2, 3 b2^2 - 1}
/// ```
pub fn gronwall_constants_2f<T: Real>(p: &Pdv2Params<T>, s: &State2<T>) -> Gronwall2<T> {
    let three = T::three();
    let (b0, b1, b2) = (p.beta0 * p.beta0, p.beta1 * p.beta1, p.beta2 * p.beta2);
    let l1 = p.lambda1;
    let l2 = p.lambda2;

    let c1_1 = s.r1 * s.r1;
    let c1_2 = three * l1 * l1 * b0;
    let c1_3 = (three * l1 * l1 * b2).max(three * l1 * l1 * b1 - T::two() * l1);
    let c2_1 = s.r2;
    let c2_2 = three * l2 * b0;
    let c2_3 = l2 * (three * b1).max(three * b2 - T::one());
    Gronwall2 {
        c1_1,
        c1_2,
        c1_3,
        c2_1,
        c2_2,
        c2_3,
        c1: c1_1 + c2_1,
        c2: c1_2 + c2_2,
        c3: c1_3 + c2_3,
    }
}

/// Constants of the 4-factor bound `E(U_t) <= c0(t) exp(c1 t)` with affine `c0`.
///
/// `r1_side[k]` and `r2_side[k]` are the summed integrand coefficients of the
/// `k`-th component of `U = (R1_0^2, R1_1^2, R2_0, R2_1)` in the `R1` and `R2`
/// inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gronwall4<T> {
    pub r1_side: [T; 4],
    pub r2_side: [T; 4],
    pub r1_rate: T,
    pub r2_rate: T,
    pub c0_intercept: T,
    pub c0_slope: T,
    /// Unclamped rate; [`Gronwall4::bound`] uses `max(c1, 0)`.
    pub c1: T,
}

impl<T: Real> Gronwall4<T> {
    pub fn rate(&self) -> T {
        self.c1.max(T::zero())
    }

    pub fn c0(&self, t: T) -> T {
        self.c0_intercept + self.c0_slope * t
    }

    pub fn bound(&self, t: T) -> T {
        self.c0(t) * (self.rate() * t).exp()
    }
}

/// The 4-factor constants.
///
/// Each kernel `j` contributes
///
/// ```text
/// l1j^2 sigma^2 - 2 l1j R1j^2 <= 3 l1j^2 b0^2 + 3 l1j^2 b2^2 R2 + 3 l1j^2 b1^2 R1^2 - 2 l1j R1j^2
/// sigma^2 - R2j              <= 3 b0^2 + 3 b1^2 R1^2 + 3 b2^2 R2 - R2j
/// ```
///
/// with `R1^2 <= (1 - th1) R1_0^2 + th1 R1_1^2` and `R2 = (1 - th2) R2_0 + th2 R2_1`.
/// Coefficients are summed over `j` per component of `U`; the Gronwall rate is
/// the sum of the largest coefficient on each side.
pub fn gronwall_constants_4f<T: Real>(p: &Pdv4Params<T>, s: &State4<T>) -> Gronwall4<T> {
    let three = T::three();
    let (b0, b1, b2) = (p.beta0 * p.beta0, p.beta1 * p.beta1, p.beta2 * p.beta2);
    let w1 = [T::one() - p.theta1, p.theta1];
    let w2 = [T::one() - p.theta2, p.theta2];

    let mut r1_side = [T::zero(); 4];
    let mut r2_side = [T::zero(); 4];
    let mut slope = T::zero();
    for j in 0..2 {
        let l1 = p.lambda1[j];
        let l2 = p.lambda2[j];
        slope = slope + three * l1 * l1 * b0 + three * l2 * b0;
        for k in 0..2 {
            let own = if k == j { T::one() } else { T::zero() };
            r1_side[k] = r1_side[k] + three * l1 * l1 * b1 * w1[k] - T::two() * l1 * own;
            r1_side[2 + k] = r1_side[2 + k] + three * l1 * l1 * b2 * w2[k];
            r2_side[k] = r2_side[k] + l2 * three * b1 * w1[k];
            r2_side[2 + k] = r2_side[2 + k] + l2 * (three * b2 * w2[k] - own);
        }
    }
    let max4 = |v: [T; 4]| v.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    let r1_rate = max4(r1_side);
    let r2_rate = max4(r2_side);
    let intercept = s.r1[0] * s.r1[0] + s.r1[1] * s.r1[1] + s.r2[0] + s.r2[1];
    Gronwall4 {
        r1_side,
        r2_side,
        r1_rate,
        r2_rate,
        c0_intercept: intercept,
        c0_slope: slope,
        c1: r1_rate + r2_rate,
    }
}

/// Largest `t` on `[0, t_max]` at which `bound(t)` is finite (bisection on finiteness).
pub fn finite_horizon(bound: impl Fn(f64) -> f64, t_max: f64) -> f64 {
    if bound(t_max).is_finite() {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid).is_finite() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
