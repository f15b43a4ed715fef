//! Constants of the affine bound `E(sigma_{t ^ S_M}) <= K0 + K1 t` under the tilted dynamics.

use serde::Serialize;

use super::TheoryError;
use crate::model::{Pdv2Params, State2};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltedConstants<T> {
    /// Weight on `R2` in the linear majorant; requires `beta1 lambda1 + beta2_hat lambda2 < 0`.
    pub beta2_hat: T,
    /// Smallest constant with `beta2 sqrt(x) <= beta2_bar + beta2_hat x` for all `x >= 0`.
    pub beta2_bar: T,
    pub alpha: T,
    /// Coefficient of `R2` in the drift integrand.
    pub a: T,
    pub a_prime: T,
    pub b_prime: T,
    pub c_prime: T,
    /// Upper bound of `alpha sigma^2 - lambda1 beta1 R1 - lambda2 beta2_hat R2`.
    pub l: T,
    pub k0: T,
    pub k1: T,
}

impl<T: Real> TiltedConstants<T> {
    pub fn affine_bound(&self, t: T) -> T {
        self.k0 + self.k1 * t
    }

    /// `beta2_bar + beta2_hat x - beta2 sqrt(x)`, nonnegative for `x >= 0`.
    pub fn majorization_gap(&self, beta2: T, x: T) -> T {
        self.beta2_bar + self.beta2_hat * x - beta2 * x.sqrt()
    }
}

/// `-beta1 lambda1 / (2 lambda2)` for `lambda2 > 0`, else 1.
pub fn canonical_beta2_hat<T: Real>(p: &Pdv2Params<T>) -> T {
    if p.lambda2 > T::zero() {
        -(p.beta1 * p.lambda1) / (T::two() * p.lambda2)
    } else {
        T::one()
    }
}

/// Tilted drift-bound constants with the canonical `beta2_hat`.
pub fn tilted_bound_constants<T: Real>(
    p: &Pdv2Params<T>,
    s: &State2<T>,
) -> Result<TiltedConstants<T>, TheoryError> {
    tilted_bound_constants_with(p, s, canonical_beta2_hat(p))
}

/// Tilted drift-bound constants for a caller-chosen `beta2_hat > 0`.
///
/// The drift integrand is `C + B sqrt(R2) + A R2` with `A = alpha beta2^2 - lambda2 beta2_hat`;
/// maximising over `sqrt(R2)` leaves `C' + B' R1 + A' R1^2`, which is at most
/// `L = C' - B'^2 / (4 A')`.
pub fn tilted_bound_constants_with<T: Real>(
    p: &Pdv2Params<T>,
    s: &State2<T>,
    beta2_hat: T,
) -> Result<TiltedConstants<T>, TheoryError> {
    let inapplicable = |reason: String| Err(TheoryError::Inapplicable(reason));
    if p.lambda2 > T::zero() && p.beta1 * p.lambda1 >= T::zero() {
        return inapplicable(format!(
            "beta1 * lambda1 = {} >= 0 with lambda2 > 0: no beta2_hat > 0 makes alpha negative",
            p.beta1 * p.lambda1
        ));
    }
    if !(beta2_hat > T::zero() && beta2_hat.is_finite()) {
        return inapplicable(format!("beta2_hat = {beta2_hat} must be finite and > 0"));
    }
    let (b0, b1, b2) = (p.beta0, p.beta1, p.beta2);
    let (l1, l2) = (p.lambda1, p.lambda2);
    let two = T::two();
    let four = T::lit(4.0);

    let alpha = b1 * l1 + beta2_hat * l2;
    if alpha >= T::zero() {
        return inapplicable(format!("alpha = {alpha} is not negative"));
    }
    let a = alpha * b2 * b2 - l2 * beta2_hat;
    if a >= T::zero() {
        return inapplicable(format!("A = {a} is not negative"));
    }
    let beta2_bar = b2 * b2 / (four * beta2_hat);
    // lambda2 beta2_hat - alpha beta2^2 = -A > 0
    let denom = -a;
    let shrink = alpha * alpha * b2 * b2 / denom;
    let c_prime = alpha * b0 * b0 + shrink * b0 * b0;
    let b_prime = two * alpha * b0 * b1 - l1 * b1 + two * shrink * b0 * b1;
    let a_prime = alpha * b1 * b1 + shrink * b1 * b1;
    if a_prime >= T::zero() {
        return inapplicable(format!("A' = {a_prime} is not negative"));
    }
    let l = c_prime - b_prime * b_prime / (four * a_prime);
    let k0 = b0 + beta2_bar + b1 * s.r1 + beta2_hat * s.r2;
    Ok(TiltedConstants {
        beta2_hat,
        beta2_bar,
        alpha,
        a,
        a_prime,
        b_prime,
        c_prime,
        l,
        k0,
        k1: l.abs(),
    })
}
