//! Sample means, standard errors and proportions.

use serde::Serialize;

/// A Monte Carlo estimate with its standard error over `n` paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64, n: usize) -> Self {
        Self {
            estimate: value,
            stderr: 0.0,
            n,
        }
    }
}

fn sample_se(values: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / m as f64;
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (m - 1) as f64 / m as f64).sqrt()
}

/// Mean of `values` and its standard error.
///
/// With `antithetic`, consecutive pairs are averaged first and the standard
/// error is taken over the pair means; an unpaired trailing value counts as
/// its own unit.
pub fn mean_se(values: &[f64], antithetic: bool) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate {
            estimate: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let estimate = values.iter().sum::<f64>() / n as f64;
    let stderr = if antithetic {
        let pairs: Vec<f64> = values
            .chunks(2)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        sample_se(pairs.iter().copied())
    } else {
        sample_se(values.iter().copied())
    };
    Estimate {
        estimate,
        stderr,
        n,
    }
}

/// Proportion of `hits` among `n` with the binomial standard error.
pub fn proportion(hits: usize, n: usize) -> Estimate {
    if n == 0 {
        return Estimate {
            estimate: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let p = hits as f64 / n as f64;
    Estimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    }
}

/// Least-squares slope of `log(err)` against `log(dt)`.
pub fn fitted_order(dts: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = dts
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&d, &e)| (d.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn plain_mean_and_se() {
        let e = mean_se(&[1.0, 2.0, 3.0, 4.0], false);
        assert_eq!(e.estimate, 2.5);
        assert_relative_eq!(e.stderr, (5.0f64 / 3.0 / 4.0).sqrt(), max_relative = 1e-14);
        assert_eq!(e.n, 4);
    }

    #[test]
    fn antithetic_pairs_cancel() {
        let e = mean_se(&[1.5, 0.5, 2.0, 0.0], true);
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn proportions() {
        let p = proportion(0, 100);
        assert_eq!((p.estimate, p.stderr), (0.0, 0.0));
        let p = proportion(25, 100);
        assert_relative_eq!(p.stderr, (0.25f64 * 0.75 / 100.0).sqrt());
    }

    #[test]
    fn order_of_exact_power_law() {
        let dts = [4e-4, 2e-4, 1e-4];
        let errs: Vec<f64> = dts.iter().map(|d: &f64| 3.0 * d.sqrt()).collect();
        assert_relative_eq!(fitted_order(&dts, &errs), 0.5, max_relative = 1e-12);
        assert!(fitted_order(&dts, &[0.0, 0.0, 0.0]).is_nan());
    }
}
