#![allow(dead_code)]

/// Zero-noise 2-factor dynamics integrated with classical RK4.
///
/// Returns `(r1, r2, sigma, x)` at each multiple of `dt_out` up to `horizon`.
pub fn rk4_zero_driver_2f(
    beta: (f64, f64, f64),
    lambda: (f64, f64),
    initial: (f64, f64),
    x0: f64,
    horizon: f64,
    dt_out: f64,
    substeps: usize,
) -> Vec<(f64, f64, f64, f64)> {
    let sigma = |r1: f64, r2: f64| beta.0 + beta.1 * r1 + beta.2 * r2.sqrt();
    // (R1, R2, log X)
    let rhs = |y: [f64; 3]| {
        let s = sigma(y[0], y[1]);
        [-lambda.0 * y[0], lambda.1 * (s * s - y[1]), -0.5 * s * s]
    };
    let h = dt_out / substeps as f64;
    let n = (horizon / dt_out).round() as usize;
    let mut y = [initial.0, initial.1, x0.ln()];
    let mut out = vec![(y[0], y[1], sigma(y[0], y[1]), x0)];
    for _ in 0..n {
        for _ in 0..substeps {
            let k1 = rhs(y);
            let k2 = rhs(add(y, k1, h / 2.0));
            let k3 = rhs(add(y, k2, h / 2.0));
            let k4 = rhs(add(y, k3, h));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push((y[0], y[1], sigma(y[0], y[1]), y[2].exp()));
    }
    out
}

fn add(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}
