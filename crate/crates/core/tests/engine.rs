mod common;

use pdv_core::engine::{noise_for_path, simulate_path, NoiseStream};
use pdv_core::model::{
    Driver, FactorModel, Pdv2Params, Pdv4Params, Scheme, SimConfig, State2, State4, System,
    VolFunctional,
};
use proptest::prelude::*;

fn config(dt: f64, horizon: f64, seed: u64) -> SimConfig<f64> {
    let mut c = SimConfig::new(dt, horizon);
    c.driver = Driver::Gaussian { seed };
    c
}

fn params() -> impl Strategy<Value = Pdv2Params<f64>> {
    (
        0.0..0.2f64,
        -0.3..=0.0f64,
        0.0..0.9f64,
        1.0..100.0f64,
        1.0..100.0f64,
    )
        .prop_map(|(b0, b1, b2, l1, l2)| Pdv2Params::new(b0, b1, b2, l1, l2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_scheme_keeps_variance_positive(p in params(), seed in any::<u64>(), r2 in 1e-6..1.0f64) {
        let f = VolFunctional::default();
        let c = config(1e-4, 0.02, seed);
        let s = State2 { r1: 0.0, r2 };
        let rec = simulate_path(&p, &f, &c, Some(s), noise_for_path(&c, 0)).unwrap();
        prop_assert!(rec.states.iter().all(|s| s.r2 > 0.0));
    }

    #[test]
    fn same_seed_same_path(p in params(), seed in any::<u64>(), i in 0usize..1000) {
        let f = VolFunctional::default();
        let c = config(1e-4, 0.01, seed);
        let s = State2 { r1: 0.01, r2: 0.02 };
        let a = simulate_path(&p, &f, &c, Some(s), noise_for_path(&c, i)).unwrap();
        let b = simulate_path(&p, &f, &c, Some(s), noise_for_path(&c, i)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn hit_times_nondecreasing_in_level(p in params(), seed in any::<u64>()) {
        let f = VolFunctional::default();
        let mut c = config(1e-4, 0.05, seed);
        c.explosion_ladder = vec![0.05, 0.1, 0.2, 0.4, 5.0];
        let s = State2 { r1: 0.0, r2: 0.01 };
        let rec = simulate_path(&p, &f, &c, Some(s), noise_for_path(&c, 0)).unwrap();
        for w in rec.monitors.first_hit.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for w in rec.monitors.vol_first_hit.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn endpoint_weights_reduce_to_two_factors(
        seed in any::<u64>(),
        theta1 in 0usize..2,
        theta2 in 0usize..2,
        euler in any::<bool>(),
        tilted in any::<bool>(),
    ) {
        let mut p4 = Pdv4Params::<f64>::calibrated();
        p4.theta1 = theta1 as f64;
        p4.theta2 = theta2 as f64;
        let p2 = p4.reduced(theta1, theta2);
        let mut c = config(1e-4, 0.02, seed);
        c.scheme = if euler { Scheme::Euler } else { Scheme::Exponential };
        c.system = if tilted { System::Tilted } else { System::Original };
        let s4 = State4 { r1: [0.02, -0.01], r2: [0.003, 0.005] };
        let s2 = State2 { r1: s4.r1[theta1], r2: s4.r2[theta2] };
        let f = VolFunctional::default();
        let a = simulate_path(&p4, &f, &c, Some(s4), noise_for_path(&c, 3)).unwrap();
        let b = simulate_path(&p2, &f, &c, Some(s2), noise_for_path(&c, 3)).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            prop_assert_eq!(a.times[i].to_bits(), b.times[i].to_bits());
            prop_assert_eq!(a.sigma[i].to_bits(), b.sigma[i].to_bits());
            prop_assert_eq!(a.x[i].to_bits(), b.x[i].to_bits());
            prop_assert_eq!(a.states[i].r1[theta1].to_bits(), b.states[i].r1.to_bits());
            prop_assert_eq!(a.states[i].r2[theta2].to_bits(), b.states[i].r2.to_bits());
        }
    }
}

fn max_zero_driver_error(dt: f64) -> f64 {
    let p = Pdv2Params::<f64>::calibrated();
    let f = VolFunctional::default();
    let mut c = SimConfig::new(dt, 0.1);
    c.driver = Driver::Zero;
    let s = State2 { r1: 0.05, r2: 0.01 };
    let rec = simulate_path(&p, &f, &c, Some(s), NoiseStream::zero(dt)).unwrap();
    let stride = (1e-3 / dt).round() as usize;
    let oracle = common::rk4_zero_driver_2f(
        (p.beta0, p.beta1, p.beta2),
        (p.lambda1, p.lambda2),
        (s.r1, s.r2),
        1.0,
        0.1,
        1e-3,
        100,
    );
    oracle
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let i = k * stride;
            let st = rec.states[i];
            (st.r1 - o.0)
                .abs()
                .max((st.r2 - o.1).abs())
                .max((rec.sigma[i] - o.2).abs())
                .max((rec.x[i] - o.3).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn zero_driver_matches_ode_oracle() {
    let coarse = max_zero_driver_error(1e-4);
    let fine = max_zero_driver_error(5e-5);
    assert!(coarse < 1e-4, "max error {coarse}");
    let ratio = coarse / fine;
    assert!((1.6..2.4).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn single_precision_tracks_double() {
    let f64_params = Pdv2Params::<f64>::calibrated();
    let f32_params = Pdv2Params::<f32>::calibrated();
    let c64 = config(1e-4, 0.01, 9);
    let mut c32 = SimConfig::<f32>::new(1e-4, 0.01);
    c32.driver = Driver::Gaussian { seed: 9 };
    let a = simulate_path(
        &f64_params,
        &VolFunctional::default(),
        &c64,
        None,
        noise_for_path(&c64, 0),
    )
    .unwrap();
    let b = simulate_path(
        &f32_params,
        &VolFunctional::default(),
        &c32,
        None,
        noise_for_path(&c32, 0),
    )
    .unwrap();
    assert_eq!(a.len(), b.len());
    for i in 0..a.len() {
        assert!((a.sigma[i] - b.sigma[i] as f64).abs() < 1e-4, "step {i}");
        assert!(b.states[i].r2 > 0.0);
    }
}

#[test]
fn default_state_is_the_quiet_fixed_point() {
    let p = Pdv2Params::<f64>::calibrated();
    let s = p.default_state().unwrap();
    let mut c = SimConfig::new(1e-3, 0.1);
    c.driver = Driver::Zero;
    let rec = simulate_path(
        &p,
        &VolFunctional::default(),
        &c,
        None,
        NoiseStream::zero(1e-3),
    )
    .unwrap();
    for st in &rec.states {
        assert_eq!(st.r1, 0.0);
        assert!((st.r2 - s.r2).abs() < 1e-15);
    }
}
