//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use pdv_core::engine::{noise_for_path, simulate_path};
use pdv_core::mc::{
    check_martingale, check_moment_bound, check_nonexplosion, check_positivity,
    check_positivity_failure_4f, check_tilted_drift_bound, convergence_study, CheckReport,
    ConvergenceOptions, MartingaleOptions, MomentOptions, PositivityFailureOptions,
    TiltedDriftOptions, Verdict,
};
use pdv_core::model::{
    Driver, FactorModel, Pdv2Params, Pdv4Params, Scheme, SimConfig, State2, State4, VolFunctional,
};
use pdv_core::theory::{
    counterexample_4f, gronwall_constants_2f, tilted_bound_constants, CounterexampleOptions,
};

type Outcome = Result<String, String>;

fn config(dt: f64, horizon: f64, paths: usize, seed: u64) -> SimConfig<f64> {
    let mut c = SimConfig::new(dt, horizon);
    c.paths = paths;
    c.driver = Driver::Gaussian { seed };
    c
}

fn record(r: &CheckReport, name: &str) -> f64 {
    r.record(name)
        .unwrap_or_else(|| panic!("{}: no record {name:?}", r.name))
        .estimate
}

fn verdict_line(r: &CheckReport) -> String {
    let failing: Vec<String> = r
        .records
        .iter()
        .filter(|x| x.verdict != Verdict::Pass)
        .map(|x| format!("{} = {} ({:?})", x.name, x.estimate, x.verdict))
        .collect();
    if failing.is_empty() {
        format!("{} {:?}", r.name, r.verdict)
    } else {
        format!("{} {:?} [{}]", r.name, r.verdict, failing.join("; "))
    }
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct NonExplosionRuns {
    reports: Vec<(&'static str, CheckReport)>,
    seconds: f64,
}

fn nonexplosion_runs() -> NonExplosionRuns {
    let f = VolFunctional::default();
    let c = config(1e-4, 0.25, 10_000, 11);
    let start = Instant::now();
    let two = check_nonexplosion(&Pdv2Params::calibrated(), &f, &c, None).unwrap();
    let four = check_nonexplosion(&Pdv4Params::calibrated(), &f, &c, None).unwrap();
    NonExplosionRuns {
        reports: vec![("2f", two), ("4f", four)],
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_1(runs: &NonExplosionRuns) -> Outcome {
    let mut ok = runs.seconds <= 60.0;
    let mut parts = Vec::new();
    for (label, r) in &runs.reports {
        let hits: Vec<String> = [5, 10, 20]
            .iter()
            .map(|m| format!("{}", record(r, &format!("P(T_M <= T) M={m}"))))
            .collect();
        ok &= r.verdict == Verdict::Pass;
        parts.push(format!(
            "{label}: exploded {}, P(T_M <= 0.25) over M=5,10,20 = [{}], {}",
            record(r, "exploded paths"),
            hits.join(", "),
            verdict_line(r)
        ));
    }
    parts.push(format!("{:.1}s", runs.seconds));
    judge(ok, parts.join(" | "))
}

fn criterion_2(runs: &NonExplosionRuns) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, r) in &runs.reports {
        let bad = record(r, "nonpositive R2 observations");
        let min = record(r, "min R2");
        ok &= bad == 0.0 && min > 0.0;
        parts.push(format!(
            "{label}: {bad} nonpositive R2 observations, min R2 {min:e}"
        ));
    }
    judge(ok, parts.join(" | "))
}

fn criterion_3() -> Outcome {
    let p = Pdv2Params::calibrated();
    let s = p.default_state().unwrap();
    let sigma0 = p.sigma(&s, &VolFunctional::default()).unwrap();
    let r = check_positivity(
        &p,
        &VolFunctional::default(),
        &config(1e-4, 0.1, 1000, 13),
        None,
    )
    .unwrap();
    let coarse = record(&r, "comparison violation fraction dt=0.0001");
    let fine = record(&r, "comparison violation fraction dt=0.00005");
    let ok = r.verdict == Verdict::Pass
        && (sigma0 - 0.16).abs() < 1e-15
        && record(&r, "sigma <= 0 observations dt=0.0001") == 0.0
        && record(&r, "sigma <= 0 observations dt=0.00005") == 0.0
        && fine <= coarse;
    judge(
        ok,
        format!(
            "sigma0 {sigma0}, violation fraction {coarse} -> {fine}, {}",
            verdict_line(&r)
        ),
    )
}

fn criterion_4() -> Outcome {
    let spec =
        counterexample_4f(&Pdv4Params::calibrated(), CounterexampleOptions::default()).unwrap();
    let c = config(1e-4, 0.01, 10_000, 14);
    let r = check_positivity_failure_4f(
        &spec,
        &VolFunctional::default(),
        &c,
        &PositivityFailureOptions::default(),
    )
    .unwrap();
    let p = record(&r, "P(min sigma < 0 on [0, 0.01])");
    let floor = 3.0 / (10_000f64).sqrt();
    let zero = record(&r, "zero-driver min sigma on [0, 0.01]");
    let ok = r.verdict == Verdict::Pass && p > floor && zero < 0.0 && spec.params.beta0 == 0.001;
    judge(
        ok,
        format!(
            "P(min sigma < 0) = {p} > {floor}, zero-driver min sigma {zero}, {}",
            verdict_line(&r)
        ),
    )
}

fn criterion_5() -> Outcome {
    let f = VolFunctional::default();
    let c = config(1e-4, 0.001, 10_000, 15);
    let two = check_moment_bound(
        &Pdv2Params::calibrated(),
        &f,
        &c,
        None,
        MomentOptions { t: 0.001 },
    )
    .unwrap();
    let four = check_moment_bound(
        &Pdv4Params::calibrated(),
        &f,
        &c,
        None,
        MomentOptions { t: 0.001 },
    )
    .unwrap();
    let show = |r: &CheckReport| {
        let x = &r.records[0];
        format!(
            "{:.6} + 3 x {:.2e} <= {:.6}",
            x.estimate,
            x.stderr,
            x.reference.unwrap()
        )
    };
    judge(
        two.verdict == Verdict::Pass
            && four.verdict == Verdict::Pass
            && two.note.is_some()
            && four.note.is_some(),
        format!("2f {} | 4f {}", show(&two), show(&four)),
    )
}

fn criterion_6() -> Outcome {
    let p = Pdv2Params::calibrated();
    let f = VolFunctional::default();
    let mut c = config(1e-3, 1.0, 100_000, 16);
    c.antithetic = true;
    c.x0 = 1.0;
    c.stop_floor_c = 0.0;
    let opts = MartingaleOptions {
        ladder_horizon: 0.1,
        ladder_paths: 10_000,
    };
    let m = check_martingale(&p, &f, &c, None, opts).unwrap();
    let d = check_tilted_drift_bound(
        &p,
        &f,
        &config(1e-4, 0.25, 10_000, 17),
        None,
        &TiltedDriftOptions {
            level: 20.0,
            times: vec![0.05, 0.1, 0.25],
        },
    )
    .unwrap();
    let ex = m.record("E[X_T] at T=1").unwrap();
    judge(
        m.verdict == Verdict::Pass && d.verdict == Verdict::Pass,
        format!(
            "E[X_1] = {:.6} (SE {:.2e}), tilted M=20 hits {}, {}, {}",
            ex.estimate,
            ex.stderr,
            record(&m, "tilted P(T_M <= t) M=20"),
            verdict_line(&m),
            verdict_line(&d)
        ),
    )
}

fn criterion_7() -> Outcome {
    let f = VolFunctional::default();
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for (t1, t2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        for scheme in [Scheme::Exponential, Scheme::Euler] {
            let mut p4 = Pdv4Params::<f64>::calibrated();
            p4.theta1 = t1 as f64;
            p4.theta2 = t2 as f64;
            let p2 = p4.reduced(t1, t2);
            let mut c = config(1e-4, 0.05, 16, 18);
            c.scheme = scheme;
            let s4 = State4 {
                r1: [0.03, -0.02],
                r2: [0.004, 0.002],
            };
            let s2 = State2 {
                r1: s4.r1[t1],
                r2: s4.r2[t2],
            };
            for i in 0..c.paths {
                let a = simulate_path(&p4, &f, &c, Some(s4), noise_for_path(&c, i)).unwrap();
                let b = simulate_path(&p2, &f, &c, Some(s2), noise_for_path(&c, i)).unwrap();
                let same = a.len() == b.len()
                    && (0..a.len()).all(|k| {
                        a.times[k].to_bits() == b.times[k].to_bits()
                            && a.sigma[k].to_bits() == b.sigma[k].to_bits()
                            && a.x[k].to_bits() == b.x[k].to_bits()
                            && a.nu[k].to_bits() == b.nu[k].to_bits()
                            && a.states[k].r1[t1].to_bits() == b.states[k].r1.to_bits()
                            && a.states[k].r2[t2].to_bits() == b.states[k].r2.to_bits()
                    })
                    && a.monitors.vol_first_hit == b.monitors.vol_first_hit;
                compared += 1;
                mismatches += usize::from(!same);
            }
        }
    }
    judge(
        mismatches == 0,
        format!("{mismatches} of {compared} paths differ"),
    )
}

fn criterion_8() -> Outcome {
    let r = convergence_study(
        &Pdv2Params::calibrated(),
        &VolFunctional::default(),
        &config(1e-4, 0.1, 1000, 19),
        None,
        &ConvergenceOptions {
            dt_ladder: vec![4e-4, 2e-4, 1e-4],
            reference_dt: 2.5e-5,
            order_range: (0.3, 1.2),
        },
    )
    .unwrap();
    let errs: Vec<String> = r
        .records
        .iter()
        .filter(|x| x.name.starts_with("strong error"))
        .map(|x| format!("{:.4}", x.estimate))
        .collect();
    judge(
        r.verdict == Verdict::Pass,
        format!(
            "errors [{}], order {:.3}, {}",
            errs.join(", "),
            record(&r, "fitted strong order"),
            verdict_line(&r)
        ),
    )
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs()
}

fn criterion_9() -> Outcome {
    let p = Pdv2Params::calibrated();
    let s = p.default_state().unwrap();
    let g = gronwall_constants_2f(&p, &s);
    let t = tilted_bound_constants(&p, &s).unwrap();

    // Re-derived by hand from the parameter values.
    let (b1, b2, l1, l2) = (-0.08f64, 0.5f64, 62.0f64, 40.0f64);
    let c13 = (3.0 * l1 * l1 * b2 * b2).max(3.0 * l1 * l1 * b1 * b1 - 2.0 * l1);
    let c23 = l2 * (3.0 * b1 * b1).max(3.0 * b2 * b2 - 1.0);
    let hat = -b1 * l1 / (2.0 * l2);
    let alpha = b1 * l1 + hat * l2;
    let a = alpha * b2 * b2 - l2 * hat;
    let a_prime = (alpha + alpha * alpha * b2 * b2 / -a) * b1 * b1;
    let pairs = [
        ("c1_3", g.c1_3, c13, 2883.0),
        ("c2_3", g.c2_3, c23, 0.768),
        ("beta2_hat", t.beta2_hat, hat, 0.062),
        ("alpha", t.alpha, alpha, -2.48),
        ("A", t.a, a, -3.1),
        ("A'", t.a_prime, a_prime, -0.0126976),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, got, derived, frozen) in pairs {
        ok &= rel_eq(got, derived) && rel_eq(got, frozen);
        parts.push(format!("{name} {got}"));
    }

    let tangent = (b2 / (2.0 * t.beta2_hat)).powi(2);
    let grid = (0..=1_000_000)
        .map(|k| k as f64)
        .chain((0..=100_000).map(|k| k as f64 * 1e-5))
        .chain([tangent]);
    let mut worst = f64::INFINITY;
    let mut points = 0usize;
    for x in grid {
        worst = worst.min(t.beta2_bar + t.beta2_hat * x - b2 * x.sqrt());
        points += 1;
    }
    ok &= worst >= 0.0;
    parts.push(format!(
        "majorization min gap {worst:e} over {points} points"
    ));
    judge(ok, parts.join(", "))
}

fn run_cli(command: &str, config: &Path, workers: usize) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_pdv"))
        .arg(command)
        .arg(config)
        .env("PDV_WORKERS", workers.to_string())
        .status()
        .unwrap()
        .code()
        .unwrap_or(-1)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{
  "model": {{"two_factor": {{"beta0": 0.08, "beta1": -0.08, "beta2": 0.5, "lambda1": 62, "lambda2": 40}}}},
  "sim": {{"dt": 1e-4, "horizon": 0.05, "seed": 42, "paths": 200}},
  "checks": [
    {{"name": "nonexplosion"}},
    {{"name": "moment_bound"}},
    {{"name": "martingale", "paths": 2000, "ladder_paths": 500}},
    {{"name": "convergence", "paths": 50}}
  ],
  "output": {{"directory": {}, "formats": ["csv", "json"]}}
}}"#,
            serde_json::to_string(out.to_str().unwrap()).unwrap()
        ),
    )
    .unwrap();
    let mut runs = Vec::new();
    let mut codes = Vec::new();
    for workers in [1, 4, 1, 3] {
        let _ = fs::remove_dir_all(&out);
        codes.push((
            run_cli("simulate", &cfg, workers),
            run_cli("verify", &cfg, workers),
        ));
        runs.push(snapshot(&out));
    }
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let files = runs[0].len();
    let ok = identical
        && codes.iter().all(|&(s, _)| s == 0)
        && codes.windows(2).all(|w| w[0] == w[1])
        && files == 402;
    judge(
        ok,
        format!("{files} files, identical across worker counts 1, 4, 1, 3: {identical}, exit codes {:?}", codes[0]),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: usize, title: &str, outcome: Outcome| match &outcome {
        Ok(d) => println!("PASS  criterion {id:>2} {title}: {d}"),
        Err(d) => {
            failed += 1;
            println!("FAIL  criterion {id:>2} {title}: {d}");
        }
    };
    let runs = nonexplosion_runs();
    report(1, "non-explosion", criterion_1(&runs));
    report(2, "variance factor positivity", criterion_2(&runs));
    report(3, "positivity and comparison", criterion_3());
    report(4, "positivity failure", criterion_4());
    report(5, "moment bound", criterion_5());
    report(6, "martingale property", criterion_6());
    report(7, "reduction consistency", criterion_7());
    report(8, "scheme convergence", criterion_8());
    report(9, "closed-form constants", criterion_9());
    report(10, "determinism", criterion_10());
    if failed == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
