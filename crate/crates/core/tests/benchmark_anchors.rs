//! Windowed-series accuracy anchors on the linear benchmark with a closed
//! form, including the adaptive-window behavior and conservativeness of the
//! error-rate bound.

use sassim_core::engine::benchmark::{
    run_linear_benchmark, BenchConfig, BenchField, LinearBenchmark,
};
use sassim_core::engine::{Method, WindowPolicy};
use sassim_core::series::{propagate, SeriesField};

fn fixed_sas(order: usize, h: f64) -> f64 {
    let bench = LinearBenchmark::default();
    let cfg = BenchConfig {
        method: Method::Sas,
        order,
        window: WindowPolicy::Fixed(h),
        ..BenchConfig::default()
    };
    run_linear_benchmark(&bench, &cfg).unwrap().max_abs_error
}

#[test]
fn fixed_window_error_by_order() {
    // frozen against an independent prototype of the same recursion; the
    // reference errors for this system at h = 0.01 are 0.1, 0.96e-3,
    // 7.4e-6, 4.7e-8, 2.4e-10 for orders 2..=6, with 7 and 8 at the
    // double-precision floor
    let expected = [
        (2, 1.019e-1, 0.02),
        (3, 9.571e-4, 0.02),
        (4, 7.441e-6, 0.02),
        (5, 4.737e-8, 0.02),
        (6, 2.446e-10, 0.05),
    ];
    for (order, want, rel) in expected {
        let got = fixed_sas(order, 0.01);
        assert!(
            ((got - want) / want).abs() < rel,
            "order {order}: got {got:.4e}, want {want:.4e}"
        );
    }
    // orders 7 and 8 sit at the double-precision floor; only the floor
    // bound is meaningful
    for order in [7, 8] {
        let got = fixed_sas(order, 0.01);
        assert!(got > 0.0 && got <= 1e-11, "order {order}: got {got:.4e}");
    }
}

#[test]
fn error_decreases_through_order_six() {
    let mut prev = f64::INFINITY;
    for order in 4..=6 {
        let got = fixed_sas(order, 0.01);
        assert!(got < prev, "order {order} did not improve: {got} vs {prev}");
        prev = got;
    }
}

#[test]
fn rk4_fourth_order_convergence() {
    let bench = LinearBenchmark::default();
    let run = |dt: f64| {
        let cfg = BenchConfig {
            method: Method::Rk4,
            dt,
            ..BenchConfig::default()
        };
        run_linear_benchmark(&bench, &cfg).unwrap().max_abs_error
    };
    let e1 = run(0.01);
    let e2 = run(0.005);
    let ratio = e1 / e2;
    assert!(
        (ratio - 16.0).abs() < 1.5,
        "halving dt should cut the error ~16x, got {ratio}"
    );
}

#[test]
fn fe_first_step() {
    // x' = -x via the degenerate benchmark path is not expressible; check
    // the forward-Euler step helper on a scalar decay field instead
    struct Decay;
    impl SeriesField for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval_series(
            &self,
            x: &sassim_core::series::SeriesVector,
        ) -> Result<sassim_core::series::SeriesVector, sassim_core::series::SeriesError> {
            sassim_core::series::SeriesVector::new(vec![x.component(0).neg()])
        }
    }
    let out = sassim_core::engine::euler_step(&Decay, 0.0, &[1.0], 0.1).unwrap();
    assert!((out[0] - 0.9).abs() < 1e-16);
}

#[test]
fn adaptive_first_window_matches_bound_crossing() {
    // n = 5, eps = 0.006: the sampled bound crosses the tolerance near
    // 0.1515 s; with the probe-verify-bisect selection the first accepted
    // window lands at alpha times the crossing
    let bench = LinearBenchmark::default();
    let cfg = BenchConfig {
        method: Method::Sas,
        order: 5,
        window: WindowPolicy::Adaptive,
        eps: 0.006,
        ..BenchConfig::default()
    };
    let report = run_linear_benchmark(&bench, &cfg).unwrap();
    let first = report.first_window().unwrap();
    assert!(
        (first - 0.1439).abs() < 0.01,
        "first accepted window {first}"
    );
}

#[test]
fn adaptive_windows_grow_with_order() {
    let bench = LinearBenchmark::default();
    let eps_by_order = [(3, 0.0025), (4, 0.004), (5, 0.006), (6, 0.007), (7, 0.009), (8, 0.015)];
    let mut prev_mean = 0.0;
    for (order, eps) in eps_by_order {
        let cfg = BenchConfig {
            method: Method::Sas,
            order,
            window: WindowPolicy::Adaptive,
            eps,
            ..BenchConfig::default()
        };
        let report = run_linear_benchmark(&bench, &cfg).unwrap();
        assert!(
            report.mean_window >= prev_mean,
            "order {order}: mean window {} dropped below {prev_mean}",
            report.mean_window
        );
        prev_mean = report.mean_window;
        assert!(
            report.max_abs_error > 1e-4 && report.max_abs_error < 1e-2,
            "order {order}: max error {}",
            report.max_abs_error
        );
    }
}

#[test]
fn per_window_error_within_exact_rate_bound() {
    // Conservativeness: with r computed from the exact local solution, the
    // error accumulated over each window stays within r(h) * h.
    let bench = LinearBenchmark::default();
    let cfg = BenchConfig {
        method: Method::Sas,
        order: 5,
        window: WindowPolicy::Adaptive,
        eps: 0.006,
        ..BenchConfig::default()
    };
    let report = run_linear_benchmark(&bench, &cfg).unwrap();
    let mut violations = 0usize;
    for w in &report.windows {
        let coeffs = bench.recursion_coefficients(w.x0, w.xdot0, 5);
        let p = sassim_core::series::PowerSeries::new(w.t0, coeffs).unwrap();
        let dp = p.differentiate();
        let ddp = dp.differentiate();
        // exact r over the window: residual of the second equation against
        // the local true solution
        let om2 = bench.omega * bench.omega + bench.sigma * bench.sigma;
        let mut r_exact = 0.0f64;
        let m = 64;
        for k in 0..=m {
            let tau = w.h * k as f64 / m as f64;
            let (x_loc, xd_loc) = bench.closed_form(w.x0, w.xdot0, tau);
            let r1 = (xd_loc - dp.evaluate(w.t0 + tau)).abs();
            let f2 = 2.0 * bench.sigma * xd_loc - om2 * x_loc;
            let r2 = (f2 - ddp.evaluate(w.t0 + tau)).abs();
            r_exact = r_exact.max(r1).max(r2);
        }
        let (x_true, xd_true) = bench.closed_form(w.x0, w.xdot0, w.h);
        let err = (p.evaluate(w.t0 + w.h) - x_true)
            .abs()
            .max((dp.evaluate(w.t0 + w.h) - xd_true).abs());
        if err > r_exact * w.h * 1.0000001 {
            violations += 1;
            assert!(
                err <= r_exact * w.h * 1.1,
                "window at {} exceeds the bound by more than 10%",
                w.t0
            );
        }
    }
    let frac = violations as f64 / report.windows.len() as f64;
    assert!(frac <= 0.01, "violations on {frac} of windows");
}

#[test]
fn propagate_matches_scalar_recursion() {
    // the two-state series solution reproduces the scalar coefficient
    // recursion on the x component
    let bench = LinearBenchmark::default();
    let field = BenchField::from(&bench);
    let sas = propagate(&field, &[0.0, core::f64::consts::PI], 0.0, 12).unwrap();
    let a = bench.recursion_coefficients(0.0, core::f64::consts::PI, 12);
    for (k, want) in a.iter().enumerate() {
        let got = sas.component(0).coeff(k);
        let scale = want.abs().max(1e-300);
        assert!(
            ((got - want) / scale).abs() < 1e-12,
            "coefficient {k}: got {got}, want {want}"
        );
    }
}

#[test]
fn bound_crossing_sits_near_152ms() {
    // the sampled bound of the order-5 windowed solution from rest crosses
    // eps = 0.006 near 0.152 s
    let bench = LinearBenchmark::default();
    let field = BenchField::from(&bench);
    let coeffs = bench.recursion_coefficients(0.0, core::f64::consts::PI, 5);
    let p = sassim_core::series::PowerSeries::new(0.0, coeffs).unwrap();
    let dp = p.differentiate().resized(5);
    let sas = sassim_core::series::SeriesVector::new(vec![p, dp]).unwrap();
    let classes = [0usize, 0usize];
    let r = |h: f64| {
        sassim_core::stepper::error_rate_bound(&sas, &field, &classes, 1, h, 64).unwrap()[0]
    };
    let eps = 0.006;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    assert!(r(hi) > eps && r(1e-4) < eps);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if r(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 0.152).abs() < 0.005, "crossing at {lo}");
}

#[test]
fn accepted_window_stays_below_exact_crossing() {
    // conservativeness gap: the accepted first window never exceeds the
    // brute-force crossing of the bound computed with the exact solution
    let bench = LinearBenchmark::default();
    let om2 = bench.omega * bench.omega + bench.sigma * bench.sigma;
    let coeffs = bench.recursion_coefficients(bench.x0, bench.xdot0, 5);
    let p = sassim_core::series::PowerSeries::new(0.0, coeffs).unwrap();
    let dp = p.differentiate();
    let ddp = dp.differentiate();
    let r_exact = |h: f64| {
        let mut worst = 0.0f64;
        for k in 0..=256 {
            let tau = h * k as f64 / 256.0;
            let (x_loc, xd_loc) = bench.closed_form(bench.x0, bench.xdot0, tau);
            let r1 = (xd_loc - dp.evaluate(tau)).abs();
            let f2 = 2.0 * bench.sigma * xd_loc - om2 * x_loc;
            let r2 = (f2 - ddp.evaluate(tau)).abs();
            worst = worst.max(r1).max(r2);
        }
        worst
    };
    let eps = 0.006;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if r_exact(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let report = bench_run_adaptive_order5();
    let first = report.first_window().unwrap();
    assert!(
        first <= lo * 1.0001,
        "accepted window {first} exceeds the exact crossing {lo}"
    );
}

fn bench_run_adaptive_order5() -> sassim_core::engine::benchmark::BenchReport {
    let cfg = BenchConfig {
        method: Method::Sas,
        order: 5,
        window: WindowPolicy::Adaptive,
        eps: 0.006,
        ..BenchConfig::default()
    };
    run_linear_benchmark(&LinearBenchmark::default(), &cfg).unwrap()
}
