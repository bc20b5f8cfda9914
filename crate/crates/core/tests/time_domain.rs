//! End-to-end checks of the leapfrog solver and its monitors.

use memwave_core::analysis::*;
use memwave_core::timedomain::*;
use memwave_core::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn free_transport_is_second_order() {
    let base = fig1_config(0.0, 0.0).unwrap().free();
    let r = convergence_study(&base, 4, Refinement::Joint).unwrap();
    assert!((r.fitted_order - 2.0).abs() < 0.2, "{r:?}");
    for p in &r.orders {
        assert!((p - 2.0).abs() < 0.2, "{r:?}");
    }
}

#[test]
fn free_transport_error_below_1e3_at_half_spacing() {
    let base = fig1_config(0.0, 0.0).unwrap();
    let fine = refine(&base, Refinement::Joint);
    let err = free_transport_error(&fine).unwrap();
    assert!(err < 1e-3, "{err}");
    // At the default spacing the forward-Euler start leaves ~(lambda dx)^2/8.
    let coarse = free_transport_error(&base).unwrap();
    assert!(coarse > 3.0 * err && coarse < 3e-3, "{coarse}");
}

#[test]
fn dt_only_refinement_plateaus_at_spatial_floor() {
    let mut cfg = refine(&fig1_config(0.0, 0.0).unwrap(), Refinement::TimeOnly);
    let mut errs = Vec::new();
    for _ in 0..3 {
        errs.push(free_transport_error(&cfg).unwrap());
        cfg = refine(&cfg, Refinement::TimeOnly);
    }
    let (d1, d2) = (errs[1] - errs[0], errs[2] - errs[1]);
    assert!(d2.abs() < 0.3 * d1.abs(), "{errs:?}");
    assert!((errs[2] - errs[1]).abs() / errs[2] < 0.1, "{errs:?}");
}

#[test]
fn memory_quadrature_is_first_order_in_time() {
    let base = fig1_config(3.0, 2.0).unwrap();
    let r = convergence_study(&base, 4, Refinement::TimeOnly).unwrap();
    assert!(r.fitted_order >= 1.0, "{r:?}");
}

#[test]
fn convergence_reports_the_failing_level() {
    // Strict cone check with the figure grid fails at every level.
    let mut base = fig1_config(3.0, 2.0).unwrap();
    base.boundary = BoundaryPolicy::Strict;
    match convergence_study(&base, 3, Refinement::Joint) {
        Err(Error::Level { level: 0, source }) => {
            assert!(matches!(*source, Error::ConeViolation { .. }));
        }
        other => panic!("{other:?}"),
    }
    let mut base = fig1_config(0.0, 0.0).unwrap();
    base.time = TimeAxis::until(3.65, 0.004).unwrap();
    assert!(convergence_study(&base, 3, Refinement::Joint).is_ok());
}

#[test]
fn free_energy_is_conserved_after_startup() {
    let mut cfg = fig1_config(0.0, 0.0).unwrap().free();
    cfg.stride = 1;
    let trace = energy_trace(&simulate(&cfg).unwrap());
    assert!(trace.drift_after(0.5) < 1e-4, "{}", trace.drift_after(0.5));
    assert!(trace.max_relative_drift() < 5e-3);
    assert!(trace.lambda_fit.abs() < 1e-3);
    assert!(trace.e_h1.iter().chain(&trace.e_l2t).all(|e| *e >= 0.0));
}

#[test]
fn memory_runs_admit_log_linear_envelope() {
    for (gamma, alpha) in [(3.0, 2.0), (4.0, 10.0)] {
        let trace = energy_trace(&simulate(&fig1_config(gamma, alpha).unwrap()).unwrap());
        assert!(trace.lambda_fit.is_finite());
        assert!(trace.envelope_residual < ENVELOPE_TOL, "({gamma},{alpha}) {trace:?}");
    }
}

#[test]
fn memoryless_well_grows_at_bound_state_rate() {
    // -phi'' + V phi has eigenvalue -22.8 for the figure potential.
    let mut cfg = fig1_config(0.0, 0.0).unwrap();
    cfg.stride = 20;
    let trace = energy_trace(&simulate(&cfg).unwrap());
    let e = trace.total();
    let n = e.len();
    let rate = (e[n - 1] / e[n - 3]).ln() / (trace.times[n - 1] - trace.times[n - 3]);
    assert!((rate - 22.8f64.sqrt()).abs() < 0.5, "{rate}");
}

#[test]
fn scattered_waves_are_causal() {
    for (gamma, alpha) in FIG1_PAIRS {
        let r = causality_check(&fig1_config(gamma, alpha).unwrap(), SUPPORT_TOL).unwrap();
        assert!(r.pass, "({gamma},{alpha}) {r:?}");
    }
    let r = causality_check(&barrier_config(50.0, 3.0, 10.0, 0.01).unwrap(), SUPPORT_TOL).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn memoryless_reduction_is_first_order() {
    let mut cfg = barrier_config(10.0, 0.0, 0.0, 0.01).unwrap();
    cfg.time = TimeAxis::until(4.0, 0.005).unwrap();
    let r = memoryless_reduction_check(&cfg, 3).unwrap();
    assert!(r.pass, "{r:?}");
    for s in &r.slopes {
        assert!((s - 1.0).abs() < 0.2, "{r:?}");
    }
}

#[test]
fn memoryless_reduction_without_potential_is_exact() {
    let mut cfg = barrier_config(0.0, 0.0, 0.0, 0.01).unwrap();
    cfg.time = TimeAxis::until(4.0, 0.005).unwrap();
    let r = memoryless_reduction_check(&cfg, 1).unwrap();
    assert!(r.distances.iter().all(|d| *d < 1e-12), "{r:?}");
    assert!(r.pass);
}

#[test]
fn memoryless_reduction_rejects_memory_models() {
    let cfg = barrier_config(10.0, 3.0, 0.0, 0.01).unwrap();
    assert!(memoryless_reduction_check(&cfg, 1).is_err());
}

/// Amplification of random data over `steps` free leapfrog steps.
fn free_growth(ratio: f64, steps: usize) -> f64 {
    let grid = Grid1D::new(-1.0, 0.01, 201).unwrap();
    let time = TimeAxis::new(ratio * 0.01, steps).unwrap();
    let packet = WavePacket::new(-0.5, 0.05, 10.0).unwrap();
    let cfg = SimulationConfig::new(grid, time, packet, PermittivityModel::free(0.5));
    let mut rng = StdRng::seed_from_u64(12345);
    let mut rand = || rng.gen_range(-0.5..0.5);
    let n = grid.len();
    let mut u: Vec<Complex64> = (0..n).map(|_| c(rand(), rand())).collect();
    let mut v: Vec<Complex64> = (0..n).map(|_| c(rand(), rand())).collect();
    u[0] = c(0.0, 0.0);
    u[n - 1] = c(0.0, 0.0);
    v[0] = c(0.0, 0.0);
    v[n - 1] = c(0.0, 0.0);
    let s0 = FieldState::new(u, v, 0.0).unwrap();
    let m = MemoryAccumulator::zeros(n, 0.0, 0.0);
    let start = s0.max_abs_u();
    let mut prev = s0.clone();
    let mut cur = step_startup(&s0, &m, &cfg);
    for _ in 1..steps {
        let next = step_leapfrog(&prev, &cur, &m, &cfg);
        prev = cur;
        cur = next;
    }
    cur.max_abs_u() / start
}

#[test]
fn von_neumann_limit_is_half() {
    let g = free_growth(0.45, 4000);
    assert!(g < 20.0, "{g}");
    let g = free_growth(0.55, 300);
    assert!(g > 1e6, "{g}");
}

#[test]
fn simulate_rejects_ratios_above_half() {
    let mut cfg = fig1_config(3.0, 2.0).unwrap();
    cfg.time = TimeAxis::until(3.65, 0.0051).unwrap();
    assert!(matches!(simulate(&cfg), Err(Error::Cfl { .. })));
}

#[test]
fn fixed_point_matches_inverse_decay_rate() {
    let r = memory_fixed_point_check(3.0, 0.005, 4).unwrap();
    assert!(r.pass, "{r:?}");
    for (e, o) in r.errors.iter().zip(&r.orders) {
        assert!(*e < 0.005);
        assert!((o - 1.0).abs() < 0.05);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Without decay the recurrence is a running sum.
    #[test]
    fn undamped_memory_telescopes(vals in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..200), dt in 1e-4f64..0.1) {
        let mut m = MemoryAccumulator::zeros(1, 0.0, 0.0);
        let mut sum = c(0.0, 0.0);
        for (re, im) in &vals {
            let v = [c(*re, *im)];
            m = update_memory(&m, &v, dt).unwrap();
            sum += dt * v[0];
        }
        prop_assert!((m.m[0] - sum).norm() <= 1e-12 * (1.0 + sum.norm()));
    }

    /// With decay the recurrence is the geometric sum.
    #[test]
    fn damped_memory_is_geometric(vals in prop::collection::vec(-1.0f64..1.0, 1..100), gamma in 0.1f64..10.0, dt in 1e-3f64..0.05) {
        let mut m = MemoryAccumulator::zeros(1, gamma, 0.0);
        for v in &vals {
            m = update_memory(&m, &[c(*v, 0.0)], dt).unwrap();
        }
        let n = vals.len();
        let expected: f64 = vals
            .iter()
            .enumerate()
            .map(|(k, v)| dt * v * (-gamma * dt * (n - 1 - k) as f64).exp())
            .sum();
        prop_assert!((m.m[0].re - expected).abs() < 1e-12);
    }

    /// The stepper is linear in the data.
    #[test]
    fn leapfrog_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let cfg = fig1_config(3.0, 2.0).unwrap();
        let s0 = initial_state(&cfg);
        let m0 = init_prehistory(&cfg).unwrap();
        let scale = c(a, b);
        let scaled = FieldState::new(
            s0.u.iter().map(|z| scale * z).collect(),
            s0.v.iter().map(|z| scale * z).collect(),
            0.0,
        ).unwrap();
        let ms = MemoryAccumulator { m: m0.m.iter().map(|z| scale * z).collect(), ..m0.clone() };
        let s1 = step_startup(&s0, &m0, &cfg);
        let t1 = step_startup(&scaled, &ms, &cfg);
        let s2 = step_leapfrog(&s0, &s1, &m0, &cfg);
        let t2 = step_leapfrog(&scaled, &t1, &ms, &cfg);
        for (x, y) in s2.u.iter().zip(&t2.u).chain(s2.v.iter().zip(&t2.v)) {
            prop_assert!((scale * x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }
}
