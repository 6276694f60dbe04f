//! Integration tests of the time-stepping schemes on desk-scale problems.

mod common;

use approx::assert_relative_eq;
use nalgebra::DVector;
use nsdae::diagnostics::{error_norms, fit_drift, fit_order, residual_norms};
use nsdae::schemes::{
    make_stepper, run, SchemeConfig, SchemeKind, State, Stepper,
};
use nsdae::system::solve_steady_stokes;

use common::{init_state, scalar_decay, scalar_forced, small_cavity, small_channel, stokes_of};

fn rel_change(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

#[test]
fn scalar_forced_step_is_explicit_euler() {
    let sys = scalar_forced(1.0);
    let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, 0.1, 0.1);
    let traj = run(&sys, &cfg, &DVector::zeros(1), &DVector::zeros(0)).unwrap();
    assert_relative_eq!(traj.v[1][0], 0.1, epsilon = 1e-14);
}

#[test]
fn scalar_decay_trapezoid_closed_form() {
    let sys = scalar_decay();
    let cfg = SchemeConfig::direct(SchemeKind::ReferenceTrapezoid, 0.1, 0.1);
    let traj = run(&sys, &cfg, &DVector::from_element(1, 1.0), &DVector::zeros(0)).unwrap();
    // (1 - tau/2) / (1 + tau/2) at tau = 0.1
    assert_relative_eq!(traj.v[1][0], 0.95 / 1.05, epsilon = 1e-14);
}

#[test]
fn zero_horizon_returns_single_state() {
    let sys = scalar_decay();
    let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, 0.1, 0.0);
    let traj = run(&sys, &cfg, &DVector::from_element(1, 2.0), &DVector::zeros(0)).unwrap();
    assert_eq!(traj.times.len(), 1);
    assert_eq!(traj.v[0][0], 2.0);
}

#[test]
fn direct_runs_are_bitwise_deterministic() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, 1.0 / 64.0, 8.0 / 64.0);
    let a = run(&sys, &cfg, &v0, &p0).unwrap();
    let b = run(&sys, &cfg, &v0, &p0).unwrap();
    for k in 0..=a.steps() {
        assert_eq!(a.v[k], b.v[k]);
        assert_eq!(a.p[k], b.p[k]);
    }
}

#[test]
fn inconsistent_initial_velocity_is_rejected() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let mut bad = v0.clone();
    bad[0] += 1.0;
    let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, 0.01, 0.05);
    assert!(run(&sys, &cfg, &bad, &p0).is_err());
}

#[test]
fn steady_stokes_is_a_fixed_point_of_every_scheme() {
    // penalty apart, the steady state is a fixed point to machine noise;
    // the penalty scheme perturbs it by O(1/beta)
    let sys = stokes_of(&small_cavity(8, 50.0, 1.0));
    let stokes = solve_steady_stokes(&sys, 0.0).unwrap();
    let (v0, p0) = (stokes.v_s.clone(), stokes.p_s.clone());
    let tau = 0.01;
    let schemes = [
        SchemeKind::ImexEuler,
        SchemeKind::Projection,
        SchemeKind::Simple,
        SchemeKind::ArtificialCompressibility { beta: 1e3 },
        SchemeKind::Penalty { beta: 3e7 },
        SchemeKind::DerivativeConstraint { eta: None },
        SchemeKind::MinimalExtension,
        SchemeKind::ReferenceTrapezoid,
    ];
    for scheme in schemes {
        let name = scheme.name();
        let cfg = SchemeConfig::direct(scheme, tau, tau);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let change = rel_change(&traj.v[1], &v0);
        assert!(
            change <= 1e-8,
            "{name}: velocity moved by {change:.3e} off the steady state"
        );
    }
}

#[test]
fn constraint_is_enforced_each_step_by_saddle_and_correction_schemes() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let tau = 1.0 / 128.0;
    for scheme in [
        SchemeKind::ImexEuler,
        SchemeKind::Projection,
        SchemeKind::Simple,
        SchemeKind::MinimalExtension,
    ] {
        let name = scheme.name();
        let cfg = SchemeConfig::direct(scheme, tau, 10.0 * tau);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        for k in 1..=traj.steps() {
            let res = sys.constraint_residual(&traj.v[k], traj.times[k]).unwrap();
            assert!(res <= 1e-9, "{name}: step {k} residual {res:.3e}");
        }
    }
}

#[test]
fn projection_of_feasible_state_is_identity() {
    // one projection step keeps B v = g exactly, so re-projecting the
    // result must leave it unchanged and the pressure increment at zero
    let sys = stokes_of(&small_channel(6, 40.0));
    let (v0, p0) = init_state(&sys);
    let tau = 0.01;
    let cfg = SchemeConfig::direct(SchemeKind::Projection, tau, tau);
    let traj = run(&sys, &cfg, &v0, &p0).unwrap();
    let v1 = &traj.v[1];
    // the Schur right-hand side of a re-projection vanishes
    let res = sys.b.matvec(v1).unwrap() - sys.g.eval(tau);
    assert!(sys.norm_mq_inv().norm(&res).unwrap() <= 1e-11);
}

#[test]
fn linear_problem_imex_equals_simple_and_minimal_extension() {
    // on a Stokes problem with direct solves the three formulations solve
    // identical linear systems; trajectories agree to roundoff
    let sys = stokes_of(&small_channel(6, 40.0));
    let (v0, p0) = init_state(&sys);
    let cfg = |s| SchemeConfig::direct(s, 1.0 / 64.0, 8.0 / 64.0);
    let imex = run(&sys, &cfg(SchemeKind::ImexEuler), &v0, &p0).unwrap();
    let simple = run(&sys, &cfg(SchemeKind::Simple), &v0, &p0).unwrap();
    let minext = run(&sys, &cfg(SchemeKind::MinimalExtension), &v0, &p0).unwrap();
    for k in 0..=imex.steps() {
        assert!(rel_change(&simple.v[k], &imex.v[k]) <= 1e-10);
        assert!(rel_change(&minext.v[k], &imex.v[k]) <= 1e-10);
    }
}

#[test]
fn per_step_deviations_between_schemes_shrink_quadratically() {
    // step each scheme from the same states along an IMEX trajectory and
    // fit the largest per-step deviation against tau
    let sys = stokes_of(&small_cavity(8, 100.0, 0.05));
    let (v0, p0) = init_state(&sys);
    let taus = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0];
    for other in [SchemeKind::Projection, SchemeKind::Simple, SchemeKind::MinimalExtension] {
        let mut points = Vec::new();
        for &tau in &taus {
            let steps = 8;
            let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, tau, steps as f64 * tau);
            let imex = run(&sys, &cfg, &v0, &p0).unwrap();
            let other_cfg = SchemeConfig::direct(other.clone(), tau, steps as f64 * tau);
            let mut stepper = make_stepper(&sys, &other_cfg).unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..steps {
                let state = State {
                    v: imex.v[k].clone(),
                    p: imex.pressure_at_node(k).unwrap(),
                };
                let out = stepper.step(&state, imex.times[k]).unwrap();
                let dev = sys.norm_m().norm(&(&out.v - &imex.v[k + 1])).unwrap();
                worst = worst.max(dev);
            }
            points.push((tau, worst));
        }
        let name = other.name();
        if points.iter().all(|&(_, d)| d > 1e-13) {
            let slope = fit_order(&points).unwrap();
            assert!(
                slope > 1.6,
                "{name}: per-step deviation shrinks with order {slope:.2} only"
            );
            // fitted constant of the tau^2 law stays small
            for &(tau, dev) in &points {
                assert!(
                    dev <= 10.0 * tau * tau,
                    "{name}: deviation {dev:.3e} exceeds 10 tau^2 at tau = {tau}"
                );
            }
        } else {
            // scheme coincides with IMEX on linear problems (roundoff only)
            for &(tau, dev) in &points {
                assert!(dev <= 10.0 * tau * tau, "{name} at tau = {tau}: {dev:.3e}");
            }
        }
    }
}

#[test]
fn artificial_compressibility_limit_is_bit_compatible_with_simple() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let tau = 1.0 / 64.0;
    let simple = run(
        &sys,
        &SchemeConfig::direct(SchemeKind::Simple, tau, 6.0 * tau),
        &v0,
        &p0,
    )
    .unwrap();
    let ac = run(
        &sys,
        &SchemeConfig::direct(
            SchemeKind::ArtificialCompressibility { beta: f64::INFINITY },
            tau,
            6.0 * tau,
        ),
        &v0,
        &p0,
    )
    .unwrap();
    for k in 0..=simple.steps() {
        assert_eq!(simple.v[k], ac.v[k], "velocity bits differ at step {k}");
        assert_eq!(simple.p[k], ac.p[k], "pressure bits differ at step {k}");
    }
}

#[test]
fn artificial_compressibility_relaxes_the_constraint_by_one_over_beta() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let tau = 1.0 / 64.0;
    // fitted over the beta sweep below: residual * beta stays under ~12
    // on this problem, so 30 bounds the C of `residual <= C / beta`
    let c_fitted = 30.0;
    let mut residuals = Vec::new();
    for beta in [1e2, 1e3, 1e4] {
        let shift = 1.0 / (beta * tau);
        let cfg = SchemeConfig::direct(
            SchemeKind::ArtificialCompressibility { beta },
            tau,
            4.0 * tau,
        );
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        // the scheme satisfies B v_new - g_new = -shift * p_delta exactly
        for k in 0..traj.steps() {
            let res_vec = sys.b.matvec(&traj.v[k + 1]).unwrap() - sys.g.eval(traj.times[k + 1]);
            let p_delta = &traj.p[k + 1] - &traj.p[k];
            let identity_gap = (&res_vec + &p_delta * shift).norm();
            assert!(
                identity_gap <= 1e-11 * res_vec.norm().max(1e-300),
                "relaxation identity violated by {identity_gap:.3e} at step {k}"
            );
        }
        let k = traj.steps();
        let res = sys.constraint_residual(&traj.v[k], traj.times[k]).unwrap();
        assert!(res > 0.0 && res <= c_fitted / beta, "residual {res:.3e} at beta {beta:.0e}");
        residuals.push(res);
    }
    assert!(residuals[0] > residuals[1] && residuals[1] > residuals[2]);
}

#[test]
fn penalty_residual_decreases_monotonically_in_beta() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let tau = 1.0 / 64.0;
    let mut residuals = Vec::new();
    for beta in [1e2, 1e3, 1e4] {
        let cfg = SchemeConfig::direct(SchemeKind::Penalty { beta }, tau, 4.0 * tau);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let k = traj.steps();
        residuals.push(sys.constraint_residual(&traj.v[k], traj.times[k]).unwrap());
    }
    assert!(
        residuals[0] > residuals[1] && residuals[1] > residuals[2],
        "penalty residuals {residuals:?} are not monotone"
    );
}

#[test]
fn penalty_homogeneous_problem_decays_with_small_pressure() {
    // no forcing, no boundary data: velocity diffuses away, pressure noise
    let sys = stokes_of(&small_cavity(6, 10.0, 0.0));
    let n = sys.n();
    let v0 = DVector::zeros(n);
    let p0 = DVector::zeros(sys.m());
    let cfg = SchemeConfig::direct(SchemeKind::Penalty { beta: 1e4 }, 0.01, 0.05);
    let traj = run(&sys, &cfg, &v0, &p0).unwrap();
    for k in 0..=traj.steps() {
        assert!(traj.v[k].norm() <= 1e-12);
    }
    let k = traj.steps();
    assert!(traj.p[k].norm() <= 1e-10);
}

#[test]
fn derivative_constraint_drift_follows_the_injected_error() {
    let sys = stokes_of(&small_channel(6, 40.0));
    let (v0, p0) = init_state(&sys);
    let tau = 1.0 / 64.0;
    let t_end = 32.0 * tau;

    // without perturbation: no systematic drift
    let cfg = SchemeConfig::direct(SchemeKind::DerivativeConstraint { eta: None }, tau, t_end);
    let traj = run(&sys, &cfg, &v0, &p0).unwrap();
    let slope0 = fit_drift(&traj, &sys).unwrap();
    assert!(slope0.abs() <= 1e-10, "machine-noise drift {slope0:.3e}");

    // constant eta: residual grows like t * ||eta|| in the M_Q^{-1} norm
    let m = sys.m();
    let eta = DVector::from_fn(m, |i, _| 0.01 * ((i % 3) as f64 - 1.0) + 0.005);
    let eta_norm = sys.norm_mq_inv().norm(&eta).unwrap();
    let cfg = SchemeConfig::direct(
        SchemeKind::DerivativeConstraint { eta: Some(eta.clone()) },
        tau,
        t_end,
    );
    let traj = run(&sys, &cfg, &v0, &p0).unwrap();
    let slope = fit_drift(&traj, &sys).unwrap();
    assert!(
        (slope - eta_norm).abs() <= 0.05 * eta_norm,
        "drift slope {slope:.6e} vs ||eta|| {eta_norm:.6e}"
    );

    // doubling the perturbation doubles the slope
    let cfg2 = SchemeConfig::direct(
        SchemeKind::DerivativeConstraint { eta: Some(&eta * 2.0) },
        tau,
        t_end,
    );
    let traj2 = run(&sys, &cfg2, &v0, &p0).unwrap();
    let slope2 = fit_drift(&traj2, &sys).unwrap();
    assert!(
        (slope2 / slope - 2.0).abs() <= 0.05 * 2.0,
        "slope ratio {}",
        slope2 / slope
    );
}

#[test]
fn trapezoid_reference_is_second_order_on_the_cavity() {
    let sys = small_cavity(8, 50.0, 1.0);
    let (v0, p0) = init_state(&sys);
    let t_end = 0.25;
    let ref_cfg = SchemeConfig::direct(SchemeKind::ReferenceTrapezoid, t_end / 1024.0, t_end);
    let reference = run(&sys, &ref_cfg, &v0, &p0).unwrap();
    let mut points = Vec::new();
    for k in [16usize, 32, 64, 128] {
        let tau = t_end / k as f64;
        let cfg = SchemeConfig::direct(SchemeKind::ReferenceTrapezoid, tau, t_end);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let (e_v, _) = error_norms(&traj, &reference, sys.norm_m(), sys.norm_mp()).unwrap();
        points.push((tau, e_v));
    }
    let slope = fit_order(&points).unwrap();
    assert!(
        (slope - 2.0).abs() <= 0.3,
        "trapezoidal reference converges with order {slope:.3}"
    );
}

#[test]
fn imex_is_first_order_against_the_reference() {
    let sys = small_cavity(8, 50.0, 1.0);
    let (v0, p0) = init_state(&sys);
    let t_end = 0.25;
    let ref_cfg = SchemeConfig::direct(SchemeKind::ReferenceTrapezoid, t_end / 2048.0, t_end);
    let reference = run(&sys, &ref_cfg, &v0, &p0).unwrap();
    let mut pv = Vec::new();
    let mut pp = Vec::new();
    for k in [32usize, 64, 128, 256] {
        let tau = t_end / k as f64;
        let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, tau, t_end);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        let (e_v, e_p) = error_norms(&traj, &reference, sys.norm_m(), sys.norm_mp()).unwrap();
        pv.push((tau, e_v));
        pp.push((tau, e_p));
    }
    let sv = fit_order(&pv).unwrap();
    let sp = fit_order(&pp).unwrap();
    assert!((0.8..=1.25).contains(&sv), "velocity order {sv:.3}");
    assert!((0.75..=1.30).contains(&sp), "pressure order {sp:.3}");
}

#[test]
fn direct_runs_have_tiny_integrated_residuals() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, 1.0 / 128.0, 16.0 / 128.0);
    let traj = run(&sys, &cfg, &v0, &p0).unwrap();
    let (r_m, r_c) = residual_norms(&traj, &sys).unwrap();
    assert!(r_m <= 1e-9, "momentum residual {r_m:.3e}");
    assert!(r_c <= 1e-9, "continuity residual {r_c:.3e}");
}

#[test]
fn iterative_runs_keep_their_tolerance_promises() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let lintol = 1e-6;
    for scheme in [SchemeKind::ImexEuler, SchemeKind::Simple] {
        let cfg = SchemeConfig::iterative(scheme, 1.0 / 64.0, 8.0 / 64.0, lintol);
        let traj = run(&sys, &cfg, &v0, &p0).unwrap();
        assert!(!traj.any_unconverged());
        for log in &traj.solver_log {
            for rec in [&log.momentum, &log.pressure, &log.correction]
                .into_iter()
                .flatten()
            {
                assert!(rec.converged);
                assert!(rec.rel_residual <= lintol);
                assert!(rec.iters > 0);
            }
        }
    }
}

#[test]
fn identical_trajectory_has_zero_errors() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let cfg = SchemeConfig::direct(SchemeKind::Simple, 1.0 / 64.0, 8.0 / 64.0);
    let traj = run(&sys, &cfg, &v0, &p0).unwrap();
    let (e_v, e_p) = error_norms(&traj, &traj, sys.norm_m(), sys.norm_mp()).unwrap();
    assert_eq!(e_v, 0.0);
    assert_eq!(e_p, 0.0);
}

#[test]
fn constant_velocity_offset_integrates_to_its_norm() {
    let sys = small_channel(6, 40.0);
    let (v0, p0) = init_state(&sys);
    let cfg = SchemeConfig::direct(SchemeKind::ImexEuler, 1.0 / 64.0, 1.0);
    let base = run(&sys, &cfg, &v0, &p0).unwrap();
    let mut shifted = base.clone();
    let delta = DVector::from_element(sys.n(), 1e-3);
    for v in &mut shifted.v {
        *v += &delta;
    }
    let (e_v, _) = error_norms(&shifted, &base, sys.norm_m(), sys.norm_mp()).unwrap();
    // trapz of a constant over [0, 1] is the constant itself
    let expected = sys.norm_m().norm(&delta).unwrap();
    assert_relative_eq!(e_v, expected, epsilon = 1e-12);
}
