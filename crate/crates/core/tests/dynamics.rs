use std::f64::consts::PI;
use std::sync::Arc;

use ktplate_core::diagnostics::{decay_fit, dissipation_residual, level_one_energy};
use ktplate_core::dynamics::{
    initial_jet, reconstruct_w_q, reconstruct_w_q_relaxed, residual_original, runtime_jet, simulate, step_nonlinear,
    HaltReason, MidpointStepper, OriginalJet, OriginalSnapshot, PlateState, Scheme, SimOptions,
};
use ktplate_core::model::{ModelParams, Nonlinearity};
use ktplate_core::oracle::{mode_spectrum, propagate_exact, ModeMatrix};
use ktplate_core::spectral::{make_basis, Basis, FluxField, SpectralField};
use ktplate_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(b: &Arc<Basis>, rng: &mut ChaCha8Rng, scale: f64, decay: i32) -> SpectralField {
    let c = (0..b.len())
        .map(|k| scale * rng.gen_range(-1.0..1.0) / ((k + 1) as f64).powi(decay))
        .collect();
    SpectralField::from_coeffs(b, c).unwrap()
}

fn random_state(b: &Arc<Basis>, seed: u64, scale: f64) -> PlateState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PlateState::new(
        0.0,
        random_field(b, &mut rng, scale, 3),
        random_field(b, &mut rng, scale, 2),
        random_field(b, &mut rng, scale, 3),
        random_field(b, &mut rng, scale, 2),
    )
    .unwrap()
}

fn run(s: &PlateState, params: &ModelParams, nl: &Nonlinearity, opts: &SimOptions) -> (Vec<PlateState>, HaltReason) {
    let mut states = vec![];
    let out = simulate(s, params, nl, opts, &mut |r| states.push(r.state)).unwrap();
    (states, out.halt)
}

#[test]
fn linear_identity_is_exact() {
    let b = make_basis(1, &[1.0], &[32], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::linear(1.0).unwrap();
    let s = random_state(&b, 7, 1.0);
    let opts = SimOptions { dt: 1e-3, t_end: 1.0, scheme: Scheme::LinearMidpoint, ..Default::default() };
    let mut states = vec![];
    let out = simulate(&s, &params, &nl, &opts, &mut |r| states.push(r.state)).unwrap();
    assert_eq!(out.halt, HaltReason::Completed);
    assert!(out.balance.residual() <= 1e-12, "{}", out.balance.residual());
    let r = dissipation_residual(&states, &params, &nl).unwrap();
    assert!(r <= 1e-12, "{r}");
    assert!(out.balance.e1_end < out.balance.e1_start);
}

#[test]
fn nonlinear_identity_holds_to_picard_tolerance() {
    let b = make_basis(1, &[1.0], &[16], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let s = random_state(&b, 11, 0.3);
    let opts = SimOptions { dt: 2e-3, t_end: 1.0, ..Default::default() };
    let out = simulate(&s, &params, &nl, &opts, &mut |_| {}).unwrap();
    assert_eq!(out.halt, HaltReason::Completed);
    assert!(out.balance.forcing_work.abs() > 1e-6);
    assert!(out.balance.residual() <= 1e-10, "{}", out.balance.residual());
}

#[test]
fn runtime_jet_matches_matrix_powers() {
    let b = make_basis(1, &[1.0], &[1], 2.0).unwrap();
    let params = ModelParams { alpha: 0.8, beta: 1.3, gamma: 0.5, eta: 0.7, tau: 0.4, sigma: 0.2, kappa0: 1.0 };
    let nl = Nonlinearity::linear(1.0).unwrap();
    let m = ModeMatrix::cattaneo(PI * PI, &params).unwrap();
    let u0 = [0.3, -0.2, 0.1, 0.05];
    for t in [0.0, 0.7] {
        let u = propagate_exact(&u0, &m, t).unwrap();
        let state = PlateState::new(
            t,
            SpectralField::mode(&b, 0, u[0]),
            SpectralField::mode(&b, 0, u[1]),
            SpectralField::mode(&b, 0, u[2]),
            SpectralField::mode(&b, 0, u[3]),
        )
        .unwrap();
        let jet = runtime_jet(&state, &params, &nl).unwrap();
        let mut d = nalgebra::DVector::from_row_slice(&u);
        for order in 1..=3 {
            d = m.matrix() * &d;
            let close = |got: f64, want: f64| (got - want).abs() <= 1e-10 * want.abs().max(1.0);
            assert!(close(jet.z[order].coeffs()[0], d[0]), "z order {order}");
            assert!(close(jet.theta[order].coeffs()[0], d[2]), "theta order {order}");
            if let Some(p) = jet.p.get(order) {
                assert!(close(p.coeffs()[0], d[3]), "p order {order}");
            }
        }
    }
}

#[test]
fn jets_satisfy_the_reduced_equations() {
    let b = make_basis(2, &[1.0, 1.2], &[6, 5], 2.0).unwrap();
    let params = ModelParams { sigma: 0.3, ..ModelParams::default() };
    let nl = Nonlinearity::quadratic(1.0, 0.2, 0.5).unwrap();
    let s = random_state(&b, 3, 0.2);
    let jet = runtime_jet(&s, &params, &nl).unwrap();
    let lam = b.eigenvalues();
    let af = ktplate_core::model::apply_af(&s.z, &nl).unwrap();
    for k in 0..b.len() {
        let l = lam[k];
        let lhs = (1.0 / l + params.gamma) * jet.z[2].coeffs()[k] + params.kappa0 * l * s.z.coeffs()[k]
            - params.alpha * l * s.theta.coeffs()[k];
        assert!((lhs - af.coeffs()[k]).abs() <= 1e-10 * af.coeffs()[k].abs().max(lhs.abs()).max(1e-12));
        let heat = params.beta * jet.theta[1].coeffs()[k]
            + s.p.coeffs()[k]
            + params.sigma * s.theta.coeffs()[k]
            + params.alpha * s.v.coeffs()[k];
        assert!(heat.abs() <= 1e-12);
        let flux = params.tau * jet.p[1].coeffs()[k] + s.p.coeffs()[k] - params.eta * l * s.theta.coeffs()[k];
        assert!(flux.abs() <= 1e-12 * l);
    }
}

#[test]
fn initial_and_runtime_jets_agree() {
    let b = make_basis(1, &[1.0], &[12], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 2.0).unwrap();
    let s = random_state(&b, 5, 0.5);
    let a = initial_jet(&s.z, &s.v, &s.theta, &s.p, &params, &nl).unwrap();
    let r = runtime_jet(&s, &params, &nl).unwrap();
    assert_eq!(a, r);
}

#[test]
fn trajectory_differences_converge_to_z_tt() {
    let b = make_basis(1, &[1.0], &[12], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let opts = SimOptions::default();
    let s = random_state(&b, 21, 0.4);
    let jet = runtime_jet(&s, &params, &nl).unwrap();
    let mut errs = vec![];
    for h in [4e-3, 2e-3, 1e-3] {
        let fwd = step_nonlinear(&s, h, &params, &nl, &opts).unwrap().state;
        let bwd = step_nonlinear(&s, -h, &params, &nl, &opts).unwrap().state;
        let fd = bwd.v.lincomb(-0.5 / h, &fwd.v, 0.5 / h).unwrap();
        errs.push(fd.lincomb(1.0, &jet.z[2], -1.0).unwrap().l2_norm());
    }
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((r - 4.0).abs() <= 0.4, "{errs:?}");
    }
}

#[test]
fn picard_divergence_is_reported() {
    let b = make_basis(1, &[1.0], &[16], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let s = random_state(&b, 2, 1.5);
    let opts = SimOptions { picard_max_iter: 2, ..Default::default() };
    let err = step_nonlinear(&s, 0.05, &params, &nl, &opts).unwrap_err();
    assert!(matches!(err, Error::PicardDivergence { .. }));
    let opts = SimOptions { dt: 0.05, t_end: 0.5, picard_max_iter: 2, ..Default::default() };
    let (states, halt) = run(&s, &params, &nl, &opts);
    assert_eq!(halt, HaltReason::PicardDivergence);
    assert!(states.iter().all(|s| s.is_finite()));
}

#[test]
fn blow_up_threshold_halts() {
    let b = make_basis(1, &[1.0], &[8], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::linear(1.0).unwrap();
    let s = random_state(&b, 4, 1.0);
    let h3 = ktplate_core::spectral::sobolev_norm(&s.z, 3).unwrap();
    let opts = SimOptions { blowup_threshold: 0.5 * h3, t_end: 0.1, ..Default::default() };
    let (_, halt) = run(&s, &params, &nl, &opts);
    assert_eq!(halt, HaltReason::BlowUp);
}

#[test]
fn split_scheme_converges_to_midpoint() {
    let b = make_basis(1, &[1.0], &[8], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let s = random_state(&b, 9, 0.3);
    let reference = {
        let opts = SimOptions { dt: 1e-4, t_end: 0.5, ..Default::default() };
        simulate(&s, &params, &nl, &opts, &mut |_| {}).unwrap().final_state
    };
    let mut errs = vec![];
    for dt in [1e-2, 5e-3] {
        let opts = SimOptions { dt, t_end: 0.5, scheme: Scheme::SplitExplicit, ..Default::default() };
        let out = simulate(&s, &params, &nl, &opts, &mut |_| {}).unwrap();
        errs.push(out.final_state.distance(&reference).unwrap());
    }
    let r = errs[0] / errs[1];
    assert!(r > 3.0 && r < 5.0, "{errs:?}");
}

#[test]
fn simulate_is_deterministic() {
    let b = make_basis(2, &[1.0, 1.0], &[6, 6], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let s = random_state(&b, 13, 0.3);
    let opts = SimOptions { dt: 5e-3, t_end: 0.2, ..Default::default() };
    let (a, _) = run(&s, &params, &nl, &opts);
    let (c, _) = run(&s, &params, &nl, &opts);
    assert_eq!(a, c);
}

#[test]
fn degenerate_start_halts_before_stepping() {
    let b = make_basis(1, &[1.0], &[8], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_softening(1.0, 1.0).unwrap();
    let mut s = PlateState::zeros(&b, 0.0);
    s.z = SpectralField::mode(&b, 0, 2.0);
    let (states, halt) = run(&s, &params, &nl, &SimOptions::default());
    assert_eq!(halt, HaltReason::Degeneracy);
    assert_eq!(states.len(), 1);
    assert!(states[0].is_finite());
}

#[test]
fn single_mode_decay_matches_abscissa() {
    let b = make_basis(1, &[1.0], &[1], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::linear(1.0).unwrap();
    let mut s = PlateState::zeros(&b, 0.0);
    s.z = SpectralField::mode(&b, 0, 1.0 / PI);
    let opts = SimOptions { dt: 1e-2, t_end: 40.0, scheme: Scheme::LinearMidpoint, ..Default::default() };
    let mut t = vec![];
    let mut e = vec![];
    simulate(&s, &params, &nl, &opts, &mut |r| {
        t.push(r.energy.t);
        e.push(r.energy.e1);
    })
    .unwrap();
    let fit = decay_fit(&t, &e, None).unwrap();
    let abscissa = mode_spectrum(PI * PI, &params).unwrap().abscissa;
    assert!((fit.kappa_hat / (-2.0 * abscissa) - 1.0).abs() <= 0.05, "{} vs {}", fit.kappa_hat, -2.0 * abscissa);
}

#[test]
fn midpoint_converges_on_every_mode() {
    let b = make_basis(1, &[1.0], &[6], 2.0).unwrap();
    let params = ModelParams { sigma: 0.1, ..ModelParams::default() };
    let s = random_state(&b, 17, 1.0);
    let mut errs = vec![];
    for dt in [2e-3, 1e-3] {
        let stepper = MidpointStepper::new(&b, dt, &params).unwrap();
        let mut u = s.clone();
        for _ in 0..(0.5 / dt).round() as usize {
            u = stepper.advance(&u, None).unwrap();
        }
        let mut e = vec![];
        for k in 0..b.len() {
            let m = ModeMatrix::cattaneo(b.eigenvalues()[k], &params).unwrap();
            let u0 = [s.z.coeffs()[k], s.v.coeffs()[k], s.theta.coeffs()[k], s.p.coeffs()[k]];
            let ex = propagate_exact(&u0, &m, 0.5).unwrap();
            let got = [u.z.coeffs()[k], u.v.coeffs()[k], u.theta.coeffs()[k], u.p.coeffs()[k]];
            e.push(ex.iter().zip(got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        errs.push(e);
    }
    for k in 0..b.len() {
        let r = errs[0][k] / errs[1][k];
        assert!((r - 4.0).abs() <= 0.4, "mode {k}: ratio {r}");
    }
}

fn snapshot(s: &PlateState, q0: &FluxField) -> OriginalSnapshot {
    let (w, q) = reconstruct_w_q(s, q0).unwrap();
    OriginalSnapshot::new(s.t, w, s.theta.clone(), q)
}

#[test]
fn reconstruction_residuals_are_second_order() {
    let b = make_basis(2, &[1.0, 1.3], &[6, 6], 2.0).unwrap();
    let params = ModelParams { sigma: 0.2, ..ModelParams::default() };
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let phi = random_field(&b, &mut rng, 0.3, 3);
    let q0 = FluxField::gradient_of(&phi);
    let w0 = random_field(&b, &mut rng, 0.02, 3);
    let w1 = random_field(&b, &mut rng, 0.02, 3);
    let th0 = random_field(&b, &mut rng, 0.3, 3);
    let s0 = PlateState::from_original(0.0, &w0, &w1, &th0, &q0).unwrap();
    let mut prev = [f64::INFINITY; 3];
    for (i, dt) in [2e-3, 1e-3, 5e-4].into_iter().enumerate() {
        let opts = SimOptions { dt, t_end: 0.1, ..Default::default() };
        let (states, halt) = run(&s0, &params, &nl, &opts);
        assert_eq!(halt, HaltReason::Completed);
        let mid = states.len() / 2;
        for s in &states[mid - 1..=mid + 1] {
            let (_, q) = reconstruct_w_q(s, &q0).unwrap();
            let gap = q.divergence().lincomb(1.0, &s.p, -1.0).unwrap().l2_norm();
            assert!(gap <= 1e-12 * s.p.l2_norm());
        }
        let jet = OriginalJet::central(
            &snapshot(&states[mid - 1], &q0),
            &snapshot(&states[mid], &q0),
            &snapshot(&states[mid + 1], &q0),
        )
        .unwrap();
        let r = residual_original(&jet, &params, &nl).unwrap();
        let cur = [r.plate, r.heat, r.flux];
        if i > 0 {
            for j in 0..3 {
                let ratio = prev[j] / cur[j];
                assert!(cur[j] <= 1e-12 || (ratio - 4.0).abs() <= 0.6, "eq {j}: {prev:?} -> {cur:?}");
            }
        }
        prev = cur;
    }
}

#[test]
fn relaxed_reconstruction_handles_rotational_flux() {
    let b = make_basis(2, &[1.0, 1.0], &[4, 4], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::linear(1.0).unwrap();
    // a purely rotational q0 has zero divergence, so p0 = 0 and nothing moves in the z-frame
    let n = b.len();
    let comps = vec![(0..5 * 4).map(|i| if i == 5 { 1.0 } else { 0.0 }).collect::<Vec<f64>>(), vec![0.0; 4 * 5]];
    let raw = FluxField::from_components(&b, comps).unwrap();
    let q0 = raw.solenoidal_part();
    assert!(q0.l2_norm() > 0.1 && q0.divergence().l2_norm() < 1e-12);
    let s0 = PlateState::zeros(&b, 0.0);
    let dt = 1e-3;
    let opts = SimOptions { dt, t_end: 0.2, ..Default::default() };
    let (states, _) = run(&s0, &params, &nl, &opts);
    assert_eq!(states[0].z.coeffs().len(), n);
    let mid = states.len() / 2;
    let window = &states[mid - 1..=mid + 1];
    let frozen: Vec<_> = window.iter().map(|s| snapshot(s, &q0)).collect();
    let relaxed: Vec<_> = window
        .iter()
        .map(|s| {
            let (w, q) = reconstruct_w_q_relaxed(s, &q0, 0.0, params.tau).unwrap();
            OriginalSnapshot::new(s.t, w, s.theta.clone(), q)
        })
        .collect();
    let rf = residual_original(&OriginalJet::central(&frozen[0], &frozen[1], &frozen[2]).unwrap(), &params, &nl).unwrap();
    let rr = residual_original(&OriginalJet::central(&relaxed[0], &relaxed[1], &relaxed[2]).unwrap(), &params, &nl).unwrap();
    assert!(rf.flux > 0.1 * q0.l2_norm());
    assert!(rr.flux <= 1e-6 * q0.l2_norm(), "{}", rr.flux);
    assert_eq!(level_one_energy(&states[mid], &params), 0.0);
}
