//! Invariant suite behind `ktplate check`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use ktplate_core::diagnostics::{decay_fit, energy_levels};
use ktplate_core::dynamics::{
    reconstruct_w_q, residual_original, runtime_jet, simulate, step_nonlinear, HaltReason, MidpointStepper, OriginalJet,
    OriginalSnapshot, PlateState, Scheme, SimOptions,
};
use ktplate_core::model::{
    apply_af, apply_af_direct, apply_ag, apply_ag_direct, apply_ah, apply_ah_direct, ellipticity_min, ModelParams,
    Nonlinearity,
};
use ktplate_core::oracle::{mode_spectrum, propagate_exact, stability_sweep, ModeMatrix, Stability};
use ktplate_core::spectral::{apply_a_power, apply_b, make_basis, to_modal, to_nodal, Basis, FluxField, NodalField, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate corruption used to demonstrate that the suite catches bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the chain-rule `A F(z)`.
    AfSign,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "af-sign" => Some(Fault::AfSign),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = (bool, String);

fn random_field(b: &Arc<Basis>, rng: &mut ChaCha8Rng, scale: f64, decay: i32) -> SpectralField {
    let c = (0..b.len())
        .map(|k| scale * rng.gen_range(-1.0..1.0) / ((k + 1) as f64).powi(decay))
        .collect();
    SpectralField::from_coeffs(b, c).unwrap()
}

fn random_state(b: &Arc<Basis>, seed: u64, scale: f64) -> PlateState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f: Vec<_> = (0..4).map(|_| random_field(b, &mut rng, scale, 3)).collect();
    PlateState::new(0.0, f[0].clone(), f[1].clone(), f[2].clone(), f[3].clone()).unwrap()
}

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    a.lincomb(1.0, b, -1.0).unwrap().l2_norm() / a.l2_norm().max(b.l2_norm()).max(f64::MIN_POSITIVE)
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for n in [1, 17, 64, 256] {
        let b = make_basis(1, &[1.0], &[n], 2.0).unwrap();
        let u = random_field(&b, &mut rng, 1.0, 0);
        let e = to_modal(&to_nodal(&u)).lincomb(1.0, &u, -1.0).unwrap().max_abs() / u.max_abs();
        worst = worst.max(e);
    }
    (worst <= 1e-12, format!("max relative error {worst:.2e}"))
}

fn parseval() -> Outcome {
    let b = make_basis(2, &[1.0, 0.6], &[12, 9], 1.0).unwrap();
    let u = random_field(&b, &mut ChaCha8Rng::seed_from_u64(2), 1.0, 0);
    let quad: f64 = to_nodal(&u).values().iter().map(|x| x * x).sum::<f64>() * b.cell_volume();
    let norm = u.l2_norm().powi(2);
    let e = (quad - norm).abs() / norm;
    (e <= 1e-10, format!("relative gap {e:.2e}"))
}

fn diagonal_calculus() -> Outcome {
    let b = make_basis(1, &[1.0], &[64], 2.0).unwrap();
    let u = random_field(&b, &mut ChaCha8Rng::seed_from_u64(3), 1.0, 0);
    let e = rel(&apply_a_power(&apply_a_power(&u, 1.5), -0.5), &apply_a_power(&u, 1.0));
    let b_ok = {
        let ones = SpectralField::from_coeffs(&b, vec![1.0; 64]).unwrap();
        apply_b(&ones, 2.0, 0.5).unwrap().coeffs().iter().all(|&c| c > 0.0 && c <= 2.0 / 0.25)
    };
    (e <= 1e-13 && b_ok, format!("power composition error {e:.2e}, B multiplier in range: {b_ok}"))
}

fn two_route(fault: Option<Fault>) -> Outcome {
    let b = make_basis(1, &[1.0], &[128], 2.0).unwrap();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let z = random_field(&b, &mut rng, 0.5, 2);
    let mut chain = apply_af(&z, &nl).unwrap();
    if fault == Some(Fault::AfSign) {
        chain = chain.scaled(-1.0);
    }
    let e = rel(&chain, &apply_af_direct(&z, &nl).unwrap());
    (e <= 1e-9, format!("relative gap {e:.2e}"))
}

fn two_route_higher() -> Outcome {
    let b = make_basis(1, &[1.0], &[128], 2.0).unwrap();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (z, zt, ztt) = (random_field(&b, &mut rng, 0.5, 2), random_field(&b, &mut rng, 0.5, 2), random_field(&b, &mut rng, 0.5, 2));
    let g = rel(&apply_ag(&z, &zt, &nl).unwrap(), &apply_ag_direct(&z, &zt, &nl).unwrap());
    let h = rel(&apply_ah(&z, &zt, &ztt, &nl).unwrap(), &apply_ah_direct(&z, &zt, &ztt, &nl).unwrap());
    (g <= 1e-9 && h <= 1e-9, format!("AG gap {g:.2e}, AH gap {h:.2e}"))
}

fn growth_and_ellipticity() -> Outcome {
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let growth = (-100..=100).map(|i| i as f64 * 0.05).all(|z| nl.remainder_jet(z)[1].abs() <= 3.0 * z * z * (1.0 + 1e-12));
    let soft = Nonlinearity::cubic_softening(1.0, 1.0).unwrap();
    let b = make_basis(1, &[1.0], &[8], 2.0).unwrap();
    let z = random_field(&b, &mut ChaCha8Rng::seed_from_u64(6), 1.0, 2);
    let e: Vec<f64> = (0..20).map(|i| ellipticity_min(&z.scaled(0.1 * i as f64), &soft)).collect();
    let mono = e.windows(2).all(|w| w[1] <= w[0]);
    (growth && mono, format!("growth bound: {growth}, ellipticity monotone: {mono}"))
}

fn mode_matrix_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_trace = 0.0f64;
    let mut worst_abscissa = f64::NEG_INFINITY;
    for _ in 0..200 {
        let params = ModelParams {
            alpha: rng.gen_range(0.1..3.0),
            beta: rng.gen_range(0.1..3.0),
            gamma: rng.gen_range(0.01..3.0),
            eta: rng.gen_range(0.1..3.0),
            tau: rng.gen_range(0.01..3.0),
            sigma: rng.gen_range(0.0..2.0),
            kappa0: 1.0,
        };
        let lambda = 10f64.powf(rng.gen_range(-2.0..5.0));
        let s = mode_spectrum(lambda, &params).unwrap();
        let tr: f64 = s.eigenvalues.iter().map(|e| e.re).sum();
        let expected = -params.sigma / params.beta - 1.0 / params.tau;
        worst_trace = worst_trace.max((tr - expected).abs() / expected.abs());
        worst_abscissa = worst_abscissa.max(s.abscissa);
    }
    let _ = ModeMatrix::new(1.0, &ModelParams::default()).unwrap();
    (
        worst_trace <= 1e-9 && worst_abscissa < 0.0,
        format!("trace error {worst_trace:.2e}, largest abscissa {worst_abscissa:.3e}"),
    )
}

fn dichotomy() -> Outcome {
    let cells = stability_sweep(&ModelParams::default(), &[0.0, 1.0], &[0.0, 1.0], 512, 1.0).unwrap();
    let mut ok = true;
    let mut parts = vec![];
    for c in &cells {
        let want = if c.gamma == 0.0 && c.tau > 0.0 { Stability::DampingVanishes } else { Stability::UniformlyDamped };
        ok &= c.classification == want;
        parts.push(format!("({},{}) {}", c.gamma, c.tau, c.classification.as_str()));
    }
    (ok, parts.join("; "))
}

fn linear_identity() -> Outcome {
    let b = make_basis(1, &[1.0], &[16], 2.0).unwrap();
    let nl = Nonlinearity::linear(1.0).unwrap();
    let s = random_state(&b, 8, 1.0);
    let opts = SimOptions { dt: 1e-3, t_end: 1.0, scheme: Scheme::LinearMidpoint, ..Default::default() };
    let out = simulate(&s, &ModelParams::default(), &nl, &opts, &mut |_| {}).unwrap();
    let r = out.balance.residual();
    (r <= 1e-10, format!("cumulative residual {r:.2e}"))
}

fn oracle_order() -> Outcome {
    let b = make_basis(1, &[1.0], &[1], 2.0).unwrap();
    let params = ModelParams::default();
    let m = ModeMatrix::cattaneo(PI * PI, &params).unwrap();
    let u0 = [1.0 / PI, 0.0, 0.0, 0.0];
    let exact = propagate_exact(&u0, &m, 1.0).unwrap();
    let errs: Vec<f64> = [1e-3, 5e-4]
        .iter()
        .map(|&dt| {
            let mut s = PlateState::zeros(&b, 0.0);
            s.z = SpectralField::mode(&b, 0, u0[0]);
            let st = MidpointStepper::new(&b, dt, &params).unwrap();
            for _ in 0..(1.0 / dt).round() as usize {
                s = st.advance(&s, None).unwrap();
            }
            let got = [s.z.coeffs()[0], s.v.coeffs()[0], s.theta.coeffs()[0], s.p.coeffs()[0]];
            got.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    let r = errs[0] / errs[1];
    ((r - 4.0).abs() <= 0.4, format!("errors {:.2e}, {:.2e}, ratio {r:.3}", errs[0], errs[1]))
}

fn jet_equations() -> Outcome {
    let b = make_basis(1, &[1.0], &[16], 2.0).unwrap();
    let params = ModelParams { sigma: 0.2, ..ModelParams::default() };
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let s = random_state(&b, 9, 0.3);
    let jet = runtime_jet(&s, &params, &nl).unwrap();
    let af = apply_af(&s.z, &nl).unwrap();
    let lam = b.eigenvalues();
    let mut worst = 0.0f64;
    for k in 0..b.len() {
        let l = lam[k];
        let lhs = (1.0 / l + params.gamma) * jet.z[2].coeffs()[k] + l * s.z.coeffs()[k] - params.alpha * l * s.theta.coeffs()[k];
        worst = worst.max((lhs - af.coeffs()[k]).abs() / lhs.abs().max(af.coeffs()[k].abs()).max(1e-12));
    }
    let report = energy_levels(0.0, &jet, &params);
    let ordered = report.x >= report.e && report.e >= 0.0;
    (worst <= 1e-10 && ordered, format!("plate-equation residual {worst:.2e}, X >= E >= 0: {ordered}"))
}

fn reconstruction() -> Outcome {
    let b = make_basis(2, &[1.0, 1.3], &[6, 5], 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let q0 = FluxField::gradient_of(&random_field(&b, &mut rng, 1.0, 2));
    let mut s = random_state(&b, 11, 1.0);
    s.p = random_field(&b, &mut rng, 1.0, 1);
    let (w, q) = reconstruct_w_q(&s, &q0).unwrap();
    let gap = q.divergence().lincomb(1.0, &s.p, -1.0).unwrap().l2_norm() / s.p.l2_norm();
    let back = rel(&apply_a_power(&w, 1.0), &s.z);
    (gap <= 1e-12 && back <= 1e-14, format!("div q - p: {gap:.2e}, A w - z: {back:.2e}"))
}

fn fit_equivariance() -> Outcome {
    let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
    let x: Vec<f64> = t.iter().map(|t| 2.0 * (-0.3 * t).exp() * (1.0 + 0.1 * t.sin())).collect();
    let a = decay_fit(&t, &x, None).unwrap();
    let b = decay_fit(&t, &x.iter().map(|v| 7.0 * v).collect::<Vec<_>>(), None).unwrap();
    let dk = (a.kappa_hat - b.kappa_hat).abs();
    let dc = (b.c_hat / (7.0 * a.c_hat) - 1.0).abs();
    (dk <= 1e-12 && dc <= 1e-10, format!("kappa shift {dk:.2e}, C ratio error {dc:.2e}"))
}

fn jet_fd_order() -> Outcome {
    let b = make_basis(1, &[1.0], &[12], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let s = random_state(&b, 12, 0.3);
    let jet = runtime_jet(&s, &params, &nl).unwrap();
    let opts = SimOptions::default();
    let errs: Vec<f64> = [4e-3, 2e-3]
        .iter()
        .map(|&h| {
            let f = step_nonlinear(&s, h, &params, &nl, &opts).unwrap().state;
            let g = step_nonlinear(&s, -h, &params, &nl, &opts).unwrap().state;
            g.v.lincomb(-0.5 / h, &f.v, 0.5 / h).unwrap().lincomb(1.0, &jet.z[2], -1.0).unwrap().l2_norm()
        })
        .collect();
    let r = errs[0] / errs[1];
    ((r - 4.0).abs() <= 0.4, format!("z_tt differences ratio {r:.3}"))
}

fn residual_order() -> Outcome {
    let b = make_basis(1, &[1.0], &[8], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let q0 = FluxField::gradient_of(&random_field(&b, &mut rng, 0.3, 3));
    let mut s0 = random_state(&b, 14, 0.2);
    s0.p = q0.divergence();
    let mut res = vec![];
    for dt in [2e-3, 1e-3] {
        let mut states = vec![];
        let opts = SimOptions { dt, t_end: 0.1, ..Default::default() };
        simulate(&s0, &params, &nl, &opts, &mut |r| states.push(r.state)).unwrap();
        let m = states.len() / 2;
        let snap = |s: &PlateState| {
            let (w, q) = reconstruct_w_q(s, &q0).unwrap();
            OriginalSnapshot::new(s.t, w, s.theta.clone(), q)
        };
        let jet = OriginalJet::central(&snap(&states[m - 1]), &snap(&states[m]), &snap(&states[m + 1])).unwrap();
        let r = residual_original(&jet, &params, &nl).unwrap();
        res.push(r.plate.max(r.heat).max(r.flux));
    }
    let r = res[0] / res[1];
    ((r - 4.0).abs() <= 0.6, format!("residuals {:.2e}, {:.2e}, ratio {r:.3}", res[0], res[1]))
}

fn af_refinement() -> Outcome {
    let zf = |x: &[f64]| (PI * x[0]).sin() / (1.2 - (PI * x[0]).cos());
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let fine = make_basis(1, &[1.0], &[512], 2.0).unwrap();
    let reference = apply_af(&to_modal(&NodalField::from_fn(&fine, zf).unwrap()), &nl).unwrap();
    let errs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let b = make_basis(1, &[1.0], &[n], 2.0).unwrap();
            let af = apply_af(&to_modal(&NodalField::from_fn(&b, zf).unwrap()), &nl).unwrap();
            let truth = SpectralField::from_coeffs(&b, reference.coeffs()[..n].to_vec()).unwrap();
            rel(&truth, &af)
        })
        .collect();
    let mono = errs.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
    (mono, format!("errors {}", shown.join(", ")))
}

fn small_data_decay() -> Outcome {
    let b = make_basis(1, &[1.0], &[16], 2.0).unwrap();
    let params = ModelParams::default();
    let nl = Nonlinearity::cubic_stiffening(1.0, 1.0).unwrap();
    let mut s = PlateState::zeros(&b, 0.0);
    s.z = SpectralField::mode(&b, 0, (2e-4f64).sqrt() / PI);
    let opts = SimOptions { dt: 2e-3, t_end: 20.0, record_stride: 10, ..Default::default() };
    let (mut t, mut x) = (vec![], vec![]);
    let out = simulate(&s, &params, &nl, &opts, &mut |r| {
        t.push(r.energy.t);
        x.push(r.energy.x);
    })
    .unwrap();
    let fit = decay_fit(&t, &x, None).unwrap();
    let ok = out.halt == HaltReason::Completed && fit.kappa_hat > 0.0 && x[x.len() - 1] < x[0];
    (ok, format!("{}; kappa_hat {:.4}", out.halt.as_str(), fit.kappa_hat))
}

pub fn run_checks(level: Level, fault: Option<Fault>) -> Vec<CheckResult> {
    let mut list: Vec<(&'static str, Box<dyn Fn() -> Outcome>)> = vec![
        ("spectral: transform round trip", Box::new(round_trip)),
        ("spectral: Parseval", Box::new(parseval)),
        ("spectral: diagonal calculus and B bound", Box::new(diagonal_calculus)),
        ("model: two-route AF", Box::new(move || two_route(fault))),
        ("model: two-route AG and AH", Box::new(two_route_higher)),
        ("model: growth bound and ellipticity scaling", Box::new(growth_and_ellipticity)),
        ("oracle: trace and dissipativity", Box::new(mode_matrix_checks)),
        ("oracle: stability dichotomy", Box::new(dichotomy)),
        ("dynamics: linear energy identity", Box::new(linear_identity)),
        ("dynamics: order against exponential", Box::new(oracle_order)),
        ("dynamics: jets solve the equations", Box::new(jet_equations)),
        ("dynamics: reconstruction", Box::new(reconstruction)),
        ("diagnostics: decay fit equivariance", Box::new(fit_equivariance)),
    ];
    if level == Level::Full {
        list.push(("dynamics: jet finite differences", Box::new(jet_fd_order)));
        list.push(("dynamics: original-variable residual order", Box::new(residual_order)));
        list.push(("model: AF refinement", Box::new(af_refinement)));
        list.push(("diagnostics: small-data decay", Box::new(small_data_decay)));
    }
    list.into_iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (pass, detail) = f();
            CheckResult {
                name,
                pass,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}
