//! Time integration of the reduced plate system
//!
//! ```text
//! (A⁻¹ + γ) z_tt + κ₀ A z − α A θ = A F(z)
//! β θ_t + p + σ θ + α z_t = 0
//! τ p_t + p − η A θ = 0
//! ```
//!
//! Each sine mode evolves under a 4×4 matrix plus the projected forcing
//! `A F(z)`. The implicit midpoint rule is applied mode by mode, and the
//! quasilinear forcing is resolved by Picard iteration on the midpoint
//! value `z̄ = (zⁿ + zⁿ⁺¹)/2`. Because the forcing enters the balance
//! through `⟨A F(z̄), v̄⟩`, the level-one energy identity holds exactly up
//! to the Picard tolerance.

use nalgebra::Matrix4;
use std::sync::Arc;

use crate::diagnostics::{energy_levels, level_one_energy, EnergyBalance, EnergyReport};
use crate::error::{Error, Result};
use crate::model::{apply_af, apply_ag, apply_an_direct, ellipticity_min, ModelParams, Nonlinearity};
use crate::oracle::ModeMatrix;
use crate::spectral::{apply_a_power, sobolev_norm, to_modal, to_nodal, Basis, FluxField, NodalField, SpectralField};

pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlateState {
    pub t: f64,
    pub z: SpectralField,
    /// `z_t`
    pub v: SpectralField,
    pub theta: SpectralField,
    pub p: SpectralField,
}

impl PlateState {
    pub fn zeros(basis: &Arc<Basis>, t: f64) -> Self {
        let zero = SpectralField::zeros(basis);
        Self {
            t,
            z: zero.clone(),
            v: zero.clone(),
            theta: zero.clone(),
            p: zero,
        }
    }

    pub fn new(t: f64, z: SpectralField, v: SpectralField, theta: SpectralField, p: SpectralField) -> Result<Self> {
        let s = Self { t, z, v, theta, p };
        s.validate()?;
        Ok(s)
    }

    /// Reduce original-variable data: `z = A w`, `v = A w_t`, `p = div q`.
    pub fn from_original(t: f64, w0: &SpectralField, w1: &SpectralField, theta0: &SpectralField, q0: &FluxField) -> Result<Self> {
        if !Arc::ptr_eq(w0.basis(), q0.basis()) && **w0.basis() != **q0.basis() {
            return Err(Error::BasisMismatch);
        }
        Self::new(t, apply_a_power(w0, 1.0), apply_a_power(w1, 1.0), theta0.clone(), q0.divergence())
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.z.basis()
    }

    pub fn validate(&self) -> Result<()> {
        for f in [&self.v, &self.theta, &self.p] {
            self.z.same_basis(f)?;
        }
        if !self.t.is_finite() {
            return Err(Error::NonFinite("state time"));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("state coefficients"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.v.is_finite() && self.theta.is_finite() && self.p.is_finite()
    }

    fn fields(&self) -> [&SpectralField; 4] {
        [&self.z, &self.v, &self.theta, &self.p]
    }

    /// Largest L² norm over the four fields.
    pub fn max_field_norm(&self) -> f64 {
        self.fields().iter().map(|f| f.l2_norm()).fold(0.0, f64::max)
    }

    /// Largest L² distance over the four fields.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        let mut d = 0.0f64;
        for (a, b) in self.fields().iter().zip(other.fields()) {
            d = d.max(a.lincomb(1.0, b, -1.0)?.l2_norm());
        }
        Ok(d)
    }
}

/// Project nodal data onto the sine span and report the norm of what was
/// discarded (grid L² norm).
pub fn project_with_complement(f: &NodalField) -> (SpectralField, f64) {
    let u = to_modal(f);
    let back = to_nodal(&u);
    let h = f.basis().cell_volume();
    let r2: f64 = f.values().iter().zip(back.values()).map(|(a, b)| (a - b) * (a - b)).sum();
    (u, (h * r2).sqrt())
}

/// Time derivatives of a solution at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    /// `z, z_t, z_tt, z_ttt`
    pub z: [SpectralField; 4],
    /// `θ, θ_t, θ_tt, θ_ttt`
    pub theta: [SpectralField; 4],
    /// `p, p_t, p_tt`
    pub p: [SpectralField; 3],
}

impl Jet {
    pub fn is_finite(&self) -> bool {
        self.z.iter().chain(&self.theta).chain(&self.p).all(|f| f.is_finite())
    }
}

fn jet_params_ok(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.tau <= 0.0 {
        return Err(Error::InvalidParameter("jets need tau > 0".into()));
    }
    Ok(())
}

fn z_accel(z: &SpectralField, theta: &SpectralField, af: &SpectralField, params: &ModelParams) -> SpectralField {
    let lam = z.basis().eigenvalues();
    let c: Vec<f64> = (0..lam.len())
        .map(|k| {
            let l = lam[k];
            l / (1.0 + params.gamma * l) * (af.coeffs()[k] - params.kappa0 * l * z.coeffs()[k] + params.alpha * l * theta.coeffs()[k])
        })
        .collect();
    SpectralField::from_coeffs(z.basis(), c).expect("finite inputs")
}

fn theta_rate(theta: &SpectralField, p: &SpectralField, v: &SpectralField, params: &ModelParams) -> SpectralField {
    let c: Vec<f64> = (0..theta.coeffs().len())
        .map(|k| -(p.coeffs()[k] + params.sigma * theta.coeffs()[k] + params.alpha * v.coeffs()[k]) / params.beta)
        .collect();
    SpectralField::from_coeffs(theta.basis(), c).expect("finite inputs")
}

fn p_rate(theta: &SpectralField, p: &SpectralField, params: &ModelParams) -> SpectralField {
    let lam = theta.basis().eigenvalues();
    let c: Vec<f64> = (0..lam.len())
        .map(|k| (params.eta * lam[k] * theta.coeffs()[k] - p.coeffs()[k]) / params.tau)
        .collect();
    SpectralField::from_coeffs(theta.basis(), c).expect("finite inputs")
}

/// Jet at the current state by solving the three equations for the time
/// derivatives. `z_ttt` differentiates the plate equation once more using
/// `A G(z, z_t)`.
pub fn runtime_jet(state: &PlateState, params: &ModelParams, nl: &Nonlinearity) -> Result<Jet> {
    jet_params_ok(params)?;
    state.validate()?;
    let PlateState { z, v, theta, p, .. } = state;
    let af = apply_af(z, nl)?;
    let ztt = z_accel(z, theta, &af, params);
    let tht = theta_rate(theta, p, v, params);
    let pt = p_rate(theta, p, params);
    let ag = apply_ag(z, v, nl)?;
    let zttt = z_accel(v, &tht, &ag, params);
    let thtt = theta_rate(&tht, &pt, &ztt, params);
    let ptt = p_rate(&tht, &pt, params);
    let thttt = theta_rate(&thtt, &ptt, &zttt, params);
    let jet = Jet {
        z: [z.clone(), v.clone(), ztt, zttt],
        theta: [theta.clone(), tht, thtt, thttt],
        p: [p.clone(), pt, ptt],
    };
    if !jet.is_finite() {
        return Err(Error::NonFinite("jet"));
    }
    Ok(jet)
}

/// Compatibility jet of the initial data. Fails if `min N'(z₀)` is not
/// above [`DEFAULT_DEGENERACY_EPS`].
pub fn initial_jet(
    z0: &SpectralField,
    z1: &SpectralField,
    theta0: &SpectralField,
    p0: &SpectralField,
    params: &ModelParams,
    nl: &Nonlinearity,
) -> Result<Jet> {
    let state = PlateState::new(0.0, z0.clone(), z1.clone(), theta0.clone(), p0.clone())?;
    let e = ellipticity_min(z0, nl);
    if !(e > DEFAULT_DEGENERACY_EPS) {
        return Err(Error::Degenerate { min: e });
    }
    runtime_jet(&state, params, nl)
}

/// Per-mode midpoint propagator `P = (I − dt/2 M)⁻¹(I + dt/2 M)` and the
/// response `dt (I − dt/2 M)⁻¹ e_v λ/(1+γλ)` to a unit forcing coefficient.
#[derive(Debug, Clone)]
pub struct MidpointStepper {
    dt: f64,
    basis: Arc<Basis>,
    props: Vec<Matrix4<f64>>,
    kicks: Vec<[f64; 4]>,
}

impl MidpointStepper {
    pub fn new(basis: &Arc<Basis>, dt: f64, params: &ModelParams) -> Result<Self> {
        params.validate_for_simulation()?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be finite and nonzero, got {dt}")));
        }
        let mut props = Vec::with_capacity(basis.len());
        let mut kicks = Vec::with_capacity(basis.len());
        for &l in basis.eigenvalues() {
            let mm = ModeMatrix::cattaneo(l, params)?;
            let m = Matrix4::from_fn(|i, j| mm.matrix()[(i, j)]);
            let lhs = Matrix4::identity() - m * (0.5 * dt);
            let rhs = Matrix4::identity() + m * (0.5 * dt);
            let inv = lhs.try_inverse().ok_or(Error::SingularSolve("midpoint mode solve"))?;
            let col = inv.column(1) * (dt * l / (1.0 + params.gamma * l));
            props.push(inv * rhs);
            kicks.push([col[0], col[1], col[2], col[3]]);
        }
        Ok(Self {
            dt,
            basis: basis.clone(),
            props,
            kicks,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step with the given forcing coefficients (`None` for `F ≡ 0`).
    pub fn advance(&self, state: &PlateState, forcing: Option<&SpectralField>) -> Result<PlateState> {
        if **state.basis() != *self.basis {
            return Err(Error::BasisMismatch);
        }
        let n = self.basis.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            let u = nalgebra::Vector4::new(state.z.coeffs()[k], state.v.coeffs()[k], state.theta.coeffs()[k], state.p.coeffs()[k]);
            let mut w = self.props[k] * u;
            if let Some(f) = forcing {
                let g = f.coeffs()[k];
                for i in 0..4 {
                    w[i] += self.kicks[k][i] * g;
                }
            }
            for i in 0..4 {
                out[i][k] = w[i];
            }
        }
        let [z, v, th, p] = out;
        let b = &self.basis;
        let fin = |c: Vec<f64>| SpectralField::from_coeffs(b, c).map_err(|_| Error::NonFinite("midpoint step"));
        Ok(PlateState {
            t: state.t + self.dt,
            z: fin(z)?,
            v: fin(v)?,
            theta: fin(th)?,
            p: fin(p)?,
        })
    }
}

/// One implicit-midpoint step of the linear system (`F ≡ 0`). `dt` may be
/// negative.
pub fn step_linear_midpoint(state: &PlateState, dt: f64, params: &ModelParams) -> Result<PlateState> {
    MidpointStepper::new(state.basis(), dt, params)?.advance(state, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Midpoint on the linearization (`F` dropped).
    LinearMidpoint,
    /// Strang splitting: half linear step, explicit forcing kick, half linear step.
    SplitExplicit,
    /// Midpoint on the full system with Picard iteration for `A F(z̄)`.
    PicardMidpoint,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::LinearMidpoint => "linear-midpoint",
            Scheme::SplitExplicit => "split-explicit",
            Scheme::PicardMidpoint => "picard-midpoint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear-midpoint" => Some(Scheme::LinearMidpoint),
            "split-explicit" => Some(Scheme::SplitExplicit),
            "picard-midpoint" => Some(Scheme::PicardMidpoint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub degeneracy_eps: f64,
    /// Halt once `‖z‖_{H³}` exceeds this.
    pub blowup_threshold: f64,
    pub record_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::PicardMidpoint,
            picard_tol: 1e-12,
            picard_max_iter: 50,
            degeneracy_eps: DEFAULT_DEGENERACY_EPS,
            blowup_threshold: 1e8,
            record_stride: 1,
        }
    }
}

impl SimOptions {
    pub fn validate(&self, t0: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > t0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must exceed the start time {t0}", self.t_end));
        }
        if !(self.picard_tol > 0.0) || self.picard_max_iter == 0 {
            return bad("picard_tol and picard_max_iter must be positive".into());
        }
        if !(self.degeneracy_eps >= 0.0 && self.blowup_threshold > 0.0) {
            return bad("degeneracy_eps must be >= 0 and blowup_threshold > 0".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn steps(&self, t0: f64) -> usize {
        ((self.t_end - t0) / self.dt - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    Completed,
    Degeneracy,
    BlowUp,
    PicardDivergence,
}

impl HaltReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaltReason::Completed => "Completed",
            HaltReason::Degeneracy => "Degeneracy",
            HaltReason::BlowUp => "BlowUp",
            HaltReason::PicardDivergence => "PicardDivergence",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: PlateState,
    pub iterations: usize,
    /// `A F` at the midpoint used by the accepted iterate.
    pub forcing: SpectralField,
}

fn check_midpoint(z: &SpectralField, nl: &Nonlinearity, eps: f64) -> Result<()> {
    let e = ellipticity_min(z, nl);
    if e > eps {
        Ok(())
    } else if e.is_nan() {
        Err(Error::NonFinite("ellipticity"))
    } else {
        Err(Error::Degenerate { min: e })
    }
}

fn picard_step(stepper: &MidpointStepper, state: &PlateState, nl: &Nonlinearity, opts: &SimOptions) -> Result<StepOutcome> {
    let dt = stepper.dt();
    let mut zbar = state.z.lincomb(1.0, &state.v, 0.5 * dt)?;
    let mut prev: Option<(PlateState, SpectralField)> = None;
    let mut last_inc = f64::INFINITY;
    for it in 1..=opts.picard_max_iter {
        check_midpoint(&zbar, nl, opts.degeneracy_eps)?;
        let f = apply_af(&zbar, nl)?;
        if let Some((s, fp)) = &prev {
            // same forcing gives the same solve
            if fp.coeffs() == f.coeffs() {
                return Ok(StepOutcome {
                    state: s.clone(),
                    iterations: it - 1,
                    forcing: f,
                });
            }
        }
        let next = stepper.advance(state, Some(&f))?;
        if let Some((s, _)) = &prev {
            last_inc = s.distance(&next)?;
            if last_inc <= opts.picard_tol * next.max_field_norm().max(1.0) {
                return Ok(StepOutcome {
                    state: next,
                    iterations: it,
                    forcing: f,
                });
            }
        }
        zbar = state.z.lincomb(0.5, &next.z, 0.5)?;
        prev = Some((next, f));
    }
    Err(Error::PicardDivergence {
        iterations: opts.picard_max_iter,
        increment: last_inc,
    })
}

/// One midpoint step of the full system. The forcing `A F(z̄)` is frozen at
/// the previous iterate's midpoint until successive iterates agree to
/// `picard_tol` (relative to `max(1, ‖u‖)`). `dt` may be negative.
pub fn step_nonlinear(state: &PlateState, dt: f64, params: &ModelParams, nl: &Nonlinearity, opts: &SimOptions) -> Result<StepOutcome> {
    check_kappa(params, nl)?;
    check_midpoint(&state.z, nl, opts.degeneracy_eps)?;
    let stepper = MidpointStepper::new(state.basis(), dt, params)?;
    picard_step(&stepper, state, nl, opts)
}

fn check_kappa(params: &ModelParams, nl: &Nonlinearity) -> Result<()> {
    if (params.kappa0 - nl.kappa0()).abs() > 1e-12 * params.kappa0.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "params.kappa0 = {} differs from N'(0) = {}",
            params.kappa0,
            nl.kappa0()
        )));
    }
    Ok(())
}

/// Sampled output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Record {
    pub step: usize,
    pub state: PlateState,
    pub energy: EnergyReport,
    pub ellipticity_min: f64,
    /// Picard iterations of the step that produced this state (0 at start).
    pub picard_iters: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PicardStats {
    pub steps: usize,
    pub total: usize,
    pub max: usize,
}

impl PicardStats {
    pub fn mean(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total as f64 / self.steps as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    /// Last state accepted before halting.
    pub final_state: PlateState,
    pub halt: HaltReason,
    /// Message of the error that triggered a non-`Completed` halt.
    pub halt_detail: Option<String>,
    pub steps: usize,
    pub picard: PicardStats,
    /// Level-one balance accumulated along the run.
    pub balance: EnergyBalance,
}

/// Advance `initial` to `opts.t_end`. Every `record_stride` steps (and at
/// the start and the final accepted state) a [`Record`] is passed to `sink`.
/// A step whose result would be degenerate, non-finite or above the
/// blow-up threshold is discarded and the run halts.
pub fn simulate(
    initial: &PlateState,
    params: &ModelParams,
    nl: &Nonlinearity,
    opts: &SimOptions,
    sink: &mut dyn FnMut(Record),
) -> Result<SimOutcome> {
    initial.validate()?;
    opts.validate(initial.t)?;
    check_kappa(params, nl)?;
    let linear;
    let nl = if opts.scheme == Scheme::LinearMidpoint {
        linear = Nonlinearity::linear(params.kappa0)?;
        &linear
    } else {
        nl
    };
    let basis = initial.basis().clone();
    let dt = opts.dt;
    let n_steps = opts.steps(initial.t);
    let (full, half) = match opts.scheme {
        Scheme::SplitExplicit => (None, Some(MidpointStepper::new(&basis, 0.5 * dt, params)?)),
        _ => (Some(MidpointStepper::new(&basis, dt, params)?), None),
    };

    let make_record = |step: usize, state: &PlateState, iters: usize| -> Result<Record> {
        let jet = runtime_jet(state, params, nl)?;
        let mut energy = energy_levels(state.t, &jet, params);
        let ell = ellipticity_min(&state.z, nl);
        energy.ellipticity_min = Some(ell);
        Ok(Record {
            step,
            state: state.clone(),
            energy,
            ellipticity_min: ell,
            picard_iters: iters,
        })
    };

    let mut state = initial.clone();
    let mut balance = EnergyBalance::new(level_one_energy(&state, params));
    let mut picard = PicardStats::default();
    let mut halt = HaltReason::Completed;
    let mut halt_detail = None;
    let mut last_recorded = 0;
    let mut last_iters = 0;
    sink(make_record(0, &state, 0)?);

    let e0 = ellipticity_min(&state.z, nl);
    if !(e0 > opts.degeneracy_eps) {
        return Ok(SimOutcome {
            final_state: state,
            halt: HaltReason::Degeneracy,
            halt_detail: Some(Error::Degenerate { min: e0 }.to_string()),
            steps: 0,
            picard,
            balance,
        });
    }

    let mut steps = 0;
    for n in 1..=n_steps {
        let t_target = initial.t + n as f64 * dt;
        let result = match opts.scheme {
            Scheme::LinearMidpoint => full.as_ref().unwrap().advance(&state, None).map(|s| StepOutcome {
                state: s,
                iterations: 0,
                forcing: SpectralField::zeros(&basis),
            }),
            Scheme::PicardMidpoint => picard_step(full.as_ref().unwrap(), &state, nl, opts),
            Scheme::SplitExplicit => split_step(half.as_ref().unwrap(), &state, nl, params, dt),
        };
        let fail = |e: &Error| match e {
            Error::Degenerate { .. } => Some(HaltReason::Degeneracy),
            Error::PicardDivergence { .. } => Some(HaltReason::PicardDivergence),
            Error::NonFinite(_) => Some(HaltReason::BlowUp),
            _ => None,
        };
        let mut out = match result {
            Ok(o) => o,
            Err(e) => match fail(&e) {
                Some(h) => {
                    halt = h;
                    halt_detail = Some(e.to_string());
                    break;
                }
                None => return Err(e),
            },
        };
        // keep the time grid free of accumulated rounding
        out.state.t = t_target;
        let e = ellipticity_min(&out.state.z, nl);
        if e.is_nan() || !out.state.is_finite() {
            halt = HaltReason::BlowUp;
            halt_detail = Some("non-finite state".into());
            break;
        }
        if e <= opts.degeneracy_eps {
            halt = HaltReason::Degeneracy;
            halt_detail = Some(Error::Degenerate { min: e }.to_string());
            break;
        }
        let h3 = sobolev_norm(&out.state.z, 3)?;
        if !(h3 <= opts.blowup_threshold) {
            halt = HaltReason::BlowUp;
            halt_detail = Some(format!("H3 norm of z reached {h3:e}"));
            break;
        }
        balance.accumulate(&state, &out.state, &out.forcing, params)?;
        if opts.scheme != Scheme::LinearMidpoint {
            picard.steps += 1;
            picard.total += out.iterations;
            picard.max = picard.max.max(out.iterations);
        }
        state = out.state;
        steps = n;
        last_iters = out.iterations;
        if n % opts.record_stride == 0 || n == n_steps {
            match make_record(n, &state, last_iters) {
                Ok(r) => sink(r),
                Err(Error::NonFinite(_)) => {
                    halt = HaltReason::BlowUp;
                    halt_detail = Some("non-finite jet".into());
                    break;
                }
                Err(e) => return Err(e),
            }
            last_recorded = n;
        }
    }
    if steps != last_recorded {
        if let Ok(r) = make_record(steps, &state, last_iters) {
            sink(r);
        }
    }
    Ok(SimOutcome {
        final_state: state,
        halt,
        halt_detail,
        steps,
        picard,
        balance,
    })
}

fn split_step(half: &MidpointStepper, state: &PlateState, nl: &Nonlinearity, params: &ModelParams, dt: f64) -> Result<StepOutcome> {
    let a = half.advance(state, None)?;
    let f = apply_af(&a.z, nl)?;
    let lam = a.basis().eigenvalues();
    let mut kicked = a.clone();
    for (k, v) in kicked.v.coeffs_mut().iter_mut().enumerate() {
        *v += dt * lam[k] / (1.0 + params.gamma * lam[k]) * f.coeffs()[k];
    }
    let b = half.advance(&kicked, None)?;
    Ok(StepOutcome {
        state: b,
        iterations: 1,
        forcing: f,
    })
}

/// `w = A⁻¹z` and `q = q⁰ + ∇A⁻¹div q⁰ − ∇A⁻¹p`. Exact when the
/// divergence-free part of `q⁰` vanishes; otherwise see
/// [`reconstruct_w_q_relaxed`].
pub fn reconstruct_w_q(state: &PlateState, q0: &FluxField) -> Result<(SpectralField, FluxField)> {
    reconstruct_inner(state, q0, 1.0)
}

/// Like [`reconstruct_w_q`] but lets the divergence-free part of `q⁰` relax
/// as `exp(-(t - t0)/τ)`, which is what the flux equation does to it.
pub fn reconstruct_w_q_relaxed(state: &PlateState, q0: &FluxField, t0: f64, tau: f64) -> Result<(SpectralField, FluxField)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter("relaxed reconstruction needs tau > 0".into()));
    }
    reconstruct_inner(state, q0, (-(state.t - t0) / tau).exp())
}

fn reconstruct_inner(state: &PlateState, q0: &FluxField, factor: f64) -> Result<(SpectralField, FluxField)> {
    if **q0.basis() != **state.basis() {
        return Err(Error::BasisMismatch);
    }
    let w = apply_a_power(&state.z, -1.0);
    let grad = FluxField::gradient_of(&apply_a_power(&state.p, -1.0));
    let q = q0.solenoidal_part().lincomb(factor, &grad, -1.0)?;
    Ok((w, q))
}

/// Original variables at one instant.
#[derive(Debug, Clone)]
pub struct OriginalSnapshot {
    pub t: f64,
    pub w: SpectralField,
    pub theta: SpectralField,
    pub q: FluxField,
}

impl OriginalSnapshot {
    pub fn new(t: f64, w: SpectralField, theta: SpectralField, q: FluxField) -> Self {
        Self { t, w, theta, q }
    }
}

/// Original variables with the time derivatives the equations need.
#[derive(Debug, Clone)]
pub struct OriginalJet {
    pub w: SpectralField,
    pub w_t: SpectralField,
    pub w_tt: SpectralField,
    pub theta: SpectralField,
    pub theta_t: SpectralField,
    pub q: FluxField,
    pub q_t: FluxField,
}

impl OriginalJet {
    /// Second-order central differences from three equally spaced snapshots.
    pub fn central(prev: &OriginalSnapshot, cur: &OriginalSnapshot, next: &OriginalSnapshot) -> Result<Self> {
        let h = next.t - cur.t;
        if !(h > 0.0) || ((cur.t - prev.t) - h).abs() > 1e-9 * h {
            return Err(Error::InvalidParameter("snapshots must be equally spaced and increasing".into()));
        }
        let d1 = |a: &SpectralField, b: &SpectralField| a.lincomb(-0.5 / h, b, 0.5 / h);
        let w_tt = prev.w.lincomb(1.0 / (h * h), &next.w, 1.0 / (h * h))?.lincomb(1.0, &cur.w, -2.0 / (h * h))?;
        Ok(Self {
            w: cur.w.clone(),
            w_t: d1(&prev.w, &next.w)?,
            w_tt,
            theta: cur.theta.clone(),
            theta_t: d1(&prev.theta, &next.theta)?,
            q: cur.q.clone(),
            q_t: prev.q.lincomb(-0.5 / h, &next.q, 0.5 / h)?,
        })
    }

    pub fn zeros(basis: &Arc<Basis>) -> Self {
        let z = SpectralField::zeros(basis);
        let q = FluxField::zeros(basis);
        Self {
            w: z.clone(),
            w_t: z.clone(),
            w_tt: z.clone(),
            theta: z.clone(),
            theta_t: z,
            q: q.clone(),
            q_t: q,
        }
    }
}

/// L² norms of the residuals of the plate, heat and flux equations in the
/// original variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginalResiduals {
    pub plate: f64,
    pub heat: f64,
    pub flux: f64,
}

/// Residuals of
///
/// ```text
/// w_tt + γ A w_tt + A N(A w) − α A θ
/// β θ_t + div q + σ θ + α A w_t
/// τ q_t + q + η ∇θ
/// ```
///
/// with `N(A w)` projected from the grid.
pub fn residual_original(jet: &OriginalJet, params: &ModelParams, nl: &Nonlinearity) -> Result<OriginalResiduals> {
    params.validate()?;
    let an = apply_an_direct(&apply_a_power(&jet.w, 1.0), nl)?;
    let plate = jet
        .w_tt
        .lincomb(1.0, &apply_a_power(&jet.w_tt, 1.0), params.gamma)?
        .lincomb(1.0, &an, 1.0)?
        .lincomb(1.0, &apply_a_power(&jet.theta, 1.0), -params.alpha)?;
    let heat = jet
        .theta_t
        .lincomb(params.beta, &jet.q.divergence(), 1.0)?
        .lincomb(1.0, &jet.theta, params.sigma)?
        .lincomb(1.0, &apply_a_power(&jet.w_t, 1.0), params.alpha)?;
    let flux = jet
        .q_t
        .lincomb(params.tau, &jet.q, 1.0)?
        .lincomb(1.0, &FluxField::gradient_of(&jet.theta), params.eta)?;
    Ok(OriginalResiduals {
        plate: plate.l2_norm(),
        heat: heat.l2_norm(),
        flux: flux.l2_norm(),
    })
}
