//! Weighted energies, the level-one dissipation balance, decay fits and
//! boundedness reports.
//!
//! With `κ₀` the base stiffness, the level-`m` energy is
//!
//! ```text
//! E_m = ½ ( ‖A^{-1/2} ∂ᵐz‖² + γ‖∂ᵐz‖² + κ₀‖A^{1/2} ∂ᵐ⁻¹z‖²
//!         + β‖A^{1/2} ∂ᵐ⁻¹θ‖² + (τ/η)‖∂ᵐ⁻¹p‖² )
//! ```
//!
//! for `m = 1, 2, 3` (`∂ = ∂_t`). Along solutions with `σ = 0`,
//! `E₁(T) + ∫ ‖p‖²/η = E₁(0) + ∫ ⟨A F(z), z_t⟩`.

use crate::dynamics::{Jet, PlateState};
use crate::error::{Error, Result};
use crate::model::{apply_af, ModelParams, Nonlinearity};
use crate::spectral::{sobolev_norm_sq, SpectralField};

/// Individual contributions to `E₁`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyTerms {
    /// `½‖A^{-1/2} z_t‖²`
    pub kinetic: f64,
    /// `½γ‖z_t‖²`
    pub rotary: f64,
    /// `½κ₀‖A^{1/2} z‖²`
    pub elastic: f64,
    /// `½β‖A^{1/2} θ‖²`
    pub thermal: f64,
    /// `½(τ/η)‖p‖²`
    pub flux: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.kinetic + self.rotary + self.elastic + self.thermal + self.flux
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    /// `E₁ + E₂ + E₃`
    pub e: f64,
    /// `E + Y`
    pub x: f64,
    /// Higher-order norms not controlled by `E`.
    pub y: f64,
    /// Sum of the product Sobolev norms of the level-three solution spaces.
    pub x_topological: f64,
    /// `min N'(z)`; filled in by the simulator, which knows the response.
    pub ellipticity_min: Option<f64>,
    pub e1_terms: EnergyTerms,
}

fn level_terms(params: &ModelParams, rate: &SpectralField, z: &SpectralField, theta: &SpectralField, p: &SpectralField) -> EnergyTerms {
    let lam = z.basis().eigenvalues();
    let mut t = EnergyTerms::default();
    for k in 0..lam.len() {
        let (r, zk, th, pk) = (rate.coeffs()[k], z.coeffs()[k], theta.coeffs()[k], p.coeffs()[k]);
        t.kinetic += r * r / lam[k];
        t.rotary += r * r;
        t.elastic += lam[k] * zk * zk;
        t.thermal += lam[k] * th * th;
        t.flux += pk * pk;
    }
    EnergyTerms {
        kinetic: 0.5 * t.kinetic,
        rotary: 0.5 * params.gamma * t.rotary,
        elastic: 0.5 * params.kappa0 * t.elastic,
        thermal: 0.5 * params.beta * t.thermal,
        flux: 0.5 * params.tau / params.eta * t.flux,
    }
}

/// `E₁` of a bare state.
pub fn level_one_energy(state: &PlateState, params: &ModelParams) -> f64 {
    level_terms(params, &state.v, &state.z, &state.theta, &state.p).total()
}

pub fn energy_levels(t: f64, jet: &Jet, params: &ModelParams) -> EnergyReport {
    let [z, zt, ztt, zttt] = &jet.z;
    let [th, tht, thtt, thttt] = &jet.theta;
    let [p, pt, ptt] = &jet.p;
    let e1_terms = level_terms(params, zt, z, th, p);
    let e1 = e1_terms.total();
    let e2 = level_terms(params, ztt, zt, tht, pt).total();
    let e3 = level_terms(params, zttt, ztt, thtt, ptt).total();
    let e = e1 + e2 + e3;
    let h = sobolev_norm_sq;
    let y = h(z, 3) + h(zt, 2) + h(th, 3) + h(tht, 2) + h(thttt, 0) + h(p, 2) + h(pt, 1);
    let x_topological = h(z, 3)
        + h(zt, 2)
        + h(ztt, 1)
        + h(zttt, 0)
        + h(th, 3)
        + h(tht, 2)
        + h(thtt, 1)
        + h(thttt, 0)
        + h(p, 2)
        + h(pt, 1)
        + h(ptt, 0);
    EnergyReport {
        t,
        e1,
        e2,
        e3,
        e,
        x: e + y,
        y,
        x_topological,
        ellipticity_min: None,
        e1_terms,
    }
}

/// Running terms of the level-one balance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBalance {
    pub e1_start: f64,
    pub e1_end: f64,
    /// `∫ ‖p‖²/η dt`
    pub dissipated: f64,
    /// `∫ ⟨A F(z), z_t⟩ dt`
    pub forcing_work: f64,
}

impl EnergyBalance {
    pub fn new(e1_start: f64) -> Self {
        Self {
            e1_start,
            e1_end: e1_start,
            ..Self::default()
        }
    }

    /// Midpoint-rule increment over `[t_n, t_n + dt]` given the states at
    /// both ends and the forcing `A F` evaluated at the midpoint.
    pub fn accumulate(
        &mut self,
        before: &PlateState,
        after: &PlateState,
        forcing: &SpectralField,
        params: &ModelParams,
    ) -> Result<()> {
        let dt = after.t - before.t;
        let p_mid = before.p.lincomb(0.5, &after.p, 0.5)?;
        let v_mid = before.v.lincomb(0.5, &after.v, 0.5)?;
        self.dissipated += dt / params.eta * p_mid.dot(&p_mid)?;
        self.forcing_work += dt * forcing.dot(&v_mid)?;
        self.e1_end = level_one_energy(after, params);
        Ok(())
    }

    /// `|E₁(T) + ∫‖p‖²/η − E₁(0) − ∫⟨AF, z_t⟩| / E₁(0)`.
    pub fn residual(&self) -> f64 {
        let r = (self.e1_end + self.dissipated - self.e1_start - self.forcing_work).abs();
        if r == 0.0 {
            0.0
        } else {
            r / self.e1_start.max(f64::MIN_POSITIVE)
        }
    }
}

/// Relative residual of the level-one balance over a uniformly sampled
/// trajectory (one entry per time step), using the midpoint rule with the
/// forcing evaluated at the averaged state.
pub fn dissipation_residual(series: &[PlateState], params: &ModelParams, nl: &Nonlinearity) -> Result<f64> {
    if params.sigma != 0.0 {
        return Err(Error::Unsupported("the level-one balance is only checked for sigma = 0".into()));
    }
    if series.len() < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let dt0 = series[1].t - series[0].t;
    if series.windows(2).any(|w| ((w[1].t - w[0].t) - dt0).abs() > 1e-9 * dt0.abs()) {
        return Err(Error::InvalidParameter("series is not uniformly sampled".into()));
    }
    let mut balance = EnergyBalance::new(level_one_energy(&series[0], params));
    for w in series.windows(2) {
        let z_mid = w[0].z.lincomb(0.5, &w[1].z, 0.5)?;
        let forcing = apply_af(&z_mid, nl)?;
        balance.accumulate(&w[0], &w[1], &forcing, params)?;
    }
    Ok(balance.residual())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Fitted rate in `X ≈ C exp(-κ t)`.
    pub kappa_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares line through `(t, ln X)` on `window` (default: second half).
pub fn decay_fit(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<DecayFit> {
    if times.len() != values.len() || times.is_empty() {
        return Err(Error::InvalidParameter("times and values must be non-empty and equally long".into()));
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let (a, b) = window.unwrap_or((0.5 * (t0 + t1), t1));
    if !(a < b) {
        return Err(Error::InvalidParameter(format!("empty fit window [{a}, {b}]")));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= a && **t <= b)
        .map(|(&t, &x)| (t, x))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InvalidParameter(format!("fit window holds {} samples, need 10", pts.len())));
    }
    if let Some((t, x)) = pts.iter().find(|(_, x)| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!("nonpositive sample {x} at t = {t}")));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, x) in &pts {
        let (dt, dy) = (t - mt, x.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    // a flat series is fitted exactly by a zero slope
    let flat = pts.iter().all(|p| p.1 == pts[0].1);
    let slope = if flat { 0.0 } else { sty / stt };
    let intercept = my - slope * mt;
    let ss_res = (syy - slope * sty).max(0.0);
    let r_squared = if flat { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        kappa_hat: -slope,
        c_hat: intercept.exp(),
        r_squared,
        window: (a, b),
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierReport {
    /// `sup_t X(t) / X(0)` (0 when `X(0) = 0`).
    pub sup_x_ratio: f64,
    /// `sup_t E₁(t) / E₁(0)` (0 when `E₁(0) = 0`).
    pub sup_e1_ratio: f64,
    /// Whether the moving-max envelope of `X` is non-increasing over the
    /// second half of the series.
    pub eventually_monotone: bool,
}

/// Descriptive boundedness summary. `window` is the moving-max width in samples.
pub fn barrier_report(x: &[f64], e1: &[f64], window: usize) -> BarrierReport {
    let ratio = |s: &[f64]| match s.first() {
        Some(&s0) if s0 > 0.0 => s.iter().fold(0.0f64, |m, v| m.max(*v)) / s0,
        _ => 0.0,
    };
    let w = window.max(1);
    let envelope: Vec<f64> = (0..x.len())
        .map(|i| x[i..(i + w).min(x.len())].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)))
        .collect();
    let half = envelope.len() / 2;
    let eventually_monotone = envelope[half..].windows(2).all(|p| p[1] <= p[0]);
    BarrierReport {
        sup_x_ratio: ratio(x),
        sup_e1_ratio: ratio(e1),
        eventually_monotone,
    }
}
