//! Model coefficients and the scalar nonlinearity.
//!
//! The library works with the z-frame response `N(z) := -K(-z)`, so the
//! reduced plate equation reads `(A⁻¹ + γ) z_tt + A N(z) - α A θ = 0`. With
//! `κ₀ = N'(0)` the Taylor remainder `F(z) = κ₀ z - N(z)` carries all of the
//! nonlinearity: `(A⁻¹ + γ) z_tt + κ₀ A z - α A θ = A F(z)`.
//!
//! `A F`, `A G` and `A H` (with `G = ∂_t F(z)`, `H = ∂_t² F(z)`) are evaluated
//! pointwise on the padded grid through their chain-rule expansions and then
//! projected back to modal space. The `*_direct` variants take the other
//! route (transform `F(z)` itself, multiply by `λ`) and exist to cross-check.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spectral::{apply_a_power, gradient, to_modal, to_nodal, NodalField, SpectralField};

/// Normalized coefficients of the plate system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub tau: f64,
    pub sigma: f64,
    /// Base stiffness `K'(0)`.
    pub kappa0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            eta: 1.0,
            tau: 1.0,
            sigma: 0.0,
            kappa0: 1.0,
        }
    }
}

impl ModelParams {
    /// Checks the ranges shared by every consumer (α, γ, τ, σ may be zero).
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("tau", self.tau),
            ("sigma", self.sigma),
            ("kappa0", self.kappa0),
        ];
        if let Some((name, _)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} is not finite")));
        }
        for (name, v) in [("beta", self.beta), ("eta", self.eta), ("kappa0", self.kappa0)] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma), ("tau", self.tau), ("sigma", self.sigma)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// The time-domain simulator needs rotational inertia and a relaxation time.
    pub fn validate_for_simulation(&self) -> Result<()> {
        self.validate()?;
        if self.gamma <= 0.0 || self.tau <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "simulation requires gamma > 0 and tau > 0 (gamma = {}, tau = {})",
                self.gamma, self.tau
            )));
        }
        Ok(())
    }
}

/// A scalar response with derivatives: returns `[f, f', f'', f''', f'''']`.
pub trait Response: Send + Sync {
    fn jet(&self, x: f64) -> [f64; 5];
}

/// Polynomial `Σ c_i x^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl Response for Polynomial {
    fn jet(&self, x: f64) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (order, slot) in out.iter_mut().enumerate() {
            // Horner on the order-th derivative
            let mut acc = 0.0;
            for i in (order..self.coeffs.len()).rev() {
                let falling: f64 = (i - order + 1..=i).map(|m| m as f64).product();
                acc = acc * x + self.coeffs[i] * falling;
            }
            *slot = acc;
        }
        out
    }
}

impl<F> Response for F
where
    F: Fn(f64) -> [f64; 5] + Send + Sync,
{
    fn jet(&self, x: f64) -> [f64; 5] {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    /// Stored response is `K`; `N^{(j)}(z) = (-1)^{j+1} K^{(j)}(-z)`.
    Stiffness,
    /// Stored response is `N` itself.
    Displacement,
}

/// The z-frame response `N(z) = -K(-z)` with derivatives to order four.
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    response: Arc<dyn Response>,
    frame: Frame,
    kappa0: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("kappa0", &self.kappa0)
            .finish()
    }
}

impl Nonlinearity {
    /// Wrap a stiffness response `K` (with `K(0) = 0`).
    pub fn from_k(name: impl Into<String>, k: impl Response + 'static) -> Result<Self> {
        Self::build(name.into(), Arc::new(k), Frame::Stiffness)
    }

    /// Wrap a z-frame response `N` directly.
    pub fn from_z_frame(name: impl Into<String>, n: impl Response + 'static) -> Result<Self> {
        Self::build(name.into(), Arc::new(n), Frame::Displacement)
    }

    fn build(name: String, response: Arc<dyn Response>, frame: Frame) -> Result<Self> {
        let mut nl = Self {
            name,
            response,
            frame,
            kappa0: 0.0,
        };
        let j0 = nl.jet(0.0);
        if j0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response at 0"));
        }
        if j0[0].abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!("response must vanish at 0, got {}", j0[0])));
        }
        if j0[1] <= 0.0 {
            return Err(Error::InvalidParameter(format!("N'(0) = {} must be positive", j0[1])));
        }
        nl.kappa0 = j0[1];
        Ok(nl)
    }

    /// Reject responses with `N''(0) ≠ 0`.
    pub fn require_flat_origin(self) -> Result<Self> {
        let c = self.jet(0.0)[2];
        if c.abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("N''(0) = {c} must vanish")));
        }
        Ok(self)
    }

    /// `K(z) = κ₀ z`.
    pub fn linear(kappa0: f64) -> Result<Self> {
        Self::from_k("linear", Polynomial::new(vec![0.0, kappa0]))
    }

    /// `K(z) = κ₀ z + c z³`.
    pub fn cubic_stiffening(kappa0: f64, c: f64) -> Result<Self> {
        Self::from_k("cubic-stiffening", Polynomial::new(vec![0.0, kappa0, 0.0, c]))
    }

    /// `K(z) = κ₀ z - c z³`.
    pub fn cubic_softening(kappa0: f64, c: f64) -> Result<Self> {
        Self::from_k("cubic-softening", Polynomial::new(vec![0.0, kappa0, 0.0, -c]))
    }

    /// `K(z) = κ₀ z - b z² + c z³`.
    pub fn quadratic(kappa0: f64, b: f64, c: f64) -> Result<Self> {
        Self::from_k("quadratic", Polynomial::new(vec![0.0, kappa0, -b, c]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    /// `[N, N', N'', N''', N'''']` at `z`.
    pub fn jet(&self, z: f64) -> [f64; 5] {
        match self.frame {
            Frame::Displacement => self.response.jet(z),
            Frame::Stiffness => {
                let k = self.response.jet(-z);
                [-k[0], k[1], -k[2], k[3], -k[4]]
            }
        }
    }

    /// `a(z) = N'(z)`, the quasilinear coefficient.
    pub fn coefficient(&self, z: f64) -> f64 {
        self.jet(z)[1]
    }

    /// `[F, F', F'', F''', F'''']` at `z`, `F(z) = κ₀ z - N(z)`.
    pub fn remainder_jet(&self, z: f64) -> [f64; 5] {
        let n = self.jet(z);
        [self.kappa0 * z - n[0], self.kappa0 - n[1], -n[2], -n[3], -n[4]]
    }
}

fn finite_or(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Pointwise `F(z)`.
pub fn remainder_f(nl: &Nonlinearity, z: &[f64]) -> Result<Vec<f64>> {
    finite_or(z, "remainder input")?;
    let out: Vec<f64> = z.iter().map(|&x| nl.remainder_jet(x)[0]).collect();
    finite_or(&out, "F(z)")?;
    Ok(out)
}

/// Pointwise `G = F'(z) z_t`.
pub fn remainder_g(nl: &Nonlinearity, z: &[f64], zt: &[f64]) -> Result<Vec<f64>> {
    finite_or(z, "remainder input")?;
    finite_or(zt, "remainder input")?;
    let out: Vec<f64> = z.iter().zip(zt).map(|(&x, &v)| nl.remainder_jet(x)[1] * v).collect();
    finite_or(&out, "G(z)")?;
    Ok(out)
}

/// Pointwise `H = F''(z) z_t² + F'(z) z_tt`.
pub fn remainder_h(nl: &Nonlinearity, z: &[f64], zt: &[f64], ztt: &[f64]) -> Result<Vec<f64>> {
    finite_or(z, "remainder input")?;
    finite_or(zt, "remainder input")?;
    finite_or(ztt, "remainder input")?;
    let out: Vec<f64> = z
        .iter()
        .zip(zt)
        .zip(ztt)
        .map(|((&x, &v), &a)| {
            let f = nl.remainder_jet(x);
            f[2] * v * v + f[1] * a
        })
        .collect();
    finite_or(&out, "H(z)")?;
    Ok(out)
}

/// Nodal data of one field needed by the chain rule: values, `A u` and `∇u`.
struct Sampled {
    u: Vec<f64>,
    au: Vec<f64>,
    grad: Vec<Vec<f64>>,
}

impl Sampled {
    fn new(f: &SpectralField) -> Self {
        Self {
            u: to_nodal(f).values().to_vec(),
            au: to_nodal(&apply_a_power(f, 1.0)).values().to_vec(),
            grad: gradient(f).into_iter().map(|g| g.values().to_vec()).collect(),
        }
    }

    fn grad_dot(&self, other: &Self, j: usize) -> f64 {
        self.grad.iter().zip(&other.grad).map(|(a, b)| a[j] * b[j]).sum()
    }
}

fn project(f: &SpectralField, values: Vec<f64>, what: &'static str) -> Result<SpectralField> {
    finite_or(&values, what)?;
    let nodal = NodalField::from_values(f.basis(), values)?;
    let out = to_modal(&nodal);
    finite_or(out.coeffs(), what)?;
    Ok(out)
}

/// `A F(z) = F'(z) A z - F''(z) |∇z|²`.
pub fn apply_af(z: &SpectralField, nl: &Nonlinearity) -> Result<SpectralField> {
    let s = Sampled::new(z);
    let vals = (0..s.u.len())
        .map(|j| {
            let f = nl.remainder_jet(s.u[j]);
            f[1] * s.au[j] - f[2] * s.grad_dot(&s, j)
        })
        .collect();
    project(z, vals, "A F(z)")
}

/// `A G = A(F'(z) z_t)
///      = F' A z_t + F'' z_t A z - 2 F'' ∇z·∇z_t - F''' |∇z|² z_t`.
pub fn apply_ag(z: &SpectralField, zt: &SpectralField, nl: &Nonlinearity) -> Result<SpectralField> {
    z.same_basis(zt)?;
    let s = Sampled::new(z);
    let v = Sampled::new(zt);
    let vals = (0..s.u.len())
        .map(|j| {
            let f = nl.remainder_jet(s.u[j]);
            f[1] * v.au[j] + f[2] * v.u[j] * s.au[j] - 2.0 * f[2] * s.grad_dot(&v, j) - f[3] * s.grad_dot(&s, j) * v.u[j]
        })
        .collect();
    project(z, vals, "A G(z)")
}

/// `A H = A(F''(z) z_t²) + A(F'(z) z_tt)`, both expanded by the chain rule.
pub fn apply_ah(
    z: &SpectralField,
    zt: &SpectralField,
    ztt: &SpectralField,
    nl: &Nonlinearity,
) -> Result<SpectralField> {
    z.same_basis(zt)?;
    z.same_basis(ztt)?;
    let s = Sampled::new(z);
    let v = Sampled::new(zt);
    let a = Sampled::new(ztt);
    let vals = (0..s.u.len())
        .map(|j| {
            let f = nl.remainder_jet(s.u[j]);
            let gz2 = s.grad_dot(&s, j);
            let gzv = s.grad_dot(&v, j);
            let vt = v.u[j];
            let quad = -f[4] * gz2 * vt * vt + f[3] * vt * vt * s.au[j] - 4.0 * f[3] * vt * gzv
                - 2.0 * f[2] * v.grad_dot(&v, j)
                + 2.0 * f[2] * vt * v.au[j];
            let lin = f[1] * a.au[j] + f[2] * a.u[j] * s.au[j] - 2.0 * f[2] * s.grad_dot(&a, j) - f[3] * gz2 * a.u[j];
            quad + lin
        })
        .collect();
    project(z, vals, "A H(z)")
}

/// `λ · to_modal(F(z))`: the transform-then-multiply route for `A F`.
pub fn apply_af_direct(z: &SpectralField, nl: &Nonlinearity) -> Result<SpectralField> {
    let vals = remainder_f(nl, to_nodal(z).values())?;
    Ok(apply_a_power(&project(z, vals, "F(z)")?, 1.0))
}

pub fn apply_ag_direct(z: &SpectralField, zt: &SpectralField, nl: &Nonlinearity) -> Result<SpectralField> {
    z.same_basis(zt)?;
    let vals = remainder_g(nl, to_nodal(z).values(), to_nodal(zt).values())?;
    Ok(apply_a_power(&project(z, vals, "G(z)")?, 1.0))
}

pub fn apply_ah_direct(
    z: &SpectralField,
    zt: &SpectralField,
    ztt: &SpectralField,
    nl: &Nonlinearity,
) -> Result<SpectralField> {
    z.same_basis(zt)?;
    z.same_basis(ztt)?;
    let vals = remainder_h(nl, to_nodal(z).values(), to_nodal(zt).values(), to_nodal(ztt).values())?;
    Ok(apply_a_power(&project(z, vals, "H(z)")?, 1.0))
}

/// `A N(z)` by the transform route; used for residuals of the original system.
pub fn apply_an_direct(z: &SpectralField, nl: &Nonlinearity) -> Result<SpectralField> {
    let vals: Vec<f64> = to_nodal(z).values().iter().map(|&x| nl.jet(x)[0]).collect();
    Ok(apply_a_power(&project(z, vals, "N(z)")?, 1.0))
}

/// `min_x N'(z(x))` over the padded grid.
pub fn ellipticity_min(z: &SpectralField, nl: &Nonlinearity) -> f64 {
    to_nodal(z)
        .values()
        .iter()
        .map(|&x| nl.coefficient(x))
        .fold(f64::INFINITY, |m, v| if v.is_nan() { f64::NAN } else { m.min(v) })
}

/// Sampled check of the structural assumptions on the response.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub rho: f64,
    pub samples: usize,
    /// `N(0) = 0`.
    pub vanishes_at_origin: bool,
    /// `N'(0) > 0`.
    pub positive_stiffness: bool,
    /// `N''(0) = 0`.
    pub flat_origin: bool,
    pub curvature_at_origin: f64,
    /// `N' > 0` on `[-rho, rho]`.
    pub positive_on_range: bool,
    /// Smallest sampled `N'` and where it occurs.
    pub min_slope: f64,
    pub argmin_slope: f64,
    /// `N..N''''` finite on every sample.
    pub smooth_on_range: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.vanishes_at_origin && self.positive_stiffness && self.flat_origin && self.positive_on_range && self.smooth_on_range
    }
}

pub fn check_assumptions(nl: &Nonlinearity, rho: f64, samples: usize) -> Result<AssumptionReport> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let samples = samples.max(3) | 1; // odd, so z = 0 is sampled
    let j0 = nl.jet(0.0);
    let mut min_slope = f64::INFINITY;
    let mut argmin = 0.0;
    let mut smooth = true;
    for i in 0..samples {
        let z = -rho + 2.0 * rho * i as f64 / (samples - 1) as f64;
        let j = nl.jet(z);
        smooth &= j.iter().all(|v| v.is_finite());
        if j[1] < min_slope {
            min_slope = j[1];
            argmin = z;
        }
    }
    Ok(AssumptionReport {
        rho,
        samples,
        vanishes_at_origin: j0[0].abs() <= 1e-14,
        positive_stiffness: j0[1] > 0.0,
        flat_origin: j0[2].abs() <= 1e-12,
        curvature_at_origin: j0[2],
        positive_on_range: min_slope > 0.0,
        min_slope,
        argmin_slope: argmin,
        smooth_on_range: smooth,
    })
}

/// Physical inputs of the dimensional plate system (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub density: f64,
    pub thickness: f64,
    pub flexural_rigidity: f64,
    pub poisson_ratio: f64,
    pub heat_capacity: f64,
    pub thermal_expansion: f64,
    /// In-plane conductivity `λ₀`.
    pub conductivity: f64,
    /// Face heat-transfer coefficient `λ₁` (zero for insulated faces).
    pub face_transfer: f64,
    pub relaxation_time: f64,
    pub reference_temperature: f64,
    pub bulk_modulus: f64,
}

/// Result of mapping physical inputs to normalized coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub params: ModelParams,
    /// `θ_phys = theta_scale · θ` and `q_phys = theta_scale · q`.
    pub theta_scale: f64,
    /// Factor `1/(ρ h)` applied to the stiffness response `K`.
    pub stiffness_scale: f64,
    /// Coefficient on `Δθ` in the normalized plate equation.
    pub plate_coupling: f64,
    /// Coefficient on `Δw_t` in the normalized heat equation.
    pub heat_coupling: f64,
}

pub fn normalize_physical(p: &PhysicalParams) -> Result<Normalization> {
    let positive = [
        ("density", p.density),
        ("thickness", p.thickness),
        ("flexural_rigidity", p.flexural_rigidity),
        ("poisson_ratio", p.poisson_ratio),
        ("heat_capacity", p.heat_capacity),
        ("thermal_expansion", p.thermal_expansion),
        ("conductivity", p.conductivity),
        ("relaxation_time", p.relaxation_time),
        ("reference_temperature", p.reference_temperature),
        ("bulk_modulus", p.bulk_modulus),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if !(p.face_transfer.is_finite() && p.face_transfer >= 0.0) {
        return Err(Error::InvalidParameter(format!("face_transfer must be nonnegative, got {}", p.face_transfer)));
    }
    if p.poisson_ratio >= 0.5 {
        return Err(Error::InvalidParameter(format!("poisson_ratio must be < 1/2, got {}", p.poisson_ratio)));
    }
    let rho_h = p.density * p.thickness;
    let a1 = p.flexural_rigidity * (1.0 + p.poisson_ratio) / (2.0 * rho_h);
    let a2 = 3.0 * p.bulk_modulus * p.thermal_expansion * p.reference_temperature;
    let mu = (a2 / a1).sqrt();
    let h = p.thickness;
    let params = ModelParams {
        alpha: (a1 * a2).sqrt(),
        beta: p.density * p.heat_capacity / p.thermal_expansion,
        gamma: h * h / 12.0,
        eta: p.conductivity / p.thermal_expansion,
        tau: p.relaxation_time,
        sigma: 12.0 / (p.thermal_expansion * h * h) * (p.conductivity + h * p.face_transfer / 2.0),
        kappa0: p.flexural_rigidity / rho_h,
    };
    params.validate()?;
    Ok(Normalization {
        params,
        theta_scale: mu,
        stiffness_scale: 1.0 / rho_h,
        plate_coupling: a1 * mu,
        heat_coupling: a2 / mu,
    })
}
