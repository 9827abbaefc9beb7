//! Per-mode ground truth for the linear system.
//!
//! Restricted to one eigenmode `φ_k` (eigenvalue `λ`) the linear reduced
//! system is the ODE `u' = M_λ u` with `u = (z, z_t, θ, p)`:
//!
//! ```text
//! z'  = v
//! v'  = λ (-κ₀ λ z + α λ θ) / (1 + γ λ)
//! θ'  = -(p + σ θ + α v) / β
//! p'  = (η λ θ - p) / τ
//! ```
//!
//! For `τ = 0` the flux is eliminated (`p = η λ θ`) and the state is
//! `(z, v, θ)`. Eigenvalues come from a dense Schur decomposition after a
//! diagonal similarity into energy coordinates, which keeps the entries of
//! high modes balanced.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    lambda: f64,
    params: ModelParams,
    matrix: DMatrix<f64>,
}

impl ModeMatrix {
    /// 4×4 Cattaneo form for `τ > 0`, 3×3 Fourier form for `τ = 0`.
    pub fn new(lambda: f64, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        let ModelParams {
            alpha,
            beta,
            gamma,
            eta,
            tau,
            sigma,
            kappa0,
        } = *params;
        let inertia = lambda / (1.0 + gamma * lambda);
        let matrix = if tau > 0.0 {
            DMatrix::from_row_slice(
                4,
                4,
                &[
                    0.0,
                    1.0,
                    0.0,
                    0.0,
                    -kappa0 * lambda * inertia,
                    0.0,
                    alpha * lambda * inertia,
                    0.0,
                    0.0,
                    -alpha / beta,
                    -sigma / beta,
                    -1.0 / beta,
                    0.0,
                    0.0,
                    eta * lambda / tau,
                    -1.0 / tau,
                ],
            )
        } else {
            DMatrix::from_row_slice(
                3,
                3,
                &[
                    0.0,
                    1.0,
                    0.0,
                    -kappa0 * lambda * inertia,
                    0.0,
                    alpha * lambda * inertia,
                    0.0,
                    -alpha / beta,
                    -(sigma + eta * lambda) / beta,
                ],
            )
        };
        Ok(Self {
            lambda,
            params: *params,
            matrix,
        })
    }

    /// The 4×4 form; fails for `τ = 0`.
    pub fn cattaneo(lambda: f64, params: &ModelParams) -> Result<Self> {
        if params.tau <= 0.0 {
            return Err(Error::InvalidParameter("the 4x4 mode matrix needs tau > 0".into()));
        }
        Self::new(lambda, params)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Diagonal `d` with `½|d ∘ u|²` the per-mode level-one energy.
    fn energy_scaling(&self) -> Vec<f64> {
        let p = &self.params;
        let l = self.lambda;
        let mut d = vec![(p.kappa0 * l).sqrt(), (1.0 / l + p.gamma).sqrt(), (p.beta * l).sqrt()];
        if self.size() == 4 {
            d.push((p.tau / p.eta).sqrt());
        }
        d
    }

    fn balanced(&self) -> (DMatrix<f64>, Vec<f64>) {
        let d = self.energy_scaling();
        let n = self.size();
        let s = DMatrix::from_fn(n, n, |i, j| d[i] * self.matrix[(i, j)] / d[j]);
        (s, d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub lambda: f64,
    /// Sorted by descending real part, then ascending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
    /// `max |det(sI - M)| / ‖M‖^n` over the computed eigenvalues.
    pub char_residual: f64,
}

pub fn spectral_abscissa(m: &ModeMatrix) -> Result<Spectrum> {
    let (s, _) = m.balanced();
    let n = s.nrows();
    let schur = nalgebra::linalg::Schur::try_new(s.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigensolve(format!("Schur iteration did not converge (lambda = {})", m.lambda)))?;
    let mut eigenvalues: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    if eigenvalues.iter().any(|e| !(e.re.is_finite() && e.im.is_finite())) {
        return Err(Error::Eigensolve(format!("non-finite eigenvalue (lambda = {})", m.lambda)));
    }
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let abscissa = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);

    let norm = s.norm().max(f64::MIN_POSITIVE);
    let sc = s.map(|x| Complex64::new(x, 0.0));
    let char_residual = eigenvalues
        .iter()
        .map(|&ev| {
            let shifted = DMatrix::<Complex64>::identity(n, n) * ev - &sc;
            shifted.determinant().norm() / norm.powi(n as i32)
        })
        .fold(0.0, f64::max);
    Ok(Spectrum {
        lambda: m.lambda,
        eigenvalues,
        abscissa,
        char_residual,
    })
}

/// Spectrum of mode `λ` under `params`.
pub fn mode_spectrum(lambda: f64, params: &ModelParams) -> Result<Spectrum> {
    spectral_abscissa(&ModeMatrix::new(lambda, params)?)
}

/// `exp(t M) u0` by scaling and squaring with a Padé approximant, computed in
/// energy coordinates and mapped back.
pub fn propagate_exact(u0: &[f64], m: &ModeMatrix, t: f64) -> Result<Vec<f64>> {
    if u0.len() != m.size() {
        return Err(Error::InvalidParameter(format!(
            "state has {} entries, mode matrix is {}x{}",
            u0.len(),
            m.size(),
            m.size()
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(u0.to_vec());
    }
    let (s, d) = m.balanced();
    let size = t * s.norm();
    if !(size.is_finite() && size < 1e12) {
        return Err(Error::ExponentialOverflow(size));
    }
    let e = (s * t).exp();
    let y = DVector::from_iterator(d.len(), u0.iter().zip(&d).map(|(u, w)| u * w));
    let out: Vec<f64> = (e * y).iter().zip(&d).map(|(v, w)| v / w).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::ExponentialOverflow(size));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// The damping margin does not drift to zero with the mode index.
    UniformlyDamped,
    /// The damping margin decays along the high modes.
    DampingVanishes,
    /// Some low mode is not damped at all (e.g. `α = 0`).
    Undamped,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::UniformlyDamped => "uniformly-damped",
            Self::DampingVanishes => "damping-vanishes",
            Self::Undamped => "undamped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub gamma: f64,
    pub tau: f64,
    /// Abscissa of mode `k = 1..=k_max`.
    pub abscissas: Vec<f64>,
    /// `inf_k (-abscissa_k)` over all modes.
    pub inf_neg_abscissa: f64,
    /// The same infimum over `k ≤ k_max / 2`.
    pub inf_neg_abscissa_half: f64,
    /// `abscissa(k_max) / abscissa(k_max / 8)`.
    pub trend_ratio: f64,
    pub classification: Stability,
}

/// Ratio threshold separating the two classes: uniformly damped when the
/// infimum over all modes keeps at least this fraction of the infimum over
/// the lower half.
pub const UNIFORM_DAMPING_RATIO: f64 = 0.9;

/// Sweep `(γ, τ)` on the interval `(0, length)` with modes `1..=k_max`.
pub fn stability_sweep(
    base: &ModelParams,
    gammas: &[f64],
    taus: &[f64],
    k_max: usize,
    length: f64,
) -> Result<Vec<SweepCell>> {
    if k_max < 32 {
        return Err(Error::InvalidParameter(format!("k_max must be at least 32, got {k_max}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParameter(format!("length must be positive, got {length}")));
    }
    let mut cells = Vec::new();
    for &gamma in gammas {
        for &tau in taus {
            let params = ModelParams { gamma, tau, ..*base };
            params.validate()?;
            let abscissas = (1..=k_max)
                .into_par_iter()
                .map(|k| {
                    let lambda = (k as f64 * PI / length).powi(2);
                    mode_spectrum(lambda, &params).map(|s| s.abscissa)
                })
                .collect::<Result<Vec<f64>>>()?;
            let inf_all = abscissas.iter().map(|a| -a).fold(f64::INFINITY, f64::min);
            let inf_half = abscissas[..k_max / 2].iter().map(|a| -a).fold(f64::INFINITY, f64::min);
            let classification = if inf_half <= 1e-14 {
                Stability::Undamped
            } else if inf_all >= UNIFORM_DAMPING_RATIO * inf_half {
                Stability::UniformlyDamped
            } else {
                Stability::DampingVanishes
            };
            let trend_ratio = abscissas[k_max - 1] / abscissas[k_max / 8 - 1];
            cells.push(SweepCell {
                gamma,
                tau,
                abscissas,
                inf_neg_abscissa: inf_all,
                inf_neg_abscissa_half: inf_half,
                trend_ratio,
                classification,
            });
        }
    }
    Ok(cells)
}
