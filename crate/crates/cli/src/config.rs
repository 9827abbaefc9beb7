//! Run configuration: flat TOML sections, parsed into typed blocks with
//! defaults, validated, and re-serialized into a canonical form that is
//! echoed in every summary.

use std::path::Path;
use std::sync::Arc;

use ktplate_core::diagnostics::level_one_energy;
use ktplate_core::dynamics::{project_with_complement, PlateState, Scheme, SimOptions};
use ktplate_core::model::{normalize_physical, ModelParams, Nonlinearity, Normalization, PhysicalParams};
use ktplate_core::spectral::{make_basis, Basis, NodalField, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<ktplate_core::Error> for ConfigError {
    fn from(e: ktplate_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub modes: Vec<usize>,
    pub padding: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            lengths: vec![1.0],
            modes: vec![32],
            padding: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub tau: f64,
    pub sigma: f64,
    pub kappa0: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = ModelParams::default();
        Self {
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            eta: p.eta,
            tau: p.tau,
            sigma: p.sigma,
            kappa0: p.kappa0,
        }
    }
}

/// Dimensional inputs in SI units; all are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub density: f64,
    pub thickness: f64,
    pub flexural_rigidity: f64,
    pub poisson_ratio: f64,
    pub heat_capacity: f64,
    pub thermal_expansion: f64,
    pub conductivity: f64,
    #[serde(default)]
    pub face_transfer: f64,
    pub relaxation_time: f64,
    pub reference_temperature: f64,
    pub bulk_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearityConfig {
    /// `linear`, `cubic-stiffening`, `cubic-softening` or `quadratic`.
    pub preset: String,
    /// Quadratic coefficient `b` in `K = κ₀z − b z² + c z³`.
    pub b: f64,
    /// Cubic coefficient `c`.
    pub c: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            preset: "linear".into(),
            b: 0.0,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    /// `zero`, `single-mode`, `random` or `coefficients`.
    pub preset: String,
    /// 1-based multi-index of the excited mode (`single-mode`).
    pub mode: Vec<usize>,
    /// Which field the single mode lives in: `z`, `v`, `theta` or `p`.
    pub field: String,
    /// Peak nodal value for `single-mode`, coefficient scale for `random`.
    pub amplitude: f64,
    /// Random data: seed and the decay exponent of coefficient `k`.
    pub seed: u64,
    pub decay: f64,
    /// Rescale the data so that `E₁(0)` takes this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    /// Coefficients in lexicographic mode order (`coefficients`).
    pub z: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    /// Constant added to `p₀` on the grid before projection.
    pub p_constant: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            preset: "zero".into(),
            mode: vec![],
            field: "z".into(),
            amplitude: 0.0,
            seed: 0,
            decay: 2.0,
            energy: None,
            z: vec![],
            v: vec![],
            theta: vec![],
            p: vec![],
            p_constant: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub degeneracy_eps: f64,
    pub blowup_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let o = SimOptions::default();
        Self {
            dt: o.dt,
            t_end: o.t_end,
            scheme: o.scheme.as_str().into(),
            picard_tol: o.picard_tol,
            picard_max_iter: o.picard_max_iter,
            degeneracy_eps: o.degeneracy_eps,
            blowup_threshold: o.blowup_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub stride: usize,
    pub precision: usize,
    /// Decay-fit window `[t_a, t_b]`; default is the second half of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            stride: 1,
            precision: 17,
            fit_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub k_max: usize,
    /// Interval length; defaults to the first basis length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { k_max: 8, length: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    pub taus: Vec<f64>,
    pub k_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gammas: vec![0.0, 1.0],
            taus: vec![0.0, 1.0],
            k_max: 512,
            length: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub basis: BasisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalConfig>,
    pub nonlinearity: NonlinearityConfig,
    pub initial: InitialConfig,
    pub sim: SimConfig,
    pub output: OutputConfig,
    pub spectrum: SpectrumConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))?;
        match (&cfg.params, &cfg.physical) {
            (Some(_), Some(_)) => return err("config: give either [params] or [physical], not both"),
            (None, None) => return err("config: one of [params] or [physical] is required"),
            _ => {}
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML text: every field explicit, fixed order.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn basis(&self) -> Result<Arc<Basis>, ConfigError> {
        let b = &self.basis;
        Ok(make_basis(b.dim, &b.lengths, &b.modes, b.padding)?)
    }

    /// Normalized coefficients, plus the normalization record for physical input.
    pub fn model_params(&self) -> Result<(ModelParams, Option<Normalization>), ConfigError> {
        if let Some(p) = &self.params {
            let m = ModelParams {
                alpha: p.alpha,
                beta: p.beta,
                gamma: p.gamma,
                eta: p.eta,
                tau: p.tau,
                sigma: p.sigma,
                kappa0: p.kappa0,
            };
            m.validate()?;
            return Ok((m, None));
        }
        let p = self.physical.as_ref().expect("checked at parse time");
        let n = normalize_physical(&PhysicalParams {
            density: p.density,
            thickness: p.thickness,
            flexural_rigidity: p.flexural_rigidity,
            poisson_ratio: p.poisson_ratio,
            heat_capacity: p.heat_capacity,
            thermal_expansion: p.thermal_expansion,
            conductivity: p.conductivity,
            face_transfer: p.face_transfer,
            relaxation_time: p.relaxation_time,
            reference_temperature: p.reference_temperature,
            bulk_modulus: p.bulk_modulus,
        })?;
        Ok((n.params, Some(n)))
    }

    pub fn nonlinearity(&self, kappa0: f64) -> Result<Nonlinearity, ConfigError> {
        let n = &self.nonlinearity;
        Ok(match n.preset.as_str() {
            "linear" => Nonlinearity::linear(kappa0)?,
            "cubic-stiffening" => Nonlinearity::cubic_stiffening(kappa0, n.c)?,
            "cubic-softening" => Nonlinearity::cubic_softening(kappa0, n.c)?,
            "quadratic" => Nonlinearity::quadratic(kappa0, n.b, n.c)?,
            other => return err(format!("unknown nonlinearity preset '{other}'")),
        })
    }

    pub fn sim_options(&self) -> Result<SimOptions, ConfigError> {
        let s = &self.sim;
        let scheme = Scheme::parse(&s.scheme).ok_or_else(|| ConfigError(format!("unknown scheme '{}'", s.scheme)))?;
        let opts = SimOptions {
            dt: s.dt,
            t_end: s.t_end,
            scheme,
            picard_tol: s.picard_tol,
            picard_max_iter: s.picard_max_iter,
            degeneracy_eps: s.degeneracy_eps,
            blowup_threshold: s.blowup_threshold,
            record_stride: self.output.stride,
        };
        opts.validate(0.0)?;
        if !(1..=17).contains(&self.output.precision) {
            return err("output.precision must be between 1 and 17");
        }
        if let Some([a, b]) = self.output.fit_window {
            if !(a < b) {
                return err("output.fit_window must satisfy t_a < t_b");
            }
        }
        Ok(opts)
    }

    /// Initial state and the norm of the part of `p₀` outside the sine span.
    pub fn initial_state(&self, basis: &Arc<Basis>, params: &ModelParams) -> Result<(PlateState, f64), ConfigError> {
        let ic = &self.initial;
        let n = basis.len();
        let zero = || vec![0.0; n];
        let (mut z, mut v, mut th, mut p) = (zero(), zero(), zero(), zero());
        match ic.preset.as_str() {
            "zero" => {}
            "single-mode" => {
                let k = if ic.mode.is_empty() { vec![1; basis.dim()] } else { ic.mode.clone() };
                let idx = basis
                    .flat_index(&k)
                    .ok_or_else(|| ConfigError(format!("initial.mode {k:?} is outside the basis")))?;
                let peak: f64 = basis.lengths().iter().map(|l| (2.0 / l).sqrt()).product();
                let target = match ic.field.as_str() {
                    "z" => &mut z,
                    "v" => &mut v,
                    "theta" => &mut th,
                    "p" => &mut p,
                    other => return err(format!("unknown initial.field '{other}'")),
                };
                target[idx] = ic.amplitude / peak;
            }
            "random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(ic.seed);
                for f in [&mut z, &mut v, &mut th, &mut p] {
                    for (k, c) in f.iter_mut().enumerate() {
                        *c = ic.amplitude * rng.gen_range(-1.0..1.0) / ((k + 1) as f64).powf(ic.decay);
                    }
                }
            }
            "coefficients" => {
                for (src, dst, name) in [(&ic.z, &mut z, "z"), (&ic.v, &mut v, "v"), (&ic.theta, &mut th, "theta"), (&ic.p, &mut p, "p")] {
                    if src.len() > n {
                        return err(format!("initial.{name} has {} coefficients, basis has {n}", src.len()));
                    }
                    dst[..src.len()].copy_from_slice(src);
                }
            }
            other => return err(format!("unknown initial preset '{other}'")),
        }
        let field = |c: Vec<f64>| SpectralField::from_coeffs(basis, c).map_err(ConfigError::from);
        let mut complement = 0.0;
        let mut p_field = field(p)?;
        if ic.p_constant != 0.0 {
            let mut nodal = ktplate_core::spectral::to_nodal(&p_field).values().to_vec();
            nodal.iter_mut().for_each(|x| *x += ic.p_constant);
            let (proj, c) = project_with_complement(&NodalField::from_values(basis, nodal)?);
            p_field = proj;
            complement = c;
        }
        let mut state = PlateState::new(0.0, field(z)?, field(v)?, field(th)?, p_field)?;
        if let Some(target) = ic.energy {
            if !(target > 0.0 && target.is_finite()) {
                return err("initial.energy must be positive");
            }
            let e = level_one_energy(&state, params);
            if e == 0.0 {
                return err("initial.energy given but the data is zero");
            }
            let s = (target / e).sqrt();
            state = PlateState::new(0.0, state.z.scaled(s), state.v.scaled(s), state.theta.scaled(s), state.p.scaled(s))?;
        }
        Ok((state, complement))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"
[params]
gamma = 1.0

[initial]
preset = "single-mode"
amplitude = 0.5
"#;

    #[test]
    fn canonical_form_is_idempotent() {
        let c = RunConfig::parse(LINEAR).unwrap();
        let text = c.canonical();
        let again = RunConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.canonical(), text);
    }

    #[test]
    fn rejects_bad_blocks() {
        assert!(RunConfig::parse("[basis]\ndim = 1\n").is_err());
        assert!(RunConfig::parse("[params]\n[physical]\ndensity = 1.0\n").is_err());
        assert!(RunConfig::parse("[params]\nalpah = 1.0\n").is_err());
        let c = RunConfig::parse("[params]\n[nonlinearity]\npreset = \"sextic\"\n").unwrap();
        assert!(c.nonlinearity(1.0).is_err());
    }

    #[test]
    fn single_mode_amplitude_is_peak_value() {
        let c = RunConfig::parse(LINEAR).unwrap();
        let b = c.basis().unwrap();
        let (s, comp) = c.initial_state(&b, &ModelParams::default()).unwrap();
        assert_eq!(comp, 0.0);
        let peak = ktplate_core::spectral::to_nodal(&s.z).max_abs();
        assert!((peak - 0.5).abs() < 1e-3);
    }

    #[test]
    fn energy_rescaling() {
        let text = "[params]\n[initial]\npreset = \"random\"\namplitude = 1.0\nseed = 3\nenergy = 1e-4\n";
        let c = RunConfig::parse(text).unwrap();
        let b = c.basis().unwrap();
        let (s, _) = c.initial_state(&b, &ModelParams::default()).unwrap();
        assert!((level_one_energy(&s, &ModelParams::default()) - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn constant_flux_divergence_reports_complement() {
        let text = "[params]\n[initial]\np_constant = 1.0\n";
        let c = RunConfig::parse(text).unwrap();
        let b = c.basis().unwrap();
        let (_, comp) = c.initial_state(&b, &ModelParams::default()).unwrap();
        assert!(comp > 0.0 && comp < 1.0);
    }
}
