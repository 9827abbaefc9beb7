//! Subcommand drivers. Every driver validates the whole configuration
//! before touching the output directory, so a config error leaves no files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ktplate_core::diagnostics::decay_fit;
use ktplate_core::dynamics::{initial_jet, simulate, HaltReason};
use ktplate_core::oracle::{mode_spectrum, stability_sweep};
use ktplate_core::Error;
use serde_json::{json, Value};

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DEGENERACY: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;
pub const EXIT_PICARD: i32 = 4;
pub const EXIT_CHECK: i32 = 5;

pub const SERIES_HEADER: &str = "t,E1,E2,E3,E,X,Y,ellipticity_min,picard_iters";

pub fn halt_exit_code(h: HaltReason) -> i32 {
    match h {
        HaltReason::Completed => EXIT_OK,
        HaltReason::Degeneracy => EXIT_DEGENERACY,
        HaltReason::BlowUp => EXIT_BLOWUP,
        HaltReason::PicardDivergence => EXIT_PICARD,
    }
}

/// Scientific notation with `digits` significant digits.
pub fn fmt_num(x: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), x)
}

fn out_dir(cfg: &RunConfig, over: Option<&Path>) -> PathBuf {
    over.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
}

fn io_err(path: &Path, e: std::io::Error) -> ConfigError {
    ConfigError(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, body: &str) -> Result<(), ConfigError> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), ConfigError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn params_json(p: &ktplate_core::model::ModelParams) -> Value {
    json!({
        "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "eta": p.eta,
        "tau": p.tau, "sigma": p.sigma, "kappa0": p.kappa0,
    })
}

fn tool_json() -> Value {
    json!({ "name": "ktplate", "version": env!("CARGO_PKG_VERSION") })
}

fn progress(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>, quiet: bool) -> Result<i32, ConfigError> {
    let basis = cfg.basis()?;
    let (params, normalization) = cfg.model_params()?;
    params.validate_for_simulation()?;
    let nl = cfg.nonlinearity(params.kappa0)?;
    let opts = cfg.sim_options()?;
    let (state, complement) = cfg.initial_state(&basis, &params)?;
    let precision = cfg.output.precision;

    let dir = out_dir(cfg, out);
    create_dir(&dir)?;
    let series_path = dir.join("series.csv");
    let file = fs::File::create(&series_path).map_err(|e| io_err(&series_path, e))?;
    let mut w = BufWriter::new(file);
    let mut write_err: Option<std::io::Error> = None;
    writeln!(w, "{SERIES_HEADER}").map_err(|e| io_err(&series_path, e))?;

    let (mut times, mut xs) = (vec![], vec![]);
    let (mut first, mut last) = (None, None);
    progress(quiet, format!("simulate: {} modes, dt = {}, t_end = {}", basis.len(), opts.dt, opts.t_end));
    let outcome = simulate(&state, &params, &nl, &opts, &mut |r| {
        let e = &r.energy;
        let row = [e.t, e.e1, e.e2, e.e3, e.e, e.x, e.y, r.ellipticity_min]
            .iter()
            .map(|v| fmt_num(*v, precision))
            .collect::<Vec<_>>()
            .join(",");
        if write_err.is_none() {
            if let Err(err) = writeln!(w, "{row},{}", r.picard_iters) {
                write_err = Some(err);
            }
        }
        times.push(e.t);
        xs.push(e.x);
        if first.is_none() {
            first = Some((e.e1, e.x));
        }
        last = Some((e.t, e.e1, e.x));
    })?;
    if let Some(e) = write_err {
        return Err(io_err(&series_path, e));
    }
    w.flush().map_err(|e| io_err(&series_path, e))?;

    let window = cfg.output.fit_window.map(|[a, b]| (a, b));
    let fit = match decay_fit(&times, &xs, window) {
        Ok(f) => json!({
            "kappa_hat": f.kappa_hat, "c_hat": f.c_hat, "r_squared": f.r_squared,
            "window": [f.window.0, f.window.1], "samples": f.samples,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let residual = if params.sigma == 0.0 { json!(outcome.balance.residual()) } else { Value::Null };
    let (e1_0, x_0) = first.unwrap_or((f64::NAN, f64::NAN));
    let (t_f, e1_f, x_f) = last.unwrap_or((f64::NAN, f64::NAN, f64::NAN));
    let code = halt_exit_code(outcome.halt);
    let summary = json!({
        "tool": tool_json(),
        "command": "simulate",
        "halt": outcome.halt.as_str(),
        "halt_detail": outcome.halt_detail,
        "exit_code": code,
        "final_time": outcome.final_state.t,
        "last_record_time": t_f,
        "steps": outcome.steps,
        "records": times.len(),
        "e1_initial": e1_0,
        "e1_final": e1_f,
        "x_initial": x_0,
        "x_final": x_f,
        "decay_fit": fit,
        "dissipation_residual": residual,
        "energy_balance": {
            "e1_start": outcome.balance.e1_start,
            "e1_end": outcome.balance.e1_end,
            "dissipated": outcome.balance.dissipated,
            "forcing_work": outcome.balance.forcing_work,
        },
        "picard": {
            "steps": outcome.picard.steps,
            "total": outcome.picard.total,
            "mean": outcome.picard.mean(),
            "max": outcome.picard.max,
        },
        "p0_complement_norm": complement,
        "nonlinearity": nl.name(),
        "scheme": opts.scheme.as_str(),
        "params": params_json(&params),
        "normalization": normalization.map(|n| json!({
            "theta_scale": n.theta_scale,
            "stiffness_scale": n.stiffness_scale,
            "plate_coupling": n.plate_coupling,
            "heat_coupling": n.heat_coupling,
        })),
        "config": cfg.canonical(),
    });
    write_file(&dir.join("summary.json"), &(serde_json::to_string_pretty(&summary).unwrap() + "\n"))?;
    progress(quiet, format!("simulate: {} at t = {}", outcome.halt.as_str(), outcome.final_state.t));
    if let Some(d) = &outcome.halt_detail {
        eprintln!("halt: {d}");
    }
    Ok(code)
}

fn oracle_length(cfg: &RunConfig, explicit: Option<f64>) -> Result<f64, ConfigError> {
    let l = explicit.or_else(|| cfg.basis.lengths.first().copied()).unwrap_or(1.0);
    if !(l > 0.0 && l.is_finite()) {
        return Err(ConfigError(format!("interval length must be positive, got {l}")));
    }
    Ok(l)
}

pub fn cmd_spectrum(cfg: &RunConfig, out: Option<&Path>, quiet: bool) -> Result<i32, ConfigError> {
    let (params, _) = cfg.model_params()?;
    let k_max = cfg.spectrum.k_max;
    if k_max == 0 {
        return Err(ConfigError("spectrum.k_max must be at least 1".into()));
    }
    let length = oracle_length(cfg, cfg.spectrum.length)?;
    let precision = cfg.output.precision;
    let mut rows = vec![];
    let mut size = 0;
    for k in 1..=k_max {
        let lambda = (k as f64 * std::f64::consts::PI / length).powi(2);
        let s = mode_spectrum(lambda, &params)?;
        let mut ev = s.eigenvalues.clone();
        ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        size = ev.len();
        let mut cols = vec![k.to_string(), fmt_num(lambda, precision)];
        for e in &ev {
            cols.push(fmt_num(e.re, precision));
            cols.push(fmt_num(e.im, precision));
        }
        cols.push(fmt_num(s.abscissa, precision));
        rows.push(cols.join(","));
    }
    let mut header = vec!["k".to_string(), "lambda".to_string()];
    for i in 1..=size {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    header.push("abscissa".into());
    let dir = out_dir(cfg, out);
    create_dir(&dir)?;
    let body = std::iter::once(header.join(",")).chain(rows).collect::<Vec<_>>().join("\n") + "\n";
    write_file(&dir.join("spectrum.csv"), &body)?;
    progress(quiet, format!("spectrum: {k_max} modes written"));
    Ok(EXIT_OK)
}

pub fn cmd_sweep(cfg: &RunConfig, out: Option<&Path>, quiet: bool) -> Result<i32, ConfigError> {
    let (params, _) = cfg.model_params()?;
    let sw = &cfg.sweep;
    if sw.gammas.is_empty() || sw.taus.is_empty() {
        return Err(ConfigError("sweep.gammas and sweep.taus must be non-empty".into()));
    }
    let length = oracle_length(cfg, sw.length)?;
    let cells = stability_sweep(&params, &sw.gammas, &sw.taus, sw.k_max, length)?;
    let precision = cfg.output.precision;
    let mut body = String::from("gamma,tau,inf_neg_abscissa,trend_ratio,classification\n");
    for c in &cells {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_num(c.gamma, precision),
            fmt_num(c.tau, precision),
            fmt_num(c.inf_neg_abscissa, precision),
            fmt_num(c.trend_ratio, precision),
            c.classification.as_str()
        ));
    }
    let dir = out_dir(cfg, out);
    create_dir(&dir)?;
    write_file(&dir.join("sweep.csv"), &body)?;
    for c in &cells {
        progress(quiet, format!("sweep: gamma = {}, tau = {}: {}", c.gamma, c.tau, c.classification.as_str()));
    }
    Ok(EXIT_OK)
}

pub fn cmd_jets(cfg: &RunConfig, out: Option<&Path>, quiet: bool) -> Result<i32, ConfigError> {
    let basis = cfg.basis()?;
    let (params, _) = cfg.model_params()?;
    if params.tau <= 0.0 {
        return Err(ConfigError("jets need tau > 0".into()));
    }
    let nl = cfg.nonlinearity(params.kappa0)?;
    let (s, complement) = cfg.initial_state(&basis, &params)?;
    let jet = match initial_jet(&s.z, &s.v, &s.theta, &s.p, &params, &nl) {
        Ok(j) => j,
        Err(e @ Error::Degenerate { .. }) => {
            eprintln!("jets: {e}");
            return Ok(EXIT_DEGENERACY);
        }
        Err(e) => return Err(e.into()),
    };
    let coeffs = |fs: &[ktplate_core::spectral::SpectralField]| fs.iter().map(|f| f.coeffs().to_vec()).collect::<Vec<_>>();
    let modes: Vec<Vec<usize>> = (0..basis.len()).map(|i| basis.multi_index(i)).collect();
    let body = json!({
        "tool": tool_json(),
        "modes": modes,
        "lambda": basis.eigenvalues(),
        "z": coeffs(&jet.z),
        "theta": coeffs(&jet.theta[..3]),
        "p": coeffs(&jet.p),
        "p0_complement_norm": complement,
        "config": cfg.canonical(),
    });
    let dir = out_dir(cfg, out);
    create_dir(&dir)?;
    write_file(&dir.join("jets.json"), &(serde_json::to_string_pretty(&body).unwrap() + "\n"))?;
    progress(quiet, "jets: written");
    Ok(EXIT_OK)
}
