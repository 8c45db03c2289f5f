//! Subcommand implementations. Each turns a resolved [`RunConfig`] into
//! named outputs and plot-ready curves.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::thread;

use acceptorloss_core::acceptor::{level_structure, FieldVector, C64};
use acceptorloss_core::lindblad::{
    build_liouvillian, critical_rabi_field, critical_rabi_zero_field, nbar_from_temperature,
    saturation_ratio, stationary_projection, steady_state_analytic_field,
    steady_state_analytic_zero_field, steady_state_numeric, DensityMatrix4, FourLevelParams,
    LindbladError, LindbladWarning,
};
use acceptorloss_core::resonator::{
    fit_s21, fit_saturation_loglog, photon_number, s21_model, saturation_model, thermal_factor,
    SaturationFitParams, SaturationWarning,
};
use acceptorloss_core::spectrum::SpectrumError;
use acceptorloss_core::spectrum::{
    doping_fit, loss_tangent_full, loss_tangent_narrowband, map_cells, quality_factor,
    weighted_participation, MappedCell, StrainField,
};

use crate::config::{missing, RunConfig};
use crate::error::CliError;
use crate::formats::{parse_pairs, parse_s21_csv, parse_strain_map, spectrum_curve, Curve};
use crate::record::Output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    FitS21,
    PhotonCalib,
    SimulateSteady,
    CriticalRabi,
    SaturationRatio,
    LossEstimate,
    SpectrumBuild,
    DopingFit,
    SatFit,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::FitS21,
        Command::PhotonCalib,
        Command::SimulateSteady,
        Command::CriticalRabi,
        Command::SaturationRatio,
        Command::LossEstimate,
        Command::SpectrumBuild,
        Command::DopingFit,
        Command::SatFit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::FitS21 => "fit-s21",
            Command::PhotonCalib => "photon-calib",
            Command::SimulateSteady => "simulate-steady",
            Command::CriticalRabi => "critical-rabi",
            Command::SaturationRatio => "saturation-ratio",
            Command::LossEstimate => "loss-estimate",
            Command::SpectrumBuild => "spectrum-build",
            Command::DopingFit => "doping-fit",
            Command::SatFit => "sat-fit",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown command `{s}`")))
    }
}

/// Outputs of one command run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub outputs: BTreeMap<String, Output>,
    pub warnings: Vec<String>,
    pub curves: Vec<Curve>,
}

impl CommandOutput {
    fn set(&mut self, key: &str, value: impl Into<Output>) {
        self.outputs.insert(key.to_string(), value.into());
    }
}

pub fn run(command: Command, cfg: &RunConfig, workers: usize) -> Result<CommandOutput, CliError> {
    match command {
        Command::FitS21 => fit_s21_cmd(cfg),
        Command::PhotonCalib => photon_calib(cfg),
        Command::SimulateSteady => simulate_steady(cfg),
        Command::CriticalRabi => critical_rabi(cfg),
        Command::SaturationRatio => saturation_ratio_cmd(cfg),
        Command::LossEstimate => loss_estimate(cfg, workers),
        Command::SpectrumBuild => spectrum_build(cfg, workers),
        Command::DopingFit => doping_fit_cmd(cfg),
        Command::SatFit => sat_fit(cfg),
    }
}

fn dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

fn fit_s21_cmd(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let path = cfg
        .files
        .as_ref()
        .and_then(|f| f.s21_csv.clone())
        .ok_or_else(|| missing("files.s21_csv"))?;
    let default_power = cfg.device_power_w()?.map_or(f64::NAN, dbm);
    let trace = parse_s21_csv(&path)?.into_trace(default_power)?;
    let fit = fit_s21(&trace, None)?;
    let mut out = CommandOutput::default();
    out.set("f0_hz", fit.f0);
    out.set("q", fit.q);
    out.set("qc", fit.qc);
    out.set("qi", fit.qi);
    out.set("df_hz", fit.df);
    out.set("a", fit.a);
    out.set("phi_rad", fit.phi);
    out.set("tau_s", fit.tau);
    out.set("rms_residual", fit.rms_residual);
    out.set("power_dbm_at_device", trace.power_dbm_at_device());
    if let Some(u) = fit.uncertainty {
        for (k, v) in [
            ("f0_hz", u.f0),
            ("q", u.q),
            ("qc", u.qc),
            ("qi", u.qi),
            ("df_hz", u.df),
            ("a", u.a),
            ("phi_rad", u.phi),
            ("tau_s", u.tau),
        ] {
            out.set(&format!("sigma_{k}"), v);
        }
    }
    if !fit.qi.is_finite() {
        out.warnings
            .push("1/Q − 1/Qc ≤ 0: internal Q unbounded within this fit".into());
    }
    let mut curve = Curve::new(
        "model",
        &["freq_hz", "data_re", "data_im", "model_re", "model_im"],
    );
    for (f, z) in trace.frequencies_hz().iter().zip(trace.values()) {
        let m = s21_model(&fit, *f);
        curve.rows.push(vec![*f, z.re, z.im, m.re, m.im]);
    }
    out.curves.push(curve);
    Ok(out)
}

/// Mean photon number from the resonator block, if a power is set.
fn photons(cfg: &RunConfig) -> Result<Option<f64>, CliError> {
    let Some(pin) = cfg.device_power_w()? else {
        return Ok(None);
    };
    let r = cfg
        .resonator
        .as_ref()
        .expect("power implies a resonator block");
    let f0 = r.f0_ghz.ok_or_else(|| missing("resonator.f0_ghz"))? * 1e9;
    let q = r.q.ok_or_else(|| missing("resonator.q"))?;
    let qe = r.qe.ok_or_else(|| missing("resonator.qe"))?;
    Ok(Some(photon_number(pin, f0, q, qe)?))
}

fn saturation_params(cfg: &RunConfig) -> Result<Option<SaturationFitParams>, CliError> {
    let Some(s) = &cfg.saturation else {
        return Ok(None);
    };
    let (Some(tan_delta0), Some(n_c), Some(beta)) = (s.tan_delta0, s.n_c_photons, s.beta) else {
        return Ok(None);
    };
    let a_t = match cfg.resonator.as_ref().and_then(|r| r.temperature_k) {
        Some(t) => {
            let f0 = cfg
                .resonator
                .as_ref()
                .and_then(|r| r.f0_ghz)
                .ok_or_else(|| missing("resonator.f0_ghz"))?;
            thermal_factor(f0 * 1e9, t)?
        }
        None => 1.0,
    };
    let p = SaturationFitParams {
        tan_delta0,
        n_c,
        beta,
        a_t,
    };
    p.validate()?;
    Ok(Some(p))
}

fn photon_calib(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let source = cfg
        .source_power_w()?
        .ok_or_else(|| missing("resonator.pin_dbm or resonator.pin_w"))?;
    let device = cfg.device_power_w()?.expect("source power set");
    let n = photons(cfg)?.expect("source power set");
    let mut out = CommandOutput::default();
    out.set("attenuation_db", cfg.attenuation_db());
    out.set("pin_source_w", source);
    out.set("pin_device_w", device);
    out.set("pin_device_dbm", dbm(device));
    out.set("n_photons", n);
    if let Some(p) = saturation_params(cfg)? {
        let tan = saturation_model(n, &p);
        out.set("thermal_factor", p.a_t);
        out.set("tan_delta", tan);
        out.set("q_tls", 1.0 / tan);
    }
    Ok(out)
}

struct Model {
    params: FourLevelParams,
    field_on: bool,
    photons: Option<f64>,
}

fn four_level(cfg: &RunConfig) -> Result<Model, CliError> {
    let l = cfg.lindblad.clone().unwrap_or_default();
    let gamma_prime = l.gamma_prime_per_s.unwrap_or(1.0);
    let nbar = match (l.nbar, l.temperature_k) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "set only one of lindblad.nbar and lindblad.temperature_k".into(),
            ))
        }
        (Some(n), None) => n,
        (None, Some(t)) => {
            let f = l
                .transition_ghz
                .ok_or_else(|| missing("lindblad.transition_ghz"))?;
            if !(t > 0.0 && f > 0.0) {
                return Err(CliError::Validation(
                    "temperature and transition frequency must be positive".into(),
                ));
            }
            nbar_from_temperature(f * 1e9, t)
        }
        (None, None) => 0.0,
    };
    let (delta_big, delta_small, field_on) = match cfg.field_vector_tesla()? {
        Some(b) => {
            if l.delta_big_rad_per_s.is_some() || l.delta_small_rad_per_s.is_some() {
                return Err(CliError::Config(
                    "lindblad.field_gauss excludes explicit detunings".into(),
                ));
            }
            let ls = level_structure(
                &cfg.acceptor_params(),
                &cfg.strain_tensor(),
                &FieldVector::ZERO,
                &b,
            );
            let on = l.field_gauss.unwrap_or(0.0) != 0.0;
            (
                2.0 * PI * ls.zeeman_lower_hz,
                2.0 * PI * ls.zeeman_upper_hz,
                on,
            )
        }
        None => {
            let (d, s) = (
                l.delta_big_rad_per_s.unwrap_or(0.0),
                l.delta_small_rad_per_s.unwrap_or(0.0),
            );
            (d, s, d != 0.0 || s != 0.0)
        }
    };
    let n = photons(cfg)?;
    let magnitude = match (l.rabi_per_sqrt_photon_rad_per_s, n) {
        (Some(g), Some(n)) => {
            if l.omega_rad_per_s.is_some() {
                return Err(CliError::Config(
                    "lindblad.omega_rad_per_s conflicts with a resonator power".into(),
                ));
            }
            g * n.sqrt()
        }
        _ => l.omega_rad_per_s.unwrap_or(0.0),
    };
    let params = FourLevelParams {
        gamma_prime,
        gamma_tilde: l.gamma_tilde_per_s.unwrap_or(gamma_prime),
        nbar,
        omega: C64::from_polar(magnitude, l.omega_phase_rad.unwrap_or(0.0)),
        delta_big,
        delta_small,
        gamma_spin: l.gamma_spin_per_s.unwrap_or(0.0),
    };
    params.validate()?;
    Ok(Model {
        params,
        field_on,
        photons: n,
    })
}

/// Steady state, resolving a degenerate kernel from the maximally mixed
/// state. The flag reports whether that happened.
fn steady_state(p: &FourLevelParams, field_on: bool) -> Result<(DensityMatrix4, bool), CliError> {
    let l = build_liouvillian(p, field_on);
    match steady_state_numeric(&l) {
        Ok(rho) => Ok((rho, false)),
        Err(LindbladError::DegenerateSteadyState { .. }) => Ok((
            stationary_projection(&l, &DensityMatrix4::maximally_mixed())?,
            true,
        )),
        Err(e) => Err(e.into()),
    }
}

fn simulate_steady(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let m = four_level(cfg)?;
    let p = m.params;
    let (rho, degenerate) = steady_state(&p, m.field_on)?;
    let mut out = CommandOutput::default();
    let pops = rho.populations();
    for (k, v) in pops.iter().enumerate() {
        out.set(&format!("rho{0}{0}", k + 1), *v);
    }
    out.set("coherence_13_abs", rho.element(1, 3).norm());
    out.set("coherence_24_abs", rho.element(2, 4).norm());
    out.set("population_difference", rho.population_difference());
    out.set("nbar", p.nbar);
    out.set("omega_rad_per_s", p.omega.norm());
    out.set("delta_big_rad_per_s", p.delta_big);
    out.set("delta_small_rad_per_s", p.delta_small);
    out.set("field_on", m.field_on);
    out.set("degenerate", degenerate);
    if degenerate {
        out.warnings
            .push("steady state is not unique; projected from the maximally mixed state".into());
    }
    if let Some(n) = m.photons {
        out.set("n_photons", n);
    }

    let (reference, _) = steady_state(&p.with_omega(0.0), m.field_on)?;
    let relative = if reference.population_difference() > 0.0 {
        rho.population_difference() / reference.population_difference()
    } else {
        f64::NAN
    };
    out.set("relative_loss", relative);
    if let Some(t) = cfg.saturation.as_ref().and_then(|s| s.tan_delta0) {
        out.set("tan_delta", t * relative);
    }

    let analytic = if m.field_on {
        let (a, warning) = steady_state_analytic_field(&p);
        if let Some(LindbladWarning::ApproximationInvalid { detuning, omega }) = warning {
            out.warnings.push(format!(
                "closed form assumes |Δ−δ| ≫ |Ω| (detuning {detuning:.3e}, Ω {omega:.3e})"
            ));
        }
        a
    } else {
        steady_state_analytic_zero_field(&p)
    };
    out.set(
        "analytic_max_population_error",
        rho.max_population_diff(&analytic),
    );

    out.set("omega_c_zero_field_rad_per_s", critical_rabi_zero_field(&p));
    if p.nbar > 0.0 {
        out.set("omega_c_field_rad_per_s", critical_rabi_field(&p)?);
        out.set(
            "saturation_ratio",
            saturation_ratio(p.nbar, p.gamma_tilde / p.gamma_prime)?,
        );
    }
    Ok(out)
}

fn critical_rabi(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let m = four_level(cfg)?;
    let p = m.params;
    let coupling = cfg
        .lindblad
        .as_ref()
        .and_then(|l| l.rabi_per_sqrt_photon_rad_per_s);
    let mut out = CommandOutput::default();
    let zero = critical_rabi_zero_field(&p);
    out.set("nbar", p.nbar);
    out.set("omega_c_zero_field_rad_per_s", zero);
    if let Some(g) = coupling {
        out.set("n_c_zero_field", (zero / g).powi(2));
    }
    match critical_rabi_field(&p) {
        Ok(field) => {
            out.set("omega_c_field_rad_per_s", field);
            out.set(
                "saturation_ratio",
                saturation_ratio(p.nbar, p.gamma_tilde / p.gamma_prime)?,
            );
            if let Some(g) = coupling {
                out.set("n_c_field", (field / g).powi(2));
            }
        }
        Err(LindbladError::ZeroTemperatureSaturation) => {
            out.warnings
                .push("in-field critical drive vanishes at zero temperature".into());
            out.set("omega_c_field_rad_per_s", 0.0);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn saturation_ratio_cmd(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let m = four_level(cfg)?;
    let p = m.params;
    let branching = p.gamma_tilde / p.gamma_prime;
    let mut out = CommandOutput::default();
    out.set("nbar", p.nbar);
    out.set("branching", branching);
    out.set("ratio", saturation_ratio(p.nbar, branching)?);
    if let Some(f) = cfg.lindblad.as_ref().and_then(|l| l.transition_ghz) {
        let mut curve = Curve::new("vs_temperature", &["temperature_k", "nbar", "ratio"]);
        for k in 0..60 {
            let t = 0.005 * (60f64).powf(k as f64 / 59.0);
            let n = nbar_from_temperature(f * 1e9, t);
            if n > 0.0 {
                curve.rows.push(vec![t, n, saturation_ratio(n, branching)?]);
            }
        }
        out.curves.push(curve);
    }
    Ok(out)
}

/// Strain field from `files.strain_map`, else the synthetic edge profile.
fn strain_field(cfg: &RunConfig) -> Result<(StrainField, &'static str), CliError> {
    match cfg.files.as_ref().and_then(|f| f.strain_map.as_ref()) {
        Some(path) => Ok((parse_strain_map(path)?, "file")),
        None => {
            let s = cfg.synthetic_map.clone().unwrap_or_default();
            if s.cells_x == 0
                || s.cells_y == 0
                || !(s.total_participation > 0.0 && s.total_participation <= 1.0)
            {
                return Err(CliError::Validation(
                    "synthetic_map needs cells and a participation in (0, 1]".into(),
                ));
            }
            let field = StrainField::synthetic_edge_profile(
                s.cells_x,
                s.cells_y,
                s.peak_strain,
                s.total_participation,
            );
            Ok((field, "synthetic"))
        }
    }
}

/// Splitting of every cell, chunked over `workers` threads.
pub fn parallel_splitting_map(
    field: &StrainField,
    cfg: &RunConfig,
    workers: usize,
) -> Result<Vec<MappedCell>, SpectrumError> {
    let params = cfg.acceptor_params();
    let cells = field.cells();
    let chunk = cells.len().div_ceil(workers.max(1)).max(1);
    thread::scope(|s| {
        let handles: Vec<_> = cells
            .chunks(chunk)
            .enumerate()
            .map(|(k, part)| s.spawn(move || map_cells(part, &params, k * chunk)))
            .collect();
        let mut mapped = Vec::with_capacity(cells.len());
        for h in handles {
            mapped.extend(h.join().expect("splitting worker panicked")?);
        }
        Ok(mapped)
    })
}

fn spectrum_build(cfg: &RunConfig, workers: usize) -> Result<CommandOutput, CliError> {
    let (field, source) = strain_field(cfg)?;
    let mapped = parallel_splitting_map(&field, cfg, workers)?;
    let spectrum = weighted_participation(&mapped, &cfg.bins()?);
    let f = cfg.loss_frequency_hz();
    let mut out = CommandOutput::default();
    out.set("strain_source", source);
    out.set("cells", mapped.len() as f64);
    out.set("total_bulk_participation", field.total_bulk_participation());
    out.set("binned_weight", spectrum.binned_weight());
    out.set("underflow_weight", spectrum.underflow_weight);
    out.set("overflow_weight", spectrum.overflow_weight);
    out.set(
        "max_splitting_hz",
        mapped.iter().map(|c| c.splitting_hz).fold(0.0, f64::max),
    );
    out.set("f_hz", f);
    out.set("p_at_f_per_ghz", spectrum.density_at(f) * 1e9);
    if spectrum.overflow_weight > 0.0 {
        out.warnings
            .push("some splittings lie above the last bin edge".into());
    }
    out.curves.push(spectrum_curve(&spectrum));
    Ok(out)
}

fn loss_estimate(cfg: &RunConfig, workers: usize) -> Result<CommandOutput, CliError> {
    let dopant = cfg.dopant()?;
    let mut out = CommandOutput::default();
    out.set("concentration_cm3", dopant.concentration_cm3);
    out.set("dipole_debye", dopant.dipole_debye);
    out.set("epsilon_r", dopant.epsilon_r);
    let p_per_ghz = cfg.loss.as_ref().and_then(|l| l.p_per_ghz);
    let use_map =
        cfg.files.as_ref().is_some_and(|f| f.strain_map.is_some()) || cfg.synthetic_map.is_some();
    if p_per_ghz.is_none() && !use_map {
        return Err(missing(
            "loss.p_per_ghz, files.strain_map or [synthetic_map]",
        ));
    }
    if let Some(p) = p_per_ghz {
        if !(p >= 0.0) {
            return Err(CliError::Validation(format!(
                "loss.p_per_ghz = {p} is negative"
            )));
        }
        let tan = loss_tangent_narrowband(p * 1e-9, &dopant);
        out.set("p_per_ghz", p);
        out.set("tan_delta", tan);
        out.set("q", quality_factor(tan));
    }
    if use_map {
        let (field, _) = strain_field(cfg)?;
        let mapped = parallel_splitting_map(&field, cfg, workers)?;
        let spectrum = weighted_participation(&mapped, &cfg.bins()?);
        let (f, lw) = (cfg.loss_frequency_hz(), cfg.linewidth_hz());
        let full = loss_tangent_full(&spectrum, f, lw, &dopant);
        let nb = loss_tangent_narrowband(spectrum.density_at(f), &dopant);
        out.set("f_hz", f);
        out.set("linewidth_hz", lw);
        out.set("spectrum_p_at_f_per_ghz", spectrum.density_at(f) * 1e9);
        out.set("spectrum_tan_delta_full", full);
        out.set("spectrum_tan_delta_narrowband", nb);
        out.set("spectrum_q_full", quality_factor(full));
    }
    Ok(out)
}

fn doping_fit_cmd(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let path = cfg
        .files
        .as_ref()
        .and_then(|f| f.doping_csv.clone())
        .ok_or_else(|| missing("files.doping_csv"))?;
    let points = parse_pairs(&path, "concentration_cm3", "q")?;
    let fit = doping_fit(&points)?;
    let mut out = CommandOutput::default();
    out.set("a_cm3", fit.a);
    out.set("log10_a", fit.log10_a);
    out.set("log10_a_std_err", fit.log10_a_std_err);
    out.set("points", fit.n_points as f64);
    let targets = cfg
        .doping
        .as_ref()
        .map(|d| d.predict_cm3.clone())
        .unwrap_or_default();
    if !targets.is_empty() {
        out.set("predict_cm3", targets.clone());
        out.set(
            "predicted_q",
            targets
                .iter()
                .map(|&r| fit.predicted_q(r))
                .collect::<Vec<_>>(),
        );
    }
    let mut curve = Curve::new("fit", &["concentration_cm3", "q_measured", "q_fit"]);
    for (rho, q) in &points {
        curve.rows.push(vec![*rho, *q, fit.predicted_q(*rho)]);
    }
    out.curves.push(curve);
    Ok(out)
}

fn sat_fit(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let files = cfg.files.clone().unwrap_or_default();
    let zero_path = files
        .saturation_zero_field_csv
        .ok_or_else(|| missing("files.saturation_zero_field_csv"))?;
    let field_path = files
        .saturation_field_csv
        .ok_or_else(|| missing("files.saturation_field_csv"))?;
    let zero = parse_pairs(&zero_path, "n_photons", "tan_delta")?;
    let field = parse_pairs(&field_path, "n_photons", "tan_delta")?;
    let fit = fit_saturation_loglog(&zero, &field)?;
    let mut out = CommandOutput::default();
    out.set("a_shared", fit.a_shared);
    out.set("b_zero", fit.b_zero);
    out.set("b_field", fit.b_field);
    out.set("nc_ratio", fit.nc_ratio);
    out.set("beta", fit.beta);
    out.set("curvature", fit.curvature);
    if let Some(SaturationWarning::RegimeViolation { curvature }) = fit.warning {
        out.warnings.push(format!(
            "log-log data is curved (coefficient {curvature:.3e}); points may not satisfy n ≫ n_c"
        ));
    }
    let mut curve = Curve::new(
        "fit",
        &["n_photons", "tan_delta", "field_on", "tan_delta_fit"],
    );
    for (set, points, b) in [(0.0, &zero, fit.b_zero), (1.0, &field, fit.b_field)] {
        for (n, t) in points {
            curve
                .rows
                .push(vec![*n, *t, set, 10f64.powf(b - fit.a_shared * n.log10())]);
        }
    }
    out.curves.push(curve);
    Ok(out)
}
