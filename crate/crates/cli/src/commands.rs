use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use qsense_core::analytic::{
    effective_phase_extended, kernel_value, metrics, phase_scaling_magnitude, qsl_times, transfer_value,
    QslInput,
};
use qsense_core::io::Table;
use qsense_core::labframe::{
    run_batch, Basis, NvModel, Protocol, Stimulus, GAMMA_E, ZERO_FIELD_SPLITTING,
};
use qsense_core::numeric::linspace;
use qsense_core::optimize::{optimal_duration_in, sensitivity_surface, tau_limit};
use qsense_core::response::{
    bode_response, default_probe_fwhm, estimate_kernel, LabFrameBackend, RotatingFrameBackend,
    SensingBackend,
};
use qsense_core::spinlin::{spin_operators, Spin, StateVector};

use crate::config::{positive, Command, RunConfig};
use crate::units::Quantity;
use crate::CliError;

pub const OUT_DIR_ENV: &str = "QSENSE_OUT_DIR";

const DEFAULT_RABI: f64 = TAU * 10e6;
const FIG3_ALPHAS_DEG: [f64; 4] = [22.5, 45.0, 67.0, 90.0];

type Outputs = Vec<(PathBuf, Table)>;

/// Runs the configured command and writes its CSV files.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let command = cfg
        .command
        .ok_or_else(|| CliError::Config("no command given".into()))?;
    let base = output_base(cfg, command);
    let outputs = match command {
        Command::Metrics => metrics_cmd(cfg, &base)?,
        Command::Kernel => kernel_cmd(cfg, &base)?,
        Command::Bode => bode_cmd(cfg, &base)?,
        Command::Fig2 => fig2(cfg, &base)?,
        Command::Fig3b => fig3b(cfg, &base)?,
        Command::Fig3c => fig3c(cfg, &base)?,
        Command::Fig3d => fig3d(cfg, &base)?,
        Command::Fig4d => fig4d(cfg, &base)?,
        Command::Offaxis => offaxis(cfg, &base)?,
        Command::Optimal => optimal(cfg, &base)?,
        Command::Qsl => qsl(cfg, &base)?,
    };
    let mut written = Vec::with_capacity(outputs.len());
    for (path, table) in outputs {
        table.write_file(&path)?;
        written.push(path);
    }
    Ok(written)
}

fn output_base(cfg: &RunConfig, command: Command) -> PathBuf {
    let name = format!("{}.csv", command.name());
    match &cfg.output_path {
        Some(p) if p.is_dir() => p.join(name),
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(name),
    }
}

/// `dir/stem.csv` → `dir/stem_<suffix>.csv`
pub fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn metrics_cmd(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let r = cfg.rotation()?;
    let m = metrics(r.rabi, r.tau)?;
    let mut t = Table::new([
        "rabi_rad_s",
        "tau_s",
        "alpha_rad",
        "t_fwhm_s",
        "t_20_80_s",
        "t_10_90_s",
        "t_square_s",
        "bw_first_root_rad_s",
        "bw_3db_rad_s",
        "epsilon",
        "p0",
    ]);
    t.push(vec![
        m.rabi, m.tau, m.alpha, m.t_fwhm, m.t_20_80, m.t_10_90, m.t_square, m.bw_first_root, m.bw_3db,
        m.epsilon, m.p0,
    ])?;
    Ok(vec![(base.to_path_buf(), t)])
}

fn parse_basis(cfg: &RunConfig) -> Result<Basis, CliError> {
    match cfg.text("basis").unwrap_or("ms0") {
        "ms0" | "0" => Ok(Basis::Ms0),
        "ms-1" | "-1" => Ok(Basis::MsMinus1),
        other => Err(CliError::Config(format!("basis: expected ms0 or ms-1, got {other:?}"))),
    }
}

fn lab_model(cfg: &RunConfig, rabi: f64, b0: f64) -> Result<NvModel, CliError> {
    let chi = cfg.quantity_or("chi", Quantity::Angle, 0.0)?;
    Ok(NvModel::with_rabi(positive("b0", b0)?, rabi)?.with_chi(chi)?)
}

fn backend(cfg: &RunConfig, rabi: f64, tau: f64) -> Result<Box<dyn SensingBackend>, CliError> {
    match cfg.text("backend").unwrap_or("rotating") {
        "rotating" => {
            if cfg.text("chi").is_some() {
                return Err(CliError::Config("chi: only the lab backend models tilted stimuli".into()));
            }
            Ok(Box::new(RotatingFrameBackend::new(rabi, tau)?))
        }
        "lab" => {
            let b0 = cfg.require("b0", Quantity::Field)?;
            let basis = parse_basis(cfg)?;
            let protocol = Protocol::bipartite(tau, basis, basis)?;
            Ok(Box::new(LabFrameBackend::new(lab_model(cfg, rabi, b0)?, protocol)))
        }
        other => Err(CliError::Config(format!("backend: expected rotating or lab, got {other:?}"))),
    }
}

fn kernel_grid(tau: f64, n: usize) -> Vec<f64> {
    linspace(-0.6 * tau, 0.6 * tau, n)
}

fn kernel_cmd(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let r = cfg.rotation()?;
    let b = backend(cfg, r.rabi, r.tau)?;
    let fwhm = match cfg.quantity("probe_fwhm", Quantity::Time)? {
        Some(f) => positive("probe_fwhm", f)?,
        None => default_probe_fwhm(r.tau, r.rabi)?,
    };
    let est = estimate_kernel(b.as_ref(), fwhm, &kernel_grid(r.tau, cfg.count("points", 121)?))?;
    Ok(vec![(base.to_path_buf(), est.to_table())])
}

/// Sine amplitude giving a small phase pick-up of 0.01 rad over τ.
fn bode_amplitude(gamma: f64, tau: f64) -> f64 {
    0.01 / (gamma * tau)
}

fn bode_cmd(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let r = cfg.rotation()?;
    let b = backend(cfg, r.rabi, r.tau)?;
    let w_max = positive("omega_max", cfg.quantity_or("omega_max", Quantity::Frequency, 4.0 * r.rabi)?)?;
    let grid = linspace(0.0, w_max, cfg.count("points", 41)?);
    let series = bode_response(b.as_ref(), &grid, bode_amplitude(b.gamma(), r.tau))?;
    Ok(vec![(base.to_path_buf(), series.to_table())])
}

fn fig2(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(DEFAULT_RABI)?;
    let t_r = PI / (2.0 * rabi);
    let n = cfg.count("points", 200)?;
    let tau_max = 10.0 * t_r;
    let mut t = Table::new(["tau_s", "tau_over_2tr", "phi_ratio", "branch"]);
    for j in 1..=n {
        let tau = tau_max * j as f64 / n as f64;
        if tau <= 2.0 * t_r {
            t.push(vec![tau, tau / (2.0 * t_r), phase_scaling_magnitude(0.5 * rabi * tau), 0.0])?;
        }
        if tau >= 2.0 * t_r {
            t.push(vec![tau, tau / (2.0 * t_r), effective_phase_extended(1.0, tau, t_r)? / tau, 1.0])?;
        }
    }
    // both branches at the speed limit itself
    if t.rows.iter().all(|r| r[1] != 1.0) {
        let tau = 2.0 * t_r;
        t.push(vec![tau, 1.0, phase_scaling_magnitude(0.5 * rabi * tau), 0.0])?;
        t.push(vec![tau, 1.0, effective_phase_extended(1.0, tau, t_r)? / tau, 1.0])?;
        t.rows.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[3].total_cmp(&b[3])));
    }
    Ok(vec![(base.to_path_buf(), t)])
}

fn fig3b(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(DEFAULT_RABI)?;
    let n = cfg.count("points", 121)?;
    let mut t = Table::new(["alpha_rad", "t_s", "t_over_tau", "k_norm", "k_closed_form"]);
    for deg in FIG3_ALPHAS_DEG {
        let alpha = deg.to_radians();
        let tau = 2.0 * alpha / rabi;
        let b = backend(cfg, rabi, tau)?;
        let est = estimate_kernel(b.as_ref(), default_probe_fwhm(tau, rabi)?, &kernel_grid(tau, n))?;
        for (&time, &k) in est.times.iter().zip(&est.values) {
            t.push(vec![alpha, time, time / tau, k, kernel_value(time, rabi, tau)])?;
        }
    }
    Ok(vec![(base.to_path_buf(), t)])
}

fn fig3c(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(DEFAULT_RABI)?;
    let w_max = positive("omega_max", cfg.quantity_or("omega_max", Quantity::Frequency, 4.0 * rabi)?)?;
    let grid = linspace(0.0, w_max, cfg.count("points", 81)?);
    let mut t = Table::new(["alpha_rad", "omega_rad_s", "omega_over_rabi", "gain_norm", "gain_closed_form"]);
    for deg in FIG3_ALPHAS_DEG {
        let alpha = deg.to_radians();
        let tau = 2.0 * alpha / rabi;
        let b = backend(cfg, rabi, tau)?;
        let series = bode_response(b.as_ref(), &grid, bode_amplitude(b.gamma(), tau))?;
        let k0 = transfer_value(0.0, rabi, tau);
        for (&w, &g) in series.frequencies.iter().zip(&series.gains) {
            t.push(vec![alpha, w, w / rabi, g, transfer_value(w, rabi, tau) / k0])?;
        }
    }
    Ok(vec![(base.to_path_buf(), t)])
}

fn fig3d(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(DEFAULT_RABI)?;
    let w_max = positive("omega_max", cfg.quantity_or("omega_max", Quantity::Frequency, 4.0 * rabi)?)?;
    let omegas = linspace(0.0, w_max, cfg.count("points", 81)?);
    let n_tau = cfg.count("tau_points", 200)?;
    let limit = tau_limit(rabi, cfg.extended);
    let taus: Vec<f64> = (1..=n_tau).map(|j| limit * j as f64 / n_tau as f64).collect();
    let s = sensitivity_surface(rabi, &omegas, &taus, cfg.extended)?;
    Ok(vec![
        (base.to_path_buf(), s.to_table()),
        (sibling(base, "ridge"), s.ridge_table()),
    ])
}

fn fig4d(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let default_b0 = if cfg.expensive { 40.0 } else { 10.0 };
    let b0 = positive("b0", cfg.quantity_or("b0", Quantity::Field, default_b0)?)?;
    let lo = positive("rabi_min", cfg.quantity_or("rabi_min", Quantity::Frequency, TAU * 10e6)?)?;
    let hi = positive("rabi_max", cfg.quantity_or("rabi_max", Quantity::Frequency, TAU * 10e9)?)?;
    if hi <= lo {
        return Err(CliError::Config("rabi_max must exceed rabi_min".into()));
    }
    let n = cfg.count("points", 13)?;
    let rabis: Vec<f64> = linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect();
    log::info!("fig4d: B0 = {b0} T, {n} Rabi frequencies");
    let bases = [(Basis::Ms0, 0.0), (Basis::MsMinus1, -1.0)];
    let mut jobs = Vec::new();
    for &rabi in &rabis {
        let model = NvModel::with_rabi(b0, rabi)?;
        let tau = PI / rabi;
        // B_stim = B1/(10√2) keeps the phase pick-up fixed
        let amp = model.b1 / (10.0 * 2f64.sqrt());
        for &(basis, _) in &bases {
            let protocol = Protocol::bipartite(tau, basis, basis)?;
            for s in [0.0, 1.0, -1.0] {
                jobs.push((model, Stimulus::constant(s * amp), protocol.clone()));
            }
        }
    }
    let p = run_batch(&jobs).into_iter().collect::<Result<Vec<f64>, _>>()?;
    let mut t = Table::new(["b0_t", "rabi_rad_s", "rabi_over_d", "basis_ms", "dp_plus", "dp_minus"]);
    for (i, &rabi) in rabis.iter().enumerate() {
        for (b, &(_, ms)) in bases.iter().enumerate() {
            let k = 3 * (2 * i + b);
            t.push(vec![b0, rabi, rabi / ZERO_FIELD_SPLITTING, ms, p[k + 1] - p[k], p[k + 2] - p[k]])?;
        }
    }
    Ok(vec![(base.to_path_buf(), t)])
}

fn offaxis(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(TAU * 50e6)?;
    let b0 = positive("b0", cfg.quantity_or("b0", Quantity::Field, 0.01)?)?;
    let tau = PI / rabi;
    let n = cfg.count("points", 31)?;
    let w_max = positive("omega_max", cfg.quantity_or("omega_max", Quantity::Frequency, 3.0 * rabi)?)?;
    let protocol = Protocol::bipartite(tau, Basis::Ms0, Basis::Ms0)?;
    let amp = bode_amplitude(GAMMA_E, tau);
    let sweep = |chi_deg: f64, grid: &[f64]| -> Result<Table, CliError> {
        let model = NvModel::with_rabi(b0, rabi)?.with_chi(chi_deg.to_radians())?;
        Ok(bode_response(&LabFrameBackend::new(model, protocol.clone()), grid, amp)?.to_table())
    };
    let grid = linspace(0.0, w_max, n);
    let mut near = Table::new(["omega_rad_s", "gain_norm", "chi_rad"]);
    for chi in [0.0, 20.0, 45.0] {
        near.rows.extend(sweep(chi, &grid)?.rows);
    }
    // the tilted component resonates with the driven transition
    let w0 = NvModel::with_rabi(b0, rabi)?.driven_transition();
    let wide = sweep(45.0, &linspace(0.0, 1.5 * w0, 61))?;
    Ok(vec![(base.to_path_buf(), near), (sibling(base, "wide"), wide)])
}

fn optimal(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(DEFAULT_RABI)?;
    let omegas = match cfg.quantity("omega", Quantity::Frequency)? {
        Some(w) => vec![w],
        None => {
            let w_max = positive("omega_max", cfg.quantity_or("omega_max", Quantity::Frequency, 4.0 * rabi)?)?;
            linspace(0.0, w_max, cfg.count("points", 41)?)
        }
    };
    let limit = tau_limit(rabi, cfg.extended);
    let mut t = Table::new(["omega_rad_s", "tau_opt_s", "alpha_opt_rad", "eta", "low_confidence"]);
    for w in omegas {
        let o = optimal_duration_in(w, rabi, limit, 512)?;
        t.push(vec![w, o.tau, 0.5 * rabi * o.tau, o.value, f64::from(u8::from(o.low_confidence))])?;
    }
    Ok(vec![(base.to_path_buf(), t)])
}

fn qsl(cfg: &RunConfig, base: &Path) -> Result<Outputs, CliError> {
    let rabi = cfg.rabi_or(DEFAULT_RABI)?;
    let (_, sy, _) = spin_operators(Spin::Half);
    let h = sy.scale(rabi.into());
    let input = QslInput::with_ground_state_reference(h, StateVector::basis(2, 0))?;
    let q = qsl_times(&input)?;
    let mut t = Table::new(["rabi_rad_s", "t_mt_s", "t_ml_s", "tau_bipartite_s"]);
    t.push(vec![rabi, q.mandelstam_tamm.seconds(), q.margolus_levitin.seconds(), PI / rabi])?;
    Ok(vec![(base.to_path_buf(), t)])
}
