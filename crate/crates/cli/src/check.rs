//! Analytic cross-checks printed as a pass/fail table.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use qsense_core::analytic::{
    bandwidth_3db, bandwidth_first_root, equivalent_duration, exact_transition_probability,
    first_order_probability, qsl_times, rise_time, time_resolution_fwhm, BipartiteParams, QslInput, RiseBand,
};
use qsense_core::numeric::linspace;
use qsense_core::optimize::{finite_difference_sensitivity, scan_objective, scan_timeshare_phase};
use qsense_core::sequence::{make_speed_limit_sequence, transition_probability};
use qsense_core::spinlin::{hermitian_eigen, SpinMatrix, StateVector, C64};

use crate::CliError;

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

pub fn all_checks() -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for w in linspace((TAU * 1e6).ln(), (TAU * 1e8).ln(), 20).into_iter().map(f64::exp) {
        for x in linspace(1e-4f64.ln(), 0.0, 20).into_iter().map(f64::exp) {
            for j in 1..=20 {
                let tau = PI / w * j as f64 / 20.0;
                let exact = exact_transition_probability(&BipartiteParams::at_speed_limit(w, tau, x * w)?)?;
                let numeric = transition_probability(&make_speed_limit_sequence(w, tau, x * w)?);
                worst = worst.max((exact - numeric).abs());
            }
        }
    }
    out.push(check("exact probability vs propagator", worst <= 1e-10, format!("max |Δp| = {worst:.2e}")));

    let x = 1e-3;
    let mut worst: f64 = 0.0;
    for j in 1..=50 {
        let alpha = FRAC_PI_2 * j as f64 / 50.0;
        let tau = 2.0 * alpha;
        let exact = exact_transition_probability(&BipartiteParams::at_speed_limit(1.0, tau, x)?)?;
        worst = worst.max((first_order_probability(alpha, x * tau) - exact).abs() / (x * x));
    }
    out.push(check("first-order error ≤ 10 (δω/Ω)²", worst <= 10.0, format!("max err/(δω/Ω)² = {worst:.3}")));

    let tau = 1.0;
    let w = PI;
    let a = FRAC_PI_2;
    let metrics = [
        ("t_fwhm = 2τ/3", time_resolution_fwhm(tau, a)?, 2.0 / 3.0, 1e-9),
        ("t_20-80 ≈ 0.564τ", rise_time(tau, w, RiseBand::Band20To80)?, 0.564, 1e-9),
        ("t_10-90 ≈ 0.704τ", rise_time(tau, w, RiseBand::Band10To90)?, 0.704, 1e-9),
        ("t_□ = 2τ/π", equivalent_duration(tau, a)?, 2.0 / PI, 1e-9),
        ("Ω_BW = 3Ω", bandwidth_first_root(w, a) / w, 3.0, 1e-9),
        ("Ω_3dB ≈ 1.19Ω", bandwidth_3db(w, a)? / w, 1.19, 1e-2),
    ];
    for (name, got, want, tol) in metrics {
        let e = rel(got, want);
        out.push(check(name, e <= tol, format!("{got:.6} vs {want} (rel {e:.1e})")));
    }

    let (kg, tg) = (linspace(0.0, 1.0, 41), linspace(0.0, PI, 41));
    let mut worst: f64 = 0.0;
    let mut fd_worst: f64 = 0.0;
    for x in [0.5, 1.0, 1.5, 2.5, PI] {
        let o = scan_timeshare_phase(1.0, x, &kg, &tg)?;
        worst = worst.max((o.k - 0.5).abs()).max((o.theta - FRAC_PI_2).abs());
        let fd = scan_objective(|k, th| finite_difference_sensitivity(1.0, x, k, th, 1e-4), &kg, &tg)?;
        fd_worst = fd_worst.max((fd.k - o.k).abs()).max((fd.theta - o.theta).abs());
    }
    out.push(check("optimal timeshare and phase", worst <= 1e-6, format!("max offset {worst:.1e}")));
    out.push(check("finite-difference argmax agrees", fd_worst <= 1e-5, format!("max offset {fd_worst:.1e}")));

    let mut worst: f64 = 0.0;
    for i in 0..100 {
        // low-discrepancy sample of Hermitian matrices and relative phases
        let u = |k: usize| ((i * 7 + k) as f64 * 0.618_033_988_749_895).fract() * 2.0 - 1.0;
        let h = SpinMatrix::from_rows(&[
            &[C64::new(u(0), 0.0), C64::new(u(1) + 1.1, u(2))],
            &[C64::new(u(1) + 1.1, -u(2)), C64::new(u(3), 0.0)],
        ]);
        let (_, v) = hermitian_eigen(&h);
        // equal superposition of the eigenvectors reaches an orthogonal state
        let e = C64::from_polar(1.0, PI * u(4));
        let psi = StateVector::normalized(&[v.get(0, 0) + e * v.get(0, 1), v.get(1, 0) + e * v.get(1, 1)])?;
        let q = qsl_times(&QslInput::with_ground_state_reference(h, psi)?)?;
        worst = worst.max(rel(q.mandelstam_tamm.seconds(), q.margolus_levitin.seconds()));
    }
    out.push(check("two-level QSLs coincide", worst <= 1e-12, format!("max rel diff {worst:.1e}")));

    Ok(out)
}

/// Prints the table; fails if any check fails.
pub fn run_checks<W: Write>(w: &mut W) -> Result<(), CliError> {
    let checks = all_checks()?;
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    for c in &checks {
        writeln!(w, "{:4}  {:36}  {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail).map_err(io)?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    writeln!(w, "{} passed, {failed} failed", checks.len() - failed).map_err(io)?;
    if failed > 0 {
        Err(CliError::ChecksFailed(failed))
    } else {
        Ok(())
    }
}
