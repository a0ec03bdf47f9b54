use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2, PI, TAU};

use proptest::prelude::*;
use qsense_core::analytic::{
    equivalent_duration, kernel_normalization, kernel_value, rise_time, time_resolution_fwhm,
    transfer_value, bandwidth_first_root, RiseBand,
};
use qsense_core::error::Error;
use qsense_core::labframe::{Basis, NvModel, Protocol};
use qsense_core::numeric::linspace;
use qsense_core::response::*;

const RABI: f64 = TAU * 50e6;

fn tau_for(alpha: f64) -> f64 {
    2.0 * alpha / RABI
}

/// Closed-form kernel convolved with the unit-area Gaussian probe.
fn convolved_kernel(u: f64, tau: f64, fwhm: f64) -> f64 {
    let n = 20_000;
    let h = tau / n as f64;
    let sigma = fwhm / (8.0 * LN_2).sqrt();
    let norm = 1.0 / (sigma * TAU.sqrt());
    let mut acc = 0.0;
    for i in 0..=n {
        let s = -0.5 * tau + i as f64 * h;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let x = (s - u) / sigma;
        acc += w * kernel_value(s, RABI, tau) * norm * (-0.5 * x * x).exp();
    }
    acc * h / 3.0
}

fn rms_relative(a: &[f64], b: &[f64], peak: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (sq / a.len() as f64).sqrt() / peak
}

#[test]
fn rotating_kernel_matches_convolution_oracle_and_closed_form() {
    for deg in [22.5f64, 45.0, 67.0, 90.0] {
        let alpha = deg.to_radians();
        let tau = tau_for(alpha);
        let backend = RotatingFrameBackend::new(RABI, tau).unwrap();
        let fwhm = default_probe_fwhm(tau, RABI).unwrap();
        let grid = linspace(-0.6 * tau, 0.6 * tau, 61);
        let est = estimate_kernel(&backend, fwhm, &grid).unwrap();
        let oracle: Vec<f64> = grid.iter().map(|&u| convolved_kernel(u, tau, fwhm)).collect();
        let raw: Vec<f64> = grid.iter().map(|&u| kernel_value(u, RABI, tau)).collect();
        let peak = alpha.sin();
        let e_oracle = rms_relative(&est.values, &oracle, peak);
        let e_raw = rms_relative(&est.values, &raw, peak);
        assert!(e_oracle < 2e-3, "{deg}°: vs convolution {e_oracle}");
        assert!(e_raw < 0.02, "{deg}°: vs closed form {e_raw}");
        // DC consistency with the first-order sensitivity.
        let c = kernel_normalization(alpha).abs();
        assert!((est.normalization - c).abs() < 0.01 * c, "{deg}°: c = {}", est.normalization);
    }
}

#[test]
fn probe_outside_support_gives_no_signal() {
    let tau = tau_for(FRAC_PI_2);
    let backend = RotatingFrameBackend::new(RABI, tau).unwrap();
    let fwhm = default_probe_fwhm(tau, RABI).unwrap();
    let u = 0.5 * tau + 3.5 * fwhm;
    let est = estimate_kernel(&backend, fwhm, &[-u, u]).unwrap();
    for v in est.values {
        assert!(v.abs() < 1e-3, "{v}");
    }
}

#[test]
fn wide_probe_is_rejected() {
    let tau = tau_for(FRAC_PI_2);
    let backend = RotatingFrameBackend::new(RABI, tau).unwrap();
    let too_wide = time_resolution_fwhm(tau, FRAC_PI_2).unwrap() / 5.0;
    assert!(matches!(
        estimate_kernel(&backend, too_wide, &[0.0]),
        Err(Error::Precondition(_))
    ));
}

fn sampled_kernel(alpha: f64, n: usize) -> KernelEstimate {
    let tau = tau_for(alpha);
    let times = linspace(-0.55 * tau, 0.55 * tau, n);
    let values = times.iter().map(|&t| kernel_value(t, RABI, tau)).collect();
    KernelEstimate {
        times,
        values,
        tau,
        omega: RABI,
        normalization: 1.0,
        probe_fwhm: 0.0,
    }
}

#[test]
fn sampled_metrics_at_90_degrees() {
    let k = sampled_kernel(FRAC_PI_2, 1101);
    let step = k.times[1] - k.times[0];
    let m = numeric_metrics(&k).unwrap();
    assert!((m.t_fwhm - 2.0 / 3.0 * k.tau).abs() < step);
}

#[test]
fn sampled_metrics_match_closed_forms_at_45_degrees() {
    let alpha = FRAC_PI_4;
    let k = sampled_kernel(alpha, 2201);
    let step = k.times[1] - k.times[0];
    let tau = k.tau;
    let m = numeric_metrics(&k).unwrap();
    assert!((m.t_fwhm - time_resolution_fwhm(tau, alpha).unwrap()).abs() < step);
    assert!((m.t_20_80 - rise_time(tau, RABI, RiseBand::Band20To80).unwrap()).abs() < step);
    assert!((m.t_10_90 - rise_time(tau, RABI, RiseBand::Band10To90).unwrap()).abs() < step);
    assert!((m.t_square - equivalent_duration(tau, alpha).unwrap()).abs() < step);
}

#[test]
fn square_kernel_fwhm_equals_equivalent_duration() {
    // Edges fall halfway between samples so the interpolated width is exact.
    let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
    let values = times.iter().map(|&t| if (0.505..1.505).contains(&t) { 1.0 } else { 0.0 }).collect();
    let k = KernelEstimate {
        times,
        values,
        tau: 1.0,
        omega: 1.0,
        normalization: 1.0,
        probe_fwhm: 0.0,
    };
    let m = numeric_metrics(&k).unwrap();
    assert!((m.t_fwhm - 1.0).abs() < 1e-12, "{}", m.t_fwhm);
    assert!((m.t_square - 1.0).abs() < 1e-12, "{}", m.t_square);
}

#[test]
fn bimodal_kernel_is_ambiguous() {
    let times = linspace(-1.0, 1.0, 401);
    let values = times
        .iter()
        .map(|&t: &f64| (-((t - 0.5) / 0.1).powi(2)).exp() + (-((t + 0.5) / 0.1).powi(2)).exp())
        .collect();
    let k = KernelEstimate {
        times,
        values,
        tau: 2.0,
        omega: 1.0,
        normalization: 1.0,
        probe_fwhm: 0.0,
    };
    match numeric_metrics(&k) {
        Err(Error::AmbiguousPeak { candidates }) => {
            assert_eq!(candidates.len(), 2);
            assert!((candidates[0] + 0.5).abs() < 1e-9 && (candidates[1] - 0.5).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unresolved_peak_is_rejected() {
    let k = sampled_kernel(FRAC_PI_2, 12);
    assert!(matches!(numeric_metrics(&k), Err(Error::Precondition(_))));
}

#[test]
fn sine_fit_examples() {
    let w = 3.0;
    let samples: Vec<(f64, f64)> = (0..8)
        .map(|j| {
            let t = TAU / w * j as f64 / 8.0;
            (t, 0.7 * (w * t + 0.4).sin())
        })
        .collect();
    let fit = fit_sine_amplitude(&samples, w).unwrap();
    assert!((fit.amplitude - 0.7).abs() < 1e-12);
    assert!((fit.phase - 0.4).abs() < 1e-12);
    assert!(fit.residual < 1e-12);

    let zeros: Vec<(f64, f64)> = samples.iter().map(|&(t, _)| (t, 0.0)).collect();
    assert_eq!(fit_sine_amplitude(&zeros, w).unwrap().amplitude, 0.0);

    let same_phase: Vec<(f64, f64)> = (0..6).map(|j| (TAU / w * j as f64, 1.0)).collect();
    assert!(matches!(fit_sine_amplitude(&same_phase, w), Err(Error::RankDeficientFit(_))));
    assert!(matches!(fit_sine_amplitude(&samples[..3], w), Err(Error::RankDeficientFit(_))));
}

#[test]
fn bode_matches_normalized_transfer_function() {
    let tau = tau_for(FRAC_PI_2);
    let backend = RotatingFrameBackend::new(RABI, tau).unwrap();
    let grid = linspace(0.0, 3.0 * RABI, 25);
    let amp = 0.01 / (backend.gamma() * tau);
    let bode = bode_response(&backend, &grid, amp).unwrap();
    assert_eq!(bode.gains[0], 1.0);
    let k0 = transfer_value(0.0, RABI, tau);
    for (i, &w) in grid.iter().enumerate() {
        let expected = transfer_value(w, RABI, tau) / k0;
        assert!((bode.gains[i] - expected).abs() < 0.01 * expected.max(0.05), "ω = {w}: {} vs {expected}", bode.gains[i]);
        assert!(!bode.flagged[i]);
    }
    let root = bandwidth_first_root(RABI, FRAC_PI_2);
    let at_root = bode_response(&backend, &[root], amp).unwrap();
    assert!(at_root.gains[0] < 1e-2);
    let table = bode.to_table();
    assert_eq!(table.headers, ["omega_rad_s", "gain_norm", "chi_rad"]);
}

#[test]
fn kernel_table_header() {
    let k = sampled_kernel(FRAC_PI_2, 20);
    let t = k.to_table();
    assert_eq!(t.headers, ["t_s", "k_norm"]);
    assert_eq!(t.rows.len(), 20);
}

#[test]
fn lab_kernel_is_insensitive_to_small_tilt() {
    let tau = PI / RABI;
    let fwhm = default_probe_fwhm(tau, RABI).unwrap();
    let grid = linspace(-0.55 * tau, 0.55 * tau, 23);
    let run = |chi: f64| {
        let model = NvModel::with_rabi(0.01, RABI).unwrap().with_chi(chi).unwrap();
        let prot = Protocol::bipartite(tau, Basis::Ms0, Basis::Ms0).unwrap();
        estimate_kernel(&LabFrameBackend::new(model, prot), fwhm, &grid).unwrap()
    };
    let flat = run(0.0);
    let tilted = run(20f64.to_radians());
    let peak = flat.values.iter().copied().fold(0.0, f64::max);
    assert!(rms_relative(&flat.values, &tilted.values, peak) < 0.02);
    let raw: Vec<f64> = grid.iter().map(|&u| kernel_value(u, RABI, tau)).collect();
    assert!(rms_relative(&flat.values, &raw, 1.0) < 0.03);
}

#[test]
fn kernel_estimation_is_deterministic() {
    let tau = tau_for(1.0);
    let backend = RotatingFrameBackend::new(RABI, tau).unwrap();
    let fwhm = default_probe_fwhm(tau, RABI).unwrap();
    let grid = linspace(-0.5 * tau, 0.5 * tau, 9);
    let a = estimate_kernel(&backend, fwhm, &grid).unwrap();
    let b = estimate_kernel(&backend, fwhm, &grid).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn sine_fit_tolerates_small_perturbations(
        amp in 0.1..2.0f64,
        phase in -PI..PI,
        w in 0.5..5.0f64,
        noise in prop::collection::vec(-1e-6..1e-6f64, 8),
    ) {
        let samples: Vec<(f64, f64)> = (0..8)
            .map(|j| {
                let t = TAU / w * j as f64 / 8.0;
                (t, amp * (w * t + phase).sin() + noise[j])
            })
            .collect();
        let fit = fit_sine_amplitude(&samples, w).unwrap();
        prop_assert!((fit.amplitude - amp).abs() < 1e-5);
    }
}
