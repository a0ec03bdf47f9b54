use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};

use proptest::prelude::*;
use qsense_core::error::Error;
use qsense_core::labframe::*;
use qsense_core::sequence::make_speed_limit_sequence;
use qsense_core::spinlin::{matexp_antihermitian, spin_operators, Spin, StateVector};

fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

fn single_window(t: f64, prep: Basis, readout: Basis) -> Protocol {
    Protocol::new(
        vec![PulseWindow {
            start: 0.0,
            end: t,
            carrier_phase: 0.0,
        }],
        t,
        prep,
        readout,
    )
    .unwrap()
}

#[test]
fn static_hamiltonian_levels() {
    let m = NvModel::new(0.2, 0.0).unwrap();
    let h = hamiltonian_at(&m, &Stimulus::none(), true, 0.0, 1e-9);
    let g = GAMMA_E * 0.2;
    let d = ZERO_FIELD_SPLITTING;
    assert!(h.max_abs_diff(&qsense_core::spinlin::SpinMatrix::diagonal(&[d - g, 0.0, d + g])) < 1e-3);
    assert!((m.driven_transition() - (d + g)).abs() < 1e-3);
    assert!((m.carrier - m.driven_transition()).abs() < 1e-3);
}

#[test]
fn stimulus_axis_follows_chi() {
    let (sx, _, sz) = spin_operators(Spin::One);
    let b = 1e-3;
    let stim = Stimulus::constant(b);
    for (chi, op) in [(0.0, sz), (FRAC_PI_2, sx)] {
        let m = NvModel::new(0.3, 0.0).unwrap().with_chi(chi).unwrap();
        let dh = hamiltonian_at(&m, &stim, false, 0.0, 0.0) - hamiltonian_at(&m, &Stimulus::none(), false, 0.0, 0.0);
        let expected = op * (-GAMMA_E * b);
        assert!(dh.max_abs_diff(&expected) < 1e-6 * GAMMA_E * b, "χ = {chi}");
    }
}

#[test]
fn constant_hamiltonian_matches_single_exponential() {
    // Carrier at zero frequency makes the drive static.
    let m = NvModel::with_rabi(0.05, mhz(40.0)).unwrap().with_carrier(0.0).unwrap();
    let stim = Stimulus::constant(2e-4);
    let t1 = 3e-9;
    let prot = single_window(t1, Basis::Ms0, Basis::Ms0);
    let psi = StateVector::normalized(&[
        qsense_core::spinlin::C64::new(0.3, 0.1),
        qsense_core::spinlin::C64::new(0.8, 0.0),
        qsense_core::spinlin::C64::new(-0.2, 0.4),
    ])
    .unwrap();
    let dt = default_step(&m, &stim);
    let out = evolve(&m, &stim, &prot, 0.0, t1, dt, &psi).unwrap();
    let h = hamiltonian_at(&m, &stim, true, 0.0, 0.0);
    let exact = matexp_antihermitian(&h, t1).unwrap().apply(&psi);
    for i in 0..3 {
        assert!((out.amplitude(i) - exact.amplitude(i)).norm() < 1e-10);
    }
}

#[test]
fn resonant_pi_pulse_transfers_population() {
    let w = mhz(10.0);
    let m = NvModel::with_rabi(0.5, w).unwrap();
    let prot = single_window(PI / w, Basis::Ms0, Basis::MsMinus1);
    let p = run_protocol(&m, &Stimulus::none(), &prot).unwrap();
    assert!(p > 0.999, "{p}");
}

#[test]
fn midpoint_stepping_converges_at_second_order() {
    let w = mhz(20.0);
    let m = NvModel::with_rabi(0.1, w).unwrap();
    let stim = Stimulus::constant(m.b1 / (10.0 * SQRT_2));
    let prot = Protocol::bipartite(PI / w, Basis::Ms0, Basis::Ms0).unwrap();
    let dt = default_step(&m, &stim);
    let p: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .map(|f| run_protocol_with_step(&m, &stim, &prot, f * dt).unwrap())
        .collect();
    let d: Vec<f64> = p.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    for pair in d.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "{d:?}");
    }
    // Richardson: at the default step the error is below 1e-5; halving
    // from dt/4 moves the result by less than 1e-6.
    assert!(d[0] < 1e-5, "{d:?}");
    assert!(d[2] < 1e-6, "{d:?}");
}

#[test]
fn norm_drift_over_ten_million_steps() {
    let w = mhz(10.0);
    let m = NvModel::with_rabi(0.0, w).unwrap();
    let stim = Stimulus::sinusoid(1e-3, mhz(50.0), 0.2).unwrap();
    let dt = default_step(&m, &stim);
    let t1 = 1e7 * dt;
    let prot = single_window(t1, Basis::Ms0, Basis::Ms0);
    let out = evolve(&m, &stim, &prot, 0.0, t1, dt, &StateVector::basis(3, 1)).unwrap();
    assert!((out.norm() - 1.0).abs() < 1e-8, "{}", out.norm());
}

#[test]
fn oversized_step_names_the_binding_scale() {
    let m = NvModel::with_rabi(0.5, mhz(10.0)).unwrap();
    let stim = Stimulus::none();
    let (f_max, _) = max_frequency(&m, &stim);
    let prot = single_window(1e-9, Basis::Ms0, Basis::Ms0);
    let err = evolve(&m, &stim, &prot, 0.0, 1e-9, 1.0 / (40.0 * f_max), &StateVector::basis(3, 1)).unwrap_err();
    match err {
        Error::StepTooLarge { scale, .. } => assert_eq!(scale, "transition D + γe·B0"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.to_string().contains("transition D + γe·B0"));
}

#[test]
fn rabi_frequency_convention() {
    let w = mhz(10.0);
    let m = NvModel::new(0.5, SQRT_2 * w / GAMMA_E).unwrap();
    assert!((rabi_frequency(&m) - w).abs() < 1e-6 * w);
    assert_eq!(rabi_frequency(&NvModel::new(0.5, 0.0).unwrap()), 0.0);
}

#[test]
fn measured_rabi_period_matches() {
    let w = mhz(5.0);
    let m = NvModel::with_rabi(0.3, w).unwrap();
    let t1 = 2.6 * TAU / w;
    let prot = single_window(t1, Basis::Ms0, Basis::Ms0);
    let dt = default_step(&m, &Stimulus::none());
    let (_, trace) = evolve_traced(&m, &Stimulus::none(), &prot, 0.0, t1, dt, &StateVector::basis(3, 1), 200).unwrap();
    // Local maxima of P(−1), refined by a parabola through three samples.
    let p: Vec<f64> = trace.iter().map(|s| s.populations[2]).collect();
    let mut peaks = Vec::new();
    for i in 1..p.len() - 1 {
        if p[i] > p[i - 1] && p[i] >= p[i + 1] && p[i] > 0.9 {
            let denom = p[i - 1] - 2.0 * p[i] + p[i + 1];
            let shift = 0.5 * (p[i - 1] - p[i + 1]) / denom;
            let h = trace[i + 1].t - trace[i].t;
            peaks.push(trace[i].t + shift * h);
        }
    }
    assert!(peaks.len() >= 2, "{peaks:?}");
    let period = peaks[1] - peaks[0];
    assert!((period - TAU / w).abs() < 0.01 * TAU / w, "{period}");
}

fn signal(m: &NvModel, basis: Basis, amplitude: f64) -> f64 {
    let tau = PI / rabi_frequency(m);
    let prot = Protocol::bipartite(tau, basis, basis).unwrap();
    let plus = run_protocol(m, &Stimulus::constant(amplitude), &prot).unwrap();
    let minus = run_protocol(m, &Stimulus::constant(-amplitude), &prot).unwrap();
    0.5 * (plus - minus)
}

#[test]
fn no_stimulus_gives_bias_point() {
    let w = mhz(10.0);
    let m = NvModel::with_rabi(0.5, w).unwrap();
    let prot = Protocol::bipartite(PI / w, Basis::Ms0, Basis::Ms0).unwrap();
    let p = run_protocol(&m, &Stimulus::none(), &prot).unwrap();
    assert!((p - 0.5).abs() < 1e-3, "{p}");
}

#[test]
fn effective_phase_of_one_fifth() {
    let m = NvModel::with_rabi(0.5, mhz(10.0)).unwrap();
    let b = m.b1 / (10.0 * SQRT_2);
    let dp0 = signal(&m, Basis::Ms0, b);
    assert!((dp0 - 0.1).abs() < 0.005, "{dp0}");
    let flipped = signal(&m, Basis::Ms0, -b);
    assert!((flipped + dp0).abs() < 1e-12);
}

#[test]
fn sequence_mapping_matches_bipartite_protocol() {
    let seq = make_speed_limit_sequence(1.0, 2.0, 0.0).unwrap();
    let a = Protocol::from_sequence(&seq, Basis::Ms0, Basis::Ms0).unwrap();
    let b = Protocol::bipartite(2.0, Basis::Ms0, Basis::Ms0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn protocol_rejects_overlap() {
    let w = |s: f64, e: f64| PulseWindow {
        start: s,
        end: e,
        carrier_phase: 0.0,
    };
    assert!(Protocol::new(vec![w(0.0, 2.0), w(1.0, 3.0)], 3.0, Basis::Ms0, Basis::Ms0).is_err());
    assert!(Protocol::new(vec![w(0.0, 2.0)], 1.0, Basis::Ms0, Basis::Ms0).is_err());
}

#[test]
fn detuned_carrier_still_runs() {
    let w = mhz(10.0);
    let m = NvModel::with_rabi(0.5, w).unwrap();
    let m = m.with_carrier(m.carrier + mhz(1.0)).unwrap();
    let prot = Protocol::bipartite(PI / w, Basis::Ms0, Basis::Ms0).unwrap();
    assert!(run_protocol(&m, &Stimulus::none(), &prot).is_ok());
}

#[test]
fn invalid_inputs_rejected() {
    assert!(NvModel::new(-1.0, 0.0).is_err());
    assert!(NvModel::new(0.1, 0.0).unwrap().with_chi(2.0).is_err());
    assert!(Stimulus::gaussian(1.0, 0.0, 0.0).is_err());
    assert!(Stimulus::sinusoid(1.0, -1.0, 0.0).is_err());
    let m = NvModel::new(0.1, 0.0).unwrap();
    let prot = single_window(1e-9, Basis::Ms0, Basis::Ms0);
    assert!(evolve(&m, &Stimulus::none(), &prot, 0.0, 1e-9, 1e-13, &StateVector::basis(2, 0)).is_err());
}

#[test]
fn transition_splitting_saturates_at_2d() {
    let d = ZERO_FIELD_SPLITTING;
    let mut last = 0.0;
    for b0 in [0.0, 0.01, 0.05, 0.1, 0.2, 1.0, 10.0, 40.0] {
        let m = NvModel::new(b0, 0.0).unwrap();
        let split = m.transition_splitting();
        let expected = (2.0 * GAMMA_E * b0).min(2.0 * d);
        assert!((split - expected).abs() < 1e-9 * expected.max(1.0), "{b0}");
        let ratio = split / (2.0 * d);
        assert!(ratio >= last - 1e-12 && ratio <= 1.0 + 1e-12);
        last = ratio;
    }
    assert!((last - 1.0).abs() < 1e-12);
}

#[test]
fn batch_is_order_preserving_and_bit_identical() {
    let w = mhz(10.0);
    let m = NvModel::with_rabi(0.2, w).unwrap();
    let prot = Protocol::bipartite(PI / w, Basis::Ms0, Basis::Ms0).unwrap();
    let jobs: Vec<_> = (0..6)
        .map(|i| (m, Stimulus::constant((i as f64 - 2.5) * 1e-5), prot.clone()))
        .collect();
    let batch = run_batch(&jobs);
    for ((model, stim, p), got) in jobs.iter().zip(batch) {
        assert_eq!(got.unwrap().to_bits(), run_protocol(model, stim, p).unwrap().to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rwa_regime_matches_rotating_frame(
        f_mhz in 2.0..10.0f64,
        b0 in 0.1..0.6f64,
        frac in -1.0..1.0f64,
        minus in any::<bool>(),
    ) {
        let w = mhz(f_mhz);
        let m = NvModel::with_rabi(b0, w).unwrap();
        let basis = if minus { Basis::MsMinus1 } else { Basis::Ms0 };
        let prot = Protocol::bipartite(PI / w, basis, basis).unwrap();
        let stim = Stimulus::constant(frac * m.b1 / (10.0 * SQRT_2));
        let lab = run_protocol(&m, &stim, &prot).unwrap();
        let rwa = rotating_frame_prediction(&m, &stim, &prot).unwrap();
        prop_assert!((lab - rwa).abs() < 1e-3, "lab {} rwa {}", lab, rwa);
    }

    #[test]
    fn stimulus_reversal_flips_signal(f_mhz in 2.0..20.0f64, b0 in 0.1..1.0f64) {
        let m = NvModel::with_rabi(b0, mhz(f_mhz)).unwrap();
        let prot = Protocol::bipartite(PI / mhz(f_mhz), Basis::Ms0, Basis::Ms0).unwrap();
        let b = m.b1 / (10.0 * SQRT_2);
        let p0 = run_protocol(&m, &Stimulus::none(), &prot).unwrap();
        let up = run_protocol(&m, &Stimulus::constant(b), &prot).unwrap() - p0;
        let down = run_protocol(&m, &Stimulus::constant(-b), &prot).unwrap() - p0;
        prop_assert!(up > 0.0 && down < 0.0);
        prop_assert!((up + down).abs() < 0.05 * up.abs());
    }
}
