//! Closed-form results for the bipartite (zero-delay Ramsey) sequence.
//!
//! Conventions: all frequencies are angular (rad/s), ħ = 1, and the flip angle
//! of each of the two pulses is `α = Ωτ/2`. The rotating-frame Hamiltonian is
//! `δω·Sz + Ω(Sy cosθ + Sx sinθ)` with the first pulse at θ = 0 and the second
//! at θ = π/2, starting from `|0⟩ = |m = +1/2⟩`. With that choice the signal
//! term comes out negative, `p = 1/2 − φ/π` at α = 90°; [`phase_scaling_factor`]
//! is therefore signed and [`phase_scaling_magnitude`] gives |ε|.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{domain, Error, Result};
use crate::numeric::{bisect, first_sign_change};
use crate::spinlin::{eigenvalues, expectation, SpinMatrix, StateVector};

/// Parameters of a two-segment control sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BipartiteParams {
    /// Ω, rad/s
    pub rabi: f64,
    /// τ, s
    pub tau: f64,
    /// δω, rad/s
    pub detuning: f64,
    /// k ∈ [0, 1]: fraction of τ spent in the first segment
    pub timeshare: f64,
    /// θ, rad: phase of the second segment
    pub phase_jump: f64,
}

impl BipartiteParams {
    pub fn new(rabi: f64, tau: f64, detuning: f64, timeshare: f64, phase_jump: f64) -> Result<Self> {
        if !(rabi > 0.0 && rabi.is_finite()) {
            return Err(domain("rabi", rabi, "Ω > 0"));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(domain("tau", tau, "τ ≥ 0"));
        }
        if !(0.0..=1.0).contains(&timeshare) {
            return Err(domain("timeshare", timeshare, "k ∈ [0, 1]"));
        }
        if !detuning.is_finite() || !phase_jump.is_finite() {
            return Err(Error::Precondition("detuning and phase must be finite".into()));
        }
        Ok(BipartiteParams {
            rabi,
            tau,
            detuning,
            timeshare,
            phase_jump,
        })
    }

    /// Equal timeshare and a 90° phase jump.
    pub fn at_speed_limit(rabi: f64, tau: f64, detuning: f64) -> Result<Self> {
        Self::new(rabi, tau, detuning, 0.5, FRAC_PI_2)
    }

    pub fn flip_angle(&self) -> f64 {
        0.5 * self.rabi * self.tau
    }

    pub fn ramsey_phase(&self) -> f64 {
        self.detuning * self.tau
    }
}

/// Exact transition probability of the equal-timeshare, 90°-jump sequence for
/// arbitrary detuning.
pub fn exact_transition_probability(params: &BipartiteParams) -> Result<f64> {
    if (params.timeshare - 0.5).abs() > 1e-12 || (params.phase_jump - FRAC_PI_2).abs() > 1e-12 {
        return Err(Error::Precondition(
            "closed form holds only for k = 1/2 and θ = π/2".into(),
        ));
    }
    let w = params.rabi;
    let dw = params.detuning;
    let tau = params.tau;
    let w2 = w * w;
    let dw2 = dw * dw;
    let wt2 = w2 + dw2;
    let wt = wt2.sqrt();
    let x = tau * wt;
    let s4 = (0.25 * x).sin();
    let survival = (w2
        * (4.0 * dw2 * (0.5 * x).cos() + 8.0 * dw * wt * s4 * s4 * (0.5 * x).sin() + w2 * x.cos())
        + 4.0 * dw2 * dw2
        + 4.0 * dw2 * w2
        + 3.0 * w2 * w2)
        / (4.0 * wt2 * wt2);
    Ok((1.0 - survival).clamp(0.0, 1.0))
}

/// First-order (in δω/Ω) transition probability, `p₀ + εφ/2`.
pub fn first_order_probability(alpha: f64, phi: f64) -> f64 {
    bias_point(alpha) + 0.5 * phase_scaling_factor(alpha) * phi
}

/// p₀ = (1 − cos 2α)/4
pub fn bias_point(alpha: f64) -> f64 {
    let s = alpha.sin();
    0.5 * s * s
}

/// Signed ε(α) = sinα(cosα − 1)/α; zero at α = 0.
pub fn phase_scaling_factor(alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let h = (0.5 * alpha).sin();
    -2.0 * alpha.sin() * h * h / alpha
}

pub fn phase_scaling_magnitude(alpha: f64) -> f64 {
    phase_scaling_factor(alpha).abs()
}

/// Effective phase of a 90°-pulse Ramsey sequence whose pulses each last
/// `t_r`, with free evolution filling the rest of `tau`.
pub fn effective_phase_extended(detuning: f64, tau: f64, t_r: f64) -> Result<f64> {
    if !(t_r >= 0.0 && 2.0 * t_r <= tau * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "need 0 ≤ 2·t_R ≤ τ, got t_R = {t_r:e}, τ = {tau:e}"
        )));
    }
    let free = (tau - 2.0 * t_r).max(0.0);
    Ok(4.0 * detuning * t_r / PI + detuning * free)
}

/// η = ∂p/∂δω at δω → 0 for timeshare `k` and phase jump `theta`.
pub fn bipartite_sensitivity(rabi: f64, tau: f64, k: f64, theta: f64) -> f64 {
    let x = rabi * tau;
    theta.sin() * (((k - 1.0) * x).sin() - (k * x).sin() + x.sin()) / (2.0 * rabi)
}

/// Sensing kernel shape `sin[Ω(τ/2 − |t|)]` on `|t| < τ/2`.
pub fn kernel_value(t: f64, rabi: f64, tau: f64) -> f64 {
    let edge = 0.5 * tau - t.abs();
    if edge > 0.0 {
        (rabi * edge).sin()
    } else {
        0.0
    }
}

/// Constant `c` such that `δp(t) = c ∫ k(t' − t) δω(t') dt'` with `k` from
/// [`kernel_value`]. Fixed by requiring the DC response to match the
/// first-order probability; equals `−sin(α)/2`.
pub fn kernel_normalization(alpha: f64) -> f64 {
    -0.5 * alpha.sin()
}

/// |FT[k](ω)| with the unitary (1/√2π) convention.
pub fn transfer_value(omega: f64, rabi: f64, tau: f64) -> f64 {
    let omega = omega.abs();
    let a = 0.5 * rabi * tau;
    let eps = omega - rabi;
    let pref = (2.0 / PI).sqrt() * rabi;
    if eps.abs() < 1e-6 * rabi {
        // (cos a − cos(a + b))/ε with b = ετ/2, rewritten without cancellation.
        let b = 0.5 * eps * tau;
        let ratio = 0.5 * tau * (a.cos() * (0.5 * b).sin() * sinc(0.5 * b) + a.sin() * sinc(b));
        pref * ratio.abs() / (2.0 * rabi + eps).abs()
    } else {
        pref * (a.cos() - (0.5 * omega * tau).cos()).abs() / (rabi * rabi - omega * omega).abs()
    }
}

/// Sensitivity to a sinusoidal detuning of angular frequency ω: the amplitude
/// of δp per rad/s of detuning amplitude, `|c(α)|·√(2π)·K(ω)`. At ω = 0 this
/// is |η| of the equal-timeshare sequence.
pub fn signal_sensitivity(omega: f64, rabi: f64, tau: f64) -> f64 {
    let alpha = 0.5 * rabi * tau;
    kernel_normalization(alpha).abs() * (2.0 * PI).sqrt() * transfer_value(omega, rabi, tau)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn check_flip_angle(alpha: f64, max: f64, inclusive: bool) -> Result<()> {
    let ok = alpha > 0.0 && if inclusive { alpha <= max } else { alpha < max };
    if ok {
        Ok(())
    } else if inclusive {
        Err(domain("alpha", alpha, "α ∈ (0, π/2]"))
    } else {
        Err(domain("alpha", alpha, "α ∈ (0, π)"))
    }
}

/// Kernel FWHM, `τ(1 − arcsin(sinα/2)/α)`.
pub fn time_resolution_fwhm(tau: f64, alpha: f64) -> Result<f64> {
    check_flip_angle(alpha, FRAC_PI_2 * (1.0 + 1e-12), true)?;
    Ok(tau * (1.0 - (0.5 * alpha.sin()).asin() / alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiseBand {
    /// 20 % → 80 %
    Band20To80,
    /// 10 % → 90 %
    Band10To90,
}

impl RiseBand {
    fn low_fraction(self) -> f64 {
        match self {
            RiseBand::Band20To80 => 0.2,
            RiseBand::Band10To90 => 0.1,
        }
    }
}

/// Rise time of the step response (the running integral of the kernel)
/// between the band's low and high fractions:
/// `τ − (2/Ω)·arccos(2f·cos α + 1 − 2f)` with `f` the low fraction.
///
/// Evaluated through `arccos(1 − 2f(1 − cos α)) = 2 arcsin(√f · sin(α/2))`
/// to stay accurate at small α.
pub fn rise_time(tau: f64, rabi: f64, band: RiseBand) -> Result<f64> {
    let alpha = 0.5 * rabi * tau;
    check_flip_angle(alpha, FRAC_PI_2 * (1.0 + 1e-12), true)?;
    let f = band.low_fraction();
    let half = ((2.0 * f).sqrt() * (0.5 * alpha).sin()).asin();
    Ok(tau - 4.0 * half / rabi)
}

/// Width of the square kernel with the same peak and area, `τ·tan(α/2)/α`.
pub fn equivalent_duration(tau: f64, alpha: f64) -> Result<f64> {
    check_flip_angle(alpha, PI, false)?;
    Ok(tau * (0.5 * alpha).tan() / alpha)
}

/// First zero of the transfer function, `Ω(2π/α − 1)`.
pub fn bandwidth_first_root(rabi: f64, alpha: f64) -> f64 {
    rabi * (2.0 * PI / alpha - 1.0)
}

/// Frequency at which `K(ω) = K(0)/√2`, returned in rad/s.
pub fn bandwidth_3db(rabi: f64, alpha: f64) -> Result<f64> {
    check_flip_angle(alpha, FRAC_PI_2 * (1.0 + 1e-12), true)?;
    let one_minus_cos = 1.0 - alpha.cos();
    let f = |y: f64| {
        (y * y - 1.0) / SQRT_2 * one_minus_cos - (alpha.cos() - (y * alpha).cos()).abs()
    };
    let lo = 1.0 + 1e-9;
    let hi = 2.0 * PI / alpha;
    let (a, b) = first_sign_change(f, lo, hi, 4096).ok_or(Error::RootNotBracketed {
        lo,
        hi,
        f_lo: f(lo),
        f_hi: f(hi),
    })?;
    Ok(bisect(f, a, b, 1e-12)? * rabi)
}

/// Resolution and bandwidth figures of merit for one (Ω, τ) pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub rabi: f64,
    pub tau: f64,
    pub alpha: f64,
    pub t_fwhm: f64,
    pub t_20_80: f64,
    pub t_10_90: f64,
    pub t_square: f64,
    pub bw_first_root: f64,
    pub bw_3db: f64,
    /// signed ε
    pub epsilon: f64,
    pub p0: f64,
}

pub fn metrics(rabi: f64, tau: f64) -> Result<MetricsReport> {
    let alpha = 0.5 * rabi * tau;
    Ok(MetricsReport {
        rabi,
        tau,
        alpha,
        t_fwhm: time_resolution_fwhm(tau, alpha)?,
        t_20_80: rise_time(tau, rabi, RiseBand::Band20To80)?,
        t_10_90: rise_time(tau, rabi, RiseBand::Band10To90)?,
        t_square: equivalent_duration(tau, alpha)?,
        bw_first_root: bandwidth_first_root(rabi, alpha),
        bw_3db: bandwidth_3db(rabi, alpha)?,
        epsilon: phase_scaling_factor(alpha),
        p0: bias_point(alpha),
    })
}

/// State, Hamiltonian and ground-energy reference for the speed-limit bounds.
#[derive(Clone, Copy, Debug)]
pub struct QslInput {
    pub hamiltonian: SpinMatrix,
    pub state: StateVector,
    pub ground_energy: f64,
}

impl QslInput {
    pub fn new(hamiltonian: SpinMatrix, state: StateVector, ground_energy: f64) -> Result<Self> {
        if hamiltonian.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: hamiltonian.dim(),
                found: state.dim(),
            });
        }
        Ok(QslInput {
            hamiltonian,
            state,
            ground_energy,
        })
    }

    /// Uses the lowest eigenvalue of `hamiltonian` as the energy reference.
    pub fn with_ground_state_reference(hamiltonian: SpinMatrix, state: StateVector) -> Result<Self> {
        let e0 = eigenvalues(&hamiltonian)[0];
        Self::new(hamiltonian, state, e0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpeedLimit {
    Finite(f64),
    /// Vanishing energy spread: the state never becomes orthogonal.
    Unbounded,
}

impl SpeedLimit {
    pub fn seconds(self) -> f64 {
        match self {
            SpeedLimit::Finite(t) => t,
            SpeedLimit::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, SpeedLimit::Unbounded)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QslTimes {
    pub mandelstam_tamm: SpeedLimit,
    pub margolus_levitin: SpeedLimit,
}

/// Mandelstam–Tamm `(π/2)/ΔH` and Margolus–Levitin `(π/2)/(⟨H⟩ − E₀)`.
pub fn qsl_times(input: &QslInput) -> Result<QslTimes> {
    let h = &input.hamiltonian;
    let psi = &input.state;
    let mean = expectation(h, psi)?;
    // ΔH² = ‖(H − ⟨H⟩)ψ‖², which avoids the ⟨H²⟩ − ⟨H⟩² cancellation.
    let h_psi = h.apply(psi);
    let spread: f64 = h_psi
        .amplitudes()
        .iter()
        .zip(psi.amplitudes())
        .map(|(hp, p)| (hp - p * mean).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let tiny = 1e-13 * scale;
    let bound = |energy: f64| {
        if energy > tiny {
            SpeedLimit::Finite(FRAC_PI_2 / energy)
        } else {
            SpeedLimit::Unbounded
        }
    };
    Ok(QslTimes {
        mandelstam_tamm: bound(spread),
        margolus_levitin: bound(mean - input.ground_energy),
    })
}
