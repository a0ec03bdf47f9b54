//! Kernels and Bode plots extracted from simulated protocol runs.
//!
//! A backend runs the speed-limit sequence on `[0, τ]` under a stimulus field
//! and returns the transition probability. Kernel time `u` is measured from
//! the sequence center, so a probe centered at `u` sits at `u + τ/2`. Every
//! signal is symmetrized as `δp = [p(+B) − p(−B)]/2`, which removes the bias
//! point and all even-order terms.

use std::f64::consts::{LN_2, PI, TAU};

use rayon::prelude::*;

use crate::analytic::time_resolution_fwhm;
use crate::error::{Error, Result};
use crate::io::Table;
use crate::labframe::{rabi_frequency, run_protocol, NvModel, Protocol, Stimulus, GAMMA_E};
use crate::sequence::{make_speed_limit_sequence, propagate_modulated, ControlSequence};
use crate::spinlin::StateVector;

pub trait SensingBackend: Sync {
    /// τ, s
    fn sequence_duration(&self) -> f64;
    /// Ω, rad/s
    fn rabi(&self) -> f64;
    /// Detuning per unit field on the sensing transition, rad s⁻¹ T⁻¹.
    fn gamma(&self) -> f64;
    fn chi(&self) -> f64 {
        0.0
    }
    fn transition_probability(&self, stim: &Stimulus) -> Result<f64>;

    /// `[p(+B) − p(−B)]/2`
    fn signal(&self, stim: &Stimulus) -> Result<f64> {
        let plus = self.transition_probability(stim)?;
        let minus = self.transition_probability(&stim.scaled(-1.0))?;
        Ok(0.5 * (plus - minus))
    }
}

/// Two-level rotating-frame model: the speed-limit sequence with detuning
/// `−γ·B(t)` stepped at midpoints.
#[derive(Clone, Debug)]
pub struct RotatingFrameBackend {
    sequence: ControlSequence,
    rabi: f64,
    tau: f64,
    gamma: f64,
    max_step: f64,
}

impl RotatingFrameBackend {
    pub fn new(rabi: f64, tau: f64) -> Result<Self> {
        if !(rabi > 0.0 && tau > 0.0) {
            return Err(Error::Precondition(format!(
                "backend needs Ω > 0 and τ > 0, got Ω = {rabi:e}, τ = {tau:e}"
            )));
        }
        Ok(RotatingFrameBackend {
            sequence: make_speed_limit_sequence(rabi, tau, 0.0)?,
            rabi,
            tau,
            gamma: GAMMA_E,
            max_step: tau / 4000.0,
        })
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }
}

impl SensingBackend for RotatingFrameBackend {
    fn sequence_duration(&self) -> f64 {
        self.tau
    }
    fn rabi(&self) -> f64 {
        self.rabi
    }
    fn gamma(&self) -> f64 {
        self.gamma
    }
    fn transition_probability(&self, stim: &Stimulus) -> Result<f64> {
        let up = StateVector::basis(2, 0);
        let g = self.gamma;
        let out = propagate_modulated(&self.sequence, &up, |t| -g * stim.value(t), self.max_step)?;
        Ok(1.0 - out.population(0))
    }
}

/// Spin-1 laboratory-frame model running [`Protocol::bipartite`].
#[derive(Clone, Debug)]
pub struct LabFrameBackend {
    model: NvModel,
    protocol: Protocol,
}

impl LabFrameBackend {
    pub fn new(model: NvModel, protocol: Protocol) -> Self {
        LabFrameBackend { model, protocol }
    }

    pub fn model(&self) -> &NvModel {
        &self.model
    }
}

impl SensingBackend for LabFrameBackend {
    fn sequence_duration(&self) -> f64 {
        self.protocol.duration()
    }
    fn rabi(&self) -> f64 {
        rabi_frequency(&self.model)
    }
    fn gamma(&self) -> f64 {
        self.model.gamma_e
    }
    fn chi(&self) -> f64 {
        self.model.chi
    }
    fn transition_probability(&self, stim: &Stimulus) -> Result<f64> {
        run_protocol(&self.model, stim, &self.protocol)
    }
}

/// Area of the unit-height Gaussian with the given FWHM.
pub fn gaussian_area(fwhm: f64) -> f64 {
    fwhm * (PI / (4.0 * LN_2)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelEstimate {
    /// kernel time from the sequence center, s
    pub times: Vec<f64>,
    /// δp per unit (γ·probe area), divided by `normalization`
    pub values: Vec<f64>,
    pub tau: f64,
    /// Ω, rad/s
    pub omega: f64,
    /// Calibration constant c: DC response = c·γ·B·∫k dt.
    pub normalization: f64,
    pub probe_fwhm: f64,
}

impl KernelEstimate {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["t_s", "k_norm"]);
        for (&x, &y) in self.times.iter().zip(&self.values) {
            t.rows.push(vec![x, y]);
        }
        t
    }
}

/// Linear-response field amplitude giving a phase of about 0.01 rad over
/// `area` seconds.
fn probe_amplitude(gamma: f64, area: f64) -> f64 {
    0.01 / (gamma * area)
}

/// Calibrates c from a constant stimulus: `δp_DC = c·γ·B·2(1 − cos α)/Ω`.
pub fn dc_calibration<B: SensingBackend + ?Sized>(backend: &B) -> Result<f64> {
    let tau = backend.sequence_duration();
    let w = backend.rabi();
    let alpha = 0.5 * w * tau;
    let amp = probe_amplitude(backend.gamma(), tau);
    let dp = backend.signal(&Stimulus::constant(amp))?;
    let area = 2.0 * (1.0 - alpha.cos()) / w;
    Ok(dp / (backend.gamma() * amp * area))
}

/// Delay scan of a narrow Gaussian probe.
pub fn estimate_kernel<B: SensingBackend + ?Sized>(
    backend: &B,
    probe_fwhm: f64,
    t_grid: &[f64],
) -> Result<KernelEstimate> {
    let tau = backend.sequence_duration();
    let w = backend.rabi();
    let alpha = 0.5 * w * tau;
    let expected = time_resolution_fwhm(tau, alpha)?;
    if !(probe_fwhm > 0.0 && probe_fwhm <= expected / 10.0 * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!(
            "probe FWHM {probe_fwhm:e} s must be in (0, kernel FWHM/10 = {:e} s]",
            expected / 10.0
        )));
    }
    if t_grid.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::Precondition("kernel time grid must be strictly increasing".into()));
    }
    let c = dc_calibration(backend)?;
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Precondition("DC response vanishes; kernel cannot be normalized".into()));
    }
    let gamma = backend.gamma();
    let area = gaussian_area(probe_fwhm);
    let amp = probe_amplitude(gamma, area);
    let values = t_grid
        .par_iter()
        .map(|&u| {
            let probe = Stimulus::gaussian(amp, u + 0.5 * tau, probe_fwhm)?;
            Ok(backend.signal(&probe)? / (gamma * amp * area * c))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(KernelEstimate {
        times: t_grid.to_vec(),
        values,
        tau,
        omega: w,
        normalization: c,
        probe_fwhm,
    })
}

/// Default probe width: kernel FWHM / 12.
pub fn default_probe_fwhm(tau: f64, rabi: f64) -> Result<f64> {
    Ok(time_resolution_fwhm(tau, 0.5 * rabi * tau)? / 12.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodeSeries {
    /// rad/s
    pub frequencies: Vec<f64>,
    /// |A(ω)| / |δp_DC|
    pub gains: Vec<f64>,
    pub chi: f64,
    /// RMS fit residual relative to |δp_DC|
    pub residuals: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl BodeSeries {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["omega_rad_s", "gain_norm", "chi_rad"]);
        for (&w, &g) in self.frequencies.iter().zip(&self.gains) {
            t.rows.push(vec![w, g, self.chi]);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodeOptions {
    /// delays per period
    pub samples_per_period: usize,
    /// relative residual above which a point is flagged
    pub residual_threshold: f64,
}

impl Default for BodeOptions {
    fn default() -> Self {
        BodeOptions {
            samples_per_period: 8,
            residual_threshold: 1e-2,
        }
    }
}

/// Sine-tone delay sweep. `amp` is the field amplitude (T).
pub fn bode_response<B: SensingBackend + ?Sized>(
    backend: &B,
    omega_grid: &[f64],
    amp: f64,
) -> Result<BodeSeries> {
    bode_response_with(backend, omega_grid, amp, &BodeOptions::default())
}

pub fn bode_response_with<B: SensingBackend + ?Sized>(
    backend: &B,
    omega_grid: &[f64],
    amp: f64,
    opts: &BodeOptions,
) -> Result<BodeSeries> {
    if omega_grid.windows(2).any(|p| !(p[1] > p[0])) || omega_grid.iter().any(|&w| w < 0.0) {
        return Err(Error::Precondition(
            "Bode frequency grid must be non-negative and strictly increasing".into(),
        ));
    }
    let m = opts.samples_per_period.max(4);
    let dc = backend.signal(&Stimulus::constant(amp))?;
    if dc == 0.0 {
        return Err(Error::Precondition("DC response vanishes; gains cannot be normalized".into()));
    }
    // Flatten (ω, delay) pairs so the whole sweep runs as one parallel batch.
    let jobs: Vec<(usize, f64, f64)> = omega_grid
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .flat_map(|(i, &w)| (0..m).map(move |j| (i, w, TAU / w * j as f64 / m as f64)))
        .collect();
    let outputs = jobs
        .par_iter()
        .map(|&(_, w, d)| backend.signal(&Stimulus::sinusoid(amp, w, -w * d)?))
        .collect::<Result<Vec<f64>>>()?;

    let mut gains = Vec::with_capacity(omega_grid.len());
    let mut residuals = Vec::with_capacity(omega_grid.len());
    let mut flagged = Vec::with_capacity(omega_grid.len());
    let mut cursor = 0;
    for &w in omega_grid {
        if w == 0.0 {
            gains.push(1.0);
            residuals.push(0.0);
            flagged.push(false);
            continue;
        }
        let samples: Vec<(f64, f64)> = (0..m)
            .map(|j| (jobs[cursor + j].2, outputs[cursor + j]))
            .collect();
        cursor += m;
        let fit = fit_sine_amplitude(&samples, w)?;
        let rel = fit.residual / dc.abs();
        if rel > opts.residual_threshold {
            log::warn!("Bode point ω = {w:.6e} rad/s has fit residual {rel:.3e} of DC");
        }
        gains.push(fit.amplitude / dc.abs());
        residuals.push(rel);
        flagged.push(rel > opts.residual_threshold);
    }
    Ok(BodeSeries {
        frequencies: omega_grid.to_vec(),
        gains,
        chi: backend.chi(),
        residuals,
        flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SineFit {
    pub amplitude: f64,
    pub phase: f64,
    /// RMS of the residuals
    pub residual: f64,
}

/// Least squares `y ≈ a·sin(ωt) + b·cos(ωt)`; amplitude √(a² + b²) and
/// phase atan2(b, a), so `y ≈ A·sin(ωt + φ)`.
pub fn fit_sine_amplitude(samples: &[(f64, f64)], omega: f64) -> Result<SineFit> {
    if samples.len() < 4 {
        return Err(Error::RankDeficientFit(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(t, y) in samples {
        let (s, c) = (omega * t).sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        ys += y * s;
        yc += y * c;
    }
    let det = ss * cc - sc * sc;
    if !(det > 1e-10 * (ss + cc) * (ss + cc)) {
        return Err(Error::RankDeficientFit(format!(
            "sin/cos columns are collinear (det = {det:e})"
        )));
    }
    let a = (cc * ys - sc * yc) / det;
    let b = (ss * yc - sc * ys) / det;
    let sq: f64 = samples
        .iter()
        .map(|&(t, y)| {
            let (s, c) = (omega * t).sin_cos();
            (y - a * s - b * c).powi(2)
        })
        .sum();
    Ok(SineFit {
        amplitude: a.hypot(b),
        phase: b.atan2(a),
        residual: (sq / samples.len() as f64).sqrt(),
    })
}

/// Time-domain metrics of a sampled kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledMetrics {
    pub t_fwhm: f64,
    pub t_20_80: f64,
    pub t_10_90: f64,
    pub t_square: f64,
}

/// FWHM from half-maximum crossings, rise times from the cumulative
/// (trapezoid) step response, equivalent duration as area over peak. All
/// crossings are linearly interpolated.
pub fn numeric_metrics(kernel: &KernelEstimate) -> Result<SampledMetrics> {
    let t = &kernel.times;
    let k = &kernel.values;
    if t.len() != k.len() || t.len() < 3 {
        return Err(Error::Precondition("kernel needs matching times and ≥ 3 samples".into()));
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("kernel has non-finite values".into()));
    }
    let peak = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * peak;
    let above: Vec<bool> = k.iter().map(|&v| v >= half).collect();
    let count = above.iter().filter(|&&a| a).count();
    if count < 10 {
        return Err(Error::Precondition(format!(
            "peak not resolved: {count} samples above half maximum, need ≥ 10"
        )));
    }
    // Connected regions above half maximum; more than one is ambiguous.
    let mut regions: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < k.len() {
        if above[i] {
            let start = i;
            while i < k.len() && above[i] {
                i += 1;
            }
            regions.push((start, i - 1));
        } else {
            i += 1;
        }
    }
    if regions.len() > 1 {
        let candidates = regions
            .iter()
            .map(|&(a, b)| {
                let j = (a..=b).max_by(|&x, &y| k[x].total_cmp(&k[y])).unwrap_or(a);
                t[j]
            })
            .collect();
        return Err(Error::AmbiguousPeak { candidates });
    }
    let (lo, hi) = regions[0];
    let cross = |i0: usize, i1: usize, level: f64, y: &[f64]| -> f64 {
        let (y0, y1) = (y[i0], y[i1]);
        if y1 == y0 {
            return 0.5 * (t[i0] + t[i1]);
        }
        t[i0] + (level - y0) / (y1 - y0) * (t[i1] - t[i0])
    };
    let left = if lo == 0 { t[0] } else { cross(lo - 1, lo, half, k) };
    let right = if hi == k.len() - 1 {
        t[hi]
    } else {
        cross(hi, hi + 1, half, k)
    };

    let mut cumulative = vec![0.0; k.len()];
    for j in 1..k.len() {
        cumulative[j] = cumulative[j - 1] + 0.5 * (k[j] + k[j - 1]) * (t[j] - t[j - 1]);
    }
    let area = cumulative[k.len() - 1];
    let step: Vec<f64> = cumulative.iter().map(|c| c / area).collect();
    let first_crossing = |level: f64| -> f64 {
        match step.iter().position(|&s| s >= level) {
            Some(0) => t[0],
            Some(j) => cross(j - 1, j, level, &step),
            None => t[t.len() - 1],
        }
    };
    let rise = |f: f64| first_crossing(1.0 - f) - first_crossing(f);
    Ok(SampledMetrics {
        t_fwhm: right - left,
        t_20_80: rise(0.2),
        t_10_90: rise(0.1),
        t_square: area / peak,
    })
}
