//! Laboratory-frame simulation of the NV spin-1 ground state.
//!
//! States are ordered `|+1⟩, |0⟩, |−1⟩` as in
//! [`spin_operators`](crate::spinlin::spin_operators). The
//! Hamiltonian (angular units) is
//!
//! `H(t) = D·Sz² − γe·(B_z(t)·Sz + B_x(t)·Sx)`
//!
//! with `B_z = B0 + B_stim(t)·cosχ` and `B_x = B1·m(t)·[pulse on] + B_stim(t)·sinχ`,
//! `m(t) = cos(ω_c·t + phase)`. With this sign the m_S = −1 level sits at
//! `D + γe·B0` and the default carrier drives the 0 ↔ −1 transition there.
//!
//! Time stepping uses the exponential of the Hamiltonian sampled at each step
//! midpoint. The Hamiltonian is real symmetric, so each step is a 3×3 real
//! Jacobi diagonalization followed by phase factors.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sequence::{transition_probability, ControlSequence, PulseSegment};
use crate::spinlin::{SpinMatrix, StateVector, C64};

/// γe = 2π·28.0345 GHz/T, rad s⁻¹ T⁻¹
pub const GAMMA_E: f64 = TAU * 28.0345e9;
/// D = 2π·2.87 GHz, rad/s
pub const ZERO_FIELD_SPLITTING: f64 = TAU * 2.87e9;

/// Carrier phase added in a pulse window per radian of rotating-frame phase.
/// A rotating-frame axis at phase θ maps to a carrier phase of +θ.
pub const CARRIER_PHASE_PER_ROTATING_PHASE: f64 = 1.0;

const IDX_PLUS1: usize = 0;
const IDX_0: usize = 1;
const IDX_MINUS1: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NvModel {
    /// zero-field splitting, rad/s
    pub d: f64,
    /// rad s⁻¹ T⁻¹
    pub gamma_e: f64,
    /// axial bias, T
    pub b0: f64,
    /// drive amplitude, T
    pub b1: f64,
    /// carrier angular frequency, rad/s
    pub carrier: f64,
    /// stimulus tilt from the quantization axis, rad
    pub chi: f64,
}

impl NvModel {
    /// Resonant carrier, χ = 0, NV constants.
    pub fn new(b0: f64, b1: f64) -> Result<Self> {
        let carrier = ZERO_FIELD_SPLITTING + GAMMA_E * b0;
        NvModel {
            d: ZERO_FIELD_SPLITTING,
            gamma_e: GAMMA_E,
            b0,
            b1,
            carrier,
            chi: 0.0,
        }
        .validated()
    }

    /// Drive amplitude chosen so that the 0 ↔ −1 Rabi frequency is `rabi`.
    pub fn with_rabi(b0: f64, rabi: f64) -> Result<Self> {
        Self::new(b0, SQRT_2 * rabi / GAMMA_E)
    }

    pub fn with_chi(mut self, chi: f64) -> Result<Self> {
        self.chi = chi;
        self.validated()
    }

    pub fn with_carrier(mut self, carrier: f64) -> Result<Self> {
        self.carrier = carrier;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        let ok = |x: f64| x.is_finite();
        if !(self.d > 0.0 && ok(self.d)) {
            return Err(crate::error::domain("D", self.d, "D > 0"));
        }
        if !(self.gamma_e > 0.0 && ok(self.gamma_e)) {
            return Err(crate::error::domain("gamma_e", self.gamma_e, "γe > 0"));
        }
        if !(self.b0 >= 0.0 && ok(self.b0)) {
            return Err(crate::error::domain("B0", self.b0, "B0 ≥ 0"));
        }
        if !(self.b1 >= 0.0 && ok(self.b1)) {
            return Err(crate::error::domain("B1", self.b1, "B1 ≥ 0"));
        }
        if !(self.carrier >= 0.0 && ok(self.carrier)) {
            return Err(crate::error::domain("carrier", self.carrier, "ω ≥ 0"));
        }
        if !(0.0..=FRAC_PI_2 * (1.0 + 1e-15)).contains(&self.chi) {
            return Err(crate::error::domain("chi", self.chi, "χ ∈ [0, π/2]"));
        }
        Ok(self)
    }

    /// Frequency of the driven 0 ↔ −1 transition, rad/s.
    pub fn driven_transition(&self) -> f64 {
        let (_, e_zero, e_minus) = self.static_levels();
        e_minus - e_zero
    }

    /// |E(+1) − E(0)|, rad/s.
    pub fn spectator_transition(&self) -> f64 {
        let (e_plus, e_zero, _) = self.static_levels();
        (e_plus - e_zero).abs()
    }

    /// |ω′ − ω| between the two allowed transitions from m_S = 0.
    pub fn transition_splitting(&self) -> f64 {
        (self.driven_transition().abs() - self.spectator_transition()).abs()
    }

    fn static_levels(&self) -> (f64, f64, f64) {
        let h = hamiltonian_at(self, &Stimulus::none(), false, 0.0, 0.0);
        (
            h.get(IDX_PLUS1, IDX_PLUS1).re,
            h.get(IDX_0, IDX_0).re,
            h.get(IDX_MINUS1, IDX_MINUS1).re,
        )
    }
}

/// Ω = γe·B1/√2: the observed 0 ↔ −1 population oscillation angular frequency.
pub fn rabi_frequency(model: &NvModel) -> f64 {
    model.gamma_e * model.b1 * FRAC_1_SQRT_2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StimulusKind {
    Constant,
    /// `exp(−4 ln2 (t − center)² / fwhm²)`
    Gaussian { center: f64, fwhm: f64 },
    /// `sin(frequency·t + phase)`
    Sinusoid { frequency: f64, phase: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stimulus {
    pub kind: StimulusKind,
    /// T
    pub amplitude: f64,
}

impl Stimulus {
    pub fn none() -> Self {
        Stimulus {
            kind: StimulusKind::Constant,
            amplitude: 0.0,
        }
    }

    pub fn constant(amplitude: f64) -> Self {
        Stimulus {
            kind: StimulusKind::Constant,
            amplitude,
        }
    }

    pub fn gaussian(amplitude: f64, center: f64, fwhm: f64) -> Result<Self> {
        if !(fwhm > 0.0) {
            return Err(crate::error::domain("fwhm", fwhm, "fwhm > 0"));
        }
        Ok(Stimulus {
            kind: StimulusKind::Gaussian { center, fwhm },
            amplitude,
        })
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        if !(frequency >= 0.0) {
            return Err(crate::error::domain("frequency", frequency, "ω ≥ 0"));
        }
        Ok(Stimulus {
            kind: StimulusKind::Sinusoid { frequency, phase },
            amplitude,
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Stimulus {
            amplitude: self.amplitude * factor,
            ..*self
        }
    }

    /// B_stim(t), T
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            StimulusKind::Constant => self.amplitude,
            StimulusKind::Gaussian { center, fwhm } => {
                let x = (t - center) / fwhm;
                self.amplitude * (-4.0 * std::f64::consts::LN_2 * x * x).exp()
            }
            StimulusKind::Sinusoid { frequency, phase } => {
                self.amplitude * (frequency * t + phase).sin()
            }
        }
    }

    fn frequency(&self) -> f64 {
        match self.kind {
            StimulusKind::Sinusoid { frequency, .. } if self.amplitude != 0.0 => frequency,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Ms0,
    MsMinus1,
}

impl Basis {
    fn index(self) -> usize {
        match self {
            Basis::Ms0 => IDX_0,
            Basis::MsMinus1 => IDX_MINUS1,
        }
    }
}

/// Interval during which the carrier is on, with its phase offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseWindow {
    pub start: f64,
    pub end: f64,
    pub carrier_phase: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Protocol {
    windows: Vec<PulseWindow>,
    duration: f64,
    pub prep: Basis,
    pub readout: Basis,
}

impl Protocol {
    pub fn new(windows: Vec<PulseWindow>, duration: f64, prep: Basis, readout: Basis) -> Result<Self> {
        let mut last = 0.0;
        for w in &windows {
            if !(w.start >= last && w.end >= w.start && w.carrier_phase.is_finite()) {
                return Err(Error::Precondition(format!(
                    "pulse windows must be ordered and non-overlapping: {w:?}"
                )));
            }
            last = w.end;
        }
        if !(duration >= last && duration.is_finite()) {
            return Err(Error::Precondition(format!(
                "protocol duration {duration:e} s ends before its last window ({last:e} s)"
            )));
        }
        Ok(Protocol {
            windows,
            duration,
            prep,
            readout,
        })
    }

    /// Two back-to-back windows of τ/2, the second with the carrier phase
    /// of a 90° rotating-frame phase jump.
    pub fn bipartite(tau: f64, prep: Basis, readout: Basis) -> Result<Self> {
        let half = 0.5 * tau;
        Self::new(
            vec![
                PulseWindow {
                    start: 0.0,
                    end: half,
                    carrier_phase: 0.0,
                },
                PulseWindow {
                    start: half,
                    end: tau,
                    carrier_phase: CARRIER_PHASE_PER_ROTATING_PHASE * FRAC_PI_2,
                },
            ],
            tau,
            prep,
            readout,
        )
    }

    /// Lab-frame timing of a rotating-frame sequence. Segments with Ω > 0
    /// become carrier windows; the drive strength comes from the model and the
    /// segment detunings are ignored.
    pub fn from_sequence(seq: &ControlSequence, prep: Basis, readout: Basis) -> Result<Self> {
        let mut windows = Vec::new();
        let mut t = 0.0;
        for seg in seq.segments() {
            if seg.rabi > 0.0 && seg.duration > 0.0 {
                windows.push(PulseWindow {
                    start: t,
                    end: t + seg.duration,
                    carrier_phase: CARRIER_PHASE_PER_ROTATING_PHASE * seg.phase,
                });
            }
            t += seg.duration;
        }
        Self::new(windows, t, prep, readout)
    }

    pub fn windows(&self) -> &[PulseWindow] {
        &self.windows
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Carrier phase at `t`, or `None` when the drive is off.
    pub fn pulse_at(&self, t: f64) -> Option<f64> {
        self.windows
            .iter()
            .find(|w| t >= w.start && t < w.end)
            .map(|w| w.carrier_phase)
    }

    /// Times at which the drive switches, including 0 and the end.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0];
        for w in &self.windows {
            pts.push(w.start);
            pts.push(w.end);
        }
        pts.push(self.duration);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

pub fn hamiltonian_at(
    model: &NvModel,
    stim: &Stimulus,
    pulse_on: bool,
    carrier_phase: f64,
    t: f64,
) -> SpinMatrix {
    let h = real_hamiltonian(model, stim.value(t), pulse_on.then_some(carrier_phase), t);
    let mut out = SpinMatrix::zeros(3);
    for (i, row) in h.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            out.set(i, j, C64::new(x, 0.0));
        }
    }
    out
}

#[inline]
fn real_hamiltonian(model: &NvModel, b_stim: f64, carrier_phase: Option<f64>, t: f64) -> [[f64; 3]; 3] {
    let (sin_chi, cos_chi) = model.chi.sin_cos();
    let b_z = model.b0 + b_stim * cos_chi;
    let drive = carrier_phase.map_or(0.0, |ph| model.b1 * (model.carrier * t + ph).cos());
    let b_x = drive + b_stim * sin_chi;
    let z = model.gamma_e * b_z;
    let x = -model.gamma_e * b_x * FRAC_1_SQRT_2;
    [
        [model.d - z, x, 0.0],
        [x, 0.0, x],
        [0.0, x, model.d + z],
    ]
}

/// Largest frequency scale (Hz) in the model and its name.
pub fn max_frequency(model: &NvModel, stim: &Stimulus) -> (f64, &'static str) {
    let g = model.gamma_e;
    let b_peak = model.b0 + stim.amplitude.abs();
    let scales = [
        (model.d, "zero-field splitting D"),
        (g * b_peak, "Larmor γe·B0"),
        (model.d + g * b_peak, "transition D + γe·B0"),
        (model.carrier, "carrier"),
        (rabi_frequency(model), "Rabi"),
        (stim.frequency(), "stimulus"),
    ];
    let (w, name) = scales
        .iter()
        .copied()
        .fold((0.0, "zero-field splitting D"), |acc, s| if s.0 > acc.0 { s } else { acc });
    (w / TAU, name)
}

/// Default step: 1/(100·f_max).
pub fn default_step(model: &NvModel, stim: &Stimulus) -> f64 {
    1.0 / (100.0 * max_frequency(model, stim).0)
}

fn check_step(model: &NvModel, stim: &Stimulus, dt: f64) -> Result<()> {
    let (f_max, scale) = max_frequency(model, stim);
    let limit = 1.0 / (50.0 * f_max);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge {
            dt,
            limit,
            scale,
            frequency_hz: f_max,
        });
    }
    Ok(())
}

/// Eigen-decomposition of a real symmetric 3×3 matrix by cyclic Jacobi.
fn symmetric_eigen3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum();
    for _ in 0..32 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= 1e-34 * scale || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            let r = 3 - p - q;
            let (app, aqq, arp, arq) = (a[p][p], a[q][q], a[r][p], a[r][q]);
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// ψ ← exp(−i·h·dt)·ψ for real symmetric `h`.
#[inline]
fn step_real(h: [[f64; 3]; 3], dt: f64, psi: &mut [C64; 3]) {
    let (vals, v) = symmetric_eigen3(h);
    let mut coef = [C64::new(0.0, 0.0); 3];
    for k in 0..3 {
        let proj = v[0][k] * psi[0] + v[1][k] * psi[1] + v[2][k] * psi[2];
        let (s, c) = (vals[k] * dt).sin_cos();
        coef[k] = proj * C64::new(c, -s);
    }
    for (i, amp) in psi.iter_mut().enumerate() {
        *amp = v[i][0] * coef[0] + v[i][1] * coef[1] + v[i][2] * coef[2];
    }
}

/// One sample of a simulation trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    /// populations of |+1⟩, |0⟩, |−1⟩
    pub populations: [f64; 3],
    pub sz: f64,
}

impl TracePoint {
    fn sample(t: f64, psi: &[C64; 3]) -> Self {
        let populations = [psi[0].norm_sqr(), psi[1].norm_sqr(), psi[2].norm_sqr()];
        TracePoint {
            t,
            populations,
            sz: populations[0] - populations[2],
        }
    }
}

fn as_state(psi: &StateVector) -> Result<[C64; 3]> {
    if psi.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: psi.dim(),
        });
    }
    let a = psi.amplitudes();
    Ok([a[0], a[1], a[2]])
}

fn from_state(psi: [C64; 3]) -> StateVector {
    StateVector::from_amplitudes_unchecked(&psi)
}

/// Advances `psi` from `t0` to `t1` with `n = ⌈(t1 − t0)/dt⌉` equal midpoint
/// steps; `record` is called after each step.
fn advance(
    model: &NvModel,
    stim: &Stimulus,
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    dt: f64,
    psi: &mut [C64; 3],
    mut record: impl FnMut(f64, &[C64; 3]),
) {
    let span = t1 - t0;
    if span <= 0.0 {
        return;
    }
    let n = (span / dt).ceil().max(1.0) as usize;
    let h = span / n as f64;
    for i in 0..n {
        let mid = t0 + (i as f64 + 0.5) * h;
        let ham = real_hamiltonian(model, stim.value(mid), protocol.pulse_at(mid), mid);
        step_real(ham, h, psi);
        record(t0 + (i + 1) as f64 * h, psi);
    }
}

/// Midpoint-exponential evolution over `[t0, t1]`. The interval is divided
/// into equal steps no longer than `dt`.
pub fn evolve(
    model: &NvModel,
    stim: &Stimulus,
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    dt: f64,
    psi: &StateVector,
) -> Result<StateVector> {
    check_step(model, stim, dt)?;
    let mut state = as_state(psi)?;
    advance(model, stim, protocol, t0, t1, dt, &mut state, |_, _| {});
    Ok(from_state(state))
}

/// As [`evolve`], additionally sampling the state every `stride` steps
/// (and at both ends).
pub fn evolve_traced(
    model: &NvModel,
    stim: &Stimulus,
    protocol: &Protocol,
    t0: f64,
    t1: f64,
    dt: f64,
    psi: &StateVector,
    stride: usize,
) -> Result<(StateVector, Vec<TracePoint>)> {
    check_step(model, stim, dt)?;
    let stride = stride.max(1);
    let mut state = as_state(psi)?;
    let mut trace = vec![TracePoint::sample(t0, &state)];
    let mut count = 0usize;
    let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    advance(model, stim, protocol, t0, t1, dt, &mut state, |t, s| {
        count += 1;
        if count % stride == 0 || count == n {
            trace.push(TracePoint::sample(t, s));
        }
    });
    Ok((from_state(state), trace))
}

fn resonance_warning(model: &NvModel) {
    let resonant = model.d + model.gamma_e * model.b0;
    if (model.carrier - resonant).abs() > 1e-9 * resonant {
        log::warn!(
            "carrier {:.6e} rad/s is detuned from the 0 ↔ −1 transition at {:.6e} rad/s",
            model.carrier,
            resonant
        );
    }
}

/// Runs the protocol with the default step and returns the transition
/// probability: `1 − P(prep)` when readout equals prep, else `P(readout)`.
pub fn run_protocol(model: &NvModel, stim: &Stimulus, protocol: &Protocol) -> Result<f64> {
    run_protocol_with_step(model, stim, protocol, default_step(model, stim))
}

pub fn run_protocol_with_step(
    model: &NvModel,
    stim: &Stimulus,
    protocol: &Protocol,
    dt: f64,
) -> Result<f64> {
    check_step(model, stim, dt)?;
    resonance_warning(model);
    let mut psi = [C64::new(0.0, 0.0); 3];
    psi[protocol.prep.index()] = C64::new(1.0, 0.0);
    // Step boundaries coincide with every window edge.
    let pts = protocol.breakpoints();
    for pair in pts.windows(2) {
        advance(model, stim, protocol, pair[0], pair[1], dt, &mut psi, |_, _| {});
    }
    let pop = psi[protocol.readout.index()].norm_sqr();
    Ok(if protocol.readout == protocol.prep {
        1.0 - pop
    } else {
        pop
    })
}

/// Independent runs in parallel; output order matches input order.
pub fn run_batch(jobs: &[(NvModel, Stimulus, Protocol)]) -> Vec<Result<f64>> {
    jobs.par_iter()
        .map(|(m, s, p)| run_protocol(m, s, p))
        .collect()
}

/// Two-level rotating-frame prediction of [`run_protocol`] for a constant
/// stimulus: the bipartite-style sequence with detuning
/// `−(D + γe·B0 − ω_c) − γe·B_stim·cosχ` and Ω from [`rabi_frequency`].
pub fn rotating_frame_prediction(model: &NvModel, stim: &Stimulus, protocol: &Protocol) -> Result<f64> {
    if stim.kind != StimulusKind::Constant {
        return Err(Error::Precondition(
            "rotating-frame prediction needs a constant stimulus".into(),
        ));
    }
    let detuning = -(model.d + model.gamma_e * model.b0 - model.carrier)
        - model.gamma_e * stim.amplitude * model.chi.cos();
    let rabi = rabi_frequency(model);
    let pts = protocol.breakpoints();
    let mut segments = Vec::new();
    for pair in pts.windows(2) {
        let mid = 0.5 * (pair[0] + pair[1]);
        let (w, phase) = match protocol.pulse_at(mid) {
            Some(ph) => (rabi, ph / CARRIER_PHASE_PER_ROTATING_PHASE),
            None => (0.0, 0.0),
        };
        segments.push(PulseSegment::new(pair[1] - pair[0], w, phase, detuning));
    }
    if segments.is_empty() {
        return Ok(0.0);
    }
    Ok(transition_probability(&ControlSequence::new("rwa", segments)?))
}
