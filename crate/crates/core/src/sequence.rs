//! Piecewise-constant rotating-frame control sequences for a spin-1/2.
//!
//! Each segment evolves under `H = δω·Sz + Ω(Sy cosθ + Sx sinθ)`; phase 0 is
//! a rotation about +Y and phase π/2 about +X. Propagation is exact per
//! segment. [`propagate_modulated`] adds a time-dependent detuning on top and
//! steps it with midpoint exponentials.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinlin::{exp_pauli, overlap_probability, SpinMatrix, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSegment {
    #[serde(rename = "duration_s")]
    pub duration: f64,
    #[serde(rename = "rabi_rad_s")]
    pub rabi: f64,
    #[serde(rename = "phase_rad")]
    pub phase: f64,
    #[serde(rename = "detuning_rad_s", default)]
    pub detuning: f64,
}

impl PulseSegment {
    pub fn new(duration: f64, rabi: f64, phase: f64, detuning: f64) -> Self {
        PulseSegment {
            duration,
            rabi,
            phase,
            detuning,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.duration, self.rabi, self.phase, self.detuning]
            .iter()
            .all(|x| x.is_finite());
        if !finite || self.duration < 0.0 || self.rabi < 0.0 {
            return Err(Error::Precondition(format!(
                "segment needs finite fields, duration ≥ 0 and Ω ≥ 0: {self:?}"
            )));
        }
        Ok(())
    }

    /// exp(-i H t) of this segment's Hamiltonian with extra detuning.
    #[inline]
    fn propagator(&self, extra_detuning: f64, t: f64) -> SpinMatrix {
        let (s, c) = self.phase.sin_cos();
        exp_pauli(
            0.0,
            0.5 * self.rabi * s,
            0.5 * self.rabi * c,
            0.5 * (self.detuning + extra_detuning),
            t,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence", into = "RawSequence")]
pub struct ControlSequence {
    label: String,
    segments: Vec<PulseSegment>,
}

#[derive(Serialize, Deserialize)]
struct RawSequence {
    #[serde(default)]
    label: String,
    #[serde(rename = "segment", default)]
    segments: Vec<PulseSegment>,
}

impl TryFrom<RawSequence> for ControlSequence {
    type Error = Error;
    fn try_from(raw: RawSequence) -> Result<Self> {
        ControlSequence::new(raw.label, raw.segments)
    }
}

impl From<ControlSequence> for RawSequence {
    fn from(seq: ControlSequence) -> Self {
        RawSequence {
            label: seq.label,
            segments: seq.segments,
        }
    }
}

impl ControlSequence {
    pub fn new(label: impl Into<String>, segments: Vec<PulseSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Precondition("control sequence has no segments".into()));
        }
        for seg in &segments {
            seg.validate()?;
        }
        Ok(ControlSequence {
            label: label.into(),
            segments,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn segments(&self) -> &[PulseSegment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Concatenation `self` then `other`.
    pub fn then(&self, other: &ControlSequence) -> ControlSequence {
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        ControlSequence {
            label: format!("{}+{}", self.label, other.label),
            segments,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// Single unitary for the whole sequence.
    pub fn unitary(&self) -> SpinMatrix {
        self.segments
            .iter()
            .fold(SpinMatrix::identity(2), |acc, seg| {
                seg.propagator(0.0, seg.duration) * acc
            })
    }
}

/// Two segments `(kτ, phase 0)` then `((1−k)τ, phase θ)`; zero-length
/// segments are dropped.
pub fn make_bipartite(
    rabi: f64,
    tau: f64,
    timeshare: f64,
    phase_jump: f64,
    detuning: f64,
) -> Result<ControlSequence> {
    if !(0.0..=1.0).contains(&timeshare) {
        return Err(crate::error::domain("timeshare", timeshare, "k ∈ [0, 1]"));
    }
    let first = PulseSegment::new(timeshare * tau, rabi, 0.0, detuning);
    let second = PulseSegment::new((1.0 - timeshare) * tau, rabi, phase_jump, detuning);
    let segments: Vec<_> = [first, second]
        .into_iter()
        .filter(|s| s.duration > 0.0)
        .collect();
    let segments = if segments.is_empty() {
        vec![first]
    } else {
        segments
    };
    ControlSequence::new("bipartite", segments)
}

/// Equal timeshare, 90° phase jump.
pub fn make_speed_limit_sequence(rabi: f64, tau: f64, detuning: f64) -> Result<ControlSequence> {
    make_bipartite(rabi, tau, 0.5, FRAC_PI_2, detuning)
}

/// Pulse of length `t_r` at phase 0, free evolution, pulse of length `t_r`
/// at phase π/2; total length `tau`.
pub fn make_ramsey_with_delay(
    rabi: f64,
    t_r: f64,
    tau: f64,
    detuning: f64,
) -> Result<ControlSequence> {
    if !(t_r >= 0.0 && tau >= 2.0 * t_r) {
        return Err(Error::Precondition(format!(
            "need τ ≥ 2·t_R, got τ = {tau:e}, t_R = {t_r:e}"
        )));
    }
    let segments = vec![
        PulseSegment::new(t_r, rabi, 0.0, detuning),
        PulseSegment::new(tau - 2.0 * t_r, 0.0, 0.0, detuning),
        PulseSegment::new(t_r, rabi, FRAC_PI_2, detuning),
    ];
    ControlSequence::new("ramsey", segments)
}

pub fn propagate(seq: &ControlSequence, initial: &StateVector) -> Result<StateVector> {
    if initial.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: initial.dim(),
        });
    }
    Ok(seq.unitary().apply(initial))
}

/// `1 − |⟨0|U|0⟩|²` starting from `|0⟩ = |m = +1/2⟩`.
pub fn transition_probability(seq: &ControlSequence) -> f64 {
    let zero = StateVector::basis(2, 0);
    let out = seq.unitary().apply(&zero);
    1.0 - overlap_probability(&zero, &out).unwrap_or(0.0)
}

/// Propagates with an additional time-dependent detuning `extra(t)` (rad/s),
/// `t` measured from the start of the sequence. Each segment is split into
/// equal steps no longer than `max_step` and each step uses the exponential
/// of the Hamiltonian at its midpoint.
pub fn propagate_modulated<F>(
    seq: &ControlSequence,
    initial: &StateVector,
    extra: F,
    max_step: f64,
) -> Result<StateVector>
where
    F: Fn(f64) -> f64,
{
    if initial.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: initial.dim(),
        });
    }
    if !(max_step > 0.0) {
        return Err(Error::Precondition("max_step must be positive".into()));
    }
    let mut psi = *initial;
    let mut t0 = 0.0;
    for seg in seq.segments() {
        if seg.duration == 0.0 {
            continue;
        }
        let n = (seg.duration / max_step).ceil().max(1.0) as usize;
        let dt = seg.duration / n as f64;
        for i in 0..n {
            let mid = t0 + (i as f64 + 0.5) * dt;
            psi = seg.propagator(extra(mid), dt).apply(&psi);
        }
        t0 += seg.duration;
    }
    Ok(psi)
}
