//! Pulse envelopes and the readout / phase-gate sequences.
//!
//! Times are in microseconds. Ramps count inside the quoted durations.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::CoreError;
use crate::units::{us_to_gamma_time, Detuning, RabiFrequency};

const EPS_US: f64 = 1e-9;

/// sin² ramp up, flat hold, sin² ramp down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub start_us: f64,
    pub rise_us: f64,
    pub hold_us: f64,
    pub fall_us: f64,
    pub peak: RabiFrequency,
}

impl PulseEnvelope {
    /// Symmetric pulse of total `duration_us` with equal ramps.
    pub fn symmetric(
        start_us: f64,
        duration_us: f64,
        ramp_us: f64,
        peak: RabiFrequency,
    ) -> Result<Self, CoreError> {
        if !(duration_us > 0.0) || !(ramp_us >= 0.0) || 2.0 * ramp_us > duration_us + EPS_US {
            return Err(CoreError::Schedule(format!(
                "pulse of {duration_us} us cannot hold two {ramp_us} us ramps"
            )));
        }
        Ok(Self {
            start_us,
            rise_us: ramp_us,
            hold_us: (duration_us - 2.0 * ramp_us).max(0.0),
            fall_us: ramp_us,
            peak,
        })
    }

    pub fn duration_us(&self) -> f64 {
        self.rise_us + self.hold_us + self.fall_us
    }

    pub fn end_us(&self) -> f64 {
        self.start_us + self.duration_us()
    }

    /// Interval where the envelope sits at its peak.
    pub fn peak_window(&self) -> (f64, f64) {
        let a = self.start_us + self.rise_us;
        (a, a + self.hold_us)
    }

    /// Envelope in [0, 1].
    pub fn shape(&self, t_us: f64) -> f64 {
        let t = t_us - self.start_us;
        if t <= 0.0 {
            return 0.0;
        }
        if t < self.rise_us {
            return (FRAC_PI_2 * t / self.rise_us).sin().powi(2);
        }
        let t = t - self.rise_us;
        if t <= self.hold_us {
            return 1.0;
        }
        let t = t - self.hold_us;
        if t < self.fall_us {
            return (FRAC_PI_2 * (self.fall_us - t) / self.fall_us).sin().powi(2);
        }
        0.0
    }

    fn validate(&self, name: &str) -> Result<(), CoreError> {
        let ok = [self.start_us, self.rise_us, self.hold_us, self.fall_us]
            .iter()
            .all(|v| v.is_finite())
            && self.rise_us >= 0.0
            && self.hold_us >= 0.0
            && self.fall_us >= 0.0
            && self.duration_us() > 0.0;
        if !ok {
            return Err(CoreError::Schedule(format!("{name}: invalid timing {self:?}")));
        }
        Ok(())
    }
}

pub fn envelope_value(env: &PulseEnvelope, t_us: f64) -> RabiFrequency {
    RabiFrequency::new(env.peak.value() * env.shape(t_us)).expect("shape lies in [0, 1]")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkPulse {
    pub envelope: PulseEnvelope,
    pub detuning: Detuning,
}

/// Coupling-only pulse with unbalanced beams (Ω_min = imbalance·Ω_max).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepumpPulse {
    pub envelope: PulseEnvelope,
    pub imbalance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SegmentKind {
    Eit,
    Repump,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub cycle: u32,
    pub start_us: f64,
    pub end_us: f64,
}

/// One sequence, repeated `repeat_count` times back to back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub probe: PulseEnvelope,
    pub coupling: PulseEnvelope,
    pub stark: Option<StarkPulse>,
    pub repump: Option<RepumpPulse>,
    pub repeat_count: u32,
    pub delta1: Detuning,
    pub delta2: Detuning,
}

/// Envelope values at one time. Coupling entries are shapes in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnvelopeSample {
    pub probe: f64,
    pub coupling: f64,
    pub repump: f64,
    pub stark: f64,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<(), CoreError> {
        self.probe.validate("probe")?;
        self.coupling.validate("coupling")?;
        if self.repeat_count < 1 {
            return Err(CoreError::Schedule("repeat_count must be >= 1".into()));
        }
        let (c0, c1) = self.coupling.peak_window();
        if !(self.coupling.start_us < self.probe.start_us
            && self.probe.end_us() < self.coupling.end_us())
        {
            return Err(CoreError::Schedule(
                "coupling must switch on before and off after the probe".into(),
            ));
        }
        if self.probe.start_us < c0 - EPS_US || self.probe.end_us() > c1 + EPS_US {
            return Err(CoreError::Schedule(
                "coupling must be at its peak wherever the probe is on".into(),
            ));
        }
        if let Some(st) = &self.stark {
            st.envelope.validate("stark")?;
            let (p0, p1) = self.probe.peak_window();
            let (w0, w1) = (p0.max(c0), p1.min(c1));
            if st.envelope.start_us < w0 - EPS_US || st.envelope.end_us() > w1 + EPS_US {
                return Err(CoreError::Schedule(format!(
                    "stark pulse [{}, {}] us not inside the joint peak window [{w0}, {w1}] us",
                    st.envelope.start_us,
                    st.envelope.end_us()
                )));
            }
            if st.detuning.value() == 0.0 {
                return Err(CoreError::Schedule("stark detuning must be nonzero".into()));
            }
        }
        if let Some(rp) = &self.repump {
            rp.envelope.validate("repump")?;
            if rp.envelope.start_us < self.coupling.end_us() - EPS_US {
                return Err(CoreError::Schedule(
                    "repump must follow the EIT pulse".into(),
                ));
            }
            if !(rp.imbalance > 0.0 && rp.imbalance <= 1.0) {
                return Err(CoreError::Schedule("repump imbalance must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Length of one sequence.
    pub fn period_us(&self) -> f64 {
        let mut end = self.coupling.end_us().max(self.probe.end_us());
        if let Some(rp) = &self.repump {
            end = end.max(rp.envelope.end_us());
        }
        if let Some(st) = &self.stark {
            end = end.max(st.envelope.end_us());
        }
        end
    }

    pub fn total_duration_us(&self) -> f64 {
        self.period_us() * self.repeat_count as f64
    }

    /// Summed probe-pulse time over all repeats.
    pub fn measurement_time_us(&self) -> f64 {
        self.probe.duration_us() * self.repeat_count as f64
    }

    /// Probe bandwidth δω = π / duration, in Γ units.
    pub fn bandwidth(&self) -> f64 {
        PI / us_to_gamma_time(self.probe.duration_us())
    }

    /// Flat-top phase bound Ω_s²/(2Δ)·T, using the full Stark duration.
    pub fn nominal_stark_phase(&self) -> f64 {
        match &self.stark {
            Some(st) => {
                let om = st.envelope.peak.value();
                om * om / (2.0 * st.detuning.value()) * us_to_gamma_time(st.envelope.duration_us())
            }
            None => 0.0,
        }
    }

    pub fn segments(&self) -> Vec<Segment> {
        let period = self.period_us();
        let eit_end = self
            .coupling
            .end_us()
            .max(self.probe.end_us())
            .max(self.stark.map_or(0.0, |s| s.envelope.end_us()));
        let mut out = Vec::new();
        for cycle in 0..self.repeat_count {
            let off = cycle as f64 * period;
            out.push(Segment {
                kind: SegmentKind::Eit,
                cycle,
                start_us: off,
                end_us: off + eit_end,
            });
            if let Some(rp) = &self.repump {
                out.push(Segment {
                    kind: SegmentKind::Repump,
                    cycle,
                    start_us: off + eit_end,
                    end_us: off + rp.envelope.end_us(),
                });
            }
        }
        out
    }

    pub fn sample(&self, t_us: f64) -> EnvelopeSample {
        let period = self.period_us();
        let cycle = (t_us / period)
            .floor()
            .clamp(0.0, (self.repeat_count - 1) as f64);
        let t = t_us - cycle * period;
        EnvelopeSample {
            probe: self.probe.peak.value() * self.probe.shape(t),
            coupling: self.coupling.shape(t),
            repump: self.repump.map_or(0.0, |r| r.envelope.shape(t)),
            stark: self
                .stark
                .map_or(0.0, |s| s.envelope.peak.value() * s.envelope.shape(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    pub probe_peak: f64,
    pub probe_duration_us: f64,
    pub rise_us: f64,
    pub repump_duration_us: f64,
    pub repump_imbalance: f64,
    pub repeats: u32,
}

impl Default for ReadoutParams {
    fn default() -> Self {
        Self {
            probe_peak: 0.2,
            probe_duration_us: 6.0,
            rise_us: 1.0,
            repump_duration_us: 6.0,
            repump_imbalance: 0.1,
            repeats: 16,
        }
    }
}

/// Coupling ramps up, holds through the probe, ramps down; then the repump.
pub fn readout_schedule(p: &ReadoutParams) -> Result<PulseSchedule, CoreError> {
    if !(p.probe_duration_us > 0.0 && p.repump_duration_us > 0.0) {
        return Err(CoreError::Schedule("durations must be positive".into()));
    }
    let r = p.rise_us;
    let unit = RabiFrequency::new(1.0)?;
    let coupling = PulseEnvelope::symmetric(0.0, p.probe_duration_us + 2.0 * r, r, unit)?;
    let probe = PulseEnvelope::symmetric(r, p.probe_duration_us, r, RabiFrequency::new(p.probe_peak)?)?;
    let repump = RepumpPulse {
        envelope: PulseEnvelope::symmetric(coupling.end_us(), p.repump_duration_us, r, unit)?,
        imbalance: p.repump_imbalance,
    };
    let s = PulseSchedule {
        probe,
        coupling,
        stark: None,
        repump: Some(repump),
        repeat_count: p.repeats,
        delta1: Detuning::ZERO,
        delta2: Detuning::ZERO,
    };
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGateParams {
    pub probe_peak: f64,
    pub probe_duration_us: f64,
    pub coupling_duration_us: f64,
    pub rise_us: f64,
    pub stark_peak: f64,
    pub stark_duration_us: f64,
    pub stark_rise_us: f64,
    pub stark_detuning: f64,
}

impl Default for PhaseGateParams {
    fn default() -> Self {
        Self {
            probe_peak: 8.0,
            probe_duration_us: 25.0,
            coupling_duration_us: 35.0,
            rise_us: 5.0,
            stark_peak: 1.6,
            stark_duration_us: 15.0,
            stark_rise_us: 5.0,
            stark_detuning: 200.0,
        }
    }
}

/// Coupling, then probe, then Stark, all centred; symmetric turn-off.
pub fn phase_gate_schedule(p: &PhaseGateParams) -> Result<PulseSchedule, CoreError> {
    let unit = RabiFrequency::new(1.0)?;
    let coupling = PulseEnvelope::symmetric(0.0, p.coupling_duration_us, p.rise_us, unit)?;
    let probe_start = 0.5 * (p.coupling_duration_us - p.probe_duration_us);
    let probe = PulseEnvelope::symmetric(
        probe_start,
        p.probe_duration_us,
        p.rise_us,
        RabiFrequency::new(p.probe_peak)?,
    )?;
    let stark = if p.stark_duration_us > 0.0 && p.stark_peak > 0.0 {
        Some(StarkPulse {
            envelope: PulseEnvelope::symmetric(
                0.5 * (p.coupling_duration_us - p.stark_duration_us),
                p.stark_duration_us,
                p.stark_rise_us,
                RabiFrequency::new(p.stark_peak)?,
            )?,
            detuning: Detuning::new(p.stark_detuning)?,
        })
    } else {
        None
    };
    let s = PulseSchedule {
        probe,
        coupling,
        stark,
        repump: None,
        repeat_count: 1,
        delta1: Detuning::ZERO,
        delta2: Detuning::ZERO,
    };
    s.validate()?;
    Ok(s)
}
