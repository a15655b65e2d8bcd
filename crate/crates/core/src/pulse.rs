//! Rectangular pulse sequences: typed pulses, validated sequences, builders
//! for the stimulated-echo and deshelling-locked scenarios, and the JSON
//! config format consumed by the command-line tools.
//!
//! A pulse is active on the half-open interval `[start, start + duration)`
//! and drives exactly one optical transition with constant Rabi frequency
//! `area / duration` and a constant field phase. Pulses on the same
//! transition must not overlap; pulses on different transitions may.

use crate::quantum::{DriveSample, DriveSchedule};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SequenceError {
    #[error("pulse {label}: duration must be positive, got {duration:.3e}")]
    NonPositiveDuration { label: String, duration: f64 },
    #[error("pulse {label}: area must be non-negative, got {area:.3e}")]
    NegativeArea { label: String, area: f64 },
    #[error("pulse {label}: start must be non-negative, got {start:.3e}")]
    NegativeStart { label: String, start: f64 },
    #[error("pulse {label}: {field} must be finite")]
    NonFinite { label: String, field: &'static str },
    #[error("pulse label must not be empty (pulse index {0})")]
    EmptyLabel(usize),
    #[error("pulse {label} ends at {end:.6e} s, beyond the {horizon:.6e} s horizon")]
    ExceedsHorizon { label: String, end: f64, horizon: f64 },
    #[error("pulses {first} and {second} overlap on transition {transition}")]
    Overlap {
        first: String,
        second: String,
        transition: &'static str,
    },
    #[error("horizon must be positive and finite, got {0:.3e}")]
    BadHorizon(f64),
    #[error("pulse ordering violated: {0}")]
    InvalidOrdering(String),
    #[error("no pulse labelled {0} in the sequence")]
    MissingPulse(String),
}

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("sequence config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sequence config is invalid: {0}")]
    Invalid(#[from] SequenceError),
}

/// Which optical transition a pulse drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    #[serde(rename = "1-3")]
    Optical13,
    #[serde(rename = "2-3")]
    Optical23,
}

impl Transition {
    pub fn name(&self) -> &'static str {
        match self {
            Transition::Optical13 => "1-3",
            Transition::Optical23 => "2-3",
        }
    }
}

/// One rectangular pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pulse {
    pub label: String,
    pub transition: Transition,
    pub start_s: f64,
    pub duration_s: f64,
    pub area_rad: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl Pulse {
    /// Pulse defined by Rabi frequency (rad/s) instead of area.
    pub fn from_rabi(
        label: &str,
        transition: Transition,
        start_s: f64,
        duration_s: f64,
        rabi: f64,
        phase_rad: f64,
    ) -> Self {
        Pulse {
            label: label.to_string(),
            transition,
            start_s,
            duration_s,
            area_rad: rabi * duration_s,
            phase_rad,
        }
    }

    /// Constant Rabi frequency over the pulse, rad/s.
    pub fn rabi_frequency(&self) -> f64 {
        self.area_rad / self.duration_s
    }

    /// Rotation area swept by the pulse: Rabi frequency times duration.
    pub fn pulse_area(&self) -> f64 {
        self.rabi_frequency() * self.duration_s
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }

    /// Active on `[start, end)`.
    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s()
    }

    fn validate(&self, index: usize) -> Result<(), SequenceError> {
        if self.label.is_empty() {
            return Err(SequenceError::EmptyLabel(index));
        }
        let label = self.label.clone();
        for (field, value) in [
            ("start_s", self.start_s),
            ("duration_s", self.duration_s),
            ("area_rad", self.area_rad),
            ("phase_rad", self.phase_rad),
        ] {
            if !value.is_finite() {
                return Err(SequenceError::NonFinite { label, field });
            }
        }
        if self.duration_s <= 0.0 {
            return Err(SequenceError::NonPositiveDuration {
                label,
                duration: self.duration_s,
            });
        }
        if self.area_rad < 0.0 {
            return Err(SequenceError::NegativeArea {
                label,
                area: self.area_rad,
            });
        }
        if self.start_s < 0.0 {
            return Err(SequenceError::NegativeStart {
                label,
                start: self.start_s,
            });
        }
        Ok(())
    }
}

/// Serialized form of a sequence; kept separate so deserialization always
/// passes through validation.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceConfig {
    horizon_s: f64,
    pulses: Vec<Pulse>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    scenario: String,
}

/// Validated pulse program over a finite horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceConfig", into = "SequenceConfig")]
pub struct PulseSequence {
    horizon_s: f64,
    pulses: Vec<Pulse>,
    scenario: String,
}

impl TryFrom<SequenceConfig> for PulseSequence {
    type Error = SequenceError;

    fn try_from(raw: SequenceConfig) -> Result<Self, SequenceError> {
        PulseSequence::new(raw.horizon_s, raw.pulses, &raw.scenario)
    }
}

impl From<PulseSequence> for SequenceConfig {
    fn from(seq: PulseSequence) -> SequenceConfig {
        SequenceConfig {
            horizon_s: seq.horizon_s,
            pulses: seq.pulses,
            scenario: seq.scenario,
        }
    }
}

impl PulseSequence {
    pub fn new(
        horizon_s: f64,
        pulses: Vec<Pulse>,
        scenario: &str,
    ) -> Result<Self, SequenceError> {
        if !horizon_s.is_finite() || horizon_s <= 0.0 {
            return Err(SequenceError::BadHorizon(horizon_s));
        }
        for (i, p) in pulses.iter().enumerate() {
            p.validate(i)?;
            if p.end_s() > horizon_s {
                return Err(SequenceError::ExceedsHorizon {
                    label: p.label.clone(),
                    end: p.end_s(),
                    horizon: horizon_s,
                });
            }
        }
        for transition in [Transition::Optical13, Transition::Optical23] {
            let mut on_transition: Vec<&Pulse> =
                pulses.iter().filter(|p| p.transition == transition).collect();
            on_transition.sort_by(|a, b| a.start_s.partial_cmp(&b.start_s).unwrap());
            for pair in on_transition.windows(2) {
                // Half-open activity makes touching pulses disjoint.
                if pair[1].start_s < pair[0].end_s() {
                    return Err(SequenceError::Overlap {
                        first: pair[0].label.clone(),
                        second: pair[1].label.clone(),
                        transition: transition.name(),
                    });
                }
            }
        }
        Ok(PulseSequence {
            horizon_s,
            pulses,
            scenario: scenario.to_string(),
        })
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn scenario(&self) -> &str {
        &self.scenario
    }

    pub fn find_pulse(&self, label: &str) -> Option<&Pulse> {
        self.pulses.iter().find(|p| p.label == label)
    }

    pub fn last_pulse_end(&self) -> f64 {
        self.pulses.iter().map(Pulse::end_s).fold(0.0, f64::max)
    }

    /// Net drive at time `t`: active pulses summed as complex fields per
    /// transition. Same-transition pulses never overlap, so the sum is a
    /// formality that keeps the combination rule explicit.
    pub fn drive_at(&self, t: f64) -> DriveSample {
        let mut field_13 = C64::new(0.0, 0.0);
        let mut field_23 = C64::new(0.0, 0.0);
        for p in self.pulses.iter().filter(|p| p.is_active(t)) {
            let field = C64::from_polar(p.rabi_frequency(), p.phase_rad);
            match p.transition {
                Transition::Optical13 => field_13 += field,
                Transition::Optical23 => field_23 += field,
            }
        }
        let polar = |f: C64| {
            if f.norm() > 0.0 {
                (f.norm(), f.arg())
            } else {
                (0.0, 0.0)
            }
        };
        let (rabi_13, phase_13) = polar(field_13);
        let (rabi_23, phase_23) = polar(field_23);
        DriveSample {
            rabi_13,
            phase_13,
            rabi_23,
            phase_23,
        }
    }

    /// Copy of the sequence with the pulse labelled `label` replaced.
    pub fn with_replaced_pulse(&self, label: &str, pulse: Pulse) -> Result<Self, SequenceError> {
        if self.find_pulse(label).is_none() {
            return Err(SequenceError::MissingPulse(label.to_string()));
        }
        let pulses = self
            .pulses
            .iter()
            .map(|p| {
                if p.label == label {
                    pulse.clone()
                } else {
                    p.clone()
                }
            })
            .collect();
        PulseSequence::new(self.horizon_s, pulses, &self.scenario)
    }
}

impl DriveSchedule for PulseSequence {
    fn sample(&self, t: f64) -> DriveSample {
        self.drive_at(t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .pulses
            .iter()
            .flat_map(|p| [p.start_s, p.end_s()])
            .collect();
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup();
        ts
    }

    fn is_driven(&self, t: f64) -> bool {
        self.pulses.iter().any(|p| p.is_active(t))
    }
}

/// Timing of a data/write/read stimulated-echo sequence. All three pulses
/// share one duration and area and drive `|1>-|3>` with zero field phase.
#[derive(Clone, Copy, Debug)]
pub struct ThreePulseParams {
    pub t_d: f64,
    pub t_w: f64,
    pub t_r: f64,
    pub pulse_duration: f64,
    pub area: f64,
    pub horizon: f64,
}

impl ThreePulseParams {
    /// Reference timing: pi/2 pulses of 100 ns at 5, 10 and 51 us with a
    /// 60 us horizon, placing the echo at 56 us.
    pub fn reference() -> Self {
        ThreePulseParams {
            t_d: 5e-6,
            t_w: 10e-6,
            t_r: 51e-6,
            pulse_duration: 100e-9,
            area: PI / 2.0,
            horizon: 60e-6,
        }
    }
}

/// Deshelling pair appended to a three-pulse echo: B1 moves the excited
/// population to the spin state right after the write pulse, B2 brings it
/// back before the read pulse. Durations scale with area at fixed Rabi
/// frequency (`b_duration_per_pi` seconds per pi of area).
#[derive(Clone, Copy, Debug)]
pub struct LockedEchoParams {
    pub base: ThreePulseParams,
    pub t_b1: f64,
    pub t_b2: f64,
    pub area_b1: f64,
    pub area_b2: f64,
    pub b_duration_per_pi: f64,
}

impl LockedEchoParams {
    /// Reference deshelling pair: pi at 10.1 us, 3*pi at 50 us, 100 ns per pi.
    pub fn reference() -> Self {
        LockedEchoParams {
            base: ThreePulseParams::reference(),
            t_b1: 10.1e-6,
            t_b2: 50e-6,
            area_b1: PI,
            area_b2: 3.0 * PI,
            b_duration_per_pi: 100e-9,
        }
    }
}

/// Stimulated-echo sequence: D, W, R on `|1>-|3>`.
pub fn build_three_pulse_echo(p: &ThreePulseParams) -> Result<PulseSequence, SequenceError> {
    if !(p.t_d < p.t_w && p.t_w < p.t_r) {
        return Err(SequenceError::InvalidOrdering(format!(
            "need t_D < t_W < t_R, got {:.3e}, {:.3e}, {:.3e}",
            p.t_d, p.t_w, p.t_r
        )));
    }
    let pulse = |label: &str, start: f64| Pulse {
        label: label.to_string(),
        transition: Transition::Optical13,
        start_s: start,
        duration_s: p.pulse_duration,
        area_rad: p.area,
        phase_rad: 0.0,
    };
    PulseSequence::new(
        p.horizon,
        vec![pulse("D", p.t_d), pulse("W", p.t_w), pulse("R", p.t_r)],
        "",
    )
}

/// Stimulated echo with a B1/B2 deshelling pair on `|2>-|3>`.
pub fn build_locked_echo(p: &LockedEchoParams) -> Result<PulseSequence, SequenceError> {
    if !(p.base.t_w < p.t_b1 && p.t_b1 < p.t_b2 && p.t_b2 < p.base.t_r) {
        return Err(SequenceError::InvalidOrdering(format!(
            "need t_W < t_B1 < t_B2 < t_R, got {:.3e}, {:.3e}, {:.3e}, {:.3e}",
            p.base.t_w, p.t_b1, p.t_b2, p.base.t_r
        )));
    }
    if p.b_duration_per_pi <= 0.0 {
        return Err(SequenceError::InvalidOrdering(
            "b_duration_per_pi must be positive".to_string(),
        ));
    }
    let base = build_three_pulse_echo(&p.base)?;
    let b_pulse = |label: &str, start: f64, area: f64| Pulse {
        label: label.to_string(),
        transition: Transition::Optical23,
        start_s: start,
        duration_s: (area / PI) * p.b_duration_per_pi,
        area_rad: area,
        phase_rad: 0.0,
    };
    let mut pulses = base.pulses().to_vec();
    pulses.push(b_pulse("B1", p.t_b1, p.area_b1));
    pulses.push(b_pulse("B2", p.t_b2, p.area_b2));
    PulseSequence::new(p.base.horizon, pulses, "")
}

/// Parse and validate a JSON sequence config. Parsing and validation are
/// separate stages so syntax errors carry line context while validation
/// errors keep their typed form.
pub fn parse_sequence_config(text: &str) -> Result<PulseSequence, ConfigError> {
    let raw: SequenceConfig = serde_json::from_str(text)?;
    Ok(PulseSequence::try_from(raw)?)
}

/// Serialize a sequence back to its JSON config form.
pub fn serialize_sequence_config(seq: &PulseSequence) -> String {
    serde_json::to_string_pretty(seq).expect("sequence serialization cannot fail")
}

/// Same sequence tagged with a scenario name (metadata only).
pub fn with_scenario(seq: &PulseSequence, scenario: &str) -> PulseSequence {
    PulseSequence::new(seq.horizon_s(), seq.pulses().to_vec(), scenario)
        .expect("revalidation of a valid sequence cannot fail")
}
