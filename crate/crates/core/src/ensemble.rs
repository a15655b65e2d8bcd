//! Inhomogeneously broadened ensemble: a weighted grid of detuning classes
//! propagated under one pulse sequence, the resulting macroscopic
//! polarization, echo detection, and the B2-area sweep.

use crate::fmt::sci9;
use crate::pulse::{Pulse, PulseSequence, SequenceError};
use crate::quantum::{
    coherence_phase, propagate, DecayRates, DensityMatrix, PhaseError, PropagationError,
    StepPlan, Trajectory,
};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

/// Any single coherence is bounded by 1/2, so a weighted average is too.
/// Small slack absorbs integrator round-off.
const COHERENCE_BOUND: f64 = 0.5 + 1e-9;

#[derive(Error, Debug)]
pub enum EnsembleError {
    #[error("detuning grid invalid: {0}")]
    InvalidGrid(String),
    #[error(
        "discrete grid recurs at {recurrence_s:.4e} s, inside the {horizon_s:.4e} s horizon; \
         use at least {min_classes} classes"
    )]
    GridAliasing {
        recurrence_s: f64,
        horizon_s: f64,
        min_classes: usize,
    },
    #[error("class at detuning {detuning:.6e} rad/s failed")]
    ClassDiverged {
        detuning: f64,
        #[source]
        source: PropagationError,
    },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("sequence has no pulse labelled {0}")]
    MissingPulse(String),
    #[error(
        "B2 area {area_rad:.6e} rad ends at {b2_end_s:.6e} s, past the read pulse at {read_start_s:.6e} s"
    )]
    SweepOverlap {
        area_rad: f64,
        b2_end_s: f64,
        read_start_s: f64,
    },
    #[error("at least one B2 area is required")]
    NoAreas,
    #[error("echo window [{start_s:.4e}, {end_s:.4e}] s invalid: {reason}")]
    InvalidWindow {
        start_s: f64,
        end_s: f64,
        reason: String,
    },
    #[error("echo window contains no samples")]
    EmptyWindow,
    #[error("weighted polarization {0:.3e} exceeds the coherence bound 1/2")]
    CoherenceBound(f64),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Symmetric discrete grid of detuning classes with normalized weights.
#[derive(Clone, Debug)]
pub struct DetuningGrid {
    detunings: Vec<f64>,
    weights: Vec<f64>,
    fwhm_rad: f64,
    span_sigmas: f64,
}

impl DetuningGrid {
    /// Gaussian profile of the given full width at half maximum (rad/s),
    /// sampled on an odd, zero-centred grid spanning `span_sigmas` standard
    /// deviations each side. Detunings come from integer offsets times one
    /// spacing, so the grid is exactly symmetric, weight pair by weight pair.
    pub fn gaussian(
        fwhm_rad: f64,
        classes: usize,
        span_sigmas: f64,
    ) -> Result<Self, EnsembleError> {
        if !fwhm_rad.is_finite() || fwhm_rad <= 0.0 {
            return Err(EnsembleError::InvalidGrid(format!(
                "fwhm must be positive, got {fwhm_rad:.3e}"
            )));
        }
        if !span_sigmas.is_finite() || span_sigmas <= 0.0 {
            return Err(EnsembleError::InvalidGrid(format!(
                "span_sigmas must be positive, got {span_sigmas:.3e}"
            )));
        }
        if classes < 3 || classes % 2 == 0 {
            return Err(EnsembleError::InvalidGrid(format!(
                "classes must be odd and at least 3, got {classes}"
            )));
        }
        let sigma = fwhm_rad / (8.0 * std::f64::consts::LN_2).sqrt();
        let half = (classes - 1) / 2;
        let spacing = span_sigmas * sigma / half as f64;
        let mut detunings = Vec::with_capacity(classes);
        let mut weights = Vec::with_capacity(classes);
        for k in 0..classes {
            let offset = k as i64 - half as i64;
            let delta = offset as f64 * spacing;
            detunings.push(delta);
            weights.push((-(delta * delta) / (2.0 * sigma * sigma)).exp());
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(DetuningGrid {
            detunings,
            weights,
            fwhm_rad,
            span_sigmas,
        })
    }

    /// Degenerate grid holding one class of unit weight.
    pub fn single_class(detuning_rad: f64) -> Self {
        DetuningGrid {
            detunings: vec![detuning_rad],
            weights: vec![1.0],
            fwhm_rad: 0.0,
            span_sigmas: 0.0,
        }
    }

    pub fn classes(&self) -> usize {
        self.detunings.len()
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fwhm_rad(&self) -> f64 {
        self.fwhm_rad
    }

    pub fn span_sigmas(&self) -> f64 {
        self.span_sigmas
    }

    pub fn spacing_rad(&self) -> f64 {
        if self.detunings.len() < 2 {
            0.0
        } else {
            self.detunings[1] - self.detunings[0]
        }
    }

    /// A uniform grid makes every class rephase jointly after one period of
    /// the spacing; any simulated echo repeating at this time is an artifact.
    pub fn recurrence_time_s(&self) -> f64 {
        let spacing = self.spacing_rad();
        if spacing == 0.0 {
            f64::INFINITY
        } else {
            TAU / spacing
        }
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            classes: self.classes(),
            fwhm_rad: self.fwhm_rad,
            span_sigmas: self.span_sigmas,
            spacing_rad: self.spacing_rad(),
            recurrence_time_s: self.recurrence_time_s(),
        }
    }
}

/// Smallest odd class count whose grid recurrence falls beyond `horizon_s`.
pub fn min_classes_for(fwhm_rad: f64, span_sigmas: f64, horizon_s: f64) -> usize {
    let sigma = fwhm_rad / (8.0 * std::f64::consts::LN_2).sqrt();
    let half_min = (horizon_s * span_sigmas * sigma / TAU).floor() as usize + 1;
    (2 * half_min + 1).max(3)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridSummary {
    pub classes: usize,
    pub fwhm_rad: f64,
    pub span_sigmas: f64,
    pub spacing_rad: f64,
    pub recurrence_time_s: f64,
}

/// Worst numerical health markers across every propagated class.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Health {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Health {
    fn fold(mut self, traj: &Trajectory) -> Self {
        let h = traj.health();
        self.max_trace_drift = self.max_trace_drift.max(h.max_trace_drift);
        self.max_hermiticity_error = self.max_hermiticity_error.max(h.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(h.min_eigenvalue);
        self
    }

    fn new() -> Self {
        Health {
            max_trace_drift: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

/// Extra detuning classes to record in full, without ensemble weight.
#[derive(Clone, Debug, Default)]
pub struct RecordOptions {
    pub detunings: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RecordedClass {
    pub detuning: f64,
    pub trajectory: Trajectory,
}

/// Weighted ensemble run: shared sample times, macroscopic polarization
/// `P(t) = sum_k w_k rho13_k(t)`, any fully recorded probe classes, and the
/// worst-case numerical health over all classes.
#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub polarization: Vec<C64>,
    pub recorded: Vec<RecordedClass>,
    pub health: Health,
    pub grid: GridSummary,
    pub horizon_s: f64,
    pub last_pulse_end_s: f64,
}

pub fn run_ensemble(
    rho0: &DensityMatrix,
    sequence: &PulseSequence,
    grid: &DetuningGrid,
    decays: &DecayRates,
    plan: &StepPlan,
    record: &RecordOptions,
) -> Result<EnsembleResult, EnsembleError> {
    let horizon = sequence.horizon_s();
    if grid.recurrence_time_s() <= horizon {
        return Err(EnsembleError::GridAliasing {
            recurrence_s: grid.recurrence_time_s(),
            horizon_s: horizon,
            min_classes: min_classes_for(grid.fwhm_rad(), grid.span_sigmas(), horizon),
        });
    }
    let span = (0.0, horizon);
    let run_class = |&detuning: &f64| {
        propagate(rho0, sequence, detuning, decays, span, plan).map_err(|source| {
            EnsembleError::ClassDiverged { detuning, source }
        })
    };
    let class_runs: Vec<Trajectory> = grid
        .detunings()
        .par_iter()
        .map(run_class)
        .collect::<Result<_, _>>()?;
    let recorded_runs: Vec<Trajectory> = record
        .detunings
        .par_iter()
        .map(run_class)
        .collect::<Result<_, _>>()?;

    let times = class_runs[0].times.clone();
    let mut polarization = vec![C64::new(0.0, 0.0); times.len()];
    // Fixed grid order keeps the floating-point reduction deterministic.
    for (traj, &w) in class_runs.iter().zip(grid.weights()) {
        debug_assert_eq!(traj.len(), times.len());
        for (p, state) in polarization.iter_mut().zip(&traj.states) {
            *p += state.rho13() * w;
        }
    }
    let max_abs = polarization.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if !(max_abs <= COHERENCE_BOUND) {
        return Err(EnsembleError::CoherenceBound(max_abs));
    }

    let mut health = Health::new();
    for traj in class_runs.iter().chain(recorded_runs.iter()) {
        health = health.fold(traj);
    }
    let recorded = record
        .detunings
        .iter()
        .zip(recorded_runs)
        .map(|(&detuning, trajectory)| RecordedClass {
            detuning,
            trajectory,
        })
        .collect();

    Ok(EnsembleResult {
        times,
        polarization,
        recorded,
        health,
        grid: grid.summary(),
        horizon_s: horizon,
        last_pulse_end_s: sequence.last_pulse_end(),
    })
}

/// Search window for the retrieved echo: from one microsecond after the read
/// pulse fires (past the bulk of its free-decay transient) to the horizon.
pub fn default_echo_window(sequence: &PulseSequence) -> (f64, f64) {
    let base = sequence
        .find_pulse("R")
        .map(|p| p.start_s)
        .unwrap_or_else(|| sequence.last_pulse_end());
    (base + 1e-6, sequence.horizon_s())
}

/// Echo found in a window: peak location refined by a parabola through the
/// three samples around the discrete maximum of `|P|`.
#[derive(Clone, Copy, Debug)]
pub struct EchoReport {
    pub window_s: (f64, f64),
    pub peak_time_s: f64,
    pub peak_abs_polarization: f64,
    pub peak_intensity: f64,
    pub no_echo: bool,
}

impl EchoReport {
    pub fn to_json_string(&self) -> String {
        format!(
            "{{\n  \"window_s\": [{}, {}],\n  \"peak_time_s\": {},\n  \"peak_abs_polarization\": {},\n  \"peak_intensity\": {},\n  \"no_echo\": {}\n}}\n",
            sci9(self.window_s.0),
            sci9(self.window_s.1),
            sci9(self.peak_time_s),
            sci9(self.peak_abs_polarization),
            sci9(self.peak_intensity),
            self.no_echo
        )
    }
}

pub fn echo_metrics(
    result: &EnsembleResult,
    window: (f64, f64),
) -> Result<EchoReport, EnsembleError> {
    let (a, b) = window;
    let invalid = |reason: &str| EnsembleError::InvalidWindow {
        start_s: a,
        end_s: b,
        reason: reason.to_string(),
    };
    if !a.is_finite() || !b.is_finite() || a >= b || a < 0.0 {
        return Err(invalid("not an ordered non-negative interval"));
    }
    if b > result.horizon_s * (1.0 + 1e-12) {
        return Err(invalid("extends past the horizon"));
    }
    if a < result.last_pulse_end_s {
        return Err(invalid("overlaps the drive"));
    }
    let eps = 1e-15;
    let lo = result.times.partition_point(|&t| t < a - eps);
    let hi = result.times.partition_point(|&t| t <= b + eps);
    if lo >= hi {
        return Err(EnsembleError::EmptyWindow);
    }
    let abs: Vec<f64> = result.polarization[lo..hi].iter().map(|p| p.norm()).collect();
    let times = &result.times[lo..hi];
    let mut peak = 0usize;
    for (i, v) in abs.iter().enumerate() {
        if *v > abs[peak] {
            peak = i;
        }
    }
    let (mut peak_time, mut peak_abs) = (times[peak], abs[peak]);
    if peak > 0 && peak + 1 < abs.len() {
        // Newton-form parabola on a possibly non-uniform mesh.
        let (t0, t1, t2) = (times[peak - 1], times[peak], times[peak + 1]);
        let (y0, y1, y2) = (abs[peak - 1], abs[peak], abs[peak + 1]);
        let d1 = (y1 - y0) / (t1 - t0);
        let d2 = (y2 - y1) / (t2 - t1);
        let a2 = (d2 - d1) / (t2 - t0);
        if a2 < 0.0 {
            let vertex = ((t0 + t1) / 2.0 - d1 / (2.0 * a2)).clamp(t0, t2);
            let refined = y0 + d1 * (vertex - t0) + a2 * (vertex - t0) * (vertex - t1);
            if refined >= peak_abs {
                peak_time = vertex;
                peak_abs = refined;
            }
        }
    }
    Ok(EchoReport {
        window_s: window,
        peak_time_s: peak_time,
        peak_abs_polarization: peak_abs,
        peak_intensity: peak_abs * peak_abs,
        no_echo: peak_abs == 0.0,
    })
}

/// One point of the B2-area sweep: ensemble echo metrics plus the state of a
/// single recorded probe class around the deshelling pair.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub area_rad: f64,
    pub report: EchoReport,
    pub atom_phase_pre_b1_rad: f64,
    pub atom_phase_end_rad: f64,
    pub atom_rho33_pre_b1: f64,
    pub atom_rho33_end: f64,
    pub phase_recovered: Option<bool>,
}

fn integer_pi_multiple(area_rad: f64) -> Option<u32> {
    let k = area_rad / std::f64::consts::PI;
    let rounded = k.round();
    if (k - rounded).abs() < 1e-9 && rounded >= 0.0 {
        Some(rounded as u32)
    } else {
        None
    }
}

/// Reruns the ensemble for each B2 pulse area at fixed Rabi frequency (the
/// duration scales with area). All areas are validated against the read
/// pulse before any propagation starts.
pub fn sweep_b2_area(
    base: &PulseSequence,
    areas_rad: &[f64],
    grid: &DetuningGrid,
    decays: &DecayRates,
    rho0: &DensityMatrix,
    plan: &StepPlan,
    probe_detuning: f64,
) -> Result<Vec<SweepRow>, EnsembleError> {
    if areas_rad.is_empty() {
        return Err(EnsembleError::NoAreas);
    }
    let missing = |label: &str| EnsembleError::MissingPulse(label.to_string());
    let b2 = base.find_pulse("B2").ok_or_else(|| missing("B2"))?.clone();
    let b1 = base.find_pulse("B1").ok_or_else(|| missing("B1"))?.clone();
    let read = base.find_pulse("R").ok_or_else(|| missing("R"))?.clone();
    let rabi = b2.rabi_frequency();
    for &area in areas_rad {
        if !area.is_finite() || area <= 0.0 {
            return Err(EnsembleError::Sequence(SequenceError::NegativeArea {
                label: b2.label.clone(),
                area,
            }));
        }
        let end = b2.start_s + area / rabi;
        if end > read.start_s {
            return Err(EnsembleError::SweepOverlap {
                area_rad: area,
                b2_end_s: end,
                read_start_s: read.start_s,
            });
        }
    }
    let b1_pi = integer_pi_multiple(b1.area_rad);
    let mut rows = Vec::with_capacity(areas_rad.len());
    for &area in areas_rad {
        let duration = area / rabi;
        let replacement = Pulse {
            label: b2.label.clone(),
            transition: b2.transition,
            start_s: b2.start_s,
            duration_s: duration,
            area_rad: area,
            phase_rad: b2.phase_rad,
        };
        let sequence = base.with_replaced_pulse(&b2.label, replacement)?;
        let record = RecordOptions {
            detunings: vec![probe_detuning],
        };
        let result = run_ensemble(rho0, &sequence, grid, decays, plan, &record)?;
        let report = echo_metrics(&result, default_echo_window(&sequence))?;
        let traj = &result.recorded[0].trajectory;
        let phase = coherence_phase(traj, 1, 3)?;
        // Pulse boundaries are snapshot events, so these lookups are exact.
        let idx_pre = traj
            .index_at_or_before(b1.start_s)
            .expect("B1 start precedes the horizon");
        let idx_end = traj
            .index_at_or_after(b2.start_s + duration)
            .expect("B2 end precedes the horizon");
        let phase_recovered = match (b1_pi, integer_pi_multiple(area)) {
            (Some(p), Some(q)) => Some(crate::leakage::is_phase_recovered(p, q)),
            _ => None,
        };
        rows.push(SweepRow {
            area_rad: area,
            report,
            atom_phase_pre_b1_rad: phase.phase[idx_pre],
            atom_phase_end_rad: phase.phase[idx_end],
            atom_rho33_pre_b1: traj.states[idx_pre].rho33(),
            atom_rho33_end: traj.states[idx_end].rho33(),
            phase_recovered,
        });
    }
    Ok(rows)
}

fn khz_label(detuning_rad: f64) -> String {
    let khz = detuning_rad / (TAU * 1e3);
    if (khz - khz.round()).abs() < 1e-9 {
        format!("{}", khz.round() as i64)
    } else {
        format!("{khz:.3}")
    }
}

/// Ensemble time series as CSV: polarization columns, then per recorded
/// class its excited population and optical-coherence phase.
pub fn write_timeseries_csv(result: &EnsembleResult) -> Result<String, EnsembleError> {
    let mut header = String::from("t_s,re_P,im_P,abs_P,abs_P_sq");
    let mut phases = Vec::with_capacity(result.recorded.len());
    for class in &result.recorded {
        let label = khz_label(class.detuning);
        header.push_str(&format!(",rho33_d{label}khz,phase13_d{label}khz"));
        phases.push(coherence_phase(&class.trajectory, 1, 3)?);
    }
    let mut out = header;
    out.push('\n');
    for (i, &t) in result.times.iter().enumerate() {
        let p = result.polarization[i];
        out.push_str(&format!(
            "{},{},{},{},{}",
            sci9(t),
            sci9(p.re),
            sci9(p.im),
            sci9(p.norm()),
            sci9(p.norm_sqr())
        ));
        for (class, phase) in result.recorded.iter().zip(&phases) {
            out.push_str(&format!(
                ",{},{}",
                sci9(class.trajectory.states[i].rho33()),
                sci9(phase.phase[i])
            ));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Sweep rows as CSV, one line per B2 area.
pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "area_pi,echo_amp,echo_time_s,atom_phase_pre_b1_rad,atom_phase_end_rad,atom_rho33_pre_b1,atom_rho33_end,phase_recovered\n",
    );
    for r in rows {
        let recovered = match r.phase_recovered {
            Some(true) => "true",
            Some(false) => "false",
            None => "",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            sci9(r.area_rad / std::f64::consts::PI),
            sci9(r.report.peak_abs_polarization),
            sci9(r.report.peak_time_s),
            sci9(r.atom_phase_pre_b1_rad),
            sci9(r.atom_phase_end_rad),
            sci9(r.atom_rho33_pre_b1),
            sci9(r.atom_rho33_end),
            recovered
        ));
    }
    out
}
