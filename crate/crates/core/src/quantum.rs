//! Single-atom dynamics of a three-level lambda system driven on its two
//! optical transitions.
//!
//! Level ordering: `|1>` is the populated ground state, `|2>` the auxiliary
//! spin ground state, `|3>` the optically excited state. In the rotating
//! frame used throughout, the inhomogeneous detuning `delta` sits on `|3>`
//! and the spin transition `|1>-|2>` carries no detuning:
//!
//! ```text
//! H/hbar = delta |3><3|
//!        - (omega_p/2) (e^{i phi_p} |3><1| + h.c.)
//!        - (omega_c/2) (e^{i phi_c} |3><2| + h.c.)
//! ```
//!
//! All rates and frequencies are angular (rad/s); quantities quoted in Hz
//! must be multiplied by 2*pi before they reach this module. Relaxation is
//! modelled by trace-conserving population transfer `|3> -> |1>`,
//! `|3> -> |2>`, `|2> -> |1>` plus independent transverse decay of each
//! coherence, so the trace of the equation of motion vanishes identically.

use crate::mat3::Mat3;
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Matrix index of the populated ground state `|1>`.
pub const GROUND: usize = 0;
/// Matrix index of the auxiliary spin ground state `|2>`.
pub const SPIN: usize = 1;
/// Matrix index of the optically excited state `|3>`.
pub const EXCITED: usize = 2;

/// Times closer than this (seconds) are treated as the same mesh event.
pub(crate) const TIME_EPS: f64 = 1e-15;

/// Trace drift beyond this aborts a propagation as numerically divergent.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-4;

/// Coherence magnitudes below this leave the phase undefined.
pub const PHASE_MAGNITUDE_FLOOR: f64 = 1e-9;

#[derive(Error, Debug)]
pub enum StateError {
    #[error("matrix is not Hermitian: deviation {0:.3e} exceeds 1e-12")]
    NotHermitian(f64),
    #[error("trace must be 1, got deviation {0:.3e}")]
    BadTrace(f64),
    #[error("matrix is not positive semidefinite: smallest eigenvalue {0:.3e}")]
    NotPositive(f64),
    #[error("state vector has zero norm")]
    ZeroState,
}

#[derive(Error, Debug)]
pub enum PropagationError {
    #[error("step plan entries must be positive: dt_pulse={dt_pulse:.3e}, dt_idle={dt_idle:.3e}, snapshot={snapshot:.3e}")]
    InvalidStepPlan {
        dt_pulse: f64,
        dt_idle: f64,
        snapshot: f64,
    },
    #[error("time span must satisfy t1 > t0, got [{t0:.3e}, {t1:.3e}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("decay rates must be finite and non-negative")]
    InvalidDecays,
    #[error("integration diverged at t = {t:.6e} s: trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT:.0e} (step too coarse for the drive)")]
    Diverged { t: f64, drift: f64 },
}

#[derive(Error, Debug)]
pub enum PhaseError {
    #[error("element ({i},{j}) is outside the stored 3x3 density matrix (indices are 1-based)")]
    ElementOutOfRange { i: usize, j: usize },
    #[error("trajectory holds no samples")]
    EmptyTrajectory,
}

/// Density matrix of the three-level atom. Hermitian, unit trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix(Mat3);

impl DensityMatrix {
    /// Atom at rest: all population in `|1>`.
    pub fn ground() -> Self {
        DensityMatrix(Mat3::from_diag([1.0, 0.0, 0.0]))
    }

    /// Pure state built from (unnormalized) amplitudes on `(|1>, |2>, |3>)`.
    pub fn pure(amplitudes: [C64; 3]) -> Result<Self, StateError> {
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sqr <= 0.0 {
            return Err(StateError::ZeroState);
        }
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = amplitudes[i] * amplitudes[j].conj() / norm_sqr;
            }
        }
        Ok(DensityMatrix(m))
    }

    /// Validating constructor: Hermitian to 1e-12, unit trace to 1e-6,
    /// positive semidefinite to -1e-6.
    pub fn from_matrix(m: Mat3) -> Result<Self, StateError> {
        let herm = m.hermiticity_error();
        if herm > 1e-12 {
            return Err(StateError::NotHermitian(herm));
        }
        let tr = (m.trace() - C64::new(1.0, 0.0)).norm();
        if tr > 1e-6 {
            return Err(StateError::BadTrace(tr));
        }
        let eig = m.min_eigenvalue_hermitian();
        if eig < -1e-6 {
            return Err(StateError::NotPositive(eig));
        }
        Ok(DensityMatrix(m))
    }

    /// Wrap integrator output without re-validating; invariants are checked
    /// separately by the health scans.
    pub(crate) fn unchecked(m: Mat3) -> Self {
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    /// Element by the 1-based physics indices, e.g. `elem(1, 3)` for rho_13.
    pub fn elem(&self, i: usize, j: usize) -> C64 {
        assert!((1..=3).contains(&i) && (1..=3).contains(&j));
        self.0 .0[i - 1][j - 1]
    }

    pub fn rho11(&self) -> f64 {
        self.0 .0[GROUND][GROUND].re
    }

    pub fn rho22(&self) -> f64 {
        self.0 .0[SPIN][SPIN].re
    }

    pub fn rho33(&self) -> f64 {
        self.0 .0[EXCITED][EXCITED].re
    }

    pub fn rho12(&self) -> C64 {
        self.0 .0[GROUND][SPIN]
    }

    pub fn rho13(&self) -> C64 {
        self.0 .0[GROUND][EXCITED]
    }

    pub fn rho23(&self) -> C64 {
        self.0 .0[SPIN][EXCITED]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.0.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.min_eigenvalue_hermitian()
    }
}

/// Population-transfer and transverse decay rates, angular (rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DecayRates {
    /// `|3> -> |1>` population transfer.
    pub pop_31: f64,
    /// `|3> -> |2>` population transfer.
    pub pop_32: f64,
    /// `|2> -> |1>` population transfer.
    pub pop_21: f64,
    /// Transverse decay of rho_13 / rho_31.
    pub coh_31: f64,
    /// Transverse decay of rho_23 / rho_32.
    pub coh_32: f64,
    /// Transverse decay of rho_12 / rho_21.
    pub coh_21: f64,
}

impl DecayRates {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_valid(&self) -> bool {
        [
            self.pop_31,
            self.pop_32,
            self.pop_21,
            self.coh_31,
            self.coh_32,
            self.coh_21,
        ]
        .iter()
        .all(|r| r.is_finite() && *r >= 0.0)
    }
}

/// Instantaneous drive on the two optical transitions. Rabi frequencies are
/// non-negative angular frequencies; `p` couples `|1>-|3>`, `c` couples
/// `|2>-|3>`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriveSample {
    pub rabi_13: f64,
    pub phase_13: f64,
    pub rabi_23: f64,
    pub phase_23: f64,
}

/// Piecewise-constant drive program. The sample must be constant between
/// consecutive breakpoints; rectangular pulse sequences satisfy this by
/// construction, and the integrator exploits it by evaluating the
/// Hamiltonian once per mesh interval.
pub trait DriveSchedule {
    fn sample(&self, t: f64) -> DriveSample;

    /// Times at which the drive may change discontinuously, ascending.
    fn breakpoints(&self) -> Vec<f64>;

    /// True when `t` lies inside a driven segment; selects the fine step.
    fn is_driven(&self, t: f64) -> bool;
}

/// Uniform drive over the whole span, handy for bare Rabi problems.
#[derive(Clone, Copy, Debug)]
pub struct ConstantDrive(pub DriveSample);

impl DriveSchedule for ConstantDrive {
    fn sample(&self, _t: f64) -> DriveSample {
        self.0
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn is_driven(&self, _t: f64) -> bool {
        self.0.rabi_13 > 0.0 || self.0.rabi_23 > 0.0
    }
}

/// Integration step plan: fine step inside pulses, coarse step in the idle
/// gaps, state snapshots on a uniform sampling grid (plus every drive
/// breakpoint, so pulse edges are sampled exactly).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPlan {
    pub dt_pulse: f64,
    pub dt_idle: f64,
    pub snapshot: f64,
}

impl Default for StepPlan {
    fn default() -> Self {
        StepPlan {
            dt_pulse: 0.5e-9,
            dt_idle: 5e-9,
            snapshot: 50e-9,
        }
    }
}

impl StepPlan {
    pub fn validate(&self) -> Result<(), PropagationError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if ok(self.dt_pulse) && ok(self.dt_idle) && ok(self.snapshot) {
            Ok(())
        } else {
            Err(PropagationError::InvalidStepPlan {
                dt_pulse: self.dt_pulse,
                dt_idle: self.dt_idle,
                snapshot: self.snapshot,
            })
        }
    }

    /// Same sampling grid with both integration steps halved, for
    /// convergence checks.
    pub fn halved(&self) -> Self {
        StepPlan {
            dt_pulse: self.dt_pulse / 2.0,
            dt_idle: self.dt_idle / 2.0,
            snapshot: self.snapshot,
        }
    }
}

/// Rotating-frame Hamiltonian (units of angular frequency) for one detuning
/// class under the given drive.
pub fn hamiltonian(drive: &DriveSample, detuning: f64) -> Mat3 {
    debug_assert!(drive.rabi_13 >= 0.0 && drive.rabi_23 >= 0.0);
    let mut h = Mat3::zeros();
    h.0[EXCITED][EXCITED] = C64::new(detuning, 0.0);
    if drive.rabi_13 != 0.0 {
        let c = C64::from_polar(0.5 * drive.rabi_13, drive.phase_13);
        h.0[EXCITED][GROUND] = -c;
        h.0[GROUND][EXCITED] = -c.conj();
    }
    if drive.rabi_23 != 0.0 {
        let c = C64::from_polar(0.5 * drive.rabi_23, drive.phase_23);
        h.0[EXCITED][SPIN] = -c;
        h.0[SPIN][EXCITED] = -c.conj();
    }
    h
}

/// Right-hand side of the equation of motion: `-i[H, rho]` plus the decay
/// terms. The population-transfer terms cancel in the trace identically.
pub fn derivative(rho: &Mat3, hamiltonian: &Mat3, decays: &DecayRates) -> Mat3 {
    let mut d = (*hamiltonian * *rho - *rho * *hamiltonian) * C64::new(0.0, -1.0);
    let r = &rho.0;
    let t31 = r[EXCITED][EXCITED] * decays.pop_31;
    let t32 = r[EXCITED][EXCITED] * decays.pop_32;
    let t21 = r[SPIN][SPIN] * decays.pop_21;
    d.0[EXCITED][EXCITED] -= t31 + t32;
    d.0[GROUND][GROUND] += t31 + t21;
    d.0[SPIN][SPIN] += t32 - t21;
    d.0[GROUND][EXCITED] -= r[GROUND][EXCITED] * decays.coh_31;
    d.0[EXCITED][GROUND] -= r[EXCITED][GROUND] * decays.coh_31;
    d.0[SPIN][EXCITED] -= r[SPIN][EXCITED] * decays.coh_32;
    d.0[EXCITED][SPIN] -= r[EXCITED][SPIN] * decays.coh_32;
    d.0[GROUND][SPIN] -= r[GROUND][SPIN] * decays.coh_21;
    d.0[SPIN][GROUND] -= r[SPIN][GROUND] * decays.coh_21;
    d
}

fn rk4_step(rho: &mut Mat3, h: &Mat3, decays: &DecayRates, dt: f64) {
    let k1 = derivative(rho, h, decays);
    let k2 = derivative(&(*rho + k1 * (dt / 2.0)), h, decays);
    let k3 = derivative(&(*rho + k2 * (dt / 2.0)), h, decays);
    let k4 = derivative(&(*rho + k3 * dt), h, decays);
    *rho += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
}

/// Recorded evolution of one detuning class.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub detuning: f64,
}

/// Worst-case physicality measures over a trajectory.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrajectoryHealth {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds no samples")
    }

    /// Complex series of one 1-based element, e.g. `(1, 3)` for rho_13.
    pub fn element_series(&self, i: usize, j: usize) -> Result<Vec<C64>, PhaseError> {
        if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
            return Err(PhaseError::ElementOutOfRange { i, j });
        }
        Ok(self.states.iter().map(|s| s.elem(i, j)).collect())
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at_or_after(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&x| x >= t - TIME_EPS)
    }

    /// Index of the last sample at or before `t`.
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        self.times.iter().rposition(|&x| x <= t + TIME_EPS)
    }

    pub fn health(&self) -> TrajectoryHealth {
        let mut h = TrajectoryHealth {
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        };
        for s in &self.states {
            h.max_trace_drift = h
                .max_trace_drift
                .max((s.trace() - C64::new(1.0, 0.0)).norm());
            h.max_hermiticity_error = h.max_hermiticity_error.max(s.hermiticity_error());
            h.min_eigenvalue = h.min_eigenvalue.min(s.min_eigenvalue());
        }
        h
    }
}

/// Fixed-step RK4 propagation of one detuning class from `span.0` to
/// `span.1`.
///
/// The time mesh is the union of the uniform sampling grid, the drive
/// breakpoints and the span ends; each mesh interval is tiled with an
/// integer number of RK4 steps no longer than the plan's target for that
/// interval. Because the drive is piecewise constant between breakpoints,
/// the Hamiltonian is evaluated once per interval (at its midpoint) and the
/// integration inside the interval is autonomous. A snapshot is recorded at
/// every mesh event; the trace is checked there and the run aborts if it
/// drifts beyond `TRACE_DRIFT_LIMIT`.
pub fn propagate<S>(
    rho0: &DensityMatrix,
    schedule: &S,
    detuning: f64,
    decays: &DecayRates,
    span: (f64, f64),
    plan: &StepPlan,
) -> Result<Trajectory, PropagationError>
where
    S: DriveSchedule + ?Sized,
{
    plan.validate()?;
    if !decays.is_valid() {
        return Err(PropagationError::InvalidDecays);
    }
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(PropagationError::InvalidSpan { t0, t1 });
    }

    let mut events: Vec<f64> = vec![t0, t1];
    let mut k = 1usize;
    loop {
        let t = t0 + (k as f64) * plan.snapshot;
        if t >= t1 - TIME_EPS {
            break;
        }
        events.push(t);
        k += 1;
    }
    for b in schedule.breakpoints() {
        if b > t0 + TIME_EPS && b < t1 - TIME_EPS {
            events.push(b);
        }
    }
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS);

    let mut rho = *rho0.matrix();
    let mut times = Vec::with_capacity(events.len());
    let mut states = Vec::with_capacity(events.len());
    times.push(events[0]);
    states.push(DensityMatrix::unchecked(rho));

    for w in events.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let h = hamiltonian(&schedule.sample(mid), detuning);
        let dt_target = if schedule.is_driven(mid) {
            plan.dt_pulse
        } else {
            plan.dt_idle
        };
        let steps = (((b - a) / dt_target).ceil() as usize).max(1);
        let dt = (b - a) / steps as f64;
        for _ in 0..steps {
            rk4_step(&mut rho, &h, decays, dt);
        }
        let drift = (rho.trace() - C64::new(1.0, 0.0)).norm();
        // Negated comparison so a NaN trace also counts as divergence.
        if !(drift <= TRACE_DRIFT_LIMIT) {
            return Err(PropagationError::Diverged { t: b, drift });
        }
        times.push(b);
        states.push(DensityMatrix::unchecked(rho));
    }

    Ok(Trajectory {
        times,
        states,
        detuning,
    })
}

/// Unwrapped phase of one coherence along a trajectory. Samples whose
/// magnitude falls below `PHASE_MAGNITUDE_FLOOR` carry the last defined
/// phase forward and are flagged undefined.
#[derive(Clone, Debug)]
pub struct PhaseSeries {
    pub times: Vec<f64>,
    pub phase: Vec<f64>,
    pub defined: Vec<bool>,
}

fn wrap_to_pi(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    x - tau * (x / tau).round()
}

pub fn coherence_phase(traj: &Trajectory, i: usize, j: usize) -> Result<PhaseSeries, PhaseError> {
    if traj.is_empty() {
        return Err(PhaseError::EmptyTrajectory);
    }
    let series = traj.element_series(i, j)?;
    let mut phase = Vec::with_capacity(series.len());
    let mut defined = Vec::with_capacity(series.len());
    let mut last: Option<(f64, f64)> = None; // (unwrapped, raw)
    for v in &series {
        if v.norm() < PHASE_MAGNITUDE_FLOOR {
            phase.push(last.map_or(0.0, |(u, _)| u));
            defined.push(false);
        } else {
            let raw = v.arg();
            let unwrapped = match last {
                None => raw,
                Some((u, prev_raw)) => u + wrap_to_pi(raw - prev_raw),
            };
            phase.push(unwrapped);
            defined.push(true);
            last = Some((unwrapped, raw));
        }
    }
    Ok(PhaseSeries {
        times: traj.times.clone(),
        phase,
        defined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn resonant_13(rabi: f64) -> ConstantDrive {
        ConstantDrive(DriveSample {
            rabi_13: rabi,
            ..Default::default()
        })
    }

    fn resonant_23(rabi: f64) -> ConstantDrive {
        ConstantDrive(DriveSample {
            rabi_23: rabi,
            ..Default::default()
        })
    }

    #[test]
    fn hamiltonian_vanishes_without_drive_or_detuning() {
        let h = hamiltonian(&DriveSample::default(), 0.0);
        assert_eq!(h, Mat3::zeros());
    }

    #[test]
    fn hamiltonian_couples_probe_transition_symmetrically() {
        let drive = DriveSample {
            rabi_13: TAU * 1e6,
            ..Default::default()
        };
        let h = hamiltonian(&drive, 0.0);
        let expect = -PI * 1e6;
        assert_abs_diff_eq!(h.0[EXCITED][GROUND].re, expect, epsilon = 1e-3);
        assert_abs_diff_eq!(h.0[GROUND][EXCITED].re, expect, epsilon = 1e-3);
        assert_eq!(h.0[EXCITED][GROUND].im, 0.0);
        assert_eq!(h.0[SPIN][EXCITED], C64::new(0.0, 0.0));
        assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn hamiltonian_detuning_sits_on_excited_state() {
        let h = hamiltonian(&DriveSample::default(), TAU * 30e3);
        assert_eq!(h.0[EXCITED][EXCITED].re, TAU * 30e3);
        assert_eq!(h.0[GROUND][GROUND], C64::new(0.0, 0.0));
        assert_eq!(h.0[SPIN][SPIN], C64::new(0.0, 0.0));
    }

    #[test]
    fn derivative_of_resting_atom_is_zero() {
        let rho = DensityMatrix::ground();
        let d = derivative(rho.matrix(), &Mat3::zeros(), &DecayRates::none());
        assert_eq!(d, Mat3::zeros());
    }

    #[test]
    fn derivative_moves_excited_population_down_both_branches() {
        let rho = Mat3::from_diag([0.0, 0.0, 1.0]);
        let decays = DecayRates {
            pop_31: 100.0,
            pop_32: 100.0,
            ..Default::default()
        };
        let d = derivative(&rho, &Mat3::zeros(), &decays);
        assert_abs_diff_eq!(d.0[EXCITED][EXCITED].re, -200.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.0[GROUND][GROUND].re, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.0[SPIN][SPIN].re, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.trace().norm(), 0.0, epsilon = 1e-18);
    }

    #[test]
    fn resonant_rabi_oscillation_matches_closed_form() {
        // rho33(t) = sin^2(Omega t / 2) for a resonant two-level drive.
        for &mhz in &[0.1, 1.0, 10.0] {
            let omega = TAU * mhz * 1e6;
            let horizon = 3.0 * TAU / omega;
            let traj = propagate(
                &DensityMatrix::ground(),
                &resonant_13(omega),
                0.0,
                &DecayRates::none(),
                (0.0, horizon),
                &StepPlan::default(),
            )
            .unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let expect = (omega * t / 2.0).sin().powi(2);
                assert!(
                    (s.rho33() - expect).abs() < 1e-4,
                    "Omega/2pi = {mhz} MHz, t = {t:.3e}: rho33 = {}, expected {expect}",
                    s.rho33()
                );
            }
        }
    }

    #[test]
    fn detuned_rabi_oscillation_matches_closed_form() {
        // rho33(t) = (Omega^2 / W^2) sin^2(W t / 2), W = sqrt(Omega^2 + delta^2).
        let omega = TAU * 1e6;
        for &delta in &[TAU * 0.5e6, -TAU * 0.5e6, TAU * 2e6] {
            let w = (omega * omega + delta * delta).sqrt();
            let traj = propagate(
                &DensityMatrix::ground(),
                &resonant_13(omega),
                delta,
                &DecayRates::none(),
                (0.0, 3.0 * TAU / omega),
                &StepPlan::default(),
            )
            .unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let expect = (omega / w).powi(2) * (w * t / 2.0).sin().powi(2);
                assert!(
                    (s.rho33() - expect).abs() < 1e-4,
                    "delta = {delta:.3e}, t = {t:.3e}"
                );
            }
        }
    }

    #[test]
    fn full_transfer_pulse_moves_population_between_spin_and_excited() {
        // pi pulse on |2>-|3> empties |3> into |2>.
        let rho0 = DensityMatrix::pure([
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let omega = TAU * 5e6;
        let traj = propagate(
            &rho0,
            &resonant_23(omega),
            0.0,
            &DecayRates::none(),
            (0.0, PI / omega),
            &StepPlan::default(),
        )
        .unwrap();
        let end = traj.final_state();
        assert_abs_diff_eq!(end.rho33(), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(end.rho22(), 0.5, epsilon = 1e-6);
        // The transferred coherence gains a quarter-turn phase.
        let before = rho0.rho13().arg();
        let after = end.rho12().arg();
        assert_abs_diff_eq!((after - before).abs(), FRAC_PI_2, epsilon = 1e-3);
    }

    #[test]
    fn round_trip_transfer_flips_coherence_phase() {
        // 2*pi on |2>-|3>: populations restored, rho13 phase shifted by pi.
        let rho0 = DensityMatrix::pure([
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let omega = TAU * 5e6;
        let traj = propagate(
            &rho0,
            &resonant_23(omega),
            0.0,
            &DecayRates::none(),
            (0.0, TAU / omega),
            &StepPlan::default(),
        )
        .unwrap();
        let end = traj.final_state();
        assert_abs_diff_eq!(end.rho33(), rho0.rho33(), epsilon = 1e-4);
        assert_abs_diff_eq!(end.rho11(), rho0.rho11(), epsilon = 1e-4);
        let shift = wrap_to_pi(end.rho13().arg() - rho0.rho13().arg());
        assert_abs_diff_eq!(shift.abs(), PI, epsilon = 1e-3);
    }

    #[test]
    fn double_round_trip_restores_coherence_phase() {
        // 4*pi on |2>-|3>: rho13 phase back to its pre-pulse value.
        let rho0 = DensityMatrix::pure([
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let omega = TAU * 5e6;
        let traj = propagate(
            &rho0,
            &resonant_23(omega),
            0.0,
            &DecayRates::none(),
            (0.0, 2.0 * TAU / omega),
            &StepPlan::default(),
        )
        .unwrap();
        let shift = wrap_to_pi(traj.final_state().rho13().arg() - rho0.rho13().arg());
        assert_abs_diff_eq!(shift, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn free_coherence_phase_slope_matches_detuning_magnitude() {
        let rho0 = DensityMatrix::pure([
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let delta = TAU * 30e3;
        let traj = propagate(
            &rho0,
            &ConstantDrive(DriveSample::default()),
            delta,
            &DecayRates::none(),
            (0.0, 10e-6),
            &StepPlan::default(),
        )
        .unwrap();
        let series = coherence_phase(&traj, 1, 3).unwrap();
        assert!(series.defined.iter().all(|&d| d));
        let slope = (series.phase.last().unwrap() - series.phase[0])
            / (series.times.last().unwrap() - series.times[0]);
        // Sign is a frame convention; the magnitude is the detuning.
        assert!(
            (slope.abs() - delta).abs() / delta < 1e-3,
            "slope = {slope:.6e}"
        );
    }

    #[test]
    fn zero_detuning_coherence_phase_is_constant() {
        let rho0 = DensityMatrix::pure([
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0 / 2.0f64.sqrt(), 0.0),
        ])
        .unwrap();
        let traj = propagate(
            &rho0,
            &ConstantDrive(DriveSample::default()),
            0.0,
            &DecayRates::none(),
            (0.0, 10e-6),
            &StepPlan::default(),
        )
        .unwrap();
        let series = coherence_phase(&traj, 1, 3).unwrap();
        for p in &series.phase {
            assert_abs_diff_eq!(*p, series.phase[0], epsilon = 1e-9);
        }
    }

    #[test]
    fn phase_of_empty_coherence_is_flagged_undefined() {
        let traj = propagate(
            &DensityMatrix::ground(),
            &ConstantDrive(DriveSample::default()),
            TAU * 30e3,
            &DecayRates::none(),
            (0.0, 1e-6),
            &StepPlan::default(),
        )
        .unwrap();
        let series = coherence_phase(&traj, 1, 3).unwrap();
        assert!(series.defined.iter().all(|&d| !d));
        assert!(series.phase.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn opposite_detunings_give_negated_conjugate_coherence() {
        // With real drive parameters, flipping |3> maps the equation of
        // motion at +delta onto the one at -delta, so
        // rho13(-delta, t) = -conj(rho13(+delta, t)).
        let drive = resonant_13(TAU * 1e6);
        let decays = DecayRates {
            pop_31: TAU * 2e3,
            pop_32: TAU * 2e3,
            coh_31: TAU * 2e3,
            coh_32: TAU * 2e3,
            ..Default::default()
        };
        let delta = TAU * 300e3;
        let plus = propagate(
            &DensityMatrix::ground(),
            &drive,
            delta,
            &decays,
            (0.0, 4e-6),
            &StepPlan::default(),
        )
        .unwrap();
        let minus = propagate(
            &DensityMatrix::ground(),
            &drive,
            -delta,
            &decays,
            (0.0, 4e-6),
            &StepPlan::default(),
        )
        .unwrap();
        for (p, m) in plus.states.iter().zip(&minus.states) {
            let expect = -p.rho13().conj();
            assert!((m.rho13() - expect).norm() < 1e-8);
        }
    }

    #[test]
    fn propagation_rejects_non_positive_step() {
        let plan = StepPlan {
            dt_pulse: 0.0,
            ..Default::default()
        };
        let err = propagate(
            &DensityMatrix::ground(),
            &ConstantDrive(DriveSample::default()),
            0.0,
            &DecayRates::none(),
            (0.0, 1e-6),
            &plan,
        )
        .unwrap_err();
        assert!(matches!(err, PropagationError::InvalidStepPlan { .. }));
    }

    #[test]
    fn propagation_rejects_inverted_span() {
        let err = propagate(
            &DensityMatrix::ground(),
            &ConstantDrive(DriveSample::default()),
            0.0,
            &DecayRates::none(),
            (1e-6, 0.0),
            &StepPlan::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PropagationError::InvalidSpan { .. }));
    }

    #[test]
    fn runaway_step_reports_divergence() {
        // ~150 rad of rotation per step is far outside RK4 stability.
        let plan = StepPlan {
            dt_pulse: 1e-4,
            dt_idle: 1e-4,
            snapshot: 1e-3,
        };
        let err = propagate(
            &DensityMatrix::ground(),
            &resonant_13(TAU * 240e3),
            0.0,
            &DecayRates::none(),
            (0.0, 10e-3),
            &plan,
        )
        .unwrap_err();
        assert!(matches!(err, PropagationError::Diverged { .. }));
    }

    #[test]
    fn trajectory_health_of_clean_run_is_tight() {
        let traj = propagate(
            &DensityMatrix::ground(),
            &resonant_13(TAU * 1e6),
            TAU * 100e3,
            &DecayRates::none(),
            (0.0, 5e-6),
            &StepPlan::default(),
        )
        .unwrap();
        let h = traj.health();
        assert!(h.max_trace_drift < 1e-9);
        assert!(h.max_hermiticity_error < 1e-12);
        assert!(h.min_eigenvalue > -1e-7);
    }

    #[test]
    fn density_matrix_constructor_rejects_bad_input() {
        let mut m = Mat3::from_diag([0.5, 0.5, 0.0]);
        m.0[0][1] = C64::new(0.1, 0.0);
        assert!(matches!(
            DensityMatrix::from_matrix(m),
            Err(StateError::NotHermitian(_))
        ));
        let m = Mat3::from_diag([0.5, 0.4, 0.0]);
        assert!(matches!(
            DensityMatrix::from_matrix(m),
            Err(StateError::BadTrace(_))
        ));
        let mut m = Mat3::from_diag([0.5, 0.5, 0.0]);
        m.0[0][2] = C64::new(0.6, 0.0);
        m.0[2][0] = C64::new(0.6, 0.0);
        assert!(matches!(
            DensityMatrix::from_matrix(m),
            Err(StateError::NotPositive(_))
        ));
    }
}
