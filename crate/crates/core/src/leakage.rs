//! Combinatorial model of population routing under repeated imperfect
//! population-transfer pulses between the excited and spin states.
//!
//! Each pi of transfer area moves population across `|2>-|3>` with
//! efficiency `eta` and leaves the complement behind. After `m` pi steps the
//! ensemble splits into terms `B(n, m) * eta^n * (1 - eta)^(m - n)`, where
//! `n` counts completed transfers. The coefficients satisfy
//! `B(n, m) = B(n, m - 1) + B(n - 1, m - 1)`, i.e. they are binomial
//! coefficients, computed here exactly in u64.
//!
//! A term's accumulated optical phase advances by pi/2 per completed
//! transfer, so only terms with `n` divisible by 4 interfere constructively
//! with the unperturbed echo.

use std::f64::consts::{FRAC_PI_2, TAU};
use thiserror::Error;

#[derive(Error, Debug, PartialEq)]
pub enum LeakageError {
    #[error("transfer count n={n} exceeds step count m={m}")]
    BadIndex { n: u32, m: u32 },
    #[error("coefficient table overflows u64 at step count m={m}")]
    Overflow { m: u32 },
    #[error("transfer efficiency must lie in [0, 1], got {0}")]
    InvalidEta(f64),
    #[error("long-separation evaluation needs at least one pi of first-pulse area")]
    LongTNeedsB1,
    #[error("optical depth must be non-negative and finite, got {0}")]
    InvalidDepth(f64),
    #[error("efficiency grid must be non-empty with all values in [0, 1]")]
    InvalidEtaGrid,
    #[error("at least one second-pulse area is required")]
    EmptyCurveList,
}

/// Transfer efficiency of one pi of pulse area through a medium of optical
/// depth `d`: the absorbed fraction `1 - exp(-d)`.
pub fn eta_from_depth(depth: f64) -> f64 {
    -(-depth).exp_m1()
}

/// Bare exponential `exp(-d)`, the transmitted fraction. Complement of
/// `eta_from_depth`; kept so both conventions can be compared directly.
pub fn eta_from_depth_literal(depth: f64) -> f64 {
    (-depth).exp()
}

/// Optical depth of the transfer medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalDepth {
    depth: f64,
}

impl OpticalDepth {
    pub fn from_depth(depth: f64) -> Result<Self, LeakageError> {
        if !depth.is_finite() || depth < 0.0 {
            return Err(LeakageError::InvalidDepth(depth));
        }
        Ok(OpticalDepth { depth })
    }

    /// Depth from an absorption coefficient (1/m) and a path length (m).
    pub fn from_absorption(alpha_per_m: f64, length_m: f64) -> Result<Self, LeakageError> {
        OpticalDepth::from_depth(alpha_per_m * length_m)
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn eta(&self) -> f64 {
        eta_from_depth(self.depth)
    }

    pub fn eta_literal(&self) -> f64 {
        eta_from_depth_literal(self.depth)
    }
}

fn validate_eta(eta: f64) -> Result<(), LeakageError> {
    if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
        return Err(LeakageError::InvalidEta(eta));
    }
    Ok(())
}

/// Row `m` of the coefficient table, all of `B(0, m) ..= B(m, m)`, exact.
fn pascal_row(m: u32) -> Result<Vec<u64>, LeakageError> {
    let mut row = vec![1u64];
    for step in 1..=m {
        let mut next = vec![1u64; step as usize + 1];
        for n in 1..step as usize {
            next[n] = row[n - 1]
                .checked_add(row[n])
                .ok_or(LeakageError::Overflow { m: step })?;
        }
        row = next;
    }
    Ok(row)
}

/// `B(n, m)`: number of transfer histories with `n` completed transfers in
/// `m` pi steps. Equals the binomial coefficient m-choose-n.
pub fn coefficient(n: u32, m: u32) -> Result<u64, LeakageError> {
    if n > m {
        return Err(LeakageError::BadIndex { n, m });
    }
    Ok(pascal_row(m)?[n as usize])
}

/// Which state a term occupies after the pulse train.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Residence {
    Excited,
    Spin,
}

/// One term of the transfer polynomial: `coefficient * eta^n * (1-eta)^(m-n)`
/// with `n = eta_power`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Term {
    pub eta_power: u32,
    pub coefficient: u64,
}

impl Term {
    /// Accumulated optical phase, pi/2 per completed transfer, wrapped to
    /// [0, 2*pi).
    pub fn phase_rad(&self) -> f64 {
        (self.eta_power % 4) as f64 * FRAC_PI_2
    }

    /// Even transfer counts land back in the excited state, odd ones in the
    /// spin state.
    pub fn residence(&self) -> Residence {
        if self.eta_power % 2 == 0 {
            Residence::Excited
        } else {
            Residence::Spin
        }
    }

    /// A term rejoins the echo only when its phase has wound through a full
    /// multiple of 2*pi, i.e. when n is divisible by 4.
    pub fn is_echo_effective(&self) -> bool {
        self.eta_power % 4 == 0
    }

    fn weight(&self, total_pi: u32, eta: f64) -> f64 {
        self.coefficient as f64
            * eta.powi(self.eta_power as i32)
            * (1.0 - eta).powi((total_pi - self.eta_power) as i32)
    }
}

/// Pulse-separation regime relative to the two population lifetimes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    ShortSeparation,
    LongSeparation,
    Intermediate,
}

/// Classifies a storage interval against the excited-state and spin-state
/// population lifetimes. Short keeps every term; long keeps only terms that
/// sat out the interval in the spin state.
#[derive(Clone, Copy, Debug)]
pub struct RegimeSpec {
    pub separation_s: f64,
    pub t1_optical_s: f64,
    pub t1_spin_s: f64,
}

impl RegimeSpec {
    pub fn classify(&self) -> Regime {
        if self.separation_s < self.t1_optical_s / 10.0 {
            Regime::ShortSeparation
        } else if self.separation_s > 10.0 * self.t1_optical_s
            && self.separation_s < self.t1_spin_s / 10.0
        {
            Regime::LongSeparation
        } else {
            Regime::Intermediate
        }
    }
}

/// Population split of a transfer polynomial at a given efficiency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Populations {
    pub excited: f64,
    pub spin: f64,
}

/// Transfer polynomial for a pair of deshelling pulses with integer-pi
/// areas `b1_pi` and `b2_pi`, `m = b1_pi + b2_pi` steps in total.
#[derive(Clone, Debug)]
pub struct LeakagePolynomial {
    amplitude: f64,
    total_pi: u32,
    terms: Vec<Term>,
    regime: Regime,
}

impl LeakagePolynomial {
    /// Both pulses complete before excited-state population decays: every
    /// transfer history survives and the coefficients are one full table row.
    pub fn short_separation(
        b1_pi: u32,
        b2_pi: u32,
        amplitude: f64,
    ) -> Result<Self, LeakageError> {
        let m = b1_pi + b2_pi;
        let terms = pascal_row(m)?
            .into_iter()
            .enumerate()
            .map(|(n, c)| Term {
                eta_power: n as u32,
                coefficient: c,
            })
            .collect();
        Ok(LeakagePolynomial {
            amplitude,
            total_pi: m,
            terms,
            regime: Regime::ShortSeparation,
        })
    }

    /// The storage interval between the pulses outlives the excited state:
    /// after the first pulse only spin-resident (odd n) histories survive,
    /// and the second pulse continues the recursion from that pruned row.
    pub fn long_separation(
        b1_pi: u32,
        b2_pi: u32,
        amplitude: f64,
    ) -> Result<Self, LeakageError> {
        if b1_pi == 0 {
            return Err(LeakageError::LongTNeedsB1);
        }
        let m = b1_pi + b2_pi;
        let mut row: Vec<u64> = pascal_row(b1_pi)?
            .into_iter()
            .enumerate()
            .map(|(n, c)| if n % 2 == 1 { c } else { 0 })
            .collect();
        for step in 1..=b2_pi {
            let mut next = vec![0u64; row.len() + 1];
            for n in 0..next.len() {
                let stay = if n < row.len() { row[n] } else { 0 };
                let hop = if n >= 1 { row[n - 1] } else { 0 };
                next[n] = stay
                    .checked_add(hop)
                    .ok_or(LeakageError::Overflow { m: b1_pi + step })?;
            }
            row = next;
        }
        let terms = row
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(n, c)| Term {
                eta_power: n as u32,
                coefficient: c,
            })
            .collect();
        Ok(LeakagePolynomial {
            amplitude,
            total_pi: m,
            terms,
            regime: Regime::LongSeparation,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn total_pi(&self) -> u32 {
        self.total_pi
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn coefficient_of(&self, eta_power: u32) -> Option<u64> {
        self.terms
            .iter()
            .find(|t| t.eta_power == eta_power)
            .map(|t| t.coefficient)
    }

    /// Coefficients of the excited-state (even n) terms, n ascending.
    pub fn even_coefficients(&self) -> Vec<u64> {
        self.terms
            .iter()
            .filter(|t| t.residence() == Residence::Excited)
            .map(|t| t.coefficient)
            .collect()
    }

    /// Coefficients of the spin-state (odd n) terms, n ascending.
    pub fn odd_coefficients(&self) -> Vec<u64> {
        self.terms
            .iter()
            .filter(|t| t.residence() == Residence::Spin)
            .map(|t| t.coefficient)
            .collect()
    }

    pub fn excited_population(&self, eta: f64) -> Result<f64, LeakageError> {
        validate_eta(eta)?;
        Ok(self.amplitude
            * self
                .terms
                .iter()
                .filter(|t| t.residence() == Residence::Excited)
                .map(|t| t.weight(self.total_pi, eta))
                .sum::<f64>())
    }

    pub fn spin_population(&self, eta: f64) -> Result<f64, LeakageError> {
        validate_eta(eta)?;
        Ok(self.amplitude
            * self
                .terms
                .iter()
                .filter(|t| t.residence() == Residence::Spin)
                .map(|t| t.weight(self.total_pi, eta))
                .sum::<f64>())
    }
}

/// Excited and spin populations after a short-separation pulse pair.
pub fn populations_short_t(
    b1_pi: u32,
    b2_pi: u32,
    amplitude: f64,
    eta: f64,
) -> Result<Populations, LeakageError> {
    let poly = LeakagePolynomial::short_separation(b1_pi, b2_pi, amplitude)?;
    Ok(Populations {
        excited: poly.excited_population(eta)?,
        spin: poly.spin_population(eta)?,
    })
}

/// Excited and spin populations after a long-separation pulse pair.
pub fn populations_long_t(
    b1_pi: u32,
    b2_pi: u32,
    amplitude: f64,
    eta: f64,
) -> Result<Populations, LeakageError> {
    let poly = LeakagePolynomial::long_separation(b1_pi, b2_pi, amplitude)?;
    Ok(Populations {
        excited: poly.excited_population(eta)?,
        spin: poly.spin_population(eta)?,
    })
}

/// Sum of the echo-effective terms (n divisible by 4). The n = 0 term is the
/// population that never left the excited state; excluding it isolates the
/// contribution that actually round-tripped through the spin state.
pub fn echo_effective_amplitude(
    poly: &LeakagePolynomial,
    eta: f64,
    include_zeroth: bool,
) -> Result<f64, LeakageError> {
    validate_eta(eta)?;
    Ok(poly.amplitude
        * poly
            .terms
            .iter()
            .filter(|t| t.is_echo_effective() && (include_zeroth || t.eta_power > 0))
            .map(|t| t.weight(poly.total_pi, eta))
            .sum::<f64>())
}

/// True when a perfect-transfer pulse pair returns the coherence with its
/// original phase: the accumulated pi/2 per pi of area must complete a full
/// turn, so the combined area must be a multiple of 4 pi.
pub fn is_phase_recovered(b1_pi: u32, b2_pi: u32) -> bool {
    (b1_pi + b2_pi) % 4 == 0
}

/// Which quantity a retrieval-efficiency curve reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fig3Mode {
    /// All excited-state population.
    Total,
    /// Echo-effective terms only.
    Effective,
    /// Echo-effective terms without the never-transferred n = 0 term.
    EffectiveNoZeroth,
}

impl Fig3Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Fig3Mode::Total => "total",
            Fig3Mode::Effective => "effective",
            Fig3Mode::EffectiveNoZeroth => "effective-no-zeroth",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fig3Curve {
    pub b2_pi: u32,
    pub values: Vec<f64>,
}

/// Retrieval curves versus transfer efficiency, one per second-pulse area,
/// at fixed first-pulse area and unit amplitude.
#[derive(Clone, Debug)]
pub struct Fig3Dataset {
    pub b1_pi: u32,
    pub mode: Fig3Mode,
    pub etas: Vec<f64>,
    pub curves: Vec<Fig3Curve>,
}

pub fn figure3_dataset(
    b1_pi: u32,
    b2_list: &[u32],
    etas: &[f64],
    mode: Fig3Mode,
) -> Result<Fig3Dataset, LeakageError> {
    if b2_list.is_empty() {
        return Err(LeakageError::EmptyCurveList);
    }
    if etas.is_empty() || etas.iter().any(|&e| validate_eta(e).is_err()) {
        return Err(LeakageError::InvalidEtaGrid);
    }
    let mut curves = Vec::with_capacity(b2_list.len());
    for &b2_pi in b2_list {
        let poly = LeakagePolynomial::short_separation(b1_pi, b2_pi, 1.0)?;
        let values = etas
            .iter()
            .map(|&eta| match mode {
                Fig3Mode::Total => poly.excited_population(eta),
                Fig3Mode::Effective => echo_effective_amplitude(&poly, eta, true),
                Fig3Mode::EffectiveNoZeroth => echo_effective_amplitude(&poly, eta, false),
            })
            .collect::<Result<Vec<f64>, LeakageError>>()?;
        curves.push(Fig3Curve { b2_pi, values });
    }
    Ok(Fig3Dataset {
        b1_pi,
        mode,
        etas: etas.to_vec(),
        curves,
    })
}

/// One row of the long-versus-short comparison of the eta^4 coefficient for
/// a one-pi first pulse. In the long-separation model that coefficient is
/// choose(b2, 3); the short-separation value choose(b2 + 1, 4) is larger by
/// the factor m / 4.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eta4DiagnosticRow {
    pub b2_pi: u32,
    pub total_pi: u32,
    pub eta4_long: u64,
    pub eta4_short: u64,
    pub long_to_short_ratio: f64,
}

pub fn long_t_eta4_diagnostic(b2_list: &[u32]) -> Result<Vec<Eta4DiagnosticRow>, LeakageError> {
    let mut rows = Vec::with_capacity(b2_list.len());
    for &b2_pi in b2_list {
        if b2_pi < 3 {
            return Err(LeakageError::BadIndex { n: 4, m: b2_pi + 1 });
        }
        let long = LeakagePolynomial::long_separation(1, b2_pi, 1.0)?;
        let short = LeakagePolynomial::short_separation(1, b2_pi, 1.0)?;
        let eta4_long = long.coefficient_of(4).unwrap_or(0);
        let eta4_short = short.coefficient_of(4).unwrap_or(0);
        rows.push(Eta4DiagnosticRow {
            b2_pi,
            total_pi: b2_pi + 1,
            eta4_long,
            eta4_short,
            long_to_short_ratio: eta4_long as f64 / eta4_short as f64,
        });
    }
    Ok(rows)
}

/// Phase-recovery report for one pulse-area pair, short separation.
#[derive(Clone, Debug)]
pub struct PredicateSummary {
    pub b1_pi: u32,
    pub b2_pi: u32,
    pub total_pi: u32,
    pub recovered: bool,
    pub effective_terms: Vec<Term>,
}

impl PredicateSummary {
    pub fn evaluate(b1_pi: u32, b2_pi: u32) -> Result<Self, LeakageError> {
        let poly = LeakagePolynomial::short_separation(b1_pi, b2_pi, 1.0)?;
        let effective_terms = poly
            .terms()
            .iter()
            .copied()
            .filter(Term::is_echo_effective)
            .collect();
        Ok(PredicateSummary {
            b1_pi,
            b2_pi,
            total_pi: b1_pi + b2_pi,
            recovered: is_phase_recovered(b1_pi, b2_pi),
            effective_terms,
        })
    }

    pub fn to_json_string(&self) -> String {
        let terms: Vec<String> = self
            .effective_terms
            .iter()
            .map(|t| {
                format!(
                    "    {{ \"n\": {}, \"coefficient\": {}, \"phase_rad\": {} }}",
                    t.eta_power,
                    t.coefficient,
                    crate::fmt::sci9(t.phase_rad())
                )
            })
            .collect();
        format!(
            "{{\n  \"b1_pi\": {},\n  \"b2_pi\": {},\n  \"total_pi\": {},\n  \"recovered\": {},\n  \"effective_terms\": [\n{}\n  ]\n}}\n",
            self.b1_pi,
            self.b2_pi,
            self.total_pi,
            self.recovered,
            terms.join(",\n")
        )
    }
}

/// Exact coefficient table `n, m, B(n, m)` for all `m <= max_m`, CSV.
pub fn write_table1_csv(max_m: u32) -> Result<String, LeakageError> {
    let mut out = String::from("n,m,B_nm\n");
    for m in 0..=max_m {
        for (n, c) in pascal_row(m)?.into_iter().enumerate() {
            out.push_str(&format!("{n},{m},{c}\n"));
        }
    }
    Ok(out)
}

/// Retrieval curves as CSV, one column per second-pulse area.
pub fn write_fig3_csv(dataset: &Fig3Dataset) -> String {
    let mut out = String::from("eta");
    for curve in &dataset.curves {
        out.push_str(&format!(",curve_b2_{}pi", curve.b2_pi));
    }
    out.push('\n');
    for (i, &eta) in dataset.etas.iter().enumerate() {
        out.push_str(&crate::fmt::sci9(eta));
        for curve in &dataset.curves {
            out.push(',');
            out.push_str(&crate::fmt::sci9(curve.values[i]));
        }
        out.push('\n');
    }
    out
}

/// Long-versus-short eta^4 comparison as CSV.
pub fn write_long_t_diagnostic_csv(rows: &[Eta4DiagnosticRow]) -> String {
    let mut out = String::from("b2_pi,total_pi,eta4_long,eta4_short,long_to_short_ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.b2_pi,
            r.total_pi,
            r.eta4_long,
            r.eta4_short,
            crate::fmt::sci9(r.long_to_short_ratio)
        ));
    }
    out
}

/// Phase of a term with n completed transfers, wrapped to [0, 2*pi).
pub fn term_phase(n: u32) -> f64 {
    (Term {
        eta_power: n,
        coefficient: 1,
    })
    .phase_rad()
}

/// Smallest positive total area (in pi) that recovers the phase.
pub const PHASE_RECOVERY_PERIOD_PI: u32 = 4;

const _: () = assert!(PHASE_RECOVERY_PERIOD_PI as f64 * FRAC_PI_2 == TAU);
