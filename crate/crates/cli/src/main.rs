//! `echosim`: drives the ensemble simulator and the closed-form transfer
//! model, writing machine-readable datasets into an output directory.
//!
//! Exit codes: 0 success, 2 configuration problem, 3 numerical divergence,
//! 4 pulse-overlap geometry, 1 anything input/output.

mod analytic;
mod manifest;
mod simulate;
mod sweep;

use clap::{Parser, Subcommand, ValueEnum};
use echo_core::ensemble::EnsembleError;
use echo_core::pulse::{ConfigError, SequenceError};
use echo_core::quantum::{DecayRates, StepPlan};
use std::f64::consts::TAU;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Geometry(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Geometry(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

/// Message with the full source chain attached. Sources whose text is
/// already embedded by the outer Display are not repeated.
fn chain(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut cur = e.source();
    while let Some(c) = cur {
        let text = c.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        cur = c.source();
    }
    msg
}

pub fn map_ensemble(e: EnsembleError) -> CliError {
    let msg = chain(&e);
    match e {
        EnsembleError::ClassDiverged { .. } | EnsembleError::CoherenceBound(_) => {
            CliError::Divergence(msg)
        }
        EnsembleError::SweepOverlap { .. }
        | EnsembleError::Sequence(SequenceError::Overlap { .. }) => CliError::Geometry(msg),
        _ => CliError::Config(msg),
    }
}

pub fn map_config(e: ConfigError) -> CliError {
    let msg = chain(&e);
    match e {
        ConfigError::Invalid(SequenceError::Overlap { .. }) => CliError::Geometry(msg),
        _ => CliError::Config(msg),
    }
}

pub fn io_error(context: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{context}: {e}"))
}

#[derive(Parser)]
#[command(
    name = "echosim",
    version,
    about = "Photon-echo ensemble simulator and deshelling-transfer model"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for datasets
    #[arg(long, global = true, default_value = "out")]
    pub output: PathBuf,

    /// Number of detuning classes (odd)
    #[arg(long, global = true, default_value_t = 257)]
    pub classes: usize,

    /// Half-width of the detuning grid in standard deviations
    #[arg(long, global = true, default_value_t = 3.0)]
    pub span_sigmas: f64,

    /// Inhomogeneous full width at half maximum, Hz
    #[arg(long, global = true, default_value_t = 680e3)]
    pub fwhm: f64,

    /// Integrator step target inside pulses, s
    #[arg(long, global = true, default_value_t = 0.5e-9)]
    pub dt_pulse: f64,

    /// Integrator step target between pulses, s
    #[arg(long, global = true, default_value_t = 5e-9)]
    pub dt_idle: f64,

    /// Sample spacing of the recorded time series, s
    #[arg(long, global = true, default_value_t = 50e-9)]
    pub dt_snapshot: f64,

    /// Extra detunings (Hz, comma separated) recorded as full single-class
    /// trajectories alongside the ensemble
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    pub record_detunings: Vec<f64>,

    /// Population decay 3->1, Hz
    #[arg(long, global = true, default_value_t = 2e3)]
    pub decay_pop_31: f64,

    /// Population decay 3->2, Hz
    #[arg(long, global = true, default_value_t = 2e3)]
    pub decay_pop_32: f64,

    /// Population decay 2->1, Hz
    #[arg(long, global = true, default_value_t = 0.0)]
    pub decay_pop_21: f64,

    /// Coherence decay on 1-3, Hz
    #[arg(long, global = true, default_value_t = 2e3)]
    pub decay_coh_31: f64,

    /// Coherence decay on 2-3, Hz
    #[arg(long, global = true, default_value_t = 2e3)]
    pub decay_coh_32: f64,

    /// Coherence decay on 1-2, Hz
    #[arg(long, global = true, default_value_t = 0.0)]
    pub decay_coh_21: f64,
}

impl Cli {
    pub fn decays(&self) -> DecayRates {
        DecayRates {
            pop_31: TAU * self.decay_pop_31,
            pop_32: TAU * self.decay_pop_32,
            pop_21: TAU * self.decay_pop_21,
            coh_31: TAU * self.decay_coh_31,
            coh_32: TAU * self.decay_coh_32,
            coh_21: TAU * self.decay_coh_21,
        }
    }

    pub fn decays_hz(&self) -> manifest::DecaySummary {
        manifest::DecaySummary {
            pop_31: self.decay_pop_31,
            pop_32: self.decay_pop_32,
            pop_21: self.decay_pop_21,
            coh_31: self.decay_coh_31,
            coh_32: self.decay_coh_32,
            coh_21: self.decay_coh_21,
        }
    }

    pub fn plan(&self) -> StepPlan {
        StepPlan {
            dt_pulse: self.dt_pulse,
            dt_idle: self.dt_idle,
            snapshot: self.dt_snapshot,
        }
    }

    pub fn fwhm_rad(&self) -> f64 {
        TAU * self.fwhm
    }

    pub fn record_detunings_rad(&self) -> Vec<f64> {
        self.record_detunings.iter().map(|h| TAU * h).collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a pulse-sequence scenario over the detuning ensemble
    Simulate {
        /// Scenario JSON file
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Rerun a scenario for a list of B2 pulse areas at fixed Rabi frequency
    SweepB2 {
        /// Scenario JSON file containing B1, B2 and R pulses
        #[arg(long)]
        scenario: PathBuf,
        /// B2 areas in units of pi, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        areas_pi: Vec<f64>,
        /// Detuning (Hz) of the probe class recorded for phase tracking
        #[arg(long, default_value_t = 30e3, allow_negative_numbers = true)]
        probe_detuning: f64,
    },
    /// Closed-form transfer-model datasets
    Analytic {
        #[command(subcommand)]
        what: Analytic,
    },
}

#[derive(Subcommand)]
enum Analytic {
    /// Exact transfer-coefficient table
    Table1 {
        /// Largest total pulse area (units of pi) to tabulate
        #[arg(long, default_value_t = 10)]
        max_m: u32,
    },
    /// Retrieval-efficiency curves versus transfer efficiency
    Fig3 {
        /// First deshelling area, units of pi
        #[arg(long, default_value_t = 3)]
        b1: u32,
        /// Second deshelling areas, units of pi, comma separated
        #[arg(long, value_delimiter = ',', required = true)]
        b2: Vec<u32>,
        /// Efficiency grid as start:end:step, or one value
        #[arg(long, default_value = "0:1:0.01")]
        eta: String,
        /// Which curves to emit
        #[arg(long, value_enum, default_value_t = ModeArg::All)]
        mode: ModeArg,
    },
    /// Phase-recovery verdict for one pulse-area pair
    Predicate {
        /// First deshelling area, units of pi
        #[arg(long)]
        b1: u32,
        /// Second deshelling area, units of pi
        #[arg(long)]
        b2: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    All,
    Total,
    Effective,
    EffectiveNoZeroth,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { scenario } => simulate::run(cli, scenario),
        Command::SweepB2 {
            scenario,
            areas_pi,
            probe_detuning,
        } => sweep::run(cli, scenario, areas_pi, *probe_detuning),
        Command::Analytic { what } => match what {
            Analytic::Table1 { max_m } => analytic::table1(cli, *max_m),
            Analytic::Fig3 { b1, b2, eta, mode } => analytic::fig3(cli, *b1, b2, eta, *mode),
            Analytic::Predicate { b1, b2 } => analytic::predicate(cli, *b1, *b2),
        },
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
