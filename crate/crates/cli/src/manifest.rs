//! Run manifest written beside each simulation dataset. Everything needed
//! to reproduce the run, plus numerical health, in one JSON document.

use echo_core::ensemble::{GridSummary, Health};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Serialize)]
pub struct DecaySummary {
    pub pop_31: f64,
    pub pop_32: f64,
    pub pop_21: f64,
    pub coh_31: f64,
    pub coh_32: f64,
    pub coh_21: f64,
}

#[derive(Serialize)]
pub struct IntegratorSummary {
    pub dt_pulse_s: f64,
    pub dt_idle_s: f64,
    pub snapshot_s: f64,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub scenario_path: String,
    pub scenario_sha256: String,
    pub scenario_name: String,
    pub grid: GridSummary,
    pub integrator: IntegratorSummary,
    pub decay_hz: DecaySummary,
    pub record_detunings_hz: Vec<f64>,
    pub outputs: Vec<String>,
    pub health: Option<Health>,
    pub wall_ms: u128,
}

impl RunManifest {
    pub fn to_json_string(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("manifest serialization cannot fail");
        text.push('\n');
        text
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn new_manifest(
    scenario_path: &Path,
    scenario_text: &str,
    scenario_name: &str,
    grid: GridSummary,
    cli: &crate::Cli,
) -> RunManifest {
    RunManifest {
        tool: "echosim".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: std::env::args().collect(),
        scenario_path: scenario_path.display().to_string(),
        scenario_sha256: sha256_hex(scenario_text.as_bytes()),
        scenario_name: scenario_name.to_string(),
        grid,
        integrator: IntegratorSummary {
            dt_pulse_s: cli.dt_pulse,
            dt_idle_s: cli.dt_idle,
            snapshot_s: cli.dt_snapshot,
        },
        decay_hz: cli.decays_hz(),
        record_detunings_hz: cli.record_detunings.clone(),
        outputs: Vec::new(),
        health: None,
        wall_ms: 0,
    }
}
