//! `sweep-b2`: rerun one scenario over a list of B2 areas. Writes sweep.csv
//! and manifest.json. Every area is validated before the first run starts.

use crate::{io_error, manifest, map_config, map_ensemble, Cli, CliError};
use echo_core::ensemble::{sweep_b2_area, write_sweep_csv, DetuningGrid};
use echo_core::pulse::parse_sequence_config;
use echo_core::quantum::DensityMatrix;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::time::Instant;

pub fn run(
    cli: &Cli,
    scenario: &Path,
    areas_pi: &[f64],
    probe_detuning_hz: f64,
) -> Result<(), CliError> {
    let started = Instant::now();
    let text = fs::read_to_string(scenario).map_err(|e| {
        CliError::Config(format!("cannot read scenario {}: {e}", scenario.display()))
    })?;
    let sequence = parse_sequence_config(&text).map_err(map_config)?;
    let grid =
        DetuningGrid::gaussian(cli.fwhm_rad(), cli.classes, cli.span_sigmas).map_err(map_ensemble)?;
    let areas_rad: Vec<f64> = areas_pi.iter().map(|k| k * PI).collect();
    let rows = sweep_b2_area(
        &sequence,
        &areas_rad,
        &grid,
        &cli.decays(),
        &DensityMatrix::ground(),
        &cli.plan(),
        TAU * probe_detuning_hz,
    )
    .map_err(map_ensemble)?;
    let csv = write_sweep_csv(&rows);

    let mut manifest = manifest::new_manifest(
        scenario,
        &text,
        sequence.scenario(),
        grid.summary(),
        cli,
    );
    manifest.outputs = vec!["sweep.csv".to_string(), "manifest.json".to_string()];

    fs::create_dir_all(&cli.output).map_err(io_error("creating output directory"))?;
    fs::write(cli.output.join("sweep.csv"), &csv).map_err(io_error("writing dataset"))?;
    manifest.wall_ms = started.elapsed().as_millis();
    fs::write(cli.output.join("manifest.json"), manifest.to_json_string())
        .map_err(io_error("writing dataset"))?;

    println!(
        "swept {} B2 areas; datasets in {}",
        rows.len(),
        cli.output.display()
    );
    Ok(())
}
