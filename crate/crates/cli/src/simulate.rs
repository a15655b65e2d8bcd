//! `simulate`: one ensemble run of a scenario file. Writes timeseries.csv,
//! echo.json and manifest.json into the output directory. All validation
//! happens before anything is created on disk.

use crate::{io_error, manifest, map_config, map_ensemble, Cli, CliError};
use echo_core::ensemble::{
    default_echo_window, echo_metrics, run_ensemble, write_timeseries_csv, DetuningGrid,
    RecordOptions,
};
use echo_core::pulse::parse_sequence_config;
use echo_core::quantum::DensityMatrix;
use std::fs;
use std::path::Path;
use std::time::Instant;

pub fn run(cli: &Cli, scenario: &Path) -> Result<(), CliError> {
    let started = Instant::now();
    let text = fs::read_to_string(scenario).map_err(|e| {
        CliError::Config(format!("cannot read scenario {}: {e}", scenario.display()))
    })?;
    let sequence = parse_sequence_config(&text).map_err(map_config)?;
    let grid =
        DetuningGrid::gaussian(cli.fwhm_rad(), cli.classes, cli.span_sigmas).map_err(map_ensemble)?;
    let record = RecordOptions {
        detunings: cli.record_detunings_rad(),
    };
    let result = run_ensemble(
        &DensityMatrix::ground(),
        &sequence,
        &grid,
        &cli.decays(),
        &cli.plan(),
        &record,
    )
    .map_err(map_ensemble)?;
    let report = echo_metrics(&result, default_echo_window(&sequence)).map_err(map_ensemble)?;
    let timeseries = write_timeseries_csv(&result).map_err(map_ensemble)?;

    let mut manifest = manifest::new_manifest(
        scenario,
        &text,
        sequence.scenario(),
        result.grid,
        cli,
    );
    manifest.health = Some(result.health);
    manifest.outputs = vec![
        "timeseries.csv".to_string(),
        "echo.json".to_string(),
        "manifest.json".to_string(),
    ];

    fs::create_dir_all(&cli.output).map_err(io_error("creating output directory"))?;
    let write = |name: &str, data: &str| {
        fs::write(cli.output.join(name), data).map_err(io_error("writing dataset"))
    };
    write("timeseries.csv", &timeseries)?;
    write("echo.json", &report.to_json_string())?;
    manifest.wall_ms = started.elapsed().as_millis();
    write("manifest.json", &manifest.to_json_string())?;

    if report.no_echo {
        println!(
            "no echo found in [{:.3e}, {:.3e}] s; datasets in {}",
            report.window_s.0,
            report.window_s.1,
            cli.output.display()
        );
    } else {
        println!(
            "echo |P| = {:.6e} at t = {:.6e} s; datasets in {}",
            report.peak_abs_polarization,
            report.peak_time_s,
            cli.output.display()
        );
    }
    Ok(())
}
